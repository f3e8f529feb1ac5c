//! Trajectory propagation in the inertial frame `N` around a body rotating
//! uniformly about a fixed axis. Gravity is evaluated in the body frame `B`:
//! `r_B = Rᵀ r_N`, `a_N = R a_B(r_B)`.

pub mod dopri;

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Rotation3, Unit, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::field::{acceleration_with, potential, FieldOptions};
use crate::mascon::{mascon_acceleration, mascon_potential, PointMassSet};
use crate::shcoeff::SHModel;
use dopri::{integrate, IntegrationError, State, Step, Tolerances};

/// Default relative tolerance.
pub const DEFAULT_RTOL: f64 = 1e-10;
/// Absolute floor on position components, m.
pub const POSITION_FLOOR: f64 = 1e-3;
/// Absolute floor on velocity components, m/s.
pub const VELOCITY_FLOOR: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("step size underflow at t = {} s", last.t)]
    StepUnderflow { last: StateVector },
    #[error("step budget exhausted at t = {} s", last.t)]
    TooManySteps { last: StateVector },
    #[error("gravity evaluation failed at t = {} s: {msg}", last.t)]
    Gravity { msg: String, last: StateVector },
}

impl PropagationError {
    /// Last state accepted before the failure, when there is one.
    pub fn last_state(&self) -> Option<&StateVector> {
        match self {
            Self::InvalidInput(_) => None,
            Self::StepUnderflow { last } | Self::TooManySteps { last } | Self::Gravity { last, .. } => Some(last),
        }
    }
}

/// Uniform rotation of frame `B` relative to `N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationModel {
    axis: Unit<Vector3<f64>>,
    /// Sidereal period in s; infinite for a non-rotating body.
    period: f64,
    theta0: f64,
}

impl RotationModel {
    pub fn new(axis: Vector3<f64>, period: f64, theta0: f64) -> Result<Self, PropagationError> {
        let n = axis.norm();
        if !(n.is_finite() && n > 0.0) {
            return Err(PropagationError::InvalidInput("rotation axis must be non-zero".into()));
        }
        if !(period > 0.0) || period.is_nan() {
            return Err(PropagationError::InvalidInput(format!("period {period} must be positive")));
        }
        if !theta0.is_finite() {
            return Err(PropagationError::InvalidInput("theta0 must be finite".into()));
        }
        Ok(Self {
            axis: Unit::new_normalize(axis),
            period,
            theta0,
        })
    }

    /// Frames coincide at all times.
    pub fn fixed() -> Self {
        Self {
            axis: Vector3::z_axis(),
            period: f64::INFINITY,
            theta0: 0.0,
        }
    }

    pub fn axis(&self) -> Vector3<f64> {
        self.axis.into_inner()
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn theta0(&self) -> f64 {
        self.theta0
    }

    /// Spin rate, rad/s (zero when the period is infinite).
    pub fn rate(&self) -> f64 {
        if self.period.is_finite() {
            TAU / self.period
        } else {
            0.0
        }
    }

    pub fn angular_velocity(&self) -> Vector3<f64> {
        self.axis.into_inner() * self.rate()
    }

    pub fn angle(&self, t: f64) -> f64 {
        if self.period.is_finite() {
            // reduce the revolution count first to keep the angle small
            let turns = t / self.period;
            self.theta0 + TAU * (turns - turns.floor())
        } else {
            self.theta0
        }
    }
}

/// Rotation taking body-frame components to inertial components at `t`.
pub fn body_to_inertial(rot: &RotationModel, t: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&rot.axis, rot.angle(t)).into_inner()
}

/// Inertial position and velocity at time `t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub t: f64,
    pub r: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl StateVector {
    pub fn new(t: f64, r: Vector3<f64>, v: Vector3<f64>) -> Self {
        Self { t, r, v }
    }

    fn from_state(t: f64, y: &State) -> Self {
        Self {
            t,
            r: Vector3::new(y[0], y[1], y[2]),
            v: Vector3::new(y[3], y[4], y[5]),
        }
    }

    fn to_state(&self) -> State {
        State::from_column_slice(&[self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z])
    }

    fn is_finite(&self) -> bool {
        self.t.is_finite() && self.r.iter().chain(self.v.iter()).all(|c| c.is_finite())
    }
}

/// Gravity in the body frame.
pub trait GravitySource: Sync {
    fn acceleration(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, String>;
    /// Potential with the positive sign convention (`μ/r` far away).
    fn potential(&self, x: &Vector3<f64>) -> Result<f64, String>;
    fn brillouin_radius(&self) -> f64;
}

/// Spherical-harmonics gravity.
#[derive(Debug, Clone)]
pub struct ShGravity<'a> {
    pub model: &'a SHModel,
    pub options: FieldOptions,
}

impl<'a> ShGravity<'a> {
    pub fn new(model: &'a SHModel) -> Self {
        Self {
            model,
            options: FieldOptions::default(),
        }
    }
}

impl GravitySource for ShGravity<'_> {
    fn acceleration(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, String> {
        acceleration_with(self.model, x, self.brillouin_radius(), self.options)
            .map(|s| s.acceleration)
            .map_err(|e| e.to_string())
    }

    fn potential(&self, x: &Vector3<f64>) -> Result<f64, String> {
        potential(self.model, x, self.brillouin_radius())
            .map(|s| s.potential)
            .map_err(|e| e.to_string())
    }

    fn brillouin_radius(&self) -> f64 {
        self.model.brillouin_radius()
    }
}

/// Point-mass gravity.
#[derive(Debug, Clone)]
pub struct MasconGravity<'a> {
    pub set: &'a PointMassSet,
    pub g: f64,
    pub brillouin_radius: f64,
}

impl GravitySource for MasconGravity<'_> {
    fn acceleration(&self, x: &Vector3<f64>) -> Result<Vector3<f64>, String> {
        mascon_acceleration(self.set, x, self.g).map_err(|e| e.to_string())
    }

    fn potential(&self, x: &Vector3<f64>) -> Result<f64, String> {
        mascon_potential(self.set, x, self.g).map_err(|e| e.to_string())
    }

    fn brillouin_radius(&self) -> f64 {
        self.brillouin_radius
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagationOptions {
    pub rtol: f64,
    pub position_floor: f64,
    pub velocity_floor: f64,
    /// Spacing of output samples, s. The final time is always sampled.
    /// Steps never exceed it, which keeps the cubic Hermite samples at the
    /// integrator's accuracy.
    pub sample_interval: f64,
    pub max_steps: usize,
}

impl Default for PropagationOptions {
    fn default() -> Self {
        Self {
            rtol: DEFAULT_RTOL,
            position_floor: POSITION_FLOOR,
            velocity_floor: VELOCITY_FLOOR,
            sample_interval: 60.0,
            max_steps: 10_000_000,
        }
    }
}

/// One output sample: the inertial state plus its body-frame view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub state: StateVector,
    pub r_body: Vector3<f64>,
    /// Velocity relative to the rotating frame, body components.
    pub v_body: Vector3<f64>,
    pub inside_brillouin: bool,
}

impl TrajectorySample {
    fn new(state: StateVector, rot: &RotationModel, brillouin_r: f64) -> Self {
        let rt = body_to_inertial(rot, state.t).transpose();
        let r_body = rt * state.r;
        let v_body = rt * (state.v - rot.angular_velocity().cross(&state.r));
        Self {
            state,
            r_body,
            v_body,
            inside_brillouin: r_body.norm() < brillouin_r,
        }
    }
}

/// Result of a propagation: samples plus integrator statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub accepted_steps: usize,
    /// Largest weighted local error estimate of any accepted step.
    pub max_step_error: f64,
}

impl Trajectory {
    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least one sample")
    }
}

/// Integrates from `state0` to `t_end` with samples every
/// `opts.sample_interval` seconds after `state0.t`.
pub fn propagate(
    state0: &StateVector,
    t_end: f64,
    gravity: &dyn GravitySource,
    rot: &RotationModel,
    opts: &PropagationOptions,
) -> Result<Trajectory, PropagationError> {
    if !state0.is_finite() {
        return Err(PropagationError::InvalidInput("initial state is not finite".into()));
    }
    if !(t_end.is_finite() && t_end >= state0.t) {
        return Err(PropagationError::InvalidInput(format!(
            "end time {t_end} must be finite and not before {}",
            state0.t
        )));
    }
    if !(opts.rtol > 0.0 && opts.sample_interval > 0.0) {
        return Err(PropagationError::InvalidInput(
            "tolerance and sample interval must be positive".into(),
        ));
    }

    let br = gravity.brillouin_radius();
    let rhs = |t: f64, y: &State| -> Result<State, String> {
        let r_n = Vector3::new(y[0], y[1], y[2]);
        let m = body_to_inertial(rot, t);
        let a_b = gravity.acceleration(&(m.transpose() * r_n))?;
        let a_n = m * a_b;
        Ok(State::from_column_slice(&[y[3], y[4], y[5], a_n.x, a_n.y, a_n.z]))
    };
    let tol = Tolerances {
        rtol: opts.rtol,
        atol: State::from_column_slice(&[
            opts.position_floor,
            opts.position_floor,
            opts.position_floor,
            opts.velocity_floor,
            opts.velocity_floor,
            opts.velocity_floor,
        ]),
        h_max: opts.sample_interval,
    };

    let t0 = state0.t;
    let mut samples = vec![TrajectorySample::new(*state0, rot, br)];
    let mut next_k = 1usize;
    let mut accepted = 0usize;
    let mut max_err = 0.0f64;
    let mut last = *state0;
    let sample_time = |k: usize| t0 + k as f64 * opts.sample_interval;
    let on_step = |s: &Step| {
        accepted += 1;
        max_err = max_err.max(s.err);
        while sample_time(next_k) < s.t1 {
            let t = sample_time(next_k);
            let st = StateVector::from_state(t, &s.interpolate(t));
            samples.push(TrajectorySample::new(st, rot, br));
            next_k += 1;
        }
        last = StateVector::from_state(s.t1, &s.y1);
    };
    let result = integrate(rhs, t0, state0.to_state(), t_end, &tol, opts.max_steps, on_step);
    match result {
        Ok(()) => {}
        Err(IntegrationError::StepUnderflow { .. }) => return Err(PropagationError::StepUnderflow { last }),
        Err(IntegrationError::TooManySteps { .. }) => return Err(PropagationError::TooManySteps { last }),
        Err(IntegrationError::Rhs { source, .. }) => return Err(PropagationError::Gravity { msg: source, last }),
    }
    if t_end > t0 {
        samples.push(TrajectorySample::new(last, rot, br));
    }
    Ok(Trajectory {
        samples,
        accepted_steps: accepted,
        max_step_error: max_err,
    })
}

/// Runs independent propagations in parallel; results keep input order.
pub fn propagate_many(
    jobs: &[(&StateVector, f64, &dyn GravitySource, &RotationModel, &PropagationOptions)],
) -> Vec<Result<Trajectory, PropagationError>> {
    jobs.par_iter()
        .map(|(s, t, g, r, o)| propagate(s, *t, *g, r, o))
        .collect()
}

/// Specific energy `v²/2 - U` in the inertial frame of a non-rotating body.
pub fn specific_energy(sample: &TrajectorySample, gravity: &dyn GravitySource) -> Result<f64, String> {
    Ok(0.5 * sample.state.v.norm_squared() - gravity.potential(&sample.r_body)?)
}

/// Jacobi constant `v_B²/2 - U - ω²η²/2` of the uniformly rotating frame.
pub fn jacobi_constant(
    sample: &TrajectorySample,
    gravity: &dyn GravitySource,
    rot: &RotationModel,
) -> Result<f64, String> {
    let axis = rot.axis();
    let r = sample.r_body;
    let eta2 = (r - axis * axis.dot(&r)).norm_squared();
    let w = rot.rate();
    Ok(0.5 * sample.v_body.norm_squared() - gravity.potential(&r)? - 0.5 * w * w * eta2)
}

/// Per-sample `(t, |Δr|, |Δv|)` between two trajectories with equal sample
/// times.
pub fn divergence(a: &Trajectory, b: &Trajectory) -> Result<Vec<(f64, f64, f64)>, PropagationError> {
    if a.samples.len() != b.samples.len() {
        return Err(PropagationError::InvalidInput("trajectories have different sample counts".into()));
    }
    a.samples
        .iter()
        .zip(&b.samples)
        .map(|(x, y)| {
            if x.state.t != y.state.t {
                return Err(PropagationError::InvalidInput(format!(
                    "sample times differ: {} vs {}",
                    x.state.t, y.state.t
                )));
            }
            Ok((
                x.state.t,
                (x.state.r - y.state.r).norm(),
                (x.state.v - y.state.v).norm(),
            ))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::{tri_index, tri_len};
    use rand::{Rng, SeedableRng};

    #[test]
    fn rotation_examples() {
        let rot = RotationModel::new(Vector3::z(), 3600.0, 0.0).unwrap();
        assert_eq!(body_to_inertial(&rot, 0.0), Matrix3::identity());
        let full = body_to_inertial(&rot, 3600.0);
        assert!((full - Matrix3::identity()).abs().max() < 1e-12);
        let q = body_to_inertial(&rot, 900.0) * Vector3::x();
        assert!((q - Vector3::y()).norm() < 1e-12);
        assert_eq!(body_to_inertial(&RotationModel::fixed(), 1e9), Matrix3::identity());
        assert!(RotationModel::new(Vector3::zeros(), 1.0, 0.0).is_err());
        assert!(RotationModel::new(Vector3::z(), 0.0, 0.0).is_err());
        assert!(RotationModel::new(Vector3::z(), f64::INFINITY, 0.0).is_ok());
    }

    #[test]
    fn rotation_is_orthonormal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let rot = RotationModel::new(Vector3::new(0.2, -0.3, 1.0), 18_972.0, 0.4).unwrap();
        for _ in 0..1000 {
            let t = rng.gen_range(-1e6..1e6);
            let m = body_to_inertial(&rot, t);
            assert!((m * m.transpose() - Matrix3::identity()).abs().max() < 1e-14);
        }
    }

    fn circular(mu: f64, a: f64) -> StateVector {
        StateVector::new(0.0, Vector3::new(a, 0.0, 0.0), Vector3::new(0.0, (mu / a).sqrt(), 0.0))
    }

    #[test]
    fn kepler_period() {
        let mu = 4.46e5;
        let a = 40_000.0;
        let model = SHModel::point_mass(mu, 16_000.0, 0);
        let period = TAU * (a * a * a / mu).sqrt();
        let s0 = circular(mu, a);
        let traj = propagate(
            &s0,
            period,
            &ShGravity::new(&model),
            &RotationModel::new(Vector3::z(), 5.27 * 3600.0, 0.0).unwrap(),
            &PropagationOptions::default(),
        )
        .unwrap();
        let end = traj.last().state;
        assert_eq!(end.t, period);
        assert!((end.r - s0.r).norm() < 1e-8 * TAU * a, "{}", (end.r - s0.r).norm());
        // samples are on the cadence and end exactly at t_end
        assert_eq!(traj.samples[1].state.t, 60.0);
        let n = traj.samples.len();
        assert!(traj.samples[n - 2].state.t < period);
    }

    #[test]
    fn dense_output_matches_kepler_circle() {
        let mu = 1.0e6;
        let a = 30_000.0;
        let model = SHModel::point_mass(mu, 1.0, 0);
        let w = (mu / (a * a * a)).sqrt();
        let traj = propagate(
            &circular(mu, a),
            20_000.0,
            &ShGravity::new(&model),
            &RotationModel::fixed(),
            &PropagationOptions::default(),
        )
        .unwrap();
        for s in &traj.samples {
            let want = Vector3::new((w * s.state.t).cos(), (w * s.state.t).sin(), 0.0) * a;
            assert!((s.state.r - want).norm() < 1e-3, "t={}", s.state.t);
        }
    }

    fn lumpy_model() -> SHModel {
        let nmax = 4;
        let mut c = vec![0.0; tri_len(nmax)];
        let mut s = vec![0.0; tri_len(nmax)];
        c[0] = 1.0;
        c[tri_index(2, 0)] = -0.05;
        c[tri_index(2, 2)] = 0.08;
        s[tri_index(3, 1)] = 0.01;
        c[tri_index(4, 3)] = -0.004;
        SHModel::new(4.46e5, 16_000.0, nmax, c, s, None).unwrap()
    }

    #[test]
    fn energy_conserved_without_rotation() {
        let model = lumpy_model();
        let g = ShGravity::new(&model);
        let s0 = StateVector::new(0.0, Vector3::new(710.0, -45_000.0, 0.0), Vector3::new(2.24, -0.035, 2.21));
        let traj = propagate(&s0, 86_400.0, &g, &RotationModel::fixed(), &PropagationOptions::default()).unwrap();
        let e0 = specific_energy(&traj.samples[0], &g).unwrap();
        for s in &traj.samples {
            let e = specific_energy(s, &g).unwrap();
            assert!((e - e0).abs() < 1e-9 * e0.abs(), "t={} drift={}", s.state.t, (e - e0) / e0);
        }
    }

    #[test]
    fn jacobi_constant_conserved() {
        let model = lumpy_model();
        let g = ShGravity::new(&model);
        let rot = RotationModel::new(Vector3::z(), 5.27 * 3600.0, 0.0).unwrap();
        let s0 = StateVector::new(0.0, Vector3::new(710.0, -45_000.0, 0.0), Vector3::new(2.24, -0.035, 2.21));
        let traj = propagate(&s0, 86_400.0, &g, &rot, &PropagationOptions::default()).unwrap();
        let c0 = jacobi_constant(&traj.samples[0], &g, &rot).unwrap();
        for s in &traj.samples {
            let c = jacobi_constant(s, &g, &rot).unwrap();
            assert!((c - c0).abs() < 1e-7 * c0.abs());
        }
    }

    #[test]
    fn tolerance_halving_is_consistent() {
        let model = lumpy_model();
        let g = ShGravity::new(&model);
        let rot = RotationModel::new(Vector3::z(), 5.27 * 3600.0, 0.0).unwrap();
        let s0 = StateVector::new(0.0, Vector3::new(710.0, -45_000.0, 0.0), Vector3::new(2.24, -0.035, 2.21));
        let run = |rtol: f64| {
            let opts = PropagationOptions {
                rtol,
                ..Default::default()
            };
            propagate(&s0, 86_400.0, &g, &rot, &opts).unwrap()
        };
        let a = run(1e-10);
        let b = run(5e-11);
        let d = (a.last().state.r - b.last().state.r).norm();
        // global error bound: tolerance times the distance scale, inflated
        // by the number of steps
        let bound = 1e-10 * a.last().state.r.norm() * a.accepted_steps as f64;
        assert!(d < bound, "{d} vs {bound}");
    }

    #[test]
    fn collision_with_origin_reports_last_state() {
        let model = SHModel::point_mass(1.0e6, 1.0, 0);
        let s0 = StateVector::new(0.0, Vector3::new(1000.0, 0.0, 0.0), Vector3::zeros());
        let err = propagate(
            &s0,
            1e6,
            &ShGravity::new(&model),
            &RotationModel::fixed(),
            &PropagationOptions::default(),
        )
        .unwrap_err();
        let last = err.last_state().unwrap();
        assert!(last.t > 0.0 && last.r.x < 1000.0);
    }

    #[test]
    fn rejects_bad_input() {
        let model = SHModel::point_mass(1.0, 1.0, 0);
        let g = ShGravity::new(&model);
        let s0 = StateVector::new(10.0, Vector3::new(5.0, 0.0, 0.0), Vector3::zeros());
        let rot = RotationModel::fixed();
        assert!(propagate(&s0, 5.0, &g, &rot, &PropagationOptions::default()).is_err());
        let bad = StateVector::new(0.0, Vector3::new(f64::NAN, 0.0, 0.0), Vector3::zeros());
        assert!(propagate(&bad, 5.0, &g, &rot, &PropagationOptions::default()).is_err());
    }

    #[test]
    fn body_frame_velocity_of_corotating_orbit() {
        // a synchronous circular orbit is at rest in the body frame
        let mu = 4.46e5;
        let period = 5.27 * 3600.0;
        let a = (mu * (period / TAU).powi(2)).cbrt();
        let rot = RotationModel::new(Vector3::z(), period, 0.3).unwrap();
        let model = SHModel::point_mass(mu, 1.0, 0);
        let traj = propagate(&circular(mu, a), 3600.0, &ShGravity::new(&model), &rot, &PropagationOptions::default())
            .unwrap();
        for s in &traj.samples {
            assert!(s.v_body.norm() < 1e-8);
            assert!((s.r_body - traj.samples[0].r_body).norm() < 1e-4);
        }
    }
}
