//! Potential and acceleration of an [`SHModel`] in the body-fixed frame.
//!
//! ```text
//! U = (μ/r) Σ_n Σ_m (R0/r)^n P̄nm(sin φ) (C̄nm cos mλ + S̄nm sin mλ)
//! ```
//!
//! The acceleration is assembled from `∂U/∂r`, `∂U/∂λ` and `∂U/∂φ` through
//! the Cartesian chain rule, with `η = sqrt(x² + y²)`:
//!
//! ```text
//! a_x = (U_r/r - z U_φ/(r² η)) x - U_λ y/η²
//! a_y = (U_r/r - z U_φ/(r² η)) y + U_λ x/η²
//! a_z = U_r z/r + η U_φ/r²
//! ```
//!
//! Close to the rotation axis (`η < 1e-9 r`) the analytic limit is used:
//! only `m = 0` terms survive in `a_z` and only `m = 1` terms in `a_x, a_y`.

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::legendre::{dphi_from_table, legendre_table_phi, norm_factor};
use crate::shcoeff::SHModel;

/// Relative distance from the z axis below which the pole limit is used.
pub const POLE_GUARD: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FieldError {
    #[error("field is singular at the origin")]
    SingularPoint,
    #[error("non-finite query point")]
    NonFinite,
}

/// Spherical coordinates of a body-frame point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoords {
    pub r: f64,
    /// Longitude `atan2(y, x)`, rad.
    pub lambda: f64,
    /// Latitude, rad.
    pub phi: f64,
    /// `sin φ`.
    pub u: f64,
    /// Distance from the z axis, m.
    pub eta: f64,
}

impl SphericalCoords {
    pub fn from_cartesian(x: &Vector3<f64>) -> Self {
        let eta = x.x.hypot(x.y);
        let r = eta.hypot(x.z);
        let phi = x.z.atan2(eta);
        Self {
            r,
            lambda: x.y.atan2(x.x),
            phi,
            u: if r > 0.0 { (x.z / r).clamp(-1.0, 1.0) } else { 0.0 },
            eta,
        }
    }
}

/// Potential (m²/s²) and acceleration (m/s²) at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSample {
    pub potential: f64,
    pub acceleration: Vector3<f64>,
    /// The point lies inside the Brillouin sphere, where the series may
    /// diverge.
    pub inside_brillouin: bool,
    /// The pole-limit formulas were used.
    pub near_pole_path: bool,
}

/// Which longitude derivative feeds the acceleration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LongitudeDerivative {
    /// `∂U/∂λ` of the series: terms weighted by `m`.
    #[default]
    Exact,
    /// Terms weighted by `m (n + 1)`. The result is not `∇U`.
    DegreeScaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FieldOptions {
    pub longitude_derivative: LongitudeDerivative,
}

fn check_point(x: &Vector3<f64>) -> Result<(), FieldError> {
    if !x.iter().all(|c| c.is_finite()) {
        return Err(FieldError::NonFinite);
    }
    if x.norm() == 0.0 {
        return Err(FieldError::SingularPoint);
    }
    Ok(())
}

/// `cos(mλ)`, `sin(mλ)` for `m = 0..=nmax` by angle addition.
fn trig_table(lambda: f64, nmax: usize) -> (Vec<f64>, Vec<f64>) {
    let (s1, c1) = lambda.sin_cos();
    let mut cos_m = vec![1.0; nmax + 1];
    let mut sin_m = vec![0.0; nmax + 1];
    for m in 1..=nmax {
        cos_m[m] = cos_m[m - 1] * c1 - sin_m[m - 1] * s1;
        sin_m[m] = sin_m[m - 1] * c1 + cos_m[m - 1] * s1;
    }
    (cos_m, sin_m)
}

/// Potential only; `acceleration` is left at zero.
pub fn potential(model: &SHModel, x: &Vector3<f64>, brillouin_r: f64) -> Result<FieldSample, FieldError> {
    check_point(x)?;
    let sc = SphericalCoords::from_cartesian(x);
    let nmax = model.nmax();
    let p = legendre_table_phi(nmax, sc.phi);
    let (cos_m, sin_m) = trig_table(sc.lambda, nmax);
    let ratio = model.r0() / sc.r;
    let mut rn = 1.0;
    let mut acc = 0.0;
    for n in 0..=nmax {
        let mut row = 0.0;
        for m in 0..=n {
            row += p.get(n, m) * (model.c(n, m) * cos_m[m] + model.s(n, m) * sin_m[m]);
        }
        acc += rn * row;
        rn *= ratio;
    }
    Ok(FieldSample {
        potential: model.mu() / sc.r * acc,
        acceleration: Vector3::zeros(),
        inside_brillouin: sc.r < brillouin_r,
        near_pole_path: false,
    })
}

/// Potential and acceleration with the exact longitude derivative.
pub fn acceleration(model: &SHModel, x: &Vector3<f64>, brillouin_r: f64) -> Result<FieldSample, FieldError> {
    acceleration_with(model, x, brillouin_r, FieldOptions::default())
}

pub fn acceleration_with(
    model: &SHModel,
    x: &Vector3<f64>,
    brillouin_r: f64,
    opts: FieldOptions,
) -> Result<FieldSample, FieldError> {
    check_point(x)?;
    let sc = SphericalCoords::from_cartesian(x);
    if sc.eta < POLE_GUARD * sc.r {
        return Ok(pole_limit(model, x, &sc, brillouin_r));
    }

    let nmax = model.nmax();
    let p = legendre_table_phi(nmax, sc.phi);
    let dp = dphi_from_table(&p, sc.phi);
    let (cos_m, sin_m) = trig_table(sc.lambda, nmax);
    let ratio = model.r0() / sc.r;
    let scaled = opts.longitude_derivative == LongitudeDerivative::DegreeScaled;

    let (mut u, mut u_r, mut u_lam, mut u_phi) = (0.0, 0.0, 0.0, 0.0);
    let mut rn = 1.0;
    for n in 0..=nmax {
        let (mut su, mut slam, mut sphi) = (0.0, 0.0, 0.0);
        for m in 0..=n {
            let (c, s) = (model.c(n, m), model.s(n, m));
            let cs = c * cos_m[m] + s * sin_m[m];
            let sc_ = -c * sin_m[m] + s * cos_m[m];
            let pnm = p.get(n, m);
            su += pnm * cs;
            slam += m as f64 * pnm * sc_;
            sphi += dp.get(n, m) * cs;
        }
        let nf = n as f64;
        u += rn * su;
        u_r += rn * (nf + 1.0) * su;
        u_lam += rn * if scaled { (nf + 1.0) * slam } else { slam };
        u_phi += rn * sphi;
        rn *= ratio;
    }
    let mu_r = model.mu() / sc.r;
    let potential = mu_r * u;
    let u_r = -mu_r / sc.r * u_r;
    let u_lam = mu_r * u_lam;
    let u_phi = mu_r * u_phi;

    let r2 = sc.r * sc.r;
    let eta2 = sc.eta * sc.eta;
    let common = u_r / sc.r - x.z * u_phi / (r2 * sc.eta);
    let a = Vector3::new(
        common * x.x - u_lam * x.y / eta2,
        common * x.y + u_lam * x.x / eta2,
        u_r * x.z / sc.r + sc.eta * u_phi / r2,
    );
    Ok(FieldSample {
        potential,
        acceleration: a,
        inside_brillouin: sc.r < brillouin_r,
        near_pole_path: false,
    })
}

/// Limit of the acceleration on the z axis.
///
/// With `cos φ = η/r`, each `m = 1` term is `(μ/r²)(R0/r)^n N_n1 P_n'(u)
/// (C̄n1 x + S̄n1 y)` near the axis, giving the horizontal components;
/// terms with `m ≥ 2` vanish like `η^m` and `m = 0` terms have no horizontal
/// gradient on the axis.
fn pole_limit(model: &SHModel, x: &Vector3<f64>, sc: &SphericalCoords, brillouin_r: f64) -> FieldSample {
    let nmax = model.nmax();
    let sign: f64 = if x.z >= 0.0 { 1.0 } else { -1.0 };
    let ratio = model.r0() / sc.r;
    let sqrt_n = |n: usize| (2 * n + 1) as f64;
    let (mut u, mut u_r, mut ax, mut ay) = (0.0, 0.0, 0.0, 0.0);
    let mut rn = 1.0;
    for n in 0..=nmax {
        // P̄n0(±1) = sqrt(2n+1) (±1)^n
        let pn0 = sqrt_n(n).sqrt() * sign.powi(n as i32);
        let nf = n as f64;
        u += rn * pn0 * model.c(n, 0);
        u_r += rn * (nf + 1.0) * pn0 * model.c(n, 0);
        if n >= 1 {
            // N_n1 P_n'(±1), P_n'(±1) = (±1)^(n+1) n(n+1)/2
            let q = norm_factor(n, 1).expect("m <= n") * sign.powi(n as i32 + 1) * nf * (nf + 1.0) / 2.0;
            ax += rn * q * model.c(n, 1);
            ay += rn * q * model.s(n, 1);
        }
        rn *= ratio;
    }
    let mu = model.mu();
    let r = sc.r;
    FieldSample {
        potential: mu / r * u,
        acceleration: Vector3::new(mu / (r * r) * ax, mu / (r * r) * ay, -mu / (r * r) * u_r * x.z / r),
        inside_brillouin: r < brillouin_r,
        near_pole_path: true,
    }
}

/// Evaluates many points in parallel; order of results matches `points`.
pub fn acceleration_batch(
    model: &SHModel,
    points: &[Vector3<f64>],
    brillouin_r: f64,
    opts: FieldOptions,
) -> Vec<Result<FieldSample, FieldError>> {
    points
        .par_iter()
        .map(|x| acceleration_with(model, x, brillouin_r, opts))
        .collect()
}

/// Point on a triaxial ellipsoid surface at the given longitude/latitude.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfacePoint {
    pub lon_deg: f64,
    pub lat_deg: f64,
    pub position: Vector3<f64>,
}

/// Samples `(a cos φ cos λ, b cos φ sin λ, c sin φ)` with latitudes from -90
/// to 90 and longitudes from -180 (inclusive) to 180 (exclusive) every
/// `step_deg` degrees.
pub fn ellipsoid_grid(a: f64, b: f64, c: f64, step_deg: f64) -> Vec<SurfacePoint> {
    assert!(step_deg > 0.0, "grid step must be positive");
    let n_lat = (180.0 / step_deg).round() as usize;
    let n_lon = (360.0 / step_deg).round() as usize;
    let mut out = Vec::with_capacity((n_lat + 1) * n_lon);
    for i in 0..=n_lat {
        let lat_deg = -90.0 + 180.0 * i as f64 / n_lat as f64;
        let (sl, cl) = lat_deg.to_radians().sin_cos();
        for j in 0..n_lon {
            let lon_deg = -180.0 + 360.0 * j as f64 / n_lon as f64;
            let (so, co) = lon_deg.to_radians().sin_cos();
            out.push(SurfacePoint {
                lon_deg,
                lat_deg,
                position: Vector3::new(a * cl * co, b * cl * so, c * sl),
            });
        }
    }
    out
}
