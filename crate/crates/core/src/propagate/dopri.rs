//! Dormand–Prince 5(4) with FSAL and cubic Hermite dense output.

use nalgebra::SVector;

pub type State = SVector<f64, 6>;

// Butcher tableau
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
// fifth-order weights minus embedded fourth-order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: State,
    /// Upper bound on the step size.
    pub h_max: f64,
}

impl Tolerances {
    fn error_norm(&self, err: &State, y0: &State, y1: &State) -> f64 {
        let mut s = 0.0;
        for i in 0..6 {
            let sc = self.atol[i] + self.rtol * y0[i].abs().max(y1[i].abs());
            s += (err[i] / sc).powi(2);
        }
        (s / 6.0).sqrt()
    }
}

/// An accepted step from `(t0, y0, f0)` to `(t1, y1, f1)`.
#[derive(Debug, Clone, Copy)]
pub struct Step {
    pub t0: f64,
    pub y0: State,
    pub f0: State,
    pub t1: f64,
    pub y1: State,
    pub f1: State,
    /// Weighted error estimate of the step (≤ 1 when accepted).
    pub err: f64,
}

impl Step {
    /// Cubic Hermite interpolation of the state inside the step.
    pub fn interpolate(&self, t: f64) -> State {
        let h = self.t1 - self.t0;
        let s = (t - self.t0) / h;
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        self.y0 * h00 + self.f0 * (h10 * h) + self.y1 * h01 + self.f1 * (h11 * h)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IntegrationError<E> {
    /// Step size fell below the resolvable limit.
    StepUnderflow { t: f64, y: State, h: f64 },
    /// Step budget exhausted.
    TooManySteps { t: f64, y: State },
    /// The right-hand side failed.
    Rhs { t: f64, y: State, source: E },
}

/// Integrates `y' = f(t, y)` from `t0` to exactly `t_end > t0`, calling
/// `on_step` for every accepted step.
pub fn integrate<E, F, S>(
    f: F,
    t0: f64,
    y0: State,
    t_end: f64,
    tol: &Tolerances,
    max_steps: usize,
    mut on_step: S,
) -> Result<(), IntegrationError<E>>
where
    F: Fn(f64, &State) -> Result<State, E>,
    S: FnMut(&Step),
{
    let mut t = t0;
    let mut y = y0;
    let mut k1 = f(t, &y).map_err(|source| IntegrationError::Rhs { t, y, source })?;
    if t_end <= t0 {
        return Ok(());
    }
    let mut h = initial_step(&f, t, &y, &k1, (t_end - t0).min(tol.h_max), tol)
        .map_err(|source| IntegrationError::Rhs { t, y, source })?;

    let mut steps = 0;
    while t < t_end {
        if steps == max_steps {
            return Err(IntegrationError::TooManySteps { t, y });
        }
        steps += 1;
        let h_min = 16.0 * f64::EPSILON * t.abs().max((t_end - t0).abs());
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        if h < h_min && !last {
            return Err(IntegrationError::StepUnderflow { t, y, h });
        }
        let stage = |tt: f64, yy: State| f(tt, &yy).map_err(|source| IntegrationError::Rhs { t, y, source });
        let k2 = stage(t + C2 * h, y + k1 * (A21 * h))?;
        let k3 = stage(t + C3 * h, y + (k1 * A31 + k2 * A32) * h)?;
        let k4 = stage(t + C4 * h, y + (k1 * A41 + k2 * A42 + k3 * A43) * h)?;
        let k5 = stage(t + C5 * h, y + (k1 * A51 + k2 * A52 + k3 * A53 + k4 * A54) * h)?;
        let k6 = stage(t + h, y + (k1 * A61 + k2 * A62 + k3 * A63 + k4 * A64 + k5 * A65) * h)?;
        let y1 = y + (k1 * A71 + k3 * A73 + k4 * A74 + k5 * A75 + k6 * A76) * h;
        let t1 = if last { t_end } else { t + h };
        let k7 = stage(t1, y1)?;
        let err_vec = (k1 * E1 + k3 * E3 + k4 * E4 + k5 * E5 + k6 * E6 + k7 * E7) * h;
        let err = tol.error_norm(&err_vec, &y, &y1);
        let err = if err.is_finite() { err } else { f64::INFINITY };

        if err <= 1.0 {
            on_step(&Step {
                t0: t,
                y0: y,
                f0: k1,
                t1,
                y1,
                f1: k7,
                err,
            });
            t = t1;
            y = y1;
            k1 = k7;
            let fac = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
            h = (h * fac).min(tol.h_max);
        } else {
            if h <= h_min {
                return Err(IntegrationError::StepUnderflow { t, y, h });
            }
            h *= (0.9 * err.powf(-0.2)).clamp(0.2, 1.0);
        }
    }
    Ok(())
}

/// Starting step size from the local scale of `y` and `f` (Hairer, Nørsett
/// and Wanner's heuristic).
fn initial_step<E, F>(f: &F, t: f64, y: &State, f0: &State, span: f64, tol: &Tolerances) -> Result<f64, E>
where
    F: Fn(f64, &State) -> Result<State, E>,
{
    let scale = |v: &State| {
        let mut s = 0.0;
        for i in 0..6 {
            let sc = tol.atol[i] + tol.rtol * y[i].abs();
            s += (v[i] / sc).powi(2);
        }
        (s / 6.0).sqrt()
    };
    let d0 = scale(y);
    let d1 = scale(f0);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(span);
    let y1 = y + f0 * h0;
    let f1 = f(t + h0, &y1)?;
    let d2 = scale(&(f1 - f0)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tol(rtol: f64) -> Tolerances {
        Tolerances {
            rtol,
            atol: State::repeat(1e-14),
            h_max: f64::INFINITY,
        }
    }

    #[test]
    fn harmonic_oscillator() {
        // x'' = -x in the first component pair
        let f = |_t: f64, y: &State| -> Result<State, ()> {
            let mut d = State::zeros();
            d[0] = y[3];
            d[3] = -y[0];
            Ok(d)
        };
        let mut y0 = State::zeros();
        y0[0] = 1.0;
        let mut last = None;
        let mut n = 0;
        integrate(f, 0.0, y0, 10.0, &tol(1e-11), 100_000, |s| {
            n += 1;
            last = Some(*s);
        })
        .unwrap();
        let s = last.unwrap();
        assert_eq!(s.t1, 10.0);
        assert!((s.y1[0] - 10f64.cos()).abs() < 1e-9);
        assert!((s.y1[3] + 10f64.sin()).abs() < 1e-9);
        // dense output between steps
        let tm = 0.5 * (s.t0 + s.t1);
        assert!((s.interpolate(tm)[0] - tm.cos()).abs() < 1e-7);
        assert!(n > 10);
    }

    #[test]
    fn exponential_growth_order() {
        let f = |_t: f64, y: &State| -> Result<State, ()> { Ok(*y) };
        let y0 = State::repeat(1.0);
        let mut y_end = State::zeros();
        integrate(f, 0.0, y0, 2.0, &tol(1e-12), 100_000, |s| y_end = s.y1).unwrap();
        assert!((y_end[0] - 2f64.exp()).abs() < 1e-10 * 2f64.exp());
    }

    #[test]
    fn rhs_error_is_reported() {
        let f = |t: f64, y: &State| -> Result<State, &'static str> {
            if t > 1.0 {
                Err("boom")
            } else {
                Ok(*y * 0.0 + State::repeat(1.0))
            }
        };
        let r = integrate(f, 0.0, State::zeros(), 5.0, &tol(1e-8), 1000, |_| {});
        assert!(matches!(r, Err(IntegrationError::Rhs { source: "boom", .. })));
    }

    #[test]
    fn singular_rhs_underflows() {
        // y' = 1/(1 - t) blows up at t = 1
        let f = |t: f64, _y: &State| -> Result<State, ()> { Ok(State::repeat(1.0 / (1.0 - t).powi(2))) };
        let r = integrate(f, 0.0, State::zeros(), 2.0, &tol(1e-10), 1_000_000, |_| {});
        assert!(r.is_err());
    }
}
