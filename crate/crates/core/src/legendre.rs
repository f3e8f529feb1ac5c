//! Fully normalized associated Legendre functions (geodesy convention, no
//! Condon-Shortley phase) and their latitude derivatives.
//!
//! `P̄nm(u) = N_nm (1 - u²)^(m/2) d^m P_n / du^m` with
//! `N_nm = sqrt((n-m)! (2n+1) (2 - δ_m0) / (n+m)!)`.
//!
//! Tables are filled by the standard three-branch recursion anchored on
//! `P̄00 = 1`, `P̄10 = √3 u`, `P̄11 = √3 sqrt(1 - u²)`:
//!
//! * sectorial: `P̄nn = sqrt((2n+1)/(2n)) sqrt(1-u²) P̄(n-1)(n-1)`, n ≥ 2
//! * subdiagonal: `P̄n(n-1) = sqrt(2n+1) u P̄(n-1)(n-1)`
//! * vertical: `P̄nm = Γnm u P̄(n-1)m - (Γnm / Γ(n-1)m) P̄(n-2)m`, m < n-1

use statrs::function::gamma::ln_gamma;
use thiserror::Error;

/// Angular distance from the poles below which `tan φ` is treated as
/// singular, rad.
pub const POLE_EPSILON: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LegendreError {
    #[error("order m = {m} exceeds degree n = {n}")]
    OrderExceedsDegree { n: usize, m: usize },
    #[error("argument u = {0} outside [-1, 1]")]
    ArgumentOutOfRange(f64),
    #[error("latitude {0} rad is within the pole guard of ±π/2")]
    NearPole(f64),
}

/// Position of `(n, m)` in a row-major lower-triangular array.
#[inline]
pub const fn tri_index(n: usize, m: usize) -> usize {
    n * (n + 1) / 2 + m
}

/// Number of `(n, m)` pairs with `0 ≤ m ≤ n ≤ nmax`.
#[inline]
pub const fn tri_len(nmax: usize) -> usize {
    (nmax + 1) * (nmax + 2) / 2
}

/// Normalization constant `N_nm`.
pub fn norm_factor(n: usize, m: usize) -> Result<f64, LegendreError> {
    if m > n {
        return Err(LegendreError::OrderExceedsDegree { n, m });
    }
    let two_minus_delta = if m == 0 { 1.0 } else { 2.0 };
    let ratio = if n <= 20 {
        // (n-m)!/(n+m)! as an exact-integer product, at most 40 factors
        let denom: f64 = ((n - m + 1)..=(n + m)).map(|k| k as f64).product();
        1.0 / denom
    } else {
        (ln_gamma((n - m + 1) as f64) - ln_gamma((n + m + 1) as f64)).exp()
    };
    Ok((ratio * (2 * n + 1) as f64 * two_minus_delta).sqrt())
}

/// Recursion coefficient `Γnm = sqrt((2n+1)(2n-1) / ((n-m)(n+m)))`, m < n.
#[inline]
pub fn gamma_nm(n: usize, m: usize) -> f64 {
    debug_assert!(m < n);
    (((2 * n + 1) * (2 * n - 1)) as f64 / ((n - m) * (n + m)) as f64).sqrt()
}

/// Derivative coupling `K_nm`: `sqrt((n-m)(n+m+1))` for m > 0 and
/// `sqrt(n(n+1)/2)` for m = 0.
#[inline]
pub fn k_nm(n: usize, m: usize) -> f64 {
    if m == 0 {
        ((n * (n + 1)) as f64 / 2.0).sqrt()
    } else {
        (((n - m) * (n + m + 1)) as f64).sqrt()
    }
}

/// Triangular table of `P̄nm(u)` for `0 ≤ m ≤ n ≤ nmax`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreTable {
    nmax: usize,
    u: f64,
    values: Vec<f64>,
}

impl LegendreTable {
    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn u(&self) -> f64 {
        self.u
    }

    /// `P̄nm`; zero for `m > n`.
    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        if m > n {
            0.0
        } else {
            self.values[tri_index(n, m)]
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Triangular table of `∂P̄nm(sin φ)/∂φ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LegendreDerivTable {
    nmax: usize,
    phi: f64,
    values: Vec<f64>,
}

impl LegendreDerivTable {
    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    #[inline]
    pub fn get(&self, n: usize, m: usize) -> f64 {
        self.values[tri_index(n, m)]
    }
}

/// Fills `P̄nm(u)` with `cos_phi = sqrt(1 - u²)` supplied by the caller.
fn fill_table(nmax: usize, u: f64, cos_phi: f64) -> Vec<f64> {
    let mut p = vec![0.0; tri_len(nmax)];
    p[0] = 1.0;
    if nmax == 0 {
        return p;
    }
    let sqrt3 = 3f64.sqrt();
    p[tri_index(1, 0)] = sqrt3 * u;
    p[tri_index(1, 1)] = sqrt3 * cos_phi;
    for n in 2..=nmax {
        let nf = n as f64;
        let prev_diag = p[tri_index(n - 1, n - 1)];
        p[tri_index(n, n)] = ((2.0 * nf + 1.0) / (2.0 * nf)).sqrt() * cos_phi * prev_diag;
        p[tri_index(n, n - 1)] = (2.0 * nf + 1.0).sqrt() * u * prev_diag;
        for m in 0..n - 1 {
            let g = gamma_nm(n, m);
            let g_prev = gamma_nm(n - 1, m);
            p[tri_index(n, m)] =
                g * u * p[tri_index(n - 1, m)] - (g / g_prev) * p[tri_index(n - 2, m)];
        }
    }
    p
}

/// `P̄nm(u)` for every `0 ≤ m ≤ n ≤ nmax`.
pub fn legendre_table(nmax: usize, u: f64) -> Result<LegendreTable, LegendreError> {
    if !(-1.0..=1.0).contains(&u) {
        return Err(LegendreError::ArgumentOutOfRange(u));
    }
    let cos_phi = ((1.0 - u) * (1.0 + u)).sqrt();
    Ok(LegendreTable {
        nmax,
        u,
        values: fill_table(nmax, u, cos_phi),
    })
}

/// `P̄nm(sin φ)` evaluated from the latitude itself, which keeps
/// `cos φ` accurate near the poles.
pub fn legendre_table_phi(nmax: usize, phi: f64) -> LegendreTable {
    let (u, c) = phi.sin_cos();
    LegendreTable {
        nmax,
        u,
        values: fill_table(nmax, u, c.abs()),
    }
}

/// `∂P̄nm/∂φ = -m tan φ P̄nm + K_nm P̄n(m+1)` for every `0 ≤ m ≤ n ≤ nmax`.
pub fn legendre_dphi_table(nmax: usize, phi: f64) -> Result<LegendreDerivTable, LegendreError> {
    if !(phi.abs() <= std::f64::consts::FRAC_PI_2 - POLE_EPSILON) {
        return Err(LegendreError::NearPole(phi));
    }
    let p = legendre_table_phi(nmax, phi);
    Ok(dphi_from_table(&p, phi))
}

pub(crate) fn dphi_from_table(p: &LegendreTable, phi: f64) -> LegendreDerivTable {
    let nmax = p.nmax;
    let tan_phi = phi.tan();
    let mut values = vec![0.0; tri_len(nmax)];
    for n in 0..=nmax {
        for m in 0..=n {
            values[tri_index(n, m)] =
                -(m as f64) * tan_phi * p.get(n, m) + k_nm(n, m) * p.get(n, m + 1);
        }
    }
    LegendreDerivTable { nmax, phi, values }
}
