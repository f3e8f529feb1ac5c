//! Beta-function integrals over the standard simplex. Only integer
//! arguments arise, so everything reduces to finite sums of positive terms.

use super::ShError;

/// Binomial coefficient as a float (exact below 2^53).
fn binomial(n: u32, k: u32) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc.round()
}

/// `β(a, b) = (a-1)! (b-1)! / (a+b-1)!` for positive integers.
pub fn beta_fn(a: u32, b: u32) -> Result<f64, ShError> {
    if a == 0 || b == 0 {
        return Err(ShError::Domain(format!("beta({a}, {b}) needs positive integers")));
    }
    // (a-1)!(b-1)!/(a+b-1)! = 1 / ((a+b-1) C(a+b-2, a-1))
    Ok(1.0 / ((a + b - 1) as f64 * binomial(a + b - 2, a - 1)))
}

/// Incomplete beta `∫₀ˣ t^(a-1) (1-t)^(b-1) dt` for positive integers.
///
/// Uses `β̃ = β(a,b) Σ_{j=a}^{a+b-1} C(a+b-1, j) x^j (1-x)^(a+b-1-j)`, a sum
/// of non-negative terms.
pub fn incomplete_beta(x: f64, a: u32, b: u32) -> Result<f64, ShError> {
    if !(0.0..=1.0).contains(&x) {
        return Err(ShError::Domain(format!("incomplete beta argument {x} outside [0, 1]")));
    }
    let full = beta_fn(a, b)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == 1.0 {
        return Ok(full);
    }
    let n = a + b - 1;
    let y = 1.0 - x;
    let mut tail = 0.0;
    for j in a..=n {
        tail += binomial(n, j) * x.powi(j as i32) * y.powi((n - j) as i32);
    }
    Ok(full * tail)
}

/// `h(q, i, j, k) = β(j+1, i+2)/(i+1) · β̃(q, k+1, i+j+3)`: the integral of
/// `X^i Y^j Z^k` over the part of the standard simplex with `Z ≤ q`.
pub fn slab_integral_h(q: f64, i: u32, j: u32, k: u32) -> Result<f64, ShError> {
    Ok(beta_fn(j + 1, i + 2)? / (i + 1) as f64 * incomplete_beta(q, k + 1, i + j + 3)?)
}

/// Volume of the Z-slab `[q_lo, q_hi]` of the standard simplex.
pub fn slab_volume(q_lo: f64, q_hi: f64) -> f64 {
    ((1.0 - q_lo).powi(3) - (1.0 - q_hi).powi(3)) / 6.0
}
