//! Brute-force checks of the coefficient pipeline: exact simplex monomial
//! integrals and a Monte Carlo estimate of the defining volume integrals
//! `C̄nm = (1/M) ∫ ρ c̄nm dV`.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::density::{DensityError, DensityModel};
use crate::legendre::{tri_index, tri_len};
use crate::mesh::{Tetrahedron, TriangleMesh};
use crate::shcoeff::{RadialDiscretization, SHModel, ShError};
use crate::trinomial::{build_shape_functions, SparseTrinomial};

/// Largest total degree accepted by [`simplex_monomial_integral`].
pub const MONOMIAL_DEGREE_CAP: u32 = 20;
/// Smallest sample count accepted by [`mc_coefficients`].
pub const MIN_SAMPLES: usize = 10_000;
const BATCH: usize = 4096;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("monomial degree {0} exceeds the cap of {MONOMIAL_DEGREE_CAP}")]
    DegreeCap(u32),
    #[error("at least {MIN_SAMPLES} samples are required, got {0}")]
    TooFewSamples(usize),
    #[error("mesh has no volume to sample")]
    EmptyMesh,
    #[error("density evaluation failed: {0}")]
    Density(#[from] DensityError),
    #[error("{0}")]
    Discretization(#[from] ShError),
}

/// Non-negative fraction in lowest terms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: u128,
    pub den: u128,
}

impl Rational {
    fn reduced(num: u128, den: u128) -> Self {
        let (mut a, mut b) = (num, den);
        while b != 0 {
            (a, b) = (b, a % b);
        }
        Self { num: num / a, den: den / a }
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

fn factorial(n: u32) -> u128 {
    (1..=n as u128).product()
}

/// `∫ X^i Y^j Z^k` over the standard simplex: `i! j! k! / (i+j+k+3)!`.
pub fn simplex_monomial_integral(i: u32, j: u32, k: u32) -> Result<Rational, OracleError> {
    let d = i + j + k;
    if d > MONOMIAL_DEGREE_CAP {
        return Err(OracleError::DegreeCap(d));
    }
    Ok(Rational::reduced(
        factorial(i) * factorial(j) * factorial(k),
        factorial(d + 3),
    ))
}

/// Mean of an estimator and its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureEstimate {
    pub value: f64,
    pub standard_error: f64,
    pub sample_count: usize,
}

/// How the oracle evaluates the density at a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensitySampling {
    /// The density model at the point itself.
    Pointwise,
    /// The slab-constant density of the coefficient pipeline: the model
    /// evaluated at the center of the point's slab in its tetrahedron.
    Discretized { n_q: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McRequest {
    pub nmax: usize,
    pub r0: f64,
    pub samples: usize,
    pub seed: u64,
    pub density: DensitySampling,
}

/// Monte Carlo coefficients in triangular `(n, m)` layout.
#[derive(Debug, Clone, PartialEq)]
pub struct McCoefficients {
    pub nmax: usize,
    pub r0: f64,
    /// Mass, kg.
    pub mass: QuadratureEstimate,
    pub c: Vec<QuadratureEstimate>,
    pub s: Vec<QuadratureEstimate>,
}

impl McCoefficients {
    pub fn c(&self, n: usize, m: usize) -> &QuadratureEstimate {
        &self.c[tri_index(n, m)]
    }

    pub fn s(&self, n: usize, m: usize) -> &QuadratureEstimate {
        &self.s[tri_index(n, m)]
    }
}

/// Shape function as flat `(exponent, coefficient)` lists.
struct FlatShape {
    terms: Vec<([u32; 3], f64)>,
}

impl FlatShape {
    fn new(t: &SparseTrinomial) -> Self {
        Self {
            terms: t.terms().iter().map(|(e, c)| (*e, *c)).collect(),
        }
    }

    fn eval(&self, pw: &[Vec<f64>; 3]) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * pw[0][e[0] as usize] * pw[1][e[1] as usize] * pw[2][e[2] as usize])
            .sum()
    }
}

/// Running sums of one batch: for each integrand `f_k`, `Σ f_k`, `Σ f_k²`
/// and `Σ f_k f_0` where `f_0 = ρ` is the mass integrand.
#[derive(Clone)]
struct Moments {
    sum: Vec<f64>,
    sq: Vec<f64>,
    cross: Vec<f64>,
}

impl Moments {
    fn new(k: usize) -> Self {
        Self {
            sum: vec![0.0; k],
            sq: vec![0.0; k],
            cross: vec![0.0; k],
        }
    }

    fn merge(&mut self, o: &Moments) {
        for i in 0..self.sum.len() {
            self.sum[i] += o.sum[i];
            self.sq[i] += o.sq[i];
            self.cross[i] += o.cross[i];
        }
    }
}

/// Draws a uniform point of the standard simplex from sorted uniforms.
fn simplex_point(rng: &mut impl Rng) -> Vector3<f64> {
    let mut u: [f64; 3] = [rng.gen(), rng.gen(), rng.gen()];
    u.sort_by(f64::total_cmp);
    Vector3::new(u[0], u[1] - u[0], u[2] - u[1])
}

/// Estimates mass and normalized coefficients by sampling the body.
///
/// Tetrahedra are chosen with probability `∝ |detJ|` and weighted by the
/// sign of `detJ`, so meshes whose origin lies outside the body are handled.
/// Coefficients are ratio estimators; their standard errors come from the
/// delta method.
pub fn mc_coefficients(
    mesh: &TriangleMesh,
    density: &DensityModel,
    req: &McRequest,
) -> Result<McCoefficients, OracleError> {
    if req.samples < MIN_SAMPLES {
        return Err(OracleError::TooFewSamples(req.samples));
    }
    let disc = match req.density {
        DensitySampling::Discretized { n_q } => Some(RadialDiscretization::new(n_q)?),
        DensitySampling::Pointwise => None,
    };
    let tets: Vec<Tetrahedron> = mesh.tetrahedralize().into_iter().filter(|t| t.det_j != 0.0).collect();
    let mut cdf = Vec::with_capacity(tets.len());
    let mut acc = 0.0;
    for t in &tets {
        acc += t.det_j.abs();
        cdf.push(acc);
    }
    if tets.is_empty() || !(acc > 0.0) {
        return Err(OracleError::EmptyMesh);
    }
    let volume_abs = acc / 6.0;

    let shapes = build_shape_functions(req.nmax, req.r0);
    // integrand 0 is the density, then (c, s) of every pair
    let mut flat = Vec::new();
    let mut slots = Vec::new();
    for p in shapes.pairs() {
        let idx = tri_index(p.n as usize, p.m as usize);
        flat.push(FlatShape::new(&p.c));
        slots.push((idx, false));
        if p.m > 0 {
            flat.push(FlatShape::new(&p.s));
            slots.push((idx, true));
        }
    }
    let k = 1 + flat.len();

    let n_batches = req.samples.div_ceil(BATCH);
    let batches: Result<Vec<Moments>, OracleError> = (0..n_batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(req.samples - b * BATCH);
            let mut m = Moments::new(k);
            let mut pw: [Vec<f64>; 3] = std::array::from_fn(|_| vec![1.0; req.nmax + 1]);
            let mut f = vec![0.0; k];
            for _ in 0..count {
                let target = rng.gen::<f64>() * acc;
                let t = cdf.partition_point(|&c| c <= target).min(tets.len() - 1);
                let tet = &tets[t];
                let xi = simplex_point(&mut rng);
                let x = tet.map(&xi);
                let rho = match &disc {
                    None => density.density_at(&x)?,
                    Some(d) => density.density_at(&tet.map(&d.center(d.slab_of(xi.z))))?,
                };
                let w = rho * tet.det_j.signum();
                for a in 0..3 {
                    for e in 1..=req.nmax {
                        pw[a][e] = pw[a][e - 1] * x[a];
                    }
                }
                f[0] = w;
                for (i, shape) in flat.iter().enumerate() {
                    f[i + 1] = w * shape.eval(&pw);
                }
                for i in 0..k {
                    m.sum[i] += f[i];
                    m.sq[i] += f[i] * f[i];
                    m.cross[i] += f[i] * f[0];
                }
            }
            Ok(m)
        })
        .collect();
    let mut total = Moments::new(k);
    for m in &batches? {
        total.merge(m);
    }

    let n = req.samples as f64;
    let mean0 = total.sum[0] / n;
    let var0 = (total.sq[0] / n - mean0 * mean0).max(0.0);
    let mass = QuadratureEstimate {
        value: volume_abs * mean0,
        standard_error: volume_abs * (var0 / n).sqrt(),
        sample_count: req.samples,
    };
    let zero = QuadratureEstimate {
        value: 0.0,
        standard_error: 0.0,
        sample_count: req.samples,
    };
    let mut c = vec![zero; tri_len(req.nmax)];
    let mut s = vec![zero; tri_len(req.nmax)];
    for (i, &(idx, is_s)) in slots.iter().enumerate() {
        let j = i + 1;
        let mean = total.sum[j] / n;
        let ratio = mean / mean0;
        // var(f - C f0) / mean0²
        let var = total.sq[j] / n - mean * mean - 2.0 * ratio * (total.cross[j] / n - mean * mean0)
            + ratio * ratio * var0;
        let est = QuadratureEstimate {
            value: ratio,
            standard_error: (var.max(0.0) / n).sqrt() / mean0.abs(),
            sample_count: req.samples,
        };
        if is_s {
            s[idx] = est;
        } else {
            c[idx] = est;
        }
    }
    Ok(McCoefficients {
        nmax: req.nmax,
        r0: req.r0,
        mass,
        c,
        s,
    })
}

/// One line of an analytic-versus-Monte-Carlo comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyRow {
    pub n: usize,
    pub m: usize,
    /// `"C"` or `"S"`.
    pub kind: &'static str,
    pub analytic: f64,
    pub mc: f64,
    pub sigma: f64,
    pub z: f64,
}

/// Compares every coefficient of degree `≤ min(nmax)`; `S̄n0` is skipped.
pub fn compare(model: &SHModel, mc: &McCoefficients) -> Vec<VerifyRow> {
    let nmax = model.nmax().min(mc.nmax);
    let mut rows = Vec::new();
    for n in 0..=nmax {
        for m in 0..=n {
            let mut push = |kind, analytic: f64, e: &QuadratureEstimate| {
                let diff = analytic - e.value;
                let z = if e.standard_error > 0.0 {
                    diff / e.standard_error
                } else if diff.abs() <= 1e-12 * analytic.abs().max(1e-300) {
                    0.0
                } else {
                    f64::INFINITY.copysign(diff)
                };
                rows.push(VerifyRow {
                    n,
                    m,
                    kind,
                    analytic,
                    mc: e.value,
                    sigma: e.standard_error,
                    z,
                });
            };
            push("C", model.c(n, m), mc.c(n, m));
            if m > 0 {
                push("S", model.s(n, m), mc.s(n, m));
            }
        }
    }
    rows
}
