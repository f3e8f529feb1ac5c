//! Homogeneous trinomials in `(x, y, z)` and the normalized solid-harmonic
//! shape functions built from them.
//!
//! The shape functions satisfy, for `r = |x| > 0`,
//!
//! ```text
//! c̄nm(x) = (r/R0)^n P̄nm(z/r) cos(m λ) / (2n + 1)
//! s̄nm(x) = (r/R0)^n P̄nm(z/r) sin(m λ) / (2n + 1),   λ = atan2(y, x)
//! ```
//!
//! so that `C̄nm = (1/M) ∫ ρ c̄nm dV` and likewise for `S̄nm`.

use std::collections::BTreeMap;

use nalgebra::{Matrix3, Vector3};

use crate::legendre::{gamma_nm, tri_index, tri_len};

/// Exponent triple `(i, j, k)` of `x^i y^j z^k`.
pub type Exponents = [u32; 3];

/// Homogeneous polynomial of a fixed degree in three variables.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTrinomial {
    degree: u32,
    terms: BTreeMap<Exponents, f64>,
}

impl SparseTrinomial {
    /// The zero polynomial of the given degree.
    pub fn zero(degree: u32) -> Self {
        Self {
            degree,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut t = Self::zero(0);
        t.add_term([0, 0, 0], c);
        t
    }

    pub fn monomial(exp: Exponents, coeff: f64) -> Self {
        let mut t = Self::zero(exp.iter().sum());
        t.add_term(exp, coeff);
        t
    }

    /// `a x + b y + c z`.
    pub fn linear(a: f64, b: f64, c: f64) -> Self {
        let mut t = Self::zero(1);
        t.add_term([1, 0, 0], a);
        t.add_term([0, 1, 0], b);
        t.add_term([0, 0, 1], c);
        t
    }

    /// Builds from explicit terms; panics when a term has the wrong degree.
    pub fn from_terms(degree: u32, terms: impl IntoIterator<Item = (Exponents, f64)>) -> Self {
        let mut t = Self::zero(degree);
        for (e, c) in terms {
            t.add_term(e, c);
        }
        t
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn terms(&self) -> &BTreeMap<Exponents, f64> {
        &self.terms
    }

    pub fn coeff(&self, exp: Exponents) -> f64 {
        self.terms.get(&exp).copied().unwrap_or(0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Adds `coeff` to the term `exp`, dropping it if it becomes exactly zero.
    pub fn add_term(&mut self, exp: Exponents, coeff: f64) {
        assert_eq!(
            exp.iter().sum::<u32>(),
            self.degree,
            "term {exp:?} does not have degree {}",
            self.degree
        );
        if coeff == 0.0 {
            return;
        }
        let entry = self.terms.entry(exp).or_insert(0.0);
        *entry += coeff;
        if *entry == 0.0 {
            self.terms.remove(&exp);
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut out = Self::zero(self.degree);
        for (&e, &c) in &self.terms {
            out.add_term(e, c * s);
        }
        out
    }

    /// Sum of two polynomials of equal degree.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.degree, other.degree, "degree mismatch in trinomial sum");
        let mut out = self.clone();
        for (&e, &c) in &other.terms {
            out.add_term(e, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scaled(-1.0))
    }

    pub fn eval(&self, p: &Vector3<f64>) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * p.x.powi(e[0] as i32) * p.y.powi(e[1] as i32) * p.z.powi(e[2] as i32))
            .sum()
    }
}

/// Product of two trinomials; the degree is the sum of the degrees.
pub fn tri_mul(a: &SparseTrinomial, b: &SparseTrinomial) -> SparseTrinomial {
    let mut out = SparseTrinomial::zero(a.degree + b.degree);
    for (ea, ca) in &a.terms {
        for (eb, cb) in &b.terms {
            out.add_term([ea[0] + eb[0], ea[1] + eb[1], ea[2] + eb[2]], ca * cb);
        }
    }
    out
}

/// Returns `t'` with `t'(X) = t(J X)`.
pub fn tri_compose_linear(t: &SparseTrinomial, j: &Matrix3<f64>) -> SparseTrinomial {
    let n = t.degree as usize;
    let forms: Vec<SparseTrinomial> = (0..3)
        .map(|row| SparseTrinomial::linear(j[(row, 0)], j[(row, 1)], j[(row, 2)]))
        .collect();
    // powers[v][p] = (row v of J · X)^p
    let powers: Vec<Vec<SparseTrinomial>> = forms
        .iter()
        .map(|f| {
            let mut pw = vec![SparseTrinomial::constant(1.0)];
            for p in 1..=n {
                let next = tri_mul(&pw[p - 1], f);
                pw.push(next);
            }
            pw
        })
        .collect();
    let mut out = SparseTrinomial::zero(t.degree);
    for (e, c) in &t.terms {
        let xy = tri_mul(&powers[0][e[0] as usize], &powers[1][e[1] as usize]);
        let xyz = tri_mul(&xy, &powers[2][e[2] as usize]);
        for (ee, cc) in xyz.terms {
            out.add_term(ee, c * cc);
        }
    }
    out
}

/// Shape functions of one `(n, m)`: `c` integrates to `C̄nm`, `s` to `S̄nm`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicPair {
    pub n: u32,
    pub m: u32,
    pub c: SparseTrinomial,
    pub s: SparseTrinomial,
}

/// All shape functions up to degree `nmax` for reference radius `r0`,
/// stored in `legendre::tri_index` order.
#[derive(Debug, Clone)]
pub struct ShapeFunctions {
    nmax: usize,
    r0: f64,
    pairs: Vec<HarmonicPair>,
}

impl ShapeFunctions {
    pub fn nmax(&self) -> usize {
        self.nmax
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn get(&self, n: usize, m: usize) -> &HarmonicPair {
        &self.pairs[tri_index(n, m)]
    }

    pub fn pairs(&self) -> &[HarmonicPair] {
        &self.pairs
    }
}

/// Builds `c̄nm`, `s̄nm` for `0 ≤ m ≤ n ≤ nmax` by running the Legendre
/// recursions multiplied through by `(r/R0)^n / (2n+1)`:
///
/// ```text
/// F_nn     = sqrt((2n+1)/2n) (2n-1)/(2n+1) (x + i y)/R0 F_(n-1)(n-1)
/// F_n(n-1) = sqrt(2n+1) (2n-1)/(2n+1) (z/R0) F_(n-1)(n-1)
/// F_nm     = Γnm (2n-1)/(2n+1) (z/R0) F_(n-1)m
///          - (Γnm/Γ(n-1)m) (2n-3)/(2n+1) (r²/R0²) F_(n-2)m
/// ```
///
/// with `F = c̄ + i s̄`, anchored on `F00 = 1` and `F11 = (x + i y)/(√3 R0)`.
pub fn build_shape_functions(nmax: usize, r0: f64) -> ShapeFunctions {
    assert!(r0 > 0.0, "reference radius must be positive");
    let inv = 1.0 / r0;
    let x = SparseTrinomial::linear(inv, 0.0, 0.0);
    let y = SparseTrinomial::linear(0.0, inv, 0.0);
    let z = SparseTrinomial::linear(0.0, 0.0, inv);
    let r2 = tri_mul(&x, &x).add(&tri_mul(&y, &y)).add(&tri_mul(&z, &z));

    let mut pairs: Vec<Option<HarmonicPair>> = vec![None; tri_len(nmax)];
    let pair = |n: usize, m: usize, c: SparseTrinomial, s: SparseTrinomial| HarmonicPair {
        n: n as u32,
        m: m as u32,
        c,
        s,
    };
    pairs[0] = Some(pair(0, 0, SparseTrinomial::constant(1.0), SparseTrinomial::zero(0)));

    for n in 1..=nmax {
        let nf = n as f64;
        let shrink = (2.0 * nf - 1.0) / (2.0 * nf + 1.0);
        let (cd, sd) = {
            let p = pairs[tri_index(n - 1, n - 1)].as_ref().unwrap();
            (p.c.clone(), p.s.clone())
        };

        // sectorial
        let k_diag = if n == 1 {
            3f64.sqrt() * shrink
        } else {
            ((2.0 * nf + 1.0) / (2.0 * nf)).sqrt() * shrink
        };
        let c_nn = tri_mul(&x, &cd).sub(&tri_mul(&y, &sd)).scaled(k_diag);
        let s_nn = tri_mul(&y, &cd).add(&tri_mul(&x, &sd)).scaled(k_diag);
        pairs[tri_index(n, n)] = Some(pair(n, n, c_nn, s_nn));

        // subdiagonal
        let k_sub = (2.0 * nf + 1.0).sqrt() * shrink;
        let c_sub = tri_mul(&z, &cd).scaled(k_sub);
        let s_sub = if n == 1 {
            SparseTrinomial::zero(1)
        } else {
            tri_mul(&z, &sd).scaled(k_sub)
        };
        pairs[tri_index(n, n - 1)] = Some(pair(n, n - 1, c_sub, s_sub));

        // vertical
        for m in 0..n.saturating_sub(1) {
            let g = gamma_nm(n, m);
            let g_prev = gamma_nm(n - 1, m);
            let a = g * shrink;
            let b = (g / g_prev) * (2.0 * nf - 3.0) / (2.0 * nf + 1.0);
            let p1 = pairs[tri_index(n - 1, m)].as_ref().unwrap();
            let p2 = pairs[tri_index(n - 2, m)].as_ref().unwrap();
            let c = tri_mul(&z, &p1.c)
                .scaled(a)
                .sub(&tri_mul(&r2, &p2.c).scaled(b));
            let s = if m == 0 {
                SparseTrinomial::zero(n as u32)
            } else {
                tri_mul(&z, &p1.s)
                    .scaled(a)
                    .sub(&tri_mul(&r2, &p2.s).scaled(b))
            };
            pairs[tri_index(n, m)] = Some(pair(n, m, c, s));
        }
    }

    ShapeFunctions {
        nmax,
        r0,
        pairs: pairs.into_iter().map(|p| p.unwrap()).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::legendre::legendre_table;
    use rand::{Rng, SeedableRng};

    fn random_point(rng: &mut impl Rng, scale: f64) -> Vector3<f64> {
        Vector3::new(
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
            rng.gen_range(-scale..scale),
        )
    }

    #[test]
    fn mul_examples() {
        let x = SparseTrinomial::linear(1.0, 0.0, 0.0);
        let y = SparseTrinomial::linear(0.0, 1.0, 0.0);
        let xy = tri_mul(&x, &y);
        assert_eq!(xy.terms().len(), 1);
        assert_eq!(xy.coeff([1, 1, 0]), 1.0);

        let s = SparseTrinomial::linear(1.0, 1.0, 0.0);
        let sq = tri_mul(&s, &s);
        assert_eq!(sq.terms().len(), 3);
        assert_eq!(sq.coeff([2, 0, 0]), 1.0);
        assert_eq!(sq.coeff([1, 1, 0]), 2.0);
        assert_eq!(sq.coeff([0, 2, 0]), 1.0);

        let r2 = SparseTrinomial::from_terms(2, [([2, 0, 0], 1.0), ([0, 2, 0], 1.0), ([0, 0, 2], 1.0)]);
        let r4 = tri_mul(&r2, &r2);
        assert_eq!(r4.degree(), 4);
        assert_eq!(r4.terms().len(), 6);
        for e in [[4, 0, 0], [0, 4, 0], [0, 0, 4]] {
            assert_eq!(r4.coeff(e), 1.0);
        }
        for e in [[2, 2, 0], [2, 0, 2], [0, 2, 2]] {
            assert_eq!(r4.coeff(e), 2.0);
        }
    }

    #[test]
    fn cancellation_prunes_terms() {
        let a = SparseTrinomial::linear(1.0, 2.0, 0.0);
        let d = a.sub(&a);
        assert!(d.is_zero());
    }

    #[test]
    fn compose_examples() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let t = SparseTrinomial::from_terms(2, [([2, 0, 0], 1.5), ([0, 1, 1], -2.0), ([1, 0, 1], 0.25)]);
        assert_eq!(tri_compose_linear(&t, &Matrix3::identity()), t);

        let x = SparseTrinomial::linear(1.0, 0.0, 0.0);
        let j = Matrix3::new(2.0, -3.0, 0.5, 1.0, 1.0, 1.0, 0.0, 4.0, 7.0);
        let xc = tri_compose_linear(&x, &j);
        assert_eq!(xc, SparseTrinomial::linear(2.0, -3.0, 0.5));

        // random degree-3 trinomial against point evaluation
        let mut t3 = SparseTrinomial::zero(3);
        for i in 0..=3u32 {
            for k in 0..=(3 - i) {
                t3.add_term([i, 3 - i - k, k], rng.gen_range(-2.0..2.0));
            }
        }
        let j = Matrix3::from_fn(|_, _| rng.gen_range(-3.0..3.0));
        let tc = tri_compose_linear(&t3, &j);
        for _ in 0..100 {
            let p = random_point(&mut rng, 2.0);
            let want = t3.eval(&(j * p));
            let got = tc.eval(&p);
            assert!((got - want).abs() <= 1e-12 * want.abs().max(1.0), "{got} {want}");
        }
    }

    #[test]
    fn low_degree_shape_functions() {
        let r0 = 500.0;
        let sf = build_shape_functions(1, r0);
        let p00 = sf.get(0, 0);
        assert_eq!(p00.c, SparseTrinomial::constant(1.0));
        assert!(p00.s.is_zero());
        let k = 3f64.sqrt() / 3.0 / r0;
        let p10 = sf.get(1, 0);
        assert!((p10.c.coeff([0, 0, 1]) - k).abs() < 1e-18);
        assert_eq!(p10.c.terms().len(), 1);
        assert!(p10.s.is_zero());
        let p11 = sf.get(1, 1);
        assert!((p11.c.coeff([1, 0, 0]) - k).abs() < 1e-18);
        assert!((p11.s.coeff([0, 1, 0]) - k).abs() < 1e-18);
    }

    #[test]
    fn shape_functions_homogeneous_and_zonal_sine_vanishes() {
        let sf = build_shape_functions(10, 2.0);
        for p in sf.pairs() {
            for e in p.c.terms().keys().chain(p.s.terms().keys()) {
                assert_eq!(e.iter().sum::<u32>(), p.n);
            }
            if p.m == 0 {
                assert!(p.s.is_zero());
            }
        }
    }

    #[test]
    fn point_evaluation_identity() {
        let r0 = 1.7;
        let nmax = 12;
        let sf = build_shape_functions(nmax, r0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = random_point(&mut rng, 2.0);
            let r = p.norm();
            let lam = p.y.atan2(p.x);
            let leg = legendre_table(nmax, p.z / r).unwrap();
            for n in 0..=nmax {
                let radial = (r / r0).powi(n as i32) / (2 * n + 1) as f64;
                for m in 0..=n {
                    let base = radial * leg.get(n, m);
                    let want_c = base * (m as f64 * lam).cos();
                    let want_s = base * (m as f64 * lam).sin();
                    let pair = sf.get(n, m);
                    let tol = 1e-11 * radial * (2 * n + 1) as f64;
                    assert!((pair.c.eval(&p) - want_c).abs() <= tol, "c n={n} m={m}");
                    assert!((pair.s.eval(&p) - want_s).abs() <= tol, "s n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn rotation_about_z() {
        let sf = build_shape_functions(6, 1.0);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = random_point(&mut rng, 1.5);
            let alpha: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            let rot = nalgebra::Rotation3::from_axis_angle(&Vector3::z_axis(), alpha);
            let q = rot * p;
            for pair in sf.pairs() {
                let ma = pair.m as f64 * alpha;
                let want = ma.cos() * pair.c.eval(&p) - ma.sin() * pair.s.eval(&p);
                let got = pair.c.eval(&q);
                assert!((got - want).abs() < 1e-11, "n={} m={}", pair.n, pair.m);
            }
        }
    }
}
