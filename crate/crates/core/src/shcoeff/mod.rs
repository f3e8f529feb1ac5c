//! Variable-density spherical-harmonics coefficients of a polyhedron.
//!
//! Each origin-anchored tetrahedron `x = J X` is mapped onto the standard
//! simplex and sliced into `n_q` uniform slabs along `Z`. Slab `q` gets the
//! constant density `ρ_q = ρ(J X_q)` sampled at its center `X_q`, so
//!
//! ```text
//! I_nm = Σ_s det J_s Σ_{i+j+k=n} p^s_ijk Σ_q ρ_q (h(q⁺,i,j,k) - h(q⁻,i,j,k))
//! ```
//!
//! where `p^s` are the shape-function coefficients expressed in simplex
//! coordinates. `M = I_00` and `C̄nm = I_nm / M`.
//!
//! Rather than re-expressing every shape function per tetrahedron, the
//! pipeline maps the monomial basis `x^a y^b z^c` (a linear change of
//! variables per tetrahedron), integrates it over the sampled slabs, sums the
//! resulting body-frame moments over all tetrahedra and contracts them with
//! the shape functions once at the end. The two orders of summation are
//! algebraically identical.

mod model;
pub mod special;

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::density::{DensityError, DensityModel};
use crate::legendre::{tri_index, tri_len};
use crate::mesh::{Tetrahedron, TriangleMesh};
use crate::sum::KahanSum;
use crate::trinomial::{build_shape_functions, SparseTrinomial};

pub use model::{Provenance, SHModel, FORMAT_VERSION};
pub use special::{beta_fn, incomplete_beta, slab_integral_h, slab_volume};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid request: {0}")]
    InvalidInput(String),
    #[error("density evaluation failed in tetrahedron {tet}: {source}")]
    Density { tet: usize, source: DensityError },
    #[error("non-finite contribution from tetrahedron {tet}")]
    NonFinite { tet: usize },
    #[error("total mass {0} kg is not positive")]
    NonPositiveMass(f64),
    #[error("center of mass needs nmax >= 1")]
    InsufficientDegree,
    #[error("invalid SH model: {0}")]
    InvalidModel(String),
}

/// Uniform partition of the simplex `Z` coordinate into `n_q` slabs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDiscretization {
    n_q: usize,
}

impl RadialDiscretization {
    pub fn new(n_q: usize) -> Result<Self, ShError> {
        if n_q == 0 {
            return Err(ShError::InvalidInput("n_q must be at least 1".into()));
        }
        Ok(Self { n_q })
    }

    pub fn n_q(&self) -> usize {
        self.n_q
    }

    /// `(q⁻, q⁺)` of slab `q`, 0-based.
    pub fn bounds(&self, q: usize) -> (f64, f64) {
        let n = self.n_q as f64;
        let hi = if q + 1 == self.n_q { 1.0 } else { (q + 1) as f64 / n };
        (q as f64 / n, hi)
    }

    /// Slab index containing simplex coordinate `z`; the upper bound of a
    /// slab belongs to that slab.
    pub fn slab_of(&self, z: f64) -> usize {
        let q = (z * self.n_q as f64).ceil() as isize - 1;
        q.clamp(0, self.n_q as isize - 1) as usize
    }

    /// Sampling point of slab `q` in simplex coordinates: the centroid of
    /// the triangular cross-section at the slab mid-plane.
    pub fn center(&self, q: usize) -> Vector3<f64> {
        let (lo, hi) = self.bounds(q);
        let z = 0.5 * (lo + hi);
        let xy = (1.0 - z) / 3.0;
        Vector3::new(xy, xy, z)
    }

    /// Volume fraction of slab `q` within the standard simplex.
    pub fn slab_volume(&self, q: usize) -> f64 {
        let (lo, hi) = self.bounds(q);
        slab_volume(lo, hi)
    }
}

/// Body-frame sampling points and densities of every slab of `tet`.
pub fn slab_densities(
    tet: &Tetrahedron,
    density: &DensityModel,
    disc: &RadialDiscretization,
) -> Result<Vec<(Vector3<f64>, f64)>, DensityError> {
    (0..disc.n_q())
        .map(|q| {
            let x = tet.map(&disc.center(q));
            density.density_at(&x).map(|rho| (x, rho))
        })
        .collect()
}

/// How per-chunk partial sums are combined across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    /// Fixed chunking and in-order combination: bit-identical results for
    /// any thread count.
    #[default]
    Ordered,
    /// Work-stealing tree reduction; last-bit results depend on scheduling.
    Unordered,
}

/// Inputs of a coefficient computation beyond mesh and density.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRequest {
    pub nmax: usize,
    pub n_q: usize,
    /// Reference radius; the mesh's Brillouin radius when `None`.
    pub r0: Option<f64>,
    pub g: f64,
    pub reduction: Reduction,
}

impl CoefficientRequest {
    pub fn new(nmax: usize, n_q: usize) -> Self {
        Self {
            nmax,
            n_q,
            r0: None,
            g: crate::G_CODATA_2018,
            reduction: Reduction::Ordered,
        }
    }

    pub fn with_r0(mut self, r0: f64) -> Self {
        self.r0 = Some(r0);
        self
    }

    pub fn with_g(mut self, g: f64) -> Self {
        self.g = g;
        self
    }

    pub fn with_reduction(mut self, reduction: Reduction) -> Self {
        self.reduction = reduction;
        self
    }
}

/// Dense indexing of all monomials `x^i y^j z^k` with `i+j+k ≤ nmax`.
///
/// Degree `d` occupies `[offset(d), offset(d+1))`; inside a degree the local
/// index of `(i, j, k)` is `s(s+1)/2 + k` with `s = j + k`.
#[derive(Debug, Clone)]
pub(crate) struct MonomialBasis {
    exps: Vec<[u32; 3]>,
    /// For every monomial but 1: (predecessor index, variable multiplied in).
    pred: Vec<(usize, usize)>,
}

impl MonomialBasis {
    pub(crate) fn new(nmax: usize) -> Self {
        let mut exps = Vec::with_capacity(Self::offset(nmax + 1));
        for d in 0..=nmax as u32 {
            for s in 0..=d {
                for k in 0..=s {
                    exps.push([d - s, s - k, k]);
                }
            }
        }
        let mut basis = Self {
            exps: exps.clone(),
            pred: Vec::with_capacity(exps.len()),
        };
        basis.pred.push((0, 0));
        for e in exps.iter().skip(1) {
            let axis = if e[0] > 0 {
                0
            } else if e[1] > 0 {
                1
            } else {
                2
            };
            let mut p = *e;
            p[axis] -= 1;
            basis.pred.push((basis.index(p), axis));
        }
        basis
    }

    #[inline]
    pub(crate) fn offset(d: usize) -> usize {
        d * (d + 1) * (d + 2) / 6
    }

    #[inline]
    pub(crate) fn local(e: [u32; 3]) -> usize {
        let s = (e[1] + e[2]) as usize;
        s * (s + 1) / 2 + e[2] as usize
    }

    #[inline]
    pub(crate) fn index(&self, e: [u32; 3]) -> usize {
        Self::offset((e[0] + e[1] + e[2]) as usize) + Self::local(e)
    }

    pub(crate) fn len(&self) -> usize {
        self.exps.len()
    }

    fn degree_len(d: usize) -> usize {
        (d + 1) * (d + 2) / 2
    }
}

/// Table of `Δh(q, i, j, k) = h(q⁺) - h(q⁻)` for every slab and monomial.
#[derive(Debug, Clone)]
pub(crate) struct SlabMoments {
    n_mono: usize,
    delta: Vec<f64>,
}

impl SlabMoments {
    pub(crate) fn new(basis: &MonomialBasis, disc: &RadialDiscretization) -> Result<Self, ShError> {
        let n_mono = basis.len();
        let mut delta = vec![0.0; n_mono * disc.n_q()];
        for (g, e) in basis.exps.iter().enumerate() {
            let mut prev = 0.0;
            for q in 0..disc.n_q() {
                let (_, hi) = disc.bounds(q);
                let cur = slab_integral_h(hi, e[0], e[1], e[2])?;
                delta[q * n_mono + g] = cur - prev;
                prev = cur;
            }
        }
        Ok(Self { n_mono, delta })
    }

    #[inline]
    fn row(&self, q: usize) -> &[f64] {
        &self.delta[q * self.n_mono..(q + 1) * self.n_mono]
    }
}

/// Reusable per-thread buffers for one tetrahedron.
struct TetWorkspace {
    /// Coefficients of each mapped monomial, concatenated per monomial.
    mapped: Vec<f64>,
    mapped_off: Vec<usize>,
    weights: Vec<f64>,
}

impl TetWorkspace {
    fn new(basis: &MonomialBasis) -> Self {
        let mut mapped_off = Vec::with_capacity(basis.len() + 1);
        let mut total = 0;
        for e in &basis.exps {
            mapped_off.push(total);
            total += MonomialBasis::degree_len((e[0] + e[1] + e[2]) as usize);
        }
        mapped_off.push(total);
        Self {
            mapped: vec![0.0; total],
            mapped_off,
            weights: vec![0.0; basis.len()],
        }
    }
}

/// Adds the body-frame monomial moments `det J ∫ ρ (x/R0)^a (y/R0)^b
/// (z/R0)^c dX` of one tetrahedron to `out`.
fn tet_moments(
    tet: &Tetrahedron,
    rhos: &[f64],
    basis: &MonomialBasis,
    slabs: &SlabMoments,
    inv_r0: f64,
    ws: &mut TetWorkspace,
    out: &mut [f64],
) {
    let n_mono = basis.len();

    // W_ijk = Σ_q ρ_q Δh(q, i, j, k)
    ws.weights.iter_mut().for_each(|w| *w = 0.0);
    for (q, rho) in rhos.iter().enumerate() {
        for (w, dh) in ws.weights.iter_mut().zip(slabs.row(q)) {
            *w += rho * dh;
        }
    }

    // (x/R0, y/R0, z/R0) as linear forms in simplex coordinates
    let j = tet.jacobian() * inv_r0;
    let forms = [
        [j[(0, 0)], j[(0, 1)], j[(0, 2)]],
        [j[(1, 0)], j[(1, 1)], j[(1, 2)]],
        [j[(2, 0)], j[(2, 1)], j[(2, 2)]],
    ];

    ws.mapped[0] = 1.0;
    for g in 1..n_mono {
        let (p, axis) = basis.pred[g];
        let e = basis.exps[g];
        let d = (e[0] + e[1] + e[2]) as usize;
        let (pstart, pend) = (ws.mapped_off[p], ws.mapped_off[p + 1]);
        let start = ws.mapped_off[g];
        let (head, tail) = ws.mapped.split_at_mut(start);
        let dst = &mut tail[..MonomialBasis::degree_len(d)];
        dst.iter_mut().for_each(|v| *v = 0.0);
        let src = &head[pstart..pend];
        let form = forms[axis];
        // walk the degree d-1 monomials in local order
        let dm1 = (d - 1) as u32;
        let mut li = 0;
        for s in 0..=dm1 {
            for k in 0..=s {
                let v = src[li];
                li += 1;
                if v == 0.0 {
                    continue;
                }
                let (i, jj) = (dm1 - s, s - k);
                dst[MonomialBasis::local([i + 1, jj, k])] += v * form[0];
                dst[MonomialBasis::local([i, jj + 1, k])] += v * form[1];
                dst[MonomialBasis::local([i, jj, k + 1])] += v * form[2];
            }
        }
    }

    for g in 0..n_mono {
        let e = basis.exps[g];
        let d = (e[0] + e[1] + e[2]) as usize;
        let coeffs = &ws.mapped[ws.mapped_off[g]..ws.mapped_off[g + 1]];
        let w = &ws.weights[MonomialBasis::offset(d)..MonomialBasis::offset(d + 1)];
        let dot: f64 = coeffs.iter().zip(w).map(|(a, b)| a * b).sum();
        out[g] = tet.det_j * dot;
    }
}

#[derive(Clone)]
struct Accumulator {
    sums: Vec<KahanSum>,
}

impl Accumulator {
    fn new(n: usize) -> Self {
        Self {
            sums: vec![KahanSum::default(); n],
        }
    }

    fn add(&mut self, values: &[f64]) {
        for (s, v) in self.sums.iter_mut().zip(values) {
            s.add(*v);
        }
    }

    fn merge(mut self, other: &Accumulator) -> Self {
        for (s, o) in self.sums.iter_mut().zip(&other.sums) {
            s.merge(o);
        }
        self
    }
}

const CHUNK: usize = 256;

/// Body-frame monomial moments of the whole body, in `MonomialBasis` order,
/// with coordinates scaled by `1/r0`. Entry 0 is the mass.
pub(crate) fn body_moments(
    tets: &[Tetrahedron],
    density: &DensityModel,
    basis: &MonomialBasis,
    disc: &RadialDiscretization,
    r0: f64,
    reduction: Reduction,
) -> Result<Vec<f64>, ShError> {
    let slabs = SlabMoments::new(basis, disc)?;
    let n_mono = basis.len();
    let inv_r0 = 1.0 / r0;

    let process_chunk = |(ci, chunk): (usize, &[Tetrahedron])| -> Result<Accumulator, ShError> {
        let mut acc = Accumulator::new(n_mono);
        let mut ws = TetWorkspace::new(basis);
        let mut out = vec![0.0; n_mono];
        let mut rhos = vec![0.0; disc.n_q()];
        for (k, tet) in chunk.iter().enumerate() {
            let idx = ci * CHUNK + k;
            for (q, rho) in rhos.iter_mut().enumerate() {
                let x = tet.map(&disc.center(q));
                *rho = density
                    .density_at(&x)
                    .map_err(|source| ShError::Density { tet: idx, source })?;
            }
            tet_moments(tet, &rhos, basis, &slabs, inv_r0, &mut ws, &mut out);
            if !out.iter().all(|v| v.is_finite()) {
                return Err(ShError::NonFinite { tet: idx });
            }
            acc.add(&out);
        }
        Ok(acc)
    };

    let total = match reduction {
        Reduction::Ordered => {
            let parts: Vec<Accumulator> = tets
                .par_chunks(CHUNK)
                .enumerate()
                .map(process_chunk)
                .collect::<Result<_, _>>()?;
            parts
                .iter()
                .fold(Accumulator::new(n_mono), |acc, p| acc.merge(p))
        }
        Reduction::Unordered => tets
            .par_chunks(CHUNK)
            .enumerate()
            .map(process_chunk)
            .try_reduce(|| Accumulator::new(n_mono), |a, b| Ok(a.merge(&b)))?,
    };
    Ok(total.sums.iter().map(|s| s.value()).collect())
}

/// Dense shape-function coefficients for `R0 = 1` in `MonomialBasis` order.
fn dense_shape(basis: &MonomialBasis, t: &SparseTrinomial) -> Vec<(usize, f64)> {
    t.terms().iter().map(|(e, c)| (basis.index(*e), *c)).collect()
}

/// Computes the normalized coefficients of `mesh` with interior `density`.
pub fn compute_coefficients(
    mesh: &TriangleMesh,
    density: &DensityModel,
    req: &CoefficientRequest,
) -> Result<SHModel, ShError> {
    density
        .validate()
        .map_err(|e| ShError::InvalidInput(e.to_string()))?;
    let disc = RadialDiscretization::new(req.n_q)?;
    let brillouin = mesh.brillouin_radius();
    let r0 = req.r0.unwrap_or(brillouin);
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(ShError::InvalidInput(format!("R0 = {r0} must be positive")));
    }
    if !(req.g.is_finite() && req.g > 0.0) {
        return Err(ShError::InvalidInput(format!("G = {} must be positive", req.g)));
    }

    let basis = MonomialBasis::new(req.nmax);
    let tets = mesh.tetrahedralize();
    let moments = body_moments(&tets, density, &basis, &disc, r0, req.reduction)?;
    let mass = moments[0];
    if !(mass > 0.0) {
        return Err(ShError::NonPositiveMass(mass));
    }

    let shapes = build_shape_functions(req.nmax, 1.0);
    let mut cbar = vec![0.0; tri_len(req.nmax)];
    let mut sbar = vec![0.0; tri_len(req.nmax)];
    for pair in shapes.pairs() {
        let idx = tri_index(pair.n as usize, pair.m as usize);
        let contract = |t: &SparseTrinomial| {
            let mut acc = KahanSum::default();
            for (g, c) in dense_shape(&basis, t) {
                acc.add(c * moments[g]);
            }
            acc.value() / mass
        };
        cbar[idx] = contract(&pair.c);
        sbar[idx] = if pair.m == 0 { 0.0 } else { contract(&pair.s) };
    }
    cbar[0] = 1.0;

    SHModel::new(
        req.g * mass,
        r0,
        req.nmax,
        cbar,
        sbar,
        Some(Provenance {
            mesh_id: mesh.content_id(),
            density_hash: density.spec_hash(),
            n_q: req.n_q,
            g: req.g,
            brillouin_radius_m: Some(brillouin),
        }),
    )
}

/// Center of mass from the degree-1 coefficients.
pub fn center_of_mass(model: &SHModel) -> Result<Vector3<f64>, ShError> {
    model.center_of_mass()
}
