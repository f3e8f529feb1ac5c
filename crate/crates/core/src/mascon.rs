//! Point-mass reference model sharing the slab discretization of
//! [`crate::shcoeff`]: one mascon per (tetrahedron, slab).

use nalgebra::Vector3;
use rayon::prelude::*;
use thiserror::Error;

use crate::density::{DensityError, DensityModel};
use crate::mesh::TriangleMesh;
use crate::shcoeff::{RadialDiscretization, ShError};
use crate::sum::KahanSum;

/// Queries closer than this to a mascon are rejected.
pub const COINCIDENCE_RADIUS: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MasconError {
    #[error("{0}")]
    Discretization(#[from] ShError),
    #[error("density evaluation failed in tetrahedron {tet}: {source}")]
    Density { tet: usize, source: DensityError },
    #[error("query point coincides with mascon {index}")]
    SingularQuery { index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointMass {
    pub position: Vector3<f64>,
    pub mass: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointMassSet {
    masses: Vec<PointMass>,
    total_mass: f64,
}

impl PointMassSet {
    pub fn new(masses: Vec<PointMass>) -> Self {
        let mut total = KahanSum::default();
        for m in &masses {
            total.add(m.mass);
        }
        Self {
            masses,
            total_mass: total.value(),
        }
    }

    pub fn masses(&self) -> &[PointMass] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.total_mass
    }

    /// Mass-weighted mean position.
    pub fn center_of_mass(&self) -> Vector3<f64> {
        let mut acc = [KahanSum::default(), KahanSum::default(), KahanSum::default()];
        for m in &self.masses {
            for k in 0..3 {
                acc[k].add(m.mass * m.position[k]);
            }
        }
        Vector3::new(acc[0].value(), acc[1].value(), acc[2].value()) / self.total_mass
    }
}

/// Builds `ρ_q detJ v_slab(q)` at `J X_q` for every tetrahedron and slab.
pub fn build_mascons(
    mesh: &TriangleMesh,
    density: &DensityModel,
    n_q: usize,
) -> Result<PointMassSet, MasconError> {
    let disc = RadialDiscretization::new(n_q)?;
    let tets = mesh.tetrahedralize();
    let per_tet: Result<Vec<Vec<PointMass>>, MasconError> = tets
        .par_iter()
        .enumerate()
        .map(|(t, tet)| {
            (0..n_q)
                .map(|q| {
                    let position = tet.map(&disc.center(q));
                    let rho = density
                        .density_at(&position)
                        .map_err(|source| MasconError::Density { tet: t, source })?;
                    Ok(PointMass {
                        position,
                        mass: rho * tet.det_j * disc.slab_volume(q),
                    })
                })
                .collect()
        })
        .collect();
    Ok(PointMassSet::new(per_tet?.into_iter().flatten().collect()))
}

/// `-G Σ m_i (x - p_i)/|x - p_i|³`.
pub fn mascon_acceleration(set: &PointMassSet, x: &Vector3<f64>, g: f64) -> Result<Vector3<f64>, MasconError> {
    let mut acc = [KahanSum::default(), KahanSum::default(), KahanSum::default()];
    for (index, m) in set.masses.iter().enumerate() {
        let d = x - m.position;
        let r = d.norm();
        if r < COINCIDENCE_RADIUS {
            return Err(MasconError::SingularQuery { index });
        }
        let f = m.mass / (r * r * r);
        for k in 0..3 {
            acc[k].add(f * d[k]);
        }
    }
    Ok(Vector3::new(acc[0].value(), acc[1].value(), acc[2].value()) * -g)
}

/// `G Σ m_i / |x - p_i|`, positive like the harmonic series.
pub fn mascon_potential(set: &PointMassSet, x: &Vector3<f64>, g: f64) -> Result<f64, MasconError> {
    let mut acc = KahanSum::default();
    for (index, m) in set.masses.iter().enumerate() {
        let r = (x - m.position).norm();
        if r < COINCIDENCE_RADIUS {
            return Err(MasconError::SingularQuery { index });
        }
        acc.add(m.mass / r);
    }
    Ok(g * acc.value())
}

/// Parallel over query points; output order matches `points`.
pub fn mascon_acceleration_batch(
    set: &PointMassSet,
    points: &[Vector3<f64>],
    g: f64,
) -> Vec<Result<Vector3<f64>, MasconError>> {
    points.par_iter().map(|x| mascon_acceleration(set, x, g)).collect()
}

/// One row of an SH-versus-mascon comparison map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub lon_deg: f64,
    pub lat_deg: f64,
    pub a_sh: f64,
    pub a_mascon: f64,
    /// `|a_sh - a_mascon|` as vectors, m/s².
    pub delta: f64,
}

impl ComparisonRow {
    pub fn delta_mgal(&self) -> f64 {
        self.delta / crate::MGAL
    }
}
