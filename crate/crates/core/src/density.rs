//! Interior density distributions.
//!
//! Densities are evaluated pointwise. Discontinuities follow fixed tie-break
//! rules: a half-space takes `rho_pos` on its boundary plane, and radial
//! shells assign a radius equal to a break to the inner shell.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("invalid density model: {0}")]
    Invalid(String),
    #[error("point ({x}, {y}, {z}) lies outside the tabulated grid")]
    OutOfDomain { x: f64, y: f64, z: f64 },
    #[error("could not parse density spec: {0}")]
    Spec(String),
}

/// Density field in kg/m^3. The serialized form is the CLI density spec.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DensityModel {
    Uniform {
        rho: f64,
    },
    RadialShells {
        /// Strictly ascending shell radii, m.
        breaks_m: Vec<f64>,
        /// One density per shell, innermost first; `breaks_m.len() + 1` values.
        values_kgm3: Vec<f64>,
    },
    HalfSpace {
        normal: [f64; 3],
        offset_m: f64,
        rho_pos: f64,
        rho_neg: f64,
    },
    Tabulated(DensityGrid),
}

/// Regular grid sampled with trilinear interpolation. Values are stored with
/// x varying fastest, then y, then z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityGrid {
    pub origin_m: [f64; 3],
    pub spacing_m: [f64; 3],
    pub dims: [usize; 3],
    pub values_kgm3: Vec<f64>,
}

fn positive_finite(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

impl DensityModel {
    pub fn uniform(rho: f64) -> Self {
        DensityModel::Uniform { rho }
    }

    /// Parses and validates a JSON density spec.
    pub fn from_json(text: &str) -> Result<Self, DensityError> {
        let model: DensityModel =
            serde_json::from_str(text).map_err(|e| DensityError::Spec(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("density model serializes")
    }

    /// SHA-256 of the canonical JSON form.
    pub fn spec_hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        let bad = |m: &str| Err(DensityError::Invalid(m.to_string()));
        match self {
            DensityModel::Uniform { rho } => {
                if !positive_finite(*rho) {
                    return bad("uniform density must be positive and finite");
                }
            }
            DensityModel::RadialShells {
                breaks_m,
                values_kgm3,
            } => {
                if values_kgm3.len() != breaks_m.len() + 1 {
                    return bad("radial shells need exactly one more value than breaks");
                }
                if !values_kgm3.iter().all(|&v| positive_finite(v)) {
                    return bad("shell densities must be positive and finite");
                }
                if !breaks_m.iter().all(|b| b.is_finite() && *b >= 0.0) {
                    return bad("shell breaks must be finite and non-negative");
                }
                if breaks_m.windows(2).any(|w| w[1] <= w[0]) {
                    return bad("shell breaks must be strictly ascending");
                }
            }
            DensityModel::HalfSpace {
                normal,
                offset_m,
                rho_pos,
                rho_neg,
            } => {
                let n = Vector3::from(*normal).norm();
                if (n - 1.0).abs() > 1e-12 {
                    return bad("half-space normal must have unit norm");
                }
                if !offset_m.is_finite() {
                    return bad("half-space offset must be finite");
                }
                if !positive_finite(*rho_pos) || !positive_finite(*rho_neg) {
                    return bad("half-space densities must be positive and finite");
                }
            }
            DensityModel::Tabulated(grid) => grid.validate()?,
        }
        Ok(())
    }

    /// Density at `x`, kg/m^3.
    pub fn density_at(&self, x: &Vector3<f64>) -> Result<f64, DensityError> {
        match self {
            DensityModel::Uniform { rho } => Ok(*rho),
            DensityModel::RadialShells {
                breaks_m,
                values_kgm3,
            } => {
                let r = x.norm();
                // first shell whose outer break is >= r; r == break stays inside
                let shell = breaks_m.partition_point(|&b| b < r);
                Ok(values_kgm3[shell])
            }
            DensityModel::HalfSpace {
                normal,
                offset_m,
                rho_pos,
                rho_neg,
            } => {
                let s = Vector3::from(*normal).dot(x);
                Ok(if s >= *offset_m { *rho_pos } else { *rho_neg })
            }
            DensityModel::Tabulated(grid) => grid.sample(x),
        }
    }
}

impl DensityGrid {
    fn validate(&self) -> Result<(), DensityError> {
        let bad = |m: &str| Err(DensityError::Invalid(m.to_string()));
        if self.dims.iter().any(|&d| d < 2) {
            return bad("tabulated grid needs at least 2 nodes per axis");
        }
        if !self.spacing_m.iter().all(|&h| positive_finite(h)) {
            return bad("tabulated grid spacing must be positive");
        }
        if !self.origin_m.iter().all(|o| o.is_finite()) {
            return bad("tabulated grid origin must be finite");
        }
        if self.values_kgm3.len() != self.dims.iter().product::<usize>() {
            return bad("tabulated grid value count does not match dims");
        }
        if !self.values_kgm3.iter().all(|&v| positive_finite(v)) {
            return bad("tabulated densities must be positive and finite");
        }
        Ok(())
    }

    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values_kgm3[i + self.dims[0] * (j + self.dims[1] * k)]
    }

    fn sample(&self, x: &Vector3<f64>) -> Result<f64, DensityError> {
        let mut cell = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let t = (x[a] - self.origin_m[a]) / self.spacing_m[a];
            let last = (self.dims[a] - 1) as f64;
            if !(t >= 0.0 && t <= last) {
                return Err(DensityError::OutOfDomain {
                    x: x.x,
                    y: x.y,
                    z: x.z,
                });
            }
            let c = (t.floor() as usize).min(self.dims[a] - 2);
            cell[a] = c;
            frac[a] = t - c as f64;
        }
        let [i, j, k] = cell;
        let [fx, fy, fz] = frac;
        let lerp = |a: f64, b: f64, t: f64| a + (b - a) * t;
        let c00 = lerp(self.value(i, j, k), self.value(i + 1, j, k), fx);
        let c10 = lerp(self.value(i, j + 1, k), self.value(i + 1, j + 1, k), fx);
        let c01 = lerp(self.value(i, j, k + 1), self.value(i + 1, j, k + 1), fx);
        let c11 = lerp(self.value(i, j + 1, k + 1), self.value(i + 1, j + 1, k + 1), fx);
        Ok(lerp(lerp(c00, c10, fy), lerp(c01, c11, fy), fz))
    }
}
