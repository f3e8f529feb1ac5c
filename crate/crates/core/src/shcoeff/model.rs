use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::ShError;
use crate::legendre::{tri_index, tri_len};

/// Current SHModel file schema version.
pub const FORMAT_VERSION: u32 = 1;

/// Where a coefficient set came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// SHA-256 of the mesh geometry.
    pub mesh_id: String,
    /// SHA-256 of the canonical density spec.
    pub density_hash: String,
    pub n_q: usize,
    /// Gravitational constant used for `mu`, m^3 kg^-1 s^-2.
    #[serde(rename = "G")]
    pub g: f64,
    /// Largest vertex distance of the source mesh, m.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brillouin_radius_m: Option<f64>,
}

/// Normalized spherical-harmonics gravity model.
#[derive(Debug, Clone, PartialEq)]
pub struct SHModel {
    mu: f64,
    r0: f64,
    nmax: usize,
    cbar: Vec<f64>,
    sbar: Vec<f64>,
    provenance: Option<Provenance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SHModelFile {
    format_version: u32,
    mu_m3s2: f64,
    #[serde(rename = "R0_m")]
    r0_m: f64,
    nmax: usize,
    #[serde(rename = "Cbar")]
    cbar: Vec<Vec<f64>>,
    #[serde(rename = "Sbar")]
    sbar: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl SHModel {
    /// Builds a model from row-major triangular coefficient arrays.
    pub fn new(
        mu: f64,
        r0: f64,
        nmax: usize,
        cbar: Vec<f64>,
        sbar: Vec<f64>,
        provenance: Option<Provenance>,
    ) -> Result<Self, ShError> {
        let model = Self {
            mu,
            r0,
            nmax,
            cbar,
            sbar,
            provenance,
        };
        model.validate()?;
        Ok(model)
    }

    /// Keplerian field: `C̄00 = 1`, everything else zero.
    pub fn point_mass(mu: f64, r0: f64, nmax: usize) -> Self {
        let mut cbar = vec![0.0; tri_len(nmax)];
        cbar[0] = 1.0;
        Self {
            mu,
            r0,
            nmax,
            cbar,
            sbar: vec![0.0; tri_len(nmax)],
            provenance: None,
        }
    }

    fn validate(&self) -> Result<(), ShError> {
        let len = tri_len(self.nmax);
        if self.cbar.len() != len || self.sbar.len() != len {
            return Err(ShError::InvalidModel(format!(
                "expected {len} coefficients for nmax {}",
                self.nmax
            )));
        }
        if !(self.mu.is_finite() && self.mu > 0.0) {
            return Err(ShError::InvalidModel(format!("mu = {} must be positive", self.mu)));
        }
        if !(self.r0.is_finite() && self.r0 > 0.0) {
            return Err(ShError::InvalidModel(format!("R0 = {} must be positive", self.r0)));
        }
        if !self.cbar.iter().chain(&self.sbar).all(|c| c.is_finite()) {
            return Err(ShError::InvalidModel("non-finite coefficient".into()));
        }
        if (self.cbar[0] - 1.0).abs() > 1e-12 {
            return Err(ShError::InvalidModel(format!("C00 = {} is not 1", self.cbar[0])));
        }
        for n in 0..=self.nmax {
            if self.sbar[tri_index(n, 0)] != 0.0 {
                return Err(ShError::InvalidModel(format!("S{n}0 must be zero")));
            }
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn r0(&self) -> f64 {
        self.r0
    }

    pub fn nmax(&self) -> usize {
        self.nmax
    }

    #[inline]
    pub fn c(&self, n: usize, m: usize) -> f64 {
        self.cbar[tri_index(n, m)]
    }

    #[inline]
    pub fn s(&self, n: usize, m: usize) -> f64 {
        self.sbar[tri_index(n, m)]
    }

    pub fn cbar(&self) -> &[f64] {
        &self.cbar
    }

    pub fn sbar(&self) -> &[f64] {
        &self.sbar
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    /// Brillouin radius recorded at generation time, or `R0` when unknown.
    pub fn brillouin_radius(&self) -> f64 {
        self.provenance
            .as_ref()
            .and_then(|p| p.brillouin_radius_m)
            .unwrap_or(self.r0)
    }

    /// Mass implied by `mu` and the recorded gravitational constant.
    pub fn mass(&self) -> Option<f64> {
        self.provenance.as_ref().map(|p| self.mu / p.g)
    }

    /// Copy restricted to degrees `≤ nmax`.
    pub fn truncated(&self, nmax: usize) -> Self {
        let nmax = nmax.min(self.nmax);
        let len = tri_len(nmax);
        Self {
            mu: self.mu,
            r0: self.r0,
            nmax,
            cbar: self.cbar[..len].to_vec(),
            sbar: self.sbar[..len].to_vec(),
            provenance: self.provenance.clone(),
        }
    }

    /// Center of mass from the degree-1 terms: `√3 R0 (C̄11, S̄11, C̄10)`.
    pub fn center_of_mass(&self) -> Result<Vector3<f64>, ShError> {
        if self.nmax < 1 {
            return Err(ShError::InsufficientDegree);
        }
        Ok(Vector3::new(self.c(1, 1), self.s(1, 1), self.c(1, 0)) * 3f64.sqrt() * self.r0)
    }

    pub fn to_json(&self) -> String {
        let rows = |flat: &[f64]| {
            (0..=self.nmax)
                .map(|n| flat[tri_index(n, 0)..=tri_index(n, n)].to_vec())
                .collect::<Vec<_>>()
        };
        let file = SHModelFile {
            format_version: FORMAT_VERSION,
            mu_m3s2: self.mu,
            r0_m: self.r0,
            nmax: self.nmax,
            cbar: rows(&self.cbar),
            sbar: rows(&self.sbar),
            provenance: self.provenance.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ShError> {
        let file: SHModelFile =
            serde_json::from_str(text).map_err(|e| ShError::InvalidModel(e.to_string()))?;
        if file.format_version != FORMAT_VERSION {
            return Err(ShError::InvalidModel(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        let flatten = |rows: Vec<Vec<f64>>, name: &str| -> Result<Vec<f64>, ShError> {
            if rows.len() != file.nmax + 1 {
                return Err(ShError::InvalidModel(format!("{name} needs {} rows", file.nmax + 1)));
            }
            let mut out = Vec::with_capacity(tri_len(file.nmax));
            for (n, row) in rows.into_iter().enumerate() {
                if row.len() != n + 1 {
                    return Err(ShError::InvalidModel(format!("{name} row {n} needs {} entries", n + 1)));
                }
                out.extend(row);
            }
            Ok(out)
        };
        let cbar = flatten(file.cbar, "Cbar")?;
        let sbar = flatten(file.sbar, "Sbar")?;
        Self::new(file.mu_m3s2, file.r0_m, file.nmax, cbar, sbar, file.provenance)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SHModel {
        let mut cbar = vec![0.0; tri_len(2)];
        let mut sbar = vec![0.0; tri_len(2)];
        cbar[0] = 1.0;
        cbar[tri_index(1, 1)] = 0.089;
        sbar[tri_index(2, 1)] = -1.25e-3;
        cbar[tri_index(2, 0)] = -0.0123456789012345;
        SHModel::new(
            93.3,
            500.0,
            2,
            cbar,
            sbar,
            Some(Provenance {
                mesh_id: "abc".into(),
                density_hash: "def".into(),
                n_q: 10,
                g: 6.6743e-11,
                brillouin_radius_m: Some(500.0),
            }),
        )
        .unwrap()
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = sample();
        let text = m.to_json();
        assert!(text.contains("\"Cbar\""));
        assert!(text.contains("\"R0_m\""));
        assert!(text.contains("\"format_version\": 1"));
        let back = SHModel::from_json(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_json(), text);
    }

    #[test]
    fn rejects_bad_files() {
        let m = sample();
        let bad_version = m.to_json().replace("\"format_version\": 1", "\"format_version\": 9");
        assert!(SHModel::from_json(&bad_version).is_err());
        let mut sbar = m.sbar().to_vec();
        sbar[tri_index(2, 0)] = 1e-3;
        assert!(SHModel::new(1.0, 1.0, 2, m.cbar().to_vec(), sbar, None).is_err());
        let mut cbar = m.cbar().to_vec();
        cbar[0] = 0.5;
        assert!(SHModel::new(1.0, 1.0, 2, cbar, m.sbar().to_vec(), None).is_err());
    }

    #[test]
    fn center_of_mass_needs_degree_one() {
        let pm = SHModel::point_mass(1.0, 1.0, 0);
        assert!(matches!(pm.center_of_mass(), Err(ShError::InsufficientDegree)));
        let com = sample().center_of_mass().unwrap();
        assert!((com.x - 0.089 * 3f64.sqrt() * 500.0).abs() < 1e-12);
        assert_eq!(com.y, 0.0);
    }
}
