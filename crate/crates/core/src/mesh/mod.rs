//! Closed triangulated shape models and their origin-anchored tetrahedral
//! decomposition.
//!
//! Every face `(a, b, c)` together with the frame origin spans one
//! tetrahedron. Volumes are signed, so the decomposition is valid whether or
//! not the origin lies inside the body: overlapping regions cancel.

mod obj;
pub mod shapes;

use std::collections::HashMap;

use nalgebra::{Matrix3, Vector3};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use obj::{parse_obj, ObjOptions};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeshError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("face {face} references vertex {index} but the mesh has {vertex_count} vertices")]
    IndexOutOfRange {
        face: usize,
        index: i64,
        vertex_count: usize,
    },
    #[error("face {face} repeats a vertex")]
    RepeatedVertex { face: usize },
    #[error("open surface: edge ({a}, {b}) is shared by {count} face(s)")]
    OpenSurface { a: usize, b: usize, count: usize },
    #[error("inconsistent winding: directed edge ({a}, {b}) appears in more than one face")]
    InconsistentWinding { a: usize, b: usize },
    #[error("total signed volume {volume} m^3 is not positive (inward winding?)")]
    NonPositiveVolume { volume: f64 },
    #[error("mesh has no faces")]
    Empty,
}

/// A closed, consistently wound triangle mesh in the body-fixed frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TriangleMesh {
    vertices: Vec<Vector3<f64>>,
    faces: Vec<[usize; 3]>,
}

/// Tetrahedron spanned by the origin and one surface triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tetrahedron {
    pub c1: Vector3<f64>,
    pub c2: Vector3<f64>,
    pub c3: Vector3<f64>,
    /// `det([c1 c2 c3])`, six times the signed volume.
    pub det_j: f64,
}

impl Tetrahedron {
    pub fn new(c1: Vector3<f64>, c2: Vector3<f64>, c3: Vector3<f64>) -> Self {
        let det_j = c1.dot(&c2.cross(&c3));
        Self { c1, c2, c3, det_j }
    }

    /// Linear map from standard-simplex coordinates to the body frame.
    pub fn jacobian(&self) -> Matrix3<f64> {
        Matrix3::from_columns(&[self.c1, self.c2, self.c3])
    }

    pub fn signed_volume(&self) -> f64 {
        self.det_j / 6.0
    }

    /// Maps a point of the standard simplex into the body frame.
    pub fn map(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.c1 * x.x + self.c2 * x.y + self.c3 * x.z
    }
}

impl TriangleMesh {
    /// Builds a mesh and checks every invariant: index range, distinct face
    /// vertices, closed and consistently wound surface, positive volume.
    pub fn new(vertices: Vec<Vector3<f64>>, faces: Vec<[usize; 3]>) -> Result<Self, MeshError> {
        let mesh = Self::new_unchecked_volume(vertices, faces)?;
        let volume = mesh.volume();
        if !(volume > 0.0) {
            return Err(MeshError::NonPositiveVolume { volume });
        }
        Ok(mesh)
    }

    /// Like [`TriangleMesh::new`], but flips every face when the total volume
    /// comes out negative.
    pub fn new_fix_winding(
        vertices: Vec<Vector3<f64>>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        let mut mesh = Self::new_unchecked_volume(vertices, faces)?;
        if mesh.volume() < 0.0 {
            mesh = mesh.flipped();
        }
        let volume = mesh.volume();
        if !(volume > 0.0) {
            return Err(MeshError::NonPositiveVolume { volume });
        }
        Ok(mesh)
    }

    fn new_unchecked_volume(
        vertices: Vec<Vector3<f64>>,
        faces: Vec<[usize; 3]>,
    ) -> Result<Self, MeshError> {
        if faces.is_empty() {
            return Err(MeshError::Empty);
        }
        let n = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            for &idx in f {
                if idx >= n {
                    return Err(MeshError::IndexOutOfRange {
                        face: fi,
                        index: idx as i64,
                        vertex_count: n,
                    });
                }
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(MeshError::RepeatedVertex { face: fi });
            }
        }
        check_closed(&faces)?;
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Vector3<f64>] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    /// One tetrahedron per face, in face order. The vertex order of the face
    /// fixes the roles `c1, c2, c3`.
    pub fn tetrahedralize(&self) -> Vec<Tetrahedron> {
        self.faces
            .iter()
            .map(|f| Tetrahedron::new(self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]))
            .collect()
    }

    /// Total enclosed volume, `sum(det J / 6)`.
    pub fn volume(&self) -> f64 {
        let mut acc = crate::sum::KahanSum::default();
        for f in &self.faces {
            let t = Tetrahedron::new(self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]);
            acc.add(t.det_j);
        }
        acc.value() / 6.0
    }

    /// Largest vertex distance from the frame origin.
    pub fn brillouin_radius(&self) -> f64 {
        self.vertices.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Same connectivity, every vertex shifted by `offset`.
    pub fn translated(&self, offset: &Vector3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| v + offset).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Applies `m` to every vertex. `m` must have positive determinant to
    /// keep the winding outward.
    pub fn transformed(&self, m: &Matrix3<f64>) -> Self {
        Self {
            vertices: self.vertices.iter().map(|v| m * v).collect(),
            faces: self.faces.clone(),
        }
    }

    /// Reverses the winding of every face.
    pub fn flipped(&self) -> Self {
        Self {
            vertices: self.vertices.clone(),
            faces: self.faces.iter().map(|f| [f[0], f[2], f[1]]).collect(),
        }
    }

    /// Wavefront OBJ text, 1-based indices, shortest round-trip floats.
    pub fn to_obj(&self) -> String {
        use std::fmt::Write;
        let mut out = String::with_capacity(self.vertices.len() * 48 + self.faces.len() * 24);
        for v in &self.vertices {
            let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
        }
        for f in &self.faces {
            let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
        out
    }

    /// Content hash of the geometry (vertex bit patterns and face indices).
    pub fn content_id(&self) -> String {
        let mut h = Sha256::new();
        for v in &self.vertices {
            for c in v.iter() {
                h.update(c.to_bits().to_le_bytes());
            }
        }
        for f in &self.faces {
            for &i in f {
                h.update((i as u64).to_le_bytes());
            }
        }
        hex::encode(h.finalize())
    }
}

fn check_closed(faces: &[[usize; 3]]) -> Result<(), MeshError> {
    let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(faces.len() * 3);
    for f in faces {
        for (a, b) in [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])] {
            let count = directed.entry((a, b)).or_insert(0);
            *count += 1;
            if *count > 1 {
                return Err(MeshError::InconsistentWinding { a, b });
            }
        }
    }
    for &(a, b) in directed.keys() {
        if !directed.contains_key(&(b, a)) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            return Err(MeshError::OpenSurface {
                a: lo,
                b: hi,
                count: 1,
            });
        }
    }
    Ok(())
}
