#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shgrav::density::{DensityGrid, DensityModel};
use shgrav::mesh::{parse_obj, shapes, ObjOptions, TriangleMesh};

/// Locates an optional shape model: the environment variable wins, then
/// `assets/<file>` at the workspace root.
pub fn find_asset(env: &str, file: &str) -> Option<PathBuf> {
    if let Ok(p) = std::env::var(env) {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../assets").join(file);
    p.is_file().then_some(p)
}

pub fn load_asset(path: &PathBuf) -> TriangleMesh {
    let text = std::fs::read_to_string(path).expect("readable asset");
    parse_obj(&text, ObjOptions { fix_winding: true }).expect("valid asset mesh")
}

pub fn eros_path() -> Option<PathBuf> {
    find_asset("SHGRAV_EROS_OBJ", "eros.obj")
}

pub fn arrokoth_path() -> Option<PathBuf> {
    find_asset("SHGRAV_ARROKOTH_OBJ", "arrokoth.obj")
}

pub fn half_space() -> DensityModel {
    DensityModel::from_json(r#"{"type":"half_space","normal":[1,0,0],"offset_m":0,"rho_pos":3204,"rho_neg":1335}"#)
        .unwrap()
}

pub fn eros_core() -> DensityModel {
    DensityModel::from_json(r#"{"type":"radial_shells","breaks_m":[5000],"values_kgm3":[2937,2670]}"#).unwrap()
}

/// Closed mesh with the icosahedron's 20 faces and randomly scaled vertex
/// radii, shifted off-center by up to `shift` m.
pub fn random_icosahedron(rng: &mut ChaCha8Rng, radius: f64, shift: f64) -> TriangleMesh {
    let base = shapes::icosahedron(1.0);
    let scale = radius / base.brillouin_radius();
    let verts: Vec<Vector3<f64>> = base
        .vertices()
        .iter()
        .map(|v| v * scale * rng.gen_range(0.7..1.3))
        .collect();
    let offset = Vector3::new(
        rng.gen_range(-shift..=shift),
        rng.gen_range(-shift..=shift),
        rng.gen_range(-shift..=shift),
    );
    TriangleMesh::new(verts, base.faces().to_vec()).unwrap().translated(&offset)
}

/// Irregular, elongated body with radial bumps: a stand-in for a real
/// asteroid shape model.
pub fn lumpy_body(seed: u64) -> TriangleMesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base = shapes::ellipsoid(17_000.0, 7_000.0, 6_000.0, 3);
    let bumps: Vec<(Vector3<f64>, f64)> = (0..6)
        .map(|_| {
            let d = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                .normalize();
            (d, rng.gen_range(-0.12..0.12))
        })
        .collect();
    let verts = base
        .vertices()
        .iter()
        .map(|v| {
            let dir = v.normalize();
            let f: f64 = bumps
                .iter()
                .map(|(d, a)| a * (-(1.0 - dir.dot(d)) * 6.0).exp())
                .sum();
            v * (1.0 + f)
        })
        .collect();
    TriangleMesh::new(verts, base.faces().to_vec()).unwrap()
}

/// Random trilinear grid covering the bounding box of `mesh`.
pub fn random_grid(rng: &mut ChaCha8Rng, mesh: &TriangleMesh) -> DensityModel {
    let mut lo = Vector3::repeat(f64::INFINITY);
    let mut hi = Vector3::repeat(f64::NEG_INFINITY);
    for v in mesh.vertices() {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let dims = [5usize, 5, 5];
    let margin = 1.0;
    let origin = lo - Vector3::repeat(margin);
    let spacing = (hi - lo + Vector3::repeat(2.0 * margin)) / 4.0;
    let values = (0..125).map(|_| rng.gen_range(1000.0..3000.0)).collect();
    DensityModel::Tabulated(DensityGrid {
        origin_m: [origin.x, origin.y, origin.z],
        spacing_m: [spacing.x, spacing.y, spacing.z],
        dims,
        values_kgm3: values,
    })
}

/// Uniformly distributed direction times a radius drawn from `[rmin, rmax)`.
pub fn random_shell_point(rng: &mut ChaCha8Rng, rmin: f64, rmax: f64) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n * rng.gen_range(rmin..rmax);
        }
    }
}
