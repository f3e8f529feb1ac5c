//! Reference polyhedra: regular solids and subdivided icospheres.

use std::collections::HashMap;

use nalgebra::Vector3;

use super::TriangleMesh;

/// Regular tetrahedron inscribed in the unit sphere.
pub fn regular_tetrahedron() -> TriangleMesh {
    let s = 1.0 / 3f64.sqrt();
    let v = vec![
        Vector3::new(s, s, s),
        Vector3::new(s, -s, -s),
        Vector3::new(-s, s, -s),
        Vector3::new(-s, -s, s),
    ];
    let f = vec![[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]];
    TriangleMesh::new(v, f).expect("regular tetrahedron is closed")
}

/// Axis-aligned cube of the given side, centered at the origin.
pub fn cube(side: f64) -> TriangleMesh {
    let h = side / 2.0;
    let mut v = Vec::with_capacity(8);
    for i in 0..8 {
        let sx = if i & 1 == 0 { -h } else { h };
        let sy = if i & 2 == 0 { -h } else { h };
        let sz = if i & 4 == 0 { -h } else { h };
        v.push(Vector3::new(sx, sy, sz));
    }
    let quads = [
        [0, 2, 3, 1],
        [4, 5, 7, 6],
        [0, 1, 5, 4],
        [2, 6, 7, 3],
        [0, 4, 6, 2],
        [1, 3, 7, 5],
    ];
    let f = quads
        .iter()
        .flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]])
        .collect();
    TriangleMesh::new(v, f).expect("cube is closed")
}

/// Regular icosahedron with the given edge length, centered at the origin.
pub fn icosahedron(edge: f64) -> TriangleMesh {
    let (v, f) = icosahedron_unit();
    // unit circumradius -> edge length of the unit icosahedron
    let unit_edge = (v[0] - v[1]).norm();
    let scale = edge / unit_edge;
    let v = v.into_iter().map(|p| p * scale).collect();
    TriangleMesh::new(v, f).expect("icosahedron is closed")
}

/// Icosahedron subdivided `levels` times with every vertex projected onto
/// the sphere of the given radius. Has `20 * 4^levels` faces.
pub fn icosphere(radius: f64, levels: u32) -> TriangleMesh {
    let (mut v, mut f) = icosahedron_unit();
    for _ in 0..levels {
        let mut midpoint: HashMap<(usize, usize), usize> = HashMap::new();
        let mut next = Vec::with_capacity(f.len() * 4);
        for tri in &f {
            let mut mid = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (tri[e], tri[(e + 1) % 3]);
                let key = if a < b { (a, b) } else { (b, a) };
                mid[e] = *midpoint.entry(key).or_insert_with(|| {
                    v.push(((v[a] + v[b]) * 0.5).normalize());
                    v.len() - 1
                });
            }
            next.push([tri[0], mid[0], mid[2]]);
            next.push([tri[1], mid[1], mid[0]]);
            next.push([tri[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        f = next;
    }
    let v = v.into_iter().map(|p| p * radius).collect();
    TriangleMesh::new(v, f).expect("icosphere is closed")
}

/// Triaxial ellipsoid approximated by a scaled icosphere.
pub fn ellipsoid(a: f64, b: f64, c: f64, levels: u32) -> TriangleMesh {
    let m = nalgebra::Matrix3::from_diagonal(&Vector3::new(a, b, c));
    icosphere(1.0, levels).transformed(&m)
}

fn icosahedron_unit() -> (Vec<Vector3<f64>>, Vec<[usize; 3]>) {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let raw = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ];
    let v = raw
        .iter()
        .map(|&(x, y, z)| Vector3::new(x, y, z).normalize())
        .collect();
    let f = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    (v, f)
}
