use nalgebra::Vector3;

use super::{MeshError, TriangleMesh};

#[derive(Debug, Clone, Copy, Default)]
pub struct ObjOptions {
    /// Flip every face when the parsed surface has negative volume.
    pub fix_winding: bool,
}

/// Parses `v` and `f` records of a Wavefront OBJ file. Other records are
/// ignored; polygons are fan-triangulated; indices may be 1-based or
/// negative (relative), with optional `i/t/n` slash syntax.
pub fn parse_obj(text: &str, opts: ObjOptions) -> Result<TriangleMesh, MeshError> {
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();

    for (lineno, raw) in text.lines().enumerate() {
        let line = lineno + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = content.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let mut xyz = [0.0f64; 3];
                for c in xyz.iter_mut() {
                    let tok = tokens.next().ok_or_else(|| MeshError::Parse {
                        line,
                        msg: "vertex needs three coordinates".into(),
                    })?;
                    *c = tok.parse().map_err(|_| MeshError::Parse {
                        line,
                        msg: format!("bad coordinate {tok:?}"),
                    })?;
                    if !c.is_finite() {
                        return Err(MeshError::Parse {
                            line,
                            msg: format!("non-finite coordinate {tok:?}"),
                        });
                    }
                }
                vertices.push(Vector3::from(xyz));
            }
            Some("f") => {
                let mut poly = Vec::with_capacity(4);
                for tok in tokens {
                    poly.push(resolve_index(tok, vertices.len(), faces.len(), line)?);
                }
                if poly.len() < 3 {
                    return Err(MeshError::Parse {
                        line,
                        msg: format!("face with {} vertices", poly.len()),
                    });
                }
                for w in 1..poly.len() - 1 {
                    faces.push([poly[0], poly[w], poly[w + 1]]);
                }
            }
            _ => {}
        }
    }

    // Indices were resolved against the vertices seen so far; the range
    // check against the final count happens in the constructor.
    if opts.fix_winding {
        TriangleMesh::new_fix_winding(vertices, faces)
    } else {
        TriangleMesh::new(vertices, faces)
    }
}

fn resolve_index(tok: &str, seen: usize, face: usize, line: usize) -> Result<usize, MeshError> {
    let head = tok.split('/').next().unwrap_or("");
    let idx: i64 = head.parse().map_err(|_| MeshError::Parse {
        line,
        msg: format!("bad face index {tok:?}"),
    })?;
    let resolved = if idx > 0 {
        idx - 1
    } else if idx < 0 {
        seen as i64 + idx
    } else {
        return Err(MeshError::Parse {
            line,
            msg: "face index 0 is not valid in OBJ".into(),
        });
    };
    if resolved < 0 {
        return Err(MeshError::IndexOutOfRange {
            face,
            index: idx,
            vertex_count: seen,
        });
    }
    Ok(resolved as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TETRA: &str = "\
# regular tetrahedron
v 1 1 1
v 1 -1 -1
v -1 1 -1
v -1 -1 1
f 1 2 3
f 1 4 2
f 1 3 4
f 2 4 3
";

    #[test]
    fn parses_tetrahedron() {
        let m = parse_obj(TETRA, ObjOptions::default()).unwrap();
        assert_eq!(m.vertices().len(), 4);
        assert_eq!(m.faces().len(), 4);
        assert_eq!(m.faces()[0], [0, 1, 2]);
        assert!((m.volume() - 8.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_range_index() {
        let text = "v 1 1 1\nv 1 -1 -1\nv -1 1 -1\nv -1 -1 1\nf 1 2 99\n";
        let err = parse_obj(text, ObjOptions::default()).unwrap_err();
        assert!(matches!(err, MeshError::IndexOutOfRange { index: 98, .. }), "{err:?}");
    }

    #[test]
    fn slash_syntax_and_negative_indices() {
        let text = TETRA.replace("f 1 2 3", "f 1/7/2 2//5 -2");
        let m = parse_obj(&text, ObjOptions::default()).unwrap();
        assert_eq!(m.faces()[0], [0, 1, 2]);
    }

    #[test]
    fn quads_are_fan_triangulated() {
        let text = "\
v 0 0 0
v 1 0 0
v 1 1 0
v 0 1 0
v 0 0 1
v 1 0 1
v 1 1 1
v 0 1 1
f 1 4 3 2
f 5 6 7 8
f 1 2 6 5
f 2 3 7 6
f 3 4 8 7
f 4 1 5 8
";
        let m = parse_obj(text, ObjOptions::default()).unwrap();
        assert_eq!(m.faces().len(), 12);
        assert!((m.volume() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fix_winding_flag() {
        let flipped: String = TETRA
            .lines()
            .map(|l| {
                if let Some(rest) = l.strip_prefix("f ") {
                    let t: Vec<&str> = rest.split_whitespace().collect();
                    format!("f {} {} {}\n", t[0], t[2], t[1])
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        assert!(matches!(
            parse_obj(&flipped, ObjOptions::default()),
            Err(MeshError::NonPositiveVolume { .. })
        ));
        let m = parse_obj(&flipped, ObjOptions { fix_winding: true }).unwrap();
        assert!(m.volume() > 0.0);
    }

    #[test]
    fn malformed_vertex() {
        let err = parse_obj("v 1 2\n", ObjOptions::default()).unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
        let err = parse_obj("v 1 2 zz\n", ObjOptions::default()).unwrap_err();
        assert!(matches!(err, MeshError::Parse { line: 1, .. }));
    }

    #[test]
    fn ignores_other_records() {
        let text = format!("o body\nvn 0 0 1\nvt 0 0\ns off\n{TETRA}");
        let m = parse_obj(&text, ObjOptions::default()).unwrap();
        assert_eq!(m.vertices().len(), 4);
    }
}
