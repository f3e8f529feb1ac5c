use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;

use super::CliError;
use crate::density::DensityModel;
use crate::mesh::{parse_obj, ObjOptions, TriangleMesh};
use crate::shcoeff::SHModel;

pub fn read_text(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Writes through a temporary file in the target directory and renames it
/// into place, so a failed run never leaves a partial artifact.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let err = |e: std::io::Error| CliError::io(format!("{}: {e}", path.display()));
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(contents).map_err(err)?;
    tmp.as_file().sync_all().map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}

/// Writes to `path`, or to stdout when `path` is `None`.
pub fn emit(path: Option<&Path>, contents: &str) -> Result<(), CliError> {
    match path {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(contents.as_bytes())
                .map_err(|e| CliError::io(format!("stdout: {e}")))
        }
    }
}

pub fn load_mesh(path: &Path, fix_winding: bool) -> Result<TriangleMesh, CliError> {
    let text = read_text(path)?;
    parse_obj(&text, ObjOptions { fix_winding }).map_err(|e| CliError::mesh(format!("{}: {e}", path.display())))
}

/// Inline JSON when the argument starts with `{`, otherwise a file path.
pub fn load_density(arg: &str) -> Result<DensityModel, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        read_text(Path::new(arg))?
    };
    let d = DensityModel::from_json(&text).map_err(|e| CliError::density(e.to_string()))?;
    d.validate().map_err(|e| CliError::density(e.to_string()))?;
    Ok(d)
}

pub fn load_model(path: &Path) -> Result<SHModel, CliError> {
    let text = read_text(path)?;
    SHModel::from_json(&text).map_err(|e| CliError::model(format!("{}: {e}", path.display())))
}

/// Reads `x,y,z` rows; a non-numeric first line is taken as a header.
pub fn load_points(path: &Path) -> Result<Vec<Vector3<f64>>, CliError> {
    let text = read_text(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) if v.len() == 3 => out.push(Vector3::new(v[0], v[1], v[2])),
            Err(_) if i == 0 => continue,
            _ => {
                return Err(CliError::io(format!(
                    "{}:{}: expected three numbers x,y,z",
                    path.display(),
                    i + 1
                )))
            }
        }
    }
    Ok(out)
}

/// Shortest round-trip decimal representation.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// Builds a CSV document from a header and rows of preformatted fields.
pub fn csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for row in rows {
        let _ = writeln!(s, "{}", row.join(","));
    }
    s
}
