use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use shgrav::mesh::shapes;

const HALF_SPACE: &str = r#"{"type":"half_space","normal":[1,0,0],"offset_m":0,"rho_pos":3204,"rho_neg":1335}"#;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shgrav"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("sphere.obj"), shapes::icosphere(500.0, 3).to_obj()).unwrap();
        std::fs::write(dir.path().join("half.json"), HALF_SPACE).unwrap();
        Workspace { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str]) -> Output {
        run(self.dir.path(), args)
    }

    fn coeffs(&self, out: &str, nmax: &str) {
        let o = self.run(&[
            "coeffs", "--mesh", "sphere.obj", "--density", "half.json", "--nmax", nmax, "--r0", "500", "-o", out,
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
}

fn assert_one_line_error(o: &Output, code: i32) {
    assert_eq!(o.status.code(), Some(code), "stderr: {}", stderr(&o));
    let err = stderr(o);
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.starts_with("error["), "{err}");
}

#[test]
fn help_documents_formats() {
    let o = bin().arg("--help").output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("format_version"));
}

#[test]
fn info_reports_mesh() {
    let ws = Workspace::new();
    let o = ws.run(&["info", "--mesh", "sphere.obj"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["faces"], 1280);
    assert!((v["brillouin_radius_m"].as_f64().unwrap() - 500.0).abs() < 1e-6);
}

#[test]
fn coeffs_then_com() {
    let ws = Workspace::new();
    ws.coeffs("model.json", "4");
    let model: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(ws.path("model.json")).unwrap()).unwrap();
    assert_eq!(model["format_version"], 1);
    assert_eq!(model["nmax"], 4);
    let o = ws.run(&["com", "--model", "model.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let x = v["com_m"][0].as_f64().unwrap();
    assert!((x - 77.21).abs() < 2.0, "{x}");
    assert!(v["com_m"][1].as_f64().unwrap().abs() < 1.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let ws = Workspace::new();
    ws.coeffs("a.json", "6");
    ws.coeffs("b.json", "6");
    assert_eq!(std::fs::read(ws.path("a.json")).unwrap(), std::fs::read(ws.path("b.json")).unwrap());
}

#[test]
fn eval_points_and_grid() {
    let ws = Workspace::new();
    ws.coeffs("model.json", "4");
    std::fs::write(ws.path("pts.csv"), "x,y,z\n1000,0,0\n0,0,-2000\n").unwrap();
    let o = ws.run(&["eval", "--model", "model.json", "--points", "pts.csv", "-o", "out.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(ws.path("out.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "x,y,z,U,ax,ay,az,inside_brillouin");
    assert_eq!(lines.count(), 2);

    let o = ws.run(&["eval", "--model", "model.json", "--ellipsoid", "600", "600", "600", "--res", "30deg"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.starts_with("lon_deg,lat_deg,x,y,z,"));
    assert_eq!(text.lines().count(), 1 + 7 * 12);
}

#[test]
fn propagate_writes_trajectory() {
    let ws = Workspace::new();
    ws.coeffs("model.json", "4");
    let o = ws.run(&[
        "propagate", "--model", "model.json", "--position", "2000,0,0", "--velocity", "0,0.2,0",
        "--duration", "600", "--period", "inf", "--sample", "60", "-o", "traj.csv",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(ws.path("traj.csv")).unwrap();
    assert!(text.starts_with("t,rx,ry,rz,vx,vy,vz,"));
    assert_eq!(text.lines().count(), 1 + 11);
}

#[test]
fn usage_errors_exit_2() {
    let ws = Workspace::new();
    assert_one_line_error(&ws.run(&["coeffs", "--bogus"]), 2);
    ws.coeffs("m.json", "2");
    assert_one_line_error(&ws.run(&["eval", "--model", "m.json", "--ellipsoid", "1", "1", "1", "--res", "7deg"]), 2);
}

#[test]
fn missing_file_exits_3() {
    let ws = Workspace::new();
    assert_one_line_error(&ws.run(&["info", "--mesh", "nope.obj"]), 3);
}

#[test]
fn bad_mesh_exits_4() {
    let ws = Workspace::new();
    std::fs::write(ws.path("open.obj"), "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n").unwrap();
    assert_one_line_error(&ws.run(&["info", "--mesh", "open.obj"]), 4);
}

#[test]
fn bad_density_exits_5_without_artifact() {
    let ws = Workspace::new();
    let o = ws.run(&[
        "coeffs", "--mesh", "sphere.obj", "--density", r#"{"type":"uniform","rho":-1}"#, "--nmax", "2", "-o", "m.json",
    ]);
    assert_one_line_error(&o, 5);
    assert!(!ws.path("m.json").exists());
}

#[test]
fn bad_model_exits_6() {
    let ws = Workspace::new();
    std::fs::write(ws.path("bad.json"), r#"{"format_version": 99}"#).unwrap();
    assert_one_line_error(&ws.run(&["com", "--model", "bad.json"]), 6);
}

#[test]
fn singular_eval_exits_7_and_keeps_previous_output() {
    let ws = Workspace::new();
    ws.coeffs("model.json", "2");
    std::fs::write(ws.path("out.csv"), "previous").unwrap();
    std::fs::write(ws.path("pts.csv"), "1000,0,0\n0,0,0\n").unwrap();
    let o = ws.run(&["eval", "--model", "model.json", "--points", "pts.csv", "-o", "out.csv"]);
    assert_one_line_error(&o, 7);
    assert_eq!(std::fs::read_to_string(ws.path("out.csv")).unwrap(), "previous");
}

#[test]
fn collision_exits_8() {
    let ws = Workspace::new();
    ws.coeffs("model.json", "2");
    let o = ws.run(&[
        "propagate", "--model", "model.json", "--position", "2000,0,0", "--velocity", "0,0,0",
        "--duration", "1e6", "--period", "inf", "-o", "traj.csv",
    ]);
    assert_one_line_error(&o, 8);
    assert!(!ws.path("traj.csv").exists());
}

#[test]
fn failed_verification_exits_9() {
    let ws = Workspace::new();
    let o = ws.run(&[
        "verify", "--mesh", "sphere.obj", "--density", "half.json", "--nmax", "2", "--samples", "20000",
        "--min-pass", "1.01", "-o", "report.json",
    ]);
    assert_one_line_error(&o, 9);
}
