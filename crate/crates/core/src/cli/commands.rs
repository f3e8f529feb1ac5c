use nalgebra::Vector3;
use rayon::prelude::*;
use serde_json::json;

use super::io::{csv, emit, load_density, load_mesh, load_model, load_points, num, write_atomic};
use super::{
    CliError, Command, CoeffsArgs, ComArgs, CompareArgs, EvalArgs, GridArgs, InfoArgs, PropagateArgs, RunConfig,
    VerifyArgs,
};
use crate::field::{acceleration_batch, ellipsoid_grid, FieldOptions, LongitudeDerivative};
use crate::mascon::{build_mascons, mascon_acceleration_batch, ComparisonRow};
use crate::mesh::TriangleMesh;
use crate::oracle::{compare, mc_coefficients, DensitySampling, McRequest};
use crate::propagate::{
    divergence, propagate, GravitySource, MasconGravity, PropagationError, PropagationOptions, RotationModel,
    ShGravity, StateVector, Trajectory,
};
use crate::shcoeff::{compute_coefficients, CoefficientRequest, Reduction, SHModel};

pub fn dispatch(cfg: &RunConfig) -> Result<(), CliError> {
    let reduction = if cfg.deterministic {
        Reduction::Ordered
    } else {
        Reduction::Unordered
    };
    match &cfg.command {
        Command::Info(a) => info(a),
        Command::Coeffs(a) => coeffs(a, reduction),
        Command::Com(a) => com(a),
        Command::Eval(a) => eval(a),
        Command::CompareMascon(a) => compare_mascon(a, reduction),
        Command::Propagate(a) => run_propagate(a),
        Command::Verify(a) => verify(a, reduction),
    }
}

fn pretty(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("JSON value serializes");
    s.push('\n');
    s
}

fn field_options(paper_exact_eq11: bool) -> FieldOptions {
    FieldOptions {
        longitude_derivative: if paper_exact_eq11 {
            LongitudeDerivative::DegreeScaled
        } else {
            LongitudeDerivative::Exact
        },
    }
}

fn build_model(
    mesh: &TriangleMesh,
    density: &crate::density::DensityModel,
    nmax: usize,
    n_q: usize,
    r0: Option<f64>,
    g: f64,
    reduction: Reduction,
) -> Result<SHModel, CliError> {
    let mut req = CoefficientRequest::new(nmax, n_q).with_g(g).with_reduction(reduction);
    if let Some(r) = r0 {
        req = req.with_r0(r);
    }
    compute_coefficients(mesh, density, &req).map_err(|e| match e {
        crate::shcoeff::ShError::Density { .. } => CliError::density(e.to_string()),
        _ => CliError::model(e.to_string()),
    })
}

fn info(a: &InfoArgs) -> Result<(), CliError> {
    let mesh = load_mesh(&a.mesh.mesh, a.mesh.fix_winding)?;
    let v = json!({
        "vertices": mesh.vertices().len(),
        "faces": mesh.faces().len(),
        "volume_m3": mesh.volume(),
        "brillouin_radius_m": mesh.brillouin_radius(),
        "mesh_id": mesh.content_id(),
    });
    emit(a.output.as_deref(), &pretty(&v))
}

fn coeffs(a: &CoeffsArgs, reduction: Reduction) -> Result<(), CliError> {
    let mesh = load_mesh(&a.body.mesh.mesh, a.body.mesh.fix_winding)?;
    let density = load_density(&a.body.density)?;
    let model = build_model(&mesh, &density, a.nmax, a.body.n_q, a.r0, a.body.g, reduction)?;
    write_atomic(&a.output, model.to_json().as_bytes())
}

fn com(a: &ComArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let c = model.center_of_mass().map_err(|e| CliError::model(e.to_string()))?;
    emit(a.output.as_deref(), &pretty(&json!({ "com_m": [c.x, c.y, c.z] })))
}

fn parse_res(s: &str) -> Result<f64, CliError> {
    let t = s.trim();
    let t = t.strip_suffix("deg").unwrap_or(t).trim();
    match t.parse::<f64>() {
        Ok(v) if v > 0.0 && v <= 90.0 && (180.0 / v - (180.0 / v).round()).abs() < 1e-9 => Ok(v),
        _ => Err(CliError::usage(format!(
            "--res {s}: expected a positive step in degrees dividing 180"
        ))),
    }
}

fn grid(g: &GridArgs) -> Result<Option<Vec<crate::field::SurfacePoint>>, CliError> {
    let Some(axes) = &g.ellipsoid else {
        return Ok(None);
    };
    if !axes.iter().all(|v| v.is_finite() && *v > 0.0) {
        return Err(CliError::usage("--ellipsoid semi-axes must be positive"));
    }
    Ok(Some(ellipsoid_grid(axes[0], axes[1], axes[2], parse_res(&g.res)?)))
}

fn eval(a: &EvalArgs) -> Result<(), CliError> {
    let model = load_model(&a.model)?;
    let opts = field_options(a.paper_exact_eq11);
    let br = model.brillouin_radius();
    let (points, lonlat) = match (&a.points, grid(&a.grid)?) {
        (Some(p), None) => (load_points(p)?, None),
        (None, Some(g)) => (
            g.iter().map(|s| s.position).collect::<Vec<_>>(),
            Some(g.iter().map(|s| (s.lon_deg, s.lat_deg)).collect::<Vec<_>>()),
        ),
        _ => return Err(CliError::usage("eval needs either --points or --ellipsoid")),
    };
    let samples = acceleration_batch(&model, &points, br, opts)
        .into_iter()
        .zip(&points)
        .map(|(r, x)| r.map_err(|e| CliError::field(format!("at ({}, {}, {}): {e}", x.x, x.y, x.z))))
        .collect::<Result<Vec<_>, _>>()?;
    let base = ["x", "y", "z", "U", "ax", "ay", "az", "inside_brillouin"];
    let rows = samples.iter().zip(&points).enumerate().map(|(i, (s, x))| {
        let mut row = Vec::with_capacity(10);
        if let Some(ll) = &lonlat {
            row.push(num(ll[i].0));
            row.push(num(ll[i].1));
        }
        row.extend([x.x, x.y, x.z, s.potential, s.acceleration.x, s.acceleration.y, s.acceleration.z].map(num));
        row.push(u8::from(s.inside_brillouin).to_string());
        row
    });
    let text = if lonlat.is_some() {
        let mut h = vec!["lon_deg", "lat_deg"];
        h.extend(base);
        csv(&h, rows)
    } else {
        csv(&base, rows)
    };
    emit(a.output.as_deref(), &text)
}

fn compare_mascon(a: &CompareArgs, reduction: Reduction) -> Result<(), CliError> {
    let Some(points) = grid(&a.grid)? else {
        return Err(CliError::usage("compare-mascon needs --ellipsoid"));
    };
    let mesh = load_mesh(&a.body.mesh.mesh, a.body.mesh.fix_winding)?;
    let density = load_density(&a.body.density)?;
    let model = build_model(&mesh, &density, a.nmax, a.body.n_q, a.r0, a.body.g, reduction)?;
    let set = build_mascons(&mesh, &density, a.body.n_q).map_err(|e| CliError::density(e.to_string()))?;
    let xs: Vec<Vector3<f64>> = points.iter().map(|p| p.position).collect();
    let sh = acceleration_batch(&model, &xs, model.brillouin_radius(), field_options(a.paper_exact_eq11));
    let ms = mascon_acceleration_batch(&set, &xs, a.body.g);
    let mut rows = Vec::with_capacity(xs.len());
    for (i, p) in points.iter().enumerate() {
        let s = sh[i].as_ref().map_err(|e| CliError::field(e.to_string()))?;
        let m = ms[i].as_ref().map_err(|e| CliError::field(e.to_string()))?;
        rows.push(ComparisonRow {
            lon_deg: p.lon_deg,
            lat_deg: p.lat_deg,
            a_sh: s.acceleration.norm(),
            a_mascon: m.norm(),
            delta: (s.acceleration - m).norm(),
        });
    }
    let max = rows.iter().map(|r| r.delta).fold(0.0, f64::max);
    let text = csv(
        &["lon_deg", "lat_deg", "a_sh", "a_mascon", "da_ms2", "da_mgal"],
        rows.iter().map(|r| {
            vec![
                num(r.lon_deg),
                num(r.lat_deg),
                num(r.a_sh),
                num(r.a_mascon),
                num(r.delta),
                num(r.delta_mgal()),
            ]
        }),
    );
    match &a.output {
        Some(p) => {
            write_atomic(p, text.as_bytes())?;
            let summary = json!({
                "points": rows.len(),
                "mascons": set.len(),
                "max_da_ms2": max,
                "max_da_mgal": max / crate::MGAL,
            });
            println!("{summary}");
            Ok(())
        }
        None => emit(None, &text),
    }
}

fn vec3(v: &[f64], name: &str) -> Result<Vector3<f64>, CliError> {
    if v.len() != 3 || !v.iter().all(|c| c.is_finite()) {
        return Err(CliError::usage(format!("--{name} needs three finite numbers")));
    }
    Ok(Vector3::new(v[0], v[1], v[2]))
}

fn propagation_error(e: PropagationError) -> CliError {
    match e.last_state() {
        Some(s) => CliError::propagation(format!(
            "{e}; last state t={} r=({}, {}, {}) v=({}, {}, {})",
            s.t, s.r.x, s.r.y, s.r.z, s.v.x, s.v.y, s.v.z
        )),
        None => CliError::propagation(e.to_string()),
    }
}

fn trajectory_csv(t: &Trajectory) -> String {
    csv(
        &[
            "t", "rx", "ry", "rz", "vx", "vy", "vz", "rbx", "rby", "rbz", "vbx", "vby", "vbz", "inside_brillouin",
        ],
        t.samples.iter().map(|s| {
            let mut row: Vec<String> = [
                s.state.t,
                s.state.r.x,
                s.state.r.y,
                s.state.r.z,
                s.state.v.x,
                s.state.v.y,
                s.state.v.z,
                s.r_body.x,
                s.r_body.y,
                s.r_body.z,
                s.v_body.x,
                s.v_body.y,
                s.v_body.z,
            ]
            .map(num)
            .to_vec();
            row.push(u8::from(s.inside_brillouin).to_string());
            row
        }),
    )
}

fn run_propagate(a: &PropagateArgs) -> Result<(), CliError> {
    let r0 = vec3(&a.position, "position")?;
    let v0 = vec3(&a.velocity, "velocity")?;
    let rot = RotationModel::new(vec3(&a.axis, "axis")?, a.period, a.theta0).map_err(|e| CliError::usage(e.to_string()))?;
    let opts = PropagationOptions {
        rtol: a.rtol,
        sample_interval: a.sample,
        ..Default::default()
    };
    let state0 = StateVector::new(0.0, r0, v0);
    let fopts = field_options(a.paper_exact_eq11);

    let primary_model;
    let mesh_set;
    let primary: Box<dyn GravitySource> = match (&a.model, &a.mesh, &a.density) {
        (Some(p), None, None) => {
            primary_model = load_model(p)?;
            Box::new(ShGravity {
                model: &primary_model,
                options: fopts,
            })
        }
        (None, Some(m), Some(d)) => {
            let mesh = load_mesh(m, a.fix_winding)?;
            let density = load_density(d)?;
            let set = build_mascons(&mesh, &density, a.n_q).map_err(|e| CliError::density(e.to_string()))?;
            mesh_set = (set, mesh.brillouin_radius());
            Box::new(MasconGravity {
                set: &mesh_set.0,
                g: a.g,
                brillouin_radius: mesh_set.1,
            })
        }
        _ => return Err(CliError::usage("propagate needs --model or --mesh with --density")),
    };
    let secondary_model = a.compare.as_deref().map(load_model).transpose()?;
    let secondary = secondary_model.as_ref().map(|m| ShGravity {
        model: m,
        options: fopts,
    });

    let t_end = state0.t + a.duration;
    let (first, second) = rayon::join(
        || propagate(&state0, t_end, primary.as_ref(), &rot, &opts),
        || secondary.as_ref().map(|g| propagate(&state0, t_end, g, &rot, &opts)),
    );
    let first = first.map_err(propagation_error)?;
    let second = second.transpose().map_err(propagation_error)?;

    if let (Some(path), Some(second)) = (&a.delta_out, &second) {
        let d = divergence(&first, second).map_err(propagation_error)?;
        let text = csv(
            &["t", "dr_m", "dv_ms"],
            d.iter().map(|(t, dr, dv)| vec![num(*t), num(*dr), num(*dv)]),
        );
        write_atomic(path, text.as_bytes())?;
    }
    emit(a.output.as_deref(), &trajectory_csv(&first))?;
    if let (Some(second), Some(_)) = (&second, &a.output) {
        let (dr, dv) = (
            (first.last().state.r - second.last().state.r).norm(),
            (first.last().state.v - second.last().state.v).norm(),
        );
        println!("{}", json!({ "t_end": t_end, "final_dr_m": dr, "final_dv_ms": dv }));
    }
    Ok(())
}

fn verify(a: &VerifyArgs, reduction: Reduction) -> Result<(), CliError> {
    let mesh = load_mesh(&a.body.mesh.mesh, a.body.mesh.fix_winding)?;
    let density = load_density(&a.body.density)?;
    let r0 = a.r0.unwrap_or_else(|| mesh.brillouin_radius());
    let model = build_model(&mesh, &density, a.nmax, a.body.n_q, Some(r0), a.body.g, reduction)?;
    let sampling = if a.pointwise {
        DensitySampling::Pointwise
    } else {
        DensitySampling::Discretized { n_q: a.body.n_q }
    };
    let mc = mc_coefficients(
        &mesh,
        &density,
        &McRequest {
            nmax: a.nmax,
            r0,
            samples: a.samples,
            seed: a.seed,
            density: sampling,
        },
    )
    .map_err(|e| match e {
        crate::oracle::OracleError::Density(_) => CliError::density(e.to_string()),
        _ => CliError::usage(e.to_string()),
    })?;
    let rows = compare(&model, &mc);
    let within = rows.par_iter().filter(|r| r.z.abs() <= 3.0).count();
    let fraction = within as f64 / rows.len() as f64;
    let report = json!({
        "samples": a.samples,
        "seed": a.seed,
        "density_sampling": if a.pointwise { "pointwise" } else { "discretized" },
        "n_q": a.body.n_q,
        "R0_m": r0,
        "within_3_sigma": fraction,
        "rows": rows,
    });
    emit(a.output.as_deref(), &pretty(&report))?;
    if fraction < a.min_pass {
        return Err(CliError::verification(format!(
            "{within} of {} coefficients within 3 sigma ({:.3} < {})",
            rows.len(),
            fraction,
            a.min_pass
        )));
    }
    Ok(())
}
