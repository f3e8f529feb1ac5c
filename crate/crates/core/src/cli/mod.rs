//! Command-line interface of the `shgrav` binary.
//!
//! Exit codes: 0 success, 2 usage, 3 I/O, 4 mesh, 5 density, 6 model or
//! coefficient computation, 7 field evaluation, 8 propagation,
//! 9 verification failure. Failures print one line `error[<category>]: <msg>`
//! to stderr.

mod commands;
mod io;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_MESH: i32 = 4;
pub const EXIT_DENSITY: i32 = 5;
pub const EXIT_MODEL: i32 = 6;
pub const EXIT_FIELD: i32 = 7;
pub const EXIT_PROPAGATION: i32 = 8;
pub const EXIT_VERIFICATION: i32 = 9;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub category: &'static str,
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn new(category: &'static str, code: i32, message: impl Into<String>) -> Self {
        Self {
            category,
            code,
            message: message.into().replace('\n', " "),
        }
    }

    pub fn usage(m: impl Into<String>) -> Self {
        Self::new("usage", EXIT_USAGE, m)
    }
    pub fn io(m: impl Into<String>) -> Self {
        Self::new("io", EXIT_IO, m)
    }
    pub fn mesh(m: impl Into<String>) -> Self {
        Self::new("mesh", EXIT_MESH, m)
    }
    pub fn density(m: impl Into<String>) -> Self {
        Self::new("density", EXIT_DENSITY, m)
    }
    pub fn model(m: impl Into<String>) -> Self {
        Self::new("model", EXIT_MODEL, m)
    }
    pub fn field(m: impl Into<String>) -> Self {
        Self::new("field", EXIT_FIELD, m)
    }
    pub fn propagation(m: impl Into<String>) -> Self {
        Self::new("propagation", EXIT_PROPAGATION, m)
    }
    pub fn verification(m: impl Into<String>) -> Self {
        Self::new("verification", EXIT_VERIFICATION, m)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "error[{}]: {}", self.category, self.message)
    }
}

const AFTER_HELP: &str = "\
File formats:
  mesh       Wavefront OBJ (v/f records, 1-based or negative indices, polygons fan-triangulated)
  density    JSON object, inline or a file path. Types:
               {\"type\":\"uniform\",\"rho\":R}
               {\"type\":\"radial_shells\",\"breaks_m\":[..],\"values_kgm3\":[..]}
               {\"type\":\"half_space\",\"normal\":[x,y,z],\"offset_m\":D,\"rho_pos\":A,\"rho_neg\":B}
               {\"type\":\"tabulated\",\"origin_m\":[..],\"spacing_m\":[..],\"dims\":[..],\"values_kgm3\":[..]}
  SH model   JSON, format_version 1: mu_m3s2, R0_m, nmax, Cbar, Sbar (one row per degree), provenance
Units are SI (m, kg, s) everywhere except the lon_deg/lat_deg map columns.
Exit codes: 2 usage, 3 I/O, 4 mesh, 5 density, 6 model, 7 field, 8 propagation, 9 verification.";

/// Parsed command line.
#[derive(Debug, Parser)]
#[command(name = "shgrav", version, about = "Spherical-harmonics gravity of polyhedral bodies with variable density", after_help = AFTER_HELP)]
pub struct RunConfig {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Fixed-order parallel reductions: outputs are byte-identical for any
    /// thread count.
    #[arg(long, global = true)]
    pub deterministic: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Mesh metadata as JSON.
    Info(InfoArgs),
    /// Compute an SH model file from a mesh and a density.
    Coeffs(CoeffsArgs),
    /// Center of mass from the degree-1 coefficients of a model.
    Com(ComArgs),
    /// Potential and acceleration at points or on an ellipsoid grid (CSV).
    Eval(EvalArgs),
    /// Compare SH and mascon accelerations on an ellipsoid grid (CSV).
    CompareMascon(CompareArgs),
    /// Propagate a trajectory around the rotating body (CSV).
    Propagate(PropagateArgs),
    /// Compare analytic coefficients with a Monte Carlo oracle (JSON).
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
pub struct MeshArgs {
    /// OBJ shape model.
    #[arg(long)]
    pub mesh: PathBuf,
    /// Flip every face when the mesh encloses negative volume.
    #[arg(long)]
    pub fix_winding: bool,
}

#[derive(Debug, Args)]
pub struct BodyArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Density spec: inline JSON or a path to a JSON file.
    #[arg(long)]
    pub density: String,
    /// Number of radial segments per tetrahedron.
    #[arg(long = "nq", default_value_t = 10)]
    pub n_q: usize,
    /// Gravitational constant, m^3 kg^-1 s^-2.
    #[arg(long = "G", default_value_t = crate::G_CODATA_2018)]
    pub g: f64,
}

#[derive(Debug, Args)]
pub struct InfoArgs {
    #[command(flatten)]
    pub mesh: MeshArgs,
    /// Output file (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CoeffsArgs {
    #[command(flatten)]
    pub body: BodyArgs,
    /// Maximum degree.
    #[arg(long)]
    pub nmax: usize,
    /// Reference radius, m (default: Brillouin radius of the mesh).
    #[arg(long)]
    pub r0: Option<f64>,
    /// Output SH model file.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Args)]
pub struct ComArgs {
    /// SH model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Output file (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Semi-axes a b c of the sampling ellipsoid, m.
    #[arg(long, num_args = 3, value_names = ["A", "B", "C"])]
    pub ellipsoid: Option<Vec<f64>>,
    /// Angular resolution of the ellipsoid grid, e.g. `2deg` or `2`.
    #[arg(long, default_value = "2deg")]
    pub res: String,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// SH model file.
    #[arg(long)]
    pub model: PathBuf,
    /// CSV of query points x,y,z in m.
    #[arg(long, conflicts_with = "ellipsoid")]
    pub points: Option<PathBuf>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Weight the longitude derivative by (n+1); the result is then not the
    /// gradient of the potential.
    #[arg(long)]
    pub paper_exact_eq11: bool,
    /// Output CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub body: BodyArgs,
    /// Maximum degree of the SH model.
    #[arg(long)]
    pub nmax: usize,
    /// Reference radius, m (default: Brillouin radius of the mesh).
    #[arg(long)]
    pub r0: Option<f64>,
    #[command(flatten)]
    pub grid: GridArgs,
    /// Degree-scaled longitude derivative (not a true gradient).
    #[arg(long)]
    pub paper_exact_eq11: bool,
    /// Output CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PropagateArgs {
    /// SH model file for the gravity field.
    #[arg(long, conflicts_with_all = ["mesh", "density"])]
    pub model: Option<PathBuf>,
    /// OBJ shape model for mascon gravity (with --density).
    #[arg(long, requires = "density")]
    pub mesh: Option<PathBuf>,
    /// Density spec for mascon gravity.
    #[arg(long, requires = "mesh")]
    pub density: Option<String>,
    #[arg(long = "nq", default_value_t = 10)]
    pub n_q: usize,
    #[arg(long = "G", default_value_t = crate::G_CODATA_2018)]
    pub g: f64,
    #[arg(long)]
    pub fix_winding: bool,
    /// Initial inertial position x,y,z, m.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub position: Vec<f64>,
    /// Initial inertial velocity vx,vy,vz, m/s.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    pub velocity: Vec<f64>,
    /// Propagation span, s.
    #[arg(long, default_value_t = 86_400.0)]
    pub duration: f64,
    /// Rotation period of the body, s; `inf` for a non-rotating body.
    #[arg(long)]
    pub period: f64,
    /// Rotation axis in the inertial frame.
    #[arg(long, value_delimiter = ',', num_args = 1, default_value = "0,0,1", allow_hyphen_values = true)]
    pub axis: Vec<f64>,
    /// Rotation angle at t = 0, rad.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub theta0: f64,
    /// Relative tolerance.
    #[arg(long, default_value_t = crate::propagate::DEFAULT_RTOL)]
    pub rtol: f64,
    /// Output sample spacing, s.
    #[arg(long, default_value_t = 60.0)]
    pub sample: f64,
    /// Second SH model propagated from the same state for comparison.
    #[arg(long)]
    pub compare: Option<PathBuf>,
    /// Output CSV of t, |dr|, |dv| between the two runs (needs --compare).
    #[arg(long, requires = "compare")]
    pub delta_out: Option<PathBuf>,
    /// Degree-scaled longitude derivative (not a true gradient).
    #[arg(long)]
    pub paper_exact_eq11: bool,
    /// Output trajectory CSV.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub body: BodyArgs,
    #[arg(long, default_value_t = 4)]
    pub nmax: usize,
    #[arg(long)]
    pub r0: Option<f64>,
    /// Monte Carlo sample count.
    #[arg(long, default_value_t = 1_000_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Sample the density model at each point instead of the slab-constant
    /// density used by the coefficient pipeline.
    #[arg(long)]
    pub pointwise: bool,
    /// Minimum fraction of coefficients within 3 sigma.
    #[arg(long, default_value_t = 0.95)]
    pub min_pass: f64,
    /// Output JSON report (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

/// Parses `argv` (including the program name), runs the command and
/// returns the process exit status.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cfg = match RunConfig::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            if !e.use_stderr() {
                let _ = e.print();
                return 0;
            }
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{}", CliError::usage(first.trim_start_matches("error:").trim()));
            return EXIT_USAGE;
        }
    };
    match execute(&cfg) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.code
        }
    }
}

fn execute(cfg: &RunConfig) -> Result<(), CliError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cfg.threads {
        if n == 0 {
            return Err(CliError::usage("--threads must be at least 1"));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    pool.install(|| commands::dispatch(cfg))
}
