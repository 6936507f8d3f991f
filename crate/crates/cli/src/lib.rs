//! Configuration, dispatch and artifact emission for the `parab2` binary.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use parab2_core::contour::{build_contour, problem_scale, suggested_phi2, Contour, ContourParams};
use parab2_core::gallery::{gallery_with, rotated_scalar_pencil, sweep_csv, sweep_with, Forcing, GalleryName, SweepParams};
use parab2_core::io::{fmt_float, to_json_string, CsvTable};
use parab2_core::norms::{norm_table_csv, NormRequest};
use parab2_core::operator::{build_operator, fractional_power, Operator, OperatorSpec};
use parab2_core::path::SampledPath;
use parab2_core::pencil::{check_pencil_hypotheses, HypothesisReport, PencilSymbol, SectorGrid};
use parab2_core::solver::{relative_disagreement, solve_ivp_with, CauchyProblem, Method, SolveMode, SolveOptions, SolveReport};
use parab2_core::{CVector, C64};
use serde::{Deserialize, Serialize};

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CHECK_FAILED: i32 = 2;
pub const EXIT_COMPATIBILITY: i32 = 3;
pub const EXIT_CONFIG: i32 = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Check,
    Solve,
    Sweep,
    Norms,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Check => "check",
            Command::Solve => "solve",
            Command::Sweep => "sweep",
            Command::Norms => "norms",
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] parab2_core::Error),
    #[error("cannot write {path}: {source}")]
    Write { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use parab2_core::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(E::Compatibility { .. }) => EXIT_COMPATIBILITY,
            CliError::Core(E::InvalidInput(_) | E::Parse { .. } | E::DimensionMismatch { .. }) => EXIT_CONFIG,
            CliError::Core(_) | CliError::Write { .. } => EXIT_RUNTIME,
        }
    }

    fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config",
            EXIT_COMPATIBILITY => "compatibility",
            _ => "runtime",
        }
    }
}

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

/// Where `A` and `B` come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProblemSpec {
    /// A named gallery instance: `strong_damping`, `strong_damping_drift`,
    /// `intermediate_damping` or `scalar(a)`.
    Gallery {
        name: String,
        #[serde(default = "default_n")]
        n: usize,
        alpha: f64,
    },
    /// Explicit `A` and `B`.
    Operators { a: OperatorSpec, b: OperatorSpec },
    /// `B = α·A^ε`.
    Damped { a: OperatorSpec, eps: f64, alpha: f64 },
    /// `A = e^{iφ}`, `B = α(e^{iφ})^ε`.
    RotatedScalar { eps: f64, alpha: f64, phi: f64 },
}

fn default_n() -> usize {
    8
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Time grid points `N`.
    pub n_points: usize,
    /// Horizon `T`.
    pub t_end: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            n_points: 129,
            t_end: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ContourSpec {
    /// Sector angle `φ₂`; chosen from the pencil poles when absent.
    pub phi2: Option<f64>,
    pub tol: f64,
    pub nodes_per_ray: usize,
}

impl Default for ContourSpec {
    fn default() -> Self {
        let d = ContourParams::default();
        Self {
            phi2: None,
            tol: d.tol,
            nodes_per_ray: d.nodes_per_ray,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSpec {
    pub phi2: f64,
    pub radial_count: usize,
    pub angular_count: usize,
    pub threshold: Option<f64>,
}

impl Default for CheckSpec {
    fn default() -> Self {
        Self {
            phi2: FRAC_PI_2 + 0.05,
            radial_count: SectorGrid::DEFAULT_RADIAL,
            angular_count: SectorGrid::DEFAULT_ANGULAR,
            threshold: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub eps: Vec<f64>,
    pub alpha: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default)]
    pub margin: Option<f64>,
    #[serde(default)]
    pub radial_count: Option<usize>,
    #[serde(default)]
    pub angular_count: Option<usize>,
}

/// The path whose norms `norms` tabulates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    /// Real scalar samples on a uniform grid over `[0, t_end]`.
    Samples { t_end: f64, values: Vec<f64> },
    /// A path in the JSON layout used by solve reports.
    PathFile { path: PathBuf },
    /// The forcing of the configured problem.
    Forcing,
    /// A component (`u`, `du`, `ddu`, `Bdu`, `Au`) of the contour solution.
    Solution { component: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Must match the subcommand when present.
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub contour: ContourSpec,
    #[serde(default = "default_forcing")]
    pub forcing: Forcing,
    #[serde(default)]
    pub u0: Option<Vec<f64>>,
    #[serde(default)]
    pub u1: Option<Vec<f64>>,
    #[serde(default = "default_mode")]
    pub mode: SolveMode,
    /// Relative compatibility tolerance for `solve`.
    #[serde(default = "default_compat_tol")]
    pub compat_tol: f64,
    #[serde(default)]
    pub norms: Vec<NormRequest>,
    #[serde(default)]
    pub check: CheckSpec,
    #[serde(default)]
    pub sweep: Option<SweepSpec>,
    #[serde(default)]
    pub signal: Option<SignalSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_forcing() -> Forcing {
    Forcing::Smooth
}

fn default_mode() -> SolveMode {
    SolveMode::Holder { theta: 0.5 }
}

fn default_compat_tol() -> f64 {
    parab2_core::solver::DEFAULT_COMPAT_TOL
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| config_err(format!("invalid config JSON: {e}")))
    }

    /// Reads a config file; relative matrix and path files resolve against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        fn fix(spec: &mut OperatorSpec, base: &Path) {
            match spec {
                OperatorSpec::MatrixFile { path } if path.is_relative() => *path = base.join(&*path),
                OperatorSpec::Power { base: inner, .. } | OperatorSpec::Scaled { base: inner, .. } => fix(inner, base),
                _ => {}
            }
        }
        match &mut self.problem {
            Some(ProblemSpec::Operators { a, b }) => {
                fix(a, base);
                fix(b, base);
            }
            Some(ProblemSpec::Damped { a, .. }) => fix(a, base),
            _ => {}
        }
        if let Some(SignalSpec::PathFile { path }) = &mut self.signal {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    fn problem(&self) -> Result<&ProblemSpec, CliError> {
        self.problem.as_ref().ok_or_else(|| config_err("missing \"problem\""))
    }
}

/// `A`, `B` and the forcing built from a config.
struct Built {
    a: Operator,
    b: Operator,
    forcing: Forcing,
}

fn build_problem(cfg: &Config) -> Result<Built, CliError> {
    let (a, b) = match cfg.problem()? {
        ProblemSpec::Gallery { name, n, alpha } => {
            let name: GalleryName = name.parse()?;
            let n = if matches!(name, GalleryName::Scalar(_)) { 1 } else { *n };
            let g = gallery_with(name, n, cfg.grid.t_end, *alpha, 0.5, cfg.grid.n_points.max(4), cfg.forcing)?;
            let (a, b) = (g.pencil.a().clone(), g.pencil.b().clone());
            (a, b)
        }
        ProblemSpec::Operators { a, b } => (build_operator(a)?, build_operator(b)?),
        ProblemSpec::Damped { a, eps, alpha } => {
            if !(*alpha > 0.0) {
                return Err(config_err("damping factor α must be positive"));
            }
            let a = build_operator(a)?;
            let b = fractional_power(&a, *eps)?.scaled(C64::new(*alpha, 0.0));
            (a, b)
        }
        ProblemSpec::RotatedScalar { eps, alpha, phi } => {
            let p = rotated_scalar_pencil(*eps, *alpha, *phi)?;
            (p.a().clone(), p.b().clone())
        }
    };
    if a.dim() != b.dim() {
        return Err(config_err(format!("A has dimension {} but B has {}", a.dim(), b.dim())));
    }
    Ok(Built {
        a,
        b,
        forcing: cfg.forcing,
    })
}

fn initial_vector(v: &Option<Vec<f64>>, n: usize, name: &str) -> Result<CVector, CliError> {
    match v {
        None => Ok(CVector::zeros(n)),
        Some(v) if v.len() == n => Ok(CVector::from_iterator(n, v.iter().map(|&x| C64::new(x, 0.0)))),
        Some(v) => Err(config_err(format!("{name} has {} entries, expected {n}", v.len()))),
    }
}

fn cauchy_problem(cfg: &Config, built: &Built) -> Result<CauchyProblem, CliError> {
    if cfg.grid.n_points < 4 {
        return Err(config_err("grid.n_points must be at least 4"));
    }
    let n = built.a.dim();
    let f = built.forcing.sample(n, cfg.grid.t_end, cfg.grid.n_points)?;
    Ok(CauchyProblem::new(
        built.a.clone(),
        built.b.clone(),
        f,
        initial_vector(&cfg.u0, n, "u0")?,
        initial_vector(&cfg.u1, n, "u1")?,
    )?)
}

fn contour_for(cfg: &Config, a: &Operator, b: &Operator) -> Result<Contour, CliError> {
    let phi2 = match cfg.contour.phi2 {
        Some(p) => p,
        None => suggested_phi2(a, b)?,
    };
    let params = ContourParams {
        phi2,
        tol: cfg.contour.tol,
        nodes_per_ray: cfg.contour.nodes_per_ray,
    };
    Ok(build_contour(&params, problem_scale(a, b, cfg.grid.t_end), cfg.grid.t_end)?)
}

/// A named artifact ready to be written.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

/// Artifacts plus the exit code they imply.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub artifacts: Vec<Artifact>,
}

fn json_artifact<T: Serialize>(name: &str, value: &T) -> Result<Artifact, CliError> {
    Ok(Artifact {
        name: name.to_owned(),
        contents: to_json_string(value).map_err(|e| CliError::Core(parab2_core::Error::InvalidInput(e.to_string())))?,
    })
}

fn csv_artifact(name: &str, table: &CsvTable) -> Artifact {
    Artifact {
        name: name.to_owned(),
        contents: table.to_csv_string(),
    }
}

/// Component CSV: `t, re_1..re_n, im_1..im_n`.
pub fn path_csv(path: &SampledPath) -> CsvTable {
    let n = path.dim();
    let mut header = vec!["t".to_owned()];
    header.extend((1..=n).map(|i| format!("re_{i}")));
    header.extend((1..=n).map(|i| format!("im_{i}")));
    let mut t = CsvTable::new(header);
    for (k, v) in path.values().iter().enumerate() {
        let mut row = vec![fmt_float(path.time(k))];
        row.extend(v.iter().map(|z| fmt_float(z.re)));
        row.extend(v.iter().map(|z| fmt_float(z.im)));
        t.push(row);
    }
    t
}

#[derive(Serialize)]
struct CheckOutput<'a> {
    command: &'static str,
    passes: bool,
    report: &'a HypothesisReport,
}

fn run_check(cfg: &Config) -> Result<Outcome, CliError> {
    let built = build_problem(cfg)?;
    let pencil = PencilSymbol::new(built.a, built.b)?;
    let spec = cfg.check;
    let grid = SectorGrid::for_pencil(&pencil, spec.phi2)?.with_density(spec.radial_count, spec.angular_count);
    grid.validate()?;
    let check = check_pencil_hypotheses(&pencil, &grid, spec.threshold)?;
    let passes = check.report.passes();
    let mut samples = CsvTable::new(["re", "im", "norm_h", "norm_l2h", "norm_lbh", "norm_ah"]);
    for s in &check.samples {
        samples.push([
            fmt_float(s.lambda.re),
            fmt_float(s.lambda.im),
            fmt_float(s.norm_h),
            fmt_float(s.norm_l2h),
            fmt_float(s.norm_lbh),
            fmt_float(s.norm_ah),
        ]);
    }
    let out = CheckOutput {
        command: "check",
        passes,
        report: &check.report,
    };
    Ok(Outcome {
        exit_code: if passes { EXIT_OK } else { EXIT_CHECK_FAILED },
        artifacts: vec![json_artifact("check_report.json", &out)?, csv_artifact("check_samples.csv", &samples)],
    })
}

/// `solve` output: both methods and their disagreement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub command: String,
    pub phi2: f64,
    pub ray_angle: f64,
    pub radius: f64,
    pub contour_nodes: usize,
    /// `‖u_contour − u_timestep‖_∞/‖u_timestep‖_∞`.
    pub agreement: f64,
    pub contour: SolveReport,
    pub timestep: SolveReport,
}

fn run_solve(cfg: &Config) -> Result<Outcome, CliError> {
    let built = build_problem(cfg)?;
    let problem = cauchy_problem(cfg, &built)?;
    let contour = contour_for(cfg, &problem.a, &problem.b)?;
    let mut opts = SolveOptions::new(cfg.mode);
    opts.compat_tol = Some(cfg.compat_tol);
    let by_contour = solve_ivp_with(&problem, Some(&contour), &opts)?;
    opts.method = Method::Timestep;
    let by_steps = solve_ivp_with(&problem, None, &opts)?;
    let out = SolveOutput {
        command: "solve".to_owned(),
        phi2: contour.phi2,
        ray_angle: contour.ray_angle,
        radius: contour.radius,
        contour_nodes: contour.len(),
        agreement: relative_disagreement(&by_contour.u, &by_steps.u)?,
        contour: by_contour,
        timestep: by_steps,
    };
    let mut artifacts = vec![json_artifact("solve_report.json", &out)?];
    for (method, report) in [("contour", &out.contour), ("timestep", &out.timestep)] {
        for (name, path) in report.components() {
            if name != "f" {
                artifacts.push(csv_artifact(&format!("{method}_{name}.csv"), &path_csv(path)));
            }
        }
    }
    Ok(Outcome {
        exit_code: EXIT_OK,
        artifacts,
    })
}

fn run_sweep(cfg: &Config) -> Result<Outcome, CliError> {
    let spec = cfg.sweep.as_ref().ok_or_else(|| config_err("missing \"sweep\""))?;
    let d = SweepParams::default();
    let params = SweepParams {
        margin: spec.margin.unwrap_or(d.margin),
        radial_count: spec.radial_count.unwrap_or(d.radial_count),
        angular_count: spec.angular_count.unwrap_or(d.angular_count),
    };
    let rows = sweep_with(&spec.eps, &spec.alpha, &spec.phi, &params)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        artifacts: vec![csv_artifact("sweep.csv", &sweep_csv(&rows))],
    })
}

fn signal_path(cfg: &Config) -> Result<SampledPath, CliError> {
    let signal = cfg.signal.as_ref().ok_or_else(|| config_err("missing \"signal\""))?;
    match signal {
        SignalSpec::Samples { t_end, values } => Ok(SampledPath::new(
            *t_end,
            values.iter().map(|&x| CVector::from_element(1, C64::new(x, 0.0))).collect(),
        )?),
        SignalSpec::PathFile { path } => {
            let text =
                fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str(&text).map_err(|e| config_err(format!("invalid path file {}: {e}", path.display())))
        }
        SignalSpec::Forcing => {
            let built = build_problem(cfg)?;
            Ok(cauchy_problem(cfg, &built)?.f)
        }
        SignalSpec::Solution { component } => {
            let built = build_problem(cfg)?;
            let problem = cauchy_problem(cfg, &built)?;
            let contour = contour_for(cfg, &problem.a, &problem.b)?;
            let mut opts = SolveOptions::new(cfg.mode);
            opts.compat_tol = Some(cfg.compat_tol);
            let r = solve_ivp_with(&problem, Some(&contour), &opts)?;
            let found = r
                .components()
                .into_iter()
                .find(|(n, _)| *n == component.as_str())
                .map(|(_, p)| p.clone());
            found.ok_or_else(|| config_err(format!("unknown solution component {component:?}")))
        }
    }
}

fn run_norms(cfg: &Config) -> Result<Outcome, CliError> {
    if cfg.norms.is_empty() {
        return Err(config_err("\"norms\" must list at least one norm request"));
    }
    let path = signal_path(cfg)?;
    let table = norm_table_csv(&path, &cfg.norms)?;
    Ok(Outcome {
        exit_code: EXIT_OK,
        artifacts: vec![csv_artifact("norms.csv", &table)],
    })
}

/// Runs `command` and returns its artifacts without touching the disk.
pub fn run(command: Command, cfg: &Config) -> Result<Outcome, CliError> {
    if let Some(c) = cfg.command {
        if c != command {
            return Err(config_err(format!("config is for `{c}` but `{command}` was requested")));
        }
    }
    match command {
        Command::Check => run_check(cfg),
        Command::Solve => run_solve(cfg),
        Command::Sweep => run_sweep(cfg),
        Command::Norms => run_norms(cfg),
    }
}

/// Writes one artifact into `dir`.
pub fn emit(dir: &Path, artifact: &Artifact) -> Result<PathBuf, CliError> {
    let path = dir.join(&artifact.name);
    fs::write(&path, &artifact.contents).map_err(|source| CliError::Write {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

#[derive(Serialize)]
struct ErrorObject<'a> {
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    exit_code: i32,
    message: String,
}

/// JSON error object written next to the artifacts.
pub fn error_json(err: &CliError) -> String {
    to_json_string(&ErrorObject {
        error: ErrorBody {
            kind: err.kind(),
            exit_code: err.exit_code(),
            message: err.to_string(),
        },
    })
    .expect("error objects serialize")
}

/// Full run: load the config, dispatch, write artifacts (or `error.json`)
/// and return the exit code.
pub fn execute(command: Command, config: &Path, out: Option<&Path>) -> i32 {
    let mut dir: Option<PathBuf> = out.map(Path::to_path_buf);
    let result = Config::load(config).and_then(|cfg| {
        if dir.is_none() {
            dir = cfg.output_dir.clone();
        }
        let dir = dir.clone().unwrap_or_else(|| PathBuf::from("."));
        fs::create_dir_all(&dir).map_err(|source| CliError::Write {
            path: dir.clone(),
            source,
        })?;
        let outcome = run(command, &cfg)?;
        for a in &outcome.artifacts {
            emit(&dir, a)?;
        }
        Ok(outcome.exit_code)
    });
    match result {
        Ok(code) => code,
        Err(err) => {
            let text = error_json(&err);
            eprint!("{text}");
            let dir = dir.unwrap_or_else(|| PathBuf::from("."));
            if fs::create_dir_all(&dir).is_ok() {
                let _ = fs::write(dir.join("error.json"), &text);
            }
            err.exit_code()
        }
    }
}

/// Caps the global thread pool from `PARAB2_THREADS`.
pub fn configure_threads(value: Option<&str>) -> Result<(), CliError> {
    let Some(v) = value else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_err(format!("PARAB2_THREADS must be a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| config_err(format!("cannot configure thread pool: {e}")))
}
