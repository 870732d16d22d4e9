//! Command line front end: region and density queries, majorization
//! reports, homotopy traces, second-variation decompositions, the
//! Dirichlet solver and the uniqueness experiment.
//!
//! Exit codes: 0 success, 1 input error, 2 non-convergence, 3 internal
//! error.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use mingraph::graphgeom::io::{read_gridmap, write_gridmap};
use mingraph::graphgeom::Domain;
use mingraph::homotopy::{trace, trace_to_csv_string};
use mingraph::majorization::l_majorizes;
use mingraph::solver::boundary::{BoundaryData, ExplicitNode};
use mingraph::solver::experiment::{uniqueness_experiment, ExperimentParams};
use mingraph::solver::{solve_dirichlet, Init, SolveError, SolverConfig};
use mingraph::svkit::{
    area_density, classify_region, h_value, psi, singular_values, ConstraintKind, ConstraintSet,
    SingularValueVector,
};
use mingraph::variation::{second_variation_terms, VariationField};
use mingraph::Error;

enum CliError {
    Input(String),
    NonConvergence(String),
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::Internal(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::NonConvergence(m) | CliError::Internal(m) => m,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) | Error::Domain(_) => CliError::Input(e.to_string()),
            Error::Internal(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn input_err(msg: impl Into<String>) -> CliError {
    CliError::Input(msg.into())
}

#[derive(Parser)]
#[command(
    name = "mingraph",
    version,
    about = "Singular value regions, majorization checks and a minimal-graph Dirichlet solver"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Singular values of a dense matrix plus the region verdict.
    Svd {
        /// Matrix rows separated by ';', entries by ',' (e.g. "1,0;0,2").
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Classify a singular value vector against the convexity region.
    Region {
        /// Comma separated non-negative values.
        #[arg(long)]
        lambda: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Area density, psi and the reciprocal tail sum at a vector.
    Density {
        #[arg(long)]
        lambda: String,
    },
    /// l-majorization report for two vectors.
    Majorize {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        l: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Differential homotopy trace between two stored grid maps.
    Trace {
        /// CSV path of the starting map (sidecar JSON expected next to it).
        #[arg(long)]
        first: PathBuf,
        /// CSV path of the ending map; must share grid and boundary.
        #[arg(long)]
        second: PathBuf,
        #[arg(long, default_value_t = 0)]
        simplex: usize,
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Second-variation decomposition for a map and a variation field.
    Variation {
        #[arg(long)]
        map: PathBuf,
        /// Grid map CSV that vanishes on the boundary.
        #[arg(long)]
        field: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Minimize the discrete area for the configured Dirichlet data.
    Solve {
        /// JSON config with domain, boundary and optional solver sections.
        #[arg(long)]
        config: PathBuf,
        /// Output CSV path for the converged map.
        #[arg(long)]
        out: PathBuf,
        /// Convergence record JSON path; stdout when omitted.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Overrides the seed from the solver section.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Multi-initialization uniqueness experiment with constraint audits.
    Experiment {
        /// JSON config with domain, boundary and experiment sections.
        #[arg(long)]
        config: PathBuf,
        /// Report JSON path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for per-run solution CSVs (created if missing).
        #[arg(long)]
        solutions: Option<PathBuf>,
        /// Overrides the seed from the solver section.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker thread cap; also bounded by MINGRAPH_THREADS.
        #[arg(long)]
        threads: Option<usize>,
    },
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {}", e.message());
            e.code()
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<(), CliError> {
    match cmd {
        Cmd::Svd { matrix, tol } => cmd_svd(&matrix, tol),
        Cmd::Region { lambda, tol } => cmd_region(&lambda, tol),
        Cmd::Density { lambda } => cmd_density(&lambda),
        Cmd::Majorize { x, y, l, tol } => cmd_majorize(&x, &y, l, tol),
        Cmd::Trace { first, second, simplex, samples, tol, out } => {
            cmd_trace(&first, &second, simplex, samples, tol, out.as_deref())
        }
        Cmd::Variation { map, field, out } => cmd_variation(&map, &field, out.as_deref()),
        Cmd::Solve { config, out, record, seed } => {
            cmd_solve(&config, &out, record.as_deref(), seed)
        }
        Cmd::Experiment { config, out, solutions, seed, threads } => {
            cmd_experiment(&config, out.as_deref(), solutions.as_deref(), seed, threads)
        }
    }
}

fn parse_vector(text: &str, what: &str) -> Result<Vec<f64>, CliError> {
    let vals: Result<Vec<f64>, _> = text.split(',').map(|t| t.trim().parse::<f64>()).collect();
    vals.map_err(|e| input_err(format!("cannot parse {what} '{text}': {e}")))
}

fn emit(mut text: String, out: Option<&Path>) -> Result<(), CliError> {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| CliError::Internal(format!("writing {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    serde_json::to_string_pretty(value)
        .map_err(|e| CliError::Internal(format!("serializing report: {e}")))
}

#[derive(Serialize)]
struct SvdReport {
    lambda: Vec<f64>,
    rank: usize,
    verdict: mingraph::svkit::RegionVerdict,
}

fn cmd_svd(matrix: &str, tol: f64) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = matrix
        .split(';')
        .map(|r| parse_vector(r, "matrix row"))
        .collect::<Result<_, _>>()?;
    let mat = mingraph::Mat::from_rows(&rows)?;
    let (lambda, frames) = singular_values(&mat)?;
    let report = SvdReport {
        lambda: lambda.values().to_vec(),
        rank: frames.rank(),
        verdict: classify_region(&lambda, tol),
    };
    emit(to_json(&report)?, None)
}

fn cmd_region(lambda: &str, tol: f64) -> Result<(), CliError> {
    let values = parse_vector(lambda, "--lambda")?;
    let lambda = SingularValueVector::from_unsorted(values)?;
    emit(to_json(&classify_region(&lambda, tol))?, None)
}

#[derive(Serialize)]
struct DensityReport {
    phi: f64,
    psi: f64,
    #[serde(rename = "H")]
    h_tail: Option<f64>,
}

fn cmd_density(lambda: &str) -> Result<(), CliError> {
    let values = parse_vector(lambda, "--lambda")?;
    let lambda = SingularValueVector::from_unsorted(values)?;
    let tail = &lambda.values()[1..];
    let report = DensityReport {
        phi: area_density(&lambda),
        psi: psi(&lambda),
        h_tail: h_value(tail).ok(),
    };
    emit(to_json(&report)?, None)
}

fn cmd_majorize(x: &str, y: &str, l: usize, tol: f64) -> Result<(), CliError> {
    let x = parse_vector(x, "--x")?;
    let y = parse_vector(y, "--y")?;
    let report = l_majorizes(&x, &y, l, tol)?;
    emit(to_json(&report)?, None)
}

fn cmd_trace(
    first: &Path,
    second: &Path,
    simplex: usize,
    samples: usize,
    tol: f64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    if samples < 3 {
        return Err(input_err("--samples must be at least 3"));
    }
    let f0 = read_gridmap(first)?;
    let f1 = read_gridmap(second)?;
    let ts: Vec<f64> =
        (0..samples).map(|i| i as f64 / (samples - 1) as f64).collect();
    let t = trace(&f0, &f1, simplex, &ts)?;
    emit(trace_to_csv_string(&t, tol), out)
}

fn cmd_variation(map: &Path, field: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let f = read_gridmap(map)?;
    let v = VariationField::new(read_gridmap(field)?)?;
    let report = second_variation_terms(&f, &v)?;
    emit(to_json(&report)?, out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    domain: DomainSection,
    boundary: BoundarySection,
    #[serde(default)]
    solver: Option<SolverConfig>,
    #[serde(default)]
    experiment: Option<ExperimentSection>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DomainSection {
    extents: Vec<f64>,
    resolution: Vec<usize>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExplicitEntry {
    index: Vec<usize>,
    value: Vec<f64>,
}

/// Flat boundary section: `family` picks the variant, the other fields
/// must match it exactly (unknown keys are rejected by serde, stray keys
/// from another family are rejected here).
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundarySection {
    family: String,
    matrix: Option<Vec<Vec<f64>>>,
    offset: Option<Vec<f64>>,
    amplitude: Option<f64>,
    frequencies: Option<Vec<Vec<f64>>>,
    phases: Option<Vec<f64>>,
    target_dim: Option<usize>,
    values: Option<Vec<ExplicitEntry>>,
}

impl BoundarySection {
    fn into_boundary(self) -> Result<BoundaryData, CliError> {
        fn need<T>(opt: Option<T>, name: &str, family: &str) -> Result<T, CliError> {
            opt.ok_or_else(|| input_err(format!("boundary family '{family}' needs '{name}'")))
        }
        fn refuse<T>(opt: &Option<T>, name: &str, family: &str) -> Result<(), CliError> {
            if opt.is_some() {
                return Err(input_err(format!(
                    "boundary field '{name}' does not belong to family '{family}'"
                )));
            }
            Ok(())
        }
        let f = self.family.as_str();
        match f {
            "affine" => {
                refuse(&self.amplitude, "amplitude", f)?;
                refuse(&self.frequencies, "frequencies", f)?;
                refuse(&self.phases, "phases", f)?;
                refuse(&self.target_dim, "target_dim", f)?;
                refuse(&self.values, "values", f)?;
                Ok(BoundaryData::Affine {
                    matrix: need(self.matrix, "matrix", f)?,
                    offset: need(self.offset, "offset", f)?,
                })
            }
            "sinusoidal" => {
                refuse(&self.matrix, "matrix", f)?;
                refuse(&self.offset, "offset", f)?;
                refuse(&self.target_dim, "target_dim", f)?;
                refuse(&self.values, "values", f)?;
                Ok(BoundaryData::Sinusoidal {
                    amplitude: need(self.amplitude, "amplitude", f)?,
                    frequencies: need(self.frequencies, "frequencies", f)?,
                    phases: need(self.phases, "phases", f)?,
                })
            }
            "explicit" => {
                refuse(&self.matrix, "matrix", f)?;
                refuse(&self.offset, "offset", f)?;
                refuse(&self.amplitude, "amplitude", f)?;
                refuse(&self.frequencies, "frequencies", f)?;
                refuse(&self.phases, "phases", f)?;
                let values = need(self.values, "values", f)?
                    .into_iter()
                    .map(|e| ExplicitNode { index: e.index, value: e.value })
                    .collect();
                Ok(BoundaryData::Explicit {
                    target_dim: need(self.target_dim, "target_dim", f)?,
                    values,
                })
            }
            "zero" => {
                refuse(&self.matrix, "matrix", f)?;
                refuse(&self.offset, "offset", f)?;
                refuse(&self.amplitude, "amplitude", f)?;
                refuse(&self.frequencies, "frequencies", f)?;
                refuse(&self.phases, "phases", f)?;
                refuse(&self.values, "values", f)?;
                Ok(BoundaryData::Zero { target_dim: need(self.target_dim, "target_dim", f)? })
            }
            other => Err(input_err(format!(
                "unknown boundary family '{other}' (expected affine, sinusoidal, explicit or zero)"
            ))),
        }
    }
}

/// Constraint given either as a kind name or as a full set with an
/// explicit threshold.
#[derive(Deserialize)]
#[serde(untagged)]
enum ConstraintSpec {
    Named(String),
    Full(ConstraintSet),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ExperimentSection {
    n_inits: usize,
    constraint: ConstraintSpec,
    noise_amplitude: Option<f64>,
    uniqueness_tol: Option<f64>,
    homotopy_samples: Option<usize>,
    run_seeds: Option<Vec<u64>>,
    threads: Option<usize>,
}

fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| input_err(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| input_err(format!("config {}: {e}", path.display())))
}

fn build_domain(section: &DomainSection) -> Result<Domain, CliError> {
    Ok(Domain::new(section.extents.clone(), section.resolution.clone())?)
}

fn cmd_solve(
    config: &Path,
    out: &Path,
    record: Option<&Path>,
    seed: Option<u64>,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let domain = build_domain(&cfg.domain)?;
    let boundary = cfg.boundary.into_boundary()?;
    let mut solver = cfg.solver.unwrap_or_default();
    if let Some(s) = seed {
        solver.seed = s;
    }
    let init = Init::Seed { seed: solver.seed, noise_amplitude: None };
    let (output, failure) = match solve_dirichlet(&domain, &boundary, &init, &solver) {
        Ok(o) => (o, None),
        Err(SolveError::Invalid(e)) => return Err(e.into()),
        Err(SolveError::NonConvergence(o)) => {
            (*o, Some("stopped at max_iters before reaching grad_tol".to_string()))
        }
        Err(SolveError::Stall(o)) => {
            (*o, Some("line search stalled before reaching grad_tol".to_string()))
        }
    };
    write_gridmap(&output.map, out)?;
    emit(to_json(&output.record)?, record)?;
    match failure {
        Some(msg) => Err(CliError::NonConvergence(format!(
            "{msg}; best iterate written to {}",
            out.display()
        ))),
        None => Ok(()),
    }
}

fn cmd_experiment(
    config: &Path,
    out: Option<&Path>,
    solutions: Option<&Path>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let domain = build_domain(&cfg.domain)?;
    let boundary = cfg.boundary.into_boundary()?;
    let mut solver = cfg.solver.unwrap_or_default();
    if let Some(s) = seed {
        solver.seed = s;
    }
    let section = cfg
        .experiment
        .ok_or_else(|| input_err("config has no experiment section"))?;
    let constraint = match section.constraint {
        ConstraintSpec::Named(name) => ConstraintSet::new(
            ConstraintKind::from_str(&name).map_err(|e| input_err(e.to_string()))?,
        ),
        ConstraintSpec::Full(set) => set,
    };
    let mut params = ExperimentParams::new(section.n_inits, constraint);
    params.noise_amplitude = section.noise_amplitude;
    if let Some(t) = section.uniqueness_tol {
        params.uniqueness_tol = t;
    }
    if let Some(s) = section.homotopy_samples {
        params.homotopy_samples = s;
    }
    params.run_seeds = section.run_seeds;

    let output =
        uniqueness_experiment(&domain, &boundary, &params, &solver, threads.or(section.threads))?;
    emit(to_json(&output.report)?, out)?;
    if let Some(dir) = solutions {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("creating {}: {e}", dir.display())))?;
        for (i, map) in output.solutions.iter().enumerate() {
            write_gridmap(map, &dir.join(format!("run-{i}.csv")))?;
        }
    }
    if output.report.runs.iter().any(|r| !r.converged) {
        return Err(CliError::NonConvergence(
            "at least one run stopped before reaching grad_tol (see report)".to_string(),
        ));
    }
    Ok(())
}
