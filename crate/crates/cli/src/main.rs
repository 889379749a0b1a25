//! Command-line frontend: builds forms from config files, runs the
//! verifiers and emits JSON/CSV reports with stable bytes.
//!
//! Exit codes: 0 when the checked property holds, 1 when it is falsified
//! (the report carries the witness), 2 on usage or input errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use formlab::verify::{SweepConfig, SweepDomains, SweepGenerator};
use formlab::{
    bdl_decompose, build_graph, build_interval, build_rectangle, check_sandwich, dominates,
    eigen_convergence, example_aw45, extract_boundary_measure, is_positivity_preserving,
    locality_from_domination, neumann_form, nonlocal_robin_form, robin_form, sweep_random,
    BoundaryKind, BoundaryMeasure, BoundaryOperator, Domain, FormMatrix, LocalityVerdict,
};

#[derive(Parser)]
#[command(name = "formlab", version, about = "Dirichlet-form laboratory: build forms, compare semigroups, verify sandwich/locality/positivity properties")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Assemble a form matrix from a config file and write it as JSON
    Build {
        /// Path to the run configuration (JSON)
        #[arg(long)]
        config: PathBuf,
        /// Output path; stdout when omitted
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Split a form into stencil jumps, nonlocal jumps and killing
    Decompose {
        /// Form matrix file (JSON)
        form: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a property check against form files
    Check {
        #[command(subcommand)]
        check: CheckCommand,
    },
    /// Recover the boundary measure of a sandwiched form
    ExtractMeasure {
        form: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce the nonlocal Robin counterexample end to end
    ExampleAw45 {
        /// Grid size on the unit interval
        #[arg(long, default_value_t = 33)]
        n: usize,
        /// Comma-separated time grid
        #[arg(long)]
        times: Option<String>,
        /// Report output path
        #[arg(long)]
        out: Option<PathBuf>,
        /// Min-entry profile CSV path
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Randomized verification sweep
    Sweep {
        #[arg(long)]
        trials: usize,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// planted-measure | markovian-random | off-stencil-perturbed
        #[arg(long, default_value = "planted-measure")]
        generator: String,
        #[arg(long)]
        times: Option<String>,
        /// Largest 1D grid sampled
        #[arg(long, default_value_t = 65)]
        max_interval: usize,
        /// Largest 2D side sampled
        #[arg(long, default_value_t = 15)]
        max_side: usize,
        /// Restrict sampling to 1D grids
        #[arg(long, default_value_t = false)]
        no_2d: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Eigenvalue convergence table against continuum references
    Eig {
        /// neumann | dirichlet | robin
        #[arg(long)]
        kind: String,
        /// Robin parameter (required for --kind robin)
        #[arg(long)]
        beta: Option<f64>,
        /// Comma-separated increasing grid sizes
        #[arg(long)]
        sizes: String,
        /// Eigenvalue index (0 = Neumann zero mode)
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CheckCommand {
    /// Positivity preservation: generator sign pattern vs sampled semigroup
    Positivity {
        form: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
    },
    /// Entrywise domination of the first semigroup by the second
    Domination {
        lower: PathBuf,
        upper: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
    },
    /// Dirichlet below, Neumann above
    Sandwich {
        form: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
    },
    /// Stencil locality as a consequence of Markovianity plus domination
    Locality {
        form: PathBuf,
        #[command(flatten)]
        opts: CheckOpts,
    },
}

#[derive(Args)]
struct CheckOpts {
    /// Comma-separated time grid
    #[arg(long)]
    times: Option<String>,
    /// Absolute comparison tolerance override
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

// ---------------------------------------------------------------------------
// run configuration
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum DomainConfig {
    Interval {
        n: usize,
        length: f64,
    },
    Rectangle {
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
    },
    Graph {
        edges: Vec<(usize, usize)>,
        boundary: Vec<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        conductance: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mass: Option<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        sigma: Option<Vec<f64>>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum FormConfig {
    Neumann,
    Dirichlet,
    Robin {
        mu: BoundaryMeasure,
    },
    NonlocalRobin {
        #[serde(rename = "B")]
        b: Vec<Vec<f64>>,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfig {
    domain: DomainConfig,
    form: FormConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
}

fn build_domain(config: &DomainConfig) -> Result<Domain, formlab::Error> {
    match config {
        DomainConfig::Interval { n, length } => build_interval(*n, *length),
        DomainConfig::Rectangle { nx, ny, lx, ly } => build_rectangle(*nx, *ny, *lx, *ly),
        DomainConfig::Graph {
            edges,
            boundary,
            conductance,
            mass,
            sigma,
        } => {
            let weights = match conductance {
                Some(w) => w.clone(),
                None => vec![1.0; edges.len()],
            };
            if weights.len() != edges.len() {
                return Err(formlab::Error::InvalidDomain(format!(
                    "conductance array has length {}, expected {}",
                    weights.len(),
                    edges.len()
                )));
            }
            let weighted: Vec<(usize, usize, f64)> = edges
                .iter()
                .zip(&weights)
                .map(|(&(i, j), &w)| (i, j, w))
                .collect();
            build_graph(&weighted, boundary, mass.clone(), sigma.clone())
        }
    }
}

fn build_form(config: &RunConfig) -> Result<FormMatrix, formlab::Error> {
    let domain = Arc::new(build_domain(&config.domain)?);
    match &config.form {
        FormConfig::Neumann => Ok(neumann_form(&domain)),
        FormConfig::Dirichlet => formlab::dirichlet_form(&domain),
        FormConfig::Robin { mu } => robin_form(&domain, mu),
        FormConfig::NonlocalRobin { b } => {
            let op = BoundaryOperator::from_rows(b)?;
            nonlocal_robin_form(&domain, &op)
        }
    }
}

// ---------------------------------------------------------------------------
// plumbing
// ---------------------------------------------------------------------------

struct UsageError(String);

impl<E: std::fmt::Display> From<E> for UsageError {
    fn from(e: E) -> Self {
        UsageError(e.to_string())
    }
}

type CmdResult = Result<u8, UsageError>;

fn read_form(path: &Path) -> Result<FormMatrix, UsageError> {
    let text = fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read {}: {e}", path.display())))?;
    FormMatrix::from_json(&text)
        .map_err(|e| UsageError(format!("cannot parse {}: {e}", path.display())))
}

fn emit(out: &Option<PathBuf>, content: &str) -> Result<(), UsageError> {
    match out {
        Some(path) => fs::write(path, content)
            .map_err(|e| UsageError(format!("cannot write {}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn emit_json<T: Serialize>(out: &Option<PathBuf>, value: &T) -> Result<(), UsageError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    emit(out, &text)
}

fn parse_times(text: &Option<String>) -> Result<Vec<f64>, UsageError> {
    match text {
        None => Ok(formlab::default_time_grid()),
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| UsageError(format!("bad time value '{s}': {e}")))
            })
            .collect(),
    }
}

fn parse_sizes(text: &str) -> Result<Vec<usize>, UsageError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|e| UsageError(format!("bad size value '{s}': {e}")))
        })
        .collect()
}

fn profile_csv(profile: &[(f64, f64)]) -> String {
    let mut out = String::from("t,min_entry\n");
    for (t, v) in profile {
        out.push_str(&format!("{t},{v}\n"));
    }
    out
}

fn run(cli: Cli) -> CmdResult {
    match cli.command {
        Command::Build { config, out } => {
            let text = fs::read_to_string(&config)
                .map_err(|e| UsageError(format!("cannot read {}: {e}", config.display())))?;
            let parsed: RunConfig = serde_json::from_str(&text)
                .map_err(|e| UsageError(format!("cannot parse {}: {e}", config.display())))?;
            let form = build_form(&parsed)?;
            let target = out.or(parsed.out);
            emit(&target, &format!("{}\n", form.to_json()?))?;
            Ok(0)
        }
        Command::Decompose { form, out } => {
            let form = read_form(&form)?;
            let parts = bdl_decompose(&form)?;
            emit(&out, &format!("{}\n", parts.to_json(form.domain())?))?;
            Ok(0)
        }
        Command::Check { check } => run_check(check),
        Command::ExtractMeasure { form, out } => {
            let form = read_form(&form)?;
            let extraction = extract_boundary_measure(&form);
            emit_json(&out, &extraction)?;
            Ok(if extraction.is_success() { 0 } else { 1 })
        }
        Command::ExampleAw45 { n, times, out, csv } => {
            let times = match &times {
                Some(_) => Some(parse_times(&times)?),
                None => None,
            };
            let report = example_aw45(n, times)?;
            emit_json(&out, &report)?;
            if let Some(path) = &csv {
                fs::write(path, profile_csv(&report.min_entry_profile))
                    .map_err(|e| UsageError(format!("cannot write {}: {e}", path.display())))?;
            }
            Ok(if report.as_expected { 0 } else { 1 })
        }
        Command::Sweep {
            trials,
            seed,
            generator,
            times,
            max_interval,
            max_side,
            no_2d,
            out,
        } => {
            let generator: SweepGenerator = generator.parse()?;
            let mut config = SweepConfig::new(trials, seed, generator);
            config.domains = SweepDomains {
                max_interval,
                max_side,
                include_2d: !no_2d,
            };
            if times.is_some() {
                config.times = parse_times(&times)?;
                config.times.retain(|&t| t > 0.0);
            }
            let report = sweep_random(&config)?;
            emit(&out, &format!("{}\n", report.to_json()?))?;
            Ok(if report.all_passed() { 0 } else { 1 })
        }
        Command::Eig {
            kind,
            beta,
            sizes,
            k,
            out,
        } => {
            let kind = match kind.as_str() {
                "neumann" => BoundaryKind::Neumann,
                "dirichlet" => BoundaryKind::Dirichlet,
                "robin" => BoundaryKind::Robin {
                    beta: beta.ok_or_else(|| {
                        UsageError("--kind robin requires --beta".into())
                    })?,
                },
                other => return Err(UsageError(format!("unknown kind '{other}'"))),
            };
            let sizes = parse_sizes(&sizes)?;
            let table = eigen_convergence(kind, &sizes, k)?;
            emit(&out, &table.to_csv())?;
            Ok(0)
        }
    }
}

fn run_check(check: CheckCommand) -> CmdResult {
    match check {
        CheckCommand::Positivity { form, opts } => {
            let form = read_form(&form)?;
            let times = parse_times(&opts.times)?;
            let report = is_positivity_preserving(&form, &times)?;
            emit_json(&opts.out, &report)?;
            if !report.consistent {
                return Err(UsageError(
                    "internal error: algebraic and sampled verdicts disagree".into(),
                ));
            }
            Ok(if report.algebraic { 0 } else { 1 })
        }
        CheckCommand::Domination { lower, upper, opts } => {
            let lower = read_form(&lower)?;
            let upper = read_form(&upper)?;
            let times = parse_times(&opts.times)?;
            let report = dominates(&lower, &upper, &times, opts.tol)?;
            emit_json(&opts.out, &report)?;
            Ok(if report.verdict { 0 } else { 1 })
        }
        CheckCommand::Sandwich { form, opts } => {
            let form = read_form(&form)?;
            let times = parse_times(&opts.times)?;
            let report = check_sandwich(&form, &times, opts.tol)?;
            emit_json(&opts.out, &report)?;
            Ok(if report.verdict { 0 } else { 1 })
        }
        CheckCommand::Locality { form, opts } => {
            let form = read_form(&form)?;
            let times = parse_times(&opts.times)?;
            let report = locality_from_domination(&form, &times)?;
            emit_json(&opts.out, &report)?;
            Ok(match report.verdict {
                LocalityVerdict::Local { .. } => 0,
                _ => 1,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(UsageError(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
