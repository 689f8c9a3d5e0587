//! Command-line front end: argument parsing and the three commands.
//!
//! The binary in `src/bin/afem.rs` only parses, dispatches and maps the
//! outcome to an exit code, so everything here is testable in-process.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::adaptive::{anfem, rate_fit, AdaptiveParams, AdaptiveRun, StopReason};
use crate::counterexample::{scaling_study, ScalingStudy, DEFAULT_SIZES};
use crate::error::{Error, Result};
use crate::mesh::{builders, Triangulation};
use crate::output;
use crate::problem::ProblemId;
use crate::verify::{run_suites, Suite, VerifyOptions, VerifyReport};

/// Exit code of a run stopped by the element cap before reaching `eps`.
pub const EXIT_DOF_CAP: i32 = 3;
/// Exit code when a verification suite fails.
pub const EXIT_VERIFY_FAILED: i32 = 1;
/// Exit code for invalid arguments or configuration.
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "afem", version, about = "Adaptive Crouzeix-Raviart FEM for the 2D Stokes problem")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the adaptive loop and write trace, solution and estimator CSVs.
    Adapt(AdaptArgs),
    /// Run the property suites and print a PASS/FAIL table.
    Verify(VerifyArgs),
    /// Scaling study of the criss-cross family on the diamond.
    Counterexample(CounterexampleArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Domain {
    /// Unit square, 8 triangles.
    Square,
    /// L-shape `(-1,1)² \ [0,1)×(-1,0]`, 6 triangles.
    Lshape,
    /// `|x| + |y| < 1`, 2 triangles.
    Diamond,
}

impl Domain {
    pub fn initial_mesh(self) -> Triangulation {
        match self {
            Domain::Square => builders::unit_square(2).expect("two cells per side is valid"),
            Domain::Lshape => builders::lshape(),
            Domain::Diamond => builders::diamond(),
        }
    }

    pub fn default_problem(self) -> ProblemId {
        match self {
            Domain::Square => ProblemId::Smooth1,
            Domain::Lshape => ProblemId::LshapeSingular,
            Domain::Diamond => ProblemId::Vortex,
        }
    }
}

#[derive(Debug, Args)]
pub struct AdaptArgs {
    #[arg(long, value_enum, default_value_t = Domain::Square)]
    pub domain: Domain,
    /// Initial mesh file; overrides `--domain`.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value_t = 0.3)]
    pub theta: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 1.0)]
    pub beta1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma1: f64,
    #[arg(long, default_value_t = 1.0)]
    pub gamma2: f64,
    /// Largest admissible number of elements.
    #[arg(long = "dof-cap", default_value_t = 200_000)]
    pub dof_cap: usize,
    /// Load or manufactured solution; defaults to the natural one for the domain.
    #[arg(long, visible_alias = "g")]
    pub solution: Option<ProblemId>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suites to run; all of them when omitted.
    #[arg(long)]
    pub suite: Vec<Suite>,
    /// Replace the edge jump by the sum of the one-sided traces.
    #[arg(long)]
    pub mutate: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also write `verify.csv` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CounterexampleArgs {
    /// Odd family sizes, comma separated.
    #[arg(long = "n", value_delimiter = ',', default_values_t = DEFAULT_SIZES)]
    pub sizes: Vec<usize>,
    /// Also write `counterexample.csv` into this directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Where the initial mesh comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum MeshSource {
    Builtin(Domain),
    File(PathBuf),
}

/// Validated configuration of an `adapt` run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSource,
    pub params: AdaptiveParams,
    pub problem: ProblemId,
    pub out: PathBuf,
    pub seed: u64,
}

impl AdaptArgs {
    pub fn config(&self) -> Result<RunConfig> {
        let params = AdaptiveParams {
            theta: self.theta,
            eps: self.eps,
            mu: self.mu,
            beta1: self.beta1,
            gamma1: self.gamma1,
            gamma2: self.gamma2,
            dof_cap: self.dof_cap,
            ..AdaptiveParams::default()
        };
        params.validate()?;
        Ok(RunConfig {
            mesh: match &self.mesh {
                Some(p) => MeshSource::File(p.clone()),
                None => MeshSource::Builtin(self.domain),
            },
            params,
            problem: self.solution.unwrap_or(self.domain.default_problem()),
            out: self.out.clone(),
            seed: self.seed,
        })
    }
}

impl RunConfig {
    pub fn initial_mesh(&self) -> Result<Triangulation> {
        match &self.mesh {
            MeshSource::Builtin(d) => Ok(d.initial_mesh()),
            MeshSource::File(p) => Triangulation::read(p),
        }
    }
}

#[derive(Debug)]
pub struct AdaptOutcome {
    pub run: AdaptiveRun,
    pub rate: Option<f64>,
    pub files: Vec<PathBuf>,
}

impl AdaptOutcome {
    pub fn exit_code(&self) -> i32 {
        match self.run.trace.stop {
            StopReason::DofCap => EXIT_DOF_CAP,
            StopReason::Converged | StopReason::MaxIterations => 0,
        }
    }

    pub fn summary(&self) -> String {
        let last = self.run.trace.last();
        let stop = match self.run.trace.stop {
            StopReason::Converged => "converged",
            StopReason::DofCap => "dof-cap",
            StopReason::MaxIterations => "max-iterations",
        };
        let rate = self.rate.map(|r| format!("{r:.4}")).unwrap_or_else(|| "n/a".into());
        format!(
            "stop={stop} iterations={} elements={} dofs={} eta={:.6e} rate={rate}",
            self.run.trace.records.len(),
            last.nelems,
            last.ndofs,
            last.eta2.sqrt()
        )
    }
}

fn create(dir: &Path, name: &str, files: &mut Vec<PathBuf>) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path)?;
    files.push(path);
    Ok(BufWriter::new(f))
}

pub fn cmd_adapt(cfg: &RunConfig) -> Result<AdaptOutcome> {
    let t0 = cfg.initial_mesh()?;
    let g = cfg.problem.load(cfg.params.mu);
    let run = anfem(&t0, &g, &cfg.params)?;
    let rate = rate_fit(&run.trace).ok();

    fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    output::write_trace(create(&cfg.out, "trace.csv", &mut files)?, &run.trace)?;
    output::write_solution(create(&cfg.out, "solution.csv", &mut files)?, &run.mesh, &run.solution)?;
    output::write_estimator(create(&cfg.out, "estimator.csv", &mut files)?, &run.mesh, &run.report)?;
    let mut outcome = AdaptOutcome { run, rate, files };
    let mut w = create(&cfg.out, "summary.txt", &mut outcome.files)?;
    writeln!(w, "{}", outcome.summary())?;
    w.flush()?;
    Ok(outcome)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<VerifyReport> {
    let suites = if args.suite.is_empty() { Suite::ALL.to_vec() } else { args.suite.clone() };
    let opts = VerifyOptions {
        seed: args.seed,
        mutate: args.mutate,
        ..VerifyOptions::default()
    };
    let report = run_suites(&suites, &opts)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        report.write_csv(BufWriter::new(File::create(dir.join("verify.csv"))?))?;
    }
    Ok(report)
}

pub fn cmd_counterexample(args: &CounterexampleArgs) -> Result<ScalingStudy> {
    let study = scaling_study(&args.sizes)?;
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        output::write_counterexample(BufWriter::new(File::create(dir.join("counterexample.csv"))?), &study)?;
    }
    Ok(study)
}

/// Caps rayon's global pool from `AFEM_THREADS`. Unset or empty means no cap.
pub fn configure_threads(value: Option<&str>) -> Result<()> {
    let Some(v) = value.map(str::trim).filter(|v| !v.is_empty()) else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::param("AFEM_THREADS", format!("must be a positive integer, got `{v}`")))?;
    // a pool that was already built keeps its size
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
