//! Command line and JSON configuration.
//!
//! Every run option can come from a flag or from the JSON file named by
//! `--config`. Flags win over the file. The output directory may also be set
//! through `ISING_RELAX_OUT`, which sits between the flag and the file.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use ising_relax::relaxation::{choose_tmax, make_partition, RelaxConfig, RunLength, StepSize, DEFAULT_MAX_ITERATIONS};
use ising_relax::relaxation::ExecMode;
use ising_relax::{Init, Lattice, ModelParams, Rule};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const OUT_ENV: &str = "ISING_RELAX_OUT";
pub const DEFAULT_OUT: &str = "ising-relax-out";

/// A `AxB` pair such as `16x16`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Dims(pub usize, pub usize);

impl FromStr for Dims {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (a, b) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("expected AxB, got {s:?}"))?;
        let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}"));
        Ok(Dims(parse(a)?, parse(b)?))
    }
}

impl TryFrom<String> for Dims {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        s.parse()
    }
}

impl From<Dims> for String {
    fn from(d: Dims) -> String {
        d.to_string()
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.0, self.1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum RuleArg {
    Metropolis,
    Glauber,
}

impl From<RuleArg> for Rule {
    fn from(r: RuleArg) -> Rule {
        match r {
            RuleArg::Metropolis => Rule::Metropolis,
            RuleArg::Glauber => Rule::Glauber,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum InitArg {
    Up,
    Down,
    /// Independent fair spins drawn from the run seed.
    Random,
}

/// Run options shared by the flag parser and the JSON file.
#[derive(Debug, Clone, Default, PartialEq, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct Settings {
    /// Lattice size as WIDTHxHEIGHT.
    #[arg(long)]
    pub lattice: Option<Dims>,
    /// PE grid as ROWSxCOLS.
    #[arg(long)]
    pub pes: Option<Dims>,
    #[arg(long, allow_negative_numbers = true)]
    pub j: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub h: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub rule: Option<RuleArg>,
    #[arg(long, value_enum)]
    pub init: Option<InitArg>,
    /// Scale factor of the logarithmic step-size rule.
    #[arg(long, allow_negative_numbers = true)]
    pub tmax_scale: Option<f64>,
    /// Explicit step size; excludes --tmax-scale.
    #[arg(long, allow_negative_numbers = true)]
    pub tmax: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of relaxation steps.
    #[arg(long)]
    pub steps: Option<usize>,
    /// Simulated time to reach; excludes --steps.
    #[arg(long, allow_negative_numbers = true)]
    pub time: Option<f64>,
    /// Proposals for the rejection chain.
    #[arg(long)]
    pub updates: Option<u64>,
    #[arg(long)]
    pub max_iterations: Option<usize>,
    /// Restart streams from unread pairs after every commit.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub fresh: Option<bool>,
    /// One thread per PE.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub threaded: Option<bool>,
    /// Re-run each converged step and check it reproduces itself.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub audit: Option<bool>,
    /// Batches for batch-means error bars.
    #[arg(long)]
    pub batches: Option<usize>,
    /// Leading fraction of the run excluded from averages.
    #[arg(long, allow_negative_numbers = true)]
    pub burn_in: Option<f64>,
    /// Block size for sweeps.
    #[arg(long)]
    pub block: Option<Dims>,
    /// PE grids for sweeps, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub sweep: Option<Vec<Dims>>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! overlay {
    ($flags:ident, $file:ident, $sources:ident; $($field:ident),* $(,)?) => {
        Settings { $(
            $field: match ($flags.$field, $file.$field) {
                (Some(v), _) => {
                    $sources.insert(stringify!($field).replace('_', "-"), Source::Flag);
                    Some(v)
                }
                (None, Some(v)) => {
                    $sources.insert(stringify!($field).replace('_', "-"), Source::File);
                    Some(v)
                }
                (None, None) => None,
            },
        )* }
    };
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Flag,
    Env,
    File,
}

impl Settings {
    fn overlay(flags: Settings, file: Settings, sources: &mut BTreeMap<String, Source>) -> Settings {
        overlay!(flags, file, sources;
            lattice, pes, j, h, beta, lambda, rule, init, tmax_scale, tmax, seed, steps, time,
            updates, max_iterations, fresh, threaded, audit, batches, burn_in, block, sweep, out)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// JSON file with run options; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[command(flatten)]
    pub settings: Settings,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    pub left: PathBuf,
    pub right: PathBuf,
    /// Relative time tolerance; 0 compares bits.
    #[arg(long, default_value_t = 0.0)]
    pub tolerance: f64,
}

#[derive(Debug, Subcommand)]
pub enum CliCommand {
    /// Rejection-based single-site chain.
    Metropolis(RunArgs),
    /// Sequential rejection-free n-fold way.
    Nfold(RunArgs),
    /// Synchronous relaxation over a PE grid.
    Relax(RunArgs),
    /// Global sequential reference for a partitioned run.
    Oracle(RunArgs),
    /// Exact moments by summing over all states.
    Enumerate(RunArgs),
    /// Iteration-count sweep over PE grids with a fixed block size.
    Bench(RunArgs),
    /// Compares two history files.
    Compare(CompareArgs),
}

#[derive(Debug, Parser)]
#[command(name = "ising-relax", version, about = "Parallel rejection-free Ising kinetics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Metropolis,
    Nfold,
    Relax,
    Oracle,
    Enumerate,
    Bench,
}

/// Fully resolved and validated run options.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub width: usize,
    pub height: usize,
    pub pes: Option<Dims>,
    pub params: ModelParams,
    pub init: Init,
    pub step_size: StepSize,
    pub seed: u64,
    pub run_length: Option<RunLength>,
    pub updates: Option<u64>,
    pub max_iterations: usize,
    pub fresh_randomness: bool,
    pub threaded: bool,
    pub audit: bool,
    pub batches: usize,
    pub burn_in: f64,
    pub block: Dims,
    pub sweep: Vec<Dims>,
    pub out: PathBuf,
    /// Where each explicitly given option came from.
    pub sources: BTreeMap<String, Source>,
}

#[derive(Debug)]
pub enum Invocation {
    Run(Box<RunConfig>),
    Compare(CompareArgs),
    /// `--help` or `--version` text.
    Help(String),
}

/// Parses `argv` (including the program name) and reads the output
/// directory override from the environment.
pub fn parse_config<I, T>(argv: I) -> Result<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    parse_config_with_env(argv, std::env::var_os(OUT_ENV).map(PathBuf::from))
}

pub fn parse_config_with_env<I, T>(argv: I, out_env: Option<PathBuf>) -> Result<Invocation>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return Ok(Invocation::Help(e.render().to_string()))
        }
        Err(e) => return Err(HarnessError::Usage(e.render().to_string())),
    };
    let (command, args) = match cli.command {
        CliCommand::Compare(c) => return Ok(Invocation::Compare(c)),
        CliCommand::Metropolis(a) => (Command::Metropolis, a),
        CliCommand::Nfold(a) => (Command::Nfold, a),
        CliCommand::Relax(a) => (Command::Relax, a),
        CliCommand::Oracle(a) => (Command::Oracle, a),
        CliCommand::Enumerate(a) => (Command::Enumerate, a),
        CliCommand::Bench(a) => (Command::Bench, a),
    };
    let file = match &args.config {
        Some(path) => read_settings(path)?,
        None => Settings::default(),
    };
    resolve(command, args.settings, file, out_env).map(|c| Invocation::Run(Box::new(c)))
}

pub fn read_settings(path: &Path) -> Result<Settings> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| HarnessError::Usage(format!("config file {}: {e}", path.display())))
}

fn usage(msg: impl Into<String>) -> HarnessError {
    HarnessError::Usage(msg.into())
}

/// Merges flags over file values, fills defaults, and validates everything a
/// run needs, including the partition, before any simulation starts.
pub fn resolve(command: Command, flags: Settings, file: Settings, out_env: Option<PathBuf>) -> Result<RunConfig> {
    let mut sources = BTreeMap::new();
    let s = Settings::overlay(flags.clone(), file, &mut sources);
    let out = match (flags.out, out_env) {
        (Some(p), _) => p,
        (None, Some(p)) => {
            sources.insert("out".into(), Source::Env);
            p
        }
        (None, None) => s.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
    };

    let beta = s.beta.ok_or_else(|| usage("--beta is required"))?;
    let params = ModelParams::new(
        s.j.unwrap_or(1.0),
        s.h.unwrap_or(0.0),
        beta,
        s.lambda.unwrap_or(1.0),
        s.rule.unwrap_or(RuleArg::Glauber).into(),
    )
    .map_err(HarnessError::Config)?;

    let seed = s.seed.unwrap_or(0);
    let init = match s.init.unwrap_or(InitArg::Random) {
        InitArg::Up => Init::AllUp,
        InitArg::Down => Init::AllDown,
        InitArg::Random => Init::Random(seed),
    };
    let step_size = match (s.tmax, s.tmax_scale) {
        (Some(_), Some(_)) => return Err(usage("--tmax and --tmax-scale are mutually exclusive")),
        (Some(t), None) if t > 0.0 && t.is_finite() => StepSize::Explicit(t),
        (Some(t), None) => return Err(usage(format!("--tmax must be positive, got {t}"))),
        (None, scale) => StepSize::Formula { scale: scale.unwrap_or(1.0) },
    };
    let run_length = match (s.steps, s.time) {
        (Some(_), Some(_)) => return Err(usage("--steps and --time are mutually exclusive")),
        (Some(n), None) => Some(RunLength::Steps(n)),
        (None, Some(t)) if t >= 0.0 && t.is_finite() => Some(RunLength::Time(t)),
        (None, Some(t)) => return Err(usage(format!("--time must be non-negative, got {t}"))),
        (None, None) => None,
    };
    let batches = s.batches.unwrap_or(20);
    if batches == 0 {
        return Err(usage("--batches must be positive"));
    }
    let burn_in = s.burn_in.unwrap_or(0.1);
    if !(0.0..1.0).contains(&burn_in) {
        return Err(usage(format!("--burn-in must lie in [0, 1), got {burn_in}")));
    }
    let max_iterations = s.max_iterations.unwrap_or(DEFAULT_MAX_ITERATIONS);
    if max_iterations == 0 {
        return Err(usage("--max-iterations must be positive"));
    }

    let needs_lattice = command != Command::Bench;
    let (width, height) = match s.lattice {
        Some(Dims(w, h)) => (w, h),
        None if needs_lattice => return Err(usage("--lattice is required")),
        None => (0, 0),
    };
    if needs_lattice {
        Lattice::new(width, height, Init::AllUp).map_err(HarnessError::Config)?;
    }

    match command {
        Command::Relax | Command::Oracle => {
            let Dims(r, c) = s.pes.ok_or_else(|| usage("--pes is required"))?;
            let partition = make_partition(width, height, r, c).map_err(HarnessError::Config)?;
            if let StepSize::Formula { scale } = step_size {
                choose_tmax(partition.num_pes() as f64, params.lambda, partition.boundary_size(), scale)
                    .map_err(HarnessError::Config)?;
            }
            if run_length.is_none() {
                return Err(usage("one of --steps or --time is required"));
            }
        }
        Command::Nfold => match run_length {
            Some(RunLength::Time(_)) => {}
            _ => return Err(usage("nfold needs --time")),
        },
        Command::Metropolis if s.updates.is_none() => return Err(usage("metropolis needs --updates")),
        _ => {}
    }

    let block = s.block.unwrap_or(Dims(8, 8));
    let sweep = s.sweep.clone().unwrap_or_else(|| vec![Dims(2, 2), Dims(4, 4), Dims(8, 8)]);
    if command == Command::Bench {
        if sweep.is_empty() {
            return Err(usage("--sweep needs at least one PE grid"));
        }
        for &Dims(r, c) in &sweep {
            let partition = make_partition(block.0 * c, block.1 * r, r, c).map_err(HarnessError::Config)?;
            if let StepSize::Formula { scale } = step_size {
                choose_tmax(partition.num_pes() as f64, params.lambda, partition.boundary_size(), scale)
                    .map_err(HarnessError::Config)?;
            }
        }
    }

    Ok(RunConfig {
        command,
        width,
        height,
        pes: s.pes,
        params,
        init,
        step_size,
        seed,
        run_length: run_length.or((command == Command::Bench).then_some(RunLength::Steps(200))),
        updates: s.updates,
        max_iterations,
        fresh_randomness: s.fresh.unwrap_or(false),
        threaded: s.threaded.unwrap_or(false),
        audit: s.audit.unwrap_or(false),
        batches,
        burn_in,
        block,
        sweep,
        out,
        sources,
    })
}

impl RunConfig {
    /// Engine configuration for the lattice and PE grid of this run.
    pub fn relax_config(&self) -> RelaxConfig {
        let Dims(r, c) = self.pes.unwrap_or(Dims(1, 1));
        self.relax_config_for(self.width, self.height, r, c)
    }

    pub fn relax_config_for(&self, width: usize, height: usize, pe_rows: usize, pe_cols: usize) -> RelaxConfig {
        let mut c = RelaxConfig::new(width, height, pe_rows, pe_cols, self.params);
        c.init = self.init;
        c.step_size = self.step_size;
        c.max_iterations = self.max_iterations;
        c.run_length = self.run_length.unwrap_or(RunLength::Steps(0));
        c.fresh_randomness = self.fresh_randomness;
        c.seed = self.seed;
        c.mode = if self.threaded { ExecMode::Threaded } else { ExecMode::Sequential };
        c.audit = self.audit;
        c
    }
}
