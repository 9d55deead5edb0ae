use std::path::PathBuf;
use std::time::Duration;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gasgrid::decomposition::{PhaseLimits, SolveConfig};
use gasgrid::ingest::{check_multipliers, check_stress, ComponentMix, DEFAULT_MULTIPLIERS, STRESS_LEVELS};
use gasgrid::FormulationConfig;

/// Gas network design: pick pipe diameters and active-element states that
/// carry a nomination at minimum construction cost.
///
/// Verbosity comes from GASGRID_LOG: `warn` (default) is quiet, `info`
/// shows progress and every budget-search step, `debug` traces the solvers.
#[derive(Debug, Parser)]
#[command(name = "gasgrid", version)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write one instance file per nomination and stress level.
    Gen(GenArgs),
    /// Run the full design procedure and write a report per instance.
    Solve(SolveArgs),
    /// Check one fixed design against an instance.
    Validate(ValidateArgs),
    /// Solve the conic relaxation for a lower bound.
    Relax(RelaxArgs),
    /// Tabulate solve reports.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    pub fn on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Network: JSON document, or GasLib XML when the extension is `.net`
    /// or `.xml`.
    #[arg(long, required_unless_present = "synthetic", conflicts_with = "synthetic")]
    pub network: Option<PathBuf>,
    /// Nomination documents: JSON, or GasLib `.scn`.
    #[arg(long = "nomination", num_args = 1.., requires = "network")]
    pub nominations: Vec<PathBuf>,
    /// Generate a random network with this many nodes instead.
    #[arg(long, value_name = "NODES")]
    pub synthetic: Option<usize>,
    #[command(flatten)]
    pub mix: MixArgs,
    #[arg(long, value_delimiter = ',', default_values_t = STRESS_LEVELS)]
    pub stress: Vec<f64>,
    /// Candidate diameters as multiples of each pipe's base diameter.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_MULTIPLIERS)]
    pub multipliers: Vec<f64>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Component counts for `--synthetic`.
#[derive(Debug, Args)]
pub struct MixArgs {
    #[arg(long, default_value_t = 1)]
    pub pipes: usize,
    #[arg(long, default_value_t = 0)]
    pub short_pipes: usize,
    #[arg(long, default_value_t = 0)]
    pub resistors: usize,
    #[arg(long, default_value_t = 0)]
    pub compressors: usize,
    #[arg(long, default_value_t = 0)]
    pub control_valves: usize,
    #[arg(long, default_value_t = 0)]
    pub valves: usize,
    /// Width of the potential boxes around the witness design.
    #[arg(long, default_value_t = 0.5)]
    pub slack: f64,
}

impl MixArgs {
    pub fn mix(&self, multipliers: &[f64]) -> ComponentMix {
        ComponentMix {
            pipes: self.pipes,
            short_pipes: self.short_pipes,
            resistors: self.resistors,
            compressors: self.compressors,
            control_valves: self.control_valves,
            valves: self.valves,
            slack: self.slack,
            multipliers: multipliers.to_vec(),
        }
    }
}

impl GenArgs {
    pub fn check(&self) -> Result<()> {
        if self.stress.is_empty() {
            bail!("at least one stress level is required");
        }
        for &s in &self.stress {
            check_stress(s)?;
        }
        check_multipliers(&self.multipliers)?;
        if self.network.is_some() && self.nominations.is_empty() {
            bail!("--network needs at least one --nomination");
        }
        Ok(())
    }
}

/// Formulation knobs shared by the solving subcommands.
#[derive(Debug, Args)]
pub struct FormulationArgs {
    #[arg(long, value_enum, default_value_t = Toggle::Off)]
    pub perspective: Toggle,
    /// Scaled feasibility tolerance.
    #[arg(long, default_value_t = 1e-6)]
    pub eps_feas: f64,
    /// Big-M in potential units (default: ten times the largest bound).
    #[arg(long)]
    pub big_m: Option<f64>,
}

impl FormulationArgs {
    pub fn config(&self) -> Result<FormulationConfig> {
        if !(self.eps_feas > 0.0 && self.eps_feas < 1.0) {
            bail!("--eps-feas must lie in (0, 1), got {}", self.eps_feas);
        }
        if let Some(m) = self.big_m {
            if !(m > 0.0 && m.is_finite()) {
                bail!("--big-m must be positive and finite, got {m}");
            }
        }
        Ok(FormulationConfig {
            big_m: self.big_m,
            eps_feas: self.eps_feas,
            perspective: self.perspective.on(),
            ..FormulationConfig::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    /// Instance files.
    #[arg(required_unless_present = "replay")]
    pub instances: Vec<PathBuf>,
    /// Rerun a previous report: its instance and recorded configuration.
    #[arg(long, conflicts_with_all = ["instances", "production"])]
    pub replay: Option<PathBuf>,
    #[command(flatten)]
    pub formulation: FormulationArgs,
    /// Start from the long production limits instead of the desk ones.
    #[arg(long)]
    pub production: bool,
    /// Seconds for the initial budget search.
    #[arg(long)]
    pub time_limit_initial: Option<f64>,
    /// Seconds for the binary search on the budget.
    #[arg(long)]
    pub time_limit_binary: Option<f64>,
    /// Seconds per checked budget.
    #[arg(long)]
    pub time_limit_primal: Option<f64>,
    /// Seconds per master solve.
    #[arg(long)]
    pub time_limit_master: Option<f64>,
    /// Relative gap at which the search stops.
    #[arg(long, default_value_t = 1e-4)]
    pub eps_rel: f64,
    /// Absolute gap at which the search stops; 0 disables it.
    #[arg(long, default_value_t = 0.0)]
    pub eps_abs: f64,
    /// Cap on validations during the initial search.
    #[arg(long)]
    pub initial_max_checks: Option<usize>,
    /// Seconds for a relaxation bound that may raise the initial lower bound.
    #[arg(long)]
    pub relax_limit: Option<f64>,
    /// Instances solved concurrently.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn seconds(flag: &str, v: f64) -> Result<Duration> {
    if !(v >= 0.0 && v.is_finite()) {
        bail!("{flag} must be a finite number of seconds, got {v}");
    }
    Ok(Duration::from_secs_f64(v))
}

impl SolveArgs {
    pub fn config(&self) -> Result<SolveConfig> {
        let mut limits = if self.production { PhaseLimits::production() } else { PhaseLimits::default() };
        let set = |slot: &mut Duration, flag: &str, v: Option<f64>| -> Result<()> {
            if let Some(v) = v {
                *slot = seconds(flag, v)?;
            }
            Ok(())
        };
        set(&mut limits.initial, "--time-limit-initial", self.time_limit_initial)?;
        set(&mut limits.binary, "--time-limit-binary", self.time_limit_binary)?;
        set(&mut limits.primal, "--time-limit-primal", self.time_limit_primal)?;
        set(&mut limits.master, "--time-limit-master", self.time_limit_master)?;
        if !(self.eps_rel >= 0.0 && self.eps_rel.is_finite()) || !(self.eps_abs >= 0.0 && self.eps_abs.is_finite()) {
            bail!("gap tolerances must be finite and non-negative");
        }
        if self.eps_rel == 0.0 && self.eps_abs == 0.0 {
            bail!("at least one of --eps-rel and --eps-abs must be positive");
        }
        if self.jobs == 0 {
            bail!("--jobs must be at least 1");
        }
        Ok(SolveConfig {
            formulation: self.formulation.config()?,
            limits,
            eps_abs: self.eps_abs,
            eps_rel: self.eps_rel,
            initial_max_checks: self.initial_max_checks,
            relaxation_limit: self.relax_limit.map(|v| seconds("--relax-limit", v)).transpose()?,
        })
    }
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    pub instance: PathBuf,
    /// Design to check.
    #[arg(long, required_unless_present = "witness", conflicts_with = "witness")]
    pub assignment: Option<PathBuf>,
    /// Check the design recorded in the instance by the generator.
    #[arg(long)]
    pub witness: bool,
    /// Search valve and control-valve states instead of taking them from
    /// the design.
    #[arg(long)]
    pub search_states: bool,
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
    #[arg(long, default_value_t = 1e-6)]
    pub eps_feas: f64,
}

#[derive(Debug, Args)]
pub struct RelaxArgs {
    pub instance: PathBuf,
    #[command(flatten)]
    pub formulation: FormulationArgs,
    #[arg(long, default_value_t = 60.0)]
    pub time_limit: f64,
    /// Cost of a known design, to report the gap against.
    #[arg(long)]
    pub incumbent: Option<f64>,
    /// Write the root program as an algebraic listing.
    #[arg(long)]
    pub export: Option<PathBuf>,
    /// Directory for the JSON bound report.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Report files, or directories searched for `*.report.json`.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Emit the reports as one JSON array instead of a table.
    #[arg(long)]
    pub json: bool,
}
