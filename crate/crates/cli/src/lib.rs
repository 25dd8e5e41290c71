//! Command-line front end: single runs, parameter sweeps, and a resolved-
//! parameter report. All file output is deterministic for a given
//! invocation, including under the parallel sweep.
//!
//! Exit codes: 0 success, 2 configuration/invocation error, 3 runtime
//! contract violation (a run that breaks its own accounting invariants).

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use mgwsim_core::mobility::load_trace;
use mgwsim_core::{
    ConfigError, ConfigLoader, DerivedMetrics, LogEvent, RunOutcome, RunStats, ScenarioConfig,
    SimError, Simulation, Variant,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CONTRACT: i32 = 3;

/// Deterministic VANET gateway-routing simulator.
#[derive(Debug, Parser)]
#[command(name = "mgwsim", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Execute one scenario and write a single results row.
    Run(RunArgs),
    /// Run an axis sweep across variants and seeds; write results and
    /// plot-data files.
    Sweep(SweepArgs),
    /// Print every effective parameter and where its value came from.
    Explain(ExplainArgs),
    /// Execute one scenario with message logging and write every protocol
    /// transmission and role change as a CSV row.
    Trace(TraceArgs),
}

#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Scenario file: `key = value` lines under dotted section headers.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override one parameter, e.g. `--set scenario.vehicles=30`.
    /// Repeatable; unambiguous bare names like `vehicles` also work.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the protocol variant.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Run on an imported mobility trace instead of the synthetic highway.
    #[arg(long, value_name = "PATH")]
    pub trace: Option<PathBuf>,
    /// Directory that receives results.csv.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Swept parameter.
    #[arg(long, value_enum, default_value_t = Axis::Vgc)]
    pub axis: Axis,
    /// Comma-separated seed list.
    #[arg(long, value_name = "A,B,C", default_value = "1,2,3,4,5")]
    pub seeds: String,
    /// Restrict the sweep to one variant (default: both).
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Directory that receives results.csv and the plot-data files.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Override the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the protocol variant.
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Directory that receives trace.csv.
    #[arg(long, default_value = ".", value_name = "DIR")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Etr,
    Mtr,
}

impl From<VariantArg> for Variant {
    fn from(v: VariantArg) -> Variant {
        match v {
            VariantArg::Etr => Variant::Etr,
            VariantArg::Mtr => Variant::Mtr,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Axis {
    /// Gateway-candidate count: 5, 10, 20, 30, 40.
    Vgc,
    /// Short-range radio range: 250, 300, 350, 400, 450 m.
    Range,
}

impl Axis {
    pub fn values(self) -> &'static [f64] {
        match self {
            Axis::Vgc => &[5.0, 10.0, 20.0, 30.0, 40.0],
            Axis::Range => &[250.0, 300.0, 350.0, 400.0, 450.0],
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Axis::Vgc => "scenario.vgc_count",
            Axis::Range => "radio.range",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            Axis::Vgc => "vgc",
            Axis::Range => "range",
        }
    }
}

/// Invocation failure, carrying the exit code its class maps to.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, files, parameter names or values. Exit 2.
    Config(String),
    /// The simulation violated one of its own invariants, or a result
    /// could not be produced. Exit 3.
    Contract(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Contract(_) => EXIT_CONTRACT,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Contract(m) => write!(f, "contract violation: {m}"),
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(e) => CliError::Config(e.to_string()),
            SimError::Mobility(e) => CliError::Config(e.to_string()),
            SimError::Conservation(e) => CliError::Contract(e.to_string()),
        }
    }
}

/// Entry point shared by the binary and the tests. Writes human-readable
/// progress to `stdout` and returns the process exit code.
pub fn run_cli(cli: Cli) -> i32 {
    let result = match cli.command {
        Command::Run(args) => cmd_run(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Explain(args) => cmd_explain(&args),
        Command::Trace(args) => cmd_trace(&args),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("mgwsim: {e}");
            e.exit_code()
        }
    }
}

// ----------------------------------------------------------------------
// Configuration assembly
// ----------------------------------------------------------------------

/// Load the scenario file (when given) and apply `--set` overrides in
/// order. Dedicated flags are applied by the caller on top.
fn build_loader(args: &ConfigArgs) -> Result<ConfigLoader, CliError> {
    let mut loader = match &args.config {
        Some(path) => ConfigLoader::from_file(path)?,
        None => ConfigLoader::new(),
    };
    for pair in &args.set {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            CliError::Config(format!("--set expects KEY=VALUE, got `{pair}`"))
        })?;
        loader.set_override(key.trim(), value.trim())?;
    }
    Ok(loader)
}

// ----------------------------------------------------------------------
// run
// ----------------------------------------------------------------------

fn cmd_run(args: &RunArgs) -> Result<(), CliError> {
    let mut loader = build_loader(&args.config)?;
    if let Some(seed) = args.seed {
        loader.set_override("scenario.seed", &seed.to_string())?;
    }
    if let Some(variant) = args.variant {
        let v: Variant = variant.into();
        loader.set_override("scenario.variant", v.as_str())?;
    }
    let cfg = loader.into_config()?;

    let outcome = execute(&cfg, args.trace.as_deref())?;

    let scenario = if args.trace.is_some() { "trace" } else { "single" };
    let row = ResultRow::from_run(scenario.into(), None, &cfg, Some(cfg.seed), &outcome);
    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;
    let path = args.out.join("results.csv");
    write_lines(&path, std::iter::once(RESULTS_HEADER.to_string()).chain([row.to_csv()]))?;

    print_summary(&outcome);
    println!("wrote {}", path.display());
    Ok(())
}

fn print_summary(outcome: &RunOutcome) {
    let m = &outcome.metrics;
    let s = &outcome.stats;
    println!(
        "generated {}  delivered {}  pdr {}  mean_delay_s {}  overhead {}",
        s.data_generated,
        s.data_delivered,
        fmt_opt(m.pdr),
        fmt_opt(m.mean_delay),
        fmt_opt(m.overhead),
    );
    println!(
        "control tx: adv {}  sol {}  unicast_adv {}  notify {}  thanks {}  | handovers {}  elections {}",
        s.adv_transmissions,
        s.sol_transmissions,
        s.unicast_adv_transmissions,
        s.notify_transmissions,
        s.thanks_transmissions,
        s.handovers,
        s.vgw_elections,
    );
}

/// Build and run one simulation, converting panics from violated internal
/// assertions into contract errors instead of aborting the process.
fn execute(cfg: &ScenarioConfig, trace: Option<&Path>) -> Result<RunOutcome, CliError> {
    execute_logged(cfg, trace, false)
}

fn execute_logged(
    cfg: &ScenarioConfig,
    trace: Option<&Path>,
    log: bool,
) -> Result<RunOutcome, CliError> {
    let mut sim = match trace {
        Some(path) => {
            let trace = load_trace(path).map_err(|e| {
                CliError::Config(format!("trace {}: {e}", path.display()))
            })?;
            Simulation::from_trace(cfg, trace)?
        }
        None => Simulation::from_config(cfg)?,
    };
    sim.log_messages(log);
    let result = catch_unwind(AssertUnwindSafe(|| sim.run()));
    match result {
        Ok(run) => Ok(run?),
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "simulation panicked".into());
            Err(CliError::Contract(msg))
        }
    }
}

// ----------------------------------------------------------------------
// sweep
// ----------------------------------------------------------------------

fn parse_seeds(text: &str) -> Result<Vec<u64>, CliError> {
    let seeds: Vec<u64> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<u64>()
                .map_err(|_| CliError::Config(format!("bad seed `{s}` in --seeds")))
        })
        .collect::<Result<_, _>>()?;
    if seeds.is_empty() {
        return Err(CliError::Config("--seeds must list at least one seed".into()));
    }
    Ok(seeds)
}

fn cmd_sweep(args: &SweepArgs) -> Result<(), CliError> {
    let seeds = parse_seeds(&args.seeds)?;
    let variants: Vec<Variant> = match args.variant {
        Some(v) => vec![v.into()],
        None => vec![Variant::Etr, Variant::Mtr],
    };
    // validate the base configuration before spawning any work
    let base = build_loader(&args.config)?;
    base.clone().into_config()?;

    let mut cells = Vec::new();
    for &value in args.axis.values() {
        for &variant in &variants {
            for &seed in &seeds {
                cells.push((value, variant, seed));
            }
        }
    }

    let outcomes: Vec<Result<(ScenarioConfig, RunOutcome), CliError>> = cells
        .par_iter()
        .map(|&(value, variant, seed)| {
            let mut loader = base.clone();
            loader.set_override(args.axis.key(), &format_axis_value(value))?;
            loader.set_override("scenario.variant", variant.as_str())?;
            loader.set_override("scenario.seed", &seed.to_string())?;
            let cfg = loader.into_config()?;
            let outcome = execute(&cfg, None)?;
            Ok((cfg, outcome))
        })
        .collect();

    // results.csv: per-cell rows in (axis, variant, seed) order, then one
    // mean row per (axis, variant)
    let mut rows = Vec::new();
    let mut runs: Vec<(f64, Variant, u64, DerivedMetrics, RunStats)> = Vec::new();
    for (cell, outcome) in cells.iter().zip(outcomes) {
        let (value, variant, seed) = *cell;
        let (cfg, outcome) = outcome?;
        let scenario = format!("{}{}-{}-s{}", args.axis.slug(), format_axis_value(value), variant.as_str(), seed);
        rows.push(ResultRow::from_run(scenario, Some(value), &cfg, Some(seed), &outcome).to_csv());
        runs.push((value, variant, seed, outcome.metrics, outcome.stats));
    }
    for &value in args.axis.values() {
        for &variant in &variants {
            let group: Vec<&(f64, Variant, u64, DerivedMetrics, RunStats)> = runs
                .iter()
                .filter(|(v, var, ..)| *v == value && *var == variant)
                .collect();
            let scenario =
                format!("{}{}-{}-mean", args.axis.slug(), format_axis_value(value), variant.as_str());
            rows.push(mean_row(scenario, value, variant, &group));
        }
    }

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;
    let results = args.out.join("results.csv");
    write_lines(&results, std::iter::once(RESULTS_HEADER.to_string()).chain(rows))?;

    // plot-data files: x, variant, mean, min, max per metric
    for (file, pick) in [
        ("plot_pdr.csv", 0usize),
        ("plot_delay.csv", 1usize),
        ("plot_overhead.csv", 2usize),
    ] {
        let mut lines = vec!["x,variant,mean,min,max".to_string()];
        for &value in args.axis.values() {
            for &variant in &variants {
                let samples: Vec<f64> = runs
                    .iter()
                    .filter(|(v, var, ..)| *v == value && *var == variant)
                    .filter_map(|(_, _, _, m, _)| match pick {
                        0 => m.pdr,
                        1 => m.mean_delay,
                        _ => m.overhead,
                    })
                    .collect();
                lines.push(plot_row(value, variant, &samples));
            }
        }
        write_lines(&args.out.join(file), lines.into_iter())?;
    }

    println!(
        "swept {} = {:?} over {:?}, seeds {:?}",
        args.axis.slug(),
        args.axis.values(),
        variants.iter().map(|v| v.as_str()).collect::<Vec<_>>(),
        seeds,
    );
    println!("wrote {}", results.display());
    Ok(())
}

fn format_axis_value(value: f64) -> String {
    if value.fract() == 0.0 {
        format!("{}", value as u64)
    } else {
        format!("{value}")
    }
}

// ----------------------------------------------------------------------
// explain
// ----------------------------------------------------------------------

fn cmd_explain(args: &ExplainArgs) -> Result<(), CliError> {
    let loader = build_loader(&args.config)?;
    loader.clone().into_config()?; // fail before printing anything
    let rows = loader.resolved();
    let width = rows.iter().map(|r| r.key.len()).max().unwrap_or(0);
    let mut text = String::new();
    for row in rows {
        text.push_str(&format!(
            "{:width$} = {} [{}]\n",
            row.key,
            row.value,
            row.source.as_str()
        ));
    }
    // tolerate a closed pipe (`mgwsim explain | head`) instead of panicking
    let _ = std::io::stdout().write_all(text.as_bytes());
    Ok(())
}

// ----------------------------------------------------------------------
// trace
// ----------------------------------------------------------------------

pub const TRACE_HEADER: &str = "t,event,node,peer,gateway,source,seq,hop,value";

/// One log record as a flat CSV row; fields that do not apply to the
/// event stay empty.
fn trace_row(t: f64, event: &LogEvent) -> String {
    use mgwsim_core::mobility::VehicleId;
    struct F {
        event: &'static str,
        node: VehicleId,
        peer: Option<VehicleId>,
        gateway: Option<VehicleId>,
        source: Option<VehicleId>,
        seq: Option<u64>,
        hop: Option<u32>,
        value: Option<f64>,
    }
    let f = match *event {
        LogEvent::AdvTx { from, gateway, seq, hop, ers } => F {
            event: "adv",
            node: from,
            peer: None,
            gateway: Some(gateway),
            source: None,
            seq: Some(seq),
            hop: Some(hop),
            value: Some(ers),
        },
        LogEvent::SolTx { from, source, sol_seq, hop } => F {
            event: "sol",
            node: from,
            peer: None,
            gateway: None,
            source: Some(source),
            seq: Some(sol_seq),
            hop: Some(hop),
            value: None,
        },
        LogEvent::ReplyTx { from, to, gateway } => F {
            event: "reply",
            node: from,
            peer: Some(to),
            gateway: Some(gateway),
            source: None,
            seq: None,
            hop: None,
            value: None,
        },
        LogEvent::NotifyTx { from, to, gateway, for_source } => F {
            event: "notify",
            node: from,
            peer: Some(to),
            gateway: Some(gateway),
            source: Some(for_source),
            seq: None,
            hop: None,
            value: None,
        },
        LogEvent::ThanksTx { from, to, gateway } => F {
            event: "thanks",
            node: from,
            peer: Some(to),
            gateway: Some(gateway),
            source: None,
            seq: None,
            hop: None,
            value: None,
        },
        LogEvent::DataTx { from, to, gateway, packet, delivered } => F {
            event: "data",
            node: from,
            peer: Some(to),
            gateway: Some(gateway),
            source: None,
            seq: Some(packet),
            hop: None,
            value: Some(f64::from(u8::from(delivered))),
        },
        LogEvent::Elected { node } => F {
            event: "elected",
            node,
            peer: None,
            gateway: None,
            source: None,
            seq: None,
            hop: None,
            value: None,
        },
        LogEvent::Demoted { node } => F {
            event: "demoted",
            node,
            peer: None,
            gateway: None,
            source: None,
            seq: None,
            hop: None,
            value: None,
        },
        LogEvent::Handover { node, from_gateway, to_gateway } => F {
            event: "handover",
            node,
            peer: Some(from_gateway),
            gateway: Some(to_gateway),
            source: None,
            seq: None,
            hop: None,
            value: None,
        },
    };
    let opt_id = |v: Option<VehicleId>| v.map(|v| v.0.to_string()).unwrap_or_default();
    format!(
        "{t},{},{},{},{},{},{},{},{}",
        f.event,
        f.node.0,
        opt_id(f.peer),
        opt_id(f.gateway),
        opt_id(f.source),
        f.seq.map(|v| v.to_string()).unwrap_or_default(),
        f.hop.map(|v| v.to_string()).unwrap_or_default(),
        f.value.map(|v| v.to_string()).unwrap_or_default(),
    )
}

fn cmd_trace(args: &TraceArgs) -> Result<(), CliError> {
    let mut loader = build_loader(&args.config)?;
    if let Some(seed) = args.seed {
        loader.set_override("scenario.seed", &seed.to_string())?;
    }
    if let Some(variant) = args.variant {
        let v: Variant = variant.into();
        loader.set_override("scenario.variant", v.as_str())?;
    }
    let cfg = loader.into_config()?;

    let outcome = execute_logged(&cfg, None, true)?;

    fs::create_dir_all(&args.out)
        .map_err(|e| CliError::Config(format!("cannot create {}: {e}", args.out.display())))?;
    let path = args.out.join("trace.csv");
    write_lines(
        &path,
        std::iter::once(TRACE_HEADER.to_string())
            .chain(outcome.log.iter().map(|r| trace_row(r.t, &r.event))),
    )?;

    print_summary(&outcome);
    println!("wrote {} ({} records)", path.display(), outcome.log.len());
    Ok(())
}

// ----------------------------------------------------------------------
// CSV output
// ----------------------------------------------------------------------

pub const RESULTS_HEADER: &str = "scenario,axis_value,variant,seed,pdr,mean_delay_s,overhead,\
generated,delivered,drops_buffer,drops_channel,drops_expiry,drops_abandoned,\
adv_tx,sol_tx,unicast_adv_tx,notify_tx,thanks_tx,handovers,vgw_elections";

struct ResultRow {
    scenario: String,
    axis_value: Option<f64>,
    variant: &'static str,
    seed: Option<u64>,
    pdr: Option<f64>,
    mean_delay: Option<f64>,
    overhead: Option<f64>,
    counters: [f64; 13],
    exact_counters: bool,
}

impl ResultRow {
    fn from_run(
        scenario: String,
        axis_value: Option<f64>,
        cfg: &ScenarioConfig,
        seed: Option<u64>,
        outcome: &RunOutcome,
    ) -> Self {
        let s = &outcome.stats;
        ResultRow {
            scenario,
            axis_value,
            variant: cfg.variant.as_str(),
            seed,
            pdr: outcome.metrics.pdr,
            mean_delay: outcome.metrics.mean_delay,
            overhead: outcome.metrics.overhead,
            counters: [
                s.data_generated as f64,
                s.data_delivered as f64,
                s.drops_buffer as f64,
                s.drops_channel as f64,
                s.drops_expiry as f64,
                s.drops_abandoned as f64,
                s.adv_transmissions as f64,
                s.sol_transmissions as f64,
                s.unicast_adv_transmissions as f64,
                s.notify_transmissions as f64,
                s.thanks_transmissions as f64,
                s.handovers as f64,
                s.vgw_elections as f64,
            ],
            exact_counters: true,
        }
    }

    fn to_csv(&self) -> String {
        let counters = self
            .counters
            .iter()
            .map(|c| {
                if self.exact_counters {
                    format!("{}", *c as u64)
                } else {
                    format!("{c}")
                }
            })
            .collect::<Vec<_>>()
            .join(",");
        format!(
            "{},{},{},{},{},{},{},{}",
            self.scenario,
            self.axis_value.map(format_axis_value).unwrap_or_default(),
            self.variant,
            self.seed.map(|s| s.to_string()).unwrap_or_default(),
            fmt_opt(self.pdr),
            fmt_opt(self.mean_delay),
            fmt_opt(self.overhead),
            counters,
        )
    }
}

/// Aggregate row: metric means over the seeds that produced a value,
/// counter means over all seeds.
fn mean_row(
    scenario: String,
    value: f64,
    variant: Variant,
    group: &[&(f64, Variant, u64, DerivedMetrics, RunStats)],
) -> String {
    let metric_mean = |pick: fn(&DerivedMetrics) -> Option<f64>| {
        let vals: Vec<f64> = group.iter().filter_map(|(_, _, _, m, _)| pick(m)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    };
    let n = group.len().max(1) as f64;
    let counter_mean = |pick: fn(&RunStats) -> u64| {
        group.iter().map(|(_, _, _, _, s)| pick(s) as f64).sum::<f64>() / n
    };
    let row = ResultRow {
        scenario,
        axis_value: Some(value),
        variant: variant.as_str(),
        seed: None,
        pdr: metric_mean(|m| m.pdr),
        mean_delay: metric_mean(|m| m.mean_delay),
        overhead: metric_mean(|m| m.overhead),
        counters: [
            counter_mean(|s| s.data_generated),
            counter_mean(|s| s.data_delivered),
            counter_mean(|s| s.drops_buffer),
            counter_mean(|s| s.drops_channel),
            counter_mean(|s| s.drops_expiry),
            counter_mean(|s| s.drops_abandoned),
            counter_mean(|s| s.adv_transmissions),
            counter_mean(|s| s.sol_transmissions),
            counter_mean(|s| s.unicast_adv_transmissions),
            counter_mean(|s| s.notify_transmissions),
            counter_mean(|s| s.thanks_transmissions),
            counter_mean(|s| s.handovers),
            counter_mean(|s| s.vgw_elections),
        ],
        exact_counters: false,
    };
    row.to_csv()
}

fn plot_row(x: f64, variant: Variant, samples: &[f64]) -> String {
    if samples.is_empty() {
        return format!("{},{},,,", format_axis_value(x), variant.as_str());
    }
    let mean = samples.iter().sum::<f64>() / samples.len() as f64;
    let min = samples.iter().copied().fold(f64::INFINITY, f64::min);
    let max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    format!("{},{},{mean},{min},{max}", format_axis_value(x), variant.as_str())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v}")).unwrap_or_default()
}

fn write_lines(
    path: &Path,
    lines: impl Iterator<Item = String>,
) -> Result<(), CliError> {
    let mut out = Vec::new();
    for line in lines {
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    file.write_all(&out)
        .map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
    Ok(())
}
