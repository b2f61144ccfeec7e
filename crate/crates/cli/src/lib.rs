//! Batch front end: build, solve, check, oracle and stats subcommands.
//!
//! Every file written embeds the [`RunConfig`] that produced it. Exit
//! statuses: 0 success or feasible, 1 infeasible or violations, 2 usage
//! error, 3 internal error.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use tsvrp_core::hamiltonian::{build_model, instance_parameters, BuildOptions, BuiltModel, Family};
use tsvrp_core::instance::{parse_instance, Instance, ModelKind};
use tsvrp_core::route::{
    check_feasibility, enumerate_optimal_routes, route_cost, stats, CheckMode, CheckOptions, Objective, OracleError,
    OracleOptions, RoutePlan, SolveStats,
};
use tsvrp_core::sampler::{
    exhaustive_solve, simulated_anneal, AnnealSchedule, SampleSet, SampleSetDocument, EXHAUSTIVE_VARIABLE_CAP,
};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INFEASIBLE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_INTERNAL: u8 = 3;

/// Environment variable read for the default `--seed`.
pub const SEED_ENV: &str = "TSVRP_SEED";

#[derive(Debug, Parser)]
#[command(name = "tsvrp", version, about = "Time-scheduled vehicle routing as QUBO")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build the QUBO and write it as JSON.
    Build(RunArgs),
    /// Build, sample, decode and report.
    Solve(RunArgs),
    /// Check a plan file against the instance.
    Check(RunArgs),
    /// Enumerate every optimal plan by brute force.
    Oracle(RunArgs),
    /// Recompute statistics for an existing sample file.
    Stats(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    Exhaustive,
    Sa,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OracleObjective {
    /// Sum of leg costs.
    Cost,
    /// The QUBO's own leg rewards.
    Shifted,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// Instance JSON file.
    #[arg(long)]
    pub instance: PathBuf,
    /// Override the instance's model kind (TS_VRP, TS_MCVRP, TS_SVRP, TS_MCSVRP).
    #[arg(long)]
    pub model_kind: Option<ModelKind>,
    /// Penalty coefficient.
    #[arg(long, default_value_t = 1.0)]
    pub lambda: f64,
    /// Extra baseline shift added to the cheapest leg's reward.
    #[arg(long, default_value_t = 0.0)]
    pub delta: f64,
    /// Treat legs costlier than this as unrewarded (default: the largest cost).
    #[arg(long)]
    pub focus_max: Option<f64>,
    #[arg(long, value_enum, default_value_t = SamplerChoice::Sa)]
    pub sampler: SamplerChoice,
    #[arg(long, default_value_t = 1000)]
    pub sweeps: usize,
    #[arg(long, default_value_t = 100)]
    pub restarts: usize,
    /// Initial inverse temperature (default 0.1 / lambda).
    #[arg(long)]
    pub beta_start: Option<f64>,
    /// Final inverse temperature (default 10 / lambda).
    #[arg(long)]
    pub beta_end: Option<f64>,
    #[arg(long, env = SEED_ENV, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "window-tolerant")]
    pub mode: CheckMode,
    /// Objective used by the oracle subcommand.
    #[arg(long, value_enum, default_value_t = OracleObjective::Cost)]
    pub objective: OracleObjective,
    /// Output prefix; files are written as `<out>.<kind>.json`.
    #[arg(long, default_value = "tsvrp")]
    pub out: PathBuf,
    /// Plan file for `check`.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Sample file for `stats`.
    #[arg(long)]
    pub samples: Option<PathBuf>,
}

/// Everything that determines a run, recorded in every output file.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub command: &'static str,
    pub instance_path: String,
    pub model_kind: Option<ModelKind>,
    pub lambda: f64,
    pub delta: f64,
    pub focus_max: Option<f64>,
    pub parameter_policy: &'static str,
    pub sampler: SamplerChoice,
    pub schedule: Option<AnnealSchedule>,
    pub seed: u64,
    pub mode: CheckMode,
    pub objective: Option<OracleObjective>,
    pub outputs: Vec<String>,
    pub plan_path: Option<String>,
    pub samples_path: Option<String>,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Internal(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Internal(e) => write!(f, "error: {e:#}"),
        }
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Internal(e)
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// What a command produced: an exit status and the text for stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub status: u8,
    pub report: String,
}

pub fn run(cli: Cli) -> Result<Outcome, CliError> {
    match cli.command {
        Command::Build(a) => cmd_build(&a),
        Command::Solve(a) => cmd_solve(&a),
        Command::Check(a) => cmd_check(&a),
        Command::Oracle(a) => cmd_oracle(&a),
        Command::Stats(a) => cmd_stats(&a),
    }
}

impl RunArgs {
    fn out_path(&self, suffix: &str) -> PathBuf {
        let mut s = self.out.clone().into_os_string();
        s.push(format!(".{suffix}"));
        PathBuf::from(s)
    }

    fn schedule(&self) -> AnnealSchedule {
        let mut s = AnnealSchedule::for_lambda(self.lambda, self.sweeps, self.restarts, self.seed);
        if let Some(b) = self.beta_start {
            s.beta_start = b;
        }
        if let Some(b) = self.beta_end {
            s.beta_end = b;
        }
        s
    }

    fn config(&self, command: &'static str, outputs: &[&str]) -> RunConfig {
        RunConfig {
            command,
            instance_path: self.instance.display().to_string(),
            model_kind: self.model_kind,
            lambda: self.lambda,
            delta: self.delta,
            focus_max: self.focus_max,
            parameter_policy: if self.delta == 0.0 && self.focus_max.is_none() { "standard" } else { "shifted" },
            sampler: self.sampler,
            schedule: (command == "solve" && self.sampler == SamplerChoice::Sa).then(|| self.schedule()),
            seed: self.seed,
            mode: self.mode,
            objective: (command == "oracle").then_some(self.objective),
            outputs: outputs.iter().map(|s| self.out_path(s).display().to_string()).collect(),
            plan_path: self.plan.as_ref().map(|p| p.display().to_string()),
            samples_path: self.samples.as_ref().map(|p| p.display().to_string()),
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(usage(format!("--lambda must be positive, got {}", self.lambda)));
        }
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(usage(format!("--delta must be non-negative, got {}", self.delta)));
        }
        Ok(())
    }

    fn check_options(&self) -> CheckOptions {
        CheckOptions { mode: self.mode, ..CheckOptions::default() }
    }
}

fn load_instance(args: &RunArgs) -> Result<Instance, CliError> {
    args.validate()?;
    let text = fs::read_to_string(&args.instance)
        .map_err(|e| usage(format!("cannot read {}: {e}", args.instance.display())))?;
    let inst = parse_instance(&text).map_err(|e| usage(format!("{}: {e}", args.instance.display())))?;
    match args.model_kind {
        Some(kind) if kind != inst.model_kind => inst.with_model_kind(kind).map_err(|e| usage(e.to_string())),
        _ => Ok(inst),
    }
}

fn build(args: &RunArgs, inst: &Instance) -> Result<BuiltModel, CliError> {
    let params = instance_parameters(inst, args.lambda, args.delta, args.focus_max).map_err(|e| usage(e.to_string()))?;
    build_model(inst, &params, &BuildOptions::default()).map_err(|e| usage(e.to_string()))
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn with_config(config: &RunConfig, key: &str, value: &impl Serialize) -> anyhow::Result<Value> {
    Ok(json!({ "config": config, key: serde_json::to_value(value)? }))
}

fn build_summary(built: &BuiltModel) -> String {
    let cat = &built.catalogue;
    let p = &built.params;
    let mut s = String::new();
    let _ = writeln!(s, "model kind: {}", built.kind.as_str());
    let _ = writeln!(
        s,
        "qubits: {} total, {} free, {} fixed to 1, {} fixed to 0",
        cat.total_keys(),
        cat.free_count(),
        cat.fixed_count(true),
        cat.fixed_count(false)
    );
    let _ = writeln!(s, "parameters: mu={} rho={} lambda={} delta={}", p.mu, p.rho, p.lambda, p.delta);
    let counts = built.terms.counts();
    for family in Family::ALL {
        if let Some(c) = counts.get(&family) {
            let _ = writeln!(s, "  {:<20} {c}", family.as_str());
        }
    }
    let _ = writeln!(s, "quadratic terms after elimination: {}", built.model.quadratic().len());
    s
}

fn describe_plan(plan: &RoutePlan, inst: &Instance) -> String {
    let mut s = String::new();
    for r in &plan.routes {
        let stops: Vec<String> = r
            .events
            .iter()
            .map(|e| {
                let mut stop = format!("{}@{}", inst.cities[e.city - 1], e.tau);
                if inst.model_kind.has_states() {
                    stop.push(if e.state == tsvrp_core::qubo::Phase::Arrival { 'A' } else { 'D' });
                }
                if !e.capacity.is_empty() {
                    let _ = write!(stop, "{:?}", e.capacity);
                }
                stop
            })
            .collect();
        let _ = writeln!(s, "  vehicle {}: {}", r.vehicle, stops.join(" -> "));
    }
    s
}

pub fn cmd_build(args: &RunArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(args)?;
    let built = build(args, &inst)?;
    let config = args.config("build", &["model.json"]);
    let mut doc = built.model.to_document();
    doc.config = Some(serde_json::to_value(&config).map_err(anyhow::Error::from)?);
    write_json(&args.out_path("model.json"), &doc)?;
    Ok(Outcome { status: EXIT_OK, report: build_summary(&built) })
}

fn stats_report(s: &SolveStats, inst: &Instance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "samples: {} ({} feasible, rate {:.4})", s.total_samples, s.feasible_count, s.feasible_rate);
    if let Some(e) = s.best_energy {
        let _ = writeln!(out, "lowest energy: {e}");
    }
    match (&s.best_feasible_plan, s.best_feasible_cost, s.best_feasible_energy) {
        (Some(plan), Some(cost), _) => {
            let _ = writeln!(out, "best feasible cost: {cost}");
            out.push_str(&describe_plan(plan, inst));
        }
        _ => {
            let _ = writeln!(out, "no feasible sample");
        }
    }
    out
}

fn write_stats(args: &RunArgs, config: &RunConfig, s: &SolveStats) -> anyhow::Result<()> {
    write_json(&args.out_path("stats.json"), &with_config(config, "stats", s)?)?;
    let csv_path = args.out_path("stats.csv");
    fs::write(&csv_path, s.to_csv()).with_context(|| format!("writing {}", csv_path.display()))
}

pub fn cmd_solve(args: &RunArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(args)?;
    let built = build(args, &inst)?;
    let config = args.config("solve", &["model.json", "samples.json", "stats.json", "stats.csv"]);
    let config_value = serde_json::to_value(&config).map_err(anyhow::Error::from)?;

    let samples = match args.sampler {
        SamplerChoice::Exhaustive => {
            if built.model.num_vars() > EXHAUSTIVE_VARIABLE_CAP {
                return Err(usage(format!(
                    "exhaustive sampling is limited to {EXHAUSTIVE_VARIABLE_CAP} free variables, model has {}",
                    built.model.num_vars()
                )));
            }
            exhaustive_solve(&built.model)
        }
        SamplerChoice::Sa => {
            let schedule = args.schedule();
            schedule.validate().map_err(|e| usage(e.to_string()))?;
            simulated_anneal(&built.model, &schedule)
        }
    }
    .map_err(|e| CliError::Internal(e.into()))?;

    let mut model_doc = built.model.to_document();
    model_doc.config = Some(config_value.clone());
    write_json(&args.out_path("model.json"), &model_doc)?;
    let mut sample_doc = samples.to_document();
    sample_doc.config = Some(config_value);
    write_json(&args.out_path("samples.json"), &sample_doc)?;

    let s = stats(&samples, &built.catalogue, &inst, &args.check_options());
    write_stats(args, &config, &s)?;

    let mut report = format!("free variables: {}\nsampler: {}\n", built.model.num_vars(), samples.metadata.sampler);
    report.push_str(&stats_report(&s, &inst));
    let status = if s.feasible_count > 0 { EXIT_OK } else { EXIT_INFEASIBLE };
    Ok(Outcome { status, report })
}

pub fn cmd_stats(args: &RunArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(args)?;
    let built = build(args, &inst)?;
    let path = args.samples.as_ref().ok_or_else(|| usage("stats needs --samples"))?;
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let doc: SampleSetDocument =
        serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let samples = SampleSet::import(&doc, &built.model).map_err(|e| usage(e.to_string()))?;
    let config = args.config("stats", &["stats.json", "stats.csv"]);
    let s = stats(&samples, &built.catalogue, &inst, &args.check_options());
    write_stats(args, &config, &s)?;
    let mut report = String::new();
    if samples.metadata.rejected > 0 {
        let _ = writeln!(report, "rejected {} records whose energy did not match the model", samples.metadata.rejected);
    }
    report.push_str(&stats_report(&s, &inst));
    let status = if s.feasible_count > 0 { EXIT_OK } else { EXIT_INFEASIBLE };
    Ok(Outcome { status, report })
}

pub fn cmd_check(args: &RunArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(args)?;
    let path = args.plan.as_ref().ok_or_else(|| usage("check needs --plan"))?;
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    let plan = parse_plan(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let report = check_feasibility(&plan, &inst, &args.check_options());
    let config = args.config("check", &["check.json"]);
    write_json(&args.out_path("check.json"), &with_config(&config, "report", &report)?)?;

    let mut out = String::new();
    if report.is_feasible() {
        let cost = route_cost(&plan, &inst).map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(out, "feasible ({}), cost {cost}", args.mode);
    } else {
        let _ = writeln!(out, "infeasible ({}): {} violations", args.mode, report.violations.len());
        for v in &report.violations {
            let _ = writeln!(out, "  {v}");
        }
    }
    Ok(Outcome { status: if report.is_feasible() { EXIT_OK } else { EXIT_INFEASIBLE }, report: out })
}

/// Accepts a bare plan, a document with a `plan` field, or the first entry
/// of a `plans` list (optionally nested under `result`, as oracle files are).
fn parse_plan(text: &str) -> Result<RoutePlan, String> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if let Some(inner) = value.get("result") {
        value = inner.clone();
    }
    let plan = if let Some(p) = value.get("plan") {
        p.clone()
    } else if let Some(plans) = value.get("plans") {
        plans.get(0).cloned().ok_or("the plan list is empty")?
    } else {
        value
    };
    serde_json::from_value(plan).map_err(|e| e.to_string())
}

pub fn cmd_oracle(args: &RunArgs) -> Result<Outcome, CliError> {
    let inst = load_instance(args)?;
    let objective = match args.objective {
        OracleObjective::Cost => Objective::RouteCost,
        OracleObjective::Shifted => Objective::Shifted(
            instance_parameters(&inst, args.lambda, args.delta, args.focus_max).map_err(|e| usage(e.to_string()))?,
        ),
    };
    let opts = OracleOptions { objective, ..OracleOptions::default() };
    let result = enumerate_optimal_routes(&inst, &opts).map_err(|e| match e {
        OracleError::TooManyTimelines { .. } | OracleError::TooManyPlans(_) | OracleError::TooManyCities => {
            usage(format!("instance is too large for the oracle: {e}"))
        }
    })?;
    let config = args.config("oracle", &["oracle.json"]);
    write_json(&args.out_path("oracle.json"), &with_config(&config, "result", &result)?)?;

    let mut out = String::new();
    match result.best {
        Some(best) => {
            let _ = writeln!(out, "optimum {best} over {} plans", result.plans.len());
            for p in &result.plans {
                out.push_str(&describe_plan(p, &inst));
            }
            Ok(Outcome { status: EXIT_OK, report: out })
        }
        None => {
            let _ = writeln!(out, "no feasible plan");
            Ok(Outcome { status: EXIT_INFEASIBLE, report: out })
        }
    }
}
