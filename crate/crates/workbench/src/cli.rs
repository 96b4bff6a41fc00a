//! Command-line surface of `adafrugal-bench`.

use std::io::Write;
use std::path::{Path, PathBuf};

use adafrugal::engine::Mode;
use adafrugal::memory::{
    count_states, dynamic_memory_timeline, scaling_extrapolation, Extrapolation, ModelShape, TransformerDims, GIB,
};
use adafrugal::schedules::{RhoSchedule, TController, TControllerConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Result, WorkbenchError};
use crate::experiment::{compare, run_single};
use crate::report::{save_comparison, save_json, save_metrics, summarize};

#[derive(Debug, Parser)]
#[command(
    name = "adafrugal-bench",
    version,
    about = "Desk-scale workbench for hybrid AdamW/SignSGD training"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one mode on one seed; writes metrics.csv and summary.json.
    Run(RunArgs),
    /// Train several modes over shared seeds; writes comparison.csv and summary.json.
    Compare(CompareArgs),
    /// Optimizer-state memory of a transformer-shaped model.
    Memplan(MemplanArgs),
    /// Tabulate the rho schedule and interval controller as CSV.
    ScheduleDump(ScheduleArgs),
}

#[derive(Debug, Args)]
pub struct Overrides {
    /// Config file (flat TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `output_dir`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub task: Option<String>,
    /// Overrides `total_steps`.
    #[arg(long)]
    pub steps: Option<u64>,
}

impl Overrides {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.output_dir = out.clone();
        }
        if let Some(task) = &self.task {
            cfg.task = task.clone();
        }
        if let Some(steps) = self.steps {
            cfg.total_steps = steps;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Seed to run (default: first entry of `seeds`).
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub mode: Option<String>,
    /// Also write projectors.json with every rebuilt column selection.
    #[arg(long)]
    pub dump_projectors: bool,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: Overrides,
    #[arg(long, value_delimiter = ',', default_value = "adamw-full,frugal-static,signsgd-only")]
    pub modes: Vec<String>,
    /// Seeds (default: `seeds` from the config).
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct MemplanArgs {
    #[arg(long, default_value_t = TransformerDims::LLAMA_130M.layers)]
    pub layers: u64,
    #[arg(long, default_value_t = TransformerDims::LLAMA_130M.hidden)]
    pub hidden: u64,
    #[arg(long, default_value_t = TransformerDims::LLAMA_130M.intermediate)]
    pub intermediate: u64,
    #[arg(long, default_value_t = TransformerDims::LLAMA_130M.vocab)]
    pub vocab: u64,
    /// State-full ratios to report.
    #[arg(long, value_delimiter = ',', default_value = "0.25,0.05")]
    pub rho: Vec<f64>,
    /// Timeline schedule: decays from the first `--rho` to this value.
    #[arg(long, default_value_t = 0.05)]
    pub rho_end: f64,
    #[arg(long, default_value_t = 200_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 10_000)]
    pub sample_every: u64,
    /// Write the memory timeline CSV here.
    #[arg(long)]
    pub timeline: Option<PathBuf>,
    /// Measured saving (any unit) to extrapolate from `--base-dims` to `--target-dims`.
    #[arg(long)]
    pub base_saving: Option<f64>,
    /// Base `layers,hidden`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [24, 768])]
    pub base_dims: Vec<u64>,
    /// Target `layers,hidden`.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [32, 4096])]
    pub target_dims: Vec<u64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Assume {
    /// Validation loss never changes, so the interval grows at every evaluation.
    Plateau,
    /// Validation loss drops 10% per evaluation, so the interval stays put.
    Progress,
}

#[derive(Debug, Args)]
pub struct ScheduleArgs {
    #[arg(long, default_value_t = 0.25)]
    pub rho_start: f64,
    #[arg(long, default_value_t = 0.05)]
    pub rho_end: f64,
    #[arg(long, default_value_t = 200_000)]
    pub steps: u64,
    #[arg(long, default_value_t = 100.0)]
    pub t_start: f64,
    #[arg(long, default_value_t = 800.0)]
    pub t_max: f64,
    #[arg(long, default_value_t = 1.5)]
    pub gamma: f64,
    #[arg(long, default_value_t = 10_000)]
    pub n_eval: u64,
    #[arg(long, default_value_t = 0.008)]
    pub tau: f64,
    #[arg(long, value_enum, default_value_t = Assume::Plateau)]
    pub assume: Assume,
    /// Row spacing when `--at` is not given.
    #[arg(long, default_value_t = 10_000)]
    pub every: u64,
    /// Explicit steps to tabulate.
    #[arg(long, value_delimiter = ',')]
    pub at: Option<Vec<u64>>,
    /// Write CSV here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(a) => cmd_run(&a),
        Command::Compare(a) => cmd_compare(&a),
        Command::Memplan(a) => {
            let plan = memplan(&a)?;
            let text = serde_json::to_string_pretty(&plan)? + "\n";
            emit(a.out.as_deref(), &text)
        }
        Command::ScheduleDump(a) => {
            let rows = schedule_rows(&a)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            for r in &rows {
                w.serialize(r)?;
            }
            let bytes = w
                .into_inner()
                .map_err(|e| WorkbenchError::io("<csv>", e.into_error()))?;
            emit(a.out.as_deref(), &String::from_utf8(bytes).expect("utf-8"))
        }
    }
}

fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| WorkbenchError::io(p, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| WorkbenchError::io("<stdout>", e)),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| WorkbenchError::io(dir, e))
}

fn cmd_run(a: &RunArgs) -> Result<()> {
    let mut cfg = a.common.load()?;
    if let Some(mode) = &a.mode {
        cfg.mode = mode.clone();
    }
    cfg.validate()?;
    let seed = a.seed.unwrap_or(cfg.seeds[0]);
    let out = run_single(&cfg, seed)?;
    create_dir(&cfg.output_dir)?;
    save_metrics(&out.trace, &cfg.output_dir.join("metrics.csv"))?;
    let summary = summarize(&[(cfg.mode()?, seed, out.trace)])?;
    save_json(&summary, &cfg.output_dir.join("summary.json"))?;
    if a.dump_projectors {
        save_json(&out.projectors, &cfg.output_dir.join("projectors.json"))?;
    }
    Ok(())
}

fn cmd_compare(a: &CompareArgs) -> Result<()> {
    let cfg = a.common.load()?;
    cfg.validate()?;
    let modes = a
        .modes
        .iter()
        .map(|m| m.parse::<Mode>().map_err(|e| WorkbenchError::config("modes", e)))
        .collect::<Result<Vec<_>>>()?;
    let seeds = a.seeds.clone().unwrap_or_else(|| cfg.seeds.clone());
    if seeds.is_empty() {
        return Err(WorkbenchError::config("seeds", "must list at least one seed"));
    }
    let cmp = compare(&cfg, &modes, &seeds)?;
    create_dir(&cfg.output_dir)?;
    for (mode, seed, trace) in &cmp.runs {
        save_metrics(trace, &cfg.output_dir.join(format!("metrics_{mode}_seed{seed}.csv")))?;
    }
    save_comparison(&cmp.summary, &cfg.output_dir.join("comparison.csv"))?;
    save_json(&cmp.summary, &cfg.output_dir.join("summary.json"))?;
    if let Some(ord) = cmp.summary.ordering.filter(|o| !o.holds) {
        eprintln!(
            "warning: median loss ordering AdamW <= FRUGAL-Static <= SignSGD violated ({ord:?}); see summary.json"
        );
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub rho: f64,
    pub frugal_bytes: u64,
    pub frugal_gib: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemPlan {
    pub param_count: u64,
    pub adamw_bytes: u64,
    pub adamw_gib: f64,
    pub reports: Vec<RhoReport>,
    pub extrapolation: Option<Extrapolation>,
}

pub fn memplan(a: &MemplanArgs) -> Result<MemPlan> {
    let dims = TransformerDims {
        layers: a.layers,
        hidden: a.hidden,
        intermediate: a.intermediate,
        vocab: a.vocab,
    };
    for (name, v) in [
        ("layers", a.layers),
        ("hidden", a.hidden),
        ("intermediate", a.intermediate),
        ("vocab", a.vocab),
    ] {
        if v == 0 {
            return Err(WorkbenchError::config(name, "must be positive"));
        }
    }
    if a.rho.is_empty() || a.rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(WorkbenchError::config("rho", format!("{:?} must lie in [0, 1]", a.rho)));
    }
    let shape = ModelShape::transformer(dims);
    let reports: Vec<RhoReport> = a
        .rho
        .iter()
        .map(|&rho| {
            let r = count_states(&shape, rho);
            RhoReport {
                rho,
                frugal_bytes: r.frugal_bytes,
                frugal_gib: r.frugal_gib(),
                ratio: r.ratio_to_adamw,
            }
        })
        .collect();
    let full = count_states(&shape, 1.0);

    if let Some(path) = &a.timeline {
        if a.sample_every == 0 {
            return Err(WorkbenchError::config("sample_every", "must be positive"));
        }
        let sched = RhoSchedule::new(a.rho[0], a.rho_end, a.steps.max(1))
            .map_err(|e| WorkbenchError::config("rho_end", e.to_string()))?;
        let file = std::fs::File::create(path).map_err(|e| WorkbenchError::io(path, e))?;
        let mut w = csv::Writer::from_writer(file);
        for p in dynamic_memory_timeline(&shape, &sched, a.steps, a.sample_every) {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| WorkbenchError::io(path, e))?;
    }

    let extrapolation = match a.base_saving {
        Some(base) => {
            let (b, t) = (&a.base_dims, &a.target_dims);
            if b.iter().chain(t).any(|&v| v == 0) {
                return Err(WorkbenchError::config("base_dims", "dims must be positive"));
            }
            Some(scaling_extrapolation(base, (b[0], b[1]), (t[0], t[1])))
        }
        None => None,
    };

    Ok(MemPlan {
        param_count: full.param_count,
        adamw_bytes: full.adamw_bytes,
        adamw_gib: full.adamw_bytes as f64 / GIB,
        reports,
        extrapolation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleRow {
    pub step: u64,
    pub rho: f64,
    pub t_current: f64,
}

/// Evaluates rho(k) and the interval T(k) at the requested steps. T is
/// driven by a synthetic validation stream observed every `n_eval` steps.
pub fn schedule_rows(a: &ScheduleArgs) -> Result<Vec<ScheduleRow>> {
    let sched = RhoSchedule::new(a.rho_start, a.rho_end, a.steps.max(1))?;
    let mut ctl = TController::new(TControllerConfig {
        t_start: a.t_start,
        t_max: a.t_max,
        gamma_increase: a.gamma,
        n_eval: a.n_eval,
        tau_low: a.tau,
    })?;
    let ks: Vec<u64> = match &a.at {
        Some(at) => {
            let mut v = at.clone();
            v.sort_unstable();
            v.dedup();
            v
        }
        None => {
            if a.every == 0 {
                return Err(WorkbenchError::config("every", "must be positive"));
            }
            (0..=a.steps).step_by(a.every as usize).collect()
        }
    };
    let mut next_eval = a.n_eval;
    let mut loss = 1.0;
    let mut rows = Vec::with_capacity(ks.len());
    for k in ks {
        while next_eval <= k {
            ctl.observe_val_loss(next_eval, loss)?;
            if a.assume == Assume::Progress {
                loss *= 0.9;
            }
            next_eval += a.n_eval;
        }
        rows.push(ScheduleRow {
            step: k,
            rho: sched.rho_at(k),
            t_current: ctl.t_current(),
        });
    }
    Ok(rows)
}
