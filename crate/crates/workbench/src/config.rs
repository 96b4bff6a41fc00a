//! Experiment configuration.
//!
//! Configs are flat `key = value` files (TOML syntax, no tables). Every key
//! is optional; omitted keys take the desk-scale defaults below.
//!
//! | key              | type          | default              | constraint                 |
//! |------------------|---------------|----------------------|----------------------------|
//! | `task`           | string        | `mlp_regression`     | known task name            |
//! | `mode`           | string        | `adafrugal-combined` | known mode name            |
//! | `strategy`       | string        | `reset`              | `reset` or `project`       |
//! | `rule`           | string        | `grad_norm_top_k`    | or `random`                |
//! | `total_steps`    | integer       | 2000                 |                            |
//! | `n_eval`         | integer       | 100                  | >= 1                       |
//! | `rho_start`      | float         | 0.25                 | in (0, 1]                  |
//! | `rho_end`        | float         | 0.05                 | in (0, rho_start]          |
//! | `rho_decay_steps`| integer       | `total_steps`        | >= 1                       |
//! | `t_start`        | float         | 20                   | >= 1                       |
//! | `t_max`          | float         | 160                  | >= t_start                 |
//! | `gamma_increase` | float         | 1.5                  | > 1                        |
//! | `tau_low`        | float         | 0.008                | > 0                        |
//! | `lr_full`        | float         | 0.01                 | > 0                        |
//! | `lr_free`        | float         | `lr_full`            | > 0                        |
//! | `beta1`, `beta2` | float         | 0.9, 0.999           | in [0, 1)                  |
//! | `eps`            | float         | 1e-8                 | > 0                        |
//! | `weight_decay`   | float         | 0.0                  | >= 0                       |
//! | `seeds`          | integer array | `[0, 1, 2, 3, 4]`    | non-empty                  |
//! | `output_dir`     | string        | `out`                |                            |

use std::path::{Path, PathBuf};

use adafrugal::engine::{EngineConfig, Mode, StateStrategy};
use adafrugal::optim::OptimHyper;
use adafrugal::projectors::SelectionRule;
use adafrugal::schedules::{RhoSchedule, TControllerConfig};
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};
use crate::tasks::TaskName;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub task: String,
    pub mode: String,
    pub strategy: StateStrategy,
    pub rule: SelectionRule,
    pub total_steps: u64,
    pub n_eval: u64,
    pub rho_start: f64,
    pub rho_end: f64,
    pub rho_decay_steps: Option<u64>,
    pub t_start: f64,
    pub t_max: f64,
    pub gamma_increase: f64,
    pub tau_low: f64,
    pub lr_full: f64,
    pub lr_free: Option<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskName::MlpRegression.as_str().to_string(),
            mode: Mode::AdaFrugalCombined.as_str().to_string(),
            strategy: StateStrategy::Reset,
            rule: SelectionRule::GradNormTopK,
            total_steps: 2000,
            n_eval: 100,
            rho_start: 0.25,
            rho_end: 0.05,
            rho_decay_steps: None,
            t_start: 20.0,
            t_max: 160.0,
            gamma_increase: 1.5,
            tau_low: 0.008,
            lr_full: 0.01,
            lr_free: None,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
            seeds: vec![0, 1, 2, 3, 4],
            output_dir: PathBuf::from("out"),
        }
    }
}

const EXAMPLES: [(Mode, &str); 6] = [
    (
        Mode::AdaFrugalCombined,
        include_str!("../configs/adafrugal-combined.toml"),
    ),
    (Mode::AdaFrugalDynRho, include_str!("../configs/adafrugal-dyn-rho.toml")),
    (Mode::AdaFrugalDynT, include_str!("../configs/adafrugal-dyn-t.toml")),
    (Mode::FrugalStatic, include_str!("../configs/frugal-static.toml")),
    (Mode::AdamwFull, include_str!("../configs/adamw-full.toml")),
    (Mode::SignsgdOnly, include_str!("../configs/signsgd-only.toml")),
];

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| WorkbenchError::ConfigParse(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| WorkbenchError::io(path, e))?;
        Self::parse(&text)
    }

    /// The shipped example config text for `mode`.
    pub fn example_text(mode: Mode) -> &'static str {
        EXAMPLES
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, t)| *t)
            .expect("every mode has an example")
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn task_name(&self) -> Result<TaskName> {
        self.task.parse()
    }

    pub fn mode(&self) -> Result<Mode> {
        self.mode.parse().map_err(|e: String| WorkbenchError::config("mode", e))
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |field: &str, reason: String| Err(WorkbenchError::config(field, reason));
        self.task_name()?;
        self.mode()?;
        if !(self.rho_start > 0.0 && self.rho_start <= 1.0) {
            return fail("rho_start", format!("{} not in (0, 1]", self.rho_start));
        }
        if !(self.rho_end > 0.0 && self.rho_end <= self.rho_start) {
            return fail("rho_end", format!("{} not in (0, rho_start]", self.rho_end));
        }
        if self.rho_decay_steps == Some(0) {
            return fail("rho_decay_steps", "must be >= 1".into());
        }
        if self.n_eval == 0 {
            return fail("n_eval", "must be >= 1".into());
        }
        if !(self.t_start >= 1.0 && self.t_start.is_finite()) {
            return fail("t_start", format!("{} must be >= 1", self.t_start));
        }
        if !(self.t_max >= self.t_start && self.t_max.is_finite()) {
            return fail("t_max", format!("{} must be >= t_start", self.t_max));
        }
        if !(self.gamma_increase > 1.0 && self.gamma_increase.is_finite()) {
            return fail("gamma_increase", format!("{} must be > 1", self.gamma_increase));
        }
        if !(self.tau_low > 0.0 && self.tau_low.is_finite()) {
            return fail("tau_low", format!("{} must be > 0", self.tau_low));
        }
        if !(self.lr_full > 0.0 && self.lr_full.is_finite()) {
            return fail("lr_full", format!("{} must be > 0", self.lr_full));
        }
        if let Some(lr) = self.lr_free {
            if !(lr > 0.0 && lr.is_finite()) {
                return fail("lr_free", format!("{lr} must be > 0"));
            }
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return fail("beta1", format!("{} not in [0, 1)", self.beta1));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return fail("beta2", format!("{} not in [0, 1)", self.beta2));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return fail("eps", format!("{} must be > 0", self.eps));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return fail("weight_decay", format!("{} must be >= 0", self.weight_decay));
        }
        if self.seeds.is_empty() {
            return fail("seeds", "must list at least one seed".into());
        }
        Ok(())
    }

    /// Engine configuration for one `(mode, seed)` cell.
    pub fn engine_config(&self, mode: Mode, seed: u64) -> Result<EngineConfig> {
        self.validate()?;
        let rho = RhoSchedule::new(
            self.rho_start,
            self.rho_end,
            self.rho_decay_steps.unwrap_or(self.total_steps).max(1),
        )?;
        Ok(EngineConfig {
            mode,
            rho,
            t: TControllerConfig {
                t_start: self.t_start,
                t_max: self.t_max,
                gamma_increase: self.gamma_increase,
                n_eval: self.n_eval,
                tau_low: self.tau_low,
            },
            strategy: self.strategy,
            hyper: OptimHyper {
                lr_full: self.lr_full,
                lr_free: self.lr_free.unwrap_or(self.lr_full),
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.eps,
                weight_decay: self.weight_decay,
            },
            rule: self.rule,
            seed,
            total_steps: self.total_steps,
        })
    }
}
