//! The training loop: dynamic control of the state-full ratio and the
//! redefinition interval, per-parameter projector management, gradient
//! splitting and the hybrid AdamW/SignSGD update.
//!
//! Steps are numbered from 0. The first step always builds the projectors
//! from its own gradients; afterwards projectors are rebuilt whenever the
//! number of steps since the last rebuild reaches the (rounded) current
//! interval. A changing interval therefore stretches the gap between
//! rebuilds instead of re-aligning to multiples of it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::{adamw_step, signsgd_step, AdamSubState, OptimHyper};
use crate::projectors::{BlockProjector, ProjectorSnapshot, SelectionRule};
use crate::rng::Rng;
use crate::schedules::{RhoSchedule, TController, TControllerConfig};
use crate::tensor::ParamTensor;

/// Loss and gradients for every parameter, in parameter order.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Vec<ParamTensor>,
}

/// A differentiable objective with a fixed training batch order and a
/// held-out validation split.
pub trait TrainingTask: Send + Sync {
    fn name(&self) -> &str;

    fn init_params(&self) -> Vec<ParamTensor>;

    fn num_train_batches(&self) -> usize;

    fn loss(&self, params: &[ParamTensor], batch: usize) -> f64;

    fn loss_and_grad(&self, params: &[ParamTensor], batch: usize) -> LossGrad;

    fn val_loss(&self, params: &[ParamTensor]) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    #[serde(rename = "adafrugal-combined")]
    AdaFrugalCombined,
    #[serde(rename = "adafrugal-dyn-rho")]
    AdaFrugalDynRho,
    #[serde(rename = "adafrugal-dyn-t")]
    AdaFrugalDynT,
    FrugalStatic,
    AdamwFull,
    SignsgdOnly,
}

impl Mode {
    pub const ALL: [Mode; 6] = [
        Mode::AdaFrugalCombined,
        Mode::AdaFrugalDynRho,
        Mode::AdaFrugalDynT,
        Mode::FrugalStatic,
        Mode::AdamwFull,
        Mode::SignsgdOnly,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::AdaFrugalCombined => "adafrugal-combined",
            Mode::AdaFrugalDynRho => "adafrugal-dyn-rho",
            Mode::AdaFrugalDynT => "adafrugal-dyn-t",
            Mode::FrugalStatic => "frugal-static",
            Mode::AdamwFull => "adamw-full",
            Mode::SignsgdOnly => "signsgd-only",
        }
    }

    pub fn dynamic_rho(&self) -> bool {
        matches!(self, Mode::AdaFrugalCombined | Mode::AdaFrugalDynRho)
    }

    pub fn dynamic_t(&self) -> bool {
        matches!(self, Mode::AdaFrugalCombined | Mode::AdaFrugalDynT)
    }

    /// Whether projectors are rebuilt after the initial one.
    pub fn redefines(&self) -> bool {
        !matches!(self, Mode::AdamwFull | Mode::SignsgdOnly)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Mode::ALL.into_iter().find(|m| m.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Mode::ALL.iter().map(Mode::as_str).collect();
            format!("unknown mode `{s}` (expected one of {})", names.join(", "))
        })
    }
}

/// What happens to AdamW moments when a projector is rebuilt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateStrategy {
    /// Zero the moments and the bias-correction counter.
    #[default]
    Reset,
    /// Carry moments on columns shared by the old and new subspace.
    Project,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub mode: Mode,
    /// Decayed in the dynamic-ratio modes; static modes use `rho_start`.
    pub rho: RhoSchedule,
    /// Controller settings; static-interval modes keep `t_start`.
    pub t: TControllerConfig,
    pub strategy: StateStrategy,
    pub hyper: OptimHyper,
    pub rule: SelectionRule,
    pub seed: u64,
    pub total_steps: u64,
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.t.validate()
    }

    pub fn rho_at(&self, k: u64) -> f64 {
        match self.mode {
            Mode::AdamwFull => 1.0,
            Mode::SignsgdOnly => 0.0,
            m if m.dynamic_rho() => self.rho.rho_at(k),
            _ => self.rho.rho_start(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub step: u64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub rho: f64,
    pub t_current: f64,
    pub redefined: bool,
    pub state_scalars: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricsTrace {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&MetricsRow> {
        self.rows.last()
    }

    /// Last recorded validation loss, if any evaluation happened.
    pub fn final_val_loss(&self) -> Option<f64> {
        self.rows.iter().rev().find_map(|r| r.val_loss)
    }

    /// Checks the structural invariants: strictly increasing steps and finite
    /// recorded values.
    pub fn validate(&self) -> std::result::Result<(), String> {
        for w in self.rows.windows(2) {
            if w[1].step <= w[0].step {
                return Err(format!("step {} follows step {}", w[1].step, w[0].step));
            }
        }
        for r in &self.rows {
            let finite = r.train_loss.is_finite()
                && r.val_loss.is_none_or(f64::is_finite)
                && r.rho.is_finite()
                && r.t_current.is_finite();
            if !finite {
                return Err(format!("non-finite value at step {}", r.step));
            }
            if !(0.0..=1.0).contains(&r.rho) {
                return Err(format!("rho {} out of range at step {}", r.rho, r.step));
            }
        }
        Ok(())
    }
}

pub fn redefinition_count(trace: &MetricsTrace) -> usize {
    trace.rows.iter().filter(|r| r.redefined).count()
}

#[derive(Debug, Clone)]
struct Slot {
    projector: BlockProjector,
    state: AdamSubState,
}

/// Mutable training state for one run over a task.
pub struct Trainer<'t, T: TrainingTask + ?Sized> {
    cfg: EngineConfig,
    task: &'t T,
    params: Vec<ParamTensor>,
    slots: Option<Vec<Slot>>,
    step: u64,
    steps_since_redefine: u64,
    controller: TController,
    rng: Rng,
    trace: MetricsTrace,
    history: Option<Vec<ProjectorSnapshot>>,
}

impl<'t, T: TrainingTask + ?Sized> Trainer<'t, T> {
    pub fn new(cfg: EngineConfig, task: &'t T) -> Result<Self> {
        cfg.validate()?;
        let controller = TController::new(cfg.t)?;
        let rng = Rng::new(cfg.seed).fork(0x5e1ec7);
        Ok(Self {
            params: task.init_params(),
            cfg,
            task,
            slots: None,
            step: 0,
            steps_since_redefine: 0,
            controller,
            rng,
            trace: MetricsTrace::default(),
            history: None,
        })
    }

    /// Keep a snapshot of every projector each time they are rebuilt.
    pub fn record_projectors(mut self) -> Self {
        self.history = Some(Vec::new());
        self
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    pub fn params(&self) -> &[ParamTensor] {
        &self.params
    }

    pub fn step_index(&self) -> u64 {
        self.step
    }

    pub fn steps_since_redefine(&self) -> u64 {
        self.steps_since_redefine
    }

    pub fn controller(&self) -> &TController {
        &self.controller
    }

    pub fn trace(&self) -> &MetricsTrace {
        &self.trace
    }

    pub fn into_trace(self) -> MetricsTrace {
        self.trace
    }

    pub fn projectors(&self) -> Vec<&BlockProjector> {
        self.slots.iter().flatten().map(|s| &s.projector).collect()
    }

    pub fn projector_history(&self) -> Option<&[ProjectorSnapshot]> {
        self.history.as_deref()
    }

    /// Current projectors as snapshots tagged with the last executed step.
    pub fn projector_snapshots(&self) -> Vec<ProjectorSnapshot> {
        let step = self.step.saturating_sub(1);
        self.projectors()
            .into_iter()
            .enumerate()
            .map(|(param_id, p)| snapshot(step, param_id, p))
            .collect()
    }

    pub fn state_scalars(&self) -> u64 {
        self.slots.iter().flatten().map(|s| s.state.scalar_count() as u64).sum()
    }

    pub fn train_step(&mut self) -> Result<&MetricsRow> {
        let k = self.step;
        let rho = self.cfg.rho_at(k);

        let mut val_loss = None;
        if k > 0 && k.is_multiple_of(self.cfg.t.n_eval) {
            let l = self.task.val_loss(&self.params);
            if !l.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: k,
                    param: None,
                    what: "validation loss",
                });
            }
            if self.cfg.mode.dynamic_t() {
                self.controller.observe_val_loss(k, l)?;
            }
            val_loss = Some(l);
        }

        let batch = k as usize % self.task.num_train_batches().max(1);
        let LossGrad { loss, grads } = self.task.loss_and_grad(&self.params, batch);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                step: k,
                param: None,
                what: "training loss",
            });
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFiniteLoss {
                step: k,
                param: Some(i),
                what: "gradient",
            });
        }

        let redefined = match &self.slots {
            None => true,
            Some(_) => self.cfg.mode.redefines() && self.steps_since_redefine >= self.controller.interval(),
        };
        if redefined {
            self.redefine(&grads, rho, k)?;
        }

        let decay = self.cfg.hyper.lr_full * self.cfg.hyper.weight_decay;
        if decay > 0.0 {
            for p in &mut self.params {
                p.scale_in_place(1.0 - decay);
            }
        }

        let slots = self.slots.as_mut().expect("projectors built above");
        for (i, ((theta, slot), g)) in self.params.iter_mut().zip(slots.iter_mut()).zip(&grads).enumerate() {
            let split = slot.projector.split(g)?;
            let u_full = adamw_step(&mut slot.state, &split.g_full_sub, &self.cfg.hyper)?;
            let u_free = signsgd_step(&split.g_free, self.cfg.hyper.lr_free)?;
            let lifted = slot.projector.lift(&u_full)?;
            debug_assert!(off_subspace_is_zero(&lifted, slot.projector.selected()));
            theta.add_assign(&lifted)?;
            theta.add_assign(&u_free)?;
            if !theta.is_finite() {
                return Err(Error::NonFiniteLoss {
                    step: k,
                    param: Some(i),
                    what: "parameter",
                });
            }
        }

        let row = MetricsRow {
            step: k,
            train_loss: loss,
            val_loss,
            rho,
            t_current: self.controller.t_current(),
            redefined,
            state_scalars: self.state_scalars(),
        };
        self.trace.rows.push(row);
        self.step += 1;
        self.steps_since_redefine += 1;
        Ok(self.trace.rows.last().expect("row pushed"))
    }

    fn redefine(&mut self, grads: &[ParamTensor], rho: f64, k: u64) -> Result<()> {
        let old = self.slots.take();
        let mut slots = Vec::with_capacity(grads.len());
        for (i, g) in grads.iter().enumerate() {
            let projector = BlockProjector::redefine(g, rho, self.cfg.rule, &mut self.rng);
            let state = match (&old, self.cfg.strategy) {
                (Some(prev), StateStrategy::Project) => {
                    let prev = &prev[i];
                    projector.transport_state(&prev.projector, &prev.state)?
                }
                _ => projector.reset_state(g.rows()),
            };
            if let Some(h) = self.history.as_mut() {
                h.push(snapshot(k, i, &projector));
            }
            slots.push(Slot { projector, state });
        }
        self.slots = Some(slots);
        self.steps_since_redefine = 0;
        Ok(())
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.step < self.cfg.total_steps {
            self.train_step()?;
        }
        Ok(())
    }
}

fn snapshot(step: u64, param_id: usize, p: &BlockProjector) -> ProjectorSnapshot {
    ProjectorSnapshot {
        step,
        param_id,
        selected: p.selected().to_vec(),
        rho_used: p.rho_used(),
    }
}

fn off_subspace_is_zero(lifted: &ParamTensor, selected: &[usize]) -> bool {
    (0..lifted.rows()).all(|r| {
        (0..lifted.cols())
            .filter(|c| selected.binary_search(c).is_err())
            .all(|c| lifted.get(r, c) == 0.0)
    })
}

/// Runs `cfg.total_steps` steps and returns the metrics trace.
pub fn run<T: TrainingTask + ?Sized>(cfg: &EngineConfig, task: &T) -> Result<MetricsTrace> {
    let mut trainer = Trainer::new(cfg.clone(), task)?;
    trainer.run_to_end()?;
    Ok(trainer.into_trace())
}
