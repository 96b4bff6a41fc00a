//! Dynamic control laws: linear decay of the state-full ratio and the
//! loss-aware growth of the subspace redefinition interval.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Linear decay of the state-full ratio from `rho_start` to `rho_end` over
/// `k_total` steps, held at `rho_end` afterwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoSchedule {
    rho_start: f64,
    rho_end: f64,
    k_total: u64,
}

impl RhoSchedule {
    pub fn new(rho_start: f64, rho_end: f64, k_total: u64) -> Result<Self> {
        if !(rho_start > 0.0 && rho_start <= 1.0) {
            return Err(invalid("rho_start", format!("{rho_start} not in (0, 1]")));
        }
        if !(rho_end > 0.0 && rho_end <= rho_start) {
            return Err(invalid(
                "rho_end",
                format!("{rho_end} not in (0, rho_start={rho_start}]"),
            ));
        }
        if k_total == 0 {
            return Err(invalid("k_total", "must be positive".into()));
        }
        Ok(Self {
            rho_start,
            rho_end,
            k_total,
        })
    }

    /// A schedule that stays at `rho` forever.
    pub fn constant(rho: f64) -> Result<Self> {
        Self::new(rho, rho, 1)
    }

    pub fn rho_start(&self) -> f64 {
        self.rho_start
    }

    pub fn rho_end(&self) -> f64 {
        self.rho_end
    }

    pub fn k_total(&self) -> u64 {
        self.k_total
    }

    pub fn rho_at(&self, k: u64) -> f64 {
        let frac = k as f64 / self.k_total as f64;
        self.rho_end
            .max(self.rho_start - (self.rho_start - self.rho_end) * frac)
    }
}

/// Relative change `|l_prev - l_curr| / l_prev`.
pub fn rel_loss_change(l_prev: f64, l_curr: f64) -> Result<f64> {
    if l_prev.is_nan() || l_prev <= 0.0 {
        return Err(Error::NonPositiveLoss(l_prev));
    }
    Ok((l_prev - l_curr).abs() / l_prev)
}

/// Hyperparameters of the interval controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TControllerConfig {
    pub t_start: f64,
    pub t_max: f64,
    pub gamma_increase: f64,
    pub n_eval: u64,
    pub tau_low: f64,
}

impl TControllerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_start >= 1.0 && self.t_start.is_finite()) {
            return Err(invalid("t_start", format!("{} must be >= 1", self.t_start)));
        }
        if !(self.t_max >= self.t_start && self.t_max.is_finite()) {
            return Err(invalid(
                "t_max",
                format!("{} must be >= t_start={}", self.t_max, self.t_start),
            ));
        }
        if !(self.gamma_increase > 1.0 && self.gamma_increase.is_finite()) {
            return Err(invalid(
                "gamma_increase",
                format!("{} must be > 1", self.gamma_increase),
            ));
        }
        if self.n_eval == 0 {
            return Err(invalid("n_eval", "must be positive".into()));
        }
        if !(self.tau_low > 0.0 && self.tau_low.is_finite()) {
            return Err(invalid("tau_low", format!("{} must be > 0", self.tau_low)));
        }
        Ok(())
    }
}

/// Outcome of one validation observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TEvent {
    FirstObservation,
    Increased,
    Unchanged,
}

/// Grows the redefinition interval when validation loss plateaus. Never
/// decreases it.
#[derive(Debug, Clone, PartialEq)]
pub struct TController {
    config: TControllerConfig,
    t_current: f64,
    last_val_loss: Option<f64>,
}

impl TController {
    pub fn new(config: TControllerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            t_current: config.t_start,
            config,
            last_val_loss: None,
        })
    }

    pub fn config(&self) -> &TControllerConfig {
        &self.config
    }

    pub fn t_current(&self) -> f64 {
        self.t_current
    }

    /// The interval in whole steps, as compared against a step counter.
    pub fn interval(&self) -> u64 {
        (self.t_current.round() as u64).max(1)
    }

    pub fn last_val_loss(&self) -> Option<f64> {
        self.last_val_loss
    }

    pub fn observe_val_loss(&mut self, k: u64, l_val: f64) -> Result<TEvent> {
        if k == 0 || !k.is_multiple_of(self.config.n_eval) {
            return Err(Error::CadenceViolation {
                step: k,
                n_eval: self.config.n_eval,
            });
        }
        let event = match self.last_val_loss {
            None => TEvent::FirstObservation,
            Some(prev) => {
                if rel_loss_change(prev, l_val)? < self.config.tau_low {
                    self.t_current = self.config.t_max.min(self.t_current * self.config.gamma_increase);
                    TEvent::Increased
                } else {
                    TEvent::Unchanged
                }
            }
        };
        self.last_val_loss = Some(l_val);
        Ok(event)
    }
}

fn invalid(name: &'static str, reason: String) -> Error {
    Error::InvalidHyper { name, reason }
}
