//! Analytic optimizer-state accounting.
//!
//! Counts AdamW moment scalars for a model shape under a given state-full
//! ratio, without allocating anything. Step counters and projector index
//! sets are not counted. Byte figures assume 4-byte (single precision)
//! state scalars.

use serde::{Deserialize, Serialize};

use crate::projectors::subspace_size;
use crate::schedules::RhoSchedule;

pub const BYTES_PER_SCALAR: u64 = 4;
pub const GIB: f64 = (1u64 << 30) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupPolicy {
    /// Always fully covered by AdamW (embeddings, output head, gains).
    AlwaysStateFull,
    /// Column-blocked; only `ceil(rho * cols)` columns carry state.
    Blockable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGroup {
    pub name: String,
    pub rows: u64,
    pub cols: u64,
    pub count: u64,
    pub policy: GroupPolicy,
}

impl ParamGroup {
    pub fn new(name: &str, rows: u64, cols: u64, count: u64, policy: GroupPolicy) -> Self {
        Self {
            name: name.to_string(),
            rows,
            cols,
            count,
            policy,
        }
    }

    pub fn param_count(&self) -> u64 {
        self.rows * self.cols * self.count
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelShape {
    pub groups: Vec<ParamGroup>,
}

/// Dimensions of a LLaMA-style decoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransformerDims {
    pub layers: u64,
    pub hidden: u64,
    pub intermediate: u64,
    pub vocab: u64,
}

impl TransformerDims {
    /// The 130M-parameter LLaMA configuration.
    pub const LLAMA_130M: TransformerDims = TransformerDims {
        layers: 12,
        hidden: 768,
        intermediate: 2048,
        vocab: 32000,
    };
}

impl ModelShape {
    pub fn new(groups: Vec<ParamGroup>) -> Self {
        Self { groups }
    }

    /// All groups blockable, one entry per `(rows, cols)` matrix.
    pub fn all_blockable(shapes: &[(usize, usize)]) -> Self {
        Self::new(
            shapes
                .iter()
                .enumerate()
                .map(|(i, &(r, c))| {
                    ParamGroup::new(&format!("param{i}"), r as u64, c as u64, 1, GroupPolicy::Blockable)
                })
                .collect(),
        )
    }

    /// LLaMA-style decoder: attention and MLP projections are blockable;
    /// embedding, untied output head and RMSNorm gains are always state-full.
    pub fn transformer(d: TransformerDims) -> Self {
        use GroupPolicy::*;
        let TransformerDims {
            layers: l,
            hidden: h,
            intermediate: f,
            vocab: v,
        } = d;
        Self::new(vec![
            ParamGroup::new("embed_tokens", v, h, 1, AlwaysStateFull),
            ParamGroup::new("attn_qkvo", h, h, 4 * l, Blockable),
            ParamGroup::new("mlp_gate_up", h, f, 2 * l, Blockable),
            ParamGroup::new("mlp_down", f, h, l, Blockable),
            ParamGroup::new("norm_gains", 1, h, 2 * l + 1, AlwaysStateFull),
            ParamGroup::new("lm_head", h, v, 1, AlwaysStateFull),
        ])
    }

    pub fn param_count(&self) -> u64 {
        self.groups.iter().map(ParamGroup::param_count).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MemoryReport {
    pub rho: f64,
    pub param_count: u64,
    pub adamw_state_scalars: u64,
    pub frugal_state_scalars: u64,
    pub adamw_bytes: u64,
    pub frugal_bytes: u64,
    pub ratio_to_adamw: f64,
}

impl MemoryReport {
    pub fn adamw_gib(&self) -> f64 {
        self.adamw_bytes as f64 / GIB
    }

    pub fn frugal_gib(&self) -> f64 {
        self.frugal_bytes as f64 / GIB
    }
}

/// State scalars for one group: `2 * rows * ceil(rho_g * cols) * count`.
fn group_state_scalars(g: &ParamGroup, rho: f64) -> u64 {
    let covered = match g.policy {
        GroupPolicy::AlwaysStateFull => g.cols,
        GroupPolicy::Blockable => subspace_size(rho, g.cols as usize) as u64,
    };
    2 * g.rows * covered * g.count
}

pub fn count_states(shape: &ModelShape, rho: f64) -> MemoryReport {
    let rho = rho.clamp(0.0, 1.0);
    let param_count = shape.param_count();
    let adamw = 2 * param_count;
    let frugal: u64 = shape.groups.iter().map(|g| group_state_scalars(g, rho)).sum();
    MemoryReport {
        rho,
        param_count,
        adamw_state_scalars: adamw,
        frugal_state_scalars: frugal,
        adamw_bytes: adamw * BYTES_PER_SCALAR,
        frugal_bytes: frugal * BYTES_PER_SCALAR,
        ratio_to_adamw: if adamw == 0 { 0.0 } else { frugal as f64 / adamw as f64 },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Extrapolation {
    pub factor: f64,
    pub projected_saving: f64,
}

/// Scales a measured saving at `(layers0, hidden0)` to `(layers, hidden)`
/// assuming the overhead grows linearly in depth and quadratically in width.
/// The saving is returned in whatever unit `base_saving` was given.
pub fn scaling_extrapolation(base_saving: f64, base: (u64, u64), target: (u64, u64)) -> Extrapolation {
    let (l0, h0) = base;
    let (l, h) = target;
    let width = h as f64 / h0 as f64;
    let factor = (l as f64 / l0 as f64) * width * width;
    Extrapolation {
        factor,
        projected_saving: base_saving * factor,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimelinePoint {
    pub step: u64,
    pub rho: f64,
    pub bytes: u64,
}

/// State bytes sampled every `sample_every` steps from 0 through `steps`
/// (the final step is always included).
pub fn dynamic_memory_timeline(
    shape: &ModelShape,
    schedule: &RhoSchedule,
    steps: u64,
    sample_every: u64,
) -> Vec<TimelinePoint> {
    assert!(sample_every > 0, "sample_every must be positive");
    let mut ks: Vec<u64> = (0..=steps).step_by(sample_every as usize).collect();
    if ks.last() != Some(&steps) {
        ks.push(steps);
    }
    ks.into_iter()
        .map(|k| {
            let rho = schedule.rho_at(k);
            TimelinePoint {
                step: k,
                rho,
                bytes: count_states(shape, rho).frugal_bytes,
            }
        })
        .collect()
}
