//! Column-block projectors onto the state-full subspace.
//!
//! A projector is a sorted set of selected columns of one 2-D parameter.
//! Projection gathers those columns; lifting scatters them back into a zero
//! tensor of full width. The complement is handled by the state-free rule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::AdamSubState;
use crate::rng::Rng;
use crate::tensor::ParamTensor;

/// Slack applied before `ceil` so that `rho * cols` values which are integral
/// in exact arithmetic (e.g. `0.1 * 30`) do not round up an extra column.
const CEIL_SLACK: f64 = 1e-9;

/// Number of state-full columns for ratio `rho`: `ceil(rho * cols)` clamped
/// to `[0, cols]`.
pub fn subspace_size(rho: f64, cols: usize) -> usize {
    let raw = (rho * cols as f64 - CEIL_SLACK).ceil();
    if raw <= 0.0 {
        0
    } else {
        (raw as usize).min(cols)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionRule {
    /// Columns with the largest gradient L2 norm; ties go to the lower index.
    #[default]
    GradNormTopK,
    /// Uniformly random subset.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockProjector {
    param_cols: usize,
    selected: Vec<usize>,
    rho_used: f64,
    rule: SelectionRule,
}

/// Gradient decomposed into the subspace part (compact) and the
/// full-width remainder, which is zero on every selected column.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitGradient {
    pub g_full_sub: ParamTensor,
    pub g_free: ParamTensor,
}

impl BlockProjector {
    /// Builds a projector from an explicit index set.
    pub fn from_indices(param_cols: usize, selected: Vec<usize>, rho_used: f64, rule: SelectionRule) -> Result<Self> {
        if selected.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::NotSorted);
        }
        if let Some(&last) = selected.last() {
            if last >= param_cols {
                return Err(Error::IndexOutOfRange {
                    index: last,
                    cols: param_cols,
                });
            }
        }
        Ok(Self {
            param_cols,
            selected,
            rho_used,
            rule,
        })
    }

    /// Selects `ceil(rho * cols)` columns of `g` according to `rule`.
    pub fn redefine(g: &ParamTensor, rho: f64, rule: SelectionRule, rng: &mut Rng) -> Self {
        let rho = rho.clamp(0.0, 1.0);
        let cols = g.cols();
        let k = subspace_size(rho, cols);
        let selected = match rule {
            SelectionRule::GradNormTopK => top_k_by_norm(&g.col_l2_norms(), k),
            SelectionRule::Random => rng
                .sample_without_replacement(cols, k)
                .expect("k <= cols by construction"),
        };
        Self {
            param_cols: cols,
            selected,
            rho_used: rho,
            rule,
        }
    }

    pub fn param_cols(&self) -> usize {
        self.param_cols
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    pub fn rho_used(&self) -> f64 {
        self.rho_used
    }

    pub fn rule(&self) -> SelectionRule {
        self.rule
    }

    pub fn width(&self) -> usize {
        self.selected.len()
    }

    pub fn project(&self, g: &ParamTensor) -> Result<ParamTensor> {
        self.check_cols(g)?;
        g.select_cols(&self.selected)
    }

    pub fn split(&self, g: &ParamTensor) -> Result<SplitGradient> {
        self.check_cols(g)?;
        let g_full_sub = g.select_cols(&self.selected)?;
        let g_free = g.sub(&ParamTensor::scatter_cols(
            &g_full_sub,
            &self.selected,
            self.param_cols,
        )?)?;
        Ok(SplitGradient { g_full_sub, g_free })
    }

    pub fn lift(&self, u_sub: &ParamTensor) -> Result<ParamTensor> {
        ParamTensor::scatter_cols(u_sub, &self.selected, self.param_cols)
    }

    /// Zero moments shaped for this projector with the step counter reset.
    pub fn reset_state(&self, rows: usize) -> AdamSubState {
        AdamSubState::zeros(rows, self.width())
    }

    /// Carries moments from `old`'s subspace into this one: shared columns
    /// keep their values, newly selected columns start at zero. The step
    /// counter is preserved.
    pub fn transport_state(&self, old: &BlockProjector, s: &AdamSubState) -> Result<AdamSubState> {
        if old.param_cols != self.param_cols {
            return Err(Error::ShapeMismatch {
                expected: (s.m.rows(), self.param_cols),
                actual: (s.m.rows(), old.param_cols),
            });
        }
        let moved = |x: &ParamTensor| -> Result<ParamTensor> { self.project(&old.lift(x)?) };
        Ok(AdamSubState {
            m: moved(&s.m)?,
            v: moved(&s.v)?,
            t: s.t,
        })
    }

    fn check_cols(&self, g: &ParamTensor) -> Result<()> {
        if g.cols() != self.param_cols {
            return Err(Error::ShapeMismatch {
                expected: (g.rows(), self.param_cols),
                actual: g.shape(),
            });
        }
        Ok(())
    }
}

fn top_k_by_norm(norms: &[f64], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..norms.len()).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// JSON-friendly view of one parameter's projector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectorSnapshot {
    pub step: u64,
    pub param_id: usize,
    pub selected: Vec<usize>,
    pub rho_used: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn g_with_norms(norms: &[f64]) -> ParamTensor {
        ParamTensor::new(1, norms.len(), norms.to_vec()).unwrap()
    }

    fn proj(cols: usize, sel: &[usize]) -> BlockProjector {
        BlockProjector::from_indices(cols, sel.to_vec(), 0.5, SelectionRule::GradNormTopK).unwrap()
    }

    #[test]
    fn top_k_examples() {
        let mut rng = Rng::new(0);
        let g = g_with_norms(&[3.0, 1.0, 4.0, 2.0]);
        let p = BlockProjector::redefine(&g, 0.5, SelectionRule::GradNormTopK, &mut rng);
        assert_eq!(p.selected(), &[0, 2]);

        let flat = g_with_norms(&[1.0, 1.0, 1.0, 1.0]);
        let p = BlockProjector::redefine(&flat, 0.5, SelectionRule::GradNormTopK, &mut rng);
        assert_eq!(p.selected(), &[0, 1]);
    }

    #[test]
    fn full_and_empty_ratios() {
        let g = g_with_norms(&[3.0, 1.0, 4.0, 2.0]);
        for rule in [SelectionRule::GradNormTopK, SelectionRule::Random] {
            let mut rng = Rng::new(9);
            assert_eq!(
                BlockProjector::redefine(&g, 1.0, rule, &mut rng).selected(),
                &[0, 1, 2, 3]
            );
            assert!(BlockProjector::redefine(&g, 0.0, rule, &mut rng).selected().is_empty());
        }
    }

    #[test]
    fn subspace_size_uses_ceil() {
        assert_eq!(subspace_size(0.25, 768), 192);
        assert_eq!(subspace_size(0.1, 30), 3);
        assert_eq!(subspace_size(0.11, 30), 4);
        assert_eq!(subspace_size(0.05, 1), 1);
        assert_eq!(subspace_size(0.0, 10), 0);
        assert_eq!(subspace_size(1.0, 10), 10);
    }

    #[test]
    fn split_examples() {
        let g = ParamTensor::from_rows(&[&[1.0, 2.0, 3.0]]).unwrap();
        let s = proj(3, &[0, 2]).split(&g).unwrap();
        assert_eq!(s.g_full_sub.as_slice(), &[1.0, 3.0]);
        assert_eq!(s.g_free.as_slice(), &[0.0, 2.0, 0.0]);

        let s = proj(3, &[]).split(&g).unwrap();
        assert_eq!(s.g_full_sub.shape(), (1, 0));
        assert_eq!(s.g_free, g);

        let s = proj(3, &[0, 1, 2]).split(&g).unwrap();
        assert!(s.g_free.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn split_and_lift_reject_wrong_shapes() {
        let g = ParamTensor::zeros(2, 4);
        assert!(matches!(proj(3, &[0]).split(&g), Err(Error::ShapeMismatch { .. })));
        assert!(matches!(
            proj(3, &[0, 1]).lift(&ParamTensor::zeros(2, 1)),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn lift_examples() {
        let u = ParamTensor::from_rows(&[&[1.0, 3.0]]).unwrap();
        assert_eq!(proj(3, &[0, 2]).lift(&u).unwrap().as_slice(), &[1.0, 0.0, 3.0]);
    }

    fn state_with(m: &[f64], v: &[f64], t: u64) -> AdamSubState {
        AdamSubState {
            m: ParamTensor::new(1, m.len(), m.to_vec()).unwrap(),
            v: ParamTensor::new(1, v.len(), v.to_vec()).unwrap(),
            t,
        }
    }

    #[test]
    fn transport_examples() {
        let old = proj(3, &[0, 2]);
        let new = proj(3, &[1, 2]);
        let s = state_with(&[0.5, 0.7], &[0.25, 0.49], 7);
        let moved = new.transport_state(&old, &s).unwrap();
        // new col 0 <- index 1 (fresh), new col 1 <- index 2 (carried)
        assert_eq!(moved.m.as_slice(), &[0.0, 0.7]);
        assert_eq!(moved.v.as_slice(), &[0.0, 0.49]);
        assert_eq!(moved.t, 7);

        assert_eq!(old.transport_state(&old, &s).unwrap(), s);

        let disjoint = proj(3, &[1]);
        let z = disjoint.transport_state(&old, &s).unwrap();
        assert_eq!(z.m.as_slice(), &[0.0]);
        assert_eq!(z.v.as_slice(), &[0.0]);
        assert_eq!(z.t, 7);
    }

    #[test]
    fn transport_rejects_width_change() {
        let s = state_with(&[0.5], &[0.25], 1);
        assert!(matches!(
            proj(4, &[0]).transport_state(&proj(3, &[0]), &s),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn reset_examples() {
        let p = proj(4, &[1]);
        let s = p.reset_state(3);
        assert_eq!(s.shape(), (3, 1));
        assert!(s.m.as_slice().iter().chain(s.v.as_slice()).all(|&x| x == 0.0));
        assert_eq!(s.t, 0);
        assert_eq!(proj(4, &[]).reset_state(2).shape(), (2, 0));
    }

    #[test]
    fn snapshot_json_round_trip() {
        let snap = ProjectorSnapshot {
            step: 40,
            param_id: 1,
            selected: vec![0, 3],
            rho_used: 0.25,
        };
        let json = serde_json::to_string(&snap).unwrap();
        assert_eq!(json, r#"{"step":40,"param_id":1,"selected":[0,3],"rho_used":0.25}"#);
        assert_eq!(serde_json::from_str::<ProjectorSnapshot>(&json).unwrap(), snap);
    }

    fn grad_strategy() -> impl Strategy<Value = (ParamTensor, f64, bool, u64)> {
        (1usize..5, 1usize..12).prop_flat_map(|(rows, cols)| {
            (
                proptest::collection::vec(-10f64..10.0, rows * cols),
                0.0f64..=1.0,
                any::<bool>(),
                any::<u64>(),
            )
                .prop_map(move |(d, rho, random, seed)| (ParamTensor::new(rows, cols, d).unwrap(), rho, random, seed))
        })
    }

    proptest! {
        #[test]
        fn topk_scale_invariant((g, rho, _r, _s) in grad_strategy(), c in 1e-3f64..1e3) {
            let mut rng = Rng::new(0);
            let a = BlockProjector::redefine(&g, rho, SelectionRule::GradNormTopK, &mut rng);
            let b = BlockProjector::redefine(&g.map(|x| c * x), rho, SelectionRule::GradNormTopK, &mut rng);
            // Scaling can merge near-ties in floating point; only compare
            // when the norms are well separated.
            let norms = g.col_l2_norms();
            let mut sorted = norms.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            let k = a.width();
            let separated = k == 0 || k == norms.len() || (sorted[k - 1] - sorted[k]).abs() > 1e-9 * sorted[0].max(1.0);
            if separated {
                prop_assert_eq!(a.selected(), b.selected());
            }
        }

        #[test]
        fn selection_is_sorted_and_sized((g, rho, random, seed) in grad_strategy()) {
            let rule = if random { SelectionRule::Random } else { SelectionRule::GradNormTopK };
            let p = BlockProjector::redefine(&g, rho, rule, &mut Rng::new(seed));
            prop_assert_eq!(p.width(), subspace_size(rho, g.cols()));
            prop_assert!(p.selected().windows(2).all(|w| w[0] < w[1]));
            prop_assert!(p.selected().iter().all(|&j| j < g.cols()));
        }
    }
}
