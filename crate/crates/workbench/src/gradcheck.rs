//! Central finite-difference gradient checks for tasks.

use adafrugal::engine::TrainingTask;
use adafrugal::{ParamTensor, Rng};

/// Central difference `(f(x + h) - f(x - h)) / 2h` for every entry of every
/// parameter, on training batch `batch`.
pub fn finite_difference_grads(task: &dyn TrainingTask, params: &[ParamTensor], batch: usize, h: f64) -> Vec<Vec<f64>> {
    let mut work: Vec<ParamTensor> = params.to_vec();
    let mut out = Vec::with_capacity(params.len());
    for p in 0..params.len() {
        let mut g = Vec::with_capacity(params[p].len());
        for i in 0..params[p].len() {
            let orig = params[p].as_slice()[i];
            work[p].as_mut_slice()[i] = orig + h;
            let plus = task.loss(&work, batch);
            work[p].as_mut_slice()[i] = orig - h;
            let minus = task.loss(&work, batch);
            work[p].as_mut_slice()[i] = orig;
            g.push((plus - minus) / (2.0 * h));
        }
        out.push(g);
    }
    out
}

/// `||a - n|| / max(||a||, ||n||)` over all parameters, with a floor on the
/// denominator so an all-zero gradient compares as zero error.
pub fn relative_error(analytic: &[ParamTensor], numeric: &[Vec<f64>]) -> f64 {
    let mut diff = 0.0;
    let mut na = 0.0;
    let mut nn = 0.0;
    for (a, n) in analytic.iter().zip(numeric) {
        for (x, y) in a.as_slice().iter().zip(n) {
            diff += (x - y) * (x - y);
            na += x * x;
            nn += y * y;
        }
    }
    diff.sqrt() / na.sqrt().max(nn.sqrt()).max(1e-12)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub points: usize,
    pub max_rel_error: f64,
}

/// Checks the task's analytic gradient at `points` random parameter vectors
/// (initial parameters plus N(0, 0.5^2) noise), cycling through batches.
pub fn check_task(task: &dyn TrainingTask, points: usize, seed: u64) -> GradCheck {
    let mut rng = Rng::new(seed);
    let base = task.init_params();
    let mut worst: f64 = 0.0;
    for k in 0..points {
        let params: Vec<ParamTensor> = base
            .iter()
            .map(|p| {
                let noisy = p.as_slice().iter().map(|x| x + 0.5 * rng.normal()).collect();
                ParamTensor::new(p.rows(), p.cols(), noisy).expect("same shape")
            })
            .collect();
        let batch = k % task.num_train_batches();
        let analytic = task.loss_and_grad(&params, batch).grads;
        let numeric = finite_difference_grads(task, &params, batch, 1e-6);
        worst = worst.max(relative_error(&analytic, &numeric));
    }
    GradCheck {
        points,
        max_rel_error: worst,
    }
}
