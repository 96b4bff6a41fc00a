//! Desk-scale training tasks with analytic gradients.
//!
//! Every task draws its data from a seeded generator, splits it into a fixed
//! sequence of training batches and a separately drawn validation set, and
//! evaluates loss and gradient in closed form.

use std::fmt;
use std::str::FromStr;

use adafrugal::engine::{LossGrad, TrainingTask};
use adafrugal::{ParamTensor, Rng};
use serde::{Deserialize, Serialize};

use crate::error::WorkbenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskName {
    QuadraticBowl,
    LogisticSynth,
    MlpRegression,
}

impl TaskName {
    pub const ALL: [TaskName; 3] = [
        TaskName::QuadraticBowl,
        TaskName::LogisticSynth,
        TaskName::MlpRegression,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            TaskName::QuadraticBowl => "quadratic_bowl",
            TaskName::LogisticSynth => "logistic_synth",
            TaskName::MlpRegression => "mlp_regression",
        }
    }
}

impl fmt::Display for TaskName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TaskName {
    type Err = WorkbenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TaskName::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| WorkbenchError::UnknownTask(s.to_string()))
    }
}

pub fn generate_task(name: TaskName, seed: u64) -> Box<dyn TrainingTask> {
    match name {
        TaskName::QuadraticBowl => Box::new(QuadraticBowl::new(seed)),
        TaskName::LogisticSynth => Box::new(LogisticSynth::new(seed)),
        TaskName::MlpRegression => Box::new(MlpRegression::new(seed)),
    }
}

/// Row-major samples: `x` is `n x dim_in`, `y` is `n x dim_out`.
#[derive(Debug, Clone)]
struct Split {
    x: Vec<f64>,
    y: Vec<f64>,
    dim_in: usize,
    dim_out: usize,
}

impl Split {
    fn len(&self) -> usize {
        self.x.len() / self.dim_in
    }

    fn x(&self, s: usize) -> &[f64] {
        &self.x[s * self.dim_in..(s + 1) * self.dim_in]
    }

    fn y(&self, s: usize) -> &[f64] {
        &self.y[s * self.dim_out..(s + 1) * self.dim_out]
    }
}

fn batch_range(batch: usize, batch_size: usize) -> std::ops::Range<usize> {
    batch * batch_size..(batch + 1) * batch_size
}

// ---------------------------------------------------------------------------

/// Noise-free least squares `0.5 * mean_b ||x_b W - y_b||^2` with targets
/// generated by a known `W*`, so the minimum value is exactly zero.
#[derive(Debug, Clone)]
pub struct QuadraticBowl {
    w_star: ParamTensor,
    train: Split,
    val: Split,
    batch_size: usize,
}

impl QuadraticBowl {
    pub const DIM_IN: usize = 6;
    pub const DIM_OUT: usize = 10;
    const BATCHES: usize = 4;
    const BATCH_SIZE: usize = 16;
    const VAL: usize = 32;

    pub fn new(seed: u64) -> Self {
        let root = Rng::new(seed);
        let mut wr = root.fork(1);
        let w: Vec<f64> = (0..Self::DIM_IN * Self::DIM_OUT).map(|_| wr.normal()).collect();
        let w_star = ParamTensor::new(Self::DIM_IN, Self::DIM_OUT, w).expect("finite draws");
        let train = Self::draw(&w_star, &mut root.fork(2), Self::BATCHES * Self::BATCH_SIZE);
        let val = Self::draw(&w_star, &mut root.fork(3), Self::VAL);
        Self {
            w_star,
            train,
            val,
            batch_size: Self::BATCH_SIZE,
        }
    }

    fn draw(w: &ParamTensor, rng: &mut Rng, n: usize) -> Split {
        let x: Vec<f64> = (0..n * Self::DIM_IN).map(|_| rng.normal()).collect();
        let mut y = Vec::with_capacity(n * Self::DIM_OUT);
        for s in 0..n {
            y.extend(Self::predict_row(w, &x[s * Self::DIM_IN..(s + 1) * Self::DIM_IN]));
        }
        Split {
            x,
            y,
            dim_in: Self::DIM_IN,
            dim_out: Self::DIM_OUT,
        }
    }

    fn predict_row(w: &ParamTensor, x: &[f64]) -> Vec<f64> {
        (0..w.cols())
            .map(|o| x.iter().enumerate().map(|(i, xi)| xi * w.get(i, o)).sum())
            .collect()
    }

    /// The closed-form minimizer.
    pub fn minimizer(&self) -> Vec<ParamTensor> {
        vec![self.w_star.clone()]
    }

    fn eval(&self, w: &ParamTensor, data: &Split, rows: std::ops::Range<usize>, grad: Option<&mut ParamTensor>) -> f64 {
        let n = rows.len() as f64;
        let mut loss = 0.0;
        let mut grad = grad;
        for s in rows {
            let x = data.x(s);
            let pred = Self::predict_row(w, x);
            for (o, (p, t)) in pred.iter().zip(data.y(s)).enumerate() {
                let r = p - t;
                loss += 0.5 * r * r / n;
                if let Some(g) = grad.as_deref_mut() {
                    for (i, xi) in x.iter().enumerate() {
                        g.set(i, o, g.get(i, o) + xi * r / n);
                    }
                }
            }
        }
        loss
    }
}

impl TrainingTask for QuadraticBowl {
    fn name(&self) -> &str {
        TaskName::QuadraticBowl.as_str()
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![ParamTensor::zeros(Self::DIM_IN, Self::DIM_OUT)]
    }

    fn num_train_batches(&self) -> usize {
        Self::BATCHES
    }

    fn loss(&self, params: &[ParamTensor], batch: usize) -> f64 {
        self.eval(&params[0], &self.train, batch_range(batch, self.batch_size), None)
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: usize) -> LossGrad {
        let mut g = ParamTensor::zeros(Self::DIM_IN, Self::DIM_OUT);
        let loss = self.eval(
            &params[0],
            &self.train,
            batch_range(batch, self.batch_size),
            Some(&mut g),
        );
        LossGrad { loss, grads: vec![g] }
    }

    fn val_loss(&self, params: &[ParamTensor]) -> f64 {
        self.eval(&params[0], &self.val, 0..self.val.len(), None)
    }
}

// ---------------------------------------------------------------------------

/// Binary classification of two unit-variance Gaussians centred at `+mu`
/// and `-mu`. Parameters: weights `1 x DIM` and bias `1 x 1`; mean
/// log-loss.
#[derive(Debug, Clone)]
pub struct LogisticSynth {
    mu: Vec<f64>,
    train: Split,
    val: Split,
    batch_size: usize,
}

impl LogisticSynth {
    pub const DIM: usize = 8;
    const BATCHES: usize = 8;
    const BATCH_SIZE: usize = 32;
    const VAL: usize = 256;
    /// Norm of each class mean; classes are `2 * SEPARATION` apart.
    pub const SEPARATION: f64 = 2.5;

    pub fn new(seed: u64) -> Self {
        let root = Rng::new(seed);
        let mut mr = root.fork(1);
        let raw: Vec<f64> = (0..Self::DIM).map(|_| mr.normal()).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let mu: Vec<f64> = raw.iter().map(|v| v / norm * Self::SEPARATION).collect();
        let train = Self::draw(&mu, &mut root.fork(2), Self::BATCHES * Self::BATCH_SIZE);
        let val = Self::draw(&mu, &mut root.fork(3), Self::VAL);
        Self {
            mu,
            train,
            val,
            batch_size: Self::BATCH_SIZE,
        }
    }

    fn draw(mu: &[f64], rng: &mut Rng, n: usize) -> Split {
        let mut x = Vec::with_capacity(n * Self::DIM);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let label = (rng.next_u64() & 1) as f64;
            let sign = 2.0 * label - 1.0;
            x.extend(mu.iter().map(|m| sign * m + rng.normal()));
            y.push(label);
        }
        Split {
            x,
            y,
            dim_in: Self::DIM,
            dim_out: 1,
        }
    }

    pub fn class_mean(&self) -> &[f64] {
        &self.mu
    }

    fn logit(params: &[ParamTensor], x: &[f64]) -> f64 {
        params[1].get(0, 0) + x.iter().zip(params[0].as_slice()).map(|(a, w)| a * w).sum::<f64>()
    }

    /// Validation accuracy of the linear classifier `params`.
    pub fn val_accuracy(&self, params: &[ParamTensor]) -> f64 {
        let n = self.val.len();
        let correct = (0..n)
            .filter(|&s| (Self::logit(params, self.val.x(s)) > 0.0) == (self.val.y(s)[0] > 0.5))
            .count();
        correct as f64 / n as f64
    }

    /// Validation accuracy of the Bayes-optimal rule `sign(mu . x)`.
    pub fn bayes_val_accuracy(&self) -> f64 {
        let n = self.val.len();
        let correct = (0..n)
            .filter(|&s| {
                let score: f64 = self.val.x(s).iter().zip(&self.mu).map(|(a, m)| a * m).sum();
                (score > 0.0) == (self.val.y(s)[0] > 0.5)
            })
            .count();
        correct as f64 / n as f64
    }

    fn eval(
        &self,
        params: &[ParamTensor],
        data: &Split,
        rows: std::ops::Range<usize>,
        grads: Option<&mut [ParamTensor]>,
    ) -> f64 {
        let n = rows.len() as f64;
        let mut loss = 0.0;
        let mut grads = grads;
        for s in rows {
            let x = data.x(s);
            let y = data.y(s)[0];
            let z = Self::logit(params, x);
            // log(1 + e^z) - y z, evaluated stably
            loss += (z.max(0.0) + (-z.abs()).exp().ln_1p() - y * z) / n;
            if let Some(g) = grads.as_deref_mut() {
                let dz = (sigmoid(z) - y) / n;
                for (i, xi) in x.iter().enumerate() {
                    g[0].set(0, i, g[0].get(0, i) + xi * dz);
                }
                g[1].set(0, 0, g[1].get(0, 0) + dz);
            }
        }
        loss
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl TrainingTask for LogisticSynth {
    fn name(&self) -> &str {
        TaskName::LogisticSynth.as_str()
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![ParamTensor::zeros(1, Self::DIM), ParamTensor::zeros(1, 1)]
    }

    fn num_train_batches(&self) -> usize {
        Self::BATCHES
    }

    fn loss(&self, params: &[ParamTensor], batch: usize) -> f64 {
        self.eval(params, &self.train, batch_range(batch, self.batch_size), None)
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: usize) -> LossGrad {
        let mut grads = vec![ParamTensor::zeros(1, Self::DIM), ParamTensor::zeros(1, 1)];
        let loss = self.eval(
            params,
            &self.train,
            batch_range(batch, self.batch_size),
            Some(&mut grads),
        );
        LossGrad { loss, grads }
    }

    fn val_loss(&self, params: &[ParamTensor]) -> f64 {
        self.eval(params, &self.val, 0..self.val.len(), None)
    }
}

// ---------------------------------------------------------------------------

/// One-hidden-layer tanh network regressing a smooth scalar target.
/// Parameters: `W1 (16 x 32)`, `b1 (1 x 32)`, `W2 (32 x 1)`, `b2 (1 x 1)`;
/// loss `0.5 * mean (y_hat - y)^2`.
#[derive(Debug, Clone)]
pub struct MlpRegression {
    init: Vec<ParamTensor>,
    train: Split,
    val: Split,
    batch_size: usize,
}

impl MlpRegression {
    pub const DIM_IN: usize = 16;
    pub const HIDDEN: usize = 32;
    const BATCHES: usize = 8;
    const BATCH_SIZE: usize = 32;
    const VAL: usize = 256;

    pub fn new(seed: u64) -> Self {
        let root = Rng::new(seed);
        let mut tr = root.fork(1);
        let scale = 1.0 / (Self::DIM_IN as f64).sqrt();
        let a: Vec<f64> = (0..Self::DIM_IN).map(|_| tr.normal() * scale).collect();
        let b: Vec<f64> = (0..Self::DIM_IN).map(|_| tr.normal() * scale).collect();
        let target = move |x: &[f64]| {
            let u: f64 = x.iter().zip(&a).map(|(p, q)| p * q).sum();
            let v: f64 = x.iter().zip(&b).map(|(p, q)| p * q).sum();
            u.sin() + 0.5 * (2.0 * v).cos() + 0.25 * u * v
        };
        let train = Self::draw(&target, &mut root.fork(2), Self::BATCHES * Self::BATCH_SIZE);
        let val = Self::draw(&target, &mut root.fork(3), Self::VAL);

        let mut ir = root.fork(4);
        let w1 = (0..Self::DIM_IN * Self::HIDDEN).map(|_| ir.normal() * scale).collect();
        let s2 = 1.0 / (Self::HIDDEN as f64).sqrt();
        let w2 = (0..Self::HIDDEN).map(|_| ir.normal() * s2).collect();
        let init = vec![
            ParamTensor::new(Self::DIM_IN, Self::HIDDEN, w1).expect("finite"),
            ParamTensor::zeros(1, Self::HIDDEN),
            ParamTensor::new(Self::HIDDEN, 1, w2).expect("finite"),
            ParamTensor::zeros(1, 1),
        ];
        Self {
            init,
            train,
            val,
            batch_size: Self::BATCH_SIZE,
        }
    }

    fn draw(target: &impl Fn(&[f64]) -> f64, rng: &mut Rng, n: usize) -> Split {
        let mut x = Vec::with_capacity(n * Self::DIM_IN);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..Self::DIM_IN).map(|_| rng.normal()).collect();
            y.push(target(&row));
            x.extend(row);
        }
        Split {
            x,
            y,
            dim_in: Self::DIM_IN,
            dim_out: 1,
        }
    }

    fn eval(
        &self,
        params: &[ParamTensor],
        data: &Split,
        rows: std::ops::Range<usize>,
        grads: Option<&mut [ParamTensor]>,
    ) -> f64 {
        const H: usize = MlpRegression::HIDDEN;
        let (w1, b1, w2) = (params[0].as_slice(), params[1].as_slice(), params[2].as_slice());
        let b2 = params[3].as_slice()[0];
        let n = rows.len() as f64;
        let mut loss = 0.0;
        let mut grads = grads;
        let mut h = [0.0; H];
        let mut dz = [0.0; H];
        for s in rows {
            let x = data.x(s);
            h.copy_from_slice(b1);
            for (xi, w_row) in x.iter().zip(w1.chunks_exact(H)) {
                for (hj, w) in h.iter_mut().zip(w_row) {
                    *hj += xi * w;
                }
            }
            let mut y_hat = b2;
            for (hj, w) in h.iter_mut().zip(w2) {
                *hj = hj.tanh();
                y_hat += *hj * w;
            }
            let r = y_hat - data.y(s)[0];
            loss += 0.5 * r * r / n;
            if let Some(g) = grads.as_deref_mut() {
                let dy = r / n;
                g[3].as_mut_slice()[0] += dy;
                for (j, (&hj, w)) in h.iter().zip(w2).enumerate() {
                    g[2].as_mut_slice()[j] += dy * hj;
                    dz[j] = dy * w * (1.0 - hj * hj);
                }
                for (gb, d) in g[1].as_mut_slice().iter_mut().zip(&dz) {
                    *gb += d;
                }
                for (xi, g_row) in x.iter().zip(g[0].as_mut_slice().chunks_exact_mut(H)) {
                    for (gw, d) in g_row.iter_mut().zip(&dz) {
                        *gw += xi * d;
                    }
                }
            }
        }
        loss
    }

    fn zero_grads() -> Vec<ParamTensor> {
        vec![
            ParamTensor::zeros(Self::DIM_IN, Self::HIDDEN),
            ParamTensor::zeros(1, Self::HIDDEN),
            ParamTensor::zeros(Self::HIDDEN, 1),
            ParamTensor::zeros(1, 1),
        ]
    }
}

impl TrainingTask for MlpRegression {
    fn name(&self) -> &str {
        TaskName::MlpRegression.as_str()
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        self.init.clone()
    }

    fn num_train_batches(&self) -> usize {
        Self::BATCHES
    }

    fn loss(&self, params: &[ParamTensor], batch: usize) -> f64 {
        self.eval(params, &self.train, batch_range(batch, self.batch_size), None)
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: usize) -> LossGrad {
        let mut grads = Self::zero_grads();
        let loss = self.eval(
            params,
            &self.train,
            batch_range(batch, self.batch_size),
            Some(&mut grads),
        );
        LossGrad { loss, grads }
    }

    fn val_loss(&self, params: &[ParamTensor]) -> f64 {
        self.eval(params, &self.val, 0..self.val.len(), None)
    }
}
