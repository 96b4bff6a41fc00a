use adafrugal::engine::{redefinition_count, run, EngineConfig, LossGrad, Mode, StateStrategy, Trainer, TrainingTask};
use adafrugal::memory::{count_states, ModelShape};
use adafrugal::optim::OptimHyper;
use adafrugal::projectors::SelectionRule;
use adafrugal::schedules::{RhoSchedule, TControllerConfig};
use adafrugal::{Error, ParamTensor, Rng};

/// Least squares `0.5 * mean ||x W - y||^2` with a fixed design. One
/// parameter `W` of shape `in x out`, plus a `1 x out` bias that is unused
/// by the loss (its gradient is always zero).
struct LinearToy {
    x: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    n_in: usize,
    n_out: usize,
    constant_val: Option<f64>,
}

impl LinearToy {
    fn new(seed: u64) -> Self {
        let mut rng = Rng::new(seed);
        let (n_in, n_out, n) = (5, 8, 24);
        let w: Vec<f64> = (0..n_in * n_out).map(|_| rng.normal()).collect();
        let x: Vec<Vec<f64>> = (0..n).map(|_| (0..n_in).map(|_| rng.normal()).collect()).collect();
        let y = x
            .iter()
            .map(|xi| {
                (0..n_out)
                    .map(|o| (0..n_in).map(|i| xi[i] * w[i * n_out + o]).sum())
                    .collect()
            })
            .collect();
        Self {
            x,
            y,
            n_in,
            n_out,
            constant_val: None,
        }
    }

    fn plateau(mut self) -> Self {
        self.constant_val = Some(1.0);
        self
    }

    fn residuals(&self, w: &ParamTensor, rows: std::ops::Range<usize>) -> Vec<(usize, Vec<f64>)> {
        rows.map(|s| {
            let r = (0..self.n_out)
                .map(|o| (0..self.n_in).map(|i| self.x[s][i] * w.get(i, o)).sum::<f64>() - self.y[s][o])
                .collect();
            (s, r)
        })
        .collect()
    }

    fn batch_rows(&self, batch: usize) -> std::ops::Range<usize> {
        let b = self.x.len() / 2;
        batch * b..(batch + 1) * b
    }
}

impl TrainingTask for LinearToy {
    fn name(&self) -> &str {
        "linear_toy"
    }

    fn init_params(&self) -> Vec<ParamTensor> {
        vec![
            ParamTensor::zeros(self.n_in, self.n_out),
            ParamTensor::zeros(1, self.n_out),
        ]
    }

    fn num_train_batches(&self) -> usize {
        2
    }

    fn loss(&self, params: &[ParamTensor], batch: usize) -> f64 {
        let res = self.residuals(&params[0], self.batch_rows(batch));
        let n = res.len() as f64;
        res.iter().flat_map(|(_, r)| r).map(|e| e * e).sum::<f64>() * 0.5 / n
    }

    fn loss_and_grad(&self, params: &[ParamTensor], batch: usize) -> LossGrad {
        let res = self.residuals(&params[0], self.batch_rows(batch));
        let n = res.len() as f64;
        let mut g = ParamTensor::zeros(self.n_in, self.n_out);
        for (s, r) in &res {
            for (i, &xi) in self.x[*s].iter().enumerate() {
                for (o, ro) in r.iter().enumerate() {
                    g.set(i, o, g.get(i, o) + xi * ro / n);
                }
            }
        }
        LossGrad {
            loss: self.loss(params, batch),
            grads: vec![g, ParamTensor::zeros(1, self.n_out)],
        }
    }

    fn val_loss(&self, params: &[ParamTensor]) -> f64 {
        self.constant_val
            .unwrap_or_else(|| 0.5 * (self.loss(params, 0) + self.loss(params, 1)) + 1e-3)
    }
}

fn config(mode: Mode, total_steps: u64) -> EngineConfig {
    EngineConfig {
        mode,
        rho: RhoSchedule::new(0.5, 0.125, total_steps.max(1)).unwrap(),
        t: TControllerConfig {
            t_start: 20.0,
            t_max: 160.0,
            gamma_increase: 1.5,
            n_eval: 50,
            tau_low: 0.008,
        },
        strategy: StateStrategy::Reset,
        hyper: OptimHyper {
            lr_full: 0.01,
            lr_free: 0.01,
            ..OptimHyper::default()
        },
        rule: SelectionRule::GradNormTopK,
        seed: 1,
        total_steps,
    }
}

#[test]
fn static_t200_over_1000_steps_redefines_five_times() {
    let task = LinearToy::new(0);
    let mut cfg = config(Mode::FrugalStatic, 1000);
    cfg.t.t_start = 200.0;
    cfg.t.t_max = 800.0;
    cfg.rho = RhoSchedule::constant(0.25).unwrap();
    let trace = run(&cfg, &task).unwrap();
    assert_eq!(trace.len(), 1000);
    assert_eq!(redefinition_count(&trace), 5);
    let at: Vec<u64> = trace.rows.iter().filter(|r| r.redefined).map(|r| r.step).collect();
    assert_eq!(at, vec![0, 200, 400, 600, 800]);
}

#[test]
fn interval_beyond_horizon_gives_single_event() {
    let task = LinearToy::new(0);
    let mut cfg = config(Mode::FrugalStatic, 300);
    cfg.t.t_start = 300.0;
    cfg.t.t_max = 300.0;
    assert_eq!(redefinition_count(&run(&cfg, &task).unwrap()), 1);
}

#[test]
fn dynamic_t_under_plateau_redefines_less_than_static() {
    let task = LinearToy::new(0).plateau();
    let stat = run(&config(Mode::FrugalStatic, 1000), &task).unwrap();
    let dynt = run(&config(Mode::AdaFrugalDynT, 1000), &task).unwrap();
    assert_eq!(redefinition_count(&stat), 50);
    assert!(redefinition_count(&dynt) < redefinition_count(&stat));
    assert_eq!(dynt.last().unwrap().t_current, 160.0);
}

#[test]
fn zero_steps_gives_empty_trace() {
    let task = LinearToy::new(0);
    assert!(run(&config(Mode::AdaFrugalCombined, 0), &task).unwrap().is_empty());
}

#[test]
fn runs_are_bitwise_deterministic() {
    let task = LinearToy::new(3);
    for rule in [SelectionRule::GradNormTopK, SelectionRule::Random] {
        let mut cfg = config(Mode::AdaFrugalCombined, 400);
        cfg.rule = rule;
        let a = run(&cfg, &task).unwrap();
        let b = run(&cfg, &task).unwrap();
        assert_eq!(a, b);
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.train_loss.to_bits(), y.train_loss.to_bits());
        }
    }
}

#[test]
fn random_rule_depends_on_seed() {
    let task = LinearToy::new(3);
    let mut cfg = config(Mode::FrugalStatic, 60);
    cfg.rule = SelectionRule::Random;
    let mut a = Trainer::new(cfg.clone(), &task).unwrap().record_projectors();
    a.run_to_end().unwrap();
    cfg.seed = 2;
    let mut b = Trainer::new(cfg, &task).unwrap().record_projectors();
    b.run_to_end().unwrap();
    assert_ne!(a.projector_history(), b.projector_history());
}

#[test]
fn control_columns_are_monotone_and_bounded() {
    let task = LinearToy::new(5);
    for mode in Mode::ALL {
        let trace = run(&config(mode, 600), &task).unwrap();
        trace.validate().unwrap();
        for w in trace.rows.windows(2) {
            assert!(w[1].rho <= w[0].rho, "{mode}");
            assert!(w[1].t_current >= w[0].t_current, "{mode}");
        }
        assert!(trace.rows.iter().all(|r| r.t_current <= 160.0));
    }
}

#[test]
fn steps_since_redefine_never_exceeds_interval() {
    let task = LinearToy::new(5).plateau();
    let mut t = Trainer::new(config(Mode::AdaFrugalCombined, 800), &task).unwrap();
    while t.step_index() < 800 {
        t.train_step().unwrap();
        assert!(t.steps_since_redefine() <= t.controller().interval());
    }
}

#[test]
fn state_scalars_match_projector_widths_and_memory_model() {
    let task = LinearToy::new(2);
    let mut cfg = config(Mode::AdaFrugalDynRho, 400);
    cfg.t.t_start = 10.0;
    cfg.rho = RhoSchedule::new(0.5, 0.125, 300).unwrap();
    let mut t = Trainer::new(cfg.clone(), &task).unwrap();
    while t.step_index() < 400 {
        let row = t.train_step().unwrap().clone();
        let widths: u64 = t
            .projectors()
            .iter()
            .zip(t.params())
            .map(|(p, th)| 2 * (p.width() * th.rows()) as u64)
            .sum();
        assert_eq!(row.state_scalars, widths);
    }
    // Last rebuild happened at step 390, after the decay finished.
    let shape = ModelShape::all_blockable(&[(5, 8), (1, 8)]);
    let rho_last = cfg.rho.rho_at(390);
    assert_eq!(t.state_scalars(), count_states(&shape, rho_last).frugal_state_scalars);
    assert_eq!(
        t.state_scalars(),
        count_states(&shape, cfg.rho.rho_end()).frugal_state_scalars
    );
}

#[test]
fn rho_change_only_applies_at_rebuild() {
    let task = LinearToy::new(2);
    let mut cfg = config(Mode::AdaFrugalDynRho, 100);
    cfg.t.t_start = 40.0;
    let trace = run(&cfg, &task).unwrap();
    let mut last = trace.rows[0].state_scalars;
    for r in &trace.rows[1..] {
        if !r.redefined {
            assert_eq!(r.state_scalars, last);
        }
        last = r.state_scalars;
    }
}

#[test]
fn project_strategy_keeps_step_counter_reset_zeroes_it() {
    // With rho = 1 the rebuilt subspace is the same; only the strategy
    // differs, so the traces diverge right after the first rebuild.
    let task = LinearToy::new(4);
    let mut cfg = config(Mode::FrugalStatic, 60);
    cfg.rho = RhoSchedule::constant(1.0).unwrap();
    let reset = run(&cfg, &task).unwrap();
    cfg.strategy = StateStrategy::Project;
    let project = run(&cfg, &task).unwrap();
    assert_eq!(reset.rows[..21], project.rows[..21]);
    assert_ne!(reset.rows[21].train_loss, project.rows[21].train_loss);

    let mut adamw = config(Mode::AdamwFull, 60);
    adamw.strategy = StateStrategy::Project;
    let full = run(&adamw, &task).unwrap();
    for (a, b) in full.rows.iter().zip(&project.rows) {
        assert_eq!(a.train_loss.to_bits(), b.train_loss.to_bits());
    }
}

#[test]
fn weight_decay_shrinks_unused_parameters() {
    // The bias never receives gradient, so only decay acts on it.
    struct Biased(LinearToy);
    impl TrainingTask for Biased {
        fn name(&self) -> &str {
            "biased"
        }
        fn init_params(&self) -> Vec<ParamTensor> {
            let mut p = self.0.init_params();
            p[1] = ParamTensor::new(1, 8, vec![1.0; 8]).unwrap();
            p
        }
        fn num_train_batches(&self) -> usize {
            2
        }
        fn loss(&self, p: &[ParamTensor], b: usize) -> f64 {
            self.0.loss(p, b)
        }
        fn loss_and_grad(&self, p: &[ParamTensor], b: usize) -> LossGrad {
            self.0.loss_and_grad(p, b)
        }
        fn val_loss(&self, p: &[ParamTensor]) -> f64 {
            self.0.val_loss(p)
        }
    }
    let task = Biased(LinearToy::new(1));
    let mut cfg = config(Mode::FrugalStatic, 10);
    cfg.hyper.weight_decay = 0.5;
    let mut t = Trainer::new(cfg, &task).unwrap();
    t.run_to_end().unwrap();
    let expected = (1.0f64 - 0.01 * 0.5).powi(10);
    for &b in t.params()[1].as_slice() {
        assert!((b - expected).abs() < 1e-15);
    }
}

#[test]
fn non_finite_gradient_aborts_with_location() {
    struct AlwaysNan;
    impl TrainingTask for AlwaysNan {
        fn name(&self) -> &str {
            "nan"
        }
        fn init_params(&self) -> Vec<ParamTensor> {
            vec![ParamTensor::zeros(1, 2), ParamTensor::zeros(2, 2)]
        }
        fn num_train_batches(&self) -> usize {
            1
        }
        fn loss(&self, _: &[ParamTensor], _: usize) -> f64 {
            1.0
        }
        fn loss_and_grad(&self, _: &[ParamTensor], _: usize) -> LossGrad {
            let mut g = ParamTensor::zeros(2, 2);
            g.set(0, 1, f64::NAN);
            LossGrad {
                loss: 1.0,
                grads: vec![ParamTensor::zeros(1, 2), g],
            }
        }
        fn val_loss(&self, _: &[ParamTensor]) -> f64 {
            1.0
        }
    }
    let err = run(&config(Mode::FrugalStatic, 3), &AlwaysNan).unwrap_err();
    assert_eq!(
        err,
        Error::NonFiniteLoss {
            step: 0,
            param: Some(1),
            what: "gradient"
        }
    );
}

#[test]
fn invalid_config_is_rejected() {
    let task = LinearToy::new(0);
    let mut cfg = config(Mode::FrugalStatic, 10);
    cfg.t.gamma_increase = 1.0;
    assert!(matches!(
        Trainer::new(cfg, &task).err(),
        Some(Error::InvalidHyper {
            name: "gamma_increase",
            ..
        })
    ));
}

#[test]
fn mode_names_round_trip() {
    for m in Mode::ALL {
        assert_eq!(m.as_str().parse::<Mode>().unwrap(), m);
    }
    assert!("adam".parse::<Mode>().is_err());
}
