use std::path::Path;
use std::process::{Command, Output};

use adafrugal::engine::{redefinition_count, Mode};
use adafrugal::memory::{count_states, ModelShape, BYTES_PER_SCALAR};
use adafrugal::projectors::ProjectorSnapshot;
use adafrugal_workbench::experiment::compare;
use adafrugal_workbench::report::{load_metrics, metrics_to_string, read_metrics, Summary};
use adafrugal_workbench::ExperimentConfig;
use proptest::prelude::*;

fn bench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adafrugal-bench"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("cfg.toml");
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_with_shipped_config_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let text = ExperimentConfig::example_text(Mode::AdaFrugalCombined);
    let cfg = ExperimentConfig::parse(text).unwrap();
    let path = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let o = bench(&[
        "run",
        "--config",
        &path,
        "--out",
        out.to_str().unwrap(),
        "--dump-projectors",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let trace = load_metrics(&out.join("metrics.csv")).unwrap();
    assert_eq!(trace.len() as u64, cfg.total_steps);
    trace.validate().unwrap();

    let summary: Summary = serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.modes[0].median_redefinitions, redefinition_count(&trace) as f64);

    let snaps: Vec<ProjectorSnapshot> =
        serde_json::from_str(&std::fs::read_to_string(out.join("projectors.json")).unwrap()).unwrap();
    let rebuild_steps: Vec<u64> = trace.rows.iter().filter(|r| r.redefined).map(|r| r.step).collect();
    let mut snap_steps: Vec<u64> = snaps.iter().map(|s| s.step).collect();
    snap_steps.dedup();
    assert_eq!(snap_steps, rebuild_steps);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "gamma_increase = 0.9\n");
    let o = bench(&["run", "--config", &bad]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("gamma_increase"));

    let o = bench(&["run", "--task", "imagenet", "--steps", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("imagenet"));

    assert_eq!(bench(&["fly"]).status.code(), Some(1));

    // A learning rate this large overflows the quadratic within a few steps.
    let out = dir.path().join("div");
    let diverge = write_config(
        dir.path(),
        "task = \"quadratic_bowl\"\nmode = \"signsgd-only\"\nlr_full = 1e300\ntotal_steps = 50\n",
    );
    let o = bench(&["run", "--config", &diverge, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut files = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = bench(&["run", "--steps", "300", "--seed", "5", "--out", out.to_str().unwrap()]);
        assert!(o.status.success());
        files.push(std::fs::read(out.join("metrics.csv")).unwrap());
    }
    assert_eq!(files[0], files[1]);
}

#[test]
fn compare_single_seed_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let o = bench(&[
            "compare",
            "--steps",
            "200",
            "--seeds",
            "3",
            "--modes",
            "adafrugal-combined,frugal-static",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((
            std::fs::read(out.join("comparison.csv")).unwrap(),
            std::fs::read(out.join("summary.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn schedule_dump_and_memplan_outputs() {
    let o = bench(&["schedule-dump", "--at", "0,100000,200000"]);
    assert!(o.status.success());
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(
        text,
        "step,rho,t_current\n0,0.25,100.0\n100000,0.15,800.0\n200000,0.05,800.0\n"
    );

    let o = bench(&["memplan"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["param_count"], 134_105_856u64);
    assert!(v["extrapolation"].is_null());
}

#[test]
fn dyn_rho_final_state_matches_memory_model_at_rho_end() {
    let cfg = ExperimentConfig {
        task: "mlp_regression".into(),
        total_steps: 600,
        rho_decay_steps: Some(400),
        ..ExperimentConfig::default()
    };
    let cmp = compare(&cfg, &[Mode::AdaFrugalDynRho], &[0]).unwrap();
    let shape = ModelShape::all_blockable(&[(16, 32), (1, 32), (32, 1), (1, 1)]);
    let expect = count_states(&shape, cfg.rho_end).frugal_state_scalars * BYTES_PER_SCALAR;
    assert_eq!(cmp.summary.modes[0].median_final_state_bytes, expect as f64);
}

#[test]
fn dyn_t_rebuilds_less_than_static_once_validation_plateaus() {
    // Without decay the separable training set drives the weights to grow
    // forever and validation loss never settles.
    let cfg = ExperimentConfig {
        task: "logistic_synth".into(),
        lr_full: 0.05,
        weight_decay: 0.1,
        ..ExperimentConfig::default()
    };
    let cmp = compare(&cfg, &[Mode::FrugalStatic, Mode::AdaFrugalDynT], &[0]).unwrap();
    let dyn_t = cmp.summary.mode(Mode::AdaFrugalDynT).unwrap();
    let norm = dyn_t.normalized_redefinitions.unwrap();
    assert!(norm < 1.0, "normalized redefinitions {norm}");
    assert_eq!(
        cmp.summary.mode(Mode::FrugalStatic).unwrap().normalized_redefinitions,
        Some(1.0)
    );
}

fn arb_row(step: u64) -> impl Strategy<Value = adafrugal::MetricsRow> {
    (
        -1e6f64..1e6,
        proptest::option::of(0.0f64..1e6),
        0.0f64..=1.0,
        1.0f64..1e4,
        any::<bool>(),
        0u64..1_000_000,
    )
        .prop_map(
            move |(train_loss, val_loss, rho, t_current, redefined, state_scalars)| adafrugal::MetricsRow {
                step,
                train_loss,
                val_loss,
                rho,
                t_current,
                redefined,
                state_scalars,
            },
        )
}

fn arb_trace() -> impl Strategy<Value = adafrugal::MetricsTrace> {
    (0usize..30).prop_flat_map(|n| {
        (0..n as u64)
            .map(|s| arb_row(s * 3))
            .collect::<Vec<_>>()
            .prop_map(|rows| adafrugal::MetricsTrace { rows })
    })
}

proptest! {
    #[test]
    fn metrics_csv_round_trips(trace in arb_trace()) {
        let text = metrics_to_string(&trace).unwrap();
        let back = read_metrics(text.as_bytes()).unwrap();
        prop_assert_eq!(&back, &trace);
        prop_assert!(back.validate().is_ok());
    }
}
