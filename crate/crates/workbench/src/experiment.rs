//! Running configured experiments.

use adafrugal::engine::{MetricsTrace, Mode, Trainer};
use adafrugal::projectors::ProjectorSnapshot;
use adafrugal::TrainingTask;
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::report::{summarize, Summary};
use crate::tasks::generate_task;

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub trace: MetricsTrace,
    pub projectors: Vec<ProjectorSnapshot>,
}

/// One run of the config's own mode; the task data and the engine share `seed`.
pub fn run_single(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    let task = generate_task(cfg.task_name()?, seed);
    run_cell(cfg, cfg.mode()?, seed, task.as_ref())
}

pub fn run_cell(cfg: &ExperimentConfig, mode: Mode, seed: u64, task: &dyn TrainingTask) -> Result<RunOutput> {
    let engine = cfg.engine_config(mode, seed)?;
    let mut trainer = Trainer::new(engine, task)?.record_projectors();
    trainer.run_to_end()?;
    let projectors = trainer.projector_history().unwrap_or_default().to_vec();
    Ok(RunOutput {
        trace: trainer.into_trace(),
        projectors,
    })
}

#[derive(Debug, Clone)]
pub struct Comparison {
    /// `(mode, seed, trace)` in mode-major, seed-minor order.
    pub runs: Vec<(Mode, u64, MetricsTrace)>,
    pub summary: Summary,
}

/// Runs every `(mode, seed)` cell. Cells for one seed share a single task
/// instance; cells run in parallel but results come back in a fixed order.
pub fn compare(cfg: &ExperimentConfig, modes: &[Mode], seeds: &[u64]) -> Result<Comparison> {
    let name = cfg.task_name()?;
    let tasks: Vec<Box<dyn TrainingTask>> = seeds.iter().map(|&s| generate_task(name, s)).collect();
    let cells: Vec<(Mode, usize)> = modes
        .iter()
        .flat_map(|&m| (0..seeds.len()).map(move |i| (m, i)))
        .collect();
    let runs = cells
        .par_iter()
        .map(|&(mode, i)| {
            let out = run_cell(cfg, mode, seeds[i], tasks[i].as_ref())?;
            Ok((mode, seeds[i], out.trace))
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = summarize(&runs)?;
    Ok(Comparison { runs, summary })
}
