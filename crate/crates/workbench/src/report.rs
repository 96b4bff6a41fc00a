//! CSV and JSON outputs.

use std::io::{Read, Write};
use std::path::Path;

use adafrugal::engine::{redefinition_count, MetricsRow, MetricsTrace, Mode};
use adafrugal::memory::BYTES_PER_SCALAR;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WorkbenchError};

pub const METRICS_HEADER: &str = "step,train_loss,val_loss,rho,t_current,redefined,state_scalars";

pub fn write_metrics<W: Write>(trace: &MetricsTrace, out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(METRICS_HEADER.split(','))?;
    for row in &trace.rows {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| WorkbenchError::io("<metrics>", e))?;
    Ok(())
}

pub fn metrics_to_string(trace: &MetricsTrace) -> Result<String> {
    let mut buf = Vec::new();
    write_metrics(trace, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is utf-8"))
}

pub fn read_metrics<R: Read>(input: R) -> Result<MetricsTrace> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != METRICS_HEADER {
        return Err(WorkbenchError::config("metrics header", header.join(",")));
    }
    let rows = r
        .deserialize::<MetricsRow>()
        .collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(MetricsTrace { rows })
}

pub fn save_metrics(trace: &MetricsTrace, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| WorkbenchError::io(path, e))?;
    write_metrics(trace, std::io::BufWriter::new(file))
}

pub fn load_metrics(path: &Path) -> Result<MetricsTrace> {
    let file = std::fs::File::open(path).map_err(|e| WorkbenchError::io(path, e))?;
    read_metrics(std::io::BufReader::new(file))
}

pub fn save_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| WorkbenchError::io(path, e))
}

/// Final numbers of one `(mode, seed)` run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub mode: Mode,
    pub seed: u64,
    pub final_train_loss: f64,
    pub final_val_loss: Option<f64>,
    pub redefinitions: usize,
    pub final_state_bytes: u64,
}

impl CellResult {
    pub fn from_trace(mode: Mode, seed: u64, trace: &MetricsTrace) -> Result<Self> {
        let last = trace.last().ok_or(WorkbenchError::EmptyInput)?;
        Ok(Self {
            mode,
            seed,
            final_train_loss: last.train_loss,
            final_val_loss: trace.final_val_loss(),
            redefinitions: redefinition_count(trace),
            final_state_bytes: last.state_scalars * BYTES_PER_SCALAR,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSummary {
    pub mode: Mode,
    pub seeds: usize,
    pub median_final_train_loss: f64,
    pub median_final_val_loss: Option<f64>,
    pub median_redefinitions: f64,
    /// Redefinitions relative to the FRUGAL-Static median; absent when that
    /// mode was not run.
    pub normalized_redefinitions: Option<f64>,
    pub median_final_state_bytes: f64,
}

/// Whether median final train losses follow AdamW <= FRUGAL-Static <=
/// SignSGD. Seed-sensitive at desk scale, so it is reported, not enforced.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrderingCheck {
    pub adamw_le_frugal: bool,
    pub frugal_le_signsgd: bool,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub modes: Vec<ModeSummary>,
    pub ordering: Option<OrderingCheck>,
    pub cells: Vec<CellResult>,
}

impl Summary {
    pub fn mode(&self, mode: Mode) -> Option<&ModeSummary> {
        self.modes.iter().find(|m| m.mode == mode)
    }
}

/// Median of a non-empty slice; even lengths average the middle pair.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Groups runs by mode (in first-appearance order) and reduces each group.
pub fn summarize(runs: &[(Mode, u64, MetricsTrace)]) -> Result<Summary> {
    if runs.is_empty() {
        return Err(WorkbenchError::EmptyInput);
    }
    let cells = runs
        .iter()
        .map(|(mode, seed, trace)| CellResult::from_trace(*mode, *seed, trace))
        .collect::<Result<Vec<_>>>()?;

    let mut order: Vec<Mode> = Vec::new();
    for c in &cells {
        if !order.contains(&c.mode) {
            order.push(c.mode);
        }
    }
    let mut modes: Vec<ModeSummary> = order
        .iter()
        .map(|&mode| {
            let group: Vec<&CellResult> = cells.iter().filter(|c| c.mode == mode).collect();
            let col = |f: &dyn Fn(&CellResult) -> f64| median(&group.iter().map(|c| f(c)).collect::<Vec<_>>());
            let vals: Vec<f64> = group.iter().filter_map(|c| c.final_val_loss).collect();
            ModeSummary {
                mode,
                seeds: group.len(),
                median_final_train_loss: col(&|c| c.final_train_loss),
                median_final_val_loss: (vals.len() == group.len()).then(|| median(&vals)),
                median_redefinitions: col(&|c| c.redefinitions as f64),
                normalized_redefinitions: None,
                median_final_state_bytes: col(&|c| c.final_state_bytes as f64),
            }
        })
        .collect();

    let baseline = modes
        .iter()
        .find(|m| m.mode == Mode::FrugalStatic)
        .map(|m| m.median_redefinitions);
    if let Some(base) = baseline.filter(|b| *b > 0.0) {
        for m in &mut modes {
            m.normalized_redefinitions = Some(m.median_redefinitions / base);
        }
    }

    let loss = |mode| modes.iter().find(|m| m.mode == mode).map(|m| m.median_final_train_loss);
    let ordering = match (loss(Mode::AdamwFull), loss(Mode::FrugalStatic), loss(Mode::SignsgdOnly)) {
        (Some(a), Some(f), Some(s)) => Some(OrderingCheck {
            adamw_le_frugal: a <= f,
            frugal_le_signsgd: f <= s,
            holds: a <= f && f <= s,
        }),
        _ => None,
    };
    Ok(Summary { modes, ordering, cells })
}

/// One line of comparison.csv. Per-seed lines carry the seed; the per-mode
/// median line has `seed = "median"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub mode: String,
    pub seed: String,
    pub final_train_loss: f64,
    pub final_val_loss: Option<f64>,
    pub redefinitions: f64,
    pub final_state_bytes: f64,
}

pub fn comparison_rows(summary: &Summary) -> Vec<ComparisonRow> {
    let mut rows = Vec::new();
    for m in &summary.modes {
        for c in summary.cells.iter().filter(|c| c.mode == m.mode) {
            rows.push(ComparisonRow {
                mode: c.mode.to_string(),
                seed: c.seed.to_string(),
                final_train_loss: c.final_train_loss,
                final_val_loss: c.final_val_loss,
                redefinitions: c.redefinitions as f64,
                final_state_bytes: c.final_state_bytes as f64,
            });
        }
        rows.push(ComparisonRow {
            mode: m.mode.to_string(),
            seed: "median".into(),
            final_train_loss: m.median_final_train_loss,
            final_val_loss: m.median_final_val_loss,
            redefinitions: m.median_redefinitions,
            final_state_bytes: m.median_final_state_bytes,
        });
    }
    rows
}

pub fn save_comparison(summary: &Summary, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| WorkbenchError::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    for row in comparison_rows(summary) {
        w.serialize(row)?;
    }
    w.flush().map_err(|e| WorkbenchError::io(path, e))?;
    Ok(())
}
