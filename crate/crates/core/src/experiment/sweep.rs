use std::path::{Path, PathBuf};

use super::config::{ExperimentConfig, SweepAxis};
use super::output::{fmt_f64, fmt_opt, write_csv};
use super::runner::{prepare, run_trials, score, TrialRecord};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};

pub const SWEEP_CSV: &str = "sweep.csv";

pub const SWEEP_COLUMNS: [&str; 10] = [
    "axis",
    "value",
    "estimator",
    "trial",
    "min_fs",
    "a2_violation_rate",
    "deviation_ratio_logsum",
    "mape",
    "mse",
    "nl_nsw",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub estimator: String,
    pub trial: u32,
    pub min_fs: f64,
    pub a2_violation_rate: Option<f64>,
    pub deviation_ratio_logsum: Option<f64>,
    pub mape: Option<f64>,
    pub mse: f64,
    pub nl_nsw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
}

fn row(value: f64, rec: &TrialRecord) -> SweepRow {
    let f = &rec.fairness;
    SweepRow {
        value,
        estimator: rec.estimator.clone(),
        trial: rec.trial,
        min_fs: rec.fidelity.min_fs,
        a2_violation_rate: f.by_epsilon.first().and_then(|r| r.a2_violation_rate),
        deviation_ratio_logsum: f.deviation_ratio_logsum,
        mape: f.mape,
        mse: f.mse,
        nl_nsw: f.nl_nsw,
    }
}

/// Runs the configured sweep. Budget and alpha sweeps rerun the estimators at
/// each value and score at the first `ε₁` of the grid; an `ε₁` sweep runs once
/// and rescores at each value. Alpha sweeps only vary the GAE estimators.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<SweepReport> {
    cfg.validate()?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| {
        Error::Config(vec![
            "sweep: section is required for the sweep command".into()
        ])
    })?;
    let mut prepared = prepare(cfg)?;
    let mut rows = Vec::new();
    match sweep.axis {
        SweepAxis::Budget | SweepAxis::Alpha => {
            prepared.context.epsilon1_grid.truncate(1);
            for &value in &sweep.values {
                let estimators: Vec<EstimatorConfig> = match sweep.axis {
                    SweepAxis::Budget => cfg
                        .estimators
                        .iter()
                        .map(|e| EstimatorConfig {
                            m_budget: value as u64,
                            ..e.clone()
                        })
                        .collect(),
                    _ => cfg
                        .estimators
                        .iter()
                        .filter(|e| e.kind == EstimatorKind::Gae)
                        .map(|e| EstimatorConfig {
                            alpha: value,
                            label: e.label.as_ref().map(|l| format!("{l}(alpha={value})")),
                            ..e.clone()
                        })
                        .collect(),
                };
                let records = run_trials(&prepared, &estimators, cfg.trials, cfg.seed)?;
                rows.extend(records.iter().map(|r| row(value, r)));
            }
        }
        SweepAxis::Epsilon1 => {
            let records = run_trials(&prepared, &cfg.estimators, cfg.trials, cfg.seed)?;
            for &value in &sweep.values {
                prepared.context.epsilon1_grid = vec![value];
                for rec in &records {
                    let (_, fairness) =
                        score(&prepared, &cfg.estimators[rec.estimator_index], &rec.result)?;
                    rows.push(row(
                        value,
                        &TrialRecord {
                            fairness,
                            ..rec.clone()
                        },
                    ));
                }
            }
        }
    }
    Ok(SweepReport {
        axis: sweep.axis,
        rows,
    })
}

pub fn write_sweep(report: &SweepReport, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let rows: Vec<Vec<String>> = report
        .rows
        .iter()
        .map(|r| {
            vec![
                report.axis.as_str().to_string(),
                fmt_f64(r.value),
                r.estimator.clone(),
                r.trial.to_string(),
                fmt_f64(r.min_fs),
                fmt_opt(r.a2_violation_rate),
                fmt_opt(r.deviation_ratio_logsum),
                fmt_opt(r.mape),
                fmt_f64(r.mse),
                fmt_opt(r.nl_nsw),
            ]
        })
        .collect();
    let path = dir.join(SWEEP_CSV);
    write_csv(&path, &SWEEP_COLUMNS, &rows)?;
    Ok(path)
}
