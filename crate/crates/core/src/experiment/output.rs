//! CSV and JSON emission. Nothing time- or host-dependent is written, so
//! identical runs produce byte-identical files.

use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use super::runner::{metric_names, scalar_metrics, RunReport, TrialRecord};
use crate::error::{Error, Result};
use crate::estimators::TraceRecord;

pub const RESULTS_CSV: &str = "results.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const FAIRNESS_CSV: &str = "fairness.csv";
pub const PHI_CSV: &str = "phi.csv";
pub const REPORT_JSON: &str = "report.json";

/// Shortest round-trip decimal; `inf`, `-inf`, `NaN` for non-finite values.
pub fn fmt_f64(x: f64) -> String {
    format!("{x}")
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// JSON number, or a string for values JSON cannot represent.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else {
        json!(fmt_f64(x))
    }
}

fn nums(xs: &[f64]) -> Value {
    Value::Array(xs.iter().map(|&x| num(x)).collect())
}

fn opt(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{}: {other:?}", path.display())),
    }
}

pub(crate) fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every output file of an `estimate` run into `dir`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();

    let metrics = metric_names();
    let mut header = vec!["estimator", "trial"];
    header.extend(&metrics);
    let mut rows = Vec::new();
    for (e, est) in report.config.estimators.iter().enumerate() {
        let name = est.name();
        for rec in report.records.iter().filter(|r| r.estimator_index == e) {
            let mut row = vec![name.clone(), rec.trial.to_string()];
            row.extend(scalar_metrics(rec).into_iter().map(|(_, v)| fmt_opt(v)));
            rows.push(row);
        }
        let mut row = vec![name.clone(), "mean".to_string()];
        for metric in &metrics {
            let agg = report
                .aggregates
                .iter()
                .find(|a| a.estimator == name && a.metric == *metric);
            row.push(fmt_opt(agg.and_then(|a| a.mean)));
        }
        rows.push(row);
    }
    let path = dir.join(RESULTS_CSV);
    write_csv(&path, &header, &rows)?;
    written.push(path);

    let rows: Vec<Vec<String>> = report
        .aggregates
        .iter()
        .map(|a| {
            vec![
                a.estimator.clone(),
                a.metric.to_string(),
                fmt_opt(a.mean),
                fmt_opt(a.std_err),
                a.count.to_string(),
                a.trials.to_string(),
            ]
        })
        .collect();
    let path = dir.join(SUMMARY_CSV);
    write_csv(
        &path,
        &["estimator", "metric", "mean", "std_err", "count", "trials"],
        &rows,
    )?;
    written.push(path);

    let mut rows = Vec::new();
    for rec in &report.records {
        for row in &rec.fairness.by_epsilon {
            rows.push(vec![
                rec.estimator.clone(),
                rec.trial.to_string(),
                fmt_f64(row.epsilon1),
                fmt_f64(row.delta_independent),
                fmt_f64(row.delta_dependent),
                fmt_f64(row.delta_per_player),
                fmt_f64(row.delta_union),
                row.a1_violations.to_string(),
                fmt_opt(row.a2_violation_rate),
                fmt_opt(row.a3_violation_rate),
            ]);
        }
    }
    let path = dir.join(FAIRNESS_CSV);
    write_csv(
        &path,
        &[
            "estimator",
            "trial",
            "epsilon1",
            "delta_independent",
            "delta_dependent",
            "delta_per_player",
            "delta_union",
            "a1_violations",
            "a2_violation_rate",
            "a3_violation_rate",
        ],
        &rows,
    )?;
    written.push(path);

    let mut rows = Vec::new();
    for rec in &report.records {
        for i in 0..rec.result.phi_hat.len() {
            rows.push(vec![
                rec.estimator.clone(),
                rec.trial.to_string(),
                i.to_string(),
                fmt_f64(report.phi_ref[i]),
                fmt_f64(rec.result.phi_hat[i]),
                rec.result.m_per_player[i].to_string(),
                fmt_f64(rec.fidelity.fs[i]),
                fmt_f64(rec.fidelity.invariability[i]),
            ]);
        }
    }
    let path = dir.join(PHI_CSV);
    write_csv(
        &path,
        &[
            "estimator",
            "trial",
            "player",
            "phi_ref",
            "phi_hat",
            "m",
            "fs",
            "invariability",
        ],
        &rows,
    )?;
    written.push(path);

    let path = dir.join(REPORT_JSON);
    let mut text = serde_json::to_string_pretty(&report_json(report))
        .map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(written)
}

fn trace_json(trace: &[TraceRecord]) -> Value {
    Value::Array(
        trace
            .iter()
            .map(|t| {
                json!({
                    "step": t.step,
                    "phase": t.phase,
                    "player": t.player,
                    "cardinality": t.cardinality,
                    "predecessors": t.predecessors,
                    "sigma": num(t.sigma),
                    "weight": num(t.weight),
                    "fs_after": opt(t.fs_after),
                })
            })
            .collect(),
    )
}

fn record_json(rec: &TrialRecord) -> Value {
    let f = &rec.fairness;
    let mut v = json!({
        "estimator": rec.estimator,
        "trial": rec.trial,
        "phi_hat": nums(&rec.result.phi_hat),
        "m_per_player": rec.result.m_per_player,
        "marginal_samples": rec.result.marginal_samples,
        "permutations_drawn": rec.result.permutations_drawn,
        "proposal": {
            "source": rec.result.proposal.source,
            "alpha": num(rec.result.proposal.alpha),
            "theta": rec.result.proposal.theta.iter().map(|t| nums(t)).collect::<Vec<_>>(),
        },
        "fidelity": {
            "fs": nums(&rec.fidelity.fs),
            "invariability": nums(&rec.fidelity.invariability),
            "min_fs": num(rec.fidelity.min_fs),
            "xi": num(rec.fidelity.xi),
            "formula": rec.fidelity.formula,
        },
        "fairness": {
            "by_epsilon": f.by_epsilon.iter().map(|r| json!({
                "epsilon1": num(r.epsilon1),
                "delta_independent": num(r.delta_independent),
                "delta_dependent": num(r.delta_dependent),
                "delta_per_player": num(r.delta_per_player),
                "delta_union": num(r.delta_union),
                "a1_violations": r.a1_violations,
                "a2_violation_rate": opt(r.a2_violation_rate),
                "a3_violation_rate": opt(r.a3_violation_rate),
            })).collect::<Vec<_>>(),
            "a2_pairs": f.a2_pairs,
            "a2_details": f.a2_details.as_ref().map(|d| d.pairs.iter().map(|p| json!({
                "i": p.i,
                "j": p.j,
                "deviation": num(p.deviation),
                "threshold": num(p.threshold),
                "violated": p.violated,
                "rho": opt(p.rho),
            })).collect::<Vec<_>>()),
            "deviation_ratio_logsum": opt(f.deviation_ratio_logsum),
            "infinite_rho": f.infinite_rho,
            "eps_abs": opt(f.eps_abs),
            "nl_nsw": opt(f.nl_nsw),
            "nl_nsw_excluded": f.nl_nsw_excluded,
            "n_inv": f.n_inv,
            "eps_inv": num(f.eps_inv),
            "mape": opt(f.mape),
            "mse": num(f.mse),
        },
    });
    if let Some(trace) = &rec.result.trace {
        v["trace"] = trace_json(trace);
    }
    v
}

pub fn report_json(report: &RunReport) -> Value {
    json!({
        "tool": "shapfair",
        "version": env!("CARGO_PKG_VERSION"),
        "config": report.config,
        "game": report.game_label,
        "reference": {"kind": report.reference, "phi": nums(&report.phi_ref)},
        "runs": report.records.iter().map(record_json).collect::<Vec<_>>(),
        "aggregates": report.aggregates.iter().map(|a| json!({
            "estimator": a.estimator,
            "metric": a.metric,
            "mean": opt(a.mean),
            "std_err": opt(a.std_err),
            "count": a.count,
            "trials": a.trials,
        })).collect::<Vec<_>>(),
    })
}
