use rayon::prelude::*;

use super::config::{load_phi, ExperimentConfig, ReferenceSpec};
use crate::error::{Error, Result};
use crate::estimators::{run_estimator, EstimationResult, EstimatorConfig, SeedKey};
use crate::exact::{ExactOracle, SUBSET_MAX_PLAYERS};
use crate::fairness::{
    fairness_report, fidelity_report, FairnessContext, FairnessReport, FidelityReport,
};
use crate::game::CooperativeGame;

/// A game together with everything needed to score estimates on it.
pub struct PreparedGame {
    pub game: CooperativeGame,
    pub context: FairnessContext,
    pub reference: &'static str,
}

/// Builds the game, its reference values and the axiom pairs.
///
/// Symmetric pairs come from the clone structure when the game has one,
/// otherwise from brute-force clause checks when the exact oracle is in range.
pub fn prepare(cfg: &ExperimentConfig) -> Result<PreparedGame> {
    let game = cfg.game.build()?;
    let n = game.n();
    let oracle = match &cfg.reference {
        ReferenceSpec::Exact => {
            if n > SUBSET_MAX_PLAYERS {
                return Err(Error::Capacity {
                    what: "exact reference",
                    max: SUBSET_MAX_PLAYERS,
                    n,
                });
            }
            Some(ExactOracle::from_game(&game)?)
        }
        ReferenceSpec::File(_) => None,
    };
    let phi_ref = match (&cfg.reference, &oracle) {
        (ReferenceSpec::File(path), _) => {
            let phi = load_phi(path)?;
            if phi.len() != n {
                return Err(Error::Format(format!(
                    "{}: reference has {} entries, game has {n} players",
                    path.display(),
                    phi.len()
                )));
            }
            phi
        }
        (ReferenceSpec::Exact, Some(o)) => o.shapley_by_subsets(),
        (ReferenceSpec::Exact, None) => unreachable!("oracle is built for exact references"),
    };
    let symmetric_pairs = if !game.clone_pairs().is_empty() {
        game.clone_pairs().to_vec()
    } else {
        oracle
            .as_ref()
            .map(|o| o.symmetric_pairs())
            .unwrap_or_default()
    };
    let desirable_pairs = oracle
        .as_ref()
        .map(|o| o.desirable_pairs())
        .unwrap_or_default();
    Ok(PreparedGame {
        game,
        context: FairnessContext {
            phi_ref,
            symmetric_pairs,
            desirable_pairs,
            epsilon1_grid: cfg.epsilon1_grid.clone(),
        },
        reference: match cfg.reference {
            ReferenceSpec::Exact => "exact",
            ReferenceSpec::File(_) => "file",
        },
    })
}

/// One estimator run scored against the reference.
#[derive(Debug, Clone)]
pub struct TrialRecord {
    pub estimator: String,
    pub estimator_index: usize,
    pub trial: u32,
    pub result: EstimationResult,
    pub fidelity: FidelityReport,
    pub fairness: FairnessReport,
}

pub fn score(
    prepared: &PreparedGame,
    est: &EstimatorConfig,
    result: &EstimationResult,
) -> Result<(FidelityReport, FairnessReport)> {
    let fidelity = fidelity_report(result, est.xi, est.fs_formula)?;
    let fairness = fairness_report(&prepared.context, &result.phi_hat, &fidelity)?;
    Ok((fidelity, fairness))
}

/// Runs every estimator for every trial in parallel; records come back
/// ordered by estimator, then trial. Trial `t` uses streams `(seed, t)` for
/// every estimator.
pub fn run_trials(
    prepared: &PreparedGame,
    estimators: &[EstimatorConfig],
    trials: u32,
    seed: u64,
) -> Result<Vec<TrialRecord>> {
    let jobs: Vec<(usize, u32)> = (0..estimators.len())
        .flat_map(|e| (0..trials).map(move |t| (e, t)))
        .collect();
    jobs.par_iter()
        .map(|&(e, t)| {
            let est = &estimators[e];
            let result = run_estimator(&prepared.game, est, SeedKey::new(seed, t))?;
            let (fidelity, fairness) = score(prepared, est, &result)?;
            Ok(TrialRecord {
                estimator: est.name(),
                estimator_index: e,
                trial: t,
                result,
                fidelity,
                fairness,
            })
        })
        .collect()
}

/// Per-record scalar metrics, in CSV column order. `None` marks an undefined value.
pub fn scalar_metrics(rec: &TrialRecord) -> Vec<(&'static str, Option<f64>)> {
    let f = &rec.fairness;
    let first = f.by_epsilon.first();
    vec![
        ("min_fs", Some(rec.fidelity.min_fs)),
        ("nl_nsw", f.nl_nsw),
        ("nl_nsw_excluded", Some(f.nl_nsw_excluded as f64)),
        ("delta_independent", first.map(|r| r.delta_independent)),
        ("delta_dependent", first.map(|r| r.delta_dependent)),
        ("a1_violations", first.map(|r| r.a1_violations as f64)),
        ("a2_violation_rate", first.and_then(|r| r.a2_violation_rate)),
        ("a3_violation_rate", first.and_then(|r| r.a3_violation_rate)),
        ("deviation_ratio_logsum", f.deviation_ratio_logsum),
        ("infinite_rho", Some(f.infinite_rho as f64)),
        ("eps_abs", f.eps_abs),
        ("n_inv", Some(f.n_inv as f64)),
        ("eps_inv", Some(f.eps_inv)),
        ("mape", f.mape),
        ("mse", Some(f.mse)),
        ("marginal_samples", Some(rec.result.marginal_samples as f64)),
        (
            "permutations_drawn",
            Some(rec.result.permutations_drawn as f64),
        ),
    ]
}

pub fn metric_names() -> Vec<&'static str> {
    vec![
        "min_fs",
        "nl_nsw",
        "nl_nsw_excluded",
        "delta_independent",
        "delta_dependent",
        "a1_violations",
        "a2_violation_rate",
        "a3_violation_rate",
        "deviation_ratio_logsum",
        "infinite_rho",
        "eps_abs",
        "n_inv",
        "eps_inv",
        "mape",
        "mse",
        "marginal_samples",
        "permutations_drawn",
    ]
}

/// Mean and standard error (`sample std / √count`) over the finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregate {
    pub estimator: String,
    pub metric: &'static str,
    pub mean: Option<f64>,
    pub std_err: Option<f64>,
    pub count: usize,
    pub trials: usize,
}

pub fn mean_and_std_err(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let k = values.len();
    if k == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / k as f64;
    if k < 2 {
        return (Some(mean), None);
    }
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (k - 1) as f64;
    (Some(mean), Some((var / k as f64).sqrt()))
}

pub fn aggregate(records: &[TrialRecord], estimators: &[EstimatorConfig]) -> Vec<Aggregate> {
    let mut out = Vec::new();
    for (e, est) in estimators.iter().enumerate() {
        let recs: Vec<&TrialRecord> = records.iter().filter(|r| r.estimator_index == e).collect();
        let per_record: Vec<Vec<(&'static str, Option<f64>)>> =
            recs.iter().map(|r| scalar_metrics(r)).collect();
        for (k, metric) in metric_names().into_iter().enumerate() {
            let values: Vec<f64> = per_record
                .iter()
                .filter_map(|m| m[k].1)
                .filter(|v| v.is_finite())
                .collect();
            let (mean, std_err) = mean_and_std_err(&values);
            out.push(Aggregate {
                estimator: est.name(),
                metric,
                mean,
                std_err,
                count: values.len(),
                trials: recs.len(),
            });
        }
    }
    out
}

/// Everything produced by one `estimate` run.
pub struct RunReport {
    pub config: ExperimentConfig,
    pub game_label: String,
    pub reference: &'static str,
    pub phi_ref: Vec<f64>,
    pub records: Vec<TrialRecord>,
    pub aggregates: Vec<Aggregate>,
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport> {
    cfg.validate()?;
    let prepared = prepare(cfg)?;
    let records = run_trials(&prepared, &cfg.estimators, cfg.trials, cfg.seed)?;
    let aggregates = aggregate(&records, &cfg.estimators);
    Ok(RunReport {
        config: cfg.clone(),
        game_label: prepared.game.label().to_string(),
        reference: prepared.reference,
        phi_ref: prepared.context.phi_ref.clone(),
        records,
        aggregates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::Path;

    fn glove_cfg(trials: u32) -> ExperimentConfig {
        ExperimentConfig::from_json(
            &format!(
                r#"{{"game":{{"builtin":{{"family":"glove","left":[0,1],"right":[2]}}}},
                    "estimators":[{{"kind":"mc","m_bootstrap":5,"m_budget":60}},{{"kind":"gae","m_bootstrap":5,"m_budget":60}}],
                    "trials":{trials},"seed":3}}"#
            ),
            Path::new("."),
        )
        .unwrap()
    }

    #[test]
    fn records_are_ordered_and_counted() {
        let report = run_experiment(&glove_cfg(4)).unwrap();
        let order: Vec<(usize, u32)> = report
            .records
            .iter()
            .map(|r| (r.estimator_index, r.trial))
            .collect();
        assert_eq!(
            order,
            vec![
                (0, 0),
                (0, 1),
                (0, 2),
                (0, 3),
                (1, 0),
                (1, 1),
                (1, 2),
                (1, 3)
            ]
        );
        let agg = report
            .aggregates
            .iter()
            .find(|a| a.estimator == "mc" && a.metric == "mse")
            .unwrap();
        assert_eq!((agg.count, agg.trials), (4, 4));
    }

    #[test]
    fn duplicated_games_use_clone_pairs() {
        let cfg = ExperimentConfig::from_json(
            r#"{"game":{"builtin":{"family":"duplicated","base":{"family":"random","n":3,"seed":1}}},
                "estimators":[{"kind":"mc","m_bootstrap":2,"m_budget":12}]}"#,
            Path::new("."),
        )
        .unwrap();
        let p = prepare(&cfg).unwrap();
        assert_eq!(p.context.symmetric_pairs, vec![(0, 3), (1, 4), (2, 5)]);
    }

    #[test]
    fn exact_reference_needs_oracle_capacity() {
        let cfg = ExperimentConfig::from_json(
            r#"{"game":{"builtin":{"family":"majority","n":21}},"estimators":[{"kind":"mc"}]}"#,
            Path::new("."),
        )
        .unwrap();
        assert!(matches!(prepare(&cfg), Err(Error::Capacity { .. })));
    }

    #[test]
    fn std_err_is_sample_std_over_root_count() {
        let (m, se) = mean_and_std_err(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(m, Some(2.5));
        assert!((se.unwrap() - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_and_std_err(&[2.0]), (Some(2.0), None));
    }
}
