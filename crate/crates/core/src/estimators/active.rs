use crate::error::{Error, Result};
use crate::game::CooperativeGame;
use crate::proposal::{
    map_theta, mle_theta, mle_theta_shared, ProposalParams, ProposalSource, StratumStats,
};
use crate::sampler::{
    importance_weight, predecessors_in, sample_placement, sample_uniform_permutation,
    CardinalityDist,
};

use super::allocation::delta_p;
use super::{
    bootstrap, finish, fs_or_none, BootstrapOutcome, EstimationResult, EstimatorConfig,
    EstimatorKind, Phase, ProposalScope, RunningEstimate, SeedKey, Selection, TraceRecord,
};

/// Picks the player that receives the next sample.
///
/// Players with an infinite score are skipped while any finite one exists;
/// when all are infinite the choice cycles through indices via `cursor`.
/// Under `DeltaP` a degenerate bound for any candidate makes this step fall
/// back to the minimum-score rule.
pub fn select_next(
    fs: &[f64],
    counts: &[u64],
    selection: Selection,
    epsilon1: Option<f64>,
    cursor: &mut usize,
) -> usize {
    let finite: Vec<usize> = (0..fs.len()).filter(|&i| fs[i].is_finite()).collect();
    if finite.is_empty() {
        let j = *cursor % fs.len();
        *cursor += 1;
        return j;
    }
    let argmin = || {
        finite
            .iter()
            .copied()
            .fold(finite[0], |best, i| if fs[i] < fs[best] { i } else { best })
    };
    match (selection, epsilon1) {
        (Selection::DeltaP, Some(eps)) => {
            let scores: Result<Vec<f64>> = finite
                .iter()
                .map(|&i| delta_p(fs[i] / counts[i] as f64, counts[i], eps))
                .collect();
            match scores {
                Ok(scores) => {
                    let mut best = 0;
                    for k in 1..scores.len() {
                        if scores[k] > scores[best] {
                            best = k;
                        }
                    }
                    finite[best]
                }
                Err(_) => argmin(),
            }
        }
        _ => argmin(),
    }
}

/// MAP-regularised proposal fitted on the stratum statistics.
pub fn fit_proposal(
    stats: &StratumStats,
    alpha: f64,
    scope: ProposalScope,
) -> Result<ProposalParams> {
    let n = stats.n();
    let theta = match scope {
        ProposalScope::PerPlayer => (0..n)
            .map(|i| map_theta(&mle_theta(stats, i)?, alpha))
            .collect::<Result<Vec<_>>>()?,
        ProposalScope::Shared => vec![map_theta(&mle_theta_shared(stats)?, alpha)?; n],
    };
    Ok(ProposalParams {
        theta,
        alpha,
        source: ProposalSource::Map,
    })
}

/// Samplers and importance weights for a frozen proposal.
struct Prepared {
    dists: Vec<CardinalityDist>,
    weights: Vec<Vec<f64>>,
}

impl Prepared {
    fn new(proposal: &ProposalParams) -> Result<Self> {
        let n = proposal.theta.len();
        let weights = proposal
            .theta
            .iter()
            .map(|t| {
                (0..n)
                    .map(|c| importance_weight(t, c, n))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Prepared {
            dists: proposal.distributions()?,
            weights,
        })
    }
}

/// Greedy selection with uniform permutations (`Greedy`) or with the learned
/// cardinality proposal and importance weights (`Gae`).
pub fn estimate_active(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    key: SeedKey,
) -> Result<EstimationResult> {
    cfg.validate()?;
    if cfg.kind == EstimatorKind::Mc {
        return Err(Error::InvalidArgument(
            "estimate_active runs greedy or gae, not mc".into(),
        ));
    }
    let n = game.n();
    let importance = cfg.kind == EstimatorKind::Gae;
    let BootstrapOutcome {
        mut estimates,
        mut stats,
        mut streams,
        mut trace,
        permutations_drawn,
    } = bootstrap(game, cfg.m_bootstrap, cfg.bootstrap, key, cfg)?;

    let mut proposal = if importance {
        fit_proposal(&stats, cfg.alpha, cfg.proposal_scope)?
    } else {
        ProposalParams::uniform(n)
    };
    let mut prepared = if importance {
        Some(Prepared::new(&proposal)?)
    } else {
        None
    };

    let mut fs = estimates
        .iter()
        .map(|e| e.fidelity_score(cfg.xi, cfg.fs_formula))
        .collect::<Result<Vec<_>>>()?;
    let mut counts: Vec<u64> = estimates.iter().map(|e| e.count).collect();
    let mut cursor = 0usize;
    let mut step = trace.as_ref().map_or(0, |t| t.len() as u64);

    for t in 0..cfg.m_budget {
        let j = select_next(&fs, &counts, cfg.selection, cfg.epsilon1, &mut cursor);
        let (pred, weight) = match &prepared {
            Some(p) => {
                let placement = sample_placement(&mut streams[j], j, n, &p.dists[j])?;
                (placement.predecessors, p.weights[j][placement.cardinality])
            }
            None => {
                let order = sample_uniform_permutation(&mut streams[j], n);
                (predecessors_in(&order, j), 1.0)
            }
        };
        let sigma = game.marginal_contribution(j, pred)?;
        estimates[j].update(weight * sigma)?;
        counts[j] += 1;
        fs[j] = estimates[j].fidelity_score(cfg.xi, cfg.fs_formula)?;
        step += 1;
        if let Some(rec) = trace.as_mut() {
            rec.push(TraceRecord {
                step,
                phase: Phase::Main,
                player: j,
                cardinality: pred.len(),
                predecessors: pred.bits(),
                sigma,
                weight,
                fs_after: Some(fs[j]),
            });
        }
        if let (true, Some(every)) = (importance, cfg.refit_every) {
            stats.accumulate(j, pred.len(), sigma)?;
            if (t + 1) % every == 0 {
                proposal = fit_proposal(&stats, cfg.alpha, cfg.proposal_scope)?;
                prepared = Some(Prepared::new(&proposal)?);
            }
        }
    }
    finish(
        estimates,
        proposal,
        permutations_drawn + cfg.m_budget,
        trace,
        cfg,
    )
}

pub fn estimate_greedy(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    key: SeedKey,
) -> Result<EstimationResult> {
    estimate_active(
        game,
        &EstimatorConfig {
            kind: EstimatorKind::Greedy,
            ..cfg.clone()
        },
        key,
    )
}

pub fn estimate_gae(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    key: SeedKey,
) -> Result<EstimationResult> {
    estimate_active(
        game,
        &EstimatorConfig {
            kind: EstimatorKind::Gae,
            ..cfg.clone()
        },
        key,
    )
}

/// No bootstrap, no selection: player `i` gets exactly `allocation[i]`
/// samples from `proposal.theta[i]`. The allocation is fixed in advance, so
/// the variance of each estimate is `V_θ/m_i` exactly.
pub fn estimate_fixed(
    game: &CooperativeGame,
    allocation: &[u64],
    proposal: &ProposalParams,
    key: SeedKey,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    let n = game.n();
    if allocation.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: allocation.len(),
        });
    }
    if proposal.theta.len() != n {
        return Err(Error::LengthMismatch {
            expected: n,
            actual: proposal.theta.len(),
        });
    }
    let prepared = Prepared::new(proposal)?;
    let mut estimates: Vec<RunningEstimate> = (0..n).map(RunningEstimate::new).collect();
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut step = 0u64;
    for (i, &m_i) in allocation.iter().enumerate() {
        let mut stream = key.stream(i as u32);
        for _ in 0..m_i {
            let placement = sample_placement(&mut stream, i, n, &prepared.dists[i])?;
            let weight = prepared.weights[i][placement.cardinality];
            let sigma = game.marginal_contribution(i, placement.predecessors)?;
            estimates[i].update(weight * sigma)?;
            step += 1;
            if let Some(rec) = trace.as_mut() {
                rec.push(TraceRecord {
                    step,
                    phase: Phase::Main,
                    player: i,
                    cardinality: placement.cardinality,
                    predecessors: placement.predecessors.bits(),
                    sigma,
                    weight,
                    fs_after: fs_or_none(&estimates[i], cfg.xi, cfg.fs_formula),
                });
            }
        }
    }
    let total = allocation.iter().sum();
    finish(estimates, proposal.clone(), total, trace, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{make_synthetic, SyntheticGame};

    #[test]
    fn argmin_with_lowest_index_ties() {
        let mut cur = 0;
        assert_eq!(
            select_next(
                &[3.0, 1.0, 1.0],
                &[5, 5, 5],
                Selection::GreedyMinFs,
                None,
                &mut cur
            ),
            1
        );
        assert_eq!(
            select_next(
                &[f64::INFINITY, 4.0, 2.0],
                &[5, 5, 5],
                Selection::GreedyMinFs,
                None,
                &mut cur
            ),
            2
        );
        assert_eq!(cur, 0);
    }

    #[test]
    fn all_infinite_round_robin() {
        let mut cur = 0;
        let fs = [f64::INFINITY; 3];
        let picks: Vec<usize> = (0..5)
            .map(|_| select_next(&fs, &[2, 2, 2], Selection::GreedyMinFs, None, &mut cur))
            .collect();
        assert_eq!(picks, vec![0, 1, 2, 0, 1]);
    }

    #[test]
    fn delta_p_falls_back_on_degenerate_bound() {
        let mut cur = 0;
        // ε²·r·m = 1 for player 0: denominator is zero.
        let fs = [1.0, 3.0];
        assert_eq!(
            select_next(&fs, &[1, 1], Selection::DeltaP, Some(1.0), &mut cur),
            0
        );
    }

    #[test]
    fn greedy_on_additive_spends_budget_round_robin() {
        let g = make_synthetic(&SyntheticGame::Additive {
            weights: vec![1.0, 2.0, 3.0],
        })
        .unwrap();
        let r = estimate_greedy(
            &g,
            &EstimatorConfig::greedy().with_budget(2, 7),
            SeedKey::new(0, 0),
        )
        .unwrap();
        assert_eq!(r.m_per_player, vec![5, 4, 4]);
        assert_eq!(r.phi_hat, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn budget_is_conserved() {
        let g = make_synthetic(&SyntheticGame::Glove {
            left: vec![0, 1],
            right: vec![2],
        })
        .unwrap();
        for cfg in [EstimatorConfig::greedy(), EstimatorConfig::gae(2.0)] {
            let r = run(&g, cfg.with_budget(5, 60));
            assert_eq!(r.m_per_player.iter().sum::<u64>(), 75);
            assert_eq!(r.permutations_drawn, 75);
        }
    }

    fn run(g: &CooperativeGame, cfg: EstimatorConfig) -> EstimationResult {
        estimate_active(g, &cfg, SeedKey::new(11, 2)).unwrap()
    }

    #[test]
    fn gae_trace_reproduces_running_mean() {
        let g = make_synthetic(&SyntheticGame::Random {
            n: 6,
            seed: 4,
            low: -1.0,
            high: 1.0,
        })
        .unwrap();
        let cfg = EstimatorConfig {
            record_trace: true,
            ..EstimatorConfig::gae(2.0).with_budget(4, 200)
        };
        let r = run(&g, cfg.clone());
        let trace = r.trace.as_ref().unwrap();
        for i in 0..6 {
            let xs: Vec<f64> = trace
                .iter()
                .filter(|t| t.player == i)
                .map(|t| t.weight * t.sigma)
                .collect();
            assert_eq!(xs.len() as u64, r.m_per_player[i]);
            let mean = xs.iter().sum::<f64>() / xs.len() as f64;
            assert!((mean - r.phi_hat[i]).abs() <= 1e-12 * mean.abs().max(1.0));
        }
        assert_eq!(r, run(&g, cfg));
    }

    #[test]
    fn refit_changes_proposal_only_when_enabled() {
        let g = make_synthetic(&SyntheticGame::Random {
            n: 5,
            seed: 9,
            low: -1.0,
            high: 1.0,
        })
        .unwrap();
        let frozen = run(&g, EstimatorConfig::gae(2.0).with_budget(4, 100));
        let refit = run(
            &g,
            EstimatorConfig {
                refit_every: Some(10),
                ..EstimatorConfig::gae(2.0).with_budget(4, 100)
            },
        );
        assert_ne!(frozen.proposal.theta, refit.proposal.theta);
    }

    #[test]
    fn fixed_allocation_counts() {
        let g = make_synthetic(&SyntheticGame::Majority { n: 3, quota: None }).unwrap();
        let cfg = EstimatorConfig::mc();
        let r = estimate_fixed(
            &g,
            &[3, 0, 5],
            &ProposalParams::uniform(3),
            SeedKey::new(0, 0),
            &cfg,
        );
        assert!(matches!(
            r,
            Err(Error::InsufficientSamples { player: 1, .. })
        ));
        let r = estimate_fixed(
            &g,
            &[3, 2, 5],
            &ProposalParams::uniform(3),
            SeedKey::new(0, 0),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.m_per_player, vec![3, 2, 5]);
    }
}
