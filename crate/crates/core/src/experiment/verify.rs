//! Self-checks packaged as named suites. Each check reports what it measured
//! and the tolerance it was held to.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimators::{
    equal_split_allocation, estimate_fixed, pdp_prefers, run_estimator, simulate_greedy_allocation,
    EstimatorConfig, SeedKey,
};
use crate::exact::{exact_moments, exact_shapley_subsets, ExactOracle};
use crate::fairness::{budget_bound, chebyshev_check, check_a2, delta_bound, nl_nsw, rank_metrics};
use crate::game::{make_synthetic, CooperativeGame, SyntheticGame};
use crate::proposal::{map_theta, oracle_theta, proposal_variance};
use crate::sampler::RngStream;

pub const SUITES: [&str; 8] = [
    "oracle",
    "unbiased",
    "prop3",
    "allocation",
    "proposal",
    "chebyshev",
    "symmetry",
    "bounds",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: String,
    pub tolerance: String,
    pub pass: bool,
}

impl Check {
    fn new(
        name: impl Into<String>,
        measured: impl Into<String>,
        tolerance: impl Into<String>,
        pass: bool,
    ) -> Self {
        Check {
            name: name.into(),
            measured: measured.into(),
            tolerance: tolerance.into(),
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

pub fn run_suite(name: &str, seed: u64) -> Result<SuiteReport> {
    let checks = match name {
        "oracle" => oracle(seed)?,
        "unbiased" => unbiased(seed)?,
        "prop3" => prop3(seed)?,
        "allocation" => allocation()?,
        "proposal" => proposal(seed)?,
        "chebyshev" => chebyshev(seed)?,
        "symmetry" => symmetry(seed)?,
        "bounds" => bounds()?,
        other => {
            return Err(Error::Config(vec![format!(
                "unknown suite {other:?}; expected one of {}",
                SUITES.join(", ")
            )]))
        }
    };
    Ok(SuiteReport {
        suite: name.to_string(),
        checks,
    })
}

/// Glove game with two left-glove holders and one right-glove holder.
pub fn glove() -> SyntheticGame {
    SyntheticGame::Glove {
        left: vec![0, 1],
        right: vec![2],
    }
}

/// Eight players whose marginal contributions grow with the predecessor count
/// at slopes 1, 2, …, 128: uniform-permutation variances differ by a factor of 12.
pub fn heterogeneous_game() -> SyntheticGame {
    SyntheticGame::Heterogeneous {
        base: vec![1.0; 8],
        slope: (0..8).map(|k| f64::from(1u32 << k)).collect(),
        noise: 0.1,
        seed: 1,
    }
}

/// Ten random players, each duplicated once.
pub fn duplicated_random_game(seed: u64) -> SyntheticGame {
    SyntheticGame::Duplicated {
        base: Box::new(SyntheticGame::Random {
            n: 10,
            seed,
            low: -1.0,
            high: 1.0,
        }),
    }
}

/// `|a − b| ≤ rel · scale`.
fn close(a: f64, b: f64, rel: f64, scale: f64) -> bool {
    (a - b).abs() <= rel * scale
}

fn max_abs(xs: &[f64]) -> f64 {
    xs.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn oracle(seed: u64) -> Result<Vec<Check>> {
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let n = 3 + (k % 6) as usize;
        let g = make_synthetic(&SyntheticGame::Random {
            n,
            seed: seed.wrapping_add(k),
            low: -1.0,
            high: 1.0,
        })?;
        let o = ExactOracle::from_game(&g)?;
        let a = o.shapley_by_permutations()?;
        let b = o.shapley_by_subsets();
        let scale = max_abs(&a).max(max_abs(o.values()));
        for i in 0..n {
            worst = worst.max((a[i] - b[i]).abs() / scale);
        }
    }
    let mut checks = vec![Check::new(
        "permutation vs subset formula, 100 random games",
        format!("{worst:e}"),
        "1e-12 relative",
        worst <= 1e-12,
    )];
    let glove = exact_shapley_subsets(&make_synthetic(&glove())?)?;
    let target = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];
    let err = glove
        .iter()
        .zip(target)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "glove",
        format!("{glove:?}"),
        "1e-12",
        err <= 1e-12,
    ));
    let maj = exact_shapley_subsets(&make_synthetic(&SyntheticGame::Majority {
        n: 3,
        quota: None,
    })?)?;
    let err = maj
        .iter()
        .map(|a| (a - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "majority(3)",
        format!("{maj:?}"),
        "1e-12",
        err <= 1e-12,
    ));
    let w = vec![0.5, -1.25, 3.0, 0.0];
    let add = exact_shapley_subsets(&make_synthetic(&SyntheticGame::Additive {
        weights: w.clone(),
    })?)?;
    checks.push(Check::new(
        "additive",
        format!("{add:?}"),
        "exact",
        add == w,
    ));
    Ok(checks)
}

/// Per-player z-scores of the mean estimate over `trials` seeds.
pub fn bias_z_scores(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    phi: &[f64],
    trials: u32,
    seed: u64,
) -> Result<Vec<f64>> {
    let runs = (0..trials)
        .into_par_iter()
        .map(|t| run_estimator(game, cfg, SeedKey::new(seed, t)).map(|r| r.phi_hat))
        .collect::<Result<Vec<_>>>()?;
    Ok(z_scores(&runs, phi))
}

fn z_scores(runs: &[Vec<f64>], phi: &[f64]) -> Vec<f64> {
    (0..phi.len())
        .map(|i| {
            let xs: Vec<f64> = runs.iter().map(|r| r[i]).collect();
            let (mean, se) = super::mean_and_std_err(&xs);
            let (mean, se) = (mean.unwrap_or(f64::NAN), se.unwrap_or(0.0));
            if se == 0.0 {
                if close(mean, phi[i], 1e-12, 1.0) {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                (mean - phi[i]) / se
            }
        })
        .collect()
}

fn unbiased(seed: u64) -> Result<Vec<Check>> {
    let game = make_synthetic(&glove())?;
    let phi = [1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];
    let mut checks = Vec::new();
    for cfg in [
        EstimatorConfig::mc(),
        EstimatorConfig::greedy(),
        EstimatorConfig::gae(0.0),
        EstimatorConfig::gae(2.0),
        EstimatorConfig::gae(100.0),
    ] {
        let cfg = cfg.with_budget(5, 60);
        let z = bias_z_scores(&game, &cfg, &phi, 1000, seed)?;
        let worst = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        checks.push(Check::new(
            format!("{} adaptive mean over 1000 seeds on glove", cfg.name()),
            format!(
                "z = {}",
                z.iter()
                    .map(|x| format!("{x:.2}"))
                    .collect::<Vec<_>>()
                    .join(", ")
            ),
            "|z| <= 4",
            worst <= 4.0,
        ));
    }
    // The importance weights alone, with the learned proposal and a fixed allocation.
    let cfg = EstimatorConfig::gae(2.0).with_budget(5, 60);
    let proposal = run_estimator(&game, &cfg, SeedKey::new(seed, u32::MAX))?.proposal;
    let runs = (0..1000u32)
        .into_par_iter()
        .map(|t| {
            estimate_fixed(&game, &[20, 20, 20], &proposal, SeedKey::new(seed, t), &cfg)
                .map(|r| r.phi_hat)
        })
        .collect::<Result<Vec<_>>>()?;
    let z = z_scores(&runs, &phi);
    let worst = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    checks.push(Check::new(
        "gae(alpha=2) learned proposal, fixed 20 samples per player, 1000 seeds",
        format!(
            "z = {}",
            z.iter()
                .map(|x| format!("{x:.2}"))
                .collect::<Vec<_>>()
                .join(", ")
        ),
        "|z| <= 4",
        worst <= 4.0,
    ));
    Ok(checks)
}

/// Mean minimum fidelity score over `seeds` runs.
pub fn mean_min_fs(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    seeds: u32,
    seed: u64,
) -> Result<f64> {
    let fs = (0..seeds)
        .into_par_iter()
        .map(|t| run_estimator(game, cfg, SeedKey::new(seed, t)).map(|r| r.min_fs()))
        .collect::<Result<Vec<_>>>()?;
    Ok(fs.iter().sum::<f64>() / seeds as f64)
}

fn prop3(seed: u64) -> Result<Vec<Check>> {
    let game = make_synthetic(&heterogeneous_game())?;
    let v = exact_moments(&game)?.variance_uniform;
    let ratio =
        v.iter().cloned().fold(0.0, f64::max) / v.iter().cloned().fold(f64::INFINITY, f64::min);
    let mc = mean_min_fs(&game, &EstimatorConfig::mc(), 30, seed)?;
    let greedy = mean_min_fs(&game, &EstimatorConfig::greedy(), 30, seed)?;
    let gae = mean_min_fs(&game, &EstimatorConfig::gae(2.0), 30, seed)?;
    Ok(vec![
        Check::new(
            "variance ratio across players",
            format!("{ratio:.2}"),
            ">= 10",
            ratio >= 10.0,
        ),
        Check::new(
            "mean min-FS over 30 seeds, m = 2000",
            format!("gae {gae:.2}, greedy {greedy:.2}, mc {mc:.2}"),
            "gae >= greedy >= mc",
            gae >= greedy && greedy >= mc,
        ),
        Check::new(
            "gae / mc",
            format!("{:.3}", gae / mc),
            "> 1.5",
            gae / mc > 1.5,
        ),
    ])
}

fn allocation() -> Result<Vec<Check>> {
    let r = [1.0, 2.0, 4.0, 8.0];
    let m = 10_000u64;
    let greedy = simulate_greedy_allocation(&r, m)?;
    let level = m as f64 / r.iter().map(|x| 1.0 / x).sum::<f64>();
    let gap = (greedy.min_fs() - level).abs();
    let equal = equal_split_allocation(&r, m)?;
    let dominated = pdp_prefers(&equal.fs, &greedy.fs)?;
    let two = simulate_greedy_allocation(&[1.0, 4.0], 10_000)?;
    Ok(vec![
        Check::new(
            "greedy min-FS vs water level",
            format!("{} vs {level:.3} (gap {gap:.3})", greedy.min_fs()),
            "<= max r = 8",
            gap <= 8.0,
        ),
        Check::new(
            "equal split PDP-preferred over greedy",
            dominated.to_string(),
            "false",
            !dominated,
        ),
        Check::new(
            "two players r = 1:4",
            format!("{:?}", two.m),
            "4:1",
            two.m[0] == 4 * two.m[1],
        ),
    ])
}

fn proposal(seed: u64) -> Result<Vec<Check>> {
    let mut worst_excess = f64::NEG_INFINITY;
    let (mut strict_needed, mut strict_held) = (0, 0);
    for k in 0..50u64 {
        let n = 2 + (k % 5) as usize;
        let g = make_synthetic(&SyntheticGame::Random {
            n,
            seed: seed.wrapping_add(1000 + k),
            low: -1.0,
            high: 1.0,
        })?;
        let ex = exact_moments(&g)?;
        let uniform = vec![1.0 / n as f64; n];
        for i in 0..n {
            let opt = proposal_variance(&oracle_theta(&ex, i)?, &ex, i)?;
            let uni = proposal_variance(&uniform, &ex, i)?;
            worst_excess = worst_excess.max(opt - uni);
            let row = &ex.mean_sq_by_cardinality[i];
            let (lo, hi) = row.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
            if hi > 0.0 && (hi - lo) > 0.1 * hi {
                strict_needed += 1;
                if opt < uni {
                    strict_held += 1;
                }
            }
        }
    }
    let w = [0.5, 0.3, 0.2];
    let map2 = map_theta(&w, 2.0)?;
    let expected = [0.3889, 0.3222, 0.2889];
    let map_err = map2
        .iter()
        .zip(expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let map0 = map_theta(&w, 0.0)?;
    let id_err = map0
        .iter()
        .zip(w)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let big = map_theta(&w, 1e6)?;
    let uni_err = big
        .iter()
        .map(|a| (a - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    Ok(vec![
        Check::new(
            "optimal minus uniform proposal variance, 50 games",
            format!("max {worst_excess:e}"),
            "<= 1e-9",
            worst_excess <= 1e-9,
        ),
        Check::new(
            "strict improvement where stratum moments differ by > 10%",
            format!("{strict_held}/{strict_needed}"),
            "all",
            strict_held == strict_needed,
        ),
        Check::new("map(w, 2)", format!("{map2:?}"), "1e-4", map_err <= 1e-4),
        Check::new(
            "map(w, 0) = w",
            format!("{id_err:e}"),
            "1e-15",
            id_err <= 1e-15,
        ),
        Check::new(
            "map(w, 1e6) ~ uniform",
            format!("{uni_err:e}"),
            "1e-3",
            uni_err <= 1e-3,
        ),
    ])
}

fn chebyshev(seed: u64) -> Result<Vec<Check>> {
    let game = make_synthetic(&glove())?;
    // 20 bootstrap + 90/3 main samples = 50 per player.
    let cfg = EstimatorConfig::mc().with_budget(20, 90);
    let table = chebyshev_check(&game, &cfg, &[0.5, 1.0, 2.0], 2000, seed)?;
    Ok(table
        .cells
        .iter()
        .map(|c| {
            Check::new(
                format!("player {} eps1 {}", c.player, c.epsilon1),
                format!(
                    "empirical {:.4} bound {:.4}{}",
                    c.empirical,
                    c.bound,
                    if c.vacuous { " (vacuous)" } else { "" }
                ),
                format!("<= bound + 3 se ({:.4})", 3.0 * c.std_err),
                c.pass,
            )
        })
        .collect())
}

fn symmetry(seed: u64) -> Result<Vec<Check>> {
    let game = make_synthetic(&duplicated_random_game(seed))?;
    let phi = exact_shapley_subsets(&game)?;
    let pairs = game.clone_pairs().to_vec();
    let run = |cfg: EstimatorConfig| -> Result<(f64, f64)> {
        let out = (0..30u32)
            .into_par_iter()
            .map(|t| {
                let r = run_estimator(&game, &cfg, SeedKey::new(seed, t))?;
                Ok((
                    check_a2(&phi, &r.phi_hat, 0.5, cfg.xi, &pairs)?.rate,
                    r.min_fs(),
                ))
            })
            .collect::<Result<Vec<(f64, f64)>>>()?;
        Ok((
            out.iter().map(|x| x.0).sum::<f64>() / 30.0,
            out.iter().map(|x| x.1).sum::<f64>() / 30.0,
        ))
    };
    let (mc_a2, mc_fs) = run(EstimatorConfig::mc())?;
    let (gae_a2, gae_fs) = run(EstimatorConfig::gae(2.0))?;
    Ok(vec![
        Check::new(
            "clone-pair A2 rate at eps1 = 0.5",
            format!("gae {gae_a2:.4}, mc {mc_a2:.4}"),
            "gae <= mc",
            gae_a2 <= mc_a2,
        ),
        Check::new(
            "mean min-FS",
            format!("gae {gae_fs:.4}, mc {mc_fs:.4}"),
            "gae >= 3 mc",
            gae_fs >= 3.0 * mc_fs,
        ),
    ])
}

fn bounds() -> Result<Vec<Check>> {
    let d = delta_bound(1000.0, 0.1, 10, true)?;
    let b4 = budget_bound(4, 0.5, 0.1, false, 2.0)?;
    let b8 = budget_bound(8, 0.5, 0.1, false, 2.0)?;
    let rm = rank_metrics(&[1.0, 2.0], &[2.0, 1.0])?;
    let nsw = nl_nsw(&[3.0, 1.0])?.value;
    Ok(vec![
        Check::new(
            "delta(1000, 0.1, 10, independent)",
            format!("{d:.6}"),
            "0.6513 +- 1e-4",
            (d - 0.6513).abs() <= 1e-4,
        ),
        Check::new(
            "dependent budget n=8 / n=4",
            format!("{}", b8 / b4),
            "4 exactly",
            b8 / b4 == 4.0,
        ),
        Check::new(
            "rank metrics (1,2) vs (2,1)",
            format!("n_inv {} eps_inv {}", rm.n_inv, rm.eps_inv),
            "2, 4",
            rm.n_inv == 2 && rm.eps_inv == 4.0,
        ),
        Check::new(
            "nl_nsw(3, 1)",
            format!("{nsw:.6}"),
            "0.2877 +- 1e-4",
            (nsw - 0.2877).abs() <= 1e-4,
        ),
    ])
}

/// Random positive distribution over `n` cardinalities, for optimality probes.
pub fn random_theta(rng: &mut RngStream, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let z: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / z).collect()
}
