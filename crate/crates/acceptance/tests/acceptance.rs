//! Acceptance criteria, one PASS/FAIL line each. Reference values are computed
//! here by brute force rather than taken from the library under test.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use shapfair::estimators::{estimate_fixed, simulate_greedy_allocation};
use shapfair::exact::{exact_moments, ExactOracle};
use shapfair::experiment::verify::{duplicated_random_game, heterogeneous_game};
use shapfair::experiment::{run_experiment, write_outputs, ExperimentConfig};
use shapfair::fairness::{budget_bound, check_a2, delta_bound, nl_nsw, rank_metrics};
use shapfair::game::{make_synthetic, CooperativeGame, SyntheticGame};
use shapfair::proposal::{map_theta, oracle_theta, proposal_variance};
use shapfair::{run_estimator, EstimatorConfig, SeedKey};
use shapfair_tests::{marginal_moments, mean_se, stratum_second_moments};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn glove() -> CooperativeGame {
    make_synthetic(&SyntheticGame::Glove {
        left: vec![0, 1],
        right: vec![2],
    })
    .unwrap()
}

fn c1_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for k in 0..100u64 {
        let n = 3 + (k % 6) as usize;
        let g = make_synthetic(&SyntheticGame::Random {
            n,
            seed: 1000 + k,
            low: -1.0,
            high: 1.0,
        })
        .unwrap();
        let o = ExactOracle::from_game(&g).unwrap();
        let a = o.shapley_by_permutations().unwrap();
        let b = o.shapley_by_subsets();
        let scale = a
            .iter()
            .chain(o.values())
            .fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..n {
            worst = worst.max((a[i] - b[i]).abs() / scale);
        }
    }
    let t = start.elapsed();
    outcome(
        worst <= 1e-12 && t < Duration::from_secs(30),
        format!("max relative gap {worst:e}, {t:.2?}"),
    )
}

fn c2_closed_forms() -> Outcome {
    let w = vec![0.25, -1.5, 3.0, 0.0, 7.125];
    let add = ExactOracle::from_game(
        &make_synthetic(&SyntheticGame::Additive { weights: w.clone() }).unwrap(),
    )
    .unwrap()
    .shapley_by_subsets();
    let g = glove();
    let (glove_bf, _) = marginal_moments(&g);
    let glove_lib = ExactOracle::from_game(&g).unwrap().shapley_by_subsets();
    let glove_err = glove_lib
        .iter()
        .zip(&glove_bf)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let glove_target = glove_bf
        .iter()
        .zip([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let maj = ExactOracle::from_game(
        &make_synthetic(&SyntheticGame::Majority { n: 3, quota: None }).unwrap(),
    )
    .unwrap()
    .shapley_by_subsets();
    let maj_err = maj
        .iter()
        .map(|a| (a - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    outcome(
        add == w && glove_err <= 1e-12 && glove_target <= 1e-12 && maj_err <= 1e-12,
        format!("additive exact {}, glove {glove_lib:.4?} (err {glove_err:e}), majority err {maj_err:e}", add == w),
    )
}

fn c3_unbiasedness() -> Outcome {
    let start = Instant::now();
    let g = glove();
    let (phi, _) = marginal_moments(&g);
    let mut pass = true;
    let mut parts = Vec::new();
    for cfg in [
        EstimatorConfig::mc(),
        EstimatorConfig::greedy(),
        EstimatorConfig::gae(0.0),
        EstimatorConfig::gae(2.0),
        EstimatorConfig::gae(100.0),
    ] {
        let cfg = cfg.with_budget(5, 60);
        let runs: Vec<Vec<f64>> = (0..1000)
            .into_par_iter()
            .map(|t| {
                run_estimator(&g, &cfg, SeedKey::new(11, t))
                    .unwrap()
                    .phi_hat
            })
            .collect();
        let z: Vec<f64> = (0..3)
            .map(|i| {
                let (m, se) = mean_se(&runs.iter().map(|r| r[i]).collect::<Vec<_>>());
                (m - phi[i]) / se
            })
            .collect();
        let ok = z.iter().all(|x| x.abs() <= 4.0);
        pass &= ok;
        parts.push(format!(
            "{} z={:.1?}{}",
            cfg.name(),
            z,
            if ok { "" } else { " !" }
        ));
    }
    // Same importance weights with the allocation fixed in advance.
    let cfg = EstimatorConfig::gae(2.0).with_budget(5, 60);
    let proposal = run_estimator(&g, &cfg, SeedKey::new(11, u32::MAX))
        .unwrap()
        .proposal;
    let runs: Vec<Vec<f64>> = (0..1000)
        .into_par_iter()
        .map(|t| {
            estimate_fixed(&g, &[20, 20, 20], &proposal, SeedKey::new(11, t), &cfg)
                .unwrap()
                .phi_hat
        })
        .collect();
    let z: Vec<f64> = (0..3)
        .map(|i| {
            let (m, se) = mean_se(&runs.iter().map(|r| r[i]).collect::<Vec<_>>());
            (m - phi[i]) / se
        })
        .collect();
    parts.push(format!("[info: gae fixed allocation z={z:.1?}]"));
    let t = start.elapsed();
    outcome(
        pass && t < Duration::from_secs(120),
        format!("{}; {t:.2?}", parts.join("; ")),
    )
}

fn mean_min_fs(g: &CooperativeGame, cfg: &EstimatorConfig, seeds: u32, seed: u64) -> f64 {
    let fs: Vec<f64> = (0..seeds)
        .into_par_iter()
        .map(|t| {
            run_estimator(g, cfg, SeedKey::new(seed, t))
                .unwrap()
                .min_fs()
        })
        .collect();
    fs.iter().sum::<f64>() / seeds as f64
}

fn c4_prop3_ordering() -> Outcome {
    let start = Instant::now();
    let g = make_synthetic(&heterogeneous_game()).unwrap();
    let (_, var) = marginal_moments(&g);
    let ratio =
        var.iter().cloned().fold(0.0, f64::max) / var.iter().cloned().fold(f64::INFINITY, f64::min);
    let mc = mean_min_fs(&g, &EstimatorConfig::mc(), 30, 7);
    let greedy = mean_min_fs(&g, &EstimatorConfig::greedy(), 30, 7);
    let gae = mean_min_fs(&g, &EstimatorConfig::gae(2.0), 30, 7);
    let t = start.elapsed();
    outcome(
        ratio >= 10.0 && gae >= greedy && greedy >= mc && gae / mc > 1.5 && t < Duration::from_secs(120),
        format!("variance ratio {ratio:.1}; min-FS gae {gae:.1} greedy {greedy:.1} mc {mc:.1}; gae/mc {:.2}; {t:.2?}", gae / mc),
    )
}

fn c5_water_filling() -> Outcome {
    let r = [1.0, 2.0, 4.0, 8.0];
    let a = simulate_greedy_allocation(&r, 10_000).unwrap();
    let level = 10_000.0 / (1.0 + 0.5 + 0.25 + 0.125);
    let min_fs = (0..4)
        .map(|i| a.m[i] as f64 * r[i])
        .fold(f64::INFINITY, f64::min);
    let gap = (min_fs - level).abs();
    outcome(
        gap <= 8.0 && a.m.iter().sum::<u64>() == 10_000,
        format!(
            "allocation {:?}, min FS {min_fs} vs {level:.3}, gap {gap:.3}",
            a.m
        ),
    )
}

fn c6_importance_sampling() -> Outcome {
    let (mut worst_excess, mut worst_formula) = (f64::NEG_INFINITY, 0.0f64);
    let (mut strict_needed, mut strict_held) = (0, 0);
    for k in 0..50u64 {
        let n = 2 + (k % 5) as usize;
        let g = make_synthetic(&SyntheticGame::Random {
            n,
            seed: 5000 + k,
            low: -1.0,
            high: 1.0,
        })
        .unwrap();
        let (phi, _) = marginal_moments(&g);
        let ex = exact_moments(&g).unwrap();
        for i in 0..n {
            let second = stratum_second_moments(&g, i);
            let local = |theta: &[f64]| {
                (0..n)
                    .map(|c| second[c] / ((n * n) as f64 * theta[c]))
                    .sum::<f64>()
                    - phi[i] * phi[i]
            };
            let opt_theta = oracle_theta(&ex, i).unwrap();
            let uniform = vec![1.0 / n as f64; n];
            let (opt, uni) = (local(&opt_theta), local(&uniform));
            worst_formula = worst_formula
                .max((proposal_variance(&opt_theta, &ex, i).unwrap() - opt).abs())
                .max((proposal_variance(&uniform, &ex, i).unwrap() - uni).abs());
            worst_excess = worst_excess.max(opt - uni);
            let (lo, hi) = second.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &x| {
                (lo.min(x), hi.max(x))
            });
            if hi - lo > 0.1 * hi {
                strict_needed += 1;
                strict_held += usize::from(opt < uni);
            }
        }
    }
    outcome(
        worst_excess <= 1e-9 && worst_formula <= 1e-9 && strict_held == strict_needed,
        format!(
            "max(opt - uniform) {worst_excess:e}; library vs enumeration {worst_formula:e}; strict {strict_held}/{strict_needed}"
        ),
    )
}

fn c7_chebyshev() -> Outcome {
    let start = Instant::now();
    let g = glove();
    let (phi, var) = marginal_moments(&g);
    let cfg = EstimatorConfig::mc().with_budget(20, 90);
    let trials = 2000u32;
    let runs: Vec<(Vec<f64>, Vec<u64>)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let r = run_estimator(&g, &cfg, SeedKey::new(3, t)).unwrap();
            (r.phi_hat, r.m_per_player)
        })
        .collect();
    let m_ok = runs.iter().all(|(_, m)| m == &vec![50, 50, 50]);
    let mut pass = m_ok;
    let mut parts = Vec::new();
    for eps in [0.5, 1.0, 2.0] {
        for i in 0..3 {
            let tol = eps * (phi[i].abs() + cfg.xi);
            let f = 50.0 * (phi[i].abs() + cfg.xi).powi(2) / var[i];
            let bound = 1.0 / (eps * eps * f);
            let p = runs
                .iter()
                .filter(|(x, _)| (x[i] - phi[i]).abs() > tol)
                .count() as f64
                / trials as f64;
            let se = (p * (1.0 - p) / trials as f64).sqrt();
            let ok = p <= bound + 3.0 * se;
            pass &= ok;
            parts.push(format!(
                "i{i}/e{eps}: {p:.4}<={bound:.4}{}",
                if ok { "" } else { " !" }
            ));
        }
    }
    let t = start.elapsed();
    outcome(
        pass && t < Duration::from_secs(60),
        format!("m_i=50 {m_ok}; {}; {t:.2?}", parts.join(" ")),
    )
}

fn c8_symmetry() -> Outcome {
    let g = make_synthetic(&duplicated_random_game(0)).unwrap();
    let pairs: Vec<(usize, usize)> = (0..10).map(|i| (i, i + 10)).collect();
    // Clone pairs are interchangeable, so their exact values coincide.
    let phi = ExactOracle::from_game(&g).unwrap().shapley_by_subsets();
    let clone_gap = pairs
        .iter()
        .map(|&(i, j)| (phi[i] - phi[j]).abs())
        .fold(0.0, f64::max);
    let run = |cfg: EstimatorConfig| -> (f64, f64) {
        let out: Vec<(f64, f64)> = (0..30u32)
            .into_par_iter()
            .map(|t| {
                let r = run_estimator(&g, &cfg, SeedKey::new(0, t)).unwrap();
                (
                    check_a2(&phi, &r.phi_hat, 0.5, cfg.xi, &pairs)
                        .unwrap()
                        .rate,
                    r.min_fs(),
                )
            })
            .collect();
        (
            out.iter().map(|x| x.0).sum::<f64>() / 30.0,
            out.iter().map(|x| x.1).sum::<f64>() / 30.0,
        )
    };
    let (mc_a2, mc_fs) = run(EstimatorConfig::mc());
    let (gae_a2, gae_fs) = run(EstimatorConfig::gae(2.0));
    outcome(
        clone_gap <= 1e-12 && gae_a2 <= mc_a2 && gae_fs >= 3.0 * mc_fs,
        format!(
            "A2 rate gae {gae_a2:.3} vs mc {mc_a2:.3}{}; min-FS gae {gae_fs:.3} vs mc {mc_fs:.4} ({:.1}x)",
            if gae_a2 <= mc_a2 { "" } else { " !" },
            gae_fs / mc_fs
        ),
    )
}

fn c9_map_algebra() -> Outcome {
    let w = [0.5, 0.3, 0.2];
    let id = map_theta(&w, 0.0)
        .unwrap()
        .iter()
        .zip(w)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let big = map_theta(&w, 1e6)
        .unwrap()
        .iter()
        .map(|a| (a - 1.0 / 3.0).abs())
        .fold(0.0, f64::max);
    // (n·w + α) / (n + nα) with n = 3, α = 2.
    let expected: Vec<f64> = w.iter().map(|x| (3.0 * x + 2.0) / 9.0).collect();
    let got = map_theta(&w, 2.0).unwrap();
    let ex = got
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let lit = got
        .iter()
        .zip([0.3889, 0.3222, 0.2889])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    outcome(
        id <= 1e-15 && big <= 1e-3 && ex <= 1e-15 && lit <= 1e-4,
        format!("alpha=0 {id:e}; alpha=1e6 {big:e}; alpha=2 {got:.4?}"),
    )
}

fn c10_bounds() -> Outcome {
    let d = delta_bound(1000.0, 0.1, 10, true).unwrap();
    let expected = 1.0 - (1.0 - 1.0 / (0.1f64 * 0.1 * 1000.0)).powi(10);
    let b4 = budget_bound(4, 0.5, 0.1, false, 2.0).unwrap();
    let b8 = budget_bound(8, 0.5, 0.1, false, 2.0).unwrap();
    outcome(
        (d - expected).abs() <= 1e-12 && (d - 0.6513).abs() <= 1e-4 && b8 / b4 == 4.0,
        format!(
            "delta {d:.6} (direct {expected:.6}); budget n=8/n=4 = {}",
            b8 / b4
        ),
    )
}

fn c11_metrics() -> Outcome {
    let rm = rank_metrics(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
    // Both ordered pairs disagree; each contributes |(1-2) - (2-1)| = 2.
    let nsw = nl_nsw(&[3.0, 1.0]).unwrap().value;
    let expected = -(1.5f64.ln() + 0.5f64.ln());
    outcome(
        rm.n_inv == 2
            && rm.eps_inv == 4.0
            && (nsw - expected).abs() <= 1e-12
            && (nsw - 0.2877).abs() <= 1e-4,
        format!("n_inv {} eps_inv {}; nl_nsw {nsw:.6}", rm.n_inv, rm.eps_inv),
    )
}

fn c12_determinism() -> Outcome {
    let cfg = ExperimentConfig::from_json(
        r#"{"game":{"builtin":{"family":"duplicated","base":{"family":"random","n":4,"seed":9}}},
            "estimators":[{"kind":"mc","m_budget":400},{"kind":"greedy","m_budget":400},{"kind":"gae","m_budget":400}],
            "trials":6,"seed":42}"#,
        Path::new("."),
    )
    .unwrap();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    write_outputs(&run_experiment(&cfg).unwrap(), a.path()).unwrap();
    write_outputs(&run_experiment(&cfg).unwrap(), b.path()).unwrap();
    let mut names: Vec<String> = std::fs::read_dir(a.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    let differing: Vec<&String> = names
        .iter()
        .filter(|f| {
            std::fs::read(a.path().join(f)).unwrap() != std::fs::read(b.path().join(f)).unwrap()
        })
        .collect();
    let csvs = names.iter().filter(|f| f.ends_with(".csv")).count();
    outcome(
        differing.is_empty() && csvs >= 4,
        format!(
            "{} files compared ({csvs} csv), differing {differing:?}",
            names.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 12] = [
        ("1 oracle equivalence", c1_oracle_equivalence),
        ("2 closed-form values", c2_closed_forms),
        ("3 unbiasedness", c3_unbiasedness),
        ("4 min-FS ordering", c4_prop3_ordering),
        ("5 water-filling", c5_water_filling),
        ("6 importance-sampling inequality", c6_importance_sampling),
        ("7 chebyshev bound", c7_chebyshev),
        ("8 symmetry improvement", c8_symmetry),
        ("9 MAP algebra", c9_map_algebra),
        ("10 delta and budget formulas", c10_bounds),
        ("11 metric definitions", c11_metrics),
        ("12 determinism", c12_determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let o = check();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
