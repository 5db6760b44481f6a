//! Reference values computed the slow way, straight from the definitions,
//! for checking the library against.

use shapfair::game::CooperativeGame;
use shapfair::Coalition;

/// Every ordering of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for k in 0..=p.len() {
            let mut q = p.clone();
            q.insert(k, n - 1);
            out.push(q);
        }
    }
    out
}

fn v(game: &CooperativeGame, players: &[usize]) -> f64 {
    game.evaluate(Coalition::from_players(players.iter().copied()))
        .unwrap()
}

/// Mean and population variance of each player's marginal contribution over all orderings.
pub fn marginal_moments(game: &CooperativeGame) -> (Vec<f64>, Vec<f64>) {
    let n = game.n();
    let perms = permutations(n);
    let mut sum = vec![0.0; n];
    let mut sq = vec![0.0; n];
    for p in &perms {
        for (k, &i) in p.iter().enumerate() {
            let s = v(game, &p[..=k]) - v(game, &p[..k]);
            sum[i] += s;
            sq[i] += s * s;
        }
    }
    let t = perms.len() as f64;
    let mean: Vec<f64> = sum.iter().map(|s| s / t).collect();
    let var = (0..n).map(|i| sq[i] / t - mean[i] * mean[i]).collect();
    (mean, var)
}

/// `E[σ_i²]` over predecessor sets of each size, by enumerating every subset.
pub fn stratum_second_moments(game: &CooperativeGame, i: usize) -> Vec<f64> {
    let n = game.n();
    let mut sum = vec![0.0; n];
    let mut count = vec![0.0; n];
    for bits in 0u64..(1 << n) {
        if bits >> i & 1 == 1 {
            continue;
        }
        let s = Coalition::from_bits(bits);
        let sigma = game.evaluate(s.with(i)).unwrap() - game.evaluate(s).unwrap();
        sum[s.len()] += sigma * sigma;
        count[s.len()] += 1.0;
    }
    (0..n).map(|c| sum[c] / count[c]).collect()
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    let k = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / k;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (k - 1.0);
    (m, (var / k).sqrt())
}
