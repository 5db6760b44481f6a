//! Sampling-based Shapley estimators over shared running statistics.
//!
//! * MC: uniform permutations, budget split equally across players.
//! * Greedy: each budget unit goes to the player with the lowest fidelity score,
//!   sampled uniformly.
//! * GAE: greedy selection plus importance sampling over predecessor
//!   cardinalities, with the proposal learned from the bootstrap samples.
//!
//! All three start with the same bootstrap phase and keep its samples in the
//! estimate. Every player draws from its own random stream.

mod active;
mod allocation;
mod running;

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::{Error, Result};
use crate::game::CooperativeGame;
use crate::proposal::{ProposalParams, StratumStats};
use crate::sampler::{predecessors_in, sample_uniform_permutation, RngStream};

pub use active::{
    estimate_active, estimate_fixed, estimate_gae, estimate_greedy, fit_proposal, select_next,
};
pub use allocation::{
    delta_p, equal_split_allocation, pdp_prefers, simulate_greedy_allocation, FixedAllocation,
};
pub use running::{FsFormula, RunningEstimate};

/// Stream slot used by the shared-permutation bootstrap.
pub const SHARED_STREAM_SLOT: u32 = u32::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Mc,
    Greedy,
    Gae,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    /// Next sample goes to `argmin_j f_j`.
    #[default]
    GreedyMinFs,
    /// Next sample goes to `argmax_j Δ_p(r̂_j, m_j, ε₁)`.
    DeltaP,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapMode {
    /// Fresh permutations for every player; estimates are independent.
    #[default]
    Independent,
    /// Each permutation yields one marginal for every player; estimates are dependent.
    Shared,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProposalScope {
    #[default]
    PerPlayer,
    /// A single proposal fitted on all players' strata.
    Shared,
}

fn default_m_bootstrap() -> u64 {
    20
}

fn default_m_budget() -> u64 {
    2000
}

fn default_xi() -> f64 {
    1e-3
}

fn default_alpha() -> f64 {
    2.0
}

/// Settings for one estimator run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Bootstrap permutations per player (`m′`).
    #[serde(default = "default_m_bootstrap")]
    pub m_bootstrap: u64,
    /// Main budget (`m`), in marginal-contribution samples.
    #[serde(default = "default_m_budget")]
    pub m_budget: u64,
    #[serde(default = "default_xi")]
    pub xi: f64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub selection: Selection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon1: Option<f64>,
    #[serde(default)]
    pub fs_formula: FsFormula,
    #[serde(default)]
    pub bootstrap: BootstrapMode,
    #[serde(default)]
    pub proposal_scope: ProposalScope,
    /// Refit the proposal every this many main-loop steps (off when absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refit_every: Option<u64>,
    #[serde(default)]
    pub record_trace: bool,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind) -> Self {
        EstimatorConfig {
            kind,
            label: None,
            m_bootstrap: default_m_bootstrap(),
            m_budget: default_m_budget(),
            xi: default_xi(),
            alpha: default_alpha(),
            selection: Selection::default(),
            epsilon1: None,
            fs_formula: FsFormula::default(),
            bootstrap: BootstrapMode::default(),
            proposal_scope: ProposalScope::default(),
            refit_every: None,
            record_trace: false,
        }
    }

    pub fn mc() -> Self {
        Self::new(EstimatorKind::Mc)
    }

    pub fn greedy() -> Self {
        Self::new(EstimatorKind::Greedy)
    }

    pub fn gae(alpha: f64) -> Self {
        EstimatorConfig {
            alpha,
            ..Self::new(EstimatorKind::Gae)
        }
    }

    pub fn with_budget(mut self, m_bootstrap: u64, m_budget: u64) -> Self {
        self.m_bootstrap = m_bootstrap;
        self.m_budget = m_budget;
        self
    }

    /// Display name: the label if set, otherwise derived from the settings.
    pub fn name(&self) -> String {
        if let Some(label) = &self.label {
            return label.clone();
        }
        match self.kind {
            EstimatorKind::Mc => "mc".into(),
            EstimatorKind::Greedy => "greedy".into(),
            EstimatorKind::Gae => match self.selection {
                Selection::GreedyMinFs => format!("gae(alpha={})", self.alpha),
                Selection::DeltaP => format!("gae-delta_p(alpha={})", self.alpha),
            },
        }
    }

    /// Every problem with the configuration, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        let name = self.name();
        if self.m_bootstrap < 2 {
            out.push(format!(
                "{name}: m_bootstrap must be >= 2, got {}",
                self.m_bootstrap
            ));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            out.push(format!(
                "{name}: xi must be finite and > 0, got {}",
                self.xi
            ));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            out.push(format!(
                "{name}: alpha must be finite and >= 0, got {}",
                self.alpha
            ));
        }
        if self.selection == Selection::DeltaP {
            match self.epsilon1 {
                Some(e) if e > 0.0 && e.is_finite() => {}
                Some(e) => out.push(format!("{name}: epsilon1 must be > 0, got {e}")),
                None => out.push(format!("{name}: delta_p selection requires epsilon1")),
            }
            if self.kind == EstimatorKind::Mc {
                out.push(format!("{name}: mc does not use a selection rule"));
            }
        }
        if self.refit_every == Some(0) {
            out.push(format!("{name}: refit_every must be >= 1"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(problems))
        }
    }
}

/// Identifies the random streams of one run: stream ids are derived from
/// `(trial, player)` under a common seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedKey {
    pub seed: u64,
    pub trial: u32,
}

impl SeedKey {
    pub fn new(seed: u64, trial: u32) -> Self {
        SeedKey { seed, trial }
    }

    pub fn stream(&self, slot: u32) -> RngStream {
        RngStream::for_trial(self.seed, self.trial, slot)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Bootstrap,
    Main,
}

/// One marginal-contribution sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub step: u64,
    pub phase: Phase,
    pub player: usize,
    pub cardinality: usize,
    pub predecessors: u64,
    pub sigma: f64,
    pub weight: f64,
    /// Fidelity score after the update; `None` while fewer than two samples exist.
    pub fs_after: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimationResult {
    pub phi_hat: Vec<f64>,
    pub m_per_player: Vec<u64>,
    pub fs_per_player: Vec<f64>,
    pub estimates: Vec<RunningEstimate>,
    /// Proposal used in the main loop (uniform for MC and Greedy).
    pub proposal: ProposalParams,
    /// Σ m_i: every marginal contribution that entered an estimate.
    pub marginal_samples: u64,
    /// Permutations (or placements) drawn, bootstrap included.
    pub permutations_drawn: u64,
    pub trace: Option<Vec<TraceRecord>>,
}

impl EstimationResult {
    pub fn min_fs(&self) -> f64 {
        self.fs_per_player
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Bootstrap statistics plus the per-player streams positioned after it.
pub struct BootstrapOutcome {
    pub estimates: Vec<RunningEstimate>,
    pub stats: StratumStats,
    pub permutations_drawn: u64,
    pub(crate) streams: Vec<RngStream>,
    pub(crate) trace: Option<Vec<TraceRecord>>,
}

pub(crate) fn fs_or_none(est: &RunningEstimate, xi: f64, formula: FsFormula) -> Option<f64> {
    est.fidelity_score(xi, formula).ok()
}

/// Draws `m_bootstrap` uniform permutations per player (or shared across
/// players) and records the unweighted marginal contributions.
pub fn bootstrap(
    game: &CooperativeGame,
    m_bootstrap: u64,
    mode: BootstrapMode,
    key: SeedKey,
    cfg: &EstimatorConfig,
) -> Result<BootstrapOutcome> {
    let n = game.n();
    if m_bootstrap < 2 {
        return Err(Error::InvalidArgument(format!(
            "m_bootstrap must be >= 2, got {m_bootstrap}"
        )));
    }
    let mut streams: Vec<RngStream> = (0..n as u32).map(|p| key.stream(p)).collect();
    let mut estimates: Vec<RunningEstimate> = (0..n)
        .map(|p| RunningEstimate {
            includes_bootstrap: true,
            ..RunningEstimate::new(p)
        })
        .collect();
    let mut stats = StratumStats::new(n);
    let mut trace = cfg.record_trace.then(Vec::new);
    let mut step = 0u64;
    let mut record = |est: &mut RunningEstimate,
                      stats: &mut StratumStats,
                      pred: Coalition,
                      trace: &mut Option<Vec<TraceRecord>>|
     -> Result<()> {
        let player = est.player;
        let sigma = game.marginal_contribution(player, pred)?;
        est.update(sigma)?;
        stats.accumulate(player, pred.len(), sigma)?;
        step += 1;
        if let Some(t) = trace.as_mut() {
            t.push(TraceRecord {
                step,
                phase: Phase::Bootstrap,
                player,
                cardinality: pred.len(),
                predecessors: pred.bits(),
                sigma,
                weight: 1.0,
                fs_after: fs_or_none(est, cfg.xi, cfg.fs_formula),
            });
        }
        Ok(())
    };
    let permutations_drawn = match mode {
        BootstrapMode::Independent => {
            for player in 0..n {
                for _ in 0..m_bootstrap {
                    let order = sample_uniform_permutation(&mut streams[player], n);
                    let pred = predecessors_in(&order, player);
                    record(&mut estimates[player], &mut stats, pred, &mut trace)?;
                }
            }
            m_bootstrap * n as u64
        }
        BootstrapMode::Shared => {
            let mut shared = key.stream(SHARED_STREAM_SLOT);
            for _ in 0..m_bootstrap {
                let order = sample_uniform_permutation(&mut shared, n);
                let mut prefix = Coalition::EMPTY;
                for &player in &order {
                    record(&mut estimates[player], &mut stats, prefix, &mut trace)?;
                    prefix = prefix.with(player);
                }
            }
            m_bootstrap
        }
    };
    Ok(BootstrapOutcome {
        estimates,
        stats,
        permutations_drawn,
        streams,
        trace,
    })
}

/// Uniform sampling with the main budget split equally; the first
/// `m mod n` players receive one extra sample.
pub fn estimate_mc(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    key: SeedKey,
) -> Result<EstimationResult> {
    cfg.validate()?;
    let n = game.n();
    let boot = bootstrap(game, cfg.m_bootstrap, cfg.bootstrap, key, cfg)?;
    let BootstrapOutcome {
        mut estimates,
        mut streams,
        mut trace,
        permutations_drawn,
        ..
    } = boot;
    let share = cfg.m_budget / n as u64;
    let remainder = (cfg.m_budget % n as u64) as usize;
    let mut step = trace.as_ref().map_or(0, |t| t.len() as u64);
    for player in 0..n {
        let extra = share + u64::from(player < remainder);
        for _ in 0..extra {
            let order = sample_uniform_permutation(&mut streams[player], n);
            let pred = predecessors_in(&order, player);
            let sigma = game.marginal_contribution(player, pred)?;
            estimates[player].update(sigma)?;
            step += 1;
            if let Some(t) = trace.as_mut() {
                t.push(TraceRecord {
                    step,
                    phase: Phase::Main,
                    player,
                    cardinality: pred.len(),
                    predecessors: pred.bits(),
                    sigma,
                    weight: 1.0,
                    fs_after: fs_or_none(&estimates[player], cfg.xi, cfg.fs_formula),
                });
            }
        }
    }
    finish(
        estimates,
        ProposalParams::uniform(n),
        permutations_drawn + cfg.m_budget,
        trace,
        cfg,
    )
}

pub(crate) fn finish(
    estimates: Vec<RunningEstimate>,
    proposal: ProposalParams,
    permutations_drawn: u64,
    trace: Option<Vec<TraceRecord>>,
    cfg: &EstimatorConfig,
) -> Result<EstimationResult> {
    let fs_per_player = estimates
        .iter()
        .map(|e| e.fidelity_score(cfg.xi, cfg.fs_formula))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimationResult {
        phi_hat: estimates.iter().map(|e| e.mean).collect(),
        m_per_player: estimates.iter().map(|e| e.count).collect(),
        marginal_samples: estimates.iter().map(|e| e.count).sum(),
        fs_per_player,
        estimates,
        proposal,
        permutations_drawn,
        trace,
    })
}

/// Runs whichever estimator `cfg` names.
pub fn run_estimator(
    game: &CooperativeGame,
    cfg: &EstimatorConfig,
    key: SeedKey,
) -> Result<EstimationResult> {
    match cfg.kind {
        EstimatorKind::Mc => estimate_mc(game, cfg, key),
        EstimatorKind::Greedy | EstimatorKind::Gae => estimate_active(game, cfg, key),
    }
}
