use std::collections::HashSet;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::game::{load_table, make_synthetic, subprocess_game, CooperativeGame, SyntheticGame};

/// Tag of the reference-φ file format.
pub const PHI_FORMAT: &str = "shapfair-phi-v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GameSpec {
    Builtin(SyntheticGame),
    Table(PathBuf),
    Subprocess(SubprocessSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubprocessSpec {
    pub command: Vec<String>,
    pub n: usize,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
}

fn default_timeout_secs() -> u64 {
    60
}

impl GameSpec {
    pub fn build(&self) -> Result<CooperativeGame> {
        match self {
            GameSpec::Builtin(spec) => make_synthetic(spec),
            GameSpec::Table(path) => load_table(path),
            GameSpec::Subprocess(s) => {
                subprocess_game(&s.command, s.n, Duration::from_secs(s.timeout_secs))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// Exact Shapley values from the subset formula.
    Exact,
    /// A `shapfair-phi-v1` file.
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Budget,
    Epsilon1,
    Alpha,
}

impl SweepAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepAxis::Budget => "budget",
            SweepAxis::Epsilon1 => "epsilon1",
            SweepAxis::Alpha => "alpha",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

fn default_grid() -> Vec<f64> {
    vec![0.1, 0.5, 1.0]
}

fn default_trials() -> u32 {
    1
}

fn default_reference() -> ReferenceSpec {
    ReferenceSpec::Exact
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub estimators: Vec<EstimatorConfig>,
    #[serde(default = "default_grid")]
    pub epsilon1_grid: Vec<f64>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_reference")]
    pub reference: ReferenceSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outputs: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

impl ExperimentConfig {
    /// Parses a JSON config; relative paths are taken relative to `base_dir`.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(vec![format!("invalid config: {e}")]))?;
        cfg.resolve_paths(base_dir);
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json(&text, base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let GameSpec::Table(p) = &mut self.game {
            fix(p);
        }
        if let ReferenceSpec::File(p) = &mut self.reference {
            fix(p);
        }
        if let Some(p) = &mut self.outputs {
            fix(p);
        }
    }

    /// Every problem with the config, empty when valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.estimators.is_empty() {
            out.push("estimators: at least one estimator is required".to_string());
        }
        let mut names = HashSet::new();
        for est in &self.estimators {
            out.extend(est.problems());
            if !names.insert(est.name()) {
                out.push(format!(
                    "estimators: duplicate name {:?}; set distinct labels",
                    est.name()
                ));
            }
        }
        if self.trials == 0 {
            out.push("trials: must be >= 1".to_string());
        }
        if self.epsilon1_grid.is_empty() {
            out.push("epsilon1_grid: must not be empty".to_string());
        }
        for e in &self.epsilon1_grid {
            if !(*e > 0.0 && e.is_finite()) {
                out.push(format!(
                    "epsilon1_grid: values must be finite and > 0, got {e}"
                ));
            }
        }
        if let GameSpec::Subprocess(s) = &self.game {
            if s.command.is_empty() {
                out.push("game.subprocess.command: must not be empty".to_string());
            }
            if s.timeout_secs == 0 {
                out.push("game.subprocess.timeout_secs: must be >= 1".to_string());
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                out.push("sweep.values: must not be empty".to_string());
            }
            for v in &sweep.values {
                let ok = match sweep.axis {
                    SweepAxis::Budget => *v >= 0.0 && v.fract() == 0.0 && *v <= u64::MAX as f64,
                    SweepAxis::Epsilon1 => *v > 0.0 && v.is_finite(),
                    SweepAxis::Alpha => *v >= 0.0 && v.is_finite(),
                };
                if !ok {
                    out.push(format!(
                        "sweep.values: {v} is not valid for axis {}",
                        sweep.axis.as_str()
                    ));
                }
            }
            if sweep.axis == SweepAxis::Alpha
                && !self.estimators.iter().any(|e| e.kind == EstimatorKind::Gae)
            {
                out.push("sweep: alpha axis needs at least one gae estimator".to_string());
            }
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

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhiFile {
    format: String,
    phi: Vec<f64>,
}

pub fn load_phi(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: PhiFile = serde_json::from_str(&text)
        .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
    if file.format != PHI_FORMAT {
        return Err(Error::Format(format!(
            "{}: expected format {PHI_FORMAT:?}, got {:?}",
            path.display(),
            file.format
        )));
    }
    if file.phi.iter().any(|x| !x.is_finite()) {
        return Err(Error::Format(format!(
            "{}: phi entries must be finite",
            path.display()
        )));
    }
    Ok(file.phi)
}

pub fn save_phi(phi: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = PhiFile {
        format: PHI_FORMAT.to_string(),
        phi: phi.to_vec(),
    };
    let mut text = serde_json::to_string(&file).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
