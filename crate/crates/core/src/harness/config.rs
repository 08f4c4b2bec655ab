//! Experiment configuration.
//!
//! A config file is flat TOML: one `key = value` per line, arrays allowed.
//! Resolution order is built-in defaults, then the file, then command-line
//! overrides. Defaults depend on the experiment and, for `toy4d` and
//! `flow-compare`, on the algorithm.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::densela::SymMatrix;
use crate::error::{Error, Result};
use crate::losses::{LossModel, LossSpec};
use crate::manifold::FlowKind;
use crate::optim::Algorithm;
use crate::sharpness::SharpnessType;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Quadratic,
    Toy4d,
    FlowCompare,
    SharpnessScan,
    ExplicitBias,
    Selftest,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Toy4d => "toy4d",
            Self::FlowCompare => "flow-compare",
            Self::SharpnessScan => "sharpness-scan",
            Self::ExplicitBias => "explicit-bias",
            Self::Selftest => "selftest",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    /// Loss file (see [`LossSpec`]); the experiment's built-in loss if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss_file: Option<String>,
    pub algorithm: Algorithm,
    pub eta: f64,
    pub rho: f64,
    /// `0` lets `flow-compare` use `ceil(horizon / (η ρ²))`.
    pub n_steps: u64,
    pub record_every: u64,
    pub seed: u64,
    /// Flow horizon in `τ = η ρ² t`.
    pub horizon: f64,
    pub flow_dt: f64,
    /// Limiting flow compared against; the algorithm's own flow by default.
    pub flow: FlowKind,
    pub x0: Vec<f64>,
    #[serde(rename = "type")]
    pub sharpness: SharpnessType,
    pub rhos: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    /// Monte-Carlo directions for average sharpness.
    pub mc_samples: usize,
    pub box_lo: Vec<f64>,
    pub box_hi: Vec<f64>,
    pub n_starts: usize,
    /// Grid points per axis on the manifold patch.
    pub grid: usize,
    pub out: String,
}

/// Values given on the command line.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub eta: Option<f64>,
    pub rho: Option<f64>,
    pub n_steps: Option<u64>,
    pub seed: Option<u64>,
    pub algorithm: Option<Algorithm>,
    pub sharpness: Option<SharpnessType>,
    pub out: Option<String>,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment, algorithm: Option<Algorithm>) -> Self {
        let algorithm = algorithm.unwrap_or(Algorithm::Sam);
        let toy_x0 = vec![0.5, 0.5, 0.2, 0.1];
        let mut cfg = Self {
            experiment,
            loss_file: None,
            algorithm,
            eta: 0.005,
            rho: 0.01,
            n_steps: 5_000_000,
            record_every: 1000,
            seed: 0,
            horizon: 1.0,
            flow_dt: 1e-3,
            flow: match algorithm {
                Algorithm::OneSam => FlowKind::Trace,
                _ => FlowKind::Lambda1,
            },
            x0: toy_x0,
            sharpness: SharpnessType::Max,
            rhos: vec![0.02, 0.01, 0.005],
            points: vec![vec![0.0; 4], vec![0.5, 0.5, 0.0, 0.0]],
            mc_samples: 100_000,
            box_lo: vec![-0.5, -0.5, -0.5, -0.5],
            box_hi: vec![1.5, 1.5, 0.5, 0.5],
            n_starts: 8,
            grid: 201,
            out: format!("out/{}", experiment.as_str()),
        };
        match experiment {
            Experiment::Quadratic | Experiment::Selftest => {
                cfg.eta = 0.1;
                cfg.n_steps = 10_000;
                cfg.record_every = 1;
                cfg.x0 = vec![0.3, 0.4, 0.5];
            }
            Experiment::Toy4d if matches!(algorithm, Algorithm::AscGd | Algorithm::Gd) => {
                cfg.eta = 0.02;
                cfg.n_steps = 1_000_000;
            }
            Experiment::FlowCompare => cfg.n_steps = 0,
            Experiment::ExplicitBias => cfg.mc_samples = 1024,
            _ => {}
        }
        cfg
    }

    /// Defaults, overlaid with the TOML text (if any), overlaid with `ov`.
    pub fn resolve(experiment: Experiment, text: Option<&str>, ov: &Overrides) -> Result<Self> {
        let file: toml::Table = match text {
            Some(t) => toml::from_str(t).map_err(|e| Error::Config(format!("config file: {e}")))?,
            None => toml::Table::new(),
        };
        if let Some(v) = file.get("experiment") {
            if v.as_str() != Some(experiment.as_str()) {
                return Err(Error::Config(format!(
                    "config file is for experiment {v}, not {}",
                    experiment.as_str()
                )));
            }
        }
        let algorithm = match (ov.algorithm, file.get("algorithm")) {
            (Some(a), _) => Some(a),
            (None, Some(v)) => Some(
                v.as_str()
                    .ok_or_else(|| Error::Config("algorithm must be a string".into()))?
                    .parse()?,
            ),
            (None, None) => None,
        };
        let defaults = Self::defaults(experiment, algorithm);
        let mut table = toml::Table::try_from(&defaults).expect("defaults serialize");
        for (k, v) in file {
            table.insert(k, v);
        }
        let mut cfg: Self = table
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("config file: {}", e.message())))?;
        if let Some(a) = algorithm {
            cfg.algorithm = a;
        }
        if let Some(v) = ov.eta {
            cfg.eta = v;
        }
        if let Some(v) = ov.rho {
            cfg.rho = v;
        }
        if let Some(v) = ov.n_steps {
            cfg.n_steps = v;
        }
        if let Some(v) = ov.seed {
            cfg.seed = v;
        }
        if let Some(v) = ov.sharpness {
            cfg.sharpness = v;
        }
        if let Some(v) = &ov.out {
            cfg.out = v.clone();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(experiment: Experiment, path: Option<&Path>, ov: &Overrides) -> Result<Self> {
        let text = match path {
            Some(p) => Some(
                fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?,
            ),
            None => None,
        };
        Self::resolve(experiment, text.as_deref(), ov)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every value that does not need the loss.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.eta.is_finite() && self.eta > 0.0) {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.rho.is_finite() && self.rho >= 0.0) {
            return bad(format!("rho must be non-negative, got {}", self.rho));
        }
        if self.record_every == 0 {
            return bad("record_every must be at least 1".into());
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return bad(format!("horizon must be non-negative, got {}", self.horizon));
        }
        if !(self.flow_dt.is_finite() && self.flow_dt > 0.0) {
            return bad(format!("flow_dt must be positive, got {}", self.flow_dt));
        }
        if self.x0.iter().any(|v| !v.is_finite()) {
            return bad("x0 has non-finite entries".into());
        }
        if self.rhos.is_empty() || self.rhos.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return bad("rhos must be a non-empty list of positive numbers".into());
        }
        if self.points.iter().flatten().any(|v| !v.is_finite()) {
            return bad("points have non-finite entries".into());
        }
        if self.mc_samples == 0 {
            return bad("mc_samples must be at least 1".into());
        }
        if self.box_lo.len() != self.box_hi.len() || self.box_lo.iter().zip(&self.box_hi).any(|(l, h)| !(l < h)) {
            return bad("box_lo and box_hi must have equal length with box_lo < box_hi".into());
        }
        if self.n_starts == 0 {
            return bad("n_starts must be at least 1".into());
        }
        if self.grid < 2 {
            return bad("grid must be at least 2".into());
        }
        match self.experiment {
            Experiment::Quadratic if self.algorithm != Algorithm::Sam => {
                bad(format!("quadratic runs sam, not {}", self.algorithm.as_str()))
            }
            Experiment::Toy4d if self.algorithm == Algorithm::Gd => {
                bad("toy4d runs sam, one_sam or asc_gd".into())
            }
            Experiment::FlowCompare if !matches!(self.algorithm, Algorithm::Sam | Algorithm::OneSam) => {
                bad("flow-compare runs sam or one_sam".into())
            }
            _ => Ok(()),
        }
    }

    /// The loss named by `loss_file`, or the built-in one: `diag(2, 1, 0.5)`
    /// for `quadratic` and `selftest`, the 4D toy otherwise.
    pub fn loss_spec(&self) -> Result<LossSpec> {
        match &self.loss_file {
            Some(p) => LossSpec::load(Path::new(p)),
            None => Ok(match self.experiment {
                Experiment::Quadratic | Experiment::Selftest => LossSpec::quadratic(&SymMatrix::diag(&[2.0, 1.0, 0.5])),
                _ => LossSpec::Toy4d {},
            }),
        }
    }

    pub fn build_loss(&self) -> Result<Box<dyn LossModel>> {
        self.loss_spec()?.build()
    }

    /// Creates the output directory and checks that it is writable.
    pub fn prepare_out_dir(&self) -> Result<PathBuf> {
        let dir = PathBuf::from(&self.out);
        fs::create_dir_all(&dir)
            .map_err(|e| Error::Config(format!("cannot create output directory {}: {e}", dir.display())))?;
        let probe = dir.join(".samlab-write-probe");
        fs::write(&probe, b"")
            .map_err(|e| Error::Config(format!("output directory {} is not writable: {e}", dir.display())))?;
        fs::remove_file(&probe)?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        for exp in [Experiment::Quadratic, Experiment::Toy4d, Experiment::FlowCompare, Experiment::ExplicitBias] {
            let cfg = ExperimentConfig::defaults(exp, None);
            let back = ExperimentConfig::resolve(exp, Some(&cfg.to_toml()), &Overrides::default()).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn file_then_cli() {
        let ov = Overrides { eta: Some(0.03), ..Overrides::default() };
        let cfg = ExperimentConfig::resolve(Experiment::Toy4d, Some("eta = 0.01\nrho = 0.02\n"), &ov).unwrap();
        assert_eq!(cfg.eta, 0.03);
        assert_eq!(cfg.rho, 0.02);
    }

    #[test]
    fn algorithm_selects_defaults() {
        let cfg = ExperimentConfig::resolve(Experiment::Toy4d, Some("algorithm = \"asc_gd\""), &Overrides::default())
            .unwrap();
        assert_eq!(cfg.eta, 0.02);
        assert_eq!(cfg.n_steps, 1_000_000);
        let ov = Overrides { algorithm: Some(Algorithm::OneSam), ..Overrides::default() };
        let cfg = ExperimentConfig::resolve(Experiment::FlowCompare, None, &ov).unwrap();
        assert_eq!(cfg.flow, FlowKind::Trace);
    }

    #[test]
    fn rejects_bad_values() {
        let none = Overrides::default();
        assert!(ExperimentConfig::resolve(Experiment::Toy4d, Some("eta = -1.0"), &none).is_err());
        assert!(ExperimentConfig::resolve(Experiment::Toy4d, Some("unknown = 1"), &none).is_err());
        assert!(ExperimentConfig::resolve(Experiment::Toy4d, Some("experiment = \"quadratic\""), &none).is_err());
        assert!(ExperimentConfig::resolve(Experiment::Quadratic, Some("algorithm = \"gd\""), &none).is_err());
        assert!(ExperimentConfig::resolve(Experiment::Toy4d, Some("record_every = 0"), &none).is_err());
    }

    #[test]
    fn unwritable_out_dir_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("plain");
        fs::write(&file, "x").unwrap();
        let mut cfg = ExperimentConfig::defaults(Experiment::Toy4d, None);
        cfg.out = file.join("sub").to_string_lossy().into_owned();
        assert!(cfg.prepare_out_dir().is_err());
    }
}
