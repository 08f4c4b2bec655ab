//! Which minimizer each algorithm selects on the 4D toy loss.

use crate::densela::Vector;
use crate::error::{Error, Result};
use crate::losses::{LossModel, LossSpec};
use crate::optim::{run, Algorithm, Diagnostics, OptimizerConfig, Stepper, Trajectory};
use crate::sharpness::limiting_regularizers;

use super::config::ExperimentConfig;
use super::summary::{Claim, RunSummary};

/// `(x₁, x₂)` each algorithm should settle near.
pub fn toy_target(algorithm: Algorithm) -> Option<([f64; 2], &'static str)> {
    match algorithm {
        Algorithm::Sam => Some(([0.0, 0.0], "oracle: argmin of λ₁ = 2F₁ over the manifold, F₁ = x₁² + 6x₂² + 8")),
        Algorithm::AscGd => Some(([1.0, 1.0], "oracle: argmin of λ_M = 2F₂ over the manifold, F₂ = 4(1 − x₁)² + (1 − x₂)² + 1")),
        Algorithm::OneSam => Some(([0.8, 1.0 / 7.0], "oracle: argmin of Tr = 2(F₁ + F₂), at x₁ = 4/5, x₂ = 1/7")),
        Algorithm::Gd => None,
    }
}

pub(crate) fn require_toy(cfg: &ExperimentConfig) -> Result<Box<dyn LossModel>> {
    match cfg.loss_spec()? {
        spec @ LossSpec::Toy4d {} => spec.build(),
        _ => Err(Error::Config(format!("{} needs the toy4d loss", cfg.experiment.as_str()))),
    }
}

pub struct ToyRun {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    /// Reported `Φ` end point (averaged over the last 5% for 1-SAM).
    pub endpoint: Vector,
}

/// Mean of the recorded `Φ(x(t))` with `t ≥ from`.
pub fn averaged_phi(traj: &Trajectory, from: u64) -> Option<Vector> {
    let phis: Vec<&Vector> = traj.records.iter().filter(|r| r.t >= from).filter_map(|r| r.phi.as_ref()).collect();
    let first = phis.first()?;
    let mut sum = Vector::zeros(first.dim());
    for p in &phis {
        sum += p;
    }
    Some(sum.scale(1.0 / phis.len() as f64))
}

pub fn run_toy4d(cfg: &ExperimentConfig) -> Result<ToyRun> {
    let loss = require_toy(cfg)?;
    let (target, provenance) =
        toy_target(cfg.algorithm).ok_or_else(|| Error::Config("toy4d runs sam, one_sam or asc_gd".into()))?;
    let x0 = Vector::from(cfg.x0.clone());
    x0.check_dim(4)?;
    if !(0.0..=1.0).contains(&x0[0]) || !(0.0..=1.0).contains(&x0[1]) {
        return Err(Error::Config("toy4d needs x0 with (x₁, x₂) in [0, 1]²".into()));
    }
    let opt = OptimizerConfig::new(cfg.eta, cfg.rho, 4)?.with_seed(cfg.seed);
    let mut stepper = Stepper::new(cfg.algorithm, opt);
    let diag = Diagnostics { phi: true, ..Diagnostics::none() };
    let trajectory = run(loss.as_ref(), &mut stepper, &x0, cfg.n_steps, cfg.record_every, &diag)?;

    let mut summary = RunSummary::new(cfg);
    if let Some(f) = &trajectory.failure {
        summary.note(format!("{} diverged at step {}: {}", cfg.algorithm.as_str(), f.step, f.message));
    }
    let endpoint = if cfg.algorithm == Algorithm::OneSam {
        let from = cfg.n_steps - cfg.n_steps / 20;
        summary.note(format!("Φ averaged over records with t ≥ {from}"));
        averaged_phi(&trajectory, from)
    } else {
        trajectory.records.iter().rev().find_map(|r| r.phi.clone())
    };
    let endpoint = endpoint.unwrap_or_else(|| Vector::from(vec![f64::NAN; 4]));
    let measured = [endpoint[0], endpoint[1]];
    let claim = Claim::near(
        &format!("toy4d.{}.selection", cfg.algorithm.as_str()),
        "(x₁, x₂) of the final Φ(x) is within 0.1 of the selected minimizer",
        &target,
        &measured,
        0.1,
        provenance,
    );
    summary.push(if trajectory.failure.is_some() { Claim { pass: false, ..claim } } else { claim });

    if endpoint.is_finite() {
        if let Ok(s) = limiting_regularizers(loss.as_ref(), &endpoint, crate::densela::DEFAULT_RANK_TOL) {
            summary.note(format!(
                "at the end point: λ₁/2 = {}, λ_M/2 = {}, Tr/2 = {}",
                s.s_max, s.s_asc, s.trace_half
            ));
        }
    }
    Ok(ToyRun { summary, trajectory, endpoint })
}
