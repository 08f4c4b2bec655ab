//! Full-batch SAM on `L(x) = ½ xᵀAx`.

use crate::densela::{eig_sym, spectral_projector, Vector};
use crate::error::{Error, Result};
use crate::manifold::GAP_REL_TOL;
use crate::optim::{run, Algorithm, Diagnostics, OptimizerConfig, Stepper, Trajectory};

use super::config::ExperimentConfig;
use super::summary::{Claim, RunSummary};

/// Slack allowed when testing membership of the invariant sets.
pub const INVARIANT_SLACK: f64 = 1e-12;

/// Per-`j` membership history of `‖P^{(j:D)} A x / ρ‖ ≤ η λ_j²`.
#[derive(Clone, Debug, PartialEq)]
pub struct InvariantTrace {
    /// 0-based eigen index.
    pub j: usize,
    /// First step at which the iterate was inside.
    pub entered: Option<u64>,
    /// Steps after `entered` at which it was outside.
    pub violations: usize,
}

pub struct QuadraticRun {
    pub summary: RunSummary,
    pub trajectory: Trajectory,
    pub invariants: Vec<InvariantTrace>,
}

pub fn run_quadratic(cfg: &ExperimentConfig) -> Result<QuadraticRun> {
    let spec = cfg.loss_spec()?;
    let a = match &spec {
        crate::losses::LossSpec::Quadratic { matrix } => crate::densela::SymMatrix::from_rows(matrix)?,
        _ => return Err(Error::Config("quadratic needs a quadratic loss".into())),
    };
    let loss = spec.build()?;
    let x0 = Vector::from(cfg.x0.clone());
    x0.check_dim(loss.dim())?;
    let e = eig_sym(&a)?;
    let l1 = e.values[0];
    if cfg.eta * l1 >= 1.0 {
        return Err(Error::Config(format!("need η λ₁ < 1, got {} · {l1} = {}", cfg.eta, cfg.eta * l1)));
    }
    if e.dim() > 1 {
        let gap = l1 - e.values[1];
        let tol = GAP_REL_TOL * l1.abs();
        if gap <= tol {
            return Err(Error::Eigengap { gap, tol });
        }
    }

    let opt = OptimizerConfig::new(cfg.eta, cfg.rho, loss.dim())?.with_seed(cfg.seed);
    let mut stepper = Stepper::new(Algorithm::Sam, opt);
    let full = run(loss.as_ref(), &mut stepper, &x0, cfg.n_steps, 1, &Diagnostics::none())?;

    let n = loss.dim();
    let projectors = (0..n).map(|j| spectral_projector(&e, &(j..n).collect::<Vec<_>>())).collect::<Result<Vec<_>>>()?;
    let mut invariants: Vec<InvariantTrace> = (0..n).map(|j| InvariantTrace { j, entered: None, violations: 0 }).collect();
    for r in &full.records {
        let xt = a.mul_vec(&r.x).scale(1.0 / cfg.rho);
        for (inv, p) in invariants.iter_mut().zip(&projectors) {
            let bound = cfg.eta * e.values[inv.j].powi(2);
            let inside = p.mul_vec(&xt).norm() <= bound + INVARIANT_SLACK;
            match inv.entered {
                None if inside => inv.entered = Some(r.t),
                Some(_) if !inside => inv.violations += 1,
                _ => {}
            }
        }
    }

    let mut summary = RunSummary::new(cfg);
    if let Some(f) = &full.failure {
        summary.note(format!("run stopped at step {}: {}", f.step, f.message));
    }
    let x = &full.last().x;
    let target = cfg.eta * cfg.rho * l1 / (2.0 - cfg.eta * l1);
    summary.push(Claim::rel(
        "quadratic.norm",
        "final ‖x‖ equals the fixed norm η ρ λ₁ / (2 − η λ₁)",
        target,
        x.norm(),
        0.01,
        "formula: η ρ λ₁ / (2 − η λ₁)",
    ));

    let v1 = &e.vectors[0];
    let cos = x.normalized().map_or(0.0, |u| u.dot(v1).abs());
    let alignment = Claim::at_least(
        "quadratic.alignment",
        "|⟨x/‖x‖, v₁⟩| after the run",
        cos,
        0.999,
        "formula: direction converges to ±v₁",
    );
    if x0.dot(v1).abs() <= 1e-12 * x0.norm() {
        summary.note("x0 is orthogonal to v₁; the alignment claim is excluded (measure-zero initialization)");
        summary.push(alignment.reported());
    } else {
        summary.push(alignment);
    }

    for inv in &invariants {
        let claim = Claim::at_most(
            &format!("quadratic.invariant_set.j{}", inv.j + 1),
            &format!(
                "steps outside ‖P^({}:{n}) A x / ρ‖ ≤ η λ_{}² after first entry (entered at {})",
                inv.j + 1,
                inv.j + 1,
                inv.entered.map_or("never".to_string(), |t| t.to_string())
            ),
            inv.violations as f64,
            0.0,
            "formula: the SAM recursion maps the set into itself",
        );
        summary.push(if inv.j == 0 { claim } else { claim.reported() });
    }

    let trajectory = thin(full, cfg.record_every);
    Ok(QuadraticRun { summary, trajectory, invariants })
}

/// Keeps `t = 0`, multiples of `every` and the last record.
pub(crate) fn thin(mut traj: Trajectory, every: u64) -> Trajectory {
    let last = traj.records.last().map(|r| r.t);
    traj.records.retain(|r| r.t % every == 0 || Some(r.t) == last);
    traj.record_every = every;
    traj
}
