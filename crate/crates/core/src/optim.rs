//! Discrete-time steppers (full-batch SAM, 1-SAM, gradient descent on the
//! ascent-direction loss, plain GD) and the trajectory runner.

use serde::{Deserialize, Serialize};

use crate::densela::Vector;
use crate::error::{Error, Result};
use crate::losses::{self, component, LossModel};
use crate::manifold::{phi, PhiOptions};
use crate::rng::SplitMix64;
use crate::sharpness::{alignment_angle_at, worst_sharpness, WorstOptions};

/// Relative threshold under which a gradient is treated as zero.
pub const ZERO_GRAD_TOL: f64 = 1e-14;

/// `‖g‖ ≤ 1e-14 (1 + ‖x‖)`
pub fn grad_is_zero(g: &Vector, x: &Vector) -> bool {
    g.norm() <= ZERO_GRAD_TOL * (1.0 + x.norm())
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    pub eta: f64,
    pub rho: f64,
    /// Unit vector used as the ascent direction where `∇L = 0`.
    pub fallback_dir: Vector,
    pub seed: u64,
}

impl OptimizerConfig {
    /// Config with fallback direction `e₁` and seed 0.
    pub fn new(eta: f64, rho: f64, dim: usize) -> Result<Self> {
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::InvalidArgument(format!("eta must be positive and finite, got {eta}")));
        }
        if !(rho >= 0.0 && rho.is_finite()) {
            return Err(Error::InvalidArgument(format!("rho must be non-negative and finite, got {rho}")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self { eta, rho, fallback_dir: Vector::basis(dim, 0), seed: 0 })
    }

    pub fn with_fallback(mut self, dir: Vector) -> Result<Self> {
        dir.check_dim(self.fallback_dir.dim())?;
        if (dir.norm() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument("fallback direction must have unit norm".into()));
        }
        self.fallback_dir = dir;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

fn finite_or(x: Vector, what: &str) -> Result<Vector> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(Error::NonFinite { what: what.to_string() })
    }
}

/// `x − η ∇L(x + ρ ∇L(x)/‖∇L(x)‖)`, using the fallback direction at zero
/// gradient.
pub fn sam_step(loss: &dyn LossModel, x: &Vector, cfg: &OptimizerConfig) -> Result<Vector> {
    let (_, g) = losses::evaluate(loss, x)?;
    let perturbed = if grad_is_zero(&g, x) {
        x.axpy(cfg.rho, &cfg.fallback_dir)
    } else {
        x.axpy(cfg.rho / g.norm(), &g)
    };
    finite_or(x.axpy(-cfg.eta, &loss.grad(&perturbed)), "SAM update")
}

/// SAM step on the single component `L_k`.
pub fn one_sam_step_with(loss: &dyn LossModel, x: &Vector, cfg: &OptimizerConfig, k: usize) -> Result<Vector> {
    sam_step(&component(loss, k)?, x, cfg)
}

/// 1-SAM: draw `k` uniformly from the components and take a SAM step on
/// `L_k` alone.
pub fn one_sam_step(loss: &dyn LossModel, x: &Vector, cfg: &OptimizerConfig, rng: &mut SplitMix64) -> Result<(Vector, usize)> {
    let k = rng.index(loss.component_count());
    Ok((one_sam_step_with(loss, x, cfg, k)?, k))
}

/// `x − η ∇L(x)`
pub fn gd_step(loss: &dyn LossModel, x: &Vector, cfg: &OptimizerConfig) -> Result<Vector> {
    let (_, g) = losses::evaluate(loss, x)?;
    finite_or(x.axpy(-cfg.eta, &g), "GD update")
}

/// `L^Asc(x) = L(x + ρ ∇L/‖∇L‖)`; undefined at zero gradient.
pub fn asc_loss(loss: &dyn LossModel, x: &Vector, rho: f64) -> Result<f64> {
    let (_, g) = losses::evaluate(loss, x)?;
    let n = g.norm();
    if grad_is_zero(&g, x) {
        return Err(Error::UndefinedAscent { grad_norm: n });
    }
    Ok(loss.value(&x.axpy(rho / n, &g)))
}

/// Exact gradient of `L^Asc` by the chain rule:
/// `∇L^Asc = ∇L(y) + ρ J_gᵀ ∇L(y)` with `y = x + ρĝ` and
/// `J_g = (I − ĝĝᵀ) ∇²L(x) / ‖∇L(x)‖`.
pub fn asc_grad(loss: &dyn LossModel, x: &Vector, rho: f64) -> Result<Vector> {
    let (_, g) = losses::evaluate(loss, x)?;
    let n = g.norm();
    if n <= 1e-14 || grad_is_zero(&g, x) {
        return Err(Error::UndefinedAscent { grad_norm: n });
    }
    let gh = g.scale(1.0 / n);
    let gy = loss.grad(&x.axpy(rho, &gh));
    let projected = gy.axpy(-gh.dot(&gy), &gh);
    let h = losses::hessian(loss, x)?;
    Ok(gy.axpy(rho / n, &h.mul_vec(&projected)))
}

/// `x − η ∇L^Asc(x)`
pub fn asc_gd_step(loss: &dyn LossModel, x: &Vector, cfg: &OptimizerConfig) -> Result<Vector> {
    let g = asc_grad(loss, x, cfg.rho)?;
    finite_or(x.axpy(-cfg.eta, &g), "ascent-loss GD update")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Gd,
    Sam,
    OneSam,
    AscGd,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gd => "gd",
            Self::Sam => "sam",
            Self::OneSam => "one_sam",
            Self::AscGd => "asc_gd",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "gd" => Ok(Self::Gd),
            "sam" => Ok(Self::Sam),
            "one_sam" | "1sam" | "1_sam" => Ok(Self::OneSam),
            "asc_gd" => Ok(Self::AscGd),
            other => Err(Error::InvalidArgument(format!(
                "unknown algorithm {other:?} (expected gd, sam, one_sam or asc_gd)"
            ))),
        }
    }
}

/// An algorithm bound to its config and random stream.
#[derive(Clone, Debug)]
pub struct Stepper {
    pub algorithm: Algorithm,
    pub cfg: OptimizerConfig,
    rng: SplitMix64,
}

impl Stepper {
    pub fn new(algorithm: Algorithm, cfg: OptimizerConfig) -> Self {
        let rng = SplitMix64::new(cfg.seed);
        Self { algorithm, cfg, rng }
    }

    /// Advances one step; returns the new point and the datum index used by
    /// 1-SAM.
    pub fn step(&mut self, loss: &dyn LossModel, x: &Vector) -> Result<(Vector, Option<usize>)> {
        match self.algorithm {
            Algorithm::Gd => gd_step(loss, x, &self.cfg).map(|x| (x, None)),
            Algorithm::Sam => sam_step(loss, x, &self.cfg).map(|x| (x, None)),
            Algorithm::AscGd => asc_gd_step(loss, x, &self.cfg).map(|x| (x, None)),
            Algorithm::OneSam => one_sam_step(loss, x, &self.cfg, &mut self.rng).map(|(x, k)| (x, Some(k))),
        }
    }
}

/// Which per-record diagnostics to compute. Each needs `Φ(x)`.
#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub phi: bool,
    pub alignment: bool,
    pub worst_sharpness: bool,
    /// Radius at which worst-direction sharpness is measured.
    pub sharpness_rho: f64,
    pub phi_opts: PhiOptions,
    pub worst_opts: WorstOptions,
}

impl Diagnostics {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn all(sharpness_rho: f64) -> Self {
        Self { phi: true, alignment: true, worst_sharpness: true, sharpness_rho, ..Self::default() }
    }

    fn any(&self) -> bool {
        self.phi || self.alignment || self.worst_sharpness
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub t: u64,
    pub x: Vector,
    pub loss: f64,
    pub grad_norm: f64,
    /// Datum drawn by the step that produced this record.
    pub k: Option<usize>,
    pub phi: Option<Vector>,
    pub phi_distance: Option<f64>,
    /// `λ₁(∇²L(Φ(x)))`
    pub lambda1: Option<f64>,
    pub alignment: Option<f64>,
    pub worst_sharpness: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepFailure {
    pub step: u64,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub dim: usize,
    pub record_every: u64,
    pub records: Vec<Record>,
    /// Set when a step failed; `records` then hold the partial run.
    pub failure: Option<StepFailure>,
}

impl Trajectory {
    pub fn last(&self) -> &Record {
        self.records.last().expect("trajectory holds the initial point")
    }

    /// Errors with the recorded failure, if any.
    pub fn ok(&self) -> Result<()> {
        match &self.failure {
            None => Ok(()),
            Some(f) => Err(Error::StepFailed { step: f.step, reason: f.message.clone() }),
        }
    }
}

/// Applies `stepper` `n_steps` times from `x0`, recording `t = 0`, every
/// multiple of `record_every`, and the final step. A failed step ends the run
/// with the last finite iterate recorded.
pub fn run(
    loss: &dyn LossModel,
    stepper: &mut Stepper,
    x0: &Vector,
    n_steps: u64,
    record_every: u64,
    diagnostics: &Diagnostics,
) -> Result<Trajectory> {
    x0.check_dim(loss.dim())?;
    if record_every == 0 {
        return Err(Error::InvalidArgument("record_every must be at least 1".into()));
    }
    let mut traj = Trajectory { dim: loss.dim(), record_every, records: Vec::new(), failure: None };
    traj.records.push(make_record(loss, 0, x0.clone(), None, diagnostics)?);
    let mut x = x0.clone();
    for t in 1..=n_steps {
        match stepper.step(loss, &x) {
            Ok((next, k)) => {
                x = next;
                if t % record_every == 0 || t == n_steps {
                    match make_record(loss, t, x.clone(), k, diagnostics) {
                        Ok(r) => traj.records.push(r),
                        Err(e) => {
                            traj.failure = Some(StepFailure { step: t, message: e.to_string() });
                            break;
                        }
                    }
                }
            }
            Err(e) => {
                // keep the last iterate the step started from
                if traj.last().t + 1 < t {
                    if let Ok(r) = make_record(loss, t - 1, x.clone(), None, diagnostics) {
                        traj.records.push(r);
                    }
                }
                traj.failure = Some(StepFailure { step: t, message: e.to_string() });
                break;
            }
        }
    }
    Ok(traj)
}

fn make_record(loss: &dyn LossModel, t: u64, x: Vector, k: Option<usize>, diag: &Diagnostics) -> Result<Record> {
    let (value, g) = losses::evaluate(loss, &x)?;
    let mut rec = Record {
        t,
        loss: value,
        grad_norm: g.norm(),
        k,
        phi: None,
        phi_distance: None,
        lambda1: None,
        alignment: None,
        worst_sharpness: None,
        x,
    };
    if !diag.any() {
        return Ok(rec);
    }
    let mp = match phi(loss, &rec.x, &diag.phi_opts) {
        Ok(mp) => mp,
        Err(e) => {
            log::warn!("Φ failed at step {t}: {e}");
            return Ok(rec);
        }
    };
    rec.phi_distance = Some(rec.x.distance(&mp.p));
    rec.lambda1 = Some(mp.lambda1());
    if diag.alignment && g.norm() > 0.0 {
        rec.alignment = alignment_angle_at(loss, &rec.x, &mp).ok();
    }
    if diag.worst_sharpness {
        rec.worst_sharpness = Some(worst_sharpness(loss, &rec.x, diag.sharpness_rho, &diag.worst_opts)?.value);
    }
    rec.phi = Some(mp.p);
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::SymMatrix;
    use crate::losses::{QuadraticLoss, Toy4dLoss};
    use approx::assert_abs_diff_eq;

    fn quad() -> QuadraticLoss {
        QuadraticLoss::new(SymMatrix::diag(&[2.0, 1.0])).unwrap()
    }

    #[test]
    fn sam_step_quadratic() {
        let cfg = OptimizerConfig::new(0.1, 0.01, 2).unwrap();
        let x = sam_step(&quad(), &Vector::from([1.0, 0.0]), &cfg).unwrap();
        assert_abs_diff_eq!(x[0], 0.798, epsilon = 1e-15);
        assert_eq!(x[1], 0.0);
    }

    #[test]
    fn sam_with_zero_radius_is_gd() {
        let toy = Toy4dLoss::new();
        let cfg = OptimizerConfig::new(0.02, 0.0, 4).unwrap();
        let x = Vector::from([0.3, 0.6, 0.1, -0.2]);
        assert_eq!(sam_step(&toy, &x, &cfg).unwrap(), gd_step(&toy, &x, &cfg).unwrap());
        assert_eq!(asc_gd_step(&toy, &x, &cfg).unwrap(), gd_step(&toy, &x, &cfg).unwrap());
    }

    #[test]
    fn sam_fallback_on_manifold() {
        let toy = Toy4dLoss::new();
        let cfg = OptimizerConfig::new(0.02, 0.01, 4).unwrap();
        let x = Vector::from([0.3, 0.6, 0.0, 0.0]);
        let want = x.axpy(-0.02, &toy.grad(&x.axpy(0.01, &Vector::basis(4, 0))));
        assert_eq!(sam_step(&toy, &x, &cfg).unwrap(), want);

        let cfg = cfg.with_fallback(Vector::from([0.0, 0.0, 0.6, 0.8])).unwrap();
        let moved = sam_step(&toy, &x, &cfg).unwrap();
        assert!(moved[2] < 0.0 && moved[3] < 0.0);
    }

    #[test]
    fn one_sam_forced_component() {
        // L₀ = 2F₁x₃², F₁(0,0) = 8: ∂L₀/∂x₃ at x₃ = 0.11 is 4·8·0.11 = 3.52
        let toy = Toy4dLoss::new();
        let cfg = OptimizerConfig::new(0.01, 0.01, 4).unwrap();
        let x = one_sam_step_with(&toy, &Vector::from([0.0, 0.0, 0.1, 0.0]), &cfg, 0).unwrap();
        assert_abs_diff_eq!(x[2], 0.1 - 0.01 * 3.52, epsilon = 1e-15);
        assert_abs_diff_eq!(x[2], 0.0648, epsilon = 1e-15);
        assert_eq!((x[0], x[1], x[3]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn one_sam_zero_component_gradient_uses_fallback() {
        let toy = Toy4dLoss::new();
        let cfg = OptimizerConfig::new(0.01, 0.01, 4).unwrap();
        // L₁ = 2F₂x₄² is flat in x when x₄ = 0
        let x = Vector::from([0.2, 0.2, 0.1, 0.0]);
        let got = one_sam_step_with(&toy, &x, &cfg, 1).unwrap();
        let want = x.axpy(-0.01, &toy.component_grad(1, &x.axpy(0.01, &Vector::basis(4, 0))));
        assert_eq!(got, want);
    }

    #[test]
    fn single_component_one_sam_is_sam() {
        let cfg = OptimizerConfig::new(0.1, 0.05, 2).unwrap();
        let x = Vector::from([0.4, -0.3]);
        let mut rng = SplitMix64::new(3);
        let (a, k) = one_sam_step(&quad(), &x, &cfg, &mut rng).unwrap();
        assert_eq!(k, 0);
        assert_eq!(a, sam_step(&quad(), &x, &cfg).unwrap());
    }

    #[test]
    fn gd_examples() {
        let cfg = OptimizerConfig::new(0.1, 0.0, 2).unwrap();
        let x = gd_step(&quad(), &Vector::from([1.0, 0.0]), &cfg).unwrap();
        assert_abs_diff_eq!(x[0], 0.8, epsilon = 1e-15);
        assert_eq!(gd_step(&quad(), &Vector::zeros(2), &cfg).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn gd_linear_contraction() {
        let cfg = OptimizerConfig::new(0.3, 0.0, 2).unwrap();
        let mut x = Vector::from([1.0, -2.0]);
        let x0 = x.norm();
        for t in 1..=50 {
            x = gd_step(&quad(), &x, &cfg).unwrap();
            assert!(x.norm() <= (1.0f64 - 0.3).powi(t) * x0 + 1e-15);
        }
    }

    #[test]
    fn asc_gd_undefined_at_zero_gradient() {
        let cfg = OptimizerConfig::new(0.1, 0.01, 2).unwrap();
        assert!(matches!(asc_gd_step(&quad(), &Vector::zeros(2), &cfg), Err(Error::UndefinedAscent { .. })));
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::new(0.0, 0.1, 2).is_err());
        assert!(OptimizerConfig::new(0.1, -0.1, 2).is_err());
        assert!(OptimizerConfig::new(0.1, f64::NAN, 2).is_err());
        let cfg = OptimizerConfig::new(0.1, 0.1, 2).unwrap();
        assert!(cfg.clone().with_fallback(Vector::from([1.0, 1.0])).is_err());
        assert!(cfg.with_fallback(Vector::from([0.0, 1.0, 0.0])).is_err());
    }

    #[test]
    fn run_zero_steps() {
        let cfg = OptimizerConfig::new(0.1, 0.01, 2).unwrap();
        let mut s = Stepper::new(Algorithm::Sam, cfg);
        let traj = run(&quad(), &mut s, &Vector::from([1.0, 1.0]), 0, 10, &Diagnostics::none()).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.records[0].t, 0);
    }

    #[test]
    fn run_records_stride_and_final_step() {
        let cfg = OptimizerConfig::new(0.1, 0.01, 2).unwrap();
        let mut s = Stepper::new(Algorithm::Sam, cfg);
        let traj = run(&quad(), &mut s, &Vector::from([1.0, 1.0]), 25, 10, &Diagnostics::none()).unwrap();
        let ts: Vec<u64> = traj.records.iter().map(|r| r.t).collect();
        assert_eq!(ts, vec![0, 10, 20, 25]);
    }

    #[test]
    fn run_stops_on_failure_with_partial_trajectory() {
        let cfg = OptimizerConfig::new(0.1, 0.01, 2).unwrap();
        let mut s = Stepper::new(Algorithm::AscGd, cfg);
        // the ascent loss is undefined at the minimizer
        let traj = run(&quad(), &mut s, &Vector::zeros(2), 5, 1, &Diagnostics::none()).unwrap();
        assert_eq!(traj.records.len(), 1);
        assert_eq!(traj.failure.as_ref().unwrap().step, 1);
        assert!(traj.ok().is_err());
    }

    #[test]
    fn one_sam_seeded_sequence_is_reproducible() {
        let toy = Toy4dLoss::new();
        let cfg = OptimizerConfig::new(0.01, 0.01, 4).unwrap().with_seed(99);
        let x0 = Vector::from([0.5, 0.5, 0.2, 0.1]);
        let ks = |cfg: &OptimizerConfig| {
            let mut s = Stepper::new(Algorithm::OneSam, cfg.clone());
            let mut x = x0.clone();
            (0..200)
                .map(|_| {
                    let (nx, k) = s.step(&toy, &x).unwrap();
                    x = nx;
                    k.unwrap()
                })
                .collect::<Vec<_>>()
        };
        let a = ks(&cfg);
        assert_eq!(a, ks(&cfg));
        assert_ne!(a, ks(&cfg.clone().with_seed(100)));
    }
}
