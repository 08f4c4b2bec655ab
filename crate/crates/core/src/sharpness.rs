//! Worst-, ascent- and average-direction sharpness, their limiting
//! regularizers on the minimizer manifold, and trajectory diagnostics built
//! on them (Hessian–gradient alignment, phase residuals).

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::densela::{eig_sym, numerical_rank, Vector};
use crate::error::{Error, Result};
use crate::losses::{self, LossModel};
use crate::manifold::{phi, ManifoldPoint, PhiOptions};
use crate::optim::grad_is_zero;
use crate::rng::SplitMix64;

/// Default Monte-Carlo sample count for [`avg_sharpness`].
pub const DEFAULT_MC_SAMPLES: usize = 100_000;
pub const DEFAULT_MC_SEED: u64 = 0x5A4D_2023;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstOptions {
    /// Random starting directions in addition to the structured ones.
    pub n_random: usize,
    /// Initial normalized-gradient step on the sphere.
    pub step: f64,
    pub iterations: usize,
    pub seed: u64,
}

impl Default for WorstOptions {
    fn default() -> Self {
        Self { n_random: 8, step: 0.1, iterations: 200, seed: 0x3A11 }
    }
}

/// Best value of `L(x + ρv) − L(x)` found over `‖v‖ ≤ 1`, with its direction.
///
/// This is a lower bound on the true maximum. Every evaluated candidate,
/// including the ascent direction, is dominated by the reported value.
#[derive(Clone, Debug, PartialEq)]
pub struct WorstSharpness {
    pub value: f64,
    pub direction: Vector,
}

/// Multistart projected ascent on the unit sphere. Starts from `±v₁(∇²L(x))`,
/// `±∇L/‖∇L‖` when the gradient is nonzero, and `n_random` Gaussian
/// directions.
pub fn worst_sharpness(loss: &dyn LossModel, x: &Vector, rho: f64, opts: &WorstOptions) -> Result<WorstSharpness> {
    if !(rho >= 0.0 && rho.is_finite()) {
        return Err(Error::InvalidArgument(format!("rho must be a finite non-negative number, got {rho}")));
    }
    let (base, g) = losses::evaluate(loss, x)?;
    let d = x.dim();
    let mut inits = Vec::with_capacity(4 + opts.n_random);
    let e = eig_sym(&losses::hessian(loss, x)?)?;
    inits.push(e.vectors[0].clone());
    inits.push(-&e.vectors[0]);
    if !grad_is_zero(&g, x) {
        let gh = g.scale(1.0 / g.norm());
        inits.push(-&gh);
        inits.push(gh);
    }
    let mut rng = SplitMix64::new(opts.seed);
    while inits.len() < 4 + opts.n_random {
        if let Some(v) = gaussian_direction(&mut rng, d) {
            inits.push(v);
        }
    }

    let f = |v: &Vector| loss.value(&x.axpy(rho, v)) - base;
    let mut best = WorstSharpness { value: 0.0, direction: inits[0].clone() };
    if rho == 0.0 {
        return Ok(best);
    }
    for v0 in inits {
        let (value, direction) = sphere_ascent(loss, x, rho, v0, opts, &f);
        if value > best.value {
            best = WorstSharpness { value, direction };
        }
    }
    Ok(best)
}

fn sphere_ascent(
    loss: &dyn LossModel,
    x: &Vector,
    rho: f64,
    mut v: Vector,
    opts: &WorstOptions,
    f: &dyn Fn(&Vector) -> f64,
) -> (f64, Vector) {
    let mut fv = f(&v);
    let mut step = opts.step;
    for _ in 0..opts.iterations {
        let g = loss.grad(&x.axpy(rho, &v));
        let tangent = g.axpy(-g.dot(&v), &v);
        let Some(dir) = tangent.normalized() else { break };
        loop {
            let Some(cand) = v.axpy(step, &dir).normalized() else { break };
            let fc = f(&cand);
            if fc > fv {
                v = cand;
                fv = fc;
                step = (step * 2.0).min(opts.step);
                break;
            }
            step *= 0.5;
            if step < 1e-12 {
                break;
            }
        }
        if step < 1e-12 {
            break;
        }
    }
    (fv, v)
}

pub(crate) fn gaussian_direction(rng: &mut SplitMix64, d: usize) -> Option<Vector> {
    let g: Vector = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    g.normalized()
}

/// Ascent-direction sharpness, or `Undefined` where the gradient vanishes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", content = "value", rename_all = "lowercase")]
pub enum AscentSharpness {
    Finite(f64),
    /// `∇L(x) = 0`; the functional is taken to be `+∞` here.
    Undefined,
}

impl AscentSharpness {
    pub fn finite(self) -> Option<f64> {
        match self {
            Self::Finite(v) => Some(v),
            Self::Undefined => None,
        }
    }
}

/// `L(x + ρ ∇L/‖∇L‖) − L(x)`.
pub fn ascent_sharpness(loss: &dyn LossModel, x: &Vector, rho: f64) -> Result<AscentSharpness> {
    let (base, g) = losses::evaluate(loss, x)?;
    if grad_is_zero(&g, x) {
        return Ok(AscentSharpness::Undefined);
    }
    let y = x.axpy(rho / g.norm(), &g);
    Ok(AscentSharpness::Finite(loss.value(&y) - base))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvgSharpness {
    pub mean: f64,
    /// Sample standard deviation over `√n`; NaN for a single sample.
    pub stderr: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Monte-Carlo estimate of `E_u[L(x + ρu) − L(x)]` over uniform unit `u`,
/// drawn as normalized standard Gaussians from a SplitMix64 stream.
pub fn avg_sharpness(loss: &dyn LossModel, x: &Vector, rho: f64, n_samples: usize, seed: u64) -> Result<AvgSharpness> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let (base, _) = losses::evaluate(loss, x)?;
    let mut rng = SplitMix64::new(seed);
    let (mut mean, mut m2) = (0.0, 0.0);
    let mut n = 0usize;
    while n < n_samples {
        let Some(u) = gaussian_direction(&mut rng, x.dim()) else { continue };
        let s = loss.value(&x.axpy(rho, &u)) - base;
        n += 1;
        let delta = s - mean;
        mean += delta / n as f64;
        m2 += delta * (s - mean);
    }
    let stderr = if n > 1 { (m2 / (n - 1) as f64).sqrt() / (n as f64).sqrt() } else { f64::NAN };
    Ok(AvgSharpness { mean, stderr, samples: n, seed })
}

/// All three sharpness functionals at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct SharpnessReport {
    pub rho: f64,
    pub worst: WorstSharpness,
    pub ascent: AscentSharpness,
    pub average: AvgSharpness,
}

pub fn sharpness_report(
    loss: &dyn LossModel,
    x: &Vector,
    rho: f64,
    worst_opts: &WorstOptions,
    n_samples: usize,
    seed: u64,
) -> Result<SharpnessReport> {
    Ok(SharpnessReport {
        rho,
        worst: worst_sharpness(loss, x, rho, worst_opts)?,
        ascent: ascent_sharpness(loss, x, rho)?,
        average: avg_sharpness(loss, x, rho, n_samples, seed)?,
    })
}

/// Closed-form limiting regularizers at a manifold point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitingRegularizers {
    /// `λ₁/2`
    pub s_max: f64,
    /// `λ_M/2`, the smallest eigenvalue above the rank threshold
    pub s_asc: f64,
    /// `Tr/(2D)`
    pub s_avg: f64,
    pub rank: usize,
    /// `mean_k λ₁(∇²L_k)/2` for losses with several components.
    pub stochastic_max: Option<f64>,
    /// `Tr(∇²L)/2`, the value `stochastic_max` should equal.
    pub trace_half: f64,
}

impl LimitingRegularizers {
    pub fn get(&self, kind: SharpnessType) -> f64 {
        match kind {
            SharpnessType::Max => self.s_max,
            SharpnessType::Asc => self.s_asc,
            SharpnessType::Avg => self.s_avg,
        }
    }
}

pub fn limiting_regularizers(loss: &dyn LossModel, p: &Vector, rank_tol: f64) -> Result<LimitingRegularizers> {
    let (_, g) = losses::evaluate(loss, p)?;
    if g.norm() > 1e-6 {
        log::warn!("limiting regularizers requested off the manifold (‖∇L‖ = {:e})", g.norm());
    }
    let h = losses::hessian(loss, p)?;
    let e = eig_sym(&h)?;
    let rank = numerical_rank(&e, rank_tol);
    if rank == 0 {
        return Err(Error::ZeroRank);
    }
    let m = loss.component_count();
    let stochastic_max = if m > 1 {
        let mut total = 0.0;
        for k in 0..m {
            total += eig_sym(&loss.component_hessian(k, p))?.values[0];
        }
        Some(total / (2.0 * m as f64))
    } else {
        None
    };
    Ok(LimitingRegularizers {
        s_max: e.values[0] / 2.0,
        s_asc: e.values[rank - 1] / 2.0,
        s_avg: h.trace() / (2.0 * p.dim() as f64),
        rank,
        stochastic_max,
        trace_half: h.trace() / 2.0,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SharpnessType {
    Max,
    Asc,
    Avg,
}

impl SharpnessType {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Max => "max",
            Self::Asc => "asc",
            Self::Avg => "avg",
        }
    }
}

impl std::str::FromStr for SharpnessType {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "max" => Ok(Self::Max),
            "asc" => Ok(Self::Asc),
            "avg" => Ok(Self::Avg),
            other => Err(Error::InvalidArgument(format!("unknown sharpness type {other:?} (expected max, asc or avg)"))),
        }
    }
}

/// Angle in `[0, π/2]` between `∇L(x)` and the top eigenvector of
/// `∇²L(Φ(x))`.
pub fn alignment_angle(loss: &dyn LossModel, x: &Vector, opts: &PhiOptions) -> Result<f64> {
    let mp = phi(loss, x, opts)?;
    alignment_angle_at(loss, x, &mp)
}

/// [`alignment_angle`] with a precomputed `Φ(x)`.
pub fn alignment_angle_at(loss: &dyn LossModel, x: &Vector, mp: &ManifoldPoint) -> Result<f64> {
    let (_, g) = losses::evaluate(loss, x)?;
    let n = g.norm();
    if n == 0.0 {
        return Err(Error::InvalidArgument("alignment angle undefined at zero gradient".into()));
    }
    let c = (g.dot(&mp.spectrum.vectors[0]).abs() / n).min(1.0);
    Ok(c.acos())
}

/// `R_j(x) = √(Σ_{i≥j}^{M} λ_i² ⟨v_i, x − Φ(x)⟩²) − ηρλ_j²` with 0-based `j < M`,
/// eigenpairs taken at `Φ(x)`.
pub fn phase_residual(loss: &dyn LossModel, x: &Vector, eta: f64, rho: f64, j: usize, opts: &PhiOptions) -> Result<f64> {
    let mp = phi(loss, x, opts)?;
    phase_residual_at(x, eta, rho, j, &mp)
}

pub fn phase_residual_at(x: &Vector, eta: f64, rho: f64, j: usize, mp: &ManifoldPoint) -> Result<f64> {
    if j >= mp.rank {
        return Err(Error::IndexOutOfRange { index: j, size: mp.rank });
    }
    let d = x - &mp.p;
    let e = &mp.spectrum;
    let sum: f64 = (j..mp.rank).map(|i| (e.values[i] * e.vectors[i].dot(&d)).powi(2)).sum();
    Ok(sum.sqrt() - eta * rho * e.values[j] * e.values[j])
}
