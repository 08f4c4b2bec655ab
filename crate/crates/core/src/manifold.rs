//! The gradient-flow limit map Φ, tangent projectors on the minimizer
//! manifold, Riemannian gradients of `λ₁(∇²L)` and `Tr(∇²L)`, and the
//! limiting flows they drive.

use serde::{Deserialize, Serialize};

use crate::densela::{eig_sym, numerical_rank, EigenDecomposition, SymMatrix, Vector, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::losses::{self, third_directional, third_order_step, LossModel};

/// Relative eigengap below which `λ₁` is treated as non-differentiable.
pub const GAP_REL_TOL: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiOptions {
    /// Stop once `‖∇L‖ ≤ tol`.
    pub tol: f64,
    /// Budget of accepted RK4 steps.
    pub max_steps: u64,
    pub h_init: f64,
    pub h_max: f64,
    /// Step-doubling local error bound, scaled by `1 + ‖x‖`.
    pub local_tol: f64,
    pub rank_tol: f64,
}

impl Default for PhiOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_steps: 10_000_000,
            h_init: 1e-2,
            h_max: 10.0,
            local_tol: 1e-13,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

/// `Φ(x)` together with the local spectral data at that point.
#[derive(Clone, Debug)]
pub struct ManifoldPoint {
    pub p: Vector,
    pub residual_grad_norm: f64,
    /// Accepted integration steps.
    pub steps: u64,
    pub spectrum: EigenDecomposition,
    pub rank: usize,
    /// `I − Σ_{i<M} v_i v_iᵀ`
    pub tangent_projector: SymMatrix,
}

impl ManifoldPoint {
    /// Spectral data at a point assumed to lie on the manifold.
    pub fn at(loss: &dyn LossModel, p: Vector, rank_tol: f64) -> Result<Self> {
        let residual_grad_norm = losses::evaluate(loss, &p)?.1.norm();
        let mut spectrum = eig_sym(&losses::hessian(loss, &p)?)?;
        spectrum.rank_tol = rank_tol;
        let rank = numerical_rank(&spectrum, rank_tol);
        let tangent_projector = tangent_projector(&spectrum, rank);
        Ok(Self { p, residual_grad_norm, steps: 0, spectrum, rank, tangent_projector })
    }

    pub fn lambda1(&self) -> f64 {
        self.spectrum.values[0]
    }
}

fn tangent_projector(spectrum: &EigenDecomposition, rank: usize) -> SymMatrix {
    let n = spectrum.dim();
    SymMatrix::from_fn(n, |i, j| {
        let normal: f64 = (0..rank).map(|k| spectrum.vectors[k][i] * spectrum.vectors[k][j]).sum();
        if i == j {
            1.0 - normal
        } else {
            -normal
        }
    })
}

/// `Φ(x)`: the end point of the gradient flow `dX/dτ = −∇L(X)` from `x`.
pub fn phi(loss: &dyn LossModel, x: &Vector, opts: &PhiOptions) -> Result<ManifoldPoint> {
    phi_traced(loss, x, opts, |_, _| {})
}

/// [`phi`] with a callback on every accepted step, receiving the point and
/// its loss.
pub fn phi_traced(
    loss: &dyn LossModel,
    x: &Vector,
    opts: &PhiOptions,
    mut on_step: impl FnMut(&Vector, f64),
) -> Result<ManifoldPoint> {
    let (p, steps) = gradient_flow(loss, x, opts, &mut on_step)?;
    let mut mp = ManifoldPoint::at(loss, p, opts.rank_tol)?;
    mp.steps = steps;
    Ok(mp)
}

fn rk4(loss: &dyn LossModel, x: &Vector, g0: &Vector, h: f64) -> Vector {
    let k1 = g0;
    let k2 = loss.grad(&x.axpy(-0.5 * h, k1));
    let k3 = loss.grad(&x.axpy(-0.5 * h, &k2));
    let k4 = loss.grad(&x.axpy(-h, &k3));
    let mut incr = k1 + &k2.scale(2.0);
    incr += &k3.scale(2.0);
    incr += &k4;
    x.axpy(-h / 6.0, &incr)
}

/// Classical RK4 with step-doubling error control; a step is also rejected
/// (and the step halved) whenever it would increase the loss.
fn gradient_flow(
    loss: &dyn LossModel,
    x0: &Vector,
    opts: &PhiOptions,
    on_step: &mut dyn FnMut(&Vector, f64),
) -> Result<(Vector, u64)> {
    let (mut value, mut g) = losses::evaluate(loss, x0)?;
    let mut x = x0.clone();
    let mut h = opts.h_init;
    let mut steps = 0u64;
    let mut attempts = 0u64;
    while g.norm() > opts.tol {
        if steps >= opts.max_steps || attempts >= opts.max_steps.saturating_mul(4) {
            return Err(Error::NonConvergent { steps, residual: g.norm() });
        }
        attempts += 1;
        let full = rk4(loss, &x, &g, h);
        let half = rk4(loss, &x, &g, 0.5 * h);
        let g_half = loss.grad(&half);
        let two_half = rk4(loss, &half, &g_half, 0.5 * h);
        let err = (&two_half - &full).norm() / 15.0;
        let new_value = loss.value(&two_half);
        let bound = opts.local_tol * (1.0 + x.norm());
        let ok = two_half.is_finite() && new_value.is_finite() && new_value <= value && err <= bound;
        if !ok {
            h *= if err.is_finite() && err > 0.0 { (0.9 * (bound / err).powf(0.2)).clamp(0.1, 0.5) } else { 0.5 };
            if h < 1e-300 {
                return Err(Error::NonConvergent { steps, residual: g.norm() });
            }
            continue;
        }
        x = two_half;
        value = new_value;
        g = loss.grad(&x);
        if !g.is_finite() {
            return Err(Error::NonFinite { what: format!("gradient flow at x = {x:?}") });
        }
        steps += 1;
        on_step(&x, value);
        let grow = if err > 0.0 { (0.9 * (bound / err).powf(0.2)).clamp(1.0, 2.0) } else { 2.0 };
        h = (h * grow).min(opts.h_max);
    }
    Ok((x, steps))
}

/// `‖(Φ(x + h d) − Φ(x − h d)) / 2h‖`, a difference estimate of `‖∂Φ(x) d‖`.
pub fn phi_directional(loss: &dyn LossModel, x: &Vector, dir: &Vector, h: f64, opts: &PhiOptions) -> Result<f64> {
    let d = dir
        .normalized()
        .ok_or_else(|| Error::InvalidArgument("direction must be nonzero".into()))?;
    let plus = phi(loss, &x.axpy(h, &d), opts)?;
    let minus = phi(loss, &x.axpy(-h, &d), opts)?;
    Ok((&plus.p - &minus.p).norm() / (2.0 * h))
}

/// Finite-difference estimate of `‖∂Φ(x) ∇L(x)/‖∇L(x)‖‖`, which vanishes
/// because Φ is constant along gradient-flow trajectories.
pub fn phi_annihilation_residual(loss: &dyn LossModel, x: &Vector, h: f64, opts: &PhiOptions) -> Result<f64> {
    let (_, g) = losses::evaluate(loss, x)?;
    if g.norm() == 0.0 {
        return Err(Error::InvalidArgument("gradient vanishes at x".into()));
    }
    phi_directional(loss, x, &g, h, opts)
}

/// `∇λ₁(∇²L)(p) = ∂²(∇L)(p)[v₁, v₁]`. Requires a positive eigengap.
pub fn grad_lambda1(loss: &dyn LossModel, p: &Vector) -> Result<Vector> {
    let e = eig_sym(&losses::hessian(loss, p)?)?;
    check_gap(&e)?;
    third_directional(loss, p, &e.vectors[0])
}

fn check_gap(e: &EigenDecomposition) -> Result<()> {
    if e.dim() < 2 {
        return Ok(());
    }
    let gap = e.values[0] - e.values[1];
    let tol = GAP_REL_TOL * e.values[0].abs();
    if gap > tol {
        Ok(())
    } else {
        Err(Error::Eigengap { gap, tol })
    }
}

/// Central differences of `x ↦ Tr(∇²L(x))`.
pub fn grad_trace(loss: &dyn LossModel, p: &Vector) -> Result<Vector> {
    p.check_dim(loss.dim())?;
    let h = third_order_step(p);
    (0..p.dim())
        .map(|j| {
            let mut xp = p.clone();
            let mut xm = p.clone();
            xp[j] += h;
            xm[j] -= h;
            let d = (losses::hessian(loss, &xp)?.trace() - losses::hessian(loss, &xm)?.trace()) / (2.0 * h);
            Ok(d)
        })
        .collect::<Result<Vec<f64>>>()
        .map(Vector::from)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FlowKind {
    /// Riemannian gradient flow of `λ₁(∇²L)`.
    Lambda1,
    /// Riemannian gradient flow of `Tr(∇²L)`.
    Trace,
}

impl FlowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Lambda1 => "lambda1",
            Self::Trace => "trace",
        }
    }

    /// The scalar field the flow decreases.
    pub fn field(self, loss: &dyn LossModel, p: &Vector) -> Result<f64> {
        let h = losses::hessian(loss, p)?;
        Ok(match self {
            Self::Lambda1 => eig_sym(&h)?.values[0],
            Self::Trace => h.trace(),
        })
    }

    fn gradient(self, loss: &dyn LossModel, p: &Vector) -> Result<Vector> {
        match self {
            Self::Lambda1 => grad_lambda1(loss, p),
            Self::Trace => grad_trace(loss, p),
        }
    }
}

impl std::str::FromStr for FlowKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda1" => Ok(Self::Lambda1),
            "trace" => Ok(Self::Trace),
            other => Err(Error::InvalidArgument(format!("unknown flow kind {other:?} (expected lambda1 or trace)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Horizon in flow time τ.
    pub horizon: f64,
    pub dt: f64,
    pub reproject_every: usize,
    pub phi: PhiOptions,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { horizon: 1.0, dt: 1e-3, reproject_every: 10, phi: PhiOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct FlowAbort {
    pub tau: f64,
    pub reason: String,
}

/// Samples `(τ, X(τ))` of a limiting flow, taken after each reprojection.
#[derive(Clone, Debug)]
pub struct FlowSolution {
    pub kind: FlowKind,
    pub dt: f64,
    pub reproject_every: usize,
    pub samples: Vec<(f64, Vector)>,
    pub abort: Option<FlowAbort>,
}

impl FlowSolution {
    pub fn end(&self) -> &Vector {
        &self.samples.last().expect("flow has an initial sample").1
    }

    pub fn final_tau(&self) -> f64 {
        self.samples.last().map_or(0.0, |s| s.0)
    }

    /// Linear interpolation of the samples; `None` beyond the last sample.
    pub fn at(&self, tau: f64) -> Option<Vector> {
        let idx = self.samples.partition_point(|(t, _)| *t < tau);
        if idx == 0 {
            return self.samples.first().map(|s| s.1.clone());
        }
        if idx == self.samples.len() {
            let (t_last, x_last) = self.samples.last()?;
            return (tau <= *t_last + 1e-12).then(|| x_last.clone());
        }
        let (t0, x0) = &self.samples[idx - 1];
        let (t1, x1) = &self.samples[idx];
        let w = (tau - t0) / (t1 - t0);
        Some(x0.axpy(w, &(x1 - x0)))
    }
}

/// Explicit Euler on `dX/dτ = −½ Π_tangent(X) ∇S(X)` from `X(0) = Φ(x_init)`,
/// pulling the iterate back with Φ every `reproject_every` steps.
pub fn riemannian_flow(loss: &dyn LossModel, x_init: &Vector, kind: FlowKind, opts: &FlowOptions) -> Result<FlowSolution> {
    if !(opts.dt > 0.0 && opts.horizon >= 0.0 && opts.reproject_every >= 1) {
        return Err(Error::InvalidArgument("flow needs dt > 0, horizon ≥ 0 and reproject_every ≥ 1".into()));
    }
    let start = phi(loss, x_init, &opts.phi)?;
    let rank = start.rank;
    let mut solution = FlowSolution {
        kind,
        dt: opts.dt,
        reproject_every: opts.reproject_every,
        samples: vec![(0.0, start.p.clone())],
        abort: None,
    };
    let n_steps = (opts.horizon / opts.dt).round() as usize;
    let mut x = start.p;
    for step in 1..=n_steps {
        let tau = step as f64 * opts.dt;
        let velocity = match flow_velocity(loss, &x, kind, rank) {
            Ok(v) => v,
            Err(e) => {
                solution.abort = Some(FlowAbort { tau: tau - opts.dt, reason: e.to_string() });
                return Ok(solution);
            }
        };
        x = x.axpy(opts.dt, &velocity);
        if step % opts.reproject_every == 0 || step == n_steps {
            match phi(loss, &x, &opts.phi) {
                Ok(mp) => x = mp.p,
                Err(e) => {
                    solution.abort = Some(FlowAbort { tau, reason: format!("reprojection failed: {e}") });
                    return Ok(solution);
                }
            }
            solution.samples.push((tau, x.clone()));
        }
    }
    Ok(solution)
}

/// `−½ Π ∇S` with the normal space spanned by the top `rank` eigenvectors.
fn flow_velocity(loss: &dyn LossModel, x: &Vector, kind: FlowKind, rank: usize) -> Result<Vector> {
    let e = eig_sym(&losses::hessian(loss, x)?)?;
    let grad = kind.gradient(loss, x)?;
    let proj = tangent_projector(&e, rank);
    Ok(proj.mul_vec(&grad).scale(-0.5))
}
