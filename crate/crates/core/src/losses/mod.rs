//! Loss models: the [`LossModel`] interface and the concrete quadratic, 4D
//! toy and factored-regression losses.
//!
//! Stochastic losses expose `M` per-datum components with the convention
//! `L = (1/M) Σ_k L_k`. Deterministic losses have a single component equal
//! to the loss itself.

mod factored;
mod quadratic;
mod spec;
mod toy4d;

pub use factored::{FactoredRegressionLoss, Monomial, Polynomial};
pub use quadratic::QuadraticLoss;
pub use spec::{DatumSpec, LossSpec, TermSpec};
pub use toy4d::Toy4dLoss;

use crate::densela::{SymMatrix, Vector};
use crate::error::{Error, Result};

/// An evaluatable, twice differentiable loss on `R^D`.
pub trait LossModel: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &Vector) -> f64;

    fn grad(&self, x: &Vector) -> Vector;

    /// Hessian at `x`. Models without an analytic Hessian fall back to
    /// central differences of the gradient.
    fn hessian(&self, x: &Vector) -> SymMatrix {
        fd_hessian(self, x)
    }

    /// Number of per-datum components `M`.
    fn component_count(&self) -> usize {
        1
    }

    fn component_value(&self, k: usize, x: &Vector) -> f64 {
        debug_assert_eq!(k, 0);
        self.value(x)
    }

    fn component_grad(&self, k: usize, x: &Vector) -> Vector {
        debug_assert_eq!(k, 0);
        self.grad(x)
    }

    fn component_hessian(&self, k: usize, x: &Vector) -> SymMatrix {
        debug_assert_eq!(k, 0);
        self.hessian(x)
    }

    fn name(&self) -> &str;
}

/// Borrowed view of the `k`-th component of a stochastic loss.
#[derive(Clone, Copy)]
pub struct Component<'a> {
    parent: &'a dyn LossModel,
    k: usize,
}

impl Component<'_> {
    pub fn index(&self) -> usize {
        self.k
    }
}

impl LossModel for Component<'_> {
    fn dim(&self) -> usize {
        self.parent.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        self.parent.component_value(self.k, x)
    }

    fn grad(&self, x: &Vector) -> Vector {
        self.parent.component_grad(self.k, x)
    }

    fn hessian(&self, x: &Vector) -> SymMatrix {
        self.parent.component_hessian(self.k, x)
    }

    fn name(&self) -> &str {
        "component"
    }
}

/// The `k`-th component `L_k` (0-based).
pub fn component(loss: &dyn LossModel, k: usize) -> Result<Component<'_>> {
    let m = loss.component_count();
    if k >= m {
        return Err(Error::IndexOutOfRange { index: k, size: m });
    }
    Ok(Component { parent: loss, k })
}

/// Value and gradient with dimension and finiteness checks.
pub fn evaluate(loss: &dyn LossModel, x: &Vector) -> Result<(f64, Vector)> {
    x.check_dim(loss.dim())?;
    let value = loss.value(x);
    let grad = loss.grad(x);
    if !value.is_finite() || !grad.is_finite() {
        return Err(Error::NonFinite { what: format!("loss evaluation at x = {x:?}") });
    }
    Ok((value, grad))
}

/// Checked Hessian.
pub fn hessian(loss: &dyn LossModel, x: &Vector) -> Result<SymMatrix> {
    x.check_dim(loss.dim())?;
    let h = loss.hessian(x);
    h.check_finite(&format!("Hessian at x = {x:?}"))?;
    Ok(h)
}

/// Step for Hessian-from-gradient differences: `ε^{1/3} (1 + ‖x‖)`.
pub fn hessian_step(x: &Vector) -> f64 {
    f64::EPSILON.cbrt() * (1.0 + x.norm())
}

/// Step for second directional differences of the gradient: `ε^{1/4} (1 + ‖x‖)`.
pub fn third_order_step(x: &Vector) -> f64 {
    f64::EPSILON.powf(0.25) * (1.0 + x.norm())
}

/// Symmetrized central-difference Hessian of `loss.grad`.
pub fn fd_hessian<L: LossModel + ?Sized>(loss: &L, x: &Vector) -> SymMatrix {
    let n = x.dim();
    let h = hessian_step(x);
    let cols: Vec<Vector> = (0..n)
        .map(|j| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            (loss.grad(&xp) - loss.grad(&xm)) * (0.5 / h)
        })
        .collect();
    SymMatrix::from_fn(n, |i, j| cols[j][i])
}

/// Central-difference gradient of `loss.value`.
pub fn fd_grad<L: LossModel + ?Sized>(loss: &L, x: &Vector) -> Vector {
    let h = hessian_step(x);
    (0..x.dim())
        .map(|j| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            (loss.value(&xp) - loss.value(&xm)) / (2.0 * h)
        })
        .collect()
}

/// `∂²(∇L)(x)[u, u]` by the second central difference of the gradient
/// along the unit vector `u`.
pub fn third_directional(loss: &dyn LossModel, x: &Vector, u: &Vector) -> Result<Vector> {
    x.check_dim(loss.dim())?;
    u.check_dim(loss.dim())?;
    let un = u.norm();
    if (un - 1.0).abs() > 1e-8 {
        return Err(Error::InvalidArgument(format!("direction must have unit norm, got {un}")));
    }
    let h = third_order_step(x);
    let gp = loss.grad(&x.axpy(h, u));
    let gm = loss.grad(&x.axpy(-h, u));
    let g0 = loss.grad(x);
    let out = (gp + gm - g0.scale(2.0)) * (1.0 / (h * h));
    if !out.is_finite() {
        return Err(Error::NonFinite { what: format!("third directional derivative at x = {x:?}") });
    }
    Ok(out)
}
