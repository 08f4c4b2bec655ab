use crate::densela::{SymMatrix, Vector};

use super::LossModel;

/// `L(x) = F₁(x₁,x₂) x₃² + F₂(x₁,x₂) x₄²` with
/// `F₁ = x₁² + 6x₂² + 8` and `F₂ = 4(1−x₁)² + (1−x₂)² + 1`.
///
/// The zero-loss manifold is `{x₃ = x₄ = 0}` and the Hessian there is
/// `diag(0, 0, 2F₁, 2F₂)`. Note the factor two: the top eigenvalue on the
/// manifold is `2F₁`, not `F₁`.
///
/// Two components `L₀ = 2F₁x₃²` and `L₁ = 2F₂x₄²`, so that their mean is `L`.
#[derive(Clone, Copy, Debug, Default)]
pub struct Toy4dLoss;

impl Toy4dLoss {
    pub fn new() -> Self {
        Self
    }

    pub fn f1(x1: f64, x2: f64) -> f64 {
        x1 * x1 + 6.0 * x2 * x2 + 8.0
    }

    pub fn f2(x1: f64, x2: f64) -> f64 {
        4.0 * (1.0 - x1).powi(2) + (1.0 - x2).powi(2) + 1.0
    }

    /// Value, gradient and Hessian of `w₁F₁x₃² + w₂F₂x₄²`.
    fn weighted_value(w: [f64; 2], x: &Vector) -> f64 {
        let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
        w[0] * Self::f1(x1, x2) * x3 * x3 + w[1] * Self::f2(x1, x2) * x4 * x4
    }

    fn weighted_grad(w: [f64; 2], x: &Vector) -> Vector {
        let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
        let (a, b) = (w[0] * x3 * x3, w[1] * x4 * x4);
        Vector::from([
            a * 2.0 * x1 - b * 8.0 * (1.0 - x1),
            a * 12.0 * x2 - b * 2.0 * (1.0 - x2),
            w[0] * 2.0 * Self::f1(x1, x2) * x3,
            w[1] * 2.0 * Self::f2(x1, x2) * x4,
        ])
    }

    fn weighted_hessian(w: [f64; 2], x: &Vector) -> SymMatrix {
        let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
        let mut h = SymMatrix::zeros(4);
        h.set(0, 0, w[0] * 2.0 * x3 * x3 + w[1] * 8.0 * x4 * x4);
        h.set(1, 1, w[0] * 12.0 * x3 * x3 + w[1] * 2.0 * x4 * x4);
        h.set(0, 2, w[0] * 4.0 * x1 * x3);
        h.set(1, 2, w[0] * 24.0 * x2 * x3);
        h.set(0, 3, -w[1] * 16.0 * (1.0 - x1) * x4);
        h.set(1, 3, -w[1] * 4.0 * (1.0 - x2) * x4);
        h.set(2, 2, w[0] * 2.0 * Self::f1(x1, x2));
        h.set(3, 3, w[1] * 2.0 * Self::f2(x1, x2));
        h
    }

    fn component_weights(k: usize) -> [f64; 2] {
        match k {
            0 => [2.0, 0.0],
            1 => [0.0, 2.0],
            _ => panic!("toy loss has two components, got index {k}"),
        }
    }
}

impl LossModel for Toy4dLoss {
    fn dim(&self) -> usize {
        4
    }

    fn value(&self, x: &Vector) -> f64 {
        Self::weighted_value([1.0, 1.0], x)
    }

    fn grad(&self, x: &Vector) -> Vector {
        Self::weighted_grad([1.0, 1.0], x)
    }

    fn hessian(&self, x: &Vector) -> SymMatrix {
        Self::weighted_hessian([1.0, 1.0], x)
    }

    fn component_count(&self) -> usize {
        2
    }

    fn component_value(&self, k: usize, x: &Vector) -> f64 {
        Self::weighted_value(Self::component_weights(k), x)
    }

    fn component_grad(&self, k: usize, x: &Vector) -> Vector {
        Self::weighted_grad(Self::component_weights(k), x)
    }

    fn component_hessian(&self, k: usize, x: &Vector) -> SymMatrix {
        Self::weighted_hessian(Self::component_weights(k), x)
    }

    fn name(&self) -> &str {
        "toy4d"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::eig_sym;
    use crate::losses::evaluate;
    use approx::assert_abs_diff_eq;

    #[test]
    fn value_and_grad_examples() {
        let toy = Toy4dLoss::new();
        let (v, g) = evaluate(&toy, &Vector::from([0.0, 0.0, 0.1, 0.0])).unwrap();
        assert_abs_diff_eq!(v, 0.08, epsilon = 1e-15);
        assert_abs_diff_eq!((&g - &Vector::from([0.0, 0.0, 1.6, 0.0])).norm(), 0.0, epsilon = 1e-15);

        let (v, g) = evaluate(&toy, &Vector::from([0.3, -0.7, 0.0, 0.0])).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g.norm(), 0.0);
    }

    #[test]
    fn hessian_at_origin() {
        let h = Toy4dLoss::new().hessian(&Vector::zeros(4));
        assert_eq!(h, SymMatrix::diag(&[0.0, 0.0, 16.0, 12.0]));
    }

    #[test]
    fn components_average_to_total() {
        let toy = Toy4dLoss::new();
        let x = Vector::from([0.3, 0.8, -0.2, 0.45]);
        let mean = 0.5 * (toy.component_value(0, &x) + toy.component_value(1, &x));
        assert_abs_diff_eq!(mean, toy.value(&x), epsilon = 1e-15);
        assert_abs_diff_eq!(toy.component_value(0, &x), 2.0 * Toy4dLoss::f1(0.3, 0.8) * 0.04, epsilon = 1e-15);
    }

    #[test]
    fn eigengap_on_unit_square() {
        let toy = Toy4dLoss::new();
        for i in 0..=10 {
            for j in 0..=10 {
                let (a, b) = (i as f64 / 10.0, j as f64 / 10.0);
                let e = eig_sym(&toy.hessian(&Vector::from([a, b, 0.0, 0.0]))).unwrap();
                let gap = e.values[0] - e.values[1];
                assert!(gap >= 2.0 * (Toy4dLoss::f1(a, b) - Toy4dLoss::f2(a, b)) - 1e-12);
                assert!(gap > 0.0);
            }
        }
    }
}
