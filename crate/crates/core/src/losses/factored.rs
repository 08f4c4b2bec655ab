use crate::densela::{SymMatrix, Vector};
use crate::error::{Error, Result};

use super::LossModel;

/// `coef · Π_i x_i^{powers[i]}`
#[derive(Clone, Debug, PartialEq)]
pub struct Monomial {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl Monomial {
    fn eval_skipping(&self, x: &Vector, skip: &[(usize, u32)]) -> f64 {
        // product with the exponents of the listed coordinates lowered
        let mut out = self.coef;
        for (i, &p) in self.powers.iter().enumerate() {
            let mut e = p;
            for &(j, d) in skip {
                if i == j {
                    if e < d {
                        return 0.0;
                    }
                    e -= d;
                }
            }
            if e > 0 {
                out *= x[i].powi(e as i32);
            }
        }
        out
    }
}

/// A real polynomial on `R^D` with analytic first and second derivatives.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn new(dim: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.powers.len() != dim {
                return Err(Error::Dimension { expected: dim, got: t.powers.len() });
            }
            if !t.coef.is_finite() {
                return Err(Error::NonFinite { what: "polynomial coefficient".into() });
            }
        }
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn value(&self, x: &Vector) -> f64 {
        self.terms.iter().map(|t| t.eval_skipping(x, &[])).sum()
    }

    pub fn grad(&self, x: &Vector) -> Vector {
        (0..self.dim)
            .map(|j| {
                self.terms
                    .iter()
                    .map(|t| f64::from(t.powers[j]) * t.eval_skipping(x, &[(j, 1)]))
                    .sum()
            })
            .collect()
    }

    pub fn hessian(&self, x: &Vector) -> SymMatrix {
        SymMatrix::from_fn(self.dim, |j, l| {
            self.terms
                .iter()
                .map(|t| {
                    let (pj, pl) = (f64::from(t.powers[j]), f64::from(t.powers[l]));
                    if j == l {
                        pj * (pj - 1.0) * t.eval_skipping(x, &[(j, 2)])
                    } else {
                        pj * pl * t.eval_skipping(x, &[(j, 1), (l, 1)])
                    }
                })
                .sum()
        })
    }
}

/// Per-datum squared-error regression `L_k(x) = ½ (f_k(x) − y_k)²` with
/// polynomial models `f_k`, and `L = (1/M) Σ_k L_k`.
#[derive(Clone, Debug)]
pub struct FactoredRegressionLoss {
    dim: usize,
    models: Vec<Polynomial>,
    labels: Vec<f64>,
}

impl FactoredRegressionLoss {
    pub fn new(dim: usize, data: Vec<(Polynomial, f64)>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidArgument("factored loss needs at least one datum".into()));
        }
        let mut models = Vec::with_capacity(data.len());
        let mut labels = Vec::with_capacity(data.len());
        for (f, y) in data {
            if f.dim() != dim {
                return Err(Error::Dimension { expected: dim, got: f.dim() });
            }
            if !y.is_finite() {
                return Err(Error::NonFinite { what: "label".into() });
            }
            models.push(f);
            labels.push(y);
        }
        Ok(Self { dim, models, labels })
    }

    pub fn model(&self, k: usize) -> &Polynomial {
        &self.models[k]
    }

    pub fn label(&self, k: usize) -> f64 {
        self.labels[k]
    }

    /// `ℓ''` of the squared loss.
    pub fn loss_curvature(&self) -> f64 {
        1.0
    }

    fn residual(&self, k: usize, x: &Vector) -> f64 {
        self.models[k].value(x) - self.labels[k]
    }

    fn mean_over<T>(&self, f: impl Fn(usize) -> T, add: impl Fn(T, T) -> T, scale: impl Fn(T, f64) -> T) -> T {
        let m = self.models.len();
        let total = (1..m).fold(f(0), |acc, k| add(acc, f(k)));
        scale(total, 1.0 / m as f64)
    }
}

impl LossModel for FactoredRegressionLoss {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &Vector) -> f64 {
        self.mean_over(|k| self.component_value(k, x), |a, b| a + b, |a, s| a * s)
    }

    fn grad(&self, x: &Vector) -> Vector {
        self.mean_over(|k| self.component_grad(k, x), |a, b| a + b, |a, s| a.scale(s))
    }

    fn hessian(&self, x: &Vector) -> SymMatrix {
        self.mean_over(|k| self.component_hessian(k, x), |a, b| a.add(&b), |a, s| a.scale(s))
    }

    fn component_count(&self) -> usize {
        self.models.len()
    }

    fn component_value(&self, k: usize, x: &Vector) -> f64 {
        let r = self.residual(k, x);
        0.5 * r * r
    }

    fn component_grad(&self, k: usize, x: &Vector) -> Vector {
        self.models[k].grad(x).scale(self.residual(k, x))
    }

    fn component_hessian(&self, k: usize, x: &Vector) -> SymMatrix {
        let gf = self.models[k].grad(x);
        let r = self.residual(k, x);
        let outer = SymMatrix::outer(&gf);
        if r == 0.0 {
            outer
        } else {
            outer.add(&self.models[k].hessian(x).scale(r))
        }
    }

    fn name(&self) -> &str {
        "factored"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::eig_sym;
    use approx::assert_abs_diff_eq;

    fn mono(coef: f64, powers: &[u32]) -> Monomial {
        Monomial { coef, powers: powers.to_vec() }
    }

    #[test]
    fn polynomial_derivatives() {
        // f = 3 x₀² x₁ − x₁³ + 2
        let f = Polynomial::new(2, vec![mono(3.0, &[2, 1]), mono(-1.0, &[0, 3]), mono(2.0, &[0, 0])]).unwrap();
        let x = Vector::from([1.5, -0.5]);
        assert_abs_diff_eq!(f.value(&x), 3.0 * 2.25 * -0.5 + 0.125 + 2.0, epsilon = 1e-14);
        let g = f.grad(&x);
        assert_abs_diff_eq!(g[0], 6.0 * 1.5 * -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(g[1], 3.0 * 2.25 - 3.0 * 0.25, epsilon = 1e-14);
        let h = f.hessian(&x);
        assert_abs_diff_eq!(h.get(0, 0), 6.0 * -0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(h.get(0, 1), 6.0 * 1.5, epsilon = 1e-14);
        assert_abs_diff_eq!(h.get(1, 1), -6.0 * -0.5, epsilon = 1e-14);
    }

    #[test]
    fn linear_model_hessian_is_rank_one() {
        // f₁(x) = 2x₀ − x₁ + 0.5x₂, interpolated at any x with y = f₁(x)
        let f = Polynomial::new(3, vec![mono(2.0, &[1, 0, 0]), mono(-1.0, &[0, 1, 0]), mono(0.5, &[0, 0, 1])]).unwrap();
        let x = Vector::from([0.2, 0.4, -1.0]);
        let y = f.value(&x);
        let loss = FactoredRegressionLoss::new(3, vec![(f, y)]).unwrap();
        let e = eig_sym(&loss.hessian(&x)).unwrap();
        assert_abs_diff_eq!(e.values[0], 4.0 + 1.0 + 0.25, epsilon = 1e-13);
        assert_eq!(e.rank(), 1);
    }

    #[test]
    fn component_is_half_squared_residual() {
        let f = Polynomial::new(1, vec![mono(1.0, &[2])]).unwrap();
        let loss = FactoredRegressionLoss::new(1, vec![(f, 1.0)]).unwrap();
        assert_abs_diff_eq!(loss.component_value(0, &Vector::from([2.0])), 4.5, epsilon = 1e-15);
    }

    #[test]
    fn rejects_mismatched_powers() {
        assert!(Polynomial::new(2, vec![mono(1.0, &[1])]).is_err());
    }
}
