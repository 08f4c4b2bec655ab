use crate::densela::{eig_sym, SymMatrix, Vector};
use crate::error::{Error, Result};

use super::LossModel;

/// `L(x) = ½ xᵀ A x` with `A` positive semi-definite.
#[derive(Clone, Debug)]
pub struct QuadraticLoss {
    a: SymMatrix,
}

impl QuadraticLoss {
    pub fn new(a: SymMatrix) -> Result<Self> {
        let e = eig_sym(&a)?;
        let scale = e.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if let Some(min) = e.values.last() {
            if *min < -1e-12 * scale.max(1.0) {
                return Err(Error::InvalidArgument(format!(
                    "quadratic loss matrix must be positive semi-definite (smallest eigenvalue {min:e})"
                )));
            }
        }
        Ok(Self { a })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.a
    }
}

impl LossModel for QuadraticLoss {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn value(&self, x: &Vector) -> f64 {
        0.5 * self.a.quad_form(x)
    }

    fn grad(&self, x: &Vector) -> Vector {
        self.a.mul_vec(x)
    }

    fn hessian(&self, _x: &Vector) -> SymMatrix {
        self.a.clone()
    }

    fn name(&self) -> &str {
        "quadratic"
    }
}
