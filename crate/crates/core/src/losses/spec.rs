//! Loss specification files.
//!
//! A loss file is TOML with a `kind` key:
//!
//! ```toml
//! kind = "quadratic"
//! matrix = [[2.0, 0.0], [0.0, 1.0]]
//! ```
//!
//! ```toml
//! kind = "toy4d"
//! ```
//!
//! ```toml
//! kind = "factored"
//! dim = 2
//!
//! [[data]]
//! label = 1.0
//! terms = [{ coef = 1.0, powers = [1, 1] }, { coef = -0.5, powers = [0, 2] }]
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::densela::SymMatrix;
use crate::error::{Error, Result};

use super::{FactoredRegressionLoss, LossModel, Monomial, Polynomial, QuadraticLoss, Toy4dLoss};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LossSpec {
    Quadratic { matrix: Vec<Vec<f64>> },
    Toy4d {},
    Factored { dim: usize, data: Vec<DatumSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatumSpec {
    pub label: f64,
    pub terms: Vec<TermSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coef: f64,
    pub powers: Vec<u32>,
}

impl LossSpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("loss spec: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read loss file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("loss spec serializes")
    }

    pub fn quadratic(a: &SymMatrix) -> Self {
        Self::Quadratic { matrix: a.rows() }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Quadratic { matrix } => matrix.len(),
            Self::Toy4d {} => 4,
            Self::Factored { dim, .. } => *dim,
        }
    }

    pub fn build(&self) -> Result<Box<dyn LossModel>> {
        Ok(match self {
            Self::Quadratic { matrix } => {
                let a = SymMatrix::from_rows(matrix)?;
                for i in 0..a.dim() {
                    for j in 0..i {
                        if matrix[i][j] != matrix[j][i] {
                            return Err(Error::InvalidArgument(format!(
                                "quadratic matrix is not symmetric at ({i}, {j})"
                            )));
                        }
                    }
                }
                Box::new(QuadraticLoss::new(a)?)
            }
            Self::Toy4d {} => Box::new(Toy4dLoss::new()),
            Self::Factored { dim, data } => {
                let data = data
                    .iter()
                    .map(|d| {
                        let terms = d
                            .terms
                            .iter()
                            .map(|t| Monomial { coef: t.coef, powers: t.powers.clone() })
                            .collect();
                        Ok((Polynomial::new(*dim, terms)?, d.label))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Box::new(FactoredRegressionLoss::new(*dim, data)?)
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::Vector;

    #[test]
    fn parse_each_kind() {
        let q = LossSpec::parse("kind = \"quadratic\"\nmatrix = [[2.0, 0.0], [0.0, 1.0]]\n").unwrap();
        let loss = q.build().unwrap();
        assert_eq!(loss.dim(), 2);
        assert_eq!(loss.value(&Vector::from([1.0, 0.0])), 1.0);

        let t = LossSpec::parse("kind = \"toy4d\"").unwrap();
        assert_eq!(t, LossSpec::Toy4d {});

        let f = LossSpec::parse(
            r#"
kind = "factored"
dim = 2
[[data]]
label = 1.0
terms = [{ coef = 1.0, powers = [1, 1] }]
[[data]]
label = 0.0
terms = [{ coef = 1.0, powers = [1, 0] }, { coef = -1.0, powers = [0, 1] }]
"#,
        )
        .unwrap();
        let loss = f.build().unwrap();
        assert_eq!(loss.component_count(), 2);
        assert_eq!(loss.value(&Vector::from([1.0, 1.0])), 0.0);
    }

    #[test]
    fn rejects_unknown_kind_and_fields() {
        assert!(LossSpec::parse("kind = \"cubic\"").is_err());
        assert!(LossSpec::parse("kind = \"toy4d\"\nextra = 1").is_err());
    }

    #[test]
    fn rejects_asymmetric_matrix() {
        let q = LossSpec::parse("kind = \"quadratic\"\nmatrix = [[2.0, 1.0], [0.0, 1.0]]\n").unwrap();
        assert!(q.build().is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let q = LossSpec::quadratic(&SymMatrix::diag(&[2.0, 1.0, 0.5]));
        assert_eq!(LossSpec::parse(&q.to_toml()).unwrap(), q);
    }
}
