//! Direct minimization of `L + R^type_ρ` on the 4D toy loss, compared with
//! the minimum of the limiting regularizer over the manifold patch.

use crate::densela::{Vector, DEFAULT_RANK_TOL};
use crate::error::{Error, Result};
use crate::losses::{self, LossModel};
use crate::manifold::{phi, PhiOptions};
use crate::optim::{asc_grad, asc_loss, grad_is_zero, Algorithm};
use crate::rng::SplitMix64;
use crate::sharpness::{gaussian_direction, limiting_regularizers, worst_sharpness, SharpnessType, WorstOptions};

use super::config::ExperimentConfig;
use super::minimize::{bfgs, BfgsOptions, Minimum};
use super::summary::{Claim, RunSummary};
use super::toy::{require_toy, toy_target};

pub struct ExplicitRun {
    pub summary: RunSummary,
    /// Best local minimizer of `L + R^type`.
    pub best: Minimum,
    pub phi_best: Vector,
    /// `S^type(Φ(x̂))`
    pub value: f64,
    pub grid_min: f64,
    pub grid_argmin: [f64; 2],
    /// One entry per start: `None` where the start was skipped.
    pub starts: Vec<Option<Minimum>>,
}

/// `S^type` over the grid `(a, b, 0, 0)` covering the box's first two axes.
pub fn grid_minimum(loss: &dyn LossModel, kind: SharpnessType, lo: &[f64], hi: &[f64], n: usize) -> Result<(f64, [f64; 2])> {
    let mut best = (f64::INFINITY, [f64::NAN; 2]);
    for i in 0..n {
        let a = lo[0] + (hi[0] - lo[0]) * i as f64 / (n - 1) as f64;
        for j in 0..n {
            let b = lo[1] + (hi[1] - lo[1]) * j as f64 / (n - 1) as f64;
            let s = limiting_regularizers(loss, &Vector::from([a, b, 0.0, 0.0]), DEFAULT_RANK_TOL)?.get(kind);
            if s < best.0 {
                best = (s, [a, b]);
            }
        }
    }
    Ok(best)
}

fn uniform(rng: &mut SplitMix64) -> f64 {
    (rng.next() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// `L(x) + R^type_ρ(x)` with its gradient; `None` where undefined.
struct Objective<'a> {
    loss: &'a dyn LossModel,
    kind: SharpnessType,
    rho: f64,
    /// Fixed directions for the sample-average of `R^Avg`.
    directions: Vec<Vector>,
    worst: WorstOptions,
}

impl Objective<'_> {
    fn eval(&self, x: &Vector) -> Result<Option<(f64, Vector)>> {
        match self.kind {
            SharpnessType::Max => {
                let w = worst_sharpness(self.loss, x, self.rho, &self.worst)?;
                let y = x.axpy(self.rho, &w.direction);
                Ok(Some((self.loss.value(x) + w.value, self.loss.grad(&y))))
            }
            SharpnessType::Asc => {
                let (_, g) = losses::evaluate(self.loss, x)?;
                if grad_is_zero(&g, x) {
                    return Ok(None);
                }
                match (asc_loss(self.loss, x, self.rho), asc_grad(self.loss, x, self.rho)) {
                    (Ok(v), Ok(g)) => Ok(Some((v, g))),
                    (Err(Error::UndefinedAscent { .. }), _) | (_, Err(Error::UndefinedAscent { .. })) => Ok(None),
                    (Err(e), _) | (_, Err(e)) => Err(e),
                }
            }
            SharpnessType::Avg => {
                let mut value = 0.0;
                let mut grad = Vector::zeros(x.dim());
                for u in &self.directions {
                    let y = x.axpy(self.rho, u);
                    value += self.loss.value(&y);
                    grad += &self.loss.grad(&y);
                }
                let m = self.directions.len() as f64;
                Ok(Some((value / m, grad.scale(1.0 / m))))
            }
        }
    }
}

pub fn run_explicit_bias(cfg: &ExperimentConfig) -> Result<ExplicitRun> {
    let loss = require_toy(cfg)?;
    let (lo, hi) = (&cfg.box_lo, &cfg.box_hi);
    if lo.len() != 4 {
        return Err(Error::Config("explicit-bias needs a 4-dimensional box".into()));
    }
    if !(lo[2] <= 0.0 && 0.0 <= hi[2] && lo[3] <= 0.0 && 0.0 <= hi[3]) {
        return Err(Error::Config("the box must contain the manifold x₃ = x₄ = 0".into()));
    }
    let kind = cfg.sharpness;
    let mut rng = SplitMix64::new(cfg.seed);
    let mut directions = Vec::new();
    if kind == SharpnessType::Avg {
        while directions.len() < cfg.mc_samples.div_ceil(2) * 2 {
            if let Some(u) = gaussian_direction(&mut rng, 4) {
                directions.push(-&u);
                directions.push(u);
            }
        }
    }
    let obj = Objective {
        loss: loss.as_ref(),
        kind,
        rho: cfg.rho,
        directions,
        worst: WorstOptions { n_random: 0, ..WorstOptions::default() },
    };

    let mut summary = RunSummary::new(cfg);
    let mut starts = Vec::with_capacity(cfg.n_starts);
    let opts = BfgsOptions { max_iter: 1000, ..BfgsOptions::default() };
    for _ in 0..cfg.n_starts {
        let x0: Vector = lo.iter().zip(hi).map(|(l, h)| l + (h - l) * uniform(&mut rng)).collect();
        starts.push(bfgs(|x| obj.eval(x), &x0, lo, hi, &opts)?);
    }
    let skipped = starts.iter().filter(|s| s.is_none()).count();
    if skipped > 0 {
        summary.note(format!("{skipped} start(s) skipped: objective undefined at the start"));
    }
    let best = starts
        .iter()
        .flatten()
        .min_by(|a, b| a.value.total_cmp(&b.value))
        .cloned()
        .ok_or_else(|| Error::Config("every start failed".into()))?;
    let mp = phi(loss.as_ref(), &best.x, &PhiOptions::default())?;
    let value = limiting_regularizers(loss.as_ref(), &mp.p, DEFAULT_RANK_TOL)?.get(kind);
    let (grid_min, grid_argmin) = grid_minimum(loss.as_ref(), kind, lo, hi, cfg.grid)?;
    summary.note(format!(
        "best of {} starts: x̂ = {:?}, L + R = {}, Φ(x̂) = {:?}; grid argmin {grid_argmin:?}",
        cfg.n_starts, best.x, best.value, mp.p
    ));

    let t = kind.as_str();
    summary.push(Claim::rel(
        &format!("explicit.{t}.value"),
        &format!("S^{t}(Φ(x̂)) is within 5% of its grid minimum over the manifold patch ({0}×{0} grid)", cfg.grid),
        grid_min,
        value,
        0.05,
        "oracle: grid minimum of the closed-form limiting regularizer",
    ));
    let alg = match kind {
        SharpnessType::Max => Algorithm::Sam,
        SharpnessType::Asc => Algorithm::AscGd,
        SharpnessType::Avg => Algorithm::OneSam,
    };
    let (target, provenance) = toy_target(alg).expect("every type has a toy target");
    summary.push(Claim::near(
        &format!("explicit.{t}.location"),
        "(x₁, x₂) of Φ(x̂) is within 0.1 of the regularizer's minimizer",
        &target,
        &[mp.p[0], mp.p[1]],
        0.1,
        provenance,
    ));
    Ok(ExplicitRun { summary, best, phi_best: mp.p, value, grid_min, grid_argmin, starts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::Toy4dLoss;

    #[test]
    fn grid_minima_of_the_toy() {
        let toy = Toy4dLoss::new();
        let lo = [-0.5, -0.5];
        let hi = [1.5, 1.5];
        let (m, at) = grid_minimum(&toy, SharpnessType::Max, &lo, &hi, 41).unwrap();
        assert!((m - 8.0).abs() < 1e-12 && at == [0.0, 0.0], "{m} {at:?}");
        let (m, at) = grid_minimum(&toy, SharpnessType::Asc, &lo, &hi, 41).unwrap();
        assert!((m - 1.0).abs() < 1e-12 && at == [1.0, 1.0], "{m} {at:?}");
        // Tr/(2D) = (F₁ + F₂)/4, minimized at (0.8, 1/7)
        let exact = (0.64 + 6.0 / 49.0 + 8.0 + 4.0 * 0.04 + (36.0 / 49.0) + 1.0) / 4.0;
        let (m, _) = grid_minimum(&toy, SharpnessType::Avg, &lo, &hi, 201).unwrap();
        assert!(m >= exact - 1e-12 && m - exact < 1e-3, "{m} {exact}");
    }
}
