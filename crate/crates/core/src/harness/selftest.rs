//! Fast property checks on the kernels, the losses and the limit map.

use crate::densela::{eig_sym, SymMatrix, Vector};
use crate::error::Result;
use crate::losses::{self, component, fd_grad, fd_hessian, FactoredRegressionLoss, LossModel, Monomial, Polynomial, QuadraticLoss, Toy4dLoss};
use crate::manifold::{phi, phi_annihilation_residual, PhiOptions};
use crate::rng::SplitMix64;
use crate::sharpness::limiting_regularizers;

use super::config::ExperimentConfig;
use super::quadratic::run_quadratic;
use super::summary::{Claim, RunSummary};

fn uniform(rng: &mut SplitMix64, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * (rng.next() >> 11) as f64 / (1u64 << 53) as f64
}

/// Random symmetric matrix with entries uniform in `[−1, 1]`.
pub fn random_symmetric(rng: &mut SplitMix64, n: usize) -> SymMatrix {
    let mut a = SymMatrix::zeros(n);
    for i in 0..n {
        for j in 0..=i {
            a.set(i, j, uniform(rng, -1.0, 1.0));
        }
    }
    a
}

/// Largest `‖A − VΛVᵀ‖_F` over `count` random symmetric `n × n` matrices.
pub fn reconstruction_error(count: usize, n: usize, seed: u64) -> Result<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..count {
        let a = random_symmetric(&mut rng, n);
        let e = eig_sym(&a)?;
        worst = worst.max(a.sub(&e.reconstruct()).frobenius());
    }
    Ok(worst)
}

/// Largest relative gaps `‖∇L − ∇_FD L‖ / max(1, ‖∇L‖)` and the same for
/// Hessians, over `points` and every component.
pub fn fd_errors(loss: &dyn LossModel, points: &[Vector]) -> Result<(f64, f64)> {
    let (mut g_err, mut h_err): (f64, f64) = (0.0, 0.0);
    for x in points {
        let mut check = |l: &dyn LossModel| -> Result<()> {
            let (_, g) = losses::evaluate(l, x)?;
            g_err = g_err.max((&g - &fd_grad(l, x)).norm() / g.norm().max(1.0));
            let h = l.hessian(x);
            h_err = h_err.max(h.sub(&fd_hessian(l, x)).frobenius() / h.frobenius().max(1.0));
            Ok(())
        };
        check(loss)?;
        if loss.component_count() > 1 {
            for k in 0..loss.component_count() {
                check(&component(loss, k)?)?;
            }
        }
    }
    Ok((g_err, h_err))
}

fn mono(coef: f64, powers: [u32; 5]) -> Monomial {
    Monomial { coef, powers: powers.to_vec() }
}

/// Three polynomial data in `R⁵` with labels chosen so that the returned
/// point interpolates all of them.
pub fn rank_one_example() -> Result<(FactoredRegressionLoss, Vector)> {
    let p = Vector::from([0.3, -0.7, 0.5, 1.1, -0.4]);
    let models = vec![
        Polynomial::new(5, vec![mono(1.0, [1, 1, 0, 0, 0]), mono(1.0, [0, 0, 2, 0, 0])])?,
        Polynomial::new(5, vec![mono(1.0, [0, 1, 0, 1, 0]), mono(-1.0, [0, 0, 0, 0, 3]), mono(1.0, [1, 0, 0, 0, 0])])?,
        Polynomial::new(5, vec![mono(1.0, [0, 0, 1, 1, 1]), mono(2.0, [0, 2, 0, 0, 0])])?,
    ];
    let data = models.into_iter().map(|f| {
        let y = f.value(&p);
        (f, y)
    });
    Ok((FactoredRegressionLoss::new(5, data.collect())?, p))
}

/// Worst `λ₂/λ₁` of the component Hessians and worst
/// `‖∇²L_k − ℓ''∇f_k∇f_kᵀ‖_F / λ₁` at `p`.
pub fn rank_one_errors(loss: &FactoredRegressionLoss, p: &Vector) -> Result<(f64, f64)> {
    let (mut ratio, mut outer): (f64, f64) = (0.0, 0.0);
    for k in 0..loss.component_count() {
        let h = loss.component_hessian(k, p);
        let e = eig_sym(&h)?;
        let l1 = e.values[0];
        ratio = ratio.max(e.values[1].abs() / l1);
        let gf = loss.model(k).grad(p);
        let predicted = SymMatrix::outer(&gf).scale(loss.loss_curvature());
        outer = outer.max(h.sub(&predicted).frobenius() / l1);
    }
    Ok((ratio, outer))
}

/// Toy points with `(x₁, x₂)` uniform in `[0, 1]²` and `(x₃, x₄)` uniform in
/// `[−spread, spread]²`.
pub fn toy_samples(n: usize, seed: u64, spread: f64) -> Vec<Vector> {
    let mut rng = SplitMix64::new(seed);
    (0..n)
        .map(|_| {
            let a = uniform(&mut rng, 0.0, 1.0);
            let b = uniform(&mut rng, 0.0, 1.0);
            let c = uniform(&mut rng, -spread, spread);
            let d = uniform(&mut rng, -spread, spread);
            Vector::from([a, b, c, d])
        })
        .collect()
}

/// Worst `phi_annihilation_residual` over `points`.
pub fn annihilation_error(loss: &dyn LossModel, points: &[Vector], h: f64) -> Result<f64> {
    let opts = PhiOptions::default();
    points.iter().map(|x| phi_annihilation_residual(loss, x, h, &opts)).try_fold(0.0, |m, r| r.map(|r| f64::max(m, r)))
}

/// Worst `‖Π_tangent ∇²L(p)‖_F / λ₁` over `p = Φ(x)`, `x` in `points`.
pub fn projector_error(loss: &dyn LossModel, points: &[Vector]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for x in points {
        let mp = phi(loss, x, &PhiOptions::default())?;
        let h = losses::hessian(loss, &mp.p)?;
        let n = h.dim();
        let raw: f64 = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (0..n).map(|k| mp.tangent_projector.get(i, k) * h.get(k, j)).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(raw / mp.lambda1());
    }
    Ok(worst)
}

/// Worst `‖Φ(Φ(x)) − Φ(x)‖` over `points`.
pub fn idempotence_error(loss: &dyn LossModel, points: &[Vector]) -> Result<f64> {
    let opts = PhiOptions::default();
    let mut worst: f64 = 0.0;
    for x in points {
        let p = phi(loss, x, &opts)?.p;
        worst = worst.max(phi(loss, &p, &opts)?.p.distance(&p));
    }
    Ok(worst)
}

pub fn run_selftest(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let mut summary = RunSummary::new(cfg);
    for c in run_quadratic(cfg)?.summary.claims {
        summary.push(Claim { id: format!("selftest.{}", c.id), ..c });
    }

    let recon = reconstruction_error(200, 6, cfg.seed)?;
    summary.push(Claim::at_most(
        "selftest.eig.reconstruction",
        "max ‖A − VΛVᵀ‖_F over 200 random symmetric 6×6 matrices",
        recon,
        1e-10,
        "oracle: the input matrix",
    ));

    let toy = Toy4dLoss::new();
    let quad = QuadraticLoss::new(SymMatrix::from_rows(&[
        vec![2.0, 0.3, -0.1],
        vec![0.3, 1.0, 0.2],
        vec![-0.1, 0.2, 0.5],
    ])?)?;
    let (fact, p) = rank_one_example()?;
    let mut rng = SplitMix64::new(cfg.seed ^ 0x5EED);
    let pts = |rng: &mut SplitMix64, d: usize| -> Vec<Vector> {
        (0..5).map(|_| (0..d).map(|_| uniform(rng, -1.0, 1.0)).collect()).collect()
    };
    let toy_pts = pts(&mut rng, 4);
    let quad_pts = pts(&mut rng, 3);
    let fact_pts = pts(&mut rng, 5);
    for (name, loss, points) in [
        ("quadratic", &quad as &dyn LossModel, &quad_pts),
        ("toy4d", &toy as &dyn LossModel, &toy_pts),
        ("factored", &fact as &dyn LossModel, &fact_pts),
    ] {
        let (g, h) = fd_errors(loss, points)?;
        summary.push(Claim::at_most(
            &format!("selftest.fd.{name}.grad"),
            &format!("relative gap between the {name} gradient and central differences"),
            g,
            1e-6,
            "oracle: central finite differences of the value",
        ));
        summary.push(Claim::at_most(
            &format!("selftest.fd.{name}.hessian"),
            &format!("relative gap between the {name} Hessian and central differences"),
            h,
            1e-6,
            "oracle: central finite differences of the gradient",
        ));
    }

    let (ratio, outer) = rank_one_errors(&fact, &p)?;
    summary.push(Claim::at_most(
        "selftest.rank_one.lambda2",
        "max_k λ₂(∇²L_k)/λ₁(∇²L_k) at an interpolating point",
        ratio,
        1e-8,
        "formula: ∇²L_k = ℓ''∇f_k∇f_kᵀ where f_k = y_k",
    ));
    summary.push(Claim::at_most(
        "selftest.rank_one.outer",
        "max_k ‖∇²L_k − ℓ''∇f_k∇f_kᵀ‖_F / λ₁ at an interpolating point",
        outer,
        1e-6,
        "formula: ∇²L_k = ℓ''∇f_k∇f_kᵀ where f_k = y_k",
    ));

    let near = toy_samples(20, cfg.seed, 0.05);
    summary.push(Claim::at_most(
        "selftest.phi.annihilation",
        "max ‖∂Φ(x) ∇L(x)/‖∇L(x)‖‖ by differences (h = 1e-4) at 20 near-manifold points",
        annihilation_error(&toy, &near, 1e-4)?,
        1e-3,
        "formula: Φ is constant along gradient-flow trajectories",
    ));
    summary.push(Claim::at_most(
        "selftest.phi.projector",
        "max ‖Π_tangent ∇²L(p)‖_F / λ₁ at 20 manifold points",
        projector_error(&toy, &near)?,
        1e-6,
        "formula: the tangent projector annihilates the Hessian on the manifold",
    ));
    summary.push(Claim::at_most(
        "selftest.phi.idempotence",
        "max ‖Φ(Φ(x)) − Φ(x)‖ at 20 near-manifold points",
        idempotence_error(&toy, &near)?,
        1e-9,
        "formula: Φ fixes manifold points; 10 × the Φ tolerance",
    ));

    let lim = limiting_regularizers(&toy, &Vector::zeros(4), crate::densela::DEFAULT_RANK_TOL)?;
    for (id, measured, target) in [("s_max", lim.s_max, 8.0), ("s_asc", lim.s_asc, 6.0), ("s_avg", lim.s_avg, 3.5)] {
        summary.push(Claim::abs(
            &format!("selftest.limits.origin.{id}"),
            &format!("{id} of the toy loss at the origin"),
            target,
            measured,
            1e-9,
            "oracle: analytic Hessian diag(0, 0, 16, 12)",
        ));
    }
    let stochastic = lim.stochastic_max.unwrap_or(f64::NAN);
    summary.push(Claim::abs(
        "selftest.limits.origin.stochastic",
        "mean_k λ₁(∇²L_k)/2 equals Tr(∇²L)/2 at the origin",
        lim.trace_half,
        stochastic,
        1e-9,
        "formula: rank-one components with λ₁(∇²L_k) = Tr(∇²L_k)",
    ));
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_example_interpolates() {
        let (loss, p) = rank_one_example().unwrap();
        assert_eq!(loss.value(&p), 0.0);
        assert!(loss.grad(&p).norm() == 0.0);
    }

    #[test]
    fn reconstruction_is_tight() {
        assert!(reconstruction_error(20, 6, 1).unwrap() < 1e-12);
    }

    #[test]
    fn toy_samples_in_range() {
        for x in toy_samples(50, 3, 0.05) {
            assert!((0.0..=1.0).contains(&x[0]) && (0.0..=1.0).contains(&x[1]));
            assert!(x[2].abs() <= 0.05 && x[3].abs() <= 0.05);
        }
    }
}
