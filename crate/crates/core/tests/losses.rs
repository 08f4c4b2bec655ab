use proptest::prelude::*;
use samlab::harness::selftest::{fd_errors, rank_one_example};
use samlab::losses::{component, evaluate, fd_grad, third_directional, LossSpec};
use samlab::sharpness::limiting_regularizers;
use samlab::{LossModel, QuadraticLoss, SymMatrix, Toy4dLoss, Vector};

fn point(d: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-1.5f64..1.5, d).prop_map(Vector::from)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn toy_fd(x in point(4)) {
        let (g, h) = fd_errors(&Toy4dLoss::new(), &[x]).unwrap();
        prop_assert!(g <= 1e-6 && h <= 1e-6, "{g} {h}");
    }

    #[test]
    fn factored_fd(x in point(5)) {
        let (loss, _) = rank_one_example().unwrap();
        let (g, h) = fd_errors(&loss, &[x]).unwrap();
        prop_assert!(g <= 1e-6 && h <= 1e-6, "{g} {h}");
    }

    #[test]
    fn components_average_to_the_loss(x in point(4), y in point(5)) {
        let toy = Toy4dLoss::new();
        let (fact, _) = rank_one_example().unwrap();
        for (loss, x) in [(&toy as &dyn LossModel, &x), (&fact as &dyn LossModel, &y)] {
            let m = loss.component_count();
            let v: f64 = (0..m).map(|k| loss.component_value(k, x)).sum::<f64>() / m as f64;
            prop_assert!((v - loss.value(x)).abs() <= 1e-12 * (1.0 + loss.value(x).abs()));
            let g = (0..m).fold(Vector::zeros(x.dim()), |acc, k| acc.axpy(1.0 / m as f64, &loss.component_grad(k, x)));
            prop_assert!(g.distance(&loss.grad(x)) <= 1e-12 * (1.0 + g.norm()));
            let h = (0..m).fold(SymMatrix::zeros(x.dim()), |acc, k| acc.add(&loss.component_hessian(k, x).scale(1.0 / m as f64)));
            prop_assert!(h.sub(&loss.hessian(x)).frobenius() <= 1e-12 * (1.0 + h.frobenius()));
        }
    }

    #[test]
    fn toy_regularizers_on_the_manifold(a in -0.5f64..1.5, b in -0.5f64..1.5) {
        let f1 = a * a + 6.0 * b * b + 8.0;
        let f2 = 4.0 * (1.0 - a).powi(2) + (1.0 - b).powi(2) + 1.0;
        let lim = limiting_regularizers(&Toy4dLoss::new(), &Vector::from([a, b, 0.0, 0.0]), 1e-8).unwrap();
        prop_assert_eq!(lim.rank, 2);
        prop_assert!((lim.s_max - f1.max(f2)).abs() < 1e-12);
        prop_assert!((lim.s_asc - f1.min(f2)).abs() < 1e-12);
        prop_assert!((lim.s_avg - (f1 + f2) / 4.0).abs() < 1e-12);
        prop_assert!((lim.trace_half - (f1 + f2)).abs() < 1e-12);
        prop_assert!((lim.stochastic_max.unwrap() - (f1 + f2)).abs() < 1e-12);
    }

    #[test]
    fn third_derivative_of_quadratic_vanishes(x in point(3), u in point(3)) {
        let q = QuadraticLoss::new(SymMatrix::diag(&[2.0, 1.0, 0.5])).unwrap();
        prop_assume!(u.norm() > 1e-3);
        let t = third_directional(&q, &x, &u.scale(1.0 / u.norm())).unwrap();
        prop_assert!(t.norm() < 1e-6);
    }
}

#[test]
fn toy_third_derivative_against_hessian_differences() {
    // ∇³L[u,u] = d²/ds² ∇L(x + su) at s = 0; oracle from second differences of the gradient
    let toy = Toy4dLoss::new();
    let x = Vector::from([0.3, -0.2, 0.4, 0.1]);
    let u = Vector::from([0.5, 0.5, 0.5, 0.5]);
    let s = 1e-3;
    let oracle = toy.grad(&x.axpy(s, &u)).axpy(-2.0, &toy.grad(&x)).axpy(1.0, &toy.grad(&x.axpy(-s, &u))).scale(1.0 / (s * s));
    let got = third_directional(&toy, &x, &u).unwrap();
    assert!(got.distance(&oracle) < 1e-4 * (1.0 + oracle.norm()), "{got:?} vs {oracle:?}");
}

#[test]
fn quadratic_gradient_is_linear() {
    let a = SymMatrix::from_rows(&[vec![2.0, 0.3], vec![0.3, 1.0]]).unwrap();
    let q = QuadraticLoss::new(a.clone()).unwrap();
    let x = Vector::from([0.7, -1.1]);
    let (v, g) = evaluate(&q, &x).unwrap();
    assert!((v - 0.5 * a.quad_form(&x)).abs() < 1e-15);
    assert!(g.distance(&a.mul_vec(&x)) < 1e-15);
    assert!(fd_grad(&q, &x).distance(&g) < 1e-8);
}

#[test]
fn single_component_view() {
    let toy = Toy4dLoss::new();
    let x = Vector::from([0.1, 0.2, 0.3, 0.4]);
    let c = component(&toy, 1).unwrap();
    assert_eq!(c.value(&x), toy.component_value(1, &x));
    assert!(component(&toy, 2).is_err());
}

#[test]
fn evaluate_rejects_wrong_dimension() {
    assert!(evaluate(&Toy4dLoss::new(), &Vector::zeros(3)).is_err());
}

#[test]
fn loss_spec_round_trip() {
    let spec = LossSpec::quadratic(&SymMatrix::diag(&[2.0, 1.0, 0.5]));
    let again = LossSpec::parse(&spec.to_toml()).unwrap();
    assert_eq!(spec, again);
    let loss = again.build().unwrap();
    assert_eq!(loss.dim(), 3);
    assert!((loss.value(&Vector::from([1.0, 0.0, 0.0])) - 1.0).abs() < 1e-15);
}
