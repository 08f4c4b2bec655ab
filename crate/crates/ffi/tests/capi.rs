use std::ffi::{CStr, CString};
use std::ptr;

use samlab_ffi::*;

fn last_error() -> String {
    let p = samlab_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn toy() -> *mut SamlabLoss {
    let mut h = ptr::null_mut();
    assert_eq!(unsafe { samlab_loss_toy4d(&mut h) }, SamlabStatus::Ok);
    h
}

#[test]
fn quadratic_value_and_gradient() {
    let a = [2.0, 0.0, 0.0, 1.0];
    let mut h = ptr::null_mut();
    unsafe {
        assert_eq!(samlab_loss_quadratic(a.as_ptr(), 2, &mut h), SamlabStatus::Ok);
        assert_eq!(samlab_loss_dim(h), 2);
        let x = [1.0, 2.0];
        let (mut v, mut g) = (0.0, [0.0; 2]);
        assert_eq!(samlab_loss_evaluate(h, x.as_ptr(), 2, &mut v, g.as_mut_ptr()), SamlabStatus::Ok);
        assert_eq!(v, 0.5 * (2.0 + 4.0));
        assert_eq!(g, [2.0, 2.0]);
        samlab_loss_free(h);
    }
}

#[test]
fn toy_hessian_on_the_manifold() {
    let h = toy();
    let mut out = [0.0; 16];
    let p = [0.0; 4];
    unsafe {
        assert_eq!(samlab_loss_hessian(h, p.as_ptr(), 4, out.as_mut_ptr()), SamlabStatus::Ok);
        assert_eq!(samlab_loss_components(h), 2);
        samlab_loss_free(h);
    }
    // diag(0, 0, 2F₁, 2F₂) with F₁(0,0) = 8, F₂(0,0) = 6
    assert_eq!(out[10], 16.0);
    assert_eq!(out[15], 12.0);
}

#[test]
fn errors_set_status_and_message() {
    let h = toy();
    let x = [0.0; 3];
    let mut v = 0.0;
    unsafe {
        assert_eq!(samlab_loss_evaluate(h, x.as_ptr(), 3, &mut v, ptr::null_mut()), SamlabStatus::DimensionMismatch);
        assert!(last_error().contains("dimension"));
        assert_eq!(samlab_loss_evaluate(ptr::null(), x.as_ptr(), 3, &mut v, ptr::null_mut()), SamlabStatus::NullPointer);
        assert!(last_error().contains("loss"));
        let p = [0.0; 4];
        assert_eq!(
            samlab_sharpness(h, SamlabSharpness::Asc, p.as_ptr(), 4, 0.01, 0, 0, &mut v, ptr::null_mut()),
            SamlabStatus::Undefined
        );
        let bad = [1.0, 2.0, 3.0, 4.0];
        let mut q = ptr::null_mut();
        assert_eq!(samlab_loss_quadratic(bad.as_ptr(), 2, &mut q), SamlabStatus::InvalidArgument);
        assert!(q.is_null());
        samlab_loss_free(h);
        samlab_loss_free(ptr::null_mut());
    }
}

#[test]
fn sam_step_matches_hand_computation() {
    let a = [2.0, 0.0, 0.0, 1.0];
    let mut h = ptr::null_mut();
    unsafe {
        samlab_loss_quadratic(a.as_ptr(), 2, &mut h);
        let x = [3.0, 4.0];
        let mut out = [0.0; 2];
        assert_eq!(samlab_step(h, SamlabAlgorithm::Sam, 0.1, 0.5, 0, x.as_ptr(), 2, out.as_mut_ptr()), SamlabStatus::Ok);
        // g = (6, 4), ‖g‖ = √52, y = x + 0.5 g/‖g‖, x' = x − 0.1 A y
        let n = 52f64.sqrt();
        let y = [3.0 + 0.5 * 6.0 / n, 4.0 + 0.5 * 4.0 / n];
        assert!((out[0] - (3.0 - 0.2 * y[0])).abs() < 1e-15);
        assert!((out[1] - (4.0 - 0.1 * y[1])).abs() < 1e-15);
        samlab_loss_free(h);
    }
}

#[test]
fn run_to_the_two_cycle() {
    let a = [2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.5];
    let mut h = ptr::null_mut();
    unsafe {
        samlab_loss_quadratic(a.as_ptr(), 3, &mut h);
        let x0 = [0.3, 0.4, 0.5];
        let mut out = [0.0; 3];
        assert_eq!(samlab_run(h, SamlabAlgorithm::Sam, 0.1, 0.01, 0, 10_000, x0.as_ptr(), 3, out.as_mut_ptr()), SamlabStatus::Ok);
        let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 0.001 / 0.9).abs() < 1e-5);
        samlab_loss_free(h);
    }
}

#[test]
fn eigen_and_limits() {
    let a = [2.0, 1.0, 1.0, 2.0];
    let (mut vals, mut vecs) = ([0.0; 2], [0.0; 4]);
    unsafe {
        assert_eq!(samlab_eig_sym(a.as_ptr(), 2, vals.as_mut_ptr(), vecs.as_mut_ptr()), SamlabStatus::Ok);
    }
    assert!((vals[0] - 3.0).abs() < 1e-14 && (vals[1] - 1.0).abs() < 1e-14);
    assert!((vecs[0].abs() - 0.5f64.sqrt()).abs() < 1e-14);

    let h = toy();
    let p = [0.0; 4];
    let mut r = SamlabRegularizers::default();
    unsafe {
        assert_eq!(samlab_limiting_regularizers(h, p.as_ptr(), 4, 1e-8, &mut r), SamlabStatus::Ok);
        samlab_loss_free(h);
    }
    assert_eq!((r.s_max, r.s_asc, r.s_avg, r.trace_half, r.rank), (8.0, 6.0, 3.5, 14.0, 2));
}

#[test]
fn phi_and_sharpness() {
    let h = toy();
    let x = [0.5, 0.5, 0.0, 0.0];
    let mut out = [0.0; 4];
    let (mut v, mut se) = (0.0, -1.0);
    unsafe {
        assert_eq!(samlab_phi(h, x.as_ptr(), 4, out.as_mut_ptr()), SamlabStatus::Ok);
        assert_eq!(out, x);
        let o = [0.0; 4];
        assert_eq!(samlab_sharpness(h, SamlabSharpness::Max, o.as_ptr(), 4, 0.01, 0, 0, &mut v, &mut se), SamlabStatus::Ok);
        assert!((v / 1e-4 - 8.0).abs() < 1e-3);
        assert_eq!(se, 0.0);
        assert_eq!(samlab_sharpness(h, SamlabSharpness::Avg, o.as_ptr(), 4, 0.01, 20_000, 1, &mut v, &mut se), SamlabStatus::Ok);
        assert!((v / 1e-4 - 3.5).abs() < 4.0 * se / 1e-4 + 1e-2);
        samlab_loss_free(h);
    }
}

#[test]
fn loss_from_toml_text() {
    let text = CString::new("kind = \"quadratic\"\nmatrix = [[1.0, 0.0], [0.0, 3.0]]\n").unwrap();
    let mut h = ptr::null_mut();
    unsafe {
        let s = samlab_loss_from_toml(text.as_ptr(), &mut h);
        assert_eq!(s, SamlabStatus::Ok, "{}", last_error());
        assert_eq!(samlab_loss_dim(h), 2);
        samlab_loss_free(h);
        let bad = CString::new("kind = \"nope\"").unwrap();
        assert_eq!(samlab_loss_from_toml(bad.as_ptr(), &mut h), SamlabStatus::Config);
    }
}

#[test]
fn version_is_a_c_string() {
    let v = unsafe { CStr::from_ptr(samlab_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}
