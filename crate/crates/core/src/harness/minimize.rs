//! BFGS with Armijo backtracking inside a box.
//!
//! Trial points outside the box, or where the objective is undefined, are
//! rejected by the line search. The inverse-Hessian estimate is reset to the
//! identity when a search direction fails; the run stops when a gradient step
//! fails too.

use crate::densela::Vector;
use crate::error::Result;

#[derive(Clone, Debug, PartialEq)]
pub struct BfgsOptions {
    pub max_iter: usize,
    /// Stop once `‖∇f‖ ≤ gtol`.
    pub gtol: f64,
}

impl Default for BfgsOptions {
    fn default() -> Self {
        Self { max_iter: 2000, gtol: 1e-12 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vector,
    pub value: f64,
    pub iterations: usize,
}

pub fn in_box(x: &Vector, lo: &[f64], hi: &[f64]) -> bool {
    x.iter().zip(lo.iter().zip(hi)).all(|(v, (l, h))| *l <= *v && *v <= *h)
}

/// Minimizes `f` from `x0`. `f` returns `None` where it is undefined; an
/// undefined start yields `Ok(None)`.
pub fn bfgs(
    mut f: impl FnMut(&Vector) -> Result<Option<(f64, Vector)>>,
    x0: &Vector,
    lo: &[f64],
    hi: &[f64],
    opts: &BfgsOptions,
) -> Result<Option<Minimum>> {
    let n = x0.dim();
    let Some((mut fx, mut g)) = f(x0)? else { return Ok(None) };
    let mut x = x0.clone();
    let mut h = identity(n);
    let mut fresh = true;
    let mut iterations = 0;
    while iterations < opts.max_iter && g.norm() > opts.gtol {
        iterations += 1;
        let mut p = matvec(&h, &g).scale(-1.0);
        if p.dot(&g) >= 0.0 {
            h = identity(n);
            fresh = true;
            p = g.scale(-1.0);
        }
        let slope = p.dot(&g);
        let mut alpha = 1.0;
        let mut accepted = None;
        while alpha > 1e-20 {
            let xn = x.axpy(alpha, &p);
            if in_box(&xn, lo, hi) {
                if let Some((fnew, gnew)) = f(&xn)? {
                    if fnew <= fx + 1e-4 * alpha * slope {
                        accepted = Some((xn, fnew, gnew));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((xn, fnew, gnew)) = accepted else {
            if fresh {
                break;
            }
            h = identity(n);
            fresh = true;
            continue;
        };
        let s = &xn - &x;
        let y = &gnew - &g;
        let sy = s.dot(&y);
        if sy > 1e-300 {
            update(&mut h, &s, &y, sy);
            fresh = false;
        }
        x = xn;
        fx = fnew;
        g = gnew;
    }
    Ok(Some(Minimum { x, value: fx, iterations }))
}

fn identity(n: usize) -> Vec<Vec<f64>> {
    (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect()
}

fn matvec(h: &[Vec<f64>], v: &Vector) -> Vector {
    h.iter().map(|row| row.iter().zip(v.iter()).map(|(a, b)| a * b).sum()).collect()
}

/// `H ← (I − ρ s yᵀ) H (I − ρ y sᵀ) + ρ s sᵀ`, `ρ = 1 / sᵀy`.
fn update(h: &mut [Vec<f64>], s: &Vector, y: &Vector, sy: f64) {
    let r = 1.0 / sy;
    let hy = matvec(h, y);
    let yhy = y.dot(&hy);
    let n = s.dim();
    for i in 0..n {
        for j in 0..n {
            h[i][j] += -r * (hy[i] * s[j] + s[i] * hy[j]) + (r * r * yhy + r) * s[i] * s[j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &Vector| -> Result<Option<(f64, Vector)>> {
            let (a, b) = (x[0], x[1]);
            let v = (1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2);
            let g = Vector::from([-2.0 * (1.0 - a) - 400.0 * a * (b - a * a), 200.0 * (b - a * a)]);
            Ok(Some((v, g)))
        };
        let m = bfgs(f, &Vector::from([-1.2, 1.0]), &[-5.0, -5.0], &[5.0, 5.0], &BfgsOptions::default())
            .unwrap()
            .unwrap();
        assert!((&m.x - &Vector::from([1.0, 1.0])).norm() < 1e-6, "{m:?}");
    }

    #[test]
    fn stays_in_box() {
        let f = |x: &Vector| -> Result<Option<(f64, Vector)>> { Ok(Some((x[0], Vector::from([1.0])))) };
        let m = bfgs(f, &Vector::from([0.5]), &[0.0], &[1.0], &BfgsOptions::default()).unwrap().unwrap();
        assert!(m.x[0] >= 0.0 && m.x[0] < 1e-6, "{m:?}");
    }

    #[test]
    fn undefined_start() {
        let f = |_: &Vector| -> Result<Option<(f64, Vector)>> { Ok(None) };
        assert!(bfgs(f, &Vector::from([0.5]), &[0.0], &[1.0], &BfgsOptions::default()).unwrap().is_none());
    }
}
