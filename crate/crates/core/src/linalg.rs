//! Small dense helpers shared by the modules. All matrices here are tiny
//! (d and m at most a few hundred), so everything is a dense eigensolve.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Eigenvalues of the symmetric part of `a`, ascending.
pub fn sym_eigenvalues(a: &Matrix) -> Vec<f64> {
    let sym = (a + a.transpose()) * 0.5;
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|x, y| x.total_cmp(y));
    ev
}

/// (smallest, largest) eigenvalue of the symmetric part of `a`.
pub fn sym_extremes(a: &Matrix) -> (f64, f64) {
    let ev = sym_eigenvalues(a);
    (ev[0], ev[ev.len() - 1])
}

/// Spectral norm of a symmetric matrix (largest absolute eigenvalue).
pub fn sym_spectral_norm(a: &Matrix) -> f64 {
    let (lo, hi) = sym_extremes(a);
    lo.abs().max(hi.abs())
}

pub fn mean_vector(xs: &[Vector]) -> Vector {
    let d = xs[0].len();
    let mut acc = Vector::zeros(d);
    for x in xs {
        acc += x;
    }
    acc / xs.len() as f64
}

/// (1/m) Σ‖x_i − x̄‖².
pub fn disagreement(xs: &[Vector]) -> f64 {
    let mean = mean_vector(xs);
    xs.iter().map(|x| (x - &mean).norm_squared()).sum::<f64>() / xs.len() as f64
}

pub fn all_finite(x: &Vector) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// Conjugate gradients for a symmetric positive definite system; used as an
/// independent cross-check of the direct solvers.
pub fn conjugate_gradient(a: &Matrix, b: &Vector, tol: f64, max_iters: usize) -> Vector {
    let mut x = Vector::zeros(b.len());
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rs = r.norm_squared();
    let stop = tol * tol * b.norm_squared().max(f64::MIN_POSITIVE);
    for _ in 0..max_iters {
        if rs <= stop {
            break;
        }
        let ap = a * &p;
        let step = rs / p.dot(&ap);
        x.axpy(step, &p, 1.0);
        r.axpy(-step, &ap, 1.0);
        let rs_next = r.norm_squared();
        p = &r + &p * (rs_next / rs);
        rs = rs_next;
    }
    x
}
