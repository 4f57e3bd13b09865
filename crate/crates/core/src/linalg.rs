//! Dense complex eigendecomposition for the small von Neumann operators.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EigError {
    #[error("non-finite operator entries")]
    NonFinite,
    #[error("Schur iteration did not converge")]
    NoConvergence,
    #[error("eigenvector matrix is ill-conditioned (cond = {0:.3e})")]
    IllConditioned(f64),
}

pub const COND_LIMIT: f64 = 1e12;

#[derive(Debug, Clone)]
pub struct Eigen {
    pub values: Vec<Complex64>,
    /// unit-norm columns
    pub vectors: DMatrix<Complex64>,
    pub cond: f64,
}

/// Eigenpairs of a general complex matrix: Schur form, triangular back
/// substitution, then one inverse-iteration sweep per vector.
pub fn eig(m: &DMatrix<Complex64>) -> Result<Eigen, EigError> {
    let n = m.nrows();
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EigError::NonFinite);
    }
    let schur = m.clone().try_schur(f64::EPSILON, 2_000).ok_or(EigError::NoConvergence)?;
    let (q, t) = schur.unpack();
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(1e-300);
    let tiny = scale * 1e-14;

    let values: Vec<Complex64> = (0..n).map(|i| t[(i, i)]).collect();
    let mut vectors = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let mut y = vec![Complex64::new(0.0, 0.0); n];
        y[k] = Complex64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = Complex64::new(0.0, 0.0);
            for l in j + 1..=k {
                s += t[(j, l)] * y[l];
            }
            let mut den = t[(j, j)] - t[(k, k)];
            if den.norm() < tiny {
                den = Complex64::new(tiny, 0.0);
            }
            y[j] = -s / den;
        }
        let mut v = &q * nalgebra::DVector::from_vec(y);
        let nv = v.norm();
        if !(nv.is_finite() && nv > 0.0) {
            return Err(EigError::IllConditioned(f64::INFINITY));
        }
        v /= Complex64::new(nv, 0.0);
        let v = refine(m, values[k], v, scale);
        vectors.set_column(k, &v);
    }
    if vectors.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(EigError::IllConditioned(f64::INFINITY));
    }
    let sv = vectors.clone().singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let cond = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if !(cond <= COND_LIMIT) {
        return Err(EigError::IllConditioned(cond));
    }
    Ok(Eigen { values, vectors, cond })
}

fn refine(
    m: &DMatrix<Complex64>,
    lam: Complex64,
    v: nalgebra::DVector<Complex64>,
    scale: f64,
) -> nalgebra::DVector<Complex64> {
    let n = m.nrows();
    let res = (m * &v - &v * lam).norm();
    if res < 1e-13 * scale {
        return v;
    }
    let mut a = m.clone();
    let shift = lam + Complex64::new(scale * 1e-13, scale * 1e-13);
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    let lu = a.lu();
    match lu.solve(&v) {
        Some(w) if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
            let nw = w.norm();
            let w = w / Complex64::new(nw, 0.0);
            let new_res = (m * &w - &w * lam).norm();
            if new_res < res {
                // keep the original phase convention of the Schur vector
                let ph = w.dotc(&v);
                let ph = if ph.norm() > 0.0 { ph / ph.norm() } else { Complex64::new(1.0, 0.0) };
                w * ph
            } else {
                v
            }
        }
        _ => v,
    }
}

/// Max-weight assignment for a square score matrix: `perm[i]` is the column
/// matched to row i.
pub fn assign_max(score: &DMatrix<f64>) -> Vec<usize> {
    use pathfinding::prelude::{kuhn_munkres, Matrix};
    let n = score.nrows();
    let w: Vec<i64> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (score[(i, j)] * 1e12).round() as i64)
        .collect();
    let mat = Matrix::from_vec(n, n, w).expect("square score matrix");
    kuhn_munkres(&mat).1
}
