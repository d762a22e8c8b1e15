//! Small dense helpers shared by the solvers.

use nalgebra::{ComplexField, DMatrix, DVector};

/// 2-norm condition number from the singular values; `inf` when singular.
pub(crate) fn condition_number<T>(m: &DMatrix<T>) -> f64
where
    T: ComplexField<RealField = f64>,
{
    if m.is_empty() {
        return f64::INFINITY;
    }
    let sv = m.clone().singular_values();
    let max = sv.max();
    let min = sv.min();
    if min <= 0.0 || !min.is_finite() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Solves `m x = rhs` for a symmetric matrix expected to be positive definite.
///
/// Cholesky first; a partially pivoted LU takes over when the factorization fails.
pub(crate) fn spd_solve(m: &DMatrix<f64>, rhs: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

pub(crate) fn spd_solve_vec(m: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(chol) = m.clone().cholesky() {
        return Some(chol.solve(rhs));
    }
    m.clone().lu().solve(rhs)
}

/// Moore–Penrose pseudoinverse with singular values below `rcond * sigma_max`
/// treated as zero. Also returns the numerical rank.
pub(crate) fn pseudo_inverse(m: &DMatrix<f64>, rcond: f64) -> (DMatrix<f64>, usize) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.as_ref().expect("u requested");
    let v_t = svd.v_t.as_ref().expect("v_t requested");
    let sigma_max = svd.singular_values.max();
    let cutoff = rcond * sigma_max;
    let mut pinv = DMatrix::zeros(m.ncols(), m.nrows());
    let mut rank = 0;
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff && s > 0.0 {
            rank += 1;
            let v_col = v_t.row(i).transpose();
            let u_col = u.column(i);
            pinv += (v_col * u_col.transpose()) / s;
        }
    }
    (pinv, rank)
}

pub(crate) fn all_finite(m: &DMatrix<f64>) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Shortest decimal representation that parses back to the same bits.
pub(crate) fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}
