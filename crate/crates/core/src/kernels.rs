//! Kernel evaluation, Gram matrices and kernel ridge regression.
//!
//! The ridge solution lives in the span of the kernel sections at the training
//! points, `f(x) = Σ α_i K(x, x_i)`, with `α = (K + λI)⁻¹ y`.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::linalg::{condition_number, spd_solve_vec};

/// Systems with a condition estimate above this are refused at `λ = 0`.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelKind {
    /// `exp(−‖x − y‖² / (2σ²))`
    GaussianRbf { bandwidth: f64 },
    /// `(xᵀy + c)^d`
    Polynomial { degree: u32, offset: f64 },
    /// `xᵀy`
    Linear,
}

/// A kernel together with the input dimension it accepts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawDescriptor")]
pub struct KernelDescriptor {
    pub kind: KernelKind,
    pub dim: usize,
}

#[derive(Deserialize)]
struct RawDescriptor {
    kind: KernelKind,
    dim: usize,
}

impl TryFrom<RawDescriptor> for KernelDescriptor {
    type Error = Error;

    fn try_from(raw: RawDescriptor) -> Result<Self> {
        Self::new(raw.kind, raw.dim)
    }
}

impl KernelDescriptor {
    pub fn new(kind: KernelKind, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("kernel input dimension must be ≥ 1".into()));
        }
        match kind {
            KernelKind::GaussianRbf { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
                return Err(Error::InvalidParameter(format!(
                    "RBF bandwidth must be positive, got {bandwidth}"
                )))
            }
            KernelKind::Polynomial { degree, offset } => {
                if degree == 0 {
                    return Err(Error::InvalidParameter("polynomial degree must be ≥ 1".into()));
                }
                if !(offset >= 0.0 && offset.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "polynomial offset must be ≥ 0, got {offset}"
                    )));
                }
            }
            _ => {}
        }
        Ok(Self { kind, dim })
    }

    pub fn gaussian(bandwidth: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::GaussianRbf { bandwidth }, dim)
    }

    pub fn polynomial(degree: u32, offset: f64, dim: usize) -> Result<Self> {
        Self::new(KernelKind::Polynomial { degree, offset }, dim)
    }

    pub fn linear(dim: usize) -> Result<Self> {
        Self::new(KernelKind::Linear, dim)
    }

    /// Evaluation without the dimension check; callers guarantee `x.len() == y.len()`.
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self.kind {
            KernelKind::GaussianRbf { bandwidth } => {
                let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-d2 / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelKind::Polynomial { degree, offset } => {
                let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
                (dot + offset).powi(degree as i32)
            }
            KernelKind::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }
}

pub fn eval_kernel(k: &KernelDescriptor, x: &[f64], y: &[f64]) -> Result<f64> {
    ensure_len("kernel argument dimension", k.dim, x.len())?;
    ensure_len("kernel argument dimension", k.dim, y.len())?;
    Ok(k.eval_unchecked(x, y))
}

fn check_points(k: &KernelDescriptor, points: &[Vec<f64>]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::Empty("kernel methods need at least one point"));
    }
    for p in points {
        ensure_len("point dimension", k.dim, p.len())?;
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("point has non-finite coordinates".into()));
        }
    }
    Ok(())
}

/// `K_ij = K(x_i, x_j)`; symmetric by construction.
pub fn gram_matrix(k: &KernelDescriptor, points: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    check_points(k, points)?;
    let n = points.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = k.eval_unchecked(&points[i], &points[j]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

/// A fitted kernel ridge regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub kernel: KernelDescriptor,
    pub points: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
    pub lambda: f64,
    /// Training labels the dual coefficients were solved against.
    pub labels: Vec<f64>,
}

impl KernelModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        predict(self, x)
    }

    /// `‖(K + λI)α − y‖_∞`.
    pub fn solve_residual(&self) -> f64 {
        let gram = gram_matrix(&self.kernel, &self.points).expect("validated at fit time");
        let alpha = DVector::from_column_slice(&self.alpha);
        let y = DVector::from_column_slice(&self.labels);
        let r = &gram * &alpha + &alpha * self.lambda - y;
        r.amax()
    }

    /// `Σ (y_i − f(x_i))² + λ αᵀKα` for an arbitrary coefficient vector.
    pub fn objective_at(&self, alpha: &[f64]) -> f64 {
        let gram = gram_matrix(&self.kernel, &self.points).expect("validated at fit time");
        let a = DVector::from_column_slice(alpha);
        let fitted = &gram * &a;
        let y = DVector::from_column_slice(&self.labels);
        (y - &fitted).norm_squared() + self.lambda * a.dot(&fitted)
    }

    pub fn objective(&self) -> f64 {
        self.objective_at(&self.alpha)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: KernelModel = serde_json::from_str(s)?;
        ensure_len("alpha vs point count", m.points.len(), m.alpha.len())?;
        ensure_len("labels vs point count", m.points.len(), m.labels.len())?;
        check_points(&m.kernel, &m.points)?;
        Ok(m)
    }
}

/// Solves `(K + λI) α = y`.
///
/// `λ = 0` is accepted only when `K` is invertible with condition below
/// [`MAX_CONDITION`].
pub fn fit_krr(
    points: &[Vec<f64>],
    labels: &[f64],
    k: &KernelDescriptor,
    lambda: f64,
) -> Result<KernelModel> {
    check_points(k, points)?;
    ensure_len("labels vs point count", points.len(), labels.len())?;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge λ must be ≥ 0, got {lambda}")));
    }
    if labels.iter().any(|y| !y.is_finite()) {
        return Err(Error::Numerical("labels contain non-finite values".into()));
    }
    let n = points.len();
    let mut system = gram_matrix(k, points)?;
    for i in 0..n {
        system[(i, i)] += lambda;
    }
    if lambda == 0.0 {
        let cond = condition_number(&system);
        if !(cond < MAX_CONDITION) {
            return Err(Error::Degenerate {
                context: "kernel matrix at λ = 0",
                condition: cond,
                hint: "use a positive ridge parameter",
            });
        }
    }
    let y = DVector::from_column_slice(labels);
    let alpha = spd_solve_vec(&system, &y).ok_or(Error::Degenerate {
        context: "kernel ridge system",
        condition: f64::INFINITY,
        hint: "use a larger ridge parameter",
    })?;
    if alpha.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numerical("dual coefficients are not finite".into()));
    }
    Ok(KernelModel {
        kernel: *k,
        points: points.to_vec(),
        alpha: alpha.iter().copied().collect(),
        lambda,
        labels: labels.to_vec(),
    })
}

/// `Σ_i α_i K(x, x_i)`.
pub fn predict(m: &KernelModel, x: &[f64]) -> Result<f64> {
    ensure_len("query dimension", m.kernel.dim, x.len())?;
    Ok(m
        .points
        .iter()
        .zip(&m.alpha)
        .map(|(p, a)| a * m.kernel.eval_unchecked(x, p))
        .sum())
}

/// Reads a training set: feature columns followed by a label column, no header.
pub fn read_training_csv<R: Read>(reader: R) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() < 2 {
            return Err(Error::Parse(format!("row {row}: need at least one feature and a label")));
        }
        let vals = rec
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        let (label, features) = vals.split_last().expect("len ≥ 2");
        labels.push(*label);
        points.push(features.to_vec());
    }
    if points.is_empty() {
        return Err(Error::Empty("training set is empty"));
    }
    Ok((points, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..p).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect()
    }

    fn symmetric_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
        m.clone().symmetric_eigen().eigenvalues.iter().copied().collect()
    }

    /// Gauss–Jordan elimination with partial pivoting.
    fn dense_solve_oracle(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in 0..n {
                if row != col {
                    let factor = a[row][col] / a[col][col];
                    let pivot_row = a[col].clone();
                    for (dst, src) in a[row][col..].iter_mut().zip(&pivot_row[col..]) {
                        *dst -= factor * src;
                    }
                    b[row] -= factor * b[col];
                }
            }
        }
        (0..n).map(|i| b[i] / a[i][i]).collect()
    }

    #[test]
    fn eval_kernel_examples() {
        let rbf = KernelDescriptor::gaussian(0.3, 2).unwrap();
        assert_eq!(eval_kernel(&rbf, &[0.4, -1.0], &[0.4, -1.0]).unwrap(), 1.0);
        let lin = KernelDescriptor::linear(2).unwrap();
        assert_eq!(eval_kernel(&lin, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 11.0);
        let rbf1 = KernelDescriptor::gaussian(1.0, 1).unwrap();
        let v = eval_kernel(&rbf1, &[0.0], &[1.0]).unwrap();
        assert!((v - 0.606_530_659_712_633_4).abs() < 1e-15);
        let poly = KernelDescriptor::polynomial(2, 1.0, 2).unwrap();
        assert_eq!(eval_kernel(&poly, &[1.0, 2.0], &[3.0, 4.0]).unwrap(), 144.0);
        assert!(eval_kernel(&lin, &[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn descriptor_validation() {
        assert!(KernelDescriptor::gaussian(0.0, 1).is_err());
        assert!(KernelDescriptor::gaussian(-1.0, 1).is_err());
        assert!(KernelDescriptor::polynomial(0, 1.0, 1).is_err());
        assert!(KernelDescriptor::polynomial(2, -1.0, 1).is_err());
        assert!(KernelDescriptor::linear(0).is_err());
        let bad = r#"{"kind":{"type":"gaussian_rbf","bandwidth":-2.0},"dim":1}"#;
        assert!(serde_json::from_str::<KernelDescriptor>(bad).is_err());
    }

    #[test]
    fn kernel_is_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for k in [
            KernelDescriptor::gaussian(0.7, 3).unwrap(),
            KernelDescriptor::polynomial(3, 0.5, 3).unwrap(),
            KernelDescriptor::linear(3).unwrap(),
        ] {
            let pts = random_points(&mut rng, 2, 3);
            assert_eq!(
                eval_kernel(&k, &pts[0], &pts[1]).unwrap(),
                eval_kernel(&k, &pts[1], &pts[0]).unwrap()
            );
        }
    }

    #[test]
    fn gram_matrix_examples() {
        let k = KernelDescriptor::gaussian(1.0, 2).unwrap();
        let g = gram_matrix(&k, &[vec![0.3, 0.1]]).unwrap();
        assert_eq!(g.shape(), (1, 1));
        assert_eq!(g[(0, 0)], 1.0);

        let dup = vec![vec![0.5, 0.5], vec![0.5, 0.5], vec![1.5, -0.5]];
        let ev = symmetric_eigenvalues(&gram_matrix(&k, &dup).unwrap());
        let smallest = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(smallest.abs() < 1e-10);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts = random_points(&mut rng, 10, 2);
        let g = gram_matrix(&k, &pts).unwrap();
        assert_eq!(g, g.transpose());
        assert!(symmetric_eigenvalues(&g).iter().all(|&e| e >= -1e-10));
        assert!(gram_matrix(&k, &[]).is_err());
        assert!(gram_matrix(&k, &[vec![1.0]]).is_err());
    }

    #[test]
    fn gram_matrices_are_psd_for_every_kernel() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for k in [
            KernelDescriptor::gaussian(0.4, 2).unwrap(),
            KernelDescriptor::polynomial(2, 1.0, 2).unwrap(),
            KernelDescriptor::linear(2).unwrap(),
        ] {
            for _ in 0..5 {
                let pts = random_points(&mut rng, 12, 2);
                let g = gram_matrix(&k, &pts).unwrap();
                let scale = g.amax().max(1.0);
                assert!(symmetric_eigenvalues(&g).iter().all(|&e| e >= -1e-10 * scale));
            }
        }
    }

    #[test]
    fn single_point_fit() {
        let k = KernelDescriptor::gaussian(1.0, 1).unwrap();
        let m = fit_krr(&[vec![0.0]], &[2.0], &k, 1.0).unwrap();
        assert!((m.alpha[0] - 1.0).abs() <= 1e-15);
        assert!((predict(&m, &[0.0]).unwrap() - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn interpolates_at_zero_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let k = KernelDescriptor::gaussian(0.5, 1).unwrap();
        let pts: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64 * 0.4]).collect();
        let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = fit_krr(&pts, &y, &k, 0.0).unwrap();
        for (p, yi) in pts.iter().zip(&y) {
            assert!((predict(&m, p).unwrap() - yi).abs() < 1e-6);
        }
    }

    #[test]
    fn zero_ridge_on_duplicates_is_degenerate() {
        let k = KernelDescriptor::gaussian(1.0, 1).unwrap();
        let pts = vec![vec![0.0], vec![0.0]];
        assert!(matches!(
            fit_krr(&pts, &[1.0, 1.0], &k, 0.0),
            Err(Error::Degenerate { .. })
        ));
        assert!(fit_krr(&pts, &[1.0, 1.0], &k, 1e-3).is_ok());
        assert!(fit_krr(&pts, &[1.0, 1.0], &k, -1.0).is_err());
        assert!(fit_krr(&pts, &[1.0], &k, 1.0).is_err());
    }

    #[test]
    fn alpha_matches_dense_solve_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = KernelDescriptor::gaussian(1.0, 2).unwrap();
        let pts = random_points(&mut rng, 5, 2);
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 0.1;
        let m = fit_krr(&pts, &y, &k, lambda).unwrap();
        let a: Vec<Vec<f64>> = (0..5)
            .map(|i| {
                (0..5)
                    .map(|j| {
                        eval_kernel(&k, &pts[i], &pts[j]).unwrap() + if i == j { lambda } else { 0.0 }
                    })
                    .collect()
            })
            .collect();
        let want = dense_solve_oracle(a, y.clone());
        for (got, want) in m.alpha.iter().zip(&want) {
            assert!((got - want).abs() < 1e-10);
        }
        assert!(m.solve_residual() < 1e-8);
    }

    #[test]
    fn fitted_alpha_minimizes_objective() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let k = KernelDescriptor::polynomial(2, 1.0, 2).unwrap();
        let pts = random_points(&mut rng, 6, 2);
        let y: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = fit_krr(&pts, &y, &k, 0.5).unwrap();
        let best = m.objective();
        for _ in 0..100 {
            let perturbed: Vec<f64> = m.alpha.iter().map(|a| a + rng.random_range(-1e-3..1e-3)).collect();
            assert!(m.objective_at(&perturbed) >= best - 1e-12);
        }
    }

    #[test]
    fn prediction_examples() {
        let k = KernelDescriptor::gaussian(0.5, 1).unwrap();
        let zero = KernelModel {
            kernel: k,
            points: vec![vec![0.0], vec![1.0]],
            alpha: vec![0.0, 0.0],
            lambda: 1.0,
            labels: vec![0.0, 0.0],
        };
        assert_eq!(predict(&zero, &[0.3]).unwrap(), 0.0);
        assert!(predict(&zero, &[0.3, 1.0]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<Vec<f64>> = (0..5).map(|_| vec![rng.random_range(0.0..1.0)]).collect();
        let y: Vec<f64> = (0..5).map(|_| rng.random_range(-1.0..1.0)).collect();
        let m = fit_krr(&pts, &y, &k, 0.1).unwrap();
        let l1: f64 = m.alpha.iter().map(|a| a.abs()).sum();
        let mut last = f64::INFINITY;
        for x in [3.0, 5.0, 8.0] {
            let d_min = pts.iter().map(|p| (x - p[0]).abs()).fold(f64::INFINITY, f64::min);
            let bound = l1 * (-d_min * d_min / (2.0 * 0.25)).exp();
            let v = predict(&m, &[x]).unwrap().abs();
            assert!(v <= bound);
            assert!(v <= last);
            last = v;
        }
    }

    #[test]
    fn representer_solution_beats_off_span_candidates() {
        // RKHS restricted to a grid of kernel sections: f = Σ β_j K(·, z_j),
        // ‖f‖² = βᵀ K_zz β. Training points are the first n grid nodes.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let k = KernelDescriptor::gaussian(0.6, 1).unwrap();
        let n = 4;
        let grid: Vec<Vec<f64>> = (0..12).map(|i| vec![i as f64 * 0.25]).collect();
        let pts = grid[..n].to_vec();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let lambda = 0.2;
        let m = fit_krr(&pts, &y, &k, lambda).unwrap();
        let kzz = gram_matrix(&k, &grid).unwrap();
        let objective = |beta: &DVector<f64>| {
            let f = &kzz * beta;
            let loss: f64 = (0..n).map(|i| (y[i] - f[i]).powi(2)).sum();
            loss + lambda * beta.dot(&f)
        };
        let mut beta_star = DVector::zeros(grid.len());
        for i in 0..n {
            beta_star[i] = m.alpha[i];
        }
        let best = objective(&beta_star);
        assert!((best - m.objective()).abs() < 1e-10);
        for _ in 0..1000 {
            let scale = rng.random_range(1e-4..1.0);
            let perturb = DVector::from_fn(grid.len(), |_, _| rng.random_range(-scale..scale));
            assert!(objective(&(&beta_star + perturb)) >= best - 1e-12);
        }
    }

    #[test]
    fn alpha_norm_shrinks_along_ridge_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = KernelDescriptor::gaussian(1.0, 2).unwrap();
        for _ in 0..5 {
            let pts = random_points(&mut rng, 8, 2);
            let y: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norms: Vec<f64> = [1e-3, 1e-2, 1e-1, 1.0, 10.0]
                .iter()
                .map(|&l| {
                    let m = fit_krr(&pts, &y, &k, l).unwrap();
                    m.alpha.iter().map(|a| a * a).sum::<f64>().sqrt()
                })
                .collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn model_json_round_trip_and_training_csv() {
        let k = KernelDescriptor::polynomial(2, 0.5, 2).unwrap();
        let (pts, y) = read_training_csv("0.0,1.0,2.0\n1.5,-1.0,0.25\n".as_bytes()).unwrap();
        assert_eq!(pts, vec![vec![0.0, 1.0], vec![1.5, -1.0]]);
        assert_eq!(y, vec![2.0, 0.25]);
        let m = fit_krr(&pts, &y, &k, 0.3).unwrap();
        let back = KernelModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
        assert!(read_training_csv("1.0\n".as_bytes()).is_err());
    }
}
