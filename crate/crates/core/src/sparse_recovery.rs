//! ℓ1-regularized sparse recovery.
//!
//! Solves `min_α ½‖y − Aα‖² + μ‖α‖₁` with `A = ΦΨ` by proximal gradient
//! (ISTA) or its accelerated form (FISTA). Small `μ` followed by a
//! least-squares refit on the detected support ([`debias`]) recovers exactly
//! sparse signals from noiseless measurements.

use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::linalg::all_finite;

/// Entries with `|α_i| > SUPPORT_RTOL · max|α|` form the support.
pub const SUPPORT_RTOL: f64 = 1e-6;

/// Relative size of an objective increase attributed to roundoff.
const ROUNDOFF_RTOL: f64 = 1e-12;

/// `sign(z) · max(|z| − t, 0)`, the proximal map of `t|·|`.
pub fn soft_shrink(z: f64, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(Error::InvalidParameter(format!("shrinkage threshold must be ≥ 0, got {t}")));
    }
    Ok(shrink(z, t))
}

fn shrink(z: f64, t: f64) -> f64 {
    if z > t {
        z - t
    } else if z < -t {
        z + t
    } else {
        0.0
    }
}

/// `m × n` matrix of i.i.d. `N(0, 1/m)` entries drawn row by row from a
/// ChaCha20 stream seeded with `seed`.
pub fn sensing_matrix(m: usize, n: usize, seed: u64) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter(format!("sensing matrix must be at least 1×1, got {m}×{n}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("positive std");
    let row_major: Vec<f64> = (0..m * n).map(|_| normal.sample(&mut rng)).collect();
    Ok(DMatrix::from_row_slice(m, n, &row_major))
}

/// Estimate of `σ_max(A)²` by power iteration on `AᵀA` from the all-ones vector.
pub fn power_method_lipschitz(a: &DMatrix<f64>, iters: usize) -> f64 {
    let n = a.ncols();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..iters {
        let w = a.transpose() * (a * &v);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = v.dot(&w);
        v = w / norm;
    }
    estimate
}

/// Measurement operator `Φ`, synthesis dictionary `Ψ`, and their product.
#[derive(Debug, Clone, PartialEq)]
pub struct SensingSystem {
    phi: DMatrix<f64>,
    psi: DMatrix<f64>,
    a: DMatrix<f64>,
    lipschitz: f64,
    warnings: Vec<String>,
}

impl SensingSystem {
    pub fn new(phi: DMatrix<f64>, psi: DMatrix<f64>) -> Result<Self> {
        let (m, n) = phi.shape();
        if m == 0 || n == 0 {
            return Err(Error::Empty("sensing matrix"));
        }
        ensure_len("synthesis matrix rows", n, psi.nrows())?;
        ensure_len("synthesis matrix cols", n, psi.ncols())?;
        if !all_finite(&phi) || !all_finite(&psi) {
            return Err(Error::Numerical("sensing system has non-finite entries".into()));
        }
        let a = &phi * &psi;
        // σ_max² from the SVD; a power-method estimate can fall short of it
        let lipschitz = a.singular_values().max().powi(2);
        if !(lipschitz > 0.0) {
            return Err(Error::Degenerate {
                context: "sensing product ΦΨ is zero",
                condition: f64::INFINITY,
                hint: "supply a nonzero sensing matrix",
            });
        }
        let mut warnings = Vec::new();
        if m > n {
            warnings.push(format!("{m} measurements exceed {n} unknowns"));
        }
        Ok(Self {
            phi,
            psi,
            a,
            lipschitz,
            warnings,
        })
    }

    /// `Ψ = I`.
    pub fn with_identity_dictionary(phi: DMatrix<f64>) -> Result<Self> {
        let n = phi.ncols();
        Self::new(phi, DMatrix::identity(n, n))
    }

    /// Gaussian `Φ` from [`sensing_matrix`] and `Ψ = I`.
    pub fn gaussian(m: usize, n: usize, seed: u64) -> Result<Self> {
        Self::with_identity_dictionary(sensing_matrix(m, n, seed)?)
    }

    /// Reads `Φ` and optionally `Ψ` from headerless numeric CSV.
    pub fn from_csv<R: Read, S: Read>(phi: R, psi: Option<S>) -> Result<Self> {
        let phi = read_matrix_csv(phi)?;
        match psi {
            Some(r) => Self::new(phi, read_matrix_csv(r)?),
            None => Self::with_identity_dictionary(phi),
        }
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn psi(&self) -> &DMatrix<f64> {
        &self.psi
    }

    /// `A = ΦΨ`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    /// `L = σ_max(A)²`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn measurements(&self) -> usize {
        self.a.nrows()
    }

    pub fn unknowns(&self) -> usize {
        self.a.ncols()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `y = Aα`.
    pub fn measure(&self, alpha: &[f64]) -> Result<Vec<f64>> {
        ensure_len("coefficient count", self.unknowns(), alpha.len())?;
        Ok((&self.a * DVector::from_column_slice(alpha)).iter().copied().collect())
    }

    /// `½‖y − Aα‖² + μ‖α‖₁`.
    pub fn objective(&self, y: &[f64], alpha: &[f64], mu: f64) -> Result<f64> {
        ensure_len("measurement count", self.measurements(), y.len())?;
        let ax = self.measure(alpha)?;
        let fit: f64 = ax.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        Ok(0.5 * fit + mu * alpha.iter().map(|v| v.abs()).sum::<f64>())
    }

    fn objective_vec(&self, y: &DVector<f64>, alpha: &DVector<f64>, mu: f64) -> f64 {
        0.5 * (&self.a * alpha - y).norm_squared() + mu * alpha.lp_norm(1)
    }
}

pub fn read_matrix_csv<R: Read>(reader: R) -> Result<DMatrix<f64>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let vals = rec?
            .iter()
            .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}"))))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            ensure_len("matrix row length", first.len(), vals.len())?;
        }
        rows.push(vals);
    }
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::Empty("matrix CSV has no entries"));
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j]))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryResult {
    pub alpha: Vec<f64>,
    /// Objective at the start and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

impl RecoveryResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace holds the initial objective")
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_problem(y: &[f64], sys: &SensingSystem, mu: f64) -> Result<DVector<f64>> {
    ensure_len("measurement count", sys.measurements(), y.len())?;
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParameter(format!("μ must be > 0, got {mu}")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("measurements contain non-finite values".into()));
    }
    Ok(DVector::from_column_slice(y))
}

fn prox_step(sys: &SensingSystem, y: &DVector<f64>, point: &DVector<f64>, mu: f64) -> DVector<f64> {
    let step = 1.0 / sys.lipschitz;
    let grad = sys.a.transpose() * (y - &sys.a * point);
    (point + grad * step).map(|v| shrink(v, mu * step))
}

fn non_finite(iteration: usize) -> Error {
    Error::Numerical(format!("non-finite iterate at iteration {iteration}"))
}

/// ISTA from `α = 0` with step `1/L`.
///
/// Stops once an iteration lowers the objective by less than `tol`. The
/// objective trace never increases: an increase at roundoff level ends the run
/// on the previous iterate, anything larger is an error.
pub fn ista(y: &[f64], sys: &SensingSystem, mu: f64, max_iters: usize, tol: f64) -> Result<RecoveryResult> {
    let yv = check_problem(y, sys, mu)?;
    let mut alpha = DVector::zeros(sys.unknowns());
    let mut f = sys.objective_vec(&yv, &alpha, mu);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let next = prox_step(sys, &yv, &alpha, mu);
        let f_next = sys.objective_vec(&yv, &next, mu);
        iterations += 1;
        if !f_next.is_finite() || next.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(iterations));
        }
        if f_next > f {
            if f_next - f > ROUNDOFF_RTOL * f.max(1.0) {
                return Err(Error::Numerical(format!(
                    "objective increased from {f:e} to {f_next:e} at iteration {iterations}"
                )));
            }
            converged = true;
            break;
        }
        let decrease = f - f_next;
        alpha = next;
        f = f_next;
        trace.push(f);
        if decrease < tol {
            converged = true;
            break;
        }
    }
    Ok(RecoveryResult {
        alpha: alpha.iter().copied().collect(),
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// FISTA from `α = 0`; stops when `|ΔF| < tol` between iterations.
pub fn fista(y: &[f64], sys: &SensingSystem, mu: f64, max_iters: usize, tol: f64) -> Result<RecoveryResult> {
    let yv = check_problem(y, sys, mu)?;
    let mut alpha = DVector::zeros(sys.unknowns());
    let mut momentum_point = alpha.clone();
    let mut t = 1.0f64;
    let mut f = sys.objective_vec(&yv, &alpha, mu);
    let mut trace = vec![f];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iters {
        let next = prox_step(sys, &yv, &momentum_point, mu);
        let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
        momentum_point = &next + (&next - &alpha) * ((t - 1.0) / t_next);
        let f_next = sys.objective_vec(&yv, &next, mu);
        iterations += 1;
        if !f_next.is_finite() || momentum_point.iter().any(|v| !v.is_finite()) {
            return Err(non_finite(iterations));
        }
        let change = (f - f_next).abs();
        alpha = next;
        t = t_next;
        f = f_next;
        trace.push(f);
        if change < tol {
            converged = true;
            break;
        }
    }
    Ok(RecoveryResult {
        alpha: alpha.iter().copied().collect(),
        objective_trace: trace,
        iterations,
        converged,
    })
}

/// Indices with `|α_i| > SUPPORT_RTOL · max|α|`.
pub fn support(alpha: &[f64]) -> Vec<usize> {
    let peak = alpha.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak == 0.0 {
        return Vec::new();
    }
    (0..alpha.len()).filter(|&i| alpha[i].abs() > SUPPORT_RTOL * peak).collect()
}

/// Least-squares refit of `y` on the support columns of `A`; zero elsewhere.
pub fn debias(alpha: &[f64], y: &[f64], sys: &SensingSystem) -> Result<Vec<f64>> {
    ensure_len("coefficient count", sys.unknowns(), alpha.len())?;
    ensure_len("measurement count", sys.measurements(), y.len())?;
    let s = support(alpha);
    if s.is_empty() {
        return Err(Error::Empty("recovered support is empty"));
    }
    if s.len() > sys.measurements() {
        return Err(Error::Precondition(format!(
            "support of size {} exceeds {} measurements; the refit is underdetermined",
            s.len(),
            sys.measurements()
        )));
    }
    let sub = sys.a.select_columns(&s);
    let svd = sub.clone().svd(true, true);
    let sv = &svd.singular_values;
    if sv.min() <= f64::EPSILON * sv.max() * s.len() as f64 {
        return Err(Error::Degenerate {
            context: "support columns of ΦΨ",
            condition: sv.max() / sv.min(),
            hint: "the support columns are linearly dependent",
        });
    }
    let coef = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| Error::Numerical(e.to_string()))?;
    let mut out = vec![0.0; alpha.len()];
    for (k, &i) in s.iter().enumerate() {
        out[i] = coef[k];
    }
    Ok(out)
}

/// Worst violation of the ℓ1 optimality conditions with `g = Aᵀ(Aα − y)`:
/// `|g_i + μ sign(α_i)|` on the support and `max(|g_i| − μ, 0)` off it.
pub fn optimality_violation(alpha: &[f64], y: &[f64], sys: &SensingSystem, mu: f64) -> Result<f64> {
    ensure_len("coefficient count", sys.unknowns(), alpha.len())?;
    ensure_len("measurement count", sys.measurements(), y.len())?;
    let a = DVector::from_column_slice(alpha);
    let g = sys.a.transpose() * (&sys.a * &a - DVector::from_column_slice(y));
    Ok(alpha
        .iter()
        .zip(g.iter())
        .map(|(&ai, &gi)| {
            if ai != 0.0 {
                (gi + mu * ai.signum()).abs()
            } else {
                (gi.abs() - mu).max(0.0)
            }
        })
        .fold(0.0, f64::max))
}

/// `k`-sparse coefficients on a seeded random support with standard-normal
/// amplitudes bounded away from zero.
pub fn planted_sparse(n: usize, k: usize, seed: u64) -> Result<Vec<f64>> {
    use rand::seq::index::sample;
    use rand::Rng;
    if k > n {
        return Err(Error::InvalidParameter(format!("sparsity {k} exceeds length {n}")));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut idx = sample(&mut rng, n, k).into_vec();
    idx.sort_unstable();
    let mut alpha = vec![0.0; n];
    for i in idx {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        alpha[i] = sign * rng.random_range(0.5..1.5);
    }
    Ok(alpha)
}
