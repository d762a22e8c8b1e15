//! Finite-rank operator estimation and Koopman/EDMD.
//!
//! Operators act on coefficient vectors. The ridge estimate
//!
//! ```text
//! T = argmin Σ ‖T f_i − g_i‖² + λ ‖T‖²_HS = G_yx (G_xx + λI)⁻¹
//! ```
//!
//! with `G_xx = Σ f_i f_iᵀ` and `G_yx = Σ g_i f_iᵀ` is the building block for
//! EDMD (on lifted snapshot pairs) and for the relation operators in
//! [`crate::reasoning`].

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector, Schur};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::linalg::{all_finite, fmt_f64, pseudo_inverse, spd_solve};

/// Relative singular-value cutoff for the `λ = 0` pseudoinverse.
pub const PINV_RCOND: f64 = 1e-12;

/// Eigenpairs with `‖Kv − λv‖` above this are reported as a solver failure.
pub const EIG_RESIDUAL_TOL: f64 = 1e-8;

/// A `d_out × d_in` matrix acting on coefficient vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OperatorRepr", into = "OperatorRepr")]
pub struct OperatorMatrix {
    pub entries: DMatrix<f64>,
    pub domain: String,
    pub codomain: String,
}

#[derive(Serialize, Deserialize)]
struct OperatorRepr {
    rows: usize,
    cols: usize,
    /// Row-major.
    entries: Vec<f64>,
    #[serde(default = "default_tag")]
    domain: String,
    #[serde(default = "default_tag")]
    codomain: String,
}

fn default_tag() -> String {
    "coefficients".to_string()
}

impl TryFrom<OperatorRepr> for OperatorMatrix {
    type Error = Error;

    fn try_from(r: OperatorRepr) -> Result<Self> {
        ensure_len("operator entry count", r.rows * r.cols, r.entries.len())?;
        let m = DMatrix::from_row_slice(r.rows, r.cols, &r.entries);
        let mut op = OperatorMatrix::new(m)?;
        op.domain = r.domain;
        op.codomain = r.codomain;
        Ok(op)
    }
}

impl From<OperatorMatrix> for OperatorRepr {
    fn from(op: OperatorMatrix) -> Self {
        let (rows, cols) = op.entries.shape();
        OperatorRepr {
            rows,
            cols,
            entries: op.entries.transpose().iter().copied().collect(),
            domain: op.domain,
            codomain: op.codomain,
        }
    }
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<f64>) -> Result<Self> {
        if entries.nrows() == 0 || entries.ncols() == 0 {
            return Err(Error::Empty("operator needs at least one row and column"));
        }
        if !all_finite(&entries) {
            return Err(Error::Numerical("operator has non-finite entries".into()));
        }
        Ok(Self {
            entries,
            domain: default_tag(),
            codomain: default_tag(),
        })
    }

    pub fn identity(d: usize) -> Self {
        Self::new(DMatrix::identity(d, d)).expect("identity is finite")
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        Self::new(DMatrix::from_diagonal(&DVector::from_column_slice(values)))
    }

    pub fn with_tags(mut self, domain: impl Into<String>, codomain: impl Into<String>) -> Self {
        self.domain = domain.into();
        self.codomain = codomain.into();
        self
    }

    pub fn d_in(&self) -> usize {
        self.entries.ncols()
    }

    pub fn d_out(&self) -> usize {
        self.entries.nrows()
    }
}

/// `‖T‖_HS = sqrt(Σ_ij T_ij²)`.
pub fn hs_norm(t: &OperatorMatrix) -> f64 {
    t.entries.norm()
}

pub fn apply_operator(t: &OperatorMatrix, c: &[f64]) -> Result<Vec<f64>> {
    ensure_len("operator input dimension", t.d_in(), c.len())?;
    Ok((&t.entries * DVector::from_column_slice(c)).iter().copied().collect())
}

fn stack_rows(rows: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j])
}

fn check_pairs(inputs: &[Vec<f64>], outputs: &[Vec<f64>]) -> Result<(usize, usize)> {
    if inputs.is_empty() {
        return Err(Error::Empty("operator regression needs at least one pair"));
    }
    ensure_len("input/output pair count", inputs.len(), outputs.len())?;
    let d_in = inputs[0].len();
    let d_out = outputs[0].len();
    if d_in == 0 || d_out == 0 {
        return Err(Error::InvalidParameter("coefficient vectors must be non-empty".into()));
    }
    for (f, g) in inputs.iter().zip(outputs) {
        ensure_len("input dimension", d_in, f.len())?;
        ensure_len("output dimension", d_out, g.len())?;
        if f.iter().chain(g).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("training pairs contain non-finite values".into()));
        }
    }
    Ok((d_in, d_out))
}

/// Ridge estimate `T = G_yx (G_xx + λI)⁻¹`, `λ > 0`.
pub fn fit_operator_ridge(inputs: &[Vec<f64>], outputs: &[Vec<f64>], lambda: f64) -> Result<OperatorMatrix> {
    let (d_in, d_out) = check_pairs(inputs, outputs)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge λ must be > 0, got {lambda}")));
    }
    let x = stack_rows(inputs, d_in);
    let y = stack_rows(outputs, d_out);
    let mut gxx = x.transpose() * &x;
    for i in 0..d_in {
        gxx[(i, i)] += lambda;
    }
    // (G_xx + λI) Tᵀ = Xᵀ Y
    let t_transposed = spd_solve(&gxx, &(x.transpose() * &y)).ok_or(Error::Degenerate {
        context: "regularized input Gram matrix",
        condition: f64::INFINITY,
        hint: "increase λ",
    })?;
    OperatorMatrix::new(t_transposed.transpose())
}

/// `Σ ‖T f_i − g_i‖² + λ ‖T‖²_HS`.
pub fn ridge_objective(t: &OperatorMatrix, inputs: &[Vec<f64>], outputs: &[Vec<f64>], lambda: f64) -> Result<f64> {
    check_pairs(inputs, outputs)?;
    let mut loss = 0.0;
    for (f, g) in inputs.iter().zip(outputs) {
        let tf = apply_operator(t, f)?;
        ensure_len("output dimension", t.d_out(), g.len())?;
        loss += tf.iter().zip(g).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(loss + lambda * hs_norm(t).powi(2))
}

/// First-order optimality residual `‖T(G_xx + λI) − G_yx‖_F`.
pub fn ridge_optimality_residual(
    t: &OperatorMatrix,
    inputs: &[Vec<f64>],
    outputs: &[Vec<f64>],
    lambda: f64,
) -> Result<f64> {
    let (d_in, d_out) = check_pairs(inputs, outputs)?;
    let x = stack_rows(inputs, d_in);
    let y = stack_rows(outputs, d_out);
    let mut gxx = x.transpose() * &x;
    for i in 0..d_in {
        gxx[(i, i)] += lambda;
    }
    let gyx = y.transpose() * &x;
    Ok((&t.entries * gxx - gyx).norm())
}

/// A feature map `Ψ` from states to observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DictionaryKind {
    /// `Ψ(x) = x`.
    Identity,
    /// Every monomial of total degree `≤ max_degree`, constant first, then the
    /// raw coordinates, then higher degrees.
    Monomials { max_degree: u32 },
    /// The raw coordinates followed by `exp(−‖x − c‖² / (2σ²))` per centre.
    GaussianRbf { centers: Vec<Vec<f64>>, bandwidth: f64 },
    /// Identity on delay vectors `[x_t, x_{t−1}, …, x_{t−L}]`.
    DelayEmbedding { lags: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dictionary {
    pub kind: DictionaryKind,
    /// Dimension `p` of the underlying state.
    pub state_dim: usize,
    #[serde(skip)]
    exponents: Vec<Vec<u32>>,
}

fn monomial_exponents(p: usize, max_degree: u32) -> Vec<Vec<u32>> {
    fn compositions(total: u32, parts: usize, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in (0..=total).rev() {
            prefix.push(first);
            compositions(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for degree in 0..=max_degree {
        compositions(degree, p, &mut Vec::with_capacity(p), &mut out);
    }
    out
}

impl Dictionary {
    pub fn new(kind: DictionaryKind, state_dim: usize) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::InvalidParameter("state dimension must be ≥ 1".into()));
        }
        let mut exponents = Vec::new();
        match &kind {
            DictionaryKind::Identity | DictionaryKind::DelayEmbedding { .. } => {}
            DictionaryKind::Monomials { max_degree } => {
                if *max_degree == 0 {
                    return Err(Error::InvalidParameter("monomial degree must be ≥ 1".into()));
                }
                exponents = monomial_exponents(state_dim, *max_degree);
            }
            DictionaryKind::GaussianRbf { centers, bandwidth } => {
                if !(*bandwidth > 0.0 && bandwidth.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "RBF bandwidth must be positive, got {bandwidth}"
                    )));
                }
                for c in centers {
                    ensure_len("RBF centre dimension", state_dim, c.len())?;
                }
            }
        }
        Ok(Self {
            kind,
            state_dim,
            exponents,
        })
    }

    pub fn identity(p: usize) -> Result<Self> {
        Self::new(DictionaryKind::Identity, p)
    }

    pub fn monomials(p: usize, max_degree: u32) -> Result<Self> {
        Self::new(DictionaryKind::Monomials { max_degree }, p)
    }

    /// Rebuilds derived tables after deserialization.
    fn rebuilt(self) -> Result<Self> {
        Self::new(self.kind, self.state_dim)
    }

    /// Length of the vectors [`Dictionary::eval`] accepts.
    pub fn input_dim(&self) -> usize {
        match &self.kind {
            DictionaryKind::DelayEmbedding { lags } => self.state_dim * (lags + 1),
            _ => self.state_dim,
        }
    }

    /// Number of observables `D`.
    pub fn output_dim(&self) -> usize {
        match &self.kind {
            DictionaryKind::Identity => self.state_dim,
            DictionaryKind::DelayEmbedding { lags } => self.state_dim * (lags + 1),
            DictionaryKind::Monomials { .. } => self.exponents.len(),
            DictionaryKind::GaussianRbf { centers, .. } => self.state_dim + centers.len(),
        }
    }

    /// Position of input coordinate `i` among the observables.
    pub fn coordinate_index(&self, i: usize) -> usize {
        match &self.kind {
            DictionaryKind::Monomials { .. } => 1 + i,
            _ => i,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("state dimension", self.input_dim(), x.len())?;
        Ok(match &self.kind {
            DictionaryKind::Identity | DictionaryKind::DelayEmbedding { .. } => x.to_vec(),
            DictionaryKind::Monomials { .. } => self
                .exponents
                .iter()
                .map(|e| x.iter().zip(e).map(|(v, &p)| v.powi(p as i32)).product())
                .collect(),
            DictionaryKind::GaussianRbf { centers, bandwidth } => {
                let mut out = x.to_vec();
                out.extend(centers.iter().map(|c| {
                    let d2: f64 = x.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum();
                    (-d2 / (2.0 * bandwidth * bandwidth)).exp()
                }));
                out
            }
        })
    }

    /// Selection matrix recovering the input coordinates from `Ψ(x)`.
    pub fn readout(&self) -> DMatrix<f64> {
        let mut r = DMatrix::zeros(self.input_dim(), self.output_dim());
        for i in 0..self.input_dim() {
            r[(i, self.coordinate_index(i))] = 1.0;
        }
        r
    }
}

/// Aligned snapshots `(x_t, x_{t+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotPairs {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

impl SnapshotPairs {
    pub fn new(x: Vec<Vec<f64>>, y: Vec<Vec<f64>>) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Empty("snapshot set is empty"));
        }
        ensure_len("snapshot pair count", x.len(), y.len())?;
        let p = x[0].len();
        if p == 0 {
            return Err(Error::InvalidParameter("states must be non-empty".into()));
        }
        for (a, b) in x.iter().zip(&y) {
            ensure_len("snapshot dimension", p, a.len())?;
            ensure_len("snapshot dimension", p, b.len())?;
        }
        Ok(Self { x, y })
    }

    /// Consecutive pairs of a trajectory.
    pub fn from_trajectory(states: &[Vec<f64>]) -> Result<Self> {
        if states.len() < 2 {
            return Err(Error::Empty("trajectory needs at least two states"));
        }
        Self::new(states[..states.len() - 1].to_vec(), states[1..].to_vec())
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x[0].len()
    }

    /// Rows of `x` columns followed by `y` columns, no header.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        for (a, b) in self.x.iter().zip(&self.y) {
            w.write_record(a.iter().chain(b).map(|v| fmt_f64(*v)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() % 2 != 0 || rec.is_empty() {
                return Err(Error::Parse(format!("row {row}: expected an even number of columns")));
            }
            let vals = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            let (a, b) = vals.split_at(vals.len() / 2);
            x.push(a.to_vec());
            y.push(b.to_vec());
        }
        Self::new(x, y)
    }
}

/// Delay-coordinate snapshot pairs: state `t` is `[x_t, x_{t−1}, …, x_{t−lags}]`.
pub fn delay_embed(series: &[Vec<f64>], lags: usize) -> Result<SnapshotPairs> {
    if series.len() < lags + 2 {
        return Err(Error::Empty("series too short for the requested lags"));
    }
    let delay = |t: usize| -> Vec<f64> { (0..=lags).flat_map(|l| series[t - l].iter().copied()).collect() };
    let states: Vec<Vec<f64>> = (lags..series.len()).map(delay).collect();
    SnapshotPairs::from_trajectory(&states)
}

/// EDMD model: dictionary, Koopman matrix on observables, linear readout.
#[derive(Debug, Clone, PartialEq)]
pub struct KoopmanModel {
    pub dictionary: Dictionary,
    pub k: OperatorMatrix,
    pub readout: DMatrix<f64>,
    /// Non-fatal fit diagnostics, e.g. fewer snapshots than observables.
    pub warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct KoopmanRepr {
    dictionary: Dictionary,
    k: OperatorMatrix,
    readout: OperatorMatrix,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

impl KoopmanModel {
    pub fn lift(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.dictionary.eval(x)
    }

    /// One application of `K` in observable space.
    pub fn step_observables(&self, z: &[f64]) -> Result<Vec<f64>> {
        apply_operator(&self.k, z)
    }

    pub fn read_state(&self, z: &[f64]) -> Result<Vec<f64>> {
        ensure_len("observable dimension", self.readout.ncols(), z.len())?;
        Ok((&self.readout * DVector::from_column_slice(z)).iter().copied().collect())
    }

    /// JSON with `K` and the readout stored row-major.
    pub fn to_json(&self) -> Result<String> {
        let repr = KoopmanRepr {
            dictionary: self.dictionary.clone(),
            k: self.k.clone(),
            readout: OperatorMatrix::new(self.readout.clone())?.with_tags("observables", "state"),
            warnings: self.warnings.clone(),
        };
        Ok(serde_json::to_string_pretty(&repr)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let repr: KoopmanRepr = serde_json::from_str(s)?;
        let dictionary = repr.dictionary.rebuilt()?;
        let d = dictionary.output_dim();
        ensure_len("Koopman rows", d, repr.k.d_out())?;
        ensure_len("Koopman cols", d, repr.k.d_in())?;
        ensure_len("readout cols", d, repr.readout.d_in())?;
        Ok(Self {
            dictionary,
            k: repr.k,
            readout: repr.readout.entries,
            warnings: repr.warnings,
        })
    }
}

/// EDMD: regress `Ψ(y_i)` on `Ψ(x_i)`.
///
/// `λ > 0` uses [`fit_operator_ridge`]; `λ = 0` uses the SVD pseudoinverse of the
/// lifted data and fails when it is rank deficient.
pub fn fit_edmd(pairs: &SnapshotPairs, dictionary: &Dictionary, lambda: f64) -> Result<KoopmanModel> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge λ must be ≥ 0, got {lambda}")));
    }
    ensure_len("snapshot dimension vs dictionary", dictionary.input_dim(), pairs.dim())?;
    let lifted_x = pairs.x.iter().map(|v| dictionary.eval(v)).collect::<Result<Vec<_>>>()?;
    let lifted_y = pairs.y.iter().map(|v| dictionary.eval(v)).collect::<Result<Vec<_>>>()?;
    let d = dictionary.output_dim();
    let mut warnings = Vec::new();
    if pairs.len() < d {
        warnings.push(format!(
            "{} snapshot pairs for {d} observables; the fit is underdetermined",
            pairs.len()
        ));
    }
    let k = if lambda > 0.0 {
        fit_operator_ridge(&lifted_x, &lifted_y, lambda)?
    } else {
        let px = stack_rows(&lifted_x, d);
        let py = stack_rows(&lifted_y, d);
        let (pinv, rank) = pseudo_inverse(&px, PINV_RCOND);
        if rank < d {
            let sv = px.singular_values();
            return Err(Error::Degenerate {
                context: "lifted snapshot matrix at λ = 0",
                condition: sv.max() / sv.min(),
                hint: "use λ > 0",
            });
        }
        OperatorMatrix::new((pinv * py).transpose())?
    };
    Ok(KoopmanModel {
        dictionary: dictionary.clone(),
        k: k.with_tags("observables", "observables"),
        readout: dictionary.readout(),
        warnings,
    })
}

/// An eigenvalue of `K` with a unit-norm eigenvector in observable space.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair {
    pub value: Complex64,
    pub vector: DVector<Complex64>,
    /// `‖Kv − λv‖₂`.
    pub residual: f64,
}

/// Eigenpairs of `K` sorted by descending modulus.
///
/// Eigenvalues come from a real Schur decomposition; each eigenvector is the
/// right singular vector of `K − λI` for its smallest singular value (the
/// `m`-th smallest for the `m`-th copy of a repeated eigenvalue).
pub fn koopman_eigs(model: &KoopmanModel) -> Result<Vec<Eigenpair>> {
    matrix_eigs(&model.k.entries)
}

pub fn matrix_eigs(k: &DMatrix<f64>) -> Result<Vec<Eigenpair>> {
    let d = k.nrows();
    if d != k.ncols() {
        return Err(Error::Conformability {
            what: "square operator",
            expected: k.nrows(),
            found: k.ncols(),
        });
    }
    let schur = Schur::try_new(k.clone(), f64::EPSILON, 100 * d.max(10))
        .ok_or_else(|| Error::Numerical(format!("Schur iteration did not converge for a {d}×{d} operator")))?;
    let mut values: Vec<Complex64> = schur.complex_eigenvalues().iter().copied().collect();
    values.sort_by(|a, b| {
        b.norm()
            .total_cmp(&a.norm())
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
    let kc: DMatrix<Complex64> = k.map(|v| Complex64::new(v, 0.0));
    let scale = k.norm().max(1.0);
    let mut out: Vec<Eigenpair> = Vec::with_capacity(d);
    for (idx, &lambda) in values.iter().enumerate() {
        let copy = values[..idx]
            .iter()
            .filter(|v| (*v - lambda).norm() <= 1e-8 * scale)
            .count();
        let shifted = &kc - DMatrix::<Complex64>::identity(d, d) * lambda;
        let svd = shifted.svd(false, true);
        let v_t = svd.v_t.as_ref().expect("v_t requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let row = order[copy.min(order.len() - 1)];
        let mut v: DVector<Complex64> = v_t.row(row).adjoint();
        // fix the phase so the largest component is real and positive
        let pivot = (0..d)
            .max_by(|&a, &b| v[a].norm().total_cmp(&v[b].norm()).then(b.cmp(&a)))
            .expect("d ≥ 1");
        let phase = v[pivot] / v[pivot].norm();
        v /= phase;
        v /= Complex64::new(v.norm(), 0.0);
        let residual = (&kc * &v - &v * lambda).norm();
        if !(residual <= EIG_RESIDUAL_TOL * scale) {
            return Err(Error::Numerical(format!(
                "eigenpair {idx} (λ = {lambda}) has residual {residual:e}; the operator may be defective"
            )));
        }
        out.push(Eigenpair {
            value: lambda,
            vector: v,
            residual,
        });
    }
    Ok(out)
}

/// Rows of `re,im,magnitude` with a header line.
pub fn write_eigenvalues_csv<W: Write>(pairs: &[Eigenpair], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["re", "im", "magnitude"])?;
    for p in pairs {
        w.write_record([fmt_f64(p.value.re), fmt_f64(p.value.im), fmt_f64(p.value.norm())])?;
    }
    w.flush()?;
    Ok(())
}

/// Lift once, iterate `z ← Kz`, read out the state after every step.
pub fn forecast(model: &KoopmanModel, x0: &[f64], steps: usize) -> Result<Vec<Vec<f64>>> {
    if steps == 0 {
        return Err(Error::InvalidParameter("forecast needs at least one step".into()));
    }
    let mut z = model.lift(x0)?;
    let mut out = Vec::with_capacity(steps);
    for _ in 0..steps {
        z = model.step_observables(&z)?;
        out.push(model.read_state(&z)?);
    }
    Ok(out)
}
