//! Discretized `L²([0, 1))`.
//!
//! A [`SampledFunction`] holds `N` samples on the grid `x_i = i / N`. Inner
//! products use the left-Riemann rule with weight `Δ = 1/N`:
//!
//! ```text
//! ⟨f, g⟩ = Δ · Σ_i f_i · conj(g_i)
//! ```
//!
//! Under this rule the sampled exponentials `exp(i2πkx)` with distinct `k mod N`
//! and the dyadic Haar system (for power-of-two `N`) are orthonormal to machine
//! precision, so Parseval-type identities hold exactly rather than up to `O(Δ)`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::linalg::{condition_number, fmt_f64};

/// Gram matrices with a condition estimate above this are refused.
pub const DEFAULT_MAX_CONDITION: f64 = 1e12;

/// Tolerance on `‖ψ‖ = 1` for [`project_onto_unit`].
pub const UNIT_NORM_TOL: f64 = 1e-8;

/// Tolerance on `⟨φ_n, ψ_m⟩ = δ_nm` for [`biorthogonal_reconstruct`].
pub const BIORTHOGONALITY_TOL: f64 = 1e-8;

/// A real- or complex-valued function sampled uniformly on `[0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SamplesRepr", into = "SamplesRepr")]
pub struct SampledFunction {
    samples: Vec<Complex64>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum SamplesRepr {
    Real(Vec<f64>),
    Complex(Vec<[f64; 2]>),
}

impl TryFrom<SamplesRepr> for SampledFunction {
    type Error = Error;

    fn try_from(repr: SamplesRepr) -> Result<Self> {
        match repr {
            SamplesRepr::Real(v) => SampledFunction::from_real(&v),
            SamplesRepr::Complex(v) => {
                SampledFunction::new(v.into_iter().map(|[re, im]| Complex64::new(re, im)).collect())
            }
        }
    }
}

impl From<SampledFunction> for SamplesRepr {
    fn from(f: SampledFunction) -> Self {
        if f.is_real() {
            SamplesRepr::Real(f.samples.iter().map(|z| z.re).collect())
        } else {
            SamplesRepr::Complex(f.samples.iter().map(|z| [z.re, z.im]).collect())
        }
    }
}

impl SampledFunction {
    /// Builds a function from complex samples. Rejects empty or non-finite input.
    pub fn new(samples: Vec<Complex64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("sampled function needs at least one sample"));
        }
        if let Some(i) = samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical(format!("sample {i} is not finite")));
        }
        Ok(Self { samples })
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    /// Samples `f` at `x_i = i / n`.
    pub fn from_fn(n: usize, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let dx = 1.0 / n as f64;
        Self::new((0..n).map(|i| f(i as f64 * dx)).collect())
    }

    pub fn from_real_fn(n: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::from_fn(n, |x| Complex64::new(f(x), 0.0))
    }

    pub fn zeros(n: usize) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); n])
    }

    /// Constructor for values already known to be finite and non-empty.
    pub(crate) fn from_samples_unchecked(samples: Vec<Complex64>) -> Self {
        debug_assert!(!samples.is_empty());
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    /// Quadrature weight `Δ = 1/N`.
    pub fn spacing(&self) -> f64 {
        1.0 / self.samples.len() as f64
    }

    /// True when every imaginary part is exactly zero.
    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|z| z.im == 0.0)
    }

    pub fn real_parts(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }

    pub fn scaled(&self, c: Complex64) -> Self {
        Self::from_samples_unchecked(self.samples.iter().map(|z| z * c).collect())
    }

    /// `a·self + b·other`.
    pub fn linear_combination(&self, a: Complex64, other: &Self, b: Complex64) -> Result<Self> {
        ensure_len("sampled function lengths", self.len(), other.len())?;
        Ok(Self::from_samples_unchecked(
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        ))
    }

    pub fn checked_add(&self, other: &Self) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn checked_sub(&self, other: &Self) -> Result<Self> {
        self.linear_combination(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    /// Largest pointwise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        ensure_len("sampled function lengths", self.len(), other.len())?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max))
    }

    /// Circular shift: `out[i] = self[(i − tau) mod N]`.
    pub fn circular_shift(&self, tau: isize) -> Self {
        let n = self.len() as isize;
        let shift = tau.rem_euclid(n) as usize;
        let mut out = self.samples.clone();
        out.rotate_right(shift);
        Self::from_samples_unchecked(out)
    }

    /// Writes one sample per row: `re` for real functions, `re,im` otherwise.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
        let real = self.is_real();
        for z in &self.samples {
            if real {
                w.write_record([fmt_f64(z.re)])?;
            } else {
                w.write_record([fmt_f64(z.re), fmt_f64(z.im)])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut samples = Vec::new();
        for (row, record) in r.records().enumerate() {
            let record = record?;
            let parse = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("row {row}: {e}")))
            };
            let z = match record.len() {
                1 => Complex64::new(parse(&record[0])?, 0.0),
                2 => Complex64::new(parse(&record[0])?, parse(&record[1])?),
                n => return Err(Error::Parse(format!("row {row}: expected 1 or 2 columns, got {n}"))),
            };
            samples.push(z);
        }
        Self::new(samples)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `Δ · Σ f_i conj(g_i)`.
pub fn inner_product(f: &SampledFunction, g: &SampledFunction) -> Result<Complex64> {
    ensure_len("inner product operands", f.len(), g.len())?;
    let sum: Complex64 = f
        .samples
        .iter()
        .zip(&g.samples)
        .map(|(a, b)| a * b.conj())
        .sum();
    Ok(sum * f.spacing())
}

pub fn norm(f: &SampledFunction) -> f64 {
    let sum: f64 = f.samples.iter().map(|z| z.norm_sqr()).sum();
    (sum * f.spacing()).sqrt()
}

/// `⟨f, ψ⟩ ψ` for a unit-norm `ψ`.
pub fn project_onto_unit(f: &SampledFunction, psi: &SampledFunction) -> Result<SampledFunction> {
    ensure_len("projection operands", psi.len(), f.len())?;
    let n = norm(psi);
    if (n - 1.0).abs() > UNIT_NORM_TOL {
        return Err(Error::Precondition(format!(
            "projection direction must have unit norm, got {n}"
        )));
    }
    Ok(psi.scaled(inner_product(f, psi)?))
}

/// Orthogonal projection of `f` onto `span(vs)` with the default conditioning guard.
pub fn project_onto_span(f: &SampledFunction, vs: &[SampledFunction]) -> Result<SampledFunction> {
    project_onto_span_with(f, vs, DEFAULT_MAX_CONDITION)
}

/// Orthogonal projection solving the Gram system `G c = b`,
/// `G_ij = ⟨v_j, v_i⟩`, `b_i = ⟨f, v_i⟩`.
pub fn project_onto_span_with(
    f: &SampledFunction,
    vs: &[SampledFunction],
    max_condition: f64,
) -> Result<SampledFunction> {
    if vs.is_empty() {
        return Err(Error::Empty("projection span needs at least one vector"));
    }
    for v in vs {
        ensure_len("span vector length", f.len(), v.len())?;
    }
    let m = vs.len();
    let mut gram = DMatrix::<Complex64>::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            gram[(i, j)] = inner_product(&vs[j], &vs[i])?;
        }
    }
    let cond = condition_number(&gram);
    if !(cond <= max_condition) {
        return Err(Error::Degenerate {
            context: "span Gram matrix",
            condition: cond,
            hint: "the spanning set is (nearly) linearly dependent",
        });
    }
    let mut rhs = DVector::<Complex64>::zeros(m);
    for (i, v) in vs.iter().enumerate() {
        rhs[i] = inner_product(f, v)?;
    }
    let coeffs = gram.lu().solve(&rhs).ok_or(Error::Degenerate {
        context: "span Gram matrix",
        condition: f64::INFINITY,
        hint: "the spanning set is linearly dependent",
    })?;
    let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
    for (c, v) in coeffs.iter().zip(vs) {
        for (o, s) in out.iter_mut().zip(&v.samples) {
            *o += c * s;
        }
    }
    Ok(SampledFunction::from_samples_unchecked(out))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Fourier,
    Haar,
}

impl fmt::Display for BasisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisKind::Fourier => f.write_str("fourier"),
            BasisKind::Haar => f.write_str("haar"),
        }
    }
}

impl FromStr for BasisKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fourier" => Ok(BasisKind::Fourier),
            "haar" => Ok(BasisKind::Haar),
            other => Err(Error::InvalidParameter(format!("unsupported basis kind '{other}'"))),
        }
    }
}

/// An orthonormal family of `M` sampled functions on a grid of `N` points.
#[derive(Debug, Clone)]
pub struct Basis {
    kind: BasisKind,
    grid: usize,
    elements: Vec<SampledFunction>,
}

impl Basis {
    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn size(&self) -> usize {
        self.elements.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid
    }

    pub fn elements(&self) -> &[SampledFunction] {
        &self.elements
    }

    pub fn element(&self, n: usize) -> Option<&SampledFunction> {
        self.elements.get(n)
    }

    /// Largest deviation of the sampled Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.elements.iter().enumerate() {
            for (j, b) in self.elements.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                let g = inner_product(a, b).expect("basis elements share the grid");
                worst = worst.max((g - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// Frequency carried by the `n`-th Fourier element: `0, 1, −1, 2, −2, …`.
///
/// The first `N` entries are distinct modulo `N`, so `M = N` is complete and a
/// truncation keeps the lowest `|k|` modes.
pub fn fourier_frequency(n: usize) -> i64 {
    if n == 0 {
        0
    } else if n % 2 == 1 {
        n.div_ceil(2) as i64
    } else {
        -((n / 2) as i64)
    }
}

fn fourier_element(k: i64, grid: usize) -> SampledFunction {
    let n = grid as i64;
    let samples = (0..n)
        .map(|i| {
            // reduce k·i modulo N before forming the angle
            let r = (k * i).rem_euclid(n) as f64;
            Complex64::from_polar(1.0, 2.0 * PI * r / grid as f64)
        })
        .collect();
    SampledFunction::from_samples_unchecked(samples)
}

/// `n = 0` is the constant; `n = 2^j + k` is `2^{j/2} ψ(2^j x − k)`.
fn haar_element(n: usize, grid: usize) -> SampledFunction {
    if n == 0 {
        return SampledFunction::from_samples_unchecked(vec![Complex64::new(1.0, 0.0); grid]);
    }
    let j = usize::BITS - 1 - n.leading_zeros();
    let scale = 1usize << j;
    let k = n - scale;
    let width = grid / scale;
    let amp = (scale as f64).sqrt();
    let mut samples = vec![Complex64::new(0.0, 0.0); grid];
    let start = k * width;
    for (offset, s) in samples[start..start + width].iter_mut().enumerate() {
        *s = Complex64::new(if offset < width / 2 { amp } else { -amp }, 0.0);
    }
    SampledFunction::from_samples_unchecked(samples)
}

pub fn make_basis(kind: BasisKind, size: usize, grid: usize) -> Result<Basis> {
    if grid == 0 {
        return Err(Error::InvalidParameter("grid size must be at least 1".into()));
    }
    if size == 0 {
        return Err(Error::InvalidParameter("basis size must be at least 1".into()));
    }
    if size > grid {
        return Err(Error::InvalidParameter(format!(
            "basis size {size} exceeds grid size {grid}"
        )));
    }
    let elements = match kind {
        BasisKind::Fourier => (0..size)
            .map(|n| fourier_element(fourier_frequency(n), grid))
            .collect(),
        BasisKind::Haar => {
            if !grid.is_power_of_two() {
                return Err(Error::InvalidParameter(format!(
                    "Haar basis needs a power-of-two grid, got {grid}"
                )));
            }
            (0..size).map(|n| haar_element(n, grid)).collect()
        }
    };
    Ok(Basis {
        kind,
        grid,
        elements,
    })
}

/// Coordinates of a function in a [`Basis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientVector {
    pub coeffs: Vec<Complex64>,
    pub kind: BasisKind,
}

impl CoefficientVector {
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ |c_n|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }
}

/// `c_n = ⟨f, φ_n⟩`.
pub fn analyze(f: &SampledFunction, basis: &Basis) -> Result<CoefficientVector> {
    ensure_len("function length vs basis grid", basis.grid, f.len())?;
    let coeffs = basis
        .elements
        .iter()
        .map(|phi| inner_product(f, phi))
        .collect::<Result<Vec<_>>>()?;
    Ok(CoefficientVector {
        coeffs,
        kind: basis.kind,
    })
}

/// `Σ_n c_n φ_n`.
pub fn synthesize(c: &CoefficientVector, basis: &Basis) -> Result<SampledFunction> {
    ensure_len("coefficient count vs basis size", basis.size(), c.len())?;
    if c.kind != basis.kind {
        return Err(Error::Precondition(format!(
            "coefficients belong to a {} basis, not {}",
            c.kind, basis.kind
        )));
    }
    Ok(combine(&c.coeffs, &basis.elements, basis.grid))
}

fn combine(coeffs: &[Complex64], elements: &[SampledFunction], grid: usize) -> SampledFunction {
    let mut out = vec![Complex64::new(0.0, 0.0); grid];
    for (c, phi) in coeffs.iter().zip(elements) {
        for (o, s) in out.iter_mut().zip(&phi.samples) {
            *o += c * s;
        }
    }
    SampledFunction::from_samples_unchecked(out)
}

/// Largest `|⟨φ_n, ψ_m⟩ − δ_nm|` over the cross-Gram matrix.
pub fn biorthogonality_defect(
    analysis: &[SampledFunction],
    synthesis: &[SampledFunction],
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for (n, phi) in analysis.iter().enumerate() {
        for (m, psi) in synthesis.iter().enumerate() {
            let delta = if n == m { 1.0 } else { 0.0 };
            worst = worst.max((inner_product(phi, psi)? - Complex64::new(delta, 0.0)).norm());
        }
    }
    Ok(worst)
}

/// `Σ_n ⟨f, φ_n⟩ ψ_n` for a biorthogonal analysis/synthesis pair.
pub fn biorthogonal_reconstruct(
    f: &SampledFunction,
    analysis: &[SampledFunction],
    synthesis: &[SampledFunction],
) -> Result<SampledFunction> {
    ensure_len("analysis vs synthesis count", analysis.len(), synthesis.len())?;
    if analysis.is_empty() {
        return Err(Error::Empty("biorthogonal frames need at least one element"));
    }
    for g in analysis.iter().chain(synthesis) {
        ensure_len("frame element length", f.len(), g.len())?;
    }
    let defect = biorthogonality_defect(analysis, synthesis)?;
    if defect > BIORTHOGONALITY_TOL {
        return Err(Error::Precondition(format!(
            "frames are not biorthogonal: max |<phi_n, psi_m> - delta_nm| = {defect:e}"
        )));
    }
    let coeffs = analysis
        .iter()
        .map(|phi| inner_product(f, phi))
        .collect::<Result<Vec<_>>>()?;
    Ok(combine(&coeffs, synthesis, f.len()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_fn(rng: &mut ChaCha8Rng, n: usize) -> SampledFunction {
        SampledFunction::new(
            (0..n)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect(),
        )
        .unwrap()
    }

    /// Error-free transformation `a + b = s + e`.
    fn two_sum(a: f64, b: f64) -> (f64, f64) {
        let s = a + b;
        let bb = s - a;
        (s, (a - (s - bb)) + (b - bb))
    }

    /// Error-free product `a·b = p + e` via Dekker splitting.
    fn two_prod(a: f64, b: f64) -> (f64, f64) {
        let p = a * b;
        (p, a.mul_add(b, -p))
    }

    /// Double-double accumulation of `Σ f_i conj(g_i)` divided by N.
    fn inner_product_oracle(f: &[Complex64], g: &[Complex64]) -> Complex64 {
        let mut re = (0.0, 0.0);
        let mut im = (0.0, 0.0);
        let add = |acc: (f64, f64), x: (f64, f64)| {
            let (s, e) = two_sum(acc.0, x.0);
            let e = e + acc.1 + x.1;
            two_sum(s, e)
        };
        for (a, b) in f.iter().zip(g) {
            // (a.re + i a.im)(b.re − i b.im)
            re = add(re, two_prod(a.re, b.re));
            re = add(re, two_prod(a.im, b.im));
            im = add(im, two_prod(a.im, b.re));
            let (p, e) = two_prod(a.re, b.im);
            im = add(im, (-p, -e));
        }
        let n = f.len() as f64;
        Complex64::new((re.0 + re.1) / n, (im.0 + im.1) / n)
    }

    #[test]
    fn inner_product_of_unit_constants() {
        let one = SampledFunction::from_real(&[1.0; 64]).unwrap();
        let ip = inner_product(&one, &one).unwrap();
        assert_eq!(ip, c(1.0));
    }

    #[test]
    fn sine_and_cosine_are_orthogonal() {
        let s = SampledFunction::from_real_fn(256, |x| (2.0 * PI * x).sin()).unwrap();
        let co = SampledFunction::from_real_fn(256, |x| (2.0 * PI * x).cos()).unwrap();
        assert!(inner_product(&s, &co).unwrap().norm() < 1e-10);
    }

    #[test]
    fn inner_product_matches_extended_precision_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let f = random_fn(&mut rng, 128);
            let g = random_fn(&mut rng, 128);
            let got = inner_product(&f, &g).unwrap();
            let want = inner_product_oracle(f.samples(), g.samples());
            assert!((got - want).norm() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn inner_product_rejects_length_mismatch() {
        let a = SampledFunction::zeros(4).unwrap();
        let b = SampledFunction::zeros(5).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::Conformability { .. })));
    }

    #[test]
    fn norm_examples() {
        assert_eq!(norm(&SampledFunction::zeros(32).unwrap()), 0.0);
        assert_eq!(norm(&SampledFunction::from_real(&[1.0; 64]).unwrap()), 1.0);
        let s = SampledFunction::from_real_fn(256, |x| (2.0 * PI * x).sin()).unwrap();
        assert!((norm(&s) - 0.5f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn constructor_rejects_non_finite_and_empty() {
        assert!(SampledFunction::from_real(&[1.0, f64::NAN]).is_err());
        assert!(SampledFunction::from_real(&[f64::INFINITY]).is_err());
        assert!(SampledFunction::from_real(&[]).is_err());
    }

    #[test]
    fn unit_projection_examples() {
        let basis = make_basis(BasisKind::Fourier, 4, 32).unwrap();
        let psi = basis.element(1).unwrap();
        let w = basis.element(2).unwrap();

        let p = project_onto_unit(psi, psi).unwrap();
        assert!(p.max_abs_diff(psi).unwrap() < 1e-12);

        let p = project_onto_unit(w, psi).unwrap();
        assert!(norm(&p) < 1e-12);

        let f = psi.linear_combination(c(2.0), w, c(1.0)).unwrap();
        let p = project_onto_unit(&f, psi).unwrap();
        assert!(p.max_abs_diff(&psi.scaled(c(2.0))).unwrap() < 1e-10);
        let residual = f.checked_sub(&p).unwrap();
        assert!(inner_product(&residual, psi).unwrap().norm() < 1e-10);
    }

    #[test]
    fn unit_projection_reports_bad_norm() {
        let psi = SampledFunction::from_real(&[2.0; 8]).unwrap();
        let f = SampledFunction::from_real(&[1.0; 8]).unwrap();
        match project_onto_unit(&f, &psi) {
            Err(Error::Precondition(msg)) => assert!(msg.contains('2'), "{msg}"),
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn span_projection_examples() {
        let basis = make_basis(BasisKind::Haar, 8, 8).unwrap();
        let e = basis.elements();
        let target = e[0].linear_combination(c(3.0), &e[1], c(-1.0)).unwrap();
        let f = target.checked_add(&e[5].scaled(c(0.7))).unwrap();
        let p = project_onto_span(&f, &e[..2]).unwrap();
        assert!(p.max_abs_diff(&target).unwrap() < 1e-10);

        // already in the span (non-orthogonal spanning set)
        let vs = vec![
            e[0].checked_add(&e[1]).unwrap(),
            e[1].linear_combination(c(1.0), &e[2], c(0.5)).unwrap(),
        ];
        let f = vs[0].linear_combination(c(0.3), &vs[1], c(-2.0)).unwrap();
        let p = project_onto_span(&f, &vs).unwrap();
        assert!(p.max_abs_diff(&f).unwrap() < 1e-10);

        let f = e[3].linear_combination(c(1.5), &e[4], c(0.25)).unwrap();
        let one = project_onto_span(&f, &e[3..4]).unwrap();
        let unit = project_onto_unit(&f, &e[3]).unwrap();
        assert!(one.max_abs_diff(&unit).unwrap() < 1e-12);
    }

    #[test]
    fn span_projection_refuses_dependent_sets() {
        let basis = make_basis(BasisKind::Fourier, 2, 16).unwrap();
        let e = basis.elements();
        let vs = vec![e[0].clone(), e[1].clone(), e[0].checked_add(&e[1]).unwrap()];
        let f = SampledFunction::from_real(&[1.0; 16]).unwrap();
        match project_onto_span(&f, &vs) {
            Err(Error::Degenerate { condition, .. }) => assert!(condition > 1e12),
            other => panic!("expected degeneracy, got {other:?}"),
        }
        assert!(matches!(project_onto_span(&f, &[]), Err(Error::Empty(_))));
    }

    #[test]
    fn best_approximation_beats_random_span_members() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f = random_fn(&mut rng, 32);
        let vs: Vec<_> = (0..3).map(|_| random_fn(&mut rng, 32)).collect();
        let p = project_onto_span(&f, &vs).unwrap();
        let best = norm(&f.checked_sub(&p).unwrap());
        for _ in 0..50 {
            let mut v = SampledFunction::zeros(32).unwrap();
            for basis_fn in &vs {
                let coef = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                v = v.linear_combination(c(1.0), basis_fn, coef).unwrap();
            }
            assert!(best <= norm(&f.checked_sub(&v).unwrap()));
        }
    }

    #[test]
    fn make_basis_examples() {
        let fourier = make_basis(BasisKind::Fourier, 8, 64).unwrap();
        assert_eq!(fourier.size(), 8);
        assert!(fourier.orthonormality_defect() < 1e-10);
        let haar = make_basis(BasisKind::Haar, 16, 16).unwrap();
        assert!(haar.orthonormality_defect() < 1e-10);
        assert!(make_basis(BasisKind::Haar, 16, 24).is_err());
        assert!(make_basis(BasisKind::Fourier, 9, 8).is_err());
        assert!("wavelet".parse::<BasisKind>().is_err());
        assert_eq!("Haar".parse::<BasisKind>().unwrap(), BasisKind::Haar);
    }

    #[test]
    fn complete_bases_are_orthonormal_for_odd_and_even_grids() {
        for n in [1, 2, 5, 16, 33] {
            let b = make_basis(BasisKind::Fourier, n, n).unwrap();
            assert!(b.orthonormality_defect() < 1e-10, "fourier n={n}");
        }
        for n in [1, 2, 8, 32] {
            let b = make_basis(BasisKind::Haar, n, n).unwrap();
            assert!(b.orthonormality_defect() < 1e-10, "haar n={n}");
        }
    }

    #[test]
    fn analyze_examples() {
        let basis = make_basis(BasisKind::Fourier, 8, 32).unwrap();
        let coeffs = analyze(basis.element(3).unwrap(), &basis).unwrap();
        for (n, z) in coeffs.coeffs.iter().enumerate() {
            let want = if n == 3 { 1.0 } else { 0.0 };
            assert!((z - c(want)).norm() < 1e-12);
        }
        let zero = analyze(&SampledFunction::zeros(32).unwrap(), &basis).unwrap();
        assert!(zero.coeffs.iter().all(|z| z.norm() == 0.0));
        assert!(analyze(&SampledFunction::zeros(16).unwrap(), &basis).is_err());
    }

    #[test]
    fn parseval_on_full_fourier_basis() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = make_basis(BasisKind::Fourier, 64, 64).unwrap();
        for _ in 0..10 {
            let f = random_fn(&mut rng, 64);
            let energy = analyze(&f, &basis).unwrap().energy();
            // independent quadrature of ‖f‖²
            let direct: f64 = f.samples().iter().map(|z| z.re * z.re + z.im * z.im).sum::<f64>() / 64.0;
            assert!((energy - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn synthesize_examples() {
        let basis = make_basis(BasisKind::Haar, 16, 16).unwrap();
        let mut e5 = vec![c(0.0); 16];
        e5[5] = c(1.0);
        let coeffs = CoefficientVector {
            coeffs: e5,
            kind: BasisKind::Haar,
        };
        assert_eq!(&synthesize(&coeffs, &basis).unwrap(), basis.element(5).unwrap());

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let haar = make_basis(BasisKind::Haar, 64, 64).unwrap();
        let f = random_fn(&mut rng, 64);
        let back = synthesize(&analyze(&f, &haar).unwrap(), &haar).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() <= 1e-9);

        // band-limited input with |k| ≤ 3 reconstructed by the lowest N/2 modes
        let f = SampledFunction::from_real_fn(64, |x| {
            1.0 + (2.0 * PI * x).cos() - 0.5 * (2.0 * PI * 3.0 * x).sin()
        })
        .unwrap();
        let half = make_basis(BasisKind::Fourier, 32, 64).unwrap();
        let back = synthesize(&analyze(&f, &half).unwrap(), &half).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() <= 1e-9);

        let short = CoefficientVector {
            coeffs: vec![c(1.0)],
            kind: BasisKind::Fourier,
        };
        assert!(synthesize(&short, &half).is_err());
    }

    #[test]
    fn biorthogonal_self_dual_matches_orthonormal_expansion() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let basis = make_basis(BasisKind::Fourier, 16, 16).unwrap();
        let f = random_fn(&mut rng, 16);
        let a = biorthogonal_reconstruct(&f, basis.elements(), basis.elements()).unwrap();
        let b = synthesize(&analyze(&f, &basis).unwrap(), &basis).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn biorthogonal_oblique_pair_reconstructs_span() {
        let basis = make_basis(BasisKind::Haar, 8, 8).unwrap();
        let e = basis.elements();
        let synthesis = vec![
            e[0].checked_add(&e[1].scaled(c(0.5))).unwrap(),
            e[1].linear_combination(c(1.0), &e[2], c(2.0)).unwrap(),
        ];
        // dual frame φ_n = Σ_m (G⁻¹)_{mn} ψ_m with G_{mn} = ⟨ψ_n, ψ_m⟩
        let mut gram = DMatrix::<Complex64>::zeros(2, 2);
        for m in 0..2 {
            for n in 0..2 {
                gram[(m, n)] = inner_product(&synthesis[n], &synthesis[m]).unwrap();
            }
        }
        let inv = gram.try_inverse().unwrap();
        let analysis: Vec<_> = (0..2)
            .map(|n| {
                synthesis[0]
                    .linear_combination(inv[(0, n)].conj(), &synthesis[1], inv[(1, n)].conj())
                    .unwrap()
            })
            .collect();
        assert!(biorthogonality_defect(&analysis, &synthesis).unwrap() < 1e-12);
        let f = synthesis[0].linear_combination(c(-1.25), &synthesis[1], c(0.4)).unwrap();
        let back = biorthogonal_reconstruct(&f, &analysis, &synthesis).unwrap();
        assert!(back.max_abs_diff(&f).unwrap() < 1e-8);

        // orthogonal to the analysis functions ⇒ zero
        let g = project_onto_span(&e[5], &analysis).unwrap();
        let orth = e[5].checked_sub(&g).unwrap();
        let z = biorthogonal_reconstruct(&orth, &analysis, &synthesis).unwrap();
        assert!(norm(&z) < 1e-12);
    }

    #[test]
    fn biorthogonal_rejects_non_dual_frames() {
        let basis = make_basis(BasisKind::Haar, 4, 4).unwrap();
        let e = basis.elements();
        let analysis = vec![e[0].clone(), e[1].clone()];
        let synthesis = vec![e[0].clone(), e[0].checked_add(&e[1]).unwrap()];
        match biorthogonal_reconstruct(&e[2], &analysis, &synthesis) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("biorthogonal")),
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn csv_and_json_shapes() {
        let real = SampledFunction::from_real(&[0.5, -1.0]).unwrap();
        assert_eq!(real.to_json().unwrap(), "[0.5,-1.0]");
        let mut buf = Vec::new();
        real.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "0.5\n-1.0\n");

        let cplx = SampledFunction::new(vec![Complex64::new(1.0, 2.0)]).unwrap();
        assert_eq!(cplx.to_json().unwrap(), "[[1.0,2.0]]");
        assert!(SampledFunction::from_json("[]").is_err());
    }

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![
            -1e6..1e6f64,
            any::<f64>().prop_filter("finite", |x| x.is_finite()),
        ]
    }

    proptest! {
        #[test]
        fn serialization_round_trips_bit_exactly(
            re in prop::collection::vec(finite(), 1..40),
            imag in any::<bool>(),
            seed in any::<u64>(),
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples: Vec<Complex64> = re
                .iter()
                .map(|&r| Complex64::new(r, if imag { rng.random::<f64>() * 1e-300 } else { 0.0 }))
                .collect();
            let f = SampledFunction::new(samples).unwrap();
            let back = SampledFunction::from_json(&f.to_json().unwrap()).unwrap();
            let same = back.samples().iter().zip(f.samples()).all(|(a, b)| {
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            });
            prop_assert!(same);
            let mut buf = Vec::new();
            f.write_csv(&mut buf).unwrap();
            let back = SampledFunction::read_csv(buf.as_slice()).unwrap();
            let same = back.samples().iter().zip(f.samples()).all(|(a, b)| {
                a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()
            });
            prop_assert!(same);
        }

        #[test]
        fn inner_product_axioms(seed in any::<u64>(), n in 1usize..64) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_fn(&mut rng, n);
            let g = random_fn(&mut rng, n);
            let h = random_fn(&mut rng, n);
            let a = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
            let fg = inner_product(&f, &g).unwrap();
            let gf = inner_product(&g, &f).unwrap();
            prop_assert!((fg - gf.conj()).norm() <= 1e-12);
            let lhs = inner_product(&f.linear_combination(a, &h, c(1.0)).unwrap(), &g).unwrap();
            let rhs = a * fg + inner_product(&h, &g).unwrap();
            prop_assert!((lhs - rhs).norm() <= 1e-12);
            let ff = inner_product(&f, &f).unwrap();
            prop_assert!(ff.re > 0.0 && ff.im.abs() <= 1e-12);
        }

        #[test]
        fn projection_residual_is_orthogonal_and_contractive(seed in any::<u64>(), k in 1usize..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let f = random_fn(&mut rng, 32);
            let vs: Vec<_> = (0..k).map(|_| random_fn(&mut rng, 32)).collect();
            let p = project_onto_span(&f, &vs).unwrap();
            let r = f.checked_sub(&p).unwrap();
            for v in &vs {
                prop_assert!(inner_product(&r, v).unwrap().norm() <= 1e-8);
            }
            prop_assert!(norm(&p) <= norm(&f) + 1e-10);
        }
    }
}
