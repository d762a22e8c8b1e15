//! Fourier-domain models.
//!
//! The DFT here is unitary (`1/√N` in both directions), so `‖spectrum‖₂` equals
//! the Euclidean norm of the samples. Bin `k < N/2` carries the mode `e^{i2πkx}`
//! and the upper half stores negative frequencies.
//!
//! Circular convolution is the plain discrete sum
//! `(f ⊛ h)_n = Σ_m f_m h_{(n−m) mod N}`, whose spectral counterpart is the
//! multiplier `√N · F(h)` (see [`convolution_multiplier`]).

use std::io::{Read, Write};

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::function_space::SampledFunction;
use crate::linalg::fmt_f64;

/// Lower bound enforced on trainable thresholds after every gradient step.
pub const THRESHOLD_FLOOR: f64 = 1e-8;

/// DFT coefficients of a sampled function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn new(coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::Empty("spectrum needs at least one bin"));
        }
        if coeffs.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("spectrum has non-finite bins".into()));
        }
        Ok(Self { coeffs })
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `Σ_k |s_k|²`.
    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Signed frequency of bin `k` for a length-`n` spectrum.
    pub fn frequency(k: usize, n: usize) -> i64 {
        if k < n.div_ceil(2) {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    /// Rows of `k,re,im` with a header line.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["k", "re", "im"])?;
        for (k, z) in self.coeffs.iter().enumerate() {
            w.write_record([k.to_string(), fmt_f64(z.re), fmt_f64(z.im)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut coeffs = Vec::new();
        for (row, rec) in r.records().enumerate() {
            let rec = rec?;
            if rec.len() != 3 {
                return Err(Error::Parse(format!("row {row}: expected k,re,im")));
            }
            let k: usize = rec[0].parse().map_err(|e| Error::Parse(format!("row {row}: {e}")))?;
            if k != row {
                return Err(Error::Parse(format!("row {row}: bins must be listed in order, got k={k}")));
            }
            let p = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("row {row}: {e}")));
            coeffs.push(Complex64::new(p(&rec[1])?, p(&rec[2])?));
        }
        Self::new(coeffs)
    }
}

/// Per-bin complex multipliers `γ_k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiplierBank {
    pub gamma: Vec<Complex64>,
}

impl MultiplierBank {
    pub fn new(gamma: Vec<Complex64>) -> Result<Self> {
        if gamma.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("multiplier has non-finite entries".into()));
        }
        Ok(Self { gamma })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            gamma: vec![Complex64::new(1.0, 0.0); n],
        }
    }

    pub fn from_real(values: &[f64]) -> Result<Self> {
        Self::new(values.iter().map(|&g| Complex64::new(g, 0.0)).collect())
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }
}

/// Per-bin thresholds `θ_k ≥ 0`; `θ_k = 0` marks an untrainable pass-through bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub theta: Vec<f64>,
}

impl ThresholdParams {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if let Some((k, t)) = theta.iter().enumerate().find(|(_, t)| !(**t >= 0.0 && t.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "threshold θ_{k} must be finite and ≥ 0, got {t}"
            )));
        }
        Ok(Self { theta })
    }

    pub fn constant(n: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; n])
    }

    pub fn len(&self) -> usize {
        self.theta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ThresholdParams = serde_json::from_str(s)?;
        Self::new(raw.theta)
    }
}

fn run_fft(mut buf: Vec<Complex64>, forward: bool) -> Vec<Complex64> {
    let n = buf.len();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if forward {
        planner.plan_fft_forward(n)
    } else {
        planner.plan_fft_inverse(n)
    };
    fft.process(&mut buf);
    let scale = 1.0 / (n as f64).sqrt();
    for z in &mut buf {
        *z *= scale;
    }
    buf
}

/// Unitary DFT: `F_k = N^{-1/2} Σ_j f_j e^{−i2πjk/N}`.
pub fn forward_transform(f: &SampledFunction) -> Spectrum {
    Spectrum {
        coeffs: run_fft(f.samples().to_vec(), true),
    }
}

pub fn inverse_transform(s: &Spectrum) -> SampledFunction {
    SampledFunction::from_samples_unchecked(run_fft(s.coeffs.clone(), false))
}

/// `out_k = γ_k s_k`.
pub fn apply_multiplier(s: &Spectrum, g: &MultiplierBank) -> Result<Spectrum> {
    ensure_len("multiplier length", s.len(), g.len())?;
    Ok(Spectrum {
        coeffs: s.coeffs.iter().zip(&g.gamma).map(|(a, b)| a * b).collect(),
    })
}

/// Direct `O(N²)` circular convolution.
pub fn circular_convolve(f: &SampledFunction, h: &SampledFunction) -> Result<SampledFunction> {
    ensure_len("convolution operands", f.len(), h.len())?;
    let n = f.len();
    let fs = f.samples();
    let hs = h.samples();
    let out = (0..n)
        .map(|i| {
            (0..n)
                .map(|m| fs[m] * hs[(i + n - m) % n])
                .sum::<Complex64>()
        })
        .collect();
    Ok(SampledFunction::from_samples_unchecked(out))
}

/// Multiplier `√N · F(h)` under which `F(f ⊛ h) = γ ⊙ F(f)`.
pub fn convolution_multiplier(h: &SampledFunction) -> MultiplierBank {
    let scale = (h.len() as f64).sqrt();
    MultiplierBank {
        gamma: forward_transform(h).coeffs.into_iter().map(|z| z * scale).collect(),
    }
}

/// Circular convolution evaluated in the frequency domain.
pub fn spectral_convolve(f: &SampledFunction, h: &SampledFunction) -> Result<SampledFunction> {
    ensure_len("convolution operands", f.len(), h.len())?;
    let out = apply_multiplier(&forward_transform(f), &convolution_multiplier(h))?;
    Ok(inverse_transform(&out))
}

/// Attenuation factor `z / (z + θ)` with the sentinel and zero-magnitude cases.
fn attenuation(z: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        1.0
    } else if z == 0.0 {
        0.0
    } else {
        z / (z + theta)
    }
}

fn check_thresholds(t: &ThresholdParams) -> Result<()> {
    if let Some((k, v)) = t.theta.iter().enumerate().find(|(_, v)| !(**v >= 0.0) || !v.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "threshold θ_{k} must be finite and ≥ 0, got {v}"
        )));
    }
    Ok(())
}

/// `out_k = (|s_k| / (|s_k| + θ_k)) · s_k`.
pub fn soft_threshold_spectrum(s: &Spectrum, t: &ThresholdParams) -> Result<Spectrum> {
    ensure_len("threshold length", s.len(), t.len())?;
    check_thresholds(t)?;
    Ok(Spectrum {
        coeffs: s
            .coeffs
            .iter()
            .zip(&t.theta)
            .map(|(z, &th)| z * attenuation(z.norm(), th))
            .collect(),
    })
}

/// `Σ_k |soft_threshold(input)_k − target_k|²`.
pub fn threshold_loss(input: &Spectrum, target: &Spectrum, t: &ThresholdParams) -> Result<f64> {
    ensure_len("target length", input.len(), target.len())?;
    let out = soft_threshold_spectrum(input, t)?;
    Ok(out
        .coeffs
        .iter()
        .zip(&target.coeffs)
        .map(|(o, y)| (o - y).norm_sqr())
        .sum())
}

/// Analytic `∂L/∂θ_k` of [`threshold_loss`], using `∂σ/∂θ = −z/(z+θ)²`.
pub fn threshold_gradient(input: &Spectrum, target: &Spectrum, t: &ThresholdParams) -> Result<Vec<f64>> {
    ensure_len("target length", input.len(), target.len())?;
    ensure_len("threshold length", input.len(), t.len())?;
    check_thresholds(t)?;
    if let Some(k) = t.theta.iter().position(|&v| v == 0.0) {
        return Err(Error::InvalidParameter(format!(
            "θ_{k} is the pass-through sentinel and has no gradient"
        )));
    }
    Ok(input
        .coeffs
        .iter()
        .zip(&target.coeffs)
        .zip(&t.theta)
        .map(|((s, y), &th)| {
            let z = s.norm();
            if z == 0.0 {
                return 0.0;
            }
            let residual = s * (z / (z + th)) - y;
            let dsigma = -z / ((z + th) * (z + th));
            2.0 * (residual.conj() * s).re * dsigma
        })
        .collect())
}

/// Outcome of [`fit_threshold`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    /// Parameters with the lowest loss seen, never worse than the start.
    pub params: ThresholdParams,
    /// Mean loss over pairs before each step, then after the last one.
    pub loss_trace: Vec<f64>,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub steps: usize,
}

/// Pairwise (tree) summation; the result depends only on input order.
pub(crate) fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => pairwise_sum(&values[..n / 2]) + pairwise_sum(&values[n / 2..]),
    }
}

fn mean_loss(pairs: &[(Spectrum, Spectrum)], t: &ThresholdParams) -> Result<f64> {
    let losses = pairs
        .iter()
        .map(|(x, y)| threshold_loss(x, y, t))
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&losses) / pairs.len() as f64)
}

/// Projected gradient descent on the mean loss over `pairs`.
///
/// After each step `θ` is clamped to [`THRESHOLD_FLOOR`]. The returned
/// parameters are the best iterate seen, so their loss never exceeds the loss at
/// `theta0`.
pub fn fit_threshold(
    pairs: &[(Spectrum, Spectrum)],
    theta0: &ThresholdParams,
    lr: f64,
    steps: usize,
) -> Result<ThresholdFit> {
    if pairs.is_empty() {
        return Err(Error::Empty("threshold training set is empty"));
    }
    if !(lr >= 0.0 && lr.is_finite()) {
        return Err(Error::InvalidParameter(format!("learning rate must be ≥ 0, got {lr}")));
    }
    if theta0.theta.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::InvalidParameter("initial thresholds must be > 0".into()));
    }
    for (x, y) in pairs {
        ensure_len("training input length", theta0.len(), x.len())?;
        ensure_len("training target length", theta0.len(), y.len())?;
    }
    let n = theta0.len();
    let mut theta = theta0.clone();
    let initial_loss = mean_loss(pairs, &theta)?;
    let mut best = (initial_loss, theta.clone());
    let mut trace = Vec::with_capacity(steps + 1);
    trace.push(initial_loss);
    if lr > 0.0 {
        for _ in 0..steps {
            let mut per_bin: Vec<Vec<f64>> = vec![Vec::with_capacity(pairs.len()); n];
            for (x, y) in pairs {
                for (k, g) in threshold_gradient(x, y, &theta)?.into_iter().enumerate() {
                    per_bin[k].push(g);
                }
            }
            let scale = 1.0 / pairs.len() as f64;
            for (th, grads) in theta.theta.iter_mut().zip(&per_bin) {
                *th = (*th - lr * scale * pairwise_sum(grads)).max(THRESHOLD_FLOOR);
            }
            let loss = mean_loss(pairs, &theta)?;
            if !loss.is_finite() {
                return Err(Error::Numerical("threshold training diverged".into()));
            }
            trace.push(loss);
            if loss < best.0 {
                best = (loss, theta.clone());
            }
        }
    }
    Ok(ThresholdFit {
        params: best.1,
        final_loss: best.0,
        initial_loss,
        loss_trace: trace,
        steps: if lr > 0.0 { steps } else { 0 },
    })
}
