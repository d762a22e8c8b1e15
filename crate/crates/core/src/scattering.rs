//! 1-D wavelet scattering up to order 2.
//!
//! Filters are built directly in the frequency domain. With `ν = 2k/N` the
//! frequency normalized so Nyquist sits at 1, band-pass filter `j` is an analytic
//! Gaussian bump centred at `0.75·2^{−j}` on the dyadic band `[2^{−j−1}, 2^{−j}]`,
//! and the low-pass is a Gaussian centred at DC of width `∝ 2^{−J}`. The whole
//! bank is rescaled so the Littlewood–Paley sum `|φ̂|² + Σ_j |ψ̂_j|²` never
//! exceeds 1, which together with the 1-Lipschitz modulus makes the cascade
//! non-expansive.
//!
//! Coefficients are measured with the same quadrature weight `1/N` as
//! [`crate::function_space::norm`], so `‖S[f] − S[g]‖ ≤ ‖f − g‖` compares like
//! with like.

use std::collections::BTreeMap;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::function_space::SampledFunction;
use crate::linalg::fmt_f64;
use crate::spectral::{apply_multiplier, forward_transform, inverse_transform, MultiplierBank, Spectrum};

/// Centre of band-pass filter `j` is `CENTER · 2^{−j}`.
const CENTER: f64 = 0.75;
/// Width of band-pass filter `j` is `BANDWIDTH · 2^{−j}`.
const BANDWIDTH: f64 = 0.18;
/// Width of the low-pass is `LOWPASS_WIDTH · 2^{−J}`.
const LOWPASS_WIDTH: f64 = 0.4;

/// Dyadic band-pass filters plus one low-pass, all as frequency multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterBank {
    j_max: usize,
    n: usize,
    psi_hat: Vec<MultiplierBank>,
    phi_hat: MultiplierBank,
}

/// Normalized signed frequency in `(−1, 1]`; Nyquist counts as positive.
fn normalized_frequency(k: usize, n: usize) -> f64 {
    let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
    2.0 * signed / n as f64
}

pub fn build_filter_bank(j_max: usize, n: usize) -> Result<FilterBank> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "scattering needs a power-of-two length ≥ 2, got {n}"
        )));
    }
    if j_max == 0 {
        return Err(Error::InvalidParameter("scattering needs J ≥ 1".into()));
    }
    if j_max >= usize::BITS as usize || (1usize << j_max) > n {
        return Err(Error::InvalidParameter(format!("2^J = 2^{j_max} exceeds length {n}")));
    }
    let mut psi: Vec<Vec<f64>> = (0..j_max)
        .map(|j| {
            let scale = 0.5f64.powi(j as i32);
            let (centre, width) = (CENTER * scale, BANDWIDTH * scale);
            (0..n)
                .map(|k| {
                    let nu = normalized_frequency(k, n);
                    if nu <= 0.0 {
                        0.0
                    } else {
                        (-(nu - centre).powi(2) / (2.0 * width * width)).exp()
                    }
                })
                .collect()
        })
        .collect();
    let low_width = LOWPASS_WIDTH * 0.5f64.powi(j_max as i32);
    let mut phi: Vec<f64> = (0..n)
        .map(|k| {
            let nu = normalized_frequency(k, n);
            (-(nu * nu) / (2.0 * low_width * low_width)).exp()
        })
        .collect();

    let peak = (0..n)
        .map(|k| phi[k] * phi[k] + psi.iter().map(|p| p[k] * p[k]).sum::<f64>())
        .fold(0.0, f64::max);
    if peak > 1.0 {
        let s = 1.0 / peak.sqrt();
        phi.iter_mut().for_each(|v| *v *= s);
        psi.iter_mut().flatten().for_each(|v| *v *= s);
    }
    Ok(FilterBank {
        j_max,
        n,
        psi_hat: psi
            .iter()
            .map(|p| MultiplierBank::from_real(p).expect("finite filter"))
            .collect(),
        phi_hat: MultiplierBank::from_real(&phi).expect("finite filter"),
    })
}

impl FilterBank {
    pub fn scales(&self) -> usize {
        self.j_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn band_pass(&self) -> &[MultiplierBank] {
        &self.psi_hat
    }

    pub fn low_pass(&self) -> &MultiplierBank {
        &self.phi_hat
    }

    /// Subsampling stride `2^J` applied after the final low-pass.
    pub fn stride(&self) -> usize {
        1 << self.j_max
    }

    /// `|φ̂_k|² + Σ_j |ψ̂_{j,k}|²` for every bin.
    pub fn littlewood_paley(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                self.phi_hat.gamma[k].norm_sqr()
                    + self.psi_hat.iter().map(|p| p.gamma[k].norm_sqr()).sum::<f64>()
            })
            .collect()
    }

    /// Fraction of `|ψ̂_j|²` inside the dyadic band `[2^{−j−1}, 2^{−j}]`.
    pub fn band_concentration(&self, j: usize) -> f64 {
        let (lo, hi) = (0.5f64.powi(j as i32 + 1), 0.5f64.powi(j as i32));
        let mut inside = 0.0;
        let mut total = 0.0;
        for (k, g) in self.psi_hat[j].gamma.iter().enumerate() {
            let e = g.norm_sqr();
            total += e;
            let nu = normalized_frequency(k, self.n).abs();
            if nu >= lo && nu <= hi {
                inside += e;
            }
        }
        inside / total
    }
}

/// Scattering path outputs after low-pass averaging and subsampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoefficients {
    /// Length of the analysed signal; sets the quadrature weight `1/N`.
    pub grid: usize,
    pub order0: Vec<f64>,
    pub order1: BTreeMap<usize, Vec<f64>>,
    pub order2: BTreeMap<(usize, usize), Vec<f64>>,
}

impl ScatteringCoefficients {
    /// All paths in canonical order: `0`, then `1:j1` ascending, then `2:j1,j2`.
    pub fn paths(&self) -> Vec<(String, &[f64])> {
        let mut out: Vec<(String, &[f64])> = vec![("0".to_string(), &self.order0)];
        out.extend(self.order1.iter().map(|(j, v)| (format!("1:{j}"), v.as_slice())));
        out.extend(
            self.order2
                .iter()
                .map(|((a, b), v)| (format!("2:{a},{b}"), v.as_slice())),
        );
        out
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.paths().into_iter().flat_map(|(_, v)| v.iter().copied()).collect()
    }

    /// `(1/N) Σ` of squared coefficients over every path.
    pub fn energy(&self) -> f64 {
        self.flatten().iter().map(|v| v * v).sum::<f64>() / self.grid as f64
    }

    pub fn path_energy(&self, values: &[f64]) -> f64 {
        values.iter().map(|v| v * v).sum::<f64>() / self.grid as f64
    }

    /// Quadrature-weighted Euclidean distance; both sides must share the path set.
    pub fn distance(&self, other: &Self) -> Result<f64> {
        ensure_len("scattering grid", self.grid, other.grid)?;
        let a = self.flatten();
        let b = other.flatten();
        ensure_len("scattering coefficient count", a.len(), b.len())?;
        let ss: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
        Ok((ss / self.grid as f64).sqrt())
    }

    /// `{"grid": N, "paths": {"0": [...], "1:j1": [...], "2:j1,j2": [...]}}`.
    pub fn to_json(&self) -> Result<String> {
        let paths: BTreeMap<String, &[f64]> = self.paths().into_iter().collect();
        Ok(serde_json::to_string_pretty(&serde_json::json!({
            "grid": self.grid,
            "paths": paths,
        }))?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Raw {
            grid: usize,
            paths: BTreeMap<String, Vec<f64>>,
        }
        let raw: Raw = serde_json::from_str(s)?;
        let mut out = ScatteringCoefficients {
            grid: raw.grid,
            order0: Vec::new(),
            order1: BTreeMap::new(),
            order2: BTreeMap::new(),
        };
        let bad = |p: &str| Error::Parse(format!("malformed scattering path '{p}'"));
        for (path, values) in raw.paths {
            match path.split_once(':') {
                None if path == "0" => out.order0 = values,
                Some(("1", j)) => {
                    out.order1.insert(j.parse().map_err(|_| bad(&path))?, values);
                }
                Some(("2", pair)) => {
                    let (a, b) = pair.split_once(',').ok_or_else(|| bad(&path))?;
                    let key = (a.parse().map_err(|_| bad(&path))?, b.parse().map_err(|_| bad(&path))?);
                    out.order2.insert(key, values);
                }
                _ => return Err(bad(&path)),
            }
        }
        Ok(out)
    }

    /// Flat export with header `path,index,value`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["path", "index", "value"])?;
        for (path, values) in self.paths() {
            for (i, v) in values.iter().enumerate() {
                w.write_record([path.clone(), i.to_string(), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn filter(signal: &Spectrum, h: &MultiplierBank) -> SampledFunction {
    inverse_transform(&apply_multiplier(signal, h).expect("bank length checked"))
}

fn modulus(f: &SampledFunction) -> SampledFunction {
    SampledFunction::from_samples_unchecked(
        f.samples().iter().map(|z| Complex64::new(z.norm(), 0.0)).collect(),
    )
}

impl FilterBank {
    /// Low-pass, take the real part, keep every `2^J`-th sample.
    fn average(&self, signal: &Spectrum) -> Vec<f64> {
        filter(signal, &self.phi_hat)
            .samples()
            .iter()
            .step_by(self.stride())
            .map(|z| z.re)
            .collect()
    }
}

/// Scattering transform of order `0`, `1` or `2`.
///
/// `order0 = f ⋆ φ`, `order1[j1] = |f ⋆ ψ_j1| ⋆ φ`,
/// `order2[(j1, j2)] = ||f ⋆ ψ_j1| ⋆ ψ_j2| ⋆ φ` for `j1 < j2`, all circular and
/// subsampled by `2^J`. For complex input the order-0 path keeps the real part.
pub fn scatter(f: &SampledFunction, bank: &FilterBank, order: u8) -> Result<ScatteringCoefficients> {
    ensure_len("signal length vs filter bank", bank.n, f.len())?;
    if order > 2 {
        return Err(Error::InvalidParameter(format!("scattering order must be ≤ 2, got {order}")));
    }
    let spectrum = forward_transform(f);
    let mut out = ScatteringCoefficients {
        grid: bank.n,
        order0: bank.average(&spectrum),
        order1: BTreeMap::new(),
        order2: BTreeMap::new(),
    };
    if order == 0 {
        return Ok(out);
    }
    for j1 in 0..bank.j_max {
        let u1 = forward_transform(&modulus(&filter(&spectrum, &bank.psi_hat[j1])));
        out.order1.insert(j1, bank.average(&u1));
        if order == 2 {
            for j2 in j1 + 1..bank.j_max {
                let u2 = forward_transform(&modulus(&filter(&u1, &bank.psi_hat[j2])));
                out.order2.insert((j1, j2), bank.average(&u2));
            }
        }
    }
    Ok(out)
}
