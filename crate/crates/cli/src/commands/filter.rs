//! `filter`: convolution-theorem check and learnable threshold training on a
//! planted problem.

use std::path::PathBuf;

use clap::Args;
use hilbert_ops::function_space::SampledFunction;
use hilbert_ops::spectral::{
    circular_convolve, fit_threshold, soft_threshold_spectrum, spectral_convolve, threshold_gradient, threshold_loss,
    Spectrum, ThresholdFit, ThresholdParams,
};
use hilbert_ops::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{max_of, metrics, Context};
use crate::config::{at_least, check, non_negative, positive, CommandConfig};
use crate::error::CliResult;
use crate::report::fmt_f64;
use crate::rng;

/// Bins whose mean input magnitude reaches this are scored for recovery.
pub const ACTIVE_BIN_MAGNITUDE: f64 = 0.1;

#[derive(Debug, Default, Args, Serialize)]
pub struct FilterArgs {
    /// Spectrum length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of (input, target) training pairs.
    #[arg(long)]
    pub pairs: Option<usize>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Gradient-descent learning rate.
    #[arg(long)]
    pub lr: Option<f64>,
    /// Initial threshold for every bin.
    #[arg(long)]
    pub theta0: Option<f64>,
    /// Lower end of the planted threshold range.
    #[arg(long)]
    pub theta_min: Option<f64>,
    /// Upper end of the planted threshold range.
    #[arg(long)]
    pub theta_max: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub seed: Option<u64>,
    pub n: usize,
    pub pairs: usize,
    pub steps: usize,
    pub lr: f64,
    pub theta0: f64,
    pub theta_min: f64,
    pub theta_max: f64,
}

impl Default for FilterConfig {
    fn default() -> Self {
        Self {
            seed: None,
            n: 32,
            pairs: 16,
            steps: 5000,
            lr: 1.0,
            theta0: 0.5,
            theta_min: 0.2,
            theta_max: 1.0,
        }
    }
}

impl CommandConfig for FilterConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        at_least("n", self.n, 1)?;
        at_least("pairs", self.pairs, 1)?;
        non_negative("lr", self.lr)?;
        positive("theta0", self.theta0)?;
        positive("theta_min", self.theta_min)?;
        check(self.theta_max > self.theta_min, || {
            format!("theta_max ({}) must exceed theta_min ({})", self.theta_max, self.theta_min)
        })
    }
}

/// Outcome of fitting thresholds to targets generated by known ones.
pub struct PlantedThreshold {
    pub truth: ThresholdParams,
    pub pairs: Vec<(Spectrum, Spectrum)>,
    pub fit: ThresholdFit,
    pub mean_magnitude: Vec<f64>,
}

impl PlantedThreshold {
    pub fn active_bins(&self) -> Vec<usize> {
        (0..self.truth.len())
            .filter(|&k| self.mean_magnitude[k] >= ACTIVE_BIN_MAGNITUDE)
            .collect()
    }

    pub fn max_relative_error(&self) -> f64 {
        max_of(
            self.active_bins()
                .into_iter()
                .map(|k| (self.fit.params.theta[k] - self.truth.theta[k]).abs() / self.truth.theta[k]),
        )
    }
}

fn random_spectrum(r: &mut impl Rng, n: usize) -> Spectrum {
    Spectrum::new(
        (0..n)
            .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect(),
    )
    .expect("finite coefficients")
}

pub fn planted_threshold(cfg: &FilterConfig) -> CliResult<PlantedThreshold> {
    let seed = cfg.seed.unwrap_or_default();
    let mut init = rng::stream(seed, rng::INIT);
    let truth = ThresholdParams::new((0..cfg.n).map(|_| init.random_range(cfg.theta_min..cfg.theta_max)).collect())?;
    let mut data = rng::stream(seed, rng::DATA);
    let pairs = (0..cfg.pairs)
        .map(|_| {
            let x = random_spectrum(&mut data, cfg.n);
            let y = soft_threshold_spectrum(&x, &truth)?;
            Ok((x, y))
        })
        .collect::<hilbert_ops::Result<Vec<_>>>()?;
    let mean_magnitude = (0..cfg.n)
        .map(|k| pairs.iter().map(|(x, _)| x.coeffs[k].norm()).sum::<f64>() / pairs.len() as f64)
        .collect();
    let fit = fit_threshold(&pairs, &ThresholdParams::constant(cfg.n, cfg.theta0)?, cfg.lr, cfg.steps)?;
    Ok(PlantedThreshold {
        truth,
        pairs,
        fit,
        mean_magnitude,
    })
}

/// Largest componentwise relative gap between the analytic gradient and
/// central differences with step `h`.
pub fn gradient_check(input: &Spectrum, target: &Spectrum, t: &ThresholdParams, h: f64) -> CliResult<f64> {
    let analytic = threshold_gradient(input, target, t)?;
    let mut worst: f64 = 0.0;
    for (k, &g) in analytic.iter().enumerate() {
        let (mut plus, mut minus) = (t.clone(), t.clone());
        plus.theta[k] += h;
        minus.theta[k] -= h;
        let fd = (threshold_loss(input, target, &plus)? - threshold_loss(input, target, &minus)?) / (2.0 * h);
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-12));
    }
    Ok(worst)
}

pub fn run(args: &FilterArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: FilterConfig = ctx.resolve(args)?;
    let seed = cfg.seed.unwrap_or_default();

    let mut conv_rng = rng::stream(seed, rng::HELD_OUT);
    let f: Vec<f64> = (0..cfg.n).map(|_| conv_rng.random_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..cfg.n).map(|_| conv_rng.random_range(-1.0..1.0)).collect();
    let (f, h) = (SampledFunction::from_real(&f)?, SampledFunction::from_real(&h)?);
    let direct = circular_convolve(&f, &h)?;
    let spectral = spectral_convolve(&f, &h)?;
    let convolution_gap = spectral.max_abs_diff(&direct)?;

    let planted = planted_threshold(&cfg)?;
    let (x0, y0) = &planted.pairs[0];
    let gradient_gap = gradient_check(x0, y0, &ThresholdParams::constant(cfg.n, cfg.theta0)?, 1e-6)?;

    let mut out = ctx.output()?;
    let rows: Vec<Vec<String>> = (0..cfg.n)
        .map(|i| {
            vec![
                i.to_string(),
                fmt_f64(direct.samples()[i].re),
                fmt_f64(spectral.samples()[i].re),
            ]
        })
        .collect();
    out.write_table("convolution.csv", &["index", "direct", "spectral"], &rows)?;
    out.write_text("threshold.json", &(planted.fit.params.to_json()? + "\n"))?;
    let rows: Vec<Vec<String>> = (0..cfg.n)
        .map(|k| {
            vec![
                k.to_string(),
                fmt_f64(planted.truth.theta[k]),
                fmt_f64(planted.fit.params.theta[k]),
                fmt_f64(planted.mean_magnitude[k]),
            ]
        })
        .collect();
    out.write_table("theta.csv", &["k", "planted", "fitted", "mean_magnitude"], &rows)?;
    let rows: Vec<Vec<String>> = planted
        .fit
        .loss_trace
        .iter()
        .enumerate()
        .map(|(i, l)| vec![i.to_string(), fmt_f64(*l)])
        .collect();
    out.write_table("loss_trace.csv", &["step", "loss"], &rows)?;

    let m = json!({
        "convolution_max_gap": convolution_gap,
        "gradient_max_relative_gap": gradient_gap,
        "initial_loss": planted.fit.initial_loss,
        "final_loss": planted.fit.final_loss,
        "steps": planted.fit.steps,
        "active_bins": planted.active_bins().len(),
        "theta_max_relative_error": planted.max_relative_error(),
    });
    out.finish("filter", &cfg, metrics(m), Vec::new())
}
