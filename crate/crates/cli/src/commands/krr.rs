//! `krr`: kernel ridge regression fit, prediction and error report.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hilbert_ops::kernels::{fit_krr, predict, read_training_csv, KernelDescriptor, KernelKind};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{metrics, open, Context};
use crate::config::{at_least, non_negative, positive, CommandConfig};
use crate::error::CliResult;
use crate::report::fmt_f64;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum KernelChoice {
    Gaussian,
    Polynomial,
    Linear,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct KrrArgs {
    #[arg(long, value_enum)]
    pub kernel: Option<KernelChoice>,
    /// Gaussian bandwidth σ.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Polynomial degree.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Polynomial offset c.
    #[arg(long)]
    pub offset: Option<f64>,
    /// Ridge parameter λ ≥ 0.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Input dimension of the synthetic problem.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub n_train: Option<usize>,
    #[arg(long)]
    pub n_test: Option<usize>,
    /// Label noise standard deviation.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Training CSV (features..., label) instead of synthetic data.
    #[arg(long)]
    pub train: Option<String>,
    /// Test CSV in the same format.
    #[arg(long)]
    pub test: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KrrConfig {
    pub seed: Option<u64>,
    pub kernel: KernelChoice,
    pub bandwidth: f64,
    pub degree: u32,
    pub offset: f64,
    pub lambda: f64,
    pub dim: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub noise: f64,
    pub train: Option<String>,
    pub test: Option<String>,
}

impl Default for KrrConfig {
    fn default() -> Self {
        Self {
            seed: None,
            kernel: KernelChoice::Gaussian,
            bandwidth: 0.2,
            degree: 3,
            offset: 1.0,
            lambda: 1e-3,
            dim: 1,
            n_train: 40,
            n_test: 200,
            noise: 0.05,
            train: None,
            test: None,
        }
    }
}

impl CommandConfig for KrrConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        positive("bandwidth", self.bandwidth)?;
        non_negative("lambda", self.lambda)?;
        non_negative("noise", self.noise)?;
        non_negative("offset", self.offset)?;
        at_least("dim", self.dim, 1)?;
        at_least("n_train", self.n_train, 1)?;
        at_least("degree", self.degree as usize, 1)
    }
}

/// The synthetic regression target on `[0, 1]^d`.
pub fn target(x: &[f64]) -> f64 {
    x.iter().map(|v| (2.0 * PI * v).sin()).sum::<f64>() / x.len() as f64
}

fn synthetic(r: &mut impl Rng, n: usize, dim: usize, noise: f64, noise_rng: &mut impl Rng) -> (Vec<Vec<f64>>, Vec<f64>) {
    let points: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| r.random::<f64>()).collect()).collect();
    let labels = points
        .iter()
        .map(|p| {
            let z: f64 = StandardNormal.sample(noise_rng);
            target(p) + noise * z
        })
        .collect();
    (points, labels)
}

fn rmse(model: &hilbert_ops::kernels::KernelModel, points: &[Vec<f64>], labels: &[f64]) -> CliResult<(f64, Vec<f64>)> {
    let preds = points.iter().map(|p| predict(model, p)).collect::<hilbert_ops::Result<Vec<_>>>()?;
    let mse = preds.iter().zip(labels).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / labels.len().max(1) as f64;
    Ok((mse.sqrt(), preds))
}

pub fn run(args: &KrrArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: KrrConfig = ctx.resolve(args)?;
    let seed = cfg.seed.unwrap_or_default();
    let (mut data_rng, mut noise_rng) = (rng::stream(seed, rng::DATA), rng::stream(seed, rng::NOISE));
    let (train_x, train_y) = match &cfg.train {
        Some(path) => read_training_csv(open(path)?)?,
        None => synthetic(&mut data_rng, cfg.n_train, cfg.dim, cfg.noise, &mut noise_rng),
    };
    let dim = train_x[0].len();
    let (test_x, test_y) = match (&cfg.test, &cfg.train) {
        (Some(path), _) => read_training_csv(open(path)?)?,
        (None, None) => {
            let mut held_out = rng::stream(seed, rng::HELD_OUT);
            synthetic(&mut held_out, cfg.n_test, dim, 0.0, &mut noise_rng)
        }
        (None, Some(_)) => (Vec::new(), Vec::new()),
    };
    let kind = match cfg.kernel {
        KernelChoice::Gaussian => KernelKind::GaussianRbf {
            bandwidth: cfg.bandwidth,
        },
        KernelChoice::Polynomial => KernelKind::Polynomial {
            degree: cfg.degree,
            offset: cfg.offset,
        },
        KernelChoice::Linear => KernelKind::Linear,
    };
    let kernel = KernelDescriptor::new(kind, dim)?;
    let model = fit_krr(&train_x, &train_y, &kernel, cfg.lambda)?;
    let (train_rmse, _) = rmse(&model, &train_x, &train_y)?;

    let mut out = ctx.output()?;
    out.write_text("model.json", &(model.to_json()? + "\n"))?;
    let mut m = json!({
        "n_train": train_x.len(),
        "dim": dim,
        "train_rmse": train_rmse,
        "solve_residual": model.solve_residual(),
        "objective": model.objective(),
        "alpha_max_abs": model.alpha.iter().fold(0.0f64, |a, v| a.max(v.abs())),
    });
    if !test_x.is_empty() {
        let (test_rmse, preds) = rmse(&model, &test_x, &test_y)?;
        m["n_test"] = json!(test_x.len());
        m["test_rmse"] = json!(test_rmse);
        let mut header: Vec<String> = (0..dim).map(|i| format!("x{i}")).collect();
        header.extend(["label".to_string(), "prediction".to_string()]);
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        let rows: Vec<Vec<String>> = test_x
            .iter()
            .zip(&test_y)
            .zip(&preds)
            .map(|((x, y), p)| x.iter().chain([y, p]).map(|v| fmt_f64(*v)).collect())
            .collect();
        out.write_table("predictions.csv", &header, &rows)?;
    }
    out.finish("krr", &cfg, metrics(m), Vec::new())
}
