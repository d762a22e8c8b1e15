//! `koopman`: EDMD fit on a trajectory, eigenvalue report and forecasts.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hilbert_ops::operator_learning::{
    delay_embed, fit_edmd, forecast, koopman_eigs, write_eigenvalues_csv, Dictionary, DictionaryKind, KoopmanModel,
    SnapshotPairs,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{max_of, metrics, open, Context};
use crate::config::{at_least, check, non_negative, positive, CommandConfig};
use crate::datagen::{gen_trajectory, random_initial_state, DynamicalSystem, SystemChoice, TrajectorySpec};
use crate::error::CliResult;
use crate::report::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DictionaryChoice {
    Identity,
    Monomials,
    Rbf,
    Delay,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct KoopmanArgs {
    /// Dynamical system with its classical parameters.
    #[arg(long, value_enum)]
    pub system: Option<SystemChoice>,
    /// Initial state (comma separated); random near the attractor if absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    /// Number of integration steps.
    #[arg(long)]
    pub steps: Option<usize>,
    #[arg(long, value_enum)]
    pub dictionary: Option<DictionaryChoice>,
    /// Maximum monomial degree.
    #[arg(long)]
    pub degree: Option<u32>,
    /// Number of RBF centres drawn from the training states.
    #[arg(long)]
    pub centers: Option<usize>,
    /// RBF bandwidth σ.
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Delay-embedding depth L.
    #[arg(long)]
    pub lags: Option<usize>,
    /// Ridge parameter λ ≥ 0 (0 uses the pseudoinverse).
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Fraction of snapshot pairs used for fitting; the rest are held out.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Forecast length from the first held-out state.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Snapshot-pair CSV (x columns then y columns) instead of a simulation.
    #[arg(long)]
    pub data: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KoopmanConfig {
    pub seed: Option<u64>,
    pub system: DynamicalSystem,
    pub x0: Option<Vec<f64>>,
    pub dt: f64,
    pub steps: usize,
    pub dictionary: DictionaryChoice,
    pub degree: u32,
    pub centers: usize,
    pub bandwidth: f64,
    pub lags: usize,
    pub lambda: f64,
    pub train_fraction: f64,
    pub horizon: usize,
    pub data: Option<String>,
}

impl Default for KoopmanConfig {
    fn default() -> Self {
        Self {
            seed: None,
            system: DynamicalSystem::lorenz(),
            x0: None,
            dt: 0.01,
            steps: 2500,
            dictionary: DictionaryChoice::Monomials,
            degree: 2,
            centers: 20,
            bandwidth: 10.0,
            lags: 1,
            lambda: 0.0,
            train_fraction: 0.8,
            horizon: 20,
            data: None,
        }
    }
}

impl CommandConfig for KoopmanConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        positive("dt", self.dt)?;
        at_least("steps", self.steps, 1)?;
        at_least("degree", self.degree as usize, 1)?;
        at_least("horizon", self.horizon, 1)?;
        positive("bandwidth", self.bandwidth)?;
        non_negative("lambda", self.lambda)?;
        check(self.train_fraction > 0.0 && self.train_fraction < 1.0, || {
            format!("train_fraction must lie in (0, 1), got {}", self.train_fraction)
        })
    }
}

/// Per-coordinate one-step RMSE on `test`, divided by the standard deviation of
/// the targets. Only the first `p` coordinates are scored.
pub fn relative_one_step_rmse(model: &KoopmanModel, test: &SnapshotPairs, p: usize) -> CliResult<Vec<f64>> {
    let n = test.len() as f64;
    let mut sq = vec![0.0; p];
    for (x, y) in test.x.iter().zip(&test.y) {
        let z = model.step_observables(&model.lift(x)?)?;
        let pred = model.read_state(&z)?;
        for i in 0..p {
            sq[i] += (pred[i] - y[i]).powi(2);
        }
    }
    Ok((0..p)
        .map(|i| {
            let mean = test.y.iter().map(|v| v[i]).sum::<f64>() / n;
            let var = test.y.iter().map(|v| (v[i] - mean).powi(2)).sum::<f64>() / n;
            (sq[i] / n).sqrt() / var.sqrt().max(f64::MIN_POSITIVE)
        })
        .collect())
}

/// Leading `fraction` of the pairs for fitting, the remainder held out.
pub fn split(pairs: &SnapshotPairs, fraction: f64) -> CliResult<(SnapshotPairs, SnapshotPairs)> {
    let cut = ((pairs.len() as f64 * fraction).round() as usize).clamp(1, pairs.len().saturating_sub(1).max(1));
    check(cut < pairs.len(), || {
        format!("{} snapshot pairs cannot be split into train and test", pairs.len())
    })?;
    let train = SnapshotPairs::new(pairs.x[..cut].to_vec(), pairs.y[..cut].to_vec())?;
    let test = SnapshotPairs::new(pairs.x[cut..].to_vec(), pairs.y[cut..].to_vec())?;
    Ok((train, test))
}

fn series(cfg: &KoopmanConfig) -> CliResult<Vec<Vec<f64>>> {
    if let Some(path) = &cfg.data {
        let pairs = SnapshotPairs::read_csv(open(path)?)?;
        let mut s = pairs.x.clone();
        s.push(pairs.y.last().expect("non-empty pairs").clone());
        return Ok(s);
    }
    let x0 = match &cfg.x0 {
        Some(v) => v.clone(),
        None => random_initial_state(&cfg.system, cfg.seed.unwrap_or_default()),
    };
    let spec = TrajectorySpec {
        system: cfg.system,
        x0,
        dt: cfg.dt,
        steps: cfg.steps,
    };
    Ok(gen_trajectory(&spec)?.states)
}

pub fn run(args: &KoopmanArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: KoopmanConfig = ctx.resolve(args)?;
    let states = series(&cfg)?;
    let p = states[0].len();
    let pairs = match cfg.dictionary {
        DictionaryChoice::Delay => delay_embed(&states, cfg.lags)?,
        _ => SnapshotPairs::from_trajectory(&states)?,
    };
    let (train, test) = split(&pairs, cfg.train_fraction)?;
    let kind = match cfg.dictionary {
        DictionaryChoice::Identity => DictionaryKind::Identity,
        DictionaryChoice::Monomials => DictionaryKind::Monomials {
            max_degree: cfg.degree,
        },
        DictionaryChoice::Rbf => {
            let stride = (train.len() / cfg.centers.max(1)).max(1);
            DictionaryKind::GaussianRbf {
                centers: train.x.iter().step_by(stride).take(cfg.centers).cloned().collect(),
                bandwidth: cfg.bandwidth,
            }
        }
        DictionaryChoice::Delay => DictionaryKind::DelayEmbedding { lags: cfg.lags },
    };
    let dictionary = Dictionary::new(kind, p)?;
    let model = fit_edmd(&train, &dictionary, cfg.lambda)?;
    let mut warnings = model.warnings.clone();

    let rel = relative_one_step_rmse(&model, &test, p)?;
    let horizon = cfg.horizon.min(test.len());
    let start = &test.x[0];
    let predicted = forecast(&model, start, horizon)?;
    let forecast_rmse: Vec<f64> = predicted
        .iter()
        .zip(&test.y)
        .map(|(f, y)| ((0..p).map(|i| (f[i] - y[i]).powi(2)).sum::<f64>() / p as f64).sqrt())
        .collect();

    let mut out = ctx.output()?;
    out.write_text("model.json", &(model.to_json()? + "\n"))?;
    let eigs = match koopman_eigs(&model) {
        Ok(e) => {
            out.write_with("eigenvalues.csv", |w| Ok(write_eigenvalues_csv(&e, w)?))?;
            Some(e)
        }
        Err(e) => {
            warnings.push(format!("eigendecomposition skipped: {e}"));
            None
        }
    };
    let mut header: Vec<String> = vec!["step".into()];
    header.extend((0..p).map(|i| format!("pred{i}")));
    header.extend((0..p).map(|i| format!("true{i}")));
    header.push("rmse".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = predicted
        .iter()
        .zip(&test.y)
        .zip(&forecast_rmse)
        .enumerate()
        .map(|(s, ((f, y), e))| {
            let mut row = vec![(s + 1).to_string()];
            row.extend(f[..p].iter().map(|v| fmt_f64(*v)));
            row.extend(y[..p].iter().map(|v| fmt_f64(*v)));
            row.push(fmt_f64(*e));
            row
        })
        .collect();
    out.write_table("forecast.csv", &header, &rows)?;

    let mut m = json!({
        "pairs": pairs.len(),
        "train_pairs": train.len(),
        "test_pairs": test.len(),
        "observables": dictionary.output_dim(),
        "one_step_relative_rmse": rel,
        "max_one_step_relative_rmse": max_of(rel.iter().copied()),
        "forecast_horizon": horizon,
        "forecast_final_rmse": forecast_rmse.last().copied().unwrap_or(0.0),
    });
    if let Some(e) = &eigs {
        m["eigenvalue_count"] = json!(e.len());
        m["spectral_radius"] = json!(e.first().map(|p| p.value.norm()).unwrap_or(0.0));
        m["max_eigen_residual"] = json!(max_of(e.iter().map(|p| p.residual)));
    }
    out.finish("koopman", &cfg, metrics(m), warnings)
}
