//! `scatter`: scattering coefficients of a signal plus stability diagnostics.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hilbert_ops::function_space::{norm, SampledFunction};
use hilbert_ops::scattering::{build_filter_bank, scatter};
use hilbert_ops::Complex64;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{max_of, metrics, open, Context};
use crate::config::{at_least, check, non_negative, CommandConfig};
use crate::error::CliResult;
use crate::report::fmt_f64;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// White Gaussian noise.
    Noise,
    /// A cosine at the centre of band `j = 0`.
    Tone,
    /// A linear chirp sweeping the whole band.
    Chirp,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct ScatterArgs {
    /// Signal length N (power of two).
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of dyadic scales J.
    #[arg(long)]
    pub j: Option<usize>,
    /// Cascade depth (0, 1 or 2).
    #[arg(long)]
    pub order: Option<u8>,
    #[arg(long, value_enum)]
    pub signal: Option<SignalKind>,
    /// CSV with one sampled signal instead of a synthetic one.
    #[arg(long)]
    pub input: Option<String>,
    /// Random perturbations used for the non-expansiveness check.
    #[arg(long)]
    pub perturbations: Option<usize>,
    /// Relative size of those perturbations.
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScatterConfig {
    pub seed: Option<u64>,
    pub n: usize,
    pub j: usize,
    pub order: u8,
    pub signal: SignalKind,
    pub input: Option<String>,
    pub perturbations: usize,
    pub epsilon: f64,
}

impl Default for ScatterConfig {
    fn default() -> Self {
        Self {
            seed: None,
            n: 256,
            j: 3,
            order: 2,
            signal: SignalKind::Noise,
            input: None,
            perturbations: 20,
            epsilon: 0.1,
        }
    }
}

impl CommandConfig for ScatterConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        at_least("j", self.j, 1)?;
        check(self.order <= 2, || format!("order must be 0, 1 or 2, got {}", self.order))?;
        non_negative("epsilon", self.epsilon)
    }
}

fn synthetic_signal(cfg: &ScatterConfig) -> hilbert_ops::Result<SampledFunction> {
    let n = cfg.n;
    match cfg.signal {
        SignalKind::Noise => {
            let mut r = rng::stream(cfg.seed.unwrap_or_default(), rng::DATA);
            let v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut r)).collect();
            SampledFunction::from_real(&v)
        }
        SignalKind::Tone => {
            let k = (0.375 * n as f64).round();
            SampledFunction::from_real_fn(n, |x| (2.0 * PI * k * x).cos())
        }
        SignalKind::Chirp => SampledFunction::from_real_fn(n, |x| (PI * n as f64 / 2.0 * x * x).cos()),
    }
}

pub fn run(args: &ScatterArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: ScatterConfig = ctx.resolve(args)?;
    let f = match &cfg.input {
        Some(path) => SampledFunction::read_csv(open(path)?)?,
        None => synthetic_signal(&cfg)?,
    };
    let bank = build_filter_bank(cfg.j, f.len())?;
    let s = scatter(&f, &bank, cfg.order)?;

    let mut noise = rng::stream(cfg.seed.unwrap_or_default(), rng::NOISE);
    let scale = cfg.epsilon * norm(&f);
    let mut ratios = Vec::with_capacity(cfg.perturbations);
    let mut violations = 0usize;
    for _ in 0..cfg.perturbations {
        let e: Vec<f64> = (0..f.len()).map(|_| StandardNormal.sample(&mut noise)).collect();
        let e = SampledFunction::from_real(&e)?;
        let e = e.scaled(Complex64::new(scale / norm(&e).max(f64::MIN_POSITIVE), 0.0));
        let g = f.checked_add(&e)?;
        let gap = norm(&e);
        let d = s.distance(&scatter(&g, &bank, cfg.order)?)?;
        if d > gap {
            violations += 1;
        }
        if gap > 0.0 {
            ratios.push(d / gap);
        }
    }
    let shifted = scatter(&f.circular_shift(1), &bank, cfg.order)?;
    let energy = s.energy();
    let shift_sensitivity = if energy > 0.0 { s.distance(&shifted)? / energy.sqrt() } else { 0.0 };

    let mut out = ctx.output()?;
    out.write_text("scattering.json", &(s.to_json()? + "\n"))?;
    out.write_with("scattering.csv", |w| Ok(s.write_csv(w)?))?;
    let lp = bank.littlewood_paley();
    let mut header = vec!["k".to_string(), "phi".to_string()];
    header.extend((0..cfg.j).map(|j| format!("psi{j}")));
    header.push("littlewood_paley".into());
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows: Vec<Vec<String>> = (0..f.len())
        .map(|k| {
            let mut row = vec![k.to_string(), fmt_f64(bank.low_pass().gamma[k].norm())];
            row.extend(bank.band_pass().iter().map(|p| fmt_f64(p.gamma[k].norm())));
            row.push(fmt_f64(lp[k]));
            row
        })
        .collect();
    out.write_table("filters.csv", &header, &rows)?;

    let m = json!({
        "n": f.len(),
        "scales": cfg.j,
        "order": cfg.order,
        "paths": s.paths().len(),
        "coefficients": s.flatten().len(),
        "signal_energy": norm(&f).powi(2),
        "scattering_energy": energy,
        "littlewood_paley_max": max_of(lp.iter().copied()),
        "min_band_concentration": (0..cfg.j).map(|j| bank.band_concentration(j)).fold(f64::INFINITY, f64::min),
        "nonexpansive_violations": violations,
        "max_lipschitz_ratio": max_of(ratios),
        "shift_sensitivity": shift_sensitivity,
    });
    out.finish("scatter", &cfg, metrics(m), Vec::new())
}
