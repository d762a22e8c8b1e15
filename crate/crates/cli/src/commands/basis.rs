//! `basis`: analysis/synthesis round trips, Parseval and projection checks.

use std::path::PathBuf;

use clap::Args;
use hilbert_ops::function_space::{
    analyze, fourier_frequency, inner_product, make_basis, norm, project_onto_span, synthesize, BasisKind,
    SampledFunction,
};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{max_of, metrics, open, Context};
use crate::config::{at_least, CommandConfig};
use crate::error::CliResult;
use crate::report::fmt_f64;
use crate::rng;

#[derive(Debug, Default, Args, Serialize)]
pub struct BasisArgs {
    /// Grid size N.
    #[arg(long)]
    pub n: Option<usize>,
    /// fourier or haar.
    #[arg(long)]
    pub kind: Option<BasisKind>,
    /// Number of basis elements (defaults to N).
    #[arg(long)]
    pub size: Option<usize>,
    /// Number of random test functions.
    #[arg(long)]
    pub functions: Option<usize>,
    /// Dimension of the subspace used for the projection check.
    #[arg(long)]
    pub project_dim: Option<usize>,
    /// CSV with one sampled function (1 or 2 columns) instead of random ones.
    #[arg(long)]
    pub input: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BasisConfig {
    pub seed: Option<u64>,
    pub n: usize,
    pub kind: BasisKind,
    pub size: Option<usize>,
    pub functions: usize,
    pub project_dim: Option<usize>,
    pub input: Option<String>,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self {
            seed: None,
            n: 64,
            kind: BasisKind::Fourier,
            size: None,
            functions: 100,
            project_dim: None,
            input: None,
        }
    }
}

impl CommandConfig for BasisConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        at_least("n", self.n, 1)?;
        at_least("functions", self.functions, 1)?;
        if let Some(s) = self.size {
            at_least("size", s, 1)?;
        }
        Ok(())
    }
}

pub fn run(args: &BasisArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: BasisConfig = ctx.resolve(args)?;
    let size = cfg.size.unwrap_or(cfg.n);
    let basis = make_basis(cfg.kind, size, cfg.n)?;
    let functions = match &cfg.input {
        Some(path) => vec![SampledFunction::read_csv(open(path)?)?],
        None => {
            let mut r = rng::stream(cfg.seed.unwrap_or_default(), rng::DATA);
            (0..cfg.functions)
                .map(|_| {
                    let v: Vec<f64> = (0..cfg.n).map(|_| StandardNormal.sample(&mut r)).collect();
                    SampledFunction::from_real(&v)
                })
                .collect::<hilbert_ops::Result<Vec<_>>>()?
        }
    };
    let complete = size == cfg.n;
    let project_dim = cfg.project_dim.unwrap_or((size / 2).max(1)).min(size);
    let subspace = &basis.elements()[..project_dim];

    let (mut parseval, mut roundtrip, mut bessel, mut orthogonality) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for f in &functions {
        let c = analyze(f, &basis)?;
        let excess = c.energy() - norm(f).powi(2);
        bessel.push(excess.max(0.0));
        if complete {
            parseval.push(excess.abs());
            roundtrip.push(synthesize(&c, &basis)?.max_abs_diff(f)?);
        }
        let p = project_onto_span(f, subspace)?;
        let r = f.checked_sub(&p)?;
        for v in subspace {
            orthogonality.push(inner_product(&r, v)?.norm());
        }
    }

    let mut out = ctx.output()?;
    let first = &functions[0];
    let coeffs = analyze(first, &basis)?;
    let rows: Vec<Vec<String>> = coeffs
        .coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let label = match cfg.kind {
                BasisKind::Fourier => fourier_frequency(i).to_string(),
                BasisKind::Haar => i.to_string(),
            };
            vec![i.to_string(), label, fmt_f64(c.re), fmt_f64(c.im)]
        })
        .collect();
    out.write_table("coefficients.csv", &["index", "label", "re", "im"], &rows)?;
    out.write_with("reconstruction.csv", |w| Ok(synthesize(&coeffs, &basis)?.write_csv(w)?))?;

    let mut m = json!({
        "functions": functions.len(),
        "grid": cfg.n,
        "basis_size": size,
        "complete": complete,
        "orthonormality_defect": basis.orthonormality_defect(),
        "max_bessel_excess": max_of(bessel),
        "projection_dim": project_dim,
        "max_projection_orthogonality": max_of(orthogonality),
    });
    if complete {
        m["max_parseval_error"] = json!(max_of(parseval));
        m["max_roundtrip_error"] = json!(max_of(roundtrip));
    }
    out.finish("basis", &cfg, metrics(m), Vec::new())
}
