//! `reason`: relation fitting, two-hop composition and analogy evaluation.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hilbert_ops::reasoning::{
    analogy_with_metric, chain_error_bound, compose, fit_relation_family, read_triples_csv, AnalogyMetric,
    EmbeddingStore, RelationFamily, ReasoningTriple,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{max_of, metrics, open, Context};
use crate::config::{at_least, check, non_negative, positive, CommandConfig};
use crate::datagen::{gen_reasoning, ReasoningSpec};
use crate::error::{CliError, CliResult};
use crate::report::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MetricChoice {
    Euclidean,
    Cosine,
}

impl From<MetricChoice> for AnalogyMetric {
    fn from(m: MetricChoice) -> Self {
        match m {
            MetricChoice::Euclidean => AnalogyMetric::Euclidean,
            MetricChoice::Cosine => AnalogyMetric::Cosine,
        }
    }
}

#[derive(Debug, Default, Args, Serialize)]
pub struct ReasonArgs {
    /// Embedding dimension of generated data.
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of planted relations (≥ 2).
    #[arg(long)]
    pub relations: Option<usize>,
    #[arg(long)]
    pub pairs_per_relation: Option<usize>,
    /// Number of analogy quadruples.
    #[arg(long)]
    pub quadruples: Option<usize>,
    /// Distractor entities added to the store.
    #[arg(long)]
    pub fillers: Option<usize>,
    /// Relative noise on analogy embeddings.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Ridge parameter λ > 0.
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long, value_enum)]
    pub metric: Option<MetricChoice>,
    /// Embedding store JSON (`{"id": [..], ...}`).
    #[arg(long)]
    pub store: Option<String>,
    /// Triples CSV (subject,relation,object).
    #[arg(long)]
    pub triples: Option<String>,
    /// Analogy CSV (a,b,c,d) where d is the expected answer.
    #[arg(long)]
    pub analogies: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReasonConfig {
    pub seed: Option<u64>,
    pub dim: usize,
    pub relations: usize,
    pub pairs_per_relation: usize,
    pub quadruples: usize,
    pub fillers: usize,
    pub noise: f64,
    pub lambda: f64,
    pub metric: MetricChoice,
    pub store: Option<String>,
    pub triples: Option<String>,
    pub analogies: Option<String>,
}

impl Default for ReasonConfig {
    fn default() -> Self {
        let spec = ReasoningSpec::default();
        Self {
            seed: None,
            dim: spec.dim,
            relations: spec.relations,
            pairs_per_relation: spec.pairs_per_relation,
            quadruples: spec.quadruples,
            fillers: spec.fillers,
            noise: spec.noise,
            lambda: 1e-6,
            metric: MetricChoice::Euclidean,
            store: None,
            triples: None,
            analogies: None,
        }
    }
}

impl ReasonConfig {
    pub fn spec(&self) -> ReasoningSpec {
        ReasoningSpec {
            dim: self.dim,
            relations: self.relations,
            pairs_per_relation: self.pairs_per_relation,
            quadruples: self.quadruples,
            fillers: self.fillers,
            noise: self.noise,
        }
    }
}

impl CommandConfig for ReasonConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        positive("lambda", self.lambda)?;
        non_negative("noise", self.noise)?;
        at_least("dim", self.dim, 1)?;
        at_least("relations", self.relations, 2)?;
        check(self.store.is_some() == self.triples.is_some(), || {
            "store and triples must be given together".into()
        })?;
        check(self.analogies.is_none() || self.store.is_some(), || {
            "analogies need a store".into()
        })
    }
}

/// A two-hop path `s -r1-> m -r2-> o` found in the triples.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainReport {
    pub path: [String; 5],
    pub error: f64,
    pub bound: f64,
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Error of the composed operator on every two-hop path, next to its bound.
pub fn evaluate_chains(
    family: &RelationFamily,
    triples: &[ReasoningTriple],
    store: &EmbeddingStore,
) -> CliResult<Vec<ChainReport>> {
    let mut out = Vec::new();
    for t1 in triples {
        for t2 in triples.iter().filter(|t| t.subject == t1.object) {
            let (r1, r2) = (family.get(&t1.relation)?, family.get(&t2.relation)?);
            let (fs, fm, fo) = (store.get(&t1.subject)?, store.get(&t1.object)?, store.get(&t2.object)?);
            let eps1 = dist(&r1.apply(fs)?, fm);
            let eps2 = dist(&r2.apply(fm)?, fo);
            let error = dist(&compose(r1, r2)?.apply(fs)?, fo);
            out.push(ChainReport {
                path: [
                    t1.subject.clone(),
                    t1.relation.clone(),
                    t1.object.clone(),
                    t2.relation.clone(),
                    t2.object.clone(),
                ],
                error,
                bound: chain_error_bound(r2, eps1, eps2),
            });
        }
    }
    Ok(out)
}

/// Top-ranked answer per quadruple `(a, b, c, expected)` and its distance.
pub fn evaluate_analogies(
    quadruples: &[[String; 4]],
    store: &EmbeddingStore,
    metric: AnalogyMetric,
) -> CliResult<Vec<(String, f64)>> {
    quadruples
        .iter()
        .map(|[a, b, c, _]| {
            let ranked = analogy_with_metric(a, b, c, store, true, metric)?;
            Ok(ranked.into_iter().next().expect("analogy returns at least one candidate"))
        })
        .collect()
}

fn read_quadruples(path: &str) -> CliResult<Vec<[String; 4]>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(open(path)?);
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| CliError::Module(hilbert_ops::Error::Parse(format!("{path}: {e}"))))?;
        let fields: Vec<String> = rec.iter().map(|s| s.trim().to_string()).collect();
        if i == 0 && fields == ["a", "b", "c", "d"] {
            continue;
        }
        let row: [String; 4] = fields.try_into().map_err(|f: Vec<String>| {
            CliError::Module(hilbert_ops::Error::Parse(format!(
                "{path}: row {} has {} fields, expected 4",
                i + 1,
                f.len()
            )))
        })?;
        out.push(row);
    }
    Ok(out)
}

pub fn run(args: &ReasonArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: ReasonConfig = ctx.resolve(args)?;
    let (store, triples, quadruples, planted) = match (&cfg.store, &cfg.triples) {
        (Some(s), Some(t)) => {
            let text = std::fs::read_to_string(s).map_err(|e| CliError::io(s, e))?;
            let store = EmbeddingStore::from_json(&text)?;
            let triples = read_triples_csv(open(t)?)?;
            let quads = match &cfg.analogies {
                Some(a) => read_quadruples(a)?,
                None => Vec::new(),
            };
            (store, triples, quads, None)
        }
        _ => {
            let data = gen_reasoning(&cfg.spec(), cfg.seed.unwrap_or_default())?;
            (data.store, data.triples, data.quadruples, Some(data.planted))
        }
    };

    let family = fit_relation_family(&triples, &store, cfg.lambda)?;
    let chains = evaluate_chains(&family, &triples, &store)?;
    let answers = evaluate_analogies(&quadruples, &store, cfg.metric.into())?;
    let correct = quadruples.iter().zip(&answers).filter(|(q, (a, _))| q[3] == *a).count();

    let mut out = ctx.output()?;
    out.write_text("family.json", &(family.to_json()? + "\n"))?;
    let rows: Vec<Vec<String>> = chains
        .iter()
        .map(|c| {
            let mut row = c.path.to_vec();
            row.extend([fmt_f64(c.error), fmt_f64(c.bound)]);
            row
        })
        .collect();
    out.write_table(
        "chains.csv",
        &["subject", "first", "middle", "second", "object", "error", "bound"],
        &rows,
    )?;
    if !quadruples.is_empty() {
        let rows: Vec<Vec<String>> = quadruples
            .iter()
            .zip(&answers)
            .map(|(q, (a, d))| {
                let mut row = q.to_vec();
                row.extend([a.clone(), fmt_f64(*d), (q[3] == *a).to_string()]);
                row
            })
            .collect();
        out.write_table(
            "analogy.csv",
            &["a", "b", "c", "expected", "predicted", "distance", "correct"],
            &rows,
        )?;
    }

    let mut m = json!({
        "entities": store.len(),
        "triples": triples.len(),
        "relations": family.operators.len(),
        "total_objective": family.total_objective,
        "chains": chains.len(),
        "max_chain_error": max_of(chains.iter().map(|c| c.error)),
        "chain_bound_violations": chains.iter().filter(|c| c.error > c.bound * (1.0 + 1e-9) + 1e-12).count(),
    });
    if !quadruples.is_empty() {
        m["analogies"] = json!(quadruples.len());
        m["analogy_top1"] = json!(correct as f64 / quadruples.len() as f64);
    }
    if let Some(planted) = &planted {
        let d = cfg.dim;
        let mut worst: f64 = 0.0;
        for (name, truth) in planted {
            let fitted = &family.get(name)?.t.entries;
            for i in 0..d {
                for j in 0..d {
                    worst = worst.max((fitted[(i, j)] - truth[i * d + j]).abs());
                }
            }
        }
        m["max_planted_error"] = json!(worst);
    }
    out.finish("reason", &cfg, metrics(m), Vec::new())
}
