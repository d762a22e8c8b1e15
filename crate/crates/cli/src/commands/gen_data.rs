//! `gen-data`: writes the synthetic datasets used by the other commands.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use hilbert_ops::reasoning::write_triples_csv;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{max_of, metrics, Context};
use crate::config::{at_least, check, non_negative, positive, CommandConfig};
use crate::datagen::{
    gen_reasoning, gen_trajectory, random_initial_state, sparse_instance, DynamicalSystem, ReasoningSpec,
    TrajectorySpec,
};
use crate::error::CliResult;
use crate::report::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DataKind {
    Lorenz,
    Duffing,
    Embeddings,
    Sparse,
}

#[derive(Debug, Default, Args, Serialize)]
pub struct GenDataArgs {
    /// Dataset to generate.
    #[arg(value_enum)]
    pub kind: Option<DataKind>,
    /// Initial state (comma separated); random near the attractor if absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// Embedding dimension.
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub relations: Option<usize>,
    #[arg(long)]
    pub pairs_per_relation: Option<usize>,
    #[arg(long)]
    pub quadruples: Option<usize>,
    #[arg(long)]
    pub fillers: Option<usize>,
    /// Relative noise on analogy embeddings.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Sparse signal length N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of measurements m.
    #[arg(long)]
    pub m: Option<usize>,
    /// Sparsity k.
    #[arg(long)]
    pub k: Option<usize>,
    /// Which member of the seeded instance family to write.
    #[arg(long)]
    pub index: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenDataConfig {
    pub seed: Option<u64>,
    pub kind: DataKind,
    /// Explicit system parameters; must agree with `kind`.
    pub system: Option<DynamicalSystem>,
    pub x0: Option<Vec<f64>>,
    pub dt: f64,
    pub steps: usize,
    pub dim: usize,
    pub relations: usize,
    pub pairs_per_relation: usize,
    pub quadruples: usize,
    pub fillers: usize,
    pub noise: f64,
    pub n: usize,
    pub m: usize,
    pub k: usize,
    pub index: u32,
}

impl Default for GenDataConfig {
    fn default() -> Self {
        let spec = ReasoningSpec::default();
        Self {
            seed: None,
            kind: DataKind::Lorenz,
            system: None,
            x0: None,
            dt: 0.01,
            steps: 2000,
            dim: spec.dim,
            relations: spec.relations,
            pairs_per_relation: spec.pairs_per_relation,
            quadruples: spec.quadruples,
            fillers: spec.fillers,
            noise: spec.noise,
            n: 64,
            m: 32,
            k: 4,
            index: 0,
        }
    }
}

impl GenDataConfig {
    fn system(&self) -> DynamicalSystem {
        match (self.system, self.kind) {
            (Some(s), _) => s,
            (None, DataKind::Duffing) => DynamicalSystem::duffing(),
            _ => DynamicalSystem::lorenz(),
        }
    }
}

impl CommandConfig for GenDataConfig {
    fn seed(&self) -> Option<u64> {
        self.seed
    }

    fn validate(&self) -> CliResult<()> {
        positive("dt", self.dt)?;
        at_least("steps", self.steps, 1)?;
        non_negative("noise", self.noise)?;
        check(self.k <= self.n, || format!("k ({}) exceeds n ({})", self.k, self.n))?;
        let matches = matches!(
            (self.system, self.kind),
            (None, _)
                | (Some(DynamicalSystem::Lorenz { .. }), DataKind::Lorenz)
                | (Some(DynamicalSystem::Duffing { .. }), DataKind::Duffing)
        );
        check(matches, || "system parameters do not match the dataset kind".into())
    }
}

fn vector_rows(v: &[f64]) -> Vec<Vec<String>> {
    v.iter().map(|x| vec![fmt_f64(*x)]).collect()
}

pub fn run(args: &GenDataArgs, ctx: &Context) -> CliResult<PathBuf> {
    let cfg: GenDataConfig = ctx.resolve(args)?;
    let seed = cfg.seed.unwrap_or_default();
    let mut out = ctx.output()?;
    let m = match cfg.kind {
        DataKind::Lorenz | DataKind::Duffing => {
            let system = cfg.system();
            let spec = TrajectorySpec {
                system,
                x0: cfg.x0.clone().unwrap_or_else(|| random_initial_state(&system, seed)),
                dt: cfg.dt,
                steps: cfg.steps,
            };
            let traj = gen_trajectory(&spec)?;
            let p = traj.states[0].len();
            let mut header = vec!["t".to_string()];
            header.extend((0..p).map(|i| format!("x{i}")));
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows: Vec<Vec<String>> = traj
                .states
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    let mut row = vec![fmt_f64(i as f64 * cfg.dt)];
                    row.extend(s.iter().map(|v| fmt_f64(*v)));
                    row
                })
                .collect();
            out.write_table("trajectory.csv", &header, &rows)?;
            out.write_with("pairs.csv", |w| Ok(traj.pairs.write_csv(w)?))?;
            json!({
                "states": traj.states.len(),
                "pairs": traj.pairs.len(),
                "dim": p,
                "max_abs_coordinate": max_of(traj.states.iter().flatten().map(|v| v.abs())),
            })
        }
        DataKind::Embeddings => {
            let spec = ReasoningSpec {
                dim: cfg.dim,
                relations: cfg.relations,
                pairs_per_relation: cfg.pairs_per_relation,
                quadruples: cfg.quadruples,
                fillers: cfg.fillers,
                noise: cfg.noise,
            };
            let data = gen_reasoning(&spec, seed)?;
            out.write_text("store.json", &(data.store.to_json()? + "\n"))?;
            out.write_with("triples.csv", |w| Ok(write_triples_csv(&data.triples, w)?))?;
            let rows: Vec<Vec<String>> = data.quadruples.iter().map(|q| q.to_vec()).collect();
            out.write_table("analogies.csv", &["a", "b", "c", "d"], &rows)?;
            out.write_json("planted.json", &data.planted)?;
            json!({
                "entities": data.store.len(),
                "triples": data.triples.len(),
                "quadruples": data.quadruples.len(),
                "relations": data.planted.len(),
            })
        }
        DataKind::Sparse => {
            let inst = sparse_instance(seed, cfg.index, cfg.n, cfg.m, cfg.k)?;
            let phi = inst.system.phi();
            let rows: Vec<Vec<String>> = (0..phi.nrows())
                .map(|i| (0..phi.ncols()).map(|j| fmt_f64(phi[(i, j)])).collect())
                .collect();
            out.write_table("phi.csv", &[], &rows)?;
            out.write_table("alpha.csv", &[], &vector_rows(&inst.alpha))?;
            out.write_table("y.csv", &[], &vector_rows(&inst.y))?;
            json!({
                "n": cfg.n,
                "m": cfg.m,
                "k": cfg.k,
                "lipschitz": inst.system.lipschitz(),
            })
        }
    };
    out.finish("gen-data", &cfg, metrics(m), Vec::new())
}
