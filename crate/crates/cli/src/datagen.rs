//! Synthetic datasets: ODE trajectories, relational embeddings, sparse signals.

use std::collections::BTreeMap;

use hilbert_ops::operator_learning::SnapshotPairs;
use hilbert_ops::reasoning::{EmbeddingStore, ReasoningTriple};
use hilbert_ops::sparse_recovery::{planted_sparse, SensingSystem};
use hilbert_ops::Error;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::rng;

/// Coordinates beyond this magnitude count as divergence.
pub const DIVERGENCE_BOUND: f64 = 1e6;

/// One classical Runge–Kutta step of `ẋ = field(x)`.
pub fn rk4_step<F>(field: F, x: &[f64], dt: f64) -> CliResult<Vec<f64>>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("step size must be positive, got {dt}")).into());
    }
    let eval = |y: &[f64]| -> CliResult<Vec<f64>> {
        let v = field(y);
        if v.len() != y.len() || v.iter().any(|c| !c.is_finite()) {
            return Err(Error::Numerical("vector field returned a non-finite or misshapen value".into()).into());
        }
        Ok(v)
    };
    let shifted = |k: &[f64], h: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + h * b).collect() };
    let k1 = eval(x)?;
    let k2 = eval(&shifted(&k1, dt / 2.0))?;
    let k3 = eval(&shifted(&k2, dt / 2.0))?;
    let k4 = eval(&shifted(&k3, dt))?;
    Ok((0..x.len())
        .map(|i| x[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

/// Omitted parameters take the classical values, so `{"system": "lorenz"}` is a
/// complete description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "system", rename_all = "snake_case", deny_unknown_fields)]
pub enum DynamicalSystem {
    Lorenz {
        #[serde(default = "defaults::sigma")]
        sigma: f64,
        #[serde(default = "defaults::rho")]
        rho: f64,
        #[serde(default = "defaults::lorenz_beta")]
        beta: f64,
    },
    /// Forced Duffing oscillator `ẍ + δẋ + αx + βx³ = γ cos ωt`, integrated as
    /// the autonomous state `(x, ẋ, cos ωt, sin ωt)`.
    Duffing {
        #[serde(default = "defaults::delta")]
        delta: f64,
        #[serde(default = "defaults::alpha")]
        alpha: f64,
        #[serde(default = "defaults::duffing_beta")]
        beta: f64,
        #[serde(default = "defaults::gamma")]
        gamma: f64,
        #[serde(default = "defaults::omega")]
        omega: f64,
    },
}

/// Command-line selector for a system with its classical parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(tag = "system", rename_all = "snake_case")]
pub enum SystemChoice {
    Lorenz,
    Duffing,
}

impl SystemChoice {
    pub fn system(self) -> DynamicalSystem {
        match self {
            SystemChoice::Lorenz => DynamicalSystem::lorenz(),
            SystemChoice::Duffing => DynamicalSystem::duffing(),
        }
    }
}

mod defaults {
    pub fn sigma() -> f64 {
        10.0
    }
    pub fn rho() -> f64 {
        28.0
    }
    pub fn lorenz_beta() -> f64 {
        8.0 / 3.0
    }
    pub fn delta() -> f64 {
        0.2
    }
    pub fn alpha() -> f64 {
        -1.0
    }
    pub fn duffing_beta() -> f64 {
        1.0
    }
    pub fn gamma() -> f64 {
        0.3
    }
    pub fn omega() -> f64 {
        1.2
    }
}

impl DynamicalSystem {
    pub fn lorenz() -> Self {
        DynamicalSystem::Lorenz {
            sigma: defaults::sigma(),
            rho: defaults::rho(),
            beta: defaults::lorenz_beta(),
        }
    }

    pub fn duffing() -> Self {
        DynamicalSystem::Duffing {
            delta: defaults::delta(),
            alpha: defaults::alpha(),
            beta: defaults::duffing_beta(),
            gamma: defaults::gamma(),
            omega: defaults::omega(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DynamicalSystem::Lorenz { .. } => 3,
            DynamicalSystem::Duffing { .. } => 4,
        }
    }

    pub fn field(&self, x: &[f64]) -> Vec<f64> {
        match *self {
            DynamicalSystem::Lorenz { sigma, rho, beta } => vec![
                sigma * (x[1] - x[0]),
                x[0] * (rho - x[2]) - x[1],
                x[0] * x[1] - beta * x[2],
            ],
            DynamicalSystem::Duffing {
                delta,
                alpha,
                beta,
                gamma,
                omega,
            } => vec![
                x[1],
                -delta * x[1] - alpha * x[0] - beta * x[0].powi(3) + gamma * x[2],
                -omega * x[3],
                omega * x[2],
            ],
        }
    }

    /// Completes a user-supplied initial state; Duffing accepts `(x, ẋ)` and
    /// starts the forcing phase at `t = 0`.
    pub fn initial_state(&self, x0: &[f64]) -> CliResult<Vec<f64>> {
        match (self, x0.len()) {
            (DynamicalSystem::Duffing { .. }, 2) => Ok(vec![x0[0], x0[1], 1.0, 0.0]),
            (_, n) if n == self.dim() => Ok(x0.to_vec()),
            (_, n) => Err(CliError::Config(format!(
                "initial state has {n} coordinates, the system needs {}",
                self.dim()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySpec {
    pub system: DynamicalSystem,
    pub x0: Vec<f64>,
    pub dt: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// `steps + 1` states starting at the initial condition.
    pub states: Vec<Vec<f64>>,
    pub pairs: SnapshotPairs,
}

/// Integrates with fixed-step RK4.
pub fn gen_trajectory(spec: &TrajectorySpec) -> CliResult<Trajectory> {
    if spec.steps == 0 {
        return Err(CliError::Config("a trajectory needs at least one step".into()));
    }
    let mut x = spec.system.initial_state(&spec.x0)?;
    let mut states = Vec::with_capacity(spec.steps + 1);
    states.push(x.clone());
    for step in 1..=spec.steps {
        x = rk4_step(|y| spec.system.field(y), &x, spec.dt)?;
        let magnitude = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !(magnitude <= DIVERGENCE_BOUND) {
            return Err(CliError::Divergence { step, magnitude });
        }
        states.push(x.clone());
    }
    let pairs = SnapshotPairs::from_trajectory(&states)?;
    Ok(Trajectory { states, pairs })
}

/// A seeded initial condition near the attractor of `system`.
pub fn random_initial_state(system: &DynamicalSystem, seed: u64) -> Vec<f64> {
    let mut r = rng::stream(seed, rng::INIT);
    match system {
        DynamicalSystem::Lorenz { .. } => {
            vec![r.random_range(-10.0..10.0), r.random_range(-10.0..10.0), r.random_range(10.0..30.0)]
        }
        DynamicalSystem::Duffing { .. } => vec![r.random_range(-1.5..1.5), r.random_range(-1.0..1.0)],
    }
}

/// Synthetic relational data with known answers.
#[derive(Debug, Clone, PartialEq)]
pub struct ReasoningData {
    pub store: EmbeddingStore,
    pub triples: Vec<ReasoningTriple>,
    /// Planted relation matrices, row-major `d × d`.
    pub planted: BTreeMap<String, Vec<f64>>,
    /// `(a, b, c, d)` with `f_d ≈ f_b − f_a + f_c`.
    pub quadruples: Vec<[String; 4]>,
    /// Chain starts `A` whose two-hop images under `r0` then `r1` are known.
    pub chains: Vec<(String, String)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReasoningSpec {
    pub dim: usize,
    pub relations: usize,
    pub pairs_per_relation: usize,
    pub quadruples: usize,
    pub fillers: usize,
    /// Analogy noise as a fraction of each embedding's norm.
    pub noise: f64,
}

impl Default for ReasoningSpec {
    fn default() -> Self {
        Self {
            dim: 8,
            relations: 2,
            pairs_per_relation: 24,
            quadruples: 20,
            fillers: 10,
            noise: 0.01,
        }
    }
}

fn gaussian_vec<R: Rng>(r: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| {
            let z: f64 = StandardNormal.sample(r);
            scale * z
        })
        .collect()
}

fn matvec(m: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    (0..d).map(|i| (0..d).map(|j| m[i * d + j] * x[j]).sum()).collect()
}

/// Planted relations `r0 … r{R−1}` with exact pairs, an `r0 → r1` chain over
/// shared entities, and noisy analogy quadruples built from shared offsets.
pub fn gen_reasoning(spec: &ReasoningSpec, seed: u64) -> CliResult<ReasoningData> {
    if spec.dim == 0 || spec.relations < 2 || spec.pairs_per_relation == 0 {
        return Err(CliError::Config("reasoning data needs dim ≥ 1, ≥ 2 relations and ≥ 1 pair".into()));
    }
    let d = spec.dim;
    let mut data_rng = rng::stream(seed, rng::DATA);
    let mut store = EmbeddingStore::new();
    let mut triples = Vec::new();
    let mut planted = BTreeMap::new();
    for r in 0..spec.relations {
        planted.insert(format!("r{r}"), gaussian_vec(&mut data_rng, d * d, 1.0 / (d as f64).sqrt()));
    }
    let (m0, m1) = (&planted["r0"], &planted["r1"]);
    let mut chains = Vec::new();
    for i in 0..spec.pairs_per_relation {
        let a = gaussian_vec(&mut data_rng, d, 1.0);
        let b = matvec(m0, &a);
        let c = matvec(m1, &b);
        let ids = [format!("chain{i}_a"), format!("chain{i}_b"), format!("chain{i}_c")];
        for (id, v) in ids.iter().zip([a, b, c]) {
            store.insert(id.clone(), v)?;
        }
        triples.push(ReasoningTriple::new(&ids[0], "r0", &ids[1]));
        triples.push(ReasoningTriple::new(&ids[1], "r1", &ids[2]));
        chains.push((ids[0].clone(), ids[2].clone()));
    }
    for r in 2..spec.relations {
        let m = &planted[&format!("r{r}")];
        for i in 0..spec.pairs_per_relation {
            let s = gaussian_vec(&mut data_rng, d, 1.0);
            let o = matvec(m, &s);
            let (sid, oid) = (format!("r{r}_s{i}"), format!("r{r}_o{i}"));
            store.insert(&sid, s)?;
            store.insert(&oid, o)?;
            triples.push(ReasoningTriple::new(sid, format!("r{r}"), oid));
        }
    }

    let mut analogy_rng = rng::stream(seed, rng::ANALOGY);
    let mut noise_rng = rng::stream(seed, rng::NOISE);
    let mut noisy = |v: Vec<f64>| -> Vec<f64> {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let z = gaussian_vec(&mut noise_rng, d, spec.noise * norm / (d as f64).sqrt());
        v.iter().zip(z).map(|(a, b)| a + b).collect()
    };
    for i in 0..spec.fillers {
        let f = gaussian_vec(&mut analogy_rng, d, 1.0);
        store.insert(format!("filler{i}"), noisy(f))?;
    }
    let offsets: Vec<Vec<f64>> = (0..4).map(|_| gaussian_vec(&mut analogy_rng, d, 1.0)).collect();
    let mut quadruples = Vec::new();
    for q in 0..spec.quadruples {
        let off = &offsets[q % offsets.len()];
        let a = gaussian_vec(&mut analogy_rng, d, 1.0);
        let c = gaussian_vec(&mut analogy_rng, d, 1.0);
        let b: Vec<f64> = a.iter().zip(off).map(|(x, o)| x + o).collect();
        let dd: Vec<f64> = c.iter().zip(off).map(|(x, o)| x + o).collect();
        let ids = [format!("q{q}_a"), format!("q{q}_b"), format!("q{q}_c"), format!("q{q}_d")];
        for (id, v) in ids.iter().zip([a, b, c, dd]) {
            store.insert(id.clone(), noisy(v))?;
        }
        quadruples.push(ids);
    }
    Ok(ReasoningData {
        store,
        triples,
        planted,
        quadruples,
        chains,
    })
}

/// A planted `k`-sparse instance with Gaussian `Φ` and `Ψ = I`.
#[derive(Debug, Clone)]
pub struct SparseInstance {
    pub system: SensingSystem,
    pub alpha: Vec<f64>,
    pub y: Vec<f64>,
}

/// Instance `index` of the seeded family: sensing matrix and signal draw from
/// separate child seeds.
pub fn sparse_instance(seed: u64, index: u32, n: usize, m: usize, k: usize) -> CliResult<SparseInstance> {
    let system = SensingSystem::gaussian(m, n, rng::derive_seed(seed, rng::TRIALS, 2 * index))?;
    let alpha = planted_sparse(n, k, rng::derive_seed(seed, rng::TRIALS, 2 * index + 1))?;
    let y = system.measure(&alpha)?;
    Ok(SparseInstance { system, alpha, y })
}
