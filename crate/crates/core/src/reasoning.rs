//! Reasoning as operator manipulation on entity embeddings.
//!
//! A relation `r` is a linear map `T_r` fitted so `T_r f_subject ≈ f_object`.
//! Chains of relations are operator products, relational similarity is a
//! tensor-product kernel, and analogies are vector arithmetic followed by
//! nearest-neighbour retrieval.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};
use crate::kernels::{eval_kernel, KernelDescriptor};
use crate::operator_learning::{apply_operator, fit_operator_ridge, hs_norm, ridge_objective, OperatorMatrix};

/// Entity id → embedding, all of one dimension.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "BTreeMap<String, Vec<f64>>", into = "BTreeMap<String, Vec<f64>>")]
pub struct EmbeddingStore {
    entities: BTreeMap<String, Vec<f64>>,
}

impl TryFrom<BTreeMap<String, Vec<f64>>> for EmbeddingStore {
    type Error = Error;

    fn try_from(map: BTreeMap<String, Vec<f64>>) -> Result<Self> {
        let mut store = EmbeddingStore::default();
        for (id, v) in map {
            store.insert(id, v)?;
        }
        Ok(store)
    }
}

impl From<EmbeddingStore> for BTreeMap<String, Vec<f64>> {
    fn from(s: EmbeddingStore) -> Self {
        s.entities
    }
}

impl EmbeddingStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces an embedding.
    pub fn insert(&mut self, id: impl Into<String>, embedding: Vec<f64>) -> Result<()> {
        if embedding.is_empty() {
            return Err(Error::InvalidParameter("embeddings must be non-empty".into()));
        }
        if let Some(d) = self.dim() {
            ensure_len("embedding dimension", d, embedding.len())?;
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("embedding has non-finite entries".into()));
        }
        self.entities.insert(id.into(), embedding);
        Ok(())
    }

    pub fn get(&self, id: &str) -> Result<&[f64]> {
        self.entities
            .get(id)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownId(id.to_string()))
    }

    pub fn dim(&self) -> Option<usize> {
        self.entities.values().next().map(Vec::len)
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.entities.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationOperator {
    pub relation: String,
    pub t: OperatorMatrix,
    /// Ridge parameter used at fit time; `None` for composed or hand-built operators.
    pub lambda: Option<f64>,
}

impl RelationOperator {
    pub fn new(relation: impl Into<String>, t: OperatorMatrix) -> Result<Self> {
        if t.d_in() != t.d_out() {
            return Err(Error::Conformability {
                what: "square relation operator",
                expected: t.d_out(),
                found: t.d_in(),
            });
        }
        Ok(Self {
            relation: relation.into(),
            t,
            lambda: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.t.d_in()
    }

    pub fn apply(&self, f: &[f64]) -> Result<Vec<f64>> {
        apply_operator(&self.t, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ReasoningTriple {
    pub subject: String,
    pub relation: String,
    pub object: String,
}

impl ReasoningTriple {
    pub fn new(subject: impl Into<String>, relation: impl Into<String>, object: impl Into<String>) -> Self {
        Self {
            subject: subject.into(),
            relation: relation.into(),
            object: object.into(),
        }
    }
}

const TRIPLE_HEADER: [&str; 3] = ["subject", "relation", "object"];

pub fn write_triples_csv<W: Write>(triples: &[ReasoningTriple], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(TRIPLE_HEADER)?;
    for t in triples {
        w.write_record([&t.subject, &t.relation, &t.object])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `subject,relation,object` rows; a leading header row is optional.
pub fn read_triples_csv<R: Read>(reader: R) -> Result<Vec<ReasoningTriple>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != 3 {
            return Err(Error::Parse(format!("row {row}: expected 3 columns, found {}", rec.len())));
        }
        if row == 0 && rec.iter().eq(TRIPLE_HEADER) {
            continue;
        }
        out.push(ReasoningTriple::new(&rec[0], &rec[1], &rec[2]));
    }
    Ok(out)
}

fn split_pairs(pairs: &[(Vec<f64>, Vec<f64>)]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    pairs.iter().cloned().unzip()
}

/// Ridge fit of a square relation operator from (subject, object) embedding pairs.
pub fn fit_relation(pairs: &[(Vec<f64>, Vec<f64>)], lambda: f64) -> Result<RelationOperator> {
    fit_named_relation("relation", pairs, lambda)
}

fn fit_named_relation(relation: &str, pairs: &[(Vec<f64>, Vec<f64>)], lambda: f64) -> Result<RelationOperator> {
    let (xs, ys) = split_pairs(pairs);
    if let (Some(x), Some(y)) = (xs.first(), ys.first()) {
        ensure_len("object embedding dimension", x.len(), y.len())?;
    }
    let t = fit_operator_ridge(&xs, &ys, lambda)?.with_tags("embedding", "embedding");
    let mut op = RelationOperator::new(relation, t)?;
    op.lambda = Some(lambda);
    Ok(op)
}

/// `Σ ‖T f_s − f_o‖² + λ ‖T‖²_HS` for one relation.
pub fn relation_objective(op: &RelationOperator, pairs: &[(Vec<f64>, Vec<f64>)], lambda: f64) -> Result<f64> {
    let (xs, ys) = split_pairs(pairs);
    ridge_objective(&op.t, &xs, &ys, lambda)
}

/// Apply `first`, then `second`: the product `T_second · T_first`.
pub fn compose(first: &RelationOperator, second: &RelationOperator) -> Result<RelationOperator> {
    ensure_len("composed operator dimension", first.dim(), second.dim())?;
    let t = OperatorMatrix::new(&second.t.entries * &first.t.entries)?.with_tags("embedding", "embedding");
    RelationOperator::new(format!("{}∘{}", second.relation, first.relation), t)
}

/// Elementwise reweighting `c_k ↦ γ_k c_k` of coefficients.
pub fn spectral_modulate(c: &[f64], gamma: &[f64]) -> Result<Vec<f64>> {
    ensure_len("modulation length", c.len(), gamma.len())?;
    Ok(c.iter().zip(gamma).map(|(a, g)| a * g).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnalogyMetric {
    #[default]
    Euclidean,
    /// `1 − cos(q, f)`.
    Cosine,
}

/// "`b` is to `a` as ? is to `c`": ranks entities by distance to `f_b − f_a + f_c`.
///
/// With `a = man`, `b = king`, `c = woman` the query is `king − man + woman`.
/// Ties are broken by id.
pub fn analogy(a: &str, b: &str, c: &str, store: &EmbeddingStore, exclude_inputs: bool) -> Result<Vec<(String, f64)>> {
    analogy_with_metric(a, b, c, store, exclude_inputs, AnalogyMetric::Euclidean)
}

pub fn analogy_with_metric(
    a: &str,
    b: &str,
    c: &str,
    store: &EmbeddingStore,
    exclude_inputs: bool,
    metric: AnalogyMetric,
) -> Result<Vec<(String, f64)>> {
    let (fa, fb, fc) = (store.get(a)?, store.get(b)?, store.get(c)?);
    let q: Vec<f64> = (0..fa.len()).map(|i| fb[i] - fa[i] + fc[i]).collect();
    let q_norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut ranked: Vec<(String, f64)> = store
        .iter()
        .filter(|(id, _)| !(exclude_inputs && (*id == a || *id == b || *id == c)))
        .map(|(id, f)| {
            let dist = match metric {
                AnalogyMetric::Euclidean => q.iter().zip(f).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
                AnalogyMetric::Cosine => {
                    let dot: f64 = q.iter().zip(f).map(|(x, y)| x * y).sum();
                    let f_norm = f.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if q_norm == 0.0 || f_norm == 0.0 {
                        1.0
                    } else {
                        1.0 - dot / (q_norm * f_norm)
                    }
                }
            };
            (id.to_string(), dist)
        })
        .collect();
    if ranked.is_empty() {
        return Err(Error::Empty("no analogy candidates left after excluding the inputs"));
    }
    ranked.sort_by(|x, y| x.1.total_cmp(&y.1).then_with(|| x.0.cmp(&y.0)));
    Ok(ranked)
}

/// `K_R((x,y),(x',y')) = K(x,x') K(y,y')`.
pub fn relational_kernel(
    pair1: (&[f64], &[f64]),
    pair2: (&[f64], &[f64]),
    base: &KernelDescriptor,
) -> Result<f64> {
    Ok(eval_kernel(base, pair1.0, pair2.0)? * eval_kernel(base, pair1.1, pair2.1)?)
}

/// `(1/|M|) Σ_{y ∈ M} k1(x, y) k2(y, z)`, the uniform empirical measure on the mediators.
pub fn compose_relational_kernel<K1, K2>(k1: K1, k2: K2, mediators: &[Vec<f64>], x: &[f64], z: &[f64]) -> Result<f64>
where
    K1: Fn(&[f64], &[f64]) -> Result<f64>,
    K2: Fn(&[f64], &[f64]) -> Result<f64>,
{
    if mediators.is_empty() {
        return Err(Error::Empty("kernel composition needs at least one mediator"));
    }
    let mut acc = 0.0;
    for y in mediators {
        acc += k1(x, y)? * k2(y, z)?;
    }
    Ok(acc / mediators.len() as f64)
}

/// [`compose_relational_kernel`] with both relation kernels equal to `base`.
pub fn compose_base_kernel(base: &KernelDescriptor, mediators: &[Vec<f64>], x: &[f64], z: &[f64]) -> Result<f64> {
    let k = |a: &[f64], b: &[f64]| eval_kernel(base, a, b);
    compose_relational_kernel(k, k, mediators, x, z)
}

/// Per-relation operators fitted from a set of triples.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RelationFamily {
    pub operators: BTreeMap<String, RelationOperator>,
    pub objectives: BTreeMap<String, f64>,
    pub total_objective: f64,
    pub lambda: f64,
}

impl RelationFamily {
    pub fn get(&self, relation: &str) -> Result<&RelationOperator> {
        self.operators
            .get(relation)
            .ok_or_else(|| Error::UnknownId(format!("relation {relation}")))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// `(subject, object)` embeddings of one triple.
pub type EmbeddingPair = (Vec<f64>, Vec<f64>);

/// Resolves triples against the store, grouped by relation id.
pub fn group_triples(
    triples: &[ReasoningTriple],
    store: &EmbeddingStore,
) -> Result<BTreeMap<String, Vec<EmbeddingPair>>> {
    let mut groups: BTreeMap<String, Vec<EmbeddingPair>> = BTreeMap::new();
    for (i, t) in triples.iter().enumerate() {
        let resolve = |id: &str| {
            store.get(id).map(<[f64]>::to_vec).map_err(|_| {
                Error::UnknownId(format!(
                    "{id} in triple {i} ({}, {}, {})",
                    t.subject, t.relation, t.object
                ))
            })
        };
        let pair = (resolve(&t.subject)?, resolve(&t.object)?);
        groups.entry(t.relation.clone()).or_default().push(pair);
    }
    Ok(groups)
}

/// Fits every relation independently; with the regularizer `Σ_r ‖T_r‖²_HS` the
/// joint objective is the sum of the per-relation ones.
pub fn fit_relation_family(triples: &[ReasoningTriple], store: &EmbeddingStore, lambda: f64) -> Result<RelationFamily> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("ridge λ must be > 0, got {lambda}")));
    }
    let mut family = RelationFamily {
        lambda,
        ..RelationFamily::default()
    };
    for (relation, pairs) in group_triples(triples, store)? {
        let op = fit_named_relation(&relation, &pairs, lambda)?;
        let obj = relation_objective(&op, &pairs, lambda)?;
        family.total_objective += obj;
        family.objectives.insert(relation.clone(), obj);
        family.operators.insert(relation, op);
    }
    Ok(family)
}

/// `‖T_{r₂}‖₂ ε₁ + ε₂` bound on a two-step chain, where `ε_i` are the per-relation
/// fit residuals on the chain's links.
pub fn chain_error_bound(second: &RelationOperator, eps_first: f64, eps_second: f64) -> f64 {
    let spectral_norm = second.t.entries.singular_values().max();
    debug_assert!(spectral_norm <= hs_norm(&second.t) + 1e-12);
    spectral_norm * eps_first + eps_second
}

/// Diagonal operator for a multiplier vector.
pub fn diagonal_operator(gamma: &[f64]) -> Result<OperatorMatrix> {
    OperatorMatrix::new(DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn basis(d: usize, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        e
    }

    fn dist(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
    }

    fn random_matrix(rng: &mut ChaCha8Rng, d: usize) -> DMatrix<f64> {
        DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0))
    }

    fn planted_pairs(rng: &mut ChaCha8Rng, m: &DMatrix<f64>, n: usize) -> Vec<(Vec<f64>, Vec<f64>)> {
        let d = m.nrows();
        (0..n)
            .map(|_| {
                let x = nalgebra::DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let y = m * &x;
                (x.iter().copied().collect(), y.iter().copied().collect())
            })
            .collect()
    }

    #[test]
    fn single_pair_fit() {
        let op = fit_relation(&[(basis(3, 0), basis(3, 1))], 1e-6).unwrap();
        assert!(dist(&op.apply(&basis(3, 0)).unwrap(), &basis(3, 1)) <= 1e-3);
        assert_eq!(op.lambda, Some(1e-6));
    }

    #[test]
    fn recovers_planted_rotation() {
        let (c, s) = (0.3f64.cos(), 0.3f64.sin());
        let rot = DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pairs = planted_pairs(&mut rng, &rot, 30);
        let op = fit_relation(&pairs, 1e-8).unwrap();
        assert!((&op.t.entries - rot).amax() <= 1e-4);
    }

    #[test]
    fn zero_objects_give_zero_operator() {
        let pairs = vec![(vec![1.0, 2.0], vec![0.0, 0.0]), (vec![-1.0, 0.5], vec![0.0, 0.0])];
        let op = fit_relation(&pairs, 0.1).unwrap();
        assert!(op.t.entries.iter().all(|&v| v == 0.0));
        assert!(fit_relation(&[(vec![1.0, 2.0], vec![1.0])], 0.1).is_err());
        assert!(fit_relation(&[], 0.1).is_err());
    }

    #[test]
    fn compose_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = RelationOperator::new("a", OperatorMatrix::new(random_matrix(&mut rng, 4)).unwrap()).unwrap();
        let id = RelationOperator::new("id", OperatorMatrix::identity(4)).unwrap();
        assert_eq!(compose(&a, &id).unwrap().t.entries, a.t.entries);
        assert_eq!(compose(&id, &a).unwrap().t.entries, a.t.entries);

        let b = RelationOperator::new("b", OperatorMatrix::new(random_matrix(&mut rng, 4)).unwrap()).unwrap();
        let c = RelationOperator::new("c", OperatorMatrix::new(random_matrix(&mut rng, 4)).unwrap()).unwrap();
        let left = compose(&compose(&a, &b).unwrap(), &c).unwrap();
        let right = compose(&a, &compose(&b, &c).unwrap()).unwrap();
        assert!((&left.t.entries - &right.t.entries).amax() <= 1e-10);

        // compose(first, second) applies first then second
        let f = [0.1, -0.7, 0.4, 2.0];
        let seq = b.apply(&a.apply(&f).unwrap()).unwrap();
        let both = compose(&a, &b).unwrap().apply(&f).unwrap();
        assert!(dist(&seq, &both) <= 1e-12);

        let small = RelationOperator::new("s", OperatorMatrix::identity(2)).unwrap();
        assert!(compose(&a, &small).is_err());
        assert!(RelationOperator::new("bad", OperatorMatrix::new(DMatrix::zeros(2, 3)).unwrap()).is_err());
    }

    #[test]
    fn transitive_chain_and_error_bound() {
        let d = 3;
        let r1 = fit_relation(&[(basis(d, 0), basis(d, 1))], 1e-6).unwrap();
        let r2 = fit_relation(&[(basis(d, 1), basis(d, 2))], 1e-6).unwrap();
        let chain = compose(&r1, &r2).unwrap();
        let out = chain.apply(&basis(d, 0)).unwrap();
        assert!(dist(&out, &basis(d, 2)) <= 1e-3);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m1 = random_matrix(&mut rng, 4);
            let m2 = random_matrix(&mut rng, 4);
            let p1 = planted_pairs(&mut rng, &m1, 12);
            let p2 = planted_pairs(&mut rng, &m2, 12);
            let lambda = rng.random_range(1e-4..1e-1);
            let t1 = fit_relation(&p1, lambda).unwrap();
            let t2 = fit_relation(&p2, lambda).unwrap();
            let f_a: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let f_b: Vec<f64> = (&m1 * nalgebra::DVector::from_column_slice(&f_a)).iter().copied().collect();
            let f_c: Vec<f64> = (&m2 * nalgebra::DVector::from_column_slice(&f_b)).iter().copied().collect();
            let eps1 = dist(&t1.apply(&f_a).unwrap(), &f_b);
            let eps2 = dist(&t2.apply(&f_b).unwrap(), &f_c);
            let err = dist(&compose(&t1, &t2).unwrap().apply(&f_a).unwrap(), &f_c);
            assert!(err <= chain_error_bound(&t2, eps1, eps2) + 1e-12);
        }
    }

    #[test]
    fn spectral_modulation() {
        let c = [1.0, -2.0, 3.5, 0.25];
        assert_eq!(spectral_modulate(&c, &[1.0; 4]).unwrap(), c.to_vec());
        let one_hot = spectral_modulate(&c, &basis(4, 2)).unwrap();
        assert_eq!(one_hot, vec![0.0, 0.0, 3.5, 0.0]);
        assert!(spectral_modulate(&c, &[1.0; 3]).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..50 {
            let n = rng.random_range(1..20);
            let c: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let g: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();
            let direct = spectral_modulate(&c, &g).unwrap();
            let via_matrix = apply_operator(&diagonal_operator(&g).unwrap(), &c).unwrap();
            assert_eq!(direct, via_matrix);
        }
    }

    fn king_queen_store() -> EmbeddingStore {
        let mut s = EmbeddingStore::new();
        let king = vec![0.9, 0.8, 0.1];
        let man = vec![0.1, 0.9, 0.0];
        let woman = vec![0.1, 0.1, 0.9];
        let queen: Vec<f64> = (0..3).map(|i| king[i] - man[i] + woman[i]).collect();
        s.insert("king", king).unwrap();
        s.insert("man", man).unwrap();
        s.insert("woman", woman).unwrap();
        s.insert("queen", queen).unwrap();
        s.insert("apple", vec![-1.0, 0.3, 0.3]).unwrap();
        s
    }

    #[test]
    fn analogy_examples() {
        let s = king_queen_store();
        let ranked = analogy("man", "king", "woman", &s, true).unwrap();
        assert_eq!(ranked[0].0, "queen");
        assert!(ranked[0].1 <= 1e-12);
        assert_eq!(ranked.len(), 2);

        let same = analogy("man", "man", "woman", &s, false).unwrap();
        assert_eq!(same[0].0, "woman");
        assert_eq!(same[0].1, 0.0);

        let cos = analogy_with_metric("man", "king", "woman", &s, true, AnalogyMetric::Cosine).unwrap();
        assert_eq!(cos[0].0, "queen");

        assert!(matches!(analogy("man", "king", "nobody", &s, true), Err(Error::UnknownId(_))));
        let mut tiny = EmbeddingStore::new();
        tiny.insert("a", vec![1.0]).unwrap();
        assert!(matches!(analogy("a", "a", "a", &tiny, true), Err(Error::Empty(_))));
    }

    #[test]
    fn analogy_ties_break_by_id_and_ignore_insertion_order() {
        let entries = [("b", vec![1.0, 0.0]), ("a", vec![-1.0, 0.0]), ("c", vec![0.0, 1.0]), ("q", vec![0.0, 0.0])];
        let mut forward = EmbeddingStore::new();
        let mut backward = EmbeddingStore::new();
        for (id, v) in &entries {
            forward.insert(*id, v.clone()).unwrap();
        }
        for (id, v) in entries.iter().rev() {
            backward.insert(*id, v.clone()).unwrap();
        }
        let r1 = analogy("q", "q", "q", &forward, true).unwrap();
        let r2 = analogy("q", "q", "q", &backward, true).unwrap();
        assert_eq!(r1, r2);
        let ids: Vec<&str> = r1.iter().map(|(id, _)| id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b", "c"]);
    }

    #[test]
    fn analogy_on_noisy_synthetic_store() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = 32;
        let mut gauss = |scale: f64| -> Vec<f64> {
            (0..d).map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            }).collect::<Vec<f64>>()
        };
        let mut store = EmbeddingStore::new();
        let mut quads = Vec::new();
        // 10 base entities plus 20 planted quadruples sharing offsets
        for i in 0..10 {
            store.insert(format!("filler{i}"), gauss(1.0)).unwrap();
        }
        let offsets: Vec<Vec<f64>> = (0..4).map(|_| gauss(1.0)).collect();
        let mut clean: Vec<(String, Vec<f64>)> = Vec::new();
        for q in 0..20 {
            let off = &offsets[q % offsets.len()];
            let a = gauss(1.0);
            let c = gauss(1.0);
            let b: Vec<f64> = a.iter().zip(off).map(|(x, o)| x + o).collect();
            let dd: Vec<f64> = c.iter().zip(off).map(|(x, o)| x + o).collect();
            let ids = [format!("a{q}"), format!("b{q}"), format!("c{q}"), format!("d{q}")];
            for (id, v) in ids.iter().zip([a, b, c, dd]) {
                clean.push((id.clone(), v));
            }
            quads.push(ids);
        }
        let mut noise_rng = ChaCha8Rng::seed_from_u64(6);
        for (id, v) in clean {
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let noisy: Vec<f64> = v
                .iter()
                .map(|x| {
                    let z: f64 = StandardNormal.sample(&mut noise_rng);
                    x + 0.01 * norm / (d as f64).sqrt() * z
                })
                .collect();
            store.insert(id, noisy).unwrap();
        }
        let hits = quads
            .iter()
            .filter(|[a, b, c, dd]| analogy(a, b, c, &store, true).unwrap()[0].0 == *dd)
            .count();
        assert!(hits as f64 / quads.len() as f64 >= 0.95, "{hits}/20");
    }

    #[test]
    fn relational_kernel_examples() {
        let x = [0.2, -0.4, 1.0];
        let y = [1.5, 0.0, -0.3];
        let rbf = KernelDescriptor::gaussian(0.8, 3).unwrap();
        assert_eq!(relational_kernel((&x, &y), (&x, &y), &rbf).unwrap(), 1.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for d in 1..=4 {
            let lin = KernelDescriptor::linear(d).unwrap();
            let v = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..d).map(|_| rng.random_range(-1.0..1.0)).collect() };
            let (x, y, xp, yp) = (v(&mut rng), v(&mut rng), v(&mut rng), v(&mut rng));
            let tensor = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().flat_map(|ai| b.iter().map(move |bj| ai * bj)).collect() };
            let oracle: f64 = tensor(&x, &y).iter().zip(tensor(&xp, &yp)).map(|(p, q)| p * q).sum();
            let k = relational_kernel((&x, &y), (&xp, &yp), &lin).unwrap();
            assert!((k - oracle).abs() <= 1e-12);
            assert_eq!(k, relational_kernel((&xp, &yp), (&x, &y), &lin).unwrap());
        }
        let lin = KernelDescriptor::linear(3).unwrap();
        assert!(relational_kernel((&x, &y), (&x[..2], &y), &lin).is_err());
    }

    #[test]
    fn kernel_composition_examples() {
        let rbf = KernelDescriptor::gaussian(1.0, 2).unwrap();
        let x = [0.1, 0.2];
        let z = [-0.5, 0.9];
        let m = vec![vec![0.3, 0.3]];
        let one = compose_base_kernel(&rbf, &m, &x, &z).unwrap();
        let want = eval_kernel(&rbf, &x, &m[0]).unwrap() * eval_kernel(&rbf, &m[0], &z).unwrap();
        assert_eq!(one, want);

        let ones = |_: &[f64], _: &[f64]| Ok(1.0);
        let meds = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![0.0, 0.0]];
        assert_eq!(compose_relational_kernel(ones, ones, &meds, &x, &z).unwrap(), 1.0);
        assert!(compose_relational_kernel(ones, ones, &[], &x, &z).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let meds: Vec<Vec<f64>> = (0..10).map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let poly = KernelDescriptor::polynomial(2, 1.0, 2).unwrap();
        let k1 = |a: &[f64], b: &[f64]| eval_kernel(&rbf, a, b);
        let k2 = |a: &[f64], b: &[f64]| eval_kernel(&poly, a, b);
        let got = compose_relational_kernel(k1, k2, &meds, &x, &z).unwrap();
        let mut oracle = 0.0;
        for y in &meds {
            let r = ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)) / 2.0;
            oracle += (-r).exp() * (y[0] * z[0] + y[1] * z[1] + 1.0).powi(2);
        }
        oracle /= 10.0;
        assert!((got - oracle).abs() <= 1e-12, "{got} vs {oracle}");
    }

    fn planted_family(rng: &mut ChaCha8Rng) -> (EmbeddingStore, Vec<ReasoningTriple>, DMatrix<f64>, DMatrix<f64>) {
        let d = 3;
        let m1 = random_matrix(rng, d);
        let m2 = random_matrix(rng, d);
        let mut store = EmbeddingStore::new();
        let mut triples = Vec::new();
        for (r, m) in [("r1", &m1), ("r2", &m2)] {
            for i in 0..8 {
                let x = nalgebra::DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
                let y = m * &x;
                let (s, o) = (format!("{r}_s{i}"), format!("{r}_o{i}"));
                store.insert(&s, x.iter().copied().collect()).unwrap();
                store.insert(&o, y.iter().copied().collect()).unwrap();
                triples.push(ReasoningTriple::new(s, r, o));
            }
        }
        (store, triples, m1, m2)
    }

    #[test]
    fn family_recovers_planted_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (store, triples, m1, m2) = planted_family(&mut rng);
        let fam = fit_relation_family(&triples, &store, 1e-9).unwrap();
        assert!((&fam.get("r1").unwrap().t.entries - m1).amax() <= 1e-4);
        assert!((&fam.get("r2").unwrap().t.entries - m2).amax() <= 1e-4);
        let sum: f64 = fam.objectives.values().sum();
        assert_eq!(fam.total_objective, sum);

        let back = RelationFamily::from_json(&fam.to_json().unwrap()).unwrap();
        assert_eq!(back, fam);
    }

    #[test]
    fn family_equals_joint_block_fit() {
        // the joint problem over [T_r1 T_r2] with one-hot relation features
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let (store, triples, _, _) = planted_family(&mut rng);
        let lambda = 0.05;
        let fam = fit_relation_family(&triples, &store, lambda).unwrap();
        let rels = ["r1", "r2"];
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for t in &triples {
            let r = rels.iter().position(|r| *r == t.relation).unwrap();
            let mut x = vec![0.0; 6];
            x[3 * r..3 * r + 3].copy_from_slice(store.get(&t.subject).unwrap());
            xs.push(x);
            ys.push(store.get(&t.object).unwrap().to_vec());
        }
        let joint = fit_operator_ridge(&xs, &ys, lambda).unwrap();
        for (r, rel) in rels.iter().enumerate() {
            let block = joint.entries.columns(3 * r, 3);
            assert!((block - &fam.get(rel).unwrap().t.entries).amax() <= 1e-12);
        }
        let joint_obj = ridge_objective(&joint, &xs, &ys, lambda).unwrap();
        assert!((joint_obj - fam.total_objective).abs() <= 1e-12 * joint_obj.max(1.0));
    }

    #[test]
    fn family_edge_cases() {
        let s = king_queen_store();
        let empty = fit_relation_family(&[], &s, 1.0).unwrap();
        assert!(empty.operators.is_empty());
        assert_eq!(empty.total_objective, 0.0);

        let one = [ReasoningTriple::new("man", "royal", "king")];
        let fam = fit_relation_family(&one, &s, 0.3).unwrap();
        let direct = fit_relation(&[(s.get("man").unwrap().to_vec(), s.get("king").unwrap().to_vec())], 0.3).unwrap();
        assert_eq!(fam.get("royal").unwrap().t.entries, direct.t.entries);

        let bad = [ReasoningTriple::new("man", "royal", "emperor")];
        match fit_relation_family(&bad, &s, 0.3) {
            Err(Error::UnknownId(msg)) => assert!(msg.contains("emperor") && msg.contains("triple 0")),
            other => panic!("unexpected {other:?}"),
        }
        assert!(fit_relation_family(&one, &s, 0.0).is_err());
    }

    #[test]
    fn store_and_triple_io() {
        let s = king_queen_store();
        let back = EmbeddingStore::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back, s);
        assert!(EmbeddingStore::from_json(r#"{"a":[1.0,2.0],"b":[1.0]}"#).is_err());
        let mut s2 = s.clone();
        assert!(s2.insert("x", vec![1.0]).is_err());

        let triples = vec![ReasoningTriple::new("a", "r", "b"), ReasoningTriple::new("b", "r", "c")];
        let mut buf = Vec::new();
        write_triples_csv(&triples, &mut buf).unwrap();
        assert_eq!(read_triples_csv(buf.as_slice()).unwrap(), triples);
        assert_eq!(read_triples_csv("a,r,b\nb,r,c\n".as_bytes()).unwrap(), triples);
        assert!(read_triples_csv("a,r\n".as_bytes()).is_err());
    }
}
