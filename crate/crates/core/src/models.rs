//! The four randomized update laws (AAGA, BGA, SAGA, PBGA).
//!
//! Each law fixes the distribution of the random Laplacian `L(t)`; draws are
//! i.i.d. across time. Every realization is a Laplacian whose off-diagonal
//! coefficients `a_ij` equal the mixing weight `q`, so rows of `I - L` stay
//! stochastic. This module samples realizations, enumerates the exact support
//! on small instances, and computes the moment matrices `E[L]`, `E[L*L]` and
//! `E[L*11*L]` that enter the certification condition.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{structural, Error, Result};
use crate::graph::{generate, laplacian_of, matrix_to_rows, GraphKind, Matrix, WeightedGraph};

/// Default cap on exact support enumeration.
pub const DEFAULT_EVENT_BUDGET: usize = 1 << 20;

const LAW_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    /// Asynchronous asymmetric gossip: one directed edge per step.
    Aaga,
    /// Broadcast gossip: one node broadcasts to all its neighbors.
    Bga,
    /// Synchronous asymmetric gossip: every node reads one neighbor.
    Saga,
    /// Probabilistic broadcast: each neighbor receives independently.
    Pbga,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Aaga => "AAGA",
            ModelKind::Bga => "BGA",
            ModelKind::Saga => "SAGA",
            ModelKind::Pbga => "PBGA",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "AAGA" => Ok(ModelKind::Aaga),
            "BGA" => Ok(ModelKind::Bga),
            "SAGA" => Ok(ModelKind::Saga),
            "PBGA" => Ok(ModelKind::Pbga),
            _ => Err(Error::Config(format!("unknown model kind `{s}`"))),
        }
    }
}

/// One off-diagonal coefficient `a_row,col` of a realization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coefficient {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// A realization of `L(t)`, stored as its off-diagonal coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianEvent {
    /// Probability of this realization, or `-1` for a sampled draw.
    pub probability: f64,
    pub coefficients: Vec<Coefficient>,
}

impl LaplacianEvent {
    pub fn laplacian(&self, n: usize) -> Matrix {
        let mut l = Matrix::zeros(n, n);
        for c in &self.coefficients {
            l[(c.row, c.col)] -= c.value;
            l[(c.row, c.row)] += c.value;
        }
        l
    }

    /// Self-confidence `a_ii = 1 - sum_{j != i} a_ij` for every node.
    pub fn self_weights(&self, n: usize) -> Vec<f64> {
        let mut a = vec![1.0; n];
        for c in &self.coefficients {
            a[c.row] -= c.value;
        }
        a
    }

    /// `x <- x - L x`, using the pre-update state on the right-hand side.
    pub fn apply(&self, x: &mut [f64]) {
        apply_coefficients(&self.coefficients, x, &mut Vec::new());
    }
}

/// Applies `x <- x - L x` for the coefficients of one realization. `scratch`
/// is reused across calls to avoid allocation.
pub fn apply_coefficients(coefs: &[Coefficient], x: &mut [f64], scratch: &mut Vec<(usize, f64)>) {
    scratch.clear();
    scratch.extend(coefs.iter().map(|c| (c.row, c.value * (x[c.col] - x[c.row]))));
    for &(row, delta) in scratch.iter() {
        x[row] += delta;
    }
}

/// Deterministic counter-based generator for `(master_seed, stream_id)`.
pub fn stream_rng(master_seed: u64, stream_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id);
    rng
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GraphSpec {
    Explicit(WeightedGraph),
    Generated {
        family: String,
        n: usize,
        #[serde(default = "unit_weight")]
        weight: f64,
        #[serde(default)]
        seed: u64,
    },
}

fn unit_weight() -> f64 {
    1.0
}

impl GraphSpec {
    pub fn build(&self) -> Result<WeightedGraph> {
        match self {
            GraphSpec::Explicit(g) => Ok(g.clone()),
            GraphSpec::Generated { family, n, weight, seed } => {
                generate(family.parse::<GraphKind>()?, *n, *weight, *seed)
            }
        }
    }
}

/// JSON form of a model: `{"kind": "BGA", "q": 0.5, "graph": {...}}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub q: f64,
    pub graph: GraphSpec,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub allow_degenerate: bool,
}

impl ModelSpec {
    pub fn build(&self) -> Result<UpdateModel> {
        let graph = self.graph.build()?;
        if self.allow_degenerate {
            UpdateModel::degenerate(self.kind, graph, self.q)
        } else {
            UpdateModel::new(self.kind, graph, self.q)
        }
    }
}

/// Precomputed sampling tables.
#[derive(Debug, Clone)]
enum Sampler {
    /// Cumulative distribution over `(i, j)` pairs with positive weight.
    Edges(Vec<(usize, usize)>, Vec<f64>),
    /// Per broadcaster `j`: receivers `i` and their reception probabilities.
    Broadcast(Vec<Vec<(usize, f64)>>),
    /// Per reader `i`: candidate sources and cumulative probabilities.
    Rows(Vec<(Vec<usize>, Vec<f64>)>),
}

#[derive(Debug, Clone)]
pub struct UpdateModel {
    kind: ModelKind,
    graph: WeightedGraph,
    q: f64,
    sampler: Sampler,
}

impl UpdateModel {
    /// Validates the law's constraints on `W`; `q` must lie in the open interval (0, 1).
    pub fn new(kind: ModelKind, graph: WeightedGraph, q: f64) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(structural(format!(
                "mixing weight q = {q} must lie in (0,1); at q = 1 a node can forget its own value \
                 entirely and no finite certificate exists (two-node AAGA is the standard example)"
            )));
        }
        Self::build(kind, graph, q)
    }

    /// Permits `q = 1`, for oracle experiments on the degenerate case.
    pub fn degenerate(kind: ModelKind, graph: WeightedGraph, q: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(structural(format!("mixing weight q = {q} must lie in (0,1]")));
        }
        Self::build(kind, graph, q)
    }

    fn build(kind: ModelKind, graph: WeightedGraph, q: f64) -> Result<Self> {
        let n = graph.n();
        let w = graph.weights();
        let sampler = match kind {
            ModelKind::Aaga => {
                let total = w.sum();
                if (total - 1.0).abs() > LAW_TOL {
                    return Err(structural(format!("AAGA needs total edge mass 1, got {total}")));
                }
                let mut pairs = Vec::new();
                let mut cdf = Vec::new();
                let mut acc = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if w[(i, j)] > 0.0 {
                            acc += w[(i, j)];
                            pairs.push((i, j));
                            cdf.push(acc);
                        }
                    }
                }
                Sampler::Edges(pairs, cdf)
            }
            ModelKind::Bga | ModelKind::Pbga => {
                for &v in w.iter() {
                    let ok = match kind {
                        ModelKind::Bga => v == 0.0 || v == 1.0,
                        _ => v <= 1.0,
                    };
                    if !ok {
                        return Err(structural(format!(
                            "{kind} weight {v} outside its allowed range ({})",
                            if kind == ModelKind::Bga { "{0,1}" } else { "[0,1]" }
                        )));
                    }
                }
                Sampler::Broadcast(
                    (0..n).map(|j| graph.in_neighbors(j).map(|i| (i, w[(i, j)])).collect()).collect(),
                )
            }
            ModelKind::Saga => {
                let mut rows = Vec::with_capacity(n);
                for i in 0..n {
                    let sum: f64 = w.row(i).sum();
                    if sum == 0.0 {
                        return Err(structural(format!("SAGA row {i} has no neighbor to read from")));
                    }
                    if (sum - 1.0).abs() > LAW_TOL {
                        return Err(structural(format!("SAGA needs unit row sums, row {i} sums to {sum}")));
                    }
                    let mut cols = Vec::new();
                    let mut cdf = Vec::new();
                    let mut acc = 0.0;
                    for j in 0..n {
                        if w[(i, j)] > 0.0 {
                            acc += w[(i, j)];
                            cols.push(j);
                            cdf.push(acc);
                        }
                    }
                    rows.push((cols, cdf));
                }
                Sampler::Rows(rows)
            }
        };
        Ok(Self { kind, graph, q, sampler })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn graph(&self) -> &WeightedGraph {
        &self.graph
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn spec(&self) -> ModelSpec {
        ModelSpec {
            kind: self.kind,
            q: self.q,
            graph: GraphSpec::Explicit(self.graph.clone()),
            allow_degenerate: self.q >= 1.0,
        }
    }

    /// One draw of `L(t)`; the event's probability field is `-1`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> LaplacianEvent {
        let mut coefficients = Vec::new();
        self.sample_into(rng, &mut coefficients);
        LaplacianEvent { probability: -1.0, coefficients }
    }

    /// Writes the coefficients of one draw into `out` (cleared first).
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<Coefficient>) {
        out.clear();
        let q = self.q;
        match &self.sampler {
            Sampler::Edges(pairs, cdf) => {
                let (i, j) = pairs[pick(cdf, rng)];
                if i != j {
                    out.push(Coefficient { row: i, col: j, value: q });
                }
            }
            Sampler::Broadcast(receivers) => {
                let j = rng.gen_range(0..receivers.len());
                for &(i, p) in &receivers[j] {
                    if p >= 1.0 || rng.gen::<f64>() < p {
                        out.push(Coefficient { row: i, col: j, value: q });
                    }
                }
            }
            Sampler::Rows(rows) => {
                for (i, (cols, cdf)) in rows.iter().enumerate() {
                    let j = cols[pick(cdf, rng)];
                    if j != i {
                        out.push(Coefficient { row: i, col: j, value: q });
                    }
                }
            }
        }
    }

    /// Number of raw outcomes the sampler can produce (before merging equal realizations).
    pub fn support_size(&self) -> u128 {
        match &self.sampler {
            Sampler::Edges(pairs, _) => pairs.len() as u128,
            Sampler::Broadcast(receivers) => receivers
                .iter()
                .map(|r| {
                    let random = r.iter().filter(|(_, p)| *p < 1.0).count() as u32;
                    1u128.checked_shl(random).unwrap_or(u128::MAX)
                })
                .fold(0u128, u128::saturating_add),
            Sampler::Rows(rows) => rows
                .iter()
                .map(|(cols, _)| cols.len() as u128)
                .fold(1u128, u128::saturating_mul),
        }
    }

    /// Exact support of the law with probabilities; identical realizations
    /// are merged so the returned events are pairwise distinct.
    pub fn enumerate_events(&self, budget: usize) -> Result<Vec<LaplacianEvent>> {
        let support = self.support_size();
        if support > budget as u128 {
            return Err(Error::Capacity { support, budget });
        }
        let n = self.n();
        let q = self.q;
        let w = self.graph.weights();
        let mut raw: Vec<(f64, Vec<Coefficient>)> = Vec::with_capacity(support as usize);
        match &self.sampler {
            Sampler::Edges(pairs, _) => {
                for &(i, j) in pairs {
                    let coefs = if i != j { vec![Coefficient { row: i, col: j, value: q }] } else { vec![] };
                    raw.push((w[(i, j)], coefs));
                }
            }
            Sampler::Broadcast(receivers) => {
                let pj = 1.0 / n as f64;
                for (j, recv) in receivers.iter().enumerate() {
                    let sure: Vec<usize> = recv.iter().filter(|(_, p)| *p >= 1.0).map(|(i, _)| *i).collect();
                    let random: Vec<(usize, f64)> = recv.iter().copied().filter(|(_, p)| *p < 1.0).collect();
                    for mask in 0u64..(1u64 << random.len()) {
                        let mut prob = pj;
                        let mut rows = sure.clone();
                        for (bit, &(i, p)) in random.iter().enumerate() {
                            if mask >> bit & 1 == 1 {
                                prob *= p;
                                rows.push(i);
                            } else {
                                prob *= 1.0 - p;
                            }
                        }
                        rows.sort_unstable();
                        let coefs = rows.into_iter().map(|i| Coefficient { row: i, col: j, value: q }).collect();
                        raw.push((prob, coefs));
                    }
                }
            }
            Sampler::Rows(rows) => {
                let mut choice = vec![0usize; n];
                loop {
                    let mut prob = 1.0;
                    let mut coefs = Vec::new();
                    for (i, (cols, _)) in rows.iter().enumerate() {
                        let j = cols[choice[i]];
                        prob *= w[(i, j)];
                        if j != i {
                            coefs.push(Coefficient { row: i, col: j, value: q });
                        }
                    }
                    raw.push((prob, coefs));
                    // Odometer increment over the per-row choices.
                    let mut k = 0;
                    while k < n {
                        choice[k] += 1;
                        if choice[k] < rows[k].0.len() {
                            break;
                        }
                        choice[k] = 0;
                        k += 1;
                    }
                    if k == n {
                        break;
                    }
                }
            }
        }

        let mut merged: BTreeMap<Vec<(usize, usize, u64)>, (f64, Vec<Coefficient>)> = BTreeMap::new();
        for (prob, coefs) in raw {
            let key = coefs.iter().map(|c| (c.row, c.col, c.value.to_bits())).collect();
            merged.entry(key).or_insert((0.0, coefs)).0 += prob;
        }
        let events: Vec<LaplacianEvent> = merged
            .into_values()
            .filter(|(p, _)| *p > 0.0)
            .map(|(probability, coefficients)| LaplacianEvent { probability, coefficients })
            .collect();
        check_distribution(&events, 1e-12)?;
        Ok(events)
    }

    /// Exact `E[L]` from the law's closed form (valid for every model).
    pub fn closed_form_mean(&self) -> Matrix {
        let lw = laplacian_of(self.graph.weights()).expect("square");
        match self.kind {
            ModelKind::Aaga | ModelKind::Saga => lw * self.q,
            ModelKind::Bga | ModelKind::Pbga => lw * (self.q / self.n() as f64),
        }
    }

    /// Exact moments, by closed form where one applies and by enumeration otherwise.
    pub fn exact_moments(&self) -> Result<MomentSet> {
        let q = self.q;
        let n = self.n() as f64;
        let w = self.graph.weights();
        let lw = laplacian_of(w)?;
        match self.kind {
            ModelKind::Aaga => {
                // Event (i,j) gives L = q e_i (e_i - e_j)*, so L*L = L*11*L = q^2 (e_i-e_j)(e_i-e_j)*.
                let second = laplacian_of(&(w + w.transpose()))? * (q * q);
                Ok(MomentSet::new(&lw * q, second.clone(), second, MomentSource::ClosedForm))
            }
            ModelKind::Saga => {
                // Rows r_i of L are independent, so cross terms factor into row means.
                let sym = laplacian_of(&(w + w.transpose()))? * (q * q);
                let mean = &lw * q;
                let col_sums = mean.transpose() * nalgebra::DVector::from_element(self.n(), 1.0);
                let el11l = &sym + &col_sums * col_sums.transpose() - mean.transpose() * &mean;
                Ok(MomentSet::new(mean, sym, el11l, MomentSource::ClosedForm))
            }
            ModelKind::Pbga if self.graph.is_symmetric(1e-12) => {
                let sq = w.component_mul(w);
                let c = q * q / n;
                let el = &lw * (q / n);
                let ell = &lw * (2.0 * c);
                let el11l = (&lw * &lw) * c + &lw * (2.0 * c) - laplacian_of(&sq)? * (2.0 * c);
                Ok(MomentSet::new(el, ell, el11l, MomentSource::ClosedForm))
            }
            _ => self.exact_moments_by_enumeration(DEFAULT_EVENT_BUDGET),
        }
    }

    pub fn exact_moments_by_enumeration(&self, budget: usize) -> Result<MomentSet> {
        MomentSet::from_events(&self.enumerate_events(budget)?, self.n())
    }

    /// Sample means of `L`, `L*L` and `L*11*L` over independent draws.
    pub fn empirical_moments(&self, trials: usize, seed: u64) -> Result<MomentSet> {
        if trials == 0 {
            return Err(structural("empirical moments need at least one trial"));
        }
        let n = self.n();
        let mut rng = stream_rng(seed, 0);
        let mut acc = MomentAccumulator::new(n);
        let mut coefs = Vec::new();
        for _ in 0..trials {
            self.sample_into(&mut rng, &mut coefs);
            acc.add(&coefs, 1.0);
        }
        Ok(acc.finish(1.0 / trials as f64, MomentSource::Empirical { trials }))
    }

    /// Almost-sure structural constants of the law.
    pub fn structure_bounds(&self) -> StructureBounds {
        let q = self.q;
        let n = self.n() as f64;
        let stats = self.graph.stats();
        let d_col = stats.d_max_col as f64;
        let alpha_min = 1.0 - q;
        match self.kind {
            ModelKind::Aaga => StructureBounds {
                alpha_min,
                a_total_max: q,
                a_ind_max: q,
                a_row_max: q,
                a_col_max: q,
            },
            ModelKind::Bga | ModelKind::Pbga => StructureBounds {
                alpha_min,
                a_total_max: q * d_col,
                a_ind_max: q,
                a_row_max: q,
                a_col_max: q * d_col,
            },
            ModelKind::Saga => StructureBounds {
                alpha_min,
                a_total_max: q * n,
                a_ind_max: q,
                a_row_max: q,
                a_col_max: q * d_col,
            },
        }
    }

    /// Largest covariance among coefficient pairs that `case` requires to be
    /// uncorrelated, computed from the enumerated law.
    pub fn covariance_structure(&self, case: CorrelationCase, budget: usize) -> Result<CovarianceVerdict> {
        let events = self.enumerate_events(budget)?;
        let n = self.n();
        let idx = |i: usize, j: usize| i * n + j;
        let mut mean = vec![0.0; n * n];
        let mut joint = vec![0.0; n * n * n * n];
        for e in &events {
            for a in &e.coefficients {
                mean[idx(a.row, a.col)] += e.probability * a.value;
                for b in &e.coefficients {
                    joint[idx(a.row, a.col) * n * n + idx(b.row, b.col)] += e.probability * a.value * b.value;
                }
            }
        }
        let mut max_violation = 0.0f64;
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                for k in 0..n {
                    for l in (0..n).filter(|&l| l != k) {
                        let required = match case {
                            CorrelationCase::Coefficients => (i, j) != (k, l),
                            CorrelationCase::Updates => i != k,
                            CorrelationCase::Transmissions => j != l,
                        };
                        if required {
                            let cov = joint[idx(i, j) * n * n + idx(k, l)] - mean[idx(i, j)] * mean[idx(k, l)];
                            max_violation = max_violation.max(cov.abs());
                        }
                    }
                }
            }
        }
        Ok(CovarianceVerdict { holds: max_violation <= 1e-12, max_violation })
    }
}

fn pick<R: Rng + ?Sized>(cdf: &[f64], rng: &mut R) -> usize {
    let total = *cdf.last().expect("non-empty distribution");
    let u = rng.gen::<f64>() * total;
    cdf.partition_point(|&c| c <= u).min(cdf.len() - 1)
}

/// Probabilities must be nonnegative and sum to one within `tol`.
pub fn check_distribution(events: &[LaplacianEvent], tol: f64) -> Result<()> {
    if events.iter().any(|e| !(e.probability >= 0.0)) {
        return Err(structural("event probabilities must be nonnegative"));
    }
    let total: f64 = events.iter().map(|e| e.probability).sum();
    if (total - 1.0).abs() > tol {
        return Err(structural(format!("event probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// Which coefficient pairs must be uncorrelated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CorrelationCase {
    /// (a) every pair of distinct coefficients.
    #[serde(rename = "a")]
    Coefficients,
    /// (b) coefficients in different rows (different receivers).
    #[serde(rename = "b")]
    Updates,
    /// (c) coefficients in different columns (different senders).
    #[serde(rename = "c")]
    Transmissions,
}

impl std::str::FromStr for CorrelationCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(CorrelationCase::Coefficients),
            "b" => Ok(CorrelationCase::Updates),
            "c" => Ok(CorrelationCase::Transmissions),
            _ => Err(Error::Config(format!("unknown correlation case `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CovarianceVerdict {
    pub holds: bool,
    pub max_violation: f64,
}

/// Almost-sure bounds on the coefficients of `L(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructureBounds {
    /// Lower bound on every `a_ii`.
    pub alpha_min: f64,
    /// Bound on `sum_i sum_{j != i} a_ij`.
    pub a_total_max: f64,
    /// Bound on each individual `a_ij`, `i != j`.
    pub a_ind_max: f64,
    /// Bound on each row sum `sum_{j != i} a_ij`.
    pub a_row_max: f64,
    /// Bound on each column sum `sum_{i != j} a_ij`.
    pub a_col_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MomentSource {
    ClosedForm,
    Enumeration,
    Empirical { trials: usize },
}

fn ser_matrix<S: Serializer>(m: &Matrix, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_rows(m).serialize(s)
}

/// `E[L]`, `E[L*L]`, `E[L*11*L]` and the drift `E[L + L* - L*L]`.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSet {
    #[serde(serialize_with = "ser_matrix")]
    pub el: Matrix,
    #[serde(serialize_with = "ser_matrix")]
    pub ell: Matrix,
    #[serde(serialize_with = "ser_matrix")]
    pub el11l: Matrix,
    #[serde(serialize_with = "ser_matrix")]
    pub edrift: Matrix,
    pub source: MomentSource,
}

impl MomentSet {
    pub fn new(el: Matrix, ell: Matrix, el11l: Matrix, source: MomentSource) -> Self {
        let edrift = &el + el.transpose() - &ell;
        Self { el, ell, el11l, edrift, source }
    }

    pub fn n(&self) -> usize {
        self.el.nrows()
    }

    pub fn from_events(events: &[LaplacianEvent], n: usize) -> Result<Self> {
        check_distribution(events, 1e-10)?;
        let mut acc = MomentAccumulator::new(n);
        for e in events {
            acc.add(&e.coefficients, e.probability);
        }
        Ok(acc.finish(1.0, MomentSource::Enumeration))
    }

    /// `1* E[L] = 0` entrywise within `tol`.
    pub fn is_mean_preserving(&self, tol: f64) -> bool {
        self.el.column_iter().all(|c| c.sum().abs() <= tol)
    }
}

pub fn check_mean_preserving(moments: &MomentSet, tol: f64) -> bool {
    moments.is_mean_preserving(tol)
}

struct MomentAccumulator {
    n: usize,
    el: Matrix,
    ell: Matrix,
    el11l: Matrix,
    lap: Matrix,
}

impl MomentAccumulator {
    fn new(n: usize) -> Self {
        Self {
            n,
            el: Matrix::zeros(n, n),
            ell: Matrix::zeros(n, n),
            el11l: Matrix::zeros(n, n),
            lap: Matrix::zeros(n, n),
        }
    }

    fn add(&mut self, coefs: &[Coefficient], weight: f64) {
        if coefs.is_empty() {
            return;
        }
        let n = self.n;
        self.lap.fill(0.0);
        for c in coefs {
            self.lap[(c.row, c.col)] -= c.value;
            self.lap[(c.row, c.row)] += c.value;
        }
        self.el += &self.lap * weight;
        self.ell.gemm(weight, &self.lap.transpose(), &self.lap, 1.0);
        let cols = self.lap.transpose() * nalgebra::DVector::from_element(n, 1.0);
        self.el11l.ger(weight, &cols, &cols, 1.0);
    }

    fn finish(self, scale: f64, source: MomentSource) -> MomentSet {
        MomentSet::new(self.el * scale, self.ell * scale, self.el11l * scale, source)
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::graph::{generate, matrix_from_rows, GraphKind};
    use crate::spectral::{is_psd_relative, is_psd_scaled};

    fn graph(rows: &[&[f64]]) -> WeightedGraph {
        WeightedGraph::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn max_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).amax()
    }

    fn aaga_pair(q: f64) -> UpdateModel {
        UpdateModel::new(ModelKind::Aaga, graph(&[&[0.0, 0.5], &[0.5, 0.0]]), q).unwrap()
    }

    fn complete(n: usize, w: f64) -> WeightedGraph {
        generate(GraphKind::Complete, n, w, 0).unwrap()
    }

    /// A set of small mean-preserving instances of every law.
    pub(crate) fn standard_models() -> Vec<UpdateModel> {
        let mut out = Vec::new();
        for &q in &[0.1, 0.5, 0.9] {
            for n in [3, 4] {
                let m = (n * (n - 1)) as f64;
                out.push(UpdateModel::new(ModelKind::Aaga, complete(n, 1.0 / m), q).unwrap());
                out.push(UpdateModel::new(ModelKind::Bga, generate(GraphKind::Cycle, n, 1.0, 0).unwrap(), q).unwrap());
                out.push(UpdateModel::new(ModelKind::Saga, complete(n, 1.0 / (n - 1) as f64), q).unwrap());
                out.push(UpdateModel::new(ModelKind::Pbga, complete(n, 0.5), q).unwrap());
            }
            out.push(UpdateModel::new(ModelKind::Bga, generate(GraphKind::Star, 5, 1.0, 0).unwrap(), q).unwrap());
            out.push(UpdateModel::new(ModelKind::Saga, generate(GraphKind::Cycle, 5, 0.5, 0).unwrap(), q).unwrap());
        }
        out
    }

    #[test]
    fn constructor_validates_laws() {
        let g = complete(3, 1.0);
        assert!(UpdateModel::new(ModelKind::Aaga, g.clone(), 0.5).is_err());
        assert!(UpdateModel::new(ModelKind::Saga, g.clone(), 0.5).is_err());
        assert!(UpdateModel::new(ModelKind::Bga, g.clone(), 0.5).is_ok());
        assert!(UpdateModel::new(ModelKind::Pbga, g.clone(), 0.5).is_ok());
        assert!(UpdateModel::new(ModelKind::Bga, complete(3, 0.5), 0.5).is_err());
        assert!(UpdateModel::new(ModelKind::Pbga, complete(3, 2.0), 0.5).is_err());
        let with_isolated = graph(&[&[0.0, 1.0, 0.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]);
        let err = UpdateModel::new(ModelKind::Saga, with_isolated, 0.5).unwrap_err();
        assert!(err.to_string().contains("row 2"));
    }

    #[test]
    fn q_range() {
        let err = UpdateModel::new(ModelKind::Bga, complete(3, 1.0), 1.0).unwrap_err();
        assert!(err.to_string().contains("(0,1)"));
        assert!(UpdateModel::new(ModelKind::Bga, complete(3, 1.0), 0.0).is_err());
        assert!(UpdateModel::degenerate(ModelKind::Aaga, graph(&[&[0.0, 0.5], &[0.5, 0.0]]), 1.0).is_ok());
        assert!(UpdateModel::degenerate(ModelKind::Aaga, graph(&[&[0.0, 0.5], &[0.5, 0.0]]), 1.5).is_err());
    }

    #[test]
    fn sample_shapes() {
        let mut rng = stream_rng(1, 0);
        let w = complete(4, 1.0 / 12.0);
        let aaga = UpdateModel::new(ModelKind::Aaga, w, 0.3).unwrap();
        for _ in 0..50 {
            let e = aaga.sample(&mut rng);
            assert_eq!(e.probability, -1.0);
            assert_eq!(e.coefficients.len(), 1);
            let l = e.laplacian(4);
            let off: Vec<f64> = (0..16)
                .filter(|k| k / 4 != k % 4)
                .map(|k| l[(k / 4, k % 4)])
                .filter(|&v| v != 0.0)
                .collect();
            assert_eq!(off, vec![-0.3]);
        }

        let bga = UpdateModel::new(ModelKind::Bga, generate(GraphKind::Cycle, 4, 1.0, 0).unwrap(), 0.5).unwrap();
        for _ in 0..50 {
            let e = bga.sample(&mut rng);
            let rows: std::collections::BTreeSet<usize> = e.coefficients.iter().map(|c| c.row).collect();
            assert_eq!(rows.len(), 2);
        }

        let silent = UpdateModel::new(ModelKind::Pbga, WeightedGraph::empty(4).unwrap(), 0.5).unwrap();
        for _ in 0..20 {
            assert!(silent.sample(&mut rng).laplacian(4).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn sampled_events_are_stochastic() {
        let mut rng = stream_rng(9, 3);
        for m in standard_models() {
            let alpha = m.structure_bounds().alpha_min;
            for _ in 0..30 {
                let e = m.sample(&mut rng);
                let l = e.laplacian(m.n());
                for row in l.row_iter() {
                    assert_eq!(row.sum(), 0.0);
                }
                assert!(e.self_weights(m.n()).iter().all(|&a| a >= alpha - 1e-12));
            }
        }
    }

    #[test]
    fn apply_uses_pre_update_state() {
        let e = LaplacianEvent {
            probability: 1.0,
            coefficients: vec![
                Coefficient { row: 0, col: 1, value: 0.5 },
                Coefficient { row: 1, col: 0, value: 0.5 },
            ],
        };
        let mut x = [0.0, 1.0];
        e.apply(&mut x);
        assert_eq!(x, [0.5, 0.5]);
    }

    #[test]
    fn enumeration_examples() {
        let ev = aaga_pair(0.5).enumerate_events(16).unwrap();
        assert_eq!(ev.len(), 2);
        assert!(ev.iter().all(|e| e.probability == 0.5));

        let bga = UpdateModel::new(ModelKind::Bga, complete(3, 1.0), 0.5).unwrap();
        let ev = bga.enumerate_events(16).unwrap();
        assert_eq!(ev.len(), 3);
        assert!(ev.iter().all(|e| (e.probability - 1.0 / 3.0).abs() < 1e-15));

        let saga = UpdateModel::new(ModelKind::Saga, graph(&[&[0.0, 1.0], &[1.0, 0.0]]), 0.5).unwrap();
        assert_eq!(saga.enumerate_events(16).unwrap().len(), 1);
    }

    #[test]
    fn enumeration_respects_budget() {
        let saga = UpdateModel::new(ModelKind::Saga, complete(6, 0.2), 0.5).unwrap();
        match saga.enumerate_events(1000) {
            Err(Error::Capacity { support, budget }) => {
                assert_eq!(support, 5u128.pow(6));
                assert_eq!(budget, 1000);
            }
            other => panic!("expected capacity error, got {other:?}"),
        }
        let pbga = UpdateModel::new(ModelKind::Pbga, complete(4, 0.5), 0.5).unwrap();
        assert_eq!(pbga.support_size(), 4 * 8);
    }

    #[test]
    fn enumeration_is_a_distinct_distribution() {
        for m in standard_models() {
            let ev = m.enumerate_events(DEFAULT_EVENT_BUDGET).unwrap();
            let total: f64 = ev.iter().map(|e| e.probability).sum();
            assert!((total - 1.0).abs() <= 1e-12, "{} sums to {total}", m.kind());
            for (a, b) in ev.iter().zip(ev.iter().skip(1)) {
                assert_ne!(a.coefficients, b.coefficients);
            }
        }
    }

    #[test]
    fn aaga_pair_moments() {
        let m = aaga_pair(0.5).exact_moments().unwrap();
        let k = matrix_from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!(max_diff(&m.el, &(&k * 0.25)) < 1e-15);
        assert!(max_diff(&m.el11l, &(&k * 0.25)) < 1e-15);
        let enumerated = aaga_pair(0.5).exact_moments_by_enumeration(16).unwrap();
        assert!(max_diff(&m.el11l, &enumerated.el11l) < 1e-15);
        assert_eq!(m.source, MomentSource::ClosedForm);
    }

    #[test]
    fn pbga_mean_on_triangle() {
        let m = UpdateModel::new(ModelKind::Pbga, complete(3, 1.0), 0.5).unwrap();
        let exact = m.exact_moments().unwrap();
        let lw = laplacian_of(m.graph().weights()).unwrap();
        assert!(max_diff(&exact.el, &(lw / 6.0)) < 1e-15);
    }

    #[test]
    fn closed_forms_match_enumeration() {
        for m in standard_models() {
            let exact = m.exact_moments().unwrap();
            let enumerated = m.exact_moments_by_enumeration(DEFAULT_EVENT_BUDGET).unwrap();
            assert!(max_diff(&exact.el, &enumerated.el) <= 1e-10, "{}", m.kind());
            assert!(max_diff(&exact.ell, &enumerated.ell) <= 1e-10, "{}", m.kind());
            assert!(max_diff(&exact.el11l, &enumerated.el11l) <= 1e-10, "{}", m.kind());
            assert!(max_diff(&m.closed_form_mean(), &enumerated.el) <= 1e-10, "{}", m.kind());
        }
    }

    #[test]
    fn saga_factorization_on_asymmetric_rows() {
        let w = graph(&[&[0.0, 0.25, 0.75], &[0.6, 0.0, 0.4], &[0.1, 0.9, 0.0]]);
        let m = UpdateModel::new(ModelKind::Saga, w, 0.3).unwrap();
        let exact = m.exact_moments().unwrap();
        let enumerated = m.exact_moments_by_enumeration(64).unwrap();
        assert!(max_diff(&exact.el11l, &enumerated.el11l) <= 1e-12);
        assert!(max_diff(&exact.ell, &enumerated.ell) <= 1e-12);
    }

    #[test]
    fn drift_identity() {
        for m in standard_models() {
            let s = m.exact_moments().unwrap();
            let d = &s.el + s.el.transpose() - &s.ell;
            assert!(max_diff(&d, &s.edrift) <= 1e-12);
        }
    }

    #[test]
    fn empirical_single_trial_and_determinism() {
        let m = UpdateModel::new(ModelKind::Pbga, complete(3, 0.5), 0.5).unwrap();
        let one = m.empirical_moments(1, 11).unwrap();
        let mut rng = stream_rng(11, 0);
        let l = m.sample(&mut rng).laplacian(3);
        assert!(max_diff(&one.el, &l) == 0.0);
        assert!(max_diff(&one.ell, &(l.transpose() * &l)) < 1e-15);
        let a = m.empirical_moments(500, 4).unwrap();
        let b = m.empirical_moments(500, 4).unwrap();
        assert_eq!(a.el11l, b.el11l);
        assert!(m.empirical_moments(0, 4).is_err());
    }

    #[test]
    fn structure_bound_examples() {
        let b = aaga_pair(0.5).structure_bounds();
        assert_eq!((b.a_total_max, b.alpha_min), (0.5, 0.5));
        let bga = UpdateModel::new(ModelKind::Bga, generate(GraphKind::Cycle, 4, 1.0, 0).unwrap(), 0.5).unwrap();
        assert_eq!(bga.structure_bounds().a_total_max, 1.0);
        let saga = UpdateModel::new(ModelKind::Saga, generate(GraphKind::Cycle, 4, 0.5, 0).unwrap(), 0.25).unwrap();
        let s = saga.structure_bounds();
        assert_eq!((s.a_row_max, s.alpha_min), (0.25, 0.75));
    }

    #[test]
    fn structure_bounds_hold_on_support() {
        for m in standard_models() {
            let b = m.structure_bounds();
            let n = m.n();
            for e in m.enumerate_events(DEFAULT_EVENT_BUDGET).unwrap() {
                let total: f64 = e.coefficients.iter().map(|c| c.value).sum();
                assert!(total <= b.a_total_max + 1e-12);
                let mut rows = vec![0.0; n];
                let mut cols = vec![0.0; n];
                for c in &e.coefficients {
                    assert!(c.value <= b.a_ind_max + 1e-12);
                    rows[c.row] += c.value;
                    cols[c.col] += c.value;
                }
                assert!(rows.iter().all(|&r| r <= b.a_row_max + 1e-12));
                assert!(cols.iter().all(|&c| c <= b.a_col_max + 1e-12));
                assert!(e.self_weights(n).iter().all(|&a| a >= b.alpha_min - 1e-12));
            }
        }
    }

    #[test]
    fn covariance_examples() {
        let saga = UpdateModel::new(ModelKind::Saga, complete(3, 0.5), 0.5).unwrap();
        assert!(saga.covariance_structure(CorrelationCase::Updates, 1024).unwrap().holds);

        let aaga = UpdateModel::new(ModelKind::Aaga, complete(3, 1.0 / 6.0), 0.5).unwrap();
        let v = aaga.covariance_structure(CorrelationCase::Updates, 1024).unwrap();
        assert!(!v.holds);
        assert!(v.max_violation > 0.0);

        // One broadcaster per step: coefficients from different senders are
        // mutually exclusive, hence negatively correlated.
        let bga = UpdateModel::new(ModelKind::Bga, complete(3, 1.0), 0.5).unwrap();
        let v = bga.covariance_structure(CorrelationCase::Transmissions, 1024).unwrap();
        assert!(!v.holds);
        assert!((v.max_violation - (0.5f64 / 3.0).powi(2)).abs() < 1e-15);

        // PBGA receptions from the same sender are independent across receivers.
        let pbga = UpdateModel::new(ModelKind::Pbga, complete(3, 0.5), 0.5).unwrap();
        assert!(!pbga.covariance_structure(CorrelationCase::Updates, 1024).unwrap().holds);
    }

    #[test]
    fn mean_preservation_examples() {
        let balanced = UpdateModel::new(ModelKind::Aaga, complete(3, 1.0 / 6.0), 0.5).unwrap();
        assert!(check_mean_preserving(&balanced.exact_moments().unwrap(), 1e-12));
        let skew = UpdateModel::new(ModelKind::Aaga, graph(&[&[0.0, 1.0], &[0.0, 0.0]]), 0.5).unwrap();
        let m = skew.exact_moments().unwrap();
        assert!(!check_mean_preserving(&m, 1e-12));
        let ones = m.el.transpose() * nalgebra::DVector::from_element(2, 1.0);
        assert_eq!(ones.as_slice(), &[0.5, -0.5]);
        let zero = UpdateModel::new(ModelKind::Pbga, WeightedGraph::empty(3).unwrap(), 0.5).unwrap();
        assert!(check_mean_preserving(&zero.exact_moments().unwrap(), 0.0));
    }

    #[test]
    fn drift_is_psd_and_self_confidence_gap_holds() {
        for m in standard_models() {
            let s = m.exact_moments().unwrap();
            let sym = &s.el + s.el.transpose();
            assert!(is_psd_relative(&sym, 1e-9).unwrap().psd);
            let alpha = m.structure_bounds().alpha_min;
            let gap = &sym * (1.0 - alpha) - &s.ell;
            let scale = sym.norm().max(s.ell.norm());
            assert!(is_psd_scaled(&gap, 1e-9, scale).unwrap().psd, "{} q={}", m.kind(), m.q());
        }
    }

    #[test]
    fn spec_json() {
        let text = r#"{"kind": "BGA", "q": 0.5, "graph": {"family": "cycle", "n": 4}}"#;
        let m = serde_json::from_str::<ModelSpec>(text).unwrap().build().unwrap();
        assert_eq!(m.kind(), ModelKind::Bga);
        assert_eq!(m.graph().edge_count(), 8);
        let explicit = r#"{"kind": "AAGA", "q": 1.0, "allow_degenerate": true,
                           "graph": {"n": 2, "weights": [[0, 0.5], [0.5, 0]]}}"#;
        let m = serde_json::from_str::<ModelSpec>(explicit).unwrap().build().unwrap();
        assert_eq!(m.q(), 1.0);
        let round = serde_json::to_string(&m.spec()).unwrap();
        assert!(round.contains(r#""kind":"AAGA""#));
    }
}
