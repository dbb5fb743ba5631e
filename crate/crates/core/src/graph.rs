//! Weighted directed graphs and their Laplacians.
//!
//! A graph is a dense nonnegative weight matrix over nodes `0..n`. The
//! Laplacian has `-w_ij` off the diagonal and the off-diagonal row sums on
//! the diagonal, so every Laplacian annihilates the all-ones vector.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{structural, Error, Result};

pub type Matrix = DMatrix<f64>;

/// Default absolute tolerance for balance and symmetry checks.
pub const DEFAULT_STRUCT_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct WeightedGraph {
    weights: Matrix,
    loops_allowed: bool,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    weights: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    loops_allowed: bool,
}

impl TryFrom<GraphJson> for WeightedGraph {
    type Error = Error;

    fn try_from(json: GraphJson) -> Result<Self> {
        if json.weights.len() != json.n {
            return Err(structural(format!(
                "graph declares n = {} but has {} weight rows",
                json.n,
                json.weights.len()
            )));
        }
        let weights = matrix_from_rows(&json.weights)?;
        if json.loops_allowed {
            WeightedGraph::with_loops(weights)
        } else {
            WeightedGraph::new(weights)
        }
    }
}

impl From<WeightedGraph> for GraphJson {
    fn from(g: WeightedGraph) -> Self {
        GraphJson {
            n: g.n(),
            weights: matrix_to_rows(&g.weights),
            loops_allowed: g.loops_allowed,
        }
    }
}

impl WeightedGraph {
    /// Loop-free graph. Rejects nonzero diagonal entries.
    pub fn new(weights: Matrix) -> Result<Self> {
        Self::build(weights, false)
    }

    pub fn with_loops(weights: Matrix) -> Result<Self> {
        Self::build(weights, true)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        Self::new(matrix_from_rows(rows)?)
    }

    pub fn empty(n: usize) -> Result<Self> {
        Self::new(Matrix::zeros(n, n))
    }

    fn build(weights: Matrix, loops_allowed: bool) -> Result<Self> {
        let n = weights.nrows();
        if n == 0 {
            return Err(structural("graph must have at least one node"));
        }
        if weights.ncols() != n {
            return Err(structural(format!(
                "weight matrix is {}x{}, expected square",
                n,
                weights.ncols()
            )));
        }
        for (i, j) in (0..n).flat_map(|i| (0..n).map(move |j| (i, j))) {
            let w = weights[(i, j)];
            if !w.is_finite() || w < 0.0 {
                return Err(structural(format!("weight ({i},{j}) = {w} is not a nonnegative real")));
            }
            if i == j && !loops_allowed && w != 0.0 {
                return Err(structural(format!("loop at node {i} in a loop-free graph")));
            }
        }
        Ok(Self { weights, loops_allowed })
    }

    pub fn n(&self) -> usize {
        self.weights.nrows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[(i, j)]
    }

    pub fn loops_allowed(&self) -> bool {
        self.loops_allowed
    }

    /// Multiply every weight by `factor` (must be nonnegative).
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::build(&self.weights * factor, self.loops_allowed)
    }

    /// Off-diagonal positions with positive weight in row `i`.
    pub fn out_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&j| j != i && self.weights[(i, j)] > 0.0)
    }

    /// Off-diagonal positions with positive weight in column `j`.
    pub fn in_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.n()).filter(move |&i| i != j && self.weights[(i, j)] > 0.0)
    }

    pub fn edge_count(&self) -> usize {
        (0..self.n()).map(|i| self.out_neighbors(i).count()).sum()
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        is_symmetric(&self.weights, tol)
    }

    pub fn stats(&self) -> GraphStats {
        self.stats_with_tol(DEFAULT_STRUCT_TOL)
    }

    pub fn stats_with_tol(&self, tol: f64) -> GraphStats {
        let n = self.n();
        let row_sums: Vec<f64> = self.weights.row_iter().map(|r| r.sum()).collect();
        let col_sums: Vec<f64> = self.weights.column_iter().map(|c| c.sum()).collect();
        let d_max_row = (0..n).map(|i| self.out_neighbors(i).count()).max().unwrap_or(0);
        let d_max_col = (0..n).map(|j| self.in_neighbors(j).count()).max().unwrap_or(0);
        let w_max = row_sums.iter().copied().fold(0.0, f64::max);
        let is_balanced = row_sums.iter().zip(&col_sums).all(|(r, c)| (r - c).abs() <= tol);
        GraphStats {
            d_max: d_max_row.max(d_max_col),
            d_max_row,
            d_max_col,
            w_max,
            row_sums,
            col_sums,
            is_balanced,
            is_symmetric: self.is_symmetric(tol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GraphStats {
    /// Largest out- or in-neighbor count.
    pub d_max: usize,
    pub d_max_row: usize,
    pub d_max_col: usize,
    /// Largest row sum of the weight matrix.
    pub w_max: f64,
    pub row_sums: Vec<f64>,
    pub col_sums: Vec<f64>,
    pub is_balanced: bool,
    pub is_symmetric: bool,
}

/// Laplacian `L(A)` of a nonnegative weight matrix; the diagonal of `A` is ignored.
pub fn laplacian_of(weights: &Matrix) -> Result<Matrix> {
    let n = weights.nrows();
    if weights.ncols() != n {
        return Err(structural("laplacian of a non-square matrix"));
    }
    let mut lap = Matrix::zeros(n, n);
    for i in 0..n {
        let mut diag = 0.0;
        for j in 0..n {
            if i != j && weights[(i, j)] != 0.0 {
                lap[(i, j)] = -weights[(i, j)];
                diag += weights[(i, j)];
            }
        }
        lap[(i, i)] = diag;
    }
    Ok(lap)
}

pub fn laplacian(g: &WeightedGraph) -> Matrix {
    laplacian_of(&g.weights).expect("graph weights are square")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum GraphKind {
    Cycle,
    Complete,
    /// Node 0 is the hub.
    Star,
    ErdosRenyi { p: f64 },
}

impl std::str::FromStr for GraphKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(GraphKind::Cycle),
            "complete" => Ok(GraphKind::Complete),
            "star" => Ok(GraphKind::Star),
            _ => {
                let p = s
                    .strip_prefix("erdos_renyi:")
                    .and_then(|p| p.parse::<f64>().ok())
                    .ok_or_else(|| Error::Config(format!("unknown graph family `{s}`")))?;
                Ok(GraphKind::ErdosRenyi { p })
            }
        }
    }
}

/// Symmetric 0/`weight` adjacency of a standard family.
pub fn generate(kind: GraphKind, n: usize, weight: f64, seed: u64) -> Result<WeightedGraph> {
    if n < 2 {
        return Err(structural(format!("generators need n >= 2, got {n}")));
    }
    if !(weight >= 0.0 && weight.is_finite()) {
        return Err(structural(format!("edge weight {weight} must be nonnegative")));
    }
    let mut w = Matrix::zeros(n, n);
    let mut link = |i: usize, j: usize| {
        w[(i, j)] = weight;
        w[(j, i)] = weight;
    };
    match kind {
        GraphKind::Cycle => {
            for i in 0..n {
                let j = (i + 1) % n;
                if i != j {
                    link(i, j);
                }
            }
        }
        GraphKind::Complete => {
            for i in 0..n {
                for j in i + 1..n {
                    link(i, j);
                }
            }
        }
        GraphKind::Star => {
            for j in 1..n {
                link(0, j);
            }
        }
        GraphKind::ErdosRenyi { p } => {
            if !(0.0..=1.0).contains(&p) {
                return Err(structural(format!("edge probability {p} outside [0,1]")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..n {
                for j in i + 1..n {
                    if rng.gen::<f64>() < p {
                        link(i, j);
                    }
                }
            }
        }
    }
    WeightedGraph::new(w)
}

/// Mean of the entries.
pub fn average(y: &[f64]) -> Result<f64> {
    if y.is_empty() {
        return Err(structural("average of an empty vector"));
    }
    Ok(y.iter().sum::<f64>() / y.len() as f64)
}

/// Disagreement `V(y) = (1/N) sum_i (y_i - mean)^2`.
pub fn disagreement(y: &[f64]) -> Result<f64> {
    let mean = average(y)?;
    Ok(y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / y.len() as f64)
}

pub fn is_symmetric(m: &Matrix, tol: f64) -> bool {
    m.is_square()
        && (0..m.nrows()).all(|i| (i + 1..m.ncols()).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol))
}

pub fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix> {
    let n = rows.len();
    let m = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != m) {
        return Err(structural("ragged matrix rows"));
    }
    Ok(Matrix::from_fn(n, m, |i, j| rows[i][j]))
}

pub fn matrix_to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}
