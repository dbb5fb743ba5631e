//! Experiment drivers: certification reports, simulations, oracle runs,
//! scaling studies and bound comparisons, with CSV/JSON rendering.
//!
//! Every function here is deterministic given its inputs and seed.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::certify::{
    check_condition, deviation_bound, minimal_gamma, prior_bounds, theorem_gamma, GammaCertificate, GammaMethod,
    PriorInputs, CERT_TOL,
};
use crate::error::{Error, Result};
use crate::graph::{average, disagreement, generate, GraphKind};
use crate::models::{stream_rng, ModelKind, ModelSpec, MomentSet, UpdateModel};
use crate::montecarlo::{estimate_mse, estimate_steady_state, SteadyRule, Stride};
use crate::oracle;

/// Largest support the drivers enumerate for oracle columns.
pub const ORACLE_BUDGET: usize = 1 << 14;

/// Initial state generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum X0Spec {
    Explicit(Vec<f64>),
    /// i.i.d. uniform on `[0, 1]`, from its own seed.
    IidUniform { seed: u64 },
    /// `+1, -1, +1, ...`
    Alternating,
}

impl X0Spec {
    pub fn materialize(&self, n: usize) -> Result<Vec<f64>> {
        let x = match self {
            X0Spec::Explicit(v) => {
                if v.len() != n {
                    return Err(Error::Config(format!("x0 has {} entries, model has {n} nodes", v.len())));
                }
                v.clone()
            }
            X0Spec::IidUniform { seed } => {
                let mut rng = stream_rng(*seed, u64::MAX);
                (0..n).map(|_| rng.gen::<f64>()).collect()
            }
            X0Spec::Alternating => (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect(),
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("x0 has non-finite entries".into()));
        }
        Ok(x)
    }

    /// Like [`materialize`](Self::materialize), rescaled about its mean so that `V(x0) = 1`.
    pub fn normalized(&self, n: usize) -> Result<Vec<f64>> {
        let x = self.materialize(n)?;
        let v = disagreement(&x)?;
        if v == 0.0 {
            return Err(Error::Config("x0 is already at consensus and cannot be normalized".into()));
        }
        let m = average(&x)?;
        let s = v.sqrt();
        Ok(x.iter().map(|xi| m + (xi - m) / s).collect())
    }
}

/// `alternating`, `iid_uniform:SEED`, a comma-separated list, or JSON.
impl FromStr for X0Spec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "alternating" {
            return Ok(X0Spec::Alternating);
        }
        if let Some(seed) = s.strip_prefix("iid_uniform:") {
            let seed = seed.parse().map_err(|_| Error::Config(format!("bad seed in `{s}`")))?;
            return Ok(X0Spec::IidUniform { seed });
        }
        if s.starts_with('{') || s.starts_with('"') {
            return Ok(serde_json::from_str(s)?);
        }
        let body = s.trim_start_matches('[').trim_end_matches(']');
        body.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Config(format!("bad x0 entry `{t}`"))))
            .collect::<Result<Vec<_>>>()
            .map(X0Spec::Explicit)
    }
}

/// Reads a model from inline JSON or from a file path.
pub fn load_model(arg: &str) -> Result<UpdateModel> {
    let text = if arg.trim_start().starts_with('{') { arg.to_string() } else { std::fs::read_to_string(arg)? };
    serde_json::from_str::<ModelSpec>(&text)?.build()
}

/// Families for the scaling study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalingFamily {
    /// BGA on the unit-weight cycle.
    BgaCycle,
    /// SAGA on the cycle with weight 1/2 per neighbor.
    SagaCycle,
    /// AAGA on the complete graph with uniform edge mass `1/(N(N-1))`.
    AagaComplete,
    /// PBGA on the unit-weight complete graph.
    PbgaComplete,
}

impl ScalingFamily {
    pub fn model(self, n: usize, q: f64) -> Result<UpdateModel> {
        let (kind, graph) = match self {
            ScalingFamily::BgaCycle => (ModelKind::Bga, generate(GraphKind::Cycle, n, 1.0, 0)?),
            ScalingFamily::SagaCycle => {
                let w = if n == 2 { 1.0 } else { 0.5 };
                (ModelKind::Saga, generate(GraphKind::Cycle, n, w, 0)?)
            }
            ScalingFamily::AagaComplete => {
                (ModelKind::Aaga, generate(GraphKind::Complete, n, 1.0 / (n * (n - 1)) as f64, 0)?)
            }
            ScalingFamily::PbgaComplete => (ModelKind::Pbga, generate(GraphKind::Complete, n, 1.0, 0)?),
        };
        UpdateModel::new(kind, graph, q)
    }
}

impl FromStr for ScalingFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bga_cycle" => Ok(ScalingFamily::BgaCycle),
            "saga_cycle" => Ok(ScalingFamily::SagaCycle),
            "aaga_complete" => Ok(ScalingFamily::AagaComplete),
            "pbga_complete" => Ok(ScalingFamily::PbgaComplete),
            _ => Err(Error::Config(format!("unknown scaling family `{s}`"))),
        }
    }
}

/// A named small model used throughout the checks.
#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub model: UpdateModel,
}

/// AAGA on 2 and 4 nodes, BGA on the 4- and 6-cycle, SAGA on 4 nodes and
/// PBGA on the complete graphs with 3 and 4 nodes, each for `q` in {0.1, 0.5, 0.9}.
pub fn standard_instances() -> Vec<Instance> {
    let mut out = Vec::new();
    for q in [0.1, 0.5, 0.9] {
        let mut push = |label: &str, kind, graph| {
            out.push(Instance {
                label: format!("{label} q={q}"),
                model: UpdateModel::new(kind, graph, q).expect("standard instance"),
            });
        };
        push("AAGA pair", ModelKind::Aaga, generate(GraphKind::Complete, 2, 0.5, 0).unwrap());
        push("AAGA complete-4", ModelKind::Aaga, generate(GraphKind::Complete, 4, 1.0 / 12.0, 0).unwrap());
        push("BGA cycle-4", ModelKind::Bga, generate(GraphKind::Cycle, 4, 1.0, 0).unwrap());
        push("BGA cycle-6", ModelKind::Bga, generate(GraphKind::Cycle, 6, 1.0, 0).unwrap());
        push("SAGA complete-4", ModelKind::Saga, generate(GraphKind::Complete, 4, 1.0 / 3.0, 0).unwrap());
        push("SAGA cycle-4", ModelKind::Saga, generate(GraphKind::Cycle, 4, 0.5, 0).unwrap());
        push("PBGA complete-3", ModelKind::Pbga, generate(GraphKind::Complete, 3, 1.0, 0).unwrap());
        push("PBGA complete-4", ModelKind::Pbga, generate(GraphKind::Complete, 4, 1.0, 0).unwrap());
    }
    out
}

/// How `certify` picks `gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CertifyMode {
    Gamma(f64),
    Minimal,
    Theorem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundFor {
    pub n: usize,
    pub v0: f64,
    pub bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CertifyReport {
    /// `null` when infeasible.
    pub gamma: Option<f64>,
    pub method: GammaMethod,
    pub psd_min_eig: Option<f64>,
    pub valid: bool,
    pub bound_for: BoundFor,
}

impl CertifyReport {
    /// 0 when valid, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.valid {
            0
        } else {
            2
        }
    }
}

fn moments(model: &UpdateModel) -> Result<MomentSet> {
    model.exact_moments()
}

/// Certificate for `model`, with the bound it gives for `V(x0) = v0`.
pub fn certify(model: &UpdateModel, mode: CertifyMode, v0: f64) -> Result<CertifyReport> {
    let m = moments(model)?;
    let cert: GammaCertificate = match mode {
        CertifyMode::Gamma(g) => check_condition(&m, g, CERT_TOL)?,
        CertifyMode::Minimal => minimal_gamma(&m, CERT_TOL)?,
        CertifyMode::Theorem => theorem_gamma(model)?.verify(&m, CERT_TOL)?,
    };
    let bound = cert.gamma.filter(|_| cert.valid).map(|g| deviation_bound(g, model.n(), v0));
    Ok(CertifyReport {
        gamma: cert.gamma,
        method: cert.method,
        psd_min_eig: cert.psd_min_eig,
        valid: cert.valid,
        bound_for: BoundFor { n: model.n(), v0, bound },
    })
}

/// The closed-form `gamma`, if it checks out against the exact moments.
fn certified_theorem_gamma(model: &UpdateModel) -> Result<Option<f64>> {
    let cert = theorem_gamma(model)?.verify(&moments(model)?, CERT_TOL)?;
    Ok(cert.gamma.filter(|_| cert.valid))
}

/// One row of `simulate` output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimRow {
    pub t: usize,
    pub mse_mean: f64,
    pub mse_ci: f64,
    pub v_mean: f64,
    pub bound: Option<f64>,
    pub oracle_mse: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
pub struct SimulateConfig {
    pub steps: usize,
    pub trials: usize,
    pub seed: u64,
    pub stride: Stride,
}

/// Monte Carlo MSE with the certified bound and, on enumerable laws, the exact value.
pub fn simulate(model: &UpdateModel, x0: &[f64], cfg: SimulateConfig) -> Result<Vec<SimRow>> {
    let est = estimate_mse(model, x0, cfg.steps, cfg.trials, cfg.seed, cfg.stride)?;
    let v0 = disagreement(x0)?;
    let bound = certified_theorem_gamma(model)?.map(|g| deviation_bound(g, model.n(), v0));
    let exact = match model.enumerate_events(ORACLE_BUDGET) {
        Ok(events) => match oracle::mse_trajectory(&events, x0, cfg.steps) {
            Ok(m) => Some(m),
            Err(Error::Precondition(_)) => None,
            Err(e) => return Err(e),
        },
        Err(Error::Capacity { .. }) => None,
        Err(e) => return Err(e),
    };
    Ok(est
        .into_iter()
        .map(|e| SimRow {
            t: e.t,
            mse_mean: e.mse_mean,
            mse_ci: e.ci_half_width,
            v_mean: e.v_mean,
            bound,
            oracle_mse: exact.as_ref().map(|m| m[e.t]),
        })
        .collect())
}

/// Exact trajectory; `gamma` defaults to the certified closed-form value.
pub fn oracle_rows(
    model: &UpdateModel,
    x0: &[f64],
    steps: usize,
    gamma: Option<f64>,
) -> Result<Vec<oracle::OracleRow>> {
    let events = model.enumerate_events(ORACLE_BUDGET)?;
    let gamma = match gamma {
        Some(g) => Some(g),
        None => certified_theorem_gamma(model)?,
    };
    oracle::trajectory(&events, x0, steps, gamma)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub gamma: Option<f64>,
    pub bound_over_v0: Option<f64>,
    pub mse_over_v0: Option<f64>,
    pub mse_ci: Option<f64>,
    pub prior_bound_best: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ScalingConfig {
    pub family: ScalingFamily,
    pub n_list: Vec<usize>,
    pub q: f64,
    pub trials: usize,
    pub seed: u64,
    pub x0: X0Spec,
    pub rule: SteadyRule,
}

/// Certified bound and steady-state Monte Carlo MSE for each `N`, with `V(x0) = 1`.
pub fn scaling(cfg: &ScalingConfig) -> Result<Vec<ScalingRow>> {
    if cfg.n_list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("N list must be strictly ascending".into()));
    }
    Ok(cfg.n_list.iter().map(|&n| scaling_row(cfg, n)).collect())
}

fn scaling_row(cfg: &ScalingConfig, n: usize) -> ScalingRow {
    let mut row = ScalingRow {
        n,
        gamma: None,
        bound_over_v0: None,
        mse_over_v0: None,
        mse_ci: None,
        prior_bound_best: None,
        error: None,
    };
    let run = |row: &mut ScalingRow| -> Result<()> {
        let model = cfg.family.model(n, cfg.q)?;
        let x0 = cfg.x0.normalized(n)?;
        row.gamma = certified_theorem_gamma(&model)?;
        row.bound_over_v0 = row.gamma.map(|g| deviation_bound(g, n, 1.0));
        row.prior_bound_best = prior_bounds(model.graph(), model.kind(), cfg.q, prior_inputs(n, 1.0))
            .iter()
            .filter_map(|b| b.value)
            .reduce(f64::min);
        let est = estimate_steady_state(&model, &x0, cfg.trials, cfg.seed, cfg.rule)?;
        row.mse_over_v0 = Some(est.mse_mean / est.v0);
        row.mse_ci = Some(est.ci_half_width / est.v0);
        Ok(())
    };
    if let Err(e) = run(&mut row) {
        row.error = Some(e.to_string());
    }
    row
}

/// `v0` as given; `sigma2` chosen so that `(1 - 1/N) sigma2 = v0`.
fn prior_inputs(n: usize, v0: f64) -> PriorInputs {
    PriorInputs { v0: Some(v0), sigma2: Some(v0 / (1.0 - 1.0 / n as f64)) }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundRow {
    pub bound_name: String,
    pub value: Option<f64>,
    /// The bound is at least `V(x0)`, so it says nothing.
    pub vacuous: bool,
    pub error: Option<String>,
}

/// Our bound next to every applicable prior bound, for `V(x0) = v0`.
/// `sigma2` defaults to `v0 / (1 - 1/N)`.
pub fn compare_bounds(model: &UpdateModel, v0: f64, sigma2: Option<f64>) -> Result<Vec<BoundRow>> {
    let n = model.n();
    let mut inputs = prior_inputs(n, v0);
    if sigma2.is_some() {
        inputs.sigma2 = sigma2;
    }
    let ours = certified_theorem_gamma(model)?.map(|g| deviation_bound(g, n, v0));
    let mut rows = vec![BoundRow {
        bound_name: "ours".into(),
        value: ours,
        vacuous: ours.is_some_and(|b| b >= v0),
        error: ours.is_none().then(|| "no certified gamma".to_string()),
    }];
    rows.extend(prior_bounds(model.graph(), model.kind(), model.q(), inputs).into_iter().map(|b| BoundRow {
        bound_name: b.name.to_string(),
        value: b.value,
        vacuous: b.value.is_some_and(|v| v >= v0),
        error: b.error,
    }));
    Ok(rows)
}

/// Output format.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(Error::Config(format!("unknown format `{s}`"))),
        }
    }
}

/// A cell of CSV output.
pub trait CsvCell {
    fn cell(&self) -> String;
}

impl CsvCell for f64 {
    fn cell(&self) -> String {
        format!("{self:.16e}")
    }
}

impl CsvCell for usize {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl CsvCell for bool {
    fn cell(&self) -> String {
        self.to_string()
    }
}

impl CsvCell for String {
    fn cell(&self) -> String {
        if self.contains([',', '"', '\n']) {
            format!("\"{}\"", self.replace('"', "\"\""))
        } else {
            self.clone()
        }
    }
}

impl<T: CsvCell> CsvCell for Option<T> {
    fn cell(&self) -> String {
        self.as_ref().map(CsvCell::cell).unwrap_or_default()
    }
}

/// Rows that can be written as CSV.
pub trait CsvRow {
    const HEADER: &'static [&'static str];
    fn cells(&self) -> Vec<String>;
}

impl CsvRow for SimRow {
    const HEADER: &'static [&'static str] = &["t", "mse_mean", "mse_ci", "v_mean", "bound", "oracle_mse"];
    fn cells(&self) -> Vec<String> {
        vec![
            self.t.cell(),
            self.mse_mean.cell(),
            self.mse_ci.cell(),
            self.v_mean.cell(),
            self.bound.cell(),
            self.oracle_mse.cell(),
        ]
    }
}

impl CsvRow for oracle::OracleRow {
    const HEADER: &'static [&'static str] = &["t", "mse", "disagreement", "lyapunov"];
    fn cells(&self) -> Vec<String> {
        vec![self.t.cell(), self.mse.cell(), self.disagreement.cell(), self.lyapunov.cell()]
    }
}

impl CsvRow for ScalingRow {
    const HEADER: &'static [&'static str] =
        &["N", "gamma", "bound_over_v0", "mse_over_v0", "mse_ci", "prior_bound_best", "error"];
    fn cells(&self) -> Vec<String> {
        vec![
            self.n.cell(),
            self.gamma.cell(),
            self.bound_over_v0.cell(),
            self.mse_over_v0.cell(),
            self.mse_ci.cell(),
            self.prior_bound_best.cell(),
            self.error.cell(),
        ]
    }
}

impl CsvRow for BoundRow {
    const HEADER: &'static [&'static str] = &["bound_name", "value", "vacuous", "error"];
    fn cells(&self) -> Vec<String> {
        vec![self.bound_name.cell(), self.value.cell(), self.vacuous.cell(), self.error.cell()]
    }
}

pub fn to_csv<R: CsvRow>(rows: &[R]) -> String {
    let mut out = R::HEADER.join(",");
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.cells().join(","));
    }
    out
}

pub fn render<R: CsvRow + Serialize>(rows: &[R], format: Format) -> Result<String> {
    match format {
        Format::Csv => Ok(to_csv(rows)),
        Format::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
    }
}

/// Writes to `path`, or stdout when `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

/// Optional JSON config; command-line flags take precedence.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: Option<ModelSpec>,
    pub family: Option<ScalingFamily>,
    pub n_list: Option<Vec<usize>>,
    pub q: Option<f64>,
    pub x0: Option<X0Spec>,
    pub steps: Option<usize>,
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub gamma: Option<f64>,
    pub sigma2: Option<f64>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}
