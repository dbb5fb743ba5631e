//! Accuracy certificates.
//!
//! A certificate is a scalar `gamma` for which
//! `gamma * E[L + L* - L*L] - E[L*11*L]` is positive semidefinite. Given one,
//! the mean-square drift of the average is at most `gamma / (N + gamma)`
//! times the initial disagreement, at every time step.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{Matrix, WeightedGraph};
use crate::models::{
    check_distribution, CorrelationCase, CovarianceVerdict, LaplacianEvent, ModelKind, MomentSet,
    StructureBounds, UpdateModel, DEFAULT_EVENT_BUDGET,
};
use crate::spectral::{frobenius, graph_spectrum, is_psd, PsdVerdict};

/// Relative tolerance for certificate validity.
pub const CERT_TOL: f64 = 1e-9;
/// Bisection upper brackets are doubled at most up to this value.
const GAMMA_CEILING: f64 = (1u64 << 60) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaMethod {
    ConditionCheck,
    Bisection,
    ThmLimited,
    ThmUncorrA,
    ThmUncorrB,
    ThmUncorrC,
    LemmaBeta,
    PropPbga,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaCertificate {
    /// `None` when no finite value exists (or the formula does not apply).
    pub gamma: Option<f64>,
    pub method: GammaMethod,
    /// Smallest eigenvalue of `gamma * EDrift - EL11L`, once checked.
    pub psd_min_eig: Option<f64>,
    pub valid: bool,
}

impl GammaCertificate {
    /// A value produced by a formula, not yet checked against moments.
    pub fn formula(gamma: f64, method: GammaMethod) -> Self {
        Self { gamma: Some(gamma), method, psd_min_eig: None, valid: false }
    }

    pub fn infeasible(method: GammaMethod) -> Self {
        Self { gamma: None, method, psd_min_eig: None, valid: false }
    }

    pub fn is_infeasible(&self) -> bool {
        self.gamma.is_none()
    }

    /// Checks the value against `moments`, keeping the method tag.
    pub fn verify(self, moments: &MomentSet, tol: f64) -> Result<Self> {
        match self.gamma {
            None => Ok(self),
            Some(g) => Ok(Self { method: self.method, ..check_condition(moments, g, tol)? }),
        }
    }
}

fn require_mean_preserving(m: &MomentSet) -> Result<()> {
    let tol = 1e-9 * frobenius(&m.el).max(1.0);
    if m.is_mean_preserving(tol) {
        Ok(())
    } else {
        Err(Error::Precondition("1* E[L] != 0: the law does not preserve the average in expectation".into()))
    }
}

/// `gamma * E[L + L* - L*L] - E[L*11*L]`, symmetrized.
pub fn condition_matrix(m: &MomentSet, gamma: f64) -> Matrix {
    let raw = &m.edrift * gamma - &m.el11l;
    (&raw + raw.transpose()) * 0.5
}

/// Tests the certificate condition for a given `gamma`.
pub fn check_condition(m: &MomentSet, gamma: f64, tol: f64) -> Result<GammaCertificate> {
    require_mean_preserving(m)?;
    if !(gamma >= 0.0) {
        return Err(Error::Precondition(format!("gamma = {gamma} must be nonnegative")));
    }
    let verdict = is_psd(&condition_matrix(m, gamma), tol)?;
    Ok(GammaCertificate {
        gamma: Some(gamma),
        method: GammaMethod::ConditionCheck,
        psd_min_eig: Some(verdict.min_eig),
        valid: verdict.psd,
    })
}

/// Smallest `gamma` passing [`check_condition`], by bisection.
///
/// The smallest eigenvalue of the condition matrix is concave and, with a PSD
/// drift, nondecreasing in `gamma`, so the valid set is a half-line.
pub fn minimal_gamma(m: &MomentSet, tol: f64) -> Result<GammaCertificate> {
    let at_zero = check_condition(m, 0.0, tol)?;
    if at_zero.valid {
        return Ok(GammaCertificate { method: GammaMethod::Bisection, ..at_zero });
    }
    let mut lo = 0.0;
    let mut hi = (m.n() as f64).max(1.0);
    let mut upper = check_condition(m, hi, tol)?;
    while !upper.valid {
        if hi >= GAMMA_CEILING {
            return Ok(GammaCertificate {
                psd_min_eig: upper.psd_min_eig,
                ..GammaCertificate::infeasible(GammaMethod::Bisection)
            });
        }
        lo = hi;
        hi *= 2.0;
        upper = check_condition(m, hi, tol)?;
    }
    while hi - lo > 1e-9 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        let c = check_condition(m, mid, tol)?;
        if c.valid {
            hi = mid;
            upper = c;
        } else {
            lo = mid;
        }
    }
    Ok(GammaCertificate { method: GammaMethod::Bisection, ..upper })
}

/// Limited simultaneous updates: `gamma = A_max / alpha_min`.
pub fn gamma_limited(b: &StructureBounds) -> GammaCertificate {
    if b.alpha_min <= 0.0 {
        return GammaCertificate::infeasible(GammaMethod::ThmLimited);
    }
    GammaCertificate::formula(b.a_total_max / b.alpha_min, GammaMethod::ThmLimited)
}

/// Uncorrelated coefficients / updates / transmissions. The caller passes the
/// covariance verdict for `case`; an unverified case is refused.
pub fn gamma_uncorrelated(
    b: &StructureBounds,
    case: CorrelationCase,
    verdict: &CovarianceVerdict,
) -> Result<GammaCertificate> {
    if !verdict.holds {
        return Err(Error::Precondition(format!(
            "coefficients are correlated for case {case:?} (max |cov| = {:.3e})",
            verdict.max_violation
        )));
    }
    let (numerator, method) = match case {
        CorrelationCase::Coefficients => (b.a_ind_max, GammaMethod::ThmUncorrA),
        CorrelationCase::Updates => (b.a_row_max, GammaMethod::ThmUncorrB),
        CorrelationCase::Transmissions => (b.a_col_max, GammaMethod::ThmUncorrC),
    };
    if b.alpha_min <= 0.0 {
        return Ok(GammaCertificate::infeasible(method));
    }
    Ok(GammaCertificate::formula(numerator / b.alpha_min, method))
}

/// From `E[L*11*L] <= beta E[L + L*]`: `gamma = beta / alpha_min`.
pub fn gamma_from_beta(beta: f64, alpha_min: f64) -> Result<GammaCertificate> {
    if !(beta >= 0.0) {
        return Err(Error::Precondition(format!("beta = {beta} must be nonnegative")));
    }
    if alpha_min <= 0.0 {
        return Ok(GammaCertificate::infeasible(GammaMethod::LemmaBeta));
    }
    Ok(GammaCertificate::formula(beta / alpha_min, GammaMethod::LemmaBeta))
}

/// Probabilistic broadcast on a symmetric graph: `gamma = (W_max + 1) q / (1 - q)`.
pub fn gamma_pbga(w_max: f64, q: f64) -> Result<GammaCertificate> {
    if !(q > 0.0 && q < 1.0) || !(w_max >= 0.0) {
        return Err(Error::Precondition(format!("need q in (0,1) and W_max >= 0, got q = {q}, W_max = {w_max}")));
    }
    Ok(GammaCertificate::formula((w_max + 1.0) * q / (1.0 - q), GammaMethod::PropPbga))
}

/// The closed-form certificate that applies to the model's law.
///
/// SAGA uses the uncorrelated-updates value: rows are drawn independently by
/// construction, and the covariance check confirms it whenever the support is
/// small enough to enumerate. PBGA uses its own formula when `W` is symmetric.
pub fn theorem_gamma(model: &UpdateModel) -> Result<GammaCertificate> {
    let b = model.structure_bounds();
    match model.kind() {
        ModelKind::Aaga | ModelKind::Bga => Ok(gamma_limited(&b)),
        ModelKind::Saga => match model.covariance_structure(CorrelationCase::Updates, DEFAULT_EVENT_BUDGET) {
            Ok(v) if v.holds => gamma_uncorrelated(&b, CorrelationCase::Updates, &v),
            Ok(_) => Ok(gamma_limited(&b)),
            Err(Error::Capacity { .. }) => {
                let by_construction = CovarianceVerdict { holds: true, max_violation: 0.0 };
                gamma_uncorrelated(&b, CorrelationCase::Updates, &by_construction)
            }
            Err(e) => Err(e),
        },
        ModelKind::Pbga if model.graph().is_symmetric(1e-12) => {
            if model.q() >= 1.0 {
                return Ok(GammaCertificate::infeasible(GammaMethod::PropPbga));
            }
            gamma_pbga(model.graph().stats().w_max, model.q())
        }
        ModelKind::Pbga => Ok(gamma_limited(&b)),
    }
}

/// `gamma / (n + gamma) * v0`.
pub fn deviation_bound(gamma: f64, n: usize, v0: f64) -> f64 {
    if gamma.is_infinite() {
        return v0;
    }
    gamma / (n as f64 + gamma) * v0
}

/// Tests that `E[C(x(t+1)) | x(t)] <= C(x(t))` for `C(y) = y*(11* + gamma I)y`,
/// i.e. that `Q - E[(I-L)* Q (I-L)]` is PSD with `Q = 11* + gamma I`.
pub fn supermartingale_gap(events: &[LaplacianEvent], n: usize, gamma: f64, tol: f64) -> Result<PsdVerdict> {
    check_distribution(events, 1e-10)?;
    let delta = lyapunov_decrement(events, n, gamma);
    is_psd(&delta, tol)
}

/// `Q - sum_e p_e (I - L_e)* Q (I - L_e)`.
pub fn lyapunov_decrement(events: &[LaplacianEvent], n: usize, gamma: f64) -> Matrix {
    let id = Matrix::identity(n, n);
    let q = Matrix::from_element(n, n, 1.0) + &id * gamma;
    let mut expected = Matrix::zeros(n, n);
    for e in events {
        let step = &id - e.laplacian(n);
        expected += (step.transpose() * &q * &step) * e.probability;
    }
    let delta = q - expected;
    (&delta + delta.transpose()) * 0.5
}

/// `(sum c)(sum c z^2) - (sum c z)^2`, nonnegative for nonnegative `c`.
pub fn weighted_cauchy_schwarz_gap(c: &[f64], z: &[f64]) -> f64 {
    let total: f64 = c.iter().sum();
    let first: f64 = c.iter().zip(z).map(|(c, z)| c * z).sum();
    let second: f64 = c.iter().zip(z).map(|(c, z)| c * z * z).sum();
    total * second - first * first
}

/// `(1 - alpha_min)(L + L*) - L*L` for a single Laplacian.
pub fn self_confidence_gap(lap: &Matrix, alpha_min: f64) -> Matrix {
    (lap + lap.transpose()) * (1.0 - alpha_min) - lap.transpose() * lap
}

/// Certificate plus the deviation bound it implies for one initial state.
#[derive(Debug, Clone, Serialize)]
pub struct BoundReport {
    pub gamma: f64,
    pub n: usize,
    pub v0: f64,
    pub bound: f64,
    pub comparisons: Vec<PriorBound>,
}

impl BoundReport {
    pub fn new(gamma: f64, n: usize, v0: f64) -> Self {
        Self { gamma, n, v0, bound: deviation_bound(gamma, n, v0), comparisons: Vec::new() }
    }
}

/// A deviation bound from an earlier analysis, or the reason it does not apply.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriorBound {
    pub name: &'static str,
    pub value: Option<f64>,
    pub error: Option<String>,
}

impl PriorBound {
    fn from_result(name: &'static str, r: std::result::Result<f64, String>) -> Self {
        match r {
            Ok(v) => Self { name, value: Some(v), error: None },
            Err(e) => Self { name, value: None, error: Some(e) },
        }
    }
}

/// Inputs of the comparison bounds: the initial disagreement `v0` and, for the
/// i.i.d.-initial-state bound, the per-node variance `sigma2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct PriorInputs {
    pub v0: Option<f64>,
    pub sigma2: Option<f64>,
}

/// Comparison bounds applicable to `kind`, evaluated on `g`.
///
/// - `bga_tca`: `v0 (1 - (l1 / lN) / (1 - q lN / (2N)))`, `l1`, `lN` the extreme
///   nonzero Laplacian eigenvalues of a connected graph.
/// - `bga_ffpf`: `2 v0 q/(1-q) d_max^2 / (N l1)`.
/// - `aaga_ffsz`: `(q - q/N) / (1 - q + q/N) * sigma2 / N`.
/// - `saga_ffsz`: `q/(1-q) / (2N) / (1 - esr(W)) * v0`.
pub fn prior_bounds(g: &WeightedGraph, kind: ModelKind, q: f64, inputs: PriorInputs) -> Vec<PriorBound> {
    let n = g.n() as f64;
    let need_v0 = || inputs.v0.ok_or_else(|| "initial disagreement v0 not supplied".to_string());
    let spectrum = || graph_spectrum(g).map_err(|e| e.to_string());
    match kind {
        ModelKind::Aaga => {
            let r = inputs
                .sigma2
                .ok_or_else(|| "initial variance sigma2 not supplied".to_string())
                .map(|s2| (q - q / n) / (1.0 - q + q / n) * s2 / n);
            vec![PriorBound::from_result("aaga_ffsz", r)]
        }
        ModelKind::Bga => {
            let connected = || {
                let s = spectrum()?;
                if !s.is_connected() {
                    return Err(format!("graph is disconnected ({} zero Laplacian eigenvalues)", s.zero_count));
                }
                Ok(s)
            };
            let tca = connected().and_then(|s| {
                let v0 = need_v0()?;
                let (l1, ln) = (s.lambda_1.unwrap(), s.lambda_last.unwrap());
                Ok(v0 * (1.0 - (l1 / ln) / (1.0 - 0.5 * q / n * ln)))
            });
            let ffpf = connected().and_then(|s| {
                let v0 = need_v0()?;
                let d = g.stats().d_max as f64;
                Ok(2.0 * v0 * q / (1.0 - q) * d * d / (n * s.lambda_1.unwrap()))
            });
            vec![PriorBound::from_result("bga_tca", tca), PriorBound::from_result("bga_ffpf", ffpf)]
        }
        ModelKind::Saga => {
            let r = spectrum().and_then(|s| {
                let v0 = need_v0()?;
                if s.esr >= 1.0 - 1e-12 {
                    return Err(format!("esr(W) = {} leaves the bound undefined", s.esr));
                }
                Ok(q / (1.0 - q) / (2.0 * n) / (1.0 - s.esr) * v0)
            });
            vec![PriorBound::from_result("saga_ffsz", r)]
        }
        ModelKind::Pbga => Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{generate, laplacian, GraphKind};
    use crate::models::stream_rng;
    use approx::assert_abs_diff_eq;
    use rand::Rng;

    fn aaga_pair(q: f64) -> UpdateModel {
        let g = WeightedGraph::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        if q < 1.0 {
            UpdateModel::new(ModelKind::Aaga, g, q).unwrap()
        } else {
            UpdateModel::degenerate(ModelKind::Aaga, g, q).unwrap()
        }
    }

    fn zero_model() -> UpdateModel {
        UpdateModel::new(ModelKind::Pbga, WeightedGraph::empty(3).unwrap(), 0.5).unwrap()
    }

    #[test]
    fn condition_on_tight_pair() {
        let m = aaga_pair(0.5).exact_moments().unwrap();
        let c = check_condition(&m, 1.0, CERT_TOL).unwrap();
        assert!(c.valid);
        assert_abs_diff_eq!(c.psd_min_eig.unwrap(), 0.0, epsilon = 1e-15);
        assert!(!check_condition(&m, 0.5, CERT_TOL).unwrap().valid);
        let z = zero_model().exact_moments().unwrap();
        assert!(check_condition(&z, 1e-9, CERT_TOL).unwrap().valid);
    }

    #[test]
    fn condition_refuses_drifting_average() {
        let g = WeightedGraph::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let m = UpdateModel::new(ModelKind::Aaga, g, 0.5).unwrap().exact_moments().unwrap();
        assert!(matches!(check_condition(&m, 1.0, CERT_TOL), Err(Error::Precondition(_))));
        assert!(matches!(minimal_gamma(&m, CERT_TOL), Err(Error::Precondition(_))));
    }

    #[test]
    fn minimal_gamma_matches_scalar_reduction() {
        for q in [0.5, 0.25, 0.1, 0.9] {
            let m = aaga_pair(q).exact_moments().unwrap();
            let c = minimal_gamma(&m, CERT_TOL).unwrap();
            assert!(c.valid);
            assert_eq!(c.method, GammaMethod::Bisection);
            assert_abs_diff_eq!(c.gamma.unwrap(), q / (1.0 - q), epsilon = 1e-8 * (1.0 + q / (1.0 - q)));
        }
    }

    #[test]
    fn minimal_gamma_degenerate_is_infeasible() {
        let m = aaga_pair(1.0).exact_moments().unwrap();
        let c = minimal_gamma(&m, CERT_TOL).unwrap();
        assert!(c.is_infeasible());
        assert!(!c.valid);
        assert!(gamma_limited(&aaga_pair(1.0).structure_bounds()).is_infeasible());
    }

    #[test]
    fn minimal_gamma_of_zero_model() {
        let c = minimal_gamma(&zero_model().exact_moments().unwrap(), CERT_TOL).unwrap();
        assert_eq!(c.gamma, Some(0.0));
        assert!(c.valid);
    }

    #[test]
    fn closed_form_gammas() {
        assert_eq!(gamma_limited(&aaga_pair(0.5).structure_bounds()).gamma, Some(1.0));
        let bga = UpdateModel::new(ModelKind::Bga, generate(GraphKind::Cycle, 4, 1.0, 0).unwrap(), 0.5).unwrap();
        assert_eq!(gamma_limited(&bga.structure_bounds()).gamma, Some(2.0));
        let b = StructureBounds { alpha_min: 0.1, a_total_max: 0.9, a_ind_max: 0.3, a_row_max: 0.3, a_col_max: 0.3 };
        assert_abs_diff_eq!(gamma_limited(&b).gamma.unwrap(), 9.0, epsilon = 1e-14);

        let ok = CovarianceVerdict { holds: true, max_violation: 0.0 };
        for (q, want) in [(0.5, 1.0), (0.2, 0.25)] {
            let saga = UpdateModel::new(ModelKind::Saga, generate(GraphKind::Cycle, 4, 0.5, 0).unwrap(), q).unwrap();
            let c = gamma_uncorrelated(&saga.structure_bounds(), CorrelationCase::Updates, &ok).unwrap();
            assert_abs_diff_eq!(c.gamma.unwrap(), want, epsilon = 1e-15);
            assert_eq!(c.method, GammaMethod::ThmUncorrB);
        }
        let b = StructureBounds { alpha_min: 0.6, a_total_max: 1.0, a_ind_max: 0.3, a_row_max: 1.0, a_col_max: 1.0 };
        assert_abs_diff_eq!(
            gamma_uncorrelated(&b, CorrelationCase::Coefficients, &ok).unwrap().gamma.unwrap(),
            0.5,
            epsilon = 1e-15
        );
        let bad = CovarianceVerdict { holds: false, max_violation: 0.01 };
        assert!(matches!(
            gamma_uncorrelated(&b, CorrelationCase::Updates, &bad),
            Err(Error::Precondition(_))
        ));

        assert_eq!(gamma_from_beta(1.0, 0.5).unwrap().gamma, Some(2.0));
        assert_eq!(gamma_from_beta(0.0, 0.5).unwrap().gamma, Some(0.0));
        assert_eq!(gamma_from_beta(0.5, 0.5).unwrap().gamma, Some(1.0));
        assert!(gamma_from_beta(0.5, 0.0).unwrap().is_infeasible());

        assert_eq!(gamma_pbga(3.0, 0.5).unwrap().gamma, Some(4.0));
        assert_eq!(gamma_pbga(0.0, 0.5).unwrap().gamma, Some(1.0));
        assert_abs_diff_eq!(gamma_pbga(2.0, 0.25).unwrap().gamma.unwrap(), 1.0, epsilon = 1e-15);
        assert!(gamma_pbga(2.0, 1.0).is_err());
    }

    #[test]
    fn empty_pbga_formula_is_trivially_valid() {
        let z = zero_model();
        let c = theorem_gamma(&z).unwrap().verify(&z.exact_moments().unwrap(), CERT_TOL).unwrap();
        assert_eq!(c.gamma, Some(1.0));
        assert!(c.valid);
    }

    #[test]
    fn deviation_bound_examples() {
        assert_abs_diff_eq!(deviation_bound(1.0, 2, 0.25), 1.0 / 12.0, epsilon = 1e-16);
        assert_eq!(deviation_bound(0.0, 7, 3.0), 0.0);
        assert_abs_diff_eq!(deviation_bound(1e9, 10, 0.25), 0.25, epsilon = 1e-8);
        assert_eq!(deviation_bound(f64::INFINITY, 10, 0.25), 0.25);
        let mut last = 0.0;
        for k in 0..40 {
            let b = deviation_bound(0.1 * k as f64, 5, 1.0);
            assert!(b >= last && b <= 1.0);
            last = b;
        }
    }

    #[test]
    fn supermartingale_examples() {
        let events = aaga_pair(0.5).enumerate_events(16).unwrap();
        let tight = supermartingale_gap(&events, 2, 1.0, CERT_TOL).unwrap();
        assert!(tight.psd);
        assert_abs_diff_eq!(tight.min_eig, 0.0, epsilon = 1e-14);
        assert!(!supermartingale_gap(&events, 2, 0.01, CERT_TOL).unwrap().psd);

        let z = zero_model().enumerate_events(16).unwrap();
        assert!(supermartingale_gap(&z, 3, 1.0, CERT_TOL).unwrap().psd);
        assert_eq!(lyapunov_decrement(&z, 3, 1.0).amax(), 0.0);

        let mut broken = events.clone();
        broken[0].probability = 0.3;
        assert!(matches!(supermartingale_gap(&broken, 2, 1.0, CERT_TOL), Err(Error::Structural(_))));
    }

    #[test]
    fn decrement_equals_condition_matrix() {
        let bga = UpdateModel::new(ModelKind::Bga, generate(GraphKind::Star, 4, 1.0, 0).unwrap(), 0.3).unwrap();
        let events = bga.enumerate_events(64).unwrap();
        let m = bga.exact_moments().unwrap();
        for gamma in [0.0, 0.7, 3.0] {
            let diff = lyapunov_decrement(&events, 4, gamma) - condition_matrix(&m, gamma);
            assert!(diff.amax() < 1e-12);
        }
    }

    #[test]
    fn self_confidence_gap_on_balanced_laplacians() {
        let mut rng = stream_rng(5, 0);
        for _ in 0..200 {
            let n = rng.gen_range(2..7);
            // Doubly substochastic weights: convex mix of permutation matrices scaled below 1.
            let mut a = Matrix::zeros(n, n);
            for _ in 0..3 {
                let mut perm: Vec<usize> = (0..n).collect();
                for i in (1..n).rev() {
                    perm.swap(i, rng.gen_range(0..=i));
                }
                let w = rng.gen::<f64>() / 3.0;
                for i in 0..n {
                    if perm[i] != i {
                        a[(i, perm[i])] += w;
                    }
                }
            }
            let lap = crate::graph::laplacian_of(&a).unwrap();
            let alpha = 1.0 - a.row_iter().map(|r| r.sum()).fold(0.0, f64::max);
            let gap = self_confidence_gap(&lap, alpha);
            let scale = lap.norm().max(1e-12);
            assert!(is_psd(&gap, 1e-10 * scale).unwrap().psd);
        }
    }

    #[test]
    fn prior_bound_examples() {
        let k10 = generate(GraphKind::Complete, 10, 1.0 / 90.0, 0).unwrap();
        let aaga = prior_bounds(&k10, ModelKind::Aaga, 0.5, PriorInputs { v0: None, sigma2: Some(1.0) });
        assert_abs_diff_eq!(aaga[0].value.unwrap(), 0.45 / 0.55 / 10.0, epsilon = 1e-15);

        let c8 = generate(GraphKind::Cycle, 8, 1.0, 0).unwrap();
        let bga = prior_bounds(&c8, ModelKind::Bga, 0.5, PriorInputs { v0: Some(1.0), sigma2: None });
        let ffpf = bga.iter().find(|b| b.name == "bga_ffpf").unwrap().value.unwrap();
        assert_abs_diff_eq!(ffpf, 2.0 * 4.0 / (8.0 * (2.0 - 2f64.sqrt())), epsilon = 1e-10);
        assert_abs_diff_eq!(ffpf, 1.70711, epsilon = 1e-5);
        assert!(bga.iter().find(|b| b.name == "bga_tca").unwrap().value.is_some());

        let half8 = generate(GraphKind::Cycle, 8, 0.5, 0).unwrap();
        let saga = prior_bounds(&half8, ModelKind::Saga, 0.5, PriorInputs { v0: Some(1.0), sigma2: None });
        let want = 1.0 / 16.0 / (1.0 - (std::f64::consts::PI / 4.0).cos());
        assert_abs_diff_eq!(saga[0].value.unwrap(), want, epsilon = 1e-10);
    }

    #[test]
    fn prior_bounds_report_inapplicable() {
        let split = WeightedGraph::from_rows(&[
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        let r = prior_bounds(&split, ModelKind::Bga, 0.5, PriorInputs { v0: Some(1.0), sigma2: None });
        assert!(r.iter().all(|b| b.value.is_none() && b.error.as_deref().unwrap().contains("disconnected")));
        let directed = WeightedGraph::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let r = prior_bounds(&directed, ModelKind::Saga, 0.5, PriorInputs { v0: Some(1.0), sigma2: None });
        assert!(r[0].error.as_deref().unwrap().contains("symmetric"));
        let r = prior_bounds(&directed, ModelKind::Aaga, 0.5, PriorInputs::default());
        assert!(r[0].value.is_none());
        assert!(prior_bounds(&directed, ModelKind::Pbga, 0.5, PriorInputs::default()).is_empty());
    }

    #[test]
    fn cycle_degree_ratio_grows_linearly() {
        for n in [8, 16, 32] {
            let g = generate(GraphKind::Cycle, n, 1.0, 0).unwrap();
            let l1 = graph_spectrum(&g).unwrap().lambda_1.unwrap();
            let ratio = 4.0 / (n as f64 * l1);
            assert!(ratio >= n as f64 / std::f64::consts::PI.powi(2));
        }
        let _ = laplacian(&generate(GraphKind::Cycle, 4, 1.0, 0).unwrap());
    }

    #[test]
    fn cauchy_schwarz_gap_is_nonnegative() {
        let mut rng = stream_rng(2, 0);
        for _ in 0..1000 {
            let m = rng.gen_range(1..12);
            let c: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 5.0).collect();
            let z: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * 20.0 - 10.0).collect();
            let scale: f64 = c.iter().sum::<f64>() * c.iter().zip(&z).map(|(c, z)| c * z * z).sum::<f64>();
            assert!(weighted_cauchy_schwarz_gap(&c, &z) >= -1e-12 * scale.max(1.0));
        }
    }

    #[test]
    fn theorem_gamma_satisfies_condition() {
        for model in crate::models::tests::standard_models() {
            let m = model.exact_moments().unwrap();
            let thm = theorem_gamma(&model).unwrap().verify(&m, CERT_TOL).unwrap();
            assert!(thm.valid, "{:?} q={} n={}: {thm:?}", model.kind(), model.q(), model.n());
            let min = minimal_gamma(&m, CERT_TOL).unwrap();
            assert!(min.gamma.unwrap() <= thm.gamma.unwrap() + 1e-8);
        }
    }

    #[test]
    fn beta_route_on_aaga() {
        let model = aaga_pair(0.5);
        let m = model.exact_moments().unwrap();
        let c = gamma_from_beta(model.q(), model.structure_bounds().alpha_min).unwrap();
        assert!(c.verify(&m, CERT_TOL).unwrap().valid);
    }

    #[test]
    fn condition_and_supermartingale_agree() {
        let models = crate::models::tests::standard_models();
        let mut rng = stream_rng(11, 0);
        let mut decided = 0;
        for _ in 0..200 {
            let model = &models[rng.gen_range(0..models.len())];
            let gamma = rng.gen::<f64>() * 4.0;
            let events = model.enumerate_events(1 << 12).unwrap();
            let cond = check_condition(&model.exact_moments().unwrap(), gamma, CERT_TOL).unwrap();
            let gap = supermartingale_gap(&events, model.n(), gamma, CERT_TOL).unwrap();
            // Both matrices annihilate 1, so the verdict is decided on its complement.
            let mut shifted = condition_matrix(&model.exact_moments().unwrap(), gamma);
            let lift = frobenius(&shifted).max(1.0) / model.n() as f64;
            shifted.add_scalar_mut(lift);
            let margin = crate::spectral::eig_sym(&shifted).unwrap().values[0];
            if margin.abs() > 10.0 * CERT_TOL {
                assert_eq!(cond.valid, gap.psd);
                decided += 1;
            }
        }
        assert!(decided > 150);
    }

    #[test]
    fn gershgorin_radius() {
        let mut rng = stream_rng(3, 0);
        for _ in 0..100 {
            let n = rng.gen_range(2..10);
            let mut w = Matrix::zeros(n, n);
            for i in 0..n {
                for j in 0..i {
                    let v = if rng.gen_bool(0.6) { rng.gen::<f64>() } else { 0.0 };
                    w[(i, j)] = v;
                    w[(j, i)] = v;
                }
            }
            let g = WeightedGraph::new(w).unwrap();
            let values = crate::spectral::eig_sym(&laplacian(&g)).unwrap().values;
            let rho = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(rho <= 2.0 * g.stats().w_max * (1.0 + 1e-12) + 1e-12);
        }
    }

    #[test]
    fn aaga_recovers_independent_start_bound() {
        for n in 2..=64 {
            let w = 1.0 / (n * (n - 1)) as f64;
            let g = generate(GraphKind::Complete, n, w, 0).unwrap();
            for k in 1..=9 {
                let q = k as f64 / 10.0;
                let ours = deviation_bound(q / (1.0 - q), n, (1.0 - 1.0 / n as f64) * 2.0);
                let theirs = prior_bounds(&g, ModelKind::Aaga, q, PriorInputs { v0: None, sigma2: Some(2.0) });
                let theirs = theirs[0].value.unwrap();
                assert!((ours - theirs).abs() <= 1e-12 * theirs);
            }
        }
    }
}
