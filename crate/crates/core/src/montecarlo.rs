//! Seeded Monte Carlo simulation of `x(t+1) = x(t) - L(t) x(t)`.
//!
//! Trial `k` draws from stream `k` of the master seed. Trials are grouped in
//! fixed-size blocks whose statistics are merged in block order, so results
//! do not depend on the number of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{average, disagreement};
use crate::models::{apply_coefficients, stream_rng, Coefficient, UpdateModel};

/// Width of confidence intervals, in standard errors.
pub const CI_SIGMAS: f64 = 4.0;
const BLOCK: usize = 64;

/// Which steps are recorded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Stride {
    /// Every step up to 100, then about 20 points per decade, plus the last step.
    #[default]
    Default,
    Every(usize),
}

/// Recorded steps in `0..=steps`, ascending.
pub fn record_times(steps: usize, stride: Stride) -> Vec<usize> {
    let mut times: Vec<usize> = match stride {
        Stride::Every(k) => (0..=steps).step_by(k.max(1)).collect(),
        Stride::Default => {
            let mut t: Vec<usize> = (0..=steps.min(100)).collect();
            let mut k = 1;
            loop {
                let next = (100.0 * 10f64.powf(k as f64 / 20.0)).round() as usize;
                if next > steps {
                    break;
                }
                t.push(next);
                k += 1;
            }
            t
        }
    };
    if times.last() != Some(&steps) {
        times.push(steps);
    }
    times.dedup();
    times
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryPoint {
    pub t: usize,
    pub average: f64,
    pub disagreement: f64,
}

/// One trajectory, summarized at every step. Uses stream 0 of `seed`.
pub fn run_trajectory(model: &UpdateModel, x0: &[f64], steps: usize, seed: u64) -> Result<Vec<TrajectoryPoint>> {
    check_state(model, x0)?;
    let mut rng = stream_rng(seed, 0);
    let mut x = x0.to_vec();
    let (mut coefs, mut scratch) = (Vec::new(), Vec::new());
    let point = |t, x: &[f64]| TrajectoryPoint { t, average: mean(x), disagreement: variance(x) };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(point(0, &x));
    for t in 1..=steps {
        model.sample_into(&mut rng, &mut coefs);
        apply_coefficients(&coefs, &mut x, &mut scratch);
        out.push(point(t, &x));
    }
    Ok(out)
}

fn check_state(model: &UpdateModel, x0: &[f64]) -> Result<()> {
    if x0.len() != model.n() {
        return Err(Error::Structural(format!("initial state has length {}, model has {} nodes", x0.len(), model.n())));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("initial state has non-finite entries".into()));
    }
    Ok(())
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn variance(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / x.len() as f64
}

/// Running mean and centered sum of squares, mergeable in a fixed order.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Welford {
    count: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    pub fn push(&mut self, v: f64) {
        self.count += 1;
        let d = v - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (v - self.mean);
    }

    pub fn merge(&mut self, other: &Welford) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let d = other.mean - self.mean;
        self.mean += d * other.count as f64 / n;
        self.m2 += other.m2 + d * d * (self.count as f64) * (other.count as f64) / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn sample_variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// `CI_SIGMAS` standard errors of the mean.
    pub fn ci_half_width(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        CI_SIGMAS * (self.sample_variance() / self.count as f64).sqrt()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PointStats {
    sq_dev: Welford,
    avg: Welford,
    dis: Welford,
}

impl PointStats {
    fn merge(&mut self, o: &PointStats) {
        self.sq_dev.merge(&o.sq_dev);
        self.avg.merge(&o.avg);
        self.dis.merge(&o.dis);
    }
}

/// Runs `trials` trajectories in blocks and returns merged per-time statistics.
fn simulate(model: &UpdateModel, x0: &[f64], times: &[usize], trials: usize, master_seed: u64) -> Vec<PointStats> {
    let xbar0 = mean(x0);
    let blocks = trials.div_ceil(BLOCK);
    let per_block: Vec<Vec<PointStats>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut stats = vec![PointStats::default(); times.len()];
            let mut x = x0.to_vec();
            let (mut coefs, mut scratch): (Vec<Coefficient>, _) = (Vec::new(), Vec::new());
            for k in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                let mut rng = stream_rng(master_seed, k as u64);
                x.copy_from_slice(x0);
                let mut t = 0;
                for (slot, &target) in stats.iter_mut().zip(times) {
                    while t < target {
                        model.sample_into(&mut rng, &mut coefs);
                        apply_coefficients(&coefs, &mut x, &mut scratch);
                        t += 1;
                    }
                    let m = mean(&x);
                    slot.sq_dev.push((m - xbar0) * (m - xbar0));
                    slot.avg.push(m);
                    slot.dis.push(variance(&x));
                }
            }
            stats
        })
        .collect();
    let mut total = vec![PointStats::default(); times.len()];
    for block in &per_block {
        for (acc, s) in total.iter_mut().zip(block) {
            acc.merge(s);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MseEstimate {
    pub t: usize,
    /// Sample mean of `(xbar(t) - xbar(0))^2`.
    pub mse_mean: f64,
    pub ci_half_width: f64,
    pub trials: usize,
    /// Sample mean of `V(x(t))`.
    pub v_mean: f64,
}

/// Mean-square drift of the average at the recorded steps.
pub fn estimate_mse(
    model: &UpdateModel,
    x0: &[f64],
    steps: usize,
    trials: usize,
    master_seed: u64,
    stride: Stride,
) -> Result<Vec<MseEstimate>> {
    check_state(model, x0)?;
    if trials < 2 {
        return Err(Error::Config("at least 2 trials are needed for a confidence interval".into()));
    }
    let times = record_times(steps, stride);
    let stats = simulate(model, x0, &times, trials, master_seed);
    Ok(times
        .iter()
        .zip(stats)
        .map(|(&t, s)| MseEstimate {
            t,
            mse_mean: s.sq_dev.mean().max(0.0),
            ci_half_width: s.sq_dev.ci_half_width(),
            trials,
            v_mean: s.dis.mean(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanEstimate {
    pub t: usize,
    /// Sample mean of `xbar(t)`.
    pub mean: f64,
    pub ci_half_width: f64,
}

impl MeanEstimate {
    pub fn contains(&self, v: f64) -> bool {
        (self.mean - v).abs() <= self.ci_half_width
    }
}

/// Sample mean of `xbar(t)` with its CI, at the recorded steps.
pub fn estimate_mean_preservation(
    model: &UpdateModel,
    x0: &[f64],
    steps: usize,
    trials: usize,
    master_seed: u64,
    stride: Stride,
) -> Result<Vec<MeanEstimate>> {
    check_state(model, x0)?;
    if trials < 2 {
        return Err(Error::Config("at least 2 trials are needed for a confidence interval".into()));
    }
    let times = record_times(steps, stride);
    let stats = simulate(model, x0, &times, trials, master_seed);
    Ok(times
        .iter()
        .zip(stats)
        .map(|(&t, s)| MeanEstimate { t, mean: s.avg.mean(), ci_half_width: s.avg.ci_half_width() })
        .collect())
}

/// Per-trial stopping rule for steady-state estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyRule {
    /// A trial stops once `V(x) <= rel_tol * V(x0)`.
    pub rel_tol: f64,
    /// `V` is checked every `check_every` steps (default: `N`).
    pub check_every: Option<usize>,
    pub max_steps: usize,
}

impl Default for SteadyRule {
    fn default() -> Self {
        Self { rel_tol: 1e-6, check_every: None, max_steps: 50_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyEstimate {
    pub mse_mean: f64,
    pub ci_half_width: f64,
    pub trials: usize,
    pub v0: f64,
    pub mean_steps: f64,
    /// Trials that hit `max_steps` before reaching the threshold.
    pub unconverged: usize,
}

/// Mean-square drift of the average at (approximate) consensus.
///
/// Each trial runs until its disagreement falls below `rule.rel_tol * V(x0)`.
/// By the accuracy bound applied from that time on, the drift still to come
/// is at most `gamma / (N + gamma)` of the remaining disagreement.
pub fn estimate_steady_state(
    model: &UpdateModel,
    x0: &[f64],
    trials: usize,
    master_seed: u64,
    rule: SteadyRule,
) -> Result<SteadyEstimate> {
    check_state(model, x0)?;
    if trials < 2 {
        return Err(Error::Config("at least 2 trials are needed for a confidence interval".into()));
    }
    let v0 = disagreement(x0)?;
    let xbar0 = average(x0)?;
    let every = rule.check_every.unwrap_or(model.n()).max(1);
    let threshold = rule.rel_tol * v0;
    let blocks = trials.div_ceil(BLOCK);
    let per_block: Vec<(Welford, Welford, usize)> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let (mut sq, mut steps_taken, mut stuck) = (Welford::default(), Welford::default(), 0);
            let mut x = x0.to_vec();
            let (mut coefs, mut scratch) = (Vec::new(), Vec::new());
            for k in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                let mut rng = stream_rng(master_seed, k as u64);
                x.copy_from_slice(x0);
                let mut t = 0;
                while variance(&x) > threshold {
                    if t >= rule.max_steps {
                        stuck += 1;
                        break;
                    }
                    for _ in 0..every {
                        model.sample_into(&mut rng, &mut coefs);
                        apply_coefficients(&coefs, &mut x, &mut scratch);
                    }
                    t += every;
                }
                let m = mean(&x);
                sq.push((m - xbar0) * (m - xbar0));
                steps_taken.push(t as f64);
            }
            (sq, steps_taken, stuck)
        })
        .collect();
    let (mut sq, mut steps_taken, mut stuck) = (Welford::default(), Welford::default(), 0);
    for (s, st, u) in &per_block {
        sq.merge(s);
        steps_taken.merge(st);
        stuck += u;
    }
    Ok(SteadyEstimate {
        mse_mean: sq.mean().max(0.0),
        ci_half_width: sq.ci_half_width(),
        trials,
        v0,
        mean_steps: steps_taken.mean(),
        unconverged: stuck,
    })
}
