//! Exact second-moment propagation.
//!
//! For a finite law `{(p_e, L_e)}` the second moment `P(t) = E[x(t) x(t)*]`
//! evolves as `P(t+1) = sum_e p_e (I - L_e) P(t) (I - L_e)*`, which gives the
//! mean-square drift of the average and the expected disagreement without
//! sampling.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{average, Matrix};
use crate::models::{check_distribution, Coefficient, LaplacianEvent, MomentSet};
use crate::spectral::frobenius;

pub const STEADY_TOL: f64 = 1e-13;
pub const STEADY_PATIENCE: usize = 5;
pub const STEADY_MAX_STEPS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct SecondMoment {
    pub t: usize,
    /// `E[x(t) x(t)*]`.
    pub p: Matrix,
    /// `E[x(t)]`.
    pub mean: Vec<f64>,
}

impl SecondMoment {
    pub fn n(&self) -> usize {
        self.mean.len()
    }

    /// `E[(xbar(t))^2]`.
    pub fn mean_square_average(&self) -> f64 {
        let n = self.n() as f64;
        self.p.sum() / (n * n)
    }

    /// `E[V(x(t))] = (trace P - 1*P1 / N) / N`.
    pub fn disagreement(&self) -> f64 {
        let n = self.n() as f64;
        ((self.p.trace() - self.p.sum() / n) / n).max(0.0)
    }

    /// `E[C(x(t))] = 1*P1 + gamma trace P`.
    pub fn lyapunov(&self, gamma: f64) -> f64 {
        self.p.sum() + gamma * self.p.trace()
    }
}

/// Steps the second moment one law application at a time.
pub struct Propagator<'a> {
    events: &'a [LaplacianEvent],
    el: Matrix,
    state: SecondMoment,
    next: Matrix,
    work: Matrix,
    rows: Vec<f64>,
}

impl<'a> Propagator<'a> {
    pub fn new(events: &'a [LaplacianEvent], x0: &[f64]) -> Result<Self> {
        check_distribution(events, 1e-10)?;
        let n = x0.len();
        if n == 0 {
            return Err(Error::Structural("initial state is empty".into()));
        }
        if events.iter().flat_map(|e| &e.coefficients).any(|c| c.row >= n || c.col >= n) {
            return Err(Error::Structural(format!("event touches a node outside 0..{n}")));
        }
        let mut el = Matrix::zeros(n, n);
        for e in events {
            for c in &e.coefficients {
                el[(c.row, c.col)] -= e.probability * c.value;
                el[(c.row, c.row)] += e.probability * c.value;
            }
        }
        let x = Matrix::from_column_slice(n, 1, x0);
        Ok(Self {
            events,
            el,
            state: SecondMoment { t: 0, p: &x * x.transpose(), mean: x0.to_vec() },
            next: Matrix::zeros(n, n),
            work: Matrix::zeros(n, n),
            rows: Vec::new(),
        })
    }

    pub fn current(&self) -> &SecondMoment {
        &self.state
    }

    pub fn step(&mut self) -> &SecondMoment {
        self.next.fill(0.0);
        for e in self.events {
            if e.probability == 0.0 {
                continue;
            }
            self.work.copy_from(&self.state.p);
            left_apply(&e.coefficients, &mut self.work, &mut self.rows);
            right_apply(&e.coefficients, &mut self.work);
            self.next += &self.work * e.probability;
        }
        let p = (&self.next + self.next.transpose()) * 0.5;
        let drift = &self.el * Matrix::from_column_slice(self.state.mean.len(), 1, &self.state.mean);
        for (m, d) in self.state.mean.iter_mut().zip(drift.iter()) {
            *m -= d;
        }
        self.state.p = p;
        self.state.t += 1;
        &self.state
    }
}

/// `M <- (I - L) M`: row operations, reading the pre-update rows.
fn left_apply(coefs: &[Coefficient], m: &mut Matrix, buf: &mut Vec<f64>) {
    let n = m.ncols();
    buf.clear();
    buf.resize(coefs.len() * n, 0.0);
    for (k, c) in coefs.iter().enumerate() {
        for j in 0..n {
            buf[k * n + j] = c.value * (m[(c.col, j)] - m[(c.row, j)]);
        }
    }
    for (k, c) in coefs.iter().enumerate() {
        for j in 0..n {
            m[(c.row, j)] += buf[k * n + j];
        }
    }
}

/// `M <- M (I - L)*`: column operations, reading the pre-update columns.
fn right_apply(coefs: &[Coefficient], m: &mut Matrix) {
    let deltas: Vec<_> = coefs.iter().map(|c| (m.column(c.col) - m.column(c.row)) * c.value).collect();
    for (c, d) in coefs.iter().zip(deltas) {
        let mut col = m.column_mut(c.row);
        col += d;
    }
}

/// Exact `P(0..=steps)`.
pub fn propagate(events: &[LaplacianEvent], x0: &[f64], steps: usize) -> Result<Vec<SecondMoment>> {
    let mut prop = Propagator::new(events, x0)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(prop.current().clone());
    for _ in 0..steps {
        out.push(prop.step().clone());
    }
    Ok(out)
}

fn require_mean_preserving(events: &[LaplacianEvent], n: usize) -> Result<()> {
    let m = MomentSet::from_events(events, n)?;
    if m.is_mean_preserving(1e-9 * frobenius(&m.el).max(1.0)) {
        Ok(())
    } else {
        Err(Error::Precondition(
            "1* E[L] != 0: the mean-square drift of the average is not defined by the second moment alone".into(),
        ))
    }
}

/// One row of an oracle trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleRow {
    pub t: usize,
    /// `E[(xbar(t) - xbar(0))^2]`.
    pub mse: f64,
    /// `E[V(x(t))]`.
    pub disagreement: f64,
    /// `E[C(x(t))]`, when a `gamma` was supplied.
    pub lyapunov: Option<f64>,
}

/// Mean-square drift, expected disagreement and (optionally) the Lyapunov
/// value at every step `0..=steps`.
pub fn trajectory(events: &[LaplacianEvent], x0: &[f64], steps: usize, gamma: Option<f64>) -> Result<Vec<OracleRow>> {
    require_mean_preserving(events, x0.len())?;
    let xbar0 = average(x0)?;
    let mut prop = Propagator::new(events, x0)?;
    let row = |s: &SecondMoment| OracleRow {
        t: s.t,
        mse: (s.mean_square_average() - xbar0 * xbar0).max(0.0),
        disagreement: s.disagreement(),
        lyapunov: gamma.map(|g| s.lyapunov(g)),
    };
    let mut out = Vec::with_capacity(steps + 1);
    out.push(row(prop.current()));
    for _ in 0..steps {
        out.push(row(prop.step()));
    }
    Ok(out)
}

/// `E[(xbar(t) - xbar(0))^2]` for `t = 0..=steps`.
pub fn mse_trajectory(events: &[LaplacianEvent], x0: &[f64], steps: usize) -> Result<Vec<f64>> {
    Ok(trajectory(events, x0, steps, None)?.into_iter().map(|r| r.mse).collect())
}

/// `E[V(x(t))]` for `t = 0..=steps`.
pub fn expected_disagreement(events: &[LaplacianEvent], x0: &[f64], steps: usize) -> Result<Vec<f64>> {
    Ok(propagate(events, x0, steps)?.iter().map(SecondMoment::disagreement).collect())
}

/// `E[C(x(t))]` with `C(y) = y*(11* + gamma I)y`, for `t = 0..=steps`.
pub fn lyapunov_check(events: &[LaplacianEvent], x0: &[f64], gamma: f64, steps: usize) -> Result<Vec<f64>> {
    Ok(propagate(events, x0, steps)?.iter().map(|s| s.lyapunov(gamma)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyState {
    pub mse: f64,
    pub disagreement: f64,
    pub steps: usize,
    pub converged: bool,
}

/// Iterates until the MSE changes by at most `STEADY_TOL * max(1, mse)` for
/// `STEADY_PATIENCE` consecutive steps, or `max_steps` is reached.
pub fn steady_state_mse(events: &[LaplacianEvent], x0: &[f64], max_steps: usize) -> Result<SteadyState> {
    require_mean_preserving(events, x0.len())?;
    let xbar0 = average(x0)?;
    let mut prop = Propagator::new(events, x0)?;
    let mse_of = |s: &SecondMoment| (s.mean_square_average() - xbar0 * xbar0).max(0.0);
    let mut last = mse_of(prop.current());
    let mut quiet = 0;
    for _ in 0..max_steps {
        let s = prop.step();
        let mse = mse_of(s);
        if (mse - last).abs() <= STEADY_TOL * mse.max(1.0) {
            quiet += 1;
        } else {
            quiet = 0;
        }
        last = mse;
        if quiet >= STEADY_PATIENCE {
            return Ok(SteadyState { mse, disagreement: s.disagreement(), steps: s.t, converged: true });
        }
    }
    let s = prop.current();
    Ok(SteadyState { mse: last, disagreement: s.disagreement(), steps: s.t, converged: false })
}
