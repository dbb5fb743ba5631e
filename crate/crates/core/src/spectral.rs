//! Dense symmetric eigen-decomposition (cyclic Jacobi), PSD tests and graph
//! spectra used by the comparison bounds.

use serde::Serialize;

use crate::error::{structural, Error, Result};
use crate::graph::{laplacian, Matrix, WeightedGraph};

const MAX_SWEEPS: usize = 50;
const OFF_DIAGONAL_TOL: f64 = 1e-14;
/// Floor applied to matrix norms when forming relative tolerances.
pub const PSD_ABS_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone)]
pub struct EigenResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors stored as columns, in the order of `values`.
    pub vectors: Matrix,
    /// `max_k |M v_k - lambda_k v_k|`.
    pub residual: f64,
}

pub fn frobenius(m: &Matrix) -> f64 {
    m.norm()
}

fn symmetrized(m: &Matrix) -> Result<Matrix> {
    if !m.is_square() {
        return Err(structural(format!("{}x{} matrix is not square", m.nrows(), m.ncols())));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("matrix has non-finite entries".into()));
    }
    Ok((m + m.transpose()) * 0.5)
}

/// Full spectrum of a symmetric matrix by cyclic Jacobi rotations.
///
/// The input is symmetrized first. Iteration stops once the off-diagonal
/// Frobenius mass falls below `1e-14 * ||M||_F`.
pub fn eig_sym(m: &Matrix) -> Result<EigenResult> {
    let mut a = symmetrized(m)?;
    let n = a.nrows();
    let scale = frobenius(&a);
    let mut v = Matrix::identity(n, n);
    let target = OFF_DIAGONAL_TOL * scale;

    let off_norm = |a: &Matrix| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[(i, j)] * a[(i, j)];
                }
            }
        }
        s.sqrt()
    };

    let mut converged = off_norm(&a) <= target;
    let mut sweep = 0;
    while !converged {
        if sweep == MAX_SWEEPS {
            return Err(Error::Numeric(format!(
                "Jacobi iteration did not converge in {MAX_SWEEPS} sweeps (off-diagonal {:.3e})",
                off_norm(&a)
            )));
        }
        sweep += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                // Negligible relative to both diagonal entries: annihilate outright.
                if sweep > 4
                    && (app.abs() + 100.0 * apq.abs() == app.abs())
                    && (aqq.abs() + 100.0 * apq.abs() == aqq.abs())
                {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);

                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for r in 0..n {
                    if r != p && r != q {
                        let arp = a[(r, p)];
                        let arq = a[(r, q)];
                        let new_rp = arp - s * (arq + tau * arp);
                        let new_rq = arq + s * (arp - tau * arq);
                        a[(r, p)] = new_rp;
                        a[(p, r)] = new_rp;
                        a[(r, q)] = new_rq;
                        a[(q, r)] = new_rq;
                    }
                }
                for r in 0..n {
                    let vrp = v[(r, p)];
                    let vrq = v[(r, q)];
                    v[(r, p)] = vrp - s * (vrq + tau * vrp);
                    v[(r, q)] = vrq + s * (vrp - tau * vrq);
                }
            }
        }
        converged = off_norm(&a) <= target;
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let vectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);

    let sym = symmetrized(m)?;
    let residual = (0..n)
        .map(|k| {
            let col = vectors.column(k);
            (&sym * col - col * values[k]).amax()
        })
        .fold(0.0, f64::max);

    Ok(EigenResult { values, vectors, residual })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PsdVerdict {
    pub psd: bool,
    pub min_eig: f64,
}

/// `psd` holds when the smallest eigenvalue is at least `-tol * max(1, ||M||_F)`.
pub fn is_psd(m: &Matrix, tol: f64) -> Result<PsdVerdict> {
    let eig = eig_sym(m)?;
    let min_eig = eig.values.first().copied().unwrap_or(0.0);
    Ok(PsdVerdict { psd: min_eig >= -tol * frobenius(m).max(1.0), min_eig })
}

/// Like [`is_psd`] but with the tolerance relative to `||M||_F` floored at
/// `1e-12`, for matrices that are tiny by construction.
pub fn is_psd_relative(m: &Matrix, tol: f64) -> Result<PsdVerdict> {
    is_psd_scaled(m, tol, frobenius(m))
}

/// PSD test with an explicit scale: `min_eig >= -tol * max(scale, 1e-12)`.
/// For a difference `A - B` that cancels exactly, pass the scale of `A` and `B`.
pub fn is_psd_scaled(m: &Matrix, tol: f64, scale: f64) -> Result<PsdVerdict> {
    let eig = eig_sym(m)?;
    let min_eig = eig.values.first().copied().unwrap_or(0.0);
    Ok(PsdVerdict { psd: min_eig >= -tol * scale.max(PSD_ABS_FLOOR), min_eig })
}

#[derive(Debug, Clone, Serialize)]
pub struct GraphSpectrum {
    /// Nonzero Laplacian eigenvalues, ascending.
    pub lambda_list: Vec<f64>,
    pub lambda_1: Option<f64>,
    pub lambda_last: Option<f64>,
    /// Number of (numerically) zero Laplacian eigenvalues.
    pub zero_count: usize,
    /// `|lambda_2(W)|`: absolute value of the second-largest eigenvalue of the
    /// weight matrix (eigenvalues ordered by value).
    pub esr: f64,
    /// Second-largest eigenvalue modulus of `W`, counting the negative end.
    pub esr_modulus: f64,
}

impl GraphSpectrum {
    /// A connected graph has exactly one zero Laplacian eigenvalue.
    pub fn is_connected(&self) -> bool {
        self.zero_count == 1
    }
}

pub fn graph_spectrum(g: &WeightedGraph) -> Result<GraphSpectrum> {
    if !g.is_symmetric(1e-12) {
        return Err(structural("spectral comparison bounds need a symmetric graph"));
    }
    let lap = laplacian(g);
    let eig = eig_sym(&lap)?;
    let zero_tol = 1e-9 * frobenius(&lap).max(PSD_ABS_FLOOR);
    let lambda_list: Vec<f64> = eig.values.iter().copied().filter(|v| v.abs() > zero_tol).collect();
    let zero_count = eig.values.len() - lambda_list.len();

    let w_values = eig_sym(g.weights())?.values;
    let esr = w_values.iter().rev().nth(1).map_or(0.0, |v| v.abs());
    let mut moduli: Vec<f64> = w_values.iter().map(|v| v.abs()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    let esr_modulus = moduli.get(1).copied().unwrap_or(0.0);

    Ok(GraphSpectrum {
        lambda_1: lambda_list.first().copied(),
        lambda_last: lambda_list.last().copied(),
        lambda_list,
        zero_count,
        esr,
        esr_modulus,
    })
}
