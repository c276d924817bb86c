//! Rank-1 multiplicative factorization O_ij ~ a_i * b_j by alternating least
//! squares.
//!
//! The model has a one-parameter gauge freedom: (c*a, b/c) fits identically
//! for any c > 0. The fitted products are therefore the invariant quantity;
//! the reported (a, b) depend on the starting value and on the gauge policy.

use crate::error::{Error, Result};
use crate::table::ContingencyTable;
use serde::Serialize;

/// Row and column factors with the residual sum of squares.
#[derive(Debug, Clone, Serialize)]
pub struct FactorPair {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub s_squared: f64,
    pub iterations: u32,
    pub converged: bool,
    /// Residual after each iteration, for descent diagnostics.
    #[serde(skip)]
    pub s_squared_trace: Vec<f64>,
}

/// Starting value for the row factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlsInit {
    /// Constant vector sqrt(grand total / (m*n)). Scale-free default.
    MeanScaled,
    /// A caller-chosen constant start. The converged factor scale follows the
    /// start, so pinning it keeps reported factor tables stable across runs.
    Constant(f64),
}

/// What to do with the gauge after convergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlsGauge {
    /// Rescale so that the two factor vectors have equal Euclidean norm.
    EqualNorm,
    /// Keep the gauge the iteration converged to.
    Converged,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct AlsOptions {
    pub tol: f64,
    pub max_iter: u32,
    pub init: AlsInit,
    pub gauge: AlsGauge,
}

impl Default for AlsOptions {
    fn default() -> Self {
        AlsOptions {
            tol: 1e-12,
            max_iter: 10_000,
            init: AlsInit::MeanScaled,
            gauge: AlsGauge::EqualNorm,
        }
    }
}

/// Fit with default options (equal-norm gauge, scale-free start).
pub fn als_fit(t: &ContingencyTable, tol: f64, max_iter: u32) -> Result<FactorPair> {
    als_fit_with(
        t,
        &AlsOptions {
            tol,
            max_iter,
            ..AlsOptions::default()
        },
    )
}

/// Alternating least squares: from the starting row factors, repeat the
/// closed-form updates b_j = sum_i a_i O_ij / sum_i a_i^2 and
/// a_i = sum_j b_j O_ij / sum_j b_j^2 until the residual stabilizes.
pub fn als_fit_with(t: &ContingencyTable, opts: &AlsOptions) -> Result<FactorPair> {
    let m = t.n_rows();
    let n = t.n_cols();
    for (i, rt) in t.row_totals().iter().enumerate() {
        if *rt == 0.0 {
            return Err(Error::validation(format!(
                "row {:?} is all zero; its factor is undefined",
                t.row_labels()[i]
            )));
        }
    }
    for (j, ct) in t.col_totals().iter().enumerate() {
        if *ct == 0.0 {
            return Err(Error::validation(format!(
                "column {:?} is all zero; its factor is undefined",
                t.col_labels()[j]
            )));
        }
    }

    let start = match opts.init {
        AlsInit::MeanScaled => (t.grand_total() / (m as f64 * n as f64)).sqrt(),
        AlsInit::Constant(c) => {
            if !(c > 0.0) {
                return Err(Error::validation("constant start must be positive"));
            }
            c
        }
    };
    let mut a = vec![start; m];
    let mut b = vec![0.0f64; n];
    let mut prev_s2 = f64::INFINITY;
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let a_sq: f64 = a.iter().map(|v| v * v).sum();
        for (j, bj) in b.iter_mut().enumerate() {
            let num: f64 = (0..m).map(|i| a[i] * t.cell(i, j) as f64).sum();
            *bj = num / a_sq;
        }
        let b_sq: f64 = b.iter().map(|v| v * v).sum();
        for (i, ai) in a.iter_mut().enumerate() {
            let num: f64 = (0..n).map(|j| b[j] * t.cell(i, j) as f64).sum();
            *ai = num / b_sq;
        }
        let s2 = residual_of(&a, &b, t);
        trace.push(s2);
        if (prev_s2 - s2).abs() <= opts.tol * s2.max(1.0) {
            converged = true;
            prev_s2 = s2;
            break;
        }
        prev_s2 = s2;
    }

    let mut pair = FactorPair {
        a,
        b,
        s_squared: prev_s2,
        iterations,
        converged,
        s_squared_trace: trace,
    };
    if opts.gauge == AlsGauge::EqualNorm {
        pair = gauge_normalize(&pair)?;
    }
    Ok(pair)
}

/// Rescale (a, b) -> (c*a, b/c) with c = sqrt(|b|/|a|) so both vectors get
/// the same Euclidean norm. Products a_i*b_j are unchanged.
pub fn gauge_normalize(f: &FactorPair) -> Result<FactorPair> {
    let na = norm(&f.a);
    let nb = norm(&f.b);
    if na == 0.0 || nb == 0.0 {
        return Err(Error::validation("cannot normalize a zero factor vector"));
    }
    let c = (nb / na).sqrt();
    Ok(FactorPair {
        a: f.a.iter().map(|v| v * c).collect(),
        b: f.b.iter().map(|v| v / c).collect(),
        s_squared: f.s_squared,
        iterations: f.iterations,
        converged: f.converged,
        s_squared_trace: f.s_squared_trace.clone(),
    })
}

/// Outer product a * b^T.
pub fn fitted_matrix(f: &FactorPair) -> Vec<Vec<f64>> {
    f.a.iter()
        .map(|ai| f.b.iter().map(|bj| ai * bj).collect())
        .collect()
}

/// Recompute the residual sum of squares against a table.
pub fn residual(f: &FactorPair, t: &ContingencyTable) -> Result<f64> {
    if f.a.len() != t.n_rows() || f.b.len() != t.n_cols() {
        return Err(Error::validation(format!(
            "factor dimensions {}x{} do not match table {}x{}",
            f.a.len(),
            f.b.len(),
            t.n_rows(),
            t.n_cols()
        )));
    }
    Ok(residual_of(&f.a, &f.b, t))
}

fn residual_of(a: &[f64], b: &[f64], t: &ContingencyTable) -> f64 {
    let mut s2 = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            let d = t.cell(i, j) as f64 - ai * bj;
            s2 += d * d;
        }
    }
    s2
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}
