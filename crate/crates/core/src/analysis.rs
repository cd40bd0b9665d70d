//! Asymptotic analysis of repetition CSA under peeling.
//!
//! Density evolution in the Poisson slot-degree limit: starting from
//! `p₀ = 1`, iterate
//!
//! ```text
//! q = 1 − exp(−G·d̄·p)      slot → user erasure probability
//! p = λ(q)                  user → slot erasure probability
//! ```
//!
//! where `λ` is the edge-perspective polynomial of the degree distribution.
//! Decoding succeeds asymptotically when `p → 0`.

use thiserror::Error;

use crate::model::DegreeDistribution;

pub const DEFAULT_DE_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITERS: usize = 10_000;
/// Iteration cap used inside threshold searches. Degree-2 users decay
/// linearly at rate `2G` below threshold, which needs ~10⁵ steps to reach
/// 1e-8 within 1e-4 of the threshold.
pub const THRESHOLD_MAX_ITERS: usize = 100_000;
pub const BISECTION_DEPTH: usize = 40;
/// Upper end of the threshold search; the rate bound keeps thresholds below 1.
pub const MAX_LOAD: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("rate {0} outside (0, 1): the bound has no positive root")]
    Domain(f64),
    #[error("load {0} must be positive")]
    BadLoad(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeResult {
    /// Erasure probability when the recursion stopped.
    pub residual_p: f64,
    pub iterations_used: usize,
    /// `residual_p < tol`: the load is decodable.
    pub converged: bool,
}

/// Runs the recursion at logical load `load`.
///
/// Stops on success (`p < tol`), when `p` stalls at a nonzero fixed point
/// (relative change below `tol`), or after `max_iters` steps.
pub fn de_recursion(
    dist: &DegreeDistribution,
    load: f64,
    max_iters: usize,
    tol: f64,
) -> Result<DeResult, AnalysisError> {
    if !(load > 0.0) {
        return Err(AnalysisError::BadLoad(load));
    }
    let lambda = dist.edge_perspective();
    let scale = load * dist.mean_degree();
    let mut p = 1.0f64;
    for it in 1..=max_iters {
        let q = -(-scale * p).exp_m1();
        let next = lambda.eval(q);
        if next < tol {
            return Ok(DeResult {
                residual_p: next,
                iterations_used: it,
                converged: true,
            });
        }
        let stalled = (p - next).abs() <= tol * next;
        p = next;
        if stalled {
            return Ok(DeResult {
                residual_p: p,
                iterations_used: it,
                converged: false,
            });
        }
    }
    Ok(DeResult {
        residual_p: p,
        iterations_used: max_iters,
        converged: false,
    })
}

fn decodable(dist: &DegreeDistribution, load: f64) -> bool {
    de_recursion(dist, load, THRESHOLD_MAX_ITERS, DEFAULT_DE_TOL)
        .map(|r| r.converged)
        .unwrap_or(false)
}

/// Largest logical load in `[0, 1]` at which density evolution still
/// converges, located by bisection to within `tol` (at most 40 halvings).
///
/// Returns 0 when no positive load converges, as happens whenever some users
/// send a single replica.
pub fn threshold(dist: &DegreeDistribution, tol: f64) -> f64 {
    if decodable(dist, MAX_LOAD) {
        return MAX_LOAD;
    }
    let (mut lo, mut hi) = (0.0, MAX_LOAD);
    for _ in 0..BISECTION_DEPTH {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if decodable(dist, mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo == 0.0 {
        0.0
    } else {
        0.5 * (lo + hi)
    }
}

/// Unique positive root of `G = 1 − exp(−G/R)`, to 1e-10.
pub fn bound_root(rate: f64) -> Result<f64, AnalysisError> {
    if !(rate > 0.0 && rate < 1.0) {
        return Err(AnalysisError::Domain(rate));
    }
    // f < 0 strictly between 0 and the root, f(1) = e^(−1/R) > 0.
    let f = |g: f64| g + (-g / rate).exp_m1();
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
