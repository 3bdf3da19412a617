//! Single-sequence waterfilling.
//!
//! Given known counterpart magnitudes b_i, an energy budget e and a per-entry
//! ceiling A, the waterfilling algorithm finds the allocation a_i maximizing
//! the cross term sum(a_i * b_i) subject to sum(a_i^2) <= e and 0 <= a_i <= A.
//! Unconstrained entries come out proportional to b (a_i = b_i / lambda);
//! whenever that would push an entry past the ceiling it is pinned at A, the
//! spent energy is removed from the reserve, and the remaining entries are
//! refilled. Each pass pins at least one entry, so at most |b| passes run.

use crate::error::{Error, Result};

/// Comparison slack for the saturation test, so an entry landing exactly on
/// the ceiling terminates without an extra pass.
const SATURATION_EPS: f64 = 1e-12;

/// Output of [`waterfill`].
#[derive(Debug, Clone)]
pub struct WaterfillResult {
    /// Allocated magnitudes, same indexing as the input `b`.
    pub a: Vec<f64>,
    /// Multiplier of the energy constraint. Infinite when e = 0 forces all
    /// entries to zero; zero in the degenerate all-zero-b case.
    pub lambda: f64,
    /// Per-entry ceiling multipliers; positive only on saturated entries.
    pub alphas: Vec<f64>,
    /// Optimal value -sum(a_i * b_i), non-positive.
    pub v_opt: f64,
    /// Energy left unallocated. Zero except in degenerate cases where the
    /// remaining entries all face b_i = 0 and the objective no longer moves.
    pub reserve: f64,
}

impl WaterfillResult {
    /// The maximized cross term sum(a_i * b_i) = -v_opt.
    pub fn cross(&self) -> f64 {
        -self.v_opt
    }

    /// Energy actually allocated.
    pub fn spent(&self) -> f64 {
        self.a.iter().map(|x| x * x).sum()
    }
}

/// Optimal allocation of energy `e` against known magnitudes `b` under
/// ceiling `a_ceil`. `a_ceil = f64::INFINITY` drops the ceiling constraints,
/// in which case the result is the Cauchy-Schwarz allocation a = sqrt(e) b/|b|.
///
/// Errors: negative or non-finite inputs, and e > |b| * A^2 (no feasible
/// allocation can absorb the energy).
pub fn waterfill(b: &[f64], e: f64, a_ceil: f64) -> Result<WaterfillResult> {
    if !(e >= 0.0) || !e.is_finite() {
        return Err(Error::invalid(format!("energy must be finite and >= 0, got {e}")));
    }
    if !(a_ceil > 0.0) {
        return Err(Error::invalid(format!("ceiling must be > 0, got {a_ceil}")));
    }
    if b.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::invalid("b entries must be finite and >= 0"));
    }
    let n = b.len();
    if a_ceil.is_finite() {
        let cap = n as f64 * a_ceil * a_ceil;
        if e > cap * (1.0 + SATURATION_EPS) {
            return Err(Error::InfeasibleEnergy(format!(
                "e = {e} exceeds |b| * A^2 = {cap}"
            )));
        }
    } else if n == 0 && e > 0.0 {
        return Err(Error::InfeasibleEnergy(
            "positive energy with no coefficients to absorb it".into(),
        ));
    }

    let mut a = vec![0.0; n];
    let mut alphas = vec![0.0; n];
    if n == 0 || e == 0.0 {
        let lambda = if b.iter().any(|&x| x > 0.0) { f64::INFINITY } else { 0.0 };
        return Ok(WaterfillResult {
            a,
            lambda,
            alphas,
            v_opt: 0.0,
            reserve: 0.0,
        });
    }

    let mut active: Vec<usize> = (0..n).collect();
    let mut reserve = e;
    let mut lambda = 0.0;
    let mut unspent = 0.0;
    let mut passes = 0usize;
    loop {
        passes += 1;
        assert!(passes <= n + 1, "waterfill exceeded its pass bound");
        let sum_sq: f64 = active.iter().map(|&i| b[i] * b[i]).sum();
        if sum_sq == 0.0 {
            // Remaining counterparts are all zero: any allocation is
            // objective-neutral, keep the canonical zero and report the
            // untouched reserve.
            for &i in &active {
                a[i] = 0.0;
            }
            if passes == 1 {
                lambda = 0.0;
            }
            unspent = reserve;
            break;
        }
        lambda = (sum_sq / reserve).sqrt();
        let mut saturated_any = false;
        for &i in &active {
            a[i] = b[i] / lambda;
            if a[i] > a_ceil + SATURATION_EPS {
                a[i] = a_ceil;
                saturated_any = true;
            }
        }
        if !saturated_any {
            break;
        }
        active.retain(|&i| a[i] < a_ceil);
        let saturated = n - active.len();
        reserve = e - saturated as f64 * a_ceil * a_ceil;
        if active.is_empty() {
            // Everything pinned at the ceiling; feasibility makes any
            // leftover non-negative rounding noise.
            unspent = reserve.max(0.0);
            break;
        }
        if reserve <= 0.0 {
            // Saturation consumed the entire budget (possible only through
            // rounding at the feasibility boundary).
            for &i in &active {
                a[i] = 0.0;
            }
            break;
        }
    }

    for i in 0..n {
        if a[i] >= a_ceil {
            alphas[i] = (b[i] / a_ceil - lambda).max(0.0);
        }
    }
    let v_opt = -dot(&a, b);
    Ok(WaterfillResult {
        a,
        lambda,
        alphas,
        v_opt,
        reserve: unspent,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
