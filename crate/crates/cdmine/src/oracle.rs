//! Independent verification machinery for the bound solver.
//!
//! Three cross-checks, deliberately sharing no code path with
//! `double_waterfill_slots`:
//!
//! * [`alternating_bounds`] — iterates the two coupled waterfills until the
//!   objective settles. Each half-step is an exact partial minimization, so
//!   the objective is non-increasing and the limit satisfies the mutual
//!   waterfill characterization of optimal solutions.
//! * [`grid_bruteforce`] — exhaustive optimum over the discretized feasible
//!   set, via knapsack-style dynamic programs that enumerate every grid
//!   allocation implicitly but exactly.
//! * [`kkt_check`] — verifies primal/dual feasibility, complementary
//!   slackness and stationarity of a solution in the re-parameterized
//!   variables z = a^2, y = b^2. Strong duality makes these conditions
//!   sufficient, so a passing report certifies global optimality.

use crate::bounds::{Branch, DoubleWaterfillResult, SlotProblem};
use crate::compress::CompressedSeq;
use crate::error::{Error, Result};
use crate::waterfill::waterfill;

/// Default objective-change tolerance for [`alternating_bounds`].
pub const ALT_DEFAULT_TOL: f64 = 1e-10;
/// Default iteration budget for [`alternating_bounds`].
pub const ALT_DEFAULT_MAX_ITER: usize = 100_000;

/// Solve the cross-term program by alternating the two waterfills from a
/// uniform start until the objective changes by less than `tol`.
pub fn alternating_bounds(
    p: &SlotProblem,
    tol: f64,
    max_iter: usize,
) -> Result<DoubleWaterfillResult> {
    let n1 = p.n1();
    let n2 = p.n2();
    let n3 = p.n3;
    let x_slots = n1 + n3;
    let q_slots = n2 + n3;

    // Uniform start on Q's unknown slots; the zero start stalls because
    // waterfilling against zeros allocates nothing.
    let mut b3 = if n3 > 0 && p.e_q > 0.0 {
        vec![(p.e_q / q_slots as f64).sqrt(); n3]
    } else {
        vec![0.0; n3]
    };
    let mut a3 = vec![0.0f64; n3];

    let mut v_prev = f64::INFINITY;
    let mut b_ext = vec![0.0; x_slots];
    let mut a_ext = vec![0.0; q_slots];
    for it in 0..max_iter {
        b_ext[..n1].copy_from_slice(&p.b_p1);
        b_ext[n1..].copy_from_slice(&b3);
        let wa = waterfill(&b_ext, p.e_x, p.ceil_a)?;
        a3.copy_from_slice(&wa.a[n1..]);

        a_ext[..n2].copy_from_slice(&p.a_p2);
        a_ext[n2..].copy_from_slice(&a3);
        let wb = waterfill(&a_ext, p.e_q, p.ceil_b)?;
        b3.copy_from_slice(&wb.a[n2..]);

        let cross1: f64 = p.b_p1.iter().zip(&wa.a).map(|(x, y)| x * y).sum();
        let cross2: f64 = p.a_p2.iter().zip(&wb.a).map(|(x, y)| x * y).sum();
        let cross3: f64 = a3.iter().zip(&b3).map(|(x, y)| x * y).sum();
        let v = -(cross1 + cross2 + cross3);
        if (v_prev - v).abs() < tol {
            let e_x_split: f64 = a3.iter().map(|x| x * x).sum();
            let e_q_split: f64 = b3.iter().map(|x| x * x).sum();
            return Ok(DoubleWaterfillResult {
                v_opt: v,
                a: wa.a,
                b: wb.a,
                alpha: wa.alphas,
                beta: wb.alphas,
                lambda: wa.lambda,
                mu: wb.lambda,
                e_x_split,
                e_q_split,
                branch: classify(p, e_x_split, e_q_split),
            });
        }
        debug_assert!(
            v <= v_prev + tol.max(1e-12 * v.abs().max(1.0)),
            "alternating objective increased at iter {it}: {v_prev} -> {v}"
        );
        v_prev = v;
    }
    Err(Error::Convergence(format!(
        "alternating waterfill did not settle within {max_iter} iterations (last v = {v_prev})"
    )))
}

/// [`alternating_bounds`] on the slot problem of a compressed pair.
pub fn alternating_bounds_pair(
    cx: &CompressedSeq,
    cq: &CompressedSeq,
    tol: f64,
    max_iter: usize,
) -> Result<DoubleWaterfillResult> {
    let (_, p) = SlotProblem::from_pair(cx, cq)?;
    alternating_bounds(&p, tol, max_iter)
}

fn classify(p: &SlotProblem, e_x_split: f64, e_q_split: f64) -> Branch {
    if p.n3 == 0 {
        Branch::Disjoint
    } else if p.n1() == 0 && p.n2() == 0 {
        Branch::IdenticalSupport
    } else if !p.ceil_a.is_finite() || !p.ceil_b.is_finite() {
        Branch::Unconstrained
    } else if e_x_split <= 0.0 && e_q_split <= 0.0 {
        Branch::ZeroResidualSplit
    } else {
        Branch::FixedPoint
    }
}

/// Exhaustive optimum of the cross-term program over the discretized
/// feasible set: each unknown magnitude ranges over a uniform grid of
/// `grid_steps + 1` values from 0 to its ceiling, and the energy budgets are
/// enforced exactly in grid units. Returns the best objective value
/// -max sum(a b) over that finite set.
///
/// Restricted to small instances (at most 8 unknown slots in total) and to
/// finite ceilings.
pub fn grid_bruteforce(p: &SlotProblem, grid_steps: usize) -> Result<f64> {
    let n1 = p.n1();
    let n2 = p.n2();
    let n3 = p.n3;
    if n1 + n2 + 2 * n3 > 8 {
        return Err(Error::invalid(format!(
            "grid oracle limited to 8 unknown slots, got {}",
            n1 + n2 + 2 * n3
        )));
    }
    if !p.ceil_a.is_finite() || !p.ceil_b.is_finite() {
        return Err(Error::invalid("grid oracle requires finite ceilings"));
    }
    if grid_steps == 0 {
        return Err(Error::invalid("grid_steps must be >= 1"));
    }
    let h_a = p.ceil_a / grid_steps as f64;
    let h_b = p.ceil_b / grid_steps as f64;
    let unit_a = h_a * h_a;
    let unit_b = h_b * h_b;
    let u_a = budget_units(p.e_x, unit_a, (n1 + n3) * grid_steps * grid_steps);
    let u_b = budget_units(p.e_q, unit_b, (n2 + n3) * grid_steps * grid_steps);

    let best1 = knapsack(&p.b_p1, h_a, grid_steps, u_a);
    let best2 = knapsack(&p.a_p2, h_b, grid_steps, u_b);

    if n3 == 0 {
        return Ok(-(best1[u_a] + best2[u_b]));
    }

    // P3 cannot spend more than its own slot capacity.
    let cap3 = grid_steps * grid_steps * n3;
    let u_a3 = u_a.min(cap3);
    let u_b3 = u_b.min(cap3);

    let combos = ((grid_steps + 1) * (grid_steps + 1)).pow(n3 as u32);
    let mut best = f64::NEG_INFINITY;
    if combos <= 30_000_000 {
        // Direct enumeration of the P3 assignments.
        #[allow(clippy::too_many_arguments)]
        fn rec(
            slot: usize,
            n3: usize,
            steps: usize,
            ua: usize,
            ub: usize,
            cross: f64,
            h_a: f64,
            h_b: f64,
            best1: &[f64],
            best2: &[f64],
            u_a: usize,
            u_b: usize,
            best: &mut f64,
        ) {
            if slot == n3 {
                let cand = cross + best1[u_a - ua] + best2[u_b - ub];
                if cand > *best {
                    *best = cand;
                }
                return;
            }
            for ka in 0..=steps {
                let ca = ka * ka;
                if ua + ca > u_a {
                    break;
                }
                for kb in 0..=steps {
                    let cb = kb * kb;
                    if ub + cb > u_b {
                        break;
                    }
                    rec(
                        slot + 1,
                        n3,
                        steps,
                        ua + ca,
                        ub + cb,
                        cross + (ka as f64 * h_a) * (kb as f64 * h_b),
                        h_a,
                        h_b,
                        best1,
                        best2,
                        u_a,
                        u_b,
                        best,
                    );
                }
            }
        }
        rec(
            0, n3, grid_steps, 0, 0, 0.0, h_a, h_b, &best1, &best2, u_a, u_b, &mut best,
        );
    } else {
        // Joint DP over the P3 slots: best cross achievable with at most
        // (ua, ub) energy units spent on P3.
        let w = u_b3 + 1;
        let mut layer = vec![0.0f64; (u_a3 + 1) * w];
        let mut next = vec![0.0f64; (u_a3 + 1) * w];
        for _ in 0..n3 {
            for ua in 0..=u_a3 {
                for ub in 0..=u_b3 {
                    let mut cell = f64::NEG_INFINITY;
                    for ka in 0..=grid_steps {
                        let ca = ka * ka;
                        if ca > ua {
                            break;
                        }
                        for kb in 0..=grid_steps {
                            let cb = kb * kb;
                            if cb > ub {
                                break;
                            }
                            let cand = layer[(ua - ca) * w + (ub - cb)]
                                + (ka as f64 * h_a) * (kb as f64 * h_b);
                            if cand > cell {
                                cell = cand;
                            }
                        }
                    }
                    next[ua * w + ub] = cell;
                }
            }
            std::mem::swap(&mut layer, &mut next);
        }
        for ua in 0..=u_a3 {
            for ub in 0..=u_b3 {
                let cand = layer[ua * w + ub] + best1[u_a - ua] + best2[u_b - ub];
                if cand > best {
                    best = cand;
                }
            }
        }
    }
    Ok(-best)
}

/// [`grid_bruteforce`] on the slot problem of a compressed pair.
pub fn grid_bruteforce_pair(
    cx: &CompressedSeq,
    cq: &CompressedSeq,
    grid_steps: usize,
) -> Result<f64> {
    let (_, p) = SlotProblem::from_pair(cx, cq)?;
    grid_bruteforce(&p, grid_steps)
}

fn budget_units(energy: f64, unit: f64, cap: usize) -> usize {
    if unit == 0.0 {
        return 0;
    }
    let raw = (energy / unit * (1.0 + 1e-12) + 1e-9).floor();
    (raw.max(0.0) as usize).min(cap)
}

/// dp[u] = max sum of val_i * k_i * h over one grid choice k_i per item,
/// subject to sum k_i^2 <= u.
fn knapsack(vals: &[f64], h: f64, steps: usize, budget: usize) -> Vec<f64> {
    let mut dp = vec![0.0f64; budget + 1];
    let mut next = vec![0.0f64; budget + 1];
    for &v in vals {
        for u in 0..=budget {
            let mut best = dp[u];
            for k in 1..=steps {
                let cost = k * k;
                if cost > u {
                    break;
                }
                let cand = dp[u - cost] + v * (k as f64) * h;
                if cand > best {
                    best = cand;
                }
            }
            next[u] = best;
        }
        std::mem::swap(&mut dp, &mut next);
    }
    dp
}

/// KKT verification report. Residuals are maxima over the respective
/// condition family, in the re-parameterized variables z = a^2, y = b^2.
#[derive(Debug, Clone, Default)]
pub struct KktReport {
    /// Primal feasibility: box and energy constraints.
    pub primal: f64,
    /// Dual feasibility: non-negativity of all multipliers.
    pub dual: f64,
    /// Complementary slackness, including the energy constraints.
    pub slack: f64,
    /// Stationarity of the Lagrangian, including the lambda-mu coupling on
    /// P3 (zero-allocation entries excluded).
    pub stationarity: f64,
    pub violations: Vec<String>,
}

impl KktReport {
    pub fn max_residual(&self) -> f64 {
        self.primal.max(self.dual).max(self.slack).max(self.stationarity)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_residual() <= tol
    }
}

/// [`kkt_check`] against the slot problem of a compressed pair.
pub fn kkt_check_pair(
    result: &DoubleWaterfillResult,
    cx: &CompressedSeq,
    cq: &CompressedSeq,
    tol: f64,
) -> Result<KktReport> {
    let (_, p) = SlotProblem::from_pair(cx, cq)?;
    Ok(kkt_check(result, &p, tol))
}

/// Verify the KKT conditions of a solution at tolerance `tol`. Never fails;
/// all findings land in the report.
pub fn kkt_check(result: &DoubleWaterfillResult, p: &SlotProblem, tol: f64) -> KktReport {
    let n1 = p.n1();
    let n2 = p.n2();
    let mut rep = KktReport::default();
    let note = |rep: &mut KktReport, cat: &str, resid: f64, what: String| {
        if resid > tol {
            rep.violations.push(format!("{cat}: {what} (residual {resid:.3e})"));
        }
    };

    let big_z = p.ceil_a * p.ceil_a;
    let big_y = p.ceil_b * p.ceil_b;

    // Primal feasibility.
    let mut primal: f64 = 0.0;
    let sum_z: f64 = result.a.iter().map(|x| x * x).sum();
    let sum_y: f64 = result.b.iter().map(|x| x * x).sum();
    for (i, &ai) in result.a.iter().enumerate() {
        let z = ai * ai;
        let r = (-z).max(if big_z.is_finite() { z - big_z } else { 0.0 });
        if r > primal {
            primal = r;
        }
        note(&mut rep, "PF", r, format!("z[{i}] out of box"));
    }
    for (i, &bi) in result.b.iter().enumerate() {
        let y = bi * bi;
        let r = (-y).max(if big_y.is_finite() { y - big_y } else { 0.0 });
        if r > primal {
            primal = r;
        }
        note(&mut rep, "PF", r, format!("y[{i}] out of box"));
    }
    let r = (sum_z - p.e_x).max(0.0);
    note(&mut rep, "PF", r, "sum z > e_x".into());
    primal = primal.max(r);
    let r = (sum_y - p.e_q).max(0.0);
    note(&mut rep, "PF", r, "sum y > e_q".into());
    primal = primal.max(r);
    rep.primal = primal;

    // Dual feasibility. An infinite lambda encodes a degenerate zero-energy
    // waterfill; the stationarity section skips those entries anyway.
    let mut dual: f64 = 0.0;
    for (name, m) in [("lambda", result.lambda), ("mu", result.mu)] {
        if m.is_finite() {
            let r = (-m).max(0.0);
            note(&mut rep, "DF", r, format!("{name} negative"));
            dual = dual.max(r);
        }
    }
    for (i, &m) in result.alpha.iter().chain(result.beta.iter()).enumerate() {
        let r = (-m).max(0.0);
        note(&mut rep, "DF", r, format!("box multiplier {i} negative"));
        dual = dual.max(r);
    }
    rep.dual = dual;

    // Complementary slackness.
    let mut slack: f64 = 0.0;
    if big_z.is_finite() {
        for (i, (&ai, &al)) in result.a.iter().zip(&result.alpha).enumerate() {
            let r = (al * (ai * ai - big_z)).abs();
            note(&mut rep, "CS", r, format!("alpha[{i}] * (z - Z) != 0"));
            slack = slack.max(r);
        }
    }
    if big_y.is_finite() {
        for (i, (&bi, &be)) in result.b.iter().zip(&result.beta).enumerate() {
            let r = (be * (bi * bi - big_y)).abs();
            note(&mut rep, "CS", r, format!("beta[{i}] * (y - Y) != 0"));
            slack = slack.max(r);
        }
    }
    if result.lambda.is_finite() && result.lambda > 0.0 {
        let r = (result.lambda * (sum_z - p.e_x)).abs();
        note(&mut rep, "CS", r, "lambda * (sum z - e_x) != 0".into());
        slack = slack.max(r);
    }
    if result.mu.is_finite() && result.mu > 0.0 {
        let r = (result.mu * (sum_y - p.e_q)).abs();
        note(&mut rep, "CS", r, "mu * (sum y - e_q) != 0".into());
        slack = slack.max(r);
    }
    rep.slack = slack;

    // Stationarity, on strictly positive allocations only.
    let mut stat: f64 = 0.0;
    for i in 0..n1 {
        let ai = result.a[i];
        if ai > 0.0 && result.lambda.is_finite() {
            let r = (-p.b_p1[i] / ai + result.lambda + result.alpha[i]).abs();
            note(&mut rep, "O", r, format!("P1 slot {i}"));
            stat = stat.max(r);
        }
    }
    for i in 0..n2 {
        let bi = result.b[i];
        if bi > 0.0 && result.mu.is_finite() {
            let r = (-p.a_p2[i] / bi + result.mu + result.beta[i]).abs();
            note(&mut rep, "O", r, format!("P2 slot {i}"));
            stat = stat.max(r);
        }
    }
    for j in 0..p.n3 {
        let ai = result.a[n1 + j];
        let bi = result.b[n2 + j];
        if ai > 0.0 && bi > 0.0 {
            let r1 = (-bi / ai + result.lambda + result.alpha[n1 + j]).abs();
            let r2 = (-ai / bi + result.mu + result.beta[n2 + j]).abs();
            let r = r1.max(r2);
            note(&mut rep, "O", r, format!("P3 slot {j} lambda-mu coupling"));
            stat = stat.max(r);
        }
    }
    rep.stationarity = stat;
    rep
}
