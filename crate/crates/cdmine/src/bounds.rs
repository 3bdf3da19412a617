//! Optimal distance bounds between compressed objects.
//!
//! Between two compressed objects the stored-bin range splits into four sets:
//! P0 (known in both), P1 (known only in Q), P2 (known only in X) and P3
//! (known in neither). The known part contributes the statistic D-hat; the
//! unknown part is bounded by maximizing the cross term sum(a_l * b_l) over
//! all magnitude assignments consistent with the stored residual energies and
//! the per-coefficient magnitude ceilings. That maximization decomposes into
//! at most two waterfilling passes plus an exact fixed-point energy split for
//! P3, and yields
//!
//!   lb^2 = D-hat + 2 v_opt,    ub^2 = D-hat - 2 v_opt,
//!
//! with v_opt <= 0 the optimal value of the cross-term program. Both bounds
//! are tight: some sequence pair consistent with the compressed data attains
//! each of them.
//!
//! Internally the half-spectrum pairing of real DFT input is expanded into
//! full-spectrum "slots" (a weight-2 bin becomes two slots with the same
//! magnitude and ceiling), so the optimization code never sees the pairing.

use num_complex::Complex64;

use crate::compress::CompressedSeq;
use crate::error::{Error, Result};
use crate::transform::Spectrum;
use crate::waterfill::{waterfill, WaterfillResult};

/// Index sets of the stored-bin range for a pair of compressed objects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    /// Kept in both.
    pub p0: Vec<u32>,
    /// Kept only in Q (unknown for X).
    pub p1: Vec<u32>,
    /// Kept only in X (unknown for Q).
    pub p2: Vec<u32>,
    /// Unknown in both.
    pub p3: Vec<u32>,
}

/// Build the partition of the stored-bin range for a compatible pair.
pub fn build_partition(cx: &CompressedSeq, cq: &CompressedSeq) -> Result<Partition> {
    check_pair(cx, cq)?;
    let bins = cx.storable_bins() as u32;
    let in_x = membership(cx.positions(), bins);
    let in_q = membership(cq.positions(), bins);
    let mut p = Partition {
        p0: Vec::new(),
        p1: Vec::new(),
        p2: Vec::new(),
        p3: Vec::new(),
    };
    for l in 0..bins {
        match (in_x[l as usize], in_q[l as usize]) {
            (true, true) => p.p0.push(l),
            (false, true) => p.p1.push(l),
            (true, false) => p.p2.push(l),
            (false, false) => p.p3.push(l),
        }
    }
    Ok(p)
}

fn membership(positions: &[u32], bins: u32) -> Vec<bool> {
    let mut m = vec![false; bins as usize];
    for &p in positions {
        m[p as usize] = true;
    }
    m
}

fn check_pair(cx: &CompressedSeq, cq: &CompressedSeq) -> Result<()> {
    if cx.n() != cq.n() || cx.basis() != cq.basis() || cx.paired() != cq.paired() {
        return Err(Error::InvalidPair(format!(
            "cannot compare (n={}, basis={}, paired={}) with (n={}, basis={}, paired={})",
            cx.n(),
            cx.basis().as_str(),
            cx.paired(),
            cq.n(),
            cq.basis().as_str(),
            cq.paired()
        )));
    }
    Ok(())
}

/// The cross-term program in full-spectrum slot form: maximize
/// sum(a_l b_l) over the unknown slots subject to the energy budgets and the
/// magnitude ceilings. Ceilings are infinite for first-coefficient objects,
/// whose magnitude floor bounds nothing.
#[derive(Debug, Clone)]
pub struct SlotProblem {
    /// Known counterpart magnitudes on P1 slots (values of Q there).
    pub b_p1: Vec<f64>,
    /// Known counterpart magnitudes on P2 slots (values of X there).
    pub a_p2: Vec<f64>,
    /// Number of P3 slots (unknown in both objects).
    pub n3: usize,
    /// Residual energy of X.
    pub e_x: f64,
    /// Residual energy of Q.
    pub e_q: f64,
    /// Magnitude ceiling for X's unknown coefficients.
    pub ceil_a: f64,
    /// Magnitude ceiling for Q's unknown coefficients.
    pub ceil_b: f64,
}

impl SlotProblem {
    pub fn n1(&self) -> usize {
        self.b_p1.len()
    }

    pub fn n2(&self) -> usize {
        self.a_p2.len()
    }

    /// Expand a compressed pair into its slot problem.
    pub fn from_pair(cx: &CompressedSeq, cq: &CompressedSeq) -> Result<(Partition, SlotProblem)> {
        let partition = build_partition(cx, cq)?;
        let mut b_p1 = Vec::new();
        for &l in &partition.p1 {
            let mag = value_at(cq, l).norm();
            for _ in 0..cx.weight(l) as usize {
                b_p1.push(mag);
            }
        }
        let mut a_p2 = Vec::new();
        for &l in &partition.p2 {
            let mag = value_at(cx, l).norm();
            for _ in 0..cx.weight(l) as usize {
                a_p2.push(mag);
            }
        }
        let n3 = partition.p3.iter().map(|&l| cx.weight(l) as usize).sum();
        let problem = SlotProblem {
            b_p1,
            a_p2,
            n3,
            e_x: cx.residual(),
            e_q: cq.residual(),
            ceil_a: ceiling_of(cx),
            ceil_b: ceiling_of(cq),
        };
        Ok((partition, problem))
    }
}

/// Effective magnitude ceiling of an object's unknown coefficients. A zero
/// floor can only occur with zero residual, where the ceiling is irrelevant;
/// substitute infinity so downstream arithmetic stays well defined.
fn ceiling_of(c: &CompressedSeq) -> f64 {
    if c.floor_valid() {
        let f = c.floor();
        if f > 0.0 {
            f
        } else {
            f64::INFINITY
        }
    } else {
        f64::INFINITY
    }
}

fn value_at(c: &CompressedSeq, bin: u32) -> Complex64 {
    let idx = c
        .positions()
        .binary_search(&bin)
        .expect("bin must be a stored position");
    c.values()[idx]
}

/// Which closed-form route produced a [`DoubleWaterfillResult`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// P3 empty: the program decouples into two independent waterfills.
    Disjoint,
    /// P1 and P2 empty: pure Cauchy-Schwarz on P3, v = -sqrt(e_x e_q).
    IdenticalSupport,
    /// Full residuals fit under the P1/P2 ceilings: P3 carries nothing.
    ZeroResidualSplit,
    /// General case: exact fixed-point split (e_x', e_q') feeds P3.
    FixedPoint,
    /// Ceiling-free route for first-coefficient objects: pooled
    /// Cauchy-Schwarz over P1/P2/P3.
    Unconstrained,
}

/// Solution of the cross-term program, with enough structure to certify
/// optimality through the KKT conditions.
#[derive(Debug, Clone)]
pub struct DoubleWaterfillResult {
    /// Optimal value (non-positive): -max sum(a_l b_l).
    pub v_opt: f64,
    /// Allocated magnitudes on X's unknown slots: P1 slots then P3 slots.
    pub a: Vec<f64>,
    /// Allocated magnitudes on Q's unknown slots: P2 slots then P3 slots.
    pub b: Vec<f64>,
    /// Ceiling multipliers for `a` (same indexing).
    pub alpha: Vec<f64>,
    /// Ceiling multipliers for `b` (same indexing).
    pub beta: Vec<f64>,
    /// Energy multiplier on X's budget.
    pub lambda: f64,
    /// Energy multiplier on Q's budget.
    pub mu: f64,
    /// Energy assigned to P3 from X's residual (e_x').
    pub e_x_split: f64,
    /// Energy assigned to P3 from Q's residual (e_q').
    pub e_q_split: f64,
    pub branch: Branch,
}

impl DoubleWaterfillResult {
    /// The maximized cross term.
    pub fn cross(&self) -> f64 {
        -self.v_opt
    }
}

/// Exact fixed-point energy split for the general branch.
///
/// Preconditions (checked): both residuals positive and at least one of them
/// exceeds its ceiling capacity (e_x > |P1| A^2 or e_q > |P2| B^2); calling
/// this when the zero-residual-split branch applies is a caller bug.
///
/// Returns (gamma, e_x', e_q') where gamma = e_x'/e_q' solves
///   gamma * (e_q - sum_P2 min(a^2/gamma, B^2)) = e_x - sum_P1 min(b^2 gamma, A^2).
/// The left side minus the right is piecewise linear in gamma with kinks at
/// A^2/b_l^2 and a_l^2/B^2, so the root is located by a breakpoint scan and
/// solved exactly on the bracketing segment by two-point interpolation.
pub fn fixed_point_gamma(
    b_p1: &[f64],
    a_p2: &[f64],
    e_x: f64,
    e_q: f64,
    ceil_a: f64,
    ceil_b: f64,
) -> Result<(f64, f64, f64)> {
    if !(e_x > 0.0) || !(e_q > 0.0) {
        return Err(Error::Precondition(format!(
            "fixed point needs positive residuals, got e_x={e_x}, e_q={e_q}"
        )));
    }
    if !ceil_a.is_finite() || !ceil_b.is_finite() {
        return Err(Error::Precondition(
            "fixed point needs finite magnitude ceilings".into(),
        ));
    }
    let cap_x = b_p1.len() as f64 * ceil_a * ceil_a;
    let cap_q = a_p2.len() as f64 * ceil_b * ceil_b;
    if e_x <= cap_x && e_q <= cap_q {
        return Err(Error::Precondition(
            "zero-residual-split branch applies; fixed point must not run".into(),
        ));
    }
    debug_assert!(b_p1.iter().all(|&v| v > 0.0) && a_p2.iter().all(|&v| v > 0.0));

    let za = ceil_a * ceil_a;
    let zb = ceil_b * ceil_b;
    // f(gamma) = e_x - sum_P1 min(b^2 gamma, A^2) - gamma e_q + sum_P2 min(a^2, B^2 gamma):
    // strictly decreasing, f(0) = e_x > 0, f -> -inf; its unique root is gamma.
    let f = |g: f64| -> f64 {
        let s1: f64 = b_p1.iter().map(|&b| (b * b * g).min(za)).sum();
        let s2: f64 = a_p2.iter().map(|&a| (a * a).min(zb * g)).sum();
        e_x - s1 - g * e_q + s2
    };

    let mut breakpoints: Vec<f64> = b_p1
        .iter()
        .map(|&b| za / (b * b))
        .chain(a_p2.iter().map(|&a| (a * a) / zb))
        .filter(|g| g.is_finite() && *g > 0.0)
        .collect();
    breakpoints.sort_by(f64::total_cmp);
    breakpoints.dedup();

    let mut lo = 0.0;
    let mut f_lo = e_x;
    let mut bracket = None;
    for &g in &breakpoints {
        let fg = f(g);
        if fg <= 0.0 {
            bracket = Some((g, fg));
            break;
        }
        lo = g;
        f_lo = fg;
    }
    let (hi, f_hi) = match bracket {
        Some(seg) => seg,
        None => {
            // Root beyond the last breakpoint; f is a single linear piece on
            // [lo, inf), so any second sample pins it down exactly.
            let probe = if lo > 0.0 { 2.0 * lo } else { 1.0 };
            (probe, f(probe))
        }
    };
    let gamma = if f_hi == 0.0 {
        hi
    } else if f_hi == f_lo {
        lo
    } else {
        lo - f_lo * (hi - lo) / (f_hi - f_lo)
    };

    let s1: f64 = b_p1.iter().map(|&b| (b * b * gamma).min(za)).sum();
    let s2: f64 = a_p2.iter().map(|&a| (a * a / gamma).min(zb)).sum();
    let e_x_split = (e_x - s1).max(0.0);
    let e_q_split = (e_q - s2).max(0.0);
    Ok((gamma, e_x_split, e_q_split))
}

/// Solve the cross-term program for a slot problem.
pub fn double_waterfill_slots(p: &SlotProblem) -> Result<DoubleWaterfillResult> {
    let n1 = p.n1();
    let n2 = p.n2();
    let n3 = p.n3;
    validate_problem(p)?;

    if n3 > 0 && (!p.ceil_a.is_finite() || !p.ceil_b.is_finite()) {
        return Ok(unconstrained(p));
    }

    if n3 == 0 {
        // Decoupled: one waterfill per object (Lemma "exact solutions", 1-2).
        let wa = waterfill(&p.b_p1, p.e_x, p.ceil_a)?;
        let wb = waterfill(&p.a_p2, p.e_q, p.ceil_b)?;
        return Ok(assemble(wa, wb, &[], &[], 0.0, 0.0, Branch::Disjoint));
    }

    if n1 == 0 && n2 == 0 {
        // Identical supports: Cauchy-Schwarz over P3 alone.
        let a3 = if p.e_x > 0.0 { (p.e_x / n3 as f64).sqrt() } else { 0.0 };
        let b3 = if p.e_q > 0.0 { (p.e_q / n3 as f64).sqrt() } else { 0.0 };
        let (lambda, mu) = if p.e_x > 0.0 && p.e_q > 0.0 {
            ((p.e_q / p.e_x).sqrt(), (p.e_x / p.e_q).sqrt())
        } else {
            (0.0, 0.0)
        };
        return Ok(DoubleWaterfillResult {
            v_opt: -(p.e_x * p.e_q).sqrt(),
            a: vec![a3; n3],
            b: vec![b3; n3],
            alpha: vec![0.0; n3],
            beta: vec![0.0; n3],
            lambda,
            mu,
            e_x_split: p.e_x,
            e_q_split: p.e_q,
            branch: Branch::IdenticalSupport,
        });
    }

    let cap_x = n1 as f64 * p.ceil_a * p.ceil_a;
    let cap_q = n2 as f64 * p.ceil_b * p.ceil_b;

    // Degenerate corners: one residual is zero while the other overflows its
    // P-set capacity. The overflow parks on P3 against a zero counterpart,
    // contributing nothing to the cross term.
    if p.e_x == 0.0 && p.e_q > cap_q {
        let wb = waterfill(&p.a_p2, cap_q, p.ceil_b)?;
        let excess = p.e_q - cap_q;
        let b3 = vec![(excess / n3 as f64).sqrt(); n3];
        let a3 = vec![0.0; n3];
        return Ok(assemble(zero_fill(n1), wb, &a3, &b3, 0.0, excess, Branch::ZeroResidualSplit));
    }
    if p.e_q == 0.0 && p.e_x > cap_x {
        let wa = waterfill(&p.b_p1, cap_x, p.ceil_a)?;
        let excess = p.e_x - cap_x;
        let a3 = vec![(excess / n3 as f64).sqrt(); n3];
        let b3 = vec![0.0; n3];
        return Ok(assemble(wa, zero_fill(n2), &a3, &b3, excess, 0.0, Branch::ZeroResidualSplit));
    }

    if p.e_x <= cap_x && p.e_q <= cap_q {
        // Both residuals fit entirely under the P1/P2 ceilings; zeroing P3
        // is globally optimal.
        let wa = waterfill(&p.b_p1, p.e_x, p.ceil_a)?;
        let wb = waterfill(&p.a_p2, p.e_q, p.ceil_b)?;
        let a3 = vec![0.0; n3];
        let b3 = vec![0.0; n3];
        return Ok(assemble(wa, wb, &a3, &b3, 0.0, 0.0, Branch::ZeroResidualSplit));
    }

    // General case: exact fixed-point split, then waterfill what is left.
    let (_gamma, e_x_split, e_q_split) =
        fixed_point_gamma(&p.b_p1, &p.a_p2, p.e_x, p.e_q, p.ceil_a, p.ceil_b)?;
    let wa = waterfill(&p.b_p1, p.e_x - e_x_split, p.ceil_a)?;
    let wb = waterfill(&p.a_p2, p.e_q - e_q_split, p.ceil_b)?;
    debug_assert!(e_x_split <= n3 as f64 * p.ceil_a * p.ceil_a * (1.0 + 1e-9));
    debug_assert!(e_q_split <= n3 as f64 * p.ceil_b * p.ceil_b * (1.0 + 1e-9));
    let a3 = vec![(e_x_split / n3 as f64).sqrt(); n3];
    let b3 = vec![(e_q_split / n3 as f64).sqrt(); n3];
    let mut out = assemble(wa, wb, &a3, &b3, e_x_split, e_q_split, Branch::FixedPoint);
    // The sub-waterfills ran at the split energies; their internal
    // multipliers can disagree with the global ones when a sub-waterfill
    // ends fully saturated, so rebuild the multiplier set from the fixed
    // point. max(b/A - lambda, 0) is the correct ceiling multiplier for
    // saturated and unsaturated entries alike: an unsaturated entry has
    // b/A < lambda at the fixed point.
    if e_x_split > 0.0 && e_q_split > 0.0 {
        out.lambda = (e_q_split / e_x_split).sqrt();
        out.mu = (e_x_split / e_q_split).sqrt();
        for i in 0..n1 {
            out.alpha[i] = (p.b_p1[i] / p.ceil_a - out.lambda).max(0.0);
        }
        for i in 0..n2 {
            out.beta[i] = (p.a_p2[i] / p.ceil_b - out.mu).max(0.0);
        }
    }
    Ok(out)
}

fn validate_problem(p: &SlotProblem) -> Result<()> {
    if !(p.e_x >= 0.0) || !(p.e_q >= 0.0) {
        return Err(Error::invalid("residual energies must be >= 0"));
    }
    let x_slots = (p.n1() + p.n3) as f64;
    let q_slots = (p.n2() + p.n3) as f64;
    if p.ceil_a.is_finite() && p.e_x > x_slots * p.ceil_a * p.ceil_a * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::InfeasibleEnergy(format!(
            "e_x = {} exceeds total capacity {}",
            p.e_x,
            x_slots * p.ceil_a * p.ceil_a
        )));
    }
    if p.ceil_b.is_finite() && p.e_q > q_slots * p.ceil_b * p.ceil_b * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::InfeasibleEnergy(format!(
            "e_q = {} exceeds total capacity {}",
            p.e_q,
            q_slots * p.ceil_b * p.ceil_b
        )));
    }
    if (p.n1() + p.n3 == 0 && p.e_x > 0.0) || (p.n2() + p.n3 == 0 && p.e_q > 0.0) {
        return Err(Error::InfeasibleEnergy(
            "positive residual with no unknown slots".into(),
        ));
    }
    Ok(())
}

fn zero_fill(n: usize) -> WaterfillResult {
    WaterfillResult {
        a: vec![0.0; n],
        lambda: 0.0,
        alphas: vec![0.0; n],
        v_opt: 0.0,
        reserve: 0.0,
    }
}

fn assemble(
    wa: WaterfillResult,
    wb: WaterfillResult,
    a3: &[f64],
    b3: &[f64],
    e_x_split: f64,
    e_q_split: f64,
    branch: Branch,
) -> DoubleWaterfillResult {
    let cross3: f64 = a3.iter().zip(b3).map(|(x, y)| x * y).sum();
    let mut a = wa.a;
    a.extend_from_slice(a3);
    let mut alpha = wa.alphas;
    alpha.extend(std::iter::repeat(0.0).take(a3.len()));
    let mut b = wb.a;
    b.extend_from_slice(b3);
    let mut beta = wb.alphas;
    beta.extend(std::iter::repeat(0.0).take(b3.len()));
    DoubleWaterfillResult {
        v_opt: wa.v_opt + wb.v_opt - cross3,
        a,
        b,
        alpha,
        beta,
        lambda: wa.lambda,
        mu: wb.lambda,
        e_x_split,
        e_q_split,
        branch,
    }
}

/// Ceiling-free optimum: maximize c1 sqrt(u1) + c2 sqrt(w2) + sqrt(u3 w3)
/// over the split of each residual between its P-set and P3, where
/// c1 = |b_P1| and c2 = |a_P2|. Used when a magnitude ceiling is unavailable
/// (first-coefficient compression); with P1 = P2 = empty it reduces to the
/// identical-support formula.
fn unconstrained(p: &SlotProblem) -> DoubleWaterfillResult {
    let n1 = p.n1();
    let n2 = p.n2();
    let n3 = p.n3;
    let c1_sq: f64 = p.b_p1.iter().map(|v| v * v).sum();
    let c2_sq: f64 = p.a_p2.iter().map(|v| v * v).sum();
    let c1 = c1_sq.sqrt();
    let c2 = c2_sq.sqrt();

    // (u1, p3x) split of e_x; (w2, p3q) split of e_q. Clamped at zero:
    // the algebra can land one ulp outside [0, e] at degenerate corners.
    let (u1, p3x, w2, p3q) = if p.e_x == 0.0 {
        (0.0, 0.0, p.e_q, 0.0)
    } else if p.e_q == 0.0 {
        (p.e_x, 0.0, 0.0, 0.0)
    } else {
        let m = p.e_x * p.e_q - c1_sq * c2_sq;
        if m <= 0.0 {
            (p.e_x, 0.0, p.e_q, 0.0)
        } else {
            let p3x = (m / (p.e_q + c1_sq)).clamp(0.0, p.e_x);
            let p3q = (m / (p.e_x + c2_sq)).clamp(0.0, p.e_q);
            ((p.e_x - p3x).max(0.0), p3x, (p.e_q - p3q).max(0.0), p3q)
        }
    };

    let cross = c1 * u1.sqrt() + c2 * w2.sqrt() + (p3x * p3q).sqrt();
    let mut a: Vec<f64> = if c1 > 0.0 && u1 > 0.0 {
        p.b_p1.iter().map(|&v| v * u1.sqrt() / c1).collect()
    } else {
        vec![0.0; n1]
    };
    a.extend(std::iter::repeat(if p3x > 0.0 { (p3x / n3 as f64).sqrt() } else { 0.0 }).take(n3));
    let mut b: Vec<f64> = if c2 > 0.0 && w2 > 0.0 {
        p.a_p2.iter().map(|&v| v * w2.sqrt() / c2).collect()
    } else {
        vec![0.0; n2]
    };
    b.extend(std::iter::repeat(if p3q > 0.0 { (p3q / n3 as f64).sqrt() } else { 0.0 }).take(n3));
    let (lambda, mu) = if p3x > 0.0 && p3q > 0.0 {
        ((p3q / p3x).sqrt(), (p3x / p3q).sqrt())
    } else {
        (0.0, 0.0)
    };
    DoubleWaterfillResult {
        v_opt: -cross,
        a,
        b,
        alpha: vec![0.0; n1 + n3],
        beta: vec![0.0; n2 + n3],
        lambda,
        mu,
        e_x_split: p3x,
        e_q_split: p3q,
        branch: Branch::Unconstrained,
    }
}

/// Solve the cross-term program for a compressed pair.
pub fn double_waterfill(cx: &CompressedSeq, cq: &CompressedSeq) -> Result<DoubleWaterfillResult> {
    let (_, problem) = SlotProblem::from_pair(cx, cq)?;
    double_waterfill_slots(&problem)
}

/// Lower/upper bounds on the distance between the originals of two
/// compressed objects.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundPair {
    pub lb: f64,
    pub ub: f64,
    /// The known-part statistic: lb^2 + ub^2 = 2 d_hat.
    pub d_hat: f64,
}

impl BoundPair {
    /// Midpoint proxy (lb + ub) / 2.
    pub fn mid(&self) -> f64 {
        0.5 * (self.lb + self.ub)
    }

    pub fn width(&self) -> f64 {
        self.ub - self.lb
    }

    fn from_v(d_hat: f64, v_opt: f64) -> BoundPair {
        let lb = (d_hat + 2.0 * v_opt).max(0.0).sqrt();
        let ub = (d_hat - 2.0 * v_opt).max(0.0).sqrt();
        BoundPair { lb, ub, d_hat }
    }
}

/// Deterministic total order on compressed objects, used to canonicalize the
/// orientation of a pair so that bounds are bitwise symmetric.
fn canonical_le(x: &CompressedSeq, q: &CompressedSeq) -> bool {
    use std::cmp::Ordering;
    let ord = x
        .n()
        .cmp(&q.n())
        .then(x.kept().cmp(&q.kept()))
        .then_with(|| x.positions().cmp(q.positions()))
        .then_with(|| {
            for (a, b) in x.values().iter().zip(q.values()) {
                let o = (a.re.to_bits(), a.im.to_bits()).cmp(&(b.re.to_bits(), b.im.to_bits()));
                if o != Ordering::Equal {
                    return o;
                }
            }
            Ordering::Equal
        })
        .then_with(|| x.residual().to_bits().cmp(&q.residual().to_bits()))
        .then_with(|| x.norm_sq().to_bits().cmp(&q.norm_sq().to_bits()));
    ord != Ordering::Greater
}

/// Optimal lower/upper bounds on the Euclidean distance between the original
/// sequences of two compressed objects.
pub fn distance_bounds(cx: &CompressedSeq, cq: &CompressedSeq) -> Result<BoundPair> {
    check_pair(cx, cq)?;
    let (x, q) = if canonical_le(cx, cq) { (cx, cq) } else { (cq, cx) };
    let (partition, problem) = SlotProblem::from_pair(x, q)?;
    let dw = double_waterfill_slots(&problem)?;
    let mut cross0 = 0.0;
    for &l in &partition.p0 {
        let xv = value_at(x, l);
        let qv = value_at(q, l);
        cross0 += x.weight(l) * (xv.conj() * qv).re;
    }
    let d_hat = x.norm_sq() + q.norm_sq() - 2.0 * cross0;
    Ok(BoundPair::from_v(d_hat, dw.v_opt))
}

/// Bounds against a fully known spectrum (one-sided compression): a single
/// waterfill over X's unknown slots with the counterpart magnitudes read off
/// the dense spectrum. Used for centroid distances in k-Means.
pub fn bounds_vs_uncompressed(cx: &CompressedSeq, q: &Spectrum) -> Result<BoundPair> {
    if q.len() != cx.n() || q.basis() != cx.basis() {
        return Err(Error::InvalidPair(format!(
            "spectrum (n={}, basis={}) incompatible with object (n={}, basis={})",
            q.len(),
            q.basis().as_str(),
            cx.n(),
            cx.basis().as_str()
        )));
    }
    if cx.paired() && !q.conjugate_symmetric() {
        return Err(Error::InvalidPair(
            "paired object requires a conjugate-symmetric counterpart spectrum".into(),
        ));
    }
    let bins = cx.storable_bins() as u32;
    let in_x = membership(cx.positions(), bins);
    let mut cross0 = 0.0;
    let mut b = Vec::new();
    for l in 0..bins {
        let w = cx.weight(l);
        let qv = q.coeffs()[l as usize];
        if in_x[l as usize] {
            let xv = value_at(cx, l);
            cross0 += w * (xv.conj() * qv).re;
        } else {
            let mag = qv.norm();
            for _ in 0..w as usize {
                b.push(mag);
            }
        }
    }
    let wf = waterfill(&b, cx.residual(), ceiling_of(cx))?;
    let norm_q: f64 = if cx.paired() {
        (0..bins).map(|l| cx.weight(l) * q.coeffs()[l as usize].norm_sqr()).sum()
    } else {
        q.energy()
    };
    let d_hat = cx.norm_sq() + norm_q - 2.0 * cross0;
    Ok(BoundPair::from_v(d_hat, wf.v_opt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compress::{compress_first, compress_top};
    use crate::transform::{dft_forward, euclidean, forward, Basis, Sequence};
    use rand::prelude::*;
    use rand_chacha::ChaCha12Rng;

    fn random_seq(rng: &mut impl Rng, n: usize) -> Sequence {
        Sequence::new((0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
    }

    /// Bisection oracle for the fixed-point equation, independent of the
    /// breakpoint-scan implementation.
    fn bisect_gamma(b_p1: &[f64], a_p2: &[f64], e_x: f64, e_q: f64, za: f64, zb: f64) -> f64 {
        let f = |g: f64| -> f64 {
            let s1: f64 = b_p1.iter().map(|&b| (b * b * g).min(za * za)).sum();
            let s2: f64 = a_p2.iter().map(|&a| (a * a).min(zb * zb * g)).sum();
            e_x - s1 - g * e_q + s2
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(hi) > 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn partition_identical_supports() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let seq = random_seq(&mut rng, 32);
        let spec = dft_forward(&seq);
        let cx = compress_top(&spec, 6).unwrap();
        let p = build_partition(&cx, &cx).unwrap();
        assert!(p.p1.is_empty() && p.p2.is_empty());
        assert_eq!(p.p0.len(), 6);
        assert_eq!(p.p0.len() + p.p3.len(), cx.storable_bins());
    }

    #[test]
    fn partition_disjoint_full_cover() {
        // Two objects over 4 unpaired bins, kept sets {0,1} and {2,3}.
        let spec = Spectrum::from_coeffs(
            vec![
                Complex64::new(1.0, 0.0),
                Complex64::new(2.0, 0.0),
                Complex64::new(3.0, 0.0),
                Complex64::new(4.0, 0.0),
            ],
            Basis::Dft,
            false,
        )
        .unwrap();
        let cx = compress_first(&spec, 2).unwrap();
        let cq = compress_top(&spec, 2).unwrap(); // keeps {2,3}
        assert_eq!(cq.positions(), &[2, 3]);
        let p = build_partition(&cx, &cq).unwrap();
        assert!(p.p3.is_empty());
        assert!(p.p0.is_empty());
        assert_eq!(p.p1, vec![2, 3]);
        assert_eq!(p.p2, vec![0, 1]);
    }

    #[test]
    fn partition_matches_set_algebra_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..50 {
            let sx = random_seq(&mut rng, 32);
            let sq = random_seq(&mut rng, 32);
            let cx = compress_top(&dft_forward(&sx), 8).unwrap();
            let cq = compress_top(&dft_forward(&sq), 8).unwrap();
            let p = build_partition(&cx, &cq).unwrap();
            let xs: std::collections::BTreeSet<u32> = cx.positions().iter().copied().collect();
            let qs: std::collections::BTreeSet<u32> = cq.positions().iter().copied().collect();
            let bins: std::collections::BTreeSet<u32> = (0..cx.storable_bins() as u32).collect();
            let p0: Vec<u32> = xs.intersection(&qs).copied().collect();
            let p1: Vec<u32> = qs.difference(&xs).copied().collect();
            let p2: Vec<u32> = xs.difference(&qs).copied().collect();
            let p3: Vec<u32> = bins
                .iter()
                .filter(|l| !xs.contains(l) && !qs.contains(l))
                .copied()
                .collect();
            assert_eq!(p.p0, p0);
            assert_eq!(p.p1, p1);
            assert_eq!(p.p2, p2);
            assert_eq!(p.p3, p3);
        }
    }

    #[test]
    fn partition_rejects_mismatched_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        let a = compress_top(&dft_forward(&random_seq(&mut rng, 32)), 4).unwrap();
        let b = compress_top(&dft_forward(&random_seq(&mut rng, 64)), 4).unwrap();
        assert!(matches!(build_partition(&a, &b), Err(Error::InvalidPair(_))));
        let c = compress_top(&forward(&random_seq(&mut rng, 32), Basis::Haar).unwrap(), 4).unwrap();
        assert!(matches!(build_partition(&a, &c), Err(Error::InvalidPair(_))));
    }

    #[test]
    fn fixed_point_symmetric_case() {
        let (g, ex1, eq1) = fixed_point_gamma(&[1.0], &[1.0], 1.5, 1.5, 1.0, 1.0).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        assert!((ex1 - 0.5).abs() < 1e-12);
        assert!((eq1 - 0.5).abs() < 1e-12);
        let oracle = bisect_gamma(&[1.0], &[1.0], 1.5, 1.5, 1.0, 1.0);
        assert!((g - oracle).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_asymmetric_case() {
        let (g, ex1, eq1) = fixed_point_gamma(&[1.0], &[1.0], 2.0, 3.0, 1.0, 1.0).unwrap();
        assert!((g - 2.0 / 3.0).abs() < 1e-12, "gamma = {g}");
        assert!((ex1 - 4.0 / 3.0).abs() < 1e-12);
        assert!((eq1 - 2.0).abs() < 1e-12);
        let oracle = bisect_gamma(&[1.0], &[1.0], 2.0, 3.0, 1.0, 1.0);
        assert!((g - oracle).abs() < 1e-9);
    }

    #[test]
    fn fixed_point_balanced_overflow() {
        let (g, ex1, eq1) = fixed_point_gamma(&[1.0], &[1.0], 2.0, 2.0, 1.0, 1.0).unwrap();
        assert!((g - 1.0).abs() < 1e-12);
        assert!((ex1 - 1.0).abs() < 1e-12);
        assert!((eq1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_consistency_on_random_instances() {
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let mut ran = 0;
        for _ in 0..500 {
            let n1 = rng.random_range(0..5usize);
            let n2 = rng.random_range(0..5usize);
            let ceil_a = rng.random_range(0.3..2.0);
            let ceil_b = rng.random_range(0.3..2.0);
            let b_p1: Vec<f64> = (0..n1).map(|_| rng.random_range(ceil_b..3.0 * ceil_b)).collect();
            let a_p2: Vec<f64> = (0..n2).map(|_| rng.random_range(ceil_a..3.0 * ceil_a)).collect();
            let n3 = rng.random_range(1..6usize);
            let e_x = rng.random_range(0.01..(n1 + n3) as f64 * ceil_a * ceil_a);
            let e_q = rng.random_range(0.01..(n2 + n3) as f64 * ceil_b * ceil_b);
            if e_x <= n1 as f64 * ceil_a * ceil_a && e_q <= n2 as f64 * ceil_b * ceil_b {
                continue;
            }
            ran += 1;
            let (g, ex1, eq1) =
                fixed_point_gamma(&b_p1, &a_p2, e_x, e_q, ceil_a, ceil_b).unwrap();
            // gamma = e_x'/e_q'.
            assert!(ex1 > 0.0 && eq1 > 0.0, "split must be positive");
            assert!((ex1 / eq1 - g).abs() <= 1e-9 * g.max(1.0));
            // Nonlinear system residuals.
            let r1: f64 = b_p1.iter().map(|&b| (b * b * g).min(ceil_a * ceil_a)).sum::<f64>()
                - (e_x - ex1);
            let r2: f64 = a_p2.iter().map(|&a| (a * a / g).min(ceil_b * ceil_b)).sum::<f64>()
                - (e_q - eq1);
            assert!(r1.abs() < 1e-9 && r2.abs() < 1e-9, "residuals {r1} {r2}");
            // Against the bisection oracle.
            let oracle = bisect_gamma(&b_p1, &a_p2, e_x, e_q, ceil_a, ceil_b);
            assert!((g - oracle).abs() <= 1e-8 * g.max(1.0), "{g} vs {oracle}");
        }
        assert!(ran > 100, "too few instances exercised the fixed point");
    }

    #[test]
    fn fixed_point_rejects_in_range_instances() {
        assert!(matches!(
            fixed_point_gamma(&[1.0, 1.0], &[1.0, 1.0], 1.0, 1.0, 1.0, 1.0),
            Err(Error::Precondition(_))
        ));
    }

    fn slots(b_p1: &[f64], a_p2: &[f64], n3: usize, e_x: f64, e_q: f64, ca: f64, cb: f64) -> SlotProblem {
        SlotProblem {
            b_p1: b_p1.to_vec(),
            a_p2: a_p2.to_vec(),
            n3,
            e_x,
            e_q,
            ceil_a: ca,
            ceil_b: cb,
        }
    }

    #[test]
    fn double_waterfill_disjoint_example() {
        let p = slots(&[2.0], &[3.0], 0, 1.0, 4.0, 2.0, 3.0);
        let r = double_waterfill_slots(&p).unwrap();
        assert_eq!(r.branch, Branch::Disjoint);
        assert!((r.v_opt + 8.0).abs() < 1e-12, "v = {}", r.v_opt);
    }

    #[test]
    fn double_waterfill_identical_support_example() {
        let p = slots(&[], &[], 3, 4.0, 9.0, 1.5, 2.0);
        let r = double_waterfill_slots(&p).unwrap();
        assert_eq!(r.branch, Branch::IdenticalSupport);
        assert!((r.v_opt + 6.0).abs() < 1e-12);
        assert!((r.lambda * r.mu - 1.0).abs() < 1e-12);
    }

    #[test]
    fn double_waterfill_fixed_point_example() {
        let p = slots(&[1.0], &[1.0], 2, 1.5, 1.5, 1.0, 1.0);
        let r = double_waterfill_slots(&p).unwrap();
        assert_eq!(r.branch, Branch::FixedPoint);
        assert!((r.e_x_split - 0.5).abs() < 1e-12);
        assert!((r.e_q_split - 0.5).abs() < 1e-12);
        assert!((r.a[0] - 1.0).abs() < 1e-12, "P1 allocation saturates");
        assert!((r.b[0] - 1.0).abs() < 1e-12);
        assert!((r.a[1] - 0.5).abs() < 1e-12, "P3 allocation 0.5");
        assert!((r.a[2] - 0.5).abs() < 1e-12);
        assert!((r.v_opt + 2.5).abs() < 1e-12);
        assert!((r.lambda * r.mu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn double_waterfill_zero_residual_split_example() {
        let p = slots(&[2.0], &[2.0], 1, 1.0, 1.0, 3.0, 3.0);
        let r = double_waterfill_slots(&p).unwrap();
        assert_eq!(r.branch, Branch::ZeroResidualSplit);
        assert!((r.v_opt + 4.0).abs() < 1e-12, "v = {}", r.v_opt);
        assert_eq!(r.e_x_split, 0.0);
        assert_eq!(r.e_q_split, 0.0);
        // P3 allocations are zero.
        assert_eq!(r.a[1], 0.0);
        assert_eq!(r.b[1], 0.0);
    }

    #[test]
    fn double_waterfill_ordering_across_p_sets() {
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..300 {
            let n1 = rng.random_range(0..4usize);
            let n2 = rng.random_range(0..4usize);
            let n3 = rng.random_range(1..5usize);
            let ca = rng.random_range(0.3..1.5);
            let cb = rng.random_range(0.3..1.5);
            let b_p1: Vec<f64> = (0..n1).map(|_| rng.random_range(cb..3.0)).collect();
            let a_p2: Vec<f64> = (0..n2).map(|_| rng.random_range(ca..3.0)).collect();
            let e_x = rng.random_range(0.0..(n1 + n3) as f64 * ca * ca);
            let e_q = rng.random_range(0.0..(n2 + n3) as f64 * cb * cb);
            let p = slots(&b_p1, &a_p2, n3, e_x, e_q, ca, cb);
            let r = double_waterfill_slots(&p).unwrap();
            let min_p1 = r.a[..n1].iter().copied().fold(f64::INFINITY, f64::min);
            let max_p3 = r.a[n1..].iter().copied().fold(0.0, f64::max);
            if n1 > 0 {
                assert!(min_p1 >= max_p3 - 1e-9, "a ordering: {:?}", r.a);
            }
            let min_p2 = r.b[..n2].iter().copied().fold(f64::INFINITY, f64::min);
            let max_p3b = r.b[n2..].iter().copied().fold(0.0, f64::max);
            if n2 > 0 {
                assert!(min_p2 >= max_p3b - 1e-9, "b ordering: {:?}", r.b);
            }
            // Energy split consistency (Theorem on optimal solutions, part 3).
            if r.branch == Branch::FixedPoint {
                assert!(r.e_x_split > 0.0 && r.e_q_split > 0.0);
            }
        }
    }

    #[test]
    fn bounds_identical_lossless_objects() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let seq = random_seq(&mut rng, 16);
        let spec = dft_forward(&seq);
        let c = compress_top(&spec, spec.storable_bins()).unwrap();
        let b = distance_bounds(&c, &c).unwrap();
        assert!(b.lb.abs() < 1e-9 && b.ub.abs() < 1e-9);
    }

    #[test]
    fn bounds_lossless_pair_equal_exact_distance() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for basis in [Basis::Dft, Basis::Haar] {
            let x = random_seq(&mut rng, 64);
            let q = random_seq(&mut rng, 64);
            let sx = forward(&x, basis).unwrap();
            let sq = forward(&q, basis).unwrap();
            let cx = compress_top(&sx, sx.storable_bins()).unwrap();
            let cq = compress_top(&sq, sq.storable_bins()).unwrap();
            let b = distance_bounds(&cx, &cq).unwrap();
            let d = euclidean(&x, &q).unwrap();
            assert!((b.lb - d).abs() < 1e-9, "{basis:?} lb {} vs {d}", b.lb);
            assert!((b.ub - d).abs() < 1e-9, "{basis:?} ub {} vs {d}", b.ub);
        }
    }

    #[test]
    fn bounds_sandwich_on_random_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..100 {
            let n = 64;
            let x = random_seq(&mut rng, n);
            let q = random_seq(&mut rng, n);
            let s = rng.random_range(1..=8);
            for basis in [Basis::Dft, Basis::Haar] {
                let cx = compress_top(&forward(&x, basis).unwrap(), s).unwrap();
                let cq = compress_top(&forward(&q, basis).unwrap(), s).unwrap();
                let b = distance_bounds(&cx, &cq).unwrap();
                let d = euclidean(&x, &q).unwrap();
                assert!(
                    b.lb - 1e-9 <= d && d <= b.ub + 1e-9,
                    "{basis:?} s={s}: lb {} d {} ub {}",
                    b.lb,
                    d,
                    b.ub
                );
                assert!((b.lb * b.lb + b.ub * b.ub - 2.0 * b.d_hat).abs() <= 1e-9 * b.d_hat.max(1.0));
            }
        }
    }

    #[test]
    fn bounds_sandwich_odd_length_dft() {
        // Odd N: no Nyquist bin, every non-DC bin is paired.
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        for _ in 0..50 {
            let x = random_seq(&mut rng, 63);
            let q = random_seq(&mut rng, 63);
            let s = rng.random_range(1..=8);
            let cx = compress_top(&dft_forward(&x), s).unwrap();
            let cq = compress_top(&dft_forward(&q), s).unwrap();
            assert_eq!(cx.storable_bins(), 32);
            let b = distance_bounds(&cx, &cq).unwrap();
            let d = euclidean(&x, &q).unwrap();
            assert!(b.lb - 1e-9 <= d && d <= b.ub + 1e-9, "odd N: lb {} d {d} ub {}", b.lb, b.ub);
        }
        // Lossless odd-N pair reproduces the exact distance.
        let x = random_seq(&mut rng, 63);
        let q = random_seq(&mut rng, 63);
        let sx = dft_forward(&x);
        let sq = dft_forward(&q);
        let cx = compress_top(&sx, sx.storable_bins()).unwrap();
        let cq = compress_top(&sq, sq.storable_bins()).unwrap();
        let b = distance_bounds(&cx, &cq).unwrap();
        let d = euclidean(&x, &q).unwrap();
        assert!((b.lb - d).abs() < 1e-9 && (b.ub - d).abs() < 1e-9);
    }

    #[test]
    fn bounds_sandwich_first_coefficient_pairs() {
        let mut rng = ChaCha12Rng::seed_from_u64(14);
        for _ in 0..100 {
            let x = random_seq(&mut rng, 64);
            let q = random_seq(&mut rng, 64);
            let sx = rng.random_range(1..=8);
            let sq = rng.random_range(1..=8);
            let cx = compress_first(&dft_forward(&x), sx).unwrap();
            let cq = compress_first(&dft_forward(&q), sq).unwrap();
            let b = distance_bounds(&cx, &cq).unwrap();
            let d = euclidean(&x, &q).unwrap();
            assert!(
                b.lb - 1e-9 <= d && d <= b.ub + 1e-9,
                "first-coeff: lb {} d {} ub {}",
                b.lb,
                d,
                b.ub
            );
        }
    }

    #[test]
    fn bounds_mixed_method_pairs_stay_valid() {
        let mut rng = ChaCha12Rng::seed_from_u64(15);
        for _ in 0..100 {
            let x = random_seq(&mut rng, 64);
            let q = random_seq(&mut rng, 64);
            let cx = compress_top(&dft_forward(&x), 6).unwrap();
            let cq = compress_first(&dft_forward(&q), 9).unwrap();
            let b = distance_bounds(&cx, &cq).unwrap();
            let d = euclidean(&x, &q).unwrap();
            assert!(b.lb - 1e-9 <= d && d <= b.ub + 1e-9);
        }
    }

    #[test]
    fn bounds_bitwise_symmetric() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..100 {
            let x = random_seq(&mut rng, 64);
            let q = random_seq(&mut rng, 64);
            let cx = compress_top(&dft_forward(&x), 7).unwrap();
            let cq = compress_top(&dft_forward(&q), 7).unwrap();
            let ab = distance_bounds(&cx, &cq).unwrap();
            let ba = distance_bounds(&cq, &cx).unwrap();
            assert_eq!(ab.lb.to_bits(), ba.lb.to_bits());
            assert_eq!(ab.ub.to_bits(), ba.ub.to_bits());
        }
    }

    #[test]
    fn vs_uncompressed_exact_reconstruction() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let seq = random_seq(&mut rng, 32);
        let spec = dft_forward(&seq);
        let cx = compress_top(&spec, spec.storable_bins()).unwrap();
        let b = bounds_vs_uncompressed(&cx, &spec).unwrap();
        assert!(b.lb.abs() < 1e-9 && b.ub.abs() < 1e-9);
    }

    #[test]
    fn vs_uncompressed_zero_counterpart_collapses() {
        // Q zero on X's unknown bins: no cross term, lb = ub = sqrt(d_hat).
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let seq = random_seq(&mut rng, 16);
        let spec = dft_forward(&seq);
        let cx = compress_top(&spec, 3).unwrap();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 16];
        for &l in cx.positions() {
            coeffs[l as usize] = spec.coeffs()[l as usize];
            if l != 0 && 2 * (l as usize) != 16 {
                coeffs[16 - l as usize] = spec.coeffs()[l as usize].conj();
            }
        }
        let q = Spectrum::from_coeffs(coeffs, Basis::Dft, true).unwrap();
        let b = bounds_vs_uncompressed(&cx, &q).unwrap();
        assert!((b.lb - b.ub).abs() < 1e-12);
        assert!((b.lb - cx.residual().sqrt()).abs() < 1e-9);
    }

    #[test]
    fn vs_uncompressed_sandwich_random() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let x = random_seq(&mut rng, 64);
            let q = random_seq(&mut rng, 64);
            let cx = compress_top(&dft_forward(&x), 6).unwrap();
            let sq = dft_forward(&q);
            let b = bounds_vs_uncompressed(&cx, &sq).unwrap();
            let d = euclidean(&x, &q).unwrap();
            assert!(b.lb - 1e-9 <= d && d <= b.ub + 1e-9, "lb {} d {} ub {}", b.lb, d, b.ub);
        }
    }

    #[test]
    fn unconstrained_matches_identical_support_when_aligned() {
        let p = slots(&[], &[], 4, 2.0, 3.0, f64::INFINITY, f64::INFINITY);
        let r = double_waterfill_slots(&p).unwrap();
        assert!((r.v_opt + 6.0f64.sqrt()).abs() < 1e-12);
    }
}
