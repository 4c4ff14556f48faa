//! Empirical verification engine for the counting statements: the local
//! counting property, the global estimate, covering counts, and the
//! product-form non-divergence and ubiquity bounds.
//!
//! Every reported ratio is exact-rational up to the folded measure error
//! bound. Aggregation is geometric (the claims under audit are
//! multiplicative), and grids that violate the consistency constraint
//! between `alpha` and `beta` are refused with a diagnostic instead of
//! running vacuously.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;
use num_traits::ToPrimitive;

use crate::digits::{cylinder_mass, CylinderWord, DigitSystem};
use crate::fl;
use crate::measure::{big_to_f64, check_depth, interval_units};
use crate::rat::{pow_i128, Rat};
use crate::region::{tree_sum, Interval};
use crate::sample::sample_one;
use crate::stream::{
    count_union, lebesgue_length, measure_union, prepare, Family, Job, MuUnion,
};

#[derive(Clone, Debug)]
pub enum AuditError {
    /// grid violates `alpha <= (1 + delta - beta delta)/(d - delta)`
    ConsistencyRefused { alpha: f64, cap: f64 },
    GridViolation(String),
    Engine(crate::stream::EngineError),
    Unsupported(String),
}

impl core::fmt::Display for AuditError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            AuditError::ConsistencyRefused { alpha, cap } => write!(
                f,
                "refused: alpha = {alpha} exceeds the consistency cap (1+delta-beta*delta)/(d-delta) = {cap}"
            ),
            AuditError::GridViolation(s) => write!(f, "grid violation: {s}"),
            AuditError::Engine(e) => write!(f, "engine: {e}"),
            AuditError::Unsupported(s) => write!(f, "unsupported: {s}"),
        }
    }
}

impl From<crate::stream::EngineError> for AuditError {
    fn from(e: crate::stream::EngineError) -> AuditError {
        AuditError::Engine(e)
    }
}

/// `eta = Q^-tau` as the exact dyadic value of the binary64 computation.
///
/// The exponent convention: irrational scale parameters are rounded once in
/// binary64 and exact thereafter.
pub fn eta_for(q: u64, tau: f64) -> Rat {
    Rat::from_f64_exact(fl::powf(q as f64, -tau)).expect("eta in dyadic range")
}

/// Refuses parameter pairs violating the necessary consistency constraint.
pub fn consistency_guard(sys: &DigitSystem, alpha: f64, beta: f64) -> Result<(), AuditError> {
    let d = sys.dim() as f64;
    let delta = sys.hausdorff_dim();
    if d > delta {
        let cap = (1.0 + delta - beta * delta) / (d - delta);
        if alpha > cap {
            return Err(AuditError::ConsistencyRefused { alpha, cap });
        }
    }
    Ok(())
}

/// Grid for the local counting audit.
#[derive(Clone, Debug)]
pub struct AuditGrid {
    pub q_list: Vec<u64>,
    pub taus: Vec<f64>,
    pub theta: Rat,
    pub alpha: f64,
    pub beta: f64,
    /// override for the measure depth; `None` picks a depth that resolves
    /// components to a relative error around 1e-4
    pub max_depth: Option<u32>,
}

impl AuditGrid {
    fn check(&self, sys: &DigitSystem) -> Result<(), AuditError> {
        consistency_guard(sys, self.alpha, self.beta)?;
        let d = sys.dim() as f64;
        for &q in &self.q_list {
            for &tau in &self.taus {
                let eta = eta_for(q, tau).to_f64();
                let lo = fl::powf(q as f64, -self.alpha) * (1.0 - 1e-12);
                let hi = fl::powf(q as f64, -1.0 / d) * (1.0 + 1e-12);
                if eta < lo || eta > hi {
                    return Err(AuditError::GridViolation(format!(
                        "eta = {eta:.3e} outside [Q^-alpha, Q^-1/d] at Q = {q}, tau = {tau}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Ball depth rule: deepest cylinder level with side `>= Q^-beta`.
    pub fn ball_depth(&self, sys: &DigitSystem, q: u64) -> u32 {
        let nb = self.beta * fl::ln(q as f64) / fl::ln(sys.base() as f64);
        (fl::floor(nb + 1e-9) as u32).min(8)
    }
}

/// One audited grid cell.
#[derive(Clone, Debug)]
pub struct AuditCell {
    pub q: u64,
    pub tau: f64,
    pub eta: Rat,
    pub ball_id: String,
    /// exact ratio `mu(B cap A_Q)/(mu(B) Q eta^d)` (midpoint of the bracket)
    pub ratio_exact: BigRational,
    pub ratio: f64,
    /// half-width of the ratio bracket from measure error units
    pub err: f64,
    /// zero-numerator cells are flagged, not failed
    pub flagged_empty: bool,
}

/// Geometric summary of a cell collection.
#[derive(Clone, Debug, Default)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub median: f64,
    /// `max/min` over unflagged cells
    pub spread: f64,
    pub n_cells: usize,
    pub n_flagged: usize,
}

pub fn summarize(ratios: &[f64]) -> Summary {
    let mut vals: Vec<f64> = ratios.iter().copied().filter(|r| *r > 0.0).collect();
    let n_flagged = ratios.len() - vals.len();
    if vals.is_empty() {
        return Summary { n_cells: ratios.len(), n_flagged, ..Summary::default() };
    }
    vals.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    let min = vals[0];
    let max = *vals.last().unwrap();
    let median = if vals.len() % 2 == 1 {
        vals[vals.len() / 2]
    } else {
        fl::sqrt(vals[vals.len() / 2 - 1] * vals[vals.len() / 2])
    };
    Summary { min, max, median, spread: max / min, n_cells: ratios.len(), n_flagged }
}

/// Full report of a local counting audit.
#[derive(Clone, Debug)]
pub struct AuditReport {
    pub cells: Vec<AuditCell>,
    pub summary: Summary,
    /// per-Q spread of unflagged ratios (for trend regression)
    pub per_q_spread: Vec<(u64, f64)>,
}

/// Families of `A_Q(eta, theta)`: one per `q` in `[Q, 2Q)`.
pub fn aq_families(big_q: u64, eta: Rat, theta: Rat) -> Vec<Family> {
    (big_q..2 * big_q).map(|q| Family { q, eta, theta }).collect()
}

/// Picks a measure depth resolving components to relative error ~1e-4.
pub fn auto_max_depth(sys: &DigitSystem, big_q: u64, eta: &Rat) -> u32 {
    let b = sys.base() as f64;
    let cover = fl::ceil(fl::logb(2.0 * big_q as f64 / eta.to_f64(), b)) as u32;
    let md = cover + 7;
    md.min(44)
}

/// Runner hook: computes a stitched measure pass for a prepared job. The
/// sequential default is [`measure_union`]; callers with a thread pool pass
/// a parallel equivalent (results are identical by construction).
pub type MeasureRunner<'a> = &'a dyn Fn(&Job, u32) -> MuUnion;

/// Builds the `(Q, eta, theta)` measure job rooted at the whole line.
pub fn aq_job(
    sys: &DigitSystem,
    big_q: u64,
    eta: &Rat,
    theta: &Rat,
    table_depth: u32,
    max_depth: u32,
) -> Result<Job, AuditError> {
    if sys.dim() != 1 {
        return Err(AuditError::Unsupported(
            "streamed counting audits are one-dimensional; d = 2 runs go through the product-form audits".into(),
        ));
    }
    check_depth(sys.branching(), max_depth)
        .map_err(|_| AuditError::GridViolation("max_depth exceeds exact unit range".into()))?;
    let fams = prepare(&aq_families(big_q, *eta, *theta))?;
    Ok(Job { sys: sys.clone(), fams, root_depth: 0, root_left_num: 0, max_depth, table_depth })
}

/// Runs one `(Q, eta, theta)` measure pass and returns the stitched result
/// with per-cylinder tables to `table_depth`.
pub fn aq_measure_pass(
    sys: &DigitSystem,
    big_q: u64,
    eta: &Rat,
    theta: &Rat,
    table_depth: u32,
    max_depth: u32,
) -> Result<MuUnion, AuditError> {
    let job = aq_job(sys, big_q, eta, theta, table_depth, max_depth)?;
    let levels = task_levels(sys, big_q);
    Ok(measure_union(&job, levels))
}

/// Task-tree split depth: enough tasks to parallelize, few enough to keep
/// per-task window generation cheap.
pub fn task_levels(sys: &DigitSystem, big_q: u64) -> u32 {
    let nd = sys.digits(0).len() as f64;
    let target = (3.0 * big_q as f64 * big_q as f64 / 60_000.0).max(1.0);
    (fl::ceil(fl::ln(target) / fl::ln(nd)) as u32).clamp(1, 9)
}

/// Local counting audit: `mu(B cap A_Q(eta, theta)) / (mu(B) Q eta^d)` over
/// the grid, with balls realized as cylinders of side `>= Q^-beta`.
pub fn local_counting_audit(sys: &DigitSystem, grid: &AuditGrid) -> Result<AuditReport, AuditError> {
    local_counting_audit_with(sys, grid, &|job, levels| measure_union(job, levels))
}

/// As [`local_counting_audit`] with an injected measure runner.
pub fn local_counting_audit_with(
    sys: &DigitSystem,
    grid: &AuditGrid,
    run: MeasureRunner,
) -> Result<AuditReport, AuditError> {
    grid.check(sys)?;
    let mut cells = Vec::new();
    let mut per_q_spread = Vec::new();
    for &q in &grid.q_list {
        let ball_depth = grid.ball_depth(sys, q);
        let mut q_ratios = Vec::new();
        for &tau in &grid.taus {
            let eta = eta_for(q, tau);
            let md = grid.max_depth.unwrap_or_else(|| auto_max_depth(sys, q, &eta));
            let job = aq_job(sys, q, &eta, &grid.theta, ball_depth, md)?;
            let mu = run(&job, task_levels(sys, q));
            let unit = Rat::new(1, pow_i128(sys.branching() as i128, md).unwrap()).to_big();
            let ball_mass = cylinder_mass(sys, ball_depth).to_big();
            let denom_base = &ball_mass
                * BigRational::from_integer(q.into())
                * eta.to_big().pow(sys.dim() as i32);
            let tbl = &mu.tables[ball_depth as usize];
            let stbl = &mu.stables[ball_depth as usize];
            for (i, (&units, &strad)) in tbl.iter().zip(stbl.iter()).enumerate() {
                let lo = BigRational::from_integer(units.into()) * &unit;
                let hi = BigRational::from_integer((units + strad as u128).into()) * &unit;
                let two = BigRational::from_integer(2.into());
                let mid = (&lo + &hi) / &two;
                let ratio_exact = &mid / &denom_base;
                let err = big_to_f64(&((&hi - &lo) / &two / &denom_base));
                let ratio = big_to_f64(&ratio_exact);
                let flagged_empty = units == 0 && strad == 0;
                if !flagged_empty {
                    q_ratios.push(ratio);
                }
                cells.push(AuditCell {
                    q,
                    tau,
                    eta,
                    ball_id: ball_word_id(sys, ball_depth, i),
                    ratio_exact,
                    ratio,
                    err,
                    flagged_empty,
                });
            }
        }
        let s = summarize(&q_ratios);
        if s.min > 0.0 {
            per_q_spread.push((q, s.spread));
        }
    }
    let summary = summarize(&cells.iter().filter(|c| !c.flagged_empty).map(|c| c.ratio).collect::<Vec<_>>());
    Ok(AuditReport { cells, summary, per_q_spread })
}

/// Digit-word id of the `index`-th depth-`depth` cylinder.
pub fn ball_word_id(sys: &DigitSystem, depth: u32, index: usize) -> String {
    let digits = sys.digits(0);
    let nd = digits.len();
    let mut rev = Vec::with_capacity(depth as usize);
    let mut i = index;
    for _ in 0..depth {
        rev.push(digits[i % nd]);
        i /= nd;
    }
    let mut s = String::from(".");
    for &d in rev.iter().rev() {
        s.push((b'0' + d) as char);
    }
    s
}

/// Global counting audit output.
#[derive(Clone, Debug)]
pub struct GlobalAudit {
    pub q: u64,
    pub eta: Rat,
    pub measure: BigRational,
    pub err: f64,
    pub ratio: f64,
}

/// `mu(A_Q(eta, theta)) / (Q eta^d)`. Full systems use the exact
/// Lebesgue-length sweep (no depth cutoff); fractal systems use the measure
/// descent with a certified error.
pub fn global_counting_audit(
    sys: &DigitSystem,
    big_q: u64,
    eta: &Rat,
    theta: &Rat,
    max_depth: Option<u32>,
) -> Result<GlobalAudit, AuditError> {
    global_counting_audit_with(
        sys,
        big_q,
        eta,
        theta,
        max_depth,
        &|job, levels| measure_union(job, levels),
        &|fams, lo, hi, chunks| lebesgue_length(fams, lo, hi, chunks),
    )
}

/// Runner hook for the exact Lebesgue-length sweep.
pub type LengthRunner<'a> =
    &'a dyn Fn(&[crate::stream::Prepared], &Rat, &Rat, u64) -> BigRational;

/// As [`global_counting_audit`] with injected runners.
pub fn global_counting_audit_with(
    sys: &DigitSystem,
    big_q: u64,
    eta: &Rat,
    theta: &Rat,
    max_depth: Option<u32>,
    run: MeasureRunner,
    run_len: LengthRunner,
) -> Result<GlobalAudit, AuditError> {
    if sys.dim() != 1 {
        return Err(AuditError::Unsupported("global audit is one-dimensional".into()));
    }
    let denom = BigRational::from_integer(big_q.into()) * eta.to_big();
    if sys.is_full() {
        let fams = prepare(&aq_families(big_q, *eta, *theta))?;
        let chunks = (3 * big_q * big_q / 45_000).clamp(1, 32768);
        let len = run_len(&fams, &Rat::ZERO, &Rat::ONE, chunks);
        let ratio = big_to_f64(&(&len / &denom));
        return Ok(GlobalAudit { q: big_q, eta: *eta, measure: len, err: 0.0, ratio });
    }
    let md = max_depth.unwrap_or_else(|| auto_max_depth(sys, big_q, eta));
    let job = aq_job(sys, big_q, eta, theta, 0, md)?;
    let mu = run(&job, task_levels(sys, big_q));
    let v = mu.value();
    let ratio = big_to_f64(&(&v.value / &denom));
    let err = big_to_f64(&(&v.error_bound / &denom));
    Ok(GlobalAudit { q: big_q, eta: *eta, measure: v.value, err, ratio })
}

/// Covering count output.
#[derive(Clone, Debug)]
pub struct CoveringAudit {
    pub q: u64,
    pub eta: Rat,
    pub depth: u32,
    pub count: u64,
    pub ratio: f64,
}

/// Counts depth-`ceil(log_b(Q/eta))` cylinders of `K` meeting
/// `A_Q(eta, theta)` and compares against `Q^(1+delta) eta^(d-delta)`.
///
/// The `b`-adic proxy for balls of radius `eta/Q` inflates constants by at
/// most `b^delta`.
pub fn covering_count_audit(
    sys: &DigitSystem,
    big_q: u64,
    eta: &Rat,
    theta: &Rat,
    depth_override: Option<u32>,
) -> Result<CoveringAudit, AuditError> {
    if sys.dim() != 1 {
        return Err(AuditError::Unsupported("covering audit is one-dimensional".into()));
    }
    let b = sys.base() as f64;
    let depth = depth_override.unwrap_or_else(|| {
        fl::ceil(fl::logb(big_q as f64 / eta.to_f64(), b)) as u32
    });
    if depth > 34 {
        return Err(AuditError::GridViolation(format!("covering depth {depth} exceeds the guard")));
    }
    let fams = prepare(&aq_families(big_q, *eta, *theta))?;
    let job = Job {
        sys: sys.clone(),
        fams,
        root_depth: 0,
        root_left_num: 0,
        max_depth: 34,
        table_depth: 0,
    };
    let levels = task_levels(sys, big_q).min(depth.saturating_sub(1).max(1));
    let cert = (depth + 14).min(34);
    let counts = count_union(&job, levels, depth, depth, cert);
    let count = counts[0];
    let delta = sys.hausdorff_dim();
    let denom = fl::powf(big_q as f64, 1.0 + delta) * fl::powf(eta.to_f64(), 1.0 - delta);
    Ok(CoveringAudit { q: big_q, eta: *eta, depth, count, ratio: count as f64 / denom })
}

// ---------------------------------------------------------------------------
// product-form audits (d = 2)
// ---------------------------------------------------------------------------

/// Exact branch measure `mu_w(A(q, eta) cap factor-box)` pieces for one
/// coordinate factor: returns `(lo, hi)` units at `depth` relative to the
/// whole line (not yet normalized by the branch mass).
fn factor_family_units(
    fsys: &DigitSystem,
    q: u64,
    eta: &Rat,
    word_box: &Interval,
    depth: u32,
) -> (u128, u128) {
    let ivs = crate::approx::family_intervals(q, eta, &Rat::ZERO, word_box);
    let mut lo = 0u128;
    let mut hi = 0u128;
    for iv in ivs {
        let (l, h) = interval_units(fsys, &iv, depth);
        lo += l;
        hi += h;
    }
    (lo, hi)
}

/// Non-divergence audit summand data.
#[derive(Clone, Debug)]
pub struct NondivAudit {
    pub q_max: u64,
    pub eta: [Rat; 2],
    /// exact bracket for `sum_q mu_w(R(q, eta))`
    pub sum_lo: BigRational,
    pub sum_hi: BigRational,
    /// `sum / (Q eta_1 eta_2)`
    pub ratio: f64,
    pub err: f64,
    /// every summand obeyed `mu_w(R(q,eta)) <= prod_j min(1, 2 eta_j)` + error
    pub summand_bound_ok: bool,
}

/// `sum_{1 <= q <= Q} mu_w(R(q, eta)) / (Q eta_1 eta_2)` for a product-form
/// system, each term exact up to depth brackets.
pub fn nondivergence_audit(
    sys: &DigitSystem,
    word: &CylinderWord,
    q_max: u64,
    eta: &[Rat; 2],
) -> Result<NondivAudit, AuditError> {
    if sys.dim() != 2 {
        return Err(AuditError::Unsupported("non-divergence audit needs a product system".into()));
    }
    for e in eta {
        if e.is_zero() || e.is_negative() || *e >= Rat::new(1, 2) {
            return Err(AuditError::GridViolation("eta_j must be in (0, 1/2)".into()));
        }
    }
    let fx = sys.factor(0);
    let fy = sys.factor(1);
    let bx = crate::digits::cylinder_box(sys, word);
    let k = word.depth();
    let depth = (fl::ceil(fl::logb(q_max as f64 / eta[0].to_f64().min(eta[1].to_f64()), sys.base() as f64))
        as u32
        + 4)
        .min(40);
    check_depth(fx.branching(), depth)
        .map_err(|_| AuditError::GridViolation("depth exceeds exact unit range".into()))?;
    let ux = pow_i128(fx.branching() as i128, depth).unwrap();
    let uy = pow_i128(fy.branching() as i128, depth).unwrap();
    // branch masses of the factor words
    let mass_x = Rat::new(1, pow_i128(fx.branching() as i128, k).unwrap());
    let mass_y = Rat::new(1, pow_i128(fy.branching() as i128, k).unwrap());
    let unit = Rat::new(1, ux).to_big() * Rat::new(1, uy).to_big()
        / (mass_x.to_big() * mass_y.to_big());
    let cap = Rat::ONE.min(eta[0].mul(&Rat::from_int(2))).to_big()
        * Rat::ONE.min(eta[1].mul(&Rat::from_int(2))).to_big();
    let mut lo_terms = Vec::with_capacity(q_max as usize);
    let mut hi_terms = Vec::with_capacity(q_max as usize);
    let mut summand_bound_ok = true;
    for q in 1..=q_max {
        let (xl, xh) = factor_family_units(&fx, q, &eta[0], &bx.interval(0), depth);
        let (yl, yh) = factor_family_units(&fy, q, &eta[1], &bx.interval(1), depth);
        let lo = BigRational::from_integer((xl).into())
            * BigRational::from_integer((yl).into())
            * &unit;
        let hi = BigRational::from_integer((xh).into())
            * BigRational::from_integer((yh).into())
            * &unit;
        if lo > cap.clone() + BigRational::from_integer(1.into()) * (&hi - &lo) {
            summand_bound_ok = false;
        }
        lo_terms.push(lo);
        hi_terms.push(hi);
    }
    let sum_lo = tree_sum(&mut lo_terms);
    let sum_hi = tree_sum(&mut hi_terms);
    let denom = BigRational::from_integer(q_max.into()) * eta[0].to_big() * eta[1].to_big();
    let two = BigRational::from_integer(2.into());
    let mid = (&sum_lo + &sum_hi) / &two;
    let ratio = big_to_f64(&(&mid / &denom));
    let err = big_to_f64(&((&sum_hi - &sum_lo) / &two / &denom));
    Ok(NondivAudit { q_max, eta: *eta, sum_lo, sum_hi, ratio, err, summand_bound_ok })
}

/// Ubiquity audit output.
#[derive(Clone, Debug)]
pub struct UbiquityAudit {
    pub q: u64,
    pub eta: [Rat; 2],
    /// auto-calibrated low-range cut (as a fraction of Q)
    pub c: Rat,
    /// certified lower bound `1 - sum_{q < cQ} mu(B cap R_q)/mu(B)`
    pub ratio_lower: f64,
    /// exact ratio when the arrangement is small enough to sweep
    pub ratio_exact: Option<f64>,
    /// fraction of sampled points of `B` with a solution `q <= 2Q`
    pub saturation: f64,
}

const UBIQ_EXACT_QMAX: u64 = 320;

/// Local ubiquity for rectangles: mass of `B cap union_{q=cQ}^{2Q} R(q, eta)`
/// relative to `mu(B)`, with `eta_1 eta_2 = 1/Q` exactly.
///
/// The exact union measure is computed for small `Q` by an arrangement sweep;
/// for large `Q` the audit reports the certified lower bound obtained from
/// the exact low-range sum (mirroring how the small cut `c` is chosen), plus
/// a sampled check that solutions with `q <= 2Q` exist everywhere.
pub fn ubiquity_audit(
    sys: &DigitSystem,
    word: &CylinderWord,
    big_q: u64,
    eta: &[Rat; 2],
    seed: u64,
) -> Result<UbiquityAudit, AuditError> {
    if sys.dim() != 2 {
        return Err(AuditError::Unsupported("ubiquity audit needs a product system".into()));
    }
    if eta[0].mul(&eta[1]) != Rat::new(1, big_q as i128) {
        return Err(AuditError::GridViolation("eta_1 * eta_2 must equal 1/Q exactly".into()));
    }
    for e in eta {
        if *e >= Rat::new(1, 2) || e.is_zero() || e.is_negative() {
            return Err(AuditError::GridViolation("eta_j must be in (0, 1/2)".into()));
        }
    }
    // auto-calibrate c: the largest 2^-j whose low-range mass stays below 1/2
    let mut c = Rat::new(1, 2);
    let mut low_ratio = 1.0f64;
    for j in 1..=8u32 {
        c = Rat::new(1, 1 << j);
        let cut = c.mul(&Rat::from_int(big_q as i128)).ceil().max(1) as u64;
        if cut <= 1 {
            low_ratio = 0.0;
            break;
        }
        let nd = nondivergence_audit(sys, word, cut - 1, eta)?;
        let mass = cylinder_mass(sys, word.depth()).to_big();
        low_ratio = big_to_f64(&(&nd.sum_hi / &mass));
        if low_ratio <= 0.5 {
            break;
        }
    }
    let ratio_lower = (1.0 - low_ratio).max(0.0);

    // sampled saturation: every point of B should satisfy some q <= 2Q
    let n_samples = 200u64;
    let mut sat = 0u64;
    let depth = 24u32;
    for i in 0..n_samples {
        let s = sample_one(sys, depth, seed, i);
        // remap into the word cylinder: word_left + b^-k * sample
        let k = word.depth();
        let scale = crate::digits::cylinder_box(sys, word);
        let x: Vec<Rat> = (0..2)
            .map(|j| scale.lo[j].add(&s.point[j].mul(&sys.scale(k)).mul(&Rat::ONE)))
            .collect();
        if (1..=2 * big_q).any(|q| dist_to_lattice_le(&x[0], q, &eta[0]) && dist_to_lattice_le(&x[1], q, &eta[1])) {
            sat += 1;
        }
    }
    let saturation = sat as f64 / n_samples as f64;

    let ratio_exact = if big_q <= UBIQ_EXACT_QMAX {
        Some(exact_union_ratio(sys, word, big_q, eta, &c)?)
    } else {
        None
    };

    Ok(UbiquityAudit { q: big_q, eta: *eta, c, ratio_lower, ratio_exact, saturation })
}

/// `||q x|| <= eta` by exact arithmetic.
fn dist_to_lattice_le(x: &Rat, q: u64, eta: &Rat) -> bool {
    let qx = x.mul(&Rat::from_int(q as i128));
    let p = qx.add(&Rat::new(1, 2)).floor();
    qx.sub(&Rat::from_int(p)).abs() <= *eta
}

/// Exact `mu(B cap union_{q in [cQ, 2Q]} R(q, eta)) / mu(B)` by sweeping the
/// first-coordinate arrangement and measuring Lebesgue sections.
fn exact_union_ratio(
    sys: &DigitSystem,
    word: &CylinderWord,
    big_q: u64,
    eta: &[Rat; 2],
    c: &Rat,
) -> Result<f64, AuditError> {
    let fx = sys.factor(0);
    if !sys.coord_is_full(1) {
        return Err(AuditError::Unsupported(
            "exact ubiquity sweep assumes the second coordinate keeps all digits".into(),
        ));
    }
    let bx = crate::digits::cylinder_box(sys, word);
    let bxi = bx.interval(0);
    let byi = bx.interval(1);
    let q_lo = c.mul(&Rat::from_int(big_q as i128)).ceil().max(1) as u64;
    let q_hi = 2 * big_q;
    // events: endpoints of the x-families inside the word box
    let mut events: Vec<Rat> = vec![bxi.lo, bxi.hi];
    for q in q_lo..=q_hi {
        for iv in crate::approx::family_intervals(q, &eta[0], &Rat::ZERO, &bxi) {
            events.push(iv.lo);
            events.push(iv.hi);
        }
    }
    events.sort_unstable();
    events.dedup();
    let depth = 30u32;
    let (bx_lo_units, _) = interval_units(&fx, &bxi, depth);
    if bx_lo_units == 0 {
        return Err(AuditError::GridViolation("empty ball".into()));
    }
    let by_len = byi.length().to_big();
    let mut acc = BigRational::from_integer(0.into());
    for w in events.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a >= b {
            continue;
        }
        let piece = Interval::new(a, b);
        let (pl, ph) = interval_units(&fx, &piece, depth);
        if ph == 0 {
            continue;
        }
        // active q set at the midpoint
        let mid = a.add(&b).div(&Rat::from_int(2));
        let active: Vec<u64> =
            (q_lo..=q_hi).filter(|&q| dist_to_lattice_le(&mid, q, &eta[0])).collect();
        if active.is_empty() {
            continue;
        }
        // Lebesgue length of the y-section: union over active q
        let mut ivs = Vec::new();
        for &q in &active {
            ivs.extend(crate::approx::family_intervals(q, &eta[1], &Rat::ZERO, &byi));
        }
        let sec = crate::region::RegionUnion::from_intervals(ivs).length();
        acc += BigRational::from_integer(pl.into()) * sec;
        let _ = ph;
    }
    let total = acc
        / (BigRational::from_integer(bx_lo_units.into()) * &by_len);
    Ok(big_to_f64(&total).to_f64().unwrap_or(f64::NAN))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_sys() -> DigitSystem {
        DigitSystem::new_1d(5, &[0, 1, 2, 3]).unwrap()
    }

    #[test]
    fn consistency_guard_refuses() {
        let sys = five_sys();
        // cap = (1 + 0.8614 - beta*0.8614) / (1 - 0.8614)
        assert!(consistency_guard(&sys, 2.0, 0.3).is_ok());
        assert!(matches!(
            consistency_guard(&sys, 13.0, 0.3),
            Err(AuditError::ConsistencyRefused { .. })
        ));
        // full system: no cap
        assert!(consistency_guard(&DigitSystem::full(5, 1), 100.0, 0.3).is_ok());
    }

    #[test]
    fn global_audit_lebesgue_small() {
        let full = DigitSystem::full(5, 1);
        // Q=4, eta=1/8: exact interval-union oracle
        let eta = Rat::new(1, 8);
        let g = global_counting_audit(&full, 4, &eta, &Rat::ZERO, None).unwrap();
        let expect = crate::approx::build_aq(4, &eta, &Rat::ZERO, &Interval::new(Rat::ZERO, Rat::ONE))
            .unwrap()
            .length();
        assert_eq!(g.measure, expect);
        assert!(g.ratio >= 0.5 && g.ratio <= 3.0);
        assert_eq!(g.err, 0.0);
    }

    #[test]
    fn global_audit_q1_degenerate() {
        let full = DigitSystem::full(5, 1);
        let eta = Rat::new(1, 10);
        let g = global_counting_audit(&full, 1, &eta, &Rat::ZERO, None).unwrap();
        // A_1(eta, 0) = [0, eta] u [1-eta, 1]: ratio = 2
        assert!((g.ratio - 2.0).abs() < 1e-12);
        assert!(g.ratio <= 4.0);
    }

    #[test]
    fn local_audit_smoke_and_saturated_cell() {
        let sys = five_sys();
        let grid = AuditGrid {
            q_list: vec![16, 32],
            taus: vec![1.05],
            theta: Rat::ZERO,
            alpha: 1.5,
            beta: 0.3,
            max_depth: None,
        };
        let rep = local_counting_audit(&sys, &grid).unwrap();
        assert!(!rep.cells.is_empty());
        for c in &rep.cells {
            assert!(c.ratio >= 0.0);
            assert!(c.err < 0.01, "err {}", c.err);
        }
        assert!(rep.summary.n_cells > 0);
    }

    #[test]
    fn local_audit_eta_range_guard() {
        let sys = five_sys();
        let grid = AuditGrid {
            q_list: vec![16],
            taus: vec![0.5], // eta = Q^-0.5 > Q^-1: violates the upper range
            theta: Rat::ZERO,
            alpha: 1.5,
            beta: 0.3,
            max_depth: None,
        };
        assert!(matches!(local_counting_audit(&sys, &grid), Err(AuditError::GridViolation(_))));
    }

    #[test]
    fn covering_monotone_in_eta() {
        let sys = five_sys();
        let eta1 = Rat::new(1, 64);
        let eta2 = Rat::new(1, 32);
        let a = covering_count_audit(&sys, 8, &eta1, &Rat::ZERO, Some(5)).unwrap();
        let b = covering_count_audit(&sys, 8, &eta2, &Rat::ZERO, Some(5)).unwrap();
        assert!(b.count >= a.count, "A_Q(2 eta) contains A_Q(eta)");
    }

    #[test]
    fn covering_empty_when_far() {
        // theta far from K at coarse q: K(3,{0}) lives near 0; theta = 1/2
        let sys = DigitSystem::new_1d(3, &[0]).unwrap();
        let a = covering_count_audit(&sys, 2, &Rat::new(1, 100), &Rat::new(1, 2), Some(4)).unwrap();
        assert_eq!(a.count, 0);
    }

    #[test]
    fn nondiv_lebesgue_identity() {
        // full digit set both coordinates: each summand = prod min(1, 2 eta_j)
        let sys = DigitSystem::full(5, 2);
        let w = CylinderWord::root(2);
        let eta = [Rat::new(1, 8), Rat::new(1, 5)];
        let nd = nondivergence_audit(&sys, &w, 32, &eta).unwrap();
        // ratio = sum_q (2 eta1)(2 eta2) / (Q eta1 eta2) = 4, up to the bracket
        assert!((nd.ratio - 4.0).abs() <= nd.err + 1e-9, "ratio {} err {}", nd.ratio, nd.err);
        assert!(nd.summand_bound_ok);
    }

    #[test]
    fn nondiv_single_term() {
        let sys = DigitSystem::full(5, 2);
        let w = CylinderWord::root(2);
        let eta = [Rat::new(1, 8), Rat::new(1, 5)];
        let nd = nondivergence_audit(&sys, &w, 1, &eta).unwrap();
        assert!(nd.ratio <= 4.0 + nd.err + 1e-9, "ratio {} err {}", nd.ratio, nd.err);
    }

    #[test]
    fn ubiquity_small_exact() {
        // K = K(5,{0,1,2,3}) x [0,1], Q = 16, eta = (1/8, 1/2...) -> must have product 1/Q
        let sys = DigitSystem::new_2d(5, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        let w = CylinderWord::root(2);
        let eta = [Rat::new(1, 8), Rat::new(1, 2)];
        // eta2 = 1/2 violates the open range: expect error
        assert!(matches!(
            ubiquity_audit(&sys, &w, 16, &eta, 1),
            Err(AuditError::GridViolation(_))
        ));
        // valid: eta = (1/8, 8/Q) with Q = 32 -> product 1/32, eta2 = 1/4
        let eta = [Rat::new(1, 8), Rat::new(1, 4)];
        let ub = ubiquity_audit(&sys, &w, 32, &eta, 1).unwrap();
        assert!(ub.ratio_lower >= 0.2, "lower {}", ub.ratio_lower);
        let ex = ub.ratio_exact.unwrap();
        assert!(ex >= ub.ratio_lower - 1e-9, "exact {ex} vs lower {}", ub.ratio_lower);
        assert!(ex <= 1.0 + 1e-12);
        assert!(ub.saturation == 1.0, "saturation {}", ub.saturation);
    }

    #[test]
    fn eta_product_precondition() {
        let sys = DigitSystem::new_2d(5, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        let w = CylinderWord::root(2);
        let eta = [Rat::new(1, 8), Rat::new(1, 5)];
        assert!(matches!(
            ubiquity_audit(&sys, &w, 32, &eta, 1),
            Err(AuditError::GridViolation(_))
        ));
    }
}
