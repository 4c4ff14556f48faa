//! Finite-stage approximations of the well-approximable set, box-counting
//! dimension estimation, and the mass-distribution audits that probe the
//! Hölder behavior of the restricted and ball-family measures.
//!
//! The limsup set is approximated by one generation `[Q0, Q1]` of denominator
//! families. Dimension estimates from box counts are upper-biased at coarse
//! depths and lower-biased once the depth outruns the component widths, so
//! the depth window is chosen (or should be chosen) where `b^-n` spans the
//! component widths.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_rational::BigRational;

use crate::audit::{aq_families, auto_max_depth, eta_for, task_levels, AuditError};
use crate::digits::{cylinder_box, cylinder_mass, CylinderWord, DigitSystem};
use crate::fl;
use crate::measure::{interval_units, MeasureValue};
use crate::rat::{pow_i128, Rat};
use crate::region::{Interval, RegionUnion};
use crate::sample::{sample_one, SplitRng};
use crate::stream::{count_union, measure_union, prepare, Family, Job};

/// One-generation approximation `union_{q=Q0}^{Q1} A(q, q^-tau, theta)`.
#[derive(Clone, Debug)]
pub struct FiniteStageSet {
    pub tau: f64,
    pub theta: Rat,
    pub q0: u64,
    pub q1: u64,
    pub families: Vec<Family>,
    /// set when some `eta_q >= 1/2`, i.e. the stage covers the whole cube
    pub covers_everything: bool,
    /// explicit normalized region, materialized when affordable
    pub region: Option<RegionUnion>,
}

pub const STAGE_COMPONENT_CAP: u64 = 10_000_000;

pub fn build_finite_stage(
    tau: f64,
    theta: &Rat,
    q0: u64,
    q1: u64,
) -> Result<FiniteStageSet, AuditError> {
    if q0 == 0 || q1 < q0 {
        return Err(AuditError::GridViolation("need 1 <= Q0 <= Q1".into()));
    }
    let mut families = Vec::new();
    let mut covers = false;
    let mut est_components = 0u64;
    for q in q0..=q1 {
        let eta = eta_for(q, tau);
        if eta >= Rat::new(1, 2) {
            covers = true;
            continue;
        }
        est_components += q + 2;
        families.push(Family { q, eta, theta: *theta });
    }
    let region = if covers {
        Some(RegionUnion::single(Interval::new(Rat::ZERO, Rat::ONE)))
    } else if est_components <= STAGE_COMPONENT_CAP / 4 {
        let mut ivs = Vec::new();
        let clip = Interval::new(Rat::ZERO, Rat::ONE);
        for f in &families {
            ivs.extend(crate::approx::family_intervals(f.q, &f.eta, &f.theta, &clip));
        }
        Some(RegionUnion::from_intervals(ivs))
    } else {
        None
    };
    Ok(FiniteStageSet { tau, theta: *theta, q0, q1, families, covers_everything: covers, region })
}

/// Box-count profile of `K cap stage` and its fitted slope (base-`b` logs).
#[derive(Clone, Debug)]
pub struct BoxDimEstimate {
    pub depths: Vec<u32>,
    pub counts: Vec<u64>,
    /// least-squares slope of `log_b N_n` against `n`
    pub slope: f64,
    /// maximal absolute fit residual
    pub residual: f64,
}

/// Counts depth-`n` cylinders of `K` meeting the stage for `n` in the window
/// and fits the growth exponent. `window = None` picks depths spanning the
/// component widths.
pub fn box_dim_estimate(
    sys: &DigitSystem,
    stage: &FiniteStageSet,
    window: Option<(u32, u32)>,
) -> Result<BoxDimEstimate, AuditError> {
    box_dim_estimate_with(sys, stage, window, &|job, lv, lo, hi, cert| {
        count_union(job, lv, lo, hi, cert)
    })
}

/// Runner hook for counting passes.
pub type CountRunner<'a> = &'a dyn Fn(&Job, u32, u32, u32, u32) -> Vec<u64>;

/// As [`box_dim_estimate`] with an injected counting runner.
pub fn box_dim_estimate_with(
    sys: &DigitSystem,
    stage: &FiniteStageSet,
    window: Option<(u32, u32)>,
    run: CountRunner,
) -> Result<BoxDimEstimate, AuditError> {
    if sys.dim() != 1 {
        return Err(AuditError::Unsupported("box counting is one-dimensional here".into()));
    }
    let b = sys.base() as f64;
    let (n_lo, n_hi) = match window {
        Some(w) => w,
        None => {
            let w_max = 2.0 * eta_for(stage.q0, stage.tau).to_f64() / stage.q0 as f64;
            let w_min = 2.0 * eta_for(stage.q1, stage.tau).to_f64() / stage.q1 as f64;
            let lo = fl::floor(fl::logb(1.0 / w_max, b)) as u32;
            let hi = fl::ceil(fl::logb(1.0 / w_min, b)) as u32;
            (lo.max(1), hi.min(lo.max(1) + 8).min(14))
        }
    };
    if n_hi < n_lo || n_hi > 20 {
        return Err(AuditError::GridViolation("degenerate depth window".into()));
    }
    let nd = sys.digits(0).len() as u64;
    let counts: Vec<u64> = if stage.covers_everything {
        (n_lo..=n_hi).map(|n| nd.pow(n)).collect()
    } else {
        let fams = prepare(&stage.families)?;
        let job = Job {
            sys: sys.clone(),
            fams,
            root_depth: 0,
            root_left_num: 0,
            max_depth: 34,
            table_depth: 0,
        };
        let levels = task_levels(sys, stage.q1 / 2 + 1).min(n_lo.max(1));
        let cert = (n_hi + 16).min(34);
        run(&job, levels, n_lo, n_hi, cert)
    };
    let depths: Vec<u32> = (n_lo..=n_hi).collect();
    let xs: Vec<f64> = depths.iter().map(|&n| n as f64).collect();
    let ys: Vec<f64> = counts.iter().map(|&c| fl::logb((c.max(1)) as f64, b)).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    let slope = if den > 0.0 { num / den } else { f64::NAN };
    let intercept = my - slope * mx;
    let residual = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| fl::abs(y - (intercept + slope * x)))
        .fold(0.0f64, f64::max);
    Ok(BoxDimEstimate { depths, counts, slope, residual })
}

/// Sup of the normalized Hölder ratio over one radius range.
#[derive(Clone, Debug)]
pub struct CaseSup {
    pub name: &'static str,
    pub r_lo: f64,
    pub r_hi: f64,
    pub sup: f64,
    pub cells: usize,
}

/// Report of the restricted-measure audit (`nu = mu|_F / mu(F)`).
#[derive(Clone, Debug)]
pub struct NuAudit {
    pub q: u64,
    pub eta: Rat,
    pub s: f64,
    pub mu_f: MeasureValue,
    pub mu_b: Rat,
    /// `mu(F) / (mu(B) Q^(1 - tau d))`
    pub norm_ratio: f64,
    pub cases: Vec<CaseSup>,
    pub empty: bool,
}

/// Audits `nu(B(x,r)) mu(B) / r^s` over the case ranges of the restricted
/// construction `F = B cap A_Q(c Q^-tau, 0)` at `d = 1`.
///
/// Ranges at cylinder scales take the complete per-depth suprema from one
/// streaming pass (balls realized as cylinders); the two deepest ranges,
/// narrower than one cylinder level, are probed with sampled centers and
/// windowed exact measures.
#[allow(clippy::too_many_arguments)]
pub fn nu_restricted_audit(
    sys: &DigitSystem,
    word: &CylinderWord,
    big_q: u64,
    tau: f64,
    c: &Rat,
    s: f64,
    beta: f64,
    n_samples: u64,
    seed: u64,
) -> Result<NuAudit, AuditError> {
    if sys.dim() != 1 {
        return Err(AuditError::Unsupported("restricted nu audit is one-dimensional".into()));
    }
    let eta = c.mul(&eta_for(big_q, tau));
    if eta >= Rat::new(1, 2) || eta.is_zero() || eta.is_negative() {
        return Err(AuditError::GridViolation("c Q^-tau must land in (0, 1/2)".into()));
    }
    let delta = sys.hausdorff_dim();
    let sprime = delta + 2.0 / (1.0 + tau) - 1.0;
    let qf = big_q as f64;
    let b = sys.base() as f64;
    let root_box = cylinder_box(sys, word);
    let mu_b = cylinder_mass(sys, word.depth());

    // streaming pass rooted at B with per-depth suprema
    let md = auto_max_depth(sys, big_q, &eta);
    let fams = prepare(&aq_families(big_q, eta, Rat::ZERO))?;
    let root_left_num = {
        let mut n: i128 = 0;
        for &d in word.coord(0) {
            n = n * sys.base() as i128 + d as i128;
        }
        n
    };
    let job = Job {
        sys: sys.clone(),
        fams,
        root_depth: word.depth(),
        root_left_num,
        max_depth: md,
        table_depth: 0,
    };
    let levels = task_levels(sys, big_q).min(md.saturating_sub(word.depth()));
    let mu = measure_union(&job, levels);
    let mu_f = mu.value();
    let empty = mu.units == 0;
    let mu_f_lo = f64::max(mu.units as f64, 0.5)
        / pow_i128(sys.branching() as i128, md).unwrap() as f64;
    let norm_ratio = mu_f.value_f64() / (mu_b.to_f64() * fl::powf(qf, 1.0 - tau));

    // case boundaries (d = 1)
    let r1_lo = fl::powf(qf, -beta);
    let r2_lo = fl::powf(qf, -beta * delta / sprime);
    let r3_lo = fl::powf(qf, -2.0) / 8.0;
    let r4_lo = c.to_f64() * fl::powf(qf, -(1.0 + tau));
    let b_half = root_box.side(0).to_f64() / 2.0;
    let unit = 1.0 / pow_i128(sys.branching() as i128, md).unwrap() as f64;

    let mut cases = Vec::new();
    // cylinder-realized ranges: r_n = b^-n / 2
    let mut sup_for = |lo: f64, hi: f64, name: &'static str| {
        let mut sup = 0.0f64;
        let mut cells = 0usize;
        for m in word.depth()..=mu.max_depth {
            let r = fl::powf(b, -(m as f64)) / 2.0;
            if r < lo || r >= hi {
                continue;
            }
            let mx = mu.max_hi[(m - word.depth()) as usize];
            if mx == 0 {
                continue;
            }
            let nu_val = mx as f64 * unit / mu_f_lo;
            let ratio = nu_val * mu_b.to_f64() / fl::powf(r, s);
            if ratio > sup {
                sup = ratio;
            }
            cells += 1;
        }
        cases.push(CaseSup { name, r_lo: lo, r_hi: hi, sup, cells });
    };
    sup_for(r1_lo, 2.0 * b_half, "case1");
    sup_for(r2_lo, r1_lo, "case2");
    sup_for(r3_lo, r2_lo, "case3B");

    // sampled deep ranges: windowed exact measures around points of F
    if !empty {
        let rng = SplitRng::new(seed);
        let per_case = (n_samples / 2).max(1);
        for (name, lo, hi) in [("case4B", r4_lo, r3_lo), ("case5B", r4_lo * 1e-3, r4_lo)] {
            let mut sup = 0.0f64;
            let mut cells = 0usize;
            let mut tries = 0u64;
            let mut accepted = 0u64;
            while accepted < per_case && tries < 40 * per_case {
                let i = tries;
                tries += 1;
                let x = sample_point_in_word(sys, word, 14, seed, i);
                if !in_aq(&x, big_q, &eta) {
                    continue;
                }
                accepted += 1;
                let u = rng.f64(9, i);
                let r = fl::powf(2.0, fl::ln(lo) / fl::ln(2.0) * (1.0 - u) + fl::ln(hi) / fl::ln(2.0) * u);
                let r = match dyadic_snap(r, 34) {
                    Some(r) if !r.is_zero() => r,
                    _ => continue,
                };
                let (ulo, uhi) = window_units(sys, &x, &r, big_q, &eta, &root_box, md);
                let _ = ulo;
                if uhi == 0 {
                    continue;
                }
                let nu_val = uhi as f64 * unit / mu_f_lo;
                let ratio = nu_val * mu_b.to_f64() / fl::powf(r.to_f64(), s);
                if ratio > sup {
                    sup = ratio;
                }
                cells += 1;
            }
            cases.push(CaseSup { name, r_lo: lo, r_hi: hi, sup, cells });
        }
    }

    Ok(NuAudit { q: big_q, eta, s, mu_f, mu_b, norm_ratio, cases, empty })
}

/// A sample of the branch measure of `word` (point of `K` inside the word).
fn sample_point_in_word(
    sys: &DigitSystem,
    word: &CylinderWord,
    depth: u32,
    seed: u64,
    index: u64,
) -> Rat {
    let s = sample_one(sys, depth, seed, index);
    let bx = cylinder_box(sys, word);
    bx.lo[0].add(&s.point[0].mul(&sys.scale(word.depth())))
}

/// Membership `x in A_Q(eta, 0)` by exact scanning of `q in [Q, 2Q)`.
fn in_aq(x: &Rat, big_q: u64, eta: &Rat) -> bool {
    for q in big_q..2 * big_q {
        let qx = x.mul(&Rat::from_int(q as i128));
        let p = qx.add(&Rat::new(1, 2)).floor();
        if qx.sub(&Rat::from_int(p)).abs() < *eta {
            return true;
        }
    }
    false
}

/// Dyadic rational close to `x` with at most `bits` mantissa bits; keeps
/// downstream denominators inside the exact `i128` range.
fn dyadic_snap(x: f64, bits: i32) -> Option<Rat> {
    if !crate::fl::is_finite(x) || x <= 0.0 {
        return None;
    }
    let e = fl::floor(fl::ln(x) / core::f64::consts::LN_2) as i32;
    let k = (bits - e).clamp(0, 100);
    let den = 1i128 << k;
    let num = fl::round(x * den as f64) as i128;
    if num <= 0 {
        return None;
    }
    Some(Rat::new(num, den))
}

/// Exact unit brackets for `mu([x-r, x+r] cap B cap A_Q)` via direct window
/// enumeration (cheap when `r` is below one lattice spacing). The candidate
/// `p`-range per `q` is bracketed in floats with a safety margin; membership
/// of each candidate interval is then decided exactly.
fn window_units(
    sys: &DigitSystem,
    x: &Rat,
    r: &Rat,
    big_q: u64,
    eta: &Rat,
    root_box: &crate::region::IntervalBox,
    md: u32,
) -> (u128, u128) {
    let ball = Interval::new(x.sub(r), x.add(r));
    let clip = match ball.intersect(&root_box.interval(0)) {
        Some(iv) => iv,
        None => return (0, 0),
    };
    let clip_lo_f = clip.lo.to_f64();
    let clip_hi_f = clip.hi.to_f64();
    let eta_f = eta.to_f64();
    let mut ivs: Vec<Interval> = Vec::new();
    for q in big_q..2 * big_q {
        let qr = Rat::from_int(q as i128);
        let h = eta.div(&qr);
        let hf = eta_f / q as f64;
        let p_lo = fl::floor((clip_lo_f - hf) * q as f64) as i128 - 1;
        let p_hi = fl::ceil((clip_hi_f + hf) * q as f64) as i128 + 1;
        for p in p_lo..=p_hi {
            let cdot = Rat::from_int(p).div(&qr);
            let lo = cdot.sub(&h).max(clip.lo);
            let hi = cdot.add(&h).min(clip.hi);
            if lo <= hi {
                ivs.push(Interval::new(lo, hi));
            }
        }
    }
    let u = RegionUnion::from_intervals(ivs);
    let mut lo = 0u128;
    let mut hi = 0u128;
    for ivc in u.components() {
        let (l, h) = interval_units(sys, ivc, md);
        lo += l;
        hi += h;
    }
    (lo, hi)
}

// ---------------------------------------------------------------------------
// product construction (d = 2)
// ---------------------------------------------------------------------------

/// Output of the full product-form construction run.
#[derive(Clone, Debug)]
pub struct ProductAudit {
    pub q: u64,
    pub eta: [Rat; 2],
    pub c: Rat,
    /// rectangles in the family before selection
    pub family_size: usize,
    /// centers of the selected disjoint subfamily (`#X = #B`)
    pub count: usize,
    /// `#X / (mu(B) Q^((1+tau)(delta-1) + 2 - (d-1) tau))`
    pub count_ratio: f64,
    pub disjoint_ok: bool,
    pub covered_ok: bool,
    pub holder: Vec<CaseSup>,
    pub ubiquity: crate::audit::UbiquityAudit,
}

/// Executes the product-form construction at `d = 2`: rationals near the
/// ball, doubled rectangles, contained rectangles, greedy disjoint selection
/// with exact coverage verification, shrinkage to balls, and the two-range
/// Hölder audit of the ball-family measure.
pub fn product_construction_audit(
    sys: &DigitSystem,
    word: &CylinderWord,
    big_q: u64,
    tau: f64,
    n_samples: u64,
    seed: u64,
) -> Result<ProductAudit, AuditError> {
    if sys.dim() != 2 || !sys.coord_is_full(1) {
        return Err(AuditError::Unsupported(
            "product construction needs K1 x [0,1] with the full digit set in the last coordinate"
                .into(),
        ));
    }
    if !(tau > 0.5 && tau < 1.0) {
        return Err(AuditError::GridViolation("need 1/d < tau < 1/(d-1) at d = 2".into()));
    }
    let eta1 = eta_for(big_q, tau).div(&Rat::from_int(4));
    let eta2 = Rat::new(1, big_q as i128).div(&eta1);
    if eta2 >= Rat::new(1, 2) {
        return Err(AuditError::GridViolation("eta_2 >= 1/2: Q too small for this tau".into()));
    }
    let eta = [eta1, eta2];
    let ubiquity = crate::audit::ubiquity_audit(sys, word, big_q, &eta, seed)?;
    let c = ubiquity.c;
    let q_lo = c.mul(&Rat::from_int(big_q as i128)).ceil().max(1) as u64;
    let q_hi = 2 * big_q;

    let fx = sys.factor(0);
    let bx = cylinder_box(sys, word);
    let bxi = bx.interval(0);
    let byi = bx.interval(1);
    let dmin = fx.digits(0)[0] as i128;
    let bb = sys.base() as i128;

    // qualified rationals and their contained rectangles
    struct R {
        c1: Rat,
        c2: Rat,
        h1: Rat,
        h2: Rat,
        q: u64,
        f1: f64,
        f2: f64,
        g1: f64,
        g2: f64,
    }
    let mut rects: Vec<R> = Vec::new();
    for q in q_lo..=q_hi {
        let qr = Rat::from_int(q as i128);
        let h1 = eta[0].div(&qr);
        let h2 = eta[1].div(&qr);
        let p1_lo = bxi.lo.sub(&h1).mul(&qr).ceil();
        let p1_hi = bxi.hi.add(&h1).mul(&qr).floor();
        let p2_lo = byi.lo.sub(&h2).mul(&qr).ceil();
        let p2_hi = byi.hi.add(&h2).mul(&qr).floor();
        for p1 in p1_lo..=p1_hi {
            let c1 = Rat::from_int(p1).div(&qr);
            let lo = c1.sub(&h1).max(bxi.lo);
            let hi = c1.add(&h1).min(bxi.hi);
            if lo >= hi {
                continue;
            }
            if !crate::approx::open_interval_meets_k(&fx, &lo, &hi) {
                continue;
            }
            // a K1 point y1 with [y1 - h1, y1 + h1] inside the doubled slot:
            // descend to a cylinder inside (lo, hi), then take its dmin-tail
            let y1 = match k_point_inside(&fx, &lo, &hi, dmin, bb) {
                Some(y) => y,
                None => continue,
            };
            for p2 in p2_lo..=p2_hi {
                let c2 = Rat::from_int(p2).div(&qr);
                // second coordinate is the full interval: only box overlap needed
                if c2.add(&h2) <= byi.lo || c2.sub(&h2) >= byi.hi {
                    continue;
                }
                rects.push(R {
                    c1: y1,
                    c2,
                    h1,
                    h2,
                    q,
                    f1: y1.to_f64(),
                    f2: c2.to_f64(),
                    g1: h1.to_f64(),
                    g2: h2.to_f64(),
                });
            }
        }
    }
    let family_size = rects.len();
    if family_size == 0 {
        return Err(AuditError::GridViolation("empty rectangle family".into()));
    }

    // greedy selection: descending scale (ascending q), ties by center
    let mut order: Vec<u32> = (0..rects.len() as u32).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (&rects[a as usize], &rects[b as usize]);
        ra.q.cmp(&rb.q).then_with(|| (ra.c1, ra.c2).cmp(&(rb.c1, rb.c2)))
    });
    // grid over centers, cell = 2 * max half (largest rect)
    let cell1 = 2.0 * rects.iter().map(|r| r.g1).fold(0.0, f64::max);
    let cell2 = 2.0 * rects.iter().map(|r| r.g2).fold(0.0, f64::max);
    let key = |x: f64, c: f64| -> i64 { fl::floor(x / c) as i64 };
    let mut grid: alloc::collections::BTreeMap<(i64, i64), Vec<u32>> =
        alloc::collections::BTreeMap::new();
    let mut selected: Vec<u32> = Vec::new();
    let mut witness: Vec<u32> = vec![u32::MAX; rects.len()];
    let overlaps = |a: &R, s: &R| -> bool {
        // f64 prefilter with exact fallback near the boundary
        let gap1 = fl::abs(a.f1 - s.f1);
        let sum1 = a.g1 + s.g1;
        if gap1 > sum1 + 1e-9 * (1.0 + sum1) {
            return false;
        }
        let gap2 = fl::abs(a.f2 - s.f2);
        let sum2 = a.g2 + s.g2;
        if gap2 > sum2 + 1e-9 * (1.0 + sum2) {
            return false;
        }
        let exact1 = a.c1.sub(&s.c1).abs() < a.h1.add(&s.h1);
        let exact2 = a.c2.sub(&s.c2).abs() < a.h2.add(&s.h2);
        exact1 && exact2
    };
    for &i in &order {
        let r = &rects[i as usize];
        let (k1, k2) = (key(r.f1, cell1), key(r.f2, cell2));
        let mut blocked = u32::MAX;
        'scan: for dk1 in -1..=1i64 {
            for dk2 in -1..=1i64 {
                if let Some(v) = grid.get(&(k1 + dk1, k2 + dk2)) {
                    for &s in v {
                        if overlaps(r, &rects[s as usize]) {
                            blocked = s;
                            break 'scan;
                        }
                    }
                }
            }
        }
        if blocked == u32::MAX {
            grid.entry((k1, k2)).or_default().push(i);
            selected.push(i);
            witness[i as usize] = i;
        } else {
            witness[i as usize] = blocked;
        }
    }

    // exact disjointness of the selected family
    let mut disjoint_ok = true;
    'dis: for (ai, &a) in selected.iter().enumerate() {
        let r = &rects[a as usize];
        let (k1, k2) = (key(r.f1, cell1), key(r.f2, cell2));
        for dk1 in -1..=1i64 {
            for dk2 in -1..=1i64 {
                if let Some(v) = grid.get(&(k1 + dk1, k2 + dk2)) {
                    for &s in v {
                        if s != a && overlaps(r, &rects[s as usize]) {
                            disjoint_ok = false;
                            break 'dis;
                        }
                    }
                }
            }
        }
        let _ = ai;
    }

    // exact coverage through the witness: gap + h_i <= 5^((1+tau)/tau) h_s,
    // with tau rationalized as the audited exponent profile (tau_r = num/den)
    let tau_r = Rat::from_f64_exact(tau).unwrap_or(Rat::new(3, 5));
    let fexp = Rat::ONE.add(&tau_r).div(&tau_r);
    let (pe, qe) = (fexp.num(), fexp.den());
    let five_p = num_bigint::BigInt::from(5).pow(pe.min(64) as u32);
    let covered_ok = if pe > 64 {
        // exponent too wild to certify by integer powers; compare in floats
        let f = fl::powf(5.0, fexp.to_f64());
        rects.iter().enumerate().all(|(i, r)| {
            let s = &rects[witness[i] as usize];
            fl::abs(r.f1 - s.f1) + r.g1 <= f * s.g1 + 1e-12
                && fl::abs(r.f2 - s.f2) + r.g2 <= f * s.g2 + 1e-12
        })
    } else {
        rects.iter().enumerate().all(|(i, r)| {
            let s = &rects[witness[i] as usize];
            let c1 = r.c1.sub(&s.c1).abs().add(&r.h1);
            let c2 = r.c2.sub(&s.c2).abs().add(&r.h2);
            let ok1 = c1.to_big().pow(qe as i32)
                <= s.h1.to_big().pow(qe as i32) * BigRational::from_integer(five_p.clone());
            let ok2 = c2.to_big().pow(qe as i32)
                <= s.h2.to_big().pow(qe as i32) * BigRational::from_integer(five_p.clone());
            ok1 && ok2
        })
    };

    // count ratio against mu(B) Q^((1+tau)(delta-1)+2-(d-1)tau)
    let delta = sys.hausdorff_dim();
    let mu_b = cylinder_mass(sys, word.depth()).to_f64();
    let expo = (1.0 + tau) * (delta - 1.0) + 2.0 - tau;
    let count_ratio = selected.len() as f64 / (mu_b * fl::powf(big_q as f64, expo));

    // Hölder audit of nu = sum_D mu|_D / (mu(D) #B): shrink to balls of
    // half-side eta1/q in both coordinates
    let mut centers: Vec<(f64, f64, u32)> = selected
        .iter()
        .map(|&i| (rects[i as usize].f1, rects[i as usize].f2, i))
        .collect();
    centers.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let n_b = selected.len() as f64;
    let s_expo = delta + 3.0 / (1.0 + tau) - 2.0;
    let rng = SplitRng::new(seed ^ 0x5eed);
    let r_split = fl::powf(big_q as f64, -(1.0 + tau));
    let b_side = bx.side(0).to_f64();
    let mut holder = Vec::new();
    let factor2_len = |c2: &Rat, h2: &Rat, lo: &Rat, hi: &Rat| -> f64 {
        let l = c2.sub(h2).max(*lo);
        let h = c2.add(h2).min(*hi);
        if l >= h {
            0.0
        } else {
            h.sub(&l).to_f64() / h2.mul(&Rat::from_int(2)).to_f64()
        }
    };
    for (name, lo_r, hi_r) in
        [("case1", r_split, b_side), ("case2", r_split * 1e-3, r_split)]
    {
        let mut sup = 0.0f64;
        let mut cells = 0usize;
        let n_q = (n_samples / 2).max(8);
        for t in 0..n_q {
            // center of a random selected ball; r log-uniform in the range
            let pick = selected[rng.below(1, t, selected.len() as u64) as usize] as usize;
            let x1 = rects[pick].f1;
            let x2 = rects[pick].f2;
            let u = rng.f64(2, t);
            let r = fl::exp(fl::ln(lo_r) * (1.0 - u) + fl::ln(hi_r) * u);
            let r_rat = match Rat::from_f64_exact(r) {
                Ok(v) => v,
                Err(_) => continue,
            };
            // nu(B(x,r)): scan candidates by center distance
            let lo_idx = centers.partition_point(|c| c.0 < x1 - r - cell1);
            let mut mass = 0.0f64;
            for cand in &centers[lo_idx..] {
                if cand.0 > x1 + r + cell1 {
                    break;
                }
                let rr = &rects[cand.2 as usize];
                let hb = rr.h1; // ball half-side in both coordinates
                let hbf = rr.g1;
                if fl::abs(cand.1 - x2) > r + hbf + 1e-12 {
                    continue;
                }
                // fully inside?
                if fl::abs(cand.0 - x1) + hbf <= r - 1e-12 && fl::abs(cand.1 - x2) + hbf <= r - 1e-12
                {
                    mass += 1.0;
                    continue;
                }
                // partial: product of per-coordinate fractions
                let x1r = Rat::from_f64_exact(x1).unwrap();
                let x2r = Rat::from_f64_exact(x2).unwrap();
                let lo1 = x1r.sub(&r_rat);
                let hi1 = x1r.add(&r_rat);
                let lo2 = x2r.sub(&r_rat);
                let hi2 = x2r.add(&r_rat);
                // coordinate 1 against the factor measure inside the ball D
                let c1lo = rr.c1.sub(&hb).max(lo1);
                let c1hi = rr.c1.add(&hb).min(hi1);
                if c1lo >= c1hi {
                    continue;
                }
                let (dl, _dh) =
                    interval_units(&fx, &Interval::new(rr.c1.sub(&hb), rr.c1.add(&hb)), 30);
                let (_nl, nh) = interval_units(&fx, &Interval::new(c1lo, c1hi), 30);
                if dl == 0 {
                    continue;
                }
                let frac1 = nh as f64 / dl as f64;
                let frac2 = factor2_len(&rr.c2, &hb, &lo2, &hi2);
                mass += frac1.min(1.0) * frac2;
            }
            if mass <= 0.0 {
                continue;
            }
            let nu_val = mass / n_b;
            let ratio = nu_val * mu_b / fl::powf(r, s_expo);
            if ratio > sup {
                sup = ratio;
            }
            cells += 1;
        }
        holder.push(CaseSup { name, r_lo: lo_r, r_hi: hi_r, sup, cells });
    }

    Ok(ProductAudit {
        q: big_q,
        eta,
        c,
        family_size,
        count: selected.len(),
        count_ratio,
        disjoint_ok,
        covered_ok,
        holder,
        ubiquity,
    })
}

/// A `K`-point `y` with a margin inside the open interval, as the
/// `dmin`-tail of a cylinder contained in it.
fn k_point_inside(fsys: &DigitSystem, lo: &Rat, hi: &Rat, dmin: i128, b: i128) -> Option<Rat> {
    fn rec(
        fsys: &DigitSystem,
        left: Rat,
        n: u32,
        lo: &Rat,
        hi: &Rat,
        dmin: i128,
        b: i128,
        fuel: u32,
    ) -> Option<Rat> {
        let side = fsys.scale(n);
        let right = left.add(&side);
        if right <= *lo || *hi <= left {
            return None;
        }
        if *lo < left && right < *hi {
            // dmin-tail of this cylinder: left + dmin/(b-1) * side
            return Some(left.add(&Rat::new(dmin, b - 1).mul(&side)));
        }
        if fuel == 0 {
            return None;
        }
        let child = fsys.scale(n + 1);
        for &d in fsys.digits(0) {
            let cl = left.add(&Rat::from_int(d as i128).mul(&child));
            if let Some(y) = rec(fsys, cl, n + 1, lo, hi, dmin, b, fuel - 1) {
                return Some(y);
            }
        }
        None
    }
    let width = hi.sub(lo);
    let mut fuel = 3u32;
    let mut s = Rat::ONE;
    let bb = Rat::from_int(b);
    while s > width && fuel < 80 {
        s = s.div(&bb);
        fuel += 1;
    }
    rec(fsys, Rat::ZERO, 0, lo, hi, dmin, b, fuel)
}

/// Identifier string for reports.
pub fn stage_id(stage: &FiniteStageSet) -> String {
    use core::fmt::Write;
    let mut s = String::new();
    let _ = write!(s, "q{}..{}-tau{}", stage.q0, stage.q1, stage.tau);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn five_sys() -> DigitSystem {
        DigitSystem::new_1d(5, &[0, 1, 2, 3]).unwrap()
    }

    #[test]
    fn stage_q1_is_everything() {
        // q = 1, tau = 2: eta = 1 >= 1/2, so the stage covers [0,1]
        let st = build_finite_stage(2.0, &Rat::ZERO, 1, 1).unwrap();
        assert!(st.covers_everything);
        assert_eq!(st.region.as_ref().unwrap().length(), Rat::ONE.to_big());
    }

    #[test]
    fn stage_inclusion_in_tau() {
        // smaller tau gives wider neighborhoods: stage(1.5) covers stage(2)
        let a = build_finite_stage(1.5, &Rat::ZERO, 2, 12).unwrap();
        let b = build_finite_stage(2.0, &Rat::ZERO, 2, 12).unwrap();
        let ra = a.region.unwrap();
        let rb = b.region.unwrap();
        assert!(ra.covers(&rb));
        // and shrinking the q-range shrinks the region
        let c = build_finite_stage(2.0, &Rat::ZERO, 2, 6).unwrap();
        assert!(rb.covers(&c.region.unwrap()));
    }

    #[test]
    fn stage_small_total_length() {
        // tau = 10, q0 = 2: sum 2 q^-10 ((q+1)/q) is tiny; union even smaller
        let st = build_finite_stage(10.0, &Rat::ZERO, 2, 8).unwrap();
        let len = st.region.unwrap().length();
        let lenf = crate::measure::big_to_f64(&len);
        let bound: f64 = (2u64..=8)
            .map(|q| 2.0 * (q as f64).powf(-10.0) * (q as f64 + 1.0) / q as f64)
            .sum();
        assert!(lenf <= bound * (1.0 + 1e-9), "{lenf} vs {bound}");
        assert!(lenf > 0.0);
    }

    #[test]
    fn box_counts_full_everything() {
        let sys = five_sys();
        let st = build_finite_stage(2.0, &Rat::ZERO, 1, 1).unwrap();
        let est = box_dim_estimate(&sys, &st, Some((2, 6))).unwrap();
        // stage = [0,1]: every K-cylinder counts; slope = delta in base-b logs
        for (i, n) in (2u32..=6).enumerate() {
            assert_eq!(est.counts[i], 4u64.pow(n));
        }
        assert!((est.slope - sys.hausdorff_dim()).abs() < 1e-9);
    }

    #[test]
    fn box_counts_single_interval() {
        // stage region ~ one interval of width b^-m: counts grow like delta
        // above depth m only through the K-portion; here just check counting
        // against the explicit region through the engine equivalence
        let sys = five_sys();
        let st = build_finite_stage(1.6, &Rat::ZERO, 3, 9).unwrap();
        let est = box_dim_estimate(&sys, &st, Some((1, 4))).unwrap();
        let region = st.region.as_ref().unwrap();
        for (i, n) in (1u32..=4).enumerate() {
            // brute force count
            let mut brute = 0u64;
            let den = pow_i128(5, n).unwrap();
            let mut stack = vec![(0i128, 0u32)];
            let mut words = Vec::new();
            while let Some((num, dep)) = stack.pop() {
                if dep == n {
                    words.push(num);
                    continue;
                }
                for &d in sys.digits(0) {
                    stack.push((num * 5 + d as i128, dep + 1));
                }
            }
            for w in words {
                let lo = Rat::new(w, den);
                let hi = Rat::new(w + 1, den);
                let hit = region.components().iter().any(|c| {
                    let l = c.lo.max(lo);
                    let h = c.hi.min(hi);
                    l < h && crate::approx::open_interval_meets_k(&sys, &l, &h)
                });
                if hit {
                    brute += 1;
                }
            }
            assert_eq!(est.counts[i], brute, "depth {n}");
        }
    }

    #[test]
    fn nu_audit_small() {
        let sys = five_sys();
        let word = CylinderWord::new_1d(&sys, &[0]).unwrap();
        let audit =
            nu_restricted_audit(&sys, &word, 64, 1.2, &Rat::ONE, 0.75, 0.3, 200, 5).unwrap();
        assert!(!audit.empty);
        // nu of the entire space is 1: mu_f equals its own normalizer
        assert!(audit.mu_f.value_f64() > 0.0);
        assert!(audit.norm_ratio > 0.0);
        for c in &audit.cases {
            assert!(c.sup.is_finite(), "{}: sup {}", c.name, c.sup);
        }
        // empty-F diagnostic: theta far outside workable range makes F empty
        let tiny = nu_restricted_audit(&sys, &word, 64, 1.2, &Rat::new(1, 1000000), 0.75, 0.3, 50, 5);
        // with an extremely small c the set F may be empty; either way the
        // call reports rather than fails
        assert!(tiny.is_ok());
    }

    #[test]
    fn product_audit_small() {
        let sys = DigitSystem::new_2d(5, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        let word = CylinderWord::new(&sys, vec![vec![0, 1], vec![2, 0]]).unwrap();
        let audit = product_construction_audit(&sys, &word, 256, 0.6, 64, 9).unwrap();
        assert!(audit.count > 0);
        assert_eq!(audit.count, audit.count.max(1));
        assert!(audit.disjoint_ok, "selected family must be disjoint");
        assert!(audit.covered_ok, "enlargements must cover the family");
        assert!(audit.count_ratio > 0.0);
        assert!(audit.ubiquity.ratio_lower >= 0.2);
        for h in &audit.holder {
            assert!(h.sup.is_finite());
        }
    }

    #[test]
    fn product_audit_tau_range() {
        let sys = DigitSystem::new_2d(5, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        let word = CylinderWord::root(2);
        assert!(matches!(
            product_construction_audit(&sys, &word, 256, 1.2, 16, 1),
            Err(AuditError::GridViolation(_))
        ));
    }
}
