//! Exact geometric checks: the simplex property of rationals in small convex
//! boxes, the absolutely-decaying behavior of the natural measure around
//! hyperplane neighborhoods, and the greedy covering selection for rectangle
//! families with a common exponent profile.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::One;

use crate::digits::DigitSystem;
use crate::fl;
use crate::measure::interval_units;
use crate::rat::{pow_i128, Rat};
use crate::region::{Interval, IntervalBox};
use crate::sample::{sample_one, SplitRng};

/// A rational point with common denominator, in lowest vector terms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RationalPoint {
    pub p: Vec<i128>,
    pub q: i128,
}

/// Enumerates the rational points with (reduced) denominator `<= q_max`
/// inside the closed box. Exact; dimensions 1 and 2.
pub fn rationals_in_box(q_max: u64, bx: &IntervalBox) -> Vec<RationalPoint> {
    let d = bx.dim();
    assert!(d == 1 || d == 2, "rationals_in_box supports d in {{1,2}}");
    let mut out = Vec::new();
    for q in 1..=q_max as i128 {
        let mut ranges = Vec::with_capacity(d);
        for j in 0..d {
            let lo = bx.lo[j].mul(&Rat::from_int(q)).ceil();
            let hi = bx.hi[j].mul(&Rat::from_int(q)).floor();
            ranges.push((lo, hi));
        }
        match d {
            1 => {
                for p in ranges[0].0..=ranges[0].1 {
                    if p.gcd(&q) == 1 {
                        out.push(RationalPoint { p: vec![p], q });
                    }
                }
            }
            _ => {
                for p1 in ranges[0].0..=ranges[0].1 {
                    for p2 in ranges[1].0..=ranges[1].1 {
                        if p1.gcd(&p2).gcd(&q) == 1 {
                            out.push(RationalPoint { p: vec![p1, p2], q });
                        }
                    }
                }
            }
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OversizedPolicy {
    /// refuse boxes violating the volume precondition
    Refuse,
    /// run anyway and report the (expected) violation as a demonstration
    Demonstrate,
}

#[derive(Clone, Debug)]
pub enum SimplexOutcome {
    /// box too large and policy is `Refuse`
    Oversized { volume: BigRational, cap: BigRational },
    Checked {
        admissible: bool,
        point_count: usize,
        coplanar: bool,
        /// a violating (d+1)-tuple when not coplanar
        witness: Option<Vec<RationalPoint>>,
    },
}

/// Volume cap `Q^-(1+d) / d!` for the simplex property.
pub fn simplex_volume_cap(d: u32, q_max: u64) -> BigRational {
    let mut fact = BigInt::one();
    for i in 2..=d {
        fact *= BigInt::from(i);
    }
    let qd = BigInt::from(q_max).pow(d + 1);
    BigRational::new(BigInt::one(), qd * fact)
}

/// Checks that all rationals with denominator `<= q_max` in the box lie on a
/// single hyperplane (a point for `d = 1`, a line for `d = 2`), by exact
/// homogeneous determinant tests.
pub fn simplex_check(q_max: u64, bx: &IntervalBox, policy: OversizedPolicy) -> SimplexOutcome {
    let d = bx.dim() as u32;
    let volume = bx.volume();
    let cap = simplex_volume_cap(d, q_max);
    let admissible = volume <= cap;
    if !admissible && policy == OversizedPolicy::Refuse {
        return SimplexOutcome::Oversized { volume, cap };
    }
    let pts = rationals_in_box(q_max, bx);
    let (coplanar, witness) = match d {
        1 => {
            // a hyperplane in one dimension is a point: all values equal
            let mut w = None;
            let mut cop = true;
            for pair in pts.windows(2) {
                // p0/q0 == p1/q1  <=>  p0 q1 == p1 q0
                if pair[0].p[0] * pair[1].q != pair[1].p[0] * pair[0].q {
                    cop = false;
                    w = Some(vec![pair[0].clone(), pair[1].clone()]);
                    break;
                }
            }
            (cop, w)
        }
        _ => {
            // collinearity via homogeneous 3x3 determinants
            let mut cop = true;
            let mut w = None;
            'outer: for i in 0..pts.len() {
                for j in (i + 1)..pts.len() {
                    if !same_point(&pts[i], &pts[j]) {
                        for k in (j + 1)..pts.len() {
                            if det3(&pts[i], &pts[j], &pts[k]) != 0 {
                                cop = false;
                                w = Some(vec![pts[i].clone(), pts[j].clone(), pts[k].clone()]);
                                break 'outer;
                            }
                        }
                        // all k collinear with the base pair (i, j); any other
                        // pair lies on the same line, so we are done
                        break 'outer;
                    }
                }
            }
            (cop, w)
        }
    };
    SimplexOutcome::Checked { admissible, point_count: pts.len(), coplanar, witness }
}

fn same_point(a: &RationalPoint, b: &RationalPoint) -> bool {
    a.p.iter().zip(&b.p).all(|(&pa, &pb)| pa * b.q == pb * a.q)
}

/// Homogeneous determinant of three planar rational points.
fn det3(a: &RationalPoint, b: &RationalPoint, c: &RationalPoint) -> i128 {
    let (a1, a2, aq) = (a.p[0], a.p[1], a.q);
    let (b1, b2, bq) = (b.p[0], b.p[1], b.q);
    let (c1, c2, cq) = (c.p[0], c.p[1], c.q);
    a1 * (b2 * cq - bq * c2) - a2 * (b1 * cq - bq * c1) + aq * (b1 * c2 - b2 * c1)
}

/// A uniformly random box with volume at most the simplex cap, for trials.
pub fn random_admissible_box(d: u32, q_max: u64, rng: &SplitRng, trial: u64) -> IntervalBox {
    // side = (cap)^(1/d) scaled down by a random factor in [1/2, 1)
    let cap = simplex_volume_cap(d, q_max);
    let capf = crate::measure::big_to_f64(&cap);
    let side = fl::powf(capf, 1.0 / d as f64);
    let mut lo = Vec::with_capacity(d as usize);
    let mut hi = Vec::with_capacity(d as usize);
    for j in 0..d as u64 {
        let shrink = 0.5 + 0.499 * rng.f64(2 * j + 1, trial);
        let s = Rat::from_f64_exact(side * shrink).unwrap();
        let x0 = Rat::from_f64_exact(rng.f64(2 * j, trial) * (1.0 - side)).unwrap();
        lo.push(x0);
        hi.push(x0.add(&s));
    }
    IntervalBox { lo, hi }
}

/// One absolutely-decaying trial cell.
#[derive(Clone, Debug)]
pub struct DecayCell {
    pub eps_over_r: f64,
    /// `mu(B cap L^(eps)) / mu(B) * (r/eps)^(delta+1-d)`
    pub ratio: f64,
}

#[derive(Clone, Debug)]
pub struct DecayReport {
    pub c_emp: f64,
    /// least-squares slope of `log ratio` against `log(eps/r)`; the decay
    /// property predicts no upward trend as `eps/r` shrinks (slope >= -eps)
    pub trend_slope: f64,
    pub cells: Vec<DecayCell>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DecayError {
    NeedsThickMeasure,
    BadDim,
}

impl core::fmt::Display for DecayError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            DecayError::NeedsThickMeasure => write!(f, "d = 2 decay checks need delta > 1"),
            DecayError::BadDim => write!(f, "decay checks support d in {{1,2}}"),
        }
    }
}

/// Samples the absolutely-decaying ratio over random balls, hyperplanes, and
/// neighborhood widths; returns the empirical constant and its trend.
///
/// For `d = 1` hyperplanes are points and every measure is exact. For `d = 2`
/// the lines are axis-parallel (exact product measures) or of small rational
/// slope (box descent with certified error folded into the ratio).
pub fn decay_check(sys: &DigitSystem, n_samples: u64, seed: u64) -> Result<DecayReport, DecayError> {
    match sys.dim() {
        1 => Ok(decay_check_1d(sys, n_samples, seed)),
        2 => {
            if sys.hausdorff_dim() <= 1.0 {
                return Err(DecayError::NeedsThickMeasure);
            }
            Ok(decay_check_2d(sys, n_samples, seed))
        }
        _ => Err(DecayError::BadDim),
    }
}

fn regress_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

fn decay_check_1d(sys: &DigitSystem, n_samples: u64, seed: u64) -> DecayReport {
    let rng = SplitRng::new(seed);
    let delta = sys.hausdorff_dim();
    let depth = 34u32;
    let mut cells = Vec::new();
    for i in 0..n_samples {
        let x = sample_one(sys, 16, seed, i).point[0];
        // r log-uniform in [b^-9, 1/4]
        let r_exp = 2.0 + rng.f64(1, i) * 12.0;
        let r = Rat::from_f64_exact(fl::powf(2.0, -r_exp)).unwrap();
        // point hyperplane inside the ball
        let off = Rat::from_f64_exact((rng.f64(2, i) * 2.0 - 1.0) * r.to_f64()).unwrap();
        let ell = x.add(&off);
        // eps with eps/r log-uniform in [2^-16, 1/4]
        let e_exp = 2.0 + rng.f64(3, i) * 14.0;
        let eps = Rat::from_f64_exact(r.to_f64() * fl::powf(2.0, -e_exp)).unwrap();
        if eps.is_zero() {
            continue;
        }
        let ball = Interval::new(x.sub(&r), x.add(&r));
        let strip = Interval::new(ell.sub(&eps), ell.add(&eps));
        let (bl, bh) = interval_units(sys, &ball, depth);
        let cap = match strip.intersect(&ball) {
            Some(iv) => iv,
            None => continue,
        };
        let (sl, sh) = interval_units(sys, &cap, depth);
        if bl == 0 {
            continue;
        }
        // conservative: largest strip mass over smallest ball mass
        let frac = sh.max(1) as f64 / bl as f64;
        let ratio = frac * fl::powf(r.to_f64() / eps.to_f64(), delta);
        let _ = sl;
        let _ = bh;
        cells.push(DecayCell { eps_over_r: eps.to_f64() / r.to_f64(), ratio });
    }
    finish_decay(cells)
}

fn finish_decay(cells: Vec<DecayCell>) -> DecayReport {
    let mut c_emp = 0.0f64;
    for c in &cells {
        if c.ratio > c_emp {
            c_emp = c.ratio;
        }
    }
    let xs: Vec<f64> = cells.iter().map(|c| fl::ln(c.eps_over_r)).collect();
    let ys: Vec<f64> = cells.iter().map(|c| fl::ln(c.ratio.max(1e-300))).collect();
    // upward trend as eps/r decreases means ratio grows as x decreases,
    // i.e. negative slope in this regression
    let trend_slope = regress_slope(&xs, &ys);
    DecayReport { c_emp, trend_slope, cells }
}

/// Measure of `ball cap strip` for a sloped line `y = m x + c` in the plane,
/// by box descent in scaled integer arithmetic; returns `(lower, upper)` in
/// units of `branching^-max_depth`.
///
/// All inputs must be exact multiples of `1/scale_den` (the caller snaps its
/// sampled parameters), and `m` must have denominator 1 or 2.
fn sloped_strip_units(
    sys: &DigitSystem,
    ball: &IntervalBox,
    m: &Rat,
    c: &Rat,
    eps_eff: &Rat,
    max_depth: u32,
    scale_den: i128,
) -> (u128, u128) {
    // common denominator: box corners live on the b-adic grid of depth
    // max_depth, everything else on 1/scale_den * (1/2 for the slope)
    let bpow = pow_i128(sys.base() as i128, max_depth).unwrap();
    let cd = bpow.checked_mul(scale_den).and_then(|x| x.checked_mul(2)).expect("scale overflow");
    let to_cd = |r: &Rat| -> i128 {
        debug_assert_eq!(cd % r.den(), 0);
        r.num() * (cd / r.den())
    };
    let ball_s = [to_cd(&ball.lo[0]), to_cd(&ball.hi[0]), to_cd(&ball.lo[1]), to_cd(&ball.hi[1])];
    let (mn, mden) = (m.num(), m.den()); // mden in {1, 2}
    let eps_m = to_cd(eps_eff).checked_mul(mden).expect("eps scale");
    let c_m = to_cd(c).checked_mul(mden).expect("c scale");

    struct St {
        lo: u128,
        hi: u128,
    }
    #[allow(clippy::too_many_arguments)]
    fn rec(
        sys: &DigitSystem,
        xs: i128,
        ys: i128,
        side: i128,
        ball: &[i128; 4],
        mn: i128,
        mden: i128,
        c_m: i128,
        eps_m: i128,
        depth: u32,
        max_depth: u32,
        units: u128,
        st: &mut St,
    ) {
        let (xh, yh) = (xs + side, ys + side);
        if xh <= ball[0] || xs >= ball[1] || yh <= ball[2] || ys >= ball[3] {
            return;
        }
        // residue e = y - m x - c scaled by cd * mden
        let e = |x: i128, y: i128| y * mden - mn * x - c_m;
        let corners = [e(xs, ys), e(xs, yh), e(xh, ys), e(xh, yh)];
        let emin = *corners.iter().min().unwrap();
        let emax = *corners.iter().max().unwrap();
        if emin > eps_m || emax < -eps_m {
            return; // outside the strip
        }
        let inside_ball = xs >= ball[0] && xh <= ball[1] && ys >= ball[2] && yh <= ball[3];
        let inside_strip = emin >= -eps_m && emax <= eps_m;
        if inside_ball && inside_strip {
            st.lo += units;
            st.hi += units;
            return;
        }
        if depth == max_depth {
            st.hi += units;
            return;
        }
        let sub_side = side / sys.base() as i128;
        let sub_units = units / sys.branching() as u128;
        for &dx in sys.digits(0) {
            for &dy in sys.digits(1) {
                rec(
                    sys,
                    xs + dx as i128 * sub_side,
                    ys + dy as i128 * sub_side,
                    sub_side,
                    ball,
                    mn,
                    mden,
                    c_m,
                    eps_m,
                    depth + 1,
                    max_depth,
                    sub_units,
                    st,
                );
            }
        }
    }
    let units = (sys.branching() as u128).pow(max_depth);
    let mut st = St { lo: 0, hi: 0 };
    rec(sys, 0, 0, cd, &ball_s, mn, mden, c_m, eps_m, 0, max_depth, units, &mut st);
    (st.lo, st.hi)
}

fn decay_check_2d(sys: &DigitSystem, n_samples: u64, seed: u64) -> DecayReport {
    let rng = SplitRng::new(seed);
    let delta = sys.hausdorff_dim();
    let expo = delta + 1.0 - 2.0;
    let fx = sys.factor(0);
    let fy = sys.factor(1);
    let depth_1d = 30u32;
    let mut cells = Vec::new();
    for i in 0..n_samples {
        let smp = sample_one(sys, 10, seed, i);
        // sample snapped the same way (dyadic grid), keeping denominators tiny
        let x = {
            let v = smp.point[0].to_f64();
            Rat::new((v * (1i128 << 20) as f64) as i128, 1 << 20)
        };
        let y = {
            let v = smp.point[1].to_f64();
            Rat::new((v * (1i128 << 20) as f64) as i128, 1 << 20)
        };
        // parameters snapped to multiples of 2^-20 so the sloped descent can
        // use one small common denominator; the configuration itself is what
        // gets measured, so snapping costs nothing
        const SNAP: i128 = 1 << 20;
        let snap = |x: f64| -> Rat {
            Rat::new((x * SNAP as f64) as i128, SNAP)
        };
        let r_exp = 1.5 + rng.f64(1, i) * 6.0;
        let r = snap(fl::powf(2.0, -r_exp));
        let e_exp = 1.0 + rng.f64(3, i) * 8.0;
        let eps = snap(r.to_f64() * fl::powf(2.0, -e_exp));
        if eps.is_zero() || r.is_zero() {
            continue;
        }
        let ball = IntervalBox {
            lo: vec![x.sub(&r), y.sub(&r)],
            hi: vec![x.add(&r), y.add(&r)],
        };
        let kind = rng.below(4, i, 3);
        let off = {
            let v = (rng.f64(5, i) * 2.0 - 1.0) * r.to_f64();
            Rat::new((v * (1i128 << 20) as f64) as i128, 1 << 20)
        };
        let (num_lo, num_hi, den_lo) = match kind {
            0 => {
                // vertical line x = x0
                let x0 = x.add(&off);
                let strip = Interval::new(x0.sub(&eps), x0.add(&eps));
                let bx = Interval::new(ball.lo[0], ball.hi[0]);
                let by = Interval::new(ball.lo[1], ball.hi[1]);
                let cap = match strip.intersect(&bx) {
                    Some(iv) => iv,
                    None => continue,
                };
                let (sl, sh) = interval_units(&fx, &cap, depth_1d);
                let (yl, yh) = interval_units(&fy, &by, depth_1d);
                let (bl, _bh) = interval_units(&fx, &bx, depth_1d);
                let _ = sl;
                (
                    0u128,
                    sh.saturating_mul(yh),
                    bl.saturating_mul(yl.max(1)),
                )
            }
            1 => {
                // horizontal line y = y0
                let y0 = y.add(&off);
                let strip = Interval::new(y0.sub(&eps), y0.add(&eps));
                let bx = Interval::new(ball.lo[0], ball.hi[0]);
                let by = Interval::new(ball.lo[1], ball.hi[1]);
                let cap = match strip.intersect(&by) {
                    Some(iv) => iv,
                    None => continue,
                };
                let (_sl, sh) = interval_units(&fy, &cap, depth_1d);
                let (xl, xh) = interval_units(&fx, &bx, depth_1d);
                let (bl, _bh) = interval_units(&fy, &by, depth_1d);
                let _ = xh;
                (0u128, sh.saturating_mul(xl.max(1)), bl.saturating_mul(xl.max(1)))
            }
            _ => {
                // rational slope in {-2,...,2} \ {0} over small denominators
                let slopes = [
                    Rat::new(1, 2),
                    Rat::new(-1, 2),
                    Rat::ONE,
                    Rat::from_int(-1),
                    Rat::new(2, 1),
                ];
                let m = slopes[rng.below(6, i, slopes.len() as u64) as usize];
                let cpt = y.add(&off).sub(&m.mul(&x));
                let eps_eff = eps.mul(&Rat::ONE.add(&m.abs()));
                let md = 9u32;
                let (sl, sh) = sloped_strip_units(sys, &ball, &m, &cpt, &eps_eff, md, 1 << 22);
                let _ = sl;
                // ball mass exactly via product
                let (bxl, _) = interval_units(&fx, &Interval::new(ball.lo[0], ball.hi[0]), depth_1d);
                let (byl, _) = interval_units(&fy, &Interval::new(ball.lo[1], ball.hi[1]), depth_1d);
                // rescale: strip units are branching^-md, ball units are per-factor
                let unit_fix = (sys.branching() as f64).powi(md as i32);
                let bunit =
                    (fx.branching() as f64).powi(depth_1d as i32) * (fy.branching() as f64).powi(depth_1d as i32);
                let frac = (sh.max(1) as f64 / unit_fix) / ((bxl.max(1) as f64 * byl.max(1) as f64) / bunit);
                let ratio = frac * fl::powf(r.to_f64() / eps.to_f64(), expo);
                cells.push(DecayCell { eps_over_r: eps.to_f64() / r.to_f64(), ratio });
                continue;
            }
        };
        let _ = num_lo;
        if den_lo == 0 {
            continue;
        }
        let frac = num_hi.max(1) as f64 / den_lo as f64;
        let ratio = frac * fl::powf(r.to_f64() / eps.to_f64(), expo);
        cells.push(DecayCell { eps_over_r: eps.to_f64() / r.to_f64(), ratio });
    }
    finish_decay(cells)
}

/// Rectangle with exact center and half-sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rect {
    pub center: Vec<Rat>,
    pub half: Vec<Rat>,
}

impl Rect {
    pub fn meets_open(&self, other: &Rect) -> bool {
        self.center.iter().zip(&other.center).zip(self.half.iter().zip(&other.half)).all(
            |((ca, cb), (ha, hb))| {
                let gap = ca.sub(cb).abs();
                gap < ha.add(hb)
            },
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CoverError {
    MixedExponents,
    EmptyFamily,
}

impl core::fmt::Display for CoverError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            CoverError::MixedExponents => {
                write!(f, "rectangle sides are not consistently ordered (mixed exponent vectors)")
            }
            CoverError::EmptyFamily => write!(f, "empty rectangle family"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoverOutcome {
    pub selected: Vec<usize>,
    /// for each input index, the selected index whose enlargement covers it
    pub witness: Vec<usize>,
    /// enlargement exponent `max u / min u` (factor is `5^exponent`)
    pub factor_exponent: Rat,
    pub factor: f64,
    pub covered: bool,
}

/// Greedy disjoint subfamily selection with the `5^(max u / min u)`
/// enlargement coverage guarantee.
///
/// Rectangles must share the exponent profile `u` (side lengths `r_i^(u_j)`
/// for a per-rectangle scale `r_i`), which concretely means their half-side
/// orderings agree across coordinates. Selection order: descending scale,
/// ties by lexicographic center. Coverage is verified exactly per rectangle
/// against the witness' enlargement (`5^(p/q) h >= gap + h_i` compared via
/// integer powers).
pub fn five_r_cover(rects: &[Rect], u: &[Rat]) -> Result<CoverOutcome, CoverError> {
    if rects.is_empty() {
        return Err(CoverError::EmptyFamily);
    }
    let dim = rects[0].center.len();
    assert!(u.len() == dim);
    let mut order: Vec<usize> = (0..rects.len()).collect();
    order.sort_by(|&a, &b| {
        rects[b].half[0]
            .cmp(&rects[a].half[0])
            .then_with(|| rects[a].center.cmp(&rects[b].center))
    });
    // shared exponent profile: half-side order must agree in every coordinate
    for w in order.windows(2) {
        let (a, b) = (&rects[w[0]], &rects[w[1]]);
        for j in 1..dim {
            let c0 = a.half[0].cmp(&b.half[0]);
            let cj = a.half[j].cmp(&b.half[j]);
            if c0 != cj && c0 != core::cmp::Ordering::Equal && cj != core::cmp::Ordering::Equal {
                return Err(CoverError::MixedExponents);
            }
        }
    }

    let umax = u.iter().copied().fold(u[0], Rat::max);
    let umin = u.iter().copied().fold(u[0], Rat::min);
    let factor_exponent = umax.div(&umin);
    let factor = fl::powf(5.0, factor_exponent.to_f64());

    let mut selected: Vec<usize> = Vec::new();
    let mut witness = vec![usize::MAX; rects.len()];
    for &i in &order {
        let mut blocked = None;
        for &s in &selected {
            if rects[i].meets_open(&rects[s]) {
                blocked = Some(s);
                break;
            }
        }
        match blocked {
            None => {
                selected.push(i);
                witness[i] = i;
            }
            Some(s) => witness[i] = s,
        }
    }

    // exact coverage: gap + h_i <= 5^(p/q) * h_s per coordinate
    let (p_exp, q_exp) = (factor_exponent.num(), factor_exponent.den());
    let five_p = BigInt::from(5).pow(p_exp as u32);
    let covered = rects.iter().enumerate().all(|(i, r)| {
        let s = &rects[witness[i]];
        (0..dim).all(|j| {
            let need = r.center[j].sub(&s.center[j]).abs().add(&r.half[j]);
            // need <= 5^(p/q) h  <=>  need^q <= 5^p h^q  (all positive)
            let lhs = need.to_big().pow(q_exp as i32);
            let rhs = s.half[j].to_big().pow(q_exp as i32) * BigRational::from_integer(five_p.clone());
            lhs <= rhs
        })
    });

    Ok(CoverOutcome { selected, witness, factor_exponent, factor, covered })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_simplex() {
        // interval of length < Q^-2 around 3/10 holds exactly one rational
        let bx = IntervalBox {
            lo: vec![Rat::new(3, 10)],
            hi: vec![Rat::new(309, 1000)],
        };
        match simplex_check(10, &bx, OversizedPolicy::Refuse) {
            SimplexOutcome::Checked { admissible, point_count, coplanar, .. } => {
                assert!(admissible);
                assert_eq!(point_count, 1);
                assert!(coplanar);
            }
            _ => panic!("unexpected refusal"),
        }
    }

    #[test]
    fn two_dimensional_demonstration_mode() {
        // the unit square certainly contains non-collinear rationals
        let bx = IntervalBox::unit(2);
        match simplex_check(3, &bx, OversizedPolicy::Demonstrate) {
            SimplexOutcome::Checked { admissible, coplanar, witness, .. } => {
                assert!(!admissible);
                assert!(!coplanar);
                assert!(witness.is_some());
            }
            _ => panic!("demonstration mode must run"),
        }
        assert!(matches!(
            simplex_check(3, &bx, OversizedPolicy::Refuse),
            SimplexOutcome::Oversized { .. }
        ));
    }

    #[test]
    fn admissible_boxes_are_coplanar() {
        let rng = SplitRng::new(9);
        for d in [1u32, 2] {
            for trial in 0..200 {
                let bx = random_admissible_box(d, 12, &rng, trial);
                match simplex_check(12, &bx, OversizedPolicy::Refuse) {
                    SimplexOutcome::Checked { admissible, coplanar, .. } => {
                        assert!(admissible && coplanar, "d={d} trial={trial}");
                    }
                    SimplexOutcome::Oversized { .. } => panic!("box generator overshot"),
                }
            }
        }
    }

    #[test]
    fn decay_1d_bounded() {
        let sys = DigitSystem::new_1d(3, &[0, 2]).unwrap();
        let rep = decay_check(&sys, 400, 17).unwrap();
        assert!(rep.c_emp.is_finite() && rep.c_emp > 0.0);
        assert!(rep.trend_slope > -0.05, "slope {}", rep.trend_slope);
        // Lebesgue reference: ratio bounded by a small constant
        let full = DigitSystem::full(3, 1);
        let rep = decay_check(&full, 300, 23).unwrap();
        assert!(rep.c_emp <= 2.0 + 1e-9, "lebesgue c_emp {}", rep.c_emp);
    }

    #[test]
    fn decay_2d_needs_thickness() {
        let thin = DigitSystem::new_2d(5, &[0, 2], &[0, 3]).unwrap();
        assert!(matches!(decay_check(&thin, 10, 1), Err(DecayError::NeedsThickMeasure)));
        let thick = DigitSystem::new_2d(5, &[0, 1, 2, 3], &[0, 1, 2, 3, 4]).unwrap();
        let rep = decay_check(&thick, 60, 3).unwrap();
        assert!(rep.c_emp.is_finite());
    }

    fn rect(cx: (i128, i128), cy: (i128, i128), hx: (i128, i128), hy: (i128, i128)) -> Rect {
        Rect {
            center: vec![Rat::new(cx.0, cx.1), Rat::new(cy.0, cy.1)],
            half: vec![Rat::new(hx.0, hx.1), Rat::new(hy.0, hy.1)],
        }
    }

    #[test]
    fn cover_single_and_disjoint() {
        let u = [Rat::ONE, Rat::ONE];
        let one = vec![rect((1, 2), (1, 2), (1, 10), (1, 10))];
        let out = five_r_cover(&one, &u).unwrap();
        assert_eq!(out.selected, vec![0]);
        assert!(out.covered);

        let disjoint = vec![
            rect((1, 4), (1, 4), (1, 10), (1, 10)),
            rect((3, 4), (3, 4), (1, 10), (1, 10)),
        ];
        let out = five_r_cover(&disjoint, &u).unwrap();
        assert_eq!(out.selected.len(), 2);
        assert!(out.covered);
    }

    #[test]
    fn cover_nested_family() {
        let u = [Rat::ONE, Rat::ONE];
        let nested: Vec<Rect> = (1..=4)
            .map(|k| rect((1, 2), (1, 2), (1, 2 * k), (1, 2 * k)))
            .collect();
        let out = five_r_cover(&nested, &u).unwrap();
        assert_eq!(out.selected, vec![0]); // largest only
        assert!(out.covered);
    }

    #[test]
    fn cover_factor_formula() {
        // the anisotropic profile (tau (d-1), 1+tau) reproduces 5^((1+tau)/((d-1)tau))
        let tau = Rat::new(3, 5);
        let u = [tau, Rat::ONE.add(&tau)];
        let fam = vec![
            rect((1, 8), (1, 8), (1, 100), (1, 1000)),
            rect((5, 8), (5, 8), (1, 100), (1, 1000)),
        ];
        let out = five_r_cover(&fam, &u).unwrap();
        assert_eq!(out.factor_exponent, Rat::new(8, 3)); // (1+3/5)/(3/5)
        assert!((out.factor - fl::powf(5.0, 8.0 / 3.0)).abs() < 1e-12);
    }

    #[test]
    fn cover_mixed_exponents_rejected() {
        let u = [Rat::ONE, Rat::ONE];
        // second rect is wider in x but thinner in y: inconsistent profile
        let fam = vec![
            rect((1, 4), (1, 4), (1, 10), (1, 20)),
            rect((3, 4), (3, 4), (1, 5), (1, 40)),
        ];
        assert!(matches!(five_r_cover(&fam, &u), Err(CoverError::MixedExponents)));
    }

    #[test]
    fn cover_overlapping_cluster() {
        let u = [Rat::ONE, Rat::ONE];
        // a big rect with small overlapping satellites: enlarged big covers all
        let mut fam = vec![rect((1, 2), (1, 2), (1, 8), (1, 8))];
        for k in 0..6i128 {
            fam.push(rect((1 * 8 + k, 16), (7, 16), (1, 32), (1, 32)));
        }
        let out = five_r_cover(&fam, &u).unwrap();
        assert!(out.covered);
        // selected rects pairwise disjoint (open overlap test)
        for (ai, &a) in out.selected.iter().enumerate() {
            for &b in &out.selected[ai + 1..] {
                assert!(!fam[a].meets_open(&fam[b]));
            }
        }
    }
}
