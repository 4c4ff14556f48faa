//! Streaming exact-union engine.
//!
//! Audits need `mu(B cap A_Q(eta, theta))` for `Q` up to `2^14`, where `A_Q`
//! has hundreds of millions of intervals; materializing the union would need
//! gigabytes. This module streams instead: work splits into tasks (sub-boxes
//! of the root cylinder), each task generates the intervals overlapping its
//! window in sorted order, and a lazy component cursor feeds either
//!
//! * a cylinder-tree descent computing the measure of the union against the
//!   natural measure of `K` (certified error units at `max_depth`),
//! * a descent counting cylinders whose `K`-part meets the union, or
//! * a sweep accumulating exact Lebesgue length via per-family integer
//!   accumulators (no depth cutoff at all).
//!
//! Endpoints are raw `i128` fractions over per-family denominators
//! `q * den(theta) * den(eta)`; comparisons use a monotone `f64` fast path
//! with 256-bit cross products for near ties. Tasks are pure functions of
//! their inputs, so callers may run them in any order or in parallel and
//! stitch deterministically.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use num_rational::BigRational;

use crate::digits::DigitSystem;
use crate::rat::{cmp_cross, pow_i128, Rat};
use crate::region::tree_sum;

/// One arithmetic family: intervals `(p + theta)/q +- eta/q` over all `p`.
#[derive(Clone, Copy, Debug)]
pub struct Family {
    pub q: u64,
    pub eta: Rat,
    pub theta: Rat,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum EngineError {
    ComponentOverflow,
    DepthTooLarge,
    EtaNotPositive,
    /// `eta >= 1/2` makes the family cover the torus; callers that allow this
    /// must special-case it before building the engine input.
    EtaCoversEverything,
}

impl core::fmt::Display for EngineError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            EngineError::ComponentOverflow => write!(f, "family endpoints exceed i128 range"),
            EngineError::DepthTooLarge => write!(f, "descent depth exceeds exact unit range"),
            EngineError::EtaNotPositive => write!(f, "eta must be positive"),
            EngineError::EtaCoversEverything => write!(f, "eta >= 1/2 covers the whole torus"),
        }
    }
}

/// Family with precomputed integer coefficients for endpoint generation.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub q: u64,
    /// common denominator `q * den(theta) * den(eta)`
    pub den: i128,
    /// center numerator over `den` is `p * p_coef + t_off`
    p_coef: i128,
    t_off: i128,
    /// half-width numerator over `den`
    h_num: i128,
    inv_den: f64,
    /// f64 key coefficients: key_lo(p) = p * pc_inv + lo_base (few-ulp accurate)
    pc_inv: f64,
    lo_base: f64,
    hi_base: f64,
}

/// Endpoint components stay below this, keeping 256-bit compares exact and
/// the window arithmetic overflow-free.
const COMPONENT_GUARD: i128 = 1 << 100;

pub fn prepare(fams: &[Family]) -> Result<Vec<Prepared>, EngineError> {
    let mut out = Vec::with_capacity(fams.len());
    for f in fams {
        if f.eta.is_zero() || f.eta.is_negative() {
            return Err(EngineError::EtaNotPositive);
        }
        if f.eta >= Rat::new(1, 2) {
            return Err(EngineError::EtaCoversEverything);
        }
        let (en, ed) = (f.eta.num(), f.eta.den());
        let (tn, td) = (f.theta.num(), f.theta.den());
        let den = (f.q as i128)
            .checked_mul(td)
            .and_then(|x| x.checked_mul(ed))
            .ok_or(EngineError::ComponentOverflow)?;
        if den > COMPONENT_GUARD / (2 * f.q.max(2) as i128) {
            return Err(EngineError::ComponentOverflow);
        }
        let p_coef = td.checked_mul(ed).ok_or(EngineError::ComponentOverflow)?;
        let t_off = tn.checked_mul(ed).ok_or(EngineError::ComponentOverflow)?;
        let h_num = en.checked_mul(td).ok_or(EngineError::ComponentOverflow)?;
        let inv_den = 1.0 / den as f64;
        out.push(Prepared {
            q: f.q,
            den,
            p_coef,
            t_off,
            h_num,
            inv_den,
            pc_inv: p_coef as f64 * inv_den,
            lo_base: (t_off - h_num) as f64 * inv_den,
            hi_base: (t_off + h_num) as f64 * inv_den,
        });
    }
    Ok(out)
}

/// Sweep interval, packed to 32 bytes for sort/scatter traffic: the exact
/// endpoints are reconstructed from `(fam, p)` on demand.
#[derive(Clone, Copy, Debug)]
pub struct SweepIv {
    lo_key: f64,
    hi_key: f64,
    pub p: i64,
    pub fam: u32,
}

/// Endpoint as a raw positive-denominator fraction (not reduced), carrying a
/// cached `f64` key within a few ulp of the true value. Comparisons go
/// through the keys and fall back to 256-bit cross products near ties.
#[derive(Clone, Copy, Debug)]
pub struct Ep {
    pub n: i128,
    pub d: i128,
    pub key: f64,
}

/// Relative band inside which `f64` keys are not trusted.
const KEY_TOL: f64 = 1e-12;

impl Ep {
    #[inline]
    pub fn new(n: i128, d: i128) -> Ep {
        Ep { n, d, key: n as f64 / d as f64 }
    }

    #[inline]
    pub fn with_key(n: i128, d: i128, key: f64) -> Ep {
        Ep { n, d, key }
    }

    pub fn from_rat(r: &Rat) -> Ep {
        Ep::new(r.num(), r.den())
    }

    pub fn to_rat(&self) -> Rat {
        Rat::new(self.n, self.d)
    }

    #[inline]
    pub fn cmp_ep(&self, other: &Ep) -> Ordering {
        let diff = self.key - other.key;
        let tol = KEY_TOL * (crate::fl::abs(self.key) + crate::fl::abs(other.key)) + 1e-300;
        if diff > tol {
            return Ordering::Greater;
        }
        if diff < -tol {
            return Ordering::Less;
        }
        if self.d == other.d {
            return self.n.cmp(&other.n);
        }
        cmp_cross(self.n, self.d, other.n, other.d)
    }
}

#[inline]
fn cmp_lo(fams: &[Prepared], a: &SweepIv, b: &SweepIv) -> Ordering {
    // f64 keys are within a few ulp of the truth; outside the band they decide
    let diff = a.lo_key - b.lo_key;
    let tol = KEY_TOL * (crate::fl::abs(a.lo_key) + crate::fl::abs(b.lo_key)) + 1e-300;
    if diff > tol {
        return Ordering::Greater;
    }
    if diff < -tol {
        return Ordering::Less;
    }
    let ea = a.lo_ep(fams);
    let eb = b.lo_ep(fams);
    if ea.d == eb.d {
        ea.n.cmp(&eb.n)
    } else {
        cmp_cross(ea.n, ea.d, eb.n, eb.d)
    }
}

impl SweepIv {
    #[inline]
    fn lo_ep(&self, fams: &[Prepared]) -> Ep {
        let f = &fams[self.fam as usize];
        let c = self.p as i128 * f.p_coef + f.t_off;
        Ep::with_key(c - f.h_num, f.den, self.lo_key)
    }

    #[inline]
    fn hi_ep(&self, fams: &[Prepared]) -> Ep {
        let f = &fams[self.fam as usize];
        let c = self.p as i128 * f.p_coef + f.t_off;
        Ep::with_key(c + f.h_num, f.den, self.hi_key)
    }
}

#[inline]
fn div_floor_i128(a: i128, b: i128) -> i128 {
    a.div_euclid(b)
}

#[inline]
fn div_ceil_i128(a: i128, b: i128) -> i128 {
    -(-a).div_euclid(b)
}

/// Reusable buffers for window generation and sorting.
#[derive(Default)]
pub struct SweepScratch {
    pub out: Vec<SweepIv>,
    tmp: Vec<SweepIv>,
    starts: Vec<u32>,
}

/// Generates all intervals of `fams` overlapping the closed window into
/// `scratch.out`, sorted by left endpoint. Window endpoints must have small
/// denominators (task boxes).
pub fn sorted_window_into(fams: &[Prepared], win_lo: &Rat, win_hi: &Rat, scratch: &mut SweepScratch) {
    scratch.out.clear();
    let mut max_h = 0.0f64;
    for (fi, f) in fams.iter().enumerate() {
        // overlap: center + h >= win_lo  and  center - h <= win_hi
        let lo_scaled = div_floor_i128(
            win_lo.num().checked_mul(f.den).expect("window scale overflow"),
            win_lo.den(),
        );
        let hi_scaled = -div_floor_i128(
            (-win_hi.num().checked_mul(f.den).expect("window scale overflow")).max(i128::MIN + 1),
            win_hi.den(),
        );
        let p_lo = div_ceil_i128(lo_scaled - f.t_off - f.h_num, f.p_coef);
        let p_hi = div_floor_i128(hi_scaled - f.t_off + f.h_num, f.p_coef);
        if p_hi < p_lo {
            continue;
        }
        let h = f.hi_base - f.lo_base;
        if h > max_h {
            max_h = h;
        }
        scratch.out.reserve((p_hi - p_lo) as usize + 1);
        for p in p_lo..=p_hi {
            let pf = p as f64;
            scratch.out.push(SweepIv {
                lo_key: pf * f.pc_inv + f.lo_base,
                hi_key: pf * f.pc_inv + f.hi_base,
                p: p as i64,
                fam: fi as u32,
            });
        }
    }
    bucket_sort_by_lo(fams, scratch, win_lo.to_f64() - max_h - 1e-12, win_hi.to_f64());
}

/// One-shot variant of [`sorted_window_into`].
pub fn sorted_window(fams: &[Prepared], win_lo: &Rat, win_hi: &Rat) -> Vec<SweepIv> {
    let mut scratch = SweepScratch::default();
    sorted_window_into(fams, win_lo, win_hi, &mut scratch);
    scratch.out
}

/// Linear-time counting sort on the `lo` keys with exact in-bucket ordering.
///
/// If the key-guided order disagrees anywhere with the exact comparator
/// (keys within tolerance straddling a bucket boundary), fall back to a full
/// exact sort; with our key accuracy this is essentially never taken, but it
/// keeps the result provably identical to `sort_unstable_by(cmp_lo)`.
fn bucket_sort_by_lo(fams: &[Prepared], scratch: &mut SweepScratch, lo_bound: f64, win_hi: f64) {
    let n = scratch.out.len();
    if n < 128 {
        scratch.out.sort_unstable_by(|a, b| cmp_lo(fams, a, b));
        return;
    }
    let span = (win_hi - lo_bound).max(1e-300);
    let nb = n.next_power_of_two().min(1 << 24);
    let scale = nb as f64 / span * (1.0 - 1e-12);
    let bidx = |k: f64| -> usize {
        let i = ((k - lo_bound) * scale) as i64;
        i.clamp(0, nb as i64 - 1) as usize
    };
    scratch.starts.clear();
    scratch.starts.resize(nb + 2, 0);
    let starts = &mut scratch.starts;
    for iv in scratch.out.iter() {
        starts[bidx(iv.lo_key) + 2] += 1;
    }
    for i in 0..nb {
        starts[i + 2] += starts[i + 1];
    }
    // starts[b+1] is now the running cursor; starts[b] (post-scatter) holds
    // the bucket start
    scratch.tmp.clear();
    scratch.tmp.reserve(n);
    #[allow(clippy::uninit_vec)]
    unsafe {
        scratch.tmp.set_len(n);
    }
    for iv in scratch.out.iter() {
        let b = bidx(iv.lo_key);
        scratch.tmp[starts[b + 1] as usize] = *iv;
        starts[b + 1] += 1;
    }
    // exact order inside each bucket: bucket b spans starts[b]..starts[b+1]
    for b in 0..nb {
        let (s, e) = (starts[b] as usize, starts[b + 1] as usize);
        if e - s > 1 {
            scratch.tmp[s..e].sort_unstable_by(|a, b| cmp_lo(fams, a, b));
        }
    }
    // verify across bucket boundaries; any inversion -> exact fallback
    let mut ok = true;
    for w in scratch.tmp.windows(2) {
        if cmp_lo(fams, &w[0], &w[1]) == Ordering::Greater {
            ok = false;
            break;
        }
    }
    if !ok {
        scratch.out.sort_unstable_by(|a, b| cmp_lo(fams, a, b));
        return;
    }
    core::mem::swap(&mut scratch.out, &mut scratch.tmp);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Outside,
    Inside,
    Partial,
}

/// Lazy component assembler over sorted intervals.
///
/// Pieces are merged on demand; splitting a logical component into
/// overlapping pieces never changes the union, so laziness is sound. Queries
/// must come with nondecreasing left endpoints (the descent is in-order).
/// Pieces whose right end is `<= a` are dropped when classifying `[a, b]`:
/// their overlap is at most a point, which is measure-null and by convention
/// does not count as meeting.
pub struct Cursor<'a> {
    fams: &'a [Prepared],
    ivs: &'a [SweepIv],
    next: usize,
    cur: Option<(Ep, Ep)>,
}

impl<'a> Cursor<'a> {
    pub fn new(fams: &'a [Prepared], ivs: &'a [SweepIv]) -> Cursor<'a> {
        Cursor { fams, ivs, next: 0, cur: None }
    }

    #[inline]
    fn load_next(&mut self) -> bool {
        if self.next >= self.ivs.len() {
            return false;
        }
        let iv = &self.ivs[self.next];
        self.next += 1;
        self.cur = Some((iv.lo_ep(self.fams), iv.hi_ep(self.fams)));
        true
    }

    /// Drops pieces entirely at or left of `a`.
    fn advance_past(&mut self, a: &Ep) {
        loop {
            match &self.cur {
                Some((_, hi)) => {
                    if hi.cmp_ep(a) == Ordering::Greater {
                        return;
                    }
                    self.cur = None;
                }
                None => {
                    if !self.load_next() {
                        return;
                    }
                }
            }
        }
    }

    /// Classifies the closed box `[a, b]` against the union.
    pub fn classify(&mut self, a: &Ep, b: &Ep) -> Class {
        self.advance_past(a);
        let (lo, hi) = match &mut self.cur {
            None => return Class::Outside,
            Some(c) => (c.0, &mut c.1),
        };
        if lo.cmp_ep(a) != Ordering::Greater {
            // piece starts at or before a: extend until it clears b or gaps
            while hi.cmp_ep(b) == Ordering::Less {
                if self.next >= self.ivs.len() {
                    return Class::Partial;
                }
                let nxt = &self.ivs[self.next];
                let nlo = nxt.lo_ep(self.fams);
                if nlo.cmp_ep(hi) == Ordering::Greater {
                    return Class::Partial;
                }
                let nhi = nxt.hi_ep(self.fams);
                if nhi.cmp_ep(hi) == Ordering::Greater {
                    *hi = nhi;
                }
                self.next += 1;
            }
            Class::Inside
        } else if lo.cmp_ep(b) != Ordering::Less {
            Class::Outside
        } else {
            Class::Partial
        }
    }
}

// ---------------------------------------------------------------------------
// measure of `union cap root-cylinder` against the natural measure (d = 1)
// ---------------------------------------------------------------------------

/// One cylinder subtree of the root word.
#[derive(Clone, Debug)]
pub struct Task {
    /// digit-word index among depth peers within the root
    pub index: u64,
    /// absolute depth of the task cylinder
    pub depth: u32,
    /// left endpoint numerator over `base^depth`
    pub left_num: i128,
}

/// Job description shared by measure and counting runs (one-dimensional).
#[derive(Clone)]
pub struct Job {
    pub sys: DigitSystem,
    pub fams: Vec<Prepared>,
    /// root cylinder: absolute depth and left endpoint numerator over `base^depth`
    pub root_depth: u32,
    pub root_left_num: i128,
    pub max_depth: u32,
    /// deepest absolute depth with per-cylinder tables (set below `root_depth`
    /// to disable tables)
    pub table_depth: u32,
}

impl Job {
    /// Splits the root into all subtrees `levels` below it.
    pub fn tasks(&self, levels: u32) -> Vec<Task> {
        let lv = levels.min(self.max_depth.saturating_sub(self.root_depth));
        let digits = self.sys.digits(0);
        let nd = digits.len() as u64;
        let count = nd.pow(lv);
        let b = self.sys.base() as i128;
        let mut tasks = Vec::with_capacity(count as usize);
        for index in 0..count {
            let mut num = self.root_left_num;
            for lev in (0..lv).rev() {
                let di = (index / nd.pow(lev)) % nd;
                num = num * b + digits[di as usize] as i128;
            }
            tasks.push(Task { index, depth: self.root_depth + lv, left_num: num });
        }
        tasks
    }
}

/// Per-task measure output in units of `(#D)^-max_depth`.
#[derive(Clone, Debug, Default)]
pub struct MeasureOut {
    pub units: u128,
    pub straddlers: u64,
    /// tables[k]: per-cylinder units at depth `task.depth + k`
    pub tables: Vec<Vec<u128>>,
    /// straddler counts mirroring `tables`
    pub stables: Vec<Vec<u32>>,
    /// per-depth maxima of subtree lower units, indexed `depth - task.depth`
    pub max_lo: Vec<u128>,
    /// per-depth maxima of subtree upper units (lower + straddlers)
    pub max_hi: Vec<u128>,
    /// shallowest depth of a fully-covered cylinder (`u32::MAX` if none)
    pub min_inside_depth: u32,
}

struct MeasureCtx<'a> {
    job: &'a Job,
    task: &'a Task,
    table_levels: u32,
    out: MeasureOut,
    /// cached `b^depth` and `1/b^depth` keyed by absolute depth
    pows: alloc::vec::Vec<i128>,
    inv_pows: alloc::vec::Vec<f64>,
}

fn pow_tables(base: u32, max_depth: u32) -> (alloc::vec::Vec<i128>, alloc::vec::Vec<f64>) {
    let mut pows = alloc::vec::Vec::with_capacity(max_depth as usize + 2);
    let mut inv = alloc::vec::Vec::with_capacity(max_depth as usize + 2);
    let mut p: i128 = 1;
    for _ in 0..=max_depth + 1 {
        pows.push(p);
        inv.push(1.0 / p as f64);
        p = p.saturating_mul(base as i128);
    }
    (pows, inv)
}

impl<'a> MeasureCtx<'a> {
    /// Table index of the ancestor (or self) of node `(num, depth)` at table
    /// level `k` (absolute depth `task.depth + k`), relative to the task.
    fn rel_index(&self, num: i128, depth: u32, k: u32) -> usize {
        let b = self.job.sys.base() as i128;
        let digits = self.job.sys.digits(0);
        let anc = num / pow_i128(b, depth - (self.task.depth + k)).unwrap();
        // digit path of anc below the task root
        let mut rev = [0usize; 64];
        let mut n = anc;
        let levels = (self.task.depth + k) - self.task.depth;
        for slot in rev.iter_mut().take(levels as usize) {
            let dg = (n % b) as u8;
            n /= b;
            *slot = digits.iter().position(|&d| d == dg).expect("digit in set");
        }
        let mut idx = 0usize;
        for i in (0..levels as usize).rev() {
            idx = idx * digits.len() + rev[i];
        }
        idx
    }

    /// Credits `units` earned by the whole subtree at `(num, depth)`.
    fn add_units(&mut self, num: i128, depth: u32, units: u128) {
        self.out.units += units;
        let nd = self.job.sys.digits(0).len() as u128;
        for k in 0..self.table_levels {
            let lvl_depth = self.task.depth + k;
            if lvl_depth <= depth {
                let idx = self.rel_index(num, depth, k);
                self.out.tables[k as usize][idx] += units;
            } else {
                // subtree spans nd^(lvl_depth - depth) entries evenly
                let span = nd.pow(lvl_depth - depth) as usize;
                let per = units / span as u128;
                let first = self.block_start(num, depth, k);
                for e in &mut self.out.tables[k as usize][first..first + span] {
                    *e += per;
                }
            }
        }
    }

    /// First table index at level `k` covered by the subtree at `(num, depth)`
    /// (valid when `task.depth + k > depth`).
    fn block_start(&self, num: i128, depth: u32, k: u32) -> usize {
        let nd = self.job.sys.digits(0).len();
        // index of the node among depth peers, times the block size below it
        let node_idx = {
            let b = self.job.sys.base() as i128;
            let digits = self.job.sys.digits(0);
            let mut rev = [0usize; 64];
            let mut n = num;
            let levels = depth - self.task.depth;
            for slot in rev.iter_mut().take(levels as usize) {
                let dg = (n % b) as u8;
                n /= b;
                *slot = digits.iter().position(|&d| d == dg).expect("digit in set");
            }
            let mut idx = 0usize;
            for i in (0..levels as usize).rev() {
                idx = idx * nd + rev[i];
            }
            idx
        };
        node_idx * nd.pow((self.task.depth + k) - depth) as usize
    }

    fn add_straddler(&mut self, num: i128, depth: u32) {
        self.out.straddlers += 1;
        for k in 0..self.table_levels {
            let idx = self.rel_index(num, depth, k);
            self.out.stables[k as usize][idx] += 1;
        }
    }

    fn descend(&mut self, cursor: &mut Cursor, num: i128, depth: u32) -> (u128, u64) {
        let b = self.job.sys.base() as i128;
        let den = self.pows[depth as usize];
        let inv = self.inv_pows[depth as usize];
        let a = Ep::with_key(num, den, num as f64 * inv);
        let bb = Ep::with_key(num + 1, den, (num + 1) as f64 * inv);
        match cursor.classify(&a, &bb) {
            Class::Outside => (0, 0),
            Class::Inside => {
                let nd = self.job.sys.digits(0).len() as u128;
                let units = nd.pow(self.job.max_depth - depth);
                self.add_units(num, depth, units);
                if depth < self.out.min_inside_depth {
                    self.out.min_inside_depth = depth;
                }
                (units, 0)
            }
            Class::Partial => {
                if depth == self.job.max_depth {
                    self.add_straddler(num, depth);
                    let di = (depth - self.task.depth) as usize;
                    if self.out.max_hi[di] < 1 {
                        self.out.max_hi[di] = 1;
                    }
                    return (0, 1);
                }
                let digits = self.job.sys.digits(0);
                let mut units = 0u128;
                let mut strad = 0u64;
                for i in 0..digits.len() {
                    let (u, st) = self.descend(cursor, num * b + digits[i] as i128, depth + 1);
                    units += u;
                    strad += st;
                }
                let di = (depth - self.task.depth) as usize;
                if units > self.out.max_lo[di] {
                    self.out.max_lo[di] = units;
                }
                let hi = units + strad as u128;
                if hi > self.out.max_hi[di] {
                    self.out.max_hi[di] = hi;
                }
                (units, strad)
            }
        }
    }
}

/// Measure of `union cap task-box` via synchronized descent.
pub fn measure_task(job: &Job, task: &Task) -> MeasureOut {
    measure_task_scratch(job, task, &mut SweepScratch::default())
}

/// As [`measure_task`] with reusable buffers.
pub fn measure_task_scratch(job: &Job, task: &Task, scratch: &mut SweepScratch) -> MeasureOut {
    let b = job.sys.base() as i128;
    let side_den = pow_i128(b, task.depth).expect("task depth in range");
    let lo = Rat::new(task.left_num, side_den);
    let hi = Rat::new(task.left_num + 1, side_den);
    sorted_window_into(&job.fams, &lo, &hi, scratch);
    let ivs = &scratch.out;
    let mut cursor = Cursor::new(&job.fams, ivs);

    let table_levels = (job.table_depth + 1).saturating_sub(task.depth);
    let nd = job.sys.digits(0).len();
    let depth_span = (job.max_depth - task.depth + 1) as usize;
    let out = MeasureOut {
        units: 0,
        straddlers: 0,
        tables: (0..table_levels).map(|k| vec![0u128; nd.pow(k)]).collect(),
        stables: (0..table_levels).map(|k| vec![0u32; nd.pow(k)]).collect(),
        max_lo: vec![0u128; depth_span],
        max_hi: vec![0u128; depth_span],
        min_inside_depth: u32::MAX,
    };
    let (pows, inv_pows) = pow_tables(job.sys.base(), job.max_depth);
    let mut ctx = MeasureCtx { job, task, table_levels, out, pows, inv_pows };
    ctx.descend(&mut cursor, task.left_num, task.depth);
    // fully-covered subtrees dominate every depth at or below them
    if ctx.out.min_inside_depth != u32::MAX {
        let ndu = nd as u128;
        for m in ctx.out.min_inside_depth..=job.max_depth {
            let full = ndu.pow(job.max_depth - m);
            let di = (m - task.depth) as usize;
            if ctx.out.max_lo[di] < full {
                ctx.out.max_lo[di] = full;
            }
            if ctx.out.max_hi[di] < full {
                ctx.out.max_hi[di] = full;
            }
        }
    }
    ctx.out
}

/// Stitched measure result.
#[derive(Clone, Debug)]
pub struct MuUnion {
    pub units: u128,
    pub straddlers: u64,
    pub max_depth: u32,
    pub branching: u64,
    /// tables[m]: per-cylinder lower units at absolute depth `root_depth + m`
    pub tables: Vec<Vec<u128>>,
    /// straddler counts mirroring `tables`
    pub stables: Vec<Vec<u32>>,
    /// per-depth maxima of per-cylinder lower units, index = depth - root_depth
    pub max_lo: Vec<u128>,
    /// per-depth maxima of per-cylinder upper units
    pub max_hi: Vec<u128>,
}

impl MuUnion {
    pub fn value(&self) -> crate::measure::MeasureValue {
        crate::measure::units_to_value(
            self.branching,
            self.max_depth,
            self.units,
            self.units + self.straddlers as u128,
        )
    }

    /// Exact lower/upper rational brackets of the measure.
    pub fn brackets(&self) -> (BigRational, BigRational) {
        let unit = Rat::new(1, pow_i128(self.branching as i128, self.max_depth).unwrap()).to_big();
        let lo = BigRational::from_integer(self.units.into()) * &unit;
        let hi = BigRational::from_integer((self.units + self.straddlers as u128).into()) * unit;
        (lo, hi)
    }
}

pub fn measure_stitch(job: &Job, tasks: &[Task], outs: Vec<MeasureOut>) -> MuUnion {
    let nd = job.sys.digits(0).len();
    let mut units = 0u128;
    let mut straddlers = 0u64;
    let task_depth = tasks.first().map_or(job.root_depth, |t| t.depth);
    let levels_above = (task_depth - job.root_depth) as usize;
    let total_levels = if job.table_depth >= job.root_depth {
        (job.table_depth - job.root_depth + 1) as usize
    } else {
        0
    };
    let mut tables: Vec<Vec<u128>> =
        (0..total_levels).map(|m| vec![0u128; nd.pow(m as u32)]).collect();
    let mut stables: Vec<Vec<u32>> =
        (0..total_levels).map(|m| vec![0u32; nd.pow(m as u32)]).collect();
    let span_all = (job.max_depth - job.root_depth + 1) as usize;
    let mut max_lo = vec![0u128; span_all];
    let mut max_hi = vec![0u128; span_all];
    // ancestor sums for depths between root and the task level
    let mut anc_lo: Vec<Vec<u128>> =
        (0..levels_above).map(|m| vec![0u128; nd.pow(m as u32)]).collect();
    let mut anc_hi: Vec<Vec<u128>> =
        (0..levels_above).map(|m| vec![0u128; nd.pow(m as u32)]).collect();
    for (t, o) in tasks.iter().zip(outs) {
        units += o.units;
        straddlers += o.straddlers;
        for (k, (&lo, &hi)) in o.max_lo.iter().zip(&o.max_hi).enumerate() {
            let m = levels_above + k;
            if max_lo[m] < lo {
                max_lo[m] = lo;
            }
            if max_hi[m] < hi {
                max_hi[m] = hi;
            }
        }
        for m in 0..levels_above {
            let shift = nd.pow((levels_above - m) as u32) as u64;
            anc_lo[m][(t.index / shift) as usize] += o.units;
            anc_hi[m][(t.index / shift) as usize] += o.units + o.straddlers as u128;
        }
        for m in 0..levels_above.min(total_levels) {
            let shift = nd.pow((levels_above - m) as u32) as u64;
            tables[m][(t.index / shift) as usize] += o.units;
            stables[m][(t.index / shift) as usize] += o.straddlers as u32;
        }
        for (k, tbl) in o.tables.iter().enumerate() {
            let m = levels_above + k;
            if m >= total_levels {
                break;
            }
            let base = (t.index as usize) * tbl.len();
            for (i, v) in tbl.iter().enumerate() {
                tables[m][base + i] += v;
            }
            for (i, v) in o.stables[k].iter().enumerate() {
                stables[m][base + i] += v;
            }
        }
    }
    for m in 0..levels_above {
        for (&lo, &hi) in anc_lo[m].iter().zip(&anc_hi[m]) {
            if max_lo[m] < lo {
                max_lo[m] = lo;
            }
            if max_hi[m] < hi {
                max_hi[m] = hi;
            }
        }
    }
    MuUnion {
        units,
        straddlers,
        max_depth: job.max_depth,
        branching: job.sys.branching(),
        tables,
        stables,
        max_lo,
        max_hi,
    }
}

/// Sequential convenience wrapper.
pub fn measure_union(job: &Job, task_levels: u32) -> MuUnion {
    let tasks = job.tasks(task_levels);
    let mut scratch = SweepScratch::default();
    let outs: Vec<MeasureOut> =
        tasks.iter().map(|t| measure_task_scratch(job, t, &mut scratch)).collect();
    measure_stitch(job, &tasks, outs)
}

// ---------------------------------------------------------------------------
// counting cylinders whose K-part meets the union (d = 1)
// ---------------------------------------------------------------------------

/// Per-task counting output.
#[derive(Clone, Debug, Default)]
pub struct CountOut {
    /// counts[i]: hit cylinders at absolute depth `window_lo + i` in this task
    pub counts: Vec<u64>,
    pub hit: bool,
}

/// Counts, for each depth in `[window_lo, window_hi]`, the `K`-cylinders
/// whose intersection with `K` meets the union.
///
/// Contacts that stay unresolved at `cert_depth` (thinner than
/// `b^-cert_depth`) do not count; callers pick `cert_depth` from the minimal
/// component width so that only boundary-degenerate contacts are dropped.
pub fn count_task(
    job: &Job,
    task: &Task,
    window_lo: u32,
    window_hi: u32,
    cert_depth: u32,
) -> CountOut {
    count_task_scratch(job, task, window_lo, window_hi, cert_depth, &mut SweepScratch::default())
}

/// As [`count_task`] with reusable buffers.
pub fn count_task_scratch(
    job: &Job,
    task: &Task,
    window_lo: u32,
    window_hi: u32,
    cert_depth: u32,
    scratch: &mut SweepScratch,
) -> CountOut {
    let b = job.sys.base() as i128;
    let side_den = pow_i128(b, task.depth).expect("task depth in range");
    let lo = Rat::new(task.left_num, side_den);
    let hi = Rat::new(task.left_num + 1, side_den);
    sorted_window_into(&job.fams, &lo, &hi, scratch);
    let ivs = &scratch.out;
    let mut cursor = Cursor::new(&job.fams, ivs);
    let mut counts = vec![0u64; (window_hi + 1).saturating_sub(window_lo) as usize];

    #[allow(clippy::too_many_arguments)]
    fn rec(
        sys: &DigitSystem,
        cursor: &mut Cursor,
        counts: &mut [u64],
        num: i128,
        depth: u32,
        window_lo: u32,
        window_hi: u32,
        cert_depth: u32,
        pows: &[i128],
        inv_pows: &[f64],
    ) -> bool {
        let b = sys.base() as i128;
        let den = pows[depth as usize];
        let inv = inv_pows[depth as usize];
        let a = Ep::with_key(num, den, num as f64 * inv);
        let bb = Ep::with_key(num + 1, den, (num + 1) as f64 * inv);
        match cursor.classify(&a, &bb) {
            Class::Outside => false,
            Class::Inside => {
                let nd = sys.digits(0).len() as u64;
                for m in window_lo.max(depth)..=window_hi {
                    counts[(m - window_lo) as usize] += nd.pow(m - depth);
                }
                true
            }
            Class::Partial => {
                if depth >= cert_depth {
                    return false;
                }
                let mut any = false;
                for &d in sys.digits(0) {
                    if rec(
                        sys,
                        cursor,
                        counts,
                        num * b + d as i128,
                        depth + 1,
                        window_lo,
                        window_hi,
                        cert_depth,
                        pows,
                        inv_pows,
                    ) {
                        any = true;
                        if depth >= window_hi {
                            // existence is all that matters below the window
                            break;
                        }
                    }
                }
                if any && depth >= window_lo && depth <= window_hi {
                    counts[(depth - window_lo) as usize] += 1;
                }
                any
            }
        }
    }
    let (pows, inv_pows) = pow_tables(job.sys.base(), cert_depth.max(job.max_depth));
    let hit = rec(
        &job.sys,
        &mut cursor,
        &mut counts,
        task.left_num,
        task.depth,
        window_lo,
        window_hi,
        cert_depth,
        &pows,
        &inv_pows,
    );
    CountOut { counts, hit }
}

pub fn count_stitch(
    job: &Job,
    tasks: &[Task],
    outs: &[CountOut],
    window_lo: u32,
    window_hi: u32,
) -> Vec<u64> {
    let nd = job.sys.digits(0).len() as u64;
    let mut counts = vec![0u64; (window_hi + 1).saturating_sub(window_lo) as usize];
    for o in outs {
        for (i, c) in o.counts.iter().enumerate() {
            counts[i] += c;
        }
    }
    let task_depth = tasks.first().map_or(job.root_depth, |t| t.depth);
    // shallow cylinders: hit iff any descendant task hit
    for m in window_lo..=window_hi {
        if m >= task_depth {
            break;
        }
        let group = nd.pow(task_depth - m);
        let mut i = 0usize;
        while i < tasks.len() {
            let anc = tasks[i].index / group;
            let mut any = false;
            while i < tasks.len() && tasks[i].index / group == anc {
                any |= outs[i].hit;
                i += 1;
            }
            if any {
                counts[(m - window_lo) as usize] += 1;
            }
        }
    }
    counts
}

/// Sequential convenience wrapper.
pub fn count_union(
    job: &Job,
    task_levels: u32,
    window_lo: u32,
    window_hi: u32,
    cert_depth: u32,
) -> Vec<u64> {
    let tasks = job.tasks(task_levels);
    let mut scratch = SweepScratch::default();
    let outs: Vec<CountOut> = tasks
        .iter()
        .map(|t| count_task_scratch(job, t, window_lo, window_hi, cert_depth, &mut scratch))
        .collect();
    count_stitch(job, &tasks, &outs, window_lo, window_hi)
}

// ---------------------------------------------------------------------------
// exact Lebesgue length of the union (no depth cutoff)
// ---------------------------------------------------------------------------

/// Per-chunk output: signed per-family numerator sums over the family
/// denominators, plus exact boundary-clip corrections.
#[derive(Clone, Debug)]
pub struct LenOut {
    pub fam_acc: Vec<i128>,
    pub corrections: Vec<Rat>,
}

/// Window of chunk `i` of `n` over the clip interval.
pub fn len_chunk_window(clip_lo: &Rat, clip_hi: &Rat, i: u64, n: u64) -> (Rat, Rat) {
    let w = clip_hi.sub(clip_lo);
    let step = w.div(&Rat::from_int(n as i128));
    let a = clip_lo.add(&step.mul(&Rat::from_int(i as i128)));
    let b = if i + 1 == n {
        *clip_hi
    } else {
        clip_lo.add(&step.mul(&Rat::from_int(i as i128 + 1)))
    };
    (a, b)
}

/// Exact length of `union cap [chunk_lo, chunk_hi]`.
pub fn len_task(fams: &[Prepared], chunk_lo: &Rat, chunk_hi: &Rat) -> LenOut {
    len_task_scratch(fams, chunk_lo, chunk_hi, &mut SweepScratch::default())
}

/// As [`len_task`] with reusable buffers.
pub fn len_task_scratch(
    fams: &[Prepared],
    chunk_lo: &Rat,
    chunk_hi: &Rat,
    scratch: &mut SweepScratch,
) -> LenOut {
    sorted_window_into(fams, chunk_lo, chunk_hi, scratch);
    let ivs = &scratch.out;
    let mut fam_acc = vec![0i128; fams.len()];
    let mut corrections: Vec<Rat> = Vec::new();
    let a = Ep::from_rat(chunk_lo);
    let b = Ep::from_rat(chunk_hi);

    let mut emit = |lo: (Ep, u32), hi: (Ep, u32)| {
        let (clo, clo_fam) = if lo.0.cmp_ep(&a) == Ordering::Less { (a, u32::MAX) } else { lo };
        let (chi, chi_fam) = if hi.0.cmp_ep(&b) == Ordering::Greater { (b, u32::MAX) } else { hi };
        if chi.cmp_ep(&clo) != Ordering::Greater {
            return;
        }
        if chi_fam != u32::MAX {
            fam_acc[chi_fam as usize] += chi.n;
        } else {
            corrections.push(chi.to_rat());
        }
        if clo_fam != u32::MAX {
            fam_acc[clo_fam as usize] -= clo.n;
        } else {
            corrections.push(clo.to_rat().neg());
        }
    };

    let mut cur: Option<(Ep, u32, Ep, u32)> = None;
    for iv in ivs.iter() {
        let lo = iv.lo_ep(fams);
        let hi = iv.hi_ep(fams);
        match &mut cur {
            None => cur = Some((lo, iv.fam, hi, iv.fam)),
            Some((_, _, chi, chif)) => {
                if lo.cmp_ep(chi) != Ordering::Greater {
                    if hi.cmp_ep(chi) == Ordering::Greater {
                        *chi = hi;
                        *chif = iv.fam;
                    }
                } else {
                    let c = cur.take().unwrap();
                    emit((c.0, c.1), (c.2, c.3));
                    cur = Some((lo, iv.fam, hi, iv.fam));
                }
            }
        }
    }
    if let Some(c) = cur.take() {
        emit((c.0, c.1), (c.2, c.3));
    }
    drop(emit);
    LenOut { fam_acc, corrections }
}

/// Combines chunk outputs into the exact union length.
pub fn len_stitch(fams: &[Prepared], outs: Vec<LenOut>) -> BigRational {
    let mut fam_total = vec![0i128; fams.len()];
    let mut terms: Vec<BigRational> = Vec::new();
    for o in outs {
        for (t, v) in fam_total.iter_mut().zip(&o.fam_acc) {
            *t = t.checked_add(*v).expect("family accumulator overflow");
        }
        for c in o.corrections {
            terms.push(c.to_big());
        }
    }
    for (f, tot) in fams.iter().zip(fam_total) {
        if tot != 0 {
            terms.push(Rat::new(tot, f.den).to_big());
        }
    }
    tree_sum(&mut terms)
}

/// Exact Lebesgue length of the union clipped to `[clip_lo, clip_hi]`.
pub fn lebesgue_length(
    fams: &[Prepared],
    clip_lo: &Rat,
    clip_hi: &Rat,
    n_chunks: u64,
) -> BigRational {
    let mut scratch = SweepScratch::default();
    let outs: Vec<LenOut> = (0..n_chunks)
        .map(|i| {
            let (a, b) = len_chunk_window(clip_lo, clip_hi, i, n_chunks);
            len_task_scratch(fams, &a, &b, &mut scratch)
        })
        .collect();
    len_stitch(fams, outs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::approx::build_aq;
    use crate::region::Interval;
    use num_traits::Signed;

    fn fams_aq(big_q: u64, eta: Rat, theta: Rat) -> Vec<Family> {
        (big_q..2 * big_q).map(|q| Family { q, eta, theta }).collect()
    }

    #[test]
    fn lebesgue_length_matches_region_union() {
        let clip = Interval::new(Rat::ZERO, Rat::ONE);
        for big_q in [1u64, 2, 3, 8, 20] {
            for eta in [Rat::new(1, 10), Rat::new(1, 7), Rat::new(3, 100)] {
                for theta in [Rat::ZERO, Rat::new(1, 2), Rat::new(1, 7)] {
                    let expect = build_aq(big_q, &eta, &theta, &clip).unwrap().length();
                    let fams = prepare(&fams_aq(big_q, eta, theta)).unwrap();
                    for chunks in [1u64, 3, 16] {
                        let got = lebesgue_length(&fams, &Rat::ZERO, &Rat::ONE, chunks);
                        assert_eq!(
                            got, expect,
                            "Q={big_q} eta={eta} theta={theta} chunks={chunks}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn measure_union_matches_explicit_region() {
        use crate::measure::measure_of_region;
        let sys = DigitSystem::new_1d(3, &[0, 2]).unwrap();
        let clip = Interval::new(Rat::ZERO, Rat::ONE);
        for big_q in [1u64, 2, 5, 9] {
            for eta in [Rat::new(1, 10), Rat::new(1, 13)] {
                let region = build_aq(big_q, &eta, &Rat::ZERO, &clip).unwrap();
                let expect = measure_of_region(&sys, &region, 24).unwrap();
                let fams = prepare(&fams_aq(big_q, eta, Rat::ZERO)).unwrap();
                let job = Job {
                    sys: sys.clone(),
                    fams,
                    root_depth: 0,
                    root_left_num: 0,
                    max_depth: 24,
                    table_depth: 0,
                };
                for levels in [0u32, 2, 4] {
                    let got = measure_union(&job, levels);
                    let mid = got.value();
                    let diff = (mid.value - &expect.value).abs();
                    assert!(
                        diff <= mid.error_bound + &expect.error_bound,
                        "Q={big_q} eta={eta} levels={levels}"
                    );
                }
            }
        }
    }

    #[test]
    fn tables_sum_to_total() {
        let sys = DigitSystem::new_1d(5, &[0, 1, 2, 3]).unwrap();
        let fams = prepare(&fams_aq(16, Rat::new(1, 50), Rat::new(1, 7))).unwrap();
        let job = Job {
            sys,
            fams,
            root_depth: 0,
            root_left_num: 0,
            max_depth: 18,
            table_depth: 3,
        };
        for levels in [0u32, 2, 5] {
            let got = measure_union(&job, levels);
            for (m, tbl) in got.tables.iter().enumerate() {
                let s: u128 = tbl.iter().sum();
                assert_eq!(s, got.units, "level {m} levels={levels}");
            }
            for (m, tbl) in got.stables.iter().enumerate() {
                let s: u64 = tbl.iter().map(|&x| x as u64).sum();
                assert_eq!(s, got.straddlers, "stable level {m}");
            }
            // per-depth maxima agree with the explicit tables where both exist
            for (m, tbl) in got.tables.iter().enumerate() {
                let mx = tbl.iter().copied().max().unwrap_or(0);
                assert_eq!(got.max_lo[m], mx, "max at level {m} levels={levels}");
                let mh = tbl
                    .iter()
                    .zip(&got.stables[m])
                    .map(|(&u, &s)| u + s as u128)
                    .max()
                    .unwrap_or(0);
                assert_eq!(got.max_hi[m], mh, "max_hi at level {m} levels={levels}");
            }
        }
    }

    #[test]
    fn task_split_invariance() {
        let sys = DigitSystem::new_1d(5, &[0, 1, 2, 3]).unwrap();
        let fams = prepare(&fams_aq(8, Rat::new(1, 17), Rat::new(1, 3))).unwrap();
        let job = Job {
            sys,
            fams,
            root_depth: 1,
            root_left_num: 2, // root cylinder [2/5, 3/5]
            max_depth: 16,
            table_depth: 3,
        };
        let a = measure_union(&job, 0);
        let b = measure_union(&job, 3);
        assert_eq!(a.units, b.units);
        assert_eq!(a.straddlers, b.straddlers);
        assert_eq!(a.tables, b.tables);
    }

    #[test]
    fn counting_matches_brute_force() {
        use crate::approx::open_interval_meets_k;
        let sys = DigitSystem::new_1d(3, &[0, 2]).unwrap();
        let eta = Rat::new(1, 9);
        let theta = Rat::ZERO;
        let fams = prepare(&fams_aq(3, eta, theta)).unwrap();
        let job = Job {
            sys: sys.clone(),
            fams,
            root_depth: 0,
            root_left_num: 0,
            max_depth: 30,
            table_depth: 0,
        };
        let counts = count_union(&job, 1, 1, 5, 24);
        let region = build_aq(3, &eta, &theta, &Interval::new(Rat::ZERO, Rat::ONE)).unwrap();
        let mut words = alloc::vec![0i128];
        for n in 1u32..=5 {
            let mut next = Vec::new();
            for x in &words {
                for &d in sys.digits(0) {
                    next.push(x * 3 + d as i128);
                }
            }
            words = next;
            let den = pow_i128(3, n).unwrap();
            let mut brute = 0u64;
            for &w in &words {
                let lo = Rat::new(w, den);
                let hi = Rat::new(w + 1, den);
                let hitk = region.components().iter().any(|c| {
                    let l = c.lo.max(lo);
                    let h = c.hi.min(hi);
                    l < h && open_interval_meets_k(&sys, &l, &h)
                });
                if hitk {
                    brute += 1;
                }
            }
            assert_eq!(counts[(n - 1) as usize], brute, "depth {n}");
        }
    }
}
