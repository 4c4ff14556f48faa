//! Closed-form evaluators for the dimension bounds, thresholds, and
//! admissible-parameter regions used throughout the toolkit.
//!
//! Every evaluator is total: it always returns a value together with the list
//! of named precondition checks, so callers (and the CLI) can report
//! violations explicitly instead of silently producing NaN. Where the inputs
//! are rational and the formula is algebraic, an exact rational twin is
//! provided for boundary-tight comparisons.

use alloc::vec;
use alloc::vec::Vec;

use crate::fl;
use crate::rat::Rat;

/// One named precondition check.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Precond {
    pub name: &'static str,
    pub ok: bool,
}

/// Total evaluation result: a value plus its precondition report.
#[derive(Clone, Debug)]
pub struct Eval {
    pub value: f64,
    pub preconditions: Vec<Precond>,
}

impl Eval {
    pub fn all_ok(&self) -> bool {
        self.preconditions.iter().all(|p| p.ok)
    }
}

/// Dimension upper bound `delta + (d+1)/(1+tau) - d`.
///
/// At `d = 1`, `delta = 1` this is the classical `2/(1+tau)`.
pub fn upper_dim(d: u32, delta: f64, tau: f64) -> Eval {
    let value = delta + (d as f64 + 1.0) / (1.0 + tau) - d as f64;
    Eval {
        value,
        preconditions: vec![
            Precond { name: "tau > 1/d", ok: tau > 1.0 / d as f64 },
            Precond { name: "0 < delta <= d", ok: delta > 0.0 && delta <= d as f64 },
        ],
    }
}

/// Exact twin of [`upper_dim`].
pub fn upper_dim_rat(d: u32, delta: &Rat, tau: &Rat) -> Rat {
    let dd = Rat::from_int(d as i128);
    delta.add(&Rat::from_int(d as i128 + 1).div(&Rat::ONE.add(tau))).sub(&dd)
}

/// Both branches of the general lower bound:
/// `min{ delta - (tau d - 1) X / (beta delta), X }` with `X` the upper bound.
pub fn lower_dim_general_parts(d: u32, delta: f64, tau: f64, beta: f64) -> (f64, f64) {
    let x = upper_dim(d, delta, tau).value;
    let first = delta - (tau * d as f64 - 1.0) * x / (beta * delta);
    (first, x)
}

pub fn lower_dim_general(d: u32, delta: f64, tau: f64, beta: f64) -> Eval {
    let (first, x) = lower_dim_general_parts(d, delta, tau, beta);
    Eval {
        value: first.min(x),
        preconditions: vec![
            Precond { name: "tau > 1/d", ok: tau > 1.0 / d as f64 },
            Precond { name: "0 < beta < 1", ok: beta > 0.0 && beta < 1.0 },
            Precond { name: "0 < delta <= d", ok: delta > 0.0 && delta <= d as f64 },
        ],
    }
}

pub fn lower_dim_general_rat(d: u32, delta: &Rat, tau: &Rat, beta: &Rat) -> Rat {
    let x = upper_dim_rat(d, delta, tau);
    let td = tau.mul(&Rat::from_int(d as i128)).sub(&Rat::ONE);
    let first = delta.sub(&td.mul(&x).div(&beta.mul(delta)));
    first.min(x)
}

/// Both branches of the homogeneous lower bound for `delta > d - 1`:
/// `min{ delta - (tau - 1/d)(2d - delta - 1) X / (beta delta), X }`.
pub fn lower_dim_special_parts(d: u32, delta: f64, tau: f64, beta: f64) -> (f64, f64) {
    let x = upper_dim(d, delta, tau).value;
    let first =
        delta - (tau - 1.0 / d as f64) * (2.0 * d as f64 - delta - 1.0) * x / (beta * delta);
    (first, x)
}

pub fn lower_dim_special(d: u32, delta: f64, tau: f64, beta: f64) -> Eval {
    let (first, x) = lower_dim_special_parts(d, delta, tau, beta);
    let tau_cap = (delta + 2.0 - d as f64) / (2.0 * d as f64 - delta - 1.0);
    let (g1, _) = lower_dim_general_parts(d, delta, tau, beta);
    Eval {
        value: first.min(x),
        preconditions: vec![
            Precond { name: "tau > 1/d", ok: tau > 1.0 / d as f64 },
            Precond { name: "delta > d-1", ok: delta > d as f64 - 1.0 },
            Precond { name: "tau < (delta+2-d)/(2d-delta-1)", ok: tau < tau_cap },
            Precond { name: "0 < beta < 1", ok: beta > 0.0 && beta < 1.0 },
            // the homogeneous bound dominates the general one on its domain
            Precond { name: "special branch >= general branch", ok: first >= g1 - 1e-12 },
        ],
    }
}

pub fn lower_dim_special_rat(d: u32, delta: &Rat, tau: &Rat, beta: &Rat) -> Rat {
    let x = upper_dim_rat(d, delta, tau);
    let t1 = tau.sub(&Rat::new(1, d as i128));
    let t2 = Rat::from_int(2 * d as i128).sub(delta).sub(&Rat::ONE);
    let first = delta.sub(&t1.mul(&t2).mul(&x).div(&beta.mul(delta)));
    first.min(x)
}

/// Thresholds under which the homogeneous bound's minimum is the upper-bound
/// branch: `delta >= 2d - 1 - d^2 beta/(1+d)` and `beta > 1 - d^-2`.
pub fn min_attained_conditions(d: u32, beta: f64) -> (f64, f64, bool) {
    let df = d as f64;
    let delta_threshold = 2.0 * df - 1.0 - df * df * beta / (1.0 + df);
    let beta_threshold = 1.0 - 1.0 / (df * df);
    (delta_threshold, beta_threshold, beta > beta_threshold)
}

/// Conjectured dimension over the middle-third Cantor set:
/// `max{ log2/log3 + 2/(1+tau) - 1, (log2/log3)/(1+tau) }`.
pub fn bd_conjecture_value(tau: f64) -> Eval {
    let delta = fl::ln(2.0) / fl::ln(3.0);
    let a = delta + 2.0 / (1.0 + tau) - 1.0;
    let b = delta / (1.0 + tau);
    Eval {
        value: a.max(b),
        preconditions: vec![Precond { name: "tau > 1", ok: tau > 1.0 }],
    }
}

/// Equidistribution-rate exponent needed before the homogeneous machinery
/// reaches the middle-third Cantor set: `2 (1 - delta)/delta` at
/// `delta = log 2 / log 3`, about 1.1699.
pub fn middle_third_kappa_requirement() -> f64 {
    let delta = fl::ln(2.0) / fl::ln(3.0);
    kappa_requirement(delta)
}

/// `2 (1 - delta) / delta` for a `delta`-dimensional self-similar set.
pub fn kappa_requirement(delta: f64) -> f64 {
    2.0 * (1.0 - delta) / delta
}

/// A named parameter interval with endpoint strictness flags.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamInterval {
    pub name: &'static str,
    pub lo: f64,
    pub hi: f64,
    pub lo_strict: bool,
    pub hi_strict: bool,
}

impl ParamInterval {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.lo == self.hi && (self.lo_strict || self.hi_strict))
    }

    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = if self.lo_strict { x > self.lo } else { x >= self.lo };
        let hi_ok = if self.hi_strict { x < self.hi } else { x <= self.hi };
        lo_ok && hi_ok
    }
}

/// Admissible-region result: intervals plus precondition report.
#[derive(Clone, Debug)]
pub struct RegionResult {
    pub intervals: Vec<ParamInterval>,
    pub preconditions: Vec<Precond>,
}

impl RegionResult {
    pub fn all_ok(&self) -> bool {
        self.preconditions.iter().all(|p| p.ok)
    }

    pub fn interval(&self, name: &str) -> Option<&ParamInterval> {
        self.intervals.iter().find(|i| i.name == name)
    }

    pub fn any_empty(&self) -> bool {
        self.intervals.iter().any(|i| i.is_empty())
    }
}

/// Which admissible-parameter statement to evaluate.
#[derive(Clone, Debug)]
pub enum RegionKind {
    /// counting property near a strongly irreducible self-similar set, with
    /// user-supplied equidistribution exponent `kappa`
    SelfSimilar { d: u32, alpha: f64, kappa: f64 },
    /// one-dimensional missing-digits sets with `l^1`-dimension above `gamma`
    MissingDigits { gamma: f64, alpha: f64 },
    /// measure-strength variant (adds the thickness floor on `beta`)
    MissingDigitsMeasure { delta: f64, gamma: f64, alpha: f64 },
    /// product-form systems in dimension `d`
    Product { d: u32, gamma: f64, alpha: f64 },
    /// necessary consistency constraint linking `alpha` and `beta`
    Consistency { d: u32, delta: f64, beta: f64 },
}

/// `beta` upper bound for the self-similar counting property:
/// `1 + d alpha (d+1) kappa / (d+1+d kappa) - d alpha`.
pub fn self_similar_beta_sup(d: u32, alpha: f64, kappa: f64) -> f64 {
    let df = d as f64;
    1.0 + df * alpha * (df + 1.0) * kappa / (df + 1.0 + df * kappa) - df * alpha
}

/// Exact twin of [`self_similar_beta_sup`].
pub fn self_similar_beta_sup_rat(d: u32, alpha: &Rat, kappa: &Rat) -> Rat {
    let dd = Rat::from_int(d as i128);
    let d1 = Rat::from_int(d as i128 + 1);
    let num = dd.mul(alpha).mul(&d1).mul(kappa);
    let den = d1.add(&dd.mul(kappa));
    Rat::ONE.add(&num.div(&den)).sub(&dd.mul(alpha))
}

pub fn admissible_region(kind: &RegionKind) -> RegionResult {
    match *kind {
        RegionKind::SelfSimilar { d, alpha, kappa } => {
            let df = d as f64;
            let beta_sup = self_similar_beta_sup(d, alpha, kappa);
            RegionResult {
                intervals: vec![
                    ParamInterval { name: "alpha", lo: 1.0 / df, hi: f64::INFINITY, lo_strict: true, hi_strict: true },
                    ParamInterval { name: "beta", lo: 0.0, hi: beta_sup, lo_strict: true, hi_strict: true },
                ],
                preconditions: vec![
                    Precond { name: "alpha > 1/d", ok: alpha > 1.0 / df },
                    Precond { name: "kappa > 0", ok: kappa > 0.0 },
                    Precond { name: "beta interval nonempty", ok: beta_sup > 0.0 },
                ],
            }
        }
        RegionKind::MissingDigits { gamma, alpha } => {
            let alpha_hi = gamma / (1.0 - gamma);
            let beta_sup = (1.0 - (1.0 + alpha) * (1.0 - gamma)) / gamma;
            RegionResult {
                intervals: vec![
                    ParamInterval { name: "alpha", lo: 1.0, hi: alpha_hi, lo_strict: true, hi_strict: true },
                    ParamInterval { name: "beta", lo: 0.0, hi: beta_sup, lo_strict: true, hi_strict: true },
                ],
                preconditions: vec![
                    Precond { name: "1/2 < gamma < 1", ok: gamma > 0.5 && gamma < 1.0 },
                    Precond { name: "1 < alpha < gamma/(1-gamma)", ok: alpha > 1.0 && alpha < alpha_hi },
                ],
            }
        }
        RegionKind::MissingDigitsMeasure { delta, gamma, alpha } => {
            let alpha_hi = (2.0 * delta * gamma - gamma) / (1.0 - gamma);
            let beta_lo = 2.0 * (1.0 - delta);
            let beta_sup = (1.0 - (1.0 + alpha) * (1.0 - gamma)) / gamma;
            RegionResult {
                intervals: vec![
                    ParamInterval { name: "alpha", lo: 1.0, hi: alpha_hi, lo_strict: true, hi_strict: true },
                    ParamInterval { name: "beta", lo: beta_lo, hi: beta_sup, lo_strict: false, hi_strict: true },
                ],
                preconditions: vec![
                    Precond { name: "1/2 < gamma < 1", ok: gamma > 0.5 && gamma < 1.0 },
                    Precond { name: "delta * gamma > 1/2", ok: delta * gamma > 0.5 },
                    Precond { name: "1 < alpha < (2 delta gamma - gamma)/(1-gamma)", ok: alpha > 1.0 && alpha < alpha_hi },
                ],
            }
        }
        RegionKind::Product { d, gamma, alpha } => {
            let df = d as f64;
            let alpha_hi = (1.0 - df + df * gamma) / (1.0 - gamma);
            let beta_sup = (1.0 - df + df * gamma + alpha * (gamma - 1.0)) / (df * gamma);
            RegionResult {
                intervals: vec![
                    ParamInterval { name: "alpha", lo: 1.0, hi: alpha_hi, lo_strict: false, hi_strict: true },
                    ParamInterval { name: "beta", lo: 0.0, hi: beta_sup, lo_strict: true, hi_strict: true },
                ],
                preconditions: vec![
                    Precond { name: "d/(d+1) < gamma < 1", ok: gamma > df / (df + 1.0) && gamma < 1.0 },
                    Precond { name: "1 <= alpha < (1-d+d gamma)/(1-gamma)", ok: alpha >= 1.0 && alpha < alpha_hi },
                ],
            }
        }
        RegionKind::Consistency { d, delta, beta } => {
            let df = d as f64;
            let alpha_hi = if df > delta { (1.0 + delta - beta * delta) / (df - delta) } else { f64::INFINITY };
            RegionResult {
                intervals: vec![ParamInterval {
                    name: "alpha",
                    lo: 1.0 / df,
                    hi: alpha_hi,
                    lo_strict: true,
                    hi_strict: false,
                }],
                preconditions: vec![
                    Precond { name: "0 < delta <= d", ok: delta > 0.0 && delta <= df },
                    Precond { name: "beta > 0", ok: beta > 0.0 },
                ],
            }
        }
    }
}

/// Exact consistency cap `alpha <= (1 + delta - beta delta)/(d - delta)`;
/// `None` means unconstrained (`delta = d`).
pub fn consistency_alpha_cap_rat(d: u32, delta: &Rat, beta: &Rat) -> Option<Rat> {
    let dd = Rat::from_int(d as i128);
    if *delta == dd {
        return None;
    }
    Some(Rat::ONE.add(delta).sub(&beta.mul(delta)).div(&dd.sub(delta)))
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG23: f64 = 0.6309297535714574;

    #[test]
    fn upper_dim_values() {
        // tau = 1/d collapses to delta
        let e = upper_dim(1, 0.7, 1.0);
        assert!((e.value - 0.7).abs() < 1e-15);
        // classical case d=1, delta=1, tau=3 -> 1/2
        assert_eq!(upper_dim_rat(1, &Rat::ONE, &Rat::from_int(3)), Rat::new(1, 2));
        // d=1, delta=log2/log3, tau=3 -> 0.13093
        let e = upper_dim(1, LOG23, 3.0);
        assert!((e.value - 0.1309297535714573).abs() < 1e-12);
    }

    #[test]
    fn lower_bounds_worked_example() {
        // d=1, delta=0.8614, tau=1.2, beta=0.3
        let g = lower_dim_general(1, 0.8614, 1.2, 0.3);
        assert!((g.value - 0.26509096115555375).abs() < 1e-12);
        let s = lower_dim_special(1, 0.8614, 1.2, 0.3);
        assert!((s.value - 0.7704909090909091).abs() < 1e-12);
        let (s1, _) = lower_dim_special_parts(1, 0.8614, 1.2, 0.3);
        assert!((s1 - 0.7787515672161599).abs() < 1e-12);
        assert!(s.all_ok());
    }

    #[test]
    fn limits_at_tau_one_over_d() {
        for delta in [0.4, 0.8614, 0.99] {
            let g = lower_dim_general(1, delta, 1.0 + 1e-12, 0.5);
            assert!((g.value - delta).abs() < 1e-9);
            let s = lower_dim_special(1, delta, 1.0 + 1e-12, 0.5);
            assert!((s.value - delta).abs() < 1e-9);
        }
    }

    #[test]
    fn ordering_and_strictness() {
        // general <= special <= upper; first-branch strictness for tau > 1, d=1
        let cases = [
            (0.9, 1.5, 0.4),
            (0.6, 3.5, 0.5), // both mins clip to the upper branch here
            (0.8614, 1.2, 0.3),
            (0.99, 1.05, 0.9),
        ];
        for (delta, tau, beta) in cases {
            let up = upper_dim(1, delta, tau).value;
            let g = lower_dim_general(1, delta, tau, beta).value;
            let s = lower_dim_special(1, delta, tau, beta).value;
            assert!(g <= s + 1e-12 && s <= up + 1e-12, "{delta} {tau} {beta}");
            let (g1, _) = lower_dim_general_parts(1, delta, tau, beta);
            let (s1, _) = lower_dim_special_parts(1, delta, tau, beta);
            assert!(g1 < s1, "branch strictness {delta} {tau} {beta}");
        }
    }

    #[test]
    fn min_attained_thresholds() {
        let (_, bt, ok) = min_attained_conditions(1, 0.001);
        assert_eq!(bt, 0.0);
        assert!(ok); // d = 1: any beta > 0 qualifies
        let (dt, bt, ok) = min_attained_conditions(2, 0.8);
        assert!((dt - 1.9333333333333333).abs() < 1e-15);
        assert!((bt - 0.75).abs() < 1e-15);
        assert!(ok);
        let (_, _, ok) = min_attained_conditions(2, 0.5);
        assert!(!ok);
    }

    #[test]
    fn bd_values() {
        let e = bd_conjecture_value(1.0);
        assert!((e.value - LOG23).abs() < 1e-12);
        assert!(!e.all_ok()); // tau > 1 violated, value still reported
        let e = bd_conjecture_value(3.0);
        assert!((e.value - 0.15773243839286435).abs() < 1e-12);
        // large tau: the intrinsic branch dominates
        let e = bd_conjecture_value(50.0);
        assert!((e.value - LOG23 / 51.0).abs() < 1e-12);
    }

    #[test]
    fn kappa_requirements() {
        assert!((middle_third_kappa_requirement() - 1.1699250014423124).abs() < 1e-12);
        assert_eq!(kappa_requirement(1.0), 0.0);
        assert!((kappa_requirement(2.0 / 3.0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn self_similar_beta_limit() {
        // beta_sup -> 2 kappa / (2 + kappa) as alpha -> 1 (d = 1)
        for kappa in [0.3, 1.0, 1.1699, 5.0] {
            let lim = 2.0 * kappa / (2.0 + kappa);
            let v = self_similar_beta_sup(1, 1.0 + 1e-10, kappa);
            assert!((v - lim).abs() < 1e-9, "kappa={kappa}");
        }
        // exact at alpha = 1
        let v = self_similar_beta_sup_rat(1, &Rat::ONE, &Rat::new(117, 100));
        assert_eq!(v, Rat::new(2 * 117, 317));
    }

    #[test]
    fn region_examples() {
        // missing digits, gamma = 3/4: alpha in (1,3), beta_sup(alpha=2) = 1/3
        let r = admissible_region(&RegionKind::MissingDigits { gamma: 0.75, alpha: 2.0 });
        assert!(r.all_ok());
        let a = r.interval("alpha").unwrap();
        assert!((a.hi - 3.0).abs() < 1e-12);
        let b = r.interval("beta").unwrap();
        assert!((b.hi - 1.0 / 3.0).abs() < 1e-12);

        // product, d=2, gamma=0.9: alpha in [1, 8), beta_sup(1) = 0.7/1.8
        let r = admissible_region(&RegionKind::Product { d: 2, gamma: 0.9, alpha: 1.0 });
        assert!(r.all_ok());
        assert!((r.interval("alpha").unwrap().hi - 8.0).abs() < 1e-9);
        assert!((r.interval("beta").unwrap().hi - 0.7 / 1.8).abs() < 1e-12);

        // consistency at delta = d is unconstrained
        let r = admissible_region(&RegionKind::Consistency { d: 1, delta: 1.0, beta: 0.5 });
        assert!(r.interval("alpha").unwrap().hi.is_infinite());
    }

    #[test]
    fn consistency_implied_by_missing_digits() {
        // over a gamma/alpha grid with delta >= gamma, the missing-digits
        // region sits inside the consistency cap
        let mut checked = 0;
        for gi in 1..12 {
            let gamma = 0.5 + 0.04 * gi as f64;
            if gamma >= 1.0 {
                break;
            }
            for ai in 1..10 {
                let alpha_hi = gamma / (1.0 - gamma);
                let alpha = 1.0 + (alpha_hi - 1.0) * ai as f64 / 10.0;
                let beta_sup = (1.0 - (1.0 + alpha) * (1.0 - gamma)) / gamma;
                if beta_sup <= 0.0 {
                    continue;
                }
                let delta = gamma + (1.0 - gamma) * 0.5; // any delta above gamma
                let beta = beta_sup * 0.999;
                let cap = (1.0 + delta - beta * delta) / (1.0 - delta);
                assert!(alpha <= cap + 1e-9, "gamma={gamma} alpha={alpha}");
                checked += 1;
            }
        }
        assert!(checked > 50);
    }
}
