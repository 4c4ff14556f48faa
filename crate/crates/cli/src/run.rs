//! Command implementations. Each runs pure core computations, writes CSV,
//! JSON, and plot files through [`crate::emit::Emitter`], and prints a short
//! summary line. Exit codes: 0 ran, 1 internal error, 2 invalid
//! configuration, 3 consistency-guard refusal.

use anyhow::{anyhow, bail, Result};
use missdig::audit::{
    self, eta_for, AuditError, AuditGrid,
};
use missdig::digits::{CylinderWord, DigitSystem};
use missdig::formulas;
use missdig::fourier;
use missdig::geometry::{self, OversizedPolicy, SimplexOutcome};
use missdig::limsup;
use missdig::measure::big_to_f64;
use missdig::rat::Rat;
use missdig::sample::SplitRng;
use serde_json::json;

use crate::config::{parse_rat, SysSpec};
use crate::emit::Emitter;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_REFUSED: i32 = 3;

/// Exit code for an audit error.
pub fn audit_exit(e: &AuditError) -> i32 {
    match e {
        AuditError::ConsistencyRefused { .. } => EXIT_REFUSED,
        AuditError::GridViolation(_) | AuditError::Unsupported(_) => EXIT_CONFIG,
        AuditError::Engine(_) => EXIT_INTERNAL,
    }
}

fn word_from(sys: &DigitSystem, strings: &[String]) -> Result<CylinderWord> {
    if strings.iter().all(|s| s.is_empty()) {
        return Ok(CylinderWord::root(sys.dim()));
    }
    let mut coords = Vec::new();
    for s in strings {
        let mut v = Vec::new();
        for ch in s.chars() {
            v.push(ch.to_digit(36).ok_or_else(|| anyhow!("bad digit {ch:?}"))? as u8);
        }
        coords.push(v);
    }
    CylinderWord::new(sys, coords).map_err(|e| anyhow!("{e}"))
}

// ---------------------------------------------------------------------------

pub fn formulas_cmd(out_dir: &str, name: &str, kvs: &[String]) -> Result<i32> {
    let get = |key: &str, default: Option<f64>| -> Result<f64> {
        for kv in kvs {
            if let Some((k, v)) = kv.split_once('=') {
                if k == key {
                    return v
                        .parse::<f64>()
                        .or_else(|_| parse_rat(v).map(|r| r.to_f64()))
                        .map_err(|e| anyhow!("{key}: {e}"));
                }
            }
        }
        default.ok_or_else(|| anyhow!("missing {key}=..."))
    };
    let (value, pre, extra): (f64, Vec<formulas::Precond>, serde_json::Value) = match name {
        "upper-dim" => {
            let e = formulas::upper_dim(get("d", None)? as u32, get("delta", None)?, get("tau", None)?);
            (e.value, e.preconditions, json!({}))
        }
        "lower-dim-general" => {
            let e = formulas::lower_dim_general(
                get("d", None)? as u32,
                get("delta", None)?,
                get("tau", None)?,
                get("beta", None)?,
            );
            (e.value, e.preconditions, json!({}))
        }
        "lower-dim-special" => {
            let e = formulas::lower_dim_special(
                get("d", None)? as u32,
                get("delta", None)?,
                get("tau", None)?,
                get("beta", None)?,
            );
            (e.value, e.preconditions, json!({}))
        }
        "min-attained" => {
            let (dt, bt, ok) = formulas::min_attained_conditions(get("d", None)? as u32, get("beta", None)?);
            (
                dt,
                vec![formulas::Precond { name: "beta > 1 - d^-2", ok }],
                json!({"delta_threshold": dt, "beta_threshold": bt}),
            )
        }
        "bd-conjecture" => {
            let e = formulas::bd_conjecture_value(get("tau", None)?);
            (e.value, e.preconditions, json!({}))
        }
        "kappa-requirement" => {
            let v = match get("delta", Some(-1.0))? {
                x if x < 0.0 => formulas::middle_third_kappa_requirement(),
                delta => formulas::kappa_requirement(delta),
            };
            (v, vec![], json!({}))
        }
        "admissible-region" => {
            let kind = kvs
                .iter()
                .find_map(|kv| kv.strip_prefix("kind="))
                .ok_or_else(|| anyhow!("missing kind=..."))?;
            let rk = match kind {
                "self-similar" => formulas::RegionKind::SelfSimilar {
                    d: get("d", Some(1.0))? as u32,
                    alpha: get("alpha", None)?,
                    kappa: get("kappa", None)?,
                },
                "missing-digits" => formulas::RegionKind::MissingDigits {
                    gamma: get("gamma", None)?,
                    alpha: get("alpha", None)?,
                },
                "missing-digits-measure" => formulas::RegionKind::MissingDigitsMeasure {
                    delta: get("delta", None)?,
                    gamma: get("gamma", None)?,
                    alpha: get("alpha", None)?,
                },
                "product" => formulas::RegionKind::Product {
                    d: get("d", Some(2.0))? as u32,
                    gamma: get("gamma", None)?,
                    alpha: get("alpha", None)?,
                },
                "consistency" => formulas::RegionKind::Consistency {
                    d: get("d", Some(1.0))? as u32,
                    delta: get("delta", None)?,
                    beta: get("beta", None)?,
                },
                other => bail!("unknown region kind {other:?}"),
            };
            let r = formulas::admissible_region(&rk);
            let ivs: Vec<serde_json::Value> = r
                .intervals
                .iter()
                .map(|i| {
                    json!({"name": i.name, "lo": i.lo, "hi": i.hi,
                           "lo_strict": i.lo_strict, "hi_strict": i.hi_strict,
                           "empty": i.is_empty()})
                })
                .collect();
            let beta_hi = r.interval("beta").map(|i| i.hi).unwrap_or(f64::NAN);
            (beta_hi, r.preconditions, json!({"intervals": ivs}))
        }
        other => bail!("unknown formula {other:?}"),
    };
    let pre_json: Vec<serde_json::Value> =
        pre.iter().map(|p| json!({"name": p.name, "ok": p.ok})).collect();
    let inputs: serde_json::Value = {
        let mut m = serde_json::Map::new();
        for kv in kvs {
            if let Some((k, v)) = kv.split_once('=') {
                m.insert(k.to_string(), serde_json::Value::String(v.to_string()));
            }
        }
        serde_json::Value::Object(m)
    };
    let mut out = json!({"name": name, "inputs": inputs, "value": value, "preconditions": pre_json});
    if let serde_json::Value::Object(em) = extra {
        for (k, v) in em {
            out[k] = v;
        }
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    let cfg = json!({"name": name, "inputs": out["inputs"]});
    let mut em = Emitter::new(out_dir, "formulas", &cfg)?;
    em.json(&out)?;
    Ok(EXIT_OK)
}

// ---------------------------------------------------------------------------

pub struct CountingArgs {
    pub sys: SysSpec,
    pub q_list: Vec<u64>,
    pub taus: Vec<f64>,
    pub theta: Rat,
    pub alpha: f64,
    pub beta: f64,
    pub max_depth: Option<u32>,
}

pub fn audit_counting_cmd(out_dir: &str, a: &CountingArgs) -> Result<i32> {
    let sys = a.sys.to_system()?;
    let grid = AuditGrid {
        q_list: a.q_list.clone(),
        taus: a.taus.clone(),
        theta: a.theta,
        alpha: a.alpha,
        beta: a.beta,
        max_depth: a.max_depth,
    };
    let rep = match crate::par::local_counting_audit_par(&sys, &grid) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return Ok(audit_exit(&e));
        }
    };
    let cfg = json!({
        "sys": a.sys, "q_list": a.q_list, "taus": a.taus,
        "theta": a.theta.to_string(), "alpha": a.alpha, "beta": a.beta,
        "max_depth": a.max_depth,
    });
    let mut em = Emitter::new(out_dir, "audit-counting", &cfg)?;
    let rows: Vec<Vec<String>> = rep
        .cells
        .iter()
        .map(|c| {
            vec![
                c.q.to_string(),
                c.tau.to_string(),
                c.eta.num().to_string(),
                c.eta.den().to_string(),
                c.ball_id.clone(),
                c.ratio_exact.numer().to_string(),
                c.ratio_exact.denom().to_string(),
                c.ratio.to_string(),
                c.err.to_string(),
            ]
        })
        .collect();
    em.csv(
        "",
        &["Q", "tau", "eta_num", "eta_den", "ball_id", "num", "den", "ratio", "err"],
        &rows,
    )?;
    let spread_rows: Vec<Vec<f64>> = rep
        .per_q_spread
        .iter()
        .map(|&(q, s)| vec![(q as f64).ln(), s.ln()])
        .collect();
    em.plotdata("spread", &["log_q", "log_spread"], &spread_rows)?;
    let ratio_rows: Vec<Vec<f64>> = rep
        .cells
        .iter()
        .filter(|c| !c.flagged_empty)
        .map(|c| vec![(c.q as f64).ln(), c.ratio.ln()])
        .collect();
    em.plotdata("ratios", &["log_q", "log_ratio"], &ratio_rows)?;
    em.json(&json!({
        "summary": {
            "min": rep.summary.min, "max": rep.summary.max,
            "median": rep.summary.median, "spread": rep.summary.spread,
            "n_cells": rep.summary.n_cells, "n_flagged": rep.summary.n_flagged,
        },
        "per_q_spread": rep.per_q_spread.iter().map(|&(q, s)| json!({"q": q, "spread": s})).collect::<Vec<_>>(),
    }))?;
    println!(
        "audit-counting: {} cells, ratio in [{:.4}, {:.4}], spread {:.3}",
        rep.summary.n_cells, rep.summary.min, rep.summary.max, rep.summary.spread
    );
    Ok(EXIT_OK)
}

pub fn audit_global_cmd(
    out_dir: &str,
    spec: &SysSpec,
    q: u64,
    eta: Rat,
    theta: Rat,
    max_depth: Option<u32>,
) -> Result<i32> {
    let sys = spec.to_system()?;
    let g = match crate::par::global_counting_audit_par(&sys, q, &eta, &theta, max_depth) {
        Ok(g) => g,
        Err(e) => {
            eprintln!("{e}");
            return Ok(audit_exit(&e));
        }
    };
    let cfg = json!({"sys": spec, "q": q, "eta": eta.to_string(), "theta": theta.to_string(), "max_depth": max_depth});
    let mut em = Emitter::new(out_dir, "audit-global", &cfg)?;
    em.csv(
        "",
        &["Q", "eta_num", "eta_den", "measure", "ratio", "err"],
        &[vec![
            q.to_string(),
            eta.num().to_string(),
            eta.den().to_string(),
            format!("{}/{}", g.measure.numer(), g.measure.denom()),
            g.ratio.to_string(),
            g.err.to_string(),
        ]],
    )?;
    em.json(&json!({"q": q, "ratio": g.ratio, "err": g.err}))?;
    println!("audit-global: Q={q} ratio={:.6} err={:.2e}", g.ratio, g.err);
    Ok(EXIT_OK)
}

pub fn audit_cover_cmd(
    out_dir: &str,
    spec: &SysSpec,
    q: u64,
    eta: Rat,
    theta: Rat,
    depth: Option<u32>,
) -> Result<i32> {
    let sys = spec.to_system()?;
    let c = match audit::covering_count_audit(&sys, q, &eta, &theta, depth) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return Ok(audit_exit(&e));
        }
    };
    let cfg = json!({"sys": spec, "q": q, "eta": eta.to_string(), "theta": theta.to_string(), "depth": depth});
    let mut em = Emitter::new(out_dir, "audit-cover", &cfg)?;
    em.csv(
        "",
        &["Q", "eta_num", "eta_den", "depth", "count", "ratio"],
        &[vec![
            q.to_string(),
            eta.num().to_string(),
            eta.den().to_string(),
            c.depth.to_string(),
            c.count.to_string(),
            c.ratio.to_string(),
        ]],
    )?;
    em.json(&json!({"q": q, "depth": c.depth, "count": c.count, "ratio": c.ratio}))?;
    println!("audit-cover: Q={q} N={} ratio={:.4}", c.count, c.ratio);
    Ok(EXIT_OK)
}

pub struct NondivArgs {
    pub sys: SysSpec,
    pub word: Vec<String>,
    pub q_list: Vec<u64>,
    pub tau: f64,
}

/// The product-profile widths for one `Q`:
/// `eta_1 = Q^-tau / 4`, `eta_2 = 1/(Q eta_1)` (exact product `1/Q`).
pub fn product_etas(q: u64, tau: f64) -> Result<[Rat; 2]> {
    let eta1 = eta_for(q, tau).div(&Rat::from_int(4));
    let eta2 = Rat::new(1, q as i128).div(&eta1);
    Ok([eta1, eta2])
}

pub fn audit_nondiv_cmd(out_dir: &str, a: &NondivArgs) -> Result<i32> {
    let sys = a.sys.to_system()?;
    let word = word_from(&sys, &a.word)?;
    let mut rows = Vec::new();
    let mut plot = Vec::new();
    for &q in &a.q_list {
        let eta = product_etas(q, a.tau)?;
        let nd = match audit::nondivergence_audit(&sys, &word, q, &eta) {
            Ok(n) => n,
            Err(e) => {
                eprintln!("{e}");
                return Ok(audit_exit(&e));
            }
        };
        rows.push(vec![
            q.to_string(),
            eta[0].to_string(),
            eta[1].to_string(),
            nd.ratio.to_string(),
            nd.err.to_string(),
            nd.summand_bound_ok.to_string(),
        ]);
        plot.push(vec![(q as f64).ln(), nd.ratio.ln()]);
    }
    let cfg = json!({"sys": a.sys, "word": a.word, "q_list": a.q_list, "tau": a.tau});
    let mut em = Emitter::new(out_dir, "audit-nondiv", &cfg)?;
    em.csv("", &["Q", "eta1", "eta2", "ratio", "err", "summand_bound_ok"], &rows)?;
    em.plotdata("ratios", &["log_q", "log_ratio"], &plot)?;
    let ratios: Vec<f64> = plot.iter().map(|r| r[1].exp()).collect();
    let s = audit::summarize(&ratios);
    em.json(&json!({"min": s.min, "max": s.max, "spread": s.spread}))?;
    println!("audit-nondiv: ratios in [{:.4}, {:.4}] spread {:.3}", s.min, s.max, s.spread);
    Ok(EXIT_OK)
}

pub fn audit_ubiquity_cmd(out_dir: &str, a: &NondivArgs, seed: u64) -> Result<i32> {
    let sys = a.sys.to_system()?;
    let word = word_from(&sys, &a.word)?;
    let mut rows = Vec::new();
    for &q in &a.q_list {
        let eta = product_etas(q, a.tau)?;
        let ub = match audit::ubiquity_audit(&sys, &word, q, &eta, seed) {
            Ok(u) => u,
            Err(e) => {
                eprintln!("{e}");
                return Ok(audit_exit(&e));
            }
        };
        rows.push(vec![
            q.to_string(),
            eta[0].to_string(),
            eta[1].to_string(),
            ub.c.to_string(),
            ub.ratio_lower.to_string(),
            ub.ratio_exact.map(|x| x.to_string()).unwrap_or_default(),
            ub.saturation.to_string(),
        ]);
    }
    let cfg = json!({"sys": a.sys, "word": a.word, "q_list": a.q_list, "tau": a.tau, "seed": seed});
    let mut em = Emitter::new(out_dir, "audit-ubiquity", &cfg)?;
    em.csv("", &["Q", "eta1", "eta2", "c", "ratio_lower", "ratio_exact", "saturation"], &rows)?;
    em.json(&json!({"rows": rows.len()}))?;
    println!("audit-ubiquity: {} rows", rows.len());
    Ok(EXIT_OK)
}

pub fn fourier_dim_cmd(
    out_dir: &str,
    spec: &SysSpec,
    exp_lo: u32,
    exp_hi: u32,
    tol: f64,
) -> Result<i32> {
    let sys = spec.to_system()?;
    if sys.dim() != 1 {
        bail!("fourier-dim runs on one-dimensional systems");
    }
    let ms: Vec<u64> = (exp_lo..=exp_hi).map(|k| (sys.base() as u64).pow(k)).collect();
    if ms.len() < 3 {
        bail!("need at least 3 checkpoints (exp range too small)");
    }
    let est = fourier::dim_l1_estimate(&sys, &ms, tol);
    let cfg = json!({"sys": spec, "m_list": ms, "tol": tol});
    let mut em = Emitter::new(out_dir, "fourier-dim", &cfg)?;
    let rows: Vec<Vec<String>> = est
        .profile
        .entries
        .iter()
        .enumerate()
        .map(|(i, &(m, s))| {
            let slope = if i > 0 && i - 1 < est.profile.slopes.len() {
                est.profile.slopes[i - 1].to_string()
            } else {
                String::new()
            };
            vec![m.to_string(), s.to_string(), slope]
        })
        .collect();
    em.csv("", &["M", "S", "slope"], &rows)?;
    let plot: Vec<Vec<f64>> =
        est.profile.entries.iter().map(|&(m, s)| vec![(m as f64).ln(), s.max(1e-300).ln()]).collect();
    em.plotdata("l1sum", &["log_m", "log_s"], &plot)?;
    em.json(&json!({
        "estimate": est.estimate, "spread": est.spread, "degenerate": est.degenerate,
        "slopes": est.slopes, "err_bound": est.profile.err_bound,
    }))?;
    println!(
        "fourier-dim: estimate={:.5} spread={:.5}{}",
        est.estimate,
        est.spread,
        if est.degenerate { " (degenerate: flat spectrum)" } else { "" }
    );
    Ok(EXIT_OK)
}

pub fn simplex_check_cmd(
    out_dir: &str,
    d: u32,
    q_max: u64,
    trials: u64,
    seed: u64,
    demonstrate: bool,
) -> Result<i32> {
    let rng = SplitRng::new(seed);
    let policy = if demonstrate { OversizedPolicy::Demonstrate } else { OversizedPolicy::Refuse };
    let mut rows = Vec::new();
    let mut violations = 0u64;
    for t in 0..trials {
        let bx = geometry::random_admissible_box(d, q_max, &rng, t);
        match geometry::simplex_check(q_max, &bx, policy.clone()) {
            SimplexOutcome::Checked { admissible, point_count, coplanar, .. } => {
                if !coplanar {
                    violations += 1;
                }
                rows.push(vec![
                    t.to_string(),
                    admissible.to_string(),
                    point_count.to_string(),
                    coplanar.to_string(),
                ]);
            }
            SimplexOutcome::Oversized { .. } => {
                rows.push(vec![t.to_string(), "false".into(), "".into(), "refused".into()]);
            }
        }
    }
    let cfg = json!({"d": d, "q_max": q_max, "trials": trials, "seed": seed, "demonstrate": demonstrate});
    let mut em = Emitter::new(out_dir, "simplex-check", &cfg)?;
    em.csv("", &["trial", "admissible", "points", "coplanar"], &rows)?;
    em.json(&json!({"trials": trials, "violations": violations}))?;
    println!("simplex-check: {trials} trials, {violations} violations");
    Ok(EXIT_OK)
}

pub fn decay_check_cmd(out_dir: &str, spec: &SysSpec, samples: u64, seed: u64) -> Result<i32> {
    let sys = spec.to_system()?;
    let rep = match geometry::decay_check(&sys, samples, seed) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{e}");
            return Ok(EXIT_CONFIG);
        }
    };
    let cfg = json!({"sys": spec, "samples": samples, "seed": seed});
    let mut em = Emitter::new(out_dir, "decay-check", &cfg)?;
    let rows: Vec<Vec<String>> = rep
        .cells
        .iter()
        .map(|c| vec![c.eps_over_r.to_string(), c.ratio.to_string()])
        .collect();
    em.csv("", &["eps_over_r", "ratio"], &rows)?;
    let plot: Vec<Vec<f64>> =
        rep.cells.iter().map(|c| vec![c.eps_over_r.ln(), c.ratio.max(1e-300).ln()]).collect();
    em.plotdata("ratios", &["log_eps_over_r", "log_ratio"], &plot)?;
    em.json(&json!({"c_emp": rep.c_emp, "trend_slope": rep.trend_slope, "cells": rep.cells.len()}))?;
    println!("decay-check: C_emp={:.4} trend={:.4}", rep.c_emp, rep.trend_slope);
    Ok(EXIT_OK)
}

pub fn cover_check_cmd(out_dir: &str, trials: u64, seed: u64, tau: Rat) -> Result<i32> {
    // random families with the anisotropic exponent profile used by the
    // rectangle construction: u = ((d-1) tau, 1 + tau) at d = 2
    let rng = SplitRng::new(seed);
    let u = [tau, Rat::ONE.add(&tau)];
    let mut rows = Vec::new();
    let mut all_ok = true;
    for t in 0..trials {
        let n = 2 + rng.below(1, t, 24);
        let mut rects = Vec::new();
        for i in 0..n {
            let r = 0.02 + 0.2 * rng.f64(2 + 2 * i, t);
            let h1 = Rat::from_f64_exact(r.powf(tau.to_f64())).unwrap();
            let h2 = Rat::from_f64_exact(r.powf(1.0 + tau.to_f64())).unwrap();
            let c1 = Rat::from_f64_exact(0.25 + 0.5 * rng.f64(100 + 2 * i, t)).unwrap();
            let c2 = Rat::from_f64_exact(0.25 + 0.5 * rng.f64(101 + 2 * i, t)).unwrap();
            rects.push(geometry::Rect { center: vec![c1, c2], half: vec![h1, h2] });
        }
        match geometry::five_r_cover(&rects, &u) {
            Ok(out) => {
                // selected family must be pairwise disjoint
                let mut disjoint = true;
                for (ai, &a) in out.selected.iter().enumerate() {
                    for &b in &out.selected[ai + 1..] {
                        if rects[a].meets_open(&rects[b]) {
                            disjoint = false;
                        }
                    }
                }
                all_ok &= disjoint && out.covered;
                rows.push(vec![
                    t.to_string(),
                    n.to_string(),
                    out.selected.len().to_string(),
                    disjoint.to_string(),
                    out.covered.to_string(),
                ]);
            }
            Err(e) => {
                rows.push(vec![t.to_string(), n.to_string(), String::new(), String::new(), format!("{e}")]);
                all_ok = false;
            }
        }
    }
    let cfg = json!({"trials": trials, "seed": seed, "tau": tau.to_string()});
    let mut em = Emitter::new(out_dir, "cover-check", &cfg)?;
    em.csv("", &["trial", "family", "selected", "disjoint", "covered"], &rows)?;
    em.json(&json!({"trials": trials, "all_ok": all_ok}))?;
    println!("cover-check: {trials} trials, all_ok={all_ok}");
    Ok(EXIT_OK)
}

pub struct BoxDimArgs {
    pub sys: SysSpec,
    pub tau: f64,
    pub theta: Rat,
    pub q0: u64,
    pub q1: u64,
    pub window: Option<(u32, u32)>,
}

pub fn box_dim_cmd(out_dir: &str, a: &BoxDimArgs) -> Result<i32> {
    let sys = a.sys.to_system()?;
    let stage = match limsup::build_finite_stage(a.tau, &a.theta, a.q0, a.q1) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return Ok(audit_exit(&e));
        }
    };
    let est = match crate::par::box_dim_estimate_par(&sys, &stage, a.window) {
        Ok(e) => e,
        Err(e) => {
            eprintln!("{e}");
            return Ok(audit_exit(&e));
        }
    };
    let cfg = json!({
        "sys": a.sys, "tau": a.tau, "theta": a.theta.to_string(),
        "q0": a.q0, "q1": a.q1, "window": a.window,
    });
    let mut em = Emitter::new(out_dir, "box-dim", &cfg)?;
    let rows: Vec<Vec<String>> = est
        .depths
        .iter()
        .zip(&est.counts)
        .map(|(&n, &c)| vec![n.to_string(), c.to_string()])
        .collect();
    em.csv("", &["depth", "count"], &rows)?;
    let plot: Vec<Vec<f64>> = est
        .depths
        .iter()
        .zip(&est.counts)
        .map(|(&n, &c)| vec![n as f64, (c.max(1) as f64).ln()])
        .collect();
    em.plotdata("counts", &["depth", "log_count"], &plot)?;
    em.json(&json!({"slope": est.slope, "residual": est.residual, "counts": est.counts}))?;
    println!("box-dim: slope={:.4} residual={:.4}", est.slope, est.residual);
    Ok(EXIT_OK)
}

#[allow(clippy::too_many_arguments)]
pub fn nu_audit_cmd(
    out_dir: &str,
    spec: &SysSpec,
    ball: &[String],
    q_list: &[u64],
    tau: f64,
    c: Rat,
    s: f64,
    beta: f64,
    samples: u64,
    seed: u64,
) -> Result<i32> {
    let sys = spec.to_system()?;
    let word = word_from(&sys, ball)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &q in q_list {
        let audit = match limsup::nu_restricted_audit(&sys, &word, q, tau, &c, s, beta, samples, seed)
        {
            Ok(a) => a,
            Err(e) => {
                eprintln!("{e}");
                return Ok(audit_exit(&e));
            }
        };
        for cs in &audit.cases {
            rows.push(vec![
                q.to_string(),
                cs.name.into(),
                cs.r_lo.to_string(),
                cs.r_hi.to_string(),
                cs.sup.to_string(),
                cs.cells.to_string(),
            ]);
        }
        summaries.push(json!({
            "q": q,
            "mu_f": audit.mu_f.value_f64(),
            "mu_f_err": audit.mu_f.error_f64(),
            "norm_ratio": audit.norm_ratio,
            "empty": audit.empty,
            "cases": audit.cases.iter().map(|cs| json!({"name": cs.name, "sup": cs.sup})).collect::<Vec<_>>(),
        }));
    }
    let cfg = json!({
        "sys": spec, "ball": ball, "q_list": q_list, "tau": tau,
        "c": c.to_string(), "s": s, "beta": beta, "samples": samples, "seed": seed,
    });
    let mut em = Emitter::new(out_dir, "nu-audit", &cfg)?;
    em.csv("", &["Q", "case", "r_lo", "r_hi", "sup", "cells"], &rows)?;
    em.json(&json!({"per_q": summaries}))?;
    println!("nu-audit: {} rows over {} Q values", rows.len(), q_list.len());
    Ok(EXIT_OK)
}

pub fn product_audit_cmd(
    out_dir: &str,
    spec: &SysSpec,
    ball: &[String],
    q_list: &[u64],
    tau: f64,
    samples: u64,
    seed: u64,
) -> Result<i32> {
    let sys = spec.to_system()?;
    let word = word_from(&sys, ball)?;
    let mut rows = Vec::new();
    let mut summaries = Vec::new();
    for &q in q_list {
        let a = match limsup::product_construction_audit(&sys, &word, q, tau, samples, seed) {
            Ok(a) => a,
            Err(e) => {
                eprintln!("{e}");
                return Ok(audit_exit(&e));
            }
        };
        rows.push(vec![
            q.to_string(),
            a.c.to_string(),
            a.family_size.to_string(),
            a.count.to_string(),
            a.count_ratio.to_string(),
            a.disjoint_ok.to_string(),
            a.covered_ok.to_string(),
            a.ubiquity.ratio_lower.to_string(),
        ]);
        summaries.push(json!({
            "q": q, "count": a.count, "count_ratio": a.count_ratio,
            "disjoint_ok": a.disjoint_ok, "covered_ok": a.covered_ok,
            "ubiquity_lower": a.ubiquity.ratio_lower,
            "holder": a.holder.iter().map(|h| json!({"name": h.name, "sup": h.sup})).collect::<Vec<_>>(),
        }));
    }
    let cfg = json!({
        "sys": spec, "ball": ball, "q_list": q_list, "tau": tau,
        "samples": samples, "seed": seed,
    });
    let mut em = Emitter::new(out_dir, "product-audit", &cfg)?;
    em.csv(
        "",
        &["Q", "c", "family", "count", "count_ratio", "disjoint_ok", "covered_ok", "ubiquity_lower"],
        &rows,
    )?;
    em.json(&json!({"per_q": summaries}))?;
    println!("product-audit: {} Q values", q_list.len());
    Ok(EXIT_OK)
}

pub fn verify_outputs_cmd(out_dir: &str) -> Result<i32> {
    let (checked, bad) = crate::emit::verify_outputs(out_dir)?;
    println!("verify-outputs: {checked} files checked, {bad} mismatches");
    Ok(if bad == 0 { EXIT_OK } else { EXIT_INTERNAL })
}

/// Geometric list `2^lo..2^hi`.
pub fn pow2_list(lo: u32, hi: u32) -> Vec<u64> {
    (lo..=hi).map(|m| 1u64 << m).collect()
}

pub fn big_ratio_str(x: &num_rational::BigRational) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn big_ratio_f64(x: &num_rational::BigRational) -> f64 {
    big_to_f64(x)
}
