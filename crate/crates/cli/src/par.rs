//! Rayon-parallel wrappers over the core task-split engines.
//!
//! Tasks are pure functions and the stitch step consumes them in task order,
//! so results are byte-identical to the sequential path for any thread count.

use missdig::rat::Rat;
use missdig::stream::{
    count_stitch, count_task, len_chunk_window, len_stitch, len_task, measure_stitch,
    measure_task, Job, MuUnion, Prepared,
};
use num_rational::BigRational;
use rayon::prelude::*;

pub fn measure_union_par(job: &Job, task_levels: u32) -> MuUnion {
    let tasks = job.tasks(task_levels);
    let outs: Vec<_> = tasks.par_iter().map(|t| measure_task(job, t)).collect();
    measure_stitch(job, &tasks, outs)
}

pub fn count_union_par(
    job: &Job,
    task_levels: u32,
    window_lo: u32,
    window_hi: u32,
    cert_depth: u32,
) -> Vec<u64> {
    let tasks = job.tasks(task_levels);
    let outs: Vec<_> = tasks
        .par_iter()
        .map(|t| count_task(job, t, window_lo, window_hi, cert_depth))
        .collect();
    count_stitch(job, &tasks, &outs, window_lo, window_hi)
}

pub fn lebesgue_length_par(
    fams: &[Prepared],
    clip_lo: &Rat,
    clip_hi: &Rat,
    n_chunks: u64,
) -> BigRational {
    let outs: Vec<_> = (0..n_chunks)
        .into_par_iter()
        .map(|i| {
            let (a, b) = len_chunk_window(clip_lo, clip_hi, i, n_chunks);
            len_task(fams, &a, &b)
        })
        .collect();
    len_stitch(fams, outs)
}

/// Applies the thread-count env var (`MISSDIG_THREADS`) if set.
pub fn init_threads() {
    if let Ok(v) = std::env::var("MISSDIG_THREADS") {
        if let Ok(n) = v.trim().parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

use missdig::audit::{self, AuditError, AuditGrid, AuditReport, GlobalAudit};
use missdig::digits::DigitSystem;
use missdig::limsup::{self, BoxDimEstimate, FiniteStageSet};

pub fn local_counting_audit_par(
    sys: &DigitSystem,
    grid: &AuditGrid,
) -> Result<AuditReport, AuditError> {
    audit::local_counting_audit_with(sys, grid, &|job, levels| measure_union_par(job, levels))
}

pub fn global_counting_audit_par(
    sys: &DigitSystem,
    big_q: u64,
    eta: &missdig::rat::Rat,
    theta: &missdig::rat::Rat,
    max_depth: Option<u32>,
) -> Result<GlobalAudit, AuditError> {
    audit::global_counting_audit_with(
        sys,
        big_q,
        eta,
        theta,
        max_depth,
        &|job, levels| measure_union_par(job, levels),
        &|fams, lo, hi, chunks| lebesgue_length_par(fams, lo, hi, chunks),
    )
}

pub fn box_dim_estimate_par(
    sys: &DigitSystem,
    stage: &FiniteStageSet,
    window: Option<(u32, u32)>,
) -> Result<BoxDimEstimate, AuditError> {
    limsup::box_dim_estimate_with(sys, stage, window, &|job, lv, lo, hi, cert| {
        count_union_par(job, lv, lo, hi, cert)
    })
}
