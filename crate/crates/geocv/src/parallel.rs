//! Multi-threaded SLOO iterations.

use geocv_core::mesh::{FemMatrices, Mesh};
use geocv_core::model::{Dataset, FitResult};
use geocv_core::sloocv::{SlooConfig, SlooError, SlooPlan, SlooResult};
use rayon::prelude::*;

/// Runs the iterations of `plan` on a pool of `threads` workers.
///
/// Each iteration is a pure function of its index, so the result does not depend on
/// the thread count.
pub fn run_plan(plan: &SlooPlan<'_>, threads: usize) -> SlooResult {
    let iterations = in_pool(threads, || (0..plan.len()).into_par_iter().map(|k| plan.run_iteration(k)).collect());
    plan.finish(iterations)
}

/// Runs `op` on a dedicated pool of `threads` workers (at least one).
pub fn in_pool<R: Send>(threads: usize, op: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build().expect("thread pool").install(op)
}

pub fn run_sloo_parallel(
    dataset: &Dataset,
    mesh: &Mesh,
    fem: &FemMatrices,
    config: &SlooConfig,
    full_fits: Option<&[FitResult]>,
    threads: usize,
) -> Result<SlooResult, SlooError> {
    let plan = match full_fits {
        Some(f) => SlooPlan::with_fits(dataset, mesh, fem, config, f)?,
        None => SlooPlan::new(dataset, mesh, fem, config)?,
    };
    Ok(run_plan(&plan, threads))
}

/// `GEOCV_THREADS` when set and positive, else the available cores.
pub fn default_threads() -> usize {
    std::env::var("GEOCV_THREADS")
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}
