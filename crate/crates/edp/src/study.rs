//! Parallel runner for the method comparison study.

use edp_core::simulate::{aggregate_study, run_replicate, study_tasks, ReplicateResult, StudyConfig, StudyRow};
use rayon::prelude::*;

use crate::error::{CliError, Context, Result};

/// Fits every (scenario, replicate, method) task on a thread pool. Each task
/// derives its own seeds, so results do not depend on the thread count and
/// come back in task order.
pub fn run_parallel(cfg: &StudyConfig, threads: Option<usize>) -> Result<(Vec<StudyRow>, Vec<ReplicateResult>)> {
    cfg.validate().context(|| "study".into())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| CliError::config("threads", e.to_string()))?;
    let tasks = study_tasks(cfg);
    let results: Vec<edp_core::Result<ReplicateResult>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(s, r, m)| run_replicate(cfg, s, r, m))
            .collect()
    });
    let results = results
        .into_iter()
        .zip(&tasks)
        .map(|(res, (s, r, m))| res.context(|| format!("scenario {} replicate {} {m}", cfg.scenarios[*s].name, r + 1)))
        .collect::<Result<Vec<_>>>()?;
    Ok((aggregate_study(cfg, &results), results))
}
