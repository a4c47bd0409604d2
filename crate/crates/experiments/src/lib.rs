//! Scenario runner, bound reports, scaling sweeps, calibration and
//! verification suites built on `ddbound`.

pub mod calibrate;
pub mod config;
pub mod criteria;
pub mod families;
pub mod report;
pub mod runner;
pub mod scenario;
pub mod suites;
pub mod sweep;

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "DDBOUND_WORKERS";

/// Thread pool sized by `DDBOUND_WORKERS` (default: all cores).
pub fn thread_pool() -> anyhow::Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| anyhow::anyhow!("{WORKERS_ENV} must be a positive integer, got {v:?}"))?;
        anyhow::ensure!(n >= 1, "{WORKERS_ENV} must be at least 1");
        builder = builder.num_threads(n);
    }
    Ok(builder.build()?)
}
