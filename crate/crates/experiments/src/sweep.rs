//! Scaling sweep over register size: how many cycles fit in an error budget.
//!
//! For each grid point the per-qubit-bath family is built at size `n`, its
//! strengths `J(n)` and `beta(n)` are measured, and two cycle counts are
//! found: `m_star`, the largest `m` whose PDD bound stays within the target
//! error, and `m_hat`, the largest `m` whose measured `D_DD` does. Slopes of
//! `log m` against `log n` are then fitted per `(tau, m, replicate)` group.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ddbound::bounds::{pdd_bound, BoundConstants};
use ddbound::evolution::{final_state_distances, run_cycle_with, CycleOptions, CyclePowers};
use ddbound::random::derive_seed;

use crate::config::SweepSpec;
use crate::families::per_qubit_family;
use crate::report::append_row;
use crate::runner::fmt_f64;
use crate::scenario::build;

/// One grid point of the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub tau: f64,
    pub m: usize,
    pub replicate: usize,
}

impl GridPoint {
    fn key(&self) -> (usize, String, usize, usize) {
        (self.n, fmt_f64(self.tau), self.m, self.replicate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub tau: f64,
    pub m: usize,
    pub replicate: usize,
    pub seed: u64,
    pub j: f64,
    pub beta: f64,
    pub t_cycle: f64,
    pub phi_e_norm: f64,
    pub m_star: usize,
    pub m_hat: usize,
    /// PDD bound and measured `D_DD` at this point's `m`.
    pub pdd_bound_at_m: f64,
    pub d_dd_at_m: f64,
    /// `ok`, or the error that stopped this point.
    pub status: String,
}

impl SweepRow {
    const HEADER: [&'static str; 14] = [
        "n",
        "tau",
        "m",
        "replicate",
        "seed",
        "j",
        "beta",
        "t_cycle",
        "phi_e_norm",
        "m_star",
        "m_hat",
        "pdd_bound_at_m",
        "d_dd_at_m",
        "status",
    ];

    fn record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            fmt_f64(self.tau),
            self.m.to_string(),
            self.replicate.to_string(),
            self.seed.to_string(),
            fmt_f64(self.j),
            fmt_f64(self.beta),
            fmt_f64(self.t_cycle),
            fmt_f64(self.phi_e_norm),
            self.m_star.to_string(),
            self.m_hat.to_string(),
            fmt_f64(self.pdd_bound_at_m),
            fmt_f64(self.d_dd_at_m),
            self.status.clone(),
        ]
    }

    fn point(&self) -> GridPoint {
        GridPoint {
            n: self.n,
            tau: self.tau,
            m: self.m,
            replicate: self.replicate,
        }
    }

    fn ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Fitted scaling of one `(tau, m, replicate)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFit {
    pub tau: f64,
    pub m: usize,
    pub replicate: usize,
    pub points: usize,
    /// Slope of `log m_star` against `log n`.
    pub slope_m_star: Option<f64>,
    pub slope_m_hat: Option<f64>,
    /// `exp` of the `m_star` fit's intercept: `m_star ~ c' n^slope`.
    pub c_prime: Option<f64>,
    /// `max_n max(r, 1/r)` with `r = J(n) / (n J(1))`.
    pub j_linearity: Option<f64>,
    /// `ok` or `not-applicable` (fewer than two sizes).
    pub status: String,
}

pub fn grid(spec: &SweepSpec) -> Vec<GridPoint> {
    let mut out = Vec::new();
    for &n in &spec.n_sys {
        for &tau in &spec.tau {
            for &m in &spec.m {
                for replicate in 0..spec.replicates {
                    out.push(GridPoint {
                        n,
                        tau,
                        m,
                        replicate,
                    });
                }
            }
        }
    }
    out
}

/// Largest `m` in `1..=m_max` with `ok(m)`, assuming `ok` is monotone
/// (true up to some point, false after). Returns 0 when `ok(1)` fails.
pub fn largest_satisfying(m_max: usize, mut ok: impl FnMut(usize) -> bool) -> usize {
    if m_max == 0 || !ok(1) {
        return 0;
    }
    let mut lo = 1;
    let mut hi = loop {
        let next = (lo * 2).min(m_max);
        if next == lo {
            return lo;
        }
        if !ok(next) {
            break next;
        }
        lo = next;
    };
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Largest `m` whose PDD bound over `m` cycles of length `t_cycle` with
/// `n_pulses` pulses each stays within `target`.
#[allow(clippy::too_many_arguments)]
pub fn m_star(
    j: f64,
    beta: f64,
    t_cycle: f64,
    n_pulses: usize,
    delta: f64,
    target: f64,
    m_max: usize,
    consts: &BoundConstants,
) -> usize {
    largest_satisfying(m_max, |m| {
        pdd_bound(j, beta, m as f64 * t_cycle, m, m * n_pulses, delta, consts) <= target
    })
}

pub fn evaluate_point(spec: &SweepSpec, p: GridPoint, consts: &BoundConstants) -> SweepRow {
    let f = &spec.fixed;
    let seed = derive_seed(f.seed, p.replicate as u64);
    let mut row = SweepRow {
        n: p.n,
        tau: p.tau,
        m: p.m,
        replicate: p.replicate,
        seed,
        j: f64::NAN,
        beta: f64::NAN,
        t_cycle: f64::NAN,
        phi_e_norm: f64::NAN,
        m_star: 0,
        m_hat: 0,
        pdd_bound_at_m: f64::NAN,
        d_dd_at_m: f64::NAN,
        status: "ok".into(),
    };
    if let Err(e) = fill_point(spec, p, seed, consts, &mut row) {
        row.status = format!("error: {e:#}");
    }
    row
}

fn fill_point(
    spec: &SweepSpec,
    p: GridPoint,
    seed: u64,
    consts: &BoundConstants,
    row: &mut SweepRow,
) -> Result<()> {
    let f = &spec.fixed;
    let mut cfg = per_qubit_family(p.n, p.tau, f.delta, f.sb_scale, f.bath_norm, seed);
    cfg.m = p.m;
    let sc = build(&cfg)?;
    let sim = &sc.sim;
    let s = sim.strengths();
    let t = sim.cycle_time();
    let n_pulses = sim.n_pulses();
    row.j = s.j;
    row.beta = s.beta;
    row.t_cycle = t;
    row.m_star = m_star(
        s.j,
        s.beta,
        t,
        n_pulses,
        f.delta,
        spec.target_error,
        spec.m_max,
        consts,
    );
    row.pdd_bound_at_m = pdd_bound(
        s.j,
        s.beta,
        p.m as f64 * t,
        p.m,
        p.m * n_pulses,
        f.delta,
        consts,
    );
    let opts = CycleOptions {
        segment_phases: false,
        require_commutation: true,
    };
    let cycle = run_cycle_with(sim, opts)?;
    row.phi_e_norm = cycle.phi_e_norm();
    // The family carries no gate, so one cycle's propagators serve every m.
    let powers = CyclePowers::new(sim, &cycle)?;
    let d_dd = |m: usize| -> Result<f64> {
        Ok(final_state_distances(&powers.propagators(m), &sc.rho_s, &sc.rho_b)?.d_dd)
    };
    row.d_dd_at_m = d_dd(p.m)?;
    let mut failure = None;
    row.m_hat = largest_satisfying(spec.m_max, |m| match d_dd(m) {
        Ok(d) => d <= spec.target_error,
        Err(e) => {
            failure.get_or_insert(e);
            false
        }
    });
    if let Some(e) = failure {
        return Err(e.context("measuring D_DD for m_hat"));
    }
    Ok(())
}

/// Least-squares line `y = slope x + intercept`; `None` for fewer than two
/// distinct `x`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Log-log slope over the points with a positive count.
fn log_fit(ns: &[usize], counts: &[usize]) -> Option<(f64, f64)> {
    let (xs, ys): (Vec<f64>, Vec<f64>) = ns
        .iter()
        .zip(counts)
        .filter(|(_, &c)| c > 0)
        .map(|(&n, &c)| ((n as f64).ln(), (c as f64).ln()))
        .unzip();
    fit_line(&xs, &ys)
}

/// `(tau, m, replicate)`; `tau` keyed by its exact text.
type GroupKey = (String, usize, usize);

pub fn fit(rows: &[SweepRow]) -> Vec<SweepFit> {
    let mut groups: Vec<(GroupKey, Vec<&SweepRow>)> = Vec::new();
    for r in rows.iter().filter(|r| r.ok()) {
        let key = (fmt_f64(r.tau), r.m, r.replicate);
        match groups.iter_mut().find(|(k, _)| *k == key) {
            Some((_, v)) => v.push(r),
            None => groups.push((key, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(_, mut g)| {
            g.sort_by_key(|r| r.n);
            g.dedup_by_key(|r| r.n);
            let ns: Vec<usize> = g.iter().map(|r| r.n).collect();
            let star = log_fit(&ns, &g.iter().map(|r| r.m_star).collect::<Vec<_>>());
            let hat = log_fit(&ns, &g.iter().map(|r| r.m_hat).collect::<Vec<_>>());
            let j1 = g.iter().find(|r| r.n == 1).map(|r| r.j);
            let j_linearity = j1.filter(|&j1| j1 > 0.0 && g.len() > 1).map(|j1| {
                g.iter()
                    .map(|r| r.j / (r.n as f64 * j1))
                    .map(|q| q.max(1.0 / q))
                    .fold(1.0, f64::max)
            });
            SweepFit {
                tau: g[0].tau,
                m: g[0].m,
                replicate: g[0].replicate,
                points: g.len(),
                slope_m_star: star.map(|s| s.0),
                slope_m_hat: hat.map(|s| s.0),
                c_prime: star.map(|s| s.1.exp()),
                j_linearity,
                status: if star.is_some() {
                    "ok".into()
                } else {
                    "not-applicable".into()
                },
            }
        })
        .collect()
}

pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub fits: Vec<SweepFit>,
    pub computed: usize,
    pub skipped: usize,
    pub points_csv: PathBuf,
    pub fit_csv: PathBuf,
}

fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let mut r =
        csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    r.deserialize()
        .collect::<Result<Vec<SweepRow>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

/// Runs every grid point not already present in `out_dir/sweep.csv`,
/// appending rows in grid order, then rewrites `out_dir/sweep_fit.csv`.
pub fn run_sweep(
    spec: &SweepSpec,
    out_dir: &Path,
    consts: &BoundConstants,
    pool: &rayon::ThreadPool,
) -> Result<SweepOutcome> {
    std::fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    let points_csv = out_dir.join("sweep.csv");
    let fit_csv = out_dir.join("sweep_fit.csv");
    let existing = read_rows(&points_csv)?;
    let done: HashSet<_> = existing.iter().map(|r| r.point().key()).collect();
    let all = grid(spec);
    let pending: Vec<GridPoint> = all
        .iter()
        .copied()
        .filter(|p| !done.contains(&p.key()))
        .collect();
    let skipped = all.len() - pending.len();
    let chunk = pool.current_num_threads().max(1) * 2;
    let mut fresh = Vec::with_capacity(pending.len());
    for batch in pending.chunks(chunk) {
        let rows: Vec<SweepRow> = pool.install(|| {
            batch
                .par_iter()
                .map(|&p| evaluate_point(spec, p, consts))
                .collect()
        });
        for r in &rows {
            let rec = r.record();
            append_row(
                &points_csv,
                &SweepRow::HEADER,
                rec.iter().map(String::as_str),
            )?;
        }
        fresh.extend(rows);
    }
    let computed = fresh.len();
    let mut rows = existing;
    rows.extend(fresh);
    let fits = fit(&rows);
    let mut w = csv::Writer::from_path(&fit_csv)
        .with_context(|| format!("writing {}", fit_csv.display()))?;
    for f in &fits {
        w.serialize(f)?;
    }
    w.flush()?;
    Ok(SweepOutcome {
        rows,
        fits,
        computed,
        skipped,
        points_csv,
        fit_csv,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn largest_satisfying_finds_threshold() {
        for threshold in [0usize, 1, 2, 3, 7, 8, 100, 1000] {
            assert_eq!(largest_satisfying(1 << 12, |m| m <= threshold), threshold);
        }
        assert_eq!(largest_satisfying(50, |_| true), 50);
    }

    #[test]
    fn m_star_is_linear_budget() {
        let c = BoundConstants::default();
        let per_cycle = pdd_bound(0.3, 0.5, 0.1, 1, 4, 0.0, &c);
        let m = m_star(0.3, 0.5, 0.1, 4, 0.0, 0.1, 1 << 20, &c);
        assert_eq!(m, (0.1 / per_cycle).floor() as usize);
    }

    #[test]
    fn line_fit_recovers_power_law() {
        let ns = [1usize, 2, 3, 4];
        let counts: Vec<usize> = ns
            .iter()
            .map(|&n| (1.0e6 / (n * n) as f64) as usize)
            .collect();
        let (slope, intercept) = log_fit(&ns, &counts).unwrap();
        assert!((slope + 2.0).abs() < 1e-6);
        assert!((intercept.exp() - 1.0e6).abs() < 1.0);
        assert!(log_fit(&[2], &[5]).is_none());
    }
}
