//! Calibration of the bound constants from seeded oracle runs.
//!
//! * `c`: `1.5 x` the largest `||Phi_E - Phi_pulse - Phi_dec - Phi_undec|| / (JT)^2`
//!   over the calibration scenario family.
//! * `d`: `1.5 x` the largest per-segment `||tau H^(i) - M1^(i)|| / (tau J)^2`
//!   over the same family.
//! * `a2`, `a3`: `1.2 x` the largest `||log U - Omega_1|| / (hT)^2` and
//!   `||log U - Omega_1 - Omega_2|| / (hT)^3` over piecewise-constant
//!   generators of constant norm `h` with `hT < 1`.
//! * `c_prime`: intercept of the `m_star(n) ~ c' n^slope` fit of the default
//!   sweep, computed with the calibrated `c`.

use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use ddbound::bounds::{phase_decomposition, BoundConstants};
use ddbound::evolution::{run_cycle, time_ordered_exp, Generator};
use ddbound::linalg::{op_norm, unitary_log};
use ddbound::magnus::magnus_terms;

use crate::families::{
    bound_scenario, per_qubit_family, piecewise_instance, Family, CALIBRATION_SCENARIOS,
};
use crate::scenario::build;
use crate::sweep::{fit_line, m_star};

pub const SCENARIO_SAFETY: f64 = 1.5;
pub const MAGNUS_SAFETY: f64 = 1.2;
pub const PIECEWISE_INSTANCES: u64 = 400;

/// Default sweep used for `c_prime`.
pub const SWEEP_SIZES: [usize; 4] = [1, 2, 3, 4];
pub const SWEEP_TAU: f64 = 0.025;
pub const SWEEP_TARGET: f64 = 0.1;
pub const SWEEP_SB_SCALE: f64 = 0.05;
pub const SWEEP_BATH_NORM: f64 = 0.2;
pub const SWEEP_SEED: u64 = 0;
pub const SWEEP_M_MAX: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed_family: String,
    pub scenarios: u64,
    pub piecewise_instances: u64,
    pub scenario_safety_factor: f64,
    pub magnus_safety_factor: f64,
    pub max_ratio_c: f64,
    pub max_ratio_d: f64,
    pub max_ratio_a2: f64,
    pub max_ratio_a3: f64,
    pub sweep_slope: f64,
    pub date: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub constants: BoundConstants,
    pub provenance: Provenance,
}

/// Per-scenario ratios `(c, d)`.
pub fn scenario_ratios(index: u64) -> Result<(f64, f64)> {
    let cfg = bound_scenario(Family::Calibration, index);
    let sc = build(&cfg)?;
    let cycle = run_cycle(&sc.sim)?;
    let dec = phase_decomposition(&cycle, &sc.sim)?;
    let j = sc.sim.h_err.op_norm();
    let jt = j * sc.sim.cycle_time();
    let tj = j * cfg.tau;
    let c = if jt > 0.0 {
        dec.second_order_residual() / (jt * jt)
    } else {
        0.0
    };
    let d = if tj > 0.0 {
        dec.c_segment_max / (tj * tj)
    } else {
        0.0
    };
    Ok((c, d))
}

/// `(||log U - Omega_1|| / (hT)^2, ||log U - Omega_1 - Omega_2|| / (hT)^3)`.
pub fn magnus_ratios(gen: &Generator, h: f64, t: f64) -> Result<(f64, f64)> {
    let u = time_ordered_exp(gen, 0.0, t, 1);
    let log = unitary_log(&u)?;
    let terms = magnus_terms(gen, t, 16)?;
    let ht = h * t;
    let r1 = op_norm(&(log.matrix() - terms.omega1.matrix()));
    let r2 = op_norm(&(log.matrix() - terms.partial_sum(2).matrix()));
    Ok((r1 / ht.powi(2), r2 / ht.powi(3)))
}

fn max_pair(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0.max(b.0), a.1.max(b.1))
}

/// `(slope, c_prime)` of `m_star(n)` for the default per-qubit family.
pub fn sweep_fit(consts: &BoundConstants) -> Result<(f64, f64)> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for n in SWEEP_SIZES {
        let cfg = per_qubit_family(
            n,
            SWEEP_TAU,
            0.0,
            SWEEP_SB_SCALE,
            SWEEP_BATH_NORM,
            SWEEP_SEED,
        );
        let sc = build(&cfg)?;
        let s = sc.sim.strengths();
        let m = m_star(
            s.j,
            s.beta,
            sc.sim.cycle_time(),
            sc.sim.n_pulses(),
            0.0,
            SWEEP_TARGET,
            SWEEP_M_MAX,
            consts,
        );
        anyhow::ensure!(m > 0, "no cycle fits the error budget at n = {n}");
        xs.push((n as f64).ln());
        ys.push((m as f64).ln());
    }
    let (slope, intercept) = fit_line(&xs, &ys).context("sweep fit needs two sizes")?;
    Ok((slope, intercept.exp()))
}

pub fn calibrate(pool: &rayon::ThreadPool) -> Result<ConstantsFile> {
    let (max_c, max_d) = pool.install(|| {
        (0..CALIBRATION_SCENARIOS)
            .into_par_iter()
            .map(|k| scenario_ratios(k).with_context(|| format!("calibration scenario {k}")))
            .try_reduce(|| (0.0, 0.0), |a, b| Ok(max_pair(a, b)))
    })?;
    let (max_a2, max_a3) = pool.install(|| {
        (0..PIECEWISE_INSTANCES)
            .into_par_iter()
            .map(|k| {
                let (g, h, t) = piecewise_instance(Family::Calibration, k);
                magnus_ratios(&g, h, t).with_context(|| format!("piecewise instance {k}"))
            })
            .try_reduce(|| (0.0, 0.0), |a, b| Ok(max_pair(a, b)))
    })?;
    let mut constants = BoundConstants {
        c: SCENARIO_SAFETY * max_c,
        d: SCENARIO_SAFETY * max_d,
        c_prime: 0.0,
        a2: MAGNUS_SAFETY * max_a2,
        a3: MAGNUS_SAFETY * max_a3,
    };
    let (slope, c_prime) = sweep_fit(&constants)?;
    constants.c_prime = c_prime;
    Ok(ConstantsFile {
        constants,
        provenance: Provenance {
            seed_family: "calibration".into(),
            scenarios: CALIBRATION_SCENARIOS,
            piecewise_instances: PIECEWISE_INSTANCES,
            scenario_safety_factor: SCENARIO_SAFETY,
            magnus_safety_factor: MAGNUS_SAFETY,
            max_ratio_c: max_c,
            max_ratio_d: max_d,
            max_ratio_a2: max_a2,
            max_ratio_a3: max_a3,
            sweep_slope: slope,
            date: crate::report::timestamp(),
        },
    })
}

pub fn write_constants(path: &Path, file: &ConstantsFile) -> Result<()> {
    let text = serde_json::to_string_pretty(file)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Reads either a full constants file or a bare constants object.
pub fn load_constants(path: &Path) -> Result<BoundConstants> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    if let Ok(file) = serde_json::from_str::<ConstantsFile>(&text) {
        return Ok(file.constants);
    }
    serde_json::from_str::<BoundConstants>(&text)
        .with_context(|| format!("parsing {}", path.display()))
}
