//! Runs one scenario and checks every applicable bound against it.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use ddbound::bounds::{
    d_dd_chain, fidelity_floor, lemma2_bound, lemma3_check, pdd_bound_approx, pdd_bound_general,
    phase_decomposition, phi_e_bound_general, unitary_distance, BoundConstants, Check, MARGIN_TOL,
};
use ddbound::decoupling::check_decoupling_condition;
use ddbound::evolution::{
    final_state_distances, run_cycle, run_pdd, CycleResult, Generator, Propagators,
};
use ddbound::linalg::{expm_hermitian, Hermitian, NormKind};
use ddbound::Error;

use crate::config::ScenarioConfig;
use crate::scenario::{build, Scenario};

/// Why a scenario produced no report.
#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid scenario: {0}")]
    Invalid(#[source] anyhow::Error),
    #[error("outside the convergence domain: T*J = {tj:.6} (pi = {pi:.6}); {detail}", pi = PI)]
    Convergence { tj: f64, detail: String },
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 2,
            RunError::Convergence { .. } => 3,
        }
    }
}

/// One inequality, `actual <= bound` (or `actual >= bound` for a floor).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub actual: f64,
    pub bound: f64,
    /// Distance to violation; negative when violated.
    pub margin: f64,
    pub pass: bool,
    /// The bound says nothing beyond the trivial cap.
    pub vacuous: bool,
}

impl CheckRecord {
    pub fn upper(actual: f64, bound: f64, cap: f64) -> Self {
        let margin = bound - actual;
        CheckRecord {
            actual,
            bound,
            margin,
            pass: margin >= -MARGIN_TOL,
            vacuous: bound >= cap,
        }
    }

    pub fn lower(actual: f64, floor: f64) -> Self {
        let margin = actual - floor;
        CheckRecord {
            actual,
            bound: floor,
            margin,
            pass: margin >= -MARGIN_TOL,
            vacuous: floor <= 0.0,
        }
    }

    fn from_check(c: Check, cap: f64) -> Self {
        Self::upper(c.actual, c.bound, cap)
    }
}

/// Every inequality checked on a scenario; `None` when not applicable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Checks {
    /// `||e^{-i Phi} rho e^{i Phi} - rho||_1` for the run's error phase.
    pub lemma2: Option<CheckRecord>,
    /// Effective interaction strength of the first free interval and pulse.
    pub lemma3: Option<CheckRecord>,
    /// `||Phi_pulse|| <= J Delta`.
    pub pulse: Option<CheckRecord>,
    /// `||Phi_undec||` against its closed form.
    pub undecoupled: Option<CheckRecord>,
    /// Second-order segment remainder `||C|| <= N d (tau J)^2`.
    pub remainder: Option<CheckRecord>,
    /// Single-cycle error phase.
    pub phi_e: Option<CheckRecord>,
    /// Error phase of the whole `m`-cycle run.
    pub pdd: Option<CheckRecord>,
    pub d_dd_chain: Option<CheckRecord>,
    pub fidelity_floor: Option<CheckRecord>,
    /// `D_tot <= D_DD + D_id`.
    pub triangle: Option<CheckRecord>,
    /// `D_S <= D_tot`.
    pub partial_trace: Option<CheckRecord>,
}

impl Checks {
    pub const NAMES: [&'static str; 11] = [
        "lemma2",
        "lemma3",
        "pulse",
        "undecoupled",
        "remainder",
        "phi_e",
        "pdd",
        "d_dd_chain",
        "fidelity_floor",
        "triangle",
        "partial_trace",
    ];

    pub fn entries(&self) -> [(&'static str, Option<&CheckRecord>); 11] {
        let v = [
            &self.lemma2,
            &self.lemma3,
            &self.pulse,
            &self.undecoupled,
            &self.remainder,
            &self.phi_e,
            &self.pdd,
            &self.d_dd_chain,
            &self.fidelity_floor,
            &self.triangle,
            &self.partial_trace,
        ];
        std::array::from_fn(|k| (Self::NAMES[k], v[k].as_ref()))
    }

    pub fn all_pass(&self) -> bool {
        self.entries().iter().all(|(_, c)| c.is_none_or(|c| c.pass))
    }

    pub fn failures(&self) -> Vec<&'static str> {
        self.entries()
            .iter()
            .filter(|(_, c)| c.is_some_and(|c| !c.pass))
            .map(|(n, _)| *n)
            .collect()
    }
}

/// Measured quantities of one scenario paired with every bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub label: String,
    pub seed: u64,
    pub n_sys: usize,
    pub n_bath: usize,
    pub n_pulses: usize,
    pub m: usize,
    pub tau: f64,
    pub delta: f64,
    /// Cycle time `T`.
    pub t_cycle: f64,
    pub t_long: f64,
    pub theta: f64,
    pub control_noise: f64,
    pub j: f64,
    pub beta: f64,
    pub tj: f64,
    pub phi_e_norm: f64,
    /// `NaN` when the run's error phase leaves the principal branch.
    pub phi_pdd_norm: f64,
    /// `||U_err(mT) - U_err(T)^m||`.
    pub power_deviation: f64,
    pub phi_pulse_norm: f64,
    pub phi_dec_norm: f64,
    pub phi_undec_norm: f64,
    pub remainder_norm: f64,
    pub d_dd: f64,
    pub d_s: f64,
    pub d_tot: f64,
    pub d_id: f64,
    pub f_q: f64,
    /// Second-order Taylor form of the PDD bound (informational).
    pub pdd_bound_approx: f64,
    pub decoupling_residual: f64,
    pub commutation_residual: f64,
    pub checks: Checks,
    pub all_pass: bool,
    pub notes: String,
}

impl BoundReport {
    /// Flat `(column, value)` pairs in the documented CSV order.
    pub fn csv_fields(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::with_capacity(100);
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("label", self.label.clone());
        put("seed", self.seed.to_string());
        put("n_sys", self.n_sys.to_string());
        put("n_bath", self.n_bath.to_string());
        put("n_pulses", self.n_pulses.to_string());
        put("m", self.m.to_string());
        for (k, v) in [
            ("tau", self.tau),
            ("delta", self.delta),
            ("t_cycle", self.t_cycle),
            ("t_long", self.t_long),
            ("theta", self.theta),
            ("control_noise", self.control_noise),
            ("j", self.j),
            ("beta", self.beta),
            ("tj", self.tj),
            ("phi_e_norm", self.phi_e_norm),
            ("phi_pdd_norm", self.phi_pdd_norm),
            ("power_deviation", self.power_deviation),
            ("phi_pulse_norm", self.phi_pulse_norm),
            ("phi_dec_norm", self.phi_dec_norm),
            ("phi_undec_norm", self.phi_undec_norm),
            ("remainder_norm", self.remainder_norm),
            ("d_dd", self.d_dd),
            ("d_s", self.d_s),
            ("d_tot", self.d_tot),
            ("d_id", self.d_id),
            ("f_q", self.f_q),
            ("pdd_bound_approx", self.pdd_bound_approx),
            ("decoupling_residual", self.decoupling_residual),
            ("commutation_residual", self.commutation_residual),
        ] {
            put(k, fmt_f64(v));
        }
        for (name, check) in self.checks.entries() {
            let cols = match check {
                Some(c) => [
                    fmt_f64(c.actual),
                    fmt_f64(c.bound),
                    fmt_f64(c.margin),
                    c.pass.to_string(),
                    c.vacuous.to_string(),
                ],
                None => Default::default(),
            };
            for (suffix, v) in ["actual", "bound", "margin", "pass", "vacuous"]
                .iter()
                .zip(cols)
            {
                put(&format!("{name}_{suffix}"), v);
            }
        }
        put("all_pass", self.all_pass.to_string());
        put("notes", self.notes.clone());
        out
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// Scenario plus everything computed on it, for callers that need more than
/// the report.
pub struct Run {
    pub scenario: Scenario,
    pub cycle: CycleResult,
    pub propagators: Propagators,
    /// Error phase of the whole run, when on the principal branch.
    pub phi_pdd: Option<Hermitian>,
    pub report: BoundReport,
}

fn classify(e: Error, tj: f64) -> RunError {
    if e.is_convergence() {
        RunError::Convergence {
            tj,
            detail: e.to_string(),
        }
    } else {
        RunError::Invalid(e.into())
    }
}

pub fn run_scenario(
    cfg: &ScenarioConfig,
    consts: &BoundConstants,
) -> Result<BoundReport, RunError> {
    run_scenario_full(cfg, consts).map(|r| r.report)
}

pub fn run_scenario_full(cfg: &ScenarioConfig, consts: &BoundConstants) -> Result<Run, RunError> {
    cfg.validate().map_err(RunError::Invalid)?;
    let sc = build(cfg).map_err(|e| RunError::Invalid(e.into()))?;
    let sim = &sc.sim;
    let strengths = sim.strengths();
    let (j, beta) = (strengths.j, strengths.beta);
    let t = sim.cycle_time();
    let tj = t * j;
    if tj >= PI {
        return Err(RunError::Convergence {
            tj,
            detail: "single-cycle Magnus series not guaranteed".into(),
        });
    }
    let m = cfg.m;
    let mut notes = Vec::new();
    let (cycle, propagators, phi_pdd, power_deviation) = match run_pdd(sim, m) {
        Ok(p) => (p.cycle, p.propagators, Some(p.phi_pdd), p.power_deviation),
        Err(Error::PddBranchCut { .. }) => {
            // The run-level checks need the run's error phase; the cycle-level
            // ones and the state distances do not.
            notes.push(format!(
                "error phase of the {m}-cycle run leaves the principal branch"
            ));
            let cycle = run_cycle(sim).map_err(|e| classify(e, tj))?;
            let total = cycle.u_total.powi(m);
            let secular = cycle.u_sec.powi(m);
            let u_err = secular.adjoint().then_after(&total);
            let power_deviation = unitary_distance(&u_err, &cycle.u_err.powi(m));
            let ideal = sim
                .ideal_gate()
                .tensor(&expm_hermitian(&sim.h_bath, m as f64 * t));
            let propagators = Propagators {
                total,
                secular,
                ideal,
                dim_bath: sim.dim_bath(),
            };
            (cycle, propagators, None, power_deviation)
        }
        Err(e) => return Err(classify(e, tj)),
    };
    let dec = phase_decomposition(&cycle, sim).map_err(|e| RunError::Invalid(e.into()))?;
    let phi_dec_norm = dec.phi_dec.op_norm();
    let decoupling = check_decoupling_condition(&sim.group, &sim.h_err, 1e-10)
        .map_err(|e| RunError::Invalid(e.into()))?;
    if !decoupling.satisfied {
        notes.push("decoupling condition fails; bounds include ||Phi_dec||".into());
    }

    let n = sim.n_pulses();
    let (tau, delta) = (cfg.tau, cfg.delta);
    let delta_total = sim.schedule.pulse_time();
    let phi_e_norm = cycle.phi_e_norm();
    let mut checks = Checks {
        pulse: Some(CheckRecord::from_check(dec.pulse, f64::INFINITY)),
        undecoupled: Some(CheckRecord::from_check(dec.undec, f64::INFINITY)),
        remainder: Some(CheckRecord::upper(
            dec.c_rem.op_norm(),
            n as f64 * consts.d * (tau * j).powi(2),
            f64::INFINITY,
        )),
        phi_e: Some(CheckRecord::upper(
            phi_e_norm,
            phi_e_bound_general(j, beta, t, delta_total, phi_dec_norm, consts),
            PI,
        )),
        ..Checks::default()
    };

    checks.lemma3 = lemma3_segments(&sc).map_err(|e| RunError::Invalid(e.into()))?;

    let rho_s = &sc.rho_s;
    let rho_b = &sc.rho_b;
    let distances = final_state_distances(&propagators, rho_s, rho_b)
        .map_err(|e| RunError::Invalid(e.into()))?;
    let phi_pdd_norm = phi_pdd.as_ref().map_or(f64::NAN, |p| p.op_norm());
    if let Some(phi_pdd) = &phi_pdd {
        let rho0 = sc.rho0();
        let l2 = lemma2_bound(phi_pdd, rho0.matrix(), NormKind::Trace)
            .map_err(|e| RunError::Invalid(e.into()))?;
        let bound = l2
            .refined
            .map_or(l2.main.bound, |r| r.bound.min(l2.main.bound));
        checks.lemma2 = Some(CheckRecord::upper(l2.main.actual, bound, 2.0));
        let t_long = m as f64 * t;
        checks.pdd = Some(CheckRecord::upper(
            phi_pdd_norm,
            pdd_bound_general(j, beta, t_long, m, m * n, delta, phi_dec_norm, consts),
            PI,
        ));
        let chain = d_dd_chain(phi_pdd_norm, distances.d_dd);
        let bound = chain
            .refined
            .map_or(chain.main.bound, |r| r.bound.min(chain.main.bound));
        checks.d_dd_chain = Some(CheckRecord::upper(distances.d_dd, bound, 1.0));
        checks.fidelity_floor = Some(CheckRecord::lower(
            distances.f_q,
            fidelity_floor(distances.d_id, phi_pdd_norm),
        ));
    }
    checks.triangle = Some(CheckRecord::upper(
        distances.d_tot,
        distances.d_dd + distances.d_id,
        1.0,
    ));
    checks.partial_trace = Some(CheckRecord::upper(distances.d_s, distances.d_tot, 1.0));

    let all_pass = checks.all_pass();
    let report = BoundReport {
        label: cfg.label.clone().unwrap_or_default(),
        seed: cfg.seed,
        n_sys: cfg.n_sys,
        n_bath: cfg.n_bath,
        n_pulses: n,
        m,
        tau,
        delta,
        t_cycle: t,
        t_long: m as f64 * t,
        theta: cfg.theta,
        control_noise: cfg.control_noise,
        j,
        beta,
        tj,
        phi_e_norm,
        phi_pdd_norm,
        power_deviation,
        phi_pulse_norm: dec.phi_pulse.op_norm(),
        phi_dec_norm,
        phi_undec_norm: dec.phi_undec.op_norm(),
        remainder_norm: dec.c_rem.op_norm(),
        d_dd: distances.d_dd,
        d_s: distances.d_s,
        d_tot: distances.d_tot,
        d_id: distances.d_id,
        f_q: distances.f_q,
        pdd_bound_approx: pdd_bound_approx(j, beta, t, m, consts),
        decoupling_residual: decoupling.residual,
        commutation_residual: sim.commutation.residual,
        checks,
        all_pass,
        notes: notes.join("; "),
    };
    Ok(Run {
        scenario: sc,
        cycle,
        propagators,
        phi_pdd,
        report,
    })
}

/// Effective interaction strength over the first free interval (and first
/// pulse when pulses have width) against the time-averaged `||H_err||`.
fn lemma3_segments(sc: &Scenario) -> ddbound::Result<Option<CheckRecord>> {
    let sim = &sc.sim;
    let v = Generator::Constant(sim.h_err.clone());
    let mut worst: Option<CheckRecord> = None;
    let mut consider = |h0: Hermitian, span: f64| -> ddbound::Result<()> {
        let c = lemma3_check(&Generator::Constant(h0), &v, span, 1)?;
        let rec = CheckRecord::upper(c.average.actual, c.average.bound, f64::INFINITY);
        if worst.is_none_or(|w| rec.margin < w.margin) {
            worst = Some(rec);
        }
        Ok(())
    };
    if sim.schedule.tau > 0.0 {
        consider(sim.free_generator().sub(&sim.h_err)?, sim.schedule.tau)?;
    }
    if let Some(hp) = sim.pulse_generator(0) {
        consider(hp.sub(&sim.h_err)?, sim.schedule.delta)?;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(text).unwrap()
    }

    #[test]
    fn minimal_scenario_passes() {
        let r = run_scenario(
            &cfg("n_sys = 1\nn_bath = 1\ntau = 0.1\n"),
            &BoundConstants::default(),
        )
        .unwrap();
        assert!(r.all_pass, "{:?}", r.checks.failures());
        assert!(r.checks.d_dd_chain.unwrap().pass);
    }

    #[test]
    fn zero_coupling_gives_zero_distances() {
        let r = run_scenario(
            &cfg("n_sys = 1\nn_bath = 1\ntau = 0.1\nsb_scale = 0.0\n"),
            &BoundConstants::default(),
        )
        .unwrap();
        assert!(r.all_pass);
        for d in [r.d_dd, r.d_s, r.d_tot, r.d_id] {
            assert!(d <= 1e-9, "{d}");
        }
    }

    #[test]
    fn long_cycle_is_a_convergence_error() {
        let err = run_scenario(
            &cfg("n_sys = 1\nn_bath = 1\ntau = 10.0\nsb_scale = 0.5\n"),
            &BoundConstants::default(),
        )
        .unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn csv_columns_are_unique() {
        let r = run_scenario(
            &cfg("n_sys = 1\nn_bath = 1\ntau = 0.1\n"),
            &BoundConstants::default(),
        )
        .unwrap();
        let fields = r.csv_fields();
        let mut names: Vec<_> = fields.iter().map(|(k, _)| k.clone()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), fields.len());
    }

    #[test]
    fn f64_formatting_round_trips() {
        for x in [0.1, 1.0 / 3.0, 1e-300, 6.02e23, -0.0, 2.5] {
            assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
