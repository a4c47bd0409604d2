//! Exact propagation of decoupling cycles and periodic sequences.
//!
//! One cycle consists of `N` segments; segment `i` is a free interval of
//! length `tau` followed by pulse `i` of width `delta` (an instantaneous kick
//! when `delta = 0`). The logic gate `exp(-i theta R)` is spread evenly over
//! the free intervals of all `m` cycles of a run, so each free interval
//! carries the constant control `lambda R` with `lambda = theta / (m N tau)`.
//!
//! The secular frame `S(t) = exp(-i Lambda(t) R) ⊗ exp(-i t H_B)` tracks the
//! accumulated control angle `Lambda(t)`. The error propagator is
//! `U_err = S(T)^dag U(T)`, and `Phi_E = i log U_err`.

mod switched;

pub use switched::{
    propagate_switched, time_ordered_exp, Generator, HamiltonianFn, Segment, SegmentGenerator,
    SwitchedHamiltonian,
};

use nalgebra::DVector;

use crate::decoupling::{
    check_commutation, group_from_pulses, ConditionCheck, DecouplingGroup, PulseSchedule,
};
use crate::error::{Error, Result};
use crate::linalg::{
    c, expm_hermitian, fidelity, identity, op_norm, real, tensor, trace_distance, unitary_log,
    CMat, DensityMatrix, Hermitian, SpectralUnitary, Unitary, C64,
};
use crate::model::{GateSpec, StrengthReport, SystemBathSplit};

/// Tolerance for the commutation condition between pulses and the gate.
pub const COMMUTATION_TOL: f64 = 1e-10;

/// Everything needed to propagate one run.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub n_sys: usize,
    pub n_bath: usize,
    pub h_err: Hermitian,
    pub h_bath: Hermitian,
    /// The whole-run gate; `theta` is spread over `m` cycles.
    pub gate: GateSpec,
    pub schedule: PulseSchedule,
    pub group: DecouplingGroup,
    pub m: usize,
    /// Relative over-rotation of the applied gate angle.
    pub control_noise: f64,
    pub ctrl_during_pulses: bool,
    pub commutation: ConditionCheck,
    frame: SecularFrame,
}

impl Simulation {
    pub fn new(
        split: &SystemBathSplit,
        gate: GateSpec,
        schedule: PulseSchedule,
        m: usize,
        control_noise: f64,
        ctrl_during_pulses: bool,
    ) -> Result<Self> {
        let ds = split.dim_sys();
        if gate.r.dim() != ds {
            return Err(Error::DimensionMismatch {
                left: gate.r.dim(),
                right: ds,
            });
        }
        if schedule.dim() != ds {
            return Err(Error::DimensionMismatch {
                left: schedule.dim(),
                right: ds,
            });
        }
        if m == 0 {
            return Err(Error::InvalidParameter(
                "cycle count m must be at least 1".into(),
            ));
        }
        if !control_noise.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "control noise {control_noise}"
            )));
        }
        let gate_time = if ctrl_during_pulses {
            schedule.tau + schedule.delta
        } else {
            schedule.tau
        };
        if gate.theta != 0.0 && gate.r.op_norm() > 0.0 && gate_time == 0.0 {
            return Err(Error::InvalidSchedule(
                "a nonzero gate needs time to act (tau = 0)".into(),
            ));
        }
        let group = group_from_pulses(&schedule)?;
        let areas: Vec<Hermitian> = schedule.pulses.iter().map(|p| p.area.clone()).collect();
        let commutation = check_commutation(&areas, &gate.r, COMMUTATION_TOL)?;
        let frame = SecularFrame::new(&gate.r, &split.h_bath);
        Ok(Simulation {
            n_sys: split.n_sys,
            n_bath: split.n_bath,
            h_err: split.h_err.clone(),
            h_bath: split.h_bath.clone(),
            gate,
            schedule,
            group,
            m,
            control_noise,
            ctrl_during_pulses,
            commutation,
            frame,
        })
    }

    pub fn with_m(&self, m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "cycle count m must be at least 1".into(),
            ));
        }
        Ok(Simulation { m, ..self.clone() })
    }

    pub fn dim_sys(&self) -> usize {
        1 << self.n_sys
    }

    pub fn dim_bath(&self) -> usize {
        1 << self.n_bath
    }

    pub fn dim(&self) -> usize {
        self.dim_sys() * self.dim_bath()
    }

    pub fn n_pulses(&self) -> usize {
        self.schedule.n()
    }

    pub fn cycle_time(&self) -> f64 {
        self.schedule.cycle_time()
    }

    /// Applied gate angle per cycle, including the over-rotation.
    pub fn cycle_angle(&self) -> f64 {
        self.gate.theta * (1.0 + self.control_noise) / self.m as f64
    }

    fn ctrl_time_per_segment(&self) -> f64 {
        if self.ctrl_during_pulses {
            self.schedule.tau + self.schedule.delta
        } else {
            self.schedule.tau
        }
    }

    /// Control rate `lambda` multiplying `R`.
    pub fn control_rate(&self) -> f64 {
        let t = self.ctrl_time_per_segment();
        if t == 0.0 {
            0.0
        } else {
            self.cycle_angle() / (self.n_pulses() as f64 * t)
        }
    }

    /// Control Hamiltonian while it is on.
    pub fn h_ctrl(&self) -> Hermitian {
        self.gate.r.scale(self.control_rate())
    }

    /// The split with the control Hamiltonian of a free interval.
    pub fn split(&self) -> SystemBathSplit {
        SystemBathSplit::new(
            self.n_sys,
            self.n_bath,
            self.h_ctrl(),
            self.h_err.clone(),
            self.h_bath.clone(),
        )
        .expect("dimensions validated at construction")
    }

    /// `J = ||H_err||` and `beta = sup_t ||H_sec(t)||`. With the control off
    /// during pulses the secular Hamiltonian switches between
    /// `lambda R + H_B` and `H_B`, and the supremum covers both.
    pub fn strengths(&self) -> StrengthReport {
        let j = self.h_err.op_norm();
        let on = self.frame.norm(self.control_rate(), 1.0);
        let beta = if self.ctrl_during_pulses || self.schedule.delta == 0.0 {
            on
        } else {
            on.max(self.h_bath.op_norm())
        };
        StrengthReport { j, beta }
    }

    /// Accumulated control angle at time `t` within a cycle.
    pub fn control_angle(&self, t: f64) -> f64 {
        let lambda = self.control_rate();
        let period = self.schedule.tau + self.schedule.delta;
        if self.ctrl_during_pulses || period == 0.0 {
            return lambda * t;
        }
        let k = (t / period).floor();
        let rem = t - k * period;
        lambda * (k * self.schedule.tau + rem.min(self.schedule.tau))
    }

    /// `S(t)` within one cycle.
    pub fn secular_at(&self, t: f64) -> Unitary {
        self.frame.unitary(self.control_angle(t), t)
    }

    /// `exp(-i theta_cycle R) ⊗ exp(-i T H_B)`.
    pub fn secular_cycle(&self) -> Unitary {
        self.frame.unitary(self.cycle_angle(), self.cycle_time())
    }

    fn embed_sys(&self, a: &CMat) -> CMat {
        tensor(a, &identity(self.dim_bath()))
    }

    /// `lambda R ⊗ I + I ⊗ H_B + H_err`.
    pub fn free_generator(&self) -> Hermitian {
        Hermitian::from_computed(
            self.embed_sys(self.h_ctrl().matrix()) + self.bath_embedded() + self.h_err.matrix(),
        )
        .expect("sum of Hermitian terms")
    }

    fn bath_embedded(&self) -> CMat {
        tensor(&identity(self.dim_sys()), self.h_bath.matrix())
    }

    /// Generator during pulse `i` (requires `delta > 0`).
    pub fn pulse_generator(&self, i: usize) -> Option<Hermitian> {
        let hp = self.schedule.pulses[i].generator()?;
        let mut h = self.embed_sys(hp.matrix()) + self.bath_embedded() + self.h_err.matrix();
        if self.ctrl_during_pulses {
            h += self.embed_sys(self.h_ctrl().matrix());
        }
        Some(Hermitian::from_computed(h).expect("sum of Hermitian terms"))
    }

    /// One cycle as a switched Hamiltonian; kicks cannot be represented, so
    /// `delta > 0` or `tau`-only schedules with trivial pulses are required.
    pub fn switched_cycle(&self) -> Result<SwitchedHamiltonian> {
        let (tau, delta) = (self.schedule.tau, self.schedule.delta);
        let free = self.free_generator();
        let mut segments = Vec::new();
        let mut t = 0.0;
        for i in 0..self.n_pulses() {
            if tau > 0.0 {
                segments.push(Segment::constant(t, t + tau, free.clone()));
                t += tau;
            }
            match self.pulse_generator(i) {
                Some(h) => {
                    segments.push(Segment::constant(t, t + delta, h));
                    t += delta;
                }
                None => {
                    let trivial = op_norm(
                        &(self.schedule.pulses[i].unitary().matrix() - identity(self.dim_sys())),
                    );
                    if trivial > 1e-12 {
                        return Err(Error::InvalidSchedule(
                            "instantaneous pulses have no switched-Hamiltonian form".into(),
                        ));
                    }
                }
            }
        }
        SwitchedHamiltonian::new(segments, self.dim())
    }

    /// Interaction-picture generator `H_DD(t) + S(t)^dag H_err S(t)`, whose
    /// time-ordered exponential over one cycle is `U_err`. Requires `delta > 0`.
    pub fn interaction_generator(&self) -> Result<Generator> {
        if self.schedule.delta == 0.0 {
            return Err(Error::InvalidSchedule(
                "interaction-picture generator needs finite pulse widths".into(),
            ));
        }
        let sim = self.clone();
        let (tau, delta) = (self.schedule.tau, self.schedule.delta);
        let period = tau + delta;
        let pulses: Vec<CMat> = self
            .schedule
            .pulses
            .iter()
            .map(|p| self.embed_sys(p.generator().expect("delta > 0").matrix()))
            .collect();
        let mut breakpoints = Vec::new();
        for i in 0..self.n_pulses() {
            breakpoints.push(i as f64 * period + tau);
            breakpoints.push((i + 1) as f64 * period);
        }
        breakpoints.pop();
        let h_err_w = self.frame.to_eigenbasis(self.h_err.matrix());
        Ok(Generator::function(self.dim(), breakpoints, move |t| {
            let k = ((t / period).floor() as usize).min(pulses.len() - 1);
            let in_pulse = t - k as f64 * period >= tau;
            let rotated = sim.frame.out_of_eigenbasis(&sim.frame.rotate_inverse(
                &h_err_w,
                sim.control_angle(t),
                t,
            ));
            let h = if in_pulse {
                rotated + &pulses[k]
            } else {
                rotated
            };
            Hermitian::from_computed(h).expect("Hermitian integrand")
        }))
    }

    pub fn ideal_gate(&self) -> Unitary {
        self.gate.target()
    }
}

/// Secular frame in the joint eigenbasis `W = V_R ⊗ V_B` of `R ⊗ I` and
/// `I ⊗ H_B`, where every secular propagator is diagonal.
#[derive(Debug, Clone)]
struct SecularFrame {
    w: CMat,
    r: DVector<f64>,
    b: DVector<f64>,
}

impl SecularFrame {
    fn new(r: &Hermitian, h_bath: &Hermitian) -> Self {
        let (r_vals, vr) = r.eigh();
        let (b_vals, vb) = h_bath.eigh();
        SecularFrame {
            w: tensor(&vr, &vb),
            r: r_vals,
            b: b_vals,
        }
    }

    fn dim(&self) -> usize {
        self.r.len() * self.b.len()
    }

    /// Eigenvalues of `angle R ⊗ I + t I ⊗ H_B`.
    fn spectrum(&self, angle: f64, t: f64) -> DVector<f64> {
        let nb = self.b.len();
        DVector::from_fn(self.dim(), |k, _| {
            angle * self.r[k / nb] + t * self.b[k % nb]
        })
    }

    fn norm(&self, angle: f64, t: f64) -> f64 {
        self.spectrum(angle, t)
            .iter()
            .fold(0.0, |m, x| f64::max(m, x.abs()))
    }

    fn unitary(&self, angle: f64, t: f64) -> Unitary {
        let d = self.spectrum(angle, t).map(|x| C64::from_polar(1.0, -x));
        Unitary::from_product(&self.w * CMat::from_diagonal(&d) * self.w.adjoint())
    }

    fn to_eigenbasis(&self, a: &CMat) -> CMat {
        self.w.adjoint() * a * &self.w
    }

    fn out_of_eigenbasis(&self, a: &CMat) -> CMat {
        &self.w * a * self.w.adjoint()
    }

    /// `S^dag A S` for `A` given in the eigenbasis.
    fn rotate_inverse(&self, a_w: &CMat, angle: f64, t: f64) -> CMat {
        let s = self.spectrum(angle, t);
        CMat::from_fn(a_w.nrows(), a_w.ncols(), |k, l| {
            a_w[(k, l)] * C64::from_polar(1.0, s[k] - s[l])
        })
    }
}

/// What to compute besides the cycle propagators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CycleOptions {
    /// Per-segment effective Hamiltonians and first-order terms.
    pub segment_phases: bool,
    /// Fail instead of proceeding when pulses do not commute with the gate.
    pub require_commutation: bool,
}

impl Default for CycleOptions {
    fn default() -> Self {
        CycleOptions {
            segment_phases: true,
            require_commutation: true,
        }
    }
}

/// Error-frame data of one segment.
#[derive(Debug, Clone)]
pub struct SegmentPhases {
    /// `H_err^(i)` of the free interval.
    pub free: Hermitian,
    /// Exact first-order term `int S^dag H_err S dt` over the free interval.
    pub free_first_order: Hermitian,
    /// `H_err^{P_i}`; `None` for a kick.
    pub pulse: Option<Hermitian>,
}

#[derive(Debug, Clone)]
pub struct CycleResult {
    pub u_total: Unitary,
    pub u_sec: Unitary,
    pub u_err: Unitary,
    pub phi_e: Hermitian,
    /// Empty unless requested through [`CycleOptions`].
    pub segments: Vec<SegmentPhases>,
    pub tau: f64,
    pub delta: f64,
}

impl CycleResult {
    pub fn phi_e_norm(&self) -> f64 {
        self.phi_e.op_norm()
    }
}

pub fn run_cycle(sim: &Simulation) -> Result<CycleResult> {
    run_cycle_with(sim, CycleOptions::default())
}

pub fn run_cycle_with(sim: &Simulation, opts: CycleOptions) -> Result<CycleResult> {
    if opts.require_commutation && !sim.commutation.satisfied {
        return Err(Error::CommutationViolated(sim.commutation.residual));
    }
    let (tau, delta) = (sim.schedule.tau, sim.schedule.delta);
    let n = sim.n_pulses();
    let free = (tau > 0.0).then(|| expm_hermitian(&sim.free_generator(), tau));
    let mut pulse_props: Vec<Unitary> = Vec::with_capacity(n);
    for i in 0..n {
        let u = match sim.pulse_generator(i) {
            Some(h) => {
                // Identical pulses share one exponential.
                let prev =
                    (0..i).find(|&k| sim.schedule.pulses[k].area == sim.schedule.pulses[i].area);
                match prev {
                    Some(k) => pulse_props[k].clone(),
                    None => expm_hermitian(&h, delta),
                }
            }
            None => Unitary::from_product(sim.embed_sys(sim.schedule.pulses[i].unitary().matrix())),
        };
        pulse_props.push(u);
    }
    let mut u_total = Unitary::identity(sim.dim());
    for p in &pulse_props {
        if let Some(f) = &free {
            u_total = f.then_after(&u_total);
        }
        u_total = p.then_after(&u_total);
    }
    let u_sec = sim.secular_cycle();
    let u_err = u_sec.adjoint().then_after(&u_total);
    let phi_e = unitary_log(&u_err)?;
    let segments = if opts.segment_phases {
        segment_phases(sim, free.as_ref(), &pulse_props)?
    } else {
        Vec::new()
    };
    Ok(CycleResult {
        u_total,
        u_sec,
        u_err,
        phi_e,
        segments,
        tau,
        delta,
    })
}

fn segment_phases(
    sim: &Simulation,
    free: Option<&Unitary>,
    pulses: &[Unitary],
) -> Result<Vec<SegmentPhases>> {
    let (tau, delta) = (sim.schedule.tau, sim.schedule.delta);
    let period = tau + delta;
    let frame = &sim.frame;
    let h_err_w = frame.to_eigenbasis(sim.h_err.matrix());
    let lambda = sim.control_rate();
    // First-order term in the eigenbasis of K = lambda R + H_B, before the
    // frame rotation at the segment start.
    let k = frame.spectrum(lambda, 1.0);
    let m1_local = CMat::from_fn(h_err_w.nrows(), h_err_w.ncols(), |a, b| {
        h_err_w[(a, b)] * real(tau) * phase_integral(tau * (k[a] - k[b]))
    });
    let dim = sim.dim();
    let mut out = Vec::with_capacity(sim.n_pulses());
    for (i, pulse) in pulses.iter().enumerate() {
        let t0 = i as f64 * period;
        let s0 = frame.unitary(sim.control_angle(t0), t0);
        let t1 = t0 + tau;
        let s1 = frame.unitary(sim.control_angle(t1), t1);
        let (free_h, free_m1) = if tau > 0.0 {
            let y = s1
                .adjoint()
                .then_after(free.expect("tau > 0"))
                .then_after(&s0);
            let h = unitary_log(&y)?.scale(1.0 / tau);
            let a0 = sim.control_angle(t0);
            let m1 = frame.out_of_eigenbasis(&frame.rotate_inverse(&m1_local, a0, t0));
            (h, Hermitian::from_computed(m1)?)
        } else {
            (Hermitian::zeros(dim), Hermitian::zeros(dim))
        };
        let pulse_h = if delta > 0.0 {
            let t2 = t1 + delta;
            let s2 = frame.unitary(sim.control_angle(t2), t2);
            let ideal =
                Unitary::from_product(sim.embed_sys(sim.schedule.pulses[i].unitary().matrix()));
            let x = ideal
                .adjoint()
                .then_after(&s2.adjoint())
                .then_after(pulse)
                .then_after(&s1);
            Some(unitary_log(&x)?.scale(1.0 / delta))
        } else {
            None
        };
        out.push(SegmentPhases {
            free: free_h,
            free_first_order: free_m1,
            pulse: pulse_h,
        });
    }
    Ok(out)
}

/// `(e^{ix} - 1) / (ix)`, by series near zero.
fn phase_integral(x: f64) -> C64 {
    if x.abs() < 1e-4 {
        c(1.0 - x * x / 6.0, x / 2.0 - x * x * x / 24.0)
    } else {
        (C64::from_polar(1.0, x) - 1.0) / c(0.0, x)
    }
}

/// `sum_{n <= order} (i^n / n!) (int_a^{a+tau} t^n dt) ad_K^n(H)`: the power
/// series of `int_a^{a+tau} e^{itK} H e^{-itK} dt` for a constant secular
/// Hamiltonian `K`. Diagnostic only; the exact value comes from the
/// eigenbasis.
pub fn first_order_series(k: &CMat, h: &CMat, a: f64, tau: f64, order: usize) -> CMat {
    let mut nested = h.clone();
    let mut sum = h * real(tau);
    let mut coeff = C64::new(1.0, 0.0);
    let b = a + tau;
    for n in 1..=order {
        nested = crate::linalg::commutator(k, &nested);
        coeff *= c(0.0, 1.0) / real(n as f64);
        let integral = (b.powi(n as i32 + 1) - a.powi(n as i32 + 1)) / (n + 1) as f64;
        sum += &nested * (coeff * real(integral));
    }
    sum
}

/// Tail bound for [`first_order_series`]:
/// `J sum_{n > order} (2 ||K|| )^n / n! * int_a^{a+tau} t^n dt`.
pub fn first_order_series_remainder(j: f64, k_norm: f64, a: f64, tau: f64, order: usize) -> f64 {
    let b = a + tau;
    let mut total = 0.0;
    let mut fact = (1..=order).fold(1.0, |f, k| f * k as f64);
    for n in order + 1..order + 60 {
        fact *= n as f64;
        let integral = (b.powi(n as i32 + 1) - a.powi(n as i32 + 1)) / (n + 1) as f64;
        let term = (2.0 * k_norm).powi(n as i32) / fact * integral;
        total += term;
        if term < 1e-18 * total {
            break;
        }
    }
    j * total
}

/// Propagators of a whole run, used for state distances.
#[derive(Debug, Clone)]
pub struct Propagators {
    /// Actual propagator `U`.
    pub total: Unitary,
    /// Uncoupled propagator with the applied (possibly over-rotated) control.
    pub secular: Unitary,
    /// Ideal gate on the system with free bath evolution.
    pub ideal: Unitary,
    pub dim_bath: usize,
}

#[derive(Debug, Clone)]
pub struct PddResult {
    pub m: usize,
    pub cycle: CycleResult,
    /// `U(mT)` by sequential multiplication of cycles.
    pub u_total: Unitary,
    pub u_sec: Unitary,
    /// True error propagator `S(mT)^dag U(mT)`.
    pub u_err: Unitary,
    /// `[U_err(T)]^m`.
    pub u_err_power: Unitary,
    /// `||U_err(mT) - [U_err(T)]^m||_inf`.
    pub power_deviation: f64,
    pub phi_pdd: Hermitian,
    /// `||U_err(kT) - [U_err(T)]^k||_inf` for `k = 1..m`.
    pub trace: Vec<f64>,
    pub propagators: Propagators,
}

impl PddResult {
    pub fn phi_pdd_norm(&self) -> f64 {
        self.phi_pdd.op_norm()
    }
}

/// `m` back-to-back cycles, with the gate spread over all of them.
pub fn run_pdd(sim: &Simulation, m: usize) -> Result<PddResult> {
    run_pdd_with(sim, m, CycleOptions::default())
}

pub fn run_pdd_with(sim: &Simulation, m: usize, opts: CycleOptions) -> Result<PddResult> {
    let sim = sim.with_m(m)?;
    let cycle = run_cycle_with(&sim, opts)?;
    let mut u_total = Unitary::identity(sim.dim());
    let mut u_sec = Unitary::identity(sim.dim());
    let mut power = Unitary::identity(sim.dim());
    let mut trace = Vec::with_capacity(m);
    for _ in 0..m {
        u_total = cycle.u_total.then_after(&u_total);
        u_sec = cycle.u_sec.then_after(&u_sec);
        power = cycle.u_err.then_after(&power);
        let err = u_sec.adjoint().then_after(&u_total);
        trace.push(op_norm(&(err.matrix() - power.matrix())));
    }
    let u_err = u_sec.adjoint().then_after(&u_total);
    let power_deviation = *trace.last().expect("m >= 1");
    let phi_pdd = unitary_log(&u_err).map_err(|e| Error::PddBranchCut {
        m,
        source: Box::new(e),
    })?;
    let ideal = sim
        .ideal_gate()
        .tensor(&expm_hermitian(&sim.h_bath, m as f64 * sim.cycle_time()));
    let propagators = Propagators {
        total: u_total.clone(),
        secular: u_sec.clone(),
        ideal,
        dim_bath: sim.dim_bath(),
    };
    Ok(PddResult {
        m,
        cycle,
        u_total,
        u_sec,
        u_err,
        u_err_power: power,
        power_deviation,
        phi_pdd,
        trace,
        propagators,
    })
}

/// Cheap propagators of `k` cycles for many `k`, from one cycle result.
#[derive(Debug, Clone)]
pub struct CyclePowers {
    total: SpectralUnitary,
    secular: SpectralUnitary,
    ideal_sys: Unitary,
    h_bath: Hermitian,
    cycle_time: f64,
    dim_bath: usize,
}

impl CyclePowers {
    /// `sim.m` must equal the cycle count the propagators will be raised to,
    /// since the gate slice per cycle depends on it.
    pub fn new(sim: &Simulation, cycle: &CycleResult) -> Result<Self> {
        Ok(CyclePowers {
            total: SpectralUnitary::new(&cycle.u_total)?,
            secular: SpectralUnitary::new(&cycle.u_sec)?,
            ideal_sys: sim.ideal_gate(),
            h_bath: sim.h_bath.clone(),
            cycle_time: sim.cycle_time(),
            dim_bath: sim.dim_bath(),
        })
    }

    pub fn propagators(&self, m: usize) -> Propagators {
        let ideal = self
            .ideal_sys
            .tensor(&expm_hermitian(&self.h_bath, m as f64 * self.cycle_time));
        Propagators {
            total: self.total.powi(m),
            secular: self.secular.powi(m),
            ideal,
            dim_bath: self.dim_bath,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StateDistances {
    /// `D[rho(T), rho^0(T)]`: coupling-induced error.
    pub d_dd: f64,
    /// `D[rho_S(T), rho_S^ideal(T)]`.
    pub d_s: f64,
    /// `D[rho(T), rho^ideal(T)]`.
    pub d_tot: f64,
    /// `D[rho_S^0(T), rho_S^ideal(T)]`: control error alone.
    pub d_id: f64,
    /// `F[rho_S(T), rho_S^ideal(T)]`.
    pub f_q: f64,
}

pub fn final_state_distances(
    p: &Propagators,
    rho_s: &DensityMatrix,
    rho_b: &DensityMatrix,
) -> Result<StateDistances> {
    if rho_b.dim() != p.dim_bath {
        return Err(Error::DimensionMismatch {
            left: rho_b.dim(),
            right: p.dim_bath,
        });
    }
    let rho0 = rho_s.tensor(rho_b);
    if rho0.dim() != p.total.dim() {
        return Err(Error::DimensionMismatch {
            left: rho0.dim(),
            right: p.total.dim(),
        });
    }
    let actual = rho0.evolve(&p.total)?;
    let uncoupled = rho0.evolve(&p.secular)?;
    let ideal = rho0.evolve(&p.ideal)?;
    let db = p.dim_bath;
    let actual_s = actual.partial_trace_bath(db)?;
    let uncoupled_s = uncoupled.partial_trace_bath(db)?;
    let ideal_s = ideal.partial_trace_bath(db)?;
    Ok(StateDistances {
        d_dd: trace_distance(&actual, &uncoupled)?,
        d_s: trace_distance(&actual_s, &ideal_s)?,
        d_tot: trace_distance(&actual, &ideal)?,
        d_id: trace_distance(&uncoupled_s, &ideal_s)?,
        f_q: fidelity(&actual_s, &ideal_s)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoupling::{trivial_schedule, universal_schedule};
    use crate::model::{
        build_heisenberg_ctrl, build_linear_sb, build_random_bath, chain_couplings,
        BathOperatorSpec,
    };
    use crate::pauli::Axis;
    use crate::random::{random_density, rng_from_seed};

    fn linear_sb(n_sys: usize, n_bath: usize, norm: f64, seed: u64) -> Hermitian {
        let coeffs: Vec<_> = (0..n_sys)
            .flat_map(|j| Axis::XYZ.map(|a| (j, a, BathOperatorSpec::Random { norm })))
            .collect();
        build_linear_sb(n_sys, n_bath, &coeffs, seed).unwrap()
    }

    fn sim(
        n_sys: usize,
        tau: f64,
        delta: f64,
        theta: f64,
        bath: f64,
        m: usize,
        seed: u64,
    ) -> Simulation {
        let h_err = linear_sb(n_sys, 1, 0.05, seed);
        let h_b = build_random_bath(1, bath, seed + 1).unwrap();
        let split =
            SystemBathSplit::new(n_sys, 1, Hermitian::zeros(1 << n_sys), h_err, h_b).unwrap();
        let r = if n_sys >= 2 {
            build_heisenberg_ctrl(n_sys, &chain_couplings(n_sys, 1.0)).unwrap()
        } else {
            Hermitian::zeros(2)
        };
        let gate = GateSpec::new(r, theta).unwrap();
        let schedule = universal_schedule(n_sys, tau, delta).unwrap();
        Simulation::new(&split, gate, schedule, m, 0.0, false).unwrap()
    }

    #[test]
    fn no_coupling_no_error() {
        let mut s = sim(2, 0.1, 0.0, 0.7, 0.3, 1, 1);
        s.h_err = Hermitian::zeros(8);
        let r = run_cycle(&s).unwrap();
        assert!(r.phi_e_norm() < 1e-9);
        let p = run_pdd(&s, 1).unwrap();
        let rho_s = random_density(4, &mut rng_from_seed(2));
        let rho_b = random_density(2, &mut rng_from_seed(3));
        let d = final_state_distances(&p.propagators, &rho_s, &rho_b).unwrap();
        assert!(d.d_dd < 1e-9 && d.d_id < 1e-9 && d.d_s < 1e-9);
    }

    #[test]
    fn error_propagator_factorisation() {
        let s = sim(2, 0.05, 0.01, 0.4, 0.2, 2, 4);
        let r = run_cycle(&s).unwrap();
        let back = r.u_sec.then_after(&r.u_err);
        assert!(op_norm(&(back.matrix() - r.u_total.matrix())) < 1e-9);
        assert!(op_norm(&(expm_hermitian(&r.phi_e, 1.0).matrix() - r.u_err.matrix())) < 1e-9);
    }

    #[test]
    fn cycle_assembly_reproduces_error_propagator() {
        for delta in [0.0, 0.02] {
            let s = sim(2, 0.05, delta, 0.6, 0.3, 1, 5);
            let r = run_cycle(&s).unwrap();
            let dim = s.dim();
            let mut u = Unitary::identity(dim);
            for (seg, d) in r.segments.iter().zip(&s.group.elements) {
                let d = Unitary::from_product(s.embed_sys(d.matrix()));
                let y = d
                    .then_after(&expm_hermitian(&seg.free, s.schedule.tau))
                    .then_after(&d.adjoint());
                u = y.then_after(&u);
                if let Some(hp) = &seg.pulse {
                    let x = d
                        .then_after(&expm_hermitian(hp, delta))
                        .then_after(&d.adjoint());
                    u = x.then_after(&u);
                }
            }
            assert!(
                op_norm(&(u.matrix() - r.u_err.matrix())) < 1e-8,
                "delta = {delta}"
            );
        }
    }

    #[test]
    fn interaction_picture_matches_direct_error_propagator() {
        let s = sim(2, 0.05, 0.01, 0.6, 0.3, 1, 6);
        let r = run_cycle_with(
            &s,
            CycleOptions {
                segment_phases: false,
                require_commutation: true,
            },
        )
        .unwrap();
        let g = s.interaction_generator().unwrap();
        let u = time_ordered_exp(&g, 0.0, s.cycle_time(), 4000);
        assert!(op_norm(&(u.matrix() - r.u_err.matrix())) < 1e-7);
    }

    #[test]
    fn switched_cycle_matches_run_cycle() {
        let s = sim(1, 0.05, 0.01, 0.0, 0.3, 1, 7);
        let r = run_cycle(&s).unwrap();
        let u = propagate_switched(&s.switched_cycle().unwrap(), 1);
        assert!(op_norm(&(u.matrix() - r.u_total.matrix())) < 1e-12);
    }

    #[test]
    fn exact_first_order_matches_series() {
        // Control on throughout, so the secular Hamiltonian is constant and
        // the series applies on every segment.
        let mut s = sim(2, 0.05, 0.0, 0.8, 0.3, 1, 8);
        s.ctrl_during_pulses = true;
        let r = run_cycle(&s).unwrap();
        let k = s.embed_sys(s.h_ctrl().matrix()) + s.bath_embedded();
        for (i, seg) in r.segments.iter().enumerate() {
            let a = i as f64 * s.schedule.tau;
            let series = first_order_series(&k, s.h_err.matrix(), a, s.schedule.tau, 8);
            let diff = op_norm(&(series - seg.free_first_order.matrix()));
            let bound =
                first_order_series_remainder(s.h_err.op_norm(), op_norm(&k), a, s.schedule.tau, 8);
            assert!(diff <= bound + 1e-14, "segment {i}: {diff} > {bound}");
        }
    }

    #[test]
    fn pulses_cannot_hurt() {
        for seed in 0..5 {
            let s = sim(2, 0.03, 0.02, 0.5, 0.4, 1, 20 + seed);
            let r = run_cycle(&s).unwrap();
            let j = s.h_err.op_norm();
            for seg in &r.segments {
                assert!(seg.pulse.as_ref().unwrap().op_norm() <= j + 1e-9);
                assert!(seg.free.op_norm() <= j + 1e-9);
            }
        }
    }

    #[test]
    fn pdd_single_cycle_is_run_cycle() {
        let s = sim(2, 0.05, 0.0, 0.5, 0.3, 1, 9);
        let a = run_cycle(&s).unwrap();
        let b = run_pdd(&s, 1).unwrap();
        assert!(op_norm(&(a.u_err.matrix() - b.u_err.matrix())) < 1e-14);
        assert!(b.power_deviation < 1e-14);
    }

    #[test]
    fn pdd_power_identity_without_secular_evolution() {
        let s = sim(2, 0.05, 0.0, 0.0, 0.0, 1, 10);
        let one = run_cycle(&s).unwrap();
        for m in [2, 4, 8] {
            let p = run_pdd(&s, m).unwrap();
            assert!(p.power_deviation < 1e-9);
            assert!((p.phi_pdd_norm() - m as f64 * one.phi_e_norm()).abs() < 1e-8);
        }
    }

    #[test]
    fn cycle_powers_agree_with_sequential_product() {
        let s = sim(2, 0.05, 0.0, 0.5, 0.3, 6, 11);
        let cycle = run_cycle_with(
            &s,
            CycleOptions {
                segment_phases: false,
                require_commutation: true,
            },
        )
        .unwrap();
        let powers = CyclePowers::new(&s, &cycle).unwrap();
        let p = run_pdd(&s, 6).unwrap();
        let q = powers.propagators(6);
        assert!(op_norm(&(q.total.matrix() - p.u_total.matrix())) < 1e-10);
        assert!(op_norm(&(q.secular.matrix() - p.u_sec.matrix())) < 1e-10);
    }

    #[test]
    fn gate_completes_after_m_cycles() {
        let mut s = sim(2, 0.05, 0.0, 0.9, 0.3, 1, 12);
        s.h_err = Hermitian::zeros(8);
        let p = run_pdd(&s, 5).unwrap();
        let expected = s
            .ideal_gate()
            .tensor(&expm_hermitian(&s.h_bath, 5.0 * s.cycle_time()));
        assert!(op_norm(&(p.u_total.matrix() - expected.matrix())) < 1e-10);
    }

    #[test]
    fn triangle_chain_with_over_rotation() {
        let mut s = sim(2, 0.05, 0.01, 0.9, 0.3, 2, 13);
        s.control_noise = 0.05;
        let p = run_pdd(&s, 2).unwrap();
        let rho_s = random_density(4, &mut rng_from_seed(14));
        let rho_b = random_density(2, &mut rng_from_seed(15));
        let d = final_state_distances(&p.propagators, &rho_s, &rho_b).unwrap();
        assert!(d.d_id > 1e-4);
        assert!(d.d_s <= d.d_tot + 1e-12);
        assert!(d.d_tot <= d.d_dd + d.d_id + 1e-12);
    }

    #[test]
    fn trivial_schedule_uses_identity_pulses() {
        let h_err = linear_sb(1, 1, 0.1, 3);
        let split =
            SystemBathSplit::new(1, 1, Hermitian::zeros(2), h_err, Hermitian::zeros(2)).unwrap();
        let sched = trivial_schedule(1, 3, 0.1, 0.0).unwrap();
        let s = Simulation::new(&split, GateSpec::none(2), sched, 1, 0.0, false).unwrap();
        let r = run_cycle(&s).unwrap();
        // Without pulses and without secular terms the error phase is 0.3 H_err.
        assert!(op_norm(&(r.phi_e.matrix() - s.h_err.matrix() * real(0.3))) < 1e-12);
    }

    #[test]
    fn phase_integral_series_is_continuous() {
        for x in [9.9e-5, 1.01e-4] {
            let exact = (C64::from_polar(1.0, x) - 1.0) / c(0.0, x);
            assert!((phase_integral(x) - exact).norm() < 1e-12);
        }
    }
}
