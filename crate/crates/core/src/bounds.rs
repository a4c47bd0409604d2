//! Rigorous error bounds and their comparison against exact quantities.

use serde::{Deserialize, Serialize};

use crate::decoupling::project_group;
use crate::error::{Error, Result};
use crate::evolution::{time_ordered_exp, CycleResult, Generator, Simulation};
use crate::linalg::{
    adjoint_map, norm, op_norm, real, tensor, unitary_log, CMat, Hermitian, NormKind, Unitary,
};

/// Slack absorbing rounding on tight comparisons.
pub const MARGIN_TOL: f64 = 1e-9;

/// Calibrated constants. The defaults are frozen outputs of the calibration
/// run (`ddbound calibrate`), which also records the recipe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    /// Second-order constant of the single-cycle error-phase bound.
    pub c: f64,
    /// Per-segment constant bounding `||C^(i)|| <= d (tau J)^2`.
    pub d: f64,
    /// Prefactor of the cycle-count scaling `m* ~ c' n^-2`.
    pub c_prime: f64,
    /// Magnus tail constants for orders two and three.
    pub a2: f64,
    pub a3: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        BoundConstants {
            c: 0.3975079281997401,
            d: 0.397507928199741,
            c_prime: 566.9814489786119,
            a2: 0.21034779084191185,
            a3: 0.04635269116374195,
        }
    }
}

/// `(e^x - 1)/x - 1`, by series for small `x`.
pub fn excess_growth(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        x / 2.0 + x * x / 6.0 + x * x * x / 24.0 + x.powi(4) / 120.0
    } else {
        x.exp_m1() / x - 1.0
    }
}

/// `min[1, ½(e^{2 phi} - 1)]`.
pub fn distance_from_phase(phi_norm: f64) -> f64 {
    (0.5 * (2.0 * phi_norm).exp_m1()).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub actual: f64,
    pub bound: f64,
}

impl Check {
    pub fn new(actual: f64, bound: f64) -> Self {
        Check { actual, bound }
    }

    pub fn margin(&self) -> f64 {
        self.bound - self.actual
    }

    pub fn pass(&self) -> bool {
        self.margin() >= -MARGIN_TOL
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma2Check {
    /// `||e^{-iA} B e^{iA} - B||` against `||B|| min[2, e^{2||A||} - 1]`.
    pub main: Check,
    /// The `2 ||B|| min[1, (e - 1)||A||]` form, when `2||A||_inf <= 1`.
    pub refined: Option<Check>,
}

impl Lemma2Check {
    pub fn pass(&self) -> bool {
        self.main.pass() && self.refined.is_none_or(|r| r.pass())
    }
}

pub fn lemma2_bound(a: &Hermitian, b: &CMat, kind: NormKind) -> Result<Lemma2Check> {
    let rotated = adjoint_map(a, b)?;
    let actual = norm(&(rotated - b), kind);
    let a_norm = a.op_norm();
    let b_norm = norm(b, kind);
    let main = Check::new(actual, b_norm * (2.0f64).min((2.0 * a_norm).exp_m1()));
    let refined = (2.0 * a_norm <= 1.0).then(|| {
        Check::new(
            actual,
            2.0 * b_norm * (1.0f64).min((std::f64::consts::E - 1.0) * a_norm),
        )
    });
    Ok(Lemma2Check { main, refined })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lemma3Check {
    /// `||H_eff||` against the time-averaged perturbation norm.
    pub average: Check,
    /// Time average against the supremum over the quadrature nodes.
    pub sup: Check,
}

impl Lemma3Check {
    pub fn pass(&self) -> bool {
        self.average.pass() && self.sup.pass()
    }
}

/// `exp(-i T H_eff) = U_0^dag U` for `H = H_0 + V` over `[0, T]`.
pub fn lemma3_check(gen0: &Generator, v: &Generator, t: f64, steps: usize) -> Result<Lemma3Check> {
    if gen0.dim() != v.dim() {
        return Err(Error::DimensionMismatch {
            left: gen0.dim(),
            right: v.dim(),
        });
    }
    if !(t > 0.0) {
        return Err(Error::InvalidParameter(format!("interval length {t}")));
    }
    let full = match (gen0, v) {
        (Generator::Constant(a), Generator::Constant(b)) => Generator::Constant(a.add(b)?),
        _ => {
            let mut breakpoints = gen0.breakpoints();
            breakpoints.extend(v.breakpoints());
            let (g0, g1) = (gen0.clone(), v.clone());
            Generator::function(gen0.dim(), breakpoints, move |s| {
                g0.at(s).add(&g1.at(s)).expect("same dimension")
            })
        }
    };
    let u0 = time_ordered_exp(gen0, 0.0, t, steps);
    let u = time_ordered_exp(&full, 0.0, t, steps);
    let h_eff = unitary_log(&u0.adjoint().then_after(&u))?.scale(1.0 / t);
    let q = crate::magnus::Quadrature::new(v, 0.0, t, 16);
    let norms: Vec<f64> = q.nodes.iter().map(|&s| v.at(s).op_norm()).collect();
    let average = norms
        .iter()
        .zip(&q.weights)
        .map(|(n, w)| n * w)
        .sum::<f64>()
        / t;
    let sup = norms.iter().copied().fold(0.0, f64::max);
    Ok(Lemma3Check {
        average: Check::new(h_eff.op_norm(), average),
        sup: Check::new(average, sup),
    })
}

/// Single-cycle bound `c (JT)^2 + J Delta + JT min[1, g(2 beta T)]`, with
/// `g(x) = (e^x - 1)/x - 1`.
pub fn phi_e_bound(j: f64, beta: f64, t: f64, delta_total: f64, consts: &BoundConstants) -> f64 {
    let jt = j * t;
    consts.c * jt * jt + j * delta_total + undecoupled_bound(j, beta, t, 0.0)
}

/// `||Phi_undec||` bound. The trivial branch `JT` only holds when the
/// decoupling condition does; otherwise it is widened by `||Phi_dec||`.
pub fn undecoupled_bound(j: f64, beta: f64, t: f64, phi_dec_norm: f64) -> f64 {
    let jt = j * t;
    (jt + phi_dec_norm).min(jt * excess_growth(2.0 * beta * t))
}

/// Single-cycle bound when the decoupling condition may fail: the exact
/// decoupled term enters additively.
pub fn phi_e_bound_general(
    j: f64,
    beta: f64,
    t: f64,
    delta_total: f64,
    phi_dec_norm: f64,
    consts: &BoundConstants,
) -> f64 {
    let jt = j * t;
    consts.c * jt * jt
        + j * delta_total
        + phi_dec_norm
        + undecoupled_bound(j, beta, t, phi_dec_norm)
}

/// PDD bound over `m` cycles of total length `t_long` with `n_long = m N`
/// pulses of width `delta`.
pub fn pdd_bound(
    j: f64,
    beta: f64,
    t_long: f64,
    m: usize,
    n_long: usize,
    delta: f64,
    consts: &BoundConstants,
) -> f64 {
    pdd_bound_general(j, beta, t_long, m, n_long, delta, 0.0, consts)
}

/// [`pdd_bound`] plus `m ||Phi_dec||` when the decoupling condition fails.
#[allow(clippy::too_many_arguments)]
pub fn pdd_bound_general(
    j: f64,
    beta: f64,
    t_long: f64,
    m: usize,
    n_long: usize,
    delta: f64,
    phi_dec_norm: f64,
    consts: &BoundConstants,
) -> f64 {
    let m = m.max(1) as f64;
    let t = t_long / m;
    m * (consts.c * (j * t).powi(2) + phi_dec_norm + undecoupled_bound(j, beta, t, phi_dec_norm))
        + n_long as f64 * j * delta
}

/// Second-order Taylor form `m (c J^2 + J beta) T^2` for `delta = 0`.
pub fn pdd_bound_approx(j: f64, beta: f64, t_cycle: f64, m: usize, consts: &BoundConstants) -> f64 {
    m as f64 * (consts.c * j * j + j * beta) * t_cycle * t_cycle
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceChain {
    /// `D_DD` against `min[1, ½(e^{2||Phi||} - 1)]`.
    pub main: Check,
    /// `D_DD <= 2 ||Phi||` when `2||Phi|| <= 1`.
    pub refined: Option<Check>,
}

impl DistanceChain {
    pub fn pass(&self) -> bool {
        self.main.pass() && self.refined.is_none_or(|r| r.pass())
    }
}

pub fn d_dd_chain(phi_e_norm: f64, d_dd: f64) -> DistanceChain {
    let main = Check::new(d_dd, distance_from_phase(phi_e_norm));
    let refined = (2.0 * phi_e_norm <= 1.0).then(|| Check::new(d_dd, 2.0 * phi_e_norm));
    DistanceChain { main, refined }
}

/// `1 - D_id - min[1, ½(e^{2||Phi||} - 1)]`; may be negative (vacuous).
pub fn fidelity_floor(d_id: f64, phi_e_norm: f64) -> f64 {
    1.0 - d_id - distance_from_phase(phi_e_norm)
}

/// Split of the first-order error phase of one cycle.
#[derive(Debug, Clone)]
pub struct PhaseDecomposition {
    /// `delta sum_i D_i H^{P_i} D_i^dag`.
    pub phi_pulse: Hermitian,
    /// `tau sum_i D_i H^(i) D_i^dag`.
    pub phi_free: Hermitian,
    /// `tau Pi_G(H_err)`.
    pub phi_dec: Hermitian,
    /// `sum_i D_i (M1^(i) - tau H_err) D_i^dag`, `M1^(i)` the exact first-order
    /// term of free interval `i`.
    pub phi_undec: Hermitian,
    /// `Phi_free - Phi_dec - Phi_undec`.
    pub c_rem: Hermitian,
    /// `Phi_E - Phi_pulse - Phi_free`.
    pub phi_second: Hermitian,
    /// `max_i ||tau H^(i) - M1^(i)||`.
    pub c_segment_max: f64,
    pub pulse: Check,
    pub undec: Check,
}

pub fn phase_decomposition(cycle: &CycleResult, sim: &Simulation) -> Result<PhaseDecomposition> {
    if cycle.segments.len() != sim.n_pulses() {
        return Err(Error::InvalidParameter(
            "cycle result lacks segment phases".into(),
        ));
    }
    let (tau, delta) = (cycle.tau, cycle.delta);
    let dim = sim.dim();
    let ib = crate::linalg::identity(sim.dim_bath());
    let ds: Vec<CMat> = sim
        .group
        .elements
        .iter()
        .map(|d| tensor(d.matrix(), &ib))
        .collect();
    let conj = |d: &CMat, a: &CMat| d * a * d.adjoint();
    let mut pulse = CMat::zeros(dim, dim);
    let mut free = CMat::zeros(dim, dim);
    let mut undec = CMat::zeros(dim, dim);
    let mut c_segment_max = 0.0f64;
    let tau_h = sim.h_err.matrix() * real(tau);
    for (seg, d) in cycle.segments.iter().zip(&ds) {
        if let Some(hp) = &seg.pulse {
            pulse += conj(d, &(hp.matrix() * real(delta)));
        }
        let free_i = seg.free.matrix() * real(tau);
        c_segment_max = c_segment_max.max(op_norm(&(&free_i - seg.free_first_order.matrix())));
        free += conj(d, &free_i);
        undec += conj(d, &(seg.free_first_order.matrix() - &tau_h));
    }
    let dec = project_group(&sim.group, &tau_h)?;
    let c_rem = &free - &dec - &undec;
    let second = cycle.phi_e.matrix() - &pulse - &free;
    let s = sim.strengths();
    let t = sim.cycle_time();
    let phi_dec = Hermitian::from_computed(dec)?;
    let phi_pulse = Hermitian::from_computed(pulse)?;
    let phi_undec = Hermitian::from_computed(undec)?;
    let pulse_check = Check::new(phi_pulse.op_norm(), s.j * sim.schedule.pulse_time());
    let undec_check = Check::new(
        phi_undec.op_norm(),
        undecoupled_bound(s.j, s.beta, t, phi_dec.op_norm()),
    );
    Ok(PhaseDecomposition {
        phi_pulse,
        phi_free: Hermitian::from_computed(free)?,
        phi_dec,
        phi_undec,
        c_rem: Hermitian::from_computed(c_rem)?,
        phi_second: Hermitian::from_computed(second)?,
        c_segment_max,
        pulse: pulse_check,
        undec: undec_check,
    })
}

impl PhaseDecomposition {
    /// `||Phi_E - Phi_pulse - Phi_dec - Phi_undec||`, the part the constant
    /// `c` must absorb.
    pub fn second_order_residual(&self) -> f64 {
        op_norm(&(self.phi_second.matrix() + self.c_rem.matrix()))
    }
}

/// `||U - V||_inf` between two unitaries.
pub fn unitary_distance(u: &Unitary, v: &Unitary) -> f64 {
    op_norm(&(u.matrix() - v.matrix()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoupling::{trivial_schedule, universal_schedule};
    use crate::evolution::{run_cycle, Simulation};
    use crate::model::{
        build_linear_sb, build_random_bath, BathOperatorSpec, GateSpec, SystemBathSplit,
    };
    use crate::pauli::Axis;
    use crate::random::{random_hermitian, random_matrix, rng_from_seed};

    #[test]
    fn excess_growth_is_continuous_at_switch() {
        let below = excess_growth(0.999e-3);
        let above = excess_growth(1.001e-3);
        assert!((above - below).abs() < 2e-6);
        let x: f64 = 0.5e-3;
        let direct = (x.exp() - 1.0) / x - 1.0;
        assert!((excess_growth(x) - direct).abs() < 1e-12);
        assert_eq!(excess_growth(0.0), 0.0);
    }

    #[test]
    fn phi_e_bound_hand_value() {
        let consts = BoundConstants {
            c: 1.0,
            ..Default::default()
        };
        assert!((phi_e_bound(0.1, 1.0, 1.0, 0.0, &consts) - 0.11).abs() < 1e-15);
        assert_eq!(phi_e_bound(0.0, 1.0, 1.0, 0.3, &consts), 0.0);
        // beta T -> 0 kills the undecoupled term.
        let small = phi_e_bound(1.0, 1e-12, 1.0, 0.0, &BoundConstants { c: 0.0, ..consts });
        assert!(small < 1e-11);
    }

    #[test]
    fn pdd_bound_reduces_to_single_cycle() {
        let consts = BoundConstants {
            c: 0.7,
            ..Default::default()
        };
        let single = phi_e_bound(0.2, 0.5, 0.4, 4.0 * 0.01, &consts);
        assert!((pdd_bound(0.2, 0.5, 0.4, 1, 4, 0.01, &consts) - single).abs() < 1e-15);
    }

    #[test]
    fn pdd_taylor_form_matches_at_small_beta_t() {
        let consts = BoundConstants {
            c: 0.5,
            ..Default::default()
        };
        let (j, beta, m) = (0.05, 1.0, 10);
        let t = 0.01; // beta T / m ... beta times the cycle time
        let full = pdd_bound(j, beta, m as f64 * t, m, 4 * m, 0.0, &consts);
        let approx = pdd_bound_approx(j, beta, t, m, &consts);
        assert!((full / approx - 1.0).abs() < 0.05);
    }

    #[test]
    fn bounds_are_monotone() {
        let consts = BoundConstants {
            c: 0.8,
            ..Default::default()
        };
        let grid = [0.0, 0.05, 0.1, 0.3, 0.7, 1.5];
        for w in grid.windows(2) {
            let (a, b) = (w[0], w[1]);
            assert!(
                phi_e_bound(a, 1.0, 0.5, 0.1, &consts) <= phi_e_bound(b, 1.0, 0.5, 0.1, &consts)
            );
            assert!(
                phi_e_bound(0.3, 1.0, a, 0.1, &consts) <= phi_e_bound(0.3, 1.0, b, 0.1, &consts)
            );
            assert!(
                phi_e_bound(0.3, 1.0, 0.5, a, &consts) <= phi_e_bound(0.3, 1.0, 0.5, b, &consts)
            );
            assert!(
                pdd_bound(0.3, 1.0, 0.5, 2, 8, a, &consts)
                    <= pdd_bound(0.3, 1.0, 0.5, 2, 8, b, &consts)
            );
        }
        for m in 1..20 {
            let t = 0.1;
            let lo = pdd_bound(0.3, 1.0, m as f64 * t, m, 4 * m, 0.01, &consts);
            let hi = pdd_bound(
                0.3,
                1.0,
                (m + 1) as f64 * t,
                m + 1,
                4 * (m + 1),
                0.01,
                &consts,
            );
            assert!(lo <= hi);
        }
    }

    #[test]
    fn lemma2_examples() {
        let mut rng = rng_from_seed(1);
        let b = random_matrix(3, &mut rng);
        let zero = lemma2_bound(&Hermitian::zeros(3), &b, NormKind::Operator).unwrap();
        assert_eq!(zero.main.bound, 0.0);
        assert!(zero.main.actual < 1e-15 && zero.pass());
        let big = random_hermitian(3, &mut rng);
        let big = big.scale(10.0 / big.op_norm());
        let c = lemma2_bound(&big, &b, NormKind::Trace).unwrap();
        assert!((c.main.bound - 2.0 * norm(&b, NormKind::Trace)).abs() < 1e-12);
        assert!(c.pass());
    }

    #[test]
    fn lemma3_constant_perturbation() {
        let mut rng = rng_from_seed(2);
        for _ in 0..20 {
            let h0 = random_hermitian(4, &mut rng);
            let v = random_hermitian(4, &mut rng);
            let v = v.scale(0.8 / v.op_norm());
            let c =
                lemma3_check(&Generator::Constant(h0), &Generator::Constant(v), 1.0, 1).unwrap();
            assert!(c.pass(), "{c:?}");
        }
        let z = lemma3_check(
            &Generator::Constant(Hermitian::zeros(2)),
            &Generator::Constant(Hermitian::zeros(2)),
            1.0,
            1,
        )
        .unwrap();
        assert!(z.average.actual < 1e-15);
    }

    #[test]
    fn distance_chain_and_floor() {
        let chain = d_dd_chain(0.0, 0.0);
        assert!(chain.pass() && chain.main.bound == 0.0);
        assert_eq!(d_dd_chain(5.0, 0.3).main.bound, 1.0);
        assert_eq!(fidelity_floor(0.0, 0.0), 1.0);
        assert!(fidelity_floor(0.2, 3.0) < 0.0);
    }

    fn decomposition_sim(group_universal: bool, delta: f64, seed: u64) -> Simulation {
        let coeffs: Vec<_> = Axis::XYZ
            .map(|a| (0, a, BathOperatorSpec::Random { norm: 0.1 }))
            .into();
        let h_err = build_linear_sb(1, 1, &coeffs, seed).unwrap();
        let h_b = build_random_bath(1, 0.5, seed + 1).unwrap();
        let split = SystemBathSplit::new(1, 1, Hermitian::zeros(2), h_err, h_b).unwrap();
        let sched = if group_universal {
            universal_schedule(1, 0.05, delta).unwrap()
        } else {
            trivial_schedule(1, 4, 0.05, delta).unwrap()
        };
        Simulation::new(&split, GateSpec::none(2), sched, 1, 0.0, false).unwrap()
    }

    #[test]
    fn decomposition_examples() {
        let s = decomposition_sim(true, 0.0, 3);
        let d = phase_decomposition(&run_cycle(&s).unwrap(), &s).unwrap();
        assert!(d.phi_dec.op_norm() < 1e-10);
        assert!(d.phi_pulse.op_norm() == 0.0);
        assert!(d.pulse.pass() && d.undec.pass());

        let s = decomposition_sim(false, 0.0, 4);
        let d = phase_decomposition(&run_cycle(&s).unwrap(), &s).unwrap();
        let jt = s.h_err.op_norm() * s.cycle_time();
        assert!(d.phi_free.op_norm() <= jt + 1e-12);
        assert!(d.undec.pass());
    }

    #[test]
    fn decomposition_with_finite_pulses() {
        let s = decomposition_sim(true, 0.01, 5);
        let d = phase_decomposition(&run_cycle(&s).unwrap(), &s).unwrap();
        assert!(d.pulse.pass(), "{:?}", d.pulse);
        assert!(d.undec.pass(), "{:?}", d.undec);
        // Both residual pieces are second order in JT.
        let jt = s.h_err.op_norm() * s.cycle_time();
        assert!(d.second_order_residual() < jt * jt);
    }
}
