//! Seeded scenario families shared by calibration, verification and sweeps.
//!
//! Calibration and test families draw from the same distributions through
//! disjoint seed streams, so a constant fitted on one is tested on fresh
//! instances of the other.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use ddbound::evolution::{Generator, Segment, SwitchedHamiltonian};
use ddbound::linalg::Hermitian;
use ddbound::random::{derive_seed, random_hermitian_with_norm, rng_from_seed, SimRng};

use crate::config::{CouplingModel, GateName, GroupName, ScenarioConfig};
use crate::scenario::coupling_strength;

/// Seed stream of a family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Calibration,
    Test,
}

impl Family {
    fn rng(self, kind: u64, index: u64) -> SimRng {
        let base = match self {
            Family::Calibration => 0xCA11_B8A7_E000_0000,
            Family::Test => 0x7E57_0000_0000_0000,
        };
        rng_from_seed(derive_seed(base ^ kind, index))
    }
}

mod kind {
    pub const SCENARIO: u64 = 1;
    pub const PIECEWISE: u64 = 2;
    pub const SMOOTH: u64 = 3;
    pub const SEGMENTS: u64 = 4;
}

/// Largest single-run `T J` drawn for bound scenarios.
pub const DOMAIN_TJ: f64 = 0.8 * PI;

/// Instances in the calibration family for `c` and `d`.
pub const CALIBRATION_SCENARIOS: u64 = 400;

/// A random scenario inside the convergence domain: `m T J < 0.8 pi` for the
/// whole run. Covers both groups, every gate, kicks and finite pulses, control
/// during pulses, over-rotation, and occasional residual system errors that
/// break the decoupling condition.
pub fn bound_scenario(family: Family, index: u64) -> ScenarioConfig {
    let mut rng = family.rng(kind::SCENARIO, index);
    let n_sys = rng.random_range(1..=3usize);
    let n_bath = rng.random_range(1..=2usize);
    let coupling = if n_bath == n_sys && rng.random_bool(0.5) {
        CouplingModel::Local
    } else {
        CouplingModel::Global
    };
    let group = if rng.random_bool(0.1) {
        GroupName::Trivial
    } else {
        GroupName::Universal
    };
    let n_pulses = match group {
        GroupName::Universal => 4,
        GroupName::Trivial => [1, 2, 4][rng.random_range(0..3)],
    };
    let gate = if n_sys >= 2 {
        [
            GateName::None,
            GateName::LogicalZOnDfs,
            GateName::HeisenbergExchange,
        ][rng.random_range(0..3)]
    } else {
        GateName::None
    };
    let theta = if gate == GateName::None {
        0.0
    } else {
        rng.random_range(0.0..PI)
    };
    let m = rng.random_range(1..=4usize);
    let width_fraction = if rng.random_bool(0.5) {
        0.0
    } else {
        rng.random_range(0.05..0.5)
    };
    let ctrl_during_pulses = width_fraction > 0.0 && rng.random_bool(0.25);
    let control_noise = if rng.random_bool(0.5) {
        rng.random_range(-0.05..0.05)
    } else {
        0.0
    };
    let residual = rng.random_bool(0.1);
    let heisenberg_couplings = (n_sys >= 2).then(|| {
        (0..n_sys)
            .flat_map(|i| (i + 1..n_sys).map(move |j| (i, j)))
            .map(|(i, j)| (i, j, rng.random_range(0.2..1.5)))
            .collect()
    });
    let mut cfg = ScenarioConfig {
        label: Some(format!("{}-{index}", family_label(family))),
        n_sys,
        n_bath,
        seed: rng.random(),
        m,
        heisenberg_j: 1.0,
        heisenberg_couplings,
        sb_scale: 1.0,
        bath_norm: 0.0,
        coupling,
        residual_norm: if residual { 0.3 } else { 0.0 },
        gate,
        theta,
        group,
        n_pulses,
        tau: 1.0,
        delta: 0.0,
        control_noise,
        ctrl_during_pulses,
    };
    // Fix the time scale from the drawn coupling strength.
    let j = coupling_strength(&cfg).expect("family scenarios are valid");
    let tj_run = rng.random_range(0.02..0.98 * DOMAIN_TJ);
    let t = tj_run / (m as f64 * j);
    cfg.tau = t / (n_pulses as f64 * (1.0 + width_fraction));
    cfg.delta = width_fraction * cfg.tau;
    let per_site = if coupling == CouplingModel::Local {
        n_bath as f64
    } else {
        1.0
    };
    cfg.bath_norm = j * rng.random_range(0.0..3.0) / per_site;
    cfg
}

fn family_label(f: Family) -> &'static str {
    match f {
        Family::Calibration => "calibration",
        Family::Test => "corpus",
    }
}

/// Piecewise-constant generator with `||H(t)|| = h` on every piece, over
/// `[0, T]` with `hT` in `(0.05, 0.95)`. Returns the generator, `h` and `T`.
pub fn piecewise_instance(family: Family, index: u64) -> (Generator, f64, f64) {
    let mut rng = family.rng(kind::PIECEWISE, index);
    let dim = [2usize, 4][rng.random_range(0..2)];
    let pieces = rng.random_range(2..=5usize);
    let h = 1.0;
    let t = rng.random_range(0.05..0.95) / h;
    let mut lengths: Vec<f64> = (0..pieces).map(|_| rng.random_range(0.2..1.0)).collect();
    let total: f64 = lengths.iter().sum();
    lengths.iter_mut().for_each(|l| *l *= t / total);
    let mut segments = Vec::with_capacity(pieces);
    let mut start = 0.0;
    for (k, len) in lengths.iter().enumerate() {
        let end = if k + 1 == pieces { t } else { start + len };
        segments.push(Segment::constant(
            start,
            end,
            random_hermitian_with_norm(dim, h, &mut rng),
        ));
        start = end;
    }
    let sh = SwitchedHamiltonian::new(segments, dim).expect("contiguous pieces");
    (Generator::Switched(sh), h, t)
}

/// Smooth generator `A + B sin(2 pi t / T)` whose shape scales with `T`, with
/// `||A|| + ||B|| = 1` so that `sup ||H|| <= 1`.
pub fn smooth_instance(family: Family, index: u64, t: f64) -> Generator {
    let mut rng = family.rng(kind::SMOOTH, index);
    let dim = [2usize, 3, 4][rng.random_range(0..3)];
    let split = rng.random_range(0.3..0.7);
    let a = random_hermitian_with_norm(dim, split, &mut rng);
    let b = random_hermitian_with_norm(dim, 1.0 - split, &mut rng);
    Generator::function(dim, Vec::new(), move |s| {
        a.add(&b.scale((TAU * s / t).sin()))
            .expect("same dimension")
    })
}

/// Three constant segments of random Hermitian generators.
pub fn three_segment_instance(family: Family, index: u64) -> SwitchedHamiltonian {
    let mut rng = family.rng(kind::SEGMENTS, index);
    let dim = [2usize, 4, 8][rng.random_range(0..3)];
    let mut start = 0.0;
    let segments = (0..3)
        .map(|_| {
            let end = start + rng.random_range(0.1..1.0);
            let h: Hermitian =
                random_hermitian_with_norm(dim, rng.random_range(0.2..2.0), &mut rng);
            let s = Segment::constant(start, end, h);
            start = end;
            s
        })
        .collect();
    SwitchedHamiltonian::new(segments, dim).expect("contiguous segments")
}

/// The per-qubit-bath Heisenberg family: `n` system qubits, each with its own
/// bath qubit, no gate, XZXZ decoupling.
pub fn per_qubit_family(
    n: usize,
    tau: f64,
    delta: f64,
    sb_scale: f64,
    bath_norm: f64,
    seed: u64,
) -> ScenarioConfig {
    ScenarioConfig {
        label: Some(format!("per-qubit-n{n}")),
        n_sys: n,
        n_bath: n,
        seed,
        m: 1,
        heisenberg_j: 1.0,
        heisenberg_couplings: None,
        sb_scale,
        bath_norm,
        coupling: CouplingModel::Local,
        residual_norm: 0.0,
        gate: GateName::None,
        theta: 0.0,
        group: GroupName::Universal,
        n_pulses: 4,
        tau,
        delta,
        control_noise: 0.0,
        ctrl_during_pulses: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_scenarios_are_valid_and_inside_the_domain() {
        for k in 0..50 {
            let cfg = bound_scenario(Family::Test, k);
            cfg.validate().unwrap();
            let j = coupling_strength(&cfg).unwrap();
            assert!(cfg.m as f64 * cfg.cycle_time() * j < DOMAIN_TJ, "{k}");
        }
    }

    #[test]
    fn families_are_disjoint_and_deterministic() {
        assert_eq!(
            bound_scenario(Family::Test, 3),
            bound_scenario(Family::Test, 3)
        );
        assert_ne!(
            bound_scenario(Family::Test, 3),
            bound_scenario(Family::Calibration, 3)
        );
    }

    #[test]
    fn piecewise_pieces_have_the_stated_norm() {
        let (g, h, t) = piecewise_instance(Family::Test, 1);
        for s in [0.0, 0.3 * t, 0.99 * t] {
            assert!((g.at(s).op_norm() - h).abs() < 1e-12);
        }
    }
}
