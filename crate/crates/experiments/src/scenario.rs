//! Turns a [`ScenarioConfig`] into operators, a simulation and initial states.

use ddbound::decoupling::{trivial_schedule, universal_schedule};
use ddbound::evolution::Simulation;
use ddbound::linalg::{identity, real, DensityMatrix, Hermitian};
use ddbound::model::{
    build_heisenberg_ctrl, build_linear_sb, build_local_bath, build_local_uniform_sb,
    build_random_bath, residual_system_term, BathOperatorSpec, GateSpec, SystemBathSplit,
};
use ddbound::pauli::{sigma_on, Axis};
use ddbound::random::{derive_seed, random_density, random_state, rng_from_seed};
use ddbound::Result;

use crate::config::{CouplingModel, GateName, GroupName, ScenarioConfig};

/// Independent random streams of one scenario.
mod stream {
    pub const COUPLING: u64 = 1;
    pub const BATH: u64 = 2;
    pub const RESIDUAL: u64 = 3;
    pub const SYSTEM_STATE: u64 = 4;
    pub const BATH_STATE: u64 = 5;
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub split: SystemBathSplit,
    pub sim: Simulation,
    pub rho_s: DensityMatrix,
    pub rho_b: DensityMatrix,
}

impl Scenario {
    pub fn rho0(&self) -> DensityMatrix {
        self.rho_s.tensor(&self.rho_b)
    }
}

/// `-(sigma_0 . sigma_1 + I)/2`: `+1` on the singlet of qubits 0 and 1 and
/// `-1` on their triplet. Built from exchange alone, so it commutes with
/// collective rotations and acts as logical `Z` on the singlet/triplet-zero
/// code.
pub fn logical_z_on_dfs(n_sys: usize) -> Result<Hermitian> {
    let mut h = identity(1 << n_sys);
    for axis in Axis::XYZ {
        h += sigma_on(axis, 0, n_sys)? * sigma_on(axis, 1, n_sys)?;
    }
    Hermitian::new(h * real(-0.5))
}

pub fn gate_operator(cfg: &ScenarioConfig) -> Result<Hermitian> {
    match cfg.gate {
        GateName::None => Ok(Hermitian::zeros(1 << cfg.n_sys)),
        GateName::LogicalZOnDfs => logical_z_on_dfs(cfg.n_sys),
        GateName::HeisenbergExchange => build_heisenberg_ctrl(cfg.n_sys, &cfg.couplings()),
    }
}

/// `H_err` and `H_B` of a scenario.
pub fn error_and_bath(cfg: &ScenarioConfig) -> Result<(Hermitian, Hermitian)> {
    let (n_sys, n_bath) = (cfg.n_sys, cfg.n_bath);
    let seed = |s| derive_seed(cfg.seed, s);
    let (mut h_err, h_bath) = match cfg.coupling {
        CouplingModel::Global => {
            let coeffs: Vec<_> = (0..n_sys)
                .flat_map(|j| {
                    Axis::XYZ.map(|a| (j, a, BathOperatorSpec::Random { norm: cfg.sb_scale }))
                })
                .collect();
            (
                build_linear_sb(n_sys, n_bath, &coeffs, seed(stream::COUPLING))?,
                build_random_bath(n_bath, cfg.bath_norm, seed(stream::BATH))?,
            )
        }
        CouplingModel::Local => (
            build_local_uniform_sb(n_sys, cfg.sb_scale, seed(stream::COUPLING))?,
            build_local_bath(n_bath, cfg.bath_norm, seed(stream::BATH))?,
        ),
    };
    if cfg.residual_norm > 0.0 {
        h_err = h_err.add(&residual_system_term(
            n_sys,
            n_bath,
            cfg.residual_norm,
            seed(stream::RESIDUAL),
        )?)?;
    }
    Ok((h_err, h_bath))
}

/// `||H_err||` without building the rest of the scenario.
pub fn coupling_strength(cfg: &ScenarioConfig) -> Result<f64> {
    Ok(error_and_bath(cfg)?.0.op_norm())
}

pub fn build(cfg: &ScenarioConfig) -> Result<Scenario> {
    let r = gate_operator(cfg)?;
    let (h_err, h_bath) = error_and_bath(cfg)?;
    let split = SystemBathSplit::new(cfg.n_sys, cfg.n_bath, r.clone(), h_err, h_bath)?;
    let gate = GateSpec::new(r, cfg.theta)?;
    let schedule = match cfg.group {
        GroupName::Universal => universal_schedule(cfg.n_sys, cfg.tau, cfg.delta)?,
        GroupName::Trivial => trivial_schedule(cfg.n_sys, cfg.n_pulses, cfg.tau, cfg.delta)?,
    };
    let sim = Simulation::new(
        &split,
        gate,
        schedule,
        cfg.m,
        cfg.control_noise,
        cfg.ctrl_during_pulses,
    )?;
    let psi = random_state(
        1 << cfg.n_sys,
        &mut rng_from_seed(derive_seed(cfg.seed, stream::SYSTEM_STATE)),
    );
    let rho_s = DensityMatrix::pure(&psi)?;
    let rho_b = random_density(
        1 << cfg.n_bath,
        &mut rng_from_seed(derive_seed(cfg.seed, stream::BATH_STATE)),
    );
    Ok(Scenario {
        config: cfg.clone(),
        split,
        sim,
        rho_s,
        rho_b,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ddbound::linalg::{commutator, op_norm};
    use ddbound::pauli::collective;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::from_toml(text).unwrap()
    }

    #[test]
    fn dfs_operator_commutes_with_collective_rotations_and_has_unit_norm() {
        for n in 2..=4 {
            let z = logical_z_on_dfs(n).unwrap();
            assert!((z.op_norm() - 1.0).abs() < 1e-14);
            for axis in Axis::XYZ {
                assert!(op_norm(&commutator(z.matrix(), &collective(axis, n).unwrap())) < 1e-13);
            }
        }
    }

    #[test]
    fn builds_are_deterministic() {
        let c = cfg("n_sys = 2\nn_bath = 1\ntau = 0.1\nseed = 9\ngate = \"heisenberg-exchange\"\ntheta = 0.5\n");
        let (a, b) = (build(&c).unwrap(), build(&c).unwrap());
        assert_eq!(a.split, b.split);
        assert_eq!(a.rho_s.matrix(), b.rho_s.matrix());
    }

    #[test]
    fn local_model_has_requested_bath_norm() {
        let c = cfg("n_sys = 2\nn_bath = 2\ntau = 0.1\ncoupling = \"local\"\nbath_norm = 0.2\n");
        let sc = build(&c).unwrap();
        assert!((sc.split.h_bath.op_norm() - 0.4).abs() < 1e-12);
    }

    #[test]
    fn residual_term_breaks_the_decoupling_condition() {
        let c = cfg("n_sys = 2\nn_bath = 1\ntau = 0.1\nresidual_norm = 0.1\n");
        let sc = build(&c).unwrap();
        let check =
            ddbound::decoupling::check_decoupling_condition(&sc.sim.group, &sc.split.h_err, 1e-10)
                .unwrap();
        assert!(!check.satisfied);
    }
}
