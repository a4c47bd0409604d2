//! Scenario and sweep configuration files (TOML).
//!
//! Qubit indices are 0-based throughout.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};

use ddbound::model::MAX_TOTAL_QUBITS;

/// Logic operator generating the gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum GateName {
    #[default]
    #[serde(rename = "none")]
    None,
    /// `|S><S| - |T0><T0|` on the singlet/triplet-zero pair of qubits 0 and 1.
    #[serde(rename = "logical-Z-on-DFS")]
    LogicalZOnDfs,
    /// The configured Heisenberg couplings.
    #[serde(rename = "heisenberg-exchange")]
    HeisenbergExchange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GroupName {
    /// Global `{I, X, Y, Z}` via the XZXZ cycle.
    #[default]
    Universal,
    /// `N` identity pulses ("do nothing").
    Trivial,
}

/// How the system couples to the bath.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum CouplingModel {
    /// Every `B_j^alpha` is an independent random operator on the whole bath.
    #[default]
    Global,
    /// System qubit `j` couples only to bath qubit `j`; needs `n_bath = n_sys`.
    Local,
}

fn default_one() -> f64 {
    1.0
}

fn default_m() -> usize {
    1
}

fn default_sb_scale() -> f64 {
    0.05
}

fn default_bath_norm() -> f64 {
    0.2
}

fn default_n_pulses() -> usize {
    4
}

/// One simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub n_sys: usize,
    pub n_bath: usize,
    #[serde(default)]
    pub seed: u64,
    /// Number of decoupling cycles.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Uniform nearest-neighbour exchange `J_ij` for the Heisenberg gate.
    #[serde(default = "default_one")]
    pub heisenberg_j: f64,
    /// Explicit `[i, j, J_ij]` triples; replaces the uniform chain when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heisenberg_couplings: Option<Vec<(usize, usize, f64)>>,
    /// Operator norm of each bath operator `B_j^alpha`.
    #[serde(default = "default_sb_scale")]
    pub sb_scale: f64,
    /// `||H_B||` for the global model, per bath qubit for the local one.
    #[serde(default = "default_bath_norm")]
    pub bath_norm: f64,
    #[serde(default)]
    pub coupling: CouplingModel,
    /// Norm of a residual system-only error term.
    #[serde(default)]
    pub residual_norm: f64,
    #[serde(default)]
    pub gate: GateName,
    /// Total gate angle over all `m` cycles.
    #[serde(default)]
    pub theta: f64,
    #[serde(default)]
    pub group: GroupName,
    /// Pulses per cycle.
    #[serde(default = "default_n_pulses")]
    pub n_pulses: usize,
    pub tau: f64,
    #[serde(default)]
    pub delta: f64,
    /// Relative over-rotation of the applied gate.
    #[serde(default)]
    pub control_noise: f64,
    #[serde(default)]
    pub ctrl_during_pulses: bool,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_sys >= 1, "n_sys must be at least 1");
        ensure!(
            self.n_sys + self.n_bath <= MAX_TOTAL_QUBITS,
            "2^(n_sys + n_bath) = 2^{} exceeds 256",
            self.n_sys + self.n_bath
        );
        ensure!(self.m >= 1, "m must be at least 1");
        for (name, v) in [
            ("tau", self.tau),
            ("delta", self.delta),
            ("sb_scale", self.sb_scale),
            ("bath_norm", self.bath_norm),
            ("residual_norm", self.residual_norm),
        ] {
            ensure!(
                v.is_finite() && v >= 0.0,
                "{name} must be finite and nonnegative, got {v}"
            );
        }
        ensure!(self.tau + self.delta > 0.0, "tau + delta must be positive");
        ensure!(
            self.theta.is_finite() && self.control_noise.is_finite(),
            "theta and control_noise must be finite"
        );
        ensure!(self.heisenberg_j.is_finite(), "heisenberg_j must be finite");
        match self.group {
            GroupName::Universal => {
                ensure!(self.n_pulses == 4, "the universal group uses N = 4 pulses")
            }
            GroupName::Trivial => ensure!(self.n_pulses >= 1, "n_pulses must be at least 1"),
        }
        if self.coupling == CouplingModel::Local {
            ensure!(
                self.n_bath == self.n_sys,
                "local coupling needs n_bath = n_sys"
            );
        }
        if self.gate != GateName::None {
            ensure!(
                self.n_sys >= 2,
                "gate {:?} needs at least two system qubits",
                self.gate
            );
        }
        if let Some(pairs) = &self.heisenberg_couplings {
            for &(i, j, v) in pairs {
                ensure!(
                    i < j && j < self.n_sys,
                    "coupling ({i}, {j}) needs 0 <= i < j < n_sys"
                );
                ensure!(v.is_finite(), "coupling ({i}, {j}) is not finite");
            }
        }
        Ok(())
    }

    /// Heisenberg couplings in effect.
    pub fn couplings(&self) -> Vec<(usize, usize, f64)> {
        match &self.heisenberg_couplings {
            Some(c) => c.clone(),
            None => ddbound::model::chain_couplings(self.n_sys, self.heisenberg_j),
        }
    }

    pub fn cycle_time(&self) -> f64 {
        self.n_pulses as f64 * (self.tau + self.delta)
    }
}

fn default_target() -> f64 {
    0.1
}

fn default_m_axis() -> Vec<usize> {
    vec![1]
}

fn default_replicates() -> usize {
    1
}

/// Grid over register size, cycle count and pulse interval. Each grid point
/// is the per-qubit-bath family of `fixed` with `n_sys = n_bath = n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub n_sys: Vec<usize>,
    #[serde(default = "default_m_axis")]
    pub m: Vec<usize>,
    pub tau: Vec<f64>,
    #[serde(default = "default_target")]
    pub target_error: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    /// Largest cycle count searched for `m_star` and `m_hat`.
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    #[serde(default)]
    pub fixed: SweepFixed,
}

fn default_m_max() -> usize {
    1 << 20
}

/// Fields shared by every grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFixed {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_sb_scale")]
    pub sb_scale: f64,
    #[serde(default = "default_bath_norm")]
    pub bath_norm: f64,
    #[serde(default)]
    pub delta: f64,
}

impl Default for SweepFixed {
    fn default() -> Self {
        SweepFixed {
            seed: 0,
            sb_scale: default_sb_scale(),
            bath_norm: default_bath_norm(),
            delta: 0.0,
        }
    }
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sys.is_empty() || self.m.is_empty() || self.tau.is_empty() {
            bail!("sweep axes n_sys, m and tau must be nonempty");
        }
        ensure!(
            self.target_error > 0.0 && self.target_error < 1.0,
            "target_error must lie in (0, 1)"
        );
        ensure!(self.replicates >= 1, "replicates must be at least 1");
        ensure!(self.m_max >= 1, "m_max must be at least 1");
        for &n in &self.n_sys {
            ensure!(
                n >= 1 && 2 * n <= MAX_TOTAL_QUBITS,
                "n_sys = {n} outside 1..=4"
            );
        }
        for &m in &self.m {
            ensure!(m >= 1, "m axis entries must be at least 1");
        }
        for &t in &self.tau {
            ensure!(
                t.is_finite() && t > 0.0,
                "tau axis entries must be positive"
            );
        }
        let f = &self.fixed;
        for (name, v) in [
            ("sb_scale", f.sb_scale),
            ("bath_norm", f.bath_norm),
            ("delta", f.delta),
        ] {
            ensure!(
                v.is_finite() && v >= 0.0,
                "{name} must be finite and nonnegative"
            );
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_scenario_takes_defaults() {
        let cfg = ScenarioConfig::from_toml("n_sys = 1\nn_bath = 1\ntau = 0.1\n").unwrap();
        assert_eq!(cfg.m, 1);
        assert_eq!(cfg.n_pulses, 4);
        assert_eq!(cfg.group, GroupName::Universal);
        assert_eq!(cfg.gate, GateName::None);
        assert_eq!(cfg.sb_scale, 0.05);
    }

    #[test]
    fn round_trips_through_toml() {
        let text = "n_sys = 2\nn_bath = 1\ntau = 0.05\ngate = \"logical-Z-on-DFS\"\ntheta = 1.0\ncoupling = \"global\"\n";
        let cfg = ScenarioConfig::from_toml(text).unwrap();
        assert_eq!(cfg.gate, GateName::LogicalZOnDfs);
        assert_eq!(ScenarioConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_scenarios() {
        for text in [
            "n_sys = 5\nn_bath = 4\ntau = 0.1\n",
            "n_sys = 1\nn_bath = 1\ntau = -0.1\n",
            "n_sys = 1\nn_bath = 1\ntau = 0.1\nm = 0\n",
            "n_sys = 1\nn_bath = 1\ntau = 0.1\nn_pulses = 3\n",
            "n_sys = 1\nn_bath = 1\ntau = 0.1\ngate = \"heisenberg-exchange\"\n",
            "n_sys = 2\nn_bath = 1\ntau = 0.1\ncoupling = \"local\"\n",
            "n_sys = 2\nn_bath = 1\ntau = 0.1\nheisenberg_couplings = [[1, 0, 1.0]]\n",
            "n_sys = 1\nn_bath = 1\ntau = 0.1\nunknown_key = 3\n",
        ] {
            assert!(ScenarioConfig::from_toml(text).is_err(), "{text}");
        }
    }

    #[test]
    fn sweep_validation() {
        let ok = SweepSpec::from_toml("n_sys = [1, 2]\ntau = [0.025]\n").unwrap();
        assert_eq!(ok.m, vec![1]);
        assert_eq!(ok.target_error, 0.1);
        assert!(SweepSpec::from_toml("n_sys = []\ntau = [0.025]\n").is_err());
        assert!(SweepSpec::from_toml("n_sys = [1]\ntau = [0.025]\ntarget_error = 1.5\n").is_err());
    }
}
