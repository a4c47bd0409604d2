//! Control, error and bath Hamiltonians on a system ⊗ bath register.

use crate::error::{Error, Result};
use crate::linalg::{identity, real, tensor, CMat, Hermitian, Unitary};
use crate::pauli::{sigma, sigma_on, Axis};
use crate::random::{derive_seed, random_hermitian_with_norm, rng_from_seed};

/// Largest total register (system plus bath) accepted by the model builders.
pub const MAX_TOTAL_QUBITS: usize = 8;

fn check_total(n_sys: usize, n_bath: usize) -> Result<()> {
    let total = n_sys + n_bath;
    if total > MAX_TOTAL_QUBITS {
        return Err(Error::DimensionCap {
            qubits: total,
            cap: MAX_TOTAL_QUBITS,
        });
    }
    Ok(())
}

/// A logic gate `exp(-i theta R)` with `||R||_inf = 1` (or `R = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct GateSpec {
    pub r: Hermitian,
    pub theta: f64,
}

impl GateSpec {
    /// Normalises `r` to unit operator norm unless it is zero.
    pub fn new(r: Hermitian, theta: f64) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("gate angle {theta}")));
        }
        let n = r.op_norm();
        let r = if n > 0.0 { r.scale(1.0 / n) } else { r };
        Ok(GateSpec { r, theta })
    }

    pub fn none(dim_sys: usize) -> Self {
        GateSpec {
            r: Hermitian::zeros(dim_sys),
            theta: 0.0,
        }
    }

    pub fn target(&self) -> Unitary {
        crate::linalg::expm_hermitian(&self.r, self.theta)
    }
}

/// The three-part Hamiltonian split. `h_ctrl` and `h_bath` are stored on their
/// own factors, `h_err` on the full register.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemBathSplit {
    pub n_sys: usize,
    pub n_bath: usize,
    pub h_ctrl: Hermitian,
    pub h_err: Hermitian,
    pub h_bath: Hermitian,
}

impl SystemBathSplit {
    pub fn new(
        n_sys: usize,
        n_bath: usize,
        h_ctrl: Hermitian,
        h_err: Hermitian,
        h_bath: Hermitian,
    ) -> Result<Self> {
        check_total(n_sys, n_bath)?;
        let (ds, db) = (1usize << n_sys, 1usize << n_bath);
        for (got, want) in [
            (h_ctrl.dim(), ds),
            (h_err.dim(), ds * db),
            (h_bath.dim(), db),
        ] {
            if got != want {
                return Err(Error::DimensionMismatch {
                    left: got,
                    right: want,
                });
            }
        }
        Ok(SystemBathSplit {
            n_sys,
            n_bath,
            h_ctrl,
            h_err,
            h_bath,
        })
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

    pub fn ctrl_embedded(&self) -> Hermitian {
        self.h_ctrl.tensor(&Hermitian::identity(self.dim_bath()))
    }

    pub fn bath_embedded(&self) -> Hermitian {
        Hermitian::identity(self.dim_sys()).tensor(&self.h_bath)
    }

    /// `H_ctrl ⊗ I + I ⊗ H_B`.
    pub fn h_sec(&self) -> Hermitian {
        self.ctrl_embedded()
            .add(&self.bath_embedded())
            .expect("embedded dimensions agree")
    }

    pub fn with_ctrl(&self, h_ctrl: Hermitian) -> Result<Self> {
        SystemBathSplit::new(
            self.n_sys,
            self.n_bath,
            h_ctrl,
            self.h_err.clone(),
            self.h_bath.clone(),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StrengthReport {
    /// `||H_err||_inf`.
    pub j: f64,
    /// `||H_sec||_inf`.
    pub beta: f64,
}

pub fn strengths(split: &SystemBathSplit) -> StrengthReport {
    StrengthReport {
        j: split.h_err.op_norm(),
        beta: split.h_sec().op_norm(),
    }
}

/// `sum_{i<j} J_ij (XX + YY + ZZ)` on `n_sys` qubits.
pub fn build_heisenberg_ctrl(n_sys: usize, couplings: &[(usize, usize, f64)]) -> Result<Hermitian> {
    crate::pauli::check_qubits(n_sys)?;
    let dim = 1usize << n_sys;
    let mut h = CMat::zeros(dim, dim);
    for &(i, j, value) in couplings {
        for k in [i, j] {
            if k >= n_sys {
                return Err(Error::IndexOutOfRange { index: k, n: n_sys });
            }
        }
        if i >= j {
            return Err(Error::InvalidParameter(format!(
                "coupling indices must satisfy i < j, got ({i}, {j})"
            )));
        }
        for axis in Axis::XYZ {
            h += sigma_on(axis, i, n_sys)? * sigma_on(axis, j, n_sys)? * real(value);
        }
    }
    Hermitian::new(h)
}

/// Uniform nearest-neighbour chain couplings.
pub fn chain_couplings(n_sys: usize, value: f64) -> Vec<(usize, usize, f64)> {
    (1..n_sys).map(|i| (i - 1, i, value)).collect()
}

/// How a bath operator `B_j^alpha` of the linear coupling is produced.
#[derive(Debug, Clone, PartialEq)]
pub enum BathOperatorSpec {
    Zero,
    /// A fixed operator on the whole bath.
    Explicit(Hermitian),
    /// Seeded random Hermitian on the whole bath, scaled to this operator norm.
    Random {
        norm: f64,
    },
    /// Seeded random single-qubit Hermitian on one bath qubit.
    LocalRandom {
        qubit: usize,
        norm: f64,
    },
}

/// `sum_{j, alpha} sigma_j^alpha ⊗ B_j^alpha`.
///
/// Random bath operators draw from independent streams keyed by `(j, alpha)`,
/// so adding a term never changes the others.
pub fn build_linear_sb(
    n_sys: usize,
    n_bath: usize,
    coeffs: &[(usize, Axis, BathOperatorSpec)],
    seed: u64,
) -> Result<Hermitian> {
    check_total(n_sys, n_bath)?;
    let (ds, db) = (1usize << n_sys, 1usize << n_bath);
    let mut h = CMat::zeros(ds * db, ds * db);
    for (j, axis, spec) in coeffs {
        let (j, axis) = (*j, *axis);
        if j >= n_sys {
            return Err(Error::IndexOutOfRange { index: j, n: n_sys });
        }
        if axis == Axis::I {
            return Err(Error::InvalidParameter(
                "linear coupling needs a non-identity Pauli".into(),
            ));
        }
        let stream = derive_seed(seed, (j as u64) << 2 | axis as u64);
        let b = match spec {
            BathOperatorSpec::Zero => continue,
            BathOperatorSpec::Explicit(b) => {
                if b.dim() != db {
                    return Err(Error::DimensionMismatch {
                        left: b.dim(),
                        right: db,
                    });
                }
                b.matrix().clone()
            }
            BathOperatorSpec::Random { norm } => {
                check_norm(*norm)?;
                random_hermitian_with_norm(db, *norm, &mut rng_from_seed(stream)).into_matrix()
            }
            BathOperatorSpec::LocalRandom { qubit, norm } => {
                check_norm(*norm)?;
                let local = random_hermitian_with_norm(2, *norm, &mut rng_from_seed(stream));
                crate::pauli::embed(local.matrix(), *qubit, n_bath)?
            }
        };
        h += tensor(&sigma_on(axis, j, n_sys)?, &b);
    }
    Hermitian::new(h)
}

fn check_norm(norm: f64) -> Result<()> {
    if !(norm >= 0.0 && norm.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "operator norm must be finite and nonnegative, got {norm}"
        )));
    }
    Ok(())
}

/// Seeded random bath Hamiltonian with `||H_B||_inf = target_norm`.
pub fn build_random_bath(n_bath: usize, target_norm: f64, seed: u64) -> Result<Hermitian> {
    check_total(0, n_bath)?;
    check_norm(target_norm)?;
    Ok(random_hermitian_with_norm(
        1 << n_bath,
        target_norm,
        &mut rng_from_seed(seed),
    ))
}

/// `sum_k h_k` with one identical seeded single-qubit term per bath qubit, so
/// that `||H_B||_inf = n_bath * per_qubit_norm` exactly.
pub fn build_local_bath(n_bath: usize, per_qubit_norm: f64, seed: u64) -> Result<Hermitian> {
    check_total(0, n_bath)?;
    check_norm(per_qubit_norm)?;
    let local = random_hermitian_with_norm(2, per_qubit_norm, &mut rng_from_seed(seed));
    let dim = 1usize << n_bath;
    let mut h = CMat::zeros(dim, dim);
    for k in 0..n_bath {
        h += crate::pauli::embed(local.matrix(), k, n_bath)?;
    }
    Hermitian::new(h)
}

/// Linear coupling in which system qubit `j` talks only to bath qubit `j`
/// through the same three single-qubit operators `b^alpha`, each of operator
/// norm `scale`. The coupling strength is then exactly `n` times that of one
/// site.
pub fn build_local_uniform_sb(n: usize, scale: f64, seed: u64) -> Result<Hermitian> {
    check_total(n, n)?;
    check_norm(scale)?;
    let mut rng = rng_from_seed(seed);
    let b: Vec<Hermitian> = Axis::XYZ
        .iter()
        .map(|_| random_hermitian_with_norm(2, scale, &mut rng))
        .collect();
    let mut site = CMat::zeros(4, 4);
    for (axis, b) in Axis::XYZ.iter().zip(&b) {
        site += tensor(&sigma(*axis), b.matrix());
    }
    let dim = 1usize << (2 * n);
    let mut h = CMat::zeros(dim, dim);
    for j in 0..n {
        h += embed_site(&site, j, n);
    }
    Hermitian::new(h)
}

/// Embeds a (system qubit ⊗ bath qubit) operator acting on system qubit `j`
/// and bath qubit `j` of an `n + n` register.
fn embed_site(site: &CMat, j: usize, n: usize) -> CMat {
    let dim = 1usize << (2 * n);
    let (sys_bit, bath_bit) = (2 * n - 1 - j, n - 1 - j);
    let mask = (1usize << sys_bit) | (1usize << bath_bit);
    let local = |idx: usize| ((idx >> sys_bit) & 1) << 1 | ((idx >> bath_bit) & 1);
    CMat::from_fn(dim, dim, |r, c| {
        if (r & !mask) != (c & !mask) {
            return real(0.0);
        }
        site[(local(r), local(c))]
    })
}

/// A system-only term `H_res ⊗ I_B`, for residual errors not caused by the bath.
pub fn residual_system_term(
    n_sys: usize,
    n_bath: usize,
    norm: f64,
    seed: u64,
) -> Result<Hermitian> {
    check_total(n_sys, n_bath)?;
    check_norm(norm)?;
    let h = random_hermitian_with_norm(1 << n_sys, norm, &mut rng_from_seed(seed));
    Ok(h.tensor(&Hermitian::new(identity(1 << n_bath))?))
}
