//! Pauli operators on qubit registers. Qubit 0 is the leftmost tensor factor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{c, identity, real, tensor_all, CMat};

/// Largest register handled; `2^12` already means 16M complex entries.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Axis {
    I,
    X,
    Y,
    Z,
}

impl Axis {
    pub const XYZ: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Axis::I => "I",
            Axis::X => "X",
            Axis::Y => "Y",
            Axis::Z => "Z",
        };
        f.write_str(s)
    }
}

impl TryFrom<char> for Axis {
    type Error = Error;

    fn try_from(ch: char) -> Result<Self> {
        match ch.to_ascii_uppercase() {
            'I' => Ok(Axis::I),
            'X' => Ok(Axis::X),
            'Y' => Ok(Axis::Y),
            'Z' => Ok(Axis::Z),
            other => Err(Error::InvalidParameter(format!(
                "unknown Pauli label '{other}'"
            ))),
        }
    }
}

/// Single-qubit Pauli matrix.
pub fn sigma(axis: Axis) -> CMat {
    let o = real(0.0);
    let l = real(1.0);
    match axis {
        Axis::I => identity(2),
        Axis::X => CMat::from_row_slice(2, 2, &[o, l, l, o]),
        Axis::Y => CMat::from_row_slice(2, 2, &[o, c(0.0, -1.0), c(0.0, 1.0), o]),
        Axis::Z => CMat::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

pub fn check_qubits(n: usize) -> Result<()> {
    if n > MAX_QUBITS {
        return Err(Error::DimensionCap {
            qubits: n,
            cap: MAX_QUBITS,
        });
    }
    Ok(())
}

/// `op` acting on qubit `k` of an `n`-qubit register.
pub fn embed(op: &CMat, k: usize, n: usize) -> Result<CMat> {
    check_qubits(n)?;
    if k >= n {
        return Err(Error::IndexOutOfRange { index: k, n });
    }
    let id = identity(2);
    Ok(tensor_all((0..n).map(|j| if j == k { op } else { &id })))
}

/// `sigma_k^axis` on an `n`-qubit register.
pub fn sigma_on(axis: Axis, k: usize, n: usize) -> Result<CMat> {
    embed(&sigma(axis), k, n)
}

/// Collective operator `sum_j sigma_j^axis`.
pub fn collective(axis: Axis, n: usize) -> Result<CMat> {
    check_qubits(n)?;
    let dim = 1usize << n;
    let mut sum = CMat::zeros(dim, dim);
    for k in 0..n {
        sum += sigma_on(axis, k, n)?;
    }
    Ok(sum)
}

/// Global Pauli `⊗_j sigma_j^axis`.
pub fn global(axis: Axis, n: usize) -> Result<CMat> {
    check_qubits(n)?;
    let s = sigma(axis);
    Ok(tensor_all(std::iter::repeat_n(&s, n)))
}

/// A tensor product of single-qubit Paulis such as `XIZ`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PauliString(pub Vec<Axis>);

impl PauliString {
    pub fn uniform(axis: Axis, n: usize) -> Self {
        PauliString(vec![axis; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn matrix(&self) -> Result<CMat> {
        check_qubits(self.len())?;
        let factors: Vec<CMat> = self.0.iter().map(|&a| sigma(a)).collect();
        Ok(tensor_all(factors.iter()))
    }

    /// `sum_j sigma_j` over the non-identity positions; `exp(-i pi/2 * this)`
    /// equals `(-i)^w` times [`PauliString::matrix`], `w` the weight.
    pub fn area_generator(&self) -> Result<CMat> {
        check_qubits(self.len())?;
        let n = self.len();
        let dim = 1usize << n;
        let mut sum = CMat::zeros(dim, dim);
        for (k, &a) in self.0.iter().enumerate() {
            if a != Axis::I {
                sum += sigma_on(a, k, n)?;
            }
        }
        Ok(sum)
    }

    pub fn weight(&self) -> usize {
        self.0.iter().filter(|&&a| a != Axis::I).count()
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let axes = s
            .trim()
            .chars()
            .map(Axis::try_from)
            .collect::<Result<Vec<_>>>()?;
        if axes.is_empty() {
            return Err(Error::InvalidParameter("empty Pauli string".into()));
        }
        Ok(PauliString(axes))
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for a in &self.0 {
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{expm_hermitian, op_norm, Hermitian};

    #[test]
    fn pauli_algebra() {
        let (x, y, z) = (sigma(Axis::X), sigma(Axis::Y), sigma(Axis::Z));
        assert_eq!(&x * &y, &z * c(0.0, 1.0));
        assert_eq!(&x * &x, identity(2));
    }

    #[test]
    fn embedding_order() {
        let m = sigma_on(Axis::Z, 0, 2).unwrap();
        assert_eq!(m[(0, 0)], real(1.0));
        assert_eq!(m[(1, 1)], real(1.0));
        assert_eq!(m[(2, 2)], real(-1.0));
    }

    #[test]
    fn area_generator_gives_global_pauli_up_to_phase() {
        for s in ["X", "XZ", "YYI", "ZXY"] {
            let p: PauliString = s.parse().unwrap();
            let h = Hermitian::new(p.area_generator().unwrap()).unwrap();
            let u = expm_hermitian(&h, std::f64::consts::FRAC_PI_2);
            let phase = c(0.0, -1.0).powi(p.weight() as i32);
            assert!(
                op_norm(&(u.matrix() - p.matrix().unwrap() * phase)) < 1e-12,
                "{s}"
            );
        }
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(sigma_on(Axis::X, 3, 2).is_err());
        assert!(global(Axis::X, MAX_QUBITS + 1).is_err());
        assert!("XQ".parse::<PauliString>().is_err());
    }
}
