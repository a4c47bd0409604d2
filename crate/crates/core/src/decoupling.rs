//! Pulse schedules, decoupling groups and the group projection.

use std::f64::consts::FRAC_PI_2;

use crate::error::{Error, Result};
use crate::linalg::{
    commutator, equal_up_to_phase, expm_hermitian, identity, op_norm, phase_overlap, real,
    relative_phase, CMat, Hermitian, Unitary,
};
use crate::pauli::{collective, global, Axis, PauliString};

/// Tolerance for phase-insensitive unitary comparisons.
pub const PHASE_TOL: f64 = 1e-12;
/// Default tolerance for the exact algebraic conditions.
pub const CONDITION_TOL: f64 = 1e-10;

/// A rectangular pulse. `area` is `width * H_P`, so the ideal unitary
/// `exp(-i area)` does not depend on the width.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub area: Hermitian,
    pub width: f64,
    unitary: Unitary,
}

impl Pulse {
    pub fn new(area: Hermitian, width: f64) -> Result<Self> {
        if !(width >= 0.0 && width.is_finite()) {
            return Err(Error::InvalidSchedule(format!("pulse width {width}")));
        }
        let unitary = expm_hermitian(&area, 1.0);
        Ok(Pulse {
            area,
            width,
            unitary,
        })
    }

    /// `H_P = area / width`; `None` for an instantaneous kick.
    pub fn generator(&self) -> Option<Hermitian> {
        (self.width > 0.0).then(|| self.area.scale(1.0 / self.width))
    }

    pub fn unitary(&self) -> &Unitary {
        &self.unitary
    }

    pub fn dim(&self) -> usize {
        self.area.dim()
    }
}

/// One decoupling cycle: segment `j` is a free interval of length `tau`
/// followed by pulse `j` of width `delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule {
    pub pulses: Vec<Pulse>,
    pub tau: f64,
    pub delta: f64,
}

impl PulseSchedule {
    pub fn new(pulses: Vec<Pulse>, tau: f64, delta: f64) -> Result<Self> {
        if pulses.is_empty() {
            return Err(Error::InvalidSchedule(
                "at least one pulse is required".into(),
            ));
        }
        if !(tau >= 0.0 && tau.is_finite() && delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidSchedule(format!(
                "tau = {tau}, delta = {delta}"
            )));
        }
        let dim = pulses[0].dim();
        for p in &pulses {
            if p.dim() != dim {
                return Err(Error::DimensionMismatch {
                    left: p.dim(),
                    right: dim,
                });
            }
            if (p.width - delta).abs() > 1e-15 * delta.max(1.0) {
                return Err(Error::InvalidSchedule(format!(
                    "pulse width {} differs from delta {delta}",
                    p.width
                )));
            }
        }
        Ok(PulseSchedule { pulses, tau, delta })
    }

    /// Builds pulses of width `delta` from their areas.
    pub fn from_areas(areas: Vec<Hermitian>, tau: f64, delta: f64) -> Result<Self> {
        let pulses = areas
            .into_iter()
            .map(|a| Pulse::new(a, delta))
            .collect::<Result<Vec<_>>>()?;
        PulseSchedule::new(pulses, tau, delta)
    }

    pub fn n(&self) -> usize {
        self.pulses.len()
    }

    pub fn dim(&self) -> usize {
        self.pulses[0].dim()
    }

    pub fn cycle_time(&self) -> f64 {
        self.n() as f64 * (self.tau + self.delta)
    }

    /// Total pulse time `N delta`.
    pub fn pulse_time(&self) -> f64 {
        self.n() as f64 * self.delta
    }

    /// `P_N ... P_1`.
    pub fn pulse_product(&self) -> Unitary {
        self.pulses
            .iter()
            .fold(Unitary::identity(self.dim()), |acc, p| {
                p.unitary().then_after(&acc)
            })
    }

    /// Shifts the last pulse area by a multiple of the identity so that
    /// `P_N ... P_1 = I` exactly, not merely up to phase. Without this the
    /// leftover phase shows up as a spurious identity part of the error phase.
    pub fn phase_normalized(&self) -> Result<Self> {
        let product = self.pulse_product();
        let id = identity(self.dim());
        let overlap = phase_overlap(&id, product.matrix());
        if 1.0 - overlap > PHASE_TOL {
            return Err(Error::PulseProductNotIdentity { overlap });
        }
        let phi = relative_phase(&id, product.matrix());
        let mut pulses = self.pulses.clone();
        let last = pulses.last_mut().expect("schedule is nonempty");
        let shifted = last.area.add(&Hermitian::identity(self.dim()).scale(phi))?;
        *last = Pulse::new(shifted, last.width)?;
        PulseSchedule::new(pulses, self.tau, self.delta)
    }

    /// Pulse generators `H_P^(j)` for finite widths; empty for kicks.
    pub fn generators(&self) -> Vec<Hermitian> {
        self.pulses.iter().filter_map(Pulse::generator).collect()
    }
}

/// Ordered unitaries `D_1 = I, D_2, ..., D_N` on the system.
#[derive(Debug, Clone, PartialEq)]
pub struct DecouplingGroup {
    pub elements: Vec<Unitary>,
}

impl DecouplingGroup {
    /// Requires `D_1 = I` up to a global phase.
    pub fn new(elements: Vec<Unitary>) -> Result<Self> {
        let first = elements
            .first()
            .ok_or_else(|| Error::InvalidSchedule("empty group".into()))?;
        let overlap = phase_overlap(&identity(first.dim()), first.matrix());
        if 1.0 - overlap > PHASE_TOL {
            return Err(Error::PulseProductNotIdentity { overlap });
        }
        let dim = first.dim();
        if let Some(bad) = elements.iter().find(|d| d.dim() != dim) {
            return Err(Error::DimensionMismatch {
                left: bad.dim(),
                right: dim,
            });
        }
        Ok(DecouplingGroup { elements })
    }

    pub fn trivial(dim: usize, n: usize) -> Self {
        DecouplingGroup {
            elements: vec![Unitary::identity(dim); n.max(1)],
        }
    }

    pub fn n(&self) -> usize {
        self.elements.len()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    /// Elements lifted to `D_j ⊗ I_B`.
    pub fn embedded(&self, dim_bath: usize) -> Vec<Unitary> {
        let ib = Unitary::identity(dim_bath);
        self.elements.iter().map(|d| d.tensor(&ib)).collect()
    }

    /// Whether every `D_k^dag D_j` is an element up to a global phase.
    pub fn is_closed(&self) -> bool {
        self.elements.iter().all(|dk| {
            self.elements.iter().all(|dj| {
                let prod = dk.matrix().adjoint() * dj.matrix();
                self.elements
                    .iter()
                    .any(|e| equal_up_to_phase(e.matrix(), &prod, 1e-10))
            })
        })
    }
}

/// `D_j = P_N ... P_j` from the ideal pulse unitaries.
pub fn group_from_pulses(schedule: &PulseSchedule) -> Result<DecouplingGroup> {
    let n = schedule.n();
    let mut elements = vec![Unitary::identity(schedule.dim()); n];
    let mut acc = Unitary::identity(schedule.dim());
    for j in (0..n).rev() {
        acc = acc.then_after(schedule.pulses[j].unitary());
        elements[j] = acc.clone();
    }
    DecouplingGroup::new(elements)
}

/// `{I, X, Y, Z}` with `X = ⊗_j sigma_j^x` and so on.
pub fn universal_group(n_sys: usize) -> Result<DecouplingGroup> {
    let dim = 1usize << n_sys;
    let mut elements = vec![Unitary::identity(dim)];
    for axis in Axis::XYZ {
        elements.push(Unitary::new(global(axis, n_sys)?)?);
    }
    DecouplingGroup::new(elements)
}

/// The XZXZ cycle: pulse areas `(pi/2) sum_j sigma_j^alpha` for
/// `alpha = z, x, z, x`, giving `D = (I, Z, Y, X)` up to phases.
pub fn universal_schedule(n_sys: usize, tau: f64, delta: f64) -> Result<PulseSchedule> {
    let z = Hermitian::new(collective(Axis::Z, n_sys)? * real(FRAC_PI_2))?;
    let x = Hermitian::new(collective(Axis::X, n_sys)? * real(FRAC_PI_2))?;
    PulseSchedule::from_areas(vec![z.clone(), x.clone(), z, x], tau, delta)?.phase_normalized()
}

/// `n` identity pulses: free evolution sliced into `n` intervals.
pub fn trivial_schedule(n_sys: usize, n: usize, tau: f64, delta: f64) -> Result<PulseSchedule> {
    PulseSchedule::from_areas(vec![Hermitian::zeros(1 << n_sys); n], tau, delta)
}

/// Pulses realising the given Pauli strings, area `(pi/2) sum_j sigma_j`
/// over the string's support.
pub fn pauli_schedule(strings: &[PauliString], tau: f64, delta: f64) -> Result<PulseSchedule> {
    let areas = strings
        .iter()
        .map(|s| Hermitian::new(s.area_generator()? * real(FRAC_PI_2)))
        .collect::<Result<Vec<_>>>()?;
    PulseSchedule::from_areas(areas, tau, delta)?.phase_normalized()
}

fn lift(g: &DecouplingGroup, dim: usize) -> Result<Vec<CMat>> {
    let ds = g.dim();
    if dim % ds != 0 {
        return Err(Error::DimensionMismatch {
            left: dim,
            right: ds,
        });
    }
    let db = dim / ds;
    Ok(if db == 1 {
        g.elements.iter().map(|d| d.matrix().clone()).collect()
    } else {
        g.embedded(db)
            .into_iter()
            .map(Unitary::into_matrix)
            .collect()
    })
}

/// `Pi_G(A) = sum_j D_j A D_j^dag`, with `D_j ⊗ I_B` when `a` lives on the
/// full register.
pub fn project_group(g: &DecouplingGroup, a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(Error::NotSquare {
            rows: a.nrows(),
            cols: a.ncols(),
        });
    }
    let ds = lift(g, a.nrows())?;
    let mut sum = CMat::zeros(a.nrows(), a.ncols());
    for d in &ds {
        sum += d * a * d.adjoint();
    }
    Ok(sum)
}

/// `Pi_G(A) / N`.
pub fn project_group_normalized(g: &DecouplingGroup, a: &CMat) -> Result<CMat> {
    Ok(project_group(g, a)? * real(1.0 / g.n() as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub satisfied: bool,
    pub residual: f64,
}

/// `||Pi_G(H_err)||_inf <= tol`.
pub fn check_decoupling_condition(
    g: &DecouplingGroup,
    h_err: &Hermitian,
    tol: f64,
) -> Result<ConditionCheck> {
    let residual = op_norm(&project_group(g, h_err.matrix())?);
    Ok(ConditionCheck {
        satisfied: residual <= tol,
        residual,
    })
}

/// `max_j ||[H_P^(j), H_ctrl]||_inf <= tol`.
pub fn check_commutation(
    generators: &[Hermitian],
    h_ctrl: &Hermitian,
    tol: f64,
) -> Result<ConditionCheck> {
    let mut residual = 0.0f64;
    for g in generators {
        if g.dim() != h_ctrl.dim() {
            return Err(Error::DimensionMismatch {
                left: g.dim(),
                right: h_ctrl.dim(),
            });
        }
        residual = residual.max(op_norm(&commutator(g.matrix(), h_ctrl.matrix())));
    }
    Ok(ConditionCheck {
        satisfied: residual <= tol,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::tensor;
    use crate::model::{build_heisenberg_ctrl, build_linear_sb, BathOperatorSpec};
    use crate::pauli::{sigma, sigma_on};
    use crate::random::{random_matrix, rng_from_seed};

    fn kick(m: CMat) -> Hermitian {
        // area with exp(-i area) = m for an involutive Pauli up to phase
        Hermitian::new(m * real(FRAC_PI_2)).unwrap()
    }

    #[test]
    fn single_identity_pulse() {
        let s = PulseSchedule::from_areas(vec![Hermitian::zeros(2)], 1.0, 0.0).unwrap();
        let g = group_from_pulses(&s).unwrap();
        assert_eq!(g.n(), 1);
        assert_eq!(g.elements[0], Unitary::identity(2));
    }

    #[test]
    fn universal_pulses_telescope_to_group() {
        for n in 1..=3 {
            let s = universal_schedule(n, 0.1, 0.0).unwrap();
            assert!(op_norm(&(s.pulse_product().matrix() - identity(1 << n))) < 1e-12);
            let g = group_from_pulses(&s).unwrap();
            let expected = [Axis::I, Axis::Z, Axis::Y, Axis::X];
            for (d, axis) in g.elements.iter().zip(expected) {
                assert!(equal_up_to_phase(
                    d.matrix(),
                    &global(axis, n).unwrap(),
                    1e-12
                ));
            }
            // D_{j+1}^dag D_j = P_j and D_N = P_N.
            for j in 0..3 {
                let p = g.elements[j + 1].matrix().adjoint() * g.elements[j].matrix();
                assert!(equal_up_to_phase(&p, s.pulses[j].unitary().matrix(), 1e-12));
            }
            assert!(equal_up_to_phase(
                g.elements[3].matrix(),
                s.pulses[3].unitary().matrix(),
                1e-12
            ));
        }
    }

    #[test]
    fn inconsistent_pulses_rejected() {
        let s = PulseSchedule::from_areas(vec![kick(sigma(Axis::X))], 1.0, 0.0).unwrap();
        assert!(matches!(
            group_from_pulses(&s),
            Err(Error::PulseProductNotIdentity { .. })
        ));
        assert!(s.phase_normalized().is_err());
    }

    #[test]
    fn universal_group_structure() {
        let g = universal_group(1).unwrap();
        for (d, axis) in g.elements.iter().zip([Axis::I, Axis::X, Axis::Y, Axis::Z]) {
            assert_eq!(d.matrix(), &sigma(axis));
        }
        let g2 = universal_group(2).unwrap();
        assert!(g2.is_closed());
        for a in &g2.elements {
            for b in &g2.elements {
                let ab = a.matrix() * b.matrix();
                let ba = b.matrix() * a.matrix();
                assert!(equal_up_to_phase(&ab, &ba, 1e-12));
            }
        }
        let x = global(Axis::X, 1).unwrap();
        let y = global(Axis::Y, 1).unwrap();
        assert!(equal_up_to_phase(
            &(x * y),
            &global(Axis::Z, 1).unwrap(),
            1e-12
        ));
    }

    #[test]
    fn projection_examples() {
        let mut rng = rng_from_seed(1);
        let a = random_matrix(2, &mut rng);
        let trivial = DecouplingGroup::trivial(2, 1);
        assert_eq!(project_group(&trivial, &a).unwrap(), a);

        let b = crate::random::random_hermitian(2, &mut rng);
        let za = tensor(&sigma(Axis::Z), b.matrix());
        let g = universal_group(1).unwrap();
        assert!(op_norm(&project_group(&g, &za).unwrap()) < 1e-12);
    }

    #[test]
    fn linear_coupling_is_decoupled() {
        let coeffs: Vec<_> = (0..2)
            .flat_map(|j| Axis::XYZ.map(|a| (j, a, BathOperatorSpec::Random { norm: 0.3 })))
            .collect();
        let h = build_linear_sb(2, 2, &coeffs, 9).unwrap();
        let check =
            check_decoupling_condition(&universal_group(2).unwrap(), &h, CONDITION_TOL).unwrap();
        assert!(check.satisfied, "{}", check.residual);
    }

    #[test]
    fn two_local_coupling_survives_projection() {
        let mut rng = rng_from_seed(2);
        let b = crate::random::random_hermitian(2, &mut rng);
        let zz = sigma_on(Axis::Z, 0, 2).unwrap() * sigma_on(Axis::Z, 1, 2).unwrap();
        let term = Hermitian::new(tensor(&zz, b.matrix())).unwrap();
        let check =
            check_decoupling_condition(&universal_group(2).unwrap(), &term, CONDITION_TOL).unwrap();
        assert!(!check.satisfied);
        assert!((check.residual - 4.0 * term.op_norm()).abs() < 1e-12);

        let trivial = DecouplingGroup::trivial(4, 1);
        assert!(
            !check_decoupling_condition(&trivial, &term, CONDITION_TOL)
                .unwrap()
                .satisfied
        );
    }

    #[test]
    fn commutation_examples() {
        let h = build_heisenberg_ctrl(3, &crate::model::chain_couplings(3, 1.0)).unwrap();
        let gens = universal_schedule(3, 0.1, 0.01).unwrap().generators();
        assert_eq!(gens.len(), 4);
        assert!(check_commutation(&gens, &h, 1e-12).unwrap().satisfied);

        let sx = Hermitian::new(sigma(Axis::X)).unwrap();
        let sz = Hermitian::new(sigma(Axis::Z)).unwrap();
        let c = check_commutation(std::slice::from_ref(&sx), &sz, 1e-12).unwrap();
        assert!(!c.satisfied);
        assert!((c.residual - 2.0).abs() < 1e-12);
        assert!(
            check_commutation(&[sx], &Hermitian::zeros(2), 1e-12)
                .unwrap()
                .satisfied
        );
    }
}
