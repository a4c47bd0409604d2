//! Dense complex operator algebra.
//!
//! Everything downstream works with small dense matrices (dimension at most a
//! few hundred), so operators are plain [`nalgebra::DMatrix`] values wrapped in
//! newtypes that carry the structural invariant each one promises: Hermitian
//! generators, unitary propagators and density matrices.
//!
//! Exponentials and logarithms go through eigendecompositions. Every input to
//! them is normal, so the spectral route is exact to rounding and hands us the
//! principal branch without any Padé bookkeeping.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

/// Relative tolerance on `||A - A^dag||_inf` for Hermitian inputs.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Tolerance on `||U^dag U - I||_inf` for unitary inputs.
pub const UNITARY_TOL: f64 = 1e-10;
/// Closest an eigenphase may get to `+-pi` before [`unitary_log`] refuses.
pub const BRANCH_CUT_TOL: f64 = 1e-8;
/// Off-diagonal convergence tolerance of the complex Schur iteration; machine
/// epsilon stalls on nearly diagonal input.
const SCHUR_TOL: f64 = 1e-14;
/// Round-trip tolerance for `exp(-i log U) = U`.
pub const ROUND_TRIP_TOL: f64 = 1e-9;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn identity(dim: usize) -> CMat {
    CMat::identity(dim, dim)
}

fn check_square(m: &CMat) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(())
}

fn check_same_dim(a: &CMat, b: &CMat) -> Result<()> {
    if a.nrows() != b.nrows() || a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            left: a.nrows(),
            right: b.nrows(),
        });
    }
    Ok(())
}

/// `[a, b] = ab - ba`.
pub fn commutator(a: &CMat, b: &CMat) -> CMat {
    a * b - b * a
}

/// `(a + a^dag) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()) * real(0.5)
}

/// Norm selector for the three unitarily invariant norms used throughout.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    /// Sum of singular values.
    Trace,
    /// Root-sum-square of entries.
    Frobenius,
    /// Largest singular value.
    Operator,
}

impl NormKind {
    pub const ALL: [NormKind; 3] = [NormKind::Trace, NormKind::Frobenius, NormKind::Operator];
}

/// Singular values of a square matrix, largest first.
pub fn singular_values(a: &CMat) -> DVector<f64> {
    if a.nrows() == 0 {
        return DVector::zeros(0);
    }
    let mut sv = a.clone().singular_values();
    sv.as_mut_slice().sort_by(|x, y| y.total_cmp(x));
    sv
}

/// `||A||_1`, `||A||_2` or `||A||_inf`.
pub fn norm(a: &CMat, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt(),
        NormKind::Trace => singular_values(a).iter().sum(),
        NormKind::Operator => singular_values(a).iter().copied().fold(0.0, f64::max),
    }
}

/// Shorthand for the operator norm, the strength measure used in every bound.
pub fn op_norm(a: &CMat) -> f64 {
    norm(a, NormKind::Operator)
}

pub fn frobenius(a: &CMat) -> f64 {
    norm(a, NormKind::Frobenius)
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

/// Kronecker product of a list of factors, leftmost factor most significant.
pub fn tensor_all<'a, I>(factors: I) -> CMat
where
    I: IntoIterator<Item = &'a CMat>,
{
    factors
        .into_iter()
        .fold(identity(1), |acc, f| acc.kronecker(f))
}

/// A Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Hermitian(CMat);

impl Hermitian {
    /// Validates squareness, finiteness and Hermiticity to [`HERMITIAN_TOL`].
    pub fn new(m: CMat) -> Result<Self> {
        check_square(&m)?;
        let residual = &m - m.adjoint();
        let r_f = frobenius(&residual);
        if r_f == 0.0 {
            return Ok(Hermitian(m));
        }
        let dim = m.nrows().max(1) as f64;
        // ||A||_inf >= ||A||_F / sqrt(d), ||R||_inf <= ||R||_F: cheap sufficient test.
        let lower = (frobenius(&m) / dim.sqrt()).max(1.0);
        if r_f <= HERMITIAN_TOL * lower {
            return Ok(Hermitian(hermitian_part(&m)));
        }
        let r_inf = op_norm(&residual);
        let scale = op_norm(&m).max(1.0);
        if r_inf <= HERMITIAN_TOL * scale {
            Ok(Hermitian(hermitian_part(&m)))
        } else {
            Err(Error::NotHermitian(r_inf))
        }
    }

    /// Re-symmetrises a computed operator. Drift beyond `1e-8` relative is a
    /// genuine error and is reported rather than masked.
    pub fn from_computed(m: CMat) -> Result<Self> {
        check_square(&m)?;
        let residual = frobenius(&(&m - m.adjoint()));
        let scale = frobenius(&m).max(1.0);
        if residual > 1e-8 * scale {
            return Err(Error::NotHermitian(residual));
        }
        Ok(Hermitian(hermitian_part(&m)))
    }

    pub fn zeros(dim: usize) -> Self {
        Hermitian(CMat::zeros(dim, dim))
    }

    pub fn identity(dim: usize) -> Self {
        Hermitian(identity(dim))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvectors.
    pub fn eigh(&self) -> (DVector<f64>, CMat) {
        let dim = self.dim();
        if dim == 0 {
            return (DVector::zeros(0), CMat::zeros(0, 0));
        }
        let eig = self.0.clone().symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        let values = DVector::from_iterator(dim, order.iter().map(|&i| eig.eigenvalues[i]));
        let mut vectors = CMat::zeros(dim, dim);
        for (k, &i) in order.iter().enumerate() {
            vectors.set_column(k, &eig.eigenvectors.column(i));
        }
        (values, vectors)
    }

    pub fn eigenvalues(&self) -> DVector<f64> {
        self.eigh().0
    }

    /// Norms through the spectrum; cheaper than an SVD.
    pub fn norm(&self, kind: NormKind) -> f64 {
        match kind {
            NormKind::Frobenius => frobenius(&self.0),
            NormKind::Trace => self.eigenvalues().iter().map(|x| x.abs()).sum(),
            NormKind::Operator => self
                .eigenvalues()
                .iter()
                .fold(0.0, |m, x| f64::max(m, x.abs())),
        }
    }

    pub fn op_norm(&self) -> f64 {
        self.norm(NormKind::Operator)
    }

    pub fn scale(&self, s: f64) -> Hermitian {
        Hermitian(&self.0 * real(s))
    }

    pub fn add(&self, other: &Hermitian) -> Result<Hermitian> {
        check_same_dim(&self.0, &other.0)?;
        Ok(Hermitian(&self.0 + &other.0))
    }

    pub fn sub(&self, other: &Hermitian) -> Result<Hermitian> {
        check_same_dim(&self.0, &other.0)?;
        Ok(Hermitian(&self.0 - &other.0))
    }

    /// `U A U^dag`, which stays Hermitian for unitary `U`.
    pub fn conjugate_by(&self, u: &Unitary) -> Result<Hermitian> {
        check_same_dim(&self.0, u.matrix())?;
        Ok(Hermitian(hermitian_part(
            &(u.matrix() * &self.0 * u.matrix().adjoint()),
        )))
    }

    pub fn tensor(&self, other: &Hermitian) -> Hermitian {
        Hermitian(tensor(&self.0, &other.0))
    }

    /// Applies `f` to the spectrum.
    pub fn map_spectrum<F: Fn(f64) -> C64>(&self, f: F) -> CMat {
        let (values, vectors) = self.eigh();
        let diag = CMat::from_diagonal(&values.map(f));
        &vectors * diag * vectors.adjoint()
    }
}

/// A unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary(CMat);

impl Unitary {
    pub fn new(m: CMat) -> Result<Self> {
        check_square(&m)?;
        let dev = unitarity_defect(&m);
        if dev > UNITARY_TOL {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Unitary(m))
    }

    /// Products of exact unitaries; validity is by construction.
    pub(crate) fn from_product(m: CMat) -> Self {
        debug_assert!(m.nrows() == m.ncols());
        Unitary(m)
    }

    pub fn identity(dim: usize) -> Self {
        Unitary(identity(dim))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn into_matrix(self) -> CMat {
        self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn adjoint(&self) -> Unitary {
        Unitary(self.0.adjoint())
    }

    /// `self * other` (apply `other` first).
    pub fn then_after(&self, other: &Unitary) -> Unitary {
        Unitary(&self.0 * &other.0)
    }

    pub fn tensor(&self, other: &Unitary) -> Unitary {
        Unitary(tensor(&self.0, &other.0))
    }

    pub fn scale_phase(&self, phase: f64) -> Unitary {
        Unitary(&self.0 * C64::from_polar(1.0, phase))
    }

    pub fn powi(&self, m: usize) -> Unitary {
        let mut result = identity(self.dim());
        let mut base = self.0.clone();
        let mut e = m;
        while e > 0 {
            if e & 1 == 1 {
                result = &result * &base;
            }
            e >>= 1;
            if e > 0 {
                base = &base * &base;
            }
        }
        Unitary(result)
    }

    pub fn unitarity_defect(&self) -> f64 {
        unitarity_defect(&self.0)
    }
}

fn unitarity_defect(m: &CMat) -> f64 {
    let g = m.adjoint() * m - identity(m.nrows());
    let f = frobenius(&g);
    if f <= UNITARY_TOL {
        f
    } else {
        op_norm(&g)
    }
}

/// A density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMat);

impl DensityMatrix {
    pub fn new(m: CMat) -> Result<Self> {
        check_square(&m)?;
        let h = Hermitian::new(m).map_err(|e| Error::InvalidDensity(e.to_string()))?;
        let tr: C64 = h.matrix().trace();
        if (tr.re - 1.0).abs() > 1e-12 || tr.im.abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!("trace {tr}")));
        }
        let min = h
            .eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min < -1e-12 {
            return Err(Error::InvalidDensity(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(DensityMatrix(h.into_matrix()))
    }

    /// `|psi><psi|` for a normalised vector.
    pub fn pure(psi: &DVector<C64>) -> Result<Self> {
        let n = psi.norm();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidDensity(format!("state norm {n}")));
        }
        DensityMatrix::new(psi * psi.adjoint())
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        DensityMatrix(identity(dim) * real(1.0 / dim as f64))
    }

    pub fn matrix(&self) -> &CMat {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn tensor(&self, other: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(tensor(&self.0, &other.0))
    }

    /// `U rho U^dag`.
    pub fn evolve(&self, u: &Unitary) -> Result<DensityMatrix> {
        check_same_dim(&self.0, u.matrix())?;
        Ok(DensityMatrix(hermitian_part(
            &(u.matrix() * &self.0 * u.matrix().adjoint()),
        )))
    }

    /// `tr_B rho` for the system ⊗ bath factorisation.
    pub fn partial_trace_bath(&self, dim_bath: usize) -> Result<DensityMatrix> {
        Ok(DensityMatrix(partial_trace_bath(&self.0, dim_bath)?))
    }
}

/// `exp(-i t h)` by spectral decomposition.
pub fn expm_hermitian(h: &Hermitian, t: f64) -> Unitary {
    if t == 0.0 {
        return Unitary::identity(h.dim());
    }
    Unitary(h.map_spectrum(|x| C64::from_polar(1.0, -t * x)))
}

/// Principal Hermitian logarithm: returns `Phi` with `u = exp(-i Phi)` and
/// eigenvalues in `(-pi, pi]`.
///
/// Eigenphases within [`BRANCH_CUT_TOL`] of `+-pi` are rejected. The result is
/// checked by exponentiating back.
pub fn unitary_log(u: &Unitary) -> Result<Hermitian> {
    let dim = u.dim();
    if dim == 0 {
        return Ok(Hermitian::zeros(0));
    }
    let (q, t) =
        u.0.clone()
            .try_schur(SCHUR_TOL, 100_000)
            .ok_or_else(|| Error::Decomposition("complex Schur iteration did not converge".into()))?
            .unpack();
    let mut phases = DVector::<f64>::zeros(dim);
    for k in 0..dim {
        let lambda = t[(k, k)];
        let phase = -lambda.arg();
        if PI - phase.abs() < BRANCH_CUT_TOL {
            return Err(Error::BranchCut {
                phase,
                tolerance: BRANCH_CUT_TOL,
            });
        }
        phases[k] = phase;
    }
    let phi = &q * CMat::from_diagonal(&phases.map(real)) * q.adjoint();
    let phi = Hermitian(hermitian_part(&phi));
    let back = expm_hermitian(&phi, 1.0);
    let err = op_norm(&(back.matrix() - u.matrix()));
    if err > ROUND_TRIP_TOL {
        return Err(Error::Decomposition(format!(
            "logarithm round trip error {err:e}"
        )));
    }
    Ok(phi)
}

/// Spectral form `U = Q diag(e^{-i phi_k}) Q^dag` of a unitary, for cheap
/// integer powers.
#[derive(Debug, Clone)]
pub struct SpectralUnitary {
    q: CMat,
    eigs: DVector<C64>,
}

impl SpectralUnitary {
    pub fn new(u: &Unitary) -> Result<Self> {
        let (q, t) = u
            .0
            .clone()
            .try_schur(SCHUR_TOL, 100_000)
            .ok_or_else(|| Error::Decomposition("complex Schur iteration did not converge".into()))?
            .unpack();
        let eigs =
            DVector::from_iterator(u.dim(), (0..u.dim()).map(|k| t[(k, k)] / t[(k, k)].norm()));
        Ok(SpectralUnitary { q, eigs })
    }

    pub fn powi(&self, m: usize) -> Unitary {
        let d = self.eigs.map(|z| z.powu(m as u32));
        Unitary(&self.q * CMat::from_diagonal(&d) * self.q.adjoint())
    }
}

/// `tr_B X` with `X` on system ⊗ bath.
pub fn partial_trace_bath(x: &CMat, dim_bath: usize) -> Result<CMat> {
    check_square(x)?;
    let dim = x.nrows();
    if dim_bath == 0 || dim % dim_bath != 0 {
        return Err(Error::NotDivisible { dim, dim_bath });
    }
    let ds = dim / dim_bath;
    Ok(CMat::from_fn(ds, ds, |i, j| {
        (0..dim_bath)
            .map(|k| x[(i * dim_bath + k, j * dim_bath + k)])
            .sum()
    }))
}

/// `D = ||r1 - r2||_1 / 2`.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    check_same_dim(&r1.0, &r2.0)?;
    let diff = Hermitian(hermitian_part(&(&r1.0 - &r2.0)));
    Ok((0.5 * diff.norm(NormKind::Trace)).clamp(0.0, 1.0))
}

/// Square root of a positive semidefinite operator.
fn psd_sqrt(r: &CMat) -> Result<CMat> {
    let h = Hermitian(hermitian_part(r));
    let (values, vectors) = h.eigh();
    if let Some(&min) = values.iter().find(|&&x| x < -1e-12) {
        return Err(Error::InvalidDensity(format!(
            "square root of operator with eigenvalue {min:e}"
        )));
    }
    let roots = values.map(|x| real(x.max(0.0).sqrt()));
    Ok(&vectors * CMat::from_diagonal(&roots) * vectors.adjoint())
}

/// `F = ||sqrt(r1) sqrt(r2)||_1`.
pub fn fidelity(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    check_same_dim(&r1.0, &r2.0)?;
    let s1 = psd_sqrt(&r1.0)?;
    let s2 = psd_sqrt(&r2.0)?;
    Ok(norm(&(s1 * s2), NormKind::Trace).clamp(0.0, 1.0))
}

/// `e^{-iA} B e^{iA}`, computed directly.
pub fn adjoint_map(a: &Hermitian, b: &CMat) -> Result<CMat> {
    check_same_dim(a.matrix(), b)?;
    let u = expm_hermitian(a, 1.0);
    Ok(u.matrix() * b * u.matrix().adjoint())
}

/// Overlap `|tr(A^dag B)| / d`; equals 1 exactly when `B = e^{i phi} A` for
/// unitaries `A`, `B`.
pub fn phase_overlap(a: &CMat, b: &CMat) -> f64 {
    let d = a.nrows().max(1) as f64;
    (a.adjoint() * b).trace().norm() / d
}

/// Equality of unitaries up to a global phase.
pub fn equal_up_to_phase(a: &CMat, b: &CMat, tol: f64) -> bool {
    a.shape() == b.shape() && 1.0 - phase_overlap(a, b) <= tol
}

/// The global phase `phi` with `b ≈ e^{i phi} a`.
pub fn relative_phase(a: &CMat, b: &CMat) -> f64 {
    (a.adjoint() * b).trace().arg()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pauli::{sigma, Axis};
    use crate::random::{random_hermitian, random_matrix, rng_from_seed};
    use approx::assert_abs_diff_eq;

    fn max_abs(a: &CMat) -> f64 {
        a.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    #[test]
    fn tensor_of_identities_is_identity() {
        assert_eq!(tensor(&identity(2), &identity(2)), identity(4));
    }

    #[test]
    fn tensor_sigma_x_identity_block_structure() {
        let sx = sigma(Axis::X);
        let t = tensor(&sx, &identity(2));
        let mut expected = CMat::zeros(4, 4);
        expected[(0, 2)] = real(1.0);
        expected[(1, 3)] = real(1.0);
        expected[(2, 0)] = real(1.0);
        expected[(3, 1)] = real(1.0);
        assert_eq!(t, expected);
    }

    #[test]
    fn tensor_operator_norm_is_multiplicative() {
        let mut rng = rng_from_seed(11);
        let a = random_matrix(3, &mut rng);
        let b = random_matrix(4, &mut rng);
        assert_abs_diff_eq!(
            op_norm(&tensor(&a, &b)),
            op_norm(&a) * op_norm(&b),
            epsilon = 1e-10
        );
    }

    #[test]
    fn expm_at_zero_time_is_identity() {
        let mut rng = rng_from_seed(3);
        let h = random_hermitian(5, &mut rng);
        assert_eq!(expm_hermitian(&h, 0.0).matrix(), &identity(5));
    }

    /// Scaled-and-squared Taylor series, independent of the spectral path.
    fn expm_series(a: &CMat) -> CMat {
        let s = 10;
        let scaled = a * real(1.0 / f64::powi(2.0, s));
        let mut term = identity(a.nrows());
        let mut sum = term.clone();
        for k in 1..30 {
            term = &term * &scaled * real(1.0 / k as f64);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    #[test]
    fn expm_sigma_x_quarter_turn() {
        let sx = Hermitian::new(sigma(Axis::X)).unwrap();
        let u = expm_hermitian(&sx, std::f64::consts::FRAC_PI_2);
        let expected = sigma(Axis::X) * c(0.0, -1.0);
        assert!(max_abs(&(u.matrix() - &expected)) < 1e-14);
        let oracle = expm_series(&(sigma(Axis::X) * c(0.0, -std::f64::consts::FRAC_PI_2)));
        assert!(max_abs(&(oracle - expected)) < 1e-12);
    }

    #[test]
    fn expm_matches_series_oracle_on_random_input() {
        let mut rng = rng_from_seed(5);
        let h = random_hermitian(6, &mut rng);
        let u = expm_hermitian(&h, 0.7);
        let oracle = expm_series(&(h.matrix() * c(0.0, -0.7)));
        assert!(op_norm(&(u.matrix() - oracle)) < 1e-11);
    }

    #[test]
    fn expm_inverse_pair() {
        let mut rng = rng_from_seed(8);
        let h = random_hermitian(7, &mut rng);
        let p = expm_hermitian(&h, 1.3).then_after(&expm_hermitian(&h, -1.3));
        assert!(op_norm(&(p.matrix() - identity(7))) < 1e-10);
        assert!(expm_hermitian(&h, 1.3).unitarity_defect() < 1e-10);
    }

    #[test]
    fn log_of_identity_is_zero() {
        let phi = unitary_log(&Unitary::identity(4)).unwrap();
        assert!(max_abs(phi.matrix()) < 1e-15);
    }

    #[test]
    fn log_inverts_quarter_turn() {
        let u = Unitary::new(sigma(Axis::X) * c(0.0, -1.0)).unwrap();
        let phi = unitary_log(&u).unwrap();
        let expected = sigma(Axis::X) * real(std::f64::consts::FRAC_PI_2);
        assert!(max_abs(&(phi.matrix() - expected)) < 1e-12);
    }

    #[test]
    fn log_round_trip_inside_principal_branch() {
        let mut rng = rng_from_seed(21);
        for dim in [2, 3, 8] {
            let h = random_hermitian(dim, &mut rng);
            let h = h.scale(2.9 / h.op_norm());
            let phi = unitary_log(&expm_hermitian(&h, 1.0)).unwrap();
            assert!(op_norm(&(phi.matrix() - h.matrix())) < 1e-9);
        }
    }

    #[test]
    fn log_rejects_branch_cut() {
        let u = Unitary::new(identity(2) * real(-1.0)).unwrap();
        assert!(matches!(unitary_log(&u), Err(Error::BranchCut { .. })));
    }

    #[test]
    fn sigma_z_norms() {
        let z = sigma(Axis::Z);
        assert_abs_diff_eq!(norm(&z, NormKind::Trace), 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(norm(&z, NormKind::Frobenius), 2f64.sqrt(), epsilon = 1e-14);
        assert_abs_diff_eq!(norm(&z, NormKind::Operator), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn hermitian_norm_fast_path_agrees_with_svd() {
        let mut rng = rng_from_seed(4);
        let h = random_hermitian(9, &mut rng);
        for kind in NormKind::ALL {
            assert_abs_diff_eq!(h.norm(kind), norm(h.matrix(), kind), epsilon = 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_product_state() {
        let mut rng = rng_from_seed(9);
        let rs = crate::random::random_density(2, &mut rng);
        let rb = crate::random::random_density(4, &mut rng);
        let pt = partial_trace_bath(&tensor(rs.matrix(), rb.matrix()), 4).unwrap();
        assert!(max_abs(&(pt - rs.matrix())) < 1e-14);
    }

    #[test]
    fn partial_trace_of_bell_projector() {
        let s = 1.0 / 2f64.sqrt();
        let psi = DVector::from_vec(vec![real(s), real(0.0), real(0.0), real(s)]);
        let rho = DensityMatrix::pure(&psi).unwrap();
        let pt = partial_trace_bath(rho.matrix(), 2).unwrap();
        assert!(max_abs(&(pt - identity(2) * real(0.5))) < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_non_divisible() {
        assert!(matches!(
            partial_trace_bath(&identity(6), 4),
            Err(Error::NotDivisible { .. })
        ));
    }

    #[test]
    fn trace_distance_examples() {
        let a = DensityMatrix::new(CMat::from_diagonal(&DVector::from_vec(vec![
            real(1.0),
            real(0.0),
        ])))
        .unwrap();
        let b = DensityMatrix::maximally_mixed(2);
        let o = DensityMatrix::new(CMat::from_diagonal(&DVector::from_vec(vec![
            real(0.0),
            real(1.0),
        ])))
        .unwrap();
        assert_abs_diff_eq!(trace_distance(&a, &a).unwrap(), 0.0);
        assert_abs_diff_eq!(trace_distance(&a, &o).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(trace_distance(&a, &b).unwrap(), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_examples() {
        let mut rng = rng_from_seed(12);
        let r = crate::random::random_density(3, &mut rng);
        assert_abs_diff_eq!(fidelity(&r, &r).unwrap(), 1.0, epsilon = 1e-10);
        let a = DensityMatrix::new(CMat::from_diagonal(&DVector::from_vec(vec![
            real(1.0),
            real(0.0),
        ])))
        .unwrap();
        let o = DensityMatrix::new(CMat::from_diagonal(&DVector::from_vec(vec![
            real(0.0),
            real(1.0),
        ])))
        .unwrap();
        assert_abs_diff_eq!(fidelity(&a, &o).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn fidelity_of_pure_states_is_overlap_modulus() {
        let mut rng = rng_from_seed(13);
        let p1 = crate::random::random_state(4, &mut rng);
        let p2 = crate::random::random_state(4, &mut rng);
        let overlap = p1.dotc(&p2).norm();
        let f = fidelity(
            &DensityMatrix::pure(&p1).unwrap(),
            &DensityMatrix::pure(&p2).unwrap(),
        )
        .unwrap();
        assert_abs_diff_eq!(f, overlap, epsilon = 1e-7);
    }

    #[test]
    fn adjoint_map_of_zero_generator_is_identity_map() {
        let mut rng = rng_from_seed(14);
        let b = random_matrix(3, &mut rng);
        let out = adjoint_map(&Hermitian::zeros(3), &b).unwrap();
        assert!(max_abs(&(out - b)) < 1e-15);
    }

    #[test]
    fn adjoint_map_rotates_sigma_x_into_sigma_y() {
        let a = Hermitian::new(sigma(Axis::Z) * real(std::f64::consts::FRAC_PI_4)).unwrap();
        let out = adjoint_map(&a, &sigma(Axis::X)).unwrap();
        assert!(max_abs(&(out - sigma(Axis::Y))) < 1e-15);
    }

    #[test]
    fn adjoint_map_matches_nested_commutator_series() {
        let mut rng = rng_from_seed(15);
        for _ in 0..10 {
            let a = random_hermitian(4, &mut rng);
            let a = a.scale(0.9 / a.op_norm());
            let b = random_matrix(4, &mut rng);
            let mut nested = b.clone();
            let mut series = b.clone();
            let mut coeff = real(1.0);
            for n in 1..=30 {
                nested = commutator(a.matrix(), &nested);
                coeff *= c(0.0, -1.0) / real(n as f64);
                series += &nested * coeff;
            }
            let direct = adjoint_map(&a, &b).unwrap();
            assert!(op_norm(&(direct - series)) < 1e-8);
        }
    }

    #[test]
    fn constructors_reject_bad_input() {
        assert!(matches!(
            Hermitian::new(CMat::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
        let mut m = identity(2);
        m[(0, 1)] = real(1.0);
        assert!(matches!(
            Hermitian::new(m.clone()),
            Err(Error::NotHermitian(_))
        ));
        assert!(matches!(Unitary::new(m), Err(Error::NotUnitary(_))));
        m = identity(2);
        m[(0, 0)] = real(f64::NAN);
        assert!(matches!(Hermitian::new(m), Err(Error::NonFinite)));
        assert!(DensityMatrix::new(identity(2)).is_err());
    }

    #[test]
    fn unitary_power_matches_repeated_product() {
        let mut rng = rng_from_seed(2);
        let u = crate::random::random_unitary(4, &mut rng);
        let mut p = Unitary::identity(4);
        for _ in 0..7 {
            p = p.then_after(&u);
        }
        assert!(op_norm(&(u.powi(7).matrix() - p.matrix())) < 1e-12);
    }
}
