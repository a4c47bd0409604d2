//! Seeded random operators.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, hermitian_part, CMat, DensityMatrix, Hermitian, Unitary, C64};

pub type SimRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent stream seed from a base seed and a stream label.
pub fn derive_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn gaussian_c(rng: &mut impl Rng) -> C64 {
    c(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Ginibre matrix with unit-variance complex Gaussian entries.
pub fn random_matrix(dim: usize, rng: &mut impl Rng) -> CMat {
    CMat::from_fn(dim, dim, |_, _| gaussian_c(rng))
}

/// GUE-distributed Hermitian matrix.
pub fn random_hermitian(dim: usize, rng: &mut impl Rng) -> Hermitian {
    Hermitian::new(hermitian_part(&random_matrix(dim, rng)))
        .expect("symmetrised matrix is Hermitian")
}

/// Random Hermitian matrix rescaled to the given operator norm.
pub fn random_hermitian_with_norm(dim: usize, norm: f64, rng: &mut impl Rng) -> Hermitian {
    let h = random_hermitian(dim, rng);
    let n = h.op_norm();
    if n == 0.0 {
        return h;
    }
    h.scale(norm / n)
}

/// Haar-random unitary via QR of a Ginibre matrix with phase fix.
pub fn random_unitary(dim: usize, rng: &mut impl Rng) -> Unitary {
    let qr = random_matrix(dim, rng).qr();
    let (mut q, r) = qr.unpack();
    for k in 0..dim {
        let d = r[(k, k)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            c(1.0, 0.0)
        };
        let mut col = q.column_mut(k);
        col *= phase;
    }
    Unitary::new(q).expect("QR factor is unitary")
}

/// Haar-random pure state vector.
pub fn random_state(dim: usize, rng: &mut impl Rng) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| gaussian_c(rng));
    let n = v.norm();
    v / c(n, 0.0)
}

/// Mixed state `G G^dag / tr(G G^dag)` from a Ginibre matrix.
pub fn random_density(dim: usize, rng: &mut impl Rng) -> DensityMatrix {
    let g = random_matrix(dim, rng);
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::new(hermitian_part(&(m / c(tr, 0.0))))
        .expect("normalised Gram matrix is a state")
}
