//! Magnus expansion `U = exp(-i (Omega_1 + Omega_2 + Omega_3 + ...))`.
//!
//! With `I(t) = int_0^t H` the three terms reduce to single integrals:
//!
//! * `Omega_1 = I(T)`
//! * `Omega_2 = -(i/2) int_0^T [H(t), I(t)] dt`
//! * `Omega_3 = -(1/6) int_0^T ([R(t), [H(t), I(t)]] + [I(t), [H(t), R(t)]]) dt`
//!   with `R(t) = I(T) - I(t)`,
//!
//! the last obtained from the ordered triple integral by integrating out the
//! outer and inner variables, in which the integrand is linear.

use std::f64::consts::PI;

use crate::decoupling::{project_group, DecouplingGroup};
use crate::error::{Error, Result};
use crate::evolution::Generator;
use crate::linalg::{c, commutator, tensor, CMat, Hermitian};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Composite Gauss–Legendre rule on `[t0, t1]` with `points` nodes per piece,
/// pieces cut at the generator's breakpoints.
#[derive(Debug, Clone)]
pub struct Quadrature {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Left end and node index range of each piece.
    pieces: Vec<(f64, usize, usize)>,
    reference: (Vec<f64>, Vec<f64>),
}

impl Quadrature {
    pub fn new(gen: &Generator, t0: f64, t1: f64, points: usize) -> Self {
        let reference = gauss_legendre(points);
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut pieces = Vec::new();
        for (a, b) in gen.pieces(t0, t1) {
            let start = nodes.len();
            let (half, mid) = ((b - a) / 2.0, (a + b) / 2.0);
            for (x, w) in reference.0.iter().zip(&reference.1) {
                nodes.push(mid + half * x);
                weights.push(half * w);
            }
            pieces.push((a, start, nodes.len()));
        }
        Quadrature {
            nodes,
            weights,
            pieces,
            reference,
        }
    }

    pub fn integrate<F: Fn(f64) -> CMat>(&self, f: F) -> CMat {
        let mut iter = self.nodes.iter().zip(&self.weights);
        let (&t, &w) = iter.next().expect("quadrature has nodes");
        let mut sum = f(t) * c(w, 0.0);
        for (&t, &w) in iter {
            sum += f(t) * c(w, 0.0);
        }
        sum
    }

    pub fn integrate_scalar<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&t, &w)| w * f(t))
            .sum()
    }
}

/// `I(t_k) = int_{t0}^{t_k} H` at every node, plus `I(t1)`.
fn running_integrals(gen: &Generator, q: &Quadrature, h_nodes: &[CMat]) -> (Vec<CMat>, CMat) {
    let dim = gen.dim();
    let (ref_x, ref_w) = &q.reference;
    let mut before = CMat::zeros(dim, dim);
    let mut out = vec![CMat::zeros(dim, dim); q.nodes.len()];
    for &(a, start, end) in &q.pieces {
        for k in start..end {
            // Partial integral over [a, t_k] with its own rule.
            let tk = q.nodes[k];
            let (half, mid) = ((tk - a) / 2.0, (a + tk) / 2.0);
            let mut partial = before.clone();
            for (x, w) in ref_x.iter().zip(ref_w) {
                partial += gen.at(mid + half * x).matrix() * c(half * w, 0.0);
            }
            out[k] = partial;
        }
        for k in start..end {
            before += &h_nodes[k] * c(q.weights[k], 0.0);
        }
    }
    (out, before)
}

#[derive(Debug, Clone)]
pub struct MagnusTerms {
    pub omega1: Hermitian,
    pub omega2: Hermitian,
    pub omega3: Hermitian,
    /// `pi - int_0^T ||H(s)||_inf ds`; terms are only trusted when positive.
    pub convergence_margin: f64,
}

impl MagnusTerms {
    pub fn converges(&self) -> bool {
        self.convergence_margin > 0.0
    }

    /// `Omega_1 + ... + Omega_order`.
    pub fn partial_sum(&self, order: usize) -> Hermitian {
        let mut sum = self.omega1.clone();
        if order >= 2 {
            sum = sum.add(&self.omega2).expect("same dimension");
        }
        if order >= 3 {
            sum = sum.add(&self.omega3).expect("same dimension");
        }
        sum
    }
}

/// First three Magnus terms of `gen` over `[0, T]`.
pub fn magnus_terms(gen: &Generator, t: f64, quad_points: usize) -> Result<MagnusTerms> {
    if quad_points < 8 {
        return Err(Error::InvalidParameter(format!(
            "need at least 8 quadrature points, got {quad_points}"
        )));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Magnus interval length {t}"
        )));
    }
    let dim = gen.dim();
    if t == 0.0 {
        let z = Hermitian::zeros(dim);
        return Ok(MagnusTerms {
            omega1: z.clone(),
            omega2: z.clone(),
            omega3: z,
            convergence_margin: PI,
        });
    }
    let q = Quadrature::new(gen, 0.0, t, quad_points);
    let h_nodes: Vec<CMat> = q.nodes.iter().map(|&s| gen.at(s).into_matrix()).collect();
    let (running, total) = running_integrals(gen, &q, &h_nodes);
    let mut omega2 = CMat::zeros(dim, dim);
    let mut omega3 = CMat::zeros(dim, dim);
    for k in 0..q.nodes.len() {
        let h = &h_nodes[k];
        let i = &running[k];
        let r = &total - i;
        let w = q.weights[k];
        omega2 += commutator(h, i) * c(0.0, -0.5 * w);
        let inner = commutator(&r, &commutator(h, i)) + commutator(i, &commutator(h, &r));
        omega3 += inner * c(-w / 6.0, 0.0);
    }
    let norm_integral = q.integrate_scalar(|s| gen.at(s).op_norm());
    Ok(MagnusTerms {
        omega1: Hermitian::from_computed(total)?,
        omega2: Hermitian::from_computed(omega2)?,
        omega3: Hermitian::from_computed(omega3)?,
        convergence_margin: PI - norm_integral,
    })
}

/// `A_k (hT)^k`, the bound on the Magnus tail from order `k` on, valid for
/// `hT < 1`.
pub fn truncation_bound(k: usize, h: f64, t: f64, a_k: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidParameter(
            "truncation order starts at 1".into(),
        ));
    }
    let ht = h * t;
    if !(ht < 1.0) {
        return Err(Error::TruncationDomain(ht));
    }
    Ok(a_k * ht.powi(k as i32))
}

#[derive(Debug, Clone)]
pub struct FirstOrderEffective {
    /// `sum_j D_j (H_err + H_B) D_j^dag = Pi_G(H_err) + N H_B`.
    pub literal: Hermitian,
    /// `literal / N`, the generator whose exponential over the cycle time
    /// approximates the cycle propagator.
    pub averaged: Hermitian,
}

pub fn first_order_effective(
    g: &DecouplingGroup,
    h_err: &Hermitian,
    h_bath: &Hermitian,
) -> Result<FirstOrderEffective> {
    let ds = g.dim();
    if ds * h_bath.dim() != h_err.dim() {
        return Err(Error::DimensionMismatch {
            left: h_err.dim(),
            right: ds * h_bath.dim(),
        });
    }
    let full = h_err.matrix() + tensor(&crate::linalg::identity(ds), h_bath.matrix());
    let literal = Hermitian::from_computed(project_group(g, &full)?)?;
    let averaged = literal.scale(1.0 / g.n() as f64);
    Ok(FirstOrderEffective { literal, averaged })
}
