//! Property suites run by `ddbound verify`. Every suite uses fixed seeds.

use std::f64::consts::PI;

use rand::Rng;
use rayon::prelude::*;

use ddbound::bounds::{
    d_dd_chain, distance_from_phase, lemma2_bound, lemma3_check, pdd_bound, pdd_bound_approx,
    pdd_bound_general, phi_e_bound_general, undecoupled_bound, BoundConstants,
};
use ddbound::decoupling::{
    project_group, project_group_normalized, universal_group, universal_schedule,
};
use ddbound::evolution::{run_cycle, run_pdd, time_ordered_exp, Generator};
use ddbound::linalg::{
    commutator, equal_up_to_phase, expm_hermitian, fidelity, identity, op_norm, real, tensor,
    trace_distance, unitary_log, CMat, NormKind,
};
use ddbound::pauli::{sigma_on, Axis};
use ddbound::random::{
    derive_seed, random_density, random_hermitian, random_hermitian_with_norm, random_matrix,
    rng_from_seed,
};

use crate::criteria::{
    criterion, timed, truncation_check, PropertyResult, TRUNCATION_TEST_INSTANCES,
};
use crate::families::{bound_scenario, Family};
use crate::scenario::build;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Norms,
    Magnus,
    Lemmas,
    Decoupling,
    Evolution,
    All,
}

impl Suite {
    pub const EACH: [Suite; 5] = [
        Suite::Norms,
        Suite::Decoupling,
        Suite::Evolution,
        Suite::Magnus,
        Suite::Lemmas,
    ];
}

type Property = fn(&rayon::ThreadPool) -> PropertyResult;

fn properties(suite: Suite) -> Vec<Property> {
    match suite {
        Suite::Norms => vec![|p| criterion(10, p), |_| log_inverts_exp(), |_| {
            fuchs_van_de_graaf()
        }],
        Suite::Decoupling => vec![
            |p| criterion(1, p),
            |p| criterion(2, p),
            |_| projection_lands_in_centralizer(),
            |_| universal_cycle_closes(),
            |_| weight_two_terms_survive(),
        ],
        Suite::Evolution => vec![
            |p| criterion(3, p),
            |p| criterion(4, p),
            |p| criterion(6, p),
            |p| p.install(interaction_picture_oracle),
            |p| p.install(distance_chain),
        ],
        Suite::Magnus => vec![|p| criterion(7, p), |p| criterion(8, p), |_| {
            third_order_truncation()
        }],
        Suite::Lemmas => vec![
            |p| criterion(5, p),
            |_| lemma2_pairs(),
            |_| lemma3_constant_perturbations(),
            |_| pdd_approximation(),
            |_| bound_monotonicity(),
            |p| criterion(9, p),
        ],
        Suite::All => Suite::EACH.into_iter().flat_map(properties).collect(),
    }
}

/// Runs a suite, reporting each property as it finishes.
pub fn run_suite(
    suite: Suite,
    pool: &rayon::ThreadPool,
    on_result: &mut dyn FnMut(&PropertyResult),
) -> Vec<PropertyResult> {
    properties(suite)
        .into_iter()
        .map(|prop| {
            let r = prop(pool);
            on_result(&r);
            r
        })
        .collect()
}

fn count(
    name: &str,
    cases: impl IntoIterator<Item = bool>,
    detail: impl FnOnce() -> String,
) -> PropertyResult {
    timed(name, None, || {
        let (n, bad) = cases
            .into_iter()
            .fold((0, 0), |(n, bad), ok| (n + 1, bad + usize::from(!ok)));
        (n, bad, detail())
    })
}

fn log_inverts_exp() -> PropertyResult {
    let mut worst = 0.0f64;
    let r = count(
        "log inverts exp inside the principal branch",
        (0..100u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x10, seed));
            let dim = rng.random_range(2..=8);
            let h = random_hermitian_with_norm(dim, rng.random_range(0.0..PI - 0.01), &mut rng);
            let back = unitary_log(&expm_hermitian(&h, 1.0)).expect("principal branch");
            let e = op_norm(&(back.matrix() - h.matrix()));
            worst = worst.max(e);
            e <= 1e-9
        }),
        String::new,
    );
    PropertyResult {
        detail: format!("max error {worst:.2e} (tol 1e-9)"),
        ..r
    }
}

fn fuchs_van_de_graaf() -> PropertyResult {
    count(
        "trace distance and fidelity inequalities",
        (0..100u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x11, seed));
            let dim = rng.random_range(2..=8);
            let (a, b) = (random_density(dim, &mut rng), random_density(dim, &mut rng));
            let d = trace_distance(&a, &b).expect("same dim");
            let f = fidelity(&a, &b).expect("same dim");
            let tol = 1e-9;
            1.0 - f <= d + tol && d <= (1.0 - f * f).max(0.0).sqrt() + tol
        }),
        || "1 - F <= D <= sqrt(1 - F^2)".into(),
    )
}

fn projection_lands_in_centralizer() -> PropertyResult {
    count(
        "group projection lands in the centralizer",
        (0..100u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x20, seed));
            let n_sys = rng.random_range(1..=2);
            let dim_bath = 2;
            let g = universal_group(n_sys).expect("small register");
            let h = random_hermitian(g.dim() * dim_bath, &mut rng);
            let p = project_group_normalized(&g, h.matrix()).expect("conformable");
            let commutes = g
                .embedded(dim_bath)
                .iter()
                .all(|u| op_norm(&commutator(u.matrix(), &p)) <= 1e-10 * (1.0 + op_norm(&p)));
            let idempotent =
                op_norm(&(project_group_normalized(&g, &p).expect("conformable") - &p)) <= 1e-10;
            commutes && idempotent
        }),
        || "commutes with every element; idempotent".into(),
    )
}

fn universal_cycle_closes() -> PropertyResult {
    count(
        "universal schedule closes and generates a group",
        (1..=4usize).map(|n| {
            let s = universal_schedule(n, 0.1, 0.0).expect("schedule");
            let closes = equal_up_to_phase(s.pulse_product().matrix(), &identity(s.dim()), 1e-10);
            closes && universal_group(n).expect("group").is_closed()
        }),
        || "n = 1..4".into(),
    )
}

/// `sigma_z sigma_z (x) B` is invariant under global Pauli conjugation, so the
/// universal group cannot remove it.
fn weight_two_terms_survive() -> PropertyResult {
    count(
        "weight-two collective terms survive the universal group",
        (0..20u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x21, seed));
            let zz =
                sigma_on(Axis::Z, 0, 2).expect("qubit") * sigma_on(Axis::Z, 1, 2).expect("qubit");
            let b = random_hermitian(2, &mut rng);
            let h = tensor(&zz, b.matrix());
            let g = universal_group(2).expect("group");
            let projected = project_group(&g, &h).expect("conformable");
            op_norm(&(projected - &h * real(g.n() as f64))) <= 1e-10
        }),
        || "Pi_G(ZZ (x) B) = |G| ZZ (x) B".into(),
    )
}

fn extrapolated(g: &Generator, t: f64, steps: usize) -> CMat {
    let coarse = time_ordered_exp(g, 0.0, t, steps);
    let fine = time_ordered_exp(g, 0.0, t, 2 * steps);
    (fine.matrix() * real(4.0) - coarse.matrix()) * real(1.0 / 3.0)
}

/// The cycle's error propagator against the time-ordered exponential of the
/// interaction-picture generator.
fn interaction_picture_oracle() -> PropertyResult {
    let start = std::time::Instant::now();
    let cases: Vec<f64> = (0..400u64)
        .map(|k| bound_scenario(Family::Test, 1000 + k))
        .filter(|c| c.delta > 0.0)
        .take(8)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|cfg| {
            let sc = build(&cfg).expect("valid scenario");
            let cycle = run_cycle(&sc.sim).expect("cycle");
            let gen = sc.sim.interaction_generator().expect("finite pulses");
            op_norm(&(extrapolated(&gen, sc.sim.cycle_time(), 4000) - cycle.u_err.matrix()))
        })
        .collect();
    let worst = cases.iter().copied().fold(0.0, f64::max);
    let r = count(
        "interaction-picture error propagator",
        cases.iter().map(|&d| d <= 1e-7),
        || format!("max deviation {worst:.2e} (tol 1e-7)"),
    );
    PropertyResult {
        elapsed: start.elapsed(),
        ..r
    }
}

/// `D_DD <= min[1, (e^{2||Phi||} - 1)/2]` on single cycles of fresh scenarios.
fn distance_chain() -> PropertyResult {
    let start = std::time::Instant::now();
    let cases: Vec<bool> = (0..100u64)
        .into_par_iter()
        .map(|k| {
            let mut cfg = bound_scenario(Family::Test, 2000 + k);
            cfg.m = 1;
            let sc = build(&cfg).expect("valid scenario");
            let Ok(p) = run_pdd(&sc.sim, 1) else {
                return true;
            };
            let d = ddbound::evolution::final_state_distances(&p.propagators, &sc.rho_s, &sc.rho_b)
                .expect("distances");
            d_dd_chain(p.phi_pdd_norm(), d.d_dd).pass()
        })
        .collect();
    let r = count("distance chain from the error phase", cases, || {
        "100 fresh single-cycle scenarios".into()
    });
    PropertyResult {
        elapsed: start.elapsed(),
        ..r
    }
}

fn third_order_truncation() -> PropertyResult {
    let a3 = BoundConstants::default().a3;
    timed("third-order truncation bound", None, || {
        truncation_check(a3, 2, TRUNCATION_TEST_INSTANCES)
    })
}

fn lemma2_pairs() -> PropertyResult {
    count(
        "conjugation perturbation bound",
        (0..200u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x30, seed));
            let dim = rng.random_range(2..=8);
            let a = random_hermitian_with_norm(dim, rng.random_range(0.0..1.5), &mut rng);
            let b = random_matrix(dim, &mut rng);
            NormKind::ALL
                .iter()
                .all(|&k| lemma2_bound(&a, &b, k).expect("conformable").pass())
        }),
        || "||A|| in [0, 1.5), all three norms".into(),
    )
}

fn lemma3_constant_perturbations() -> PropertyResult {
    count(
        "effective Hamiltonian of a perturbation",
        (0..100u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x31, seed));
            let dim = rng.random_range(2..=6);
            let t = rng.random_range(0.1..2.0);
            let h0 = random_hermitian_with_norm(dim, rng.random_range(0.0..3.0), &mut rng);
            let v = random_hermitian_with_norm(dim, rng.random_range(0.0..1.0) / t, &mut rng);
            lemma3_check(&Generator::Constant(h0), &Generator::Constant(v), t, 1)
                .expect("inside the branch")
                .pass()
        }),
        || "T ||V|| <= 1".into(),
    )
}

/// The Taylor form agrees with the exact bound to 5% when `beta T / m` is small.
fn pdd_approximation() -> PropertyResult {
    let consts = BoundConstants::default();
    let mut worst = 0.0f64;
    let r = count(
        "PDD bound Taylor form",
        (0..100u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x32, seed));
            let m = rng.random_range(1..=64usize);
            let beta = rng.random_range(0.1..10.0);
            let j = beta * rng.random_range(0.01..1.0);
            let t_cycle = 0.01 / beta;
            let exact = pdd_bound(j, beta, m as f64 * t_cycle, m, 0, 0.0, &consts);
            let approx = pdd_bound_approx(j, beta, t_cycle, m, &consts);
            let rel = (approx - exact).abs() / exact;
            worst = worst.max(rel);
            rel <= 0.05
        }),
        String::new,
    );
    PropertyResult {
        detail: format!("beta T / m = 0.01, max relative gap {worst:.2e} (tol 0.05)"),
        ..r
    }
}

/// Every bound is nondecreasing in `J`, `T`, `delta` and, at fixed cycle time,
/// in `m`.
fn bound_monotonicity() -> PropertyResult {
    let consts = BoundConstants::default();
    count(
        "bounds are monotone in their parameters",
        (0..200u64).map(|seed| {
            let mut rng = rng_from_seed(derive_seed(0x33, seed));
            let j = rng.random_range(0.01..2.0);
            let beta = rng.random_range(0.0..5.0);
            let t = rng.random_range(0.01..1.0);
            let delta = rng.random_range(0.0..0.1);
            let dec = if rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.0..0.5)
            };
            let m = rng.random_range(1..=8usize);
            let n = 4;
            let up = 1.0 + rng.random_range(0.001..0.5);
            let phi = |j: f64, t: f64, d: f64| {
                phi_e_bound_general(j, beta, t, n as f64 * d, dec, &consts)
            };
            let pdd = |j: f64, t: f64, d: f64, m: usize| {
                pdd_bound_general(j, beta, m as f64 * t, m, m * n, d, dec, &consts)
            };
            let undec = |j: f64, t: f64| undecoupled_bound(j, beta, t, dec);
            let le = |a: f64, b: f64| a <= b * (1.0 + 1e-12);
            le(phi(j, t, delta), phi(j * up, t, delta))
                && le(phi(j, t, delta), phi(j, t * up, delta))
                && le(phi(j, t, delta), phi(j, t, delta * up))
                && le(pdd(j, t, delta, m), pdd(j * up, t, delta, m))
                && le(pdd(j, t, delta, m), pdd(j, t * up, delta, m))
                && le(pdd(j, t, delta, m), pdd(j, t, delta * up, m))
                && le(pdd(j, t, delta, m), pdd(j, t, delta, m + 1))
                && le(undec(j, t), undec(j * up, t))
                && le(undec(j, t), undec(j, t * up))
                && le(distance_from_phase(j * t), distance_from_phase(j * t * up))
        }),
        || "phase, PDD, undecoupled and distance bounds".into(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_lists_every_suite_once() {
        let total: usize = Suite::EACH.iter().map(|&s| properties(s).len()).sum();
        assert_eq!(properties(Suite::All).len(), total);
    }

    #[test]
    fn cheap_properties_pass() {
        for r in [
            log_inverts_exp(),
            fuchs_van_de_graaf(),
            universal_cycle_closes(),
            weight_two_terms_survive(),
            bound_monotonicity(),
        ] {
            assert!(r.pass(), "{r}");
        }
    }
}
