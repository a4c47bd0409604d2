use ddbound::decoupling::{
    check_commutation, group_from_pulses, pauli_schedule, project_group, project_group_normalized,
    universal_group, universal_schedule,
};
use ddbound::linalg::{
    commutator, expm_hermitian, fidelity, norm, op_norm, partial_trace_bath, tensor,
    trace_distance, unitary_log, DensityMatrix, NormKind,
};
use ddbound::model::{
    build_heisenberg_ctrl, build_local_bath, build_local_uniform_sb, strengths, SystemBathSplit,
};
use ddbound::pauli::{Axis, PauliString};
use ddbound::random::{
    random_density, random_hermitian, random_matrix, random_unitary, rng_from_seed,
};
use proptest::prelude::*;

fn config(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

proptest! {
    #![proptest_config(config(200))]

    #[test]
    fn norm_ordering(seed in any::<u64>(), dim in 2usize..=16) {
        let a = random_matrix(dim, &mut rng_from_seed(seed));
        let (n1, n2, ninf) = (norm(&a, NormKind::Trace), norm(&a, NormKind::Frobenius), norm(&a, NormKind::Operator));
        prop_assert!(ninf <= n2 * (1.0 + 1e-12));
        prop_assert!(n2 <= n1 * (1.0 + 1e-12));
    }

    #[test]
    fn unitary_invariance(seed in any::<u64>(), dim in 2usize..=16) {
        let mut rng = rng_from_seed(seed);
        let a = random_matrix(dim, &mut rng);
        let u = random_unitary(dim, &mut rng);
        let v = random_unitary(dim, &mut rng);
        let b = u.matrix() * &a * v.matrix();
        for kind in NormKind::ALL {
            let (x, y) = (norm(&a, kind), norm(&b, kind));
            prop_assert!((x - y).abs() <= 1e-10 * x.max(1.0));
        }
    }

    #[test]
    fn submultiplicative_and_mixed(seed in any::<u64>(), dim in 2usize..=16) {
        let mut rng = rng_from_seed(seed);
        let (a, b, c) = (random_matrix(dim, &mut rng), random_matrix(dim, &mut rng), random_matrix(dim, &mut rng));
        for kind in NormKind::ALL {
            let ab = norm(&(&a * &b), kind);
            prop_assert!(ab <= norm(&a, kind) * norm(&b, kind) * (1.0 + 1e-12));
            let abc = norm(&(&a * &b * &c), kind);
            prop_assert!(abc <= op_norm(&a) * norm(&b, kind) * op_norm(&c) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tensor_multiplicative(seed in any::<u64>(), da in 2usize..=4, db in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        let a = random_matrix(da, &mut rng);
        let b = random_matrix(db, &mut rng);
        let ab = tensor(&a, &b);
        for kind in NormKind::ALL {
            let lhs = norm(&ab, kind);
            let rhs = norm(&a, kind) * norm(&b, kind);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1.0));
        }
    }

    #[test]
    fn partial_trace_constants(seed in any::<u64>(), ds in 1usize..=4, db in 1usize..=4) {
        let x = random_matrix(ds * db, &mut rng_from_seed(seed));
        let y = partial_trace_bath(&x, db).unwrap();
        let constants = [(NormKind::Trace, 1.0), (NormKind::Frobenius, (db as f64).sqrt()), (NormKind::Operator, db as f64)];
        for (kind, d) in constants {
            prop_assert!(norm(&y, kind) <= d * norm(&x, kind) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn density_matrices_have_unit_trace_norm(seed in any::<u64>(), dim in 2usize..=16) {
        let rho = random_density(dim, &mut rng_from_seed(seed));
        prop_assert!((norm(rho.matrix(), NormKind::Trace) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fuchs_van_de_graaf(seed in any::<u64>(), dim in 2usize..=8) {
        let mut rng = rng_from_seed(seed);
        let (r1, r2, r3) = (random_density(dim, &mut rng), random_density(dim, &mut rng), random_density(dim, &mut rng));
        let d = trace_distance(&r1, &r2).unwrap();
        let f = fidelity(&r1, &r2).unwrap();
        prop_assert!(1.0 - d <= f + 1e-10);
        prop_assert!(f <= (1.0 - d * d).sqrt() + 1e-10);
        prop_assert!((d - trace_distance(&r2, &r1).unwrap()).abs() < 1e-14);
        prop_assert!(d <= trace_distance(&r1, &r3).unwrap() + trace_distance(&r3, &r2).unwrap() + 1e-14);
    }
}

proptest! {
    #![proptest_config(config(100))]

    #[test]
    fn log_inverts_exp_inside_branch(seed in any::<u64>(), dim in 2usize..=8, scale in 0.0f64..(std::f64::consts::PI - 0.01)) {
        let h = random_hermitian(dim, &mut rng_from_seed(seed));
        let h = h.scale(scale / h.op_norm());
        let back = unitary_log(&expm_hermitian(&h, 1.0)).unwrap();
        prop_assert!(op_norm(&(back.matrix() - h.matrix())) < 1e-8);
    }

    #[test]
    fn projection_lands_in_centralizer(seed in any::<u64>(), n in 1usize..=2, bath in 0usize..=1) {
        let g = universal_group(n).unwrap();
        let dim = (1usize << n) << bath;
        let a = random_matrix(dim, &mut rng_from_seed(seed));
        let p = project_group(&g, &a).unwrap();
        for d in g.embedded(1 << bath) {
            prop_assert!(op_norm(&commutator(&p, d.matrix())) < 1e-10);
        }
        let once = project_group_normalized(&g, &a).unwrap();
        let twice = project_group_normalized(&g, &once).unwrap();
        prop_assert!(op_norm(&(once - twice)) < 1e-10);
    }

    #[test]
    fn heisenberg_control_is_compatible_with_global_pulses(seed in any::<u64>(), n in 2usize..=4) {
        let mut rng = rng_from_seed(seed);
        use rand::Rng;
        let couplings: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| (i, j, rng.random_range(-2.0..2.0))).collect();
        let h = build_heisenberg_ctrl(n, &couplings).unwrap();
        let gens = universal_schedule(n, 0.1, 0.01).unwrap().generators();
        prop_assert!(check_commutation(&gens, &h, 1e-12).unwrap().satisfied);
        for d in universal_group(n).unwrap().elements {
            prop_assert!(op_norm(&commutator(d.matrix(), h.matrix())) < 1e-12);
        }
    }

    #[test]
    fn telescoping_identity(seed in any::<u64>(), n in 1usize..=3, len in 2usize..=6) {
        use rand::Rng;
        let mut rng = rng_from_seed(seed);
        let axes = [Axis::I, Axis::X, Axis::Y, Axis::Z];
        let mut strings: Vec<PauliString> = (0..len - 1)
            .map(|_| PauliString((0..n).map(|_| axes[rng.random_range(0..4)]).collect()))
            .collect();
        // Close the cycle: the last pulse undoes the product of the others
        // (Pauli strings are involutions up to phase and commute up to sign).
        let closing = (0..n)
            .map(|q| {
                strings.iter().fold(Axis::I, |acc, s| compose(acc, s.0[q]))
            })
            .collect();
        strings.push(PauliString(closing));
        let sched = pauli_schedule(&strings, 0.1, 0.0).unwrap();
        let g = group_from_pulses(&sched).unwrap();
        let nn = g.n();
        for j in 0..nn - 1 {
            let p = g.elements[j + 1].matrix().adjoint() * g.elements[j].matrix();
            prop_assert!(ddbound::linalg::equal_up_to_phase(&p, sched.pulses[j].unitary().matrix(), 1e-12));
        }
        prop_assert!(ddbound::linalg::equal_up_to_phase(g.elements[nn - 1].matrix(), sched.pulses[nn - 1].unitary().matrix(), 1e-12));
    }

    #[test]
    fn secular_structure(seed in any::<u64>(), n_sys in 1usize..=3, n_bath in 1usize..=2) {
        let mut rng = rng_from_seed(seed);
        let h_ctrl = random_hermitian(1 << n_sys, &mut rng);
        let h_bath = random_hermitian(1 << n_bath, &mut rng);
        let dim = 1usize << (n_sys + n_bath);
        let split = SystemBathSplit::new(n_sys, n_bath, h_ctrl.clone(), random_hermitian(dim, &mut rng), h_bath.clone()).unwrap();
        let comm = commutator(split.ctrl_embedded().matrix(), split.bath_embedded().matrix());
        prop_assert!(op_norm(&comm) == 0.0 || op_norm(&comm) < 1e-13);
        let s = strengths(&split);
        prop_assert!(s.beta <= h_ctrl.op_norm() + h_bath.op_norm() + 1e-12);
    }
}

/// Pauli product up to phase.
fn compose(a: Axis, b: Axis) -> Axis {
    use Axis::*;
    match (a, b) {
        (I, x) | (x, I) => x,
        (X, X) | (Y, Y) | (Z, Z) => I,
        (X, Y) | (Y, X) => Z,
        (Y, Z) | (Z, Y) => X,
        (X, Z) | (Z, X) => Y,
    }
}

#[test]
fn strengths_nondecreasing_for_per_qubit_baths() {
    let mut last = (0.0, 0.0);
    for n in 1..=4 {
        let h_err = build_local_uniform_sb(n, 0.05, 7).unwrap();
        let h_b = build_local_bath(n, 0.2, 8).unwrap();
        let h_ctrl = build_heisenberg_ctrl(n, &ddbound::model::chain_couplings(n, 1.0)).unwrap();
        let split = SystemBathSplit::new(n, n, h_ctrl, h_err, h_b).unwrap();
        let s = strengths(&split);
        assert!(s.j >= last.0 && s.beta >= last.1, "n = {n}: {s:?}");
        last = (s.j, s.beta);
    }
}

#[test]
fn pure_state_density_has_unit_trace_norm() {
    let psi = ddbound::random::random_state(4, &mut rng_from_seed(1));
    let rho = DensityMatrix::pure(&psi).unwrap();
    assert!((norm(rho.matrix(), NormKind::Trace) - 1.0).abs() < 1e-12);
}
