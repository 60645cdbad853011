use nalgebra::DMatrix;
use pencilph_core::numerics::{
    eigenvalues, nullspace_basis, numeric_rank, ordered_real_schur, pseudo_inverse, solve_lyapunov_equation,
    spectral_norm, sym_part, Region, ToleranceConfig,
};
use pencilph_core::pencil::{spectrum, system_space, MatrixPencil};
use pencilph_core::recipes::{pencil_corpus, random_matrix, random_psd, random_well_conditioned, rng};
use pencilph_core::stability::{check_stability, solve_lyapunov_inequality};
use pencilph_core::subspace::{angle_defect, compare_on, intersect, projector_of, CompareMode, Subspace};
use pencilph_core::{Complex64, StabilityClass};
use proptest::prelude::*;

fn tol() -> ToleranceConfig {
    ToleranceConfig::default()
}

/// Matrix with a prescribed rank deficiency.
fn low_rank(seed: u64, r: usize, c: usize) -> DMatrix<f64> {
    let mut g = rng(seed);
    let k = (seed as usize % (r.min(c) + 1)).max(1);
    random_matrix(&mut g, r, k) * random_matrix(&mut g, k, c)
}

fn sorted_eigs(mut v: Vec<Complex64>) -> Vec<Complex64> {
    v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    v
}

fn random_subspace(seed: u64, n: usize, k: usize) -> Subspace {
    let mut g = rng(seed);
    Subspace::span(&random_matrix(&mut g, n, k), &tol())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, ..ProptestConfig::default() })]

    #[test]
    fn penrose_identities(seed in any::<u64>(), r in 1usize..=8, c in 1usize..=8, full in any::<bool>()) {
        let m = if full { random_matrix(&mut rng(seed), r, c) } else { low_rank(seed, r, c) };
        let p = pseudo_inverse(&m, &tol()).unwrap();
        let s = 1.0 + spectral_norm(&m) * spectral_norm(&p);
        let rel = |x: DMatrix<f64>, scale: f64| spectral_norm(&x) / (scale * s);
        prop_assert!(rel(&m * &p * &m - &m, spectral_norm(&m)) <= 1e-8);
        prop_assert!(rel(&p * &m * &p - &p, spectral_norm(&p).max(1.0)) <= 1e-8);
        let mp = &m * &p;
        let pm = &p * &m;
        prop_assert!(spectral_norm(&(&mp - mp.transpose())) <= 1e-8 * s);
        prop_assert!(spectral_norm(&(&pm - pm.transpose())) <= 1e-8 * s);
    }

    #[test]
    fn rank_plus_nullity(seed in any::<u64>(), r in 1usize..=8, c in 1usize..=8) {
        let m = low_rank(seed, r, c);
        let rank = numeric_rank(&m, &tol()).unwrap();
        prop_assert_eq!(rank + nullspace_basis(&m, &tol()).unwrap().ncols(), c);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    #[test]
    fn schur_eigenvalues_do_not_depend_on_region(seed in any::<u64>(), n in 1usize..=8) {
        let m = random_matrix(&mut rng(seed), n, n);
        let base = sorted_eigs(ordered_real_schur(&m, Region::OpenLeft, &tol()).unwrap().eigenvalues);
        for region in [Region::ClosedLeft, Region::OpenRight, Region::ImaginaryAxis] {
            let other = sorted_eigs(ordered_real_schur(&m, region, &tol()).unwrap().eigenvalues);
            for (a, b) in base.iter().zip(&other) {
                prop_assert!((a - b).norm() <= 1e-8 * (1.0 + a.norm()), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn lyapunov_solution_is_symmetric(seed in any::<u64>(), n in 1usize..=8) {
        let mut g = rng(seed);
        let a = random_matrix(&mut g, n, n);
        let shift = eigenvalues(&a).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max) + 0.5;
        let a = a - DMatrix::identity(n, n) * shift;
        let c = random_psd(&mut g, n, n);
        let x = solve_lyapunov_equation(&a, &c, &tol()).unwrap();
        prop_assert!(spectral_norm(&(&x - x.transpose())) <= 1e-10 * spectral_norm(&x));
    }

    #[test]
    fn compare_eq_is_reflexive_and_symmetric(seed in any::<u64>(), n in 1usize..=6, k in 0usize..=6) {
        let l = random_subspace(seed, n, k.min(n));
        let mut g = rng(seed ^ 1);
        let m = random_matrix(&mut g, n, n);
        let w = random_matrix(&mut g, n, n);
        prop_assert!(compare_on(&m, &m, &l, CompareMode::Eq, &tol()).unwrap().holds);
        let ab = compare_on(&m, &w, &l, CompareMode::Eq, &tol()).unwrap().holds;
        let ba = compare_on(&w, &m, &l, CompareMode::Eq, &tol()).unwrap().holds;
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn geq_ignores_terms_vanishing_on_the_subspace(seed in any::<u64>(), n in 2usize..=6, k in 1usize..=5) {
        let l = random_subspace(seed, n, k.min(n - 1));
        let mut g = rng(seed ^ 2);
        let m = sym_part(&random_matrix(&mut g, n, n));
        let perp = DMatrix::identity(n, n) - projector_of(&l);
        let z = random_matrix(&mut g, n, n);
        let w = &perp * &z + z.transpose() * &perp;
        let zero = DMatrix::zeros(n, n);
        let before = compare_on(&m, &zero, &l, CompareMode::Geq, &tol()).unwrap();
        let after = compare_on(&(&m + &w), &zero, &l, CompareMode::Geq, &tol()).unwrap();
        prop_assert_eq!(before.holds, after.holds);
        prop_assert!((before.value - after.value).abs() <= 1e-8 * (1.0 + spectral_norm(&w)));
    }

    #[test]
    fn intersection_is_commutative_and_monotone(seed in any::<u64>(), n in 1usize..=7, k1 in 0usize..=7, k2 in 0usize..=7) {
        let l1 = random_subspace(seed, n, k1.min(n));
        let l2 = if seed % 3 == 0 { l1.clone() } else { random_subspace(seed ^ 3, n, k2.min(n)) };
        let a = intersect(&l1, &l2, &tol()).unwrap();
        let b = intersect(&l2, &l1, &tol()).unwrap();
        prop_assert_eq!(a.dim(), b.dim());
        prop_assert!(angle_defect(&a, &b) <= 1e-8);
        prop_assert!(a.dim() <= l1.dim().min(l2.dim()));
        let p = projector_of(&l1);
        prop_assert!((&p * l1.basis() - l1.basis()).amax() <= 1e-12);
    }
}

fn equivalent(p: &MatrixPencil, seed: u64) -> (MatrixPencil, DMatrix<f64>) {
    let mut g = rng(seed);
    let n = p.n();
    let s = random_well_conditioned(&mut g, n, 10.0);
    let t = random_well_conditioned(&mut g, n, 10.0);
    (p.transformed(&s, &t).unwrap(), t)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 150, ..ProptestConfig::default() })]

    #[test]
    fn spectrum_and_system_space_under_equivalence(seed in any::<u64>()) {
        let inst = &pencil_corpus(seed, 1, 8)[0];
        prop_assume!(inst.class != StabilityClass::Singular);
        let p = &inst.pencil;
        let (q, t) = equivalent(p, seed ^ 5);
        let flat = |p: &MatrixPencil| {
            let s = spectrum(p, &tol()).unwrap();
            sorted_eigs(s.iter().flat_map(|e| std::iter::repeat_n(e.value, e.algebraic)).collect())
        };
        let (a, b) = (flat(p), flat(&q));
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).norm() <= 1e-6 * (1.0 + x.norm()), "{x} vs {y}");
        }
        let v = system_space(p, &tol()).unwrap();
        let w = system_space(&q, &tol()).unwrap();
        let tinv = t.try_inverse().unwrap();
        let mapped = Subspace::span(&(tinv * v.basis()), &tol());
        prop_assert_eq!(mapped.dim(), w.dim());
        prop_assert!(angle_defect(&mapped, &w) <= 1e-7);
    }

    #[test]
    fn certificates_follow_equivalence(seed in any::<u64>()) {
        let inst = &pencil_corpus(seed, 1, 8)[0];
        let p = &inst.pencil;
        let (q, _) = equivalent(p, seed ^ 7);
        let a = check_stability(p, &tol()).unwrap().classification;
        prop_assert_eq!(a, check_stability(&q, &tol()).unwrap().classification);
        let c = solve_lyapunov_inequality(&q, false, &tol());
        prop_assert_eq!(c.is_ok(), a.is_stable());
        if a == StabilityClass::AsymptoticallyStable {
            let s = solve_lyapunov_inequality(&q, true, &tol()).unwrap();
            prop_assert!(s.system_space.dim() == 0 || s.lyap_max_eig < 0.0);
            prop_assert!(s.is_valid() && s.pd_margin > 0.0 || s.system_space.dim() == 0);
        }
    }
}
