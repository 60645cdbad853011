use nalgebra::{DMatrix, DVector};
use pencilph_core::dh::recast_dh;
use pencilph_core::numerics::{condition_number, eigenvalues, ToleranceConfig};
use pencilph_core::oracle::{check_energy_decay, exact_regularity, residual_along, simulate, simulate_feedback};
use pencilph_core::pencil::{is_regular, quasi_kronecker, system_space, DescriptorSystem, MatrixPencil};
use pencilph_core::recipes::{integer_pencil, pencil_corpus, random_antistable_controllable, random_matrix, random_stabilizable, rng};
use pencilph_core::stability::check_stability;
use pencilph_core::stabilize::{build_certificates, recast_ph, solve_bernoulli, zero_output_interconnection};
use pencilph_core::StabilityClass;

fn consistent_x0(p: &MatrixPencil, seed: u64, tol: &ToleranceConfig) -> Option<DVector<f64>> {
    let v = system_space(p, tol).unwrap();
    if v.dim() == 0 {
        return None;
    }
    let mut r = rng(seed);
    let c = random_matrix(&mut r, v.dim(), 1);
    Some(v.basis() * c.column(0))
}

#[test]
fn hamiltonian_decays_along_recast_solutions() {
    let tol = ToleranceConfig::default();
    let mut checked = 0;
    for (i, inst) in pencil_corpus(31, 200, 8).iter().enumerate() {
        if !inst.class.is_stable() {
            continue;
        }
        let Some(x0) = consistent_x0(&inst.pencil, i as u64, &tol) else { continue };
        let f = recast_dh(&inst.pencil, &tol).unwrap();
        let tr = simulate(&inst.pencil, &x0, 5.0, 251, &tol).unwrap();
        let rep = check_energy_decay(&tr, inst.pencil.e(), &f.q, 1e-6);
        assert!(rep.monotone, "#{i}: increase {:.3e}", rep.max_increase);
        checked += 1;
    }
    assert!(checked >= 80, "{checked}");
}

#[test]
fn simulated_behavior_matches_verdicts() {
    let tol = ToleranceConfig::default();
    for (i, inst) in pencil_corpus(7, 120, 8).iter().enumerate() {
        let p = &inst.pencil;
        if inst.class == StabilityClass::Singular {
            assert!(simulate(p, &DVector::zeros(p.n()), 1.0, 2, &tol).is_err());
            continue;
        }
        let Some(x0) = consistent_x0(p, 100 + i as u64, &tol) else { continue };
        let v = check_stability(p, &tol).unwrap();
        match v.classification {
            StabilityClass::AsymptoticallyStable => {
                let qkf = quasi_kronecker(p, &tol).unwrap();
                let rate = eigenvalues(&qkf.a0).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max);
                let tr = simulate(p, &x0, 20.0 / rate.abs(), 401, &tol).unwrap();
                assert!(residual_along(&tr, p) <= 1e-6, "#{i}");
                assert!(tr.final_norm() <= 1e-3 * x0.norm(), "#{i}: {}", tr.final_norm());
            }
            StabilityClass::Stable => {
                let qkf = quasi_kronecker(p, &tol).unwrap();
                let tr = simulate(p, &x0, 50.0, 2501, &tol).unwrap();
                assert!(residual_along(&tr, p) <= 1e-6, "#{i}");
                let scale = condition_number(&qkf.t);
                assert!(tr.sup_norm() <= 10.0 * scale * x0.norm(), "#{i}: {}", tr.sup_norm());
            }
            _ => {}
        }
    }
}

#[test]
fn closed_loop_bernoulli_feedback_decays() {
    let tol = ToleranceConfig::default();
    let mut r = rng(17);
    for i in 0..200 {
        let n1 = 1 + i % 6;
        let (a1, b1) = random_antistable_controllable(&mut r, n1, 1 + i % 2);
        let p1 = solve_bernoulli(&a1, &b1, &tol).unwrap();
        let k = -(b1.transpose() * &p1);
        let rate = eigenvalues(&(&a1 + &b1 * &k)).unwrap().iter().map(|l| l.re).fold(f64::MIN, f64::max);
        assert!(rate < 0.0, "#{i}");
        let d = DescriptorSystem::new(DMatrix::identity(n1, n1), a1.clone(), b1.clone()).unwrap();
        let x0 = random_matrix(&mut r, n1, 1).column(0).into_owned();
        let tr = simulate_feedback(&d, &k, &x0, 20.0 / rate.abs(), 201, &tol).unwrap();
        assert!(tr.final_norm() <= 1e-3 * x0.norm(), "#{i}: {}", tr.final_norm());
        assert_eq!(tr.inputs.as_ref().map(|u| u.len()), Some(201));
    }
}

#[test]
fn exact_and_floating_regularity_agree_on_integer_pencils() {
    let tol = ToleranceConfig::default();
    let mut r = rng(99);
    let mut singular = 0;
    for i in 0..300 {
        let p = integer_pencil(&mut r, i % 3 != 0, 8);
        let exact = exact_regularity(p.e(), p.a()).unwrap();
        assert_eq!(exact, i % 3 != 0, "#{i}: construction");
        assert_eq!(exact, is_regular(&p, &tol).unwrap(), "#{i}");
        singular += usize::from(!exact);
    }
    assert!(singular >= 90);
}

#[test]
fn zero_output_interconnection_along_solutions() {
    let tol = ToleranceConfig::default();
    let mut r = rng(43);
    let mut checked = 0;
    for i in 0..100 {
        let inst = random_stabilizable(&mut r, 8, false);
        let d = &inst.system;
        let c = build_certificates(d, &tol).unwrap();
        let ph = recast_ph(d, &c, &tol).unwrap();
        let cl = zero_output_interconnection(&ph, d).unwrap();
        let Some(x0) = consistent_x0(&cl, 500 + i, &tol) else { continue };
        let tr = simulate(&cl, &x0, 2.0, 101, &tol).unwrap();
        let btq = ph.b.transpose() * &ph.q;
        for (x, dx) in tr.states.iter().zip(&tr.derivatives) {
            let u = -(&btq * x);
            let y = &btq * x + &ph.sff * &u;
            let lhs = &ph.e * dx;
            let rhs = (&ph.j - &ph.r) * &ph.q * x + (&ph.b - &ph.p) * &u;
            let scale = 1.0 + x.norm();
            assert!(y.norm() <= 1e-8 * scale, "#{i}: y {}", y.norm());
            assert!((lhs - rhs).norm() <= 1e-8 * scale * (1.0 + d.a().norm()), "#{i}");
        }
        checked += 1;
    }
    assert!(checked >= 90);
}
