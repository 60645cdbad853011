use pencilph_core::numerics::{eigenvalues, spectral_norm, sym_eigenvalues, ToleranceConfig};
use pencilph_core::pencil::MatrixPencil;
use pencilph_core::recipes::{random_antistable_controllable, random_stabilizable, rng};
use pencilph_core::stability::check_stability;
use pencilph_core::stabilize::{build_certificates, recast_ph, solve_bernoulli, zero_output_interconnection};

#[test]
fn bernoulli_on_random_pairs() {
    let tol = ToleranceConfig::default();
    let mut r = rng(17);
    for i in 0..200 {
        let n1 = 1 + i % 6;
        let (a1, b1) = random_antistable_controllable(&mut r, n1, 1 + i % 2);
        let p1 = solve_bernoulli(&a1, &b1, &tol).unwrap_or_else(|e| panic!("#{i}: {e}"));
        let res = spectral_norm(&(a1.transpose() * &p1 + &p1 * &a1 - &p1 * &b1 * b1.transpose() * &p1));
        assert!(res <= 1e-8 * spectral_norm(&p1).powi(2) * spectral_norm(&b1).powi(2), "#{i}: {res}");
        assert!(sym_eigenvalues(&p1)[0] > 0.0);
        let cl = &a1 - &b1 * b1.transpose() * &p1;
        assert!(eigenvalues(&cl).unwrap().iter().all(|l| l.re < 0.0), "#{i}");
    }
}

#[test]
fn certificates_and_recast_on_stabilizable_corpus() {
    let tol = ToleranceConfig::default();
    let mut r = rng(41);
    for i in 0..200 {
        let inst = random_stabilizable(&mut r, 8, i % 2 == 1);
        let d = &inst.system;
        let c = build_certificates(d, &tol).unwrap_or_else(|e| panic!("#{i}: {e}"));
        assert_eq!((c.decomposition.n1, c.decomposition.n2), (inst.n1, inst.n2), "#{i}");
        assert!(c.holds(), "#{i}: {:?}", c.residuals);
        let closed = MatrixPencil::new(d.e().clone(), d.a() + d.b() * &c.k).unwrap();
        let v = check_stability(&closed, &tol).unwrap();
        assert!(v.classification.is_stable(), "#{i}: {}", v.reason);
        let ph = recast_ph(d, &c, &tol).unwrap_or_else(|e| panic!("#{i}: {e}"));
        let cl = zero_output_interconnection(&ph, d).unwrap();
        let expect = d.a() - d.b() * d.b().transpose() * (&c.x2 - &c.x1) * d.e();
        assert!((cl.a() - expect).amax() <= 1e-10 * (1.0 + d.a().amax()), "#{i}");
    }
}
