use pencilph_core::dh::{dh_stability_check, recast_dh, recast_dh_index1, validate_dh, DhStable, DH_DEFECT_LIMIT};
use pencilph_core::numerics::{nullspace_basis, vstack, ToleranceConfig};
use pencilph_core::pencil::is_regular;
use pencilph_core::recipes::{pencil_corpus, random_dh, rng, DhKernel};
use pencilph_core::stability::check_stability;
use pencilph_core::subspace::{angle_defect, Subspace};

#[test]
fn recast_on_stable_corpus() {
    let tol = ToleranceConfig::default();
    let mut checked = 0;
    let mut index1 = 0;
    for (i, inst) in pencil_corpus(31, 200, 8).iter().enumerate() {
        if !inst.class.is_stable() {
            continue;
        }
        let f = recast_dh(&inst.pencil, &tol).unwrap_or_else(|e| panic!("#{i}: {e}"));
        assert!(f.holds(DH_DEFECT_LIMIT), "#{i}: {:?}", f.residuals);
        let jr = &f.j - &f.r;
        let k1 = Subspace::from_orthonormal(nullspace_basis(&jr, &tol).unwrap()).unwrap();
        let k2 = Subspace::from_orthonormal(nullspace_basis(&vstack(&[&f.j, &f.r]), &tol).unwrap()).unwrap();
        assert!(angle_defect(&k1, &k2) < 1e-6, "#{i}: ker(J-R) {} vs {}", k1.dim(), k2.dim());
        checked += 1;
        if inst.index() <= 1 {
            let g = recast_dh_index1(&inst.pencil, &tol).unwrap_or_else(|e| panic!("#{i}: {e}"));
            assert!(g.holds(1e-8), "#{i}: {:?}", g.residuals);
            index1 += 1;
        }
    }
    assert!(checked >= 90 && index1 >= 30, "{checked} {index1}");
}

#[test]
fn structural_verdicts_agree_with_spectrum() {
    let tol = ToleranceConfig::default();
    let mut r = rng(5);
    let kinds = [DhKernel::QInvertible, DhKernel::Contained, DhKernel::NotContained];
    let mut definite = 0;
    for i in 0..300 {
        let inst = random_dh(&mut r, 2 + i % 5, kinds[i % 3]);
        let v = validate_dh(&inst.e, &inst.j, &inst.r, &inst.q, &tol).unwrap();
        assert!(v.valid, "#{i}: {v:?}");
        let p = inst.pencil();
        let rep = dh_stability_check(&inst.e, &inst.j, &inst.r, &inst.q, &tol).unwrap();
        assert_eq!(rep.regular, is_regular(&p, &tol).unwrap(), "#{i}");
        let cls = check_stability(&p, &tol).unwrap().classification;
        match rep.stable {
            DhStable::Yes => assert!(cls.is_stable(), "#{i}: {cls:?}"),
            DhStable::No => assert!(!cls.is_stable(), "#{i}: {cls:?}"),
            DhStable::NotGuaranteed => assert_eq!(rep.fallback, Some(cls)),
        }
        if rep.stable != DhStable::NotGuaranteed {
            definite += 1;
        }
    }
    assert!(definite > 150);
}
