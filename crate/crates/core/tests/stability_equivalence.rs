use pencilph_core::numerics::ToleranceConfig;
use pencilph_core::recipes::{pencil_corpus, StabilityClass};
use pencilph_core::stability::{check_stability, solve_lyapunov_inequality};
use pencilph_core::subspace::{compare_on, image, CompareMode};
use pencilph_core::Error;
use nalgebra::DMatrix;

#[test]
fn certificate_exists_exactly_for_stable_pencils() {
    let tol = ToleranceConfig::default();
    let corpus = pencil_corpus(23, 300, 8);
    let mut mismatches = Vec::new();
    for (i, inst) in corpus.iter().enumerate() {
        let p = &inst.pencil;
        let verdict = check_stability(p, &tol).unwrap();
        if verdict.classification != inst.class {
            mismatches.push(format!("#{i}: class {:?} vs {:?}", verdict.classification, inst.class));
            continue;
        }
        let cert = solve_lyapunov_inequality(p, false, &tol);
        match (&cert, verdict.classification.is_stable()) {
            (Ok(c), true) => {
                assert!(c.is_valid(), "#{i}");
                let n = p.n();
                let form = p.a().transpose() * &c.x * p.e();
                let form = &form + form.transpose();
                let neg = compare_on(&(-form), &DMatrix::zeros(n, n), &c.system_space, CompareMode::Geq, &tol).unwrap();
                assert!(neg.holds || neg.value >= -c.residual_bound, "#{i}: {}", neg.value);
                let ev = image(p.e(), &c.system_space, &tol).unwrap();
                assert!(compare_on(&c.x, &DMatrix::zeros(n, n), &ev, CompareMode::Gt, &tol).unwrap().holds);
            }
            (Err(Error::NotStable(_)), false) => {}
            (r, s) => mismatches.push(format!("#{i}: stable={s} certificate={:?}", r.as_ref().err())),
        }
        let strict = solve_lyapunov_inequality(p, true, &tol);
        let asym = verdict.classification == StabilityClass::AsymptoticallyStable;
        if strict.is_ok() != asym {
            mismatches.push(format!("#{i}: strict certificate {:?} for {:?}", strict.err(), verdict.classification));
        }
    }
    assert!(mismatches.is_empty(), "{mismatches:#?}");
}
