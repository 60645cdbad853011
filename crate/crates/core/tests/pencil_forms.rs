use pencilph_core::numerics::ToleranceConfig;
use pencilph_core::pencil::{is_regular, quasi_kronecker};
use pencilph_core::recipes::{pencil_corpus, StabilityClass};

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

#[test]
fn recovers_block_structure_of_recipes() {
    let tol = ToleranceConfig::default();
    let mut failures = Vec::new();
    for (i, inst) in pencil_corpus(11, 500, 8).iter().enumerate() {
        let q = match quasi_kronecker(&inst.pencil, &tol) {
            Ok(q) => q,
            Err(e) => {
                failures.push(format!("#{i}: {e}"));
                continue;
            }
        };
        let ok = q.n0 == inst.n0
            && sorted(q.alpha.clone()) == sorted(inst.alpha.clone())
            && sorted(q.beta.clone()) == sorted(inst.beta.clone())
            && sorted(q.gamma.clone()) == sorted(inst.gamma.clone())
            && q.residual <= q.residual_bound;
        if !ok {
            failures.push(format!(
                "#{i}: got n0={} a={:?} b={:?} g={:?} res={:.2e}/{:.2e}, want n0={} a={:?} b={:?} g={:?}",
                q.n0, q.alpha, q.beta, q.gamma, q.residual, q.residual_bound, inst.n0, inst.alpha, inst.beta, inst.gamma
            ));
        }
        let reg = is_regular(&inst.pencil, &tol).unwrap();
        if reg != (inst.class != StabilityClass::Singular) {
            failures.push(format!("#{i}: regularity {reg}"));
        }
    }
    assert!(failures.is_empty(), "{} failures:\n{}", failures.len(), failures.join("\n"));
}
