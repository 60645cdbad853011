//! Dissipative-Hamiltonian forms `d/dt E x = (J − R) Q x` of stable DAEs.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{self, ToleranceConfig};
use crate::pencil::{self, MatrixPencil};
use crate::stability::{self, StabilityClass};
use crate::subspace::{self, CompareMode, Subspace};

/// Defect limit for recast factorizations (scale-relative).
pub const DH_DEFECT_LIMIT: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhMode {
    /// Relations hold on the system space only.
    OnSubspace,
    /// Index at most one: relations hold globally.
    GlobalIndex1,
}

#[derive(Debug, Clone)]
pub struct DhFactorization {
    pub j: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub system_space: Subspace,
    pub mode: DhMode,
    /// Named defects; every entry except `qte_margin` should be near zero.
    pub residuals: BTreeMap<String, f64>,
}

impl DhFactorization {
    pub fn holds(&self, limit: f64) -> bool {
        self.residuals
            .iter()
            .all(|(k, &v)| if k == "qte_margin" { v > 0.0 } else { v <= limit })
    }
}

/// Inverse of `Q` restricted to `V`: `V (QV)⁺`.
fn restricted_inverse(q: &DMatrix<f64>, v: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    if v.ncols() == 0 {
        return Ok(DMatrix::zeros(q.ncols(), q.nrows()));
    }
    Ok(v * numerics::pseudo_inverse(&(q * v), tol)?)
}

fn split(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (numerics::skew_part(m), -numerics::sym_part(m))
}

/// Recast of a stable DAE on its system space with `Q = XE`.
pub fn recast_dh(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<DhFactorization> {
    let cert = stability::solve_lyapunov_inequality(p, false, tol)?;
    let q = &cert.x * p.e();
    let qinv = restricted_inverse(&q, cert.system_space.basis(), tol)?;
    let (j, r) = split(&(p.a() * qinv));
    let residuals = subspace_residuals(p, &j, &r, &q, &cert.system_space, tol)?;
    Ok(DhFactorization {
        j,
        r,
        q,
        system_space: cert.system_space,
        mode: DhMode::OnSubspace,
        residuals,
    })
}

fn subspace_residuals(
    p: &MatrixPencil,
    j: &DMatrix<f64>,
    r: &DMatrix<f64>,
    q: &DMatrix<f64>,
    vsys: &Subspace,
    tol: &ToleranceConfig,
) -> Result<BTreeMap<String, f64>> {
    let n = p.n();
    let zero = DMatrix::zeros(n, n);
    let ev = subspace::image(p.e(), vsys, tol)?;
    let nrm = numerics::spectral_norm;
    let mut out = BTreeMap::new();
    let js = subspace::compare_on(j, &(-j.transpose()), &ev, CompareMode::Eq, tol)?;
    out.insert("j_skew".to_string(), js.value / (1.0 + nrm(j)));
    let rp = subspace::compare_on(r, &zero, &ev, CompareMode::Geq, tol)?;
    out.insert("r_psd".to_string(), (-rp.value).max(0.0) / (1.0 + nrm(r)));
    let jrq = (j - r) * q;
    let af = subspace::compare_on(p.a(), &jrq, vsys, CompareMode::Eq, tol)?;
    out.insert("a_factor".to_string(), af.value / (1.0 + nrm(p.a())));
    let qte = q.transpose() * p.e();
    let sym = subspace::compare_on(&qte, &qte.transpose(), vsys, CompareMode::Eq, tol)?;
    out.insert("qte_sym".to_string(), sym.value / (1.0 + nrm(&qte)));
    let qs = numerics::sym_part(&qte);
    let pd = subspace::compare_on(&qs, &zero, vsys, CompareMode::Gt, tol)?;
    let margin = if vsys.dim() == 0 { 1.0 } else if pd.holds { pd.value } else { pd.value.min(0.0) };
    out.insert("qte_margin".to_string(), margin);
    Ok(out)
}

/// Global recast for stable DAEs of index at most one.
pub fn recast_dh_index1(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<DhFactorization> {
    recast_index1_impl(p, None, tol)
}

/// As [`recast_dh_index1`] with a caller-chosen `X0 > 0` solving the reduced
/// inequality in quasi-Kronecker coordinates.
pub fn recast_dh_index1_with_x0(
    p: &MatrixPencil,
    x0: &DMatrix<f64>,
    tol: &ToleranceConfig,
) -> Result<DhFactorization> {
    recast_index1_impl(p, Some(x0), tol)
}

fn recast_index1_impl(
    p: &MatrixPencil,
    x0: Option<&DMatrix<f64>>,
    tol: &ToleranceConfig,
) -> Result<DhFactorization> {
    let qkf = pencil::quasi_kronecker(p, tol)?;
    let verdict = stability::verdict_from_form(p, &qkf, tol)?;
    if !verdict.classification.is_stable() {
        return Err(Error::NotStable(verdict.reason));
    }
    let index = qkf.index();
    if index >= 2 {
        return Err(Error::IndexTooHigh { index });
    }
    let n = p.n();
    let n0 = qkf.n0;
    let x0 = match x0 {
        Some(x) => {
            if x.shape() != (n0, n0) {
                return Err(Error::InvalidInput(format!("X0 must be {n0}x{n0}")));
            }
            x.clone()
        }
        None => stability::reduced_solution(&qkf.a0, false, tol)?,
    };
    let qhat = numerics::block_diag(&[&x0, &(-DMatrix::identity(n - n0, n - n0))]);
    let x0inv = numerics::inverse_checked(&x0, "X0", tol)?;
    let ahat_qinv = numerics::block_diag(&[&(&qkf.a0 * x0inv), &(-DMatrix::identity(n - n0, n - n0))]);
    let (jk, rk) = split(&ahat_qinv);
    let sinv = numerics::inverse_checked(&qkf.s, "left transformation", tol)?;
    let tinv = numerics::inverse_checked(&qkf.t, "right transformation", tol)?;
    let j = numerics::skew_part(&(&sinv * jk * sinv.transpose()));
    let r = numerics::sym_part(&(&sinv * rk * sinv.transpose()));
    let q = qkf.s.transpose() * qhat * tinv;
    let qte = q.transpose() * p.e();
    let anorm = numerics::spectral_norm(p.a());
    let mut residuals = BTreeMap::new();
    residuals.insert("j_skew".to_string(), numerics::spectral_norm(&(&j + j.transpose())));
    residuals.insert("r_psd".to_string(), numerics::psd_defect(&r));
    residuals.insert("qte_sym".to_string(), numerics::spectral_norm(&(&qte - qte.transpose())));
    residuals.insert("qte_psd".to_string(), numerics::psd_defect(&numerics::sym_part(&qte)));
    let fdef = numerics::spectral_norm(&(p.a() - (&j - &r) * &q));
    residuals.insert("a_factor".to_string(), if anorm > 0.0 { fdef / anorm } else { fdef });
    Ok(DhFactorization {
        j,
        r,
        q,
        system_space: pencil::system_space_from_form(&qkf),
        mode: DhMode::GlobalIndex1,
        residuals,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DhValidity {
    pub j_skew_defect: f64,
    pub r_psd_defect: f64,
    pub qte_sym_defect: f64,
    pub qte_psd_defect: f64,
    /// `ker Q ⊆ ker E`.
    pub kernel_condition: bool,
    /// `‖E·null(Q)‖`.
    pub kernel_defect: f64,
    pub valid: bool,
}

fn check_shapes(ms: &[(&DMatrix<f64>, &str)]) -> Result<usize> {
    let n = ms[0].0.nrows();
    for (m, name) in ms {
        if m.shape() != (n, n) {
            return Err(Error::InvalidInput(format!("{name} must be {n}x{n}")));
        }
        numerics::check_finite(m, name)?;
    }
    Ok(n)
}

/// Checks the structural conditions of a dH DAE `[E, (J − R) Q]`.
pub fn validate_dh(
    e: &DMatrix<f64>,
    j: &DMatrix<f64>,
    r: &DMatrix<f64>,
    q: &DMatrix<f64>,
    tol: &ToleranceConfig,
) -> Result<DhValidity> {
    check_shapes(&[(e, "E"), (j, "J"), (r, "R"), (q, "Q")])?;
    let nrm = numerics::spectral_norm;
    let qte = q.transpose() * e;
    let j_skew_defect = nrm(&(j + j.transpose()));
    let r_psd_defect = numerics::psd_defect(r).max(nrm(&(r - r.transpose())));
    let qte_sym_defect = nrm(&(&qte - qte.transpose()));
    let qte_psd_defect = numerics::psd_defect(&numerics::sym_part(&qte));
    let ker_q = numerics::nullspace_thr(q, tol.threshold(nrm(q)));
    let kernel_defect = if ker_q.ncols() == 0 { 0.0 } else { nrm(&(e * &ker_q)) };
    let kernel_condition = kernel_defect <= tol.threshold(nrm(e));
    let valid = j_skew_defect <= tol.threshold(nrm(j))
        && r_psd_defect <= tol.threshold(nrm(r))
        && qte_sym_defect <= tol.threshold(nrm(&qte))
        && qte_psd_defect <= tol.threshold(nrm(&qte));
    Ok(DhValidity {
        j_skew_defect,
        r_psd_defect,
        qte_sym_defect,
        qte_psd_defect,
        kernel_condition,
        kernel_defect,
        valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhStable {
    Yes,
    No,
    NotGuaranteed,
}

impl DhStable {
    pub fn as_str(&self) -> &'static str {
        match self {
            DhStable::Yes => "yes",
            DhStable::No => "no",
            DhStable::NotGuaranteed => "not_guaranteed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DhStabilityReport {
    pub regular: bool,
    pub stable: DhStable,
    pub via_clause: String,
    /// Eigenvalue classification of `[E, (J − R) Q]` when the structural
    /// tests are inconclusive.
    pub fallback: Option<StabilityClass>,
}

/// Structural regularity and stability tests for a dH DAE.
pub fn dh_stability_check(
    e: &DMatrix<f64>,
    j: &DMatrix<f64>,
    r: &DMatrix<f64>,
    q: &DMatrix<f64>,
    tol: &ToleranceConfig,
) -> Result<DhStabilityReport> {
    let n = check_shapes(&[(e, "E"), (j, "J"), (r, "R"), (q, "Q")])?;
    let nrm = numerics::spectral_norm;
    let qjq = q.transpose() * j * q;
    let qrq = q.transpose() * r * q;
    let stacked = numerics::vstack(&[e, &qjq, &qrq]);
    let regular = numerics::nullspace_thr(&stacked, tol.threshold(nrm(&stacked))).ncols() == 0;
    if !regular {
        return Ok(DhStabilityReport {
            regular,
            stable: DhStable::No,
            via_clause: "ker E ∩ ker QᵀJQ ∩ ker QᵀRQ ≠ {0}: the pencil is not regular".into(),
            fallback: None,
        });
    }
    let q_rank = numerics::rank_thr(q, tol.threshold(nrm(q)));
    if q_rank == n && numerics::condition_number(q) < 1.0 / (tol.rtol * 1e-2) {
        let ker_e = Subspace::from_orthonormal_unchecked(numerics::nullspace_thr(e, tol.threshold(nrm(e))));
        let q_ker_e = subspace::image(q, &ker_e, tol)?;
        let jr = numerics::vstack(&[j, r]);
        let ker_jr = Subspace::from_orthonormal_unchecked(numerics::nullspace_thr(&jr, tol.threshold(nrm(&jr))));
        let cap = subspace::intersect(&ker_jr, &q_ker_e, tol)?;
        let stable = if cap.dim() == 0 { DhStable::Yes } else { DhStable::No };
        let via_clause = format!(
            "Q invertible: ker J ∩ ker R ∩ Q ker E has dimension {}",
            cap.dim()
        );
        return Ok(DhStabilityReport { regular, stable, via_clause, fallback: None });
    }
    let validity = validate_dh(e, j, r, q, tol)?;
    if validity.kernel_condition {
        return Ok(DhStabilityReport {
            regular,
            stable: DhStable::Yes,
            via_clause: "regular and ker Q ⊆ ker E".into(),
            fallback: None,
        });
    }
    let p = MatrixPencil::new(e.clone(), (j - r) * q)?;
    let fallback = stability::check_stability(&p, tol)?.classification;
    Ok(DhStabilityReport {
        regular,
        stable: DhStable::NotGuaranteed,
        via_clause: "ker Q ⊄ ker E: no structural guarantee, eigenvalue test on sE - (J - R)Q".into(),
        fallback: Some(fallback),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn tol() -> ToleranceConfig {
        ToleranceConfig::default()
    }

    #[test]
    fn recast_examples() {
        let t = tol();
        let i2 = DMatrix::<f64>::identity(2, 2);
        let a = m(2, 2, &[-1.0, 1.0, -1.0, -1.0]);
        let f = recast_dh(&MatrixPencil::new(i2.clone(), a.clone()).unwrap(), &t).unwrap();
        assert!(f.holds(DH_DEFECT_LIMIT), "{:?}", f.residuals);
        assert!((&f.q - &i2 * 0.5).amax() < 1e-10);
        assert!((&f.j - m(2, 2, &[0.0, 2.0, -2.0, 0.0])).amax() < 1e-10);
        assert!((&f.r - &i2 * 2.0).amax() < 1e-10);

        let skew = m(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let f = recast_dh(&MatrixPencil::new(i2.clone(), skew.clone()).unwrap(), &t).unwrap();
        assert!((&f.q - &i2).amax() < 1e-10);
        assert!((&f.j - &skew).amax() < 1e-10);
        assert!(f.r.amax() < 1e-10);

        let e = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let p = MatrixPencil::new(e.clone(), a.clone()).unwrap();
        let f = recast_dh(&p, &t).unwrap();
        assert!((&f.q - m(2, 2, &[0.5, 0.0, 0.0, 0.0])).amax() < 1e-10);
        let x = (&f.j - &f.r) * &f.q * m(2, 1, &[1.0, 0.0]);
        assert!((x - m(2, 1, &[-1.0, 0.0])).amax() < 1e-10);
    }

    #[test]
    fn index1_example() {
        let t = tol();
        let e = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let a = m(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        let p = MatrixPencil::new(e.clone(), a.clone()).unwrap();
        let f = recast_dh_index1_with_x0(&p, &m(1, 1, &[1.0]), &t).unwrap();
        assert!(f.holds(1e-8), "{:?}", f.residuals);
        assert!(f.j.amax() < 1e-12);
        assert!((&f.r - DMatrix::identity(2, 2)).amax() < 1e-12);
        assert!(((&f.j - &f.r) * &f.q - &a).amax() < 1e-12);
        let f = recast_dh_index1(&p, &t).unwrap();
        assert!(f.holds(1e-8), "{:?}", f.residuals);
        let n2 = MatrixPencil::new(m(2, 2, &[0.0, 1.0, 0.0, 0.0]), DMatrix::identity(2, 2)).unwrap();
        assert!(matches!(recast_dh_index1(&n2, &t), Err(Error::IndexTooHigh { index: 2 })));
    }

    #[test]
    fn validity_and_stability() {
        let t = tol();
        let i2 = DMatrix::<f64>::identity(2, 2);
        let j = m(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let q = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let z = DMatrix::zeros(2, 2);
        let v = validate_dh(&i2, &j, &z, &q, &t).unwrap();
        assert!(v.valid && !v.kernel_condition);
        let s = dh_stability_check(&i2, &j, &z, &q, &t).unwrap();
        assert!(s.regular);
        assert_eq!(s.stable, DhStable::NotGuaranteed);
        assert_eq!(s.fallback, Some(StabilityClass::Unstable));

        let v = validate_dh(&i2, &z, &i2, &i2, &t).unwrap();
        assert!(v.valid && v.kernel_condition);
        let v = validate_dh(&i2, &m(2, 2, &[0.0, 1.0, 1.0, 0.0]), &z, &i2, &t).unwrap();
        assert!(!v.valid);
        assert!((v.j_skew_defect - 2.0).abs() < 1e-12);

        let e = m(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let s = dh_stability_check(&e, &z, &i2, &i2, &t).unwrap();
        assert!(s.regular);
        assert_eq!(s.stable, DhStable::Yes);
        let s = dh_stability_check(&e, &z, &z, &i2, &t).unwrap();
        assert!(!s.regular);
    }
}
