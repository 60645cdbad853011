//! Behavioral stabilization of descriptor systems `[E, A, B]` and their
//! port-Hamiltonian reformulation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{self, Complex64, ToleranceConfig};
use crate::pencil::{self, DescriptorSystem, MatrixPencil};
use crate::stability::{self, fmt_c};
use crate::subspace::{self, CompareMode, Subspace};

/// `S (sE − A) T = blkdiag(sI − A1, sI − A2, sN − I)` with `σ(A1) ⊂ ℂ₊`.
#[derive(Debug, Clone)]
pub struct RefinedDecomposition {
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub n1: usize,
    pub n2: usize,
    pub alpha: Vec<usize>,
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub b1: DMatrix<f64>,
    pub b2: DMatrix<f64>,
    pub balpha: DMatrix<f64>,
    pub residual: f64,
    pub system_space: Subspace,
}

impl RefinedDecomposition {
    /// Size of the nilpotent part.
    pub fn n3(&self) -> usize {
        self.alpha.iter().sum()
    }
}

pub fn refined_decomposition(d: &DescriptorSystem, tol: &ToleranceConfig) -> Result<RefinedDecomposition> {
    let p = d.pencil();
    let qkf = pencil::quasi_kronecker(p, tol)?;
    if !pencil::regular_from_form(p, &qkf, tol) {
        return Err(Error::SingularPencil);
    }
    let spectrum = pencil::spectrum_from_form(p, &qkf, tol)?;
    if let Some(e) = spectrum.iter().find(|e| e.value.re.abs() <= tol.atol && !e.semi_simple) {
        return Err(Error::ImagJordanBlock { re: e.value.re, im: e.value.im });
    }
    let n = p.n();
    let n0 = qkf.n0;
    let (w, blocks) = if n0 == 0 {
        (DMatrix::zeros(0, 0), vec![DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)])
    } else {
        let eigs = numerics::eigenvalues(&qkf.a0)?;
        let centers: Vec<Complex64> = numerics::cluster_eigenvalues(&eigs, tol).into_iter().map(|c| c.0).collect();
        let right: Vec<bool> = centers.iter().map(|c| c.re > tol.atol).collect();
        let sel = |l: Complex64| right[stability::nearest(l, &centers)];
        numerics::spectral_split(&qkf.a0, &[&sel], tol)?
    };
    let winv = numerics::inverse_checked(&w, "spectral decoupling", tol)?;
    let na = n - n0;
    let s = numerics::block_diag(&[&winv, &DMatrix::identity(na, na)]) * &qkf.s;
    let t = &qkf.t * numerics::block_diag(&[&w, &DMatrix::identity(na, na)]);
    let (a1, a2) = (blocks[0].clone(), blocks[1].clone());
    let (n1, n2) = (a1.nrows(), a2.nrows());
    let sb = &s * d.b();
    let k = d.k();
    let e_t = qkf.e_template();
    let a_t = numerics::block_diag(&[&a1, &a2, &DMatrix::identity(na, na)]);
    let residual = numerics::spectral_norm(&(&s * p.e() * &t - e_t))
        .max(numerics::spectral_norm(&(&s * p.a() * &t - a_t)));
    Ok(RefinedDecomposition {
        n1,
        n2,
        alpha: qkf.alpha.clone(),
        a1,
        a2,
        b1: sb.view((0, 0), (n1, k)).into_owned(),
        b2: sb.view((n1, 0), (n2, k)).into_owned(),
        balpha: sb.view((n0, 0), (na, k)).into_owned(),
        residual,
        system_space: pencil::system_space_from_form(&qkf),
        s,
        t,
    })
}

/// Hautus test `rank[λI − A1, B1] = n1` at each eigenvalue of `A1`.
pub fn hautus_controllable(a1: &DMatrix<f64>, b1: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<bool> {
    let n1 = a1.nrows();
    if n1 == 0 {
        return Ok(true);
    }
    let eigs = numerics::eigenvalues(a1)?;
    for (c, _) in numerics::cluster_eigenvalues(&eigs, tol) {
        let re = numerics::hstack(&[&(DMatrix::identity(n1, n1) * c.re - a1), b1]);
        let im = numerics::hstack(&[&(DMatrix::identity(n1, n1) * c.im), &DMatrix::zeros(n1, b1.ncols())]);
        let scale = numerics::spectral_norm(&re).max(numerics::spectral_norm(&im));
        let rank = re.ncols() - numerics::complex_nullity(&re, &im, tol.threshold(scale));
        if rank < n1 {
            return Ok(false);
        }
    }
    Ok(true)
}

pub fn is_behaviorally_stabilizable(d: &DescriptorSystem, tol: &ToleranceConfig) -> Result<bool> {
    let rd = refined_decomposition(d, tol)?;
    hautus_controllable(&rd.a1, &rd.b1, tol)
}

/// `P1 > 0` with `A1ᵀP1 + P1A1 = P1B1B1ᵀP1`, via `A1Y + YA1ᵀ = B1B1ᵀ`, `P1 = Y⁻¹`.
pub fn solve_bernoulli(a1: &DMatrix<f64>, b1: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    numerics::check_square(a1, "A1")?;
    let n1 = a1.nrows();
    if b1.nrows() != n1 {
        return Err(Error::InvalidInput("B1 must have as many rows as A1".into()));
    }
    if n1 == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    if let Some(l) = numerics::eigenvalues(a1)?.into_iter().find(|l| l.re <= tol.atol) {
        return Err(Error::InvalidInput(format!("A1 has eigenvalue {} outside the open right half-plane", fmt_c(l))));
    }
    let bb = b1 * b1.transpose();
    let y = numerics::sym_part(&numerics::solve_lyapunov_equation(&(-a1.transpose()), &bb, tol)?);
    let ev = numerics::sym_eigenvalues(&y);
    let ymax = ev.last().copied().unwrap_or(0.0);
    if !(ev[0] > tol.threshold(ymax)) || ev[0] < ymax * tol.rtol * 1e-2 {
        return Err(Error::NotControllable(format!(
            "Gramian-type solution has eigenvalues in [{:.3e}, {:.3e}]",
            ev[0], ymax
        )));
    }
    let p1 = numerics::sym_part(&numerics::inverse_checked(&y, "Bernoulli solution", tol)?);
    let res = numerics::spectral_norm(&(a1.transpose() * &p1 + &p1 * a1 - &p1 * &bb * &p1));
    let bound = 1e-8 * numerics::spectral_norm(&p1).powi(2) * numerics::spectral_norm(b1).powi(2);
    if res > bound {
        return Err(Error::IllConditioned(format!("Bernoulli residual {res:.3e} exceeds {bound:.3e}")));
    }
    Ok(p1)
}

#[derive(Debug, Clone)]
pub struct StabilizationCertificate {
    pub x1: DMatrix<f64>,
    pub x2: DMatrix<f64>,
    /// Bernoulli solution for `(A1, B1)`; defines the feedback.
    pub p1: DMatrix<f64>,
    /// Bernoulli solution behind `X1` (differs from `p1` only when the input
    /// acts on the nilpotent part).
    pub p1_certificate: DMatrix<f64>,
    pub p2: DMatrix<f64>,
    /// Feedback `u = K x`.
    pub k: DMatrix<f64>,
    pub decomposition: RefinedDecomposition,
    pub residuals: BTreeMap<String, f64>,
}

/// Builds `X1`, `X2` and the stabilizing feedback.
pub fn build_certificates(d: &DescriptorSystem, tol: &ToleranceConfig) -> Result<StabilizationCertificate> {
    let rd = refined_decomposition(d, tol)?;
    if !hautus_controllable(&rd.a1, &rd.b1, tol)? {
        return Err(Error::NotControllable("an unstable mode is not reachable from the input".into()));
    }
    let n = d.n();
    let (n1, n2) = (rd.n1, rd.n2);
    let nf = n1 + n2;
    let p1 = solve_bernoulli(&rd.a1, &rd.b1, tol)?;
    let sinv = numerics::inverse_checked(&rd.s, "left transformation", tol)?;
    let f = sinv.columns(0, nf).into_owned();
    let fpinv = if nf == 0 {
        DMatrix::zeros(0, n)
    } else {
        numerics::inverse_checked(&(f.transpose() * &f), "system space basis", tol)? * f.transpose()
    };
    // Input seen by the finite coordinates after the invariance-preserving lift.
    let bt = &fpinv * d.b();
    let bt1 = bt.rows(0, n1).into_owned();
    let p1c = if rd.balpha.amax() == 0.0 || n1 == 0 { p1.clone() } else { solve_bernoulli(&rd.a1, &bt1, tol)? };
    let p2 = if n2 == 0 {
        DMatrix::zeros(0, 0)
    } else {
        let c = stability::solve_lyapunov_inequality(&MatrixPencil::new(DMatrix::identity(n2, n2), rd.a2.clone())?, false, tol)?;
        c.x
    };
    let lift = |blk: &DMatrix<f64>| numerics::sym_part(&(fpinv.transpose() * blk * &fpinv));
    let x1 = lift(&numerics::block_diag(&[&p1c, &DMatrix::zeros(n2, n2)]));
    let x2_raw = lift(&numerics::block_diag(&[&DMatrix::zeros(n1, n1), &p2]));
    let scale = numerics::spectral_norm(&x2_raw);
    let (x2, p2) = if scale > 0.0 { (x2_raw / scale, p2 / scale) } else { (x2_raw, p2) };
    let na = n - nf;
    let tinv = numerics::inverse_checked(&rd.t, "right transformation", tol)?;
    let kf = numerics::hstack(&[&(-(rd.b1.transpose() * &p1)), &DMatrix::zeros(d.k(), n2 + na)]);
    let k = kf * tinv;
    let residuals = certificate_residuals(d, &x1, &x2, &rd.system_space, tol)?;
    Ok(StabilizationCertificate { x1, x2, p1, p1_certificate: p1c, p2, k, decomposition: rd, residuals })
}

fn certificate_residuals(
    d: &DescriptorSystem,
    x1: &DMatrix<f64>,
    x2: &DMatrix<f64>,
    vsys: &Subspace,
    tol: &ToleranceConfig,
) -> Result<BTreeMap<String, f64>> {
    let (e, a, b) = (d.e(), d.a(), d.b());
    let n = d.n();
    let nrm = numerics::spectral_norm;
    let v = vsys.basis();
    let form = |x: &DMatrix<f64>| {
        let m = a.transpose() * x * e;
        &m + m.transpose()
    };
    let mut out = BTreeMap::new();
    let xe = x1 * e;
    let rhs = xe.transpose() * b * b.transpose() * &xe;
    let g1 = v.transpose() * (form(x1) - &rhs) * v;
    let s1 = 1.0 + nrm(a) * nrm(x1) * nrm(e) + nrm(&rhs);
    out.insert("gabd1".to_string(), if v.ncols() == 0 { 0.0 } else { nrm(&g1) / s1 });
    let g2 = numerics::sym_max_eig(&(v.transpose() * form(x2) * v)).unwrap_or(0.0);
    out.insert("gabd2".to_string(), g2.max(0.0) / (1.0 + nrm(a) * nrm(x2) * nrm(e)));
    let ev = subspace::image(e, vsys, tol)?;
    let zero = DMatrix::zeros(n, n);
    for (name, x) in [("x1_psd", x1), ("x2_psd", x2)] {
        let c = subspace::compare_on(x, &zero, &ev, CompareMode::Geq, tol)?;
        out.insert(name.to_string(), if ev.dim() == 0 { 0.0 } else { (-c.value).max(0.0) / (1.0 + nrm(x)) });
    }
    let sum = x1 + x2;
    let c = subspace::compare_on(&sum, &zero, &ev, CompareMode::Gt, tol)?;
    out.insert(
        "sum_margin".to_string(),
        if ev.dim() == 0 { 1.0 } else if c.holds { c.value } else { c.value.min(0.0) },
    );
    for (name, x) in [("invariance_plus", sum), ("invariance_minus", x2 - x1)] {
        out.insert(name.to_string(), subspace::angle_defect(&subspace::image(&x, &ev, tol)?, &ev));
    }
    Ok(out)
}

impl StabilizationCertificate {
    pub fn holds(&self) -> bool {
        self.residuals.iter().all(|(k, &v)| match k.as_str() {
            "sum_margin" => v > 0.0,
            "gabd2" => v <= 1e-9,
            _ => v <= 1e-7,
        })
    }
}

/// Port-Hamiltonian descriptor system
/// `d/dt Ex = (J−R)Qx + (B−P)u`, `y = (B+P)ᵀQx + (Sff+Nff)u`.
#[derive(Debug, Clone)]
pub struct PhDescriptor {
    pub e: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub p: DMatrix<f64>,
    pub sff: DMatrix<f64>,
    pub nff: DMatrix<f64>,
    pub system_space: Subspace,
    pub residuals: BTreeMap<String, f64>,
}

/// Recasts `[E, A, B]` with the output `y = BᵀQx + u`, `Q = (X2 − X1)E`.
pub fn recast_ph(d: &DescriptorSystem, cert: &StabilizationCertificate, tol: &ToleranceConfig) -> Result<PhDescriptor> {
    let (e, a, b) = (d.e(), d.a(), d.b());
    let n = d.n();
    let k = d.k();
    if cert.x1.shape() != (n, n) || cert.x2.shape() != (n, n) {
        return Err(Error::InvalidInput("certificate does not match the system dimensions".into()));
    }
    let vsys = pencil::system_space(d.pencil(), tol)?;
    let q = (&cert.x2 - &cert.x1) * e;
    let v = vsys.basis();
    let qinv = if v.ncols() == 0 {
        DMatrix::zeros(n, n)
    } else {
        v * numerics::pseudo_inverse(&(&q * v), tol)?
    };
    let aq = a * qinv;
    let j = numerics::skew_part(&aq);
    let r = -numerics::sym_part(&aq);
    let p = DMatrix::zeros(n, k);
    let sff = DMatrix::identity(k, k);
    let nff = DMatrix::zeros(k, k);

    let nrm = numerics::spectral_norm;
    let ev = subspace::image(e, &vsys, tol)?;
    let lb = numerics::block_diag(&[ev.basis(), &DMatrix::identity(k, k)]);
    let l = Subspace::from_orthonormal_unchecked(lb);
    let jb = numerics::vstack(&[&numerics::hstack(&[&j, b]), &numerics::hstack(&[&(-b.transpose()), &nff])]);
    let rs = numerics::vstack(&[&numerics::hstack(&[&r, &p]), &numerics::hstack(&[&p.transpose(), &sff])]);
    let mut res = BTreeMap::new();
    let c = subspace::compare_on(&jb, &(-jb.transpose()), &l, CompareMode::Eq, tol)?;
    res.insert("jb_skew".to_string(), c.value / (1.0 + nrm(&jb)));
    let c = subspace::compare_on(&rs, &DMatrix::zeros(n + k, n + k), &l, CompareMode::Geq, tol)?;
    res.insert("rs_psd".to_string(), (-c.value).max(0.0) / (1.0 + nrm(&rs)));
    let qte = q.transpose() * e;
    let c = subspace::compare_on(&qte, &qte.transpose(), &vsys, CompareMode::Eq, tol)?;
    res.insert("qte_sym".to_string(), c.value / (1.0 + nrm(&qte)));
    let c = subspace::compare_on(a, &((&j - &r) * &q), &vsys, CompareMode::Eq, tol)?;
    res.insert("a_factor".to_string(), c.value / (1.0 + nrm(a)));
    if let Some((name, v)) = res.iter().find(|(_, &v)| !(v <= 1e-7)) {
        return Err(Error::CertificateMismatch(format!("{name} defect {v:.3e}")));
    }
    Ok(PhDescriptor {
        e: e.clone(),
        j,
        r,
        q,
        b: b.clone(),
        p,
        sff,
        nff,
        system_space: vsys,
        residuals: res,
    })
}

/// The pencil `[E, A − BBᵀQ]` obtained by imposing `y = 0`.
pub fn zero_output_interconnection(ph: &PhDescriptor, d: &DescriptorSystem) -> Result<MatrixPencil> {
    if ph.q.shape() != (d.n(), d.n()) || ph.b.shape() != d.b().shape() {
        return Err(Error::InvalidInput("pH data does not match the system".into()));
    }
    MatrixPencil::new(d.e().clone(), d.a() - d.b() * d.b().transpose() * &ph.q)
}
