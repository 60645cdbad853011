//! Stability of regular DAEs: spectral classification and Lyapunov certificates
//! on the system space.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{self, Complex64, ToleranceConfig};
use crate::pencil::{self, MatrixPencil, QuasiKroneckerForm, SpectrumEntry};
use crate::subspace::{self, CompareMode, Subspace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum StabilityClass {
    AsymptoticallyStable,
    Stable,
    Unstable,
    Singular,
}

impl StabilityClass {
    pub const ALL: [StabilityClass; 4] = [
        StabilityClass::AsymptoticallyStable,
        StabilityClass::Stable,
        StabilityClass::Unstable,
        StabilityClass::Singular,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityClass::AsymptoticallyStable => "asymptotically_stable",
            StabilityClass::Stable => "stable",
            StabilityClass::Unstable => "unstable",
            StabilityClass::Singular => "singular",
        }
    }

    pub fn is_stable(&self) -> bool {
        matches!(self, StabilityClass::AsymptoticallyStable | StabilityClass::Stable)
    }
}

#[derive(Debug, Clone)]
pub struct StabilityVerdict {
    pub classification: StabilityClass,
    /// Empty for singular pencils.
    pub spectrum: Vec<SpectrumEntry>,
    pub reason: String,
}

/// Symmetric `X` with `AᵀXE + EᵀXA ≤ 0` on the system space and `X > 0` on `E·𝒱sys`.
#[derive(Debug, Clone)]
pub struct LyapunovCertificate {
    pub x: DMatrix<f64>,
    pub system_space: Subspace,
    /// `max(0, λmax)` of the Lyapunov form restricted to the system space.
    pub residual_lyap: f64,
    /// Largest eigenvalue of the restricted Lyapunov form (negative when strict).
    pub lyap_max_eig: f64,
    pub residual_bound: f64,
    pub pd_margin: f64,
    pub invariance_defect: f64,
    pub strict: bool,
}

impl LyapunovCertificate {
    /// Acceptance of all recorded residuals.
    pub fn is_valid(&self) -> bool {
        self.residual_lyap <= self.residual_bound && self.pd_margin > 0.0 && self.invariance_defect <= 1e-7
    }
}

fn classify_spectrum(entries: &[SpectrumEntry], tol: &ToleranceConfig) -> (StabilityClass, String) {
    if let Some(e) = entries.iter().find(|e| e.value.re > tol.atol) {
        return (
            StabilityClass::Unstable,
            format!("eigenvalue {} lies in the open right half-plane", fmt_c(e.value)),
        );
    }
    let axis: Vec<&SpectrumEntry> = entries.iter().filter(|e| e.value.re.abs() <= tol.atol).collect();
    if let Some(e) = axis.iter().find(|e| !e.semi_simple) {
        return (
            StabilityClass::Unstable,
            format!(
                "eigenvalue {} on the imaginary axis is not semi-simple (algebraic {}, geometric {})",
                fmt_c(e.value),
                e.algebraic,
                e.geometric
            ),
        );
    }
    if axis.is_empty() {
        (
            StabilityClass::AsymptoticallyStable,
            "regular with all finite eigenvalues in the open left half-plane".into(),
        )
    } else {
        (
            StabilityClass::Stable,
            "regular, spectrum in the closed left half-plane, imaginary-axis eigenvalues semi-simple".into(),
        )
    }
}

pub(crate) fn fmt_c(z: Complex64) -> String {
    if z.im == 0.0 {
        format!("{:.6}", z.re)
    } else {
        format!("{:.6}{:+.6}i", z.re, z.im)
    }
}

/// Eigenvalue-based classification.
pub fn check_stability(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<StabilityVerdict> {
    let qkf = pencil::quasi_kronecker(p, tol)?;
    verdict_from_form(p, &qkf, tol)
}

pub(crate) fn verdict_from_form(
    p: &MatrixPencil,
    qkf: &QuasiKroneckerForm,
    tol: &ToleranceConfig,
) -> Result<StabilityVerdict> {
    if !pencil::regular_from_form(p, qkf, tol) {
        return Ok(StabilityVerdict {
            classification: StabilityClass::Singular,
            spectrum: Vec::new(),
            reason: "sE - A is not regular".into(),
        });
    }
    let spectrum = pencil::spectrum_from_form(p, qkf, tol)?;
    let (classification, reason) = classify_spectrum(&spectrum, tol);
    Ok(StabilityVerdict { classification, spectrum, reason })
}

pub(crate) fn nearest(l: Complex64, centers: &[Complex64]) -> usize {
    let mut best = 0;
    let mut d = f64::INFINITY;
    for (i, c) in centers.iter().enumerate() {
        let di = (l - c).norm().min((l - c.conj()).norm());
        if di < d {
            d = di;
            best = i;
        }
    }
    best
}

/// Solution of the reduced inequality `A0ᵀX + XA0 ≤ 0` (or `< 0` when strict).
pub(crate) fn reduced_solution(a0: &DMatrix<f64>, strict: bool, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    let n0 = a0.nrows();
    if n0 == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    let eigs = numerics::eigenvalues(a0)?;
    let clusters = numerics::cluster_eigenvalues(&eigs, tol);
    let centers: Vec<Complex64> = clusters.iter().map(|c| c.0).collect();
    if let Some(c) = centers.iter().find(|c| c.re > tol.atol) {
        return Err(Error::NotStable(format!("eigenvalue {} in the open right half-plane", fmt_c(*c))));
    }
    let left: Vec<bool> = centers.iter().map(|c| c.re < -tol.atol).collect();
    if strict && left.iter().any(|l| !l) {
        return Err(Error::NotStable("eigenvalue on the imaginary axis".into()));
    }
    // Frequencies of the axis clusters, merged within the cluster radius.
    let mut freqs: Vec<f64> = Vec::new();
    let mut group = vec![usize::MAX; centers.len()];
    for (i, c) in centers.iter().enumerate() {
        if left[i] {
            continue;
        }
        let w = c.im.abs();
        let g = match freqs.iter().position(|&f| (f - w).abs() <= tol.cluster_radius(Complex64::new(0.0, w))) {
            Some(g) => g,
            None => {
                freqs.push(w);
                freqs.len() - 1
            }
        };
        group[i] = g;
    }
    let is_left = |l: Complex64| left[nearest(l, &centers)];
    let mut selectors: Vec<Box<dyn Fn(Complex64) -> bool + '_>> = vec![Box::new(is_left)];
    for g in 0..freqs.len() {
        let group = &group;
        let centers = &centers;
        selectors.push(Box::new(move |l: Complex64| group[nearest(l, centers)] == g));
    }
    let refs: Vec<&dyn Fn(Complex64) -> bool> = selectors.iter().map(|b| b.as_ref()).collect();
    let (w, blocks) = numerics::spectral_split(a0, &refs, tol)?;
    let mut parts = Vec::with_capacity(blocks.len());
    let a_left = &blocks[0];
    parts.push(if a_left.nrows() > 0 {
        numerics::solve_lyapunov_equation(a_left, &DMatrix::identity(a_left.nrows(), a_left.nrows()), tol)?
    } else {
        DMatrix::zeros(0, 0)
    });
    for m in &blocks[1..] {
        let k = m.nrows();
        if k == 0 {
            parts.push(DMatrix::zeros(0, 0));
            continue;
        }
        let w2 = -(m * m).trace() / k as f64;
        let x = if w2 > tol.atol {
            (DMatrix::identity(k, k) + m.transpose() * m / w2) * 0.5
        } else {
            DMatrix::identity(k, k)
        };
        parts.push(x);
    }
    let refs: Vec<&DMatrix<f64>> = parts.iter().collect();
    let xd = numerics::block_diag(&refs);
    let winv = numerics::inverse_checked(&w, "spectral decoupling", tol)?;
    Ok(numerics::sym_part(&(winv.transpose() * xd * winv)))
}

/// Constructs a Lyapunov certificate through the quasi-Kronecker form and
/// verifies it before returning.
pub fn solve_lyapunov_inequality(
    p: &MatrixPencil,
    strict: bool,
    tol: &ToleranceConfig,
) -> Result<LyapunovCertificate> {
    let qkf = pencil::quasi_kronecker(p, tol)?;
    if !pencil::regular_from_form(p, &qkf, tol) {
        return Err(Error::NotStable("sE - A is not regular".into()));
    }
    let xf = reduced_solution(&qkf.a0, strict, tol)?;
    let n0 = qkf.n0;
    let sinv = numerics::inverse_checked(&qkf.s, "left transformation", tol)?;
    // F spans E·Vsys; X = F⁺ᵀ X_f F⁺ keeps that subspace invariant.
    let f = sinv.columns(0, n0).into_owned();
    let x = if n0 == 0 {
        DMatrix::zeros(p.n(), p.n())
    } else {
        let fpinv = numerics::inverse_checked(&(f.transpose() * &f), "system space basis", tol)? * f.transpose();
        numerics::sym_part(&(fpinv.transpose() * &xf * &fpinv))
    };
    let vsys = pencil::system_space_from_form(&qkf);
    let cert = evaluate_certificate(p, x, vsys, strict, tol)?;
    if cert.residual_lyap > cert.residual_bound {
        return Err(Error::NotStable(format!(
            "no Lyapunov certificate: restricted form has eigenvalue {:.3e}, likely a non-semi-simple imaginary-axis eigenvalue",
            cert.lyap_max_eig
        )));
    }
    if strict && cert.system_space.dim() > 0 && cert.lyap_max_eig > -strict_margin(p, &cert.x, tol) {
        return Err(Error::NotStable("restricted Lyapunov form is not negative definite".into()));
    }
    if !cert.is_valid() {
        return Err(Error::IllConditioned(format!(
            "certificate failed verification (pd margin {:.3e}, invariance defect {:.3e})",
            cert.pd_margin, cert.invariance_defect
        )));
    }
    Ok(cert)
}

fn lyap_form(p: &MatrixPencil, x: &DMatrix<f64>) -> DMatrix<f64> {
    let m = p.a().transpose() * x * p.e();
    numerics::sym_part(&(&m + m.transpose()))
}

fn strict_margin(p: &MatrixPencil, x: &DMatrix<f64>, tol: &ToleranceConfig) -> f64 {
    tol.atol * (1.0 + numerics::spectral_norm(&lyap_form(p, x)))
}

/// Residuals of a candidate `X` against the system space `vsys`.
pub fn evaluate_certificate(
    p: &MatrixPencil,
    x: DMatrix<f64>,
    vsys: Subspace,
    strict: bool,
    tol: &ToleranceConfig,
) -> Result<LyapunovCertificate> {
    let n = p.n();
    if x.shape() != (n, n) || vsys.ambient() != n {
        return Err(Error::InvalidInput("certificate dimensions do not match the pencil".into()));
    }
    let norm_x = numerics::spectral_norm(&x);
    let residual_bound =
        1e-7 * (1.0 + numerics::spectral_norm(p.a()) * norm_x * numerics::spectral_norm(p.e()));
    let b = vsys.basis();
    let lyap_max_eig = if vsys.dim() == 0 {
        0.0
    } else {
        numerics::sym_max_eig(&(b.transpose() * lyap_form(p, &x) * b)).unwrap_or(0.0)
    };
    let ev = subspace::image(p.e(), &vsys, tol)?;
    let pd = subspace::compare_on(&x, &DMatrix::zeros(n, n), &ev, CompareMode::Gt, tol)?;
    let pd_margin = if ev.dim() == 0 {
        f64::INFINITY
    } else if pd.holds {
        pd.value
    } else {
        pd.value.min(0.0)
    };
    let xev = subspace::image(&x, &ev, tol)?;
    let invariance_defect = subspace::angle_defect(&xev, &ev);
    Ok(LyapunovCertificate {
        x,
        system_space: vsys,
        residual_lyap: lyap_max_eig.max(0.0),
        lyap_max_eig,
        residual_bound,
        pd_margin,
        invariance_defect,
        strict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(r: usize, c: usize, v: &[f64]) -> DMatrix<f64> {
        DMatrix::from_row_slice(r, c, v)
    }

    fn pen(e: DMatrix<f64>, a: DMatrix<f64>) -> MatrixPencil {
        MatrixPencil::new(e, a).unwrap()
    }

    #[test]
    fn classification_examples() {
        let t = ToleranceConfig::default();
        let i2 = DMatrix::identity(2, 2);
        let v = check_stability(&pen(i2.clone(), m(2, 2, &[0.0, -1.0, 0.0, 0.0])), &t).unwrap();
        assert_eq!(v.classification, StabilityClass::Unstable);
        let v = check_stability(&pen(i2.clone(), m(2, 2, &[0.0, 1.0, -1.0, 0.0])), &t).unwrap();
        assert_eq!(v.classification, StabilityClass::Stable);
        let v = check_stability(&pen(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[-1.0, 0.0, 0.0, 1.0])), &t).unwrap();
        assert_eq!(v.classification, StabilityClass::AsymptoticallyStable);
        let v = check_stability(&pen(m(1, 1, &[0.0]), m(1, 1, &[0.0])), &t).unwrap();
        assert_eq!(v.classification, StabilityClass::Singular);
    }

    #[test]
    fn certificate_examples() {
        let t = ToleranceConfig::default();
        let i2 = DMatrix::<f64>::identity(2, 2);
        let c = solve_lyapunov_inequality(&pen(i2.clone(), -&i2), true, &t).unwrap();
        assert!((&c.x - &i2 * 0.5).amax() < 1e-10, "{}", c.x);
        let c = solve_lyapunov_inequality(&pen(i2.clone(), m(2, 2, &[0.0, 1.0, -1.0, 0.0])), false, &t).unwrap();
        assert!((&c.x - &i2).amax() < 1e-10, "{}", c.x);
        assert!(c.residual_lyap < 1e-12);
        let c = solve_lyapunov_inequality(
            &pen(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[-1.0, 0.0, 0.0, 1.0])),
            false,
            &t,
        )
        .unwrap();
        assert!((&c.x - m(2, 2, &[0.5, 0.0, 0.0, 0.0])).amax() < 1e-10, "{}", c.x);
        assert!((c.lyap_max_eig + 1.0).abs() < 1e-10);
    }

    #[test]
    fn certificate_refused() {
        let t = ToleranceConfig::default();
        let i2 = DMatrix::<f64>::identity(2, 2);
        let jordan = pen(i2.clone(), m(2, 2, &[0.0, 1.0, 0.0, 0.0]));
        assert!(matches!(solve_lyapunov_inequality(&jordan, false, &t), Err(Error::NotStable(_))));
        let skew = pen(i2.clone(), m(2, 2, &[0.0, 1.0, -1.0, 0.0]));
        assert!(matches!(solve_lyapunov_inequality(&skew, true, &t), Err(Error::NotStable(_))));
        let growing = pen(i2.clone(), i2.clone());
        assert!(matches!(solve_lyapunov_inequality(&growing, false, &t), Err(Error::NotStable(_))));
    }
}
