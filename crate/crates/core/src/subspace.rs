//! Subspaces with orthonormal bases and matrix relations restricted to them.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{self, ToleranceConfig};

/// A linear subspace of `R^ambient` given by an orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct Subspace {
    basis: DMatrix<f64>,
}

impl Subspace {
    /// Wraps a basis that is already orthonormal.
    pub fn from_orthonormal(basis: DMatrix<f64>) -> Result<Self> {
        let d = basis.ncols();
        if d > basis.nrows() {
            return Err(Error::InvalidInput("more basis vectors than the ambient dimension".into()));
        }
        let gram = basis.transpose() * &basis;
        if (gram - DMatrix::identity(d, d)).amax() > 1e-10 {
            return Err(Error::InvalidInput("basis columns are not orthonormal".into()));
        }
        Ok(Self { basis })
    }

    pub(crate) fn from_orthonormal_unchecked(basis: DMatrix<f64>) -> Self {
        Self { basis }
    }

    /// Range of an arbitrary matrix.
    pub fn span(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Self {
        let thr = tol.threshold(numerics::spectral_norm(m));
        Self {
            basis: numerics::range_thr(m, thr),
        }
    }

    pub fn full(n: usize) -> Self {
        Self {
            basis: DMatrix::identity(n, n),
        }
    }

    pub fn zero(n: usize) -> Self {
        Self {
            basis: DMatrix::zeros(n, 0),
        }
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn ambient(&self) -> usize {
        self.basis.nrows()
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn contains(&self, x: &DVector<f64>, tol: &ToleranceConfig) -> bool {
        let r = x - &self.basis * (self.basis.transpose() * x);
        r.norm() <= tol.threshold(x.norm())
    }

    /// Orthogonal complement in the ambient space.
    pub fn complement(&self) -> Self {
        let n = self.ambient();
        if self.dim() == 0 {
            return Self::full(n);
        }
        Self {
            basis: numerics::nullspace_thr(&self.basis.transpose(), 0.5),
        }
    }
}

/// Relation tested by [`compare_on`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompareMode {
    Eq,
    Geq,
    Gt,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub holds: bool,
    /// `‖(M−N)B‖` for `Eq`, smallest restricted eigenvalue otherwise.
    pub value: f64,
    pub bound: f64,
    /// Violating vector in the ambient space when `holds` is false.
    pub witness: Option<DVector<f64>>,
}

/// Threshold for rank decisions on stacked orthonormal data.
pub(crate) fn subspace_threshold(tol: &ToleranceConfig) -> f64 {
    tol.threshold(std::f64::consts::SQRT_2)
}

/// Decides `M =_L N`, `M >=_L N` or `M >_L N`.
pub fn compare_on(
    m: &DMatrix<f64>,
    n: &DMatrix<f64>,
    l: &Subspace,
    mode: CompareMode,
    tol: &ToleranceConfig,
) -> Result<Comparison> {
    let dim = l.ambient();
    if m.shape() != (dim, dim) || n.shape() != (dim, dim) {
        return Err(Error::InvalidInput(format!(
            "matrices must be {dim}x{dim} to compare on the subspace"
        )));
    }
    numerics::check_finite(m, "M")?;
    numerics::check_finite(n, "N")?;
    let nm = numerics::spectral_norm(m);
    let nn = numerics::spectral_norm(n);
    let b = l.basis();
    let diff = m - n;
    match mode {
        CompareMode::Eq => {
            let bound = tol.atol.max(tol.rtol * (nm + nn));
            if l.dim() == 0 {
                return Ok(Comparison { holds: true, value: 0.0, bound, witness: None });
            }
            let img = &diff * b;
            let svd = numerics::svd_sorted(&img);
            let value = svd.s.first().copied().unwrap_or(0.0);
            let holds = value <= bound;
            let witness = (!holds).then(|| b * svd.v.column(0));
            Ok(Comparison { holds, value, bound, witness })
        }
        CompareMode::Geq | CompareMode::Gt => {
            for (mat, name) in [(m, "M"), (n, "N")] {
                let asym = (mat - mat.transpose()).norm();
                if asym > tol.threshold(mat.norm()) {
                    return Err(Error::InvalidInput(format!(
                        "{name} is not symmetric (defect {asym:.3e})"
                    )));
                }
            }
            let bound = if mode == CompareMode::Geq {
                -tol.atol
            } else {
                tol.atol * (1.0 + nm + nn)
            };
            if l.dim() == 0 {
                return Ok(Comparison { holds: true, value: f64::INFINITY, bound, witness: None });
            }
            let g = b.transpose() * &diff * b;
            let (value, v) = numerics::sym_min_eig(&g).expect("nonempty");
            let holds = value >= bound;
            let witness = (!holds).then(|| b * v);
            Ok(Comparison { holds, value, bound, witness })
        }
    }
}

/// Orthonormal basis of `L1 ∩ L2`.
pub fn intersect(l1: &Subspace, l2: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
    if l1.ambient() != l2.ambient() {
        return Err(Error::InvalidInput("subspaces live in different ambient spaces".into()));
    }
    Ok(Subspace::from_orthonormal_unchecked(intersect_bases(
        l1.basis(),
        l2.basis(),
        subspace_threshold(tol),
    )))
}

/// Intersection of two orthonormal bases through the stacked complement projectors.
pub(crate) fn intersect_bases(a: &DMatrix<f64>, b: &DMatrix<f64>, thr: f64) -> DMatrix<f64> {
    let n = a.nrows();
    if a.ncols() == 0 || b.ncols() == 0 {
        return DMatrix::zeros(n, 0);
    }
    let id = DMatrix::<f64>::identity(n, n);
    let pa = &id - a * a.transpose();
    let pb = &id - b * b.transpose();
    let mut stacked = DMatrix::zeros(2 * n, n);
    stacked.rows_mut(0, n).copy_from(&pa);
    stacked.rows_mut(n, n).copy_from(&pb);
    let svd = numerics::svd_sorted(&stacked);
    let k = svd.s.iter().filter(|&&s| s <= thr).count().min(a.ncols()).min(b.ncols());
    numerics::normalize_signs(svd.v.columns(n - k, k).into_owned())
}

/// Orthonormal basis of `L1 + L2`.
pub fn sum(l1: &Subspace, l2: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
    if l1.ambient() != l2.ambient() {
        return Err(Error::InvalidInput("subspaces live in different ambient spaces".into()));
    }
    let mut m = DMatrix::zeros(l1.ambient(), l1.dim() + l2.dim());
    m.columns_mut(0, l1.dim()).copy_from(l1.basis());
    m.columns_mut(l1.dim(), l2.dim()).copy_from(l2.basis());
    Ok(Subspace::from_orthonormal_unchecked(numerics::range_thr(
        &m,
        subspace_threshold(tol),
    )))
}

/// Orthonormal basis of `M L`.
pub fn image(m: &DMatrix<f64>, l: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
    if m.ncols() != l.ambient() {
        return Err(Error::InvalidInput("matrix and subspace dimensions differ".into()));
    }
    numerics::check_finite(m, "M")?;
    let img = m * l.basis();
    let thr = tol.threshold(numerics::spectral_norm(m));
    Ok(Subspace::from_orthonormal_unchecked(numerics::range_thr(&img, thr)))
}

/// Preimage `{x : M x ∈ L}`.
pub fn preimage(m: &DMatrix<f64>, l: &Subspace, tol: &ToleranceConfig) -> Result<Subspace> {
    if m.nrows() != l.ambient() {
        return Err(Error::InvalidInput("matrix and subspace dimensions differ".into()));
    }
    let n = m.nrows();
    let proj = DMatrix::<f64>::identity(n, n) - l.basis() * l.basis().transpose();
    let thr = tol.threshold(numerics::spectral_norm(m));
    Ok(Subspace::from_orthonormal_unchecked(numerics::nullspace_thr(&(proj * m), thr)))
}

/// Orthogonal projector `B Bᵀ`.
pub fn projector_of(l: &Subspace) -> DMatrix<f64> {
    l.basis() * l.basis().transpose()
}

/// Sine of the largest principal angle; 1 when the dimensions differ.
pub fn angle_defect(l1: &Subspace, l2: &Subspace) -> f64 {
    if l1.dim() != l2.dim() || l1.ambient() != l2.ambient() {
        return 1.0;
    }
    if l1.dim() == 0 {
        return 0.0;
    }
    let r = l1.basis() - projector_of(l2) * l1.basis();
    numerics::spectral_norm(&r).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(n, 1);
        m[(i, 0)] = 1.0;
        m
    }

    #[test]
    fn compare_examples() {
        let tol = ToleranceConfig::default();
        let m = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]));
        let z = DMatrix::zeros(2, 2);
        let l = Subspace::from_orthonormal(e(2, 0)).unwrap();
        assert!(compare_on(&m, &z, &l, CompareMode::Gt, &tol).unwrap().holds);
        let r = compare_on(&m, &z, &Subspace::full(2), CompareMode::Geq, &tol).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert!(w[0].abs() < 1e-12 && (w[1].abs() - 1.0).abs() < 1e-12);
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert!(compare_on(&a, &a, &Subspace::full(2), CompareMode::Eq, &tol).unwrap().holds);
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0]));
        let qte = q.transpose() * DMatrix::<f64>::identity(2, 2);
        assert!(compare_on(&qte, &z, &Subspace::full(2), CompareMode::Geq, &tol).unwrap().holds);
        assert!(matches!(
            compare_on(&a, &z, &l, CompareMode::Geq, &tol),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn intersect_and_image() {
        let tol = ToleranceConfig::default();
        let l1 = Subspace::from_orthonormal(e(2, 0)).unwrap();
        let l2 = Subspace::full(2);
        let i = intersect(&l1, &l2, &tol).unwrap();
        assert_eq!(i.dim(), 1);
        assert!(angle_defect(&i, &l1) < 1e-12);
        let l3 = Subspace::from_orthonormal(e(2, 1)).unwrap();
        assert_eq!(intersect(&l1, &l3, &tol).unwrap().dim(), 0);
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 0.0]));
        let im = image(&d, &l2, &tol).unwrap();
        assert!(angle_defect(&im, &l1) < 1e-12);
        assert_eq!(image(&DMatrix::zeros(2, 2), &l2, &tol).unwrap().dim(), 0);
    }

    #[test]
    fn projector_examples() {
        assert_eq!(projector_of(&Subspace::full(3)), DMatrix::identity(3, 3));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let l = Subspace::from_orthonormal(DMatrix::from_column_slice(2, 1, &[h, h])).unwrap();
        let p = projector_of(&l);
        assert!((p - DMatrix::from_element(2, 2, 0.5)).amax() < 1e-15);
    }
}
