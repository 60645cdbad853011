//! Lagrangian and dissipative subspaces, their composition into a pencil
//! and geometric regularity/stability tests.

use std::collections::BTreeMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{self, ToleranceConfig};
use crate::pencil::{self, MatrixPencil};
use crate::stability::{self, StabilityClass};
use crate::stabilize::PhDescriptor;
use crate::subspace::{self, Subspace};

/// `ran [L1; L2]` with `L1ᵀL2` symmetric.
#[derive(Debug, Clone)]
pub struct LagrangianStructure {
    pub l1: DMatrix<f64>,
    pub l2: DMatrix<f64>,
    pub normalized: bool,
    pub nonnegative: bool,
}

/// `ran [D1; D2]` with `D2ᵀD1 + D1ᵀD2 ≤ 0`.
#[derive(Debug, Clone)]
pub struct DissipativeStructure {
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub normalized: bool,
}

fn pair_shapes(a: &DMatrix<f64>, b: &DMatrix<f64>, what: &str) -> Result<()> {
    if !a.is_square() || a.shape() != b.shape() {
        return Err(Error::InvalidInput(format!("{what} blocks must be square and of equal size")));
    }
    numerics::check_finite(a, what)?;
    numerics::check_finite(b, what)
}

impl LagrangianStructure {
    pub fn new(l1: DMatrix<f64>, l2: DMatrix<f64>) -> Result<Self> {
        pair_shapes(&l1, &l2, "L")?;
        Ok(Self { l1, l2, normalized: false, nonnegative: false })
    }

    pub fn n(&self) -> usize {
        self.l1.nrows()
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        numerics::vstack(&[&self.l1, &self.l2])
    }
}

impl DissipativeStructure {
    pub fn new(d1: DMatrix<f64>, d2: DMatrix<f64>) -> Result<Self> {
        pair_shapes(&d1, &d2, "D")?;
        Ok(Self { d1, d2, normalized: false })
    }

    /// Graph `{(x, Mx)}`.
    pub fn graph(m: DMatrix<f64>) -> Result<Self> {
        let n = m.nrows();
        Self::new(DMatrix::identity(n, n), m)
    }

    pub fn n(&self) -> usize {
        self.d1.nrows()
    }

    pub fn stacked(&self) -> DMatrix<f64> {
        numerics::vstack(&[&self.d1, &self.d2])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport {
    pub lagrangian_symmetry_defect: f64,
    pub lagrangian_rank: usize,
    pub is_lagrangian: bool,
    /// Negative part of `sym(L1ᵀL2)`.
    pub nonnegativity_defect: f64,
    pub nonnegative: bool,
    /// Largest eigenvalue of `D2ᵀD1 + D1ᵀD2`.
    pub dissipativity_max_eig: f64,
    pub dissipative_rank: usize,
    pub is_dissipative: bool,
    /// `D2ᵀD1 + D1ᵀD2 = 0`.
    pub is_dirac: bool,
}

fn stacked_rank(m: &DMatrix<f64>, tol: &ToleranceConfig) -> usize {
    numerics::rank_thr(m, tol.threshold(numerics::spectral_norm(m)))
}

pub fn validate_structures(
    l: &LagrangianStructure,
    d: &DissipativeStructure,
    tol: &ToleranceConfig,
) -> Result<StructureReport> {
    if l.n() != d.n() {
        return Err(Error::InvalidInput("L and D act on different dimensions".into()));
    }
    let n = l.n();
    let nrm = numerics::spectral_norm;
    let ltl = l.l1.transpose() * &l.l2;
    let lagrangian_symmetry_defect = nrm(&(&ltl - ltl.transpose()));
    let ls = l.stacked();
    let lagrangian_rank = stacked_rank(&ls, tol);
    let lscale = nrm(&ls).powi(2);
    let is_lagrangian = lagrangian_symmetry_defect <= tol.threshold(lscale) && lagrangian_rank == n;
    let nonnegativity_defect = numerics::psd_defect(&numerics::sym_part(&ltl));
    let nonnegative = is_lagrangian && nonnegativity_defect <= tol.threshold(lscale);
    let dtd = d.d2.transpose() * &d.d1;
    let form = &dtd + dtd.transpose();
    let dissipativity_max_eig = numerics::sym_max_eig(&form).unwrap_or(0.0);
    let ds = d.stacked();
    let dissipative_rank = stacked_rank(&ds, tol);
    let dscale = tol.threshold(nrm(&ds).powi(2));
    let is_dissipative = dissipativity_max_eig <= dscale && dissipative_rank == n;
    let is_dirac = is_dissipative && nrm(&form) <= dscale;
    Ok(StructureReport {
        lagrangian_symmetry_defect,
        lagrangian_rank,
        is_lagrangian,
        nonnegativity_defect,
        nonnegative,
        dissipativity_max_eig,
        dissipative_rank,
        is_dissipative,
        is_dirac,
    })
}

fn well_conditioned(m: &DMatrix<f64>) -> bool {
    numerics::condition_number(m) < 1e8
}

fn orthonormal_halves(stacked: &DMatrix<f64>, n: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let u = numerics::leading_range(stacked, n);
    (u.rows(0, n).into_owned(), u.rows(n, n).into_owned())
}

/// Representation with `L2 = L2ᵀ` (and `L1 ≥ 0`, `L1ᵀL2 ≥ 0` when nonnegative)
/// and `D2 + D2ᵀ ≤ 0`. The subspaces are unchanged.
pub fn normalize_structures(
    l: &LagrangianStructure,
    d: &DissipativeStructure,
    tol: &ToleranceConfig,
) -> Result<(LagrangianStructure, DissipativeStructure)> {
    let rep = validate_structures(l, d, tol)?;
    if !rep.is_lagrangian {
        return Err(Error::InvalidInput("L is not Lagrangian".into()));
    }
    if !rep.is_dissipative {
        return Err(Error::NotDissipative(rep.dissipativity_max_eig));
    }
    let n = l.n();
    let (l1, l2) = if well_conditioned(&l.l1) {
        let inv = l.l1.clone().try_inverse().ok_or_else(|| Error::IllConditioned("L1 is singular".into()))?;
        (DMatrix::identity(n, n), numerics::sym_part(&(&l.l2 * inv)))
    } else {
        let (u1, u2) = orthonormal_halves(&l.stacked(), n);
        let mut best: Option<(f64, DMatrix<f64>)> = None;
        let thetas: Vec<f64> = if rep.nonnegative {
            vec![std::f64::consts::FRAC_PI_4]
        } else {
            (0..16).map(|i| i as f64 * std::f64::consts::PI / 16.0).collect()
        };
        for th in thetas {
            let k = (&u1 * th.cos() + &u2 * th.sin()).transpose();
            let c = numerics::condition_number(&k);
            if best.as_ref().is_none_or(|(bc, _)| c < *bc) {
                best = Some((c, k));
            }
        }
        let (c, k) = best.expect("nonempty grid");
        if !(c < 1e8) {
            return Err(Error::IllConditioned(format!("Lagrangian normalization factor has condition {c:.3e}")));
        }
        (numerics::sym_part(&(&u1 * &k)), numerics::sym_part(&(&u2 * &k)))
    };
    let (d1, d2) = if well_conditioned(&d.d1) {
        let inv = d.d1.clone().try_inverse().ok_or_else(|| Error::IllConditioned("D1 is singular".into()))?;
        (DMatrix::identity(n, n), &d.d2 * inv)
    } else {
        let (u1, u2) = orthonormal_halves(&d.stacked(), n);
        let k = numerics::inverse_checked(&(&u1 - &u2), "Cayley factor", tol)?;
        (&u1 * &k, &u2 * &k)
    };
    let ln = LagrangianStructure { l1, l2, normalized: true, nonnegative: rep.nonnegative };
    let dn = DissipativeStructure { d1, d2, normalized: true };
    for (a, b, what) in [(l.stacked(), ln.stacked(), "L"), (d.stacked(), dn.stacked(), "D")] {
        let sa = Subspace::from_orthonormal_unchecked(numerics::leading_range(&a, n));
        let sb = Subspace::from_orthonormal_unchecked(numerics::leading_range(&b, n));
        let def = subspace::angle_defect(&sa, &sb);
        if def > 1e-8 {
            return Err(Error::IllConditioned(format!("normalizing {what} moved the subspace by {def:.3e}")));
        }
    }
    Ok((ln, dn))
}

/// Pencil `[E, A]` with `ran [E; A] = 𝒟𝓛`.
pub fn compose_dl(d: &DissipativeStructure, l: &LagrangianStructure, tol: &ToleranceConfig) -> Result<MatrixPencil> {
    let n = l.n();
    if d.n() != n {
        return Err(Error::InvalidInput("L and D act on different dimensions".into()));
    }
    let coupling = numerics::hstack(&[&l.l2, &(-&d.d1)]);
    let kern = numerics::nullspace_thr(&coupling, tol.threshold(numerics::spectral_norm(&coupling)));
    let u = kern.rows(0, n).into_owned();
    let v = kern.rows(n, n).into_owned();
    let img = numerics::vstack(&[&(&l.l1 * u), &(&d.d2 * v)]);
    let basis = numerics::range_thr(&img, tol.threshold(numerics::spectral_norm(&img)));
    if basis.ncols() != n {
        return Err(Error::CompositionDefect { dim: basis.ncols(), expected: n });
    }
    MatrixPencil::new(basis.rows(0, n).into_owned(), basis.rows(n, n).into_owned())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeoStable {
    Yes,
    Inconclusive,
}

impl GeoStable {
    pub fn as_str(&self) -> &'static str {
        match self {
            GeoStable::Yes => "yes",
            GeoStable::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeometricReport {
    pub regular: bool,
    pub stable: GeoStable,
    /// `kernel_on_x`, `images_of_kernels`, `l1_ker_l2_trivial`.
    pub conditions: BTreeMap<String, bool>,
    /// Eigenvalue classification of the composed pencil when inconclusive.
    pub fallback: Option<StabilityClass>,
}

fn span(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Subspace {
    Subspace::span(m, tol)
}

fn kernel(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Subspace {
    Subspace::from_orthonormal_unchecked(numerics::nullspace_thr(m, tol.threshold(numerics::spectral_norm(m))))
}

/// Regularity test and sufficient stability test on the structures.
pub fn geometric_stability_check(
    d: &DissipativeStructure,
    l: &LagrangianStructure,
    tol: &ToleranceConfig,
) -> Result<GeometricReport> {
    let rep = validate_structures(l, d, tol)?;
    if !rep.nonnegative {
        return Err(Error::NotNonnegative(format!("sym(L1ᵀL2) has a negative eigenvalue of size {:.3e}", rep.nonnegativity_defect)));
    }
    let (l, d) = normalize_structures(l, d, tol)?;
    let x = subspace::intersect(&span(&d.d1, tol), &span(&l.l2, tol), tol)?;
    let bx = x.basis();
    let kernel_on_x = if x.dim() == 0 {
        true
    } else {
        let st = numerics::vstack(&[&(bx.transpose() * &l.l1 * bx), &(bx.transpose() * &d.d2 * bx)]);
        kernel(&st, tol).dim() == 0
    };
    let l1_ker_l2 = subspace::image(&l.l1, &kernel(&l.l2, tol), tol)?;
    let d2_ker_d1 = subspace::image(&d.d2, &kernel(&d.d1, tol), tol)?;
    let images_of_kernels = subspace::intersect(&d2_ker_d1, &l1_ker_l2, tol)?.dim() == 0;
    let l1_ker_l2_trivial = l1_ker_l2.dim() == 0;
    let regular = kernel_on_x && images_of_kernels;
    let mut conditions = BTreeMap::new();
    conditions.insert("kernel_on_x".to_string(), kernel_on_x);
    conditions.insert("images_of_kernels".to_string(), images_of_kernels);
    conditions.insert("l1_ker_l2_trivial".to_string(), l1_ker_l2_trivial);
    if regular && l1_ker_l2_trivial {
        return Ok(GeometricReport { regular, stable: GeoStable::Yes, conditions, fallback: None });
    }
    let fallback = match compose_dl(&d, &l, tol) {
        Ok(p) => Some(stability::check_stability(&p, tol)?.classification),
        Err(Error::CompositionDefect { .. }) => Some(StabilityClass::Singular),
        Err(e) => return Err(e),
    };
    Ok(GeometricReport { regular, stable: GeoStable::Inconclusive, conditions, fallback })
}

/// `D = gr(J − R)`, `L = ran [E; Q]`.
pub fn from_dh(
    e: &DMatrix<f64>,
    j: &DMatrix<f64>,
    r: &DMatrix<f64>,
    q: &DMatrix<f64>,
    tol: &ToleranceConfig,
) -> Result<(DissipativeStructure, LagrangianStructure)> {
    let n = e.nrows();
    for (m, name) in [(e, "E"), (j, "J"), (r, "R"), (q, "Q")] {
        if m.shape() != (n, n) {
            return Err(Error::InvalidInput(format!("{name} must be {n}x{n}")));
        }
    }
    let dim = stacked_rank(&numerics::vstack(&[e, q]), tol);
    if dim < n {
        return Err(Error::DegenerateLagrangian { dim, expected: n });
    }
    Ok((DissipativeStructure::graph(j - r)?, LagrangianStructure::new(e.clone(), q.clone())?))
}

/// Interconnection matrix `[[J−R, B−P], [−(B+P)ᵀ, −(Sff−Nff)]]`.
pub fn ph_interconnection(ph: &PhDescriptor) -> DMatrix<f64> {
    numerics::vstack(&[
        &numerics::hstack(&[&(&ph.j - &ph.r), &(&ph.b - &ph.p)]),
        &numerics::hstack(&[&(-(&ph.b + &ph.p).transpose()), &(-(&ph.sff - &ph.nff))]),
    ])
}

/// Structures on `ℝ^{n+k}` for a port-Hamiltonian descriptor system.
pub fn embed_ph(ph: &PhDescriptor, tol: &ToleranceConfig) -> Result<(DissipativeStructure, LagrangianStructure)> {
    let k = ph.b.ncols();
    let m = ph_interconnection(ph);
    let sum = &m + m.transpose();
    let defect = numerics::psd_defect(&(-&sum));
    if defect > tol.threshold(numerics::spectral_norm(&m)) {
        return Err(Error::NotDissipative(defect));
    }
    let ik = DMatrix::identity(k, k);
    let l = LagrangianStructure::new(
        numerics::block_diag(&[&ph.e, &ik]),
        numerics::block_diag(&[&ph.q, &ik]),
    )?;
    Ok((DissipativeStructure::graph(m)?, l))
}

/// `[blkdiag(E, I), M blkdiag(Q, I)]`.
pub fn ph_pencil(ph: &PhDescriptor) -> Result<MatrixPencil> {
    let k = ph.b.ncols();
    let ik = DMatrix::identity(k, k);
    MatrixPencil::new(
        numerics::block_diag(&[&ph.e, &ik]),
        ph_interconnection(ph) * numerics::block_diag(&[&ph.q, &ik]),
    )
}

/// Whether `ran [E1; A1] = ran [E2; A2]` up to `limit` in principal angle.
pub fn same_graph(p1: &MatrixPencil, p2: &MatrixPencil, tol: &ToleranceConfig) -> f64 {
    let a = span(&numerics::vstack(&[p1.e(), p1.a()]), tol);
    let b = span(&numerics::vstack(&[p2.e(), p2.a()]), tol);
    subspace::angle_defect(&a, &b)
}

/// Regularity of the composed pencil, for cross-checks.
pub fn composed_is_regular(d: &DissipativeStructure, l: &LagrangianStructure, tol: &ToleranceConfig) -> Result<bool> {
    match compose_dl(d, l, tol) {
        Ok(p) => pencil::is_regular(&p, tol),
        Err(Error::CompositionDefect { .. }) => Ok(false),
        Err(e) => Err(e),
    }
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
    fn validation_examples() {
        let t = tol();
        let i2 = DMatrix::<f64>::identity(2, 2);
        let q = m(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let l = LagrangianStructure::new(i2.clone(), q).unwrap();
        let jr = m(2, 2, &[-1.0, 1.0, -1.0, 0.0]);
        let d = DissipativeStructure::graph(jr).unwrap();
        let r = validate_structures(&l, &d, &t).unwrap();
        assert!(r.is_lagrangian && r.nonnegative && r.is_dissipative && !r.is_dirac);
        let bad = LagrangianStructure::new(i2.clone(), m(2, 2, &[0.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(!validate_structures(&bad, &d, &t).unwrap().is_lagrangian);
    }

    #[test]
    fn normalization_examples() {
        let t = tol();
        let i2 = DMatrix::<f64>::identity(2, 2);
        let q = m(2, 2, &[2.0, 1.0, 1.0, 1.0]);
        let l = LagrangianStructure::new(&i2 * 2.0, &q * 2.0).unwrap();
        let d = DissipativeStructure::graph(-&i2).unwrap();
        let (ln, _) = normalize_structures(&l, &d, &t).unwrap();
        assert!((&ln.l1 - &i2).amax() < 1e-12 && (&ln.l2 - &q).amax() < 1e-12);
        let l = LagrangianStructure::new(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        let d = DissipativeStructure::new(m(2, 2, &[0.0, 0.0, 0.0, 1.0]), m(2, 2, &[-1.0, 0.0, 0.0, 0.0])).unwrap();
        let (ln, dn) = normalize_structures(&l, &d, &t).unwrap();
        assert!(numerics::psd_defect(&ln.l1) < 1e-12);
        assert!((&ln.l2 - ln.l2.transpose()).amax() < 1e-12);
        assert!(numerics::psd_defect(&(-(&dn.d2 + dn.d2.transpose()))) < 1e-12);
    }

    #[test]
    fn composition_examples() {
        let t = tol();
        let one = |v: f64| m(1, 1, &[v]);
        let p = compose_dl(
            &DissipativeStructure::graph(one(-1.0)).unwrap(),
            &LagrangianStructure::new(one(1.0), one(1.0)).unwrap(),
            &t,
        )
        .unwrap();
        assert!((p.a()[(0, 0)] / p.e()[(0, 0)] + 1.0).abs() < 1e-12);

        let i2 = DMatrix::<f64>::identity(2, 2);
        let j = m(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let q = m(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        let (d, l) = from_dh(&i2, &j, &DMatrix::zeros(2, 2), &q, &t).unwrap();
        let p = compose_dl(&d, &l, &t).unwrap();
        let expect = MatrixPencil::new(i2.clone(), m(2, 2, &[0.0, -1.0, 0.0, 0.0])).unwrap();
        assert!(same_graph(&p, &expect, &t) < 1e-10);
        let g = geometric_stability_check(&d, &l, &t).unwrap();
        assert!(g.regular && g.stable == GeoStable::Inconclusive);
        assert_eq!(g.fallback, Some(StabilityClass::Unstable));

        let l = LagrangianStructure::new(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[0.0, 0.0, 0.0, 1.0])).unwrap();
        let d = DissipativeStructure::graph(-&i2).unwrap();
        let p = compose_dl(&d, &l, &t).unwrap();
        let expect = MatrixPencil::new(m(2, 2, &[1.0, 0.0, 0.0, 0.0]), m(2, 2, &[0.0, 0.0, 0.0, -1.0])).unwrap();
        assert!(same_graph(&p, &expect, &t) < 1e-10);
        let g = geometric_stability_check(&d, &l, &t).unwrap();
        assert!(g.regular && g.stable == GeoStable::Inconclusive);
        assert_eq!(g.fallback, Some(StabilityClass::Stable));

        let (d, l) = from_dh(&i2, &DMatrix::zeros(2, 2), &i2, &i2, &t).unwrap();
        let g = geometric_stability_check(&d, &l, &t).unwrap();
        assert!(g.regular && g.stable == GeoStable::Yes);
        let degenerate = from_dh(&m(2, 2, &[1.0, 0.0, 0.0, 0.0]), &i2, &i2, &m(2, 2, &[1.0, 0.0, 0.0, 0.0]), &t);
        assert!(matches!(degenerate, Err(Error::DegenerateLagrangian { dim: 1, expected: 2 })));
    }
}
