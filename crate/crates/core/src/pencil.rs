//! Matrix pencils `sE − A`, their quasi-Kronecker form, spectrum, index and
//! system space.
//!
//! The canonical form is computed from the Wong sequences
//! `V_{i+1} = A⁻¹(E V_i)` and `W_{i+1} = E⁻¹(A W_i)`. Their limits split the
//! pencil into an underdetermined part, a regular part and an overdetermined
//! part; generalized Sylvester solves remove the remaining coupling, the
//! regular part is brought into Weierstrass form and the singular parts into
//! chains read off a minimal polynomial kernel basis.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numerics::{
    self, block_diag, complement_within, hstack, inverse_checked, nullspace_thr, range_thr,
    spectral_norm, Complex64, ToleranceConfig,
};
use crate::subspace::{intersect_bases, subspace_threshold, Subspace};

/// The pair `(E, A)` of a square pencil `sE − A`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixPencil {
    e: DMatrix<f64>,
    a: DMatrix<f64>,
}

impl MatrixPencil {
    pub fn new(e: DMatrix<f64>, a: DMatrix<f64>) -> Result<Self> {
        numerics::check_square(&e, "E")?;
        numerics::check_finite(&e, "E")?;
        numerics::check_finite(&a, "A")?;
        if e.shape() != a.shape() {
            return Err(Error::InvalidInput(format!(
                "E is {}x{} but A is {}x{}",
                e.nrows(),
                e.ncols(),
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { e, a })
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn n(&self) -> usize {
        self.e.nrows()
    }

    /// The equivalent pencil `(S E T, S A T)`.
    pub fn transformed(&self, s: &DMatrix<f64>, t: &DMatrix<f64>) -> Result<Self> {
        Self::new(s * &self.e * t, s * &self.a * t)
    }

    pub(crate) fn scale(&self) -> f64 {
        spectral_norm(&self.e).max(spectral_norm(&self.a))
    }
}

/// A descriptor system `d/dt E x = A x + B u`.
#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorSystem {
    pencil: MatrixPencil,
    b: DMatrix<f64>,
}

impl DescriptorSystem {
    pub fn new(e: DMatrix<f64>, a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        let pencil = MatrixPencil::new(e, a)?;
        numerics::check_finite(&b, "B")?;
        if b.nrows() != pencil.n() || b.ncols() == 0 {
            return Err(Error::InvalidInput(format!(
                "B must be {}xk with k >= 1, got {}x{}",
                pencil.n(),
                b.nrows(),
                b.ncols()
            )));
        }
        Ok(Self { pencil, b })
    }

    pub fn pencil(&self) -> &MatrixPencil {
        &self.pencil
    }

    pub fn e(&self) -> &DMatrix<f64> {
        self.pencil.e()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        self.pencil.a()
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.pencil.n()
    }

    pub fn k(&self) -> usize {
        self.b.ncols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `sI − A0`
    Finite,
    /// `sN − I` with `N` a nilpotent Jordan block
    Nilpotent,
    /// `sK − L`, one row fewer than columns
    Beta,
    /// `sKᵀ − Lᵀ`, one column fewer than rows
    Gamma,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockEntry {
    pub kind: BlockKind,
    pub rows: Range<usize>,
    pub cols: Range<usize>,
}

/// `S (sE − A) T` in block diagonal form, blocks ordered finite, nilpotent,
/// beta, gamma.
#[derive(Debug, Clone)]
pub struct QuasiKroneckerForm {
    pub s: DMatrix<f64>,
    pub t: DMatrix<f64>,
    pub n0: usize,
    pub a0: DMatrix<f64>,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
    pub block_layout: Vec<BlockEntry>,
    /// `max(‖SET − Ê‖, ‖SAT − Â‖)` against the exact block templates.
    pub residual: f64,
    pub residual_bound: f64,
    pub cond_s: f64,
    pub cond_t: f64,
    /// Rank decisions that were close to the threshold, and similar notes.
    pub warnings: Vec<String>,
}

impl QuasiKroneckerForm {
    pub fn is_regular(&self) -> bool {
        self.beta.is_empty() && self.gamma.is_empty()
    }

    pub fn index(&self) -> usize {
        self.alpha.iter().copied().max().unwrap_or(0)
    }

    pub fn alpha_size(&self) -> usize {
        self.alpha.iter().sum()
    }

    /// Exact `E` template of the form.
    pub fn e_template(&self) -> DMatrix<f64> {
        self.template(true)
    }

    /// Exact `A` template of the form (with the computed `A0`).
    pub fn a_template(&self) -> DMatrix<f64> {
        self.template(false)
    }

    fn template(&self, want_e: bool) -> DMatrix<f64> {
        let n = self.s.nrows();
        let mut m = DMatrix::zeros(n, n);
        for b in &self.block_layout {
            let (r0, c0) = (b.rows.start, b.cols.start);
            let (nr, nc) = (b.rows.len(), b.cols.len());
            match (b.kind, want_e) {
                (BlockKind::Finite, true) => m.view_mut((r0, c0), (nr, nc)).fill_with_identity(),
                (BlockKind::Finite, false) => m.view_mut((r0, c0), (nr, nc)).copy_from(&self.a0),
                (BlockKind::Nilpotent, true) => {
                    for i in 0..nr.saturating_sub(1) {
                        m[(r0 + i, c0 + i + 1)] = 1.0;
                    }
                }
                (BlockKind::Nilpotent, false) => m.view_mut((r0, c0), (nr, nc)).fill_with_identity(),
                (BlockKind::Beta, e) => {
                    for i in 0..nr {
                        m[(r0 + i, c0 + i + usize::from(!e))] = 1.0;
                    }
                }
                (BlockKind::Gamma, e) => {
                    for j in 0..nc {
                        m[(r0 + j + usize::from(!e), c0 + j)] = 1.0;
                    }
                }
            }
        }
        m
    }

    /// Columns of `T` spanning the finite and beta coordinates.
    pub(crate) fn system_space_generators(&self) -> DMatrix<f64> {
        let n_alpha = self.alpha_size();
        let n_beta: usize = self.beta.iter().sum();
        let fin = self.t.columns(0, self.n0).into_owned();
        let beta = self.t.columns(self.n0 + n_alpha, n_beta).into_owned();
        hstack(&[&fin, &beta])
    }
}

fn kernel_checked(m: &DMatrix<f64>, thr: f64, warnings: &mut Vec<String>, what: &str) -> DMatrix<f64> {
    if m.nrows() > 0 && m.ncols() > 0 {
        let s = numerics::svd_sorted(m).s;
        if let Some(v) = s.iter().find(|&&v| v > thr / 10.0 && v <= thr * 10.0) {
            warnings.push(format!(
                "{what}: singular value {v:.3e} within a factor 10 of the threshold {thr:.3e}"
            ));
        }
    }
    nullspace_thr(m, thr)
}

fn wong_v(e: &DMatrix<f64>, a: &DMatrix<f64>, thr: f64, warnings: &mut Vec<String>) -> DMatrix<f64> {
    let n = e.ncols();
    let rows = e.nrows();
    let mut v = DMatrix::identity(n, n);
    loop {
        let u = range_thr(&(e * &v), thr);
        let proj = DMatrix::identity(rows, rows) - &u * u.transpose();
        let next = kernel_checked(&(proj * a), thr, warnings, "Wong sequence V");
        if next.ncols() >= v.ncols() {
            return next;
        }
        v = next;
    }
}

fn wong_w(e: &DMatrix<f64>, a: &DMatrix<f64>, thr: f64, warnings: &mut Vec<String>) -> DMatrix<f64> {
    let n = e.ncols();
    let rows = e.nrows();
    let mut w = DMatrix::zeros(n, 0);
    loop {
        let u = range_thr(&(a * &w), thr);
        let proj = DMatrix::identity(rows, rows) - &u * u.transpose();
        let next = kernel_checked(&(proj * e), thr, warnings, "Wong sequence W");
        if next.ncols() <= w.ncols() {
            return next;
        }
        w = next;
    }
}

/// Removes the upper coupling of a block triangular pencil split at
/// `(kr, kc)`; returns `(Y, X)` with `[I Y; 0 I] (sE − A) [I X; 0 I]`
/// block diagonal.
fn decouple(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    kr: usize,
    kc: usize,
    thr: f64,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let (nr, nc) = e.shape();
    let (r1, r2, c1, c2) = (kr, nr - kr, kc, nc - kc);
    let mut y = DMatrix::zeros(r1, r2);
    let mut x = DMatrix::zeros(c1, c2);
    let e12 = e.view((0, kc), (r1, c2)).into_owned();
    let a12 = a.view((0, kc), (r1, c2)).into_owned();
    if r1 == 0 || c2 == 0 || (e12.amax() == 0.0 && a12.amax() == 0.0) {
        return Ok((y, x));
    }
    let e11 = e.view((0, 0), (r1, c1));
    let a11 = a.view((0, 0), (r1, c1));
    let e22 = e.view((kr, kc), (r2, c2));
    let a22 = a.view((kr, kc), (r2, c2));
    let nx = c1 * c2;
    let ny = r1 * r2;
    let neq = r1 * c2;
    let mut k = DMatrix::zeros(2 * neq, nx + ny);
    // vec(M11 X) = (I ⊗ M11) vec X,  vec(Y M22) = (M22ᵀ ⊗ I) vec Y
    for (blk, (m11, m22)) in [(e11, e22), (a11, a22)].into_iter().enumerate() {
        let off = blk * neq;
        for j in 0..c2 {
            for i in 0..r1 {
                let row = off + j * r1 + i;
                for l in 0..c1 {
                    k[(row, j * c1 + l)] = m11[(i, l)];
                }
                for l in 0..r2 {
                    k[(row, nx + l * r1 + i)] = m22[(l, j)];
                }
            }
        }
    }
    let mut rhs = DVector::zeros(2 * neq);
    for j in 0..c2 {
        for i in 0..r1 {
            rhs[j * r1 + i] = -e12[(i, j)];
            rhs[neq + j * r1 + i] = -a12[(i, j)];
        }
    }
    let sol = numerics::lstsq(&k, &rhs, thr * 1e-3);
    for j in 0..c2 {
        for l in 0..c1 {
            x[(l, j)] = sol[j * c1 + l];
        }
    }
    for j in 0..r2 {
        for i in 0..r1 {
            y[(i, j)] = sol[nx + j * r1 + i];
        }
    }
    Ok((y, x))
}

/// Minimal polynomial kernel basis of a pencil without finite or infinite
/// eigenvalues and full row rank everywhere. Returns the block sizes, the
/// column transform `T` and `F = S⁻¹`.
fn beta_chains(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    thr: f64,
    warnings: &mut Vec<String>,
) -> Result<(Vec<usize>, DMatrix<f64>, DMatrix<f64>)> {
    let (r, c) = e.shape();
    if c < r {
        return Err(Error::IllConditioned(format!(
            "singular part has {r} rows but only {c} columns"
        )));
    }
    let blocks_needed = c - r;
    let mut found: Vec<Vec<DVector<f64>>> = Vec::new();
    let mut d = 0usize;
    while found.len() < blocks_needed {
        if d > r + 1 {
            return Err(Error::IllConditioned(
                "minimal indices of the singular part could not be resolved".into(),
            ));
        }
        let rows = (d + 2) * r;
        let cols = (d + 1) * c;
        let mut m = DMatrix::zeros(rows, cols);
        for i in 0..=d {
            m.view_mut((i * r, i * c), (r, c)).copy_from(&(-a));
            m.view_mut(((i + 1) * r, i * c), (r, c)).copy_from(e);
        }
        let z = kernel_checked(&m, thr, warnings, "singular-part kernel");
        let mut shifts: Vec<DVector<f64>> = Vec::new();
        for chain in &found {
            let deg = chain.len() - 1;
            for k in 0..=(d - deg) {
                let mut v = DVector::zeros(cols);
                for (i, t) in chain.iter().enumerate() {
                    v.rows_mut((k + i) * c, c).copy_from(t);
                }
                shifts.push(v);
            }
        }
        let new = z.ncols().saturating_sub(shifts.len());
        if new > 0 {
            let pick = if shifts.is_empty() {
                z.columns(0, new).into_owned()
            } else {
                let ys = DMatrix::from_columns(&shifts);
                let yb = numerics::leading_range(&ys, shifts.len());
                let g = yb.transpose() * &z;
                let svd = numerics::svd_sorted(&g);
                let k = z.ncols();
                &z * svd.v.columns(k - new, new)
            };
            for j in 0..new.min(blocks_needed - found.len()) {
                let col = pick.column(j);
                found.push((0..=d).map(|i| col.rows(i * c, c).into_owned()).collect());
            }
        }
        d += 1;
    }
    let betas: Vec<usize> = found.iter().map(|ch| ch.len()).collect();
    let tcols: Vec<DVector<f64>> = found.iter().flatten().cloned().collect();
    let fcols: Vec<DVector<f64>> = found
        .iter()
        .flat_map(|ch| ch[..ch.len() - 1].iter().map(|t| e * t))
        .collect();
    if tcols.len() != c || fcols.len() != r {
        return Err(Error::IllConditioned(
            "singular-part chains do not match the block dimensions".into(),
        ));
    }
    let t = if c > 0 { DMatrix::from_columns(&tcols) } else { DMatrix::zeros(0, 0) };
    let f = if r > 0 { DMatrix::from_columns(&fcols) } else { DMatrix::zeros(0, 0) };
    Ok((betas, t, f))
}

/// Jordan chains of a nilpotent matrix. Returns the block sizes and `C`
/// with `C⁻¹ N C` block diagonal with superdiagonal ones.
fn nilpotent_chains(n: &DMatrix<f64>, thr: f64, sthr: f64) -> Result<(Vec<usize>, DMatrix<f64>)> {
    let m = n.nrows();
    if m == 0 {
        return Ok((Vec::new(), DMatrix::zeros(0, 0)));
    }
    let id = DMatrix::<f64>::identity(m, m);
    let mut ks: Vec<DMatrix<f64>> = vec![DMatrix::zeros(m, 0)];
    loop {
        let prev = ks.last().unwrap();
        let proj = &id - prev * prev.transpose();
        let k = nullspace_thr(&(proj * n), thr);
        if k.ncols() <= prev.ncols() {
            return Err(Error::IllConditioned(
                "infinite-eigenvalue part is not numerically nilpotent".into(),
            ));
        }
        let full = k.ncols() >= m;
        ks.push(k);
        if full {
            break;
        }
    }
    let h = ks.len() - 1;
    let mut chains: Vec<(usize, DVector<f64>)> = Vec::new();
    for j in (1..=h).rev() {
        let existing: Vec<DVector<f64>> = chains
            .iter()
            .map(|(len, t)| {
                let mut v = t.clone();
                for _ in 0..(len - j) {
                    v = n * v;
                }
                v
            })
            .collect();
        let dim_j = ks[j].ncols();
        let dim_prev = ks[j - 1].ncols();
        let count = dim_j.saturating_sub(dim_prev + existing.len());
        if count == 0 {
            continue;
        }
        let mut cols: Vec<DVector<f64>> = ks[j - 1].column_iter().map(|c| c.into_owned()).collect();
        cols.extend(existing);
        let xb = if cols.is_empty() {
            DMatrix::zeros(m, 0)
        } else {
            range_thr(&DMatrix::from_columns(&cols), sthr)
        };
        let tops = if xb.ncols() == 0 {
            ks[j].columns(0, count).into_owned()
        } else {
            let g = xb.transpose() * &ks[j];
            let svd = numerics::svd_sorted(&g);
            &ks[j] * svd.v.columns(dim_j - count, count)
        };
        for t in tops.column_iter() {
            chains.push((j, t.into_owned()));
        }
    }
    let mut sizes = Vec::new();
    let mut cols = Vec::with_capacity(m);
    for (len, t) in &chains {
        sizes.push(*len);
        let mut chain = vec![t.clone()];
        for _ in 1..*len {
            let next = n * chain.last().unwrap();
            chain.push(next);
        }
        chain.reverse();
        cols.extend(chain);
    }
    if cols.len() != m {
        return Err(Error::IllConditioned("Jordan chains of the nilpotent part are incomplete".into()));
    }
    Ok((sizes, DMatrix::from_columns(&cols)))
}

struct RegularSplit {
    s: DMatrix<f64>,
    t: DMatrix<f64>,
    n0: usize,
    a0: DMatrix<f64>,
    alpha: Vec<usize>,
}

/// Weierstrass form of a regular square pencil.
fn weierstrass(
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    thr: f64,
    tol: &ToleranceConfig,
    warnings: &mut Vec<String>,
) -> Result<RegularSplit> {
    let r = e.nrows();
    if r == 0 {
        return Ok(RegularSplit {
            s: DMatrix::zeros(0, 0),
            t: DMatrix::zeros(0, 0),
            n0: 0,
            a0: DMatrix::zeros(0, 0),
            alpha: Vec::new(),
        });
    }
    let v = wong_v(e, a, thr, warnings);
    let w = wong_w(e, a, thr, warnings);
    let n0 = v.ncols();
    if n0 + w.ncols() != r {
        return Err(Error::IllConditioned(format!(
            "regular part of size {r} split into {n0} finite and {} infinite directions",
            w.ncols()
        )));
    }
    let t = hstack(&[&v, &w]);
    let sinv = hstack(&[&(e * &v), &(a * &w)]);
    let s = inverse_checked(&sinv, "Weierstrass row transform", tol)?;
    let a0 = (&s * a * &v).rows(0, n0).into_owned();
    let nmat = (&s * e * &w).rows(n0, r - n0).into_owned();
    let nthr = tol.threshold(spectral_norm(&nmat).max(1.0));
    let (alpha, c) = nilpotent_chains(&nmat, nthr, subspace_threshold(tol))?;
    let cinv = inverse_checked(&c, "Jordan chain basis", tol)?;
    let id0 = DMatrix::identity(n0, n0);
    Ok(RegularSplit {
        s: block_diag(&[&id0, &cinv]) * s,
        t: t * block_diag(&[&id0, &c]),
        n0,
        a0,
        alpha,
    })
}

fn apply_decoupling(
    s: &mut DMatrix<f64>,
    t: &mut DMatrix<f64>,
    e: &DMatrix<f64>,
    a: &DMatrix<f64>,
    kr: usize,
    kc: usize,
    thr: f64,
) -> Result<()> {
    let n = s.nrows();
    let ek = &*s * e * &*t;
    let ak = &*s * a * &*t;
    let (y, x) = decouple(&ek, &ak, kr, kc, thr)?;
    let mut ls = DMatrix::identity(n, n);
    ls.view_mut((0, kr), y.shape()).copy_from(&y);
    let mut rt = DMatrix::identity(n, n);
    rt.view_mut((0, kc), x.shape()).copy_from(&x);
    *s = ls * &*s;
    *t = &*t * rt;
    Ok(())
}

/// Quasi-Kronecker form of a square pencil.
pub fn quasi_kronecker(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<QuasiKroneckerForm> {
    let n = p.n();
    let (e, a) = (p.e(), p.a());
    let scale = p.scale();
    let thr = tol.threshold(scale);
    let sthr = subspace_threshold(tol);
    let mut warnings = Vec::new();

    let v = wong_v(e, a, thr, &mut warnings);
    let w = wong_w(e, a, thr, &mut warnings);
    let id = DMatrix::<f64>::identity(n, n);

    let p1 = intersect_bases(&v, &w, sthr);
    let vw = range_thr(&hstack(&[&v, &w]), sthr);
    let (mut s, mut t, mpr, mpc, r) = if p1.ncols() == 0 && vw.ncols() == n {
        (id.clone(), id.clone(), 0, 0, n)
    } else {
        let r1 = complement_within(&vw, &p1);
        let q1 = complement_within(&id, &vw);
        let ev = range_thr(&(e * &v), thr);
        let aw = range_thr(&(a * &w), thr);
        let p2 = intersect_bases(&ev, &aw, sthr);
        let evaw = range_thr(&hstack(&[&ev, &aw]), sthr);
        let r2 = complement_within(&evaw, &p2);
        let q2 = complement_within(&id, &evaw);
        if r1.ncols() != r2.ncols() {
            return Err(Error::IllConditioned(format!(
                "regular part has {} columns but {} rows",
                r1.ncols(),
                r2.ncols()
            )));
        }
        let t0 = hstack(&[&p1, &r1, &q1]);
        let s0 = hstack(&[&p2, &r2, &q2]).transpose();
        (s0, t0, p2.ncols(), p1.ncols(), r1.ncols())
    };

    if mpr + mpc > 0 || r < n {
        apply_decoupling(&mut s, &mut t, e, a, mpr, mpc, thr)?;
        apply_decoupling(&mut s, &mut t, e, a, mpr + r, mpc + r, thr)?;
    }
    let ek = &s * e * &t;
    let ak = &s * a * &t;
    let (mqr, mqc) = (n - mpr - r, n - mpc - r);

    let e_p = ek.view((0, 0), (mpr, mpc)).into_owned();
    let a_p = ak.view((0, 0), (mpr, mpc)).into_owned();
    let (beta, tp, fp) = beta_chains(&e_p, &a_p, thr, &mut warnings)?;
    let sp = inverse_checked(&fp, "beta row transform", tol)?;

    let e_r = ek.view((mpr, mpc), (r, r)).into_owned();
    let a_r = ak.view((mpr, mpc), (r, r)).into_owned();
    let reg = weierstrass(&e_r, &a_r, thr, tol, &mut warnings)?;

    let e_q = ek.view((mpr + r, mpc + r), (mqr, mqc)).transpose();
    let a_q = ak.view((mpr + r, mpc + r), (mqr, mqc)).transpose();
    let (gamma, tq_t, fq_t) = beta_chains(&e_q, &a_q, thr, &mut warnings)?;
    let sq = tq_t.transpose();
    let tq = inverse_checked(&fq_t, "gamma column transform", tol)?.transpose();

    // Reorder to (regular, beta, gamma) while applying the block transforms.
    let s_p = &sp * s.rows(0, mpr);
    let s_r = &reg.s * s.rows(mpr, r);
    let s_q = &sq * s.rows(mpr + r, mqr);
    let s_final = numerics::vstack(&[&s_r, &s_p, &s_q]);
    let t_p = t.columns(0, mpc) * &tp;
    let t_r = t.columns(mpc, r) * &reg.t;
    let t_q = t.columns(mpc + r, mqc) * &tq;
    let t_final = hstack(&[&t_r, &t_p, &t_q]);

    let mut layout = Vec::new();
    let (mut row, mut col) = (0usize, 0usize);
    if reg.n0 > 0 {
        layout.push(BlockEntry { kind: BlockKind::Finite, rows: 0..reg.n0, cols: 0..reg.n0 });
    }
    row += reg.n0;
    col += reg.n0;
    for &k in &reg.alpha {
        layout.push(BlockEntry { kind: BlockKind::Nilpotent, rows: row..row + k, cols: col..col + k });
        row += k;
        col += k;
    }
    for &k in &beta {
        layout.push(BlockEntry { kind: BlockKind::Beta, rows: row..row + k - 1, cols: col..col + k });
        row += k - 1;
        col += k;
    }
    for &k in &gamma {
        layout.push(BlockEntry { kind: BlockKind::Gamma, rows: row..row + k, cols: col..col + k - 1 });
        row += k;
        col += k - 1;
    }
    debug_assert_eq!((row, col), (n, n));

    let cond_s = numerics::condition_number(&s_final);
    let cond_t = numerics::condition_number(&t_final);
    let mut qkf = QuasiKroneckerForm {
        s: s_final,
        t: t_final,
        n0: reg.n0,
        a0: reg.a0,
        alpha: reg.alpha,
        beta,
        gamma,
        block_layout: layout,
        residual: 0.0,
        residual_bound: 0.0,
        cond_s,
        cond_t,
        warnings,
    };
    let e_res = (&qkf.s * e * &qkf.t - qkf.e_template()).norm();
    let a_res = (&qkf.s * a * &qkf.t - qkf.a_template()).norm();
    qkf.residual = e_res.max(a_res);
    let norm_sum = spectral_norm(e) + spectral_norm(a);
    qkf.residual_bound = 1e-7 * norm_sum.max(f64::MIN_POSITIVE) * cond_s * cond_t;
    if qkf.residual > qkf.residual_bound {
        qkf.warnings.push(format!(
            "reconstruction residual {:.3e} exceeds the bound {:.3e}",
            qkf.residual, qkf.residual_bound
        ));
    }
    Ok(qkf)
}

fn sample_points(n: usize) -> impl Iterator<Item = f64> {
    (0..=n).map(|i| (i as f64 + 1.0) * 0.618_033_988_749_894_9 - 1.137)
}

/// Whether `det(sE − A)` is not the zero polynomial.
pub fn is_regular(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<bool> {
    let n = p.n();
    if n == 0 {
        return Ok(true);
    }
    let qkf = quasi_kronecker(p, tol)?;
    Ok(regular_from_form(p, &qkf, tol))
}

/// Form verdict confirmed by a full-rank sample of `sE − A`.
pub(crate) fn regular_from_form(p: &MatrixPencil, qkf: &QuasiKroneckerForm, tol: &ToleranceConfig) -> bool {
    let n = p.n();
    if n == 0 {
        return true;
    }
    qkf.is_regular()
        && sample_points(n).any(|s| {
            let m = p.e() * s - p.a();
            numerics::numeric_rank(&m, tol).map(|r| r == n).unwrap_or(false)
        })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumEntry {
    pub value: Complex64,
    pub algebraic: usize,
    pub geometric: usize,
    pub semi_simple: bool,
}

/// Finite eigenvalues with algebraic and geometric multiplicities.
pub fn spectrum(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<Vec<SpectrumEntry>> {
    let qkf = quasi_kronecker(p, tol)?;
    if !qkf.is_regular() {
        return Err(Error::SingularPencil);
    }
    spectrum_from_form(p, &qkf, tol)
}

pub(crate) fn spectrum_from_form(
    p: &MatrixPencil,
    qkf: &QuasiKroneckerForm,
    tol: &ToleranceConfig,
) -> Result<Vec<SpectrumEntry>> {
    let eigs = numerics::eigenvalues(&qkf.a0)?;
    let mut out = Vec::new();
    for (mut center, members) in numerics::cluster_eigenvalues(&eigs, tol) {
        if center.im.abs() <= tol.cluster_radius(center) && members.iter().all(|&i| {
            let c = eigs[i].conj();
            members.iter().any(|&j| (eigs[j] - c).norm() <= tol.cluster_radius(c))
        }) {
            center.im = 0.0;
        }
        let algebraic = members.len();
        let re = p.e() * center.re - p.a();
        let im = p.e() * center.im;
        let scale = spectral_norm(&re).max(spectral_norm(&im));
        let geometric = numerics::complex_nullity(&re, &im, tol.threshold(scale)).min(algebraic);
        out.push(SpectrumEntry {
            value: center,
            algebraic,
            geometric,
            semi_simple: geometric == algebraic,
        });
    }
    out.sort_by(|x, y| {
        y.value
            .re
            .partial_cmp(&x.value.re)
            .unwrap()
            .then(y.value.im.partial_cmp(&x.value.im).unwrap())
    });
    Ok(out)
}

/// Largest nilpotent block size; 0 without nilpotent blocks.
pub fn index_of(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<usize> {
    Ok(quasi_kronecker(p, tol)?.index())
}

/// The system space: all consistent initial values.
pub fn system_space(p: &MatrixPencil, tol: &ToleranceConfig) -> Result<Subspace> {
    let qkf = quasi_kronecker(p, tol)?;
    Ok(system_space_from_form(&qkf))
}

pub(crate) fn system_space_from_form(qkf: &QuasiKroneckerForm) -> Subspace {
    let g = qkf.system_space_generators();
    Subspace::from_orthonormal_unchecked(numerics::leading_range(&g, g.ncols()))
}
