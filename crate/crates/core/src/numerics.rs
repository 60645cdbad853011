//! Dense rank-revealing linear algebra shared by every analysis module.
//!
//! All rank and kernel decisions are made through an explicit
//! [`ToleranceConfig`]; nothing in here keeps hidden per-call tolerances.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

pub type Complex64 = Complex<f64>;

const EPS: f64 = f64::EPSILON;

/// Absolute and relative tolerances used for every rank decision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub atol: f64,
    pub rtol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            atol: 1e-10,
            rtol: 1e-8,
        }
    }
}

impl ToleranceConfig {
    pub fn new(atol: f64, rtol: f64) -> Result<Self> {
        if !(atol > 0.0 && atol.is_finite()) || !(rtol > 0.0 && rtol.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "tolerances must be positive and finite (atol={atol}, rtol={rtol})"
            )));
        }
        Ok(Self { atol, rtol })
    }

    /// Singular values at or below this value count as zero.
    pub fn threshold(&self, sigma_max: f64) -> f64 {
        self.atol.max(self.rtol * sigma_max)
    }

    /// Radius used to merge computed eigenvalues into one cluster.
    pub fn cluster_radius(&self, lambda: Complex64) -> f64 {
        10.0 * self.atol.sqrt() * (1.0 + lambda.norm())
    }
}

/// Spectral regions used to order a real Schur form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    OpenLeft,
    ClosedLeft,
    OpenRight,
    ImaginaryAxis,
}

impl Region {
    /// Membership test; the imaginary axis is the band `|Re λ| <= atol`.
    pub fn contains(&self, lambda: Complex64, tol: &ToleranceConfig) -> bool {
        match self {
            Region::OpenLeft => lambda.re < -tol.atol,
            Region::ClosedLeft => lambda.re <= tol.atol,
            Region::OpenRight => lambda.re > tol.atol,
            Region::ImaginaryAxis => lambda.re.abs() <= tol.atol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RealSchurResult {
    pub q: DMatrix<f64>,
    pub t: DMatrix<f64>,
    /// Eigenvalues in diagonal order, conjugate pairs adjacent.
    pub eigenvalues: Vec<Complex64>,
    /// Size of the leading diagonal block holding the selected eigenvalues.
    pub selected: usize,
}

pub fn check_finite(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("{name} has non-finite entries")))
    }
}

pub fn check_square(m: &DMatrix<f64>, name: &str) -> Result<()> {
    if m.is_square() {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{name} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )))
    }
}

/// Singular value decomposition with values sorted in decreasing order.
///
/// `v` always has `ncols` columns (a complete orthonormal basis of the
/// domain); `u` has `min(nrows, ncols)` columns.
pub(crate) struct SortedSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// One-sided Jacobi SVD of a matrix with at least as many rows as columns.
/// Returns `(U, s, V)` with `U` having orthonormal columns (completed where
/// a singular value vanishes) and `V` orthogonal.
fn jacobi_svd(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (mut alpha, mut beta, mut gamma) = (0.0, 0.0, 0.0);
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    alpha += x * x;
                    beta += y * y;
                    gamma += x * y;
                }
                if gamma == 0.0 || gamma.abs() <= EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let sn = c * t;
                for i in 0..m {
                    let (x, y) = (u[(i, p)], u[(i, q)]);
                    u[(i, p)] = c * x - sn * y;
                    u[(i, q)] = sn * x + c * y;
                }
                for i in 0..n {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = c * x - sn * y;
                    v[(i, q)] = sn * x + c * y;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut s = vec![0.0; n];
    let mut missing = Vec::new();
    for j in 0..n {
        let nrm = u.column(j).norm();
        s[j] = nrm;
        if nrm > f64::MIN_POSITIVE * 1e10 {
            let mut col = u.column_mut(j);
            col /= nrm;
        } else {
            missing.push(j);
        }
    }
    // Complete U on vanishing singular values by Gram-Schmidt on unit vectors.
    for &j in &missing {
        let mut best = DVector::zeros(m);
        let mut best_norm = -1.0;
        for i in 0..m {
            let mut cand = DVector::zeros(m);
            cand[i] = 1.0;
            for _ in 0..2 {
                for k in 0..n {
                    if k == j || (missing.contains(&k) && k > j) {
                        continue;
                    }
                    let proj = u.column(k).dot(&cand);
                    cand.axpy(-proj, &u.column(k), 1.0);
                }
            }
            let nrm = cand.norm();
            if nrm > best_norm {
                best_norm = nrm;
                best = cand;
            }
        }
        u.set_column(j, &(best / best_norm));
        s[j] = 0.0;
    }
    (u, s, v)
}

pub(crate) fn svd_sorted(m: &DMatrix<f64>) -> SortedSvd {
    let (nr, nc) = m.shape();
    if nr == 0 || nc == 0 {
        return SortedSvd {
            u: DMatrix::zeros(nr, 0),
            s: Vec::new(),
            v: DMatrix::identity(nc, nc),
        };
    }
    // Pad with zero rows so that V comes out square.
    let padded;
    let work = if nr < nc {
        let mut p = DMatrix::zeros(nc, nc);
        p.view_mut((0, 0), (nr, nc)).copy_from(m);
        padded = p;
        &padded
    } else {
        m
    };
    let (u_raw, sv, v_raw) = jacobi_svd(work);
    let k = sv.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| sv[b].partial_cmp(&sv[a]).unwrap().then(a.cmp(&b)));
    let r = nr.min(nc);
    let mut u = DMatrix::zeros(nr, r);
    let mut v = DMatrix::zeros(nc, nc);
    let mut s = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        s.push(sv[src]);
        if dst < r {
            u.set_column(dst, &u_raw.column(src).rows(0, nr));
        }
        v.set_column(dst, &v_raw.column(src));
    }
    s.truncate(r);
    SortedSvd { u, s, v }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    svd_sorted(m).s.first().copied().unwrap_or(0.0)
}

/// Makes each column's largest-magnitude entry positive.
pub(crate) fn normalize_signs(mut basis: DMatrix<f64>) -> DMatrix<f64> {
    for j in 0..basis.ncols() {
        let mut best = 0usize;
        let mut best_abs = -1.0;
        for i in 0..basis.nrows() {
            let a = basis[(i, j)].abs();
            if a > best_abs + 1e-12 {
                best_abs = a;
                best = i;
            }
        }
        if basis.nrows() > 0 && basis[(best, j)] < 0.0 {
            let mut col = basis.column_mut(j);
            col.neg_mut();
        }
    }
    basis
}

fn count_above(s: &[f64], thr: f64) -> usize {
    s.iter().filter(|&&v| v > thr).count()
}

/// Number of singular values above `max(atol, rtol * sigma_max)`.
pub fn numeric_rank(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<usize> {
    check_finite(m, "matrix")?;
    let s = svd_sorted(m).s;
    let thr = tol.threshold(s.first().copied().unwrap_or(0.0));
    Ok(count_above(&s, thr))
}

pub(crate) fn rank_thr(m: &DMatrix<f64>, thr: f64) -> usize {
    count_above(&svd_sorted(m).s, thr)
}

/// Orthonormal basis of `ker M`.
pub fn nullspace_basis(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    check_finite(m, "matrix")?;
    let sigma_max = svd_sorted(m).s.first().copied().unwrap_or(0.0);
    Ok(nullspace_thr(m, tol.threshold(sigma_max)))
}

/// Kernel with an explicit singular value cutoff.
pub(crate) fn nullspace_thr(m: &DMatrix<f64>, thr: f64) -> DMatrix<f64> {
    let n = m.ncols();
    if m.nrows() == 0 || m.iter().all(|v| v.abs() <= thr) {
        return DMatrix::identity(n, n);
    }
    let svd = svd_sorted(m);
    let r = count_above(&svd.s, thr);
    normalize_signs(svd.v.columns(r, n - r).into_owned())
}

/// Orthonormal basis of `ran M` with an explicit cutoff.
pub(crate) fn range_thr(m: &DMatrix<f64>, thr: f64) -> DMatrix<f64> {
    let nr = m.nrows();
    if m.ncols() == 0 || nr == 0 {
        return DMatrix::zeros(nr, 0);
    }
    let svd = svd_sorted(m);
    let r = count_above(&svd.s, thr);
    normalize_signs(svd.u.columns(0, r).into_owned())
}

/// The `k` dominant left singular directions of `m`.
pub(crate) fn leading_range(m: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    if k == 0 || m.ncols() == 0 {
        return DMatrix::zeros(m.nrows(), 0);
    }
    let svd = svd_sorted(m);
    normalize_signs(svd.u.columns(0, k).into_owned())
}

/// Moore-Penrose inverse by SVD, discarding singular values at or below the
/// tolerance threshold.
pub fn pseudo_inverse(m: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    check_finite(m, "matrix")?;
    let (nr, nc) = m.shape();
    if nr == 0 || nc == 0 {
        return Ok(DMatrix::zeros(nc, nr));
    }
    let svd = svd_sorted(m);
    let thr = tol.threshold(svd.s.first().copied().unwrap_or(0.0));
    let mut out = DMatrix::zeros(nc, nr);
    for (i, &s) in svd.s.iter().enumerate() {
        if s > thr {
            out += svd.v.column(i) * svd.u.column(i).transpose() / s;
        }
    }
    Ok(out)
}

pub fn sym_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn skew_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m - m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut ev: Vec<f64> = SymmetricEigen::new(sym_part(m)).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

/// Smallest eigenvalue of the symmetric part together with its eigenvector.
pub(crate) fn sym_min_eig(m: &DMatrix<f64>) -> Option<(f64, DVector<f64>)> {
    if m.is_empty() {
        return None;
    }
    let eig = SymmetricEigen::new(sym_part(m));
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, v)| (i, *v))?;
    Some((val, eig.eigenvectors.column(idx).into_owned()))
}

/// Largest eigenvalue of the symmetric part; `None` for empty input.
pub fn sym_max_eig(m: &DMatrix<f64>) -> Option<f64> {
    sym_eigenvalues(m).last().copied()
}

/// Amount by which the symmetric part fails to be positive semidefinite.
pub fn psd_defect(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().map_or(0.0, |&v| (-v).max(0.0))
}

/// Condition number in the spectral norm; infinite for singular input.
pub fn condition_number(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = svd_sorted(m).s;
    let smin = *s.last().unwrap();
    if smin == 0.0 {
        f64::INFINITY
    } else {
        s[0] / smin
    }
}

/// Minimum-norm least-squares solution of `M x = b`, dropping singular
/// values at or below `thr`.
pub(crate) fn lstsq(m: &DMatrix<f64>, b: &DVector<f64>, thr: f64) -> DVector<f64> {
    let svd = svd_sorted(m);
    let mut x = DVector::zeros(m.ncols());
    for (i, &s) in svd.s.iter().enumerate() {
        if s > thr {
            let coef = svd.u.column(i).dot(b) / s;
            x.axpy(coef, &svd.v.column(i), 1.0);
        }
    }
    x
}

/// Inverse with an explicit conditioning budget.
pub(crate) fn inverse_checked(m: &DMatrix<f64>, what: &str, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    if m.is_empty() {
        return Ok(m.clone());
    }
    let cond = condition_number(m);
    if !(cond < 1.0 / (tol.rtol * 1e-2)) {
        return Err(Error::IllConditioned(format!(
            "{what} has condition number {cond:.3e}"
        )));
    }
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::IllConditioned(format!("{what} is singular")))
}

/// Complex nullity of `re + i*im` through its real embedding.
pub(crate) fn complex_nullity(re: &DMatrix<f64>, im: &DMatrix<f64>, thr: f64) -> usize {
    let (nr, nc) = re.shape();
    let mut big = DMatrix::zeros(2 * nr, 2 * nc);
    big.view_mut((0, 0), (nr, nc)).copy_from(re);
    big.view_mut((nr, nc), (nr, nc)).copy_from(re);
    big.view_mut((0, nc), (nr, nc)).copy_from(&(-im));
    big.view_mut((nr, 0), (nr, nc)).copy_from(im);
    let rank = rank_thr(&big, thr);
    // Rank of the embedding is twice the complex rank.
    nc - (rank + 1) / 2
}

/// Columns of all inputs side by side (all must share the row count).
pub fn hstack(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts.first().map_or(0, |m| m.nrows());
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for m in parts {
        out.columns_mut(c, m.ncols()).copy_from(*m);
        c += m.ncols();
    }
    out
}

/// Rows of all inputs stacked (all must share the column count).
pub fn vstack(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols = parts.first().map_or(0, |m| m.ncols());
    let rows = parts.iter().map(|m| m.nrows()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut r = 0;
    for m in parts {
        out.rows_mut(r, m.nrows()).copy_from(*m);
        r += m.nrows();
    }
    out
}

/// Block diagonal matrix; blocks may be rectangular or empty.
pub fn block_diag(parts: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let rows = parts.iter().map(|m| m.nrows()).sum();
    let cols = parts.iter().map(|m| m.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for m in parts {
        out.view_mut((r, c), m.shape()).copy_from(*m);
        r += m.nrows();
        c += m.ncols();
    }
    out
}

/// Orthonormal basis of the part of `outer` orthogonal to `inner`, with
/// exactly `outer.ncols() - inner.ncols()` columns.
pub(crate) fn complement_within(outer: &DMatrix<f64>, inner: &DMatrix<f64>) -> DMatrix<f64> {
    let k = outer.ncols().saturating_sub(inner.ncols());
    if inner.ncols() == 0 {
        return outer.clone();
    }
    let proj = outer - inner * (inner.transpose() * outer);
    leading_range(&proj, k)
}

// ---------------------------------------------------------------------------
// Real Schur form and reordering
// ---------------------------------------------------------------------------

/// Diagonal blocks of a quasi-upper-triangular matrix as `(start, size)`.
pub(crate) fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut out = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && t[(i + 1, i)] != 0.0 {
            out.push((i, 2));
            i += 2;
        } else {
            out.push((i, 1));
            i += 1;
        }
    }
    out
}

pub(crate) fn block_eigenvalues(t: &DMatrix<f64>, start: usize, size: usize) -> Vec<Complex64> {
    if size == 1 {
        return vec![Complex64::new(t[(start, start)], 0.0)];
    }
    let (a, b, c, d) = (
        t[(start, start)],
        t[(start, start + 1)],
        t[(start + 1, start)],
        t[(start + 1, start + 1)],
    );
    let p = 0.5 * (a - d);
    let disc = p * p + b * c;
    let mid = 0.5 * (a + d);
    if disc >= 0.0 {
        let r = disc.sqrt();
        vec![Complex64::new(mid + r, 0.0), Complex64::new(mid - r, 0.0)]
    } else {
        let w = (-disc).sqrt();
        vec![Complex64::new(mid, w), Complex64::new(mid, -w)]
    }
}

fn rotate_rows(t: &mut DMatrix<f64>, i: usize, k: usize, cs: f64, sn: f64) {
    for j in 0..t.ncols() {
        let (x, y) = (t[(i, j)], t[(k, j)]);
        t[(i, j)] = cs * x + sn * y;
        t[(k, j)] = -sn * x + cs * y;
    }
}

fn rotate_cols(t: &mut DMatrix<f64>, i: usize, k: usize, cs: f64, sn: f64) {
    for r in 0..t.nrows() {
        let (x, y) = (t[(r, i)], t[(r, k)]);
        t[(r, i)] = cs * x + sn * y;
        t[(r, k)] = -sn * x + cs * y;
    }
}

/// Cleans the lower part and splits 2x2 blocks that carry real eigenvalues.
fn standardize_schur(q: &mut DMatrix<f64>, t: &mut DMatrix<f64>) {
    let n = t.nrows();
    for j in 0..n {
        for i in (j + 2)..n {
            t[(i, j)] = 0.0;
        }
    }
    for i in 0..n.saturating_sub(1) {
        if t[(i + 1, i)].abs() <= EPS * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs()) {
            t[(i + 1, i)] = 0.0;
        }
    }
    let mut i = 0;
    while i + 1 < n {
        if t[(i + 1, i)] == 0.0 {
            i += 1;
            continue;
        }
        let (a, b, c, d) = (t[(i, i)], t[(i, i + 1)], t[(i + 1, i)], t[(i + 1, i + 1)]);
        let p = 0.5 * (a - d);
        let disc = p * p + b * c;
        if disc >= 0.0 {
            let lam = 0.5 * (a + d) + p.signum() * disc.sqrt();
            let v1 = (b, lam - a);
            let v2 = (lam - d, c);
            let (x, y) = if v1.0.hypot(v1.1) >= v2.0.hypot(v2.1) { v1 } else { v2 };
            let r = x.hypot(y);
            let (cs, sn) = (x / r, y / r);
            rotate_rows(t, i, i + 1, cs, sn);
            rotate_cols(t, i, i + 1, cs, sn);
            rotate_cols(q, i, i + 1, cs, sn);
            t[(i + 1, i)] = 0.0;
        }
        i += 2;
    }
}

/// Real Schur decomposition `M = Q T Qᵀ` with standardized diagonal blocks.
pub(crate) fn real_schur(m: &DMatrix<f64>) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), DMatrix::zeros(0, 0)));
    }
    let schur = m
        .clone()
        .try_schur(EPS, 0)
        .ok_or_else(|| Error::IllConditioned("real Schur iteration did not converge".into()))?;
    let (mut q, mut t) = schur.unpack();
    standardize_schur(&mut q, &mut t);
    Ok((q, t))
}

/// Swaps the adjacent diagonal blocks starting at `k` (sizes `p`, then `r`).
fn swap_adjacent(q: &mut DMatrix<f64>, t: &mut DMatrix<f64>, k: usize, p: usize, r: usize) -> Result<()> {
    let a11 = t.view((k, k), (p, p)).into_owned();
    let a12 = t.view((k, k + p), (p, r)).into_owned();
    let a22 = t.view((k + p, k + p), (r, r)).into_owned();
    // A11 X - X A22 = A12, vectorized column-major.
    let dim = p * r;
    let mut kron = DMatrix::zeros(dim, dim);
    for j in 0..r {
        for i in 0..p {
            let row = j * p + i;
            for l in 0..p {
                kron[(row, j * p + l)] += a11[(i, l)];
            }
            for l in 0..r {
                kron[(row, l * p + i)] -= a22[(l, j)];
            }
        }
    }
    let rhs = DVector::from_iterator(dim, (0..r).flat_map(|j| (0..p).map(move |i| (i, j))).map(|(i, j)| a12[(i, j)]));
    let x = kron
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::IllConditioned("Schur block swap: blocks share eigenvalues".into()))?;
    let m = p + r;
    let mut z = DMatrix::zeros(m, m);
    for j in 0..r {
        for i in 0..p {
            z[(i, j)] = -x[j * p + i];
        }
        z[(p + j, j)] = 1.0;
    }
    let qs = z.qr().q();
    let rows = t.rows(k, m).into_owned();
    t.rows_mut(k, m).copy_from(&(qs.transpose() * rows));
    let cols = t.columns(k, m).into_owned();
    t.columns_mut(k, m).copy_from(&(cols * &qs));
    let qcols = q.columns(k, m).into_owned();
    q.columns_mut(k, m).copy_from(&(qcols * &qs));
    for j in 0..r {
        for i in r..m {
            t[(k + i, k + j)] = 0.0;
        }
    }
    if r == 1 && p == 2 {
        // trailing block keeps its 2x2 coupling; nothing else to clear
    }
    Ok(())
}

/// Moves the blocks whose eigenvalues satisfy `select` to the leading
/// position. Returns the new block sizes and the dimension of the leading part.
pub(crate) fn reorder_schur(
    q: &mut DMatrix<f64>,
    t: &mut DMatrix<f64>,
    select: &dyn Fn(Complex64) -> bool,
) -> Result<(Vec<usize>, usize)> {
    let mut sizes: Vec<usize> = schur_blocks(t).into_iter().map(|(_, s)| s).collect();
    let mut ins = 0usize;
    for j in 0..sizes.len() {
        let start: usize = sizes[..j].iter().sum();
        let eig = block_eigenvalues(t, start, sizes[j]);
        if !select(eig[0]) {
            continue;
        }
        let mut pos = j;
        while pos > ins {
            let s: usize = sizes[..pos - 1].iter().sum();
            swap_adjacent(q, t, s, sizes[pos - 1], sizes[pos])?;
            sizes.swap(pos - 1, pos);
            pos -= 1;
        }
        ins += 1;
    }
    let lead = sizes[..ins].iter().sum();
    Ok((sizes, lead))
}

pub(crate) fn eigenvalues_from_sizes(t: &DMatrix<f64>, sizes: &[usize]) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(t.nrows());
    let mut start = 0;
    for &s in sizes {
        out.extend(block_eigenvalues(t, start, s));
        start += s;
    }
    out
}

/// Real Schur form with the eigenvalues of `region` in the leading block.
pub fn ordered_real_schur(m: &DMatrix<f64>, region: Region, tol: &ToleranceConfig) -> Result<RealSchurResult> {
    check_square(m, "matrix")?;
    check_finite(m, "matrix")?;
    let (mut q, mut t) = real_schur(m)?;
    let (sizes, selected) = reorder_schur(&mut q, &mut t, &|l| region.contains(l, tol))?;
    let eigenvalues = eigenvalues_from_sizes(&t, &sizes);
    Ok(RealSchurResult {
        q,
        t,
        eigenvalues,
        selected,
    })
}

/// All eigenvalues of a real square matrix.
pub fn eigenvalues(m: &DMatrix<f64>) -> Result<Vec<Complex64>> {
    let (_, t) = real_schur(m)?;
    let sizes: Vec<usize> = schur_blocks(&t).into_iter().map(|(_, s)| s).collect();
    Ok(eigenvalues_from_sizes(&t, &sizes))
}

// ---------------------------------------------------------------------------
// Sylvester and Lyapunov equations
// ---------------------------------------------------------------------------

/// Solves `A X + X B = C` by the Bartels-Stewart method on real Schur forms.
pub fn solve_sylvester(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    c: &DMatrix<f64>,
    tol: &ToleranceConfig,
) -> Result<DMatrix<f64>> {
    check_square(a, "A")?;
    check_square(b, "B")?;
    check_finite(a, "A")?;
    check_finite(b, "B")?;
    check_finite(c, "C")?;
    let (m, n) = (a.nrows(), b.nrows());
    if c.shape() != (m, n) {
        return Err(Error::InvalidInput(format!(
            "C must be {m}x{n}, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if m == 0 || n == 0 {
        return Ok(DMatrix::zeros(m, n));
    }
    let (qa, ta) = real_schur(a)?;
    let (qb, tb) = real_schur(b)?;
    let f = qa.transpose() * c * &qb;
    let sep_thr = tol.atol.max(64.0 * EPS) * (1.0 + a.norm() + b.norm());
    let rb = schur_blocks(&ta);
    let cb = schur_blocks(&tb);
    let mut y = DMatrix::zeros(m, n);
    for &(i0, p) in rb.iter().rev() {
        for &(j0, q) in cb.iter() {
            let mut rhs = f.view((i0, j0), (p, q)).into_owned();
            let after = i0 + p;
            if after < m {
                rhs -= ta.view((i0, after), (p, m - after)) * y.view((after, j0), (m - after, q));
            }
            if j0 > 0 {
                rhs -= y.view((i0, 0), (p, j0)) * tb.view((0, j0), (j0, q));
            }
            let aii = ta.view((i0, i0), (p, p));
            let bjj = tb.view((j0, j0), (q, q));
            let dim = p * q;
            let mut kron = DMatrix::zeros(dim, dim);
            for jj in 0..q {
                for ii in 0..p {
                    let row = jj * p + ii;
                    for l in 0..p {
                        kron[(row, jj * p + l)] += aii[(ii, l)];
                    }
                    for l in 0..q {
                        kron[(row, l * p + ii)] += bjj[(l, jj)];
                    }
                }
            }
            let smin = svd_sorted(&kron).s.last().copied().unwrap_or(0.0);
            if smin <= sep_thr {
                return Err(Error::SpectrumClash(format!(
                    "eigenvalues of A and -B nearly coincide (separation {smin:.3e})"
                )));
            }
            let vec_rhs = DVector::from_iterator(dim, (0..q).flat_map(|jj| (0..p).map(move |ii| (ii, jj))).map(|(ii, jj)| rhs[(ii, jj)]));
            let sol = kron
                .lu()
                .solve(&vec_rhs)
                .ok_or_else(|| Error::SpectrumClash("singular block system".into()))?;
            for jj in 0..q {
                for ii in 0..p {
                    y[(i0 + ii, j0 + jj)] = sol[jj * p + ii];
                }
            }
        }
    }
    Ok(qa * y * qb.transpose())
}

/// Solves `Aᵀ X + X A = -C` for symmetric `C`; the result is symmetrized.
pub fn solve_lyapunov_equation(a: &DMatrix<f64>, c: &DMatrix<f64>, tol: &ToleranceConfig) -> Result<DMatrix<f64>> {
    check_square(a, "A")?;
    check_square(c, "C")?;
    let at = a.transpose();
    let x = solve_sylvester(&at, a, &(-c), tol)?;
    Ok(sym_part(&x))
}

/// Block diagonalization `M = W blkdiag(B_0, …, B_G) W⁻¹`: block `i < G`
/// carries the eigenvalues picked by `selectors[i]` (among those not picked
/// earlier); the last block holds the rest.
pub(crate) fn spectral_split(
    m: &DMatrix<f64>,
    selectors: &[&dyn Fn(Complex64) -> bool],
    tol: &ToleranceConfig,
) -> Result<(DMatrix<f64>, Vec<DMatrix<f64>>)> {
    let n = m.nrows();
    let (mut q, mut t) = real_schur(m)?;
    let mut sizes = Vec::with_capacity(selectors.len() + 1);
    let mut k = 0usize;
    for sel in selectors {
        let r = n - k;
        if r == 0 {
            sizes.push(0);
            continue;
        }
        let mut t22 = t.view((k, k), (r, r)).into_owned();
        let mut q2 = DMatrix::identity(r, r);
        let (_, count) = reorder_schur(&mut q2, &mut t22, *sel)?;
        let g = block_diag(&[&DMatrix::identity(k, k), &q2]);
        t = g.transpose() * &t * &g;
        t.view_mut((k, k), (r, r)).copy_from(&t22);
        for j in 0..k {
            for i in (j + 1)..n {
                if i >= k {
                    t[(i, j)] = 0.0;
                }
            }
        }
        q *= g;
        sizes.push(count);
        k += count;
    }
    sizes.push(n - k);
    let mut w = q;
    let mut off = 0usize;
    for &sz in &sizes {
        let rest = n - off - sz;
        if sz > 0 && rest > 0 {
            let t11 = t.view((off, off), (sz, sz)).into_owned();
            let t12 = t.view((off, off + sz), (sz, rest)).into_owned();
            let t22 = t.view((off + sz, off + sz), (rest, rest)).into_owned();
            let z = solve_sylvester(&t11, &(-&t22), &(-t12), tol).map_err(|e| match e {
                Error::SpectrumClash(m) => Error::IllConditioned(format!("spectral decoupling: {m}")),
                other => other,
            })?;
            let mut g = DMatrix::identity(n, n);
            g.view_mut((off, off + sz), (sz, rest)).copy_from(&z);
            let mut ginv = DMatrix::identity(n, n);
            ginv.view_mut((off, off + sz), (sz, rest)).copy_from(&(-&z));
            t = ginv * &t * &g;
            t.view_mut((off, off + sz), (sz, rest)).fill(0.0);
            w *= g;
        }
        off += sz;
    }
    let mut blocks = Vec::with_capacity(sizes.len());
    let mut off = 0usize;
    for &sz in &sizes {
        blocks.push(t.view((off, off), (sz, sz)).into_owned());
        off += sz;
    }
    Ok((w, blocks))
}

/// Groups eigenvalues whose distance is within the cluster radius
/// (single linkage). Returns `(center, members)` in first-seen order.
pub fn cluster_eigenvalues(eigs: &[Complex64], tol: &ToleranceConfig) -> Vec<(Complex64, Vec<usize>)> {
    let n = eigs.len();
    let mut label: Vec<usize> = (0..n).collect();
    fn find(label: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while label[r] != r {
            r = label[r];
        }
        label[i] = r;
        r
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let rad = tol.cluster_radius(eigs[i]).max(tol.cluster_radius(eigs[j]));
            if (eigs[i] - eigs[j]).norm() <= rad {
                let (ri, rj) = (find(&mut label, i), find(&mut label, j));
                if ri != rj {
                    label[rj.max(ri)] = rj.min(ri);
                }
            }
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        let r = find(&mut label, i);
        match groups.iter_mut().find(|(root, _)| *root == r) {
            Some((_, members)) => members.push(i),
            None => groups.push((r, vec![i])),
        }
    }
    groups
        .into_iter()
        .map(|(_, members)| {
            let sum: Complex64 = members.iter().map(|&i| eigs[i]).sum();
            (sum / members.len() as f64, members)
        })
        .collect()
}
