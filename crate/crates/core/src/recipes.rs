//! Seeded random instances with known structure.
//!
//! Every generator assembles a canonical block form whose properties are
//! known by construction and hides it behind well-conditioned equivalence
//! transforms. Tests, benchmarks and the acceptance suite draw from here.

use nalgebra::DMatrix;
use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::numerics::block_diag;
use crate::pencil::{DescriptorSystem, MatrixPencil};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut InstanceRng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
}

pub fn random_orthogonal(rng: &mut InstanceRng, n: usize) -> DMatrix<f64> {
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    random_matrix(rng, n, n).qr().q()
}

/// `U diag(σ) Vᵀ` with singular values log-uniform in `[1, cond]`.
pub fn random_well_conditioned(rng: &mut InstanceRng, n: usize, cond: f64) -> DMatrix<f64> {
    let u = random_orthogonal(rng, n);
    let v = random_orthogonal(rng, n);
    let lc = cond.max(1.0).ln();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { (rng.random_range(0.0..=1.0) * lc).exp() } else { 0.0 });
    u * d * v.transpose()
}

pub fn random_skew(rng: &mut InstanceRng, n: usize) -> DMatrix<f64> {
    let m = random_matrix(rng, n, n);
    &m - m.transpose()
}

/// Positive semidefinite with the given rank.
pub fn random_psd(rng: &mut InstanceRng, n: usize, rank: usize) -> DMatrix<f64> {
    let f = random_matrix(rng, n, rank);
    &f * f.transpose()
}

pub use crate::stability::StabilityClass;

#[derive(Debug, Clone)]
pub struct PencilInstance {
    pub pencil: MatrixPencil,
    pub class: StabilityClass,
    pub n0: usize,
    pub alpha: Vec<usize>,
    pub beta: Vec<usize>,
    pub gamma: Vec<usize>,
}

impl PencilInstance {
    pub fn index(&self) -> usize {
        self.alpha.iter().copied().max().unwrap_or(0)
    }
}

fn far_from(existing: &[f64], x: f64) -> bool {
    existing.iter().all(|&y| (x - y).abs() > 0.05)
}

fn draw_separated(rng: &mut InstanceRng, used: &mut Vec<f64>, lo: f64, hi: f64) -> f64 {
    loop {
        let x = rng.random_range(lo..hi);
        if far_from(used, x) {
            used.push(x);
            return x;
        }
    }
}

/// Diagonal blocks with the requested spectral character.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum FiniteKind {
    /// open left half plane
    Decaying,
    /// semi-simple eigenvalues on the imaginary axis, rest decaying
    Marginal,
    /// at least one growing mode
    Growing,
}

fn finite_part(rng: &mut InstanceRng, n0: usize, kind: FiniteKind) -> DMatrix<f64> {
    let mut blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut used_re = Vec::new();
    let mut used_im = Vec::new();
    let mut size = 0usize;
    let push = |blocks: &mut Vec<DMatrix<f64>>, b: DMatrix<f64>, size: &mut usize| {
        *size += b.nrows();
        blocks.push(b);
    };
    match kind {
        FiniteKind::Decaying => {}
        FiniteKind::Marginal => {
            if n0 >= 2 && rng.random_bool(0.5) {
                let w = draw_separated(rng, &mut used_im, 0.3, 3.0);
                push(&mut blocks, DMatrix::from_row_slice(2, 2, &[0.0, w, -w, 0.0]), &mut size);
            } else {
                let zeros = if n0 >= 2 && rng.random_bool(0.3) { 2 } else { 1 };
                push(&mut blocks, DMatrix::zeros(zeros, zeros), &mut size);
            }
        }
        FiniteKind::Growing => {
            let choice = rng.random_range(0..3);
            if choice == 0 || n0 < 2 {
                let l = draw_separated(rng, &mut used_re, 0.2, 2.0);
                push(&mut blocks, DMatrix::from_element(1, 1, l), &mut size);
            } else if choice == 1 {
                push(&mut blocks, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]), &mut size);
            } else {
                let a = draw_separated(rng, &mut used_re, 0.2, 1.5);
                let w = draw_separated(rng, &mut used_im, 0.3, 3.0);
                push(&mut blocks, DMatrix::from_row_slice(2, 2, &[a, w, -w, a]), &mut size);
            }
        }
    }
    while size < n0 {
        let left = n0 - size;
        let pick = rng.random_range(0..4);
        if pick == 0 && left >= 2 {
            let a = -draw_separated(rng, &mut used_re, 0.2, 3.0);
            let w = draw_separated(rng, &mut used_im, 0.3, 3.0);
            push(&mut blocks, DMatrix::from_row_slice(2, 2, &[a, w, -w, a]), &mut size);
        } else if pick == 1 && left >= 2 {
            let l = -draw_separated(rng, &mut used_re, 0.2, 3.0);
            push(&mut blocks, DMatrix::from_row_slice(2, 2, &[l, 1.0, 0.0, l]), &mut size);
        } else {
            let l = -draw_separated(rng, &mut used_re, 0.2, 3.0);
            push(&mut blocks, DMatrix::from_element(1, 1, l), &mut size);
        }
    }
    blocks.shuffle(rng);
    let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
    let d = block_diag(&refs);
    let n = d.nrows();
    if n == 0 {
        return d;
    }
    let w = random_well_conditioned(rng, n, 5.0);
    let winv = w.clone().try_inverse().expect("well-conditioned");
    &w * d * winv
}

fn nilpotent_template(alpha: &[usize]) -> DMatrix<f64> {
    let n: usize = alpha.iter().sum();
    let mut m = DMatrix::zeros(n, n);
    let mut off = 0;
    for &k in alpha {
        for i in 0..k.saturating_sub(1) {
            m[(off + i, off + i + 1)] = 1.0;
        }
        off += k;
    }
    m
}

fn beta_template(beta: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let (r, c) = (beta - 1, beta);
    let e = DMatrix::from_fn(r, c, |i, j| if i == j { 1.0 } else { 0.0 });
    let a = DMatrix::from_fn(r, c, |i, j| if j == i + 1 { 1.0 } else { 0.0 });
    (e, a)
}

fn random_partition(rng: &mut InstanceRng, total: usize, max_part: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut left = total;
    while left > 0 {
        let k = rng.random_range(1..=left.min(max_part));
        out.push(k);
        left -= k;
    }
    out
}

/// Random square pencil of size at most `max_n` in the requested class.
pub fn random_pencil(rng: &mut InstanceRng, class: StabilityClass, max_n: usize) -> PencilInstance {
    let max_n = max_n.max(3);
    let (n0, alpha, beta, gamma, kind) = loop {
        let n = rng.random_range(2..=max_n);
        let (n_fin, n_sing) = if class == StabilityClass::Singular {
            let s = rng.random_range(1..=(n - 1).min(4));
            (n - s, s)
        } else {
            (n, 0)
        };
        let n_alpha = rng.random_range(0..=n_fin.min(3));
        let n0 = n_fin - n_alpha;
        let kind = match class {
            StabilityClass::AsymptoticallyStable => FiniteKind::Decaying,
            StabilityClass::Stable => FiniteKind::Marginal,
            StabilityClass::Unstable => FiniteKind::Growing,
            StabilityClass::Singular => {
                [FiniteKind::Decaying, FiniteKind::Marginal, FiniteKind::Growing][rng.random_range(0..3)]
            }
        };
        if matches!(kind, FiniteKind::Marginal | FiniteKind::Growing) && n0 == 0 {
            continue;
        }
        let alpha = random_partition(rng, n_alpha, 3);
        // equal numbers of beta and gamma blocks keep the pencil square:
        // rows = |β| − ℓ + |γ|, cols = |β| + |γ| − ℓ
        let (beta, gamma) = if n_sing > 0 {
            let l = if n_sing >= 2 && rng.random_bool(0.3) { 2 } else { 1 };
            let mut sizes = vec![1usize; 2 * l];
            for _ in 0..(n_sing - l) {
                let i = rng.random_range(0..sizes.len());
                sizes[i] += 1;
            }
            (sizes[..l].to_vec(), sizes[l..].to_vec())
        } else {
            (Vec::new(), Vec::new())
        };
        break (n0, alpha, beta, gamma, kind);
    };
    let a0 = finite_part(rng, n0, kind);
    let na: usize = alpha.iter().sum();
    let mut eblocks = vec![DMatrix::identity(n0, n0), nilpotent_template(&alpha)];
    let mut ablocks = vec![a0, DMatrix::identity(na, na)];
    for &b in &beta {
        let (e, a) = beta_template(b);
        eblocks.push(e);
        ablocks.push(a);
    }
    for &g in &gamma {
        let (e, a) = beta_template(g);
        eblocks.push(e.transpose());
        ablocks.push(a.transpose());
    }
    let er: Vec<&DMatrix<f64>> = eblocks.iter().collect();
    let ar: Vec<&DMatrix<f64>> = ablocks.iter().collect();
    let e = block_diag(&er);
    let a = block_diag(&ar);
    let n = e.nrows();
    debug_assert_eq!(e.ncols(), n);
    let s = random_well_conditioned(rng, n, 10.0);
    let t = random_well_conditioned(rng, n, 10.0);
    let pencil = MatrixPencil::new(&s * e * &t, &s * a * &t).expect("valid recipe");
    PencilInstance { pencil, class, n0, alpha, beta, gamma }
}

/// Labeled corpus cycling through all classes.
pub fn pencil_corpus(seed: u64, count: usize, max_n: usize) -> Vec<PencilInstance> {
    let mut r = rng(seed);
    (0..count)
        .map(|i| random_pencil(&mut r, StabilityClass::ALL[i % 4], max_n))
        .collect()
}

/// Where the kernel of `Q` sits relative to the kernel of `E`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DhKernel {
    QInvertible,
    Contained,
    NotContained,
}

#[derive(Debug, Clone)]
pub struct DhInstance {
    pub e: DMatrix<f64>,
    pub j: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub q: DMatrix<f64>,
}

impl DhInstance {
    pub fn a(&self) -> DMatrix<f64> {
        (&self.j - &self.r) * &self.q
    }

    pub fn pencil(&self) -> MatrixPencil {
        MatrixPencil::new(self.e.clone(), self.a()).expect("valid dH recipe")
    }
}

/// Random dH data with `QᵀE = Tᵀ diag(d_q d_e) T ≥ 0`.
pub fn random_dh(rng: &mut InstanceRng, n: usize, kernel: DhKernel) -> DhInstance {
    let m = random_well_conditioned(rng, n, 5.0);
    let t = random_well_conditioned(rng, n, 5.0);
    let mut dq = vec![0.0; n];
    let mut de = vec![0.0; n];
    let special = rng.random_range(0..n);
    for i in 0..n {
        let mag = rng.random_range(0.5..2.0);
        let sign = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        dq[i] = sign * mag;
        de[i] = if rng.random_bool(0.3) { 0.0 } else { sign * rng.random_range(0.5..2.0) };
    }
    match kernel {
        DhKernel::QInvertible => {}
        DhKernel::Contained => {
            dq[special] = 0.0;
            de[special] = 0.0;
        }
        DhKernel::NotContained => {
            dq[special] = 0.0;
            de[special] = rng.random_range(0.5..2.0);
        }
    }
    let dqm = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(dq));
    let dem = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(de));
    let minv_t = m.clone().try_inverse().expect("well-conditioned").transpose();
    let q = &m * dqm * &t;
    let e = minv_t * dem * &t;
    let j = random_skew(rng, n);
    let rank = rng.random_range(0..=n);
    let r = random_psd(rng, n, rank);
    DhInstance { e, j, r, q }
}

/// Controllable `(A1, B1)` with every eigenvalue of `A1` in the open right half plane.
pub fn random_antistable_controllable(rng: &mut InstanceRng, n1: usize, k: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    loop {
        let m = random_matrix(rng, n1, n1);
        let eig = crate::numerics::eigenvalues(&m).expect("schur");
        let min_re = eig.iter().map(|l| l.re).fold(f64::INFINITY, f64::min);
        let shift = -min_re + rng.random_range(0.2..1.0);
        let a1 = m + DMatrix::identity(n1, n1) * shift;
        let b1 = random_matrix(rng, n1, k);
        // Kalman matrix [B, AB, ...]
        let mut blocks = vec![b1.clone()];
        for _ in 1..n1 {
            let next = &a1 * blocks.last().unwrap();
            blocks.push(next);
        }
        let refs: Vec<&DMatrix<f64>> = blocks.iter().collect();
        let kal = crate::numerics::hstack(&refs);
        let s = crate::numerics::svd_sorted(&kal).s;
        if s[n1 - 1] > 1e-3 * s[0] {
            return (a1, b1);
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilizableInstance {
    pub system: DescriptorSystem,
    pub n1: usize,
    pub n2: usize,
    pub alpha: Vec<usize>,
    /// Whether the input acts on the nilpotent coordinates.
    pub input_on_nilpotent: bool,
}

/// Random behaviorally stabilizable descriptor system.
pub fn random_stabilizable(rng: &mut InstanceRng, max_n: usize, input_on_nilpotent: bool) -> StabilizableInstance {
    let max_n = max_n.max(2);
    let n1 = rng.random_range(1..=3.min(max_n - 1));
    let n2 = rng.random_range(0..=(max_n - n1).min(3));
    let na = rng.random_range(0..=(max_n - n1 - n2).min(2));
    let k = rng.random_range(1..=2);
    let alpha = random_partition(rng, na, 2);
    let (a1, b1) = random_antistable_controllable(rng, n1, k);
    let kind = if rng.random_bool(0.3) { FiniteKind::Marginal } else { FiniteKind::Decaying };
    let a2 = if n2 == 0 { DMatrix::zeros(0, 0) } else { finite_part(rng, n2, kind) };
    let b2 = random_matrix(rng, n2, k);
    let ba = if input_on_nilpotent { random_matrix(rng, na, k) } else { DMatrix::zeros(na, k) };
    let e = block_diag(&[&DMatrix::identity(n1 + n2, n1 + n2), &nilpotent_template(&alpha)]);
    let a = block_diag(&[&a1, &a2, &DMatrix::identity(na, na)]);
    let b = crate::numerics::vstack(&[&b1, &b2, &ba]);
    let n = n1 + n2 + na;
    let s = random_well_conditioned(rng, n, 5.0);
    let t = random_well_conditioned(rng, n, 5.0);
    let system = DescriptorSystem::new(&s * e * &t, &s * a * &t, &s * b).expect("valid recipe");
    StabilizableInstance { system, n1, n2, alpha, input_on_nilpotent }
}

fn unimodular(rng: &mut InstanceRng, n: usize, steps: usize) -> DMatrix<f64> {
    let mut u = DMatrix::identity(n, n);
    for _ in 0..steps {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let c = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        let row = u.row(j) * c;
        let mut target = u.row_mut(i);
        target += row;
    }
    u
}

/// Pencil with small integer entries; regular or singular by construction.
pub fn integer_pencil(rng: &mut InstanceRng, regular: bool, max_n: usize) -> MatrixPencil {
    let n = rng.random_range(2..=max_n.clamp(2, 8));
    let (n_reg, beta, gamma) = if regular || n < 3 {
        if !regular {
            // a 2x2 pencil [[s, -1], [0, 0]]
            let (be, ba) = beta_template(2);
            let e = crate::numerics::vstack(&[&be, &DMatrix::zeros(1, 2)]);
            let a = crate::numerics::vstack(&[&ba, &DMatrix::zeros(1, 2)]);
            let u = unimodular(rng, 2, 3);
            let v = unimodular(rng, 2, 3);
            return MatrixPencil::new(&u * e * &v, &u * a * &v).expect("valid");
        }
        (n, Vec::new(), Vec::new())
    } else {
        // rows (b - 1) + c and columns b + (c - 1) agree
        let b = rng.random_range(1..=2);
        let c = rng.random_range(1..=2);
        (n + 1 - b - c, vec![b], vec![c])
    };
    let na = rng.random_range(0..=n_reg.min(2));
    let n0 = n_reg - na;
    let a0 = DMatrix::from_fn(n0, n0, |i, j| if j >= i { rng.random_range(-2..=2) as f64 } else { 0.0 });
    let mut eb = vec![DMatrix::identity(n0, n0), nilpotent_template(&random_partition(rng, na, 2))];
    let mut ab = vec![a0, DMatrix::identity(na, na)];
    for &b in &beta {
        let (e, a) = beta_template(b);
        eb.push(e);
        ab.push(a);
    }
    for &g in &gamma {
        let (e, a) = beta_template(g);
        eb.push(e.transpose());
        ab.push(a.transpose());
    }
    let er: Vec<&DMatrix<f64>> = eb.iter().collect();
    let ar: Vec<&DMatrix<f64>> = ab.iter().collect();
    let e = block_diag(&er);
    let a = block_diag(&ar);
    let m = e.nrows();
    let u = unimodular(rng, m, 2 * m);
    let v = unimodular(rng, m, 2 * m);
    MatrixPencil::new(&u * e * &v, &u * a * &v).expect("valid recipe")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_is_reproducible() {
        let a = pencil_corpus(7, 8, 6);
        let b = pencil_corpus(7, 8, 6);
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.pencil, y.pencil);
        }
    }

    #[test]
    fn integer_pencils_are_square_integer() {
        let mut r = rng(3);
        for i in 0..20 {
            let p = integer_pencil(&mut r, i % 2 == 0, 6);
            assert_eq!(p.e().nrows(), p.e().ncols());
            assert!(p.e().iter().chain(p.a().iter()).all(|v| v.fract() == 0.0));
        }
    }
}
