//! Independent checks: closed-form trajectories through the Weierstrass form,
//! energy monotonicity and exact rational regularity.

use nalgebra::{DMatrix, DVector};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use crate::error::{Error, Result};
use crate::numerics::{self, ToleranceConfig};
use crate::pencil::{self, DescriptorSystem, MatrixPencil};

/// Relative distance of `x0` to the system space that is still accepted.
pub const X0_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DVector<f64>>,
    /// Exact time derivatives `ẋ(t)`.
    pub derivatives: Vec<DVector<f64>>,
    pub inputs: Option<Vec<DVector<f64>>>,
}

impl Trajectory {
    /// `sup_t ‖x(t)‖` over the samples.
    pub fn sup_norm(&self) -> f64 {
        self.states.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    pub fn final_norm(&self) -> f64 {
        self.states.last().map_or(0.0, |x| x.norm())
    }
}

/// Homogeneous solution of `d/dt Ex = Ax` from a consistent `x0`.
pub fn simulate(
    p: &MatrixPencil,
    x0: &DVector<f64>,
    horizon: f64,
    samples: usize,
    tol: &ToleranceConfig,
) -> Result<Trajectory> {
    let n = p.n();
    if x0.len() != n {
        return Err(Error::InvalidInput(format!("x0 must have length {n}")));
    }
    if !(horizon.is_finite() && horizon > 0.0) || samples < 2 {
        return Err(Error::InvalidInput("horizon must be positive and samples at least 2".into()));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("x0 has non-finite entries".into()));
    }
    let qkf = pencil::quasi_kronecker(p, tol)?;
    if !pencil::regular_from_form(p, &qkf, tol) {
        return Err(Error::SingularPencil);
    }
    let vsys = pencil::system_space_from_form(&qkf);
    let b = vsys.basis();
    let dist = (x0 - b * (b.transpose() * x0)).norm();
    let rel = dist / x0.norm().max(f64::MIN_POSITIVE);
    if x0.norm() > 0.0 && rel > X0_TOLERANCE {
        return Err(Error::X0NotInSystemSpace(rel));
    }
    let n0 = qkf.n0;
    let tf = qkf.t.columns(0, n0).into_owned();
    let tinv = numerics::inverse_checked(&qkf.t, "right transformation", tol)?;
    let z0 = (tinv * x0).rows(0, n0).into_owned();
    let mut times = Vec::with_capacity(samples);
    let mut states = Vec::with_capacity(samples);
    let mut derivatives = Vec::with_capacity(samples);
    for i in 0..samples {
        let t = horizon * i as f64 / (samples - 1) as f64;
        let z = if n0 == 0 { DVector::zeros(0) } else { (&qkf.a0 * t).exp() * &z0 };
        states.push(&tf * &z);
        derivatives.push(&tf * (&qkf.a0 * &z));
        times.push(t);
    }
    Ok(Trajectory { times, states, derivatives, inputs: None })
}

/// Closed loop `u = Kx` substituted before simulation; inputs are recorded.
pub fn simulate_feedback(
    d: &DescriptorSystem,
    k: &DMatrix<f64>,
    x0: &DVector<f64>,
    horizon: f64,
    samples: usize,
    tol: &ToleranceConfig,
) -> Result<Trajectory> {
    if k.shape() != (d.k(), d.n()) {
        return Err(Error::InvalidInput(format!("feedback must be {}x{}", d.k(), d.n())));
    }
    let closed = MatrixPencil::new(d.e().clone(), d.a() + d.b() * k)?;
    let mut traj = simulate(&closed, x0, horizon, samples, tol)?;
    traj.inputs = Some(traj.states.iter().map(|x| k * x).collect());
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyReport {
    pub monotone: bool,
    pub max_increase: f64,
    pub hamiltonian: Vec<f64>,
}

/// `H(x) = xᵀQᵀEx` is nonincreasing along the samples (up to `tol·(1+|H|)`).
pub fn check_energy_decay(traj: &Trajectory, e: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> EnergyReport {
    let qte = q.transpose() * e;
    let hamiltonian: Vec<f64> = traj.states.iter().map(|x| x.dot(&(&qte * x))).collect();
    let mut max_increase = 0.0f64;
    let mut monotone = true;
    for w in hamiltonian.windows(2) {
        let inc = w[1] - w[0];
        max_increase = max_increase.max(inc);
        if inc > tol * (1.0 + w[0].abs()) {
            monotone = false;
        }
    }
    EnergyReport { monotone, max_increase, hamiltonian }
}

/// Maximum of `‖Eẋ − Ax‖ / (1 + ‖x‖)` over the samples.
pub fn residual_along(traj: &Trajectory, p: &MatrixPencil) -> f64 {
    traj.states
        .iter()
        .zip(&traj.derivatives)
        .map(|(x, dx)| (p.e() * dx - p.a() * x).norm() / (1.0 + x.norm()))
        .fold(0.0, f64::max)
}

const EXACT_MAX_N: usize = 8;

fn to_rational(m: &DMatrix<f64>, name: &str) -> Result<Vec<Vec<BigRational>>> {
    (0..m.nrows())
        .map(|i| {
            (0..m.ncols())
                .map(|j| {
                    BigRational::from_float(m[(i, j)])
                        .ok_or_else(|| Error::InvalidInput(format!("{name}[{i},{j}] is not a finite number")))
                })
                .collect()
        })
        .collect()
}

/// Row echelon elimination; returns the rank and the determinant for square input.
fn eliminate(mut rows: Vec<Vec<BigRational>>) -> (usize, BigRational) {
    let nr = rows.len();
    let nc = rows.first().map_or(0, |r| r.len());
    let mut det = BigRational::from_integer(BigInt::from(1));
    let mut rank = 0;
    for col in 0..nc {
        let Some(piv) = (rank..nr).find(|&r| !rows[r][col].is_zero()) else {
            det = BigRational::zero();
            continue;
        };
        if piv != rank {
            rows.swap(piv, rank);
            det = -det;
        }
        let p = rows[rank][col].clone();
        det *= &p;
        for r in (rank + 1)..nr {
            if rows[r][col].is_zero() {
                continue;
            }
            let f = &rows[r][col] / &p;
            for c in col..nc {
                let sub = &f * &rows[rank][c];
                rows[r][c] -= sub;
            }
        }
        rank += 1;
        if rank == nr {
            break;
        }
    }
    if nr != nc || rank < nr {
        det = BigRational::zero();
    }
    (rank, det)
}

/// Exact rank of a matrix with finite entries.
pub fn exact_rank(m: &DMatrix<f64>) -> Result<usize> {
    Ok(eliminate(to_rational(m, "M")?).0)
}

/// Coefficients (ascending powers) of `det(sE − A)` in exact arithmetic.
pub fn exact_det_polynomial(e: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Vec<BigRational>> {
    let n = e.nrows();
    if !e.is_square() || a.shape() != (n, n) {
        return Err(Error::InvalidInput("E and A must be square of equal size".into()));
    }
    if n > EXACT_MAX_N {
        return Err(Error::InvalidInput(format!("exact arithmetic is limited to n <= {EXACT_MAX_N}")));
    }
    let er = to_rational(e, "E")?;
    let ar = to_rational(a, "A")?;
    let values: Vec<BigRational> = (0..=n)
        .map(|s| {
            let s = BigRational::from_integer(BigInt::from(s));
            let m = (0..n)
                .map(|i| (0..n).map(|j| &s * &er[i][j] - &ar[i][j]).collect())
                .collect();
            eliminate(m).1
        })
        .collect();
    Ok(interpolate(&values))
}

/// Coefficients of the polynomial through `(k, values[k])`, `k = 0..`.
fn interpolate(values: &[BigRational]) -> Vec<BigRational> {
    let m = values.len();
    // Newton divided differences on the nodes 0, 1, …, m−1.
    let mut dd = values.to_vec();
    for level in 1..m {
        for i in (level..m).rev() {
            let denom = BigRational::from_integer(BigInt::from(level));
            dd[i] = (&dd[i] - &dd[i - 1]) / denom;
        }
    }
    let mut coeffs = vec![BigRational::zero(); m];
    // Horner expansion of Σ dd[k] Π_{j<k} (s − j).
    for k in (0..m).rev() {
        let mut next = vec![BigRational::zero(); m];
        for (p, c) in coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            if p + 1 < m {
                next[p + 1] += c;
            }
            next[p] -= c * BigRational::from_integer(BigInt::from(k));
        }
        next[0] += &dd[k];
        coeffs = next;
    }
    coeffs
}

/// Whether `det(sE − A)` is a nonzero polynomial, in exact arithmetic.
pub fn exact_regularity(e: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<bool> {
    Ok(exact_det_polynomial(e, a)?.iter().any(|c| !c.is_zero()))
}

/// Degree of `det(sE − A)`; `None` for the zero polynomial.
pub fn exact_det_degree(e: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<Option<usize>> {
    Ok(exact_det_polynomial(e, a)?.iter().rposition(|c| !c.is_zero()))
}
