//! Weighted dilations, the implicit function `Q(V, y)` and its root `V_y`.
//!
//! The implicit Lyapunov function is defined by
//! `Q(V, y) = yᵀ D_r(V⁻¹) P D_r(V⁻¹) y − 1 = 0` with `r = (n, …, 1)`,
//! completed by `V(0) = 0`. `Q` is strictly decreasing in `V` for `y ≠ 0`,
//! so the root is found by bracketing and bisection.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg;

/// Dilation weights `r = (n, n−1, …, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DilationWeights {
    n: usize,
}

impl DilationWeights {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        Ok(Self { n })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Weight of coordinate `i` (zero-based): `r_{i+1} = n − i`.
    pub fn weight(&self, i: usize) -> u32 {
        (self.n - i) as u32
    }

    pub fn weights(&self) -> Vec<u32> {
        (0..self.n).map(|i| self.weight(i)).collect()
    }

    /// `(λ^{r_1}, …, λ^{r_n})`, by repeated multiplication.
    pub fn powers(&self, lambda: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        let mut acc = 1.0;
        // r is (n, …, 1): fill from the last coordinate upwards.
        for i in (0..self.n).rev() {
            acc *= lambda;
            out[i] = acc;
        }
        out
    }

    pub fn apply(&self, lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::domain(format!("dilation parameter must be positive, got {lambda}")));
        }
        if y.len() != self.n {
            return Err(Error::structural(format!(
                "vector of length {} for dilation of dimension {}",
                y.len(),
                self.n
            )));
        }
        Ok(self
            .powers(lambda)
            .into_iter()
            .zip(y)
            .map(|(w, yi)| w * yi)
            .collect())
    }

    /// `D_r(λ)` as a dense diagonal matrix.
    pub fn matrix(&self, lambda: f64) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.powers(lambda)))
    }
}

/// `D_r(λ) y` with `n = y.len()`.
pub fn dilation_apply(lambda: f64, y: &[f64]) -> Result<Vec<f64>> {
    DilationWeights::new(y.len())?.apply(lambda, y)
}

/// Stopping rule and guards of the ILF root search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IlfSolverSettings {
    pub rel_tol: f64,
    pub abs_q_tol: f64,
    pub max_iter: usize,
    pub v_floor: f64,
}

impl Default for IlfSolverSettings {
    fn default() -> Self {
        Self {
            rel_tol: 1e-12,
            abs_q_tol: 1e-10,
            max_iter: 200,
            v_floor: 1e-300,
        }
    }
}

impl IlfSolverSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_q_tol > 0.0 && self.max_iter >= 1 && self.v_floor > 0.0) {
            return Err(Error::domain(format!("invalid ILF solver settings {self:?}")));
        }
        Ok(())
    }
}

/// The quadratic-form ILF for a fixed `P = X⁻¹`.
///
/// Caches the spectral bounds of `X` used to seed the bracket.
#[derive(Debug, Clone)]
pub struct ImplicitLyapunov {
    p: DMatrix<f64>,
    weights: DilationWeights,
    sqrt_lmin_x: f64,
    sqrt_lmax_x: f64,
}

impl ImplicitLyapunov {
    pub fn new(p: &DMatrix<f64>) -> Result<Self> {
        let n = p.nrows();
        if !linalg::is_square(p, n) || n == 0 {
            return Err(Error::structural(format!("P must be square, got {:?}", p.shape())));
        }
        if linalg::asymmetry(p) > 1e-9 {
            return Err(Error::domain("P must be symmetric"));
        }
        let p = linalg::symmetrize(p);
        let ev = linalg::sym_eigenvalues(&p);
        if !(ev[0] > 0.0) {
            return Err(Error::domain(format!(
                "P must be positive definite (smallest eigenvalue {:e})",
                ev[0]
            )));
        }
        // eig(X) = 1 / eig(P)
        let lmin_x = 1.0 / ev[n - 1];
        let lmax_x = 1.0 / ev[0];
        Ok(Self {
            p,
            weights: DilationWeights::new(n)?,
            sqrt_lmin_x: lmin_x.sqrt(),
            sqrt_lmax_x: lmax_x.sqrt(),
        })
    }

    pub fn n(&self) -> usize {
        self.weights.n()
    }

    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn weights(&self) -> &DilationWeights {
        &self.weights
    }

    fn check_vector(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.n() {
            return Err(Error::structural(format!(
                "vector of length {} for ILF of dimension {}",
                y.len(),
                self.n()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("vector has non-finite entries"));
        }
        Ok(())
    }

    /// `yᵀ D_r(s) P D_r(s) y` — the ILF quadratic form at dilation `s`.
    pub(crate) fn form_at(&self, s: f64, y: &[f64]) -> f64 {
        let w = self.weights.powers(s);
        let n = self.n();
        let mut z = [0.0_f64; 16];
        let mut zv;
        let z: &mut [f64] = if n <= 16 {
            &mut z[..n]
        } else {
            zv = vec![0.0; n];
            &mut zv[..]
        };
        for i in 0..n {
            z[i] = w[i] * y[i];
        }
        let mut acc = 0.0;
        for i in 0..n {
            let row: f64 = z.iter().enumerate().map(|(j, zj)| self.p[(i, j)] * zj).sum();
            acc += z[i] * row;
        }
        acc
    }

    /// `Q(V, y)`.
    pub fn q(&self, v: f64, y: &[f64]) -> Result<f64> {
        if !(v > 0.0) {
            return Err(Error::domain(format!("V must be positive, got {v}")));
        }
        self.check_vector(y)?;
        if y.iter().all(|&yi| yi == 0.0) {
            return Err(Error::domain("Q is undefined at y = 0"));
        }
        Ok(self.form_at(1.0 / v, y) - 1.0)
    }

    /// `(√λ_min(X)·min{V,Vⁿ}, √λ_max(X)·max{V,Vⁿ})`.
    pub fn bounds(&self, v: f64) -> (f64, f64) {
        let vn = int_pow(v, self.n() as u32);
        (self.sqrt_lmin_x * v.min(vn), self.sqrt_lmax_x * v.max(vn))
    }

    /// The root `V_y` of `Q(·, y) = 0`, or `0` at `y = 0`.
    pub fn solve(&self, y: &[f64], settings: &IlfSolverSettings) -> Result<f64> {
        settings.validate()?;
        self.check_vector(y)?;
        let ynorm = linalg::norm(y);
        if ynorm == 0.0 {
            return Ok(0.0);
        }
        let n = self.n() as f64;
        let q = |v: f64| self.form_at(1.0 / v, y) - 1.0;

        // Invert the norm sandwich to seed the bracket.
        let a = ynorm / self.sqrt_lmax_x;
        let c = ynorm / self.sqrt_lmin_x;
        let mut lo = a.min(a.powf(1.0 / n)).max(settings.v_floor);
        let mut hi = c.max(c.powf(1.0 / n)).max(settings.v_floor);

        let mut iter = 0usize;
        while q(lo) < 0.0 {
            lo *= 0.5;
            iter += 1;
            if iter > settings.max_iter || lo < settings.v_floor {
                return Err(Error::Solver(format!("no lower bracket for |y| = {ynorm:e}")));
            }
        }
        while q(hi) > 0.0 {
            hi *= 2.0;
            iter += 1;
            if iter > settings.max_iter || !hi.is_finite() {
                return Err(Error::Solver(format!("no upper bracket for |y| = {ynorm:e}")));
            }
        }

        let mut q_lo = q(lo);
        let mut q_hi = q(hi);
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let q_mid = q(mid);
            if q_mid == 0.0 {
                return Ok(mid);
            }
            if q_mid > 0.0 {
                lo = mid;
                q_lo = q_mid;
            } else {
                hi = mid;
                q_hi = q_mid;
            }
            iter += 1;
            let narrow = hi - lo <= settings.rel_tol * hi;
            if narrow && q_lo.abs().min(q_hi.abs()) <= settings.abs_q_tol {
                break;
            }
            if iter >= settings.max_iter {
                break;
            }
        }
        let (v, qv) = if q_lo.abs() <= q_hi.abs() { (lo, q_lo) } else { (hi, q_hi) };
        if qv.abs() > settings.abs_q_tol {
            return Err(Error::Solver(format!(
                "bisection stalled at V = {v:e} with |Q| = {:e}",
                qv.abs()
            )));
        }
        Ok(v)
    }
}

pub(crate) fn int_pow(base: f64, exp: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..exp {
        acc *= base;
    }
    acc
}

/// `Q(V, y)` for the given `P`.
pub fn eval_q(v: f64, y: &[f64], p: &DMatrix<f64>) -> Result<f64> {
    ImplicitLyapunov::new(p)?.q(v, y)
}

/// `V_y(y)` for the given `P`.
pub fn solve_ilf(y: &[f64], p: &DMatrix<f64>, settings: &IlfSolverSettings) -> Result<f64> {
    ImplicitLyapunov::new(p)?.solve(y, settings)
}

/// Norm sandwich on the level set `Q(V, ·) = 0` in terms of the spectrum of `X`.
pub fn ilf_bounds(v: f64, x: &DMatrix<f64>) -> Result<(f64, f64)> {
    if !(v > 0.0) {
        return Err(Error::domain(format!("V must be positive, got {v}")));
    }
    let n = x.nrows();
    if n == 0 || !linalg::is_square(x, n) {
        return Err(Error::structural("X must be square"));
    }
    let ev = linalg::sym_eigenvalues(x);
    if !(ev[0] > 0.0) {
        return Err(Error::domain("X must be positive definite"));
    }
    let vn = int_pow(v, n as u32);
    Ok((ev[0].sqrt() * v.min(vn), ev[n - 1].sqrt() * v.max(vn)))
}
