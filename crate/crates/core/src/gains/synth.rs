//! Best-effort LMI synthesis by spectral descent.
//!
//! Minimizes a log-sum-exp smoothing of the largest eigenvalue over the three
//! constraint blocks (written as `F_j(X, Y) ⪯ 0`) with BFGS steps, shrinking the
//! smoothing width in stages. The verifier decides acceptance.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::lmi::{decrease_block, scaling_block, verify_lmi, DEFAULT_EIG_TOL};
use super::GainSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SynthesisSettings {
    /// Smoothing widths, coarse to fine.
    pub widths: Vec<f64>,
    pub max_iter_per_stage: usize,
    /// Stop once every block is strictly feasible by this amount.
    pub target_margin: f64,
}

impl Default for SynthesisSettings {
    fn default() -> Self {
        Self {
            widths: vec![1e-1, 1e-2, 1e-3, 1e-4, 1e-5],
            max_iter_per_stage: 500,
            target_margin: 1e-7,
        }
    }
}

/// Parameterization `v = (upper triangle of X, Y)` and the affine blocks `F_j(v)`.
struct Problem {
    n: usize,
    rho1: f64,
    rho2: f64,
    constant: Vec<DMatrix<f64>>,
    basis: Vec<Vec<DMatrix<f64>>>,
}

impl Problem {
    fn new(n: usize, rho1: f64, rho2: f64) -> Self {
        let dim = n * (n + 1) / 2 + n;
        let mut p = Self { n, rho1, rho2, constant: Vec::new(), basis: Vec::new() };
        let zero = DVector::zeros(dim);
        p.constant = p.blocks(&zero);
        p.basis = (0..dim)
            .map(|k| {
                let mut e = DVector::zeros(dim);
                e[k] = 1.0;
                p.blocks(&e)
                    .into_iter()
                    .zip(&p.constant)
                    .map(|(m, c)| m - c)
                    .collect()
            })
            .collect();
        p
    }

    fn dim(&self) -> usize {
        self.n * (self.n + 1) / 2 + self.n
    }

    fn unpack(&self, v: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
        let n = self.n;
        let mut x = DMatrix::zeros(n, n);
        let mut idx = 0;
        for i in 0..n {
            for j in i..n {
                x[(i, j)] = v[idx];
                x[(j, i)] = v[idx];
                idx += 1;
            }
        }
        let y = DVector::from_iterator(n, (0..n).map(|i| v[idx + i]));
        (x, y)
    }

    fn pack(&self, x: &DMatrix<f64>, y: &DVector<f64>) -> DVector<f64> {
        let n = self.n;
        let mut v = Vec::with_capacity(self.dim());
        for i in 0..n {
            for j in i..n {
                v.push(x[(i, j)]);
            }
        }
        v.extend(y.iter());
        DVector::from_vec(v)
    }

    /// `[−X, [[Υ, b],[bᵀ, −ϱ₂]], −[[XG+GX, X],[X, I]]]`, each required `⪯ 0`.
    fn blocks(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        let (x, y) = self.unpack(v);
        vec![-x.clone(), decrease_block(&x, &y, self.rho1, self.rho2), -scaling_block(&x)]
    }

    fn assemble(&self, v: &DVector<f64>) -> Vec<DMatrix<f64>> {
        self.constant
            .iter()
            .enumerate()
            .map(|(j, c)| {
                let mut m = c.clone();
                for (k, vk) in v.iter().enumerate() {
                    if *vk != 0.0 {
                        m += &self.basis[k][j] * *vk;
                    }
                }
                m
            })
            .collect()
    }

    fn worst(&self, v: &DVector<f64>) -> f64 {
        self.assemble(v)
            .into_iter()
            .map(|m| SymmetricEigen::new(m).eigenvalues.max())
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smoothed maximum eigenvalue and its gradient.
    fn smoothed(&self, v: &DVector<f64>, width: f64) -> (f64, DVector<f64>) {
        let mut pairs = Vec::new();
        for (j, m) in self.assemble(v).into_iter().enumerate() {
            let eig = SymmetricEigen::new(m);
            for i in 0..eig.eigenvalues.len() {
                pairs.push((j, eig.eigenvalues[i], eig.eigenvectors.column(i).into_owned()));
            }
        }
        let top = pairs.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = pairs.iter().map(|p| ((p.1 - top) / width).exp()).collect();
        let total: f64 = weights.iter().sum();
        let value = top + width * total.ln();
        let mut grad = DVector::zeros(self.dim());
        for (k, basis_k) in self.basis.iter().enumerate() {
            let mut acc = 0.0;
            for ((j, _, q), w) in pairs.iter().zip(&weights) {
                acc += w / total * (q.transpose() * &basis_k[*j] * q)[(0, 0)];
            }
            grad[k] = acc;
        }
        (value, grad)
    }
}

fn bfgs_stage(problem: &Problem, v0: DVector<f64>, width: f64, max_iter: usize, target: f64) -> DVector<f64> {
    let dim = problem.dim();
    let mut v = v0;
    let (mut f, mut g) = problem.smoothed(&v, width);
    let mut h = DMatrix::<f64>::identity(dim, dim);
    for _ in 0..max_iter {
        if problem.worst(&v) < -target {
            break;
        }
        let mut d = -(&h * &g);
        let mut slope = g.dot(&d);
        if slope >= 0.0 {
            h = DMatrix::identity(dim, dim);
            d = -g.clone();
            slope = g.dot(&d);
        }
        let mut t = 1.0;
        let (v_new, f_new, g_new) = loop {
            let cand = &v + &d * t;
            let (fc, gc) = problem.smoothed(&cand, width);
            if fc <= f + 1e-4 * t * slope {
                break (cand, fc, gc);
            }
            t *= 0.5;
            if t < 1e-14 {
                return v;
            }
        };
        let s = &v_new - &v;
        let yv = &g_new - &g;
        let sy = s.dot(&yv);
        if sy > 1e-14 {
            let rho = 1.0 / sy;
            let eye = DMatrix::<f64>::identity(dim, dim);
            let left = &eye - (&s * yv.transpose()) * rho;
            let right = &eye - (&yv * s.transpose()) * rho;
            h = &left * &h * &right + (&s * s.transpose()) * rho;
        }
        v = v_new;
        f = f_new;
        g = g_new;
        if g.norm() < 1e-14 {
            break;
        }
    }
    v
}

/// Searches for `(X, Y)` satisfying the gain LMIs for the given `ϱ₁, ϱ₂, Δ`.
pub fn synthesize_gains(n: usize, rho1: f64, rho2: f64, delta: f64) -> Result<GainSet> {
    synthesize_gains_with(n, rho1, rho2, delta, &SynthesisSettings::default())
}

pub fn synthesize_gains_with(
    n: usize,
    rho1: f64,
    rho2: f64,
    delta: f64,
    settings: &SynthesisSettings,
) -> Result<GainSet> {
    if n == 0 {
        return Err(Error::domain("dimension must be at least 1"));
    }
    if !(rho1 > rho2 * delta * delta && rho2 * delta * delta >= 0.0 && rho2 > 0.0) {
        return Err(Error::domain("require rho1 > rho2 * Delta^2 and rho2 > 0"));
    }
    let problem = Problem::new(n, rho1, rho2);
    // Start from X = I and the row placing every closed-loop pole at −1.
    let x0 = DMatrix::<f64>::identity(n, n);
    let y0 = DVector::from_iterator(n, (0..n).map(|j| -binomial(n, j)));
    let mut v = problem.pack(&x0, &y0);

    for &width in &settings.widths {
        v = bfgs_stage(&problem, v, width, settings.max_iter_per_stage, settings.target_margin);
        if problem.worst(&v) < -settings.target_margin {
            let (x, y) = problem.unpack(&v);
            let g = GainSet::new(x, y, rho1, rho2, delta)?;
            if verify_lmi(&g, DEFAULT_EIG_TOL)?.passed() {
                return Ok(g);
            }
        }
    }
    Err(Error::Synthesis(format!(
        "descent stalled with worst eigenvalue {:e} (n = {n}, rho1 = {rho1}, rho2 = {rho2}, Delta = {delta})",
        problem.worst(&v)
    )))
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pole_placement_row() {
        assert_eq!(binomial(3, 0), 1.0);
        assert_eq!(binomial(3, 1), 3.0);
        assert_eq!(binomial(4, 2), 6.0);
    }

    #[test]
    fn scalar_case_is_feasible() {
        let g = synthesize_gains(1, 1.0, 1.0, 0.5).unwrap();
        assert!(verify_lmi(&g, DEFAULT_EIG_TOL).unwrap().passed());
    }

    #[test]
    fn double_integrator() {
        let g = synthesize_gains(2, 1.0, 0.5, 1.0).unwrap();
        assert!(verify_lmi(&g, DEFAULT_EIG_TOL).unwrap().passed());
    }

    #[test]
    fn pack_round_trip() {
        let p = Problem::new(3, 1.0, 0.5);
        let x = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 2.0, 4.0, 5.0, 3.0, 5.0, 6.0]);
        let y = DVector::from_vec(vec![7.0, 8.0, 9.0]);
        let (x2, y2) = p.unpack(&p.pack(&x, &y));
        assert_eq!(x, x2);
        assert_eq!(y, y2);
    }

    #[test]
    fn rejects_bad_ordering() {
        assert!(matches!(synthesize_gains(2, 1.0, 2.0, 1.0), Err(Error::Domain(_))));
    }
}
