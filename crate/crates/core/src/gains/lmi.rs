//! Eigenvalue verification of the three gain LMIs.

use nalgebra::DMatrix;

use super::GainSet;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;

/// Relative semidefinite threshold: eigenvalues within `eig_tol·(1+‖M‖₂)` of zero count as zero.
pub const DEFAULT_EIG_TOL: f64 = 1e-8;

/// One block of the certificate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlockCheck {
    pub name: &'static str,
    pub passed: bool,
    pub min_eig: f64,
    pub max_eig: f64,
    /// Signed distance to the feasible side: `λ_min` for `⪰`/`≻` blocks, `−λ_max` for `⪯` blocks.
    pub margin: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LmiReport {
    pub x_positive: BlockCheck,
    pub decrease: BlockCheck,
    pub scaling: BlockCheck,
}

impl LmiReport {
    pub fn passed(&self) -> bool {
        self.blocks().iter().all(|b| b.passed)
    }

    pub fn blocks(&self) -> [&BlockCheck; 3] {
        [&self.x_positive, &self.decrease, &self.scaling]
    }

    /// Smallest margin over the three blocks.
    pub fn worst_margin(&self) -> f64 {
        self.blocks().iter().map(|b| b.margin).fold(f64::INFINITY, f64::min)
    }
}

/// The decrease block `[[Υ, b], [bᵀ, −ϱ₂]]`.
pub(crate) fn decrease_block(x: &DMatrix<f64>, y_row: &nalgebra::DVector<f64>, rho1: f64, rho2: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let a = linalg::shift_matrix(n);
    let b = linalg::input_vector(n);
    let g = linalg::generator(n);
    let bm = DMatrix::from_column_slice(n, 1, b.as_slice());
    let ym = DMatrix::from_row_slice(1, n, y_row.as_slice());
    let upsilon = x * a.transpose() + &a * x + ym.transpose() * bm.transpose() + &bm * &ym
        + (x * &g + &g * x) * rho1;
    linalg::block_matrix(&[
        vec![upsilon, bm.clone()],
        vec![bm.transpose(), DMatrix::from_element(1, 1, -rho2)],
    ])
}

/// The scaling block `[[X G_r + G_r X, X], [X, I]]`.
pub(crate) fn scaling_block(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let g = linalg::generator(n);
    linalg::block_matrix(&[
        vec![x * &g + &g * x, x.clone()],
        vec![x.clone(), DMatrix::identity(n, n)],
    ])
}

fn check(name: &'static str, m: &DMatrix<f64>, eig_tol: f64, negative: bool, strict: bool) -> BlockCheck {
    let ev = linalg::sym_eigenvalues(m);
    let min_eig = ev[0];
    let max_eig = ev[ev.len() - 1];
    let threshold = eig_tol * (1.0 + linalg::sym_norm2(m));
    let margin = if negative { -max_eig } else { min_eig };
    let passed = if strict { margin > threshold } else { margin >= -threshold };
    BlockCheck { name, passed, min_eig, max_eig, margin, threshold }
}

/// Checks `X ≻ 0`, the decrease block `⪯ 0` and the scaling block `⪰ 0`.
pub fn verify_lmi(g: &GainSet, eig_tol: f64) -> Result<LmiReport> {
    verify_lmi_data(g.x(), g.y_row(), g.rho1(), g.rho2(), eig_tol)
}

/// [`verify_lmi`] on raw LMI variables, which need not define a valid gain set.
pub fn verify_lmi_data(
    x: &DMatrix<f64>,
    y_row: &nalgebra::DVector<f64>,
    rho1: f64,
    rho2: f64,
    eig_tol: f64,
) -> Result<LmiReport> {
    let n = x.nrows();
    if n == 0 || !linalg::is_square(x, n) || y_row.len() != n {
        return Err(Error::structural(format!(
            "X is {}x{}, Y has length {}",
            x.nrows(),
            x.ncols(),
            y_row.len()
        )));
    }
    Ok(LmiReport {
        x_positive: check("X > 0", x, eig_tol, false, true),
        decrease: check(
            "[[Upsilon, b], [b^T, -rho2]] <= 0",
            &decrease_block(x, y_row, rho1, rho2),
            eig_tol,
            true,
            false,
        ),
        scaling: check("[[XG + GX, X], [X, I]] >= 0", &scaling_block(x), eig_tol, false, false),
    })
}

/// `ϱ₂ = k·(ϱ₁/Δ²)/(points+1)`, `k = 1..=points`: an interior grid of `(0, ϱ₁/Δ²)`.
pub fn rho2_grid(rho1: f64, delta: f64, points: usize) -> Vec<f64> {
    let upper = if delta > 0.0 { rho1 / (delta * delta) } else { rho1 };
    (1..=points).map(|k| upper * k as f64 / (points + 1) as f64).collect()
}

#[derive(Debug, Clone)]
pub struct Rho2Scan {
    pub entries: Vec<(f64, LmiReport)>,
}

impl Rho2Scan {
    pub fn passing(&self) -> Vec<f64> {
        self.entries.iter().filter(|(_, r)| r.passed()).map(|(v, _)| *v).collect()
    }

    /// First passing `ϱ₂`, otherwise the one with the largest worst-block margin.
    pub fn best(&self) -> Option<(f64, &LmiReport)> {
        if let Some((v, r)) = self.entries.iter().find(|(_, r)| r.passed()) {
            return Some((*v, r));
        }
        self.entries
            .iter()
            .max_by(|a, b| a.1.worst_margin().total_cmp(&b.1.worst_margin()))
            .map(|(v, r)| (*v, r))
    }
}

/// Verifies `g` for each candidate `ϱ₂` (candidates violating `ϱ₁ > ϱ₂Δ²` are skipped).
pub fn scan_rho2(g: &GainSet, candidates: &[f64], eig_tol: f64) -> Result<Rho2Scan> {
    let mut entries = Vec::with_capacity(candidates.len());
    for &rho2 in candidates {
        let Ok(gi) = g.with_rho2(rho2) else { continue };
        entries.push((rho2, verify_lmi(&gi, eig_tol)?));
    }
    Ok(Rho2Scan { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    fn toy() -> GainSet {
        GainSet::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -2.0), 1.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn scalar_certificate_by_hand() {
        let g = toy();
        // Block (ii) = [[-2, 1], [1, -1]]: trace -3, det 1, eigenvalues (-3 ± √5)/2.
        let blk = decrease_block(g.x(), g.y_row(), 1.0, 1.0);
        assert_eq!(blk, DMatrix::from_row_slice(2, 2, &[-2.0, 1.0, 1.0, -1.0]));
        let r = verify_lmi(&g, DEFAULT_EIG_TOL).unwrap();
        assert!(r.passed());
        assert!((r.decrease.max_eig - (-3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        // Block (iii) = [[2, 1], [1, 1]] with eigenvalues (3 ± √5)/2.
        assert_eq!(scaling_block(g.x()), DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 1.0]));
        assert!((r.scaling.min_eig - (3.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
    }

    #[test]
    fn negative_x_fails_first_condition() {
        let x = -DMatrix::identity(2, 2);
        let r = verify_lmi_data(&x, &DVector::from_vec(vec![-1.0, -1.0]), 1.0, 0.5, DEFAULT_EIG_TOL).unwrap();
        assert!(!r.x_positive.passed);
        assert!(!r.passed());
    }

    #[test]
    fn grid_matches_scan_decision() {
        let grid = rho2_grid(1.0, 1.0, 19);
        assert_eq!(grid.len(), 19);
        assert!((grid[0] - 0.05).abs() < 1e-15 && (grid[18] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn verified_gains_dominate_identity() {
        // Congruence of the scaling block: P G + G P ⪰ I for any passing certificate.
        let g = toy();
        let p = g.p();
        let gr = linalg::generator(1);
        let m = p * &gr + &gr * p - DMatrix::identity(1, 1);
        assert!(linalg::lambda_min(&m) >= -1e-8);
    }
}
