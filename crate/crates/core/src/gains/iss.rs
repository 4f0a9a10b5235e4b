//! ISS multipliers `γ₁, γ₂, γ₃` and the robustness constants built from them.

use nalgebra::DMatrix;
use serde::Serialize;

use super::GainSet;
use crate::error::{Error, Result};
use crate::linalg;

/// Upper end of the multiplier search, `2⁴⁰ ≈ 1.1·10¹²`.
pub const GAMMA_CAP: f64 = 1_099_511_627_776.0;
const GAMMA_FLOOR: f64 = 0.0625;
const REFINE_RATIO: f64 = 1.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Gammas {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// `λ_max(𝒬)` at the returned multipliers.
    pub lambda_max: f64,
}

impl Gammas {
    fn as_array(&self) -> [f64; 3] {
        [self.gamma1, self.gamma2, self.gamma3]
    }
}

/// The `(4n+1)`-square block matrix `𝒬` whose negativity bounds the ILF derivative
/// under noise, delay mismatch and mismatched perturbations.
///
/// Block order: `ζ = [D(V⁻¹)x, d, D(Ψ⁻¹)w, (D(Ψ⁻¹)−D(V⁻¹))x, V D(V⁻¹)δ]`.
pub fn iss_block_matrix(g: &GainSet, gamma: [f64; 3]) -> DMatrix<f64> {
    let n = g.n();
    let a = linalg::shift_matrix(n);
    let gr = linalg::generator(n);
    let p = g.p();
    let b = DMatrix::from_column_slice(n, 1, linalg::input_vector(n).as_slice());
    let k = DMatrix::from_row_slice(1, n, g.k().as_slice());
    let pb = p * &b;
    let pbk = &pb * &k;
    let pi = a.transpose() * p + p * &a + &pbk + pbk.transpose() + (p * &gr + &gr * p) * g.rho1();

    let zn = DMatrix::zeros(n, n);
    let z1n = DMatrix::zeros(1, n);
    let zn1 = DMatrix::zeros(n, 1);
    let eye = DMatrix::<f64>::identity(n, n);
    linalg::block_matrix(&[
        vec![pi, pb.clone(), pbk.clone(), pbk.clone(), p.clone()],
        vec![pb.transpose(), DMatrix::from_element(1, 1, -g.rho2()), z1n.clone(), z1n.clone(), z1n.clone()],
        vec![pbk.transpose(), zn1.clone(), &eye * -gamma[0], zn.clone(), zn.clone()],
        vec![pbk.transpose(), zn1.clone(), zn.clone(), &eye * -gamma[1], zn.clone()],
        vec![p.clone(), zn1, zn.clone(), zn, &eye * -gamma[2]],
    ])
}

/// Leading `(n+1)` block of `𝒬` and the couplings of the three multiplier blocks.
fn reduced_blocks(g: &GainSet) -> (DMatrix<f64>, [DMatrix<f64>; 3]) {
    let n = g.n();
    let q = iss_block_matrix(g, [0.0; 3]);
    let head = q.view((0, 0), (n + 1, n + 1)).into_owned();
    let c = |i: usize| q.view((0, n + 1 + i * n), (n + 1, n)).into_owned();
    let outer = |m: DMatrix<f64>| &m * m.transpose();
    (head, [outer(c(0)), outer(c(1)), outer(c(2))])
}

/// `λ_max(S(λ)) − λ` with `S(λ) = H + Σ Cᵢ Cᵢᵀ/(λ + γᵢ)`, strictly decreasing on `λ > −min γ`.
fn secular(head: &DMatrix<f64>, outer: &[DMatrix<f64>; 3], gamma: [f64; 3], lambda: f64) -> f64 {
    let mut s = head.clone();
    for (c, g) in outer.iter().zip(gamma) {
        s += c / (lambda + g);
    }
    linalg::lambda_max(&s) - lambda
}

/// `λ_max(𝒬)` via the Schur complement on the multiplier blocks.
///
/// A dense eigensolve of `𝒬` loses absolute accuracy of order `max γ · ε`, which at large
/// multipliers exceeds the margins of interest; the reduced matrix keeps the scale of `Π`.
pub fn iss_lambda_max(g: &GainSet, gamma: [f64; 3]) -> f64 {
    let (head, outer) = reduced_blocks(g);
    let gmin = gamma.iter().copied().fold(f64::INFINITY, f64::min);
    let mut lo = -gmin * (1.0 - 1e-12);
    if secular(&head, &outer, gamma, lo) <= 0.0 {
        return linalg::lambda_max(&iss_block_matrix(g, gamma));
    }
    let mut hi = 1.0_f64.max(lo.abs() * 1e-12);
    while secular(&head, &outer, gamma, hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if secular(&head, &outer, gamma, mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Smallest multipliers (up to 1% per coordinate) with `λ_max(𝒬) ≤ eig_tol`.
///
/// A common power of two in `[2⁻⁴, 2⁴⁰]` seeds the search; each coordinate is then
/// bisected downwards in log scale while the others are held.
pub fn find_gammas(g: &GainSet, eig_tol: f64) -> Result<Gammas> {
    let (head, outer) = reduced_blocks(g);
    // λ_max(𝒬) ≤ τ iff λ_max(S(τ)) ≤ τ, by monotonicity of the secular function.
    let feasible = |gm: [f64; 3]| secular(&head, &outer, gm, eig_tol) <= 0.0;

    let mut current = None;
    for k in -4..=40 {
        let s = 2f64.powi(k);
        if feasible([s, s, s]) {
            current = Some([s, s, s]);
            break;
        }
    }
    let Some(mut gm) = current else {
        return Err(Error::Infeasible(format!(
            "lambda_max(Q) = {:e} > {eig_tol:e} even at gamma = {GAMMA_CAP:e}",
            iss_lambda_max(g, [GAMMA_CAP; 3])
        )));
    };

    for i in 0..3 {
        let mut hi = gm[i];
        let mut probe = gm;
        probe[i] = GAMMA_FLOOR;
        if feasible(probe) {
            gm[i] = GAMMA_FLOOR;
            continue;
        }
        let mut lo = GAMMA_FLOOR;
        while hi / lo > REFINE_RATIO {
            let mid = (lo * hi).sqrt();
            probe[i] = mid;
            if feasible(probe) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        gm[i] = hi;
    }
    Ok(Gammas { gamma1: gm[0], gamma2: gm[1], gamma3: gm[2], lambda_max: iss_lambda_max(g, gm) })
}

/// Robustness constants of the delayed controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IssGains {
    pub n: usize,
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    /// Noise-smallness constant: `|w| ≤ √α·min(V, Vⁿ)` implies the noise condition.
    pub alpha: f64,
    /// Admissible ratio bound `V/Ψ ≤ ξ`.
    pub xi: f64,
    pub chi: f64,
    /// `e^{1−χ} ξ^{χ+1}`.
    pub rho_v_coeff: f64,
    /// `6 γ₃ λ_max(P) / (ϱ₁ − ϱ₂Δ²)`.
    pub rho_delta_coeff: f64,
    /// `ϱ₁ − ϱ₂Δ²`.
    pub decrease_margin: f64,
    pub contraction: bool,
}

impl IssGains {
    pub fn rho_v(&self, s: f64) -> f64 {
        self.rho_v_coeff * s.min(s.powf(self.chi))
    }

    pub fn rho_delta(&self, s: f64) -> Result<f64> {
        if self.n < 2 {
            return Err(Error::domain("rho_delta needs n >= 2 (no mismatched channel)"));
        }
        let q = self.rho_delta_coeff * s * s;
        Ok(q.sqrt().max(q.powf(1.0 / (2.0 * (self.n as f64 - 1.0)))))
    }
}

pub fn compute_iss_constants(g: &GainSet, gammas: &Gammas, chi: f64) -> Result<IssGains> {
    if !(chi > 1.0) {
        return Err(Error::domain(format!("chi must exceed 1, got {chi}")));
    }
    let [g1, g2, g3] = gammas.as_array();
    if !(g1 > 0.0 && g2 > 0.0 && g3 > 0.0) {
        return Err(Error::domain("multipliers must be positive"));
    }
    let n = g.n();
    let c = g.decrease_margin();
    let p = g.p();
    let gr = linalg::generator(n);
    let lmin_s = linalg::lambda_min(&(p * &gr + &gr * p));
    let lmax_p = linalg::lambda_max(p);
    if !(lmin_s > 0.0) {
        return Err(Error::domain("P G + G P is not positive definite"));
    }

    let ratio = c / (4.0 * g2);
    let xi = 1.0 + ratio.sqrt().min(ratio.powf(1.0 / (2.0 * n as f64)));
    let alpha = c / (4.0 * g1) * lmin_s / lmax_p;
    let rho_v_coeff = (1.0 - chi).exp() * xi.powf(chi + 1.0);
    Ok(IssGains {
        n,
        gamma1: g1,
        gamma2: g2,
        gamma3: g3,
        alpha,
        xi,
        chi,
        rho_v_coeff,
        rho_delta_coeff: 6.0 * g3 * lmax_p / c,
        decrease_margin: c,
        contraction: rho_v_coeff < 1.0,
    })
}

/// Doubles `γ₂` (feasibility is monotone in it) until `e^{1−χ}ξ^{χ+1} < 1`.
pub fn inflate_gamma2_for_contraction(
    g: &GainSet,
    gammas: &Gammas,
    chi: f64,
    eig_tol: f64,
) -> Result<(Gammas, IssGains)> {
    let mut gm = *gammas;
    loop {
        let iss = compute_iss_constants(g, &gm, chi)?;
        if iss.contraction {
            gm.lambda_max = iss_lambda_max(g, gm.as_array());
            if gm.lambda_max > eig_tol {
                return Err(Error::Infeasible("inflated multipliers lost feasibility".into()));
            }
            return Ok((gm, iss));
        }
        if gm.gamma2 > GAMMA_CAP {
            return Err(Error::Infeasible(format!(
                "no contraction for chi = {chi} with gamma2 up to {GAMMA_CAP:e}"
            )));
        }
        gm.gamma2 *= 2.0;
    }
}

pub fn rho_v(s: f64, iss: &IssGains) -> f64 {
    iss.rho_v(s)
}

pub fn rho_delta(s: f64, iss: &IssGains) -> Result<f64> {
    iss.rho_delta(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use nalgebra::DVector;

    fn toy() -> GainSet {
        GainSet::new(DMatrix::from_element(1, 1, 1.0), DVector::from_element(1, -2.0), 1.0, 1.0, 0.5).unwrap()
    }

    fn gammas(g1: f64, g2: f64, g3: f64) -> Gammas {
        Gammas { gamma1: g1, gamma2: g2, gamma3: g3, lambda_max: f64::NAN }
    }

    #[test]
    fn block_matrix_shape_and_symmetry() {
        let g = presets::reference_gains();
        let q = iss_block_matrix(&g, [1.0, 2.0, 3.0]);
        assert_eq!(q.shape(), (13, 13));
        assert!(linalg::asymmetry(&q) < 1e-15);
        assert_eq!(q[(4 + 3, 4 + 3)], -2.0);
        assert_eq!(q[(3, 3)], -g.rho2());
    }

    #[test]
    fn reduced_lambda_max_matches_dense_at_moderate_scale() {
        for g in [toy(), presets::reference_gains()] {
            for gm in [[0.5, 2.0, 8.0], [3.0, 3.0, 3.0], [100.0, 10.0, 1000.0]] {
                let dense = linalg::lambda_max(&iss_block_matrix(&g, gm));
                let reduced = iss_lambda_max(&g, gm);
                assert!((dense - reduced).abs() <= 1e-9 * (1.0 + dense.abs()), "{dense} vs {reduced}");
            }
        }
    }

    #[test]
    fn reduced_lambda_max_stays_above_leading_block() {
        // A principal submatrix bounds λ_max from below, at any multiplier scale.
        let g = presets::reference_gains();
        let head = iss_block_matrix(&g, [0.0; 3]).view((0, 0), (4, 4)).into_owned();
        let floor = linalg::lambda_max(&head);
        assert!(floor > 0.0);
        for s in [1e3, 1e6, 1e9, GAMMA_CAP] {
            assert!(iss_lambda_max(&g, [s; 3]) >= floor);
        }
        assert!(matches!(find_gammas(&g, 1e-6), Err(Error::Infeasible(_))));
    }

    #[test]
    fn scalar_toy_has_finite_multipliers() {
        let g = toy();
        let gm = find_gammas(&g, 1e-8).unwrap();
        let lam = linalg::lambda_max(&iss_block_matrix(&g, gm.as_array()));
        assert!(lam <= 1e-8);
        assert!(gm.gamma1.is_finite() && gm.gamma2.is_finite() && gm.gamma3.is_finite());
        // Doubling every multiplier keeps feasibility.
        let lam2 = linalg::lambda_max(&iss_block_matrix(&g, gm.as_array().map(|v| 2.0 * v)));
        assert!(lam2 <= 1e-8);
        // Halving one coordinate (above the floor) breaks feasibility.
        for i in 0..3 {
            let mut h = gm.as_array();
            if h[i] > GAMMA_FLOOR {
                h[i] *= 0.5;
                assert!(iss_lambda_max(&g, h) > 1e-8, "coordinate {i}");
            }
        }
    }

    #[test]
    fn xi_and_contraction_arithmetic() {
        // c = ϱ₁ − ϱ₂Δ² = 0.5, n = 3.
        let g = presets::reference_gains().with_rho2(0.5).unwrap();
        assert!((g.decrease_margin() - 0.5).abs() < 1e-15);
        let iss = compute_iss_constants(&g, &gammas(1.0, 2.0, 1.0), 1.1).unwrap();
        assert!((iss.xi - 1.25).abs() < 1e-14);
        assert!((iss.rho_v_coeff - (-0.1f64).exp() * 1.25f64.powf(2.1)).abs() < 1e-14);
        assert!((iss.rho_v_coeff - 1.446).abs() < 1e-3);
        assert!(!iss.contraction);

        let iss = compute_iss_constants(&g, &gammas(1.0, 200.0, 1.0), 1.1).unwrap();
        assert!((iss.xi - 1.025).abs() < 1e-14);
        assert!((iss.rho_v_coeff - 0.953).abs() < 1e-3);
        assert!(iss.contraction);
        assert!(matches!(compute_iss_constants(&g, &gammas(1.0, 2.0, 1.0), 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn alpha_against_eigen_oracle() {
        let g = presets::reference_gains().with_rho2(0.5).unwrap();
        let iss = compute_iss_constants(&g, &gammas(0.5, 2.0, 1.0), 1.1).unwrap();
        let p = g.p();
        let gr = linalg::generator(3);
        let s = p * &gr + &gr * p;
        let e = nalgebra::SymmetricEigen::new(s).eigenvalues;
        let pe = nalgebra::SymmetricEigen::new(p.clone()).eigenvalues;
        let expect = 0.5 / 2.0 * e.min() / pe.max();
        assert!(iss.alpha > 0.0);
        assert!((iss.alpha - expect).abs() <= 1e-12 * expect);
    }

    #[test]
    fn rho_v_examples() {
        let mut iss = compute_iss_constants(&toy(), &gammas(1.0, 1.0, 1.0), 1.1).unwrap();
        assert_eq!(iss.rho_v(0.0), 0.0);
        assert!((iss.rho_v(1.0) - iss.rho_v_coeff).abs() < 1e-15);
        iss.rho_v_coeff = 0.953;
        assert!((iss.rho_v(4.0) - 3.812).abs() < 1e-12);
    }

    #[test]
    fn rho_delta_examples() {
        let g = presets::reference_gains().with_rho2(0.5).unwrap();
        let mut iss = compute_iss_constants(&g, &gammas(1.0, 1.0, 1.0), 1.1).unwrap();
        assert_eq!(iss.rho_delta(0.0).unwrap(), 0.0);
        iss.n = 2;
        iss.rho_delta_coeff = 1.0;
        for s in [0.1, 0.5, 2.0] {
            assert!((iss.rho_delta(s).unwrap() - s).abs() < 1e-14);
        }
        iss.n = 3;
        iss.rho_delta_coeff = 4.0;
        assert!((iss.rho_delta(0.5).unwrap() - 1.0).abs() < 1e-14);
        iss.n = 1;
        assert!(matches!(iss.rho_delta(0.5), Err(Error::Domain(_))));
    }

    #[test]
    fn comparison_functions_monotone() {
        let g = presets::reference_gains().with_rho2(0.5).unwrap();
        let iss = compute_iss_constants(&g, &gammas(1.0, 1e4, 3.0), 1.1).unwrap();
        assert!(iss.contraction);
        let mut prev = (0.0, 0.0);
        for k in -60..=60 {
            let s = 10f64.powf(k as f64 / 10.0);
            let (v, d) = (iss.rho_v(s), iss.rho_delta(s).unwrap());
            assert!(v < s);
            assert!(v >= prev.0 && d >= prev.1);
            prev = (v, d);
        }
    }
}
