//! Gain certificates: the LMI data `(X, Y, ϱ₁, ϱ₂, Δ)`, their verification,
//! the ISS multipliers and robustness constants, and a best-effort synthesizer.

mod iss;
mod lmi;
mod synth;

pub use iss::{
    compute_iss_constants, find_gammas, inflate_gamma2_for_contraction, iss_block_matrix, iss_lambda_max, rho_delta,
    rho_v, Gammas, IssGains, GAMMA_CAP,
};
pub use lmi::{rho2_grid, scan_rho2, verify_lmi, verify_lmi_data, BlockCheck, LmiReport, Rho2Scan, DEFAULT_EIG_TOL};
pub use synth::{synthesize_gains, synthesize_gains_with, SynthesisSettings};

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::ilf::ImplicitLyapunov;
use crate::linalg;

const INVERSE_TOL: f64 = 1e-8;

/// LMI certificate data and the derived feedback `K = Y X⁻¹`, `P = X⁻¹`.
#[derive(Debug, Clone)]
pub struct GainSet {
    n: usize,
    x: DMatrix<f64>,
    y_row: DVector<f64>,
    p: DMatrix<f64>,
    k: DVector<f64>,
    rho1: f64,
    rho2: f64,
    delta: f64,
    ilf: ImplicitLyapunov,
}

impl GainSet {
    /// Builds a gain set from the LMI variables; `P` and `K` are derived.
    pub fn new(x: DMatrix<f64>, y_row: DVector<f64>, rho1: f64, rho2: f64, delta: f64) -> Result<Self> {
        let n = x.nrows();
        check_shapes(n, &x, &y_row)?;
        if linalg::asymmetry(&x) > 1e-9 {
            return Err(Error::domain("X must be symmetric"));
        }
        let x = linalg::symmetrize(&x);
        let p = linalg::symmetrize(&linalg::inverse(&x)?);
        let k = p.transpose() * &y_row;
        Self::assemble(n, x, y_row, p, k, rho1, rho2, delta)
    }

    /// Builds a gain set from published feedback data `(K, P)`; `X = P⁻¹`, `Y = K X`.
    pub fn from_feedback(k: DVector<f64>, p: DMatrix<f64>, rho1: f64, rho2: f64, delta: f64) -> Result<Self> {
        let n = p.nrows();
        check_shapes(n, &p, &k)?;
        if linalg::asymmetry(&p) > 1e-9 {
            return Err(Error::domain("P must be symmetric"));
        }
        let p = linalg::symmetrize(&p);
        let x = linalg::symmetrize(&linalg::inverse(&p)?);
        let y_row = x.transpose() * &k;
        Self::assemble(n, x, y_row, p, k, rho1, rho2, delta)
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        n: usize,
        x: DMatrix<f64>,
        y_row: DVector<f64>,
        p: DMatrix<f64>,
        k: DVector<f64>,
        rho1: f64,
        rho2: f64,
        delta: f64,
    ) -> Result<Self> {
        check_parameters(rho1, rho2, delta)?;
        let ident_err = (&p * &x - DMatrix::identity(n, n)).abs().max();
        if ident_err > INVERSE_TOL * (1.0 + p.abs().max() * x.abs().max()) {
            return Err(Error::domain(format!("P X differs from identity by {ident_err:e}")));
        }
        let ilf = ImplicitLyapunov::new(&p)?;
        Ok(Self { n, x, y_row, p, k, rho1, rho2, delta, ilf })
    }

    /// Same certificate data with a different `ϱ₂`.
    pub fn with_rho2(&self, rho2: f64) -> Result<Self> {
        check_parameters(self.rho1, rho2, self.delta)?;
        Ok(Self { rho2, ..self.clone() })
    }

    pub fn n(&self) -> usize {
        self.n
    }
    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }
    pub fn y_row(&self) -> &DVector<f64> {
        &self.y_row
    }
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn k(&self) -> &DVector<f64> {
        &self.k
    }
    pub fn rho1(&self) -> f64 {
        self.rho1
    }
    pub fn rho2(&self) -> f64 {
        self.rho2
    }
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `ϱ₁ − ϱ₂Δ²`, the certified decrease rate of the ILF.
    pub fn decrease_margin(&self) -> f64 {
        self.rho1 - self.rho2 * self.delta * self.delta
    }

    pub fn ilf(&self) -> &ImplicitLyapunov {
        &self.ilf
    }

    /// JSON document with row-major matrices and 17 significant digits.
    ///
    /// Both the LMI variables `X, Y` and the feedback data `K, P` are written so that
    /// a reload reproduces every entry bit for bit.
    pub fn to_json(&self) -> String {
        let matrix = |m: &DMatrix<f64>| {
            let rows: Vec<String> =
                (0..self.n).map(|i| format!("[{}]", join_numbers((0..self.n).map(|j| m[(i, j)])))).collect();
            rows.join(", ")
        };
        format!(
            "{{\n  \"n\": {},\n  \"X\": [{}],\n  \"Y\": [[{}]],\n  \"K\": [[{}]],\n  \"P\": [{}],\n  \"rho1\": {},\n  \"rho2\": {},\n  \"Delta\": {}\n}}\n",
            self.n,
            matrix(&self.x),
            join_numbers(self.y_row.iter().copied()),
            join_numbers(self.k.iter().copied()),
            matrix(&self.p),
            fmt17(self.rho1),
            fmt17(self.rho2),
            fmt17(self.delta)
        )
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: GainSetDocument =
            serde_json::from_str(text).map_err(|e| Error::config(format!("gain file: {e}")))?;
        doc.into_gain_set()
    }
}

fn check_shapes(n: usize, m: &DMatrix<f64>, v: &DVector<f64>) -> Result<()> {
    if n == 0 || !linalg::is_square(m, n) {
        return Err(Error::structural(format!("expected a square matrix, got {:?}", m.shape())));
    }
    if v.len() != n {
        return Err(Error::structural(format!("row vector of length {} for n = {n}", v.len())));
    }
    if m.iter().chain(v.iter()).any(|e| !e.is_finite()) {
        return Err(Error::domain("gain data has non-finite entries"));
    }
    Ok(())
}

fn check_parameters(rho1: f64, rho2: f64, delta: f64) -> Result<()> {
    if !(delta >= 0.0) || !(rho2 > 0.0) || !(rho1 > 0.0) {
        return Err(Error::domain(format!(
            "require rho1 > 0, rho2 > 0, Delta >= 0 (got {rho1}, {rho2}, {delta})"
        )));
    }
    if !(rho1 > rho2 * delta * delta) {
        return Err(Error::domain(format!(
            "require rho1 > rho2 * Delta^2 (got {rho1} <= {})",
            rho2 * delta * delta
        )));
    }
    Ok(())
}

/// 17 significant decimal digits.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

fn join_numbers(values: impl Iterator<Item = f64>) -> String {
    values.map(fmt17).collect::<Vec<_>>().join(", ")
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum RowOrMatrix {
    Flat(Vec<f64>),
    Nested(Vec<Vec<f64>>),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GainSetDocument {
    n: usize,
    #[serde(rename = "X")]
    x: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Y")]
    y: Option<RowOrMatrix>,
    #[serde(rename = "K")]
    k: Option<RowOrMatrix>,
    #[serde(rename = "P")]
    p: Option<Vec<Vec<f64>>>,
    rho1: f64,
    rho2: f64,
    #[serde(rename = "Delta")]
    delta: f64,
}

fn matrix_from_rows(name: &str, n: usize, rows: Vec<Vec<f64>>) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::structural(format!("{name} must be {n}x{n}")));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.into_iter().flatten()))
}

fn row_vector(name: &str, n: usize, row: RowOrMatrix) -> Result<DVector<f64>> {
    let v = match row {
        RowOrMatrix::Flat(v) => v,
        RowOrMatrix::Nested(rows) => {
            if rows.len() != 1 {
                return Err(Error::structural(format!("{name} must be a single row")));
            }
            rows.into_iter().next().unwrap_or_default()
        }
    };
    if v.len() != n {
        return Err(Error::structural(format!("{name} must have {n} entries")));
    }
    Ok(DVector::from_vec(v))
}

impl GainSetDocument {
    /// Accepts `(X, Y)`, `(K, P)` or all four; with all four the pairs must agree.
    fn into_gain_set(self) -> Result<GainSet> {
        let n = self.n;
        let xy = match (self.x, self.y) {
            (Some(x), Some(y)) => Some((matrix_from_rows("X", n, x)?, row_vector("Y", n, y)?)),
            (None, None) => None,
            _ => return Err(Error::structural("X and Y must be given together")),
        };
        let kp = match (self.k, self.p) {
            (Some(k), Some(p)) => Some((row_vector("K", n, k)?, matrix_from_rows("P", n, p)?)),
            (None, None) => None,
            _ => return Err(Error::structural("K and P must be given together")),
        };
        match (xy, kp) {
            (Some((x, y)), None) => GainSet::new(x, y, self.rho1, self.rho2, self.delta),
            (None, Some((k, p))) => GainSet::from_feedback(k, p, self.rho1, self.rho2, self.delta),
            (Some((x, y)), Some((k, p))) => {
                check_shapes(n, &x, &y)?;
                check_shapes(n, &p, &k)?;
                let k_err = (p.transpose() * &y - &k).abs().max();
                if k_err > INVERSE_TOL * (1.0 + k.abs().max()) {
                    return Err(Error::domain(format!("K differs from P Y by {k_err:e}")));
                }
                GainSet::assemble(n, x, y, p, k, self.rho1, self.rho2, self.delta)
            }
            (None, None) => Err(Error::structural("gain file needs X and Y, or K and P")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn derived_feedback_consistent() {
        let g = presets::reference_gains();
        let n = g.n();
        let err = (g.p() * g.x() - DMatrix::identity(n, n)).abs().max();
        assert!(err < 1e-8);
        let k = g.p().transpose() * g.y_row();
        assert!((k - g.k()).abs().max() < 1e-8 * 310.0);
    }

    #[test]
    fn json_round_trip() {
        let g = presets::reference_gains();
        let text = g.to_json();
        let back = GainSet::from_json(&text).unwrap();
        assert_eq!(back.x(), g.x());
        assert_eq!(back.k(), g.k());
        assert_eq!(back.p(), g.p());
        assert_eq!(back.to_json(), text);
        assert_eq!(back.rho2(), g.rho2());
        assert!(text.contains("\"Delta\""));
        let flat = r#"{"n":1,"X":[[1.0]],"Y":[-2.0],"rho1":1,"rho2":1,"Delta":0.5}"#;
        let g1 = GainSet::from_json(flat).unwrap();
        assert_eq!(g1.k()[0], -2.0);
        let feedback = r#"{"n":1,"K":[-2.0],"P":[[1.0]],"rho1":1,"rho2":1,"Delta":0.5}"#;
        assert_eq!(GainSet::from_json(feedback).unwrap().y_row()[0], -2.0);
        let mismatch = r#"{"n":1,"X":[[1.0]],"Y":[-2.0],"K":[-3.0],"P":[[1.0]],"rho1":1,"rho2":1,"Delta":0.5}"#;
        assert!(GainSet::from_json(mismatch).is_err());
        assert!(GainSet::from_json(r#"{"n":1,"X":[[1.0]],"rho1":1,"rho2":1,"Delta":0.5}"#).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        let x = DMatrix::from_element(1, 1, 1.0);
        let y = DVector::from_element(1, -2.0);
        assert!(GainSet::new(x.clone(), y.clone(), 1.0, 2.0, 1.0).is_err());
        assert!(GainSet::new(x.clone(), y.clone(), 1.0, 0.0, 1.0).is_err());
        assert!(GainSet::new(x.clone(), DVector::zeros(2), 1.0, 0.5, 1.0).is_err());
        assert!(GainSet::from_json(r#"{"n":2,"X":[[1.0]],"Y":[1],"rho1":1,"rho2":1,"Delta":0}"#).is_err());
        assert!(GainSet::new(x, y, 1.0, 0.5, 1.0).is_ok());
    }
}
