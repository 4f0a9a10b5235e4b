//! Small dense helpers on top of nalgebra: symmetric spectra and the
//! integrator-chain matrices.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let sym = symmetrize(m);
    let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)[0]
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    *sym_eigenvalues(m).last().expect("non-empty matrix")
}

/// Largest eigenvalue together with a unit eigenvector.
pub fn top_eigenpair(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    let eig = SymmetricEigen::new(symmetrize(m));
    let (idx, val) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, v)| (i, *v))
        .expect("non-empty matrix");
    (val, eig.eigenvectors.column(idx).into_owned())
}

/// Spectral norm of a symmetric matrix.
pub fn sym_norm2(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

pub fn is_square(m: &DMatrix<f64>, n: usize) -> bool {
    m.nrows() == n && m.ncols() == n
}

/// Relative asymmetry `max|m - m^T| / (1 + max|m|)`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let diff = (m - m.transpose()).abs().max();
    diff / (1.0 + m.abs().max())
}

pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    m.clone()
        .try_inverse()
        .ok_or_else(|| Error::domain("matrix is singular"))
}

/// Upper shift matrix `A` of the integrator chain.
pub fn shift_matrix(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// Input direction `b = e_n`.
pub fn input_vector(n: usize) -> DVector<f64> {
    let mut b = DVector::zeros(n);
    b[n - 1] = 1.0;
    b
}

/// `G_r = diag(n, n-1, ..., 1)`.
pub fn generator(n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| if i == j { (n - i) as f64 } else { 0.0 })
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Assembles a symmetric matrix from a square grid of blocks (row-major).
pub fn block_matrix(blocks: &[Vec<DMatrix<f64>>]) -> DMatrix<f64> {
    let row_sizes: Vec<usize> = blocks.iter().map(|row| row[0].nrows()).collect();
    let col_sizes: Vec<usize> = blocks[0].iter().map(|b| b.ncols()).collect();
    let total_r: usize = row_sizes.iter().sum();
    let total_c: usize = col_sizes.iter().sum();
    let mut out = DMatrix::zeros(total_r, total_c);
    let mut r0 = 0;
    for (bi, row) in blocks.iter().enumerate() {
        let mut c0 = 0;
        for (bj, blk) in row.iter().enumerate() {
            debug_assert_eq!(blk.nrows(), row_sizes[bi]);
            debug_assert_eq!(blk.ncols(), col_sizes[bj]);
            out.view_mut((r0, c0), (blk.nrows(), blk.ncols())).copy_from(blk);
            c0 += col_sizes[bj];
        }
        r0 += row_sizes[bi];
    }
    out
}
