//! Small dense complex helpers on top of `nalgebra`.

use alloc::format;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::{Error, Result};

/// Dense complex matrix used for channels, propagation and effective channels.
pub type CMatrix = DMatrix<Complex64>;

/// `diag(d) * m`.
pub fn scale_rows(m: &CMatrix, d: &[Complex64]) -> CMatrix {
    debug_assert_eq!(m.nrows(), d.len());
    let mut out = m.clone();
    for (r, s) in d.iter().enumerate() {
        for c in 0..out.ncols() {
            out[(r, c)] *= s;
        }
    }
    out
}

/// `m * diag(d)`.
pub fn scale_cols(m: &CMatrix, d: &[Complex64]) -> CMatrix {
    debug_assert_eq!(m.ncols(), d.len());
    let mut out = m.clone();
    for (c, s) in d.iter().enumerate() {
        for r in 0..out.nrows() {
            out[(r, c)] *= s;
        }
    }
    out
}

pub fn select_rows(m: &CMatrix, rows: &[usize]) -> CMatrix {
    CMatrix::from_fn(rows.len(), m.ncols(), |r, c| m[(rows[r], c)])
}

pub fn select_cols(m: &CMatrix, cols: &[usize]) -> CMatrix {
    CMatrix::from_fn(m.nrows(), cols.len(), |r, c| m[(r, cols[c])])
}

pub fn frobenius_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `a * b` with a dimension check instead of a panic.
pub fn checked_mul(a: &CMatrix, b: &CMatrix) -> Result<CMatrix> {
    if a.ncols() != b.nrows() {
        return Err(Error::Dimension(format!(
            "{}x{} times {}x{}",
            a.nrows(),
            a.ncols(),
            b.nrows(),
            b.ncols()
        )));
    }
    Ok(a * b)
}

/// Unit-modulus phasors `e^{j theta}`.
pub fn phasors(theta: &[f64]) -> alloc::vec::Vec<Complex64> {
    theta
        .iter()
        .map(|&t| Complex64::new(libm::cos(t), libm::sin(t)))
        .collect()
}

/// Phase of `z` in `[0, 2pi)`.
pub fn wrap_phase(z: Complex64) -> f64 {
    let a = libm::atan2(z.im, z.re);
    if a < 0.0 {
        a + 2.0 * core::f64::consts::PI
    } else {
        a
    }
}
