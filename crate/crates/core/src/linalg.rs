//! Dense complex linear algebra on top of nalgebra's pivoted LU.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Determinant by partial-pivot LU. The empty matrix has determinant 1.
pub fn det(m: &CMatrix) -> Complex64 {
    if m.nrows() == 0 {
        return Complex64::new(1.0, 0.0);
    }
    m.clone().lu().determinant()
}

/// Solve `m x = b`, refusing numerically singular systems.
pub fn solve(m: &CMatrix, b: &CVector) -> Result<CVector> {
    if m.nrows() == 0 {
        return Ok(b.clone());
    }
    let lu = m.clone().lu();
    let u = lu.u();
    let diag: Vec<f64> = (0..u.nrows()).map(|i| u[(i, i)].norm()).collect();
    let big = diag.iter().cloned().fold(0.0, f64::max);
    let small = diag.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(small > 1e-14 * big) {
        return Err(Error::LinearSolveFailure(format!(
            "pivot ratio {:e} indicates a singular system",
            small / big
        )));
    }
    lu.solve(b)
        .ok_or_else(|| Error::LinearSolveFailure("LU solve returned no solution".into()))
}

/// `I − m` for a square matrix.
pub fn identity_minus(m: &CMatrix) -> CMatrix {
    let n = m.nrows();
    CMatrix::identity(n, n) - m
}
