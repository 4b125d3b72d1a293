//! Least squares through a Householder QR factorization.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// A column whose QR pivot falls below this share of its own norm is treated
/// as linearly dependent on the columns before it.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct OlsFit {
    pub coefficients: DVector<f64>,
    pub residuals: DVector<f64>,
    /// `(XᵀX)⁻¹`, formed from the triangular factor.
    pub xtx_inv: DMatrix<f64>,
}

/// Minimize `‖y − Xβ‖²`. `names` labels the columns of `x` in errors.
pub fn ols(y: &DVector<f64>, x: &DMatrix<f64>, names: &[String]) -> Result<OlsFit> {
    let (n, k) = x.shape();
    assert_eq!(y.len(), n, "y and X disagree on the number of rows");
    assert_eq!(names.len(), k, "one name per column");
    let name = |j: usize| names[j].clone();
    if k == 0 {
        return Err(Error::Domain("design has no columns".into()));
    }
    if n < k {
        return Err(Error::SingularDesign {
            columns: (0..k).map(name).collect(),
        });
    }

    let qr = x.clone().qr();
    let r = qr.r();
    let deficient: Vec<String> = (0..k)
        .filter(|&j| {
            let norm = x.column(j).norm();
            norm == 0.0 || !norm.is_finite() || r[(j, j)].abs() <= RANK_TOLERANCE * norm
        })
        .map(name)
        .collect();
    if !deficient.is_empty() {
        return Err(Error::SingularDesign { columns: deficient });
    }

    let qty = qr.q().transpose() * y;
    let coefficients = r
        .solve_upper_triangular(&qty)
        .ok_or_else(|| Error::SingularDesign {
            columns: (0..k).map(name).collect(),
        })?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(k, k))
        .ok_or_else(|| Error::SingularDesign {
            columns: (0..k).map(name).collect(),
        })?;
    let xtx_inv = &r_inv * r_inv.transpose();
    let residuals = y - x * &coefficients;
    Ok(OlsFit {
        coefficients,
        residuals,
        xtx_inv,
    })
}
