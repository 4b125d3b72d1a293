//! Cluster-robust and heteroskedasticity-robust sandwich covariances.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ClusteredCovariance {
    pub covariance: DMatrix<f64>,
    pub std_errors: Vec<f64>,
    pub clusters: usize,
    /// Degrees of freedom for t tests: clusters − 1.
    pub dof: usize,
}

/// `(XᵀX)⁻¹ (Σ_g X_gᵀ u_g u_gᵀ X_g) (XᵀX)⁻¹ · G/(G−1) · (N−1)/(N−K)`.
///
/// `k` is the parameter count used in the small-sample factor; it can
/// exceed `x.ncols()` when fixed effects were partialled out.
pub fn clustered_covariance(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    xtx_inv: &DMatrix<f64>,
    clusters: &[usize],
    k: usize,
) -> Result<ClusteredCovariance> {
    let (n, p) = x.shape();
    assert_eq!(residuals.len(), n);
    assert_eq!(clusters.len(), n);
    let g = clusters.iter().max().map_or(0, |m| m + 1);
    let mut scores = DMatrix::<f64>::zeros(g, p);
    for (i, &c) in clusters.iter().enumerate() {
        let u = residuals[i];
        for j in 0..p {
            scores[(c, j)] += x[(i, j)] * u;
        }
    }
    let used = {
        let mut seen = vec![false; g];
        clusters.iter().for_each(|&c| seen[c] = true);
        seen.iter().filter(|s| **s).count()
    };
    if used < 2 {
        return Err(Error::TooFewClusters(used));
    }
    if n <= k {
        return Err(Error::Domain(format!(
            "{n} observations cannot support {k} parameters"
        )));
    }
    let meat = scores.transpose() * &scores;
    let gf = used as f64;
    let scale = gf / (gf - 1.0) * (n as f64 - 1.0) / (n as f64 - k as f64);
    let covariance = xtx_inv * meat * xtx_inv * scale;
    let std_errors = (0..p).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    Ok(ClusteredCovariance {
        covariance,
        std_errors,
        clusters: used,
        dof: used - 1,
    })
}

/// Cluster-robust standard errors with `K = x.ncols()`.
pub fn clustered_se(
    x: &DMatrix<f64>,
    residuals: &DVector<f64>,
    clusters: &[usize],
) -> Result<Vec<f64>> {
    let xtx_inv = (x.transpose() * x)
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign {
            columns: vec!["X".into()],
        })?;
    Ok(clustered_covariance(x, residuals, &xtx_inv, clusters, x.ncols())?.std_errors)
}

/// HC1 heteroskedasticity-robust standard errors.
pub fn robust_se(x: &DMatrix<f64>, residuals: &DVector<f64>) -> Result<Vec<f64>> {
    let (n, p) = x.shape();
    if n <= p {
        return Err(Error::Domain(format!(
            "{n} observations cannot support {p} parameters"
        )));
    }
    let xtx_inv = (x.transpose() * x)
        .try_inverse()
        .ok_or_else(|| Error::SingularDesign {
            columns: vec!["X".into()],
        })?;
    let mut meat = DMatrix::<f64>::zeros(p, p);
    for i in 0..n {
        let row = x.row(i).transpose();
        meat += &row * row.transpose() * residuals[i].powi(2);
    }
    let cov = &xtx_inv * meat * &xtx_inv * (n as f64 / (n - p) as f64);
    Ok((0..p).map(|j| cov[(j, j)].max(0.0).sqrt()).collect())
}
