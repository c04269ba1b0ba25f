//! Least squares and M-estimation baselines.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{preliminary_scale, KernelKind, PsiKernel, ScaleEstimate};

/// Relative pivot tolerance for rank detection in the QR factorization.
pub const RANK_TOLERANCE: f64 = 1e-10;
/// IRLS iteration cap.
pub const M_MAX_ITERATIONS: usize = 200;
const M_STEP_TOLERANCE: f64 = 1e-10;
const M_EQUATION_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegressionMethod {
    #[serde(rename = "ols")]
    Ols,
    #[serde(rename = "m-huber")]
    MHuber,
    #[serde(rename = "m-tukey")]
    MTukey,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub beta: DVector<f64>,
    pub residuals: DVector<f64>,
    pub sigma: ScaleEstimate,
    pub method: RegressionMethod,
    pub iterations: usize,
    pub converged: bool,
}

/// Least squares solve of X·β ≈ y by Householder QR.
pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let k = x.ncols();
    let col_scale = (0..k).map(|j| x.column(j).norm()).fold(0.0, f64::max);
    let qr = x.clone().qr();
    let r = qr.r();
    for j in 0..k {
        let pivot = r[(j, j)].abs();
        if !(pivot > RANK_TOLERANCE * col_scale) {
            return Err(Error::RankDeficient { column: j, pivot });
        }
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
        .ok_or(Error::RankDeficient { column: k - 1, pivot: 0.0 })
}

/// Ordinary least squares; σ is the preliminary (MAD) scale of its residuals.
pub fn ols_fit(data: &Dataset) -> Result<RegressionFit> {
    let beta = least_squares(data.x(), data.y())?;
    let residuals = data.residuals(&beta);
    let sigma = preliminary_scale(residuals.as_slice())?;
    Ok(RegressionFit { beta, residuals, sigma, method: RegressionMethod::Ols, iterations: 1, converged: true })
}

/// Maximum-likelihood variance (1/n)·Σ r_i².
pub fn ml_variance(fit: &RegressionFit) -> f64 {
    let n = fit.residuals.len();
    if n == 0 {
        return 0.0;
    }
    fit.residuals.norm_squared() / n as f64
}

/// Max-norm of Σ ψ(r_i/σ)·X_i.
pub fn m_equation_norm(data: &Dataset, beta: &DVector<f64>, kernel: &PsiKernel, sigma: f64) -> f64 {
    let r = data.residuals(beta);
    let psi = r.map(|ri| kernel.psi(ri / sigma));
    (data.x().transpose() * psi).amax()
}

/// M-estimate of β with σ held fixed, solved by iteratively reweighted least
/// squares. Without a supplied scale, σ is the MAD of the OLS residuals.
/// Tukey is started from the Huber fit. A fit that does not converge within
/// [`M_MAX_ITERATIONS`] is returned with `converged = false`.
pub fn m_fit(data: &Dataset, kernel: &PsiKernel, scale: Option<ScaleEstimate>) -> Result<RegressionFit> {
    let method = match kernel.kind() {
        KernelKind::Huber => RegressionMethod::MHuber,
        KernelKind::Tukey => RegressionMethod::MTukey,
        KernelKind::Identity => {
            return Err(Error::InvalidInput("m_fit requires a Huber or Tukey kernel".into()));
        }
    };
    let ols = ols_fit(data)?;
    let sigma = scale.unwrap_or(ols.sigma);
    let (start, start_iterations) = match kernel.kind() {
        KernelKind::Tukey => {
            let huber = m_fit(data, &PsiKernel::huber(), Some(sigma))?;
            (huber.beta, huber.iterations)
        }
        _ => (ols.beta, 0),
    };
    let (beta, iterations, converged) = irls(data, kernel, sigma.sigma(), start)?;
    let residuals = data.residuals(&beta);
    Ok(RegressionFit {
        beta,
        residuals,
        sigma,
        method,
        iterations: iterations.max(1) + start_iterations,
        converged,
    })
}

fn irls(data: &Dataset, kernel: &PsiKernel, sigma: f64, start: DVector<f64>) -> Result<(DVector<f64>, usize, bool)> {
    let x = data.x();
    let y = data.y();
    let mut beta = start;
    if m_equation_norm(data, &beta, kernel, sigma) <= M_EQUATION_TOLERANCE {
        return Ok((beta, 0, true));
    }
    for it in 1..=M_MAX_ITERATIONS {
        let r = data.residuals(&beta);
        let sw = r.map(|ri| kernel.weight(ri / sigma).sqrt());
        let mut xw = x.clone();
        for (mut row, w) in xw.row_iter_mut().zip(sw.iter()) {
            row *= *w;
        }
        let yw = y.component_mul(&sw);
        let next = least_squares(&xw, &yw)?;
        let step = (&next - &beta).amax();
        let size = next.amax().max(1.0);
        beta = next;
        if step <= M_STEP_TOLERANCE * size
            || m_equation_norm(data, &beta, kernel, sigma) <= M_EQUATION_TOLERANCE
        {
            return Ok((beta, it, true));
        }
    }
    Ok((beta, M_MAX_ITERATIONS, false))
}
