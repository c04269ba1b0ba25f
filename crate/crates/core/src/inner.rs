//! Inner empirical likelihood problem: for a fixed β, profile out the
//! observation weights.
//!
//! With estimating functions z_i(β) the weights are
//! p_i = 1 / (n (1 + λᵀz_i)), where λ minimizes the convex dual
//! −Σ log(1 + λᵀz_i) over the open region where every 1 + λᵀz_i > 0. The
//! multiplier attached to Σ p_i = 1 is eliminated analytically (it equals n).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::kernels::{PsiKernel, ScaleEstimate};

pub const INNER_MAX_ITERATIONS: usize = 100;
pub const INNER_GRADIENT_TOLERANCE: f64 = 1e-9;
const MASS_TOLERANCE: f64 = 1e-10;
const STALL_LIMIT: usize = 10;
const MAX_HALVINGS: usize = 60;
const HESSIAN_RIDGE: f64 = 1e-12;

/// Which moment conditions the weights must satisfy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConstraintMode {
    /// Σ p_i X_i (Y_i − X_iᵀβ) = 0
    Classical,
    /// Σ p_i X_i ψ((Y_i − X_iᵀβ)/σ) = 0
    Robust { kernel: PsiKernel, scale: ScaleEstimate },
    /// Classical rows plus Σ p_i ((Y_i − X_iᵀβ)² − σ²) = 0
    ClassicalWithVariance { sigma: f64 },
}

impl ConstraintMode {
    pub fn variance(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!("variance-mode sigma must be positive, got {sigma}")));
        }
        Ok(Self::ClassicalWithVariance { sigma })
    }

    /// Number of constraint components for a k-parameter model.
    pub fn dimension(&self, k: usize) -> usize {
        match self {
            ConstraintMode::ClassicalWithVariance { .. } => k + 1,
            _ => k,
        }
    }

    pub fn label(&self) -> String {
        match self {
            ConstraintMode::Classical => "el".into(),
            ConstraintMode::Robust { kernel, .. } => format!("el-{}", kernel.kind()),
            ConstraintMode::ClassicalWithVariance { .. } => "el-variance".into(),
        }
    }
}

/// Optimal dual multiplier and the weights it induces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub lambda: Vec<f64>,
    pub p: Vec<f64>,
    pub log_el: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl InnerSolution {
    /// Max-norm of Σ p_i z_i, the constraint residual.
    pub fn constraint_residual(&self, z: &DMatrix<f64>) -> f64 {
        (z.transpose() * DVector::from_column_slice(&self.p)).amax()
    }
}

/// Estimating-function matrix, one row z_i(β) per observation.
pub fn build_z(data: &Dataset, beta: &DVector<f64>, mode: &ConstraintMode) -> DMatrix<f64> {
    let x = data.x();
    let (n, k) = x.shape();
    let mut r = data.residuals(beta);
    // residuals within rounding error of the fitted value are exact zeros
    for i in 0..n {
        let magnitude = data.y()[i].abs() + x.row(i).iter().zip(beta.iter()).map(|(a, b)| (a * b).abs()).sum::<f64>();
        if r[i].abs() <= 16.0 * (k + 1) as f64 * f64::EPSILON * magnitude {
            r[i] = 0.0;
        }
    }
    let mut z = DMatrix::zeros(n, mode.dimension(k));
    for i in 0..n {
        let factor = match mode {
            ConstraintMode::Classical | ConstraintMode::ClassicalWithVariance { .. } => r[i],
            ConstraintMode::Robust { kernel, scale } => kernel.psi(r[i] / scale.sigma()),
        };
        for j in 0..k {
            z[(i, j)] = x[(i, j)] * factor;
        }
        if let ConstraintMode::ClassicalWithVariance { sigma } = mode {
            z[(i, k)] = r[i] * r[i] - sigma * sigma;
        }
    }
    z
}

/// −Σ log(1 + λᵀz_i), or `None` outside the feasible region.
pub fn dual_objective(z: &DMatrix<f64>, lambda: &DVector<f64>) -> Option<f64> {
    let a = z * lambda;
    let mut f = 0.0;
    for ai in a.iter() {
        let arg = 1.0 + ai;
        if !(arg > 0.0) {
            return None;
        }
        f -= arg.ln();
    }
    Some(f)
}

struct Point {
    lambda: DVector<f64>,
    denom: DVector<f64>,
    value: f64,
    gradient: DVector<f64>,
}

impl Point {
    fn at(z: &DMatrix<f64>, lambda: DVector<f64>) -> Option<Self> {
        let denom = (z * &lambda).add_scalar(1.0);
        if denom.iter().any(|d| !(*d > 0.0)) {
            return None;
        }
        let value = -denom.iter().map(|d| d.ln()).sum::<f64>();
        let inv = denom.map(|d| 1.0 / d);
        let gradient = -(z.transpose() * inv);
        Some(Self { lambda, denom, value, gradient })
    }

    fn hessian(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let mut scaled = z.clone();
        for (mut row, d) in scaled.row_iter_mut().zip(self.denom.iter()) {
            row /= *d;
        }
        scaled.transpose() * scaled
    }

    /// Σ p_i − 1 = λᵀg / n at any feasible λ.
    fn mass_defect(&self, n: usize) -> f64 {
        self.lambda.dot(&self.gradient) / n as f64
    }
}

fn newton_direction(hessian: DMatrix<f64>, gradient: &DVector<f64>) -> DVector<f64> {
    let m = hessian.nrows();
    let mut ridge = HESSIAN_RIDGE;
    let mut h = hessian;
    loop {
        if let Some(chol) = h.clone().cholesky() {
            return -chol.solve(gradient);
        }
        if ridge > 1e6 {
            return -gradient.clone();
        }
        h += DMatrix::identity(m, m) * ridge;
        ridge *= 100.0;
    }
}

/// Minimizes the dual −Σ log(1 + λᵀz_i) by damped Newton from λ = 0.
///
/// Steps are halved until they keep every 1 + λᵀz_i > 0 and decrease the
/// objective. Returns [`Error::HullViolation`] when the iterates run off to
/// infinity, which happens exactly when zero is not interior to the convex
/// hull of the rows.
pub fn solve_lambda(z: &DMatrix<f64>) -> Result<InnerSolution> {
    let (n, m) = z.shape();
    if n < m || n == 0 {
        return Err(Error::InvalidInput(format!("need at least {m} rows, got {n}")));
    }
    if z.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("estimating functions contain non-finite values".into()));
    }
    let mut point = Point::at(z, DVector::zeros(m)).expect("λ = 0 is always feasible");
    let mut converged = false;
    let mut iterations = 0;
    let mut stalled = 0;
    while iterations < INNER_MAX_ITERATIONS {
        let gnorm = point.gradient.amax();
        if gnorm <= INNER_GRADIENT_TOLERANCE && point.mass_defect(n).abs() <= MASS_TOLERANCE {
            converged = true;
            break;
        }
        iterations += 1;
        let direction = newton_direction(point.hessian(z), &point.gradient);
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &point.lambda + &direction * step;
            if let Some(next) = Point::at(z, candidate) {
                let decreased = next.value < point.value;
                // at the limits of double precision the objective stops
                // moving while the gradient still shrinks
                let flat = next.value <= point.value + 4.0 * f64::EPSILON * point.value.abs().max(1.0)
                    && next.gradient.amax() < gnorm;
                if decreased || flat {
                    accepted = Some(next);
                    break;
                }
            }
            step *= 0.5;
        }
        let Some(next) = accepted else { break };
        if next.gradient.amax() >= gnorm {
            stalled += 1;
            if stalled >= STALL_LIMIT {
                return Err(Error::HullViolation);
            }
        } else {
            stalled = 0;
        }
        point = next;
    }
    if !converged {
        let gnorm = point.gradient.amax();
        if gnorm <= INNER_GRADIENT_TOLERANCE && point.mass_defect(n).abs() <= MASS_TOLERANCE {
            converged = true;
        } else if point.mass_defect(n) < -1e-6 {
            // weights leak mass as ‖λ‖ → ∞
            return Err(Error::HullViolation);
        }
    }
    let nf = n as f64;
    let p = point.denom.iter().map(|d| 1.0 / (nf * d)).collect();
    Ok(InnerSolution {
        lambda: point.lambda.iter().copied().collect(),
        p,
        log_el: point.value - nf * nf.ln(),
        converged,
        iterations,
    })
}

/// Inner solution at β, or the solver's failure.
pub fn profile(data: &Dataset, beta: &DVector<f64>, mode: &ConstraintMode) -> Result<InnerSolution> {
    solve_lambda(&build_z(data, beta, mode))
}

/// Profile log-EL at β; −∞ when the inner problem is infeasible.
pub fn profile_log_el(data: &Dataset, beta: &DVector<f64>, mode: &ConstraintMode) -> f64 {
    match profile(data, beta, mode) {
        Ok(sol) => sol.log_el,
        Err(_) => f64::NEG_INFINITY,
    }
}
