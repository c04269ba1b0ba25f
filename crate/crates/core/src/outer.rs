//! Outer empirical likelihood problem: maximize the profile log-EL over β.

use nalgebra::DVector;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::classical::{m_fit, ols_fit, RegressionFit};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inner::{profile, profile_log_el, ConstraintMode, InnerSolution};
use crate::kernels::{mad_scale, preliminary_scale, KernelKind, PsiKernel, ScaleEstimate, ScaleMethod};
use crate::rng::{stream, Purpose};
use crate::simplex::{self, SimplexOptions};

pub const EVALUATIONS_PER_PARAMETER: usize = 500;
pub const SPREAD_TOLERANCE: f64 = 1e-10;
pub const START_PERTURBATIONS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElOptions {
    /// Seeds the start perturbations and any extra starts.
    pub seed: u64,
    /// Fresh-simplex restarts from the incumbent after the first search.
    pub restarts: usize,
    /// Additional searches from seeded perturbations of the start; the best
    /// optimum wins. Useful for the over-identified variance mode.
    pub multistart: usize,
    pub spread_tolerance: f64,
    pub evaluations_per_parameter: usize,
}

impl Default for ElOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            restarts: 1,
            multistart: 0,
            spread_tolerance: SPREAD_TOLERANCE,
            evaluations_per_parameter: EVALUATIONS_PER_PARAMETER,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElFit {
    pub beta: DVector<f64>,
    pub inner: InnerSolution,
    pub mode: ConstraintMode,
    pub log_el: f64,
    pub outer_iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
    pub start_beta: DVector<f64>,
    /// Best log-EL after each simplex iteration, across all searches.
    pub history: Vec<f64>,
}

impl ConstraintMode {
    /// Robust mode with σ taken as the MAD of the OLS residuals.
    pub fn robust_for(data: &Dataset, kernel: PsiKernel) -> Result<Self> {
        let ols = ols_fit(data)?;
        Ok(ConstraintMode::Robust { kernel, scale: ols.sigma })
    }
}

/// Estimating-equation root matching the mode: OLS for the classical
/// constraints, the M-fit for robust ones.
pub fn default_start(data: &Dataset, mode: &ConstraintMode) -> Result<DVector<f64>> {
    match mode {
        ConstraintMode::Classical | ConstraintMode::ClassicalWithVariance { .. } => Ok(ols_fit(data)?.beta),
        ConstraintMode::Robust { kernel, scale } => match kernel.kind() {
            KernelKind::Identity => Ok(ols_fit(data)?.beta),
            _ => Ok(m_fit(data, kernel, Some(*scale))?.beta),
        },
    }
}

fn initial_edge(x: &DVector<f64>) -> f64 {
    (1e-2 * x.amax()).max(1e-3)
}

fn perturbation_scale(data: &Dataset) -> f64 {
    mad_scale(data.y().as_slice()).map(|s| s.sigma()).unwrap_or(1.0)
}

fn feasible_start(data: &Dataset, mode: &ConstraintMode, start: DVector<f64>, seed: u64) -> Result<DVector<f64>> {
    if profile_log_el(data, &start, mode).is_finite() {
        return Ok(start);
    }
    let scale = perturbation_scale(data);
    let mut rng = stream(seed, 0, Purpose::StartPerturbation);
    for _ in 0..START_PERTURBATIONS {
        let candidate = start.map(|b| b + scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
        if profile_log_el(data, &candidate, mode).is_finite() {
            return Ok(candidate);
        }
    }
    Err(Error::InfeasibleStart { attempts: START_PERTURBATIONS })
}

struct Search {
    beta: DVector<f64>,
    log_el: f64,
    iterations: usize,
    evaluations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn search(data: &Dataset, mode: &ConstraintMode, start: DVector<f64>, opts: &ElOptions) -> Search {
    let max_evaluations = opts.evaluations_per_parameter * data.k();
    let objective = |b: &DVector<f64>| -profile_log_el(data, b, mode);
    let mut out = Search {
        log_el: profile_log_el(data, &start, mode),
        beta: start,
        iterations: 0,
        evaluations: 0,
        converged: false,
        history: Vec::new(),
    };
    for _ in 0..=opts.restarts {
        let simplex_opts = SimplexOptions {
            edge: initial_edge(&out.beta),
            spread_tolerance: opts.spread_tolerance,
            max_evaluations,
        };
        let res = simplex::minimize(objective, &out.beta, &simplex_opts);
        out.iterations += res.iterations;
        out.evaluations += res.evaluations;
        out.converged = res.converged;
        let offset = out.history.last().copied().unwrap_or(f64::NEG_INFINITY);
        out.history.extend(res.history.iter().map(|v| (-v).max(offset)));
        if -res.value >= out.log_el {
            out.beta = res.best;
            out.log_el = -res.value;
        }
    }
    out
}

/// Maximizes the profile log-EL over β by Nelder–Mead, warm-started at the
/// estimating-equation root for the mode unless `start` is given.
pub fn el_fit(data: &Dataset, mode: &ConstraintMode, start: Option<&DVector<f64>>, opts: &ElOptions) -> Result<ElFit> {
    let start_beta = match start {
        Some(b) if b.len() != data.k() => {
            return Err(Error::InvalidInput(format!("start has {} entries, expected {}", b.len(), data.k())));
        }
        Some(b) => b.clone(),
        None => default_start(data, mode)?,
    };
    let feasible = feasible_start(data, mode, start_beta.clone(), opts.seed)?;
    let mut best = search(data, mode, feasible.clone(), opts);

    if opts.multistart > 0 {
        let scale = perturbation_scale(data);
        let mut rng = stream(opts.seed, 0, Purpose::Multistart);
        for _ in 0..opts.multistart {
            let candidate = feasible.map(|b| b + scale * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng));
            if !profile_log_el(data, &candidate, mode).is_finite() {
                continue;
            }
            let other = search(data, mode, candidate, opts);
            let mut history = std::mem::take(&mut best.history);
            let floor = history.last().copied().unwrap_or(f64::NEG_INFINITY);
            history.extend(other.history.iter().map(|v| v.max(floor)));
            let (iterations, evaluations) = (best.iterations + other.iterations, best.evaluations + other.evaluations);
            if other.log_el > best.log_el {
                best = other;
            }
            best.history = history;
            best.iterations = iterations;
            best.evaluations = evaluations;
        }
    }

    let inner = profile(data, &best.beta, mode)?;
    Ok(ElFit {
        log_el: inner.log_el,
        converged: best.converged && inner.log_el.is_finite(),
        beta: best.beta,
        inner,
        mode: *mode,
        outer_iterations: best.iterations,
        evaluations: best.evaluations,
        start_beta,
        history: best.history,
    })
}

/// Serializable summary of any fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema_version: u32,
    pub method: String,
    pub n: usize,
    pub k: usize,
    pub terms: Vec<String>,
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub sigma: Option<f64>,
    pub sigma_method: Option<ScaleMethod>,
    pub tuning: Option<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// ψ(u_i)/u_i at the fitted residuals, for robust methods.
    pub robustness_weights: Option<Vec<f64>>,
    pub el: Option<ElDiagnostics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElDiagnostics {
    pub constraint: ConstraintMode,
    pub weights: Vec<f64>,
    pub weight_sum: f64,
    pub lambda: Vec<f64>,
    pub log_el: f64,
    /// −n·log n, the largest attainable log-EL.
    pub log_el_bound: f64,
    pub inner_converged: bool,
    pub inner_iterations: usize,
    pub evaluations: usize,
    pub start_beta: Vec<f64>,
}

pub const SCHEMA_VERSION: u32 = 1;

fn robustness_weights(kernel: &PsiKernel, scale: &ScaleEstimate, residuals: &DVector<f64>) -> Vec<f64> {
    residuals.iter().map(|r| kernel.weight(r / scale.sigma())).collect()
}

pub fn fit_report(fit: &ElFit, data: &Dataset) -> FitReport {
    let residuals = data.residuals(&fit.beta);
    let (sigma, sigma_method, tuning, robust) = match &fit.mode {
        ConstraintMode::Classical => (None, None, None, None),
        ConstraintMode::ClassicalWithVariance { sigma } => (Some(*sigma), Some(ScaleMethod::Fixed), None, None),
        ConstraintMode::Robust { kernel, scale } => (
            Some(scale.sigma()),
            Some(scale.method()),
            Some(kernel.tuning()),
            Some(robustness_weights(kernel, scale, &residuals)),
        ),
    };
    let n = data.n() as f64;
    FitReport {
        schema_version: SCHEMA_VERSION,
        method: fit.mode.label(),
        n: data.n(),
        k: data.k(),
        terms: data.names().to_vec(),
        coefficients: fit.beta.iter().copied().collect(),
        residuals: residuals.iter().copied().collect(),
        sigma,
        sigma_method,
        tuning,
        converged: fit.converged,
        iterations: fit.outer_iterations,
        robustness_weights: robust,
        el: Some(ElDiagnostics {
            constraint: fit.mode,
            weight_sum: fit.inner.p.iter().sum(),
            weights: fit.inner.p.clone(),
            lambda: fit.inner.lambda.clone(),
            log_el: fit.log_el,
            log_el_bound: -n * n.ln(),
            inner_converged: fit.inner.converged,
            inner_iterations: fit.inner.iterations,
            evaluations: fit.evaluations,
            start_beta: fit.start_beta.iter().copied().collect(),
        }),
    }
}

pub fn regression_report(fit: &RegressionFit, data: &Dataset, kernel: Option<&PsiKernel>) -> FitReport {
    let method = serde_json::to_value(fit.method)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default();
    FitReport {
        schema_version: SCHEMA_VERSION,
        method,
        n: data.n(),
        k: data.k(),
        terms: data.names().to_vec(),
        coefficients: fit.beta.iter().copied().collect(),
        residuals: fit.residuals.iter().copied().collect(),
        sigma: Some(fit.sigma.sigma()),
        sigma_method: Some(fit.sigma.method()),
        tuning: kernel.map(|k| k.tuning()),
        converged: fit.converged,
        iterations: fit.iterations,
        robustness_weights: kernel.map(|k| robustness_weights(k, &fit.sigma, &fit.residuals)),
        el: None,
    }
}

/// Robust mode from an optional user scale, defaulting to the MAD of the
/// OLS residuals.
pub fn robust_mode(data: &Dataset, kernel: PsiKernel, sigma: Option<f64>) -> Result<ConstraintMode> {
    let scale = match sigma {
        Some(s) => ScaleEstimate::fixed(s)?,
        None => preliminary_scale(ols_fit(data)?.residuals.as_slice())?,
    };
    Ok(ConstraintMode::Robust { kernel, scale })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_data(seed: u64, n: usize, k: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || -> f64 { StandardNormal.sample(&mut rng) };
        let x = DMatrix::from_fn(n, k, |_, _| draw());
        let beta = DVector::from_fn(k, |_, _| draw());
        let e = DVector::from_fn(n, |_, _| draw());
        let y = &x * &beta + e;
        Dataset::new(x, y).unwrap()
    }

    #[test]
    fn classical_el_is_ols() {
        let data = random_data(4, 30, 3);
        let fit = el_fit(&data, &ConstraintMode::Classical, None, &ElOptions::default()).unwrap();
        let ols = ols_fit(&data).unwrap();
        assert!((&fit.beta - &ols.beta).amax() < 1e-5);
        assert!((fit.log_el + 30.0 * 30f64.ln()).abs() < 1e-7);
        assert!(fit.converged);
    }

    #[test]
    fn robust_el_is_m_fit() {
        let data = random_data(5, 40, 2);
        let mode = ConstraintMode::robust_for(&data, PsiKernel::huber()).unwrap();
        let fit = el_fit(&data, &mode, None, &ElOptions::default()).unwrap();
        let m = m_fit(&data, &PsiKernel::huber(), None).unwrap();
        assert!((&fit.beta - &m.beta).amax() < 1e-4);
    }

    #[test]
    fn zero_noise_recovers_truth() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DMatrix::from_fn(12, 2, |_, _| StandardNormal.sample(&mut rng));
        let truth = DVector::from_vec(vec![0.7, -1.3]);
        let data = Dataset::new(x.clone(), &x * &truth).unwrap();
        let modes = [
            ConstraintMode::Classical,
            robust_mode(&data, PsiKernel::huber(), None).unwrap(),
            robust_mode(&data, PsiKernel::tukey(), None).unwrap(),
        ];
        for mode in modes {
            let fit = el_fit(&data, &mode, None, &ElOptions::default()).unwrap();
            assert!((&fit.beta - &truth).amax() < 1e-10, "{mode:?}");
            assert!(fit.inner.lambda.iter().all(|l| *l == 0.0));
            assert!(fit.inner.p.iter().all(|p| (*p - 1.0 / 12.0).abs() < 1e-15));
        }
    }

    #[test]
    fn start_from_far_away_is_rescued_or_reported() {
        let data = random_data(8, 25, 2);
        let far = DVector::from_vec(vec![1e3, 1e3]);
        match el_fit(&data, &ConstraintMode::Classical, Some(&far), &ElOptions::default()) {
            Ok(fit) => assert!(fit.log_el.is_finite()),
            Err(e) => assert!(matches!(e, Error::InfeasibleStart { attempts: 50 })),
        }
        let bad = DVector::from_vec(vec![1.0]);
        assert!(el_fit(&data, &ConstraintMode::Classical, Some(&bad), &ElOptions::default()).is_err());
    }

    #[test]
    fn recorded_log_el_matches_recomputation() {
        let data = random_data(12, 30, 2);
        let mode = robust_mode(&data, PsiKernel::tukey(), None).unwrap();
        let fit = el_fit(&data, &mode, None, &ElOptions::default()).unwrap();
        assert!((fit.log_el - profile_log_el(&data, &fit.beta, &mode)).abs() <= 1e-9);
        assert!(fit.history.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn argmax_certificate() {
        let data = random_data(13, 30, 2);
        for mode in [ConstraintMode::Classical, robust_mode(&data, PsiKernel::huber(), None).unwrap()] {
            let fit = el_fit(&data, &mode, None, &ElOptions::default()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..100 {
                let d = DVector::from_fn(2, |_, _| rand::Rng::random_range(&mut rng, -1e-2..1e-2));
                assert!(fit.log_el >= profile_log_el(&data, &(&fit.beta + d), &mode));
            }
        }
    }

    #[test]
    fn variance_mode_is_over_identified() {
        let data = random_data(21, 40, 2);
        let mode = ConstraintMode::variance(1.0).unwrap();
        let opts = ElOptions { multistart: 2, ..ElOptions::default() };
        let fit = el_fit(&data, &mode, None, &opts).unwrap();
        assert_eq!(fit.inner.lambda.len(), 3);
        let bound = -40.0 * 40f64.ln();
        assert!(fit.log_el.is_finite() && fit.log_el < bound);
        let ols = ols_fit(&data).unwrap();
        assert!(fit.log_el >= profile_log_el(&data, &ols.beta, &mode));
        let mass: f64 = fit.inner.p.iter().sum();
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn report_is_consistent() {
        let data = random_data(3, 20, 2);
        let mode = robust_mode(&data, PsiKernel::huber(), None).unwrap();
        let fit = el_fit(&data, &mode, None, &ElOptions::default()).unwrap();
        let report = fit_report(&fit, &data);
        let el = report.el.as_ref().unwrap();
        assert!((el.weight_sum - 1.0).abs() < 1e-10);
        assert_eq!(report.method, "el-huber");
        assert_eq!(report.schema_version, 1);
        let json = serde_json::to_string(&report).unwrap();
        let back: FitReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn deterministic() {
        let data = random_data(31, 25, 3);
        let mode = robust_mode(&data, PsiKernel::tukey(), None).unwrap();
        let a = el_fit(&data, &mode, None, &ElOptions::default()).unwrap();
        let b = el_fit(&data, &mode, None, &ElOptions::default()).unwrap();
        assert_eq!(a, b);
    }
}
