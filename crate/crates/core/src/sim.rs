//! Seeded Monte Carlo comparison of the regression estimators.
//!
//! Each replication draws X with i.i.d. N(0, 1) entries and errors from the
//! scenario's model, then sets y = Xβ + ε. Coefficient error is summarized
//! by the mean squared Euclidean norm (MSE) and by the ratio of summed
//! norms against OLS (relative efficiency).

use std::io::Write;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::methods::{estimate, Method, MethodConfig};
use crate::rng::{stream, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ErrorModel {
    Normal { sd: f64 },
    /// (1 − weight)·N(0, sd²) + weight·N(shift, sd²)
    Contaminated { weight: f64, shift: f64, sd: f64 },
}

impl ErrorModel {
    pub fn standard() -> Self {
        ErrorModel::Normal { sd: 1.0 }
    }

    pub fn contaminated(weight: f64) -> Self {
        if weight == 0.0 {
            Self::standard()
        } else {
            ErrorModel::Contaminated { weight, shift: 20.0, sd: 1.0 }
        }
    }

    pub fn noiseless() -> Self {
        ErrorModel::Normal { sd: 0.0 }
    }

    pub fn contamination(&self) -> f64 {
        match self {
            ErrorModel::Normal { .. } => 0.0,
            ErrorModel::Contaminated { weight, .. } => *weight,
        }
    }

    fn validate(&self) -> Result<()> {
        let (weight, shift, sd) = match *self {
            ErrorModel::Normal { sd } => (0.0, 0.0, sd),
            ErrorModel::Contaminated { weight, shift, sd } => (weight, shift, sd),
        };
        if !(0.0..1.0).contains(&weight) || !(sd >= 0.0 && sd.is_finite()) || !shift.is_finite() {
            return Err(Error::InvalidInput(format!("invalid error model {self:?}")));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            ErrorModel::Normal { sd } => sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng),
            ErrorModel::Contaminated { weight, shift, sd } => {
                let outlier = rng.random::<f64>() < weight;
                let z: f64 = StandardNormal.sample(rng);
                if outlier {
                    shift + sd * z
                } else {
                    sd * z
                }
            }
        }
    }
}

/// How the true coefficient vector is chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Truth {
    /// Drawn once per scenario from N(mean, variance) and reused.
    DrawOnce { mean: f64, variance: f64 },
    /// Redrawn for every replication.
    PerReplication { mean: f64, variance: f64 },
    Fixed { beta: Vec<f64> },
}

impl Default for Truth {
    fn default() -> Self {
        Truth::DrawOnce { mean: 0.0, variance: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub n: usize,
    pub k: usize,
    pub error_model: ErrorModel,
    pub replications: usize,
    pub seed: u64,
    pub estimators: Vec<Method>,
    pub truth: Truth,
}

impl ScenarioSpec {
    pub fn new(n: usize, k: usize, error_model: ErrorModel, replications: usize, seed: u64) -> Self {
        Self { n, k, error_model, replications, seed, estimators: Method::SIMULATION.to_vec(), truth: Truth::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.n <= self.k {
            return Err(Error::InvalidInput(format!("need n > k >= 1, got n={}, k={}", self.n, self.k)));
        }
        if self.replications == 0 {
            return Err(Error::InvalidInput("at least one replication is required".into()));
        }
        if let Truth::Fixed { beta } = &self.truth {
            if beta.len() != self.k {
                return Err(Error::InvalidInput(format!("fixed truth has {} entries, k = {}", beta.len(), self.k)));
            }
        }
        if let Truth::DrawOnce { variance, .. } | Truth::PerReplication { variance, .. } = self.truth {
            if !(variance >= 0.0) {
                return Err(Error::InvalidInput("truth variance must be non-negative".into()));
            }
        }
        self.error_model.validate()
    }

    /// Estimators in canonical order, always including OLS as the RE reference.
    pub fn methods(&self) -> Vec<Method> {
        let mut m = self.estimators.clone();
        m.push(Method::Ols);
        m.sort();
        m.dedup();
        m
    }
}

#[derive(Debug, Clone)]
pub struct Replication {
    pub data: Dataset,
    pub beta_truth: DVector<f64>,
}

fn draw_truth(spec: &ScenarioSpec, rep_index: u64) -> DVector<f64> {
    let (mean, variance, index) = match &spec.truth {
        Truth::Fixed { beta } => return DVector::from_column_slice(beta),
        Truth::DrawOnce { mean, variance } => (*mean, *variance, 0),
        Truth::PerReplication { mean, variance } => (*mean, *variance, rep_index),
    };
    let normal = Normal::new(mean, variance.sqrt()).expect("validated variance");
    let mut rng = stream(spec.seed, index, Purpose::Truth);
    DVector::from_iterator(spec.k, (0..spec.k).map(|_| normal.sample(&mut rng)))
}

pub fn generate_replication(spec: &ScenarioSpec, rep_index: u64) -> Result<Replication> {
    spec.validate()?;
    let beta_truth = draw_truth(spec, rep_index);
    let mut design = stream(spec.seed, rep_index, Purpose::Design);
    let (n, k) = (spec.n, spec.k);
    let x = DMatrix::from_row_iterator(n, k, (0..n * k).map(|_| StandardNormal.sample(&mut design)));
    let mut errors = stream(spec.seed, rep_index, Purpose::Errors);
    let eps = DVector::from_iterator(n, (0..n).map(|_| spec.error_model.sample(&mut errors)));
    let y = &x * &beta_truth + eps;
    Ok(Replication { data: Dataset::new(x, y)?, beta_truth })
}

/// Mean squared Euclidean norm of the coefficient errors.
pub fn mse(errors: &[DVector<f64>]) -> f64 {
    if errors.is_empty() {
        return f64::NAN;
    }
    errors.iter().map(|e| e.norm_squared()).sum::<f64>() / errors.len() as f64
}

/// Σ‖β̂_j − β‖ / Σ‖β̂_j^OLS − β‖ over paired replications.
pub fn relative_efficiency(errors_est: &[DVector<f64>], errors_ols: &[DVector<f64>]) -> Result<f64> {
    if errors_est.len() != errors_ols.len() || errors_est.is_empty() {
        return Err(Error::InvalidInput("relative efficiency needs equal-length nonempty lists".into()));
    }
    let est: f64 = errors_est.iter().map(|e| e.norm()).sum();
    let ols: f64 = errors_ols.iter().map(|e| e.norm()).sum();
    if ols == 0.0 {
        return Err(Error::DivideByZero);
    }
    Ok(est / ols)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub replication: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub method: Method,
    /// `None` when every replication failed.
    pub mse: Option<f64>,
    /// `None` when undefined (no paired successes or zero OLS error).
    pub relative_efficiency: Option<f64>,
    pub successes: usize,
    pub failures: Vec<Failure>,
    /// Coefficient error β̂_j − β per replication; `None` marks a failure.
    pub errors: Vec<Option<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub spec: ScenarioSpec,
    pub estimators: Vec<EstimatorSummary>,
    /// Wall-clock time; excluded from serialized output so reports stay
    /// byte-identical across runs.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl ScenarioReport {
    pub fn get(&self, method: Method) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.method == method)
    }

    pub fn mse_of(&self, method: Method) -> Option<f64> {
        self.get(method).and_then(|s| s.mse)
    }

    pub fn re_of(&self, method: Method) -> Option<f64> {
        self.get(method).and_then(|s| s.relative_efficiency)
    }
}

fn run_replication(spec: &ScenarioSpec, methods: &[Method], cfg: &MethodConfig, rep: usize) -> Vec<Result<Vec<f64>, String>> {
    let replication = match generate_replication(spec, rep as u64) {
        Ok(r) => r,
        Err(e) => return methods.iter().map(|_| Err(format!("generate: {e}"))).collect(),
    };
    let rep_cfg = MethodConfig {
        el: crate::outer::ElOptions { seed: spec.seed ^ (rep as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15), ..cfg.el },
        ..*cfg
    };
    methods
        .iter()
        .map(|m| {
            estimate(*m, &replication.data, &rep_cfg)
                .map(|b| (b - &replication.beta_truth).iter().copied().collect())
                .map_err(|e| format!("{m}: {e}"))
        })
        .collect()
}

/// Runs every estimator on every replication using the global thread pool.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioReport> {
    run_scenario_with(spec, &MethodConfig::default(), None)
}

/// Like [`run_scenario`], with explicit estimator settings and an optional
/// worker-count cap. Output does not depend on the worker count.
pub fn run_scenario_with(spec: &ScenarioSpec, cfg: &MethodConfig, threads: Option<usize>) -> Result<ScenarioReport> {
    spec.validate()?;
    let started = Instant::now();
    let methods = spec.methods();
    let work = || -> Vec<Vec<Result<Vec<f64>, String>>> {
        (0..spec.replications).into_par_iter().map(|rep| run_replication(spec, &methods, cfg, rep)).collect()
    };
    let results = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    };

    let ols_col = methods.iter().position(|m| *m == Method::Ols).expect("OLS always runs");
    let estimators = methods
        .iter()
        .enumerate()
        .map(|(col, &method)| {
            let mut failures = Vec::new();
            let mut errors = Vec::with_capacity(spec.replications);
            for (rep, row) in results.iter().enumerate() {
                match &row[col] {
                    Ok(e) => errors.push(Some(e.clone())),
                    Err(reason) => {
                        failures.push(Failure { replication: rep, reason: reason.clone() });
                        errors.push(None);
                    }
                }
            }
            let ok: Vec<DVector<f64>> = errors.iter().flatten().map(|e| DVector::from_column_slice(e)).collect();
            let (paired_est, paired_ols): (Vec<_>, Vec<_>) = results
                .iter()
                .filter_map(|row| match (&row[col], &row[ols_col]) {
                    (Ok(a), Ok(b)) => Some((DVector::from_column_slice(a), DVector::from_column_slice(b))),
                    _ => None,
                })
                .unzip();
            EstimatorSummary {
                method,
                mse: (!ok.is_empty()).then(|| mse(&ok)),
                relative_efficiency: relative_efficiency(&paired_est, &paired_ols).ok(),
                successes: ok.len(),
                failures,
                errors,
            }
        })
        .collect();

    Ok(ScenarioReport {
        schema_version: crate::outer::SCHEMA_VERSION,
        spec: spec.clone(),
        estimators,
        runtime_seconds: started.elapsed().as_secs_f64(),
    })
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes reports as a table: one row per (k, n, metric), one column per
/// estimator. All reports must share the same estimator set.
pub fn write_csv<W: Write>(reports: &[ScenarioReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let Some(first) = reports.first() else {
        w.flush().map_err(|e| Error::Io { path: "<output>".into(), source: e })?;
        return Ok(());
    };
    let methods: Vec<Method> = first.estimators.iter().map(|s| s.method).collect();
    let mut header = vec!["k".to_string(), "n".into(), "contamination".into(), "metric".into()];
    header.extend(methods.iter().map(|m| m.label().to_string()));
    w.write_record(&header)?;
    for report in reports {
        let lead = |metric: &str| {
            vec![
                report.spec.k.to_string(),
                report.spec.n.to_string(),
                report.spec.error_model.contamination().to_string(),
                metric.to_string(),
            ]
        };
        let mut mse_row = lead("mse");
        let mut re_row = lead("re");
        let mut fail_row = lead("failures");
        for m in &methods {
            let s = report
                .get(*m)
                .ok_or_else(|| Error::InvalidInput("reports have different estimator sets".into()))?;
            mse_row.push(cell(s.mse));
            re_row.push(cell(s.relative_efficiency));
            fail_row.push(s.failures.len().to_string());
        }
        w.write_record(&mse_row)?;
        w.write_record(&re_row)?;
        w.write_record(&fail_row)?;
    }
    w.flush().map_err(|e| Error::Io { path: "<output>".into(), source: e })?;
    Ok(())
}
