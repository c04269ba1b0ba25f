//! One entry point per named estimator, shared by the CLI and the simulator.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::classical::{m_fit, ols_fit};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::inner::ConstraintMode;
use crate::kernels::{KernelKind, PsiKernel, ScaleEstimate};
use crate::outer::{el_fit, fit_report, regression_report, robust_mode, ElOptions, FitReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "ols")]
    Ols,
    #[serde(rename = "m-huber")]
    MHuber,
    #[serde(rename = "m-tukey")]
    MTukey,
    #[serde(rename = "el")]
    El,
    #[serde(rename = "el-huber")]
    ElHuber,
    #[serde(rename = "el-tukey")]
    ElTukey,
}

impl Method {
    pub const ALL: [Method; 6] =
        [Method::Ols, Method::MHuber, Method::MTukey, Method::El, Method::ElHuber, Method::ElTukey];

    /// The estimators compared in the simulation study.
    pub const SIMULATION: [Method; 4] = [Method::Ols, Method::El, Method::ElHuber, Method::ElTukey];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Ols => "ols",
            Method::MHuber => "m-huber",
            Method::MTukey => "m-tukey",
            Method::El => "el",
            Method::ElHuber => "el-huber",
            Method::ElTukey => "el-tukey",
        }
    }

    /// Column label used in tables.
    pub fn label(&self) -> &'static str {
        match self {
            Method::Ols => "OLS",
            Method::MHuber => "M-Huber",
            Method::MTukey => "M-Tukey",
            Method::El => "EL",
            Method::ElHuber => "EL-Huber",
            Method::ElTukey => "EL-Tukey",
        }
    }

    pub fn kernel_kind(&self) -> Option<KernelKind> {
        match self {
            Method::MHuber | Method::ElHuber => Some(KernelKind::Huber),
            Method::MTukey | Method::ElTukey => Some(KernelKind::Tukey),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Method::ALL
            .into_iter()
            .find(|m| m.name() == lower || m.label().to_ascii_lowercase() == lower)
            .ok_or_else(|| Error::InvalidInput(format!("unknown method {s:?}")))
    }
}

/// Knobs shared by every method.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MethodConfig {
    /// Overrides the kernel's default tuning constant.
    pub tuning: Option<f64>,
    /// Fixed residual scale for robust methods; for `el` it switches on the
    /// variance constraint with this σ.
    pub sigma: Option<f64>,
    pub el: ElOptions,
}

impl MethodConfig {
    fn kernel(&self, kind: KernelKind) -> Result<PsiKernel> {
        match self.tuning {
            Some(t) => PsiKernel::new(kind, t),
            None => Ok(PsiKernel::default_for(kind)),
        }
    }

    fn scale(&self) -> Result<Option<ScaleEstimate>> {
        self.sigma.map(ScaleEstimate::fixed).transpose()
    }
}

fn el_mode(method: Method, data: &Dataset, cfg: &MethodConfig) -> Result<ConstraintMode> {
    match method {
        Method::El => match cfg.sigma {
            Some(s) => ConstraintMode::variance(s),
            None => Ok(ConstraintMode::Classical),
        },
        Method::ElHuber | Method::ElTukey => {
            let kind = method.kernel_kind().expect("robust method");
            robust_mode(data, cfg.kernel(kind)?, cfg.sigma)
        }
        _ => unreachable!("not an EL method"),
    }
}

pub fn fit(method: Method, data: &Dataset, cfg: &MethodConfig) -> Result<FitReport> {
    match method {
        Method::Ols => Ok(regression_report(&ols_fit(data)?, data, None)),
        Method::MHuber | Method::MTukey => {
            let kernel = cfg.kernel(method.kernel_kind().expect("robust method"))?;
            let fit = m_fit(data, &kernel, cfg.scale()?)?;
            Ok(regression_report(&fit, data, Some(&kernel)))
        }
        Method::El | Method::ElHuber | Method::ElTukey => {
            let mode = el_mode(method, data, cfg)?;
            let fit = el_fit(data, &mode, None, &cfg.el)?;
            Ok(fit_report(&fit, data))
        }
    }
}

/// Coefficients only; cheaper than [`fit`] for simulation loops.
pub fn estimate(method: Method, data: &Dataset, cfg: &MethodConfig) -> Result<DVector<f64>> {
    match method {
        Method::Ols => Ok(ols_fit(data)?.beta),
        Method::MHuber | Method::MTukey => {
            let kernel = cfg.kernel(method.kernel_kind().expect("robust method"))?;
            Ok(m_fit(data, &kernel, cfg.scale()?)?.beta)
        }
        Method::El | Method::ElHuber | Method::ElTukey => {
            let mode = el_mode(method, data, cfg)?;
            Ok(el_fit(data, &mode, None, &cfg.el)?.beta)
        }
    }
}
