//! ρ, ψ and ρ₀ kernels for M-estimation, plus the preliminary residual scale.
//!
//! Every kernel satisfies ψ = ρ′ exactly. Huber's ρ is the half-quadratic
//! form r²/2 in the core so that the derivative identity holds; Tukey uses the
//! standard biweight.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Huber tuning constant giving 95% efficiency at the normal.
pub const HUBER_TUNING: f64 = 1.345;
/// Tukey biweight tuning constant giving 95% efficiency at the normal.
pub const TUKEY_TUNING: f64 = 4.685;
/// Normalizer making the MAD consistent for σ at the normal distribution.
pub const MAD_NORMALIZER: f64 = 0.6745;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Identity,
    Huber,
    Tukey,
}

/// A ρ/ψ pair with its tuning threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PsiKernel {
    kind: KernelKind,
    tuning: f64,
}

impl PsiKernel {
    pub fn new(kind: KernelKind, tuning: f64) -> Result<Self> {
        if kind != KernelKind::Identity && !(tuning.is_finite() && tuning > 0.0) {
            return Err(Error::InvalidInput(format!(
                "{kind} tuning constant must be positive and finite, got {tuning}"
            )));
        }
        Ok(Self { kind, tuning })
    }

    pub fn identity() -> Self {
        Self { kind: KernelKind::Identity, tuning: f64::INFINITY }
    }

    pub fn huber() -> Self {
        Self { kind: KernelKind::Huber, tuning: HUBER_TUNING }
    }

    pub fn tukey() -> Self {
        Self { kind: KernelKind::Tukey, tuning: TUKEY_TUNING }
    }

    /// Kernel of the given kind with its default tuning constant.
    pub fn default_for(kind: KernelKind) -> Self {
        match kind {
            KernelKind::Identity => Self::identity(),
            KernelKind::Huber => Self::huber(),
            KernelKind::Tukey => Self::tukey(),
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn tuning(&self) -> f64 {
        self.tuning
    }

    pub fn rho(&self, r: f64) -> f64 {
        let k = self.tuning;
        match self.kind {
            KernelKind::Identity => 0.5 * r * r,
            KernelKind::Huber => {
                let a = r.abs();
                if a <= k {
                    0.5 * r * r
                } else {
                    k * a - 0.5 * k * k
                }
            }
            KernelKind::Tukey => {
                let c = k * k / 6.0;
                if r.abs() <= k {
                    let t = 1.0 - (r / k) * (r / k);
                    c * (1.0 - t * t * t)
                } else {
                    c
                }
            }
        }
    }

    pub fn psi(&self, r: f64) -> f64 {
        let k = self.tuning;
        match self.kind {
            KernelKind::Identity => r,
            KernelKind::Huber => r.clamp(-k, k),
            KernelKind::Tukey => {
                if r.abs() <= k {
                    let t = 1.0 - (r / k) * (r / k);
                    r * t * t
                } else {
                    0.0
                }
            }
        }
    }

    /// ρ₀(r) = r·ψ(r) − ρ(r).
    pub fn rho0(&self, r: f64) -> f64 {
        r * self.psi(r) - self.rho(r)
    }

    /// IRLS weight ψ(r)/r, with the ψ′(0) = 1 limit at r = 0.
    pub fn weight(&self, r: f64) -> f64 {
        if r == 0.0 {
            return 1.0;
        }
        match self.kind {
            KernelKind::Identity => 1.0,
            KernelKind::Huber => {
                let a = r.abs();
                if a <= self.tuning {
                    1.0
                } else {
                    self.tuning / a
                }
            }
            KernelKind::Tukey => {
                if r.abs() <= self.tuning {
                    let t = 1.0 - (r / self.tuning) * (r / self.tuning);
                    t * t
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            KernelKind::Identity => "identity",
            KernelKind::Huber => "huber",
            KernelKind::Tukey => "tukey",
        })
    }
}

impl FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" | "ols" => Ok(KernelKind::Identity),
            "huber" => Ok(KernelKind::Huber),
            "tukey" | "bisquare" | "biweight" => Ok(KernelKind::Tukey),
            other => Err(Error::InvalidInput(format!("unknown kernel {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleMethod {
    Mad,
    Fixed,
}

/// Residual scale σ, held fixed while β is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    sigma: f64,
    method: ScaleMethod,
}

impl ScaleEstimate {
    pub fn fixed(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidInput(format!("scale must be positive and finite, got {sigma}")));
        }
        Ok(Self { sigma, method: ScaleMethod::Fixed })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn method(&self) -> ScaleMethod {
        self.method
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (_, upper, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let lower = values[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Normalized median absolute deviation of the residuals.
pub fn mad_scale(residuals: &[f64]) -> Result<ScaleEstimate> {
    if residuals.len() < 2 {
        return Err(Error::InvalidInput("MAD scale needs at least 2 residuals".into()));
    }
    if residuals.iter().any(|r| !r.is_finite()) {
        return Err(Error::InvalidInput("MAD scale of non-finite residuals".into()));
    }
    let mut buf = residuals.to_vec();
    let center = median(&mut buf);
    for v in buf.iter_mut() {
        *v = (*v - center).abs();
    }
    let sigma = median(&mut buf) / MAD_NORMALIZER;
    if sigma > 0.0 {
        Ok(ScaleEstimate { sigma, method: ScaleMethod::Mad })
    } else {
        Err(Error::DegenerateScale)
    }
}

/// Scale used when the caller supplies none: the MAD, falling back to a unit
/// scale when more than half of the residuals coincide (e.g. an exact fit).
pub fn preliminary_scale(residuals: &[f64]) -> Result<ScaleEstimate> {
    match mad_scale(residuals) {
        Err(Error::DegenerateScale) => ScaleEstimate::fixed(1.0),
        other => other,
    }
}
