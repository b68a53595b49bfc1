//! Bounded regression losses built on the Gaussian distances, plus the
//! Smooth-L1 offset baseline they are compared against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::box_model::{encode_offsets, to_gaussian_2d, to_gaussian_3d, AnchorBox, EncodingMode, OffsetEncoding, RBox2D, RBox3D};
use crate::divergence::{distance, DistanceResult, Metric};
use crate::error::{Error, Result};

/// Default Smooth-L1 transition point.
pub const DEFAULT_BETA: f64 = 1.0 / 9.0;

/// Nonlinearity applied to the raw distance before the `1 - 1/(tau + f)` wrap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum Transform {
    #[default]
    Sqrt,
    /// `ln(1 + d)`.
    Log1p,
}

impl Transform {
    pub fn apply(self, d: f64) -> f64 {
        match self {
            Transform::Sqrt => d.sqrt(),
            Transform::Log1p => d.ln_1p(),
        }
    }

    /// `f'(d)`; infinite for `Sqrt` at zero.
    pub fn derivative(self, d: f64) -> f64 {
        match self {
            Transform::Sqrt => 0.5 / d.sqrt(),
            Transform::Log1p => 1.0 / (1.0 + d),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Transform::Sqrt => "sqrt",
            Transform::Log1p => "log1p",
        }
    }
}

impl FromStr for Transform {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sqrt" => Ok(Transform::Sqrt),
            "log1p" | "log" | "ln" => Ok(Transform::Log1p),
            other => Err(format!("unknown transform `{other}` (expected sqrt or log1p)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub metric: Metric,
    pub f: Transform,
    pub tau: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig { metric: Metric::KldPt, f: Transform::Sqrt, tau: 2.0 }
    }
}

impl LossConfig {
    pub fn new(metric: Metric, f: Transform, tau: f64) -> Result<Self> {
        let cfg = LossConfig { metric, f, tau };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_metric(metric: Metric) -> Self {
        LossConfig { metric, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau >= 1.0) || !self.tau.is_finite() {
            return Err(Error::InvalidConfig(format!("tau must be >= 1, got {}", self.tau)));
        }
        Ok(())
    }

    /// Short label such as `kld/sqrt/2`.
    pub fn label(&self) -> String {
        format!("{}/{}/{}", self.metric, self.f.name(), self.tau)
    }
}

impl fmt::Display for LossConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// `1 - 1 / (tau + f(distance))`.
pub fn normalize_loss(distance: f64, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    if !(distance >= 0.0) {
        return Err(Error::InvalidConfig(format!("distance must be nonnegative, got {distance}")));
    }
    Ok(1.0 - 1.0 / (cfg.tau + cfg.f.apply(distance)))
}

/// `dL/dD` of [`normalize_loss`]; zero at `D = 0`, where the sqrt transform has
/// no derivative but every distance has a minimum.
pub fn normalize_loss_derivative(distance: f64, cfg: &LossConfig) -> f64 {
    if distance <= 0.0 {
        return 0.0;
    }
    let denom = cfg.tau + cfg.f.apply(distance);
    cfg.f.derivative(distance) / (denom * denom)
}

/// Boxes that have a Gaussian view.
pub trait GaussianBox {
    fn gaussian_distance(metric: Metric, pred: &Self, target: &Self) -> Result<DistanceResult>;
}

impl GaussianBox for RBox2D {
    fn gaussian_distance(metric: Metric, pred: &Self, target: &Self) -> Result<DistanceResult> {
        distance(metric, &to_gaussian_2d(pred)?, &to_gaussian_2d(target)?)
    }
}

impl GaussianBox for RBox3D {
    fn gaussian_distance(metric: Metric, pred: &Self, target: &Self) -> Result<DistanceResult> {
        distance(metric, &to_gaussian_3d(pred)?, &to_gaussian_3d(target)?)
    }
}

/// Raw distance between the Gaussians of two boxes.
pub fn box_distance<B: GaussianBox>(metric: Metric, pred: &B, target: &B) -> Result<f64> {
    B::gaussian_distance(metric, pred, target).map(|r| r.value)
}

/// Converts both boxes to Gaussians, measures them, and normalizes.
pub fn gaussian_box_loss<B: GaussianBox>(pred: &B, target: &B, cfg: &LossConfig) -> Result<f64> {
    cfg.validate()?;
    let d = box_distance(cfg.metric, pred, target)?;
    normalize_loss(d, cfg)
}

/// Summed Smooth-L1 penalty over the encoding components.
///
/// `beta = 0` degrades to plain L1.
pub fn smooth_l1_loss(pred: &OffsetEncoding, target: &OffsetEncoding, beta: f64) -> Result<f64> {
    if pred.mode() != target.mode() {
        return Err(Error::ModeMismatch);
    }
    if !(beta >= 0.0) {
        return Err(Error::InvalidConfig(format!("beta must be >= 0, got {beta}")));
    }
    Ok(pred
        .components()
        .iter()
        .zip(target.components())
        .map(|(p, t)| smooth_l1(p - t, beta))
        .sum())
}

pub(crate) fn smooth_l1(d: f64, beta: f64) -> f64 {
    let a = d.abs();
    if a < beta {
        0.5 * a * a / beta
    } else {
        a - 0.5 * beta
    }
}

pub(crate) fn smooth_l1_derivative(d: f64, beta: f64) -> f64 {
    if d.abs() < beta {
        d / beta
    } else {
        d.signum()
    }
}

/// Smooth-L1 between two boxes after encoding both against `anchor`.
pub fn smooth_l1_box_loss(
    pred: &RBox2D,
    target: &RBox2D,
    anchor: &AnchorBox,
    mode: EncodingMode,
    beta: f64,
) -> Result<f64> {
    let p = encode_offsets(pred, anchor, mode)?;
    let t = encode_offsets(target, anchor, mode)?;
    smooth_l1_loss(&p, &t, beta)
}
