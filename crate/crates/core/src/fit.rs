//! Gradient-descent fitting of a single box to a target, used to compare how
//! the Gaussian losses and the Smooth-L1 baseline drive a prediction.

use crate::box_model::{AnchorBox, EncodingMode, RBox2D, MIN_EDGE};
use crate::error::{Error, Result};
use crate::geometry::skew_iou_2d;
use crate::gradient::{analytic_gradient, ParamGradient};
use crate::loss::{gaussian_box_loss, smooth_l1_box_loss, smooth_l1_derivative, LossConfig, DEFAULT_BETA};
use crate::box_model::encode_offsets;

/// Parameters the descent moves along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ParamSpace {
    /// `x, y, w, h, theta`
    Raw,
    /// `x, y, ln w, ln h, theta`
    #[default]
    LogEdges,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSizes {
    pub center: f64,
    pub edge: f64,
    pub theta: f64,
}

impl Default for StepSizes {
    fn default() -> Self {
        StepSizes { center: 0.1, edge: 0.05, theta: 0.05 }
    }
}

/// What the fit minimizes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitObjective {
    Gaussian(LossConfig),
    /// Smooth-L1 over offsets of prediction and target against a fixed anchor.
    SmoothL1 { anchor: AnchorBox, mode: EncodingMode, beta: f64 },
}

impl FitObjective {
    pub fn smooth_l1(anchor: AnchorBox) -> Self {
        FitObjective::SmoothL1 { anchor, mode: EncodingMode::DirectAngle, beta: DEFAULT_BETA }
    }

    pub fn label(&self) -> String {
        match self {
            FitObjective::Gaussian(cfg) => cfg.label(),
            FitObjective::SmoothL1 { beta, .. } => format!("smooth-l1/{beta}"),
        }
    }

    fn loss(&self, pred: &RBox2D, target: &RBox2D) -> Result<f64> {
        match self {
            FitObjective::Gaussian(cfg) => gaussian_box_loss(pred, target, cfg),
            FitObjective::SmoothL1 { anchor, mode, beta } => smooth_l1_box_loss(pred, target, anchor, *mode, *beta),
        }
    }

    fn gradient(&self, pred: &RBox2D, target: &RBox2D) -> Result<ParamGradient> {
        match self {
            FitObjective::Gaussian(cfg) => analytic_gradient(pred, target, cfg),
            FitObjective::SmoothL1 { anchor, mode, beta } => smooth_l1_gradient(pred, target, anchor, *mode, *beta),
        }
    }
}

fn smooth_l1_gradient(pred: &RBox2D, target: &RBox2D, anchor: &AnchorBox, mode: EncodingMode, beta: f64) -> Result<ParamGradient> {
    let p = encode_offsets(pred, anchor, mode)?.components();
    let t = encode_offsets(target, anchor, mode)?.components();
    let g: Vec<f64> = p.iter().zip(&t).map(|(a, b)| smooth_l1_derivative(a - b, beta)).collect();
    let dt = pred.theta - anchor.theta_a;
    let d_theta = match mode {
        EncodingMode::DirectAngle => g[4],
        EncodingMode::SinCos => g[4] * dt.cos() - g[5] * dt.sin(),
    };
    Ok(ParamGradient {
        d_x: g[0] / anchor.w_a,
        d_y: g[1] / anchor.h_a,
        d_w: g[2] / pred.w,
        d_h: g[3] / pred.h,
        d_theta,
        edges: crate::gradient::EdgeSpace::Raw,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub step_sizes: StepSizes,
    pub max_steps: usize,
    pub stop_iou: f64,
    pub objective: FitObjective,
    pub param_space: ParamSpace,
    /// Step-halving attempts before a step that cannot lower the loss ends the fit.
    pub max_backtracks: u32,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            step_sizes: StepSizes::default(),
            max_steps: 2000,
            stop_iou: 0.99,
            objective: FitObjective::Gaussian(LossConfig::default()),
            param_space: ParamSpace::LogEdges,
            max_backtracks: 30,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_steps < 1 {
            return Err(Error::InvalidConfig("max_steps must be >= 1".into()));
        }
        if !(self.stop_iou > 0.0 && self.stop_iou <= 1.0) {
            return Err(Error::InvalidConfig(format!("stop_iou must be in (0, 1], got {}", self.stop_iou)));
        }
        let s = self.step_sizes;
        if !(s.center > 0.0 && s.edge > 0.0 && s.theta > 0.0) {
            return Err(Error::InvalidConfig("step sizes must be positive".into()));
        }
        if let FitObjective::Gaussian(cfg) = &self.objective {
            cfg.validate()?;
        }
        Ok(())
    }
}

/// One row of a fit trajectory; `pred` is shown in its definition's range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitStep {
    pub step: usize,
    pub pred: RBox2D,
    pub loss: f64,
    pub skew_iou: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ReachedIou,
    MaxSteps,
    /// No step along the negative gradient lowers the loss.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub trajectory: Vec<FitStep>,
    pub stop: StopReason,
}

impl FitResult {
    pub fn last(&self) -> &FitStep {
        self.trajectory.last().expect("trajectory holds at least the initial state")
    }
}

fn take_step(b: &RBox2D, g: &ParamGradient, s: &StepSizes, space: ParamSpace, scale: f64) -> RBox2D {
    let mut n = *b;
    n.x -= scale * s.center * g.d_x;
    n.y -= scale * s.center * g.d_y;
    match space {
        ParamSpace::Raw => {
            n.w -= scale * s.edge * g.d_w;
            n.h -= scale * s.edge * g.d_h;
        }
        ParamSpace::LogEdges => {
            n.w *= (-scale * s.edge * g.d_w * b.w).exp();
            n.h *= (-scale * s.edge * g.d_h * b.h).exp();
        }
    }
    n.theta -= scale * s.theta * g.d_theta;
    n
}

/// Gradient descent from `init` toward `target`.
///
/// Each step moves along the negative gradient with the configured step
/// sizes, halving the move until the loss does not increase, so the recorded
/// loss is nonincreasing. The iterate keeps its raw parameters; trajectory
/// rows show it re-expressed in `init.def`'s range.
pub fn fit_box(init: &RBox2D, target: &RBox2D, cfg: &FitConfig) -> Result<FitResult> {
    cfg.validate()?;
    init.check_edges()?;
    target.check_edges()?;
    let objective = &cfg.objective;
    let record = |step: usize, b: &RBox2D, loss: f64| FitStep {
        step,
        pred: b.normalized(),
        loss,
        skew_iou: skew_iou_2d(b, target),
    };

    let mut cur = *init;
    let mut loss = objective.loss(&cur, target)?;
    if !loss.is_finite() {
        return Err(Error::DivergedFit { step: 0, loss });
    }
    let mut trajectory = vec![record(0, &cur, loss)];
    if trajectory[0].skew_iou >= cfg.stop_iou {
        return Ok(FitResult { trajectory, stop: StopReason::ReachedIou });
    }

    for step in 1..=cfg.max_steps {
        let g = objective.gradient(&cur, target)?;
        if !g.is_finite() {
            return Err(Error::DivergedFit { step, loss: f64::NAN });
        }
        let mut accepted = None;
        let mut scale = 1.0;
        for _ in 0..=cfg.max_backtracks {
            let trial = take_step(&cur, &g, &cfg.step_sizes, cfg.param_space, scale);
            if trial.w >= MIN_EDGE && trial.h >= MIN_EDGE {
                let l = objective.loss(&trial, target)?;
                if !l.is_finite() {
                    return Err(Error::DivergedFit { step, loss: l });
                }
                if l <= loss {
                    accepted = Some((trial, l));
                    break;
                }
            }
            scale *= 0.5;
        }
        let Some((next, l)) = accepted else {
            return Ok(FitResult { trajectory, stop: StopReason::Stalled });
        };
        let moved = next != cur;
        cur = next;
        loss = l;
        let row = record(step, &cur, loss);
        let done = row.skew_iou >= cfg.stop_iou;
        trajectory.push(row);
        if done {
            return Ok(FitResult { trajectory, stop: StopReason::ReachedIou });
        }
        if !moved {
            return Ok(FitResult { trajectory, stop: StopReason::Stalled });
        }
    }
    Ok(FitResult { trajectory, stop: StopReason::MaxSteps })
}
