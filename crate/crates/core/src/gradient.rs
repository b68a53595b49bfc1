//! Analytic gradients of the Gaussian losses with respect to the five box
//! parameters, and the central-difference oracle that checks them.
//!
//! Each distance is differentiated with respect to the predicted Gaussian
//! (`dD/dmu_p`, `dD/dSigma_p`) and then pulled back through
//! `Sigma = R diag(w^2/4, h^2/4) R^T`.

use nalgebra::{Matrix2, Vector2};

use crate::box_model::{to_gaussian_2d, RBox2D, MIN_EDGE};
use crate::divergence::{midpoint, Metric, HORIZONTAL_TOL};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, SpdMatrix};
use crate::loss::{box_distance, gaussian_box_loss, normalize_loss_derivative, LossConfig};

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Whether edge partials are taken w.r.t. `w, h` or `ln w, ln h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum EdgeSpace {
    #[default]
    Raw,
    Log,
}

/// Partials of a scalar with respect to `(x, y, w, h, theta)` of one box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamGradient {
    pub d_x: f64,
    pub d_y: f64,
    pub d_w: f64,
    pub d_h: f64,
    pub d_theta: f64,
    pub edges: EdgeSpace,
}

impl ParamGradient {
    pub const NAMES: [&'static str; 5] = ["x", "y", "w", "h", "theta"];

    pub fn zero() -> Self {
        ParamGradient { d_x: 0.0, d_y: 0.0, d_w: 0.0, d_h: 0.0, d_theta: 0.0, edges: EdgeSpace::Raw }
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.d_x, self.d_y, self.d_w, self.d_h, self.d_theta]
    }

    pub fn scaled(&self, k: f64) -> Self {
        ParamGradient {
            d_x: self.d_x * k,
            d_y: self.d_y * k,
            d_w: self.d_w * k,
            d_h: self.d_h * k,
            d_theta: self.d_theta * k,
            edges: self.edges,
        }
    }

    /// Re-expresses raw edge partials as log-edge partials for a box with edges `w, h`.
    pub fn to_log_edges(&self, w: f64, h: f64) -> Self {
        match self.edges {
            EdgeSpace::Log => *self,
            EdgeSpace::Raw => ParamGradient { d_w: self.d_w * w, d_h: self.d_h * h, edges: EdgeSpace::Log, ..*self },
        }
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Gradient of a distance with respect to the predicted Gaussian.
#[derive(Debug, Clone, Copy, PartialEq)]
struct MomentGradient {
    mu: Vector2<f64>,
    sigma: Matrix2<f64>,
}

impl std::ops::Add for MomentGradient {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        MomentGradient { mu: self.mu + o.mu, sigma: self.sigma + o.sigma }
    }
}

impl std::ops::Mul<f64> for MomentGradient {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        MomentGradient { mu: self.mu * k, sigma: self.sigma * k }
    }
}

type G2 = crate::box_model::Gaussian2;

fn inverse(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    m.inverse().map(|i| symmetrize(&i)).ok_or_else(|| Error::NonSpd("singular covariance".into()))
}

/// Partials of `KL(a || b)` with respect to both arguments.
fn kl_grads(a: &G2, b: &G2) -> Result<(MomentGradient, MomentGradient)> {
    let a_inv = inverse(&a.sigma)?;
    let b_inv = inverse(&b.sigma)?;
    let d = a.mu - b.mu;
    let bd = b_inv * d;
    let wrt_a = MomentGradient { mu: bd, sigma: (b_inv - a_inv) * 0.5 };
    let wrt_b = MomentGradient {
        mu: -bd,
        sigma: (-(bd * bd.transpose()) - b_inv * a.sigma * b_inv + b_inv) * 0.5,
    };
    Ok((wrt_a, wrt_b))
}

fn moment_gradient(metric: Metric, p: &G2, t: &G2) -> Result<MomentGradient> {
    Ok(match metric {
        Metric::KldPt => kl_grads(p, t)?.0,
        Metric::KldTp => kl_grads(t, p)?.1,
        Metric::Jeffreys => kl_grads(p, t)?.0 + kl_grads(t, p)?.1,
        Metric::JsdApprox => {
            // m depends on p with weight 1/2 in both moments
            let m = midpoint(p, t);
            let (pa, pm) = kl_grads(p, &m)?;
            let (_, tm) = kl_grads(t, &m)?;
            (pa + pm * 0.5 + tm * 0.5) * 0.5
        }
        Metric::Bcd => {
            let avg = (p.sigma + t.sigma) * 0.5;
            let avg_inv = inverse(&avg)?;
            let p_inv = inverse(&p.sigma)?;
            let ad = avg_inv * (p.mu - t.mu);
            MomentGradient {
                mu: ad * 0.25,
                sigma: -(ad * ad.transpose()) / 16.0 + avg_inv * 0.25 - p_inv * 0.25,
            }
        }
        Metric::Gwd => {
            // 2x2: Tr sqrt(Sp^1/2 St Sp^1/2) = sqrt(tr(Sp St) + 2 sqrt(det Sp det St))
            let root_det = (p.sigma.det() * t.sigma.det()).sqrt();
            let s = ((p.sigma * t.sigma).trace() + 2.0 * root_det).sqrt();
            let p_inv = inverse(&p.sigma)?;
            MomentGradient {
                mu: (p.mu - t.mu) * 2.0,
                sigma: Matrix2::identity() - (t.sigma + p_inv * root_det) / s,
            }
        }
    })
}

/// Pulls a moment gradient back to box parameters.
fn to_box_params(g: &MomentGradient, b: &RBox2D) -> ParamGradient {
    let (s, c) = b.theta.sin_cos();
    let r = Matrix2::new(c, -s, s, c);
    let dsig_dw = r * Matrix2::new(b.w / 2.0, 0.0, 0.0, 0.0) * r.transpose();
    let dsig_dh = r * Matrix2::new(0.0, 0.0, 0.0, b.h / 2.0) * r.transpose();
    let k = (b.w * b.w - b.h * b.h) / 4.0;
    let (s2, c2) = (2.0 * b.theta).sin_cos();
    let dsig_dt = Matrix2::new(-k * s2, k * c2, k * c2, k * s2);
    let sym = symmetrize(&g.sigma);
    ParamGradient {
        d_x: g.mu[0],
        d_y: g.mu[1],
        d_w: sym.dot(&dsig_dw),
        d_h: sym.dot(&dsig_dh),
        d_theta: sym.dot(&dsig_dt),
        edges: EdgeSpace::Raw,
    }
}

/// Raw distance and its analytic partials with respect to the predicted box.
pub fn distance_gradient(metric: Metric, pred: &RBox2D, target: &RBox2D) -> Result<(f64, ParamGradient)> {
    let p = to_gaussian_2d(pred)?;
    let t = to_gaussian_2d(target)?;
    let d = box_distance(metric, pred, target)?;
    let g = moment_gradient(metric, &p, &t)?;
    Ok((d, to_box_params(&g, pred)))
}

/// Analytic partials of [`gaussian_box_loss`] with respect to the predicted box.
pub fn analytic_gradient(pred: &RBox2D, target: &RBox2D, cfg: &LossConfig) -> Result<ParamGradient> {
    cfg.validate()?;
    let (d, g) = distance_gradient(cfg.metric, pred, target)?;
    Ok(g.scaled(normalize_loss_derivative(d, cfg)))
}

/// Which box a finite difference perturbs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Pred,
    Target,
}

/// Central differences of the loss with respect to the predicted box.
pub fn finite_difference_gradient(pred: &RBox2D, target: &RBox2D, cfg: &LossConfig, step: f64) -> Result<ParamGradient> {
    finite_difference_wrt(pred, target, step, Side::Pred, |p, t| gaussian_box_loss(p, t, cfg))
}

/// Central differences of an arbitrary box-pair function.
///
/// The perturbed box is re-expressed in its definition's range after each
/// angle step, so the scalar must not depend on the representation.
pub fn finite_difference_wrt<F>(pred: &RBox2D, target: &RBox2D, step: f64, side: Side, f: F) -> Result<ParamGradient>
where
    F: Fn(&RBox2D, &RBox2D) -> Result<f64>,
{
    if !(step > 0.0) {
        return Err(Error::InvalidConfig(format!("finite-difference step must be positive, got {step}")));
    }
    let base = match side {
        Side::Pred => pred,
        Side::Target => target,
    };
    if base.w - 2.0 * step < MIN_EDGE || base.h - 2.0 * step < MIN_EDGE {
        return Err(Error::DegenerateBox(format!("edges w={} h={} too close to the floor for step {step}", base.w, base.h)));
    }
    let eval = |b: RBox2D| -> Result<f64> {
        match side {
            Side::Pred => f(&b, target),
            Side::Target => f(pred, &b),
        }
    };
    let mut out = [0.0; 5];
    for (i, slot) in out.iter_mut().enumerate() {
        let mut plus = *base;
        let mut minus = *base;
        match i {
            0 => {
                plus.x += step;
                minus.x -= step;
            }
            1 => {
                plus.y += step;
                minus.y -= step;
            }
            2 => {
                plus.w += step;
                minus.w -= step;
            }
            3 => {
                plus.h += step;
                minus.h -= step;
            }
            _ => {
                plus.theta += step;
                minus.theta -= step;
                plus = plus.normalized();
                minus = minus.normalized();
            }
        }
        *slot = (eval(plus)? - eval(minus)?) / (2.0 * step);
    }
    Ok(ParamGradient { d_x: out[0], d_y: out[1], d_w: out[2], d_h: out[3], d_theta: out[4], edges: EdgeSpace::Raw })
}

/// Raw-KLD partials for a target whose angle is a multiple of pi, in the
/// closed forms `4 dx / w_t^2`, `4 dy / h_t^2`,
/// `(h_p^2/h_t^2) cos^2 + (h_p^2/w_t^2) sin^2 - 1` (and its `w` twin), and
/// `1/2 ((h_p^2 - w_p^2)/w_t^2 + (w_p^2 - h_p^2)/h_t^2) sin(2 dtheta)`.
///
/// The angle partial carries the 1/2 of the divergence; without it the
/// expression is the derivative of the trace term alone, see
/// [`kld_trace_angle_partial`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KldAxisPartials {
    pub d_x: f64,
    pub d_y: f64,
    pub d_log_w: f64,
    pub d_log_h: f64,
    pub d_theta: f64,
}

pub fn kld_axis_aligned_partials(pred: &RBox2D, target: &RBox2D) -> Result<KldAxisPartials> {
    if !target.is_horizontal(HORIZONTAL_TOL) {
        return Err(Error::NotHorizontal(target.theta));
    }
    pred.check_edges()?;
    target.check_edges()?;
    let (wp2, hp2, wt2, ht2) = (pred.w * pred.w, pred.h * pred.h, target.w * target.w, target.h * target.h);
    let dt = pred.theta - target.theta;
    let (s, c) = dt.sin_cos();
    Ok(KldAxisPartials {
        d_x: 4.0 * (pred.x - target.x) / wt2,
        d_y: 4.0 * (pred.y - target.y) / ht2,
        d_log_w: wp2 / wt2 * c * c + wp2 / ht2 * s * s - 1.0,
        d_log_h: hp2 / ht2 * c * c + hp2 / wt2 * s * s - 1.0,
        d_theta: 0.5 * kld_trace_angle_partial(pred, target),
    })
}

/// `((h_p^2 - w_p^2)/w_t^2 + (w_p^2 - h_p^2)/h_t^2) sin(2 dtheta)`: the angle
/// derivative of `Tr(Sigma_t^-1 Sigma_p)` for an axis-aligned target.
pub fn kld_trace_angle_partial(pred: &RBox2D, target: &RBox2D) -> f64 {
    let (wp2, hp2, wt2, ht2) = (pred.w * pred.w, pred.h * pred.h, target.w * target.w, target.h * target.h);
    ((hp2 - wp2) / wt2 + (wp2 - hp2) / ht2) * (2.0 * (pred.theta - target.theta)).sin()
}
