//! Distances between Gaussians: Wasserstein, Kullback-Leibler (both
//! directions), Jeffreys, a Jensen-Shannon approximation and Bhattacharyya.
//!
//! Everything here is generic over the dimension (2 or 3). The horizontal
//! closed forms take boxes and exist to cross-check the matrix routes.

use std::fmt;
use std::str::FromStr;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use crate::box_model::{Gaussian, RBox2D};
use crate::error::{Error, Result};
use crate::linalg::{symmetrize, SpdMatrix};

/// Values in `[-NEG_CLAMP * scale, 0)` are rounding noise and clamp to zero.
pub const NEG_CLAMP: f64 = 1e-12;

/// Angle tolerance for the horizontal closed forms.
pub const HORIZONTAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    /// Squared 2-Wasserstein distance.
    Gwd,
    /// `KL(N_p || N_t)`.
    KldPt,
    /// `KL(N_t || N_p)`.
    KldTp,
    /// Sum of both KL directions.
    Jeffreys,
    /// Jensen-Shannon with the mixture replaced by the parameter-averaged Gaussian.
    JsdApprox,
    /// Bhattacharyya distance.
    Bcd,
}

impl Metric {
    pub const ALL: [Metric; 6] =
        [Metric::Gwd, Metric::KldPt, Metric::KldTp, Metric::Jeffreys, Metric::JsdApprox, Metric::Bcd];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Gwd => "gwd",
            Metric::KldPt => "kld",
            Metric::KldTp => "kld-tp",
            Metric::Jeffreys => "jeffreys",
            Metric::JsdApprox => "jsd",
            Metric::Bcd => "bcd",
        }
    }

    pub fn is_symmetric(self) -> bool {
        !matches!(self, Metric::KldPt | Metric::KldTp)
    }

    /// Whether the metric is unchanged by a common affine map of both Gaussians.
    pub fn is_affine_invariant(self) -> bool {
        !matches!(self, Metric::Gwd)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "gwd" => Metric::Gwd,
            "kld" | "kld-pt" | "kld_pt" => Metric::KldPt,
            "kld-tp" | "kld_tp" => Metric::KldTp,
            "jeffreys" | "jef" => Metric::Jeffreys,
            "jsd" | "jsd-approx" => Metric::JsdApprox,
            "bcd" => Metric::Bcd,
            other => return Err(format!("unknown metric `{other}`")),
        })
    }
}

/// Direction of a KL divergence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KldDirection {
    /// `KL(p || t)`
    PredToTarget,
    /// `KL(t || p)`
    TargetToPred,
}

/// Additive pieces of a KL divergence; they sum to the divergence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KldTerms {
    /// Half the Mahalanobis term.
    pub quadratic: f64,
    /// Half the trace term.
    pub trace: f64,
    /// Half the log-determinant ratio.
    pub log_det: f64,
    /// `-d / 2`.
    pub constant: f64,
}

impl KldTerms {
    pub fn sum(&self) -> f64 {
        self.quadratic + self.trace + self.log_det + self.constant
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistanceResult {
    pub value: f64,
    pub metric: Metric,
    pub terms: Option<KldTerms>,
}

fn clamp_noise(value: f64, scale: f64) -> f64 {
    if value < 0.0 && value >= -NEG_CLAMP * scale.max(1.0) {
        0.0
    } else {
        value
    }
}

fn checked<const D: usize>(p: &Gaussian<D>, t: &Gaussian<D>) -> Result<()>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    p.validate()?;
    t.validate()
}

fn inv<const D: usize>(m: &SMatrix<f64, D, D>) -> Result<SMatrix<f64, D, D>>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    m.inverse().map(|i| symmetrize(&i)).ok_or_else(|| Error::NonSpd("singular covariance".into()))
}

/// Squared 2-Wasserstein distance between two Gaussians.
pub fn gwd_squared<const D: usize>(p: &Gaussian<D>, t: &Gaussian<D>) -> Result<DistanceResult>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    checked(p, t)?;
    let dmu = (p.mu - t.mu).norm_squared();
    let sp = p.sigma.sqrt_spd();
    let inner = symmetrize(&(sp * t.sigma * sp));
    let cross = inner.sqrt_spd().trace();
    let tr = p.sigma.trace() + t.sigma.trace();
    let value = dmu + tr - 2.0 * cross;
    Ok(DistanceResult { value: clamp_noise(value, tr + dmu), metric: Metric::Gwd, terms: None })
}

fn kl<const D: usize>(a: &Gaussian<D>, b: &Gaussian<D>) -> Result<KldTerms>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    let b_inv = inv(&b.sigma)?;
    let d: SVector<f64, D> = a.mu - b.mu;
    let quad = (d.transpose() * b_inv * d)[(0, 0)];
    let trace = (b_inv * a.sigma).trace();
    let log_det = (b.sigma.det() / a.sigma.det()).ln();
    Ok(KldTerms {
        quadratic: 0.5 * quad,
        trace: 0.5 * trace,
        log_det: 0.5 * log_det,
        constant: -0.5 * D as f64,
    })
}

fn kl_value<const D: usize>(a: &Gaussian<D>, b: &Gaussian<D>) -> Result<f64>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    let terms = kl(a, b)?;
    Ok(clamp_noise(terms.sum(), terms.trace.abs() + terms.quadratic))
}

/// Kullback-Leibler divergence with its term decomposition.
pub fn kld<const D: usize>(p: &Gaussian<D>, t: &Gaussian<D>, direction: KldDirection) -> Result<DistanceResult>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    checked(p, t)?;
    let (terms, metric) = match direction {
        KldDirection::PredToTarget => (kl(p, t)?, Metric::KldPt),
        KldDirection::TargetToPred => (kl(t, p)?, Metric::KldTp),
    };
    let value = clamp_noise(terms.sum(), terms.trace.abs() + terms.quadratic);
    Ok(DistanceResult { value, metric, terms: Some(terms) })
}

/// Symmetrized KL: `KL(p || t) + KL(t || p)`.
pub fn jeffreys<const D: usize>(p: &Gaussian<D>, t: &Gaussian<D>) -> Result<DistanceResult>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    checked(p, t)?;
    let value = kl_value(p, t)? + kl_value(t, p)?;
    Ok(DistanceResult { value, metric: Metric::Jeffreys, terms: None })
}

/// Parameter-averaged Gaussian used in place of the two-component mixture.
pub fn midpoint<const D: usize>(p: &Gaussian<D>, t: &Gaussian<D>) -> Gaussian<D> {
    Gaussian { mu: (p.mu + t.mu) * 0.5, sigma: (p.sigma + t.sigma) * 0.5 }
}

/// `0.5 * [KL(t || m) + KL(p || m)]` with `m` the parameter-averaged Gaussian.
pub fn jsd_approx<const D: usize>(p: &Gaussian<D>, t: &Gaussian<D>) -> Result<DistanceResult>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    checked(p, t)?;
    let m = midpoint(p, t);
    let value = 0.5 * (kl_value(t, &m)? + kl_value(p, &m)?);
    Ok(DistanceResult { value, metric: Metric::JsdApprox, terms: None })
}

/// Bhattacharyya distance.
pub fn bcd<const D: usize>(p: &Gaussian<D>, t: &Gaussian<D>) -> Result<DistanceResult>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    checked(p, t)?;
    let avg = (p.sigma + t.sigma) * 0.5;
    let avg_inv = inv(&avg)?;
    let d = p.mu - t.mu;
    let quad = (d.transpose() * avg_inv * d)[(0, 0)] / 8.0;
    let log_term = 0.5 * (avg.det() / (p.sigma.det() * t.sigma.det()).sqrt()).ln();
    let value = clamp_noise(quad + log_term, 1.0);
    Ok(DistanceResult { value, metric: Metric::Bcd, terms: None })
}

/// Dispatches on `metric`.
pub fn distance<const D: usize>(metric: Metric, p: &Gaussian<D>, t: &Gaussian<D>) -> Result<DistanceResult>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    match metric {
        Metric::Gwd => gwd_squared(p, t),
        Metric::KldPt => kld(p, t, KldDirection::PredToTarget),
        Metric::KldTp => kld(p, t, KldDirection::TargetToPred),
        Metric::Jeffreys => jeffreys(p, t),
        Metric::JsdApprox => jsd_approx(p, t),
        Metric::Bcd => bcd(p, t),
    }
}

fn require_horizontal(b: &RBox2D) -> Result<()> {
    if b.is_horizontal(HORIZONTAL_TOL) {
        Ok(())
    } else {
        Err(Error::NotHorizontal(b.theta))
    }
}

/// `dx^2 + dy^2 + (dw^2 + dh^2) / 4` for boxes whose angles are multiples of pi.
pub fn gwd_horizontal_closed_form(a: &RBox2D, b: &RBox2D) -> Result<f64> {
    require_horizontal(a)?;
    require_horizontal(b)?;
    let (dx, dy, dw, dh) = (a.x - b.x, a.y - b.y, a.w - b.w, a.h - b.h);
    Ok(dx * dx + dy * dy + (dw * dw + dh * dh) / 4.0)
}

/// `KL(p || t)` for horizontal boxes written in box parameters.
pub fn kld_horizontal_closed_form(p: &RBox2D, t: &RBox2D) -> Result<f64> {
    require_horizontal(p)?;
    require_horizontal(t)?;
    p.check_edges()?;
    t.check_edges()?;
    let (dx, dy) = (p.x - t.x, p.y - t.y);
    let (wp2, hp2, wt2, ht2) = (p.w * p.w, p.h * p.h, t.w * t.w, t.h * t.h);
    Ok(0.5
        * (wp2 / wt2 + hp2 / ht2 + 4.0 * dx * dx / wt2 + 4.0 * dy * dy / ht2 + (wt2 / wp2).ln() + (ht2 / hp2).ln()
            - 2.0))
}

/// `KL(p || t)` terms computed from box parameters for any angles.
///
/// Trace term: `(h_p^2/w_t^2 + w_p^2/h_t^2) sin^2(dtheta) + (h_p^2/h_t^2 + w_p^2/w_t^2) cos^2(dtheta)`.
pub fn kld_terms_from_boxes(p: &RBox2D, t: &RBox2D) -> Result<KldTerms> {
    p.check_edges()?;
    t.check_edges()?;
    let (dx, dy) = (p.x - t.x, p.y - t.y);
    let (st, ct) = t.theta.sin_cos();
    let (wp2, hp2, wt2, ht2) = (p.w * p.w, p.h * p.h, t.w * t.w, t.h * t.h);
    let along = dx * ct + dy * st;
    let across = dy * ct - dx * st;
    let quad = 4.0 * along * along / wt2 + 4.0 * across * across / ht2;
    let (sd, cd) = (p.theta - t.theta).sin_cos();
    let trace = (hp2 / wt2 + wp2 / ht2) * sd * sd + (hp2 / ht2 + wp2 / wt2) * cd * cd;
    let log_det = (ht2 / hp2).ln() + (wt2 / wp2).ln();
    Ok(KldTerms { quadratic: 0.5 * quad, trace: 0.5 * trace, log_det: 0.5 * log_det, constant: -1.0 })
}
