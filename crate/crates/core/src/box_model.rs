//! Rotated boxes, their two angle conventions, the Gaussian view of a box,
//! and the anchor-relative offset encodings used by the Smooth-L1 baseline.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;

use nalgebra::{Matrix2, Matrix3, SMatrix, SVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::angle::{limit_period, wrap_to_pi};
use crate::error::{Error, Result};
use crate::linalg::{check_spd, SpdMatrix};

/// Smallest admissible edge length.
pub const MIN_EDGE: f64 = 1e-6;

/// Eigenvalue gap below which a covariance is treated as isotropic.
pub const ISOTROPIC_TOL: f64 = 1e-9;

/// Angle convention of a rotated box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub enum BoxDefinition {
    /// `theta` in `[-pi/2, 0)`, measured from the x-axis to the `w` edge.
    #[default]
    #[serde(rename = "oc", alias = "OpenCV", alias = "opencv")]
    OpenCV,
    /// `theta` in `[-pi/2, pi/2)`, measured from the x-axis to the long edge `w >= h`.
    #[serde(rename = "le", alias = "LongEdge", alias = "long_edge")]
    LongEdge,
}

impl BoxDefinition {
    pub fn name(self) -> &'static str {
        match self {
            BoxDefinition::OpenCV => "oc",
            BoxDefinition::LongEdge => "le",
        }
    }

    /// Half-open angle range `[lo, hi)`.
    pub fn range(self) -> (f64, f64) {
        match self {
            BoxDefinition::OpenCV => (-FRAC_PI_2, 0.0),
            BoxDefinition::LongEdge => (-FRAC_PI_2, FRAC_PI_2),
        }
    }
}

impl fmt::Display for BoxDefinition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for BoxDefinition {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "oc" | "opencv" => Ok(BoxDefinition::OpenCV),
            "le" | "longedge" | "long_edge" => Ok(BoxDefinition::LongEdge),
            other => Err(format!("unknown box definition `{other}` (expected oc or le)")),
        }
    }
}

/// A rotated 2-D box. The `w` edge points along `(cos theta, sin theta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RBox2D {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
    #[serde(default)]
    pub def: BoxDefinition,
}

impl RBox2D {
    /// Builds a box and checks it against its definition.
    pub fn new(x: f64, y: f64, w: f64, h: f64, theta: f64, def: BoxDefinition) -> Result<Self> {
        let b = RBox2D { x, y, w, h, theta, def };
        b.validate()?;
        Ok(b)
    }

    /// Builds the box describing the same rectangle, re-expressed in `def`'s range.
    pub fn canonical(x: f64, y: f64, w: f64, h: f64, theta: f64, def: BoxDefinition) -> Self {
        RBox2D { x, y, w, h, theta, def }.normalized()
    }

    pub fn check_edges(&self) -> Result<()> {
        if !(self.w >= MIN_EDGE && self.h >= MIN_EDGE) {
            return Err(Error::DegenerateBox(format!(
                "edges w={} h={} below {MIN_EDGE}",
                self.w, self.h
            )));
        }
        if ![self.x, self.y, self.theta].iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateBox("non-finite parameter".into()));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.check_edges()?;
        let (lo, hi) = self.def.range();
        if !(self.theta >= lo && self.theta < hi) {
            return Err(Error::AngleOutOfRange { theta: self.theta, def: self.def.name() });
        }
        if self.def == BoxDefinition::LongEdge && self.w < self.h {
            return Err(Error::DegenerateBox(format!(
                "long-edge box needs w >= h, got w={} h={}",
                self.w, self.h
            )));
        }
        Ok(())
    }

    /// Same rectangle with its parameters brought into the range of its own definition.
    pub fn normalized(&self) -> Self {
        convert_definition(self, self.def)
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn center(&self) -> Vector2<f64> {
        Vector2::new(self.x, self.y)
    }

    /// Uniform scaling about the origin.
    pub fn scaled(&self, s: f64) -> Self {
        RBox2D { x: self.x * s, y: self.y * s, w: self.w * s, h: self.h * s, ..*self }
    }

    pub fn is_horizontal(&self, tol: f64) -> bool {
        crate::angle::distance_to_multiple(self.theta, PI) <= tol
    }
}

/// Re-expresses `b` under `target`, preserving the rectangle.
///
/// Works for any input angle; a box already valid under `target` comes back
/// unchanged.
pub fn convert_definition(b: &RBox2D, target: BoxDefinition) -> RBox2D {
    let (mut w, mut h, mut theta) = (b.w, b.h, b.theta);
    match target {
        BoxDefinition::OpenCV => {
            theta = limit_period(theta, -FRAC_PI_2, PI);
            if theta >= 0.0 {
                std::mem::swap(&mut w, &mut h);
                theta -= FRAC_PI_2;
            }
            // theta - pi/2 may round onto the excluded bound
            if theta >= 0.0 {
                theta = -FRAC_PI_2;
            }
        }
        BoxDefinition::LongEdge => {
            if w < h {
                std::mem::swap(&mut w, &mut h);
                theta += FRAC_PI_2;
            }
            theta = limit_period(theta, -FRAC_PI_2, PI);
        }
    }
    RBox2D { x: b.x, y: b.y, w, h, theta, def: target }
}

/// A multivariate normal with mean `mu` and covariance `sigma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gaussian<const D: usize> {
    pub mu: SVector<f64, D>,
    pub sigma: SMatrix<f64, D, D>,
}

pub type Gaussian2 = Gaussian<2>;
pub type Gaussian3 = Gaussian<3>;

impl<const D: usize> Gaussian<D>
where
    SMatrix<f64, D, D>: SpdMatrix,
{
    pub fn new(mu: SVector<f64, D>, sigma: SMatrix<f64, D, D>) -> Result<Self> {
        let g = Gaussian { mu, sigma };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonSpd("non-finite mean".into()));
        }
        check_spd(&self.sigma).map_err(Error::NonSpd)
    }

    /// Distribution of `M x` for `x ~ self`.
    pub fn transformed(&self, m: &SMatrix<f64, D, D>) -> Self {
        let s = m * self.sigma * m.transpose();
        Gaussian { mu: m * self.mu, sigma: (s + s.transpose()) * 0.5 }
    }

    /// Distribution of `M x + b`.
    pub fn affine(&self, m: &SMatrix<f64, D, D>, b: &SVector<f64, D>) -> Self {
        let mut g = self.transformed(m);
        g.mu += b;
        g
    }

    pub fn scaled(&self, s: f64) -> Self {
        Gaussian { mu: self.mu * s, sigma: self.sigma * (s * s) }
    }
}

fn rotation2(theta: f64) -> Matrix2<f64> {
    let (s, c) = theta.sin_cos();
    Matrix2::new(c, -s, s, c)
}

/// Square root of the box covariance, `R diag(w/2, h/2) R^T`.
pub fn sqrt_covariance_2d(w: f64, h: f64, theta: f64) -> Matrix2<f64> {
    let r = rotation2(theta);
    r * Matrix2::new(w / 2.0, 0.0, 0.0, h / 2.0) * r.transpose()
}

/// Gaussian of a 2-D box: `mu = (x, y)`, `sigma = (R Lambda R^T)^2`.
pub fn to_gaussian_2d(b: &RBox2D) -> Result<Gaussian2> {
    b.check_edges()?;
    let r = rotation2(b.theta);
    let lam = Matrix2::new(b.w * b.w / 4.0, 0.0, 0.0, b.h * b.h / 4.0);
    let s = r * lam * r.transpose();
    Ok(Gaussian { mu: b.center(), sigma: (s + s.transpose()) * 0.5 })
}

/// Recovers a box from a 2-D Gaussian.
///
/// The larger eigenvalue becomes `w` before the result is brought into
/// `target`'s range. An isotropic covariance yields a square with angle 0
/// (or `-pi/2` under the OpenCV range, which excludes 0).
pub fn from_gaussian_2d(g: &Gaussian2, target: BoxDefinition) -> Result<RBox2D> {
    g.validate()?;
    let s = &g.sigma;
    let (a, b, c) = (s[(0, 0)], 0.5 * (s[(0, 1)] + s[(1, 0)]), s[(1, 1)]);
    let ev = s.eigenvalues_sym();
    let (lo, hi) = (ev[0], ev[1]);
    let raw = if hi - lo <= ISOTROPIC_TOL * hi.max(1.0) {
        let e = 0.5 * (lo + hi);
        let side = 2.0 * e.sqrt();
        RBox2D { x: g.mu[0], y: g.mu[1], w: side, h: side, theta: 0.0, def: target }
    } else {
        let theta = 0.5 * (2.0 * b).atan2(a - c);
        RBox2D {
            x: g.mu[0],
            y: g.mu[1],
            w: 2.0 * hi.sqrt(),
            h: 2.0 * lo.sqrt(),
            theta,
            def: target,
        }
    };
    Ok(convert_definition(&raw, target))
}

/// A yaw-only 3-D box. `w` and `h` span the ground plane, `l` is the vertical extent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RBox3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub w: f64,
    pub h: f64,
    pub l: f64,
    pub theta: f64,
}

pub type Cube3D = RBox3D;

impl RBox3D {
    pub fn check_edges(&self) -> Result<()> {
        if !(self.w >= MIN_EDGE && self.h >= MIN_EDGE && self.l >= MIN_EDGE) {
            return Err(Error::DegenerateBox(format!(
                "edges w={} h={} l={} below {MIN_EDGE}",
                self.w, self.h, self.l
            )));
        }
        if ![self.x, self.y, self.z, self.theta].iter().all(|v| v.is_finite()) {
            return Err(Error::DegenerateBox("non-finite parameter".into()));
        }
        Ok(())
    }

    /// Bird's-eye-view footprint.
    pub fn bev(&self) -> RBox2D {
        RBox2D { x: self.x, y: self.y, w: self.w, h: self.h, theta: self.theta, def: BoxDefinition::LongEdge }
    }

    pub fn volume(&self) -> f64 {
        self.w * self.h * self.l
    }

    pub fn scaled(&self, s: f64) -> Self {
        RBox3D {
            x: self.x * s,
            y: self.y * s,
            z: self.z * s,
            w: self.w * s,
            h: self.h * s,
            l: self.l * s,
            theta: self.theta,
        }
    }
}

/// Gaussian of a yaw-only cube; the rotation fixes the z axis.
pub fn to_gaussian_3d(c: &RBox3D) -> Result<Gaussian3> {
    c.check_edges()?;
    let (s, co) = c.theta.sin_cos();
    let r = Matrix3::new(co, -s, 0.0, s, co, 0.0, 0.0, 0.0, 1.0);
    let lam = Matrix3::from_diagonal(&Vector3::new(c.w * c.w / 4.0, c.h * c.h / 4.0, c.l * c.l / 4.0));
    let sig = r * lam * r.transpose();
    Ok(Gaussian { mu: Vector3::new(c.x, c.y, c.z), sigma: (sig + sig.transpose()) * 0.5 })
}

/// Anchor box; horizontal anchors carry `theta_a = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorBox {
    pub x_a: f64,
    pub y_a: f64,
    pub w_a: f64,
    pub h_a: f64,
    #[serde(default)]
    pub theta_a: f64,
}

impl AnchorBox {
    pub fn horizontal(x_a: f64, y_a: f64, w_a: f64, h_a: f64) -> Self {
        AnchorBox { x_a, y_a, w_a, h_a, theta_a: 0.0 }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.w_a >= MIN_EDGE && self.h_a >= MIN_EDGE) {
            return Err(Error::DegenerateBox(format!(
                "anchor edges w={} h={} below {MIN_EDGE}",
                self.w_a, self.h_a
            )));
        }
        Ok(())
    }

    /// The anchor as a box (tagged long-edge, range not enforced).
    pub fn as_box(&self) -> RBox2D {
        RBox2D {
            x: self.x_a,
            y: self.y_a,
            w: self.w_a,
            h: self.h_a,
            theta: self.theta_a,
            def: BoxDefinition::LongEdge,
        }
    }
}

impl From<&RBox2D> for AnchorBox {
    fn from(b: &RBox2D) -> Self {
        AnchorBox { x_a: b.x, y_a: b.y, w_a: b.w, h_a: b.h, theta_a: b.theta }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EncodingMode {
    DirectAngle,
    SinCos,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnglePart {
    Direct { t_theta: f64 },
    SinCos { t_sin: f64, t_cos: f64 },
}

/// Anchor-relative regression targets.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetEncoding {
    pub tx: f64,
    pub ty: f64,
    pub tw: f64,
    pub th: f64,
    pub angle: AnglePart,
}

impl OffsetEncoding {
    pub fn mode(&self) -> EncodingMode {
        match self.angle {
            AnglePart::Direct { .. } => EncodingMode::DirectAngle,
            AnglePart::SinCos { .. } => EncodingMode::SinCos,
        }
    }

    /// Builds a sin/cos encoding from a raw (unnormalized) predicted pair.
    pub fn with_raw_sincos(tx: f64, ty: f64, tw: f64, th: f64, raw_sin: f64, raw_cos: f64) -> Result<Self> {
        let (t_sin, t_cos) = normalize_sincos(raw_sin, raw_cos)?;
        Ok(OffsetEncoding { tx, ty, tw, th, angle: AnglePart::SinCos { t_sin, t_cos } })
    }

    /// Components in a fixed order: tx, ty, tw, th, then the angle part.
    pub fn components(&self) -> Vec<f64> {
        let mut v = vec![self.tx, self.ty, self.tw, self.th];
        match self.angle {
            AnglePart::Direct { t_theta } => v.push(t_theta),
            AnglePart::SinCos { t_sin, t_cos } => {
                v.push(t_sin);
                v.push(t_cos);
            }
        }
        v
    }
}

/// Projects a predicted `(sin, cos)` pair onto the unit circle.
pub fn normalize_sincos(s: f64, c: f64) -> Result<(f64, f64)> {
    let n = s.hypot(c);
    if !(n > 1e-12) || !n.is_finite() {
        return Err(Error::DegenerateBox(format!("sin/cos pair ({s}, {c}) has no direction")));
    }
    Ok((s / n, c / n))
}

/// Offsets of `b` relative to `anchor`; the direct angle offset is wrapped to `(-pi, pi]`.
pub fn encode_offsets(b: &RBox2D, anchor: &AnchorBox, mode: EncodingMode) -> Result<OffsetEncoding> {
    b.check_edges()?;
    anchor.check()?;
    let d = b.theta - anchor.theta_a;
    let angle = match mode {
        EncodingMode::DirectAngle => AnglePart::Direct { t_theta: wrap_to_pi(d) },
        EncodingMode::SinCos => {
            let (t_sin, t_cos) = d.sin_cos();
            AnglePart::SinCos { t_sin, t_cos }
        }
    };
    Ok(OffsetEncoding {
        tx: (b.x - anchor.x_a) / anchor.w_a,
        ty: (b.y - anchor.y_a) / anchor.h_a,
        tw: (b.w / anchor.w_a).ln(),
        th: (b.h / anchor.h_a).ln(),
        angle,
    })
}

/// Inverse of [`encode_offsets`].
///
/// The angle is wrapped to `(-pi, pi]` and edges are not swapped, so the result
/// re-encodes to `enc`; call [`RBox2D::normalized`] to bring it into `def`'s range.
pub fn decode_offsets(enc: &OffsetEncoding, anchor: &AnchorBox, def: BoxDefinition) -> RBox2D {
    let d = match enc.angle {
        AnglePart::Direct { t_theta } => t_theta,
        AnglePart::SinCos { t_sin, t_cos } => t_sin.atan2(t_cos),
    };
    RBox2D {
        x: enc.tx * anchor.w_a + anchor.x_a,
        y: enc.ty * anchor.h_a + anchor.y_a,
        w: anchor.w_a * enc.tw.exp(),
        h: anchor.h_a * enc.th.exp(),
        theta: wrap_to_pi(anchor.theta_a + d),
        def,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_4;

    const OC: BoxDefinition = BoxDefinition::OpenCV;
    const LE: BoxDefinition = BoxDefinition::LongEdge;

    fn b(x: f64, y: f64, w: f64, h: f64, t: f64, def: BoxDefinition) -> RBox2D {
        RBox2D { x, y, w, h, theta: t, def }
    }

    #[test]
    fn opencv_to_long_edge_keeps_wide_box() {
        let out = convert_definition(&b(0.0, 0.0, 4.0, 2.0, -FRAC_PI_4, OC), LE);
        assert_eq!(out, b(0.0, 0.0, 4.0, 2.0, -FRAC_PI_4, LE));
    }

    #[test]
    fn opencv_to_long_edge_swaps_tall_box() {
        let out = convert_definition(&b(0.0, 0.0, 2.0, 4.0, -FRAC_PI_4, OC), LE);
        assert_eq!((out.w, out.h), (4.0, 2.0));
        assert_relative_eq!(out.theta, FRAC_PI_4, epsilon = 1e-15);
        out.validate().unwrap();
    }

    #[test]
    fn opencv_range_excludes_zero() {
        let out = convert_definition(&b(0.0, 0.0, 4.0, 2.0, 0.0, LE), OC);
        assert_eq!(out, b(0.0, 0.0, 2.0, 4.0, -FRAC_PI_2, OC));
        out.validate().unwrap();
    }

    #[test]
    fn validate_rejects() {
        assert!(matches!(RBox2D::new(0.0, 0.0, 1e-7, 1.0, -0.1, OC), Err(Error::DegenerateBox(_))));
        assert!(matches!(RBox2D::new(0.0, 0.0, 1.0, 1.0, 0.0, OC), Err(Error::AngleOutOfRange { .. })));
        assert!(RBox2D::new(0.0, 0.0, 1.0, 2.0, 0.0, LE).is_err());
        assert!(RBox2D::new(0.0, 0.0, 2.0, 1.0, 0.0, LE).is_ok());
    }

    #[test]
    fn gaussian_of_axis_aligned_box() {
        let g = to_gaussian_2d(&b(0.0, 0.0, 4.0, 2.0, 0.0, LE)).unwrap();
        assert_eq!(g.mu, Vector2::new(0.0, 0.0));
        assert_relative_eq!(g.sigma, Matrix2::new(4.0, 0.0, 0.0, 1.0), epsilon = 1e-15);
    }

    #[test]
    fn gaussian_of_diagonal_box() {
        // sqrt = [[1.5, .5], [.5, 1.5]] by hand; its square is [[2.5, 1.5], [1.5, 2.5]]
        let g = to_gaussian_2d(&b(0.0, 0.0, 4.0, 2.0, FRAC_PI_4, LE)).unwrap();
        assert_relative_eq!(g.sigma, Matrix2::new(2.5, 1.5, 1.5, 2.5), epsilon = 1e-12);
        let ev = g.sigma.eigenvalues_sym();
        assert_relative_eq!(ev[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(ev[1], 4.0, epsilon = 1e-12);
    }

    #[test]
    fn exchanged_edges_share_a_gaussian() {
        let a = to_gaussian_2d(&b(0.0, 0.0, 70.0, 10.0, -FRAC_PI_2, OC)).unwrap();
        let c = to_gaussian_2d(&b(0.0, 0.0, 10.0, 70.0, 0.0, OC)).unwrap();
        assert_relative_eq!(a.sigma, c.sigma, epsilon = 1e-9);
    }

    #[test]
    fn degenerate_box_has_no_gaussian() {
        assert!(matches!(to_gaussian_2d(&b(0.0, 0.0, 0.0, 1.0, 0.0, LE)), Err(Error::DegenerateBox(_))));
    }

    #[test]
    fn box_from_diagonal_gaussian() {
        let g = Gaussian2::new(Vector2::zeros(), Matrix2::new(4.0, 0.0, 0.0, 1.0)).unwrap();
        let le = from_gaussian_2d(&g, LE).unwrap();
        assert_eq!(le, b(0.0, 0.0, 4.0, 2.0, 0.0, LE));
        // (4, 2, 0) lies outside [-pi/2, 0); OpenCV stores the same rectangle as (2, 4, -pi/2)
        let oc = from_gaussian_2d(&g, OC).unwrap();
        assert_eq!((oc.w, oc.h), (2.0, 4.0));
        assert_relative_eq!(oc.theta, -FRAC_PI_2);
    }

    #[test]
    fn isotropic_gaussian_gives_square_at_zero() {
        let g = Gaussian2::new(Vector2::zeros(), Matrix2::identity()).unwrap();
        assert_eq!(from_gaussian_2d(&g, LE).unwrap(), b(0.0, 0.0, 2.0, 2.0, 0.0, LE));
        let oc = from_gaussian_2d(&g, OC).unwrap();
        assert_eq!((oc.w, oc.h, oc.theta), (2.0, 2.0, -FRAC_PI_2));
    }

    #[test]
    fn cube_gaussian() {
        let c = RBox3D { x: 0.0, y: 0.0, z: 0.0, w: 4.0, h: 2.0, l: 6.0, theta: 0.0 };
        let g = to_gaussian_3d(&c).unwrap();
        assert_relative_eq!(g.sigma, Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 9.0)));

        let r = RBox3D { theta: FRAC_PI_4, ..c };
        let g3 = to_gaussian_3d(&r).unwrap();
        let g2 = to_gaussian_2d(&b(0.0, 0.0, 4.0, 2.0, FRAC_PI_4, LE)).unwrap();
        assert_relative_eq!(g3.sigma.fixed_view::<2, 2>(0, 0).into_owned(), g2.sigma, epsilon = 1e-12);
        assert_eq!(g3.sigma[(2, 2)], 9.0);
        assert_eq!(g3.sigma[(0, 2)], 0.0);

        let shifted = to_gaussian_3d(&RBox3D { z: 5.0, ..r }).unwrap();
        assert_eq!(shifted.sigma, g3.sigma);
        assert_eq!(shifted.mu, Vector3::new(0.0, 0.0, 5.0));
    }

    #[test]
    fn offsets_of_scaled_shifted_box() {
        let anchor = AnchorBox::horizontal(0.0, 0.0, 2.0, 2.0);
        let enc = encode_offsets(&b(1.0, 1.0, 4.0, 4.0, 0.0, LE), &anchor, EncodingMode::DirectAngle).unwrap();
        assert_eq!(enc.tx, 0.5);
        assert_eq!(enc.ty, 0.5);
        assert_relative_eq!(enc.tw, 2f64.ln());
        assert_relative_eq!(enc.th, 2f64.ln());
        assert_eq!(enc.angle, AnglePart::Direct { t_theta: 0.0 });

        let back = decode_offsets(&enc, &anchor, LE);
        assert_relative_eq!(back.x, 1.0);
        assert_relative_eq!(back.w, 4.0, epsilon = 1e-12);
    }

    #[test]
    fn anchor_encodes_to_zero() {
        let anchor = AnchorBox::horizontal(3.0, -2.0, 5.0, 7.0);
        let enc = encode_offsets(&anchor.as_box(), &anchor, EncodingMode::SinCos).unwrap();
        assert_eq!(enc.components(), vec![0.0, 0.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(decode_offsets(&enc, &anchor, LE), anchor.as_box());
    }

    #[test]
    fn sincos_normalization() {
        let e = OffsetEncoding::with_raw_sincos(0.0, 0.0, 0.0, 0.0, 0.6, 0.8).unwrap();
        assert_eq!(e.angle, AnglePart::SinCos { t_sin: 0.6, t_cos: 0.8 });
        let e = OffsetEncoding::with_raw_sincos(0.0, 0.0, 0.0, 0.0, 3.0, 4.0).unwrap();
        match e.angle {
            AnglePart::SinCos { t_sin, t_cos } => {
                assert_relative_eq!(t_sin, 0.6, epsilon = 1e-15);
                assert_relative_eq!(t_cos, 0.8, epsilon = 1e-15);
            }
            _ => unreachable!(),
        }
        assert!(normalize_sincos(0.0, 0.0).is_err());
    }

    #[test]
    fn sincos_decodes_relative_to_anchor() {
        let anchor = AnchorBox { x_a: 0.0, y_a: 0.0, w_a: 2.0, h_a: 2.0, theta_a: 0.25 };
        let e = OffsetEncoding::with_raw_sincos(0.0, 0.0, 0.0, 0.0, 0.6, 0.8).unwrap();
        let d = decode_offsets(&e, &anchor, LE);
        assert_relative_eq!(d.theta, 0.6f64.atan2(0.8) + 0.25, epsilon = 1e-15);
    }

    #[test]
    fn direct_angle_offset_wraps() {
        let anchor = AnchorBox { x_a: 0.0, y_a: 0.0, w_a: 1.0, h_a: 1.0, theta_a: -3.0 };
        let enc = encode_offsets(&b(0.0, 0.0, 1.0, 1.0, 3.0, LE), &anchor, EncodingMode::DirectAngle).unwrap();
        match enc.angle {
            AnglePart::Direct { t_theta } => assert_relative_eq!(t_theta, 6.0 - 2.0 * PI, epsilon = 1e-12),
            _ => unreachable!(),
        }
    }
}
