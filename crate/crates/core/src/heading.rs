//! Heading disambiguation for yaw-only 3-D boxes.
//!
//! A regressed box angle is only known up to the box's symmetry: a half turn
//! for elongated boxes, a quarter turn (with an edge swap) for square-like
//! ones. A separately predicted heading vector picks the branch.
//!
//! The heading angle is `atan2(dx, dy)`, i.e. measured from the +y axis,
//! not the usual `atan2(y, x)`.

use std::collections::BTreeSet;
use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::box_model::RBox3D;

pub use crate::angle::limit_period;

/// Heading vectors shorter than this carry no direction.
pub const MIN_HEADING_NORM: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeadingVector {
    pub dx: f64,
    pub dy: f64,
}

impl HeadingVector {
    pub fn new(dx: f64, dy: f64) -> Result<Self> {
        let hv = HeadingVector { dx, dy };
        hv.angle()?;
        Ok(hv)
    }

    /// `atan2(dx, dy)`.
    pub fn angle(&self) -> Result<f64> {
        if !(self.dx.hypot(self.dy) >= MIN_HEADING_NORM) {
            return Err(Error::ZeroHeading { dx: self.dx, dy: self.dy });
        }
        Ok(self.dx.atan2(self.dy))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PostProcConfig {
    /// Cubes with `1/r < w/h < r` count as square-like.
    pub ratio_threshold: f64,
    /// Classes whose heading runs along the long side.
    pub long_side_classes: BTreeSet<String>,
}

impl Default for PostProcConfig {
    fn default() -> Self {
        PostProcConfig {
            ratio_threshold: 1.1,
            long_side_classes: ["vehicle", "cyclist"].into_iter().map(String::from).collect(),
        }
    }
}

impl PostProcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.ratio_threshold > 1.0) || !self.ratio_threshold.is_finite() {
            return Err(Error::InvalidConfig(format!("ratio threshold must be > 1, got {}", self.ratio_threshold)));
        }
        Ok(())
    }

    pub fn is_long_side(&self, cls: &str) -> bool {
        self.long_side_classes.contains(cls)
    }
}

pub fn is_square_like(cube: &RBox3D, r: f64) -> bool {
    let ratio = cube.w / cube.h;
    1.0 / r < ratio && ratio < r
}

/// Picks the box angle that agrees with the heading vector.
///
/// Square-like cubes take the heading angle outright and become squares of
/// the larger edge. Otherwise the angle moves by the multiple of a half turn
/// (long-side classes, after making `w` the long edge) or of a quarter turn
/// (other classes, swapping edges on odd counts) nearest the heading angle.
/// The result is limited to `[-pi, pi)`.
pub fn post_process_heading(cube: &RBox3D, hv: &HeadingVector, cls: &str, cfg: &PostProcConfig) -> Result<RBox3D> {
    cfg.validate()?;
    cube.check_edges()?;
    let theta_d = hv.angle()?;
    let mut out = *cube;

    if is_square_like(cube, cfg.ratio_threshold) {
        let side = cube.w.max(cube.h);
        out.theta = theta_d;
        out.w = side;
        out.h = side;
    }

    if cfg.is_long_side(cls) {
        if out.w < out.h {
            out.theta += FRAC_PI_2;
            std::mem::swap(&mut out.w, &mut out.h);
        }
        let n = ((theta_d - out.theta) / PI).round_ties_even() as i64;
        out.theta = limit_period(out.theta + PI * n.rem_euclid(2) as f64, -PI, 2.0 * PI);
    } else {
        let n = ((theta_d - out.theta) / FRAC_PI_2).round_ties_even() as i64;
        let quarter = n.rem_euclid(4);
        out.theta = limit_period(out.theta + FRAC_PI_2 * quarter as f64, -PI, 2.0 * PI);
        if quarter % 2 == 1 {
            std::mem::swap(&mut out.w, &mut out.h);
        }
    }
    Ok(out)
}
