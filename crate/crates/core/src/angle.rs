//! Angle range helpers shared by the box conventions and the heading post-processing.

use std::f64::consts::PI;

/// Maps `angle` into the half-open interval `[lower, lower + period)`.
///
/// The result is congruent to `angle` modulo `period`.
pub fn limit_period(angle: f64, lower: f64, period: f64) -> f64 {
    debug_assert!(period > 0.0);
    let mut out = angle - period * ((angle - lower) / period).floor();
    // floor() can leave the value one ulp past either end.
    if out >= lower + period {
        out -= period;
    }
    if out < lower {
        out += period;
    }
    out
}

/// Wraps an angle difference into `(-pi, pi]`.
pub fn wrap_to_pi(angle: f64) -> f64 {
    -limit_period(-angle, -PI, 2.0 * PI)
}

/// Distance from `angle` to the nearest multiple of `step`.
pub(crate) fn distance_to_multiple(angle: f64, step: f64) -> f64 {
    let r = limit_period(angle, -step / 2.0, step);
    r.abs()
}
