//! One-parameter sweeps that tabulate loss and SkewIoU side by side.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};
use std::fmt;
use std::str::FromStr;

use crate::box_model::{BoxDefinition, RBox2D};
use crate::error::{Error, Result};
use crate::geometry::skew_iou_2d;
use crate::loss::{box_distance, normalize_loss, LossConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ScenarioKind {
    /// Prediction rotated by the grid value relative to the target.
    AngleDiff,
    /// Long edge of both boxes set to `grid * short edge`, fixed angle gap.
    AspectRatio,
    /// Prediction shifted along x by the grid value.
    CenterShift,
    /// Target height set to the grid value, prediction keeps the angle gap.
    TargetHeight,
    /// Both boxes scaled about the origin by the grid value.
    Scale,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 5] = [
        ScenarioKind::AngleDiff,
        ScenarioKind::AspectRatio,
        ScenarioKind::CenterShift,
        ScenarioKind::TargetHeight,
        ScenarioKind::Scale,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::AngleDiff => "angle",
            ScenarioKind::AspectRatio => "aspect",
            ScenarioKind::CenterShift => "shift",
            ScenarioKind::TargetHeight => "height",
            ScenarioKind::Scale => "scale",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| format!("unknown scenario `{s}` (expected angle, aspect, shift, height or scale)"))
    }
}

/// A base prediction/target pair and the grid one parameter runs over.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepScenario {
    pub kind: ScenarioKind,
    pub pred: RBox2D,
    pub target: RBox2D,
    pub grid: Vec<f64>,
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

fn le(x: f64, y: f64, w: f64, h: f64, theta: f64) -> RBox2D {
    RBox2D { x, y, w, h, theta, def: BoxDefinition::LongEdge }
}

impl SweepScenario {
    /// Default geometry: a 4x1 box (1:4 aspect, unit short edge) at angle 0.
    pub fn default_for(kind: ScenarioKind) -> Self {
        let target = le(0.0, 0.0, 4.0, 1.0, 0.0);
        let (pred, grid) = match kind {
            ScenarioKind::AngleDiff => (target, linspace(-FRAC_PI_2, FRAC_PI_2, 181)),
            ScenarioKind::AspectRatio => (le(0.0, 0.0, 4.0, 1.0, PI / 12.0), linspace(1.0, 10.0, 37)),
            ScenarioKind::CenterShift => (target, linspace(0.0, 8.0, 81)),
            ScenarioKind::TargetHeight => {
                let t = le(0.0, 0.0, 1.0, 1.0, 0.0);
                return SweepScenario { kind, pred: RBox2D { theta: FRAC_PI_8, ..t }, target: t, grid: vec![1.0, 2.0, 3.0, 4.0] };
            }
            ScenarioKind::Scale => (le(0.5, 0.25, 4.5, 1.25, PI / 12.0), linspace(1.0, 10.0, 19)),
        };
        SweepScenario { kind, pred, target, grid }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::InvalidConfig("sweep grid is empty".into()));
        }
        if self.grid.iter().any(|g| !g.is_finite()) {
            return Err(Error::InvalidConfig("sweep grid has non-finite values".into()));
        }
        let positive = matches!(self.kind, ScenarioKind::AspectRatio | ScenarioKind::TargetHeight | ScenarioKind::Scale);
        if positive && self.grid.iter().any(|&g| g <= 0.0) {
            return Err(Error::InvalidConfig(format!("{} grid values must be positive", self.kind)));
        }
        self.pred.check_edges()?;
        self.target.check_edges()
    }

    /// The prediction/target pair at grid value `g`.
    pub fn pair_at(&self, g: f64) -> (RBox2D, RBox2D) {
        let (p, t) = (self.pred, self.target);
        let gap = p.theta - t.theta;
        match self.kind {
            ScenarioKind::AngleDiff => (RBox2D { theta: t.theta + g, ..p }, t),
            ScenarioKind::AspectRatio => {
                let t = RBox2D { w: g * t.h, ..t };
                (RBox2D { w: g * p.h, ..p }, t)
            }
            ScenarioKind::CenterShift => (RBox2D { x: t.x + g, ..p }, t),
            ScenarioKind::TargetHeight => {
                let t = RBox2D { h: g, ..t };
                (RBox2D { theta: t.theta + gap, ..t }, t)
            }
            ScenarioKind::Scale => (p.scaled(g), t.scaled(g)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub grid: f64,
    pub metric: String,
    pub distance: f64,
    pub loss: f64,
    pub skew_iou: f64,
}

/// One row per (grid point, metric), grid-major.
pub fn run_sweep(scenario: &SweepScenario, metrics: &[LossConfig]) -> Result<Vec<SweepRow>> {
    scenario.validate()?;
    let mut rows = Vec::with_capacity(scenario.grid.len() * metrics.len());
    for &g in &scenario.grid {
        let (pred, target) = scenario.pair_at(g);
        let iou = skew_iou_2d(&pred, &target);
        for cfg in metrics {
            let d = box_distance(cfg.metric, &pred, &target)?;
            rows.push(SweepRow {
                grid: g,
                metric: cfg.label(),
                distance: d,
                loss: normalize_loss(d, cfg)?,
                skew_iou: iou,
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divergence::Metric;

    fn cfgs() -> Vec<LossConfig> {
        Metric::ALL.iter().map(|&m| LossConfig::with_metric(m)).collect()
    }

    #[test]
    fn scale_sweep_keeps_kld_constant() {
        let rows = run_sweep(&SweepScenario::default_for(ScenarioKind::Scale), &[LossConfig::with_metric(Metric::KldPt)]).unwrap();
        let (lo, hi) = rows.iter().fold((f64::MAX, f64::MIN), |(a, b), r| (a.min(r.loss), b.max(r.loss)));
        assert!(hi - lo <= 1e-8);
    }

    #[test]
    fn zero_angle_matches_identity() {
        let s = SweepScenario::default_for(ScenarioKind::AngleDiff);
        let rows = run_sweep(&s, &cfgs()).unwrap();
        for r in rows.iter().filter(|r| r.grid.abs() < 1e-12) {
            assert!(r.distance.abs() < 1e-12, "{}", r.metric);
            assert!((r.loss - 0.5).abs() < 1e-12);
            assert!((r.skew_iou - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gwd_monotone_in_angle() {
        let s = SweepScenario { grid: linspace(0.0, FRAC_PI_2, 91), ..SweepScenario::default_for(ScenarioKind::AngleDiff) };
        let rows = run_sweep(&s, &[LossConfig::with_metric(Metric::Gwd)]).unwrap();
        for w in rows.windows(2) {
            assert!(w[1].loss >= w[0].loss);
        }
    }

    #[test]
    fn row_order_is_grid_major() {
        let s = SweepScenario::default_for(ScenarioKind::TargetHeight);
        let rows = run_sweep(&s, &cfgs()).unwrap();
        assert_eq!(rows.len(), 4 * 6);
        assert_eq!(rows[0].grid, 1.0);
        assert_eq!(rows[5].grid, 1.0);
        assert_eq!(rows[6].grid, 2.0);
        assert_eq!(rows[1].metric, "kld/sqrt/2");
    }

    #[test]
    fn empty_grid_is_rejected() {
        let s = SweepScenario { grid: vec![], ..SweepScenario::default_for(ScenarioKind::Scale) };
        assert!(run_sweep(&s, &cfgs()).is_err());
    }
}
