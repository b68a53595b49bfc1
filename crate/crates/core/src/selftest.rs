//! Seeded end-to-end self check: runs the invariant suite over random boxes
//! and collects CSV artifacts. Identical seeds give byte-identical artifacts.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_8, PI};
use std::fs;
use std::path::Path;

use nalgebra::{Matrix2, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::assign::{assign_labels, atss_threshold, mean_and_std, AffinityMetric, AnchorGrid, AssignConfig, Strategy};
use crate::box_model::{
    convert_definition, to_gaussian_2d, AnchorBox, BoxDefinition, EncodingMode, Gaussian2, RBox2D, RBox3D,
};
use crate::divergence::{distance, gwd_horizontal_closed_form, kld_horizontal_closed_form, Metric};
use crate::error::Result;
use crate::fit::{fit_box, FitConfig, FitObjective};
use crate::geometry::{box_vertices, contains_point, skew_iou_2d};
use crate::gradient::{analytic_gradient, distance_gradient, finite_difference_gradient, kld_axis_aligned_partials, FD_STEP};
use crate::heading::{is_square_like, post_process_heading, HeadingVector, PostProcConfig};
use crate::loss::{box_distance, gaussian_box_loss, smooth_l1_box_loss, LossConfig, DEFAULT_BETA};
use crate::report::{fmt_num, Table};
use crate::sweep::{linspace, run_sweep, ScenarioKind, SweepScenario};

pub const DEFAULT_SEED: u64 = 42;

/// The boundary fixture: a horizontal 70x10 anchor and a GT 25 degrees away.
pub fn boundary_fixture() -> (RBox2D, RBox2D) {
    let oc = BoxDefinition::OpenCV;
    (
        RBox2D { x: 0.0, y: 0.0, w: 70.0, h: 10.0, theta: -FRAC_PI_2, def: oc },
        RBox2D { x: 0.0, y: 0.0, w: 10.0, h: 70.0, theta: -25f64.to_radians(), def: oc },
    )
}

/// Analytic and numeric partials agree: relative error `<= 1e-4`, or absolute
/// `<= 1e-7` when both are below `1e-3`.
pub fn gradients_agree(analytic: f64, numeric: f64) -> bool {
    let mag = analytic.abs().max(numeric.abs());
    let err = (analytic - numeric).abs();
    if mag < 1e-3 {
        err <= 1e-7
    } else {
        err <= 1e-4 * mag
    }
}

/// Ranks with ties given their average rank (1-based).
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (average_ranks(a), average_ranks(b));
    let (ma, _) = mean_and_std(&ra);
    let (mb, _) = mean_and_std(&rb);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma) * (x - ma)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb) * (y - mb)).sum();
    cov / (va * vb).sqrt()
}

/// IoU estimated on a jittered `n x n` raster over the pair's bounding rectangle.
pub fn raster_iou(a: &RBox2D, b: &RBox2D, n: usize, rng: &mut impl Rng) -> f64 {
    let pts: Vec<_> = box_vertices(a).vertices.into_iter().chain(box_vertices(b).vertices).collect();
    let (x0, x1) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.x), hi.max(p.x)));
    let (y0, y1) = pts.iter().fold((f64::MAX, f64::MIN), |(lo, hi), p| (lo.min(p.y), hi.max(p.y)));
    let (dx, dy) = ((x1 - x0) / n as f64, (y1 - y0) / n as f64);
    let (mut both, mut either) = (0u64, 0u64);
    for i in 0..n {
        for j in 0..n {
            let x = x0 + (i as f64 + rng.random::<f64>()) * dx;
            let y = y0 + (j as f64 + rng.random::<f64>()) * dy;
            let (ia, ib) = (contains_point(a, x, y), contains_point(b, x, y));
            both += (ia && ib) as u64;
            either += (ia || ib) as u64;
        }
    }
    if either == 0 { 0.0 } else { both as f64 / either as f64 }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<Check>,
    /// `(file name, table)` pairs.
    pub artifacts: Vec<(String, Table)>,
}

impl SelftestReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed).count()
    }

    /// Writes every artifact plus `checks.csv` into `dir`.
    pub fn write_artifacts(&self, dir: &Path) -> std::io::Result<()> {
        fs::create_dir_all(dir)?;
        for (name, table) in &self.artifacts {
            fs::write(dir.join(name), table.to_csv())?;
        }
        fs::write(dir.join("checks.csv"), self.checks_table().to_csv())
    }

    pub fn checks_table(&self) -> Table {
        let mut t = Table::new(&["id", "check", "passed", "detail"]);
        for c in &self.checks {
            t.push(vec![c.id.to_string(), c.name.into(), c.passed.to_string(), c.detail.clone()]);
        }
        t
    }
}

fn random_box(rng: &mut ChaCha8Rng, def: BoxDefinition) -> RBox2D {
    RBox2D::canonical(
        rng.random_range(-50.0..50.0),
        rng.random_range(-50.0..50.0),
        rng.random_range(0.5..40.0),
        rng.random_range(0.5..40.0),
        rng.random_range(-PI..PI),
        def,
    )
}

fn gaussian_gap(a: &Gaussian2, b: &Gaussian2) -> f64 {
    let scale = 1.0 + a.sigma.abs().max();
    ((a.mu - b.mu).abs().max() / (1.0 + a.mu.abs().max())).max((a.sigma - b.sigma).abs().max() / scale)
}

struct Ctx {
    rng: ChaCha8Rng,
    checks: Vec<Check>,
    artifacts: Vec<(String, Table)>,
}

impl Ctx {
    fn record(&mut self, id: usize, name: &'static str, passed: bool, detail: String) {
        self.checks.push(Check { id, name, passed, detail });
    }
}

/// Runs the whole suite with one RNG stream seeded by `seed`.
pub fn run_selftest(seed: u64) -> Result<SelftestReport> {
    let mut ctx = Ctx { rng: ChaCha8Rng::seed_from_u64(seed), checks: Vec::new(), artifacts: Vec::new() };
    gaussian_equivalences(&mut ctx)?;
    boundary_continuity(&mut ctx)?;
    horizontal_closed_forms(&mut ctx)?;
    invariances(&mut ctx)?;
    gradient_oracle(&mut ctx)?;
    self_modulation(&mut ctx)?;
    iou_oracle(&mut ctx)?;
    loss_iou_consistency(&mut ctx)?;
    toy_fit(&mut ctx)?;
    assignment(&mut ctx)?;
    heading(&mut ctx)?;
    Ok(SelftestReport { seed, checks: ctx.checks, artifacts: ctx.artifacts })
}

fn gaussian_equivalences(ctx: &mut Ctx) -> Result<()> {
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let b = random_box(&mut ctx.rng, BoxDefinition::OpenCV);
        let g = to_gaussian_2d(&b)?;
        let swapped = RBox2D { w: b.h, h: b.w, theta: b.theta - FRAC_PI_2, ..b };
        let turned = RBox2D { theta: b.theta + PI, ..b };
        let le = convert_definition(&b, BoxDefinition::LongEdge);
        for other in [swapped, turned, le] {
            worst = worst.max(gaussian_gap(&g, &to_gaussian_2d(&other)?));
        }
    }
    ctx.record(1, "gaussian-equivalences", worst <= 1e-9, format!("max_rel_gap={}", fmt_num(worst)));
    Ok(())
}

fn boundary_continuity(ctx: &mut Ctx) -> Result<()> {
    let (anchor, gt) = boundary_fixture();
    let a = AnchorBox::from(&anchor);
    let cfgs: Vec<LossConfig> = Metric::ALL.iter().map(|&m| LossConfig::with_metric(m)).collect();
    let mut table = Table::new(&["theta", "metric", "loss"]);
    let mut jumps = vec![0.0f64; cfgs.len() + 1];
    let mut prev: Option<Vec<f64>> = None;
    let n = 20_000;
    for i in 0..=n {
        let theta = -FRAC_PI_2 - 0.01 + 0.02 * i as f64 / n as f64;
        let p = RBox2D { theta, ..anchor }.normalized();
        let mut cur = cfgs.iter().map(|c| gaussian_box_loss(&p, &gt, c)).collect::<Result<Vec<_>>>()?;
        cur.push(smooth_l1_box_loss(&p, &gt, &a, EncodingMode::DirectAngle, DEFAULT_BETA)?);
        if let Some(pv) = &prev {
            for (j, (c, q)) in cur.iter().zip(pv).enumerate() {
                jumps[j] = jumps[j].max((c - q).abs());
            }
        }
        if i % 500 == 0 {
            let labels = cfgs.iter().map(LossConfig::label).chain(["smooth-l1".to_string()]);
            for (label, v) in labels.zip(&cur) {
                table.push(vec![fmt_num(theta), label, fmt_num(*v)]);
            }
        }
        prev = Some(cur);
    }
    let gauss = jumps[..cfgs.len()].iter().cloned().fold(0.0, f64::max);
    let sl1 = jumps[cfgs.len()];
    ctx.artifacts.push(("boundary.csv".into(), table));
    ctx.record(
        2,
        "boundary-continuity",
        gauss <= 1e-4 && sl1 >= 0.5,
        format!("gaussian_max_jump={} smooth_l1_jump={}", fmt_num(gauss), fmt_num(sl1)),
    );
    Ok(())
}

fn horizontal_closed_forms(ctx: &mut Ctx) -> Result<()> {
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let mut pair = [random_box(&mut ctx.rng, BoxDefinition::LongEdge), random_box(&mut ctx.rng, BoxDefinition::LongEdge)];
        for b in &mut pair {
            b.theta = 0.0;
            if ctx.rng.random::<bool>() {
                std::mem::swap(&mut b.w, &mut b.h);
            }
        }
        let [p, t] = pair;
        let rel = |a: f64, b: f64| (a - b).abs() / a.abs().max(b.abs()).max(1e-300);
        worst = worst.max(rel(box_distance(Metric::Gwd, &p, &t)?, gwd_horizontal_closed_form(&p, &t)?));
        worst = worst.max(rel(box_distance(Metric::KldPt, &p, &t)?, kld_horizontal_closed_form(&p, &t)?));
    }
    ctx.record(3, "horizontal-closed-forms", worst <= 1e-9, format!("max_rel_err={}", fmt_num(worst)));
    Ok(())
}

fn invariances(ctx: &mut Ctx) -> Result<()> {
    let mut worst_affine = 0.0f64;
    let mut worst_scale = 0.0f64;
    for _ in 0..1000 {
        let (p, t) = (random_box(&mut ctx.rng, BoxDefinition::LongEdge), random_box(&mut ctx.rng, BoxDefinition::LongEdge));
        let (gp, gt) = (to_gaussian_2d(&p)?, to_gaussian_2d(&t)?);
        let m = loop {
            let m: Matrix2<f64> = Matrix2::from_fn(|_, _| ctx.rng.random_range(-2.0..2.0));
            if m.determinant().abs() > 0.1 {
                break m;
            }
        };
        let shift = Vector2::new(ctx.rng.random_range(-10.0..10.0), ctx.rng.random_range(-10.0..10.0));
        for metric in [Metric::KldPt, Metric::Bcd] {
            let before = distance(metric, &gp, &gt)?.value;
            let after = distance(metric, &gp.affine(&m, &shift), &gt.affine(&m, &shift))?.value;
            worst_affine = worst_affine.max((before - after).abs() / before.max(1.0));
        }
        let s = ctx.rng.random_range(0.2..5.0);
        let d = box_distance(Metric::Gwd, &p, &t)?;
        let ds = box_distance(Metric::Gwd, &p.scaled(s), &t.scaled(s))?;
        worst_scale = worst_scale.max((ds - s * s * d).abs() / (s * s * d));
    }
    ctx.record(
        4,
        "scale-affine-invariance",
        worst_affine <= 1e-8 && worst_scale <= 1e-8,
        format!("kld_bcd_max_change={} gwd_scale_rel_err={}", fmt_num(worst_affine), fmt_num(worst_scale)),
    );
    Ok(())
}

fn random_grad_pair(rng: &mut ChaCha8Rng) -> (RBox2D, RBox2D) {
    let le = BoxDefinition::LongEdge;
    let t = RBox2D::canonical(0.0, 0.0, rng.random_range(1.0..8.0), rng.random_range(1.0..8.0), rng.random_range(-PI..PI), le);
    let p = RBox2D::canonical(
        rng.random_range(-3.0..3.0),
        rng.random_range(-3.0..3.0),
        rng.random_range(1.0..8.0),
        rng.random_range(1.0..8.0),
        rng.random_range(-PI..PI),
        le,
    );
    (p, t)
}

fn near_square(b: &RBox2D) -> bool {
    (b.w - b.h).abs() / b.w.max(b.h) < 1e-3
}

fn grad_row(metric: Metric, p: &RBox2D, t: &RBox2D) -> Result<Option<(f64, usize, usize)>> {
    if near_square(p) || near_square(t) {
        return Ok(None);
    }
    let cfg = LossConfig::with_metric(metric);
    let a = analytic_gradient(p, t, &cfg)?.as_array();
    let n = finite_difference_gradient(p, t, &cfg, FD_STEP)?.as_array();
    let dt = crate::angle::distance_to_multiple(p.theta - t.theta, FRAC_PI_2);
    let (mut worst, mut compared, mut failed) = (0.0f64, 0, 0);
    for k in 0..5 {
        if k == 4 && dt < 1e-3 {
            continue;
        }
        compared += 1;
        failed += !gradients_agree(a[k], n[k]) as usize;
        let mag = a[k].abs().max(n[k].abs());
        if mag >= 1e-3 {
            worst = worst.max((a[k] - n[k]).abs() / mag);
        }
    }
    Ok(Some((worst, compared, failed)))
}

fn gradient_oracle(ctx: &mut Ctx) -> Result<()> {
    let mut table = Table::new(&["metric", "configs", "partials", "failures", "max_rel_err"]);
    let mut all_ok = true;
    for metric in Metric::ALL {
        let (mut configs, mut partials, mut failures, mut worst) = (0, 0, 0, 0.0f64);
        while configs < 1000 {
            let (p, t) = random_grad_pair(&mut ctx.rng);
            if let Some((w, c, f)) = grad_row(metric, &p, &t)? {
                configs += 1;
                partials += c;
                failures += f;
                worst = worst.max(w);
            }
        }
        all_ok &= failures == 0;
        table.push(vec![metric.to_string(), configs.to_string(), partials.to_string(), failures.to_string(), fmt_num(worst)]);
    }

    // closed-form KLD partials against the general route
    let mut closed_worst = 0.0f64;
    for _ in 0..1000 {
        let (p, mut t) = random_grad_pair(&mut ctx.rng);
        t.theta = 0.0;
        let c = kld_axis_aligned_partials(&p, &t)?;
        let (_, g) = distance_gradient(Metric::KldPt, &p, &t)?;
        let g = g.to_log_edges(p.w, p.h);
        for (x, y) in [(c.d_x, g.d_x), (c.d_y, g.d_y), (c.d_log_w, g.d_w), (c.d_log_h, g.d_h), (c.d_theta, g.d_theta)] {
            closed_worst = closed_worst.max((x - y).abs() / x.abs().max(y.abs()).max(1.0));
        }
    }
    let ok = all_ok && closed_worst <= 1e-9;
    ctx.artifacts.push(("grad_check.csv".into(), table));
    ctx.record(5, "gradient-oracle", ok, format!("closed_form_max_err={}", fmt_num(closed_worst)));
    Ok(())
}

fn self_modulation(ctx: &mut Ctx) -> Result<()> {
    let le = BoxDefinition::LongEdge;
    let mut mags = Vec::new();
    for r in [1.0, 2.0, 3.0, 4.0] {
        let t = RBox2D { x: 0.0, y: 0.0, w: 1.0, h: r, theta: 0.0, def: le };
        let p = RBox2D { theta: FRAC_PI_8, ..t };
        mags.push(distance_gradient(Metric::KldPt, &p, &t)?.1.d_theta.abs());
    }
    let increasing = mags.windows(2).all(|w| w[1] > w[0]);
    let mut xs = Vec::new();
    for wt in [1.0, 2.0, 4.0] {
        let t = RBox2D { x: 0.0, y: 0.0, w: wt, h: 1.0, theta: 0.0, def: le };
        let p = RBox2D { x: 0.5, ..t };
        xs.push(distance_gradient(Metric::KldPt, &p, &t)?.1.d_x);
    }
    let ratio_err = ((xs[0] / xs[1] - 4.0).abs()).max((xs[1] / xs[2] - 4.0).abs());
    let mut table = Table::new(&["aspect", "kld_theta_grad"]);
    for (r, m) in [1.0, 2.0, 3.0, 4.0].iter().zip(&mags) {
        table.push(vec![fmt_num(*r), fmt_num(*m)]);
    }
    ctx.artifacts.push(("self_modulation.csv".into(), table));
    ctx.record(
        6,
        "self-modulation",
        increasing && ratio_err <= 1e-9,
        format!("theta_grads_increasing={increasing} x_ratio_err={}", fmt_num(ratio_err)),
    );
    Ok(())
}

fn iou_oracle(ctx: &mut Ctx) -> Result<()> {
    let mut worst = 0.0f64;
    for _ in 0..200 {
        let a = random_box(&mut ctx.rng, BoxDefinition::OpenCV);
        let b = RBox2D {
            x: a.x + ctx.rng.random_range(-10.0..10.0),
            y: a.y + ctx.rng.random_range(-10.0..10.0),
            ..random_box(&mut ctx.rng, BoxDefinition::OpenCV)
        };
        worst = worst.max((skew_iou_2d(&a, &b) - raster_iou(&a, &b, 1000, &mut ctx.rng)).abs());
    }
    let oc = BoxDefinition::OpenCV;
    let sq = RBox2D { x: 0.0, y: 0.0, w: 2.0, h: 2.0, theta: -FRAC_PI_2, def: oc };
    let hand = [
        (skew_iou_2d(&sq, &sq), 1.0),
        (skew_iou_2d(&sq, &RBox2D { x: 5.0, ..sq }), 0.0),
        (skew_iou_2d(&sq, &RBox2D { x: 1.0, y: 1.0, ..sq }), 1.0 / 7.0),
    ];
    let hand_err = hand.iter().map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    ctx.record(
        7,
        "skew-iou-oracle",
        worst <= 3e-3 && hand_err <= 1e-12,
        format!("raster_max_err={} hand_max_err={}", fmt_num(worst), fmt_num(hand_err)),
    );
    Ok(())
}

fn sweep_table(rows: &[crate::sweep::SweepRow]) -> Table {
    let mut t = Table::new(&["grid", "metric", "distance", "loss", "skew_iou"]);
    for r in rows {
        t.push(vec![fmt_num(r.grid), r.metric.clone(), fmt_num(r.distance), fmt_num(r.loss), fmt_num(r.skew_iou)]);
    }
    t
}

fn loss_iou_consistency(ctx: &mut Ctx) -> Result<()> {
    let cfgs: Vec<LossConfig> = Metric::ALL.iter().map(|&m| LossConfig::with_metric(m)).collect();
    let scenario = SweepScenario::default_for(ScenarioKind::AngleDiff);
    let rows = run_sweep(&scenario, &cfgs)?;
    let kld = LossConfig::default().label();
    let (loss, gap): (Vec<f64>, Vec<f64>) = rows.iter().filter(|r| r.metric == kld).map(|r| (r.loss, 1.0 - r.skew_iou)).unzip();
    let rho = spearman(&loss, &gap);
    ctx.artifacts.push(("sweep_angle.csv".into(), sweep_table(&rows)));

    let half = SweepScenario { grid: linspace(0.0, FRAC_PI_2, 91), ..scenario };
    let rows = run_sweep(&half, &cfgs)?;
    let mut monotone = true;
    for c in &cfgs {
        let col: Vec<f64> = rows.iter().filter(|r| r.metric == c.label()).map(|r| r.loss).collect();
        monotone &= col.windows(2).all(|w| w[1] >= w[0]);
    }
    let scale = run_sweep(&SweepScenario::default_for(ScenarioKind::Scale), &cfgs)?;
    ctx.artifacts.push(("sweep_scale.csv".into(), sweep_table(&scale)));
    ctx.record(8, "loss-iou-consistency", rho >= 0.95 && monotone, format!("spearman={} monotone={monotone}", fmt_num(rho)));
    Ok(())
}

fn toy_fit(ctx: &mut Ctx) -> Result<()> {
    let (anchor, gt) = boundary_fixture();
    let r = fit_box(&anchor, &gt, &FitConfig::default())?;
    let nonincreasing = r.trajectory.windows(2).all(|w| w[1].loss <= w[0].loss);
    let mut t = Table::new(&["step", "x", "y", "w", "h", "theta", "loss", "skew_iou"]);
    for s in &r.trajectory {
        let p = s.pred;
        t.push(
            [s.step as f64, p.x, p.y, p.w, p.h, p.theta, s.loss, s.skew_iou]
                .iter()
                .enumerate()
                .map(|(i, v)| if i == 0 { s.step.to_string() } else { fmt_num(*v) })
                .collect(),
        );
    }
    ctx.artifacts.push(("fit_kld.csv".into(), t));
    let baseline = FitConfig { objective: FitObjective::smooth_l1(AnchorBox::from(&anchor)), ..Default::default() };
    let b = fit_box(&anchor, &gt, &baseline)?;
    let last = r.last();
    ctx.record(
        9,
        "toy-fit",
        last.skew_iou >= 0.90 && r.trajectory.len() <= 2001 && nonincreasing,
        format!(
            "kld_steps={} kld_iou={} smooth_l1_steps={} smooth_l1_iou={}",
            last.step,
            fmt_num(last.skew_iou),
            b.last().step,
            fmt_num(b.last().skew_iou)
        ),
    );
    Ok(())
}

fn assignment(ctx: &mut Ctx) -> Result<()> {
    let (m, v) = mean_and_std(&[0.5, 0.4, 0.3, 0.2]);
    let hand_ok = (m + v - 0.461803).abs() <= 1e-6;
    let probe = RBox2D { x: 3.0, y: 4.0, w: 6.0, h: 2.0, theta: 0.3, def: BoxDefinition::LongEdge };
    let ident = crate::assign::affinity(&probe, &probe, AffinityMetric::Kld, 2.0)?;
    let grid = AnchorGrid::generate(128.0, 128.0, &[8.0, 16.0, 32.0], 4.0)?;
    let atss = AssignConfig::default();
    let maxiou = AssignConfig::max_iou(0.5, 0.4);
    let mut uncovered = 0;
    let mut table = Table::new(&["scene", "gt", "atss_positives", "maxiou_positives", "atss_threshold"]);
    for scene in 0..100 {
        let n = ctx.rng.random_range(1..=5);
        let gts: Vec<RBox2D> = (0..n)
            .map(|_| {
                RBox2D::canonical(
                    ctx.rng.random_range(8.0..120.0),
                    ctx.rng.random_range(8.0..120.0),
                    ctx.rng.random_range(4.0..64.0),
                    ctx.rng.random_range(4.0..64.0),
                    ctx.rng.random_range(-PI..PI),
                    BoxDefinition::LongEdge,
                )
            })
            .collect();
        let ra = assign_labels(&gts, &grid, &atss)?;
        let rm = assign_labels(&gts, &grid, &maxiou)?;
        for g in 0..gts.len() {
            let (pa, pm) = (ra.positives_of(g), rm.positives_of(g));
            uncovered += (pa == 0) as usize + (pm == 0) as usize;
            table.push(vec![scene.to_string(), g.to_string(), pa.to_string(), pm.to_string(), fmt_num(ra.thresholds[g])]);
        }
    }
    // a single-level candidate set of the whole grid reproduces the plain statistics
    let small = AnchorGrid::generate(16.0, 16.0, &[8.0], 2.0)?;
    let c = atss_threshold(&probe, &small, &AssignConfig { strategy: Strategy::Atss, ..atss })?;
    let (cm, cv) = mean_and_std(&c.affinities);
    let whole = c.candidates.len() == small.len() && (c.threshold - (cm + cv)).abs() <= 1e-15;
    ctx.artifacts.push(("assign.csv".into(), table));
    ctx.record(
        10,
        "atss-assignment",
        hand_ok && uncovered == 0 && (ident - 0.5).abs() <= 1e-15 && whole,
        format!("hand_threshold={} uncovered_gts={uncovered} identity_affinity={}", fmt_num(m + v), fmt_num(ident)),
    );
    Ok(())
}

fn same_footprint(a: &RBox3D, b: &RBox3D) -> f64 {
    let va = box_vertices(&a.bev()).vertices;
    let vb = box_vertices(&b.bev()).vertices;
    va.iter()
        .map(|p| vb.iter().map(|q| (p - q).norm()).fold(f64::MAX, f64::min))
        .fold(0.0, f64::max)
}

fn heading(ctx: &mut Ctx) -> Result<()> {
    let cfg = PostProcConfig::default();
    let cube = |w, h, theta| RBox3D { x: 0.0, y: 0.0, z: 0.0, w, h, l: 1.5, theta };
    let traced = [
        (post_process_heading(&cube(2.0, 2.0, 0.0), &HeadingVector { dx: 1.0, dy: 0.0 }, "pedestrian", &cfg)?, (FRAC_PI_2, 2.0, 2.0)),
        (post_process_heading(&cube(4.0, 2.0, 0.0), &HeadingVector { dx: 0.0, dy: -1.0 }, "vehicle", &cfg)?, (-PI, 4.0, 2.0)),
        (post_process_heading(&cube(4.0, 2.0, 0.0), &HeadingVector { dx: 1.0, dy: 0.0 }, "pedestrian", &cfg)?, (FRAC_PI_2, 2.0, 4.0)),
    ];
    let traced_ok = traced.iter().all(|(c, (t, w, h))| c.theta == *t && c.w == *w && c.h == *h);
    let classes = ["vehicle", "cyclist", "pedestrian"];
    let (mut idem, mut shape, mut range_ok, mut long_ok, mut cases) = (0.0f64, 0.0f64, true, true, 0);
    let mut table = Table::new(&["class", "theta_in", "w_in", "h_in", "dx", "dy", "theta_out", "w_out", "h_out"]);
    while cases < 1000 {
        let c = RBox3D {
            x: ctx.rng.random_range(-20.0..20.0),
            y: ctx.rng.random_range(-20.0..20.0),
            z: ctx.rng.random_range(-2.0..2.0),
            w: ctx.rng.random_range(0.5..6.0),
            h: ctx.rng.random_range(0.5..6.0),
            l: ctx.rng.random_range(0.5..3.0),
            theta: ctx.rng.random_range(-PI..PI),
        };
        let hv = HeadingVector { dx: ctx.rng.random_range(-1.0..1.0), dy: ctx.rng.random_range(-1.0..1.0) };
        let cls = classes[ctx.rng.random_range(0..classes.len())];
        let out = post_process_heading(&c, &hv, cls, &cfg)?;
        range_ok &= (-PI..PI).contains(&out.theta);
        if is_square_like(&c, cfg.ratio_threshold) {
            continue;
        }
        cases += 1;
        let again = post_process_heading(&out, &hv, cls, &cfg)?;
        idem = idem.max(
            [again.theta - out.theta, again.w - out.w, again.h - out.h]
                .iter()
                .map(|d| d.abs())
                .fold(0.0, f64::max),
        );
        shape = shape.max(same_footprint(&c, &out));
        if cfg.is_long_side(cls) {
            let gap = crate::angle::wrap_to_pi(out.theta - hv.angle()?);
            long_ok &= gap.abs() <= FRAC_PI_2 + 1e-12 && out.w >= out.h;
        }
        if cases % 50 == 0 {
            table.push(
                std::iter::once(cls.to_string())
                    .chain([c.theta, c.w, c.h, hv.dx, hv.dy, out.theta, out.w, out.h].iter().map(|v| fmt_num(*v)))
                    .collect(),
            );
        }
    }
    ctx.artifacts.push(("heading.csv".into(), table));
    ctx.record(
        11,
        "heading-post-processing",
        traced_ok && idem <= 1e-9 && shape <= 1e-9 && range_ok && long_ok,
        format!("traced={traced_ok} idempotence_err={} footprint_err={} range_ok={range_ok}", fmt_num(idem), fmt_num(shape)),
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), vec![3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn spearman_extremes() {
        let a = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&a, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&a, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    }

    #[test]
    fn gradient_tolerance_rule() {
        assert!(gradients_agree(1.0, 1.00009));
        assert!(!gradients_agree(1.0, 1.0002));
        assert!(gradients_agree(1e-4, 1e-4 + 5e-8));
        assert!(!gradients_agree(1e-4, 1e-4 + 5e-7));
    }
}
