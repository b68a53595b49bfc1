//! Command-line front end.
//!
//! Tables go to `--out` (or standard output when it is absent); a one-line
//! `key=value` summary goes to standard output (or standard error when the
//! table took standard output).

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assign::{assign_labels, AffinityMetric, AnchorGrid, AssignConfig, Label, Strategy};
use crate::box_model::{convert_definition, BoxDefinition, RBox2D, RBox3D};
use crate::divergence::{distance, Metric};
use crate::error::Error;
use crate::fit::{fit_box, FitConfig, FitObjective, StopReason};
use crate::geometry::{iou_3d_yaw, skew_iou_2d};
use crate::gradient::{analytic_gradient, finite_difference_gradient, ParamGradient};
use crate::heading::{post_process_heading, HeadingVector, PostProcConfig};
use crate::loss::{box_distance, normalize_loss, LossConfig, Transform};
use crate::report::{fmt_num, Table};
use crate::selftest::{gradients_agree, run_selftest, DEFAULT_SEED};
use crate::sweep::{run_sweep, ScenarioKind, SweepScenario};

#[derive(Debug, Parser)]
#[command(name = "rgauss", version, about = "Gaussian losses, SkewIoU, assignment and heading tools for rotated boxes")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalOpts {
    /// Angle convention of input boxes that do not carry a `def` field
    #[arg(long, global = true, default_value = "oc")]
    pub def: BoxDefinition,
    /// Read and write angles in degrees
    #[arg(long, global = true)]
    pub degrees: bool,
    /// Output file (a directory for `selftest`)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct LossArgs {
    #[arg(long, default_value = "kld")]
    pub metric: Metric,
    #[arg(long, default_value = "sqrt")]
    pub f: Transform,
    #[arg(long, default_value_t = 2.0)]
    pub tau: f64,
}

impl LossArgs {
    fn config(&self) -> Result<LossConfig, Error> {
        LossConfig::new(self.metric, self.f, self.tau)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-express boxes under another angle convention
    Convert {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        to: BoxDefinition,
    },
    /// Raw distance for each pred/target pair
    Distance {
        #[arg(long)]
        pairs: PathBuf,
        #[arg(long, default_value = "kld")]
        metric: Metric,
    },
    /// Normalized loss for each pred/target pair
    Loss {
        #[arg(long)]
        pairs: PathBuf,
        #[command(flatten)]
        loss: LossArgs,
    },
    /// Exact SkewIoU (3-D IoU for cubes) for each pair
    Iou {
        #[arg(long)]
        pairs: PathBuf,
    },
    /// Tabulate losses and SkewIoU along a one-parameter scenario
    Sweep {
        #[arg(long)]
        scenario: ScenarioKind,
        #[arg(long, value_delimiter = ',', default_value = "kld,gwd,bcd")]
        metrics: Vec<Metric>,
        #[arg(long, default_value = "sqrt")]
        f: Transform,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
    },
    /// Compare analytic and central-difference gradients
    GradCheck {
        /// Pairs to check; random well-conditioned pairs when absent
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[command(flatten)]
        loss: LossArgs,
        #[arg(long, default_value_t = 1000)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, default_value_t = crate::gradient::FD_STEP)]
        step: f64,
    },
    /// Gradient descent of one box toward a target
    Fit {
        /// JSON file with the initial box (also the Smooth-L1 anchor)
        #[arg(long)]
        init: PathBuf,
        #[arg(long)]
        target: PathBuf,
        /// A metric name or `smooth-l1`
        #[arg(long, default_value = "kld")]
        loss: String,
        #[arg(long, default_value = "sqrt")]
        f: Transform,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long, default_value_t = 2000)]
        max_steps: usize,
        #[arg(long, default_value_t = 0.99)]
        stop_iou: f64,
    },
    /// Label a generated anchor grid against GT boxes
    Assign {
        #[arg(long)]
        gts: PathBuf,
        /// Image width and height
        #[arg(long, value_delimiter = ',', num_args = 2, default_value = "512,512")]
        image_size: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
        strides: Vec<f64>,
        /// Anchor side as a multiple of the stride
        #[arg(long, default_value_t = 4.0)]
        anchor_scale: f64,
        #[arg(long, default_value = "atss")]
        strategy: Strategy,
        #[arg(long, default_value = "kld")]
        metric: AffinityMetric,
        #[arg(long, default_value_t = 9)]
        k: usize,
        #[arg(long, default_value_t = 2.0)]
        tau: f64,
        #[arg(long, default_value_t = 0.5)]
        pos_thresh: f64,
        #[arg(long, default_value_t = 0.4)]
        neg_thresh: f64,
        #[arg(long)]
        center_in_gt: bool,
    },
    /// Resolve cube headings from predicted heading vectors
    HeadFix {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 1.1)]
        ratio_threshold: f64,
        #[arg(long, value_delimiter = ',', default_value = "vehicle,cyclist")]
        long_side_classes: Vec<String>,
    },
    /// Run the invariant suite and write its CSV artifacts
    Selftest {
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(e) if e.is_numeric() => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BoxRecord {
    x: f64,
    y: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    z: Option<f64>,
    w: f64,
    h: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    l: Option<f64>,
    theta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    def: Option<BoxDefinition>,
}

#[derive(Debug, Deserialize)]
struct PairRecord {
    pred: BoxRecord,
    target: BoxRecord,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HeadRecord {
    x: f64,
    y: f64,
    z: f64,
    w: f64,
    h: f64,
    l: f64,
    theta: f64,
    dx: f64,
    dy: f64,
    class: String,
}

enum Pair {
    Flat(RBox2D, RBox2D),
    Cube(RBox3D, RBox3D),
}

struct Ctx<'a> {
    g: &'a GlobalOpts,
}

impl Ctx<'_> {
    fn angle_in(&self, v: f64) -> f64 {
        if self.g.degrees { v.to_radians() } else { v }
    }

    fn angle_out(&self, v: f64) -> f64 {
        if self.g.degrees { v.to_degrees() } else { v }
    }

    fn box2d(&self, r: &BoxRecord) -> CliResult<RBox2D> {
        let b = RBox2D::new(r.x, r.y, r.w, r.h, self.angle_in(r.theta), r.def.unwrap_or(self.g.def))?;
        Ok(b)
    }

    fn cube(&self, r: &BoxRecord) -> CliResult<RBox3D> {
        let (Some(z), Some(l)) = (r.z, r.l) else {
            return Err(CliError::Input("cube records need both z and l".into()));
        };
        let c = RBox3D { x: r.x, y: r.y, z, w: r.w, h: r.h, l, theta: self.angle_in(r.theta) };
        c.check_edges()?;
        Ok(c)
    }

    fn pair(&self, p: &PairRecord) -> CliResult<Pair> {
        match (p.pred.z.is_some(), p.target.z.is_some()) {
            (false, false) => Ok(Pair::Flat(self.box2d(&p.pred)?, self.box2d(&p.target)?)),
            (true, true) => Ok(Pair::Cube(self.cube(&p.pred)?, self.cube(&p.target)?)),
            _ => Err(CliError::Input("pred and target must both be 2-D or both be 3-D".into())),
        }
    }

    fn pairs(&self, path: &Path) -> CliResult<Vec<Pair>> {
        read_jsonl::<PairRecord>(path)?.iter().map(|p| self.pair(p)).collect()
    }

    fn emit_table(&self, table: &Table, summary: &str) -> CliResult<()> {
        self.emit(&table.to_csv(), summary)
    }

    fn emit(&self, body: &str, summary: &str) -> CliResult<()> {
        match &self.g.out {
            Some(path) => {
                fs::write(path, body).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))?;
                println!("{summary}");
            }
            None => {
                io::stdout().write_all(body.as_bytes())?;
                eprintln!("{summary}");
            }
        }
        Ok(())
    }
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let file = fs::File::open(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| CliError::Input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn max_of(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(f64::NAN, f64::max)
}

fn convert(ctx: &Ctx, input: &Path, to: BoxDefinition) -> CliResult<()> {
    let mut t = Table::new(&["index", "x", "y", "w", "h", "theta", "def"]);
    let records = read_jsonl::<BoxRecord>(input)?;
    for (i, r) in records.iter().enumerate() {
        let b = convert_definition(&ctx.box2d(r)?, to);
        let mut row = vec![i.to_string()];
        row.extend([b.x, b.y, b.w, b.h, ctx.angle_out(b.theta)].iter().map(|v| fmt_num(*v)));
        row.push(b.def.to_string());
        t.push(row);
    }
    ctx.emit_table(&t, &format!("command=convert rows={} to={to}", records.len()))
}

fn distance_cmd(ctx: &Ctx, pairs: &Path, metric: Metric) -> CliResult<()> {
    let mut t = Table::new(&["index", "metric", "value", "quadratic", "trace", "log_det", "constant"]);
    let mut values = Vec::new();
    for (i, p) in ctx.pairs(pairs)?.iter().enumerate() {
        let r = match p {
            Pair::Flat(a, b) => distance(metric, &crate::box_model::to_gaussian_2d(a)?, &crate::box_model::to_gaussian_2d(b)?)?,
            Pair::Cube(a, b) => distance(metric, &crate::box_model::to_gaussian_3d(a)?, &crate::box_model::to_gaussian_3d(b)?)?,
        };
        let terms = match r.terms {
            Some(k) => [k.quadratic, k.trace, k.log_det, k.constant].iter().map(|v| fmt_num(*v)).collect(),
            None => vec![String::new(); 4],
        };
        let mut row = vec![i.to_string(), metric.to_string(), fmt_num(r.value)];
        row.extend(terms);
        t.push(row);
        values.push(r.value);
    }
    let summary = format!("command=distance rows={} metric={metric} max={}", values.len(), fmt_num(max_of(values.into_iter())));
    ctx.emit_table(&t, &summary)
}

fn loss_cmd(ctx: &Ctx, pairs: &Path, args: &LossArgs) -> CliResult<()> {
    let cfg = args.config()?;
    let mut t = Table::new(&["index", "metric", "distance", "loss"]);
    let mut losses = Vec::new();
    for (i, p) in ctx.pairs(pairs)?.iter().enumerate() {
        let d = match p {
            Pair::Flat(a, b) => box_distance(cfg.metric, a, b)?,
            Pair::Cube(a, b) => box_distance(cfg.metric, a, b)?,
        };
        let l = normalize_loss(d, &cfg)?;
        t.push(vec![i.to_string(), cfg.label(), fmt_num(d), fmt_num(l)]);
        losses.push(l);
    }
    let mean = if losses.is_empty() { f64::NAN } else { losses.iter().sum::<f64>() / losses.len() as f64 };
    ctx.emit_table(&t, &format!("command=loss rows={} loss={} mean={}", losses.len(), cfg.label(), fmt_num(mean)))
}

fn iou_cmd(ctx: &Ctx, pairs: &Path) -> CliResult<()> {
    let mut t = Table::new(&["index", "iou"]);
    let mut n = 0;
    for (i, p) in ctx.pairs(pairs)?.iter().enumerate() {
        let v = match p {
            Pair::Flat(a, b) => skew_iou_2d(a, b),
            Pair::Cube(a, b) => iou_3d_yaw(a, b),
        };
        t.push(vec![i.to_string(), fmt_num(v)]);
        n += 1;
    }
    ctx.emit_table(&t, &format!("command=iou rows={n}"))
}

fn sweep_cmd(ctx: &Ctx, kind: ScenarioKind, metrics: &[Metric], f: Transform, tau: f64) -> CliResult<()> {
    let cfgs = metrics.iter().map(|&m| LossConfig::new(m, f, tau)).collect::<Result<Vec<_>, _>>()?;
    let rows = run_sweep(&SweepScenario::default_for(kind), &cfgs)?;
    let mut t = Table::new(&["grid", "metric", "distance", "loss", "skew_iou"]);
    for r in &rows {
        let g = if kind == ScenarioKind::AngleDiff { ctx.angle_out(r.grid) } else { r.grid };
        t.push(vec![fmt_num(g), r.metric.clone(), fmt_num(r.distance), fmt_num(r.loss), fmt_num(r.skew_iou)]);
    }
    ctx.emit_table(&t, &format!("command=sweep scenario={kind} rows={} metrics={}", rows.len(), cfgs.len()))
}

fn random_pair(rng: &mut ChaCha8Rng) -> (RBox2D, RBox2D) {
    let le = BoxDefinition::LongEdge;
    let mut draw = |spread: f64| {
        RBox2D::canonical(
            rng.random_range(-spread..=spread),
            rng.random_range(-spread..=spread),
            rng.random_range(1.0..8.0),
            rng.random_range(1.0..8.0),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
            le,
        )
    };
    let t = draw(0.0);
    (draw(3.0), t)
}

fn grad_check(ctx: &Ctx, pairs: Option<&Path>, args: &LossArgs, count: usize, seed: u64, step: f64) -> CliResult<()> {
    let cfg = args.config()?;
    let list: Vec<(RBox2D, RBox2D)> = match pairs {
        Some(path) => ctx
            .pairs(path)?
            .into_iter()
            .map(|p| match p {
                Pair::Flat(a, b) => Ok((a, b)),
                Pair::Cube(..) => Err(CliError::Input("grad-check takes 2-D pairs".into())),
            })
            .collect::<CliResult<_>>()?,
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut v = Vec::with_capacity(count);
            while v.len() < count {
                let (p, t) = random_pair(&mut rng);
                let near_square = |b: &RBox2D| (b.w - b.h).abs() / b.w.max(b.h) < 1e-3;
                if !near_square(&p) && !near_square(&t) {
                    v.push((p, t));
                }
            }
            v
        }
    };
    let mut t = Table::new(&["index", "param", "analytic", "numeric", "abs_err", "agree"]);
    let (mut failures, mut worst) = (0, 0.0f64);
    for (i, (p, tg)) in list.iter().enumerate() {
        let a = analytic_gradient(p, tg, &cfg)?.as_array();
        let n = finite_difference_gradient(p, tg, &cfg, step)?.as_array();
        for k in 0..5 {
            let ok = gradients_agree(a[k], n[k]);
            failures += !ok as usize;
            let mag = a[k].abs().max(n[k].abs());
            if mag >= 1e-3 {
                worst = worst.max((a[k] - n[k]).abs() / mag);
            }
            t.push(vec![
                i.to_string(),
                ParamGradient::NAMES[k].into(),
                fmt_num(a[k]),
                fmt_num(n[k]),
                fmt_num((a[k] - n[k]).abs()),
                ok.to_string(),
            ]);
        }
    }
    let summary = format!(
        "command=grad-check loss={} configs={} failures={failures} max_rel_err={}",
        cfg.label(),
        list.len(),
        fmt_num(worst)
    );
    ctx.emit_table(&t, &summary)
}

#[allow(clippy::too_many_arguments)]
fn fit_cmd(
    ctx: &Ctx,
    init: &Path,
    target: &Path,
    loss: &str,
    f: Transform,
    tau: f64,
    max_steps: usize,
    stop_iou: f64,
) -> CliResult<()> {
    let init = ctx.box2d(&read_json::<BoxRecord>(init)?)?;
    let target = ctx.box2d(&read_json::<BoxRecord>(target)?)?;
    let objective = match loss.to_ascii_lowercase().as_str() {
        "smooth-l1" | "smooth_l1" | "l1" => FitObjective::smooth_l1((&init).into()),
        name => FitObjective::Gaussian(LossConfig::new(name.parse().map_err(CliError::Input)?, f, tau)?),
    };
    let cfg = FitConfig { objective, max_steps, stop_iou, ..Default::default() };
    let r = fit_box(&init, &target, &cfg)?;
    let mut t = Table::new(&["step", "x", "y", "w", "h", "theta", "loss", "skew_iou"]);
    for s in &r.trajectory {
        let p = s.pred;
        let mut row = vec![s.step.to_string()];
        row.extend([p.x, p.y, p.w, p.h, ctx.angle_out(p.theta), s.loss, s.skew_iou].iter().map(|v| fmt_num(*v)));
        t.push(row);
    }
    let stop = match r.stop {
        StopReason::ReachedIou => "reached-iou",
        StopReason::MaxSteps => "max-steps",
        StopReason::Stalled => "stalled",
    };
    let last = r.last();
    let summary = format!(
        "command=fit loss={} steps={} stop={stop} final_loss={} final_iou={}",
        cfg.objective.label(),
        last.step,
        fmt_num(last.loss),
        fmt_num(last.skew_iou)
    );
    ctx.emit_table(&t, &summary)
}

fn assign_cmd(ctx: &Ctx, gts: &Path, grid: &AnchorGrid, cfg: &AssignConfig) -> CliResult<()> {
    let boxes = read_jsonl::<BoxRecord>(gts)?.iter().map(|r| ctx.box2d(r)).collect::<CliResult<Vec<_>>>()?;
    let r = assign_labels(&boxes, grid, cfg)?;
    let mut t = Table::new(&["anchor", "level", "label", "gt", "affinity", "threshold"]);
    let (mut pos, mut neg, mut ign) = (0, 0, 0);
    for (j, l) in r.labels.iter().enumerate() {
        let (label, gt, thr) = match l {
            Label::Positive(g) => {
                pos += 1;
                ("positive", g.to_string(), fmt_num(r.thresholds[*g]))
            }
            Label::Negative => {
                neg += 1;
                ("negative", String::new(), String::new())
            }
            Label::Ignore => {
                ign += 1;
                ("ignore", String::new(), String::new())
            }
        };
        t.push(vec![j.to_string(), grid.level_of[j].to_string(), label.into(), gt, fmt_num(r.affinities[j]), thr]);
    }
    let summary = format!(
        "command=assign anchors={} gts={} positive={pos} negative={neg} ignore={ign} metric={}",
        grid.len(),
        boxes.len(),
        cfg.metric
    );
    ctx.emit_table(&t, &summary)
}

fn head_fix(ctx: &Ctx, input: &Path, cfg: &PostProcConfig) -> CliResult<()> {
    let mut body = String::new();
    let records = read_jsonl::<HeadRecord>(input)?;
    let mut changed = 0;
    for r in &records {
        let cube = RBox3D { x: r.x, y: r.y, z: r.z, w: r.w, h: r.h, l: r.l, theta: ctx.angle_in(r.theta) };
        let out = post_process_heading(&cube, &HeadingVector { dx: r.dx, dy: r.dy }, &r.class, cfg)?;
        changed += (out != cube) as usize;
        let rec = HeadRecord { theta: ctx.angle_out(out.theta), w: out.w, h: out.h, ..r.clone() };
        let line = serde_json::to_string(&rec).map_err(|e| CliError::Input(e.to_string()))?;
        writeln!(body, "{line}").expect("writing to a string cannot fail");
    }
    ctx.emit(&body, &format!("command=head-fix rows={} changed={changed}", records.len()))
}

fn selftest_cmd(ctx: &Ctx, seed: u64) -> CliResult<bool> {
    let report = run_selftest(seed)?;
    let dir = ctx.g.out.clone().unwrap_or_else(|| PathBuf::from("selftest_out"));
    report
        .write_artifacts(&dir)
        .map_err(|e| CliError::Input(format!("cannot write artifacts to {}: {e}", dir.display())))?;
    for c in &report.checks {
        eprintln!("{} [{:>2}] {} {}", if c.passed { "PASS" } else { "FAIL" }, c.id, c.name, c.detail);
    }
    println!(
        "command=selftest seed={seed} checks={} failures={} out={}",
        report.checks.len(),
        report.failures(),
        dir.display()
    );
    Ok(report.passed())
}

/// Runs a parsed command line; `Ok(false)` means the self test found failures.
pub fn run(cli: &Cli) -> CliResult<bool> {
    let ctx = Ctx { g: &cli.global };
    match &cli.command {
        Command::Convert { input, to } => convert(&ctx, input, *to)?,
        Command::Distance { pairs, metric } => distance_cmd(&ctx, pairs, *metric)?,
        Command::Loss { pairs, loss } => loss_cmd(&ctx, pairs, loss)?,
        Command::Iou { pairs } => iou_cmd(&ctx, pairs)?,
        Command::Sweep { scenario, metrics, f, tau } => sweep_cmd(&ctx, *scenario, metrics, *f, *tau)?,
        Command::GradCheck { pairs, loss, count, seed, step } => grad_check(&ctx, pairs.as_deref(), loss, *count, *seed, *step)?,
        Command::Fit { init, target, loss, f, tau, max_steps, stop_iou } => {
            fit_cmd(&ctx, init, target, loss, *f, *tau, *max_steps, *stop_iou)?
        }
        Command::Assign {
            gts,
            image_size,
            strides,
            anchor_scale,
            strategy,
            metric,
            k,
            tau,
            pos_thresh,
            neg_thresh,
            center_in_gt,
        } => {
            let cfg = AssignConfig {
                strategy: *strategy,
                metric: *metric,
                k: *k,
                tau: *tau,
                pos_thresh: *pos_thresh,
                neg_thresh: *neg_thresh,
                center_in_gt: *center_in_gt,
            };
            cfg.validate()?;
            let grid = AnchorGrid::generate(image_size[0], image_size[1], strides, *anchor_scale)?;
            assign_cmd(&ctx, gts, &grid, &cfg)?
        }
        Command::HeadFix { input, ratio_threshold, long_side_classes } => {
            let cfg = PostProcConfig {
                ratio_threshold: *ratio_threshold,
                long_side_classes: long_side_classes.iter().cloned().collect(),
            };
            cfg.validate()?;
            head_fix(&ctx, input, &cfg)?
        }
        Command::Selftest { seed } => return selftest_cmd(&ctx, *seed),
    }
    Ok(true)
}

/// Parses the process arguments, runs, and maps the outcome to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
