use std::path::PathBuf;
use std::process::{Command, Output};

fn fixture(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name).display().to_string()
}

fn rgauss(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rgauss")).args(args).output().expect("binary runs")
}

fn ok_stdout(args: &[&str]) -> String {
    let out = rgauss(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Rows of a CSV body, header dropped.
fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s}"))
}

fn summary_value(stderr: &[u8], key: &str) -> String {
    let text = String::from_utf8_lossy(stderr);
    let line = text.lines().last().expect("summary line");
    line.split(' ')
        .find_map(|kv| kv.strip_prefix(&format!("{key}=")))
        .unwrap_or_else(|| panic!("no {key} in {line}"))
        .to_string()
}

#[test]
fn distance_of_identical_pair_is_zero() {
    let out = ok_stdout(&["distance", "--pairs", &fixture("pairs.jsonl"), "--metric", "kld"]);
    assert!(out.starts_with("index,metric,value,quadratic,trace,log_det,constant\n"));
    let r = rows(&out);
    assert_eq!(r.len(), 3);
    assert_eq!(r[0][2], "0");
    assert!(num(&r[1][2]) > 0.0 && num(&r[2][2]) > 0.0);
    let terms: f64 = r[1][3..7].iter().map(|s| num(s)).sum();
    assert!((terms - num(&r[1][2])).abs() < 1e-7);
}

#[test]
fn loss_and_iou_columns() {
    let loss = ok_stdout(&["loss", "--pairs", &fixture("pairs.jsonl"), "--metric", "gwd", "--f", "log1p", "--tau", "1"]);
    assert!(loss.starts_with("index,metric,distance,loss\n"));
    assert_eq!(rows(&loss)[0][3], "0");
    let iou = ok_stdout(&["iou", "--pairs", &fixture("pairs.jsonl")]);
    let r = rows(&iou);
    assert_eq!(r[0][1], "1");
    assert!(num(&r[1][1]) < 1.0 && num(&r[2][1]) < 1.0);
}

#[test]
fn convert_to_long_edge() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("boxes.jsonl");
    std::fs::write(&input, "{\"x\": 0, \"y\": 0, \"w\": 2, \"h\": 4, \"theta\": -45}\n").unwrap();
    let out = ok_stdout(&["--degrees", "convert", "--input", input.to_str().unwrap(), "--to", "le"]);
    assert_eq!(out, "index,x,y,w,h,theta,def\n0,0,0,4,2,45,le\n");
}

#[test]
fn scale_sweep_keeps_kld_and_bcd() {
    let out = ok_stdout(&["sweep", "--scenario", "scale", "--metrics", "kld,bcd,gwd"]);
    let r = rows(&out);
    let first = |m: &str| r.iter().find(|row| row[1].starts_with(m)).unwrap().clone();
    for row in &r {
        let s = num(&row[0]);
        let base = num(&first(row[1].split('/').next().unwrap())[2]);
        let d = num(&row[2]);
        if row[1].starts_with("gwd") {
            assert!((d - base * s * s).abs() <= 1e-6 * d.max(1.0), "{row:?}");
        } else {
            assert!((d - base).abs() <= 1e-6 * base.max(1.0), "{row:?}");
        }
    }
}

#[test]
fn fit_crosses_the_boundary() {
    let out = rgauss(&[
        "--degrees",
        "fit",
        "--init",
        &fixture("boundary_anchor.json"),
        "--target",
        &fixture("boundary_gt.json"),
        "--loss",
        "kld",
    ]);
    assert!(out.status.success());
    assert!(num(&summary_value(&out.stderr, "final_iou")) >= 0.90);
    let body = String::from_utf8(out.stdout).unwrap();
    assert!(body.starts_with("step,x,y,w,h,theta,loss,skew_iou\n"));
}

#[test]
fn assign_covers_every_gt() {
    for strategy in ["atss", "maxiou"] {
        let out = ok_stdout(&["assign", "--gts", &fixture("gts.jsonl"), "--strategy", strategy, "--metric", "iou"]);
        assert!(out.starts_with("anchor,level,label,gt,affinity,threshold\n"));
        let r = rows(&out);
        for g in ["0", "1"] {
            assert!(r.iter().any(|row| row[2] == "positive" && row[3] == g), "{strategy} gt {g}");
        }
    }
}

#[test]
fn head_fix_rewrites_angles() {
    let out = ok_stdout(&["head-fix", "--input", &fixture("heads.jsonl")]);
    let recs: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let pi = std::f64::consts::PI;
    assert_eq!(recs[0]["theta"].as_f64().unwrap(), -pi);
    assert_eq!((recs[1]["theta"].as_f64().unwrap(), recs[1]["w"].as_f64().unwrap()), (pi / 2.0, 2.0));
    assert_eq!(recs[2]["theta"].as_f64().unwrap(), pi / 2.0);
    assert_eq!(recs[2]["class"], "pedestrian");
}

#[test]
fn out_file_moves_summary_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("iou.csv");
    let out = ok_stdout(&["--out", path.to_str().unwrap(), "iou", "--pairs", &fixture("pairs.jsonl")]);
    assert!(out.starts_with("command=iou rows=3"));
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("index,iou\n"));
}

#[test]
fn runs_are_byte_identical() {
    let args = ["grad-check", "--count", "20", "--seed", "7", "--metric", "bcd"];
    let (a, b) = (rgauss(&args), rgauss(&args));
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(summary_value(&a.stderr, "failures"), "0");
}

#[test]
fn exit_codes() {
    assert_eq!(rgauss(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(rgauss(&["iou", "--pairs", "/nonexistent.jsonl"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "not json\n").unwrap();
    assert_eq!(rgauss(&["iou", "--pairs", bad.to_str().unwrap()]).status.code(), Some(1));

    let flat = dir.path().join("flat.jsonl");
    let zero = "{\"x\": 0, \"y\": 0, \"w\": 0, \"h\": 1, \"theta\": -0.5}";
    std::fs::write(&flat, format!("{{\"pred\": {zero}, \"target\": {zero}}}\n")).unwrap();
    assert_eq!(rgauss(&["distance", "--pairs", flat.to_str().unwrap()]).status.code(), Some(2));

    let heads = dir.path().join("heads.jsonl");
    std::fs::write(
        &heads,
        "{\"x\": 0, \"y\": 0, \"z\": 0, \"w\": 4, \"h\": 2, \"l\": 1, \"theta\": 0, \"dx\": 0, \"dy\": 0, \"class\": \"vehicle\"}\n",
    )
    .unwrap();
    assert_eq!(rgauss(&["head-fix", "--input", heads.to_str().unwrap()]).status.code(), Some(2));
}
