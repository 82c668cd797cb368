use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use depthbench_core::geometry::{DepthMap, Intrinsics};
use depthbench_core::grid::{Grid, Image};
use depthbench_core::harness::{Manifest, ManifestRecord, MetricReport, PredictionEntry};
use depthbench_core::io;
use depthbench_core::synthetic::{render_scene, Region, SyntheticScene};

fn depthbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_depthbench"))
        .args(args)
        .env_remove("DEPTHBENCH_JOBS")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout:\n{}\nstderr:\n{}",
        out.status,
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn err(out: &Output) -> String {
    assert!(!out.status.success(), "expected failure");
    String::from_utf8(out.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Three box scenes, two methods of different quality.
fn dataset(dir: &Path) -> PathBuf {
    let (w, h) = (40, 28);
    let k = Intrinsics::new(40.0, 40.0, 19.5, 13.5, w, h).unwrap();
    let mut records = Vec::new();
    for i in 0..3 {
        let scene = SyntheticScene::box_step(
            Region::Rect {
                x0: 8 + 2 * i,
                y0: 6 + i,
                x1: 26 + i,
                y1: 20,
            },
            3.0 + i as f64,
            25.0,
        );
        let gt = render_scene(&scene, &k).unwrap().depth;
        let name = format!("img{i}");
        io::save_depth(dir.join(format!("{name}_gt.fmap")), &gt).unwrap();
        let mut predictions = Vec::new();
        for (method, noise) in [("good", 0.02), ("poor", 0.3)] {
            let pred = DepthMap::new(Grid::from_fn(w, h, |x, y| {
                let wobble = 1.0 + noise * (((x * 7 + y * 13 + i * 5) % 11) as f64 / 5.0 - 1.0);
                gt.get(x, y).unwrap() * 2.0 * wobble
            }));
            let file = format!("{name}_{method}.fmap");
            io::save_depth(dir.join(&file), &pred).unwrap();
            predictions.push(PredictionEntry {
                method: method.into(),
                path: file.into(),
            });
        }
        records.push(ManifestRecord {
            name,
            image: None,
            gt: format!("img{i}_gt.fmap").into(),
            predictions,
            sky_mask: None,
            intrinsics: k,
        });
    }
    let manifest = Manifest::new(dir, records).unwrap();
    let path = dir.join("manifest.json");
    manifest.save(&path).unwrap();
    path
}

#[test]
fn eval_writes_all_formats_and_ranks() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let out_dir = dir.path().join("out");
    let stdout = ok(&depthbench(&[
        "eval",
        "--manifest",
        s(&manifest),
        "--out",
        s(&out_dir),
        "--format",
        "json,csv,markdown",
        "--jobs",
        "2",
    ]));
    assert!(stdout.contains("AbsRel: 1. good  2. poor"), "{stdout}");
    for ext in ["json", "csv", "md"] {
        assert!(out_dir.join(format!("report.{ext}")).exists(), "report.{ext}");
    }
    let report = MetricReport::from_json(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    report.check_rank_consistency().unwrap();
    assert_eq!(report.images.len(), 6);
}

#[test]
fn eval_output_is_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let mut texts = Vec::new();
    for jobs in ["1", "3"] {
        let out_dir = dir.path().join(format!("out{jobs}"));
        ok(&depthbench(&["eval", "--manifest", s(&manifest), "--out", s(&out_dir), "--jobs", jobs]));
        texts.push(std::fs::read_to_string(out_dir.join("report.json")).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let config = dir.path().join("bench.conf");
    std::fs::write(
        &config,
        "# shared settings\nmanifest = manifest.json\nmax-depth = 10\nsuites = image\nlegacy-sqrel = true\nout = from_config\n",
    )
    .unwrap();
    ok(&depthbench(&["eval", "--config", s(&config)]));
    let text = std::fs::read_to_string(dir.path().join("from_config/report.json")).unwrap();
    let report = MetricReport::from_json(&text).unwrap();
    assert_eq!(report.protocol.max_depth, 10.0);
    assert!(report.protocol.legacy_sqrel);
    assert!(report.methods[0].metrics.contains_key("SqRel-Legacy"));
    assert!(!report.methods[0].metrics.contains_key("Chamfer"));

    let out_dir = dir.path().join("flags");
    ok(&depthbench(&[
        "eval",
        "--config",
        s(&config),
        "--manifest",
        s(&manifest),
        "--max-depth",
        "80",
        "--suites",
        "image,pointcloud",
        "--out",
        s(&out_dir),
    ]));
    let report = MetricReport::from_json(&std::fs::read_to_string(out_dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.protocol.max_depth, 80.0);
    assert!(report.methods[0].metrics.contains_key("Chamfer"));

    std::fs::write(&config, "max_depth = 10\n").unwrap();
    assert!(err(&depthbench(&["eval", "--config", s(&config)])).contains("unknown key"));
}

#[test]
fn jobs_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_depthbench"))
        .args(["eval", "--manifest", s(&manifest), "--out", s(dir.path())])
        .env("DEPTHBENCH_JOBS", "many")
        .output()
        .unwrap();
    assert!(err(&out).contains("DEPTHBENCH_JOBS"));
    let out = Command::new(env!("CARGO_BIN_EXE_depthbench"))
        .args(["eval", "--manifest", s(&manifest), "--out", s(dir.path())])
        .env("DEPTHBENCH_JOBS", "2")
        .output()
        .unwrap();
    ok(&out);
}

#[test]
fn eval_failures_and_partial_runs() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    assert!(err(&depthbench(&["eval", "--out", s(dir.path())])).contains("no manifest"));
    assert!(err(&depthbench(&["eval", "--manifest", s(&manifest), "--align", "sideways"])).contains("alignment"));

    std::fs::write(dir.path().join("img1_poor.fmap"), b"garbage").unwrap();
    let stderr = err(&depthbench(&["eval", "--manifest", s(&manifest), "--out", s(dir.path())]));
    assert!(stderr.contains("img1"), "{stderr}");

    let out = depthbench(&["eval", "--manifest", s(&manifest), "--out", s(dir.path()), "--allow-partial"]);
    ok(&out);
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning: img1 / poor"));
}

#[test]
fn rank_by_any_metric() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dataset(dir.path());
    ok(&depthbench(&["eval", "--manifest", s(&manifest), "--out", s(dir.path())]));
    let report = dir.path().join("report.json");
    let stdout = ok(&depthbench(&["rank", "--report", s(&report), "--metric", "RMSE"]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "rank\tmethod\tRMSE");
    assert!(lines[1].starts_with("1\tgood\t"), "{stdout}");
    assert!(lines[2].starts_with("2\tpoor\t"), "{stdout}");
    let stdout = ok(&depthbench(&["rank", "--report", s(&report), "--metric", "RMSE", "--direction", "higher"]));
    assert!(stdout.lines().nth(1).unwrap().starts_with("1\tpoor\t"));
    assert!(err(&depthbench(&["rank", "--report", s(&report), "--metric", "Nope"])).contains("--direction"));
}

#[test]
fn boundaries_writes_pgm() {
    let dir = tempfile::tempdir().unwrap();
    let depth = DepthMap::new(Grid::from_fn(24, 16, |x, _| if x < 12 { 1.0 } else { 10.0 }));
    let depth_path = dir.path().join("d.fmap");
    io::save_depth(&depth_path, &depth).unwrap();
    let out = dir.path().join("edges.pgm");
    let stdout = ok(&depthbench(&["boundaries", "--depth", s(&depth_path), "--out", s(&out)]));
    assert!(stdout.contains("edge pixels"));
    let edges = io::load_edges_pgm(&out).unwrap();
    assert_eq!(edges.dims(), (24, 16));
    assert!(edges.count_true() >= 16);
    assert!(err(&depthbench(&["boundaries", "--depth", s(&depth_path), "--out", s(&out), "--transform", "cube"])).contains("cube"));
}

#[test]
fn patches_write_files_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (72, 36);
    let depth = DepthMap::constant(w, h, 5.0);
    let image = Image::from_planes(vec![
        Grid::from_fn(w, h, |x, _| x as f64 / w as f64),
        Grid::filled(w, h, 0.5),
        Grid::from_fn(w, h, |_, y| y as f64 / h as f64),
    ])
    .unwrap();
    io::save_depth(dir.path().join("pano.fmap"), &depth).unwrap();
    io::save_image(dir.path().join("pano.png"), &image).unwrap();
    let out = dir.path().join("patches");
    let stdout = ok(&depthbench(&[
        "patches",
        "--depth",
        s(&dir.path().join("pano.fmap")),
        "--image",
        s(&dir.path().join("pano.png")),
        "--scene",
        "hall",
        "--step",
        "90",
        "--width",
        "32",
        "--height",
        "16",
        "--focal",
        "20",
        "--out",
        s(&out),
    ]));
    assert!(stdout.starts_with("4 patches"), "{stdout}");
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("hall_patches.json")).unwrap()).unwrap();
    let records = manifest["patches"].as_array().unwrap();
    assert_eq!(records.len(), 4);
    assert_eq!(records[1]["depth"], "hall_090.fmap");
    assert_eq!(records[1]["image"], "hall_090.png");
    let patch = io::load_depth(out.join("hall_270.fmap")).unwrap();
    assert_eq!(patch.dims(), (32, 16));
    // Radial 5 m becomes z = 5 / |K^-1 p|.
    for (x, y, d) in patch.iter_valid() {
        let (rx, ry) = ((x as f64 - 15.5) / 20.0, (y as f64 - 7.5) / 20.0);
        let z = 5.0 / (1.0 + rx * rx + ry * ry).sqrt();
        assert!((d - z).abs() < 1e-5, "({x}, {y}): {d} vs {z}");
    }
    assert_eq!(patch.iter_valid().count(), 32 * 16);
    assert!(err(&depthbench(&["patches", "--depth", s(&dir.path().join("pano.fmap")), "--scene", "x", "--step", "7", "--out", s(&out)])).contains("divide"));
}

#[test]
fn losses_on_static_pair() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (24, 16);
    let img = Image::gray(Grid::from_fn(w, h, |x, y| ((x * 5 + y * 3) % 7) as f64 / 7.0));
    io::save_image(dir.path().join("t.png"), &img).unwrap();
    io::save_depth(dir.path().join("d.fmap"), &DepthMap::constant(w, h, 4.0)).unwrap();
    let stdout = ok(&depthbench(&[
        "losses",
        "--target",
        s(&dir.path().join("t.png")),
        "--support",
        s(&dir.path().join("t.png")),
        "--depth",
        s(&dir.path().join("d.fmap")),
        "--pose",
        "0,0,0,0,0,0",
        "--intrinsics",
        "20,20,11.5,7.5",
    ]));
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(v["photometric"], 0.0);
    assert_eq!(v["identity"], 0.0);
    assert_eq!(v["automask_kept_fraction"], 0.0);
    assert!(v["automasked"].is_null());
    assert_eq!(v["smoothness"], 0.0);

    let stdout = ok(&depthbench(&[
        "losses",
        "--target",
        s(&dir.path().join("t.png")),
        "--support",
        s(&dir.path().join("t.png")),
        "--depth",
        s(&dir.path().join("d.fmap")),
        "--pose",
        "0,0,0,-0.2,0,0",
        "--intrinsics",
        "20,20,11.5,7.5",
    ]));
    let v: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert!(v["photometric"].as_f64().unwrap() > 0.0);
    assert!(v["valid_fraction"].as_f64().unwrap() < 1.0);
    assert!(!err(&depthbench(&["losses", "--target", "a", "--support", "b", "--depth", "c", "--pose", "1,2", "--intrinsics", "1,1,1,1"])).is_empty());
}
