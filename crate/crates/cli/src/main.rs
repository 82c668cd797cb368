mod settings;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use depthbench_core::geometry::{axis_angle_to_transform, synthesize_view, DepthMap, Intrinsics, Synthesized};
use depthbench_core::harness::{
    direction_of, emit_report, rank_methods, run_evaluation, Direction, Manifest, MetricReport, Protocol,
    ReportFormat, Suites,
};
use depthbench_core::io;
use depthbench_core::losses::{photometric_loss, static_automask, PhotometricConfig};
use depthbench_core::metrics::{extract_depth_boundaries, AlignmentMode, DepthTransform, EdgeConfig};
use depthbench_core::panorama::{
    generate_scene_patches, Panorama, PatchRecord, PatchSpec, SceneManifest, DEFAULT_PATCH_HEIGHT,
    DEFAULT_PATCH_WIDTH, DEFAULT_STEP_DEG,
};
use depthbench_core::regularizers::{smoothness_loss, SmoothnessConfig};
use depthbench_core::{Grid, Image};
use nalgebra::Vector3;
use settings::Settings;

#[derive(Parser)]
#[command(name = "depthbench", version, about = "Monocular depth estimation benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate every method in a manifest and write reports.
    Eval(EvalArgs),
    /// Extract depth boundaries from a depth map.
    Boundaries(BoundaryArgs),
    /// Cut perspective patches out of an equirectangular panorama.
    Patches(PatchArgs),
    /// Forward self-supervised losses for one target/support pair.
    Losses(LossArgs),
    /// Re-rank the methods of a JSON report by any aggregate metric.
    Rank(RankArgs),
}

const EVAL_KEYS: &[&str] = &[
    "manifest",
    "align",
    "max-depth",
    "min-depth",
    "suites",
    "edge-transform",
    "edge-sigma",
    "edge-trunc",
    "tau3d",
    "legacy-sqrel",
    "allow-partial",
    "out",
    "format",
    "jobs",
];

#[derive(Args)]
struct EvalArgs {
    /// JSON manifest listing gt, predictions and intrinsics per image.
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// `key = value` file with defaults for any of these flags.
    #[arg(long)]
    config: Option<PathBuf>,
    /// median, none or fixed:<scale>.
    #[arg(long)]
    align: Option<String>,
    #[arg(long)]
    max_depth: Option<f64>,
    #[arg(long)]
    min_depth: Option<f64>,
    /// Comma list of image, pointcloud, edge.
    #[arg(long)]
    suites: Option<String>,
    /// raw, log or inverse.
    #[arg(long)]
    edge_transform: Option<String>,
    #[arg(long)]
    edge_sigma: Option<f64>,
    /// Edge distance truncation in pixels.
    #[arg(long)]
    edge_trunc: Option<f64>,
    /// Pointcloud distance threshold in meters.
    #[arg(long)]
    tau3d: Option<f64>,
    /// Also report SqRel normalized by gt instead of gt squared.
    #[arg(long)]
    legacy_sqrel: bool,
    /// Record failed images and continue instead of aborting.
    #[arg(long)]
    allow_partial: bool,
    /// Output directory (default: current directory).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma list of json, csv, markdown.
    #[arg(long)]
    format: Option<String>,
    /// Worker threads; 0 uses every core. Defaults to $DEPTHBENCH_JOBS.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct BoundaryArgs {
    /// Depth map (.fmap or 16-bit .png).
    #[arg(long)]
    depth: PathBuf,
    /// 8-bit mask, nonzero = sky.
    #[arg(long)]
    sky: Option<PathBuf>,
    #[arg(long, default_value = "log")]
    transform: DepthTransform,
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Output PGM.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PatchArgs {
    /// Equirectangular depth (.fmap or 16-bit .png), distance along the ray.
    #[arg(long)]
    depth: PathBuf,
    /// Equirectangular colour image; patches carry depth only without it.
    #[arg(long)]
    image: Option<PathBuf>,
    /// Scene name used for file names and the scene manifest.
    #[arg(long)]
    scene: String,
    #[arg(long, default_value_t = DEFAULT_STEP_DEG)]
    step: u32,
    #[arg(long, default_value_t = DEFAULT_PATCH_WIDTH)]
    width: usize,
    #[arg(long, default_value_t = DEFAULT_PATCH_HEIGHT)]
    height: usize,
    /// Focal length in pixels (both axes).
    #[arg(long, default_value_t = 721.5)]
    focal: f64,
    #[arg(long, default_value_t = 0.0)]
    elevation: f64,
    /// Keep panorama depth as ray distance instead of converting to z-depth.
    #[arg(long)]
    keep_radial: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LossArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long)]
    support: PathBuf,
    /// Target-view depth.
    #[arg(long)]
    depth: PathBuf,
    /// Target-to-support pose `rx,ry,rz,tx,ty,tz` (axis-angle, meters).
    #[arg(long, allow_hyphen_values = true)]
    pose: String,
    /// `fx,fy,cx,cy` in pixels.
    #[arg(long)]
    intrinsics: String,
    /// SSIM weight of the photometric error.
    #[arg(long, default_value_t = 0.85)]
    alpha: f64,
}

#[derive(Args)]
struct RankArgs {
    /// report.json written by `eval`.
    #[arg(long)]
    report: PathBuf,
    #[arg(long)]
    metric: String,
    /// lower or higher; inferred for known metrics.
    #[arg(long)]
    direction: Option<Direction>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Eval(a) => eval(a),
        Command::Boundaries(a) => boundaries(a),
        Command::Patches(a) => patches(a),
        Command::Losses(a) => losses(a),
        Command::Rank(a) => rank(a),
    }
}

fn parse_list<T>(s: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr,
    T::Err: std::error::Error + Send + Sync + 'static,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse::<T>().map_err(anyhow::Error::from))
        .collect()
}

fn parse_floats<const N: usize>(s: &str, what: &str) -> Result<[f64; N]> {
    let v = parse_list::<f64>(s).with_context(|| format!("parsing {what}"))?;
    v.try_into().map_err(|v: Vec<f64>| anyhow!("{what} needs {N} comma-separated numbers, got {}", v.len()))
}

fn eval_settings(a: &EvalArgs) -> Result<Settings> {
    let mut s = match &a.config {
        Some(p) => Settings::load(p, EVAL_KEYS)?,
        None => Settings::default(),
    };
    s.set("manifest", a.manifest.as_ref().map(|p| p.display()));
    s.set("align", a.align.as_ref());
    s.set("max-depth", a.max_depth);
    s.set("min-depth", a.min_depth);
    s.set("suites", a.suites.as_ref());
    s.set("edge-transform", a.edge_transform.as_ref());
    s.set("edge-sigma", a.edge_sigma);
    s.set("edge-trunc", a.edge_trunc);
    s.set("tau3d", a.tau3d);
    s.set_flag("legacy-sqrel", a.legacy_sqrel);
    s.set_flag("allow-partial", a.allow_partial);
    s.set("out", a.out.as_ref().map(|p| p.display()));
    s.set("format", a.format.as_ref());
    s.set("jobs", a.jobs);
    Ok(s)
}

fn protocol_from(s: &Settings) -> Result<Protocol> {
    let mut p = Protocol::default();
    if let Some(v) = s.get::<AlignmentMode>("align")? {
        p.alignment = v;
    }
    if let Some(v) = s.get("max-depth")? {
        p.max_depth = v;
    }
    if let Some(v) = s.get("min-depth")? {
        p.min_depth = v;
    }
    if let Some(v) = s.get::<Suites>("suites")? {
        p.suites = v;
    }
    if let Some(v) = s.get::<DepthTransform>("edge-transform")? {
        p.edge.transform = v;
    }
    if let Some(v) = s.get("edge-sigma")? {
        p.edge.sigma = v;
    }
    if let Some(v) = s.get("edge-trunc")? {
        p.edge_truncation = v;
    }
    if let Some(v) = s.get("tau3d")? {
        p.tau_3d = v;
    }
    p.legacy_sqrel = s.flag("legacy-sqrel")?;
    p.allow_partial = s.flag("allow-partial")?;
    p.validate()?;
    Ok(p)
}

fn default_jobs() -> Result<usize> {
    match std::env::var("DEPTHBENCH_JOBS") {
        Ok(v) => v.trim().parse().with_context(|| format!("DEPTHBENCH_JOBS=`{v}` is not a count")),
        Err(_) => Ok(0),
    }
}

fn eval(a: EvalArgs) -> Result<()> {
    let s = eval_settings(&a)?;
    let protocol = protocol_from(&s)?;
    let manifest_path = s
        .path("manifest", a.manifest.is_some())
        .ok_or_else(|| anyhow!("no manifest given (--manifest or `manifest =` in the config)"))?;
    let out = s.path("out", a.out.is_some()).unwrap_or_else(|| PathBuf::from("."));
    let formats = parse_list::<ReportFormat>(&s.get::<String>("format")?.unwrap_or_else(|| "json".into()))?;
    if formats.is_empty() {
        bail!("no report format selected");
    }
    let jobs = match s.get("jobs")? {
        Some(j) => j,
        None => default_jobs()?,
    };

    let manifest = Manifest::load(&manifest_path)?;
    let report = run_evaluation(&manifest, &protocol, jobs)?;
    for f in &report.failures {
        eprintln!("warning: {} / {} failed: {}", f.name, f.method, f.error);
    }
    for fmt in formats {
        let path = emit_report(&report, fmt, &out)?;
        println!("wrote {}", path.display());
    }
    for r in &report.rankings {
        let mut entries: Vec<_> = r.entries.iter().collect();
        entries.sort_by_key(|e| e.rank);
        let order: Vec<String> = entries.iter().map(|e| format!("{}. {}", e.rank, e.method)).collect();
        println!("{}: {}", r.metric, order.join("  "));
    }
    Ok(())
}

fn load_sky(path: Option<&Path>) -> Result<Option<Grid<bool>>> {
    path.map(io::load_sky_mask).transpose().map_err(Into::into)
}

fn boundaries(a: BoundaryArgs) -> Result<()> {
    let depth = io::load_depth(&a.depth)?;
    let sky = load_sky(a.sky.as_deref())?;
    let config = EdgeConfig {
        transform: a.transform,
        sigma: a.sigma,
        ..EdgeConfig::default()
    };
    let edges = extract_depth_boundaries(&depth, sky.as_ref(), &config)?;
    io::save_edges_pgm(&a.out, &edges)?;
    println!("{} edge pixels -> {}", edges.count(), a.out.display());
    Ok(())
}

fn patches(a: PatchArgs) -> Result<()> {
    let depth = io::load_depth(&a.depth)?;
    let (w, h) = depth.dims();
    let image = match &a.image {
        Some(p) => io::load_image(p)?,
        None => Image::filled(w, h, 1, 0.0),
    };
    let pano = Panorama::new(image, depth)?;
    let intrinsics = Intrinsics::new(
        a.focal,
        a.focal,
        (a.width as f64 - 1.0) / 2.0,
        (a.height as f64 - 1.0) / 2.0,
        a.width,
        a.height,
    )?;
    let template = PatchSpec {
        azimuth_deg: 0.0,
        elevation_deg: a.elevation,
        intrinsics,
        radial_depth: !a.keep_radial,
    };
    let patches = generate_scene_patches(&pano, a.step, &template)?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;

    let mut records = Vec::with_capacity(patches.len());
    for p in &patches {
        let stem = format!("{}_{:03}", a.scene, p.spec.azimuth_deg.round() as i64);
        let depth_name = format!("{stem}.fmap");
        io::save_depth(a.out.join(&depth_name), &p.depth)?;
        let image_name = match a.image {
            Some(_) => {
                let name = format!("{stem}.png");
                io::save_image(a.out.join(&name), &p.image)?;
                Some(name)
            }
            None => None,
        };
        records.push(PatchRecord {
            azimuth_deg: p.spec.azimuth_deg,
            image: image_name,
            depth: depth_name,
            valid_fraction: p.depth.valid_count() as f64 / (a.width * a.height) as f64,
            keep: true,
        });
    }
    let manifest = SceneManifest {
        scene: a.scene.clone(),
        step_deg: a.step,
        intrinsics,
        radial_depth: template.radial_depth,
        patches: records,
    };
    let path = a.out.join(format!("{}_patches.json", a.scene));
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?).with_context(|| format!("writing {}", path.display()))?;
    println!("{} patches -> {}", patches.len(), path.display());
    Ok(())
}

fn losses(a: LossArgs) -> Result<()> {
    let target = io::load_image(&a.target)?;
    let support = io::load_image(&a.support)?;
    let depth: DepthMap = io::load_depth(&a.depth)?;
    let [rx, ry, rz, tx, ty, tz] = parse_floats::<6>(&a.pose, "pose")?;
    let [fx, fy, cx, cy] = parse_floats::<4>(&a.intrinsics, "intrinsics")?;
    let (w, h) = depth.dims();
    let k = Intrinsics::new(fx, fy, cx, cy, w, h)?;
    let pose = axis_angle_to_transform(Vector3::new(rx, ry, rz), Vector3::new(tx, ty, tz));
    let cfg = PhotometricConfig {
        alpha: a.alpha,
        ..PhotometricConfig::default()
    };

    let synth = synthesize_view(&depth, &support, &k, &pose)?;
    let warped = photometric_loss(&target, &synth, &cfg)?;
    let identity = photometric_loss(&target, &Synthesized::all_valid(support), &cfg)?;
    let keep = static_automask(std::slice::from_ref(&warped), std::slice::from_ref(&identity))?;
    let masked: Vec<f64> = warped
        .values
        .iter()
        .zip(keep.iter())
        .filter_map(|(v, k)| k.then_some(*v))
        .collect();
    let disparity = depth.values().zip_map(depth.valid(), |d, ok| if *ok { 1.0 / d } else { 0.0 })?;
    let smooth_cfg = SmoothnessConfig::default();
    let smoothness = smoothness_loss(&disparity, Some(&target), &smooth_cfg)?;

    let out = serde_json::json!({
        "photometric": warped.mean(),
        "identity": identity.mean(),
        "automasked": if masked.is_empty() { None } else { Some(masked.iter().sum::<f64>() / masked.len() as f64) },
        "automask_kept_fraction": keep.count_true() as f64 / (w * h) as f64,
        "valid_fraction": warped.valid.count_true() as f64 / (w * h) as f64,
        "smoothness": smoothness,
        "smoothness_weight": smooth_cfg.weight,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn rank(a: RankArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.report).with_context(|| format!("reading {}", a.report.display()))?;
    let report = MetricReport::from_json(&text)?;
    report.check_rank_consistency()?;
    let direction = match a.direction.or_else(|| direction_of(&a.metric)) {
        Some(d) => d,
        None => bail!("unknown metric `{}`; pass --direction", a.metric),
    };
    let ranking = rank_methods(&report.methods, &a.metric, direction)?;
    let mut entries: Vec<_> = ranking.entries.iter().collect();
    entries.sort_by(|x, y| x.rank.cmp(&y.rank).then(x.method.cmp(&y.method)));
    println!("rank\tmethod\t{}", a.metric);
    for e in entries {
        let tie = if e.tied { "=" } else { "" };
        println!("{}{tie}\t{}\t{}", e.rank, e.method, e.value);
    }
    Ok(())
}
