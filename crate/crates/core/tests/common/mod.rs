//! Shared test substrate: seeded fixtures and naive reference implementations.
//!
//! The oracles below are written as plain scalar loops over slices and do not
//! call any engine kernel, so a bug in the engine cannot hide in a shared helper.

#![allow(dead_code)]

use std::path::Path;

use depthbench_core::geometry::{DepthMap, Intrinsics};
use depthbench_core::grid::{Grid, Image};
use depthbench_core::harness::{Manifest, ManifestRecord, PredictionEntry};
use depthbench_core::io;
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Relative comparison with an absolute floor for values near zero.
pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

pub fn random_depth(rng: &mut ChaCha8Rng, w: usize, h: usize, lo: f64, hi: f64, invalid_fraction: f64) -> DepthMap {
    DepthMap::new(Grid::from_fn(w, h, |_, _| {
        if rng.gen::<f64>() < invalid_fraction {
            0.0
        } else {
            rng.gen_range(lo..hi)
        }
    }))
}

pub fn random_image(rng: &mut ChaCha8Rng, w: usize, h: usize, channels: usize) -> Image {
    let planes = (0..channels)
        .map(|_| Grid::from_fn(w, h, |_, _| rng.gen::<f64>()))
        .collect();
    Image::from_planes(planes).unwrap()
}

pub fn random_cloud(rng: &mut ChaCha8Rng, n: usize, extent: f64) -> Vec<Point3<f64>> {
    (0..n)
        .map(|_| {
            Point3::new(
                rng.gen_range(-extent..extent),
                rng.gen_range(-extent..extent),
                rng.gen_range(0.5..extent + 0.5),
            )
        })
        .collect()
}

pub fn random_edges(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> Grid<bool> {
    Grid::from_fn(w, h, |_, _| rng.gen::<f64>() < density)
}

/// Reference metric values, in the same units as the engine.
#[derive(Debug, Clone, Copy)]
pub struct OracleImageMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub inv_mae: f64,
    pub inv_rmse: f64,
    pub log_mae: f64,
    pub log_rmse: f64,
    pub log_si: f64,
    pub abs_rel: f64,
    pub sq_rel: f64,
    pub sq_rel_legacy: f64,
    pub delta: [f64; 3],
}

impl OracleImageMetrics {
    pub fn named(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("mae", self.mae),
            ("rmse", self.rmse),
            ("inv_mae", self.inv_mae),
            ("inv_rmse", self.inv_rmse),
            ("log_mae", self.log_mae),
            ("log_rmse", self.log_rmse),
            ("log_si", self.log_si),
            ("abs_rel", self.abs_rel),
            ("sq_rel", self.sq_rel),
            ("sq_rel_legacy", self.sq_rel_legacy),
            ("delta1", self.delta[0]),
            ("delta2", self.delta[1]),
            ("delta3", self.delta[2]),
        ]
    }
}

pub fn engine_named(m: &depthbench_core::ImageMetrics) -> Vec<(&'static str, f64)> {
    vec![
        ("mae", m.mae),
        ("rmse", m.rmse),
        ("inv_mae", m.inv_mae),
        ("inv_rmse", m.inv_rmse),
        ("log_mae", m.log_mae),
        ("log_rmse", m.log_rmse),
        ("log_si", m.log_si),
        ("abs_rel", m.abs_rel),
        ("sq_rel", m.sq_rel),
        ("sq_rel_legacy", m.sq_rel_legacy),
        ("delta1", m.delta1),
        ("delta2", m.delta2),
        ("delta3", m.delta3),
    ]
}

/// Image metrics by direct formula over the selected pixel pairs. LogSI uses
/// the textbook `sqrt(mean(d^2) - mean(d)^2)`.
pub fn oracle_image_metrics(pred: &[f64], gt: &[f64], mask: &[bool]) -> OracleImageMetrics {
    let mut n = 0.0;
    let mut s = [0.0f64; 12];
    let mut delta = [0.0f64; 3];
    for i in 0..pred.len() {
        if !mask[i] {
            continue;
        }
        let (p, g) = (pred[i], gt[i]);
        n += 1.0;
        s[0] += (p - g).abs();
        s[1] += (p - g) * (p - g);
        s[2] += (1.0 / p - 1.0 / g).abs();
        s[3] += (1.0 / p - 1.0 / g) * (1.0 / p - 1.0 / g);
        let d = p.ln() - g.ln();
        s[4] += d.abs();
        s[5] += d * d;
        s[6] += d;
        s[7] += (p - g).abs() / g;
        s[8] += (p - g) * (p - g) / (g * g);
        s[9] += (p - g) * (p - g) / g;
        let ratio = if p / g > g / p { p / g } else { g / p };
        if ratio < 1.25 {
            delta[0] += 1.0;
        }
        if ratio < 1.25 * 1.25 {
            delta[1] += 1.0;
        }
        if ratio < 1.25 * 1.25 * 1.25 {
            delta[2] += 1.0;
        }
    }
    let si = s[5] / n - (s[6] / n) * (s[6] / n);
    OracleImageMetrics {
        mae: s[0] / n,
        rmse: (s[1] / n).sqrt(),
        inv_mae: s[2] / n,
        inv_rmse: (s[3] / n).sqrt(),
        log_mae: s[4] / n,
        log_rmse: (s[5] / n).sqrt(),
        log_si: if si > 0.0 { si.sqrt() } else { 0.0 },
        abs_rel: s[7] / n,
        sq_rel: s[8] / n,
        sq_rel_legacy: s[9] / n,
        delta: [100.0 * delta[0] / n, 100.0 * delta[1] / n, 100.0 * delta[2] / n],
    }
}

/// Pixels valid in both maps.
pub fn joint_mask(pred: &DepthMap, gt: &DepthMap) -> Vec<bool> {
    pred.valid().iter().zip(gt.valid().iter()).map(|(a, b)| *a && *b).collect()
}

/// Squared Euclidean distance with the same operation order as the engine, so
/// nearest-neighbour distances can be compared bit for bit.
pub fn sq_dist(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// O(N·M) nearest-neighbour distances.
pub fn brute_nn(query: &[Point3<f64>], reference: &[Point3<f64>]) -> Vec<f64> {
    query
        .iter()
        .map(|q| {
            let mut best = f64::INFINITY;
            for r in reference {
                let d = sq_dist(q, r);
                if d < best {
                    best = d;
                }
            }
            best.sqrt()
        })
        .collect()
}

pub struct OracleCloudMetrics {
    pub chamfer: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
    pub iou: f64,
}

pub fn oracle_cloud_metrics(pred: &[Point3<f64>], gt: &[Point3<f64>], tau: f64) -> OracleCloudMetrics {
    let p2g = brute_nn(pred, gt);
    let g2p = brute_nn(gt, pred);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let frac = |v: &[f64]| v.iter().filter(|d| **d < tau).count() as f64 / v.len() as f64;
    let (p, r) = (frac(&p2g), frac(&g2p));
    let (f, iou) = if p + r == 0.0 {
        (0.0, 0.0)
    } else {
        (2.0 * p * r / (p + r), p * r / (p + r - p * r))
    };
    OracleCloudMetrics {
        chamfer: mean(&g2p) + mean(&p2g),
        precision: 100.0 * p,
        recall: 100.0 * r,
        f_score: 100.0 * f,
        iou: 100.0 * iou,
    }
}

/// Squared distance from every pixel to the nearest set pixel by exhaustive search.
pub fn brute_squared_edt(sites: &Grid<bool>) -> Option<Vec<i64>> {
    let (w, h) = sites.dims();
    let set: Vec<(i64, i64)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|&(x, y)| sites[(x, y)])
        .map(|(x, y)| (x as i64, y as i64))
        .collect();
    if set.is_empty() {
        return None;
    }
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            out.push(set.iter().map(|(sx, sy)| (sx - x) * (sx - x) + (sy - y) * (sy - y)).min().unwrap());
        }
    }
    Some(out)
}

/// Mean over `from` pixels of the truncated distance to the nearest `to` pixel.
pub fn oracle_edge_distance(from: &Grid<bool>, to: &Grid<bool>, tau: f64) -> f64 {
    let dist = brute_squared_edt(to);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, &f) in from.as_slice().iter().enumerate() {
        if f {
            sum += match &dist {
                Some(d) => (d[i] as f64).sqrt().min(tau),
                None => tau,
            };
            n += 1;
        }
    }
    if n == 0 {
        tau
    } else {
        sum / n as f64
    }
}

/// Bilinear interpolation by explicit weights; `None` outside the pixel-centre hull.
pub fn oracle_bilinear(g: &Grid<f64>, x: f64, y: f64) -> Option<f64> {
    let (w, h) = g.dims();
    if x < 0.0 || y < 0.0 || x > (w - 1) as f64 || y > (h - 1) as f64 {
        return None;
    }
    let mut acc = 0.0;
    for yy in 0..h {
        for xx in 0..w {
            let wx = 1.0 - (x - xx as f64).abs();
            let wy = 1.0 - (y - yy as f64).abs();
            if wx > 0.0 && wy > 0.0 {
                acc += wx * wy * g[(xx, yy)];
            }
        }
    }
    Some(acc)
}

/// Target-view synthesis for a fronto-parallel scene at depth `d` seen by a
/// camera translated by `t` along x: the support image is sampled at
/// `u + fx * t / d`, computed without matrices.
pub fn oracle_planar_shift(support: &Grid<f64>, fx: f64, t: f64, d: f64) -> Grid<Option<f64>> {
    let (w, h) = support.dims();
    Grid::from_fn(w, h, |x, y| oracle_bilinear(support, x as f64 + fx * t / d, y as f64))
}

pub fn small_intrinsics(w: usize, h: usize) -> Intrinsics {
    Intrinsics::new(w as f64, w as f64, (w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0, w, h).unwrap()
}

/// Writes a synthetic dataset (float-map gt and predictions) and its manifest.
///
/// Methods are perturbed copies of gt with increasing noise, so their quality
/// order is known. Returns the manifest path.
pub fn write_synthetic_dataset(dir: &Path, images: usize, methods: &[(&str, f64)], seed: u64) -> std::path::PathBuf {
    use depthbench_core::synthetic::{render_scene, Region, SyntheticScene};
    let mut rng = rng(seed);
    let (w, h) = (48, 32);
    let k = small_intrinsics(w, h);
    let mut records = Vec::new();
    for i in 0..images {
        let x0 = rng.gen_range(8..20);
        let y0 = rng.gen_range(6..14);
        let scene = SyntheticScene::box_step(
            Region::Rect {
                x0,
                y0,
                x1: x0 + rng.gen_range(10..20),
                y1: y0 + rng.gen_range(8..14),
            },
            rng.gen_range(2.0..6.0),
            rng.gen_range(15.0..60.0),
        );
        let gt = render_scene(&scene, &k).unwrap().depth;
        let gt_name = format!("gt_{i:03}.fmap");
        io::save_depth(dir.join(&gt_name), &gt).unwrap();
        let mut predictions = Vec::new();
        for (m, noise) in methods {
            let global = rng.gen_range(0.5..2.0);
            let pred = DepthMap::new(gt.values().map(|d| global * d * (1.0 + noise * rng.gen_range(-1.0..1.0))));
            let name = format!("{m}_{i:03}.fmap");
            io::save_depth(dir.join(&name), &pred).unwrap();
            predictions.push(PredictionEntry {
                method: m.to_string(),
                path: name.into(),
            });
        }
        records.push(ManifestRecord {
            name: format!("img_{i:03}"),
            image: None,
            gt: gt_name.into(),
            predictions,
            sky_mask: None,
            intrinsics: k,
        });
    }
    let path = dir.join("manifest.json");
    Manifest::new(dir, records).unwrap().save(&path).unwrap();
    path
}
