//! Depth-boundary extraction and edge-based metrics.
//!
//! Boundaries are Canny edges of the smoothed, transformed depth map. Edge
//! components touching invalid depth are discarded unless the invalid pixels
//! are sky, since missing returns otherwise create spurious discontinuities.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{gaussian_blur, sobel};
use crate::geometry::{backproject, DepthMap, Intrinsics};
use crate::grid::{ensure_same_dims, Grid};
use crate::metrics::edt::truncated_distance;
use crate::metrics::image::{image_metrics, ImageMetrics};
use crate::metrics::pointcloud::{pointcloud_metrics, PointcloudMetrics};

/// Maximum distance (pixels) considered by edge accuracy/completeness.
pub const DEFAULT_EDGE_TRUNCATION: f64 = 10.0;

const NEIGHBOURS_8: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DepthTransform {
    Raw,
    Log,
    Inverse,
}

impl DepthTransform {
    #[inline]
    pub fn apply(self, depth: f64) -> f64 {
        match self {
            DepthTransform::Raw => depth,
            DepthTransform::Log => depth.ln(),
            DepthTransform::Inverse => 1.0 / depth,
        }
    }
}

impl std::fmt::Display for DepthTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DepthTransform::Raw => "raw",
            DepthTransform::Log => "log",
            DepthTransform::Inverse => "inverse",
        })
    }
}

impl std::str::FromStr for DepthTransform {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(DepthTransform::Raw),
            "log" => Ok(DepthTransform::Log),
            "inverse" | "inv" => Ok(DepthTransform::Inverse),
            other => Err(Error::invalid(format!("unknown depth transform `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeConfig {
    pub transform: DepthTransform,
    /// Gaussian smoothing before gradient computation, pixels.
    pub sigma: f64,
    /// Hysteresis thresholds as fractions of the largest gradient magnitude.
    pub low_ratio: f64,
    pub high_ratio: f64,
    /// Sky pixels are filled with this multiple of the farthest valid depth.
    pub sky_depth_factor: f64,
}

impl Default for EdgeConfig {
    fn default() -> Self {
        Self {
            transform: DepthTransform::Log,
            sigma: 1.0,
            low_ratio: 0.1,
            high_ratio: 0.2,
            sky_depth_factor: 10.0,
        }
    }
}

impl EdgeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma >= 0.0) {
            return Err(Error::invalid(format!("edge sigma must be >= 0, got {}", self.sigma)));
        }
        if !(0.0 < self.low_ratio && self.low_ratio <= self.high_ratio && self.high_ratio <= 1.0) {
            return Err(Error::invalid("hysteresis ratios need 0 < low <= high <= 1"));
        }
        if !(self.sky_depth_factor >= 1.0) {
            return Err(Error::invalid("sky depth factor must be >= 1"));
        }
        Ok(())
    }
}

/// Binary depth-boundary map and how it was produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeMap {
    pub edges: Grid<bool>,
    pub transform: DepthTransform,
    pub sigma: f64,
}

impl EdgeMap {
    pub fn new(edges: Grid<bool>, transform: DepthTransform, sigma: f64) -> Self {
        Self {
            edges,
            transform,
            sigma,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.edges.dims()
    }

    pub fn count(&self) -> usize {
        self.edges.count_true()
    }
}

/// Canny edges with hysteresis thresholds relative to the largest gradient magnitude.
pub fn canny(grid: &Grid<f64>, sigma: f64, low_ratio: f64, high_ratio: f64) -> Grid<bool> {
    let (w, h) = grid.dims();
    let smoothed = gaussian_blur(grid, sigma);
    let (gx, gy) = sobel(&smoothed);
    let mag = gx.zip_map(&gy, |a, b| a.hypot(*b)).expect("same dims");
    let max_mag = mag.iter().copied().fold(0.0, f64::max);
    let scale = smoothed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(max_mag > 1e-12 * (1.0 + scale)) {
        return Grid::filled(w, h, false);
    }

    // Near-ties between neighbours are resolved towards the pixel on the
    // negative side of the gradient, so a symmetric step yields one line.
    let eps = 1e-9 * max_mag;
    let low = low_ratio * max_mag;
    let high = high_ratio * max_mag;
    let mut thin = Grid::filled(w, h, 0.0);
    for y in 0..h {
        for x in 0..w {
            let m = mag[(x, y)];
            if m < low {
                continue;
            }
            let mut angle = gy[(x, y)].atan2(gx[(x, y)]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dx, dy): (isize, isize) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let at = |ox: isize, oy: isize| mag.get_clamped(x as isize + ox, y as isize + oy);
            let behind = at(-dx, -dy);
            let ahead = at(dx, dy);
            if m > behind + eps && m >= ahead - eps {
                thin[(x, y)] = m;
            }
        }
    }

    let mut edges = Grid::filled(w, h, false);
    let mut queue = VecDeque::new();
    for (x, y, &m) in thin.indexed_iter() {
        if m >= high {
            edges[(x, y)] = true;
            queue.push_back((x, y));
        }
    }
    while let Some((x, y)) = queue.pop_front() {
        for (ox, oy) in NEIGHBOURS_8 {
            let (nx, ny) = (x as isize + ox, y as isize + oy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let (nx, ny) = (nx as usize, ny as usize);
            if !edges[(nx, ny)] && thin[(nx, ny)] >= low {
                edges[(nx, ny)] = true;
                queue.push_back((nx, ny));
            }
        }
    }
    edges
}

/// Transformed depth with invalid pixels filled: sky gets a far depth,
/// other invalid pixels copy their nearest known neighbour (4-connected
/// breadth-first fill seeded in row-major order).
fn filled_transformed(depth: &DepthMap, sky: &Grid<bool>, config: &EdgeConfig) -> Grid<f64> {
    let (w, h) = depth.dims();
    let max_depth = depth.iter_valid().map(|(_, _, d)| d).fold(0.0, f64::max);
    let sky_value = config.transform.apply(max_depth * config.sky_depth_factor);
    let mut values: Grid<Option<f64>> = Grid::from_fn(w, h, |x, y| match depth.get(x, y) {
        Some(d) => Some(config.transform.apply(d)),
        None if sky[(x, y)] => Some(sky_value),
        None => None,
    });
    let mut queue: VecDeque<(usize, usize)> = values
        .indexed_iter()
        .filter_map(|(x, y, v)| v.map(|_| (x, y)))
        .collect();
    while let Some((x, y)) = queue.pop_front() {
        let v = values[(x, y)];
        for (ox, oy) in [(0isize, -1isize), (-1, 0), (1, 0), (0, 1)] {
            let (nx, ny) = (x as isize + ox, y as isize + oy);
            if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                continue;
            }
            let n = (nx as usize, ny as usize);
            if values[n].is_none() {
                values[n] = v;
                queue.push_back(n);
            }
        }
    }
    values.map(|v| v.expect("at least one valid pixel seeds the fill"))
}

/// Removes 8-connected edge components that contain or touch a pixel of `blocked`.
fn drop_components_touching(edges: &mut Grid<bool>, blocked: &Grid<bool>) {
    let (w, h) = edges.dims();
    let near_blocked = |x: usize, y: usize| {
        blocked[(x, y)]
            || NEIGHBOURS_8.iter().any(|(ox, oy)| {
                let (nx, ny) = (x as isize + ox, y as isize + oy);
                nx >= 0 && ny >= 0 && nx < w as isize && ny < h as isize && blocked[(nx as usize, ny as usize)]
            })
    };
    let mut seen = Grid::filled(w, h, false);
    let mut component = Vec::new();
    for start_y in 0..h {
        for start_x in 0..w {
            if !edges[(start_x, start_y)] || seen[(start_x, start_y)] {
                continue;
            }
            component.clear();
            let mut touches = false;
            let mut queue = VecDeque::from([(start_x, start_y)]);
            seen[(start_x, start_y)] = true;
            while let Some((x, y)) = queue.pop_front() {
                component.push((x, y));
                touches |= near_blocked(x, y);
                for (ox, oy) in NEIGHBOURS_8 {
                    let (nx, ny) = (x as isize + ox, y as isize + oy);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let n = (nx as usize, ny as usize);
                    if edges[n] && !seen[n] {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
            if touches {
                for &p in &component {
                    edges[p] = false;
                }
            }
        }
    }
}

/// Detects depth boundaries. `sky` marks invalid pixels that are sky (edges
/// next to them are kept); pass `None` when no sky mask is available.
pub fn extract_depth_boundaries(
    depth: &DepthMap,
    sky: Option<&Grid<bool>>,
    config: &EdgeConfig,
) -> Result<EdgeMap> {
    config.validate()?;
    if depth.valid_count() == 0 {
        return Err(Error::empty("depth map has no valid pixels"));
    }
    let (w, h) = depth.dims();
    let no_sky;
    let sky = match sky {
        Some(s) => {
            ensure_same_dims(depth.dims(), s.dims())?;
            s
        }
        None => {
            no_sky = Grid::filled(w, h, false);
            &no_sky
        }
    };
    let values = filled_transformed(depth, sky, config);
    let mut edges = canny(&values, config.sigma, config.low_ratio, config.high_ratio);
    let blocked = Grid::from_fn(w, h, |x, y| !depth.valid()[(x, y)] && !sky[(x, y)]);
    if blocked.iter().any(|&b| b) {
        drop_components_touching(&mut edges, &blocked);
    }
    Ok(EdgeMap::new(edges, config.transform, config.sigma))
}

/// Distance from every pixel to the nearest edge, clamped at `tau`.
pub fn truncated_edt(edges: &EdgeMap, tau: f64) -> Result<Grid<f64>> {
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("truncation must be positive, got {tau}")));
    }
    Ok(truncated_distance(&edges.edges, tau))
}

/// Pixels; both within `[0, tau]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeMetrics {
    pub edge_acc: f64,
    pub edge_comp: f64,
}

fn mean_over(sites: &Grid<bool>, distances: &Grid<f64>, tau: f64) -> f64 {
    let (sum, n) = sites
        .iter()
        .zip(distances.iter())
        .filter(|(s, _)| **s)
        .fold((0.0, 0usize), |(acc, n), (_, d)| (acc + d, n + 1));
    if n == 0 {
        tau
    } else {
        sum / n as f64
    }
}

/// Accuracy: mean truncated distance from predicted edges to the nearest gt
/// edge. Completeness: from gt edges to the nearest predicted edge. An empty
/// source set scores the truncation value.
pub fn edge_accuracy_completeness(pred: &EdgeMap, gt: &EdgeMap, tau: f64) -> Result<EdgeMetrics> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    let to_gt = truncated_edt(gt, tau)?;
    let to_pred = truncated_edt(pred, tau)?;
    Ok(EdgeMetrics {
        edge_acc: mean_over(&pred.edges, &to_gt, tau),
        edge_comp: mean_over(&gt.edges, &to_pred, tau),
    })
}

/// Image and pointcloud metrics restricted to gt boundary pixels. Both clouds
/// are built from the restricted pixel set.
pub fn boundary_masked_metrics(
    pred: &DepthMap,
    gt: &DepthMap,
    eval_mask: &Grid<bool>,
    gt_edges: &EdgeMap,
    k: &Intrinsics,
    tau_3d: f64,
) -> Result<(ImageMetrics, PointcloudMetrics)> {
    let mask = eval_mask.and(&gt_edges.edges)?;
    if mask.count_true() == 0 {
        return Err(Error::empty("no evaluation pixels on gt depth boundaries"));
    }
    let image = image_metrics(pred, gt, &mask)?;
    let pred_cloud = backproject(&pred.restrict(&mask)?, k)?;
    let gt_cloud = backproject(&gt.restrict(&mask)?, k)?;
    let cloud = pointcloud_metrics(&pred_cloud, &gt_cloud, tau_3d)?;
    Ok((image, cloud))
}
