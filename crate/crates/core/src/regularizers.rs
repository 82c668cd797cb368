//! Disparity smoothness, occlusion and explainability-mask regularizers.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::gaussian_blur;
use crate::grid::{ensure_same_dims, Grid, Image};
use crate::losses::{PredictiveMask, PredictiveMaskKind};

/// Explainability values are floored here before taking the log.
pub const EXPLAINABILITY_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConfig {
    /// Derivative order, 1 or 2.
    pub order: u8,
    /// Damp disparity gradients by `exp(-|image gradient|)`.
    pub edge_aware: bool,
    /// Gaussian pre-smoothing in pixels; 0 disables it.
    pub gaussian_sigma: f64,
    /// Scaling factor applied when combining with other losses. Not applied by
    /// [`smoothness_loss`] itself.
    pub weight: f64,
}

impl Default for SmoothnessConfig {
    fn default() -> Self {
        Self {
            order: 1,
            edge_aware: true,
            gaussian_sigma: 0.0,
            weight: 1e-3,
        }
    }
}

impl SmoothnessConfig {
    pub fn validate(&self) -> Result<()> {
        if !matches!(self.order, 1 | 2) {
            return Err(Error::invalid(format!("smoothness order must be 1 or 2, got {}", self.order)));
        }
        if !(self.gaussian_sigma >= 0.0) {
            return Err(Error::invalid("gaussian sigma must be >= 0"));
        }
        if !(self.weight >= 0.0) {
            return Err(Error::invalid("smoothness weight must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Axis {
    X,
    Y,
}

/// Forward difference of the given order along `axis`; the trailing
/// `order` rows/columns are dropped.
fn forward_diff(g: &Grid<f64>, axis: Axis, order: u8) -> Grid<f64> {
    let mut cur = g.clone();
    for _ in 0..order {
        let (w, h) = cur.dims();
        cur = match axis {
            Axis::X => Grid::from_fn(w - 1, h, |x, y| cur[(x + 1, y)] - cur[(x, y)]),
            Axis::Y => Grid::from_fn(w, h - 1, |x, y| cur[(x, y + 1)] - cur[(x, y)]),
        };
    }
    cur
}

fn directional_term(disp: &Grid<f64>, image: Option<&[Grid<f64>]>, axis: Axis, order: u8) -> f64 {
    let dd = forward_diff(disp, axis, order);
    let weights = image.map(|planes| {
        let n = planes.len() as f64;
        let grads: Vec<Grid<f64>> = planes.iter().map(|p| forward_diff(p, axis, order)).collect();
        Grid::from_fn(dd.width(), dd.height(), |x, y| {
            let g = grads.iter().map(|gr| gr[(x, y)].abs()).sum::<f64>() / n;
            (-g).exp()
        })
    });
    let sum: f64 = match &weights {
        Some(w) => dd.iter().zip(w.iter()).map(|(d, w)| d.abs() * w).sum(),
        None => dd.iter().map(|d| d.abs()).sum(),
    };
    sum / dd.len() as f64
}

/// Smoothness of the mean-normalized disparity (unweighted).
///
/// `image` is required when `config.edge_aware` is set and ignored otherwise.
pub fn smoothness_loss(disp: &Grid<f64>, image: Option<&Image>, config: &SmoothnessConfig) -> Result<f64> {
    config.validate()?;
    let (w, h) = disp.dims();
    let need = config.order as usize + 1;
    if w < need || h < need {
        return Err(Error::invalid(format!(
            "disparity {w}x{h} too small for order-{} gradients",
            config.order
        )));
    }
    let mean = disp.iter().sum::<f64>() / disp.len() as f64;
    if !(mean > 0.0 && mean.is_finite()) {
        return Err(Error::invalid(format!("disparity mean must be positive, got {mean}")));
    }
    let mut norm = disp.map(|d| d / mean);

    let image_planes = match (config.edge_aware, image) {
        (false, _) => None,
        (true, None) => return Err(Error::invalid("edge-aware smoothness needs an image")),
        (true, Some(img)) => {
            ensure_same_dims(disp.dims(), img.dims())?;
            Some(img.planes().to_vec())
        }
    };

    let image_planes = if config.gaussian_sigma > 0.0 {
        norm = gaussian_blur(&norm, config.gaussian_sigma);
        image_planes.map(|ps| ps.iter().map(|p| gaussian_blur(p, config.gaussian_sigma)).collect::<Vec<_>>())
    } else {
        image_planes
    };

    let planes = image_planes.as_deref();
    let x = directional_term(&norm, planes, Axis::X, config.order);
    let y = directional_term(&norm, planes, Axis::Y, config.order);
    Ok((x + y) / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OcclusionVariant {
    /// Penalizes disparity, favouring background depths.
    Background,
    /// Penalizes `1 - disparity`, favouring foreground depths.
    Foreground,
}

/// Mean disparity (background) or mean of `1 - disparity` (foreground).
pub fn occlusion_loss(disp: &Grid<f64>, variant: OcclusionVariant) -> f64 {
    if disp.is_empty() {
        return 0.0;
    }
    let n = disp.len() as f64;
    match variant {
        OcclusionVariant::Background => disp.iter().sum::<f64>() / n,
        OcclusionVariant::Foreground => disp.iter().map(|d| 1.0 - d).sum::<f64>() / n,
    }
}

/// Cross-entropy of an explainability mask against the all-ones target:
/// mean of `-ln(max(M, 1e-7))`.
pub fn explainability_reg(mask: &PredictiveMask) -> Result<f64> {
    if mask.kind() != PredictiveMaskKind::Explainability {
        return Err(Error::invalid("explainability regularization needs an explainability mask"));
    }
    let values = mask.values();
    if values.is_empty() {
        return Err(Error::empty("empty mask"));
    }
    let sum: f64 = values.iter().map(|m| -m.max(EXPLAINABILITY_FLOOR).ln()).sum();
    Ok(sum / values.len() as f64)
}
