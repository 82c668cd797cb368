//! Proxy-depth regression losses and virtual-stereo disparity consistency.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, DisparityMap, Synthesized};
use crate::grid::ensure_same_dims;

/// Fraction of the largest absolute error used as the adaptive berHu threshold.
pub const BERHU_THRESHOLD_FRACTION: f64 = 0.2;

/// Threshold used by a berHu evaluation. Zero only in the degenerate exact-fit case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BerhuState {
    pub threshold: f64,
}

fn joint_abs_errors(pred: &DepthMap, target: &DepthMap) -> Result<Vec<f64>> {
    ensure_same_dims(pred.dims(), target.dims())?;
    let errors: Vec<f64> = pred
        .iter_valid()
        .filter_map(|(x, y, p)| target.get(x, y).map(|t| (p - t).abs()))
        .collect();
    if errors.is_empty() {
        return Err(Error::empty("no jointly valid pixels"));
    }
    Ok(errors)
}

/// Per-pixel berHu term: `|e|` up to `tau`, `(e^2 + tau^2) / (2 tau)` beyond it.
#[inline]
pub fn berhu(abs_err: f64, tau: f64) -> f64 {
    if abs_err <= tau {
        abs_err
    } else {
        (abs_err * abs_err + tau * tau) / (2.0 * tau)
    }
}

/// Reverse Huber loss averaged over jointly valid pixels. Without an explicit
/// threshold, `tau = 0.2 * max |e|` over the pixels passed in.
pub fn berhu_loss(pred: &DepthMap, proxy: &DepthMap, tau: Option<f64>) -> Result<(f64, BerhuState)> {
    let errors = joint_abs_errors(pred, proxy)?;
    let tau = match tau {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::invalid(format!("berHu threshold must be positive, got {t}"))),
        None => BERHU_THRESHOLD_FRACTION * errors.iter().copied().fold(0.0, f64::max),
    };
    if tau == 0.0 {
        return Ok((0.0, BerhuState { threshold: 0.0 }));
    }
    let loss = errors.iter().map(|&e| berhu(e, tau)).sum::<f64>() / errors.len() as f64;
    Ok((loss, BerhuState { threshold: tau }))
}

/// Mean of `log(1 + |e|)` over jointly valid pixels.
pub fn log_l1_loss(pred: &DepthMap, proxy: &DepthMap) -> Result<f64> {
    let errors = joint_abs_errors(pred, proxy)?;
    Ok(errors.iter().map(|e| e.ln_1p()).sum::<f64>() / errors.len() as f64)
}

/// Mean absolute difference between the target disparity and the virtual-view
/// disparity warped into the target frame, over valid warped pixels.
pub fn virtual_stereo_loss(disp_target: &DisparityMap, warped: &Synthesized) -> Result<f64> {
    if warped.image.channels() != 1 {
        return Err(Error::invalid("warped disparity must have one channel"));
    }
    let plane = warped.image.plane(0);
    ensure_same_dims(disp_target.dims(), plane.dims())?;
    let (sum, n) = disp_target
        .values()
        .iter()
        .zip(plane.iter())
        .zip(warped.valid.iter())
        .filter(|(_, ok)| **ok)
        .fold((0.0, 0usize), |(s, n), ((a, b), _)| (s + (a - b).abs(), n + 1));
    if n == 0 {
        return Err(Error::empty("no valid warped disparity pixels"));
    }
    Ok(sum / n as f64)
}
