//! Image-space depth metrics, prediction alignment and depth capping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DepthMap;
use crate::grid::{ensure_same_dims, Grid};

/// How a prediction is brought to the scale of the ground truth before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlignmentMode {
    /// Per-image `median(gt) / median(pred)`.
    Median,
    /// A constant factor for every image.
    Fixed(f64),
    None,
}

impl AlignmentMode {
    pub fn validate(&self) -> Result<()> {
        match self {
            AlignmentMode::Fixed(s) if !(*s > 0.0 && s.is_finite()) => {
                Err(Error::invalid(format!("fixed scale must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

impl std::fmt::Display for AlignmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AlignmentMode::Median => f.write_str("median"),
            AlignmentMode::Fixed(s) => write!(f, "fixed:{s}"),
            AlignmentMode::None => f.write_str("none"),
        }
    }
}

impl std::str::FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mode = match s {
            "median" => AlignmentMode::Median,
            "none" => AlignmentMode::None,
            other => {
                let scale = other
                    .strip_prefix("fixed:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::invalid(format!("unknown alignment `{other}`")))?;
                AlignmentMode::Fixed(scale)
            }
        };
        mode.validate()?;
        Ok(mode)
    }
}

/// Median with the mean of the two middle values for even counts.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Scales the prediction according to `mode`; returns the aligned map and the
/// scale applied. Median statistics use jointly valid pixels only.
pub fn align_prediction(pred: &DepthMap, gt: &DepthMap, mode: AlignmentMode) -> Result<(DepthMap, f64)> {
    mode.validate()?;
    ensure_same_dims(gt.dims(), pred.dims())?;
    let scale = match mode {
        AlignmentMode::None => return Ok((pred.clone(), 1.0)),
        AlignmentMode::Fixed(s) => s,
        AlignmentMode::Median => {
            let (mut p, mut g): (Vec<f64>, Vec<f64>) = pred
                .iter_valid()
                .filter_map(|(x, y, d)| gt.get(x, y).map(|t| (d, t)))
                .unzip();
            let mp = median(&mut p).ok_or_else(|| Error::empty("median alignment: no jointly valid pixels"))?;
            let mg = median(&mut g).expect("same length as prediction samples");
            if mp == 0.0 {
                return Err(Error::invalid("median alignment: prediction median is zero"));
            }
            mg / mp
        }
    };
    Ok((pred.scaled(scale), scale))
}

/// Clamps the prediction into `[d_min, d_max]` and builds the evaluation mask:
/// ground truth valid and inside the range, prediction valid. Ground truth is
/// filtered, never clamped.
pub fn clamp_and_mask(
    pred: &DepthMap,
    gt: &DepthMap,
    d_min: f64,
    d_max: f64,
) -> Result<(DepthMap, DepthMap, Grid<bool>)> {
    if !(d_min > 0.0 && d_min < d_max) {
        return Err(Error::invalid(format!("evaluation range needs 0 < min < max, got [{d_min}, {d_max}]")));
    }
    ensure_same_dims(gt.dims(), pred.dims())?;
    let clamped = DepthMap::with_validity(pred.values().map(|d| d.clamp(d_min, d_max)), pred.valid())?;
    let (w, h) = gt.dims();
    let mask = Grid::from_fn(w, h, |x, y| {
        pred.valid()[(x, y)] && gt.get(x, y).is_some_and(|t| (d_min..=d_max).contains(&t))
    });
    Ok((clamped, gt.clone(), mask))
}

/// The full image-space metric set. Relative errors are ratios; threshold
/// accuracies are percentages.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub mae: f64,
    pub rmse: f64,
    pub inv_mae: f64,
    pub inv_rmse: f64,
    pub log_mae: f64,
    pub log_rmse: f64,
    pub log_si: f64,
    pub abs_rel: f64,
    /// Squared relative error normalized by `gt^2`.
    pub sq_rel: f64,
    /// Historical variant normalized by `gt` only.
    pub sq_rel_legacy: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub delta3: f64,
}

/// Evaluates every image metric over the pixels set in `mask`.
pub fn image_metrics(pred: &DepthMap, gt: &DepthMap, mask: &Grid<bool>) -> Result<ImageMetrics> {
    ensure_same_dims(gt.dims(), pred.dims())?;
    ensure_same_dims(gt.dims(), mask.dims())?;

    let mut pairs = Vec::new();
    for (x, y, &m) in mask.indexed_iter() {
        if !m {
            continue;
        }
        match (pred.get(x, y), gt.get(x, y)) {
            (Some(p), Some(g)) => pairs.push((p, g)),
            _ => {
                return Err(Error::invalid(format!(
                    "evaluation mask selects pixel ({x}, {y}) without valid depth"
                )))
            }
        }
    }
    metrics_from_pairs(&pairs)
}

pub(crate) fn metrics_from_pairs(pairs: &[(f64, f64)]) -> Result<ImageMetrics> {
    if pairs.is_empty() {
        return Err(Error::empty("evaluation mask selects no pixels"));
    }
    let n = pairs.len() as f64;
    let mut abs = 0.0;
    let mut sq = 0.0;
    let mut inv_abs = 0.0;
    let mut inv_sq = 0.0;
    let mut log_abs = 0.0;
    let mut log_sq = 0.0;
    let mut log_sum = 0.0;
    let mut abs_rel = 0.0;
    let mut sq_rel = 0.0;
    let mut sq_rel_legacy = 0.0;
    let mut within = [0usize; 3];
    let thresholds = [1.25, 1.25f64.powi(2), 1.25f64.powi(3)];

    for &(p, g) in pairs {
        let e = p - g;
        let e2 = e * e;
        abs += e.abs();
        sq += e2;
        let ie = 1.0 / p - 1.0 / g;
        inv_abs += ie.abs();
        inv_sq += ie * ie;
        let le = p.ln() - g.ln();
        log_abs += le.abs();
        log_sq += le * le;
        log_sum += le;
        abs_rel += e.abs() / g;
        sq_rel += e2 / (g * g);
        sq_rel_legacy += e2 / g;
        let ratio = (p / g).max(g / p);
        for (count, t) in within.iter_mut().zip(thresholds) {
            if ratio < t {
                *count += 1;
            }
        }
    }

    // Scale-invariant log error via the centred second moment; algebraically
    // equal to mean(d^2) - mean(d)^2 without the cancellation.
    let log_mean = log_sum / n;
    let log_var = pairs
        .iter()
        .map(|&(p, g)| {
            let c = (p.ln() - g.ln()) - log_mean;
            c * c
        })
        .sum::<f64>()
        / n;

    Ok(ImageMetrics {
        mae: abs / n,
        rmse: (sq / n).sqrt(),
        inv_mae: inv_abs / n,
        inv_rmse: (inv_sq / n).sqrt(),
        log_mae: log_abs / n,
        log_rmse: (log_sq / n).sqrt(),
        log_si: log_var.sqrt(),
        abs_rel: abs_rel / n,
        sq_rel: sq_rel / n,
        sq_rel_legacy: sq_rel_legacy / n,
        delta1: 100.0 * within[0] as f64 / n,
        delta2: 100.0 * within[1] as f64 / n,
        delta3: 100.0 * within[2] as f64 / n,
    })
}
