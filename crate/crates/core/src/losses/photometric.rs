//! View-synthesis losses: SSIM + L1 photometric error, reconstruction
//! aggregation over support frames, static-pixel automasking, predictive-mask
//! weighting, feature reconstruction and multi-scale aggregation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::box_mean;
use crate::geometry::{warp_image, DisparityMap, Synthesized, WarpField};
use crate::grid::{ensure_same_dims, Grid, Image};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotometricConfig {
    /// Weight of the SSIM term; `1 - alpha` goes to L1.
    pub alpha: f64,
    /// Side of the square SSIM window (odd).
    pub ssim_window: usize,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
}

impl Default for PhotometricConfig {
    fn default() -> Self {
        Self {
            alpha: 0.85,
            ssim_window: 3,
            ssim_c1: 0.01 * 0.01,
            ssim_c2: 0.03 * 0.03,
        }
    }
}

impl PhotometricConfig {
    /// Plain absolute difference.
    pub fn l1_only() -> Self {
        Self {
            alpha: 0.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::invalid(format!("ssim weight {} outside [0, 1]", self.alpha)));
        }
        if self.ssim_window == 0 || self.ssim_window.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "ssim window must be odd and positive, got {}",
                self.ssim_window
            )));
        }
        if !(self.ssim_c1 > 0.0 && self.ssim_c2 > 0.0) {
            return Err(Error::invalid("ssim stabilizers must be positive"));
        }
        Ok(())
    }
}

/// Per-pixel non-negative loss with a validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct LossMap {
    pub values: Grid<f64>,
    pub valid: Grid<bool>,
}

impl LossMap {
    pub fn new(values: Grid<f64>, valid: Grid<bool>) -> Result<Self> {
        ensure_same_dims(values.dims(), valid.dims())?;
        Ok(Self { values, valid })
    }

    pub fn all_valid(values: Grid<f64>) -> Self {
        let valid = Grid::filled(values.width(), values.height(), true);
        Self { values, valid }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    /// Mean over valid pixels, `None` when nothing is valid.
    pub fn mean(&self) -> Option<f64> {
        let (sum, n) = self
            .values
            .iter()
            .zip(self.valid.iter())
            .filter(|(_, ok)| **ok)
            .fold((0.0, 0usize), |(s, n), (v, _)| (s + v, n + 1));
        (n > 0).then(|| sum / n as f64)
    }

    #[inline]
    fn get(&self, i: usize) -> Option<f64> {
        self.valid.as_slice()[i].then(|| self.values.as_slice()[i])
    }
}

/// Local-window SSIM of two single-channel grids (replicate borders).
pub fn ssim(a: &Grid<f64>, b: &Grid<f64>, config: &PhotometricConfig) -> Result<Grid<f64>> {
    config.validate()?;
    ensure_same_dims(a.dims(), b.dims())?;
    let win = config.ssim_window;
    let mu_a = box_mean(a, win);
    let mu_b = box_mean(b, win);
    let aa = box_mean(&a.map(|v| v * v), win);
    let bb = box_mean(&b.map(|v| v * v), win);
    let ab = box_mean(&a.zip_map(b, |x, y| x * y)?, win);
    let (c1, c2) = (config.ssim_c1, config.ssim_c2);

    let mut out = Grid::filled(a.width(), a.height(), 0.0);
    for i in 0..a.len() {
        let ma = mu_a.as_slice()[i];
        let mb = mu_b.as_slice()[i];
        let var_a = aa.as_slice()[i] - ma * ma;
        let var_b = bb.as_slice()[i] - mb * mb;
        let cov = ab.as_slice()[i] - ma * mb;
        let num = (2.0 * ma * mb + c1) * (2.0 * cov + c2);
        let den = (ma * ma + mb * mb + c1) * (var_a + var_b + c2);
        out.as_mut_slice()[i] = (num / den).clamp(-1.0, 1.0);
    }
    Ok(out)
}

/// Per-pixel `alpha (1 - SSIM) / 2 + (1 - alpha) |a - b|`, averaged over channels.
pub fn photometric_error(a: &Image, b: &Image, config: &PhotometricConfig) -> Result<Grid<f64>> {
    config.validate()?;
    ensure_same_dims(a.dims(), b.dims())?;
    if a.channels() != b.channels() {
        return Err(Error::invalid(format!(
            "channel mismatch: {} vs {}",
            a.channels(),
            b.channels()
        )));
    }
    let (w, h) = a.dims();
    let mut acc = Grid::filled(w, h, 0.0);
    let alpha = config.alpha;
    for (pa, pb) in a.planes().iter().zip(b.planes()) {
        let s = if alpha > 0.0 {
            Some(ssim(pa, pb, config)?)
        } else {
            None
        };
        for i in 0..acc.len() {
            let l1 = (pa.as_slice()[i] - pb.as_slice()[i]).abs();
            let structural = s.as_ref().map_or(0.0, |s| alpha * (1.0 - s.as_slice()[i]) / 2.0);
            acc.as_mut_slice()[i] += structural + (1.0 - alpha) * l1;
        }
    }
    let n = a.channels() as f64;
    acc.as_mut_slice().iter_mut().for_each(|v| *v /= n);
    Ok(acc)
}

/// Photometric loss against a synthesized view; validity follows the synthesized mask.
pub fn photometric_loss(target: &Image, synth: &Synthesized, config: &PhotometricConfig) -> Result<LossMap> {
    let values = photometric_error(target, &synth.image, config)?;
    LossMap::new(values, synth.valid.clone())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    Average,
    Minimum,
}

/// Output of [`aggregate_reconstruction`].
#[derive(Debug, Clone, PartialEq)]
pub struct Aggregated {
    pub loss: LossMap,
    /// Index of the winning source per pixel (minimum mode only).
    pub source: Grid<Option<usize>>,
}

/// Combines per-source loss maps pixel by pixel. Sources invalid at a pixel do
/// not contribute; pixels with no valid source are invalid.
pub fn aggregate_reconstruction(losses: &[LossMap], mode: AggregationMode) -> Result<Aggregated> {
    let first = losses
        .first()
        .ok_or_else(|| Error::empty("no loss maps to aggregate"))?;
    let dims = first.dims();
    for l in &losses[1..] {
        ensure_same_dims(dims, l.dims())?;
    }
    let (w, h) = dims;
    let mut values = Grid::filled(w, h, 0.0);
    let mut valid = Grid::filled(w, h, false);
    let mut source = Grid::filled(w, h, None);

    for i in 0..w * h {
        match mode {
            AggregationMode::Average => {
                let (sum, n) = losses
                    .iter()
                    .filter_map(|l| l.get(i))
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n > 0 {
                    values.as_mut_slice()[i] = sum / n as f64;
                    valid.as_mut_slice()[i] = true;
                }
            }
            AggregationMode::Minimum => {
                let best = losses
                    .iter()
                    .enumerate()
                    .filter_map(|(k, l)| l.get(i).map(|v| (k, v)))
                    .fold(None, |best: Option<(usize, f64)>, (k, v)| match best {
                        Some((_, bv)) if bv <= v => best,
                        _ => Some((k, v)),
                    });
                if let Some((k, v)) = best {
                    values.as_mut_slice()[i] = v;
                    valid.as_mut_slice()[i] = true;
                    source.as_mut_slice()[i] = Some(k);
                }
            }
        }
    }
    Ok(Aggregated {
        loss: LossMap { values, valid },
        source,
    })
}

/// Keeps pixels whose best synthesized loss is strictly below the best loss of
/// the unwarped support frames. `true` = keep.
pub fn static_automask(synth_losses: &[LossMap], identity_losses: &[LossMap]) -> Result<Grid<bool>> {
    if synth_losses.is_empty() || identity_losses.is_empty() {
        return Err(Error::empty("automasking needs synthesized and identity losses"));
    }
    if synth_losses.len() != identity_losses.len() {
        return Err(Error::invalid(format!(
            "{} synthesized losses but {} identity losses",
            synth_losses.len(),
            identity_losses.len()
        )));
    }
    let synth = aggregate_reconstruction(synth_losses, AggregationMode::Minimum)?.loss;
    let ident = aggregate_reconstruction(identity_losses, AggregationMode::Minimum)?.loss;
    ensure_same_dims(synth.dims(), ident.dims())?;
    let (w, h) = synth.dims();
    Ok(Grid::from_fn(w, h, |x, y| {
        let i = y * w + x;
        match (synth.get(i), ident.get(i)) {
            (Some(s), Some(id)) => s < id,
            (Some(_), None) => true,
            (None, _) => false,
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PredictiveMaskKind {
    /// Per-pixel weights in `[0, 1]`.
    Explainability,
    /// Per-pixel log-variance.
    Uncertainty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictiveMask {
    kind: PredictiveMaskKind,
    values: Grid<f64>,
}

impl PredictiveMask {
    pub fn new(kind: PredictiveMaskKind, values: Grid<f64>) -> Result<Self> {
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite mask value {bad}")));
        }
        if kind == PredictiveMaskKind::Explainability {
            if let Some(bad) = values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!(
                    "explainability value {bad} outside [0, 1]"
                )));
            }
        }
        Ok(Self { kind, values })
    }

    pub fn kind(&self) -> PredictiveMaskKind {
        self.kind
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }
}

/// Explainability: `M * L`. Uncertainty: `exp(-M) * L + M`.
pub fn apply_predictive_mask(loss: &LossMap, mask: &PredictiveMask) -> Result<LossMap> {
    let values = match mask.kind {
        PredictiveMaskKind::Explainability => loss.values.zip_map(&mask.values, |l, m| m * l)?,
        PredictiveMaskKind::Uncertainty => {
            loss.values.zip_map(&mask.values, |l, m| (-m).exp() * l + m)?
        }
    };
    Ok(LossMap {
        values,
        valid: loss.valid.clone(),
    })
}

/// Distance between target and warped support features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureDistance {
    Photometric(PhotometricConfig),
    /// Euclidean distance between per-pixel embeddings.
    L2,
}

/// Warps each support feature map with its image correspondences, takes the
/// per-pixel minimum over sources and averages over valid pixels.
pub fn feature_reconstruction_loss(
    target: &Image,
    supports: &[Image],
    warps: &[WarpField],
    distance: FeatureDistance,
) -> Result<f64> {
    if supports.is_empty() {
        return Err(Error::empty("no support features"));
    }
    if supports.len() != warps.len() {
        return Err(Error::invalid(format!(
            "{} support feature maps but {} warps",
            supports.len(),
            warps.len()
        )));
    }
    let mut maps = Vec::with_capacity(supports.len());
    for (support, warp) in supports.iter().zip(warps) {
        if support.channels() != target.channels() {
            return Err(Error::invalid(format!(
                "feature channel mismatch: target {} vs support {}",
                target.channels(),
                support.channels()
            )));
        }
        ensure_same_dims(target.dims(), warp.dims())?;
        let synth = warp_image(support, warp);
        let map = match distance {
            FeatureDistance::Photometric(cfg) => photometric_loss(target, &synth, &cfg)?,
            FeatureDistance::L2 => {
                let (w, h) = target.dims();
                let values = Grid::from_fn(w, h, |x, y| {
                    target
                        .planes()
                        .iter()
                        .zip(synth.image.planes())
                        .map(|(a, b)| {
                            let d = a[(x, y)] - b[(x, y)];
                            d * d
                        })
                        .sum::<f64>()
                        .sqrt()
                });
                LossMap::new(values, synth.valid)?
            }
        };
        maps.push(map);
    }
    aggregate_reconstruction(&maps, AggregationMode::Minimum)?
        .loss
        .mean()
        .ok_or_else(|| Error::empty("no valid feature correspondences"))
}

/// Bilinear resize with half-pixel alignment and edge clamping.
pub fn upsample_bilinear(grid: &Grid<f64>, width: usize, height: usize) -> Grid<f64> {
    let (w, h) = grid.dims();
    if (w, h) == (width, height) {
        return grid.clone();
    }
    let sx = w as f64 / width as f64;
    let sy = h as f64 / height as f64;
    Grid::from_fn(width, height, |x, y| {
        let u = ((x as f64 + 0.5) * sx - 0.5).clamp(0.0, (w - 1) as f64);
        let v = ((y as f64 + 0.5) * sy - 0.5).clamp(0.0, (h - 1) as f64);
        crate::geometry::bilinear_sample(grid, u, v).expect("clamped inside the grid")
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiScaleLoss {
    pub mean: f64,
    pub per_scale: Vec<f64>,
}

/// Upsamples each scale's disparity to `(width, height)`, evaluates it and
/// averages the per-scale results.
pub fn multi_scale_loss<F>(
    per_scale: &[DisparityMap],
    width: usize,
    height: usize,
    mut evaluate: F,
) -> Result<MultiScaleLoss>
where
    F: FnMut(&DisparityMap) -> Result<f64>,
{
    if per_scale.is_empty() {
        return Err(Error::empty("no scales"));
    }
    let mut values = Vec::with_capacity(per_scale.len());
    for disp in per_scale {
        let (w, h) = disp.dims();
        let factor_ok = w > 0
            && h > 0
            && width.is_multiple_of(w)
            && height.is_multiple_of(h)
            && width / w == height / h
            && (width / w).is_power_of_two();
        if !factor_ok {
            return Err(Error::invalid(format!(
                "scale {w}x{h} is not a power-of-two downsampling of {width}x{height}"
            )));
        }
        let full = DisparityMap::new(upsample_bilinear(disp.values(), width, height))?;
        values.push(evaluate(&full)?);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    Ok(MultiScaleLoss {
        mean,
        per_scale: values,
    })
}
