//! Camera geometry: disparity/depth conversion, rigid poses, backprojection,
//! reprojection and forward bilinear warping.
//!
//! Pixel coordinates are `(u, v)` with `u` the column and `v` the row, and the
//! origin at the centre of the top-left pixel. The camera frame is x right,
//! y down, z forward.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{ensure_same_dims, Grid, Image};

/// Reprojected points with post-transform depth at or below this are behind the camera.
pub const BEHIND_CAMERA_EPS: f64 = 1e-6;

/// Tolerance used when validating rotation matrices.
const ROTATION_TOL: f64 = 1e-9;

/// Pinhole intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self> {
        let k = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(Error::invalid(format!(
                "focal lengths must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(0.0 <= self.cx && self.cx < self.width as f64)
            || !(0.0 <= self.cy && self.cy < self.height as f64)
        {
            return Err(Error::invalid(format!(
                "principal point ({}, {}) outside the {}x{} image",
                self.cx, self.cy, self.width, self.height
            )));
        }
        Ok(())
    }

    /// Same camera at a different resolution (focal lengths and principal point scaled).
    pub fn scaled_to(&self, width: usize, height: usize) -> Result<Self> {
        let sx = width as f64 / self.width as f64;
        let sy = height as f64 / self.height as f64;
        Self::new(
            self.fx * sx,
            self.fy * sy,
            (self.cx + 0.5) * sx - 0.5,
            (self.cy + 0.5) * sy - 0.5,
            width,
            height,
        )
    }

    /// Ray through pixel `(u, v)` with unit z component, i.e. `K^-1 (u, v, 1)`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64) -> Vector3<f64> {
        Vector3::new((u - self.cx) / self.fx, (v - self.cy) / self.fy, 1.0)
    }

    /// Perspective projection of a camera-frame point. The caller guards `z > 0`.
    #[inline]
    pub fn project(&self, p: &Point3<f64>) -> (f64, f64) {
        (
            self.fx * p.x / p.z + self.cx,
            self.fy * p.y / p.z + self.cy,
        )
    }
}

/// A rigid transform `x' = R x + t` with `R` a proper rotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).amax();
        let det = rotation.determinant();
        if ortho > ROTATION_TOL || (det - 1.0).abs() > ROTATION_TOL {
            return Err(Error::invalid(format!(
                "not a rotation: |R^T R - I|max = {ortho:e}, det = {det}"
            )));
        }
        if translation.iter().any(|t| !t.is_finite()) {
            return Err(Error::invalid("translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn apply(&self, p: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    pub fn inverse(&self) -> Self {
        let rt = self.rotation.transpose();
        Self {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> Self {
        Self {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }
}

/// Builds a rigid transform from an axis-angle rotation vector (radians) and
/// a translation (meters) using the Rodrigues formula.
pub fn axis_angle_to_transform(rot_vec: Vector3<f64>, translation: Vector3<f64>) -> RigidTransform {
    let theta2 = rot_vec.norm_squared();
    let theta = theta2.sqrt();
    // R = I + a [w]x + b [w]x^2 with a = sin(t)/t and b = (1 - cos t)/t^2.
    let (a, b) = if theta < 1e-4 {
        (1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0)
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let k = rot_vec.cross_matrix();
    let rotation = Matrix3::identity() + k * a + k * k * b;
    RigidTransform {
        rotation,
        translation,
    }
}

/// Valid depth interval in meters, `0 < d_min < d_max`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DepthRange {
    pub d_min: f64,
    pub d_max: f64,
}

impl Default for DepthRange {
    fn default() -> Self {
        Self {
            d_min: 0.1,
            d_max: 100.0,
        }
    }
}

impl DepthRange {
    pub fn new(d_min: f64, d_max: f64) -> Result<Self> {
        if !(d_min > 0.0 && d_min < d_max && d_max.is_finite()) {
            return Err(Error::invalid(format!(
                "depth range needs 0 < d_min < d_max, got [{d_min}, {d_max}]"
            )));
        }
        Ok(Self { d_min, d_max })
    }

    /// Affine constants `(scale, shift)` so that `1 / (scale * disp + shift)`
    /// maps disparity 0 to `d_max` and disparity 1 to `d_min`.
    pub fn disparity_constants(&self) -> (f64, f64) {
        let shift = 1.0 / self.d_max;
        let scale = 1.0 / self.d_min - shift;
        (scale, shift)
    }
}

/// Sigmoid disparity in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    values: Grid<f64>,
}

impl DisparityMap {
    /// Values within 1e-6 of `[0, 1]` are clamped into range; anything further out is rejected.
    pub fn new(mut values: Grid<f64>) -> Result<Self> {
        for v in values.as_mut_slice() {
            if !(*v >= -1e-6 && *v <= 1.0 + 1e-6) {
                return Err(Error::invalid(format!("disparity {v} outside [0, 1]")));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn into_values(self) -> Grid<f64> {
        self.values
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }
}

/// Metric depth with a validity mask. Valid pixels always carry finite,
/// strictly positive depth.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    values: Grid<f64>,
    valid: Grid<bool>,
}

impl DepthMap {
    /// Validity is inferred: finite, positive values are valid.
    pub fn new(values: Grid<f64>) -> Self {
        let valid = values.map(|d| d.is_finite() && *d > 0.0);
        Self { values, valid }
    }

    /// Uses `valid` as given, except that pixels without finite positive depth are
    /// always invalidated.
    pub fn with_validity(values: Grid<f64>, valid: &Grid<bool>) -> Result<Self> {
        let valid = values.zip_map(valid, |d, m| *m && d.is_finite() && *d > 0.0)?;
        Ok(Self { values, valid })
    }

    pub fn constant(width: usize, height: usize, depth: f64) -> Self {
        Self::new(Grid::filled(width, height, depth))
    }

    pub fn values(&self) -> &Grid<f64> {
        &self.values
    }

    pub fn valid(&self) -> &Grid<bool> {
        &self.valid
    }

    pub fn width(&self) -> usize {
        self.values.width()
    }

    pub fn height(&self) -> usize {
        self.values.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        self.valid[(x, y)].then(|| self.values[(x, y)])
    }

    pub fn valid_count(&self) -> usize {
        self.valid.count_true()
    }

    /// Keeps only pixels that are valid here and set in `mask`.
    pub fn restrict(&self, mask: &Grid<bool>) -> Result<Self> {
        Ok(Self {
            values: self.values.clone(),
            valid: self.valid.and(mask)?,
        })
    }

    pub fn scaled(&self, k: f64) -> Self {
        Self::with_validity(self.values.map(|d| d * k), &self.valid)
            .expect("same dimensions")
    }

    /// Iterates `(x, y, depth)` over valid pixels.
    pub fn iter_valid(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.values
            .indexed_iter()
            .zip(self.valid.iter())
            .filter_map(|((x, y, d), &ok)| ok.then_some((x, y, *d)))
    }
}

/// Points in the camera frame, meters.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3<f64>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Result<Self> {
        if let Some(p) = points.iter().find(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid(format!("non-finite point {p:?}")));
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, t: &RigidTransform) -> Self {
        Self {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
        }
    }
}

/// Converts sigmoid disparity to depth via `1 / (a * disp + b)`.
pub fn disp_to_depth(disp: &DisparityMap, range: &DepthRange) -> DepthMap {
    let (scale, shift) = range.disparity_constants();
    let depth = disp.values().map(|s| {
        // Guard the endpoints against rounding in `scale + shift`.
        (1.0 / (scale * s + shift)).clamp(range.d_min, range.d_max)
    });
    DepthMap::new(depth)
}

/// One point per valid pixel: `X = D(p) K^-1 p`.
pub fn backproject(depth: &DepthMap, k: &Intrinsics) -> Result<PointCloud> {
    ensure_same_dims((k.width, k.height), depth.dims())?;
    let points = depth
        .iter_valid()
        .map(|(x, y, d)| Point3::from(k.unproject(x as f64, y as f64) * d))
        .collect();
    PointCloud::new(points)
}

/// Result of reprojecting a target pixel into a support view.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reprojection {
    pub u: f64,
    pub v: f64,
    /// Depth of the point in the support camera frame.
    pub z: f64,
}

impl Reprojection {
    #[inline]
    pub fn in_front(&self) -> bool {
        self.z > BEHIND_CAMERA_EPS
    }
}

/// `p' = K T (D(p) K^-1 p)`. Coordinates are continuous and may fall outside the image.
#[inline]
pub fn reproject(u: f64, v: f64, depth: f64, k: &Intrinsics, t: &RigidTransform) -> Reprojection {
    let p = Point3::from(k.unproject(u, v) * depth);
    let q = t.apply(&p);
    let (u2, v2) = if q.z > BEHIND_CAMERA_EPS {
        k.project(&q)
    } else {
        (f64::NAN, f64::NAN)
    };
    Reprojection { u: u2, v: v2, z: q.z }
}

/// Bilinear interpolation at continuous `(x, y)`. Returns `None` outside
/// `[0, W-1] x [0, H-1]` beyond `HULL_SNAP` (no clamping).
#[inline]
pub fn bilinear_sample(grid: &Grid<f64>, x: f64, y: f64) -> Option<f64> {
    let (x0, y0, fx, fy) = bilinear_cell(grid.width(), grid.height(), x, y)?;
    let x1 = (x0 + 1).min(grid.width() - 1);
    let y1 = (y0 + 1).min(grid.height() - 1);
    let top = grid[(x0, y0)] * (1.0 - fx) + grid[(x1, y0)] * fx;
    let bottom = grid[(x0, y1)] * (1.0 - fx) + grid[(x1, y1)] * fx;
    Some(top * (1.0 - fy) + bottom * fy)
}

/// Samples every channel of `image` at `(x, y)`, writing into `out`.
pub fn bilinear_sample_image(image: &Image, x: f64, y: f64, out: &mut [f64]) -> bool {
    debug_assert_eq!(out.len(), image.channels());
    for (o, plane) in out.iter_mut().zip(image.planes()) {
        match bilinear_sample(plane, x, y) {
            Some(v) => *o = v,
            None => return false,
        }
    }
    true
}

/// Coordinates this close outside the sampling hull are treated as on it, so
/// border pixels survive reprojection rounding.
pub const HULL_SNAP: f64 = 1e-9;

#[inline]
fn onto_hull(x: f64, n: usize) -> Option<f64> {
    let hi = (n - 1) as f64;
    if x >= 0.0 && x <= hi {
        Some(x)
    } else if x >= -HULL_SNAP && x <= hi + HULL_SNAP {
        Some(x.clamp(0.0, hi))
    } else {
        None
    }
}

#[inline]
fn bilinear_cell(w: usize, h: usize, x: f64, y: f64) -> Option<(usize, usize, f64, f64)> {
    if w == 0 || h == 0 {
        return None;
    }
    let (x, y) = (onto_hull(x, w)?, onto_hull(y, h)?);
    let x0 = x.floor();
    let y0 = y.floor();
    Some((x0 as usize, y0 as usize, x - x0, y - y0))
}

/// Per-target-pixel sampling coordinates in a support view. `None` marks target
/// pixels without valid depth or whose reprojection lands behind the camera.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpField {
    coords: Grid<Option<(f64, f64)>>,
}

impl WarpField {
    pub fn from_coords(coords: Grid<Option<(f64, f64)>>) -> Self {
        Self { coords }
    }

    /// The warp that samples each pixel at its own location.
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            coords: Grid::from_fn(width, height, |x, y| Some((x as f64, y as f64))),
        }
    }

    pub fn coords(&self) -> &Grid<Option<(f64, f64)>> {
        &self.coords
    }

    pub fn dims(&self) -> (usize, usize) {
        self.coords.dims()
    }
}

/// Computes the reprojection correspondences of every valid target pixel.
pub fn compute_warp(target_depth: &DepthMap, k: &Intrinsics, t: &RigidTransform) -> Result<WarpField> {
    ensure_same_dims((k.width, k.height), target_depth.dims())?;
    let coords = Grid::from_fn(target_depth.width(), target_depth.height(), |x, y| {
        let d = target_depth.get(x, y)?;
        let r = reproject(x as f64, y as f64, d, k, t);
        r.in_front().then_some((r.u, r.v))
    });
    Ok(WarpField { coords })
}

/// A warped image and the pixels where it is defined.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesized {
    pub image: Image,
    pub valid: Grid<bool>,
}

impl Synthesized {
    /// Wraps an image that is defined everywhere (e.g. an unwarped support frame).
    pub fn all_valid(image: Image) -> Self {
        let (w, h) = image.dims();
        Self {
            image,
            valid: Grid::filled(w, h, true),
        }
    }
}

/// Bilinearly samples `support` at the warp coordinates. Invalid pixels are
/// zero-filled and masked.
pub fn warp_image(support: &Image, warp: &WarpField) -> Synthesized {
    let (w, h) = warp.dims();
    let channels = support.channels();
    let mut planes = vec![Grid::filled(w, h, 0.0); channels];
    let mut valid = Grid::filled(w, h, false);
    let mut px = vec![0.0; channels];
    for (x, y, c) in warp.coords().indexed_iter() {
        let Some((u, v)) = *c else { continue };
        if bilinear_sample_image(support, u, v, &mut px) {
            for (plane, val) in planes.iter_mut().zip(&px) {
                plane[(x, y)] = *val;
            }
            valid[(x, y)] = true;
        }
    }
    Synthesized {
        image: Image::from_planes(planes).expect("planes share dimensions"),
        valid,
    }
}

/// Synthesizes the target view from a support image: reprojection followed by
/// bilinear sampling. Valid where the target depth is valid, the point lands in
/// front of the support camera and the sample is inside the support image.
pub fn synthesize_view(
    target_depth: &DepthMap,
    support: &Image,
    k: &Intrinsics,
    t: &RigidTransform,
) -> Result<Synthesized> {
    let warp = compute_warp(target_depth, k, t)?;
    Ok(warp_image(support, &warp))
}
