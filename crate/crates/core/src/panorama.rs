//! Perspective patch extraction from equirectangular panoramas.
//!
//! Panorama coordinates are continuous with pixel `i` covering `[i, i + 1)`:
//! longitude runs from -180° at column 0 to +180° at column `W`, latitude from
//! +90° at row 0 to -90° at row `H`. The forward camera axis lands on
//! `(W/2, H/2)`. Azimuth turns the virtual camera towards +x (right).

use std::f64::consts::PI;

use nalgebra::{Rotation3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Intrinsics};
use crate::grid::{ensure_same_dims, Grid, Image};

pub const DEFAULT_PATCH_WIDTH: usize = 1242;
pub const DEFAULT_PATCH_HEIGHT: usize = 376;
pub const DEFAULT_STEP_DEG: u32 = 20;

/// Virtual pinhole used for default patches.
pub fn default_patch_intrinsics() -> Intrinsics {
    Intrinsics {
        fx: 721.5,
        fy: 721.5,
        cx: 620.5,
        cy: 187.5,
        width: DEFAULT_PATCH_WIDTH,
        height: DEFAULT_PATCH_HEIGHT,
    }
}

/// Full-sphere panorama: colour image and aligned depth (meters).
#[derive(Debug, Clone)]
pub struct Panorama {
    image: Image,
    depth: DepthMap,
}

impl Panorama {
    pub fn new(image: Image, depth: DepthMap) -> Result<Self> {
        ensure_same_dims(image.dims(), depth.dims())?;
        let (w, h) = depth.dims();
        if h == 0 || w != 2 * h {
            return Err(Error::invalid(format!(
                "equirectangular panorama must be 2:1, got {w}x{h}"
            )));
        }
        Ok(Self { image, depth })
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn depth(&self) -> &DepthMap {
        &self.depth
    }

    pub fn dims(&self) -> (usize, usize) {
        self.depth.dims()
    }

    /// The same scene with every column moved right by `shift` pixels (wrapping).
    pub fn rotated_columns(&self, shift: usize) -> Self {
        let (w, h) = self.dims();
        let src = |x: usize| (x + w - shift % w) % w;
        let roll = |g: &Grid<f64>| Grid::from_fn(w, h, |x, y| g[(src(x), y)]);
        let planes = self.image.planes().iter().map(roll).collect();
        let valid = Grid::from_fn(w, h, |x, y| self.depth.valid()[(src(x), y)]);
        let depth = DepthMap::with_validity(roll(self.depth.values()), &valid).expect("same dims");
        Self {
            image: Image::from_planes(planes).expect("planes share dims"),
            depth,
        }
    }
}

/// One virtual camera looking into the panorama.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub intrinsics: Intrinsics,
    /// Panorama depth is distance along the ray; converted to z-depth when set.
    pub radial_depth: bool,
}

impl PatchSpec {
    pub fn new(azimuth_deg: f64, intrinsics: Intrinsics) -> Self {
        Self {
            azimuth_deg,
            elevation_deg: 0.0,
            intrinsics,
            radial_depth: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.intrinsics.validate()?;
        if !self.azimuth_deg.is_finite() || !(self.elevation_deg.abs() <= 90.0) {
            return Err(Error::invalid(format!(
                "bad view direction: azimuth {} elevation {}",
                self.azimuth_deg, self.elevation_deg
            )));
        }
        Ok(())
    }

    /// Camera-to-panorama rotation: pitch up by the elevation, then yaw by the azimuth.
    fn rotation(&self) -> Rotation3<f64> {
        let yaw = Rotation3::from_axis_angle(&Vector3::y_axis(), self.azimuth_deg.rem_euclid(360.0).to_radians());
        let pitch = Rotation3::from_axis_angle(&Vector3::x_axis(), self.elevation_deg.to_radians());
        yaw * pitch
    }
}

impl Default for PatchSpec {
    fn default() -> Self {
        Self::new(0.0, default_patch_intrinsics())
    }
}

/// Continuous panorama coordinates `(column, row)` of a unit direction in the
/// panorama frame (x right, y down, z forward). At the poles any column is valid.
pub fn direction_to_equirect(dir: &Vector3<f64>, width: usize, height: usize) -> (f64, f64) {
    let lon = dir.x.atan2(dir.z);
    let lat = (-dir.y).clamp(-1.0, 1.0).asin();
    let u = width as f64 / 2.0 + lon / (2.0 * PI) * width as f64;
    let v = height as f64 / 2.0 - lat / PI * height as f64;
    (u, v)
}

/// Bilinear sample with horizontal wrap-around and vertical clamping.
fn sample_wrapped(grid: &Grid<f64>, u: f64, v: f64) -> f64 {
    let (w, h) = grid.dims();
    let x = u - 0.5;
    let y = (v - 0.5).clamp(0.0, (h - 1) as f64);
    let x0 = x.floor();
    let fx = x - x0;
    let y0 = y.floor();
    let fy = y - y0;
    let c0 = (x0 as i64).rem_euclid(w as i64) as usize;
    let c1 = (c0 + 1) % w;
    let r0 = y0 as usize;
    let r1 = (r0 + 1).min(h - 1);
    let top = grid[(c0, r0)] * (1.0 - fx) + grid[(c1, r0)] * fx;
    let bottom = grid[(c0, r1)] * (1.0 - fx) + grid[(c1, r1)] * fx;
    top * (1.0 - fy) + bottom * fy
}

/// Coordinates within this distance of an integer are treated as that integer,
/// so cell boundaries do not flip on rounding noise.
const CELL_SNAP: f64 = 1e-9;

fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < CELL_SNAP {
        r
    } else {
        x
    }
}

fn nearest_cell(w: usize, h: usize, u: f64, v: f64) -> (usize, usize) {
    let (u, v) = (snap(u), snap(v));
    let c = (u.floor() as i64).rem_euclid(w as i64) as usize;
    let r = (v.floor().max(0.0) as usize).min(h - 1);
    (c, r)
}

/// A perspective patch and the view it was taken from.
#[derive(Debug, Clone)]
pub struct Patch {
    pub spec: PatchSpec,
    pub image: Image,
    pub depth: DepthMap,
}

/// Renders one perspective patch. Images are sampled bilinearly; depth uses the
/// nearest panorama pixel so no depths are blended across discontinuities.
pub fn sample_patch(pano: &Panorama, spec: &PatchSpec) -> Result<Patch> {
    spec.validate()?;
    let k = &spec.intrinsics;
    let (pw, ph) = pano.dims();
    let rot = spec.rotation();
    let channels = pano.image.channels();
    let mut planes = vec![Grid::filled(k.width, k.height, 0.0); channels];
    let mut values = Grid::filled(k.width, k.height, 0.0);
    let mut valid = Grid::filled(k.width, k.height, false);
    for y in 0..k.height {
        for x in 0..k.width {
            let ray = k.unproject(x as f64, y as f64);
            let norm = ray.norm();
            let dir = rot * (ray / norm);
            let (u, v) = direction_to_equirect(&dir, pw, ph);
            for (plane, src) in planes.iter_mut().zip(pano.image.planes()) {
                plane[(x, y)] = sample_wrapped(src, u, v);
            }
            let cell = nearest_cell(pw, ph, u, v);
            if let Some(r) = pano.depth.get(cell.0, cell.1) {
                values[(x, y)] = if spec.radial_depth { r / norm } else { r };
                valid[(x, y)] = true;
            }
        }
    }
    Ok(Patch {
        spec: *spec,
        image: Image::from_planes(planes)?,
        depth: DepthMap::with_validity(values, &valid)?,
    })
}

/// Azimuths `0, step, ..., 360 - step` in degrees.
pub fn patch_azimuths(step_deg: u32) -> Result<Vec<f64>> {
    if step_deg == 0 || 360 % step_deg != 0 {
        return Err(Error::invalid(format!("azimuth step {step_deg} does not divide 360")));
    }
    Ok((0..360 / step_deg).map(|i| (i * step_deg) as f64).collect())
}

/// Patches at every azimuth step around the horizon. `template` supplies the
/// intrinsics, elevation and depth convention; its azimuth is ignored.
pub fn generate_scene_patches(pano: &Panorama, step_deg: u32, template: &PatchSpec) -> Result<Vec<Patch>> {
    patch_azimuths(step_deg)?
        .into_par_iter()
        .map(|azimuth_deg| {
            sample_patch(
                pano,
                &PatchSpec {
                    azimuth_deg,
                    ..*template
                },
            )
        })
        .collect()
}

/// Per-scene record of extracted patches, for later curation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneManifest {
    pub scene: String,
    pub step_deg: u32,
    pub intrinsics: Intrinsics,
    pub radial_depth: bool,
    pub patches: Vec<PatchRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchRecord {
    pub azimuth_deg: f64,
    pub image: Option<String>,
    pub depth: String,
    pub valid_fraction: f64,
    /// Curation flag; every patch starts accepted.
    pub keep: bool,
}
