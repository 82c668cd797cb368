//! Synthetic scenes with closed-form depth and boundary locations.
//!
//! A scene is a stack of planar layers, each covering an image region; later
//! layers paint over earlier ones. Depth at pixel `p` on plane `n·X = c` is
//! `c / (n·K⁻¹p)`.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DepthMap, Intrinsics};
use crate::grid::Grid;

/// Plane `normal · X = offset` in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plane {
    pub normal: [f64; 3],
    pub offset: f64,
}

impl Plane {
    pub fn fronto_parallel(depth: f64) -> Self {
        Self {
            normal: [0.0, 0.0, 1.0],
            offset: depth,
        }
    }

    /// z-depth where the ray through `(u, v)` meets the plane; `None` when the
    /// plane is behind the camera or parallel to the ray.
    pub fn depth_at(&self, k: &Intrinsics, u: f64, v: f64) -> Option<f64> {
        let ray = k.unproject(u, v);
        let denom = Vector3::from(self.normal).dot(&ray);
        let z = self.offset / denom;
        (z.is_finite() && z > 0.0).then_some(z)
    }
}

/// Pixel region covered by a layer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Region {
    All,
    /// Columns `x >= column`.
    RightOf(usize),
    /// Rows `y >= row`.
    Below(usize),
    /// Half-open rectangle `[x0, x1) x [y0, y1)`.
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
}

impl Region {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        match *self {
            Region::All => true,
            Region::RightOf(c) => x >= c,
            Region::Below(r) => y >= r,
            Region::Rect { x0, y0, x1, y1 } => (x0..x1).contains(&x) && (y0..y1).contains(&y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub region: Region,
    pub plane: Plane,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticScene {
    pub layers: Vec<Layer>,
}

impl SyntheticScene {
    pub fn fronto_parallel(depth: f64) -> Self {
        Self {
            layers: vec![Layer {
                region: Region::All,
                plane: Plane::fronto_parallel(depth),
            }],
        }
    }

    /// `left` depth on columns `< seam`, `right` depth from `seam` on.
    pub fn half_planes(seam: usize, left: f64, right: f64) -> Self {
        Self {
            layers: vec![
                Layer {
                    region: Region::All,
                    plane: Plane::fronto_parallel(left),
                },
                Layer {
                    region: Region::RightOf(seam),
                    plane: Plane::fronto_parallel(right),
                },
            ],
        }
    }

    /// A fronto-parallel box at `inner` depth in front of a background at `outer`.
    pub fn box_step(rect: Region, inner: f64, outer: f64) -> Self {
        Self {
            layers: vec![
                Layer {
                    region: Region::All,
                    plane: Plane::fronto_parallel(outer),
                },
                Layer {
                    region: rect,
                    plane: Plane::fronto_parallel(inner),
                },
            ],
        }
    }

    pub fn slanted(plane: Plane) -> Self {
        Self {
            layers: vec![Layer {
                region: Region::All,
                plane,
            }],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::invalid("scene has no layers"));
        }
        for l in &self.layers {
            let n = Vector3::from(l.plane.normal);
            if !(n.norm() > 0.0) || !l.plane.offset.is_finite() {
                return Err(Error::invalid("plane needs a nonzero normal and finite offset"));
            }
        }
        Ok(())
    }

    /// Index of the topmost layer covering `(x, y)`.
    pub fn layer_at(&self, x: usize, y: usize) -> Option<usize> {
        self.layers.iter().rposition(|l| l.region.contains(x, y))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedScene {
    pub depth: DepthMap,
    /// Pixels with a 4-neighbour on a different layer, on both sides of the boundary.
    pub boundaries: Grid<bool>,
    pub layer: Grid<Option<usize>>,
}

/// Renders exact depth and the analytic boundary pixels of `scene`.
pub fn render_scene(scene: &SyntheticScene, k: &Intrinsics) -> Result<RenderedScene> {
    scene.validate()?;
    let (w, h) = (k.width, k.height);
    let layer = Grid::from_fn(w, h, |x, y| scene.layer_at(x, y));
    let values = Grid::from_fn(w, h, |x, y| {
        layer[(x, y)]
            .and_then(|i| scene.layers[i].plane.depth_at(k, x as f64, y as f64))
            .unwrap_or(f64::NAN)
    });
    let mut boundaries = Grid::filled(w, h, false);
    for y in 0..h {
        for x in 0..w {
            if x + 1 < w && layer[(x, y)] != layer[(x + 1, y)] {
                boundaries[(x, y)] = true;
                boundaries[(x + 1, y)] = true;
            }
            if y + 1 < h && layer[(x, y)] != layer[(x, y + 1)] {
                boundaries[(x, y)] = true;
                boundaries[(x, y + 1)] = true;
            }
        }
    }
    Ok(RenderedScene {
        depth: DepthMap::new(values),
        boundaries,
        layer,
    })
}
