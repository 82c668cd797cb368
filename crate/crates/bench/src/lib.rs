//! Seeded inputs for the kernel benchmarks.

use depthbench_core::{DepthMap, Grid, Image, Intrinsics, PointCloud};
use nalgebra::Point3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Driving-camera intrinsics rescaled to `width x height`.
pub fn kitti_like(width: usize, height: usize) -> Intrinsics {
    let f = 721.5 * width as f64 / 1242.0;
    Intrinsics::new(f, f, (width as f64 - 1.0) / 2.0, (height as f64 - 1.0) / 2.0, width, height).unwrap()
}

/// Road-like depth: near at the bottom, far at the horizon, with a box in the middle.
pub fn street_depth(width: usize, height: usize) -> DepthMap {
    DepthMap::new(Grid::from_fn(width, height, |x, y| {
        let (w, h) = (width as f64, height as f64);
        if (x as f64 - w / 2.0).abs() < w / 8.0 && (y as f64 - h / 2.0).abs() < h / 6.0 {
            8.0
        } else {
            80.0 / (1.0 + 20.0 * (y as f64 / h))
        }
    }))
}

/// Multiplies every valid depth by a random factor in `[1 - noise, 1 + noise]`.
pub fn perturbed(depth: &DepthMap, noise: f64, rng: &mut impl Rng) -> DepthMap {
    DepthMap::new(depth.values().map(|&d| d * (1.0 + rng.gen_range(-noise..=noise))))
}

pub fn textured_image(width: usize, height: usize, rng: &mut impl Rng) -> Image {
    let planes = (0..3)
        .map(|_| Grid::from_fn(width, height, |_, _| rng.gen_range(0.0..1.0)))
        .collect();
    Image::from_planes(planes).unwrap()
}

pub fn random_cloud(n: usize, rng: &mut impl Rng) -> PointCloud {
    let points = (0..n)
        .map(|_| Point3::new(rng.gen_range(-10.0..10.0), rng.gen_range(-2.0..3.0), rng.gen_range(1.0..60.0)))
        .collect();
    PointCloud::new(points).unwrap()
}
