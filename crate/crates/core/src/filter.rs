//! Separable filters with replicate borders.

use crate::grid::Grid;

/// Normalized 1D Gaussian kernel with radius `ceil(3 sigma)`. `sigma <= 0` yields `[1]`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let radius = (3.0 * sigma).ceil().max(1.0) as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-((i * i) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Convolves rows then columns with the same odd-length kernel.
pub fn separable(grid: &Grid<f64>, kernel: &[f64]) -> Grid<f64> {
    debug_assert!(kernel.len() % 2 == 1);
    if kernel.len() == 1 && kernel[0] == 1.0 {
        return grid.clone();
    }
    let r = (kernel.len() / 2) as isize;
    let (w, h) = grid.dims();
    let horizontal = Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * grid.get_clamped(x as isize + i as isize - r, y as isize))
            .sum()
    });
    Grid::from_fn(w, h, |x, y| {
        kernel
            .iter()
            .enumerate()
            .map(|(i, k)| k * horizontal.get_clamped(x as isize, y as isize + i as isize - r))
            .sum()
    })
}

pub fn gaussian_blur(grid: &Grid<f64>, sigma: f64) -> Grid<f64> {
    separable(grid, &gaussian_kernel(sigma))
}

/// Mean over a `window x window` neighbourhood (window odd).
pub fn box_mean(grid: &Grid<f64>, window: usize) -> Grid<f64> {
    let k = vec![1.0 / window as f64; window];
    separable(grid, &k)
}

/// Sobel derivatives `(d/dx, d/dy)` with replicate borders.
pub fn sobel(grid: &Grid<f64>) -> (Grid<f64>, Grid<f64>) {
    let (w, h) = grid.dims();
    let at = |x: usize, y: usize, dx: isize, dy: isize| {
        grid.get_clamped(x as isize + dx, y as isize + dy)
    };
    let gx = Grid::from_fn(w, h, |x, y| {
        (at(x, y, 1, -1) + 2.0 * at(x, y, 1, 0) + at(x, y, 1, 1))
            - (at(x, y, -1, -1) + 2.0 * at(x, y, -1, 0) + at(x, y, -1, 1))
    });
    let gy = Grid::from_fn(w, h, |x, y| {
        (at(x, y, -1, 1) + 2.0 * at(x, y, 0, 1) + at(x, y, 1, 1))
            - (at(x, y, -1, -1) + 2.0 * at(x, y, 0, -1) + at(x, y, 1, -1))
    });
    (gx, gy)
}
