//! Exact Euclidean distance transform (separable lower-envelope algorithm of
//! Felzenszwalb & Huttenlocher). Squared distances are computed in integer
//! arithmetic, so results match a brute-force scan exactly.

use crate::grid::Grid;

/// Squared distance from every pixel to the nearest `true` pixel; `None` when
/// the grid has no set pixels.
pub fn squared_edt(sites: &Grid<bool>) -> Option<Grid<i64>> {
    if !sites.iter().any(|&b| b) {
        return None;
    }
    let (w, h) = sites.dims();

    // Column pass: vertical distance to the nearest site in the same column.
    let mut vertical: Grid<Option<i64>> = Grid::filled(w, h, None);
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if sites[(x, y)] {
                last = Some(y);
            }
            vertical[(x, y)] = last.map(|s| (y - s) as i64);
        }
        let mut next: Option<usize> = None;
        for y in (0..h).rev() {
            if sites[(x, y)] {
                next = Some(y);
            }
            if let Some(s) = next {
                let d = (s - y) as i64;
                let cell = &mut vertical[(x, y)];
                *cell = Some(cell.map_or(d, |c| c.min(d)));
            }
        }
    }

    // Row pass: lower envelope of parabolas (x - q)^2 + f(q).
    let mut out = Grid::filled(w, h, 0i64);
    let mut sites_q: Vec<i64> = Vec::with_capacity(w);
    let mut bounds: Vec<f64> = Vec::with_capacity(w + 1);
    for y in 0..h {
        let f = |q: i64| {
            let g = vertical[(q as usize, y)].expect("only finite sites are inserted");
            g * g
        };
        sites_q.clear();
        bounds.clear();
        for q in 0..w as i64 {
            if vertical[(q as usize, y)].is_none() {
                continue;
            }
            loop {
                let Some(&v) = sites_q.last() else {
                    sites_q.push(q);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                };
                let s = ((f(q) + q * q) - (f(v) + v * v)) as f64 / (2 * (q - v)) as f64;
                if s <= *bounds.last().expect("one bound per site") {
                    sites_q.pop();
                    bounds.pop();
                } else {
                    sites_q.push(q);
                    bounds.push(s);
                    break;
                }
            }
        }
        // Nonempty: any column holding a site is finite on every row.
        let mut k = 0;
        for x in 0..w {
            let xf = x as f64;
            while k + 1 < sites_q.len() && bounds[k + 1] < xf {
                k += 1;
            }
            let q = sites_q[k];
            let dx = x as i64 - q;
            out[(x, y)] = dx * dx + f(q);
        }
    }
    Some(out)
}

/// Per-pixel Euclidean distance to the nearest set pixel, clamped at `tau`.
/// All pixels are `tau` when there are no set pixels.
pub fn truncated_distance(sites: &Grid<bool>, tau: f64) -> Grid<f64> {
    match squared_edt(sites) {
        Some(sq) => sq.map(|&d| (d as f64).sqrt().min(tau)),
        None => Grid::filled(sites.width(), sites.height(), tau),
    }
}
