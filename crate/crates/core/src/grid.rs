//! Shared raster geometry: cell indexing, exact distance transform and
//! incremental ray traversal.

use serde::{Deserialize, Serialize};

use crate::Pose2D;

/// Placement of a row-major raster in the world frame.
///
/// Cell `(i, j)` covers `[origin.x + i*res, origin.x + (i+1)*res)` by the
/// analogous interval in `y`; row `j = 0` is the bottom row.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub width: usize,
    pub height: usize,
    pub resolution: f64,
    pub origin: Pose2D,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            width,
            height,
            resolution,
            origin: Pose2D::default(),
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.width + i
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    pub fn contains(&self, i: i64, j: i64) -> bool {
        i >= 0 && j >= 0 && (i as usize) < self.width && (j as usize) < self.height
    }

    /// Cell containing a world point, if inside the raster.
    pub fn world_to_cell(&self, x: f64, y: f64) -> Option<(usize, usize)> {
        let fi = (x - self.origin.x) / self.resolution;
        let fj = (y - self.origin.y) / self.resolution;
        // Truncation is floor on the non-negative side; NaN fails the test.
        if !(fi >= 0.0 && fj >= 0.0) {
            return None;
        }
        let (i, j) = (fi as usize, fj as usize);
        (i < self.width && j < self.height).then_some((i, j))
    }

    pub fn cell_center(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.origin.x + (i as f64 + 0.5) * self.resolution,
            self.origin.y + (j as f64 + 0.5) * self.resolution,
        )
    }

    /// Same raster size and placement (exact comparison).
    pub fn same_as(&self, other: &GridGeometry) -> bool {
        self == other
    }
}

const FAR: f64 = 1e20;

/// Exact squared Euclidean distance (in cells) from every cell to the
/// nearest source cell. Cells are `f64::INFINITY` when there is no source.
pub fn squared_distance_transform(
    width: usize,
    height: usize,
    is_source: impl Fn(usize) -> bool,
) -> Vec<f64> {
    let mut grid: Vec<f64> = (0..width * height)
        .map(|k| if is_source(k) { 0.0 } else { FAR })
        .collect();
    if grid.iter().all(|&v| v >= FAR) {
        return vec![f64::INFINITY; width * height];
    }
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];

    for j in 0..height {
        for i in 0..width {
            f[i] = grid[j * width + i];
        }
        edt_1d(&f[..width], &mut d[..width], &mut v, &mut z);
        for i in 0..width {
            grid[j * width + i] = d[i];
        }
    }
    for i in 0..width {
        for j in 0..height {
            f[j] = grid[j * width + i];
        }
        edt_1d(&f[..height], &mut d[..height], &mut v, &mut z);
        for j in 0..height {
            grid[j * width + i] = d[j];
        }
    }
    grid
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher).
fn edt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let qf = q as f64;
        let mut s;
        loop {
            let p = v[k] as f64;
            s = ((f[q] + qf * qf) - (f[v[k]] + p * p)) / (2.0 * qf - 2.0 * p);
            if s <= z[k] && k > 0 {
                k -= 1;
            } else {
                break;
            }
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    k = 0;
    for q in 0..n {
        let qf = q as f64;
        while z[k + 1] < qf {
            k += 1;
        }
        let p = v[k] as f64;
        d[q] = (qf - p) * (qf - p) + f[v[k]];
    }
}

/// One cell visited by a ray, with the ray parameter (meters along the ray)
/// at which it enters and leaves the cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CellCrossing {
    pub i: usize,
    pub j: usize,
    pub t_enter: f64,
    pub t_exit: f64,
}

/// Amanatides-Woo voxel walk over a [`GridGeometry`], starting in the cell
/// holding the ray origin and stopping when leaving the raster or passing
/// `max_t`. Coincident boundary crossings step in `x` first.
pub struct RayTraversal {
    i: i64,
    j: i64,
    step_i: i64,
    step_j: i64,
    t_max_x: f64,
    t_max_y: f64,
    t_delta_x: f64,
    t_delta_y: f64,
    t: f64,
    max_t: f64,
    width: i64,
    height: i64,
}

impl RayTraversal {
    pub fn new(geometry: &GridGeometry, x: f64, y: f64, angle: f64, max_t: f64) -> Self {
        let res = geometry.resolution;
        let px = x - geometry.origin.x;
        let py = y - geometry.origin.y;
        let (dy, dx) = angle.sin_cos();
        let i = (px / res).floor() as i64;
        let j = (py / res).floor() as i64;
        let axis = |p: f64, d: f64, c: i64| -> (i64, f64, f64) {
            if d > 0.0 {
                (1, ((c + 1) as f64 * res - p) / d, res / d)
            } else if d < 0.0 {
                (-1, (c as f64 * res - p) / d, -res / d)
            } else {
                (0, f64::INFINITY, f64::INFINITY)
            }
        };
        let (step_i, t_max_x, t_delta_x) = axis(px, dx, i);
        let (step_j, t_max_y, t_delta_y) = axis(py, dy, j);
        Self {
            i,
            j,
            step_i,
            step_j,
            t_max_x,
            t_max_y,
            t_delta_x,
            t_delta_y,
            t: 0.0,
            max_t,
            width: geometry.width as i64,
            height: geometry.height as i64,
        }
    }
}

impl Iterator for RayTraversal {
    type Item = CellCrossing;

    fn next(&mut self) -> Option<CellCrossing> {
        if self.t > self.max_t
            || self.i < 0
            || self.j < 0
            || self.i >= self.width
            || self.j >= self.height
        {
            return None;
        }
        let t_enter = self.t;
        let t_exit = self.t_max_x.min(self.t_max_y);
        let out = CellCrossing {
            i: self.i as usize,
            j: self.j as usize,
            t_enter,
            t_exit,
        };
        if self.t_max_x <= self.t_max_y {
            self.i += self.step_i;
            self.t = self.t_max_x;
            self.t_max_x += self.t_delta_x;
        } else {
            self.j += self.step_j;
            self.t = self.t_max_y;
            self.t_max_y += self.t_delta_y;
        }
        if !t_exit.is_finite() {
            // Degenerate zero direction: only the origin cell.
            self.t = f64::INFINITY;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(width: usize, height: usize, src: &[bool]) -> Vec<f64> {
        (0..width * height)
            .map(|k| {
                let (i, j) = ((k % width) as f64, (k / width) as f64);
                src.iter()
                    .enumerate()
                    .filter(|(_, &s)| s)
                    .map(|(q, _)| {
                        let (a, b) = ((q % width) as f64, (q / width) as f64);
                        (a - i).powi(2) + (b - j).powi(2)
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    proptest! {
        #[test]
        fn distance_transform_matches_brute_force(
            w in 1usize..12, h in 1usize..12, bits in proptest::collection::vec(any::<u8>(), 144)
        ) {
            let src: Vec<bool> = (0..w * h).map(|k| bits[k] % 5 == 0).collect();
            let fast = squared_distance_transform(w, h, |k| src[k]);
            prop_assert_eq!(fast, brute_force(w, h, &src));
        }
    }

    #[test]
    fn traversal_visits_contiguous_cells() {
        let g = GridGeometry::new(10, 10, 0.5);
        let cells: Vec<_> = RayTraversal::new(&g, 0.25, 0.25, 0.3, 100.0).collect();
        assert_eq!((cells[0].i, cells[0].j), (0, 0));
        for w in cells.windows(2) {
            let di = (w[1].i as i64 - w[0].i as i64).abs();
            let dj = (w[1].j as i64 - w[0].j as i64).abs();
            assert_eq!(di + dj, 1);
            assert_eq!(w[0].t_exit, w[1].t_enter);
        }
        let last = cells.last().unwrap();
        assert!(last.i == 9 || last.j == 9);
    }

    #[test]
    fn traversal_along_axis_enters_at_boundaries() {
        let g = GridGeometry::new(8, 3, 0.25);
        let cells: Vec<_> = RayTraversal::new(&g, 0.125, 0.375, 0.0, 1.0).collect();
        let enters: Vec<f64> = cells.iter().map(|c| c.t_enter).collect();
        assert_eq!(enters, vec![0.0, 0.125, 0.375, 0.625, 0.875]);
        assert!(cells.iter().all(|c| c.j == 1));
    }
}
