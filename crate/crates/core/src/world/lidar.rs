use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::maze::{Cell, GridWorld};
use crate::grid::RayTraversal;
use crate::Pose2D;

/// Smallest reported range; a beam starting inside a wall reports this.
const MIN_RANGE: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LidarConfig {
    pub beams: usize,
    pub angle_min: f64,
    pub angle_max: f64,
    pub range_max: f64,
    /// Standard deviation of additive range noise; zero disables it.
    pub noise_sigma: f64,
}

impl Default for LidarConfig {
    fn default() -> Self {
        Self {
            beams: 181,
            angle_min: -FRAC_PI_2,
            angle_max: FRAC_PI_2,
            range_max: 8.0,
            noise_sigma: 0.0,
        }
    }
}

impl LidarConfig {
    pub fn angle_increment(&self) -> f64 {
        if self.beams > 1 {
            (self.angle_max - self.angle_min) / (self.beams - 1) as f64
        } else {
            0.0
        }
    }
}

/// Planar range scan; beam `k` points at `angle_min + k * angle_increment`
/// in the sensor frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserScan {
    pub angle_min: f64,
    pub angle_max: f64,
    pub angle_increment: f64,
    pub range_max: f64,
    pub ranges: Vec<f64>,
    pub stamp: f64,
}

impl LaserScan {
    pub fn beam_angle(&self, k: usize) -> f64 {
        self.angle_min + k as f64 * self.angle_increment
    }

    /// `(angle, range)` pairs in the sensor frame.
    pub fn beams(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ranges
            .iter()
            .enumerate()
            .map(|(k, &r)| (self.beam_angle(k), r))
    }

    pub fn is_max_range(&self, r: f64) -> bool {
        r >= self.range_max
    }

    /// Adds zero-mean Gaussian noise, keeping ranges in `(0, range_max]`.
    pub fn add_noise<R: Rng>(&mut self, sigma: f64, rng: &mut R) {
        if sigma <= 0.0 {
            return;
        }
        let normal = Normal::new(0.0, sigma).expect("finite sigma");
        for r in &mut self.ranges {
            if *r < self.range_max {
                *r = (*r + normal.sample(rng)).clamp(MIN_RANGE, self.range_max);
            }
        }
    }
}

/// Casts every beam through the wall raster; each range is the distance to
/// the boundary of the first wall cell hit, or `range_max`.
pub fn cast_scan(world: &GridWorld, pose: &Pose2D, config: &LidarConfig) -> LaserScan {
    let inc = config.angle_increment();
    let ranges = (0..config.beams)
        .map(|k| {
            let angle = pose.theta + config.angle_min + k as f64 * inc;
            RayTraversal::new(&world.geometry, pose.x, pose.y, angle, config.range_max)
                .find(|c| world.cells[world.geometry.index(c.i, c.j)] == Cell::Wall)
                .map(|c| c.t_enter.clamp(MIN_RANGE, config.range_max))
                .unwrap_or(config.range_max)
        })
        .collect();
    LaserScan {
        angle_min: config.angle_min,
        angle_max: config.angle_max,
        angle_increment: inc,
        range_max: config.range_max,
        ranges,
        stamp: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::load_maze;

    fn open_room(cells: usize) -> GridWorld {
        let mut text = String::new();
        for row in 0..cells {
            for col in 0..cells {
                let edge = row == 0 || row == cells - 1 || col == 0 || col == cells - 1;
                let start = row == cells / 2 && col == cells / 2;
                text.push(if edge { '#' } else if start { 'S' } else { '.' });
            }
            text.push('\n');
        }
        load_maze(&text).unwrap()
    }

    #[test]
    fn scan_has_declared_beam_count() {
        let w = open_room(12);
        let cfg = LidarConfig::default();
        let scan = cast_scan(&w, &w.start_pose, &cfg);
        let expected = ((scan.angle_max - scan.angle_min) / scan.angle_increment + 1e-9).floor() as usize + 1;
        assert_eq!(scan.ranges.len(), expected);
        assert_eq!(scan.ranges.len(), 181);
        assert!(scan.ranges.iter().all(|&r| r > 0.0 && r <= cfg.range_max));
    }

    #[test]
    fn open_range_reports_range_max() {
        let w = open_room(60);
        let cfg = LidarConfig {
            range_max: 2.0,
            ..LidarConfig::default()
        };
        let scan = cast_scan(&w, &w.start_pose, &cfg);
        assert!(scan.ranges.iter().all(|&r| r == 2.0));
    }

    #[test]
    fn symmetric_room_gives_symmetric_scan() {
        let w = open_room(13);
        let scan = cast_scan(&w, &w.start_pose, &LidarConfig::default());
        let n = scan.ranges.len();
        for k in 0..n / 2 {
            let (a, b) = (scan.ranges[k], scan.ranges[n - 1 - k]);
            assert!((a - b).abs() <= w.resolution(), "beam {k}: {a} vs {b}");
        }
    }
}
