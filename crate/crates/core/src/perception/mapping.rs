use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{GridGeometry, RayTraversal};
use crate::world::{Cell, GridWorld, LaserScan};
use crate::Pose2D;

/// Slack used to place a beam endpoint inside the cell it hit.
const ENDPOINT_EPS: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MappingConfig {
    /// Log-odds increment for the cell a beam ends in.
    pub l_occ: f64,
    /// Log-odds increment for cells a beam passes through.
    pub l_free: f64,
    /// Saturation bound, applied after every update.
    pub l_max: f64,
    /// Classification threshold (strict on both sides).
    pub l_thresh: f64,
}

impl MappingConfig {
    pub fn from_probabilities(p_hit: f64, p_free: f64, l_max: f64, l_thresh: f64) -> Self {
        Self {
            l_occ: (p_hit / (1.0 - p_hit)).ln(),
            l_free: (p_free / (1.0 - p_free)).ln(),
            l_max,
            l_thresh,
        }
    }
}

impl Default for MappingConfig {
    fn default() -> Self {
        Self::from_probabilities(0.7, 0.4, 10.0, 0.85)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum MappingError {
    #[error("pose ({x:.3}, {y:.3}) lies outside the map")]
    PoseOutsideMap { x: f64, y: f64 },
}

/// Log-odds occupancy belief per cell.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyGridMap {
    pub geometry: GridGeometry,
    pub logodds: Vec<f64>,
    pub config: MappingConfig,
}

impl OccupancyGridMap {
    pub fn new(geometry: GridGeometry, config: MappingConfig) -> Self {
        Self {
            logodds: vec![0.0; geometry.len()],
            geometry,
            config,
        }
    }

    /// Empty belief over the same raster as `world`.
    pub fn for_world(world: &GridWorld, config: MappingConfig) -> Self {
        Self::new(world.geometry, config)
    }

    pub fn logodds_at(&self, i: usize, j: usize) -> f64 {
        self.logodds[self.geometry.index(i, j)]
    }

    fn bump(&mut self, i: usize, j: usize, delta: f64) {
        let k = self.geometry.index(i, j);
        let l = self.config.l_max;
        self.logodds[k] = (self.logodds[k] + delta).clamp(-l, l);
    }

    /// Known-pose inverse sensor update. Cells a beam crosses before its
    /// endpoint get `l_free`; the endpoint cell gets `l_occ`. Max-range
    /// beams only clear.
    pub fn integrate_scan(&mut self, pose: &Pose2D, scan: &LaserScan) -> Result<(), MappingError> {
        if self.geometry.world_to_cell(pose.x, pose.y).is_none() {
            return Err(MappingError::PoseOutsideMap {
                x: pose.x,
                y: pose.y,
            });
        }
        let (l_free, l_occ) = (self.config.l_free, self.config.l_occ);
        for (angle, range) in scan.beams() {
            let hit = !scan.is_max_range(range);
            let reach = if hit { range + ENDPOINT_EPS } else { range };
            let walk = RayTraversal::new(&self.geometry, pose.x, pose.y, pose.theta + angle, reach);
            for c in walk {
                if hit && c.t_exit > reach {
                    self.bump(c.i, c.j, l_occ);
                    break;
                }
                if !hit && c.t_enter >= reach {
                    break;
                }
                self.bump(c.i, c.j, l_free);
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Occupancy {
    Free,
    Occupied,
    Unknown,
}

impl Occupancy {
    /// Grayscale raster value used in map files and UI frames.
    pub fn raster_value(self) -> u8 {
        match self {
            Occupancy::Free => 254,
            Occupancy::Occupied => 0,
            Occupancy::Unknown => 205,
        }
    }

    /// Inverse of [`raster_value`](Self::raster_value); other gray levels are
    /// thresholded as occupancy probability `(255 - v) / 255`.
    pub fn from_raster_value(v: u8) -> Self {
        match v {
            254 => Occupancy::Free,
            0 => Occupancy::Occupied,
            205 => Occupancy::Unknown,
            _ => {
                let p = (255.0 - v as f64) / 255.0;
                if p > 0.65 {
                    Occupancy::Occupied
                } else if p < 0.196 {
                    Occupancy::Free
                } else {
                    Occupancy::Unknown
                }
            }
        }
    }
}

/// Free / occupied / unknown view of a map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TernaryWire", try_from = "TernaryWire")]
pub struct TernaryGrid {
    pub geometry: GridGeometry,
    pub cells: Vec<Occupancy>,
}

impl TernaryGrid {
    pub fn unknown(geometry: GridGeometry) -> Self {
        Self {
            cells: vec![Occupancy::Unknown; geometry.len()],
            geometry,
        }
    }

    /// Ground-truth map of a world: walls occupied, everything else free.
    pub fn from_world(world: &GridWorld) -> Self {
        Self {
            geometry: world.geometry,
            cells: world
                .cells
                .iter()
                .map(|c| match c {
                    Cell::Wall => Occupancy::Occupied,
                    Cell::Free => Occupancy::Free,
                })
                .collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> Occupancy {
        self.cells[self.geometry.index(i, j)]
    }

    pub fn at_world(&self, x: f64, y: f64) -> Option<Occupancy> {
        self.geometry
            .world_to_cell(x, y)
            .map(|(i, j)| self.get(i, j))
    }

    pub fn count(&self, kind: Occupancy) -> usize {
        self.cells.iter().filter(|&&c| c == kind).count()
    }
}

#[derive(Serialize, Deserialize)]
struct TernaryWire {
    width: usize,
    height: usize,
    resolution: f64,
    origin: Pose2D,
    cells: Vec<u8>,
}

impl From<TernaryGrid> for TernaryWire {
    fn from(g: TernaryGrid) -> Self {
        Self {
            width: g.geometry.width,
            height: g.geometry.height,
            resolution: g.geometry.resolution,
            origin: g.geometry.origin,
            cells: g.cells.iter().map(|c| c.raster_value()).collect(),
        }
    }
}

impl TryFrom<TernaryWire> for TernaryGrid {
    type Error = String;

    fn try_from(w: TernaryWire) -> Result<Self, String> {
        if w.cells.len() != w.width * w.height {
            return Err(format!(
                "grid has {} cells, expected {}x{}",
                w.cells.len(),
                w.width,
                w.height
            ));
        }
        if !(w.resolution > 0.0) {
            return Err("resolution must be positive".into());
        }
        Ok(Self {
            geometry: GridGeometry {
                width: w.width,
                height: w.height,
                resolution: w.resolution,
                origin: w.origin,
            },
            cells: w.cells.into_iter().map(Occupancy::from_raster_value).collect(),
        })
    }
}

/// Thresholds log-odds: above `+l_thresh` occupied, below `-l_thresh` free.
pub fn classify(map: &OccupancyGridMap) -> TernaryGrid {
    let t = map.config.l_thresh;
    TernaryGrid {
        geometry: map.geometry,
        cells: map
            .logodds
            .iter()
            .map(|&l| {
                if l > t {
                    Occupancy::Occupied
                } else if l < -t {
                    Occupancy::Free
                } else {
                    Occupancy::Unknown
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn corridor_geometry() -> GridGeometry {
        GridGeometry::new(10, 3, 0.25)
    }

    fn single_beam(range: f64, range_max: f64) -> LaserScan {
        LaserScan {
            angle_min: 0.0,
            angle_max: 0.0,
            angle_increment: 0.0,
            range_max,
            ranges: vec![range],
            stamp: 0.0,
        }
    }

    #[test]
    fn single_hit_adds_occupied_log_odds() {
        let mut map = OccupancyGridMap::new(corridor_geometry(), MappingConfig::default());
        let pose = Pose2D::new(0.125, 0.375, 0.0);
        // Beam ends on the boundary x = 1.0, which is the face of cell 4.
        map.integrate_scan(&pose, &single_beam(0.875, 8.0)).unwrap();
        assert_relative_eq!(map.logodds_at(4, 1), 0.8473, epsilon = 5e-5);
        assert_relative_eq!(map.logodds_at(4, 1), (0.7f64 / 0.3).ln());
        for i in 0..4 {
            assert_relative_eq!(map.logodds_at(i, 1), (0.4f64 / 0.6).ln());
        }
        assert_eq!(map.logodds_at(5, 1), 0.0);
    }

    #[test]
    fn max_range_beams_never_occupy() {
        let mut map = OccupancyGridMap::new(corridor_geometry(), MappingConfig::default());
        let pose = Pose2D::new(0.125, 0.375, 0.0);
        for _ in 0..20 {
            map.integrate_scan(&pose, &single_beam(1.5, 1.5)).unwrap();
        }
        let t = classify(&map);
        assert_eq!(t.count(Occupancy::Occupied), 0);
        assert_eq!(t.get(6, 1), Occupancy::Free);
        assert_eq!(t.get(7, 1), Occupancy::Unknown);
    }

    #[test]
    fn identical_scans_are_additive() {
        let cfg = MappingConfig::default();
        let mut once = OccupancyGridMap::new(corridor_geometry(), cfg);
        let mut twice = once.clone();
        let pose = Pose2D::new(0.2, 0.3, 0.1);
        let scan = LaserScan {
            angle_min: -0.3,
            angle_max: 0.3,
            angle_increment: 0.1,
            range_max: 8.0,
            ranges: vec![1.1, 1.2, 1.3, 8.0, 1.0, 0.9, 1.6],
            stamp: 0.0,
        };
        once.integrate_scan(&pose, &scan).unwrap();
        twice.integrate_scan(&pose, &scan).unwrap();
        twice.integrate_scan(&pose, &scan).unwrap();
        for (a, b) in once.logodds.iter().zip(&twice.logodds) {
            assert_relative_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn pose_outside_rejected() {
        let mut map = OccupancyGridMap::new(corridor_geometry(), MappingConfig::default());
        let err = map
            .integrate_scan(&Pose2D::new(-1.0, 0.3, 0.0), &single_beam(1.0, 8.0))
            .unwrap_err();
        assert!(matches!(err, MappingError::PoseOutsideMap { .. }));
    }

    #[test]
    fn classification_thresholds_are_strict() {
        let cfg = MappingConfig::default();
        let mut map = OccupancyGridMap::new(GridGeometry::new(4, 1, 0.25), cfg);
        assert!(classify(&map).cells.iter().all(|&c| c == Occupancy::Unknown));
        map.logodds = vec![cfg.l_max, cfg.l_thresh, -cfg.l_thresh, -cfg.l_thresh - 1e-12];
        assert_eq!(
            classify(&map).cells,
            vec![
                Occupancy::Occupied,
                Occupancy::Unknown,
                Occupancy::Unknown,
                Occupancy::Free
            ]
        );
    }

    #[test]
    fn updates_saturate() {
        let mut map = OccupancyGridMap::new(corridor_geometry(), MappingConfig::default());
        let pose = Pose2D::new(0.125, 0.375, 0.0);
        for _ in 0..100 {
            map.integrate_scan(&pose, &single_beam(0.875, 8.0)).unwrap();
        }
        assert_eq!(map.logodds_at(4, 1), 10.0);
        assert_eq!(map.logodds_at(0, 1), -10.0);
    }

    #[test]
    fn raster_values_round_trip() {
        for c in [Occupancy::Free, Occupancy::Occupied, Occupancy::Unknown] {
            assert_eq!(Occupancy::from_raster_value(c.raster_value()), c);
        }
        assert_eq!(Occupancy::Free.raster_value(), 254);
        assert_eq!(Occupancy::Occupied.raster_value(), 0);
        assert_eq!(Occupancy::Unknown.raster_value(), 205);
    }
}
