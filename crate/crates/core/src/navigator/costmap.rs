use serde::{Deserialize, Serialize};

use crate::grid::{squared_distance_transform, GridGeometry};
use crate::perception::{Occupancy, TernaryGrid};
use crate::scalar::Scalar;

pub const LETHAL: u8 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct InflationConfig {
    pub robot_radius: f64,
    pub inflation_radius: f64,
    /// Exponential decay rate of the inflated band (1/m).
    pub decay: f64,
    /// Floor cost of cells that have not been observed.
    pub unknown_cost: u8,
}

impl InflationConfig {
    pub fn for_radius(robot_radius: f64) -> Self {
        Self {
            robot_radius,
            inflation_radius: 2.0 * robot_radius,
            decay: 10.0,
            unknown_cost: 128,
        }
    }
}

impl Default for InflationConfig {
    fn default() -> Self {
        Self::for_radius(crate::world::DEFAULT_ROBOT_RADIUS)
    }
}

/// Cost at distance `d` from the nearest obstacle: lethal inside the robot
/// radius, `253 * exp(-decay * (d - robot_radius))` out to the inflation
/// radius, free beyond.
pub fn inflation_cost<T: Scalar>(d: T, robot_radius: T, inflation_radius: T, decay: T) -> u8 {
    if d <= robot_radius {
        LETHAL
    } else if d <= inflation_radius {
        let c = (T::lit(253.0) * (-decay * (d - robot_radius)).exp()).round();
        c.to_u8().unwrap_or(253)
    } else {
        0
    }
}

/// Per-cell traversal cost derived from a ternary map.
#[derive(Clone, Debug, PartialEq)]
pub struct Costmap {
    pub geometry: GridGeometry,
    pub cost: Vec<u8>,
}

impl Costmap {
    pub fn at(&self, i: usize, j: usize) -> u8 {
        self.cost[self.geometry.index(i, j)]
    }

    pub fn is_lethal(&self, i: usize, j: usize) -> bool {
        self.at(i, j) == LETHAL
    }
}

/// [`build_costmap_with`] using the default decay and unknown-cell cost.
pub fn build_costmap(grid: &TernaryGrid, robot_radius: f64, inflation_radius: f64) -> Costmap {
    build_costmap_with(
        grid,
        &InflationConfig {
            robot_radius,
            inflation_radius,
            ..InflationConfig::for_radius(robot_radius)
        },
    )
}

/// Inflates occupied cells by center-to-center Euclidean distance. Unknown
/// cells cost at least `unknown_cost` unless they are lethal.
pub fn build_costmap_with(grid: &TernaryGrid, cfg: &InflationConfig) -> Costmap {
    assert!(
        cfg.inflation_radius >= cfg.robot_radius,
        "inflation radius must cover the robot radius"
    );
    let g = grid.geometry;
    let sq = squared_distance_transform(g.width, g.height, |k| {
        grid.cells[k] == Occupancy::Occupied
    });
    let cost = sq
        .iter()
        .zip(&grid.cells)
        .map(|(&s, &cell)| {
            let d = s.sqrt() * g.resolution;
            let c = inflation_cost(d, cfg.robot_radius, cfg.inflation_radius, cfg.decay);
            if cell == Occupancy::Unknown && c != LETHAL {
                c.max(cfg.unknown_cost)
            } else {
                c
            }
        })
        .collect();
    Costmap { geometry: g, cost }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Pose2D;

    fn wall_column(width: usize, height: usize) -> TernaryGrid {
        let g = GridGeometry {
            width,
            height,
            resolution: 0.25,
            origin: Pose2D::default(),
        };
        let mut t = TernaryGrid::unknown(g);
        for (k, c) in t.cells.iter_mut().enumerate() {
            *c = if k % width == 0 {
                Occupancy::Occupied
            } else {
                Occupancy::Free
            };
        }
        t
    }

    #[test]
    fn formula_at_one_tenth_meter_past_radius() {
        // 253 * e^-1 = 93.07
        assert_eq!(inflation_cost(0.4, 0.3, 0.6, 10.0), 93);
        assert_eq!(inflation_cost(0.4f32, 0.3, 0.6, 10.0), 93);
    }

    #[test]
    fn bands() {
        let cm = build_costmap(&wall_column(12, 3), 0.3, 0.6);
        assert_eq!(cm.at(0, 1), LETHAL);
        assert_eq!(cm.at(1, 1), LETHAL);
        // 253 * e^(-10 * 0.2) = 34.24
        assert_eq!(cm.at(2, 1), 34);
        assert_eq!(cm.at(3, 1), 0);
        assert_eq!(cm.at(11, 1), 0);
        let row: Vec<u8> = (0..12).map(|i| cm.at(i, 1)).collect();
        assert!(row.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn unknown_cells_are_discouraged_not_forbidden() {
        let mut t = wall_column(12, 3);
        let k = t.geometry.index(10, 1);
        t.cells[k] = Occupancy::Unknown;
        let cm = build_costmap(&t, 0.3, 0.6);
        assert_eq!(cm.at(10, 1), 128);
    }
}
