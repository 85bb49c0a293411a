use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::f64::consts::SQRT_2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::costmap::{Costmap, LETHAL};
use crate::Pose2D;

/// Exact path cost in units of `resolution / 256`: `straight + diagonal * sqrt(2)`.
///
/// Each step into a cell of cost `c` contributes `256 + c` to the bucket of
/// its step kind, so equal real costs always have equal representations and
/// comparisons never round.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PathCost {
    pub straight: u64,
    pub diagonal: u64,
}

impl PathCost {
    pub const ZERO: PathCost = PathCost {
        straight: 0,
        diagonal: 0,
    };

    pub fn step(diagonal: bool, cell_cost: u8) -> Self {
        let w = 256 + cell_cost as u64;
        if diagonal {
            Self {
                straight: 0,
                diagonal: w,
            }
        } else {
            Self {
                straight: w,
                diagonal: 0,
            }
        }
    }

    /// Real length in meters for a grid of the given resolution.
    pub fn meters(&self, resolution: f64) -> f64 {
        (self.straight as f64 + self.diagonal as f64 * SQRT_2) * resolution / 256.0
    }
}

impl std::ops::Add for PathCost {
    type Output = PathCost;

    fn add(self, o: PathCost) -> PathCost {
        PathCost {
            straight: self.straight + o.straight,
            diagonal: self.diagonal + o.diagonal,
        }
    }
}

impl Ord for PathCost {
    fn cmp(&self, other: &Self) -> Ordering {
        // sign(p + q*sqrt2) with integer p, q.
        let p = self.straight as i128 - other.straight as i128;
        let q = self.diagonal as i128 - other.diagonal as i128;
        match (p.signum(), q.signum()) {
            (0, 0) => Ordering::Equal,
            (a, b) if a >= 0 && b >= 0 => Ordering::Greater,
            (a, b) if a <= 0 && b <= 0 => Ordering::Less,
            (1, _) => (p * p).cmp(&(2 * q * q)),
            _ => (2 * q * q).cmp(&(p * p)),
        }
    }
}

impl PartialOrd for PathCost {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GlobalPlan {
    /// Cell centers from start to goal.
    pub waypoints: Vec<Pose2D>,
    /// Plan cost in meters.
    pub cost: f64,
    pub exact_cost: PathCost,
}

impl GlobalPlan {
    pub fn goal(&self) -> Option<&Pose2D> {
        self.waypoints.last()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PlanError {
    #[error("no traversable path to the goal")]
    NoPath,
    #[error("goal cell is lethal")]
    GoalLethal,
    #[error("start cell is lethal")]
    StartLethal,
    #[error("{0} lies outside the costmap")]
    OutOfBounds(&'static str),
}

pub(crate) const NEIGHBORS: [(i64, i64); 8] = [
    (1, 0),
    (-1, 0),
    (0, 1),
    (0, -1),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Successors of a cell: the 8 neighbors that are in bounds and not
/// lethal; diagonal moves also need both orthogonal cells non-lethal.
pub fn successors(costmap: &Costmap, cell: usize) -> impl Iterator<Item = (usize, PathCost)> + '_ {
    let g = &costmap.geometry;
    let (i, j) = g.coords(cell);
    let open = move |i: i64, j: i64| {
        g.contains(i, j) && costmap.cost[g.index(i as usize, j as usize)] != LETHAL
    };
    NEIGHBORS.iter().filter_map(move |&(di, dj)| {
        let (ni, nj) = (i as i64 + di, j as i64 + dj);
        let diagonal = di != 0 && dj != 0;
        if !open(ni, nj) || (diagonal && !(open(i as i64 + di, j as i64) && open(i as i64, j as i64 + dj))) {
            return None;
        }
        let k = g.index(ni as usize, nj as usize);
        Some((k, PathCost::step(diagonal, costmap.cost[k])))
    })
}

fn octile(g: &crate::grid::GridGeometry, a: usize, b: usize) -> PathCost {
    let (ai, aj) = g.coords(a);
    let (bi, bj) = g.coords(b);
    let dx = ai.abs_diff(bi) as u64;
    let dy = aj.abs_diff(bj) as u64;
    PathCost {
        straight: 256 * (dx.max(dy) - dx.min(dy)),
        diagonal: 256 * dx.min(dy),
    }
}

/// A* over the 8-connected costmap with the octile heuristic, which is
/// consistent for these edge weights, so the returned cost is optimal.
pub fn plan_global(costmap: &Costmap, start: &Pose2D, goal: &Pose2D) -> Result<GlobalPlan, PlanError> {
    let g = &costmap.geometry;
    let (si, sj) = g
        .world_to_cell(start.x, start.y)
        .ok_or(PlanError::OutOfBounds("start"))?;
    let (gi, gj) = g
        .world_to_cell(goal.x, goal.y)
        .ok_or(PlanError::OutOfBounds("goal"))?;
    if costmap.is_lethal(gi, gj) {
        return Err(PlanError::GoalLethal);
    }
    if costmap.is_lethal(si, sj) {
        return Err(PlanError::StartLethal);
    }
    let (s, t) = (g.index(si, sj), g.index(gi, gj));
    let cells = plan_cells(costmap, s, t).ok_or(PlanError::NoPath)?;
    Ok(plan_from_cells(costmap, &cells.0, cells.1, goal.theta))
}

pub(crate) fn plan_cells(costmap: &Costmap, s: usize, t: usize) -> Option<(Vec<usize>, PathCost)> {
    let g = &costmap.geometry;
    let n = g.len();
    let mut best = vec![None::<PathCost>; n];
    let mut parent = vec![usize::MAX; n];
    let mut closed = vec![false; n];
    let mut open = BinaryHeap::new();
    best[s] = Some(PathCost::ZERO);
    open.push(Reverse((octile(g, s, t), PathCost::ZERO, s)));
    while let Some(Reverse((_, cost, cell))) = open.pop() {
        if closed[cell] {
            continue;
        }
        closed[cell] = true;
        if cell == t {
            let mut path = vec![t];
            while let Some(&last) = path.last() {
                if last == s {
                    break;
                }
                path.push(parent[last]);
            }
            path.reverse();
            return Some((path, cost));
        }
        for (next, step) in successors(costmap, cell) {
            if closed[next] {
                continue;
            }
            let c = cost + step;
            if best[next].is_none_or(|b| c < b) {
                best[next] = Some(c);
                parent[next] = cell;
                open.push(Reverse((c + octile(g, next, t), c, next)));
            }
        }
    }
    None
}

fn plan_from_cells(costmap: &Costmap, cells: &[usize], cost: PathCost, goal_theta: f64) -> GlobalPlan {
    let g = &costmap.geometry;
    let centers: Vec<(f64, f64)> = cells
        .iter()
        .map(|&k| {
            let (i, j) = g.coords(k);
            g.cell_center(i, j)
        })
        .collect();
    let waypoints = centers
        .iter()
        .enumerate()
        .map(|(k, &(x, y))| {
            let theta = match centers.get(k + 1) {
                Some(&(nx, ny)) => (ny - y).atan2(nx - x),
                None => goal_theta,
            };
            Pose2D::new(x, y, theta)
        })
        .collect();
    GlobalPlan {
        waypoints,
        cost: cost.meters(g.resolution),
        exact_cost: cost,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridGeometry;

    fn flat(w: usize, h: usize) -> Costmap {
        Costmap {
            geometry: GridGeometry::new(w, h, 0.25),
            cost: vec![0; w * h],
        }
    }

    fn center(cm: &Costmap, i: usize, j: usize) -> Pose2D {
        let (x, y) = cm.geometry.cell_center(i, j);
        Pose2D::new(x, y, 0.0)
    }

    #[test]
    fn diagonal_across_empty_grid() {
        let cm = flat(5, 5);
        let plan = plan_global(&cm, &center(&cm, 0, 0), &center(&cm, 4, 4)).unwrap();
        assert_eq!(plan.waypoints.len(), 5);
        assert_eq!(plan.exact_cost, PathCost { straight: 0, diagonal: 4 * 256 });
        assert!((plan.cost - 4.0 * SQRT_2 * 0.25).abs() < 1e-12);
    }

    #[test]
    fn start_equals_goal() {
        let cm = flat(5, 5);
        let p = center(&cm, 2, 3);
        let plan = plan_global(&cm, &p, &p).unwrap();
        assert_eq!(plan.waypoints.len(), 1);
        assert_eq!(plan.cost, 0.0);
    }

    #[test]
    fn lethal_endpoints_rejected() {
        let mut cm = flat(5, 5);
        cm.cost[cm.geometry.index(4, 4)] = LETHAL;
        assert_eq!(
            plan_global(&cm, &center(&cm, 0, 0), &center(&cm, 4, 4)),
            Err(PlanError::GoalLethal)
        );
        assert_eq!(
            plan_global(&cm, &center(&cm, 4, 4), &center(&cm, 0, 0)),
            Err(PlanError::StartLethal)
        );
    }

    #[test]
    fn walled_off_goal_has_no_path() {
        let mut cm = flat(5, 5);
        for j in 0..5 {
            cm.cost[cm.geometry.index(2, j)] = LETHAL;
        }
        assert_eq!(
            plan_global(&cm, &center(&cm, 0, 0), &center(&cm, 4, 4)),
            Err(PlanError::NoPath)
        );
    }

    #[test]
    fn exact_cost_ordering() {
        let a = PathCost { straight: 3, diagonal: 0 };
        let b = PathCost { straight: 0, diagonal: 2 }; // 2.83
        let c = PathCost { straight: 1, diagonal: 1 }; // 2.41
        assert!(a > b && b > c && a > c);
        assert_eq!(a.cmp(&a), Ordering::Equal);
        let d = PathCost { straight: 7, diagonal: 0 };
        let e = PathCost { straight: 0, diagonal: 5 }; // 7.07
        assert!(d < e);
    }
}
