//! Scripted coverage tour used to exercise mapping and localization with
//! known poses.

use std::f64::consts::TAU;

use crate::grid::squared_distance_transform;
use crate::navigator::{build_costmap_with, plan_global, InflationConfig};
use crate::perception::TernaryGrid;
use crate::world::{Cell, GridWorld};
use crate::Pose2D;

/// Open cells with at least `clearance` to any wall, thinned so that no two
/// are closer than `spacing` (first come in row-major order).
pub fn viewpoints(world: &GridWorld, clearance: f64, spacing: f64) -> Vec<(usize, usize)> {
    let g = &world.geometry;
    let walls: Vec<bool> = world.cells.iter().map(|c| *c == Cell::Wall).collect();
    let d2 = squared_distance_transform(g.width, g.height, |k| walls[k]);
    let min = clearance / g.resolution;
    let mut picked: Vec<(usize, usize)> = Vec::new();
    for k in 0..g.len() {
        if walls[k] || d2[k] < min * min {
            continue;
        }
        let (i, j) = g.coords(k);
        let (x, y) = g.cell_center(i, j);
        let far = picked.iter().all(|&(pi, pj)| {
            let (px, py) = g.cell_center(pi, pj);
            (px - x).hypot(py - y) >= spacing
        });
        if far {
            picked.push((i, j));
        }
    }
    picked
}

/// Dense pose sequence from the start pose through every viewpoint
/// (greedy nearest by planned length), advancing at most `step` meters or
/// `turn` radians per pose and sweeping a full turn at each viewpoint.
pub fn coverage_tour(world: &GridWorld, step: f64, turn: f64) -> Vec<Pose2D> {
    let costmap = build_costmap_with(&TernaryGrid::from_world(world), &InflationConfig::for_radius(world.robot_radius));
    let g = &world.geometry;
    let mut remaining: Vec<Pose2D> = viewpoints(world, 2.5 * world.robot_radius, 1.0)
        .into_iter()
        .map(|(i, j)| {
            let (x, y) = g.cell_center(i, j);
            Pose2D::new(x, y, 0.0)
        })
        .collect();
    let mut poses = vec![world.start_pose];
    sweep(&mut poses, turn);
    while !remaining.is_empty() {
        let here = *poses.last().expect("tour starts at the start pose");
        let best = remaining
            .iter()
            .enumerate()
            .filter_map(|(k, v)| plan_global(&costmap, &here, v).ok().map(|p| (p.cost, k, p)))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let Some((_, k, plan)) = best else {
            break;
        };
        remaining.swap_remove(k);
        for w in plan.waypoints.iter().skip(1) {
            travel(&mut poses, w.x, w.y, step, turn);
        }
        sweep(&mut poses, turn);
    }
    poses
}

fn rotate_to(poses: &mut Vec<Pose2D>, heading: f64, turn: f64) {
    let here = *poses.last().expect("non-empty tour");
    let delta = crate::geometry::normalize_angle(heading - here.theta);
    let n = (delta.abs() / turn).ceil() as usize;
    for s in 1..=n {
        poses.push(Pose2D::new(here.x, here.y, here.theta + delta * s as f64 / n as f64));
    }
}

fn travel(poses: &mut Vec<Pose2D>, x: f64, y: f64, step: f64, turn: f64) {
    let here = *poses.last().expect("non-empty tour");
    let len = (x - here.x).hypot(y - here.y);
    if len < 1e-12 {
        return;
    }
    rotate_to(poses, (y - here.y).atan2(x - here.x), turn);
    let here = *poses.last().expect("non-empty tour");
    let n = (len / step).ceil() as usize;
    for s in 1..=n {
        let f = s as f64 / n as f64;
        poses.push(Pose2D::new(here.x + (x - here.x) * f, here.y + (y - here.y) * f, here.theta));
    }
}

fn sweep(poses: &mut Vec<Pose2D>, turn: f64) {
    let here = *poses.last().expect("non-empty tour");
    let n = (TAU / turn).ceil() as usize;
    for s in 1..=n {
        poses.push(Pose2D::new(here.x, here.y, here.theta + TAU * s as f64 / n as f64));
    }
}
