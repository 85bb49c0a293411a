use super::kinematics::{step_kinematics, VelocityCommand};
use super::maze::GridWorld;
use crate::Pose2D;

/// True when a disc of radius `r` centered at `(x, y)` has positive-area
/// overlap with a wall cell (touching an edge does not count).
pub fn disc_overlaps_wall(world: &GridWorld, x: f64, y: f64, r: f64) -> bool {
    let g = &world.geometry;
    let res = g.resolution;
    let lx = x - g.origin.x;
    let ly = y - g.origin.y;
    let i0 = ((lx - r) / res).floor() as i64;
    let i1 = ((lx + r) / res).floor() as i64;
    let j0 = ((ly - r) / res).floor() as i64;
    let j1 = ((ly + r) / res).floor() as i64;
    for j in j0..=j1 {
        for i in i0..=i1 {
            if !world.is_wall(i, j) {
                continue;
            }
            let (cx0, cy0) = (i as f64 * res, j as f64 * res);
            let nx = lx.clamp(cx0, cx0 + res);
            let ny = ly.clamp(cy0, cy0 + res);
            if (lx - nx).hypot(ly - ny) < r {
                return true;
            }
        }
    }
    false
}

/// Kinematic step with collision response: if the robot disc would touch a
/// wall anywhere along the swept arc, the translation is rejected and only
/// the heading change is applied.
pub fn advance(world: &GridWorld, pose: Pose2D, cmd: &VelocityCommand<f64>, dt: f64) -> Pose2D {
    let target = step_kinematics(pose, cmd, dt);
    let travel = cmd.linear.abs() * dt;
    let spacing = world.resolution() / 4.0;
    let samples = ((travel / spacing).ceil() as usize).max(1);
    let r = world.robot_radius;
    let blocked = (1..=samples).any(|k| {
        let p = if k == samples {
            target
        } else {
            step_kinematics(pose, cmd, dt * k as f64 / samples as f64)
        };
        disc_overlaps_wall(world, p.x, p.y, r)
    });
    if blocked {
        Pose2D {
            theta: target.theta,
            ..pose
        }
    } else {
        target
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::load_maze;
    use crate::Driver;

    fn room() -> GridWorld {
        let mut text = String::new();
        for row in 0..12 {
            for col in 0..12 {
                let edge = row == 0 || row == 11 || col == 0 || col == 11;
                text.push(if edge { '#' } else if row == 6 && col == 5 { 'S' } else { '.' });
            }
            text.push('\n');
        }
        load_maze(&text).unwrap()
    }

    #[test]
    fn free_space_matches_kinematics() {
        let w = room();
        let cmd = VelocityCommand::new(0.5, 0.3, Driver::Machine, 0.0);
        let p = w.start_pose;
        assert_eq!(advance(&w, p, &cmd, 0.1), step_kinematics(p, &cmd, 0.1));
    }

    #[test]
    fn blocked_translation_keeps_rotation() {
        let w = room();
        // Inner face of the east wall is at x = 11 * 0.25 = 2.75.
        let p = Pose2D::new(2.75 - 0.3 - 0.1, 1.5, 0.0);
        assert!(!disc_overlaps_wall(&w, p.x, p.y, w.robot_radius));
        let cmd = VelocityCommand::new(1.0, 0.5, Driver::Machine, 0.0);
        let out = advance(&w, p, &cmd, 1.0);
        assert_eq!((out.x, out.y), (p.x, p.y));
        assert!((out.theta - 0.5).abs() < 1e-12);
    }
}
