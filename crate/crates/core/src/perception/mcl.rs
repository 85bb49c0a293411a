use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mapping::{Occupancy, TernaryGrid};
use crate::geometry::normalize_angle;
use crate::grid::{squared_distance_transform, GridGeometry};
use crate::world::LaserScan;
use crate::Pose2D;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MclConfig {
    pub particles: usize,
    /// Per-tick translational noise (m), applied to each body-frame axis.
    pub sigma_trans: f64,
    /// Per-tick rotational noise (rad).
    pub sigma_rot: f64,
    /// Spread of the endpoint likelihood around the nearest obstacle (m).
    pub sigma_hit: f64,
    pub z_hit: f64,
    pub z_rand: f64,
    /// Use every `beam_stride`-th beam of a scan.
    pub beam_stride: usize,
    /// Distances beyond this are treated as equally unlikely (m).
    pub field_cap: f64,
}

impl Default for MclConfig {
    fn default() -> Self {
        Self {
            particles: 500,
            sigma_trans: 0.02,
            sigma_rot: 0.01,
            sigma_hit: 0.15,
            z_hit: 0.9,
            z_rand: 0.1,
            beam_stride: 10,
            field_cap: 2.0,
        }
    }
}

impl MclConfig {
    pub fn noiseless(self) -> Self {
        Self {
            sigma_trans: 0.0,
            sigma_rot: 0.0,
            ..self
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MclError {
    #[error("every particle has zero weight; the scan does not fit the map (particles re-scattered)")]
    AllWeightsZero,
    #[error("the particle set is empty")]
    EmptyParticleSet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Particle {
    pub pose: Pose2D,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleSet {
    pub particles: Vec<Particle>,
    pub rng_seed: u64,
}

impl ParticleSet {
    pub fn weight_sum(&self) -> f64 {
        self.particles.iter().map(|p| p.weight).sum()
    }

    pub fn effective_sample_size(&self) -> f64 {
        1.0 / self.particles.iter().map(|p| p.weight * p.weight).sum::<f64>()
    }

    /// Weighted mean position, circular mean heading and sample covariance
    /// (heading residuals wrapped).
    pub fn estimate(&self, stamp: f64) -> PoseEstimate {
        let total = self.weight_sum();
        let (mut mx, mut my, mut ms, mut mc) = (0.0, 0.0, 0.0, 0.0);
        for p in &self.particles {
            let w = p.weight / total;
            mx += w * p.pose.x;
            my += w * p.pose.y;
            let (s, c) = p.pose.theta.sin_cos();
            ms += w * s;
            mc += w * c;
        }
        let mean = Pose2D::new(mx, my, ms.atan2(mc));
        let mut cov = [[0.0; 3]; 3];
        for p in &self.particles {
            let w = p.weight / total;
            let v = [
                p.pose.x - mean.x,
                p.pose.y - mean.y,
                normalize_angle(p.pose.theta - mean.theta),
            ];
            for (r, row) in cov.iter_mut().enumerate() {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell += w * v[r] * v[c];
                }
            }
        }
        PoseEstimate {
            mean,
            covariance: cov,
            stamp,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub mean: Pose2D,
    pub covariance: [[f64; 3]; 3],
    pub stamp: f64,
}

impl PoseEstimate {
    pub fn exact(mean: Pose2D, stamp: f64) -> Self {
        Self {
            mean,
            covariance: [[0.0; 3]; 3],
            stamp,
        }
    }
}

/// Per-cell endpoint log-likelihood, cached against the map it came from.
struct LikelihoodField {
    source: Vec<Occupancy>,
    geometry: GridGeometry,
    range_max: f64,
    log_p: Vec<f64>,
    log_p_far: f64,
    inv_res: f64,
}

impl LikelihoodField {
    fn build(map: &TernaryGrid, range_max: f64, cfg: &MclConfig) -> Self {
        let g = map.geometry;
        let sq = squared_distance_transform(g.width, g.height, |k| {
            map.cells[k] == Occupancy::Occupied
        });
        let rand_term = cfg.z_rand / range_max;
        let log_p_of = |d: f64| {
            let d = d.min(cfg.field_cap);
            (cfg.z_hit * (-d * d / (2.0 * cfg.sigma_hit * cfg.sigma_hit)).exp() + rand_term).ln()
        };
        // Distances run from cell centers to the nearest occupied cell face.
        let log_p = sq
            .iter()
            .map(|&s| {
                let d = if s == 0.0 {
                    0.0
                } else {
                    (s.sqrt() * g.resolution - 0.5 * g.resolution).max(0.0)
                };
                log_p_of(d)
            })
            .collect();
        Self {
            source: map.cells.clone(),
            geometry: g,
            range_max,
            log_p,
            log_p_far: log_p_of(f64::INFINITY),
            inv_res: 1.0 / g.resolution,
        }
    }

    fn matches(&self, map: &TernaryGrid, range_max: f64) -> bool {
        self.range_max == range_max && self.geometry == map.geometry && self.source == map.cells
    }

    #[inline]
    fn at(&self, x: f64, y: f64) -> f64 {
        let g = &self.geometry;
        let fi = (x - g.origin.x) * self.inv_res;
        let fj = (y - g.origin.y) * self.inv_res;
        if !(fi >= 0.0 && fj >= 0.0) {
            return self.log_p_far;
        }
        let (i, j) = (fi as usize, fj as usize);
        if i < g.width && j < g.height {
            self.log_p[j * g.width + i]
        } else {
            self.log_p_far
        }
    }
}

/// Monte-Carlo localizer with a likelihood-field sensor model and
/// low-variance resampling.
pub struct Mcl {
    config: MclConfig,
    set: ParticleSet,
    rng: ChaCha8Rng,
    field: Option<LikelihoodField>,
}

impl Mcl {
    /// Every particle at `pose`.
    pub fn at_pose(config: MclConfig, seed: u64, pose: Pose2D) -> Self {
        let n = config.particles.max(1);
        let particles = vec![
            Particle {
                pose,
                weight: 1.0 / n as f64
            };
            n
        ];
        Self::from_particles(config, seed, particles)
    }

    /// Gaussian cloud around `center`.
    pub fn around(config: MclConfig, seed: u64, center: Pose2D, sigma_xy: f64, sigma_theta: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = config.particles.max(1);
        let pos = Normal::new(0.0, sigma_xy).expect("finite sigma");
        let rot = Normal::new(0.0, sigma_theta).expect("finite sigma");
        let particles = (0..n)
            .map(|_| Particle {
                pose: Pose2D::new(
                    center.x + pos.sample(&mut rng),
                    center.y + pos.sample(&mut rng),
                    center.theta + rot.sample(&mut rng),
                ),
                weight: 1.0 / n as f64,
            })
            .collect();
        Self {
            config,
            set: ParticleSet {
                particles,
                rng_seed: seed,
            },
            rng,
            field: None,
        }
    }

    /// Uniform over the free cells of `map` with uniform headings.
    pub fn uniform(config: MclConfig, seed: u64, map: &TernaryGrid) -> Self {
        let mut mcl = Self::from_particles(config, seed, Vec::new());
        mcl.scatter(map);
        mcl
    }

    pub fn from_particles(config: MclConfig, seed: u64, particles: Vec<Particle>) -> Self {
        Self {
            config,
            set: ParticleSet {
                particles,
                rng_seed: seed,
            },
            rng: ChaCha8Rng::seed_from_u64(seed),
            field: None,
        }
    }

    pub fn config(&self) -> &MclConfig {
        &self.config
    }

    pub fn particles(&self) -> &ParticleSet {
        &self.set
    }

    pub fn estimate(&self, stamp: f64) -> PoseEstimate {
        self.set.estimate(stamp)
    }

    fn scatter(&mut self, map: &TernaryGrid) {
        let free: Vec<usize> = map
            .cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c == Occupancy::Free)
            .map(|(k, _)| k)
            .collect();
        if free.is_empty() {
            return;
        }
        let n = self.config.particles.max(1);
        let g = map.geometry;
        let w = 1.0 / n as f64;
        self.set.particles = (0..n)
            .map(|_| {
                let (i, j) = g.coords(free[self.rng.random_range(0..free.len())]);
                let x = g.origin.x + (i as f64 + self.rng.random::<f64>()) * g.resolution;
                let y = g.origin.y + (j as f64 + self.rng.random::<f64>()) * g.resolution;
                let theta = self.rng.random_range(-std::f64::consts::PI..std::f64::consts::PI);
                Particle {
                    pose: Pose2D::new(x, y, theta),
                    weight: w,
                }
            })
            .collect();
    }

    /// One predict/update/resample cycle.
    ///
    /// `odom_delta` is the body-frame motion since the previous step. On
    /// [`MclError::AllWeightsZero`] the set has already been re-scattered
    /// uniformly over the free space of `map`.
    pub fn step(
        &mut self,
        odom_delta: &Pose2D,
        scan: &LaserScan,
        map: &TernaryGrid,
    ) -> Result<PoseEstimate, MclError> {
        if self.set.particles.is_empty() {
            return Err(MclError::EmptyParticleSet);
        }
        self.predict(odom_delta);

        if !self
            .field
            .as_ref()
            .is_some_and(|f| f.matches(map, scan.range_max))
        {
            self.field = Some(LikelihoodField::build(map, scan.range_max, &self.config));
        }
        let field = self.field.as_ref().expect("field built above");

        let nudge = 0.01 * map.geometry.resolution;
        let beams: Vec<(f64, f64)> = scan
            .beams()
            .step_by(self.config.beam_stride.max(1))
            .filter(|&(_, r)| !scan.is_max_range(r))
            .map(|(a, r)| {
                let (sa, ca) = a.sin_cos();
                ((r + nudge) * ca, (r + nudge) * sa)
            })
            .collect();

        let log_w: Vec<f64> = self
            .set
            .particles
            .iter()
            .map(|p| {
                match map.at_world(p.pose.x, p.pose.y) {
                    None | Some(Occupancy::Occupied) => return f64::NEG_INFINITY,
                    _ => {}
                }
                let (s, c) = p.pose.theta.sin_cos();
                beams
                    .iter()
                    .map(|&(bx, by)| field.at(p.pose.x + c * bx - s * by, p.pose.y + s * bx + c * by))
                    .sum()
            })
            .collect();

        let best = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            self.scatter(map);
            return Err(MclError::AllWeightsZero);
        }
        for (p, lw) in self.set.particles.iter_mut().zip(&log_w) {
            p.weight *= (lw - best).exp();
        }
        let total = self.set.weight_sum();
        if !(total > 0.0) || !total.is_finite() {
            self.scatter(map);
            return Err(MclError::AllWeightsZero);
        }
        for p in &mut self.set.particles {
            p.weight /= total;
        }
        let n = self.set.particles.len() as f64;
        if self.set.effective_sample_size() < n / 2.0 {
            self.resample();
        }
        Ok(self.set.estimate(scan.stamp))
    }

    fn predict(&mut self, delta: &Pose2D) {
        let (st, sr) = (self.config.sigma_trans, self.config.sigma_rot);
        if st == 0.0 && sr == 0.0 {
            for p in &mut self.set.particles {
                p.pose = p.pose.compose(delta);
            }
            return;
        }
        let trans = Normal::new(0.0, st).expect("finite sigma");
        let rot = Normal::new(0.0, sr).expect("finite sigma");
        for p in &mut self.set.particles {
            let noisy = Pose2D {
                x: delta.x + trans.sample(&mut self.rng),
                y: delta.y + trans.sample(&mut self.rng),
                theta: delta.theta + rot.sample(&mut self.rng),
            };
            p.pose = p.pose.compose(&noisy);
        }
    }

    /// Low-variance (systematic) resampling; leaves uniform weights.
    fn resample(&mut self) {
        let particles = &self.set.particles;
        let n = particles.len();
        let step = 1.0 / n as f64;
        let start = self.rng.random::<f64>() * step;
        let mut out = Vec::with_capacity(n);
        let mut i = 0;
        let mut cumulative = particles[0].weight;
        for m in 0..n {
            let u = start + m as f64 * step;
            while u > cumulative && i + 1 < n {
                i += 1;
                cumulative += particles[i].weight;
            }
            out.push(Particle {
                pose: particles[i].pose,
                weight: step,
            });
        }
        self.set.particles = out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{cast_scan, load_maze, LidarConfig};

    fn small_world() -> crate::world::GridWorld {
        load_maze(
            "##########\n\
             #........#\n\
             #..##....#\n\
             #S.......#\n\
             ##########\n",
        )
        .unwrap()
    }

    #[test]
    fn noiseless_truth_is_a_fixed_point() {
        let w = small_world();
        let map = TernaryGrid::from_world(&w);
        let cfg = MclConfig {
            particles: 50,
            ..MclConfig::default()
        }
        .noiseless();
        let mut mcl = Mcl::at_pose(cfg, 3, w.start_pose);
        let next = Pose2D::new(w.start_pose.x + 0.3, w.start_pose.y + 0.05, 0.2);
        let scan = cast_scan(&w, &next, &LidarConfig::default());
        let est = mcl.step(&w.start_pose.between(&next), &scan, &map).unwrap();
        assert!(est.mean.distance_to(&next) < 1e-9);
        assert!((est.mean.theta - next.theta).abs() < 1e-9);
    }

    #[test]
    fn resampling_leaves_uniform_weights() {
        let w = small_world();
        let map = TernaryGrid::from_world(&w);
        let cfg = MclConfig {
            particles: 200,
            ..MclConfig::default()
        };
        let mut mcl = Mcl::around(cfg, 5, w.start_pose, 0.3, 0.3);
        let scan = cast_scan(&w, &w.start_pose, &LidarConfig::default());
        let zero = Pose2D::default();
        mcl.step(&zero, &scan, &map).unwrap();
        mcl.resample();
        let n = mcl.particles().particles.len() as f64;
        assert!(mcl
            .particles()
            .particles
            .iter()
            .all(|p| (p.weight - 1.0 / n).abs() < 1e-15));
    }

    #[test]
    fn all_zero_weights_rescatter_over_free_space() {
        let w = small_world();
        let map = TernaryGrid::from_world(&w);
        let cfg = MclConfig {
            particles: 30,
            ..MclConfig::default()
        }
        .noiseless();
        // Every particle sits inside a wall cell.
        let wall = Pose2D::new(0.125, 0.125, 0.0);
        let mut mcl = Mcl::at_pose(cfg, 1, wall);
        let scan = cast_scan(&w, &w.start_pose, &LidarConfig::default());
        assert_eq!(
            mcl.step(&Pose2D::default(), &scan, &map),
            Err(MclError::AllWeightsZero)
        );
        assert!(mcl
            .particles()
            .particles
            .iter()
            .all(|p| map.at_world(p.pose.x, p.pose.y) == Some(Occupancy::Free)));
        assert!((mcl.particles().weight_sum() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_is_positive_semidefinite() {
        let w = small_world();
        let mcl = Mcl::around(MclConfig::default(), 9, w.start_pose, 0.2, 0.5);
        let c = mcl.estimate(0.0).covariance;
        // Sylvester on the leading minors plus symmetry (PSD up to rounding).
        assert!(c[0][0] >= 0.0 && c[1][1] >= 0.0 && c[2][2] >= 0.0);
        assert!(c[0][0] * c[1][1] - c[0][1] * c[1][0] >= -1e-12);
        for r in 0..3 {
            for k in 0..3 {
                assert!((c[r][k] - c[k][r]).abs() < 1e-15);
            }
        }
    }
}
