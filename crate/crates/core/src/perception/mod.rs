//! Occupancy-grid mapping from known poses, ternary classification,
//! Monte-Carlo localization and the raster/sidecar map files.

mod mapio;
mod mapping;
mod mcl;

pub use mapio::{load_map, load_map_checked, save_map, MapIoError, MapMetadata};
pub use mapping::{
    classify, MappingConfig, MappingError, Occupancy, OccupancyGridMap, TernaryGrid,
};
pub use mcl::{Mcl, MclConfig, MclError, Particle, ParticleSet, PoseEstimate};
