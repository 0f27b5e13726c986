//! Radiance fields for HDR luminaires: SH voxel grids, their training,
//! plenoctree baking, and path tracing of scenes that contain them.

pub mod dataio;
pub mod error;
pub mod field;
mod io_util;
pub mod pipeline;
pub mod plenoctree;
pub mod raymarch;
pub mod renderer;
pub mod scalar;
pub mod shmath;
pub mod toy;
pub mod training;
pub mod vec3;

pub use error::{Error, Result};
pub use scalar::Real;
pub use vec3::{Aabb, Vec3};

pub type Vec3f = Vec3<f32>;
pub type Vec3d = Vec3<f64>;
pub type GridF32 = field::RadianceFieldGrid<f32>;
pub type GridF64 = field::RadianceFieldGrid<f64>;
pub type OctreeF32 = plenoctree::Plenoctree<f32>;
pub type OctreeF64 = plenoctree::Plenoctree<f64>;
