//! Cameras, datasets on disk, float images and image metrics.

mod camera;
mod dataset;
mod image;

pub use camera::{halton, halton_sphere_cameras, look_at, CameraKind, CameraPose, Rotation};
pub use dataset::{read_pose, write_pose, Dataset, Manifest, Split, View};
pub use image::{psnr, rmse, ssim, Image};
