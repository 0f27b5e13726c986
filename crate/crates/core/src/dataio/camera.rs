use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raymarch::Ray;
use crate::vec3::Vec3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum CameraKind {
    /// Parallel projection; `width` is the horizontal extent of the image
    /// plane in world units.
    Orthographic { width: f64 },
    /// Pinhole with focal length and horizontal sensor width, both in mm.
    Perspective { focal: f64, sensor: f64 },
}

/// Camera-to-world frame: columns are right, up and back; the camera looks
/// along `-back`.
pub type Rotation = [[f64; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub kind: CameraKind,
    pub position: Vec3<f64>,
    pub rotation: Rotation,
    /// `(width, height)` in pixels.
    pub resolution: (usize, usize),
}

fn column(r: &Rotation, c: usize) -> Vec3<f64> {
    Vec3::new(r[0][c], r[1][c], r[2][c])
}

fn from_columns(a: Vec3<f64>, b: Vec3<f64>, c: Vec3<f64>) -> Rotation {
    [[a.x, b.x, c.x], [a.y, b.y, c.y], [a.z, b.z, c.z]]
}

/// Right-handed frame looking from `position` at `target`. Falls back to the
/// `(0,1,0)` up vector when the view is parallel to `up`.
pub fn look_at(position: Vec3<f64>, target: Vec3<f64>, up: Vec3<f64>) -> Result<Rotation> {
    let view = target - position;
    let len = view.length();
    if !(len > 0.0) || !len.is_finite() {
        return Err(Error::InvalidConfig(
            "camera position coincides with its target".into(),
        ));
    }
    let view = view / len;
    let mut up = up.normalized();
    if view.cross(up).length() < 1e-6 {
        up = Vec3::lit(0.0, 1.0, 0.0);
        if view.cross(up).length() < 1e-6 {
            up = Vec3::lit(1.0, 0.0, 0.0);
        }
    }
    let right = view.cross(up).normalized();
    let true_up = right.cross(view);
    Ok(from_columns(right, true_up, -view))
}

impl CameraPose {
    pub fn looking_at_origin(
        kind: CameraKind,
        position: Vec3<f64>,
        resolution: (usize, usize),
    ) -> Result<Self> {
        let rotation = look_at(position, Vec3::zero(), Vec3::lit(0.0, 0.0, 1.0))?;
        let pose = Self {
            kind,
            position,
            rotation,
            resolution,
        };
        pose.validate()?;
        Ok(pose)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution.0 == 0 || self.resolution.1 == 0 {
            return Err(Error::InvalidConfig(
                "camera resolution must be positive".into(),
            ));
        }
        match self.kind {
            CameraKind::Orthographic { width } if !(width > 0.0) => {
                return Err(Error::InvalidConfig(
                    "orthographic width must be positive".into(),
                ))
            }
            CameraKind::Perspective { focal, sensor } if !(focal > 0.0 && sensor > 0.0) => {
                return Err(Error::InvalidConfig(
                    "focal length and sensor size must be positive".into(),
                ))
            }
            _ => {}
        }
        let r = &self.rotation;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| r[i][k] * r[j][k]).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                if (dot - expect).abs() > 1e-9 {
                    return Err(Error::InvalidConfig(
                        "camera rotation is not orthonormal".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn right(&self) -> Vec3<f64> {
        column(&self.rotation, 0)
    }

    pub fn up(&self) -> Vec3<f64> {
        column(&self.rotation, 1)
    }

    pub fn view(&self) -> Vec3<f64> {
        -column(&self.rotation, 2)
    }

    /// Row-major 4x4 camera-to-world matrix.
    pub fn to_matrix(&self) -> [[f64; 4]; 4] {
        let r = &self.rotation;
        let p = self.position;
        [
            [r[0][0], r[0][1], r[0][2], p.x],
            [r[1][0], r[1][1], r[1][2], p.y],
            [r[2][0], r[2][1], r[2][2], p.z],
            [0.0, 0.0, 0.0, 1.0],
        ]
    }

    pub fn from_matrix(
        m: &[[f64; 4]; 4],
        kind: CameraKind,
        resolution: (usize, usize),
    ) -> Result<Self> {
        let pose = Self {
            kind,
            position: Vec3::new(m[0][3], m[1][3], m[2][3]),
            rotation: [
                [m[0][0], m[0][1], m[0][2]],
                [m[1][0], m[1][1], m[1][2]],
                [m[2][0], m[2][1], m[2][2]],
            ],
            resolution,
        };
        pose.validate()?;
        Ok(pose)
    }

    /// Ray through the point `(sx, sy)` of pixel space, where pixel `(i, j)`
    /// covers `[i, i+1] x [j, j+1]` and row 0 is the top. Unbounded segment.
    pub fn ray_at(&self, sx: f64, sy: f64) -> Ray<f64> {
        let (w, h) = (self.resolution.0 as f64, self.resolution.1 as f64);
        let u = sx / w - 0.5;
        let v = 0.5 - sy / h;
        let (right, up, view) = (self.right(), self.up(), self.view());
        match self.kind {
            CameraKind::Orthographic { width } => {
                let height = width * h / w;
                let origin = self.position + right * (u * width) + up * (v * height);
                Ray::infinite(origin, view)
            }
            CameraKind::Perspective { focal, sensor } => {
                let sensor_h = sensor * h / w;
                let d = view * focal + right * (u * sensor) + up * (v * sensor_h);
                Ray::infinite(self.position, d.normalized())
            }
        }
    }

    /// One ray per pixel center, row-major from the top row.
    pub fn generate_rays(&self) -> Vec<Ray<f64>> {
        let (w, h) = self.resolution;
        let mut rays = Vec::with_capacity(w * h);
        for j in 0..h {
            for i in 0..w {
                rays.push(self.ray_at(i as f64 + 0.5, j as f64 + 0.5));
            }
        }
        rays
    }
}

/// Radical inverse of `index` in `base`.
pub fn halton(mut index: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    let inv = 1.0 / base as f64;
    while index > 0 {
        f *= inv;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

/// `n` camera positions on a sphere from the base-(2,3) Halton sequence
/// (starting at index 1), warped with the equal-area map
/// `phi = 2 pi u`, `z = 2 v - 1`.
pub fn halton_sphere_cameras(n: usize, radius: f64) -> Vec<Vec3<f64>> {
    (1..=n as u64)
        .map(|i| {
            let (u, v) = (halton(i, 2), halton(i, 3));
            let phi = std::f64::consts::TAU * u;
            let z = 2.0 * v - 1.0;
            let r = (1.0 - z * z).max(0.0).sqrt();
            Vec3::new(r * phi.cos(), r * phi.sin(), z) * radius
        })
        .collect()
}
