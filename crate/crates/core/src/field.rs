//! Dense voxel-grid radiance field: density plus per-channel SH logits.
//!
//! Parameters are stored interleaved per voxel as
//! `[density_raw, ch0 coeffs.., ch1 coeffs.., ch2 coeffs..]`; voxels are
//! indexed x-fastest.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::io_util::{read_exact_or, LeReader, LeWriter};
use crate::scalar::{sigmoid, softplus, softplus_inverse, Real};
use crate::shmath::{check_degree, coeffs_per_channel, ShCoeffs, CHANNELS};
use crate::vec3::{Aabb, Vec3};

pub const GRID_MAGIC: &[u8; 6] = b"LFGRID";
pub const GRID_VERSION: u32 = 1;

/// Anything that can be sampled for density and SH logits at a point.
pub trait RadianceSource<T: Real>: Sync {
    fn l_max(&self) -> usize;

    fn bbox(&self) -> Aabb<T>;

    /// Writes the `3*(l_max+1)^2` coefficients at `p` into `coeffs` and
    /// returns the activated density. Outside the bbox the result is zero.
    fn sample(&self, p: Vec3<T>, coeffs: &mut [T]) -> T;

    fn density(&self, p: Vec3<T>) -> T {
        let mut scratch = [T::zero(); 75];
        self.sample(
            p,
            &mut scratch[..CHANNELS * coeffs_per_channel(self.l_max())],
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Interpolation {
    Constant,
    #[default]
    Trilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DensityActivation {
    #[default]
    Softplus,
    Relu,
}

impl DensityActivation {
    #[inline]
    pub fn apply<T: Real>(self, raw: T) -> T {
        match self {
            DensityActivation::Softplus => softplus(raw),
            DensityActivation::Relu => raw.max(T::zero()),
        }
    }

    #[inline]
    pub fn derivative<T: Real>(self, raw: T) -> T {
        match self {
            DensityActivation::Softplus => sigmoid(raw),
            DensityActivation::Relu => {
                if raw > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
        }
    }

    pub fn inverse<T: Real>(self, sigma: T) -> T {
        match self {
            DensityActivation::Softplus => softplus_inverse(sigma),
            DensityActivation::Relu => sigma,
        }
    }

    fn tag(self) -> u32 {
        match self {
            DensityActivation::Softplus => 0,
            DensityActivation::Relu => 1,
        }
    }

    fn from_tag(tag: u32) -> Option<Self> {
        match tag {
            0 => Some(DensityActivation::Softplus),
            1 => Some(DensityActivation::Relu),
            _ => None,
        }
    }
}

/// Initial density when none is requested.
pub const DEFAULT_INIT_SIGMA: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridInit {
    /// Density `0.1` after activation, SH logits zero.
    Zeros,
    /// Activated density `sigma` everywhere; the DC coefficient is chosen so
    /// the decoded pre-activation logit equals `logit` in every direction.
    Constant { sigma: f64, logit: f64 },
}

/// Eight-corner trilinear stencil.
#[derive(Debug, Clone, Copy)]
pub struct Stencil<T> {
    pub index: [usize; 8],
    pub weight: [T; 8],
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadianceFieldGrid<T> {
    resolution: [usize; 3],
    bbox: Aabb<T>,
    l_max: usize,
    activation: DensityActivation,
    params: Vec<T>,
}

impl<T: Real> RadianceFieldGrid<T> {
    pub fn new(
        resolution: [usize; 3],
        bbox: Aabb<T>,
        l_max: usize,
        init: GridInit,
    ) -> Result<Self> {
        Self::with_activation(resolution, bbox, l_max, init, DensityActivation::Softplus)
    }

    pub fn with_activation(
        resolution: [usize; 3],
        bbox: Aabb<T>,
        l_max: usize,
        init: GridInit,
        activation: DensityActivation,
    ) -> Result<Self> {
        check_degree(l_max)?;
        if resolution.iter().any(|&n| n == 0) {
            return Err(Error::InvalidConfig(format!(
                "grid resolution {resolution:?} has a zero axis"
            )));
        }
        if !bbox.has_positive_volume() {
            return Err(Error::DegenerateBox(format!("{bbox:?}")));
        }
        let (sigma, logit) = match init {
            GridInit::Zeros => (DEFAULT_INIT_SIGMA, 0.0),
            GridInit::Constant { sigma, logit } => (sigma, logit),
        };
        if sigma < 0.0 || (activation == DensityActivation::Softplus && sigma <= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "initial density {sigma} not reachable"
            )));
        }
        let k = coeffs_per_channel(l_max);
        let stride = 1 + CHANNELS * k;
        let voxels = resolution[0] * resolution[1] * resolution[2];
        let mut params = vec![T::zero(); voxels * stride];
        let raw = activation.inverse(T::lit(sigma));
        let dc = T::lit(logit) / T::lit(0.282_094_791_773_878_14);
        for voxel in params.chunks_exact_mut(stride) {
            voxel[0] = raw;
            for c in 0..CHANNELS {
                voxel[1 + c * k] = dc;
            }
        }
        Ok(Self {
            resolution,
            bbox,
            l_max,
            activation,
            params,
        })
    }

    #[inline]
    pub fn resolution(&self) -> [usize; 3] {
        self.resolution
    }

    #[inline]
    pub fn voxel_count(&self) -> usize {
        self.resolution.iter().product()
    }

    #[inline]
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    #[inline]
    pub fn bbox(&self) -> Aabb<T> {
        self.bbox
    }

    #[inline]
    pub fn density_activation(&self) -> DensityActivation {
        self.activation
    }

    /// Parameters per voxel: one density value plus `3*(l_max+1)^2` logits.
    #[inline]
    pub fn stride(&self) -> usize {
        1 + CHANNELS * coeffs_per_channel(self.l_max)
    }

    #[inline]
    pub fn params(&self) -> &[T] {
        &self.params
    }

    #[inline]
    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    #[inline]
    pub fn voxel_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.resolution[0] * (j + self.resolution[1] * k)
    }

    pub fn voxel(&self, index: usize) -> &[T] {
        let s = self.stride();
        &self.params[index * s..(index + 1) * s]
    }

    pub fn voxel_mut(&mut self, index: usize) -> &mut [T] {
        let s = self.stride();
        &mut self.params[index * s..(index + 1) * s]
    }

    /// Sets the activated density of one voxel.
    pub fn set_density(&mut self, index: usize, sigma: T) {
        let raw = self.activation.inverse(sigma);
        self.voxel_mut(index)[0] = raw;
    }

    pub fn activated_density(&self, index: usize) -> T {
        self.activation.apply(self.voxel(index)[0])
    }

    pub fn voxel_size(&self) -> Vec3<T> {
        let e = self.bbox.extent();
        Vec3::new(
            e.x / T::from_usize_lossy(self.resolution[0]),
            e.y / T::from_usize_lossy(self.resolution[1]),
            e.z / T::from_usize_lossy(self.resolution[2]),
        )
    }

    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vec3<T> {
        let h = self.voxel_size();
        let half = T::half();
        self.bbox.min
            + Vec3::new(
                (T::from_usize_lossy(i) + half) * h.x,
                (T::from_usize_lossy(j) + half) * h.y,
                (T::from_usize_lossy(k) + half) * h.z,
            )
    }

    /// Index of the voxel containing `p`, or `None` outside the bbox.
    pub fn containing_voxel(&self, p: Vec3<T>) -> Option<usize> {
        if !self.bbox.contains(p) {
            return None;
        }
        let e = self.bbox.extent();
        let mut idx = [0usize; 3];
        for a in 0..3 {
            let n = self.resolution[a];
            let u = (p[a] - self.bbox.min[a]) / e[a] * T::from_usize_lossy(n);
            idx[a] = u.floor().to_usize().unwrap_or(0).min(n - 1);
        }
        Some(self.voxel_index(idx[0], idx[1], idx[2]))
    }

    /// Trilinear stencil over voxel centers with clamp-to-edge, or `None`
    /// outside the bbox.
    pub fn stencil(&self, p: Vec3<T>) -> Option<Stencil<T>> {
        if !self.bbox.contains(p) {
            return None;
        }
        let e = self.bbox.extent();
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        let mut frac = [T::zero(); 3];
        for a in 0..3 {
            let n = self.resolution[a];
            let u = (p[a] - self.bbox.min[a]) / e[a] * T::from_usize_lossy(n) - T::half();
            let max_i = T::from_usize_lossy(n - 1);
            if u <= T::zero() {
                lo[a] = 0;
                hi[a] = 0;
            } else if u >= max_i {
                lo[a] = n - 1;
                hi[a] = n - 1;
            } else {
                let f = u.floor();
                lo[a] = f.to_usize().unwrap_or(0);
                hi[a] = lo[a] + 1;
                frac[a] = u - f;
            }
        }
        let mut index = [0usize; 8];
        let mut weight = [T::zero(); 8];
        for corner in 0..8 {
            let mut w = T::one();
            let mut ijk = [0usize; 3];
            for a in 0..3 {
                if corner >> a & 1 == 1 {
                    ijk[a] = hi[a];
                    w *= frac[a];
                } else {
                    ijk[a] = lo[a];
                    w *= T::one() - frac[a];
                }
            }
            index[corner] = self.voxel_index(ijk[0], ijk[1], ijk[2]);
            weight[corner] = w;
        }
        Some(Stencil { index, weight })
    }

    /// Density and coefficients at `p`.
    pub fn query(&self, p: Vec3<T>, interp: Interpolation) -> (T, ShCoeffs<T>) {
        let mut coeffs = ShCoeffs::zeros(self.l_max).expect("valid degree");
        let sigma = self.query_into(p, interp, coeffs.values_mut());
        (sigma, coeffs)
    }

    pub fn query_into(&self, p: Vec3<T>, interp: Interpolation, coeffs: &mut [T]) -> T {
        coeffs.iter_mut().for_each(|c| *c = T::zero());
        match interp {
            Interpolation::Constant => match self.containing_voxel(p) {
                Some(v) => {
                    let data = self.voxel(v);
                    coeffs.copy_from_slice(&data[1..]);
                    self.activation.apply(data[0])
                }
                None => T::zero(),
            },
            Interpolation::Trilinear => match self.stencil(p) {
                Some(st) => {
                    let mut sigma = T::zero();
                    for (&v, &w) in st.index.iter().zip(&st.weight) {
                        let data = self.voxel(v);
                        sigma += w * self.activation.apply(data[0]);
                        for (c, &d) in coeffs.iter_mut().zip(&data[1..]) {
                            *c += w * d;
                        }
                    }
                    sigma
                }
                None => T::zero(),
            },
        }
    }

    pub fn sampler(&self, interp: Interpolation) -> GridSampler<'_, T> {
        GridSampler { grid: self, interp }
    }

    pub fn cast<U: Real>(&self) -> RadianceFieldGrid<U> {
        RadianceFieldGrid {
            resolution: self.resolution,
            bbox: self.bbox.cast(),
            l_max: self.l_max,
            activation: self.activation,
            params: self
                .params
                .iter()
                .map(|v| U::lit(v.to_f64_lossy()))
                .collect(),
        }
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        let mut w = LeWriter::new(w);
        w.bytes(GRID_MAGIC)?;
        w.u32(GRID_VERSION)?;
        for &n in &self.resolution {
            w.u32(n as u32)?;
        }
        for v in self
            .bbox
            .min
            .to_array()
            .into_iter()
            .chain(self.bbox.max.to_array())
        {
            w.f32(v.to_f32_lossy())?;
        }
        w.u32(self.l_max as u32)?;
        w.u32(self.activation.tag())?;
        let stride = self.stride();
        for voxel in self.params.chunks_exact(stride) {
            w.f32(voxel[0].to_f32_lossy())?;
        }
        for voxel in self.params.chunks_exact(stride) {
            for &v in &voxel[1..] {
                w.f32(v.to_f32_lossy())?;
            }
        }
        Ok(())
    }

    pub fn read_from(r: &mut impl Read, path: &Path) -> Result<Self> {
        let mut magic = [0u8; 6];
        read_exact_or(r, &mut magic, path, "header")?;
        if &magic != GRID_MAGIC {
            return Err(Error::format(path, "not a grid file (bad magic)"));
        }
        let mut r = LeReader::new(r, path);
        let version = r.u32()?;
        if version != GRID_VERSION {
            return Err(Error::format(
                path,
                format!("unsupported grid version {version}"),
            ));
        }
        let resolution = [r.u32()? as usize, r.u32()? as usize, r.u32()? as usize];
        let mut b = [0f32; 6];
        for v in &mut b {
            *v = r.f32()?;
        }
        let bbox = Aabb::new(
            Vec3::lit(b[0] as f64, b[1] as f64, b[2] as f64),
            Vec3::lit(b[3] as f64, b[4] as f64, b[5] as f64),
        );
        let l_max = r.u32()? as usize;
        let activation = DensityActivation::from_tag(r.u32()?)
            .ok_or_else(|| Error::format(path, "unknown density activation"))?;
        check_degree(l_max).map_err(|e| Error::format(path, e.to_string()))?;
        if resolution.iter().any(|&n| n == 0) || !bbox.has_positive_volume() {
            return Err(Error::format(path, "degenerate grid header"));
        }
        let voxels = resolution
            .iter()
            .try_fold(1usize, |acc, &n| acc.checked_mul(n))
            .filter(|&n| n <= 1 << 31)
            .ok_or_else(|| Error::format(path, "grid too large"))?;
        let mut grid = Self::with_activation(resolution, bbox, l_max, GridInit::Zeros, activation)?;
        let stride = grid.stride();
        let mut density = vec![0f32; voxels];
        r.f32_slice(&mut density)?;
        let mut sh = vec![0f32; voxels * (stride - 1)];
        r.f32_slice(&mut sh)?;
        for (v, voxel) in grid.params.chunks_exact_mut(stride).enumerate() {
            voxel[0] = T::lit(density[v] as f64);
            for (dst, &src) in voxel[1..].iter_mut().zip(&sh[v * (stride - 1)..]) {
                *dst = T::lit(src as f64);
            }
        }
        Ok(grid)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path.as_ref())?;
        let mut w = std::io::BufWriter::new(file);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)?;
        Self::read_from(&mut std::io::BufReader::new(file), path)
    }
}

/// A grid bound to an interpolation mode.
#[derive(Debug, Clone, Copy)]
pub struct GridSampler<'a, T> {
    pub grid: &'a RadianceFieldGrid<T>,
    pub interp: Interpolation,
}

impl<T: Real> RadianceSource<T> for GridSampler<'_, T> {
    fn l_max(&self) -> usize {
        self.grid.l_max
    }

    fn bbox(&self) -> Aabb<T> {
        self.grid.bbox
    }

    fn sample(&self, p: Vec3<T>, coeffs: &mut [T]) -> T {
        self.grid.query_into(p, self.interp, coeffs)
    }
}
