//! Emission/transmittance quadrature along rays, proxy intersection and
//! inverse-CDF sample placement.
//!
//! Emission is decoded toward the ray origin, i.e. at `-ray.dir`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RadianceSource;
use crate::scalar::Real;
use crate::shmath::{
    coeffs_per_channel, decode_with_basis, sh_basis_into, ActivationKind, CHANNELS,
};
use crate::vec3::{Aabb, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray<T> {
    pub origin: Vec3<T>,
    pub dir: Vec3<T>,
    pub t_near: T,
    pub t_far: T,
}

impl<T: Real> Ray<T> {
    /// Checked constructor: `0 <= t_near <= t_far` and `|dir| = 1` within 1e-9
    /// (1e-6 for `f32`).
    pub fn new(origin: Vec3<T>, dir: Vec3<T>, t_near: T, t_far: T) -> Result<Self> {
        let tol = if std::mem::size_of::<T>() == 4 {
            1e-6
        } else {
            1e-9
        };
        let len = dir.length().to_f64_lossy();
        if (len - 1.0).abs() > tol {
            return Err(Error::NonUnitDirection(len));
        }
        if !(t_near >= T::zero() && t_near <= t_far) {
            return Err(Error::InvalidConfig(format!(
                "ray segment [{t_near}, {t_far}] is not ordered and non-negative"
            )));
        }
        Ok(Self::new_unchecked(origin, dir, t_near, t_far))
    }

    #[inline]
    pub fn new_unchecked(origin: Vec3<T>, dir: Vec3<T>, t_near: T, t_far: T) -> Self {
        Self {
            origin,
            dir,
            t_near,
            t_far,
        }
    }

    /// Unbounded ray starting at `origin`.
    pub fn infinite(origin: Vec3<T>, dir: Vec3<T>) -> Self {
        Self::new_unchecked(origin, dir, T::zero(), T::infinity())
    }

    #[inline]
    pub fn at(&self, t: T) -> Vec3<T> {
        self.origin + self.dir * t
    }

    /// The same ray with its segment narrowed to the overlap with `proxy`.
    pub fn clipped_to(&self, proxy: &Proxy<T>) -> Option<Self> {
        let (a, b) = intersect_proxy(self, proxy)?;
        let t0 = a.max(self.t_near);
        let t1 = b.min(self.t_far);
        (t1 > t0).then(|| Self::new_unchecked(self.origin, self.dir, t0, t1))
    }

    pub fn cast<U: Real>(&self) -> Ray<U> {
        Ray::new_unchecked(
            self.origin.cast(),
            self.dir.cast(),
            U::lit(self.t_near.to_f64_lossy()),
            U::lit(self.t_far.to_f64_lossy()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransmittanceModel {
    /// `T(t) = max(0, 1 - integral of sigma)`.
    #[default]
    Linear,
    /// Beer-Lambert `T(t) = exp(-integral of sigma)`.
    Exponential,
}

/// Bounding shape enclosing a luminaire.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Proxy<T> {
    Sphere { center: Vec3<T>, radius: T },
    Box { min: Vec3<T>, max: Vec3<T> },
}

impl<T: Real> Proxy<T> {
    pub fn surface_area(&self) -> T {
        match *self {
            Proxy::Sphere { radius, .. } => T::lit(4.0) * T::PI() * radius * radius,
            Proxy::Box { min, max } => Aabb::new(min, max).surface_area(),
        }
    }

    pub fn bounds(&self) -> Aabb<T> {
        match *self {
            Proxy::Sphere { center, radius } => {
                Aabb::new(center - Vec3::splat(radius), center + Vec3::splat(radius))
            }
            Proxy::Box { min, max } => Aabb::new(min, max),
        }
    }

    pub fn cast<U: Real>(&self) -> Proxy<U> {
        match *self {
            Proxy::Sphere { center, radius } => Proxy::Sphere {
                center: center.cast(),
                radius: U::lit(radius.to_f64_lossy()),
            },
            Proxy::Box { min, max } => Proxy::Box {
                min: min.cast(),
                max: max.cast(),
            },
        }
    }
}

/// Entry and exit parameters of `ray` (ignoring its segment) against the
/// proxy, clipped to `t >= 0`. Tangent and grazing hits count as misses.
pub fn intersect_proxy<T: Real>(ray: &Ray<T>, proxy: &Proxy<T>) -> Option<(T, T)> {
    let (t0, t1) = match *proxy {
        Proxy::Sphere { center, radius } => {
            let oc = ray.origin - center;
            let b = ray.dir.dot(oc);
            let c = oc.length_squared() - radius * radius;
            let disc = b * b - c;
            if !(disc > T::zero()) {
                return None;
            }
            let s = disc.sqrt();
            (-b - s, -b + s)
        }
        Proxy::Box { min, max } => slab_intersection(ray.origin, ray.dir, min, max)?,
    };
    if !(t1 > T::zero()) {
        return None;
    }
    let t0 = t0.max(T::zero());
    (t1 > t0).then_some((t0, t1))
}

/// Slab test; axes with a zero direction component are handled explicitly.
pub(crate) fn slab_intersection<T: Real>(
    origin: Vec3<T>,
    dir: Vec3<T>,
    min: Vec3<T>,
    max: Vec3<T>,
) -> Option<(T, T)> {
    let mut t0 = T::neg_infinity();
    let mut t1 = T::infinity();
    for a in 0..3 {
        let (o, d) = (origin[a], dir[a]);
        if d == T::zero() {
            if o < min[a] || o > max[a] {
                return None;
            }
            continue;
        }
        let inv = T::one() / d;
        let (mut near, mut far) = ((min[a] - o) * inv, (max[a] - o) * inv);
        if near > far {
            std::mem::swap(&mut near, &mut far);
        }
        t0 = t0.max(near);
        t1 = t1.min(far);
    }
    (t1 > t0).then_some((t0, t1))
}

/// Settings shared by grid marching and octree traversal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarchSettings {
    pub model: TransmittanceModel,
    pub activation: ActivationKind,
    /// Samples with density below this are skipped entirely.
    pub sigma_min: f64,
    /// Accumulation stops once opacity reaches this value; `1` never stops
    /// early, even where the transmittance has run out.
    pub alpha_max: f64,
}

impl MarchSettings {
    /// No thresholds: every sample contributes and nothing stops early.
    pub fn exact(model: TransmittanceModel, activation: ActivationKind) -> Self {
        Self {
            model,
            activation,
            sigma_min: 0.0,
            alpha_max: 1.0,
        }
    }

    /// Render-time heuristics, `sigma_min = 0.1` and `alpha_max = 0.9`.
    pub fn render_defaults(model: TransmittanceModel, activation: ActivationKind) -> Self {
        Self {
            model,
            activation,
            sigma_min: 0.1,
            alpha_max: 0.9,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.activation.validate()?;
        if !(self.sigma_min >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma_min {} < 0",
                self.sigma_min
            )));
        }
        if !(self.alpha_max > 0.0 && self.alpha_max <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha_max {} outside (0,1]",
                self.alpha_max
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MarchResult<T> {
    pub radiance: [T; 3],
    pub alpha: T,
    /// `sum w_i t_i`.
    pub expected_depth: T,
    /// Contribution weight per evaluated sample, in marching order.
    pub weights: Vec<T>,
    /// Number of field samples (or octree leaves) evaluated.
    pub samples_evaluated: usize,
}

impl<T: Real> MarchResult<T> {
    pub fn empty() -> Self {
        Self {
            radiance: [T::zero(); 3],
            alpha: T::zero(),
            expected_depth: T::zero(),
            weights: Vec::new(),
            samples_evaluated: 0,
        }
    }
}

/// Emission weight of one segment with constant density, given the optical
/// depth `depth` accumulated before it and its own optical depth `tau`.
///
/// The weight is the exact integral of `T(t) sigma` over the segment.
/// Returns `(weight, d weight / d tau, d weight / d depth)`.
#[inline]
pub(crate) fn segment_weight<T: Real>(model: TransmittanceModel, depth: T, tau: T) -> (T, T, T) {
    match model {
        TransmittanceModel::Linear => {
            let remaining = T::one() - depth;
            if !(remaining > T::zero()) {
                (T::zero(), T::zero(), T::zero())
            } else if tau <= remaining {
                (tau * (remaining - tau * T::half()), remaining - tau, -tau)
            } else {
                // transmittance runs out inside the segment
                (remaining * remaining * T::half(), T::zero(), -remaining)
            }
        }
        TransmittanceModel::Exponential => {
            let trans = (-depth).exp();
            let w = trans * -(-tau).exp_m1();
            (w, trans * (-tau).exp(), -w)
        }
    }
}

/// Opacity `1 - T` after optical depth `depth`, and its derivative.
#[inline]
pub(crate) fn opacity<T: Real>(model: TransmittanceModel, depth: T) -> (T, T) {
    match model {
        TransmittanceModel::Linear => {
            if depth < T::one() {
                (depth.max(T::zero()), T::one())
            } else {
                (T::one(), T::zero())
            }
        }
        TransmittanceModel::Exponential => {
            let trans = (-depth).exp();
            (T::one() - trans, trans)
        }
    }
}

/// Front-to-back compositing of piecewise-constant segments.
///
/// Each segment contributes `w_i * Phi_i`, where `w_i` is the integral of
/// `T(t) sigma_i` over the segment, with `T = max(0, 1 - tau)` (linear) or
/// `T = exp(-tau)` (exponential) for optical depth `tau`. Opacity is
/// `1 - T(t_far)`. Under the linear model `sum w_i = alpha - alpha^2 / 2`;
/// under the exponential model `sum w_i = alpha`.
///
/// When opacity reaches `alpha_max < 1` the ray is treated as saturated: the
/// emission the remaining transmittance would pick up at the current emission
/// is credited to the sample that crossed the threshold, and opacity becomes 1.
pub struct Accumulator<T> {
    settings: MarchSettings,
    basis: [T; 25],
    k: usize,
    optical_depth: T,
    transmittance: T,
    result: MarchResult<T>,
    done: bool,
}

impl<T: Real> Accumulator<T> {
    /// `dir` is the marching direction; emission is decoded toward `-dir`.
    pub fn new(settings: MarchSettings, l_max: usize, dir: Vec3<T>) -> Self {
        let mut basis = [T::zero(); 25];
        sh_basis_into(l_max, -dir, &mut basis);
        Self {
            settings,
            basis,
            k: coeffs_per_channel(l_max),
            optical_depth: T::zero(),
            transmittance: T::one(),
            result: MarchResult::empty(),
            done: false,
        }
    }

    #[inline]
    pub fn is_done(&self) -> bool {
        self.done
    }

    /// Adds one segment of length `delta` whose representative sample sits at
    /// `t`. Returns `false` once the ray is saturated.
    pub fn push(&mut self, t: T, delta: T, sigma: T, coeffs: &[T]) -> bool {
        if self.done {
            return false;
        }
        self.result.samples_evaluated += 1;
        if sigma.to_f64_lossy() < self.settings.sigma_min
            || !(sigma > T::zero())
            || !(delta > T::zero())
        {
            return true;
        }
        let tau = sigma * delta;
        let model = self.settings.model;
        let (mut w, _, _) = segment_weight(model, self.optical_depth, tau);
        self.optical_depth += tau;
        let (mut alpha, _) = opacity(model, self.optical_depth);
        self.transmittance = T::one() - alpha;
        let alpha_max = T::lit(self.settings.alpha_max);
        if self.settings.alpha_max < 1.0 && alpha >= alpha_max {
            let rest = self.transmittance;
            w += match model {
                TransmittanceModel::Linear => rest * rest * T::half(),
                TransmittanceModel::Exponential => rest,
            };
            alpha = T::one();
            self.transmittance = T::zero();
            self.done = true;
        }
        let rgb = decode_with_basis(
            &coeffs[..CHANNELS * self.k],
            &self.basis[..self.k],
            self.settings.activation,
        );
        for (acc, c) in self.result.radiance.iter_mut().zip(rgb) {
            *acc += w * c;
        }
        self.result.expected_depth += w * t;
        self.result.weights.push(w);
        self.result.alpha = alpha;
        !self.done
    }

    pub fn finish(self) -> MarchResult<T> {
        self.result
    }
}

/// Midpoints of `n` equal strata of `[t_near, t_far]`, optionally jittered
/// uniformly within each stratum.
pub fn stratified_samples<T: Real, R: Rng + ?Sized>(
    t_near: T,
    t_far: T,
    n: usize,
    mut jitter: Option<&mut R>,
) -> Vec<T> {
    let width = (t_far - t_near) / T::from_usize_lossy(n);
    (0..n)
        .map(|i| {
            let u = match jitter.as_deref_mut() {
                Some(rng) => T::lit(rng.gen::<f64>()),
                None => T::half(),
            };
            t_near + (T::from_usize_lossy(i) + u) * width
        })
        .collect()
}

/// Segment lengths for sorted sample positions: boundaries are the midpoints
/// between neighbours, clamped to the ray segment, so the segments partition
/// `[t_near, t_far]`.
pub fn sample_spacings<T: Real>(ts: &[T], t_near: T, t_far: T) -> Vec<T> {
    let n = ts.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 {
                t_near
            } else {
                (ts[i - 1] + ts[i]) * T::half()
            };
            let hi = if i + 1 == n {
                t_far
            } else {
                (ts[i] + ts[i + 1]) * T::half()
            };
            (hi - lo).max(T::zero())
        })
        .collect()
}

/// Marches `n_samples` stratified samples through `source`.
pub fn march<T: Real, S: RadianceSource<T> + ?Sized, R: Rng + ?Sized>(
    ray: &Ray<T>,
    source: &S,
    settings: &MarchSettings,
    n_samples: usize,
    jitter: Option<&mut R>,
) -> MarchResult<T> {
    assert!(n_samples >= 1, "march needs at least one sample");
    if !(ray.t_far > ray.t_near) {
        return MarchResult::empty();
    }
    let ts = stratified_samples(ray.t_near, ray.t_far, n_samples, jitter);
    march_samples(ray, source, settings, &ts)
}

/// Marches explicit sorted sample positions inside the ray segment.
pub fn march_samples<T: Real, S: RadianceSource<T> + ?Sized>(
    ray: &Ray<T>,
    source: &S,
    settings: &MarchSettings,
    ts: &[T],
) -> MarchResult<T> {
    if !(ray.t_far > ray.t_near) || ts.is_empty() {
        return MarchResult::empty();
    }
    let l_max = source.l_max();
    let mut coeffs = [T::zero(); 75];
    let coeffs = &mut coeffs[..CHANNELS * coeffs_per_channel(l_max)];
    let deltas = sample_spacings(ts, ray.t_near, ray.t_far);
    let mut acc = Accumulator::new(*settings, l_max, ray.dir);
    for (&t, &delta) in ts.iter().zip(&deltas) {
        let sigma = source.sample(ray.at(t), coeffs);
        if !acc.push(t, delta, sigma, coeffs) {
            break;
        }
    }
    acc.finish()
}

/// Marches explicit segments: `bounds` holds `n + 1` sorted boundaries and
/// each segment is sampled once at its midpoint.
pub fn march_segments<T: Real, S: RadianceSource<T> + ?Sized>(
    ray: &Ray<T>,
    source: &S,
    settings: &MarchSettings,
    bounds: &[T],
) -> MarchResult<T> {
    let l_max = source.l_max();
    let mut coeffs = [T::zero(); 75];
    let coeffs = &mut coeffs[..CHANNELS * coeffs_per_channel(l_max)];
    let mut acc = Accumulator::new(*settings, l_max, ray.dir);
    for pair in bounds.windows(2) {
        let t = (pair[0] + pair[1]) * T::half();
        let sigma = source.sample(ray.at(t), coeffs);
        if !acc.push(t, pair[1] - pair[0], sigma, coeffs) {
            break;
        }
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Resampled<T> {
    pub ts: Vec<T>,
    /// Set when every weight was zero and uniform sampling was used instead.
    pub fallback: bool,
}

/// Inverse-CDF sampling of the piecewise-constant density defined by
/// `weights` over equal strata of `[t_near, t_far]`. Outputs lie strictly
/// inside the bounds and keep the order of `u`.
pub fn hierarchical_resample<T: Real>(weights: &[T], t_near: T, t_far: T, u: &[T]) -> Resampled<T> {
    let n = weights.len();
    let width = t_far - t_near;
    let eps = width * T::epsilon() * T::lit(4.0);
    let inside = |t: T| t.max(t_near + eps).min(t_far - eps);
    let total: T = weights.iter().map(|&w| w.max(T::zero())).sum();
    if n == 0 || !(total > T::zero()) {
        return Resampled {
            ts: u.iter().map(|&x| inside(t_near + x * width)).collect(),
            fallback: true,
        };
    }
    let stratum = width / T::from_usize_lossy(n);
    let mut cdf = Vec::with_capacity(n + 1);
    cdf.push(T::zero());
    let mut running = T::zero();
    for &w in weights {
        running += w.max(T::zero()) / total;
        cdf.push(running);
    }
    let last_nonzero = weights
        .iter()
        .rposition(|&w| w > T::zero())
        .expect("total > 0");
    let ts = u
        .iter()
        .map(|&x| {
            // first stratum whose upper CDF edge exceeds x
            let s = cdf[1..].partition_point(|&c| c <= x).min(last_nonzero);
            let mass = cdf[s + 1] - cdf[s];
            let frac = if mass > T::zero() {
                ((x - cdf[s]) / mass).max(T::zero()).min(T::one())
            } else {
                T::half()
            };
            inside(t_near + (T::from_usize_lossy(s) + frac) * stratum)
        })
        .collect();
    Resampled {
        ts,
        fallback: false,
    }
}
