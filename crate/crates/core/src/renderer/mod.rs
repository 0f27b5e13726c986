//! Monte Carlo direct-illumination renderer for scenes with plenoctree
//! luminaires.
//!
//! A luminaire is a proxy shape with an octree inside. A ray that hits the
//! proxy picks up the emission accumulated along the interior chord and
//! continues straight on, attenuated by `1 - alpha`:
//! `pixel = L_e + (1 - alpha) L_behind`.

mod geometry;
mod scene_file;

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataio::{CameraPose, Image};
use crate::error::{Error, Result};
use crate::plenoctree::Plenoctree;
use crate::raymarch::{intersect_proxy, MarchSettings, Proxy, Ray};
use crate::vec3::Vec3;

pub use crate::dataio::rmse;
pub use geometry::Geometry;
pub use scene_file::SceneFile;

type V = Vec3<f64>;
pub type Rgb = [f64; 3];

/// Offsets secondary rays off the surface they leave, relative to scene scale.
const RAY_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Material {
    Lambertian { albedo: Rgb },
}

impl Material {
    fn validate(&self) -> Result<()> {
        let Material::Lambertian { albedo } = self;
        if albedo.iter().all(|a| (0.0..=1.0).contains(a)) {
            Ok(())
        } else {
            Err(Error::InvalidScene(format!(
                "albedo {albedo:?} outside [0, 1]"
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Surface {
    pub geometry: Geometry,
    pub material: Material,
}

/// An octree luminaire placed in the scene. The octree and `proxy` live in
/// model space; world position is `model * scale + offset`. Optical depth is
/// measured in model units, so scaling does not change appearance.
#[derive(Debug, Clone)]
pub struct Luminaire {
    pub proxy: Proxy<f64>,
    pub octree: Arc<Plenoctree<f64>>,
    pub offset: V,
    pub scale: f64,
    pub settings: MarchSettings,
}

impl Luminaire {
    pub fn new(proxy: Proxy<f64>, octree: Arc<Plenoctree<f64>>, settings: MarchSettings) -> Self {
        Self {
            proxy,
            octree,
            offset: Vec3::zero(),
            scale: 1.0,
            settings,
        }
    }

    /// The proxy in world space.
    pub fn world_proxy(&self) -> Proxy<f64> {
        match self.proxy {
            Proxy::Sphere { center, radius } => Proxy::Sphere {
                center: center * self.scale + self.offset,
                radius: radius * self.scale,
            },
            Proxy::Box { min, max } => Proxy::Box {
                min: min * self.scale + self.offset,
                max: max * self.scale + self.offset,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        self.settings.validate()?;
        if !(self.scale > 0.0 && self.scale.is_finite()) || !self.offset.is_finite() {
            return Err(Error::InvalidScene(format!(
                "bad luminaire transform (scale {})",
                self.scale
            )));
        }
        let area = self.world_proxy().surface_area();
        let degenerate = match self.proxy {
            Proxy::Box { min, max } => (0..3).any(|a| !(max[a] >= min[a])),
            Proxy::Sphere { .. } => false,
        };
        if !(area > 0.0 && area.is_finite()) || degenerate {
            return Err(Error::InvalidScene(format!(
                "luminaire proxy has zero or invalid area: {:?}",
                self.proxy
            )));
        }
        Ok(())
    }

    /// Emission and opacity along the world-space chord `[t0, t1]` of the
    /// ray `origin + t dir`.
    fn chord(&self, origin: V, dir: V, t0: f64, t1: f64) -> (Rgb, f64) {
        if !(t1 > t0) {
            return ([0.0; 3], 0.0);
        }
        let inv = 1.0 / self.scale;
        let local = Ray::new_unchecked((origin - self.offset) * inv, dir, t0 * inv, t1 * inv);
        let r = self.octree.traverse(&local, &self.settings);
        (r.radiance, r.alpha)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightSampling {
    /// Points drawn uniformly over the proxy surface area.
    UniformProxyArea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorConfig {
    pub spp: usize,
    /// How many proxies a camera ray may pass through before whatever lies
    /// behind is shaded without further luminaires.
    pub max_transparency_bounces: usize,
    pub light_sampling: LightSampling,
    pub seed: u64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            spp: 16,
            max_transparency_bounces: 8,
            light_sampling: LightSampling::UniformProxyArea,
            seed: 0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 {
            return Err(Error::InvalidConfig("spp must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub surfaces: Vec<Surface>,
    pub luminaires: Vec<Luminaire>,
    pub background: Rgb,
    pub camera: CameraPose,
    /// Settings from the scene file; callers may override them.
    pub estimator: EstimatorConfig,
}

enum Hit {
    Surface { t: f64, index: usize, normal: V },
    Luminaire { t_in: f64, t_out: f64, index: usize },
}

impl Scene {
    pub fn new(camera: CameraPose, background: Rgb) -> Self {
        Self {
            surfaces: Vec::new(),
            luminaires: Vec::new(),
            background,
            camera,
            estimator: EstimatorConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.estimator.validate()?;
        if !self.background.iter().all(|b| b.is_finite() && *b >= 0.0) {
            return Err(Error::InvalidScene(format!(
                "background {:?} must be finite and non-negative",
                self.background
            )));
        }
        for s in &self.surfaces {
            s.material.validate()?;
            if let Geometry::Sphere { radius, .. } = s.geometry {
                if !(radius > 0.0) {
                    return Err(Error::InvalidScene(format!(
                        "sphere radius {radius} must be positive"
                    )));
                }
            }
            if let Geometry::Plane { normal, .. } = s.geometry {
                if !(normal.length() > 0.0) {
                    return Err(Error::InvalidScene("plane normal is zero".into()));
                }
            }
        }
        for l in &self.luminaires {
            l.validate()?;
        }
        Ok(())
    }

    fn nearest_surface(&self, ray: &Ray<f64>, t_min: f64, t_max: f64) -> Option<(f64, usize, V)> {
        let mut best: Option<(f64, usize, V)> = None;
        for (i, s) in self.surfaces.iter().enumerate() {
            let limit = best.map_or(t_max, |b| b.0);
            if let Some((t, n)) = geometry::intersect(&s.geometry, ray, t_min, limit) {
                best = Some((t, i, n));
            }
        }
        best
    }

    fn nearest(&self, ray: &Ray<f64>, t_min: f64, with_luminaires: bool) -> Option<Hit> {
        let mut best = self
            .nearest_surface(ray, t_min, f64::INFINITY)
            .map(|(t, index, normal)| Hit::Surface { t, index, normal });
        if !with_luminaires {
            return best;
        }
        for (index, l) in self.luminaires.iter().enumerate() {
            let Some((t_in, t_out)) = chord_after(ray, &l.world_proxy(), t_min) else {
                continue;
            };
            let closer = match best {
                None => true,
                Some(Hit::Surface { t, .. }) => t_in < t,
                Some(Hit::Luminaire { t_in: b, .. }) => t_in < b,
            };
            if closer {
                best = Some(Hit::Luminaire { t_in, t_out, index });
            }
        }
        best
    }

    /// Product of `1 - alpha` over luminaires crossed between `x` and `y`,
    /// zero if a surface blocks the segment. `skip` is the luminaire `y` is on.
    fn transmission(&self, x: V, y: V, skip: usize) -> f64 {
        let d = y - x;
        let dist = d.length();
        let dir = d / dist;
        let eps = RAY_EPSILON * (1.0 + dist);
        let ray = Ray::infinite(x, dir);
        if self.nearest_surface(&ray, eps, dist - eps).is_some() {
            return 0.0;
        }
        let mut trans = 1.0;
        for (i, l) in self.luminaires.iter().enumerate() {
            if i == skip {
                continue;
            }
            if let Some((t0, t1)) = intersect_proxy(&ray, &l.world_proxy()) {
                let (t0, t1) = (t0.max(eps), t1.min(dist - eps));
                let (_, alpha) = l.chord(x, dir, t0, t1);
                trans *= 1.0 - alpha;
            }
        }
        trans
    }

    fn shade(&self, ray: &Ray<f64>, t_min: f64, bounces_left: usize, rng: &mut ChaCha8Rng) -> Rgb {
        match self.nearest(ray, t_min, bounces_left > 0) {
            None => self.background,
            Some(Hit::Surface { t, index, normal }) => {
                let x = ray.at(t);
                let n = if normal.dot(ray.dir) > 0.0 {
                    -normal
                } else {
                    normal
                };
                let Material::Lambertian { albedo } = self.surfaces[index].material;
                let e = self.irradiance_estimate(x, n, rng);
                [albedo[0] * e[0], albedo[1] * e[1], albedo[2] * e[2]]
            }
            Some(Hit::Luminaire { t_in, t_out, index }) => {
                let (le, alpha) = self.luminaires[index].chord(ray.origin, ray.dir, t_in, t_out);
                if alpha >= 1.0 {
                    return le;
                }
                let next = t_out + RAY_EPSILON * (1.0 + t_out);
                let behind = self.shade(ray, next, bounces_left - 1, rng);
                let k = 1.0 - alpha;
                [
                    le[0] + k * behind[0],
                    le[1] + k * behind[1],
                    le[2] + k * behind[2],
                ]
            }
        }
    }

    /// One-sample estimate of the cosine-weighted incident radiance at `x`
    /// divided by pi, summed over luminaires. Multiply by albedo for the
    /// Lambertian reflected radiance.
    fn irradiance_estimate(&self, x: V, n: V, rng: &mut ChaCha8Rng) -> Rgb {
        let mut sum = [0.0; 3];
        for (index, lum) in self.luminaires.iter().enumerate() {
            let proxy = lum.world_proxy();
            let (y, ny) = sample_proxy(&proxy, rng);
            let d = y - x;
            let dist2 = d.length_squared();
            if !(dist2 > 0.0) {
                continue;
            }
            let wi = d / dist2.sqrt();
            let cos_x = wi.dot(n);
            let cos_y = -wi.dot(ny);
            if cos_x <= 0.0 || cos_y <= 0.0 {
                continue;
            }
            let (le, _) = luminaire_radiance(lum, y, -wi);
            if le == [0.0; 3] {
                continue;
            }
            let vis = self.transmission(x, y, index);
            if vis == 0.0 {
                continue;
            }
            let g = cos_x * cos_y / dist2 * proxy.surface_area() * vis / std::f64::consts::PI;
            for c in 0..3 {
                sum[c] += le[c] * g;
            }
        }
        sum
    }
}

/// Chord of `ray` through `proxy` that starts after `t_min`.
fn chord_after(ray: &Ray<f64>, proxy: &Proxy<f64>, t_min: f64) -> Option<(f64, f64)> {
    let (t0, t1) = intersect_proxy(ray, proxy)?;
    let t0 = t0.max(t_min);
    (t1 > t0).then_some((t0, t1))
}

/// Uniform point on the proxy surface and its outward normal.
fn sample_proxy(proxy: &Proxy<f64>, rng: &mut impl Rng) -> (V, V) {
    match *proxy {
        Proxy::Sphere { center, radius } => {
            let z = 1.0 - 2.0 * rng.gen::<f64>();
            let phi = std::f64::consts::TAU * rng.gen::<f64>();
            let r = (1.0 - z * z).max(0.0).sqrt();
            let n = Vec3::new(r * phi.cos(), r * phi.sin(), z);
            (center + n * radius, n)
        }
        Proxy::Box { min, max } => {
            let e = max - min;
            let areas = [e.y * e.z, e.x * e.z, e.x * e.y];
            let total = areas.iter().sum::<f64>();
            let mut pick = rng.gen::<f64>() * 2.0 * total;
            let (u, v) = (rng.gen::<f64>(), rng.gen::<f64>());
            let mut face = 5;
            for f in 0..6 {
                if pick < areas[f / 2] {
                    face = f;
                    break;
                }
                pick -= areas[f / 2];
            }
            let axis = face / 2;
            let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
            let mut p = [0.0; 3];
            let mut n = [0.0; 3];
            p[axis] = if face % 2 == 0 { min[axis] } else { max[axis] };
            n[axis] = if face % 2 == 0 { -1.0 } else { 1.0 };
            p[a] = min[a] + u * e[a];
            p[b] = min[b] + v * e[b];
            (Vec3::from(p), Vec3::from(n))
        }
    }
}

/// Emission and opacity seen when looking at `hit_point` on the proxy
/// surface from direction `outgoing` (pointing away from the luminaire).
/// Tangent or outward-facing hits give `(0, 0)`.
pub fn luminaire_radiance(lum: &Luminaire, hit_point: V, outgoing: V) -> (Rgb, f64) {
    let dir = -outgoing;
    let ray = Ray::infinite(hit_point, dir);
    match intersect_proxy(&ray, &lum.world_proxy()) {
        Some((t0, t1)) => lum.chord(hit_point, dir, t0, t1),
        None => ([0.0; 3], 0.0),
    }
}

/// Single-sample direct-lighting estimate of the radiance reflected toward
/// any direction by a Lambertian point `x` with unit normal `n`.
pub fn estimate_direct(scene: &Scene, x: V, n: V, albedo: Rgb, rng: &mut ChaCha8Rng) -> Rgb {
    let e = scene.irradiance_estimate(x + n * RAY_EPSILON, n, rng);
    [albedo[0] * e[0], albedo[1] * e[1], albedo[2] * e[2]]
}

/// Random stream for pixel `index` under `seed`.
pub fn pixel_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

pub struct RenderOutput {
    pub image: Image,
    /// Samples taken per pixel, row-major.
    pub samples: Vec<u32>,
}

/// Renders the scene; the result depends only on the scene and `cfg`.
pub fn render(scene: &Scene, cfg: &EstimatorConfig) -> Result<RenderOutput> {
    scene.validate()?;
    cfg.validate()?;
    let (w, h) = scene.camera.resolution;
    let mut data = vec![0.0f32; w * h * 3];
    data.par_chunks_mut(w * 3).enumerate().for_each(|(j, row)| {
        for i in 0..w {
            let index = (j * w + i) as u64;
            let mut rng = pixel_rng(cfg.seed, index);
            let mut sum = [0.0f64; 3];
            for _ in 0..cfg.spp {
                let (du, dv) = (rng.gen::<f64>(), rng.gen::<f64>());
                let ray = scene.camera.ray_at(i as f64 + du, j as f64 + dv);
                let c = scene.shade(&ray, 0.0, cfg.max_transparency_bounces, &mut rng);
                for k in 0..3 {
                    sum[k] += c[k];
                }
            }
            for k in 0..3 {
                row[i * 3 + k] = (sum[k] / cfg.spp as f64) as f32;
            }
        }
    });
    Ok(RenderOutput {
        image: Image::from_data(w, h, 3, data)?,
        samples: vec![cfg.spp as u32; w * h],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::CameraKind;
    use crate::field::RadianceSource;
    use crate::plenoctree::ExtractionConfig;
    use crate::raymarch::TransmittanceModel;
    use crate::shmath::ActivationKind;
    use crate::vec3::Aabb;

    const C0: f64 = 0.282_094_791_773_878_14;

    /// Opaque medium of constant radiance `emission` filling the unit cube,
    /// so a unit sphere proxy around it renders as an exact opaque sphere.
    struct Ball {
        emission: f64,
    }

    impl RadianceSource<f64> for Ball {
        fn l_max(&self) -> usize {
            0
        }
        fn bbox(&self) -> Aabb<f64> {
            Aabb::centered_cube(1.0)
        }
        fn sample(&self, p: Vec3<f64>, coeffs: &mut [f64]) -> f64 {
            coeffs.fill(self.emission.ln() / C0);
            if self.bbox().contains(p) {
                1e4
            } else {
                0.0
            }
        }
    }

    fn settings() -> MarchSettings {
        MarchSettings::render_defaults(TransmittanceModel::Exponential, ActivationKind::Exponential)
    }

    fn ball_luminaire(emission: f64, center: V) -> Luminaire {
        let tree = Plenoctree::extract(
            &Ball { emission },
            &ExtractionConfig {
                max_depth: 5,
                refine_samples: 16,
                ..Default::default()
            },
        )
        .unwrap();
        let mut l = Luminaire::new(
            Proxy::Sphere {
                center: Vec3::zero(),
                radius: 1.0,
            },
            Arc::new(tree),
            settings(),
        );
        l.offset = center;
        l
    }

    fn empty_luminaire() -> Luminaire {
        let tree = Plenoctree::empty(Aabb::centered_cube(1.0), 3, 0).unwrap();
        Luminaire::new(
            Proxy::Box {
                min: Vec3::splat(-1.0),
                max: Vec3::splat(1.0),
            },
            Arc::new(tree),
            settings(),
        )
    }

    fn camera(res: usize) -> CameraPose {
        CameraPose::looking_at_origin(
            CameraKind::Orthographic { width: 1.0 },
            Vec3::lit(0.0, 0.0, 5.0),
            (res, res),
        )
        .unwrap()
    }

    #[test]
    fn background_only_scene() {
        let scene = Scene::new(camera(4), [0.3, 0.2, 0.1]);
        let out = render(
            &scene,
            &EstimatorConfig {
                spp: 3,
                ..Default::default()
            },
        )
        .unwrap();
        for p in out.image.data.chunks(3) {
            assert_eq!(p, &[0.3f32, 0.2, 0.1]);
        }
        assert!(out.samples.iter().all(|&s| s == 3));
    }

    #[test]
    fn empty_proxy_is_invisible() {
        let mut scene = Scene::new(camera(4), [0.7, 1.5, 2.25]);
        scene.luminaires.push(empty_luminaire());
        let out = render(&scene, &EstimatorConfig::default()).unwrap();
        for p in out.image.data.chunks(3) {
            assert_eq!(p, &[0.7f32, 1.5, 2.25]);
        }
        let (le, a) = luminaire_radiance(
            &scene.luminaires[0],
            Vec3::lit(0.0, 0.0, 1.0),
            Vec3::lit(0.0, 0.0, 1.0),
        );
        assert_eq!((le, a), ([0.0; 3], 0.0));
    }

    #[test]
    fn opaque_chord_shows_emission_only() {
        let mut scene = Scene::new(camera(2), [5.0, 5.0, 5.0]);
        scene.luminaires.push(ball_luminaire(1.0, Vec3::zero()));
        let out = render(
            &scene,
            &EstimatorConfig {
                spp: 2,
                ..Default::default()
            },
        )
        .unwrap();
        for p in out.image.data.chunks(3) {
            for &c in p {
                assert!((c - 1.0).abs() < 1e-6, "{c}");
            }
        }
        let (le, a) = luminaire_radiance(
            &scene.luminaires[0],
            Vec3::lit(0.0, 0.0, 1.0),
            Vec3::lit(0.0, 0.0, 1.0),
        );
        assert_eq!(a, 1.0);
        assert!(le.iter().all(|c| (c - 1.0).abs() < 1e-9));
        // tangent ray
        let (le, a) = luminaire_radiance(
            &scene.luminaires[0],
            Vec3::lit(1.0, 0.0, 0.0),
            Vec3::lit(0.0, 0.0, 1.0),
        );
        assert_eq!((le, a), ([0.0; 3], 0.0));
    }

    #[test]
    fn sphere_source_over_floor() {
        let mut scene = Scene::new(camera(1), [0.0; 3]);
        scene
            .luminaires
            .push(ball_luminaire(1.0, Vec3::lit(0.0, 0.0, 2.0)));
        // relative standard error is about 0.5% at this count
        let n = 262_144;
        let mut rng = pixel_rng(7, 0);
        let mut sum = 0.0;
        for _ in 0..n {
            sum += estimate_direct(
                &scene,
                Vec3::zero(),
                Vec3::lit(0.0, 0.0, 1.0),
                [1.0; 3],
                &mut rng,
            )[0];
        }
        let mean = sum / n as f64;
        assert!((mean - 0.25).abs() < 0.25 * 0.02, "{mean}");
    }

    #[test]
    fn blockers_and_albedo() {
        let mut scene = Scene::new(camera(1), [0.0; 3]);
        scene
            .luminaires
            .push(ball_luminaire(1.0, Vec3::lit(0.0, 0.0, 3.0)));
        let up = Vec3::lit(0.0, 0.0, 1.0);
        let estimate = |scene: &Scene| {
            let mut rng = pixel_rng(1, 0);
            (0..2000)
                .map(|_| estimate_direct(scene, Vec3::zero(), up, [0.5; 3], &mut rng)[0])
                .sum::<f64>()
        };
        assert!(estimate(&scene) > 0.0);
        // empty proxies in the way let everything through, opaque ones nothing
        let mut with_empty = scene.clone();
        let mut e = empty_luminaire();
        e.offset = Vec3::lit(0.0, 0.0, 1.0);
        e.scale = 0.5;
        with_empty.luminaires.push(e);
        let (x, y) = (Vec3::zero(), Vec3::lit(0.0, 0.0, 2.0));
        assert_eq!(with_empty.transmission(x, y, 0), 1.0);
        let mut full = ball_luminaire(1.0, Vec3::lit(0.0, 0.0, 1.0));
        full.scale = 0.5;
        with_empty.luminaires[1] = full;
        assert_eq!(with_empty.transmission(x, y, 0), 0.0);
        // an opaque slab in between blocks everything
        let mut blocked = scene.clone();
        blocked.surfaces.push(Surface {
            geometry: Geometry::Box {
                min: Vec3::lit(-5.0, -5.0, 1.0),
                max: Vec3::lit(5.0, 5.0, 1.2),
            },
            material: Material::Lambertian { albedo: [1.0; 3] },
        });
        assert_eq!(estimate(&blocked), 0.0);
    }

    #[test]
    fn render_is_deterministic_and_albedo_monotone() {
        let cam = CameraPose::looking_at_origin(
            CameraKind::Perspective {
                focal: 35.0,
                sensor: 36.0,
            },
            Vec3::lit(0.0, -6.0, 3.0),
            (12, 8),
        )
        .unwrap();
        let mut scene = Scene::new(cam, [0.0; 3]);
        scene
            .luminaires
            .push(ball_luminaire(2.0, Vec3::lit(0.0, 0.0, 1.5)));
        scene.surfaces.push(Surface {
            geometry: Geometry::Plane {
                point: Vec3::zero(),
                normal: Vec3::lit(0.0, 0.0, 1.0),
            },
            material: Material::Lambertian { albedo: [0.8; 3] },
        });
        let cfg = EstimatorConfig {
            spp: 4,
            seed: 9,
            ..Default::default()
        };
        let a = render(&scene, &cfg).unwrap();
        let b = render(&scene, &cfg).unwrap();
        assert_eq!(a.image.data, b.image.data);
        let energy = |img: &Image| img.data.iter().map(|&v| v as f64).sum::<f64>();
        let mut darker = scene.clone();
        darker.surfaces[0].material = Material::Lambertian { albedo: [0.4; 3] };
        let d = render(&darker, &cfg).unwrap();
        assert!(energy(&d.image).is_finite());
        assert!(energy(&d.image) < energy(&a.image));
    }

    #[test]
    fn invalid_scenes_rejected() {
        let mut scene = Scene::new(camera(1), [0.0; 3]);
        scene.surfaces.push(Surface {
            geometry: Geometry::Sphere {
                center: Vec3::zero(),
                radius: 1.0,
            },
            material: Material::Lambertian {
                albedo: [1.2, 0.0, 0.0],
            },
        });
        assert!(scene.validate().is_err());
        let mut scene = Scene::new(camera(1), [0.0; 3]);
        let mut l = empty_luminaire();
        l.proxy = Proxy::Sphere {
            center: Vec3::zero(),
            radius: 0.0,
        };
        scene.luminaires.push(l);
        assert!(scene.validate().is_err());
        assert!(EstimatorConfig {
            spp: 0,
            ..Default::default()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn rmse_examples() {
        let zero = Image::new(2, 2, 3);
        let mut one = Image::new(2, 2, 3);
        one.data.fill(1.0);
        assert_eq!(rmse(&zero, &zero).unwrap(), 0.0);
        assert_eq!(rmse(&zero, &one).unwrap(), 1.0);
        let mut checker = Image::new(2, 2, 3);
        for (p, px) in checker.data.chunks_mut(3).enumerate() {
            if (p % 2 + p / 2) % 2 == 0 {
                px.fill(1.0);
            }
        }
        assert!((rmse(&checker, &zero).unwrap() - 0.5f64.sqrt()).abs() < 1e-12);
        assert!(rmse(&zero, &Image::new(3, 2, 3)).is_err());
    }
}
