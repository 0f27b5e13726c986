//! End-to-end stages shared by the command-line tool and the tests:
//! dataset synthesis, fitting, octree extraction, view rendering and
//! evaluation.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dataio::{
    halton_sphere_cameras, psnr, ssim, CameraKind, CameraPose, Dataset, Image, Manifest, Split,
    View,
};
use crate::error::{Error, Result};
use crate::field::{GridInit, Interpolation, RadianceFieldGrid, RadianceSource};
use crate::plenoctree::{ExtractionConfig, Plenoctree};
use crate::raymarch::{march_samples, MarchSettings, Proxy, Ray, TransmittanceModel};
use crate::scalar::Real;
use crate::shmath::ActivationKind;
use crate::toy::{ToyKind, ToyLuminaire, TOY_L_MAX};
use crate::training::{fit, FitOutput, LossConfig, LossRecord, RayBatch, RayDataset, TrainConfig};
use crate::vec3::Vec3;

/// Where ground-truth views come from.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    Toy(ToyKind),
    /// A grid file, rendered with trilinear interpolation.
    Grid(PathBuf),
}

impl FromStr for FieldSource {
    type Err = Error;

    /// Accepts `banded`, `toy:banded`, `grid:PATH` or a bare grid path.
    fn from_str(s: &str) -> Result<Self> {
        if let Some(path) = s.strip_prefix("grid:") {
            return Ok(FieldSource::Grid(PathBuf::from(path)));
        }
        match s.strip_prefix("toy:").unwrap_or(s).parse::<ToyKind>() {
            Ok(kind) => Ok(FieldSource::Toy(kind)),
            Err(_) if Path::new(s).is_file() => Ok(FieldSource::Grid(PathBuf::from(s))),
            Err(_) => Err(Error::InvalidConfig(format!(
                "field '{s}' is neither a toy (sphere, banded, cluster) nor an existing grid file"
            ))),
        }
    }
}

impl fmt::Display for FieldSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FieldSource::Toy(k) => write!(f, "toy:{}", k.name()),
            FieldSource::Grid(p) => write!(f, "grid:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct GenConfig {
    pub field: FieldSource,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    /// Camera distance from the origin.
    pub radius: f64,
    pub resolution: usize,
    /// Image plane width of the orthographic cameras.
    pub width: f64,
    pub model: TransmittanceModel,
    /// Output activation for grid sources (toys bring their own).
    pub activation: ActivationKind,
    /// Midpoint samples per ray chord.
    pub samples_per_ray: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            field: FieldSource::Toy(ToyKind::Banded),
            n_train: 32,
            n_val: 0,
            n_test: 8,
            radius: 4.0,
            resolution: 128,
            width: 1.8,
            model: TransmittanceModel::Linear,
            activation: ActivationKind::ExtendedSigmoid { max: 1.0 },
            samples_per_ray: 1024,
        }
    }
}

/// Renders one ground-truth view of `source` by dense exact marching over
/// the proxy chord of every pixel ray.
pub fn render_truth<S: RadianceSource<f64> + ?Sized>(
    source: &S,
    proxy: &Proxy<f64>,
    pose: &CameraPose,
    settings: &MarchSettings,
    samples_per_ray: usize,
) -> (Image, Image) {
    let (w, h) = pose.resolution;
    let rays = pose.generate_rays();
    let results: Vec<([f64; 3], f64)> = rays
        .par_iter()
        .map(|ray| match ray.clipped_to(proxy) {
            Some(r) => {
                let n = samples_per_ray as f64;
                let ts: Vec<f64> = (0..samples_per_ray)
                    .map(|i| r.t_near + (r.t_far - r.t_near) * (i as f64 + 0.5) / n)
                    .collect();
                let m = march_samples(&r, source, settings, &ts);
                (m.radiance, m.alpha)
            }
            None => ([0.0; 3], 0.0),
        })
        .collect();
    let mut rgb = Image::new(w, h, 3);
    let mut alpha = Image::new(w, h, 1);
    for (p, (c, a)) in results.into_iter().enumerate() {
        for k in 0..3 {
            rgb.data[p * 3 + k] = c[k] as f32;
        }
        alpha.data[p] = a as f32;
    }
    (rgb, alpha)
}

/// Writes a dataset of orthographic views on a Halton sphere around the
/// source: the first `n_train` positions are training views, then
/// validation, then test.
pub fn gen_dataset(out: &Path, cfg: &GenConfig, force: bool) -> Result<Dataset> {
    if cfg.n_train + cfg.n_val + cfg.n_test == 0 || cfg.resolution == 0 || cfg.samples_per_ray == 0
    {
        return Err(Error::InvalidConfig(
            "need at least one view, one pixel and one sample".into(),
        ));
    }
    if !(cfg.width > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "camera width {} must be positive",
            cfg.width
        )));
    }
    let toy;
    let grid: RadianceFieldGrid<f64>;
    let sampler;
    let (source, activation, max_radiance, bbox, proxy): (&dyn RadianceSource<f64>, _, _, _, _) =
        match &cfg.field {
            FieldSource::Toy(kind) => {
                toy = ToyLuminaire::new(*kind);
                (
                    &toy,
                    ToyLuminaire::activation(),
                    TOY_L_MAX,
                    ToyLuminaire::bbox_f64(),
                    ToyLuminaire::proxy::<f64>(),
                )
            }
            FieldSource::Grid(path) => {
                grid = RadianceFieldGrid::<f64>::load(path)?;
                let bbox = grid.bbox();
                let max = match cfg.activation {
                    ActivationKind::ExtendedSigmoid { max } => max,
                    ActivationKind::LogSigmoid { eps } => -eps.ln(),
                    ActivationKind::Exponential => {
                        return Err(Error::InvalidConfig(
                            "grid datasets need a bounded activation".into(),
                        ))
                    }
                };
                let proxy = Proxy::Sphere {
                    center: bbox.center(),
                    radius: bbox.extent().length() * 0.5,
                };
                sampler = grid.sampler(Interpolation::Trilinear);
                (&sampler, cfg.activation, max, bbox, proxy)
            }
        };
    let bounds = proxy.bounds();
    let reach = bounds.extent().length() * 0.5;
    if !(cfg.radius > reach) {
        return Err(Error::InvalidConfig(format!(
            "camera radius {} is inside the luminaire",
            cfg.radius
        )));
    }
    let camera = CameraKind::Orthographic { width: cfg.width };
    let manifest = Manifest {
        max_radiance,
        bbox,
        camera,
        resolution: (cfg.resolution, cfg.resolution),
        near: cfg.radius - reach,
        far: cfg.radius + reach,
        proxy,
        model: cfg.model,
        activation,
        field: cfg.field.to_string(),
    };
    let mut ds = Dataset::create(out, manifest, force)?;
    let settings = MarchSettings::exact(cfg.model, activation);
    let positions = halton_sphere_cameras(cfg.n_train + cfg.n_val + cfg.n_test, cfg.radius);
    let splits = std::iter::repeat_n(Split::Train, cfg.n_train)
        .enumerate()
        .chain(std::iter::repeat_n(Split::Val, cfg.n_val).enumerate())
        .chain(std::iter::repeat_n(Split::Test, cfg.n_test).enumerate());
    for ((index, split), position) in splits.zip(positions) {
        let pose = CameraPose::looking_at_origin(
            camera,
            position + bounds.center(),
            (cfg.resolution, cfg.resolution),
        )?;
        let (rgb, alpha) = render_truth(source, &proxy, &pose, &settings, cfg.samples_per_ray);
        ds.write_view(
            split,
            &View {
                name: split.view_name(index),
                pose,
                rgb,
                alpha,
            },
        )?;
    }
    Ok(ds)
}

/// Training rays of a dataset split. Pixels whose rays miss the proxy are
/// dropped: they carry no information about the interior.
pub fn load_rays<T: Real>(ds: &Dataset, split: Split) -> Result<RayBatch<T>> {
    let mut batch = RayBatch::default();
    for name in ds.views(split) {
        let view = ds.load_view(name)?;
        for (p, ray) in view.pose.generate_rays().into_iter().enumerate() {
            let Some(r) = ray.clipped_to(&ds.manifest.proxy) else {
                continue;
            };
            let c = view.rgb.pixel(p % view.rgb.width, p / view.rgb.width);
            let rgb = [
                T::lit(c[0] as f64),
                T::lit(c[1] as f64),
                T::lit(c[2] as f64),
            ];
            let a = (view.alpha.data[p] as f64).clamp(0.0, 1.0);
            batch.push(r.cast(), rgb, T::lit(a));
        }
    }
    Ok(batch)
}

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub resolution: usize,
    pub l_max: usize,
    pub train: TrainConfig,
    pub loss: LossConfig,
    /// Initial activated density.
    pub init_sigma: f64,
}

impl FitConfig {
    /// Loss and activation bound to the dataset's radiance range and
    /// transmittance model.
    pub fn for_dataset(
        manifest: &Manifest,
        resolution: usize,
        l_max: usize,
        iterations: usize,
        seed: u64,
    ) -> Self {
        Self {
            resolution,
            l_max,
            train: TrainConfig {
                iterations,
                seed,
                model: manifest.model,
                activation: manifest.activation,
                lr_start: 5e-2,
                lr_end: 5e-4,
                ..TrainConfig::default()
            },
            loss: LossConfig::with_lambda(manifest.max_radiance),
            init_sigma: 0.1,
        }
    }
}

pub fn initial_grid(manifest: &Manifest, cfg: &FitConfig) -> Result<RadianceFieldGrid<f32>> {
    let n = cfg.resolution;
    RadianceFieldGrid::new(
        [n, n, n],
        manifest.bbox.cast(),
        cfg.l_max,
        GridInit::Constant {
            sigma: cfg.init_sigma,
            logit: 0.0,
        },
    )
}

/// Fits a fresh grid to the training split.
pub fn fit_dataset(
    ds: &Dataset,
    cfg: &FitConfig,
    progress: &mut dyn FnMut(&LossRecord),
) -> Result<(RadianceFieldGrid<f32>, FitOutput<f32>)> {
    let mut grid = initial_grid(&ds.manifest, cfg)?;
    let rays = load_rays::<f32>(ds, Split::Train)?;
    let mut supplier = RayDataset::new(rays, cfg.train.seed)?;
    let out = fit(
        &mut supplier,
        &mut grid,
        &cfg.loss,
        &cfg.train,
        &mut |r, _| progress(r),
    )?;
    Ok((grid, out))
}

/// Bakes a trained grid into an octree of depth `depth`.
pub fn extract_grid<T: Real>(grid: &RadianceFieldGrid<T>, depth: usize) -> Result<Plenoctree<T>> {
    let cfg = ExtractionConfig {
        max_depth: depth,
        ..ExtractionConfig::default()
    };
    Plenoctree::extract(&grid.sampler(Interpolation::Trilinear), &cfg)
}

/// Radiance and alpha images of `tree` seen from `pose`, clipped to `proxy`.
pub fn render_octree_view(
    tree: &Plenoctree<f64>,
    proxy: &Proxy<f64>,
    pose: &CameraPose,
    settings: &MarchSettings,
) -> (Image, Image) {
    let (w, h) = pose.resolution;
    let results: Vec<([f64; 3], f64)> = pose
        .generate_rays()
        .par_iter()
        .map(|ray| match ray.clipped_to(proxy) {
            Some(r) => {
                let m = tree.traverse(&r, settings);
                (m.radiance, m.alpha)
            }
            None => ([0.0; 3], 0.0),
        })
        .collect();
    let mut rgb = Image::new(w, h, 3);
    let mut alpha = Image::new(w, h, 1);
    for (p, (c, a)) in results.into_iter().enumerate() {
        for k in 0..3 {
            rgb.data[p * 3 + k] = c[k] as f32;
        }
        alpha.data[p] = a as f32;
    }
    (rgb, alpha)
}

/// Renders every view of `split` into `out` using the dataset layout, so
/// `out` can be compared with the dataset by [`evaluate`].
pub fn render_views(
    tree: &Plenoctree<f64>,
    ds: &Dataset,
    split: Split,
    settings: &MarchSettings,
    out: &Path,
    force: bool,
) -> Result<Dataset> {
    let mut pred = Dataset::create(out, ds.manifest.clone(), force)?;
    for name in ds.views(split) {
        let pose = ds.read_pose(name)?;
        let (rgb, alpha) = render_octree_view(tree, &ds.manifest.proxy, &pose, settings);
        pred.write_view(
            split,
            &View {
                name: name.clone(),
                pose,
                rgb,
                alpha,
            },
        )?;
    }
    Ok(pred)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViewScore {
    pub name: String,
    pub psnr: f64,
    pub ssim: f64,
    pub rmse: f64,
    pub alpha_rmse: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub peak: f64,
    pub views: Vec<ViewScore>,
    /// Mean of per-view PSNR.
    pub psnr: f64,
    pub ssim: f64,
    /// Over all pixels of all views.
    pub rmse: f64,
    pub alpha_rmse: f64,
}

impl EvalReport {
    /// Whitespace-separated table with a final `mean` row.
    pub fn to_table(&self) -> String {
        let mut s = format!(
            "{:<10} {:>10} {:>8} {:>12} {:>12}\n",
            "view", "psnr", "ssim", "rmse", "alpha_rmse"
        );
        let rows = self
            .views
            .iter()
            .map(|v| (v.name.as_str(), v.psnr, v.ssim, v.rmse, v.alpha_rmse));
        for (name, p, q, r, a) in rows.chain(std::iter::once((
            "mean",
            self.psnr,
            self.ssim,
            self.rmse,
            self.alpha_rmse,
        ))) {
            s.push_str(&format!(
                "{name:<10} {p:>10.4} {q:>8.5} {r:>12.6e} {a:>12.6e}\n"
            ));
        }
        s
    }
}

fn squared_error(a: &Image, b: &Image) -> Result<f64> {
    Ok(a.mse(b)? * a.data.len() as f64)
}

/// Compares the test views of `pred` against `gt`, with PSNR peak and SSIM
/// range equal to the dataset's maximum radiance.
pub fn evaluate(pred: &Dataset, gt: &Dataset, split: Split) -> Result<EvalReport> {
    let peak = gt.manifest.max_radiance;
    let names = gt.views(split);
    if names.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "ground truth has no {split:?} views"
        )));
    }
    let mut views = Vec::new();
    let (mut se, mut n, mut ase, mut an) = (0.0, 0usize, 0.0, 0usize);
    for name in names {
        let g = gt.load_view(name)?;
        let p = pred.load_view(name)?;
        let rmse = p.rgb.mse(&g.rgb)?.sqrt();
        let alpha_rmse = p.alpha.mse(&g.alpha)?.sqrt();
        se += squared_error(&p.rgb, &g.rgb)?;
        n += g.rgb.data.len();
        ase += squared_error(&p.alpha, &g.alpha)?;
        an += g.alpha.data.len();
        views.push(ViewScore {
            name: name.clone(),
            psnr: psnr(&p.rgb, &g.rgb, peak)?,
            ssim: ssim(&p.rgb, &g.rgb, peak)?,
            rmse,
            alpha_rmse,
        });
    }
    let k = views.len() as f64;
    Ok(EvalReport {
        peak,
        psnr: views.iter().map(|v| v.psnr).sum::<f64>() / k,
        ssim: views.iter().map(|v| v.ssim).sum::<f64>() / k,
        rmse: (se / n as f64).sqrt(),
        alpha_rmse: (ase / an as f64).sqrt(),
        views,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub rays: usize,
    pub hits: usize,
    /// Mean leaves visited per proxy-hitting ray.
    pub leaves_per_ray: f64,
    pub rays_per_sec: f64,
    pub seconds: f64,
}

/// Random rays aimed at the octree from a sphere around it, traversed with
/// `settings`. Ray generation does not count toward the timing.
pub fn bench_octree<T: Real>(
    tree: &Plenoctree<T>,
    settings: &MarchSettings,
    rays: usize,
    seed: u64,
) -> BenchReport {
    let bbox = tree.bbox();
    let center: Vec3<f64> = bbox.center().cast();
    let half = bbox.extent().x.to_f64_lossy() * 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let list: Vec<Ray<T>> = (0..rays)
        .map(|_| {
            let origin = center + random_unit(&mut rng) * (4.0 * half);
            let target = center + random_unit(&mut rng) * (half * rng.gen::<f64>());
            Ray::infinite(origin, (target - origin).normalized()).cast()
        })
        .collect();
    let start = Instant::now();
    let visits: Vec<usize> = list
        .par_iter()
        .map(|r| tree.traverse(r, settings).samples_evaluated)
        .collect();
    let seconds = start.elapsed().as_secs_f64();
    let hits = visits.iter().filter(|&&v| v > 0).count();
    BenchReport {
        rays,
        hits,
        leaves_per_ray: visits.iter().sum::<usize>() as f64 / hits.max(1) as f64,
        rays_per_sec: rays as f64 / seconds.max(1e-12),
        seconds,
    }
}

fn random_unit(rng: &mut impl Rng) -> Vec3<f64> {
    let z = 1.0 - 2.0 * rng.gen::<f64>();
    let phi = std::f64::consts::TAU * rng.gen::<f64>();
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}
