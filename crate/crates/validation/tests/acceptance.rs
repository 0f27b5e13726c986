//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any failed. Pass criterion numbers as arguments to
//! run a subset, e.g. `cargo test --test acceptance -- 1 3`.
//!
//! `LUMIFIELD_ACCEPT_ITERS` shortens the training runs for local
//! experiments; the default is the full 20k iterations and the printed
//! lines state what was used.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use lumifield::dataio::{CameraKind, CameraPose, Dataset, Split};
use lumifield::field::{Interpolation, RadianceSource};
use lumifield::pipeline::{self, EvalReport, FieldSource, FitConfig, GenConfig};
use lumifield::plenoctree::{ExtractionConfig, Plenoctree};
use lumifield::raymarch::{march, march_segments, MarchSettings, Proxy, Ray, TransmittanceModel};
use lumifield::renderer::{
    self, estimate_direct, luminaire_radiance, pixel_rng, EstimatorConfig, Geometry, Luminaire,
    Material, Scene, Surface,
};
use lumifield::shmath::ActivationKind;
use lumifield::toy::{ToyKind, ToyLuminaire};
use lumifield::training::ColorLoss;
use lumifield::vec3::{Aabb, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

const C0: f64 = 0.282_094_791_773_878_14;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Constant density and emission inside a box; the emission logit is
/// chosen for the exponential activation.
struct Uniform {
    bbox: Aabb<f64>,
    sigma: f64,
    emission: f64,
}

impl RadianceSource<f64> for Uniform {
    fn l_max(&self) -> usize {
        0
    }
    fn bbox(&self) -> Aabb<f64> {
        self.bbox
    }
    fn sample(&self, p: Vec3<f64>, coeffs: &mut [f64]) -> f64 {
        coeffs.fill(self.emission.ln() / C0);
        if self.bbox.contains(p) {
            self.sigma
        } else {
            0.0
        }
    }
}

// 1. Closed-form quadrature

fn quadrature() -> Outcome {
    let start = Instant::now();
    let ray = Ray::new(
        Vec3::lit(0.5, 0.5, -1.0),
        Vec3::lit(0.0, 0.0, 1.0),
        1.0,
        2.0,
    )
    .unwrap();
    let bbox = Aabb::new(Vec3::zero(), Vec3::splat(1.0));
    let run = |model, sigma: f64, emission: f64| {
        let src = Uniform {
            bbox,
            sigma,
            emission,
        };
        let settings = MarchSettings::exact(model, ActivationKind::Exponential);
        march::<f64, _, ChaCha8Rng>(&ray, &src, &settings, 4096, None)
    };
    let lin = run(TransmittanceModel::Linear, 1.0, 2.0);
    let exp = run(TransmittanceModel::Exponential, 2f64.ln(), 1.0);
    let secs = start.elapsed().as_secs_f64();
    let ok = (lin.radiance[0] - 1.0).abs() <= 1e-3
        && (lin.alpha - 1.0).abs() <= 1e-3
        && (exp.radiance[0] - 0.5).abs() <= 1e-3
        && secs < 1.0;
    outcome(
        ok,
        format!(
            "linear L={:.9} alpha={:.9}; exponential L={:.9} (tol 1e-3, {secs:.3}s < 1s)",
            lin.radiance[0], lin.alpha, exp.radiance[0]
        ),
    )
}

// 2. Gradient suite

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for model in [TransmittanceModel::Linear, TransmittanceModel::Exponential] {
        let (mut checked, mut agreeing) = (0, 0);
        for seed in 0..20 {
            let o = common::finite_difference_check(seed, model, 1e-4, 1e-4);
            checked += o.checked;
            agreeing += o.agreeing;
        }
        let frac = agreeing as f64 / checked as f64;
        ok &= frac >= 0.99;
        parts.push(format!(
            "{model:?} {agreeing}/{checked} = {:.2}%",
            100.0 * frac
        ));
    }
    let secs = start.elapsed().as_secs_f64();
    ok &= secs < 60.0;
    outcome(
        ok,
        format!(
            "{} within 1e-4 (need >= 99%), {secs:.1}s < 60s",
            parts.join(", ")
        ),
    )
}

// 3. Octree-grid equivalence

fn octree_equivalence() -> Outcome {
    let start = Instant::now();
    let depth = 3;
    let n = 1usize << depth;
    let mut grid = common::random_grid(17, n, 2);
    let stride = grid.stride();
    // a few voxels are empty enough to be pruned
    for v in (0..grid.voxel_count()).step_by(7) {
        grid.params_mut()[v * stride] = -40.0;
    }
    let sampler = grid.sampler(Interpolation::Constant);
    let cfg = ExtractionConfig {
        max_depth: depth,
        refine_samples: 8,
        ..ExtractionConfig::default()
    };
    let tree = Plenoctree::extract(&sampler, &cfg).unwrap();
    let act = ActivationKind::ExtendedSigmoid { max: 4.0 };
    let bbox = grid.bbox();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    let mut rays = 0;
    for i in 0..10_000 {
        let model = if i % 2 == 0 {
            TransmittanceModel::Linear
        } else {
            TransmittanceModel::Exponential
        };
        let settings = MarchSettings::exact(model, act);
        let origin = Vec3::new(
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
            rng.gen_range(-3.0..3.0),
        );
        let target = Vec3::new(
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.9..0.9),
            rng.gen_range(-0.9..0.9),
        );
        let ray = Ray::infinite(origin, (target - origin).normalized());
        let cube = Proxy::Box {
            min: bbox.min,
            max: bbox.max,
        };
        let Some(ray) = ray.clipped_to(&cube) else {
            continue;
        };
        rays += 1;
        // segment boundaries at every lattice plane the chord crosses
        let mut bounds = vec![ray.t_near, ray.t_far];
        for a in 0..3 {
            if ray.dir[a] == 0.0 {
                continue;
            }
            for k in 0..=n {
                let plane = bbox.min[a] + (bbox.max[a] - bbox.min[a]) * k as f64 / n as f64;
                let t = (plane - ray.origin[a]) / ray.dir[a];
                if t > ray.t_near && t < ray.t_far {
                    bounds.push(t);
                }
            }
        }
        bounds.sort_by(f64::total_cmp);
        let reference = march_segments(&ray, &sampler, &settings, &bounds);
        let got = tree.traverse(&ray, &settings);
        for c in 0..3 {
            worst = worst.max((reference.radiance[c] - got.radiance[c]).abs());
        }
        worst = worst.max((reference.alpha - got.alpha).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-6 && rays >= 9000 && secs < 10.0,
        format!("max abs difference {worst:.3e} over {rays} rays (tol 1e-6), {secs:.2}s < 10s"),
    )
}

// 4. Threshold fidelity

fn threshold_fidelity() -> Outcome {
    let toy = ToyLuminaire::new(ToyKind::Banded);
    let cfg = ExtractionConfig {
        max_depth: 6,
        ..ExtractionConfig::default()
    };
    let tree = Plenoctree::extract(&toy, &cfg).unwrap();
    let act = ToyLuminaire::activation();
    let exact = MarchSettings::exact(TransmittanceModel::Linear, act);
    let fast = MarchSettings::render_defaults(TransmittanceModel::Linear, act);
    let proxy = ToyLuminaire::proxy::<f64>();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut rel = Vec::new();
    let (mut abs_diff, mut total) = (0.0, 0.0);
    let (mut visits_exact, mut visits_fast) = (0usize, 0usize);
    let mut rays = 0;
    while rays < 20_000 {
        let origin = random_unit(&mut rng) * 3.0;
        let target = random_unit(&mut rng) * (0.78 * rng.gen::<f64>().cbrt());
        let Some(ray) = Ray::infinite(origin, (target - origin).normalized()).clipped_to(&proxy)
        else {
            continue;
        };
        rays += 1;
        let a = tree.traverse(&ray, &exact);
        let b = tree.traverse(&ray, &fast);
        visits_exact += a.samples_evaluated;
        visits_fast += b.samples_evaluated;
        for c in 0..3 {
            abs_diff += (a.radiance[c] - b.radiance[c]).abs();
            total += a.radiance[c];
            if a.radiance[c] > 0.0 {
                rel.push((a.radiance[c] - b.radiance[c]).abs() / a.radiance[c]);
            }
        }
    }
    rel.sort_by(f64::total_cmp);
    let q = |f: f64| rel[((rel.len() - 1) as f64 * f) as usize];
    let within = rel.iter().filter(|&&r| r < 0.01).count() as f64 / rel.len() as f64;
    let worst = *rel.last().unwrap();
    let drop = visits_exact as f64 / visits_fast as f64;
    outcome(
        worst < 0.01 && drop >= 2.0,
        format!(
            "per-ray relative change over {} lit ray channels: max {:.2}%, p50 {:.3}%, p90 {:.2}%, p99 {:.2}%, {:.1}% within 1% (need all); \
             radiance-weighted {:.3}%; leaf visits {:.1} -> {:.1} per ray ({drop:.2}x, need >= 2x)",
            rel.len(),
            100.0 * worst,
            100.0 * q(0.5),
            100.0 * q(0.9),
            100.0 * q(0.99),
            100.0 * within,
            100.0 * abs_diff / total,
            visits_exact as f64 / rays as f64,
            visits_fast as f64 / rays as f64
        ),
    )
}

// 5-7, 10. Toy pipeline fits

const FULL_ITERS: usize = 20_000;

fn iterations() -> usize {
    std::env::var("LUMIFIELD_ACCEPT_ITERS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(FULL_ITERS)
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
enum Variant {
    /// HDR-regularized color plus alpha, linear model, l_max 2.
    Base,
    NoAlpha,
    PlainMse,
    Exponential,
    Lmax4,
}

#[derive(Clone)]
struct FitResult {
    report: EvalReport,
    seconds: f64,
    payload_per_leaf: usize,
}

struct ToyPipeline {
    dir: tempfile::TempDir,
    ds: Dataset,
    gen_seconds: f64,
    fits: Mutex<HashMap<Variant, FitResult>>,
}

static PIPELINE: OnceLock<ToyPipeline> = OnceLock::new();

fn pipeline() -> &'static ToyPipeline {
    PIPELINE.get_or_init(|| {
        let start = Instant::now();
        let dir = tempfile::tempdir().unwrap();
        let cfg = GenConfig {
            field: FieldSource::Toy(ToyKind::Banded),
            n_train: 32,
            n_val: 0,
            n_test: 8,
            resolution: 128,
            ..GenConfig::default()
        };
        let ds = pipeline::gen_dataset(&dir.path().join("data"), &cfg, false).unwrap();
        ToyPipeline {
            dir,
            ds,
            gen_seconds: start.elapsed().as_secs_f64(),
            fits: Mutex::new(HashMap::new()),
        }
    })
}

fn fit_variant(v: Variant) -> FitResult {
    let p = pipeline();
    if let Some(r) = p.fits.lock().unwrap().get(&v) {
        return r.clone();
    }
    let start = Instant::now();
    let l_max = if v == Variant::Lmax4 { 4 } else { 2 };
    let mut cfg = FitConfig::for_dataset(&p.ds.manifest, 32, l_max, iterations(), 0);
    match v {
        Variant::NoAlpha => cfg.loss.term_weights[2] = 0.0,
        Variant::PlainMse => {
            cfg.loss.color = ColorLoss::Mse;
            cfg.loss.term_weights[2] = 0.0;
        }
        Variant::Exponential => cfg.train.model = TransmittanceModel::Exponential,
        _ => {}
    }
    let (grid, _) = pipeline::fit_dataset(&p.ds, &cfg, &mut |_| {}).unwrap();
    let tree = pipeline::extract_grid(&grid.cast::<f64>(), 5).unwrap();
    let settings = MarchSettings::render_defaults(cfg.train.model, cfg.train.activation);
    let out = p.dir.path().join(format!("{v:?}"));
    let pred = pipeline::render_views(&tree, &p.ds, Split::Test, &settings, &out, false).unwrap();
    let report = pipeline::evaluate(&pred, &p.ds, Split::Test).unwrap();
    let r = FitResult {
        report,
        seconds: start.elapsed().as_secs_f64(),
        payload_per_leaf: tree.stats().sh_payload_per_leaf,
    };
    p.fits.lock().unwrap().insert(v, r.clone());
    r
}

fn iters_note() -> String {
    let n = iterations();
    if n == FULL_ITERS {
        format!("{n} iterations")
    } else {
        format!("{n} iterations, SHORTENED from {FULL_ITERS}")
    }
}

fn scores(r: &FitResult) -> String {
    format!(
        "PSNR {:.2} dB, alpha RMSE {:.4}",
        r.report.psnr, r.report.alpha_rmse
    )
}

fn toy_pipeline() -> Outcome {
    let r = fit_variant(Variant::Base);
    let gen = pipeline().gen_seconds;
    let threads = rayon::current_num_threads();
    let wall = gen + r.seconds;
    // the budget is stated for 8 cores; fewer cores are scaled assuming
    // the near-linear parallel speedup of data-parallel training
    let normalized = wall * threads.min(8) as f64 / 8.0;
    outcome(
        r.report.psnr >= 30.0 && r.report.alpha_rmse <= 0.04 && normalized <= 1200.0,
        format!(
            "{} (need >= 30 dB, <= 0.04); wall {wall:.0}s on {threads} threads, {normalized:.0}s at 8 cores (need <= 1200s); {}",
            scores(&r),
            iters_note()
        ),
    )
}

fn loss_ablation() -> Outcome {
    let full = fit_variant(Variant::Base);
    let reg = fit_variant(Variant::NoAlpha);
    let mse = fit_variant(Variant::PlainMse);
    outcome(
        full.report.alpha_rmse < reg.report.alpha_rmse && reg.report.psnr > mse.report.psnr,
        format!(
            "MSE+reg+alpha: {}; MSE+reg: {}; MSE: {} (need alpha RMSE full < reg, PSNR reg > MSE); {}",
            scores(&full),
            scores(&reg),
            scores(&mse),
            iters_note()
        ),
    )
}

fn transmittance_ablation() -> Outcome {
    let lin = fit_variant(Variant::Base);
    let exp = fit_variant(Variant::Exponential);
    let diff = lin.report.psnr - exp.report.psnr;
    let direction = if diff >= 0.0 {
        "linear ahead"
    } else {
        "exponential ahead"
    };
    outcome(
        diff >= -0.1,
        format!(
            "linear {:.2} dB, exponential {:.2} dB, {direction} by {:.2} dB (need linear >= exponential - 0.1); {}",
            lin.report.psnr,
            exp.report.psnr,
            diff.abs(),
            iters_note()
        ),
    )
}

fn sh_sweep() -> Outcome {
    let l2 = fit_variant(Variant::Base);
    let l4 = fit_variant(Variant::Lmax4);
    let diff = (l4.report.psnr - l2.report.psnr).abs();
    let exact = l4.payload_per_leaf * 9 == l2.payload_per_leaf * 25;
    outcome(
        diff < 0.5 && exact,
        format!(
            "PSNR l_max 2: {:.2} dB, l_max 4: {:.2} dB, |diff| {diff:.3} dB (need < 0.5); payload {} -> {} values per leaf (ratio {}, need exactly 25/9); {}",
            l2.report.psnr,
            l4.report.psnr,
            l2.payload_per_leaf,
            l4.payload_per_leaf,
            if exact { "25/9" } else { "not 25/9" },
            iters_note()
        ),
    )
}

// 8-9. Renderer

/// Opaque linear medium of radiant power `power` filling the unit cube; a
/// unit sphere proxy around it renders as an opaque sphere of radiance
/// `power / 2`.
fn opaque_ball(power: f64, center: Vec3<f64>) -> Luminaire {
    let src = Uniform {
        bbox: Aabb::centered_cube(1.0),
        sigma: 1e4,
        emission: power,
    };
    let cfg = ExtractionConfig {
        max_depth: 5,
        refine_samples: 16,
        ..ExtractionConfig::default()
    };
    let tree = Plenoctree::<f64>::extract(&src, &cfg).unwrap();
    let settings =
        MarchSettings::render_defaults(TransmittanceModel::Linear, ActivationKind::Exponential);
    let mut l = Luminaire::new(
        Proxy::Sphere {
            center: Vec3::zero(),
            radius: 1.0,
        },
        Arc::new(tree),
        settings,
    );
    l.offset = center;
    l
}

fn camera(res: usize) -> CameraPose {
    CameraPose::looking_at_origin(
        CameraKind::Orthographic { width: 1.0 },
        Vec3::lit(0.0, 0.0, 5.0),
        (res, res),
    )
    .unwrap()
}

fn renderer_oracle() -> Outcome {
    let mut scene = Scene::new(camera(1), [0.0; 3]);
    scene.surfaces.push(Surface {
        geometry: Geometry::Plane {
            point: Vec3::zero(),
            normal: Vec3::lit(0.0, 0.0, 1.0),
        },
        material: Material::Lambertian { albedo: [1.0; 3] },
    });
    scene
        .luminaires
        .push(opaque_ball(2.0, Vec3::lit(0.0, 0.0, 2.0)));
    let up = Vec3::lit(0.0, 0.0, 1.0);
    let estimate = |seed: u64, trial: u64, n: usize| {
        let mut rng = pixel_rng(seed, trial);
        (0..n)
            .map(|_| estimate_direct(&scene, Vec3::zero(), up, [1.0; 3], &mut rng)[0])
            .sum::<f64>()
            / n as f64
    };
    let expected = 0.25;
    let single = estimate(0, 0, 16_384);
    let rel = (single - expected).abs() / expected;
    let counts = [256usize, 1024, 4096, 16_384];
    let trials = 64u64;
    let rms: Vec<f64> = counts
        .iter()
        .map(|&n| {
            let se: f64 = (0..trials)
                .into_par_iter()
                .map(|t| (estimate(1, t, n) - expected).powi(2))
                .sum();
            (se / trials as f64).sqrt()
        })
        .collect();
    // least-squares slope of log rms against log spp
    let xs: Vec<f64> = counts.iter().map(|&n| (n as f64).ln()).collect();
    let ys: Vec<f64> = rms.iter().map(|r| r.ln()).collect();
    let mx = xs.iter().sum::<f64>() / 4.0;
    let my = ys.iter().sum::<f64>() / 4.0;
    let slope = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    let rms_text: Vec<String> = counts
        .iter()
        .zip(&rms)
        .map(|(n, r)| format!("{n}: {r:.2e}"))
        .collect();
    outcome(
        rel <= 0.02 && (slope + 0.5).abs() <= 0.1,
        format!(
            "16k-sample estimate {single:.5} vs 0.25 ({:.2}% off, need <= 2%); RMS error over {trials} trials [{}], log-log slope {slope:.3} (need -0.5 +- 0.1)",
            100.0 * rel,
            rms_text.join(", ")
        ),
    )
}

fn compositing() -> Outcome {
    let background = [0.7f32, 1.5, 2.25];
    let mut scene = Scene::new(camera(8), [0.7, 1.5, 2.25]);
    let empty = Plenoctree::empty(Aabb::centered_cube(1.0), 3, 0).unwrap();
    let settings =
        MarchSettings::render_defaults(TransmittanceModel::Linear, ActivationKind::Exponential);
    scene.luminaires.push(Luminaire::new(
        Proxy::Box {
            min: Vec3::splat(-1.0),
            max: Vec3::splat(1.0),
        },
        Arc::new(empty),
        settings,
    ));
    let cfg = EstimatorConfig {
        spp: 4,
        ..EstimatorConfig::default()
    };
    let out = renderer::render(&scene, &cfg).unwrap();
    let invisible = out.image.data.chunks(3).all(|p| p == background);

    // ortho camera of width 1 sees only the central disc of the unit ball
    let mut scene = Scene::new(camera(8), [5.0, 5.0, 5.0]);
    scene.luminaires.push(opaque_ball(2.0, Vec3::zero()));
    let (le, alpha) = luminaire_radiance(
        &scene.luminaires[0],
        Vec3::lit(0.0, 0.0, 1.0),
        Vec3::lit(0.0, 0.0, 1.0),
    );
    let out = renderer::render(&scene, &cfg).unwrap();
    let worst = out
        .image
        .data
        .chunks(3)
        .flat_map(|p| p.iter().zip(&le).map(|(&a, &b)| (a as f64 - b).abs()))
        .fold(0.0f64, f64::max);
    outcome(
        invisible && alpha == 1.0 && worst <= 1e-6,
        format!(
            "empty proxy {} background; opaque chord alpha {alpha}, L_e {:.6}, max |pixel - L_e| {worst:.2e} (need <= 1e-6)",
            if invisible { "bitwise equals" } else { "DIFFERS from" },
            le[0]
        ),
    )
}

fn random_unit(rng: &mut impl Rng) -> Vec3<f64> {
    let z: f64 = rng.gen_range(-1.0..1.0);
    let phi = rng.gen_range(0.0..std::f64::consts::TAU);
    let r = (1.0 - z * z).sqrt();
    Vec3::new(r * phi.cos(), r * phi.sin(), z)
}

fn main() {
    let wanted: Vec<u32> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let criteria: Vec<(u32, &str, Box<dyn Fn() -> Outcome>)> = vec![
        (1, "closed-form quadrature", Box::new(quadrature)),
        (2, "gradient suite", Box::new(gradients)),
        (3, "octree-grid equivalence", Box::new(octree_equivalence)),
        (4, "threshold fidelity", Box::new(threshold_fidelity)),
        (5, "end-to-end toy pipeline", Box::new(toy_pipeline)),
        (6, "loss ablation", Box::new(loss_ablation)),
        (
            7,
            "transmittance ablation",
            Box::new(transmittance_ablation),
        ),
        (8, "renderer oracle", Box::new(renderer_oracle)),
        (9, "compositing identities", Box::new(compositing)),
        (10, "SH level sweep", Box::new(sh_sweep)),
    ];
    let mut failed = 0;
    for (n, name, f) in &criteria {
        if !wanted.is_empty() && !wanted.contains(n) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        println!(
            "criterion {n} ({name}): {verdict} - {} [{:.1}s]",
            o.detail,
            start.elapsed().as_secs_f64()
        );
        if !o.pass {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
