#![allow(dead_code)]

use lumifield::field::{GridInit, RadianceFieldGrid};
use lumifield::raymarch::{Proxy, Ray, TransmittanceModel};
use lumifield::shmath::ActivationKind;
use lumifield::training::{
    batch_gradient_with_plans, batch_loss_with_plans, plan_batch, LossConfig, RayBatch, TrainConfig,
};
use lumifield::vec3::{Aabb, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_grid(seed: u64, res: usize, l_max: usize) -> RadianceFieldGrid<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g =
        RadianceFieldGrid::new([res; 3], Aabb::centered_cube(1.0), l_max, GridInit::Zeros).unwrap();
    let stride = g.stride();
    for (i, v) in g.params_mut().iter_mut().enumerate() {
        *v = if i % stride == 0 {
            rng.gen_range(-3.0..1.0)
        } else {
            rng.gen_range(-1.5..1.5)
        };
    }
    g
}

pub fn random_batch(seed: u64, n: usize) -> RayBatch<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xBA7C);
    let cube = Proxy::Box {
        min: Vec3::splat(-1.0),
        max: Vec3::splat(1.0),
    };
    let mut batch = RayBatch::default();
    while batch.len() < n {
        let d = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if d.length() < 0.1 {
            continue;
        }
        let d = d.normalized();
        let target = Vec3::new(
            rng.gen_range(-0.6..0.6),
            rng.gen_range(-0.6..0.6),
            rng.gen_range(-0.6..0.6),
        );
        let Some(ray) = Ray::infinite(target - d * 3.0, d).clipped_to(&cube) else {
            continue;
        };
        let rgb = [
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
            rng.gen_range(0.0..2.0),
        ];
        batch.push(ray, rgb, rng.gen_range(0.0..1.0));
    }
    batch
}

pub struct FdOutcome {
    pub checked: usize,
    pub agreeing: usize,
    pub worst: f64,
}

/// Compares the analytic gradient of the full loss against central
/// differences with step `h` on a random 4^3 grid and 8 rays.
pub fn finite_difference_check(
    seed: u64,
    model: TransmittanceModel,
    h: f64,
    tol: f64,
) -> FdOutcome {
    let grid = random_grid(seed, 4, 1);
    let batch = random_batch(seed, 8);
    let lcfg = LossConfig {
        lambda: 2.0,
        denominator_gradient: true,
        ..LossConfig::default()
    };
    let tcfg = TrainConfig {
        n_coarse: 16,
        n_fine: 16,
        model,
        activation: ActivationKind::ExtendedSigmoid { max: 3.0 },
        seed,
        ..TrainConfig::default()
    };
    let plans = plan_batch(&batch, &grid, &lcfg, &tcfg);
    let (_, grad) = batch_gradient_with_plans(&batch, &grid, &lcfg, &tcfg, &plans);
    let mut out = FdOutcome {
        checked: 0,
        agreeing: 0,
        worst: 0.0,
    };
    let mut probe = grid.clone();
    for i in 0..grid.params().len() {
        let g = grad.values[i];
        if g.abs() <= 1e-8 {
            continue;
        }
        let x = grid.params()[i];
        probe.params_mut()[i] = x + h;
        let up = batch_loss_with_plans(&batch, &probe, &lcfg, &tcfg, &plans).total;
        probe.params_mut()[i] = x - h;
        let down = batch_loss_with_plans(&batch, &probe, &lcfg, &tcfg, &plans).total;
        probe.params_mut()[i] = x;
        let fd = (up - down) / (2.0 * h);
        let rel = (fd - g).abs() / g.abs().max(fd.abs());
        out.checked += 1;
        if rel < tol {
            out.agreeing += 1;
        }
        out.worst = out.worst.max(rel);
    }
    out
}
