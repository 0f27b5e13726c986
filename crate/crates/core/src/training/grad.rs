//! Forward and reverse-mode passes of the batch loss through marching, SH
//! decoding and the activations.
//!
//! Sample positions (coarse strata and resampled fine positions) are
//! treated as constants: gradients flow through sample values only.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::loss::{alpha_loss, color_loss, color_loss_gradient, LossConfig, LossTerms};
use super::{RayBatch, TrainConfig};
use crate::field::{RadianceFieldGrid, Stencil};
use crate::raymarch::{
    hierarchical_resample, opacity, sample_spacings, segment_weight, Ray, TransmittanceModel,
};
use crate::scalar::Real;
use crate::shmath::{coeffs_per_channel, sh_basis_into, CHANNELS};

/// Rays per work unit. Fixed so results do not depend on the thread count.
pub(crate) const CHUNK_RAYS: usize = 64;

/// Sample positions of one ray: coarse strata and extra fine positions,
/// both sorted ascending.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RayPlan<T> {
    pub coarse: Vec<T>,
    pub fine: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayPrediction<T> {
    pub coarse: [T; 3],
    pub fine: [T; 3],
    pub alpha: T,
}

/// Gradient laid out like the grid parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GridGradient<T> {
    pub values: Vec<T>,
    pub stride: usize,
}

impl<T: Real> GridGradient<T> {
    pub fn density(&self, voxel: usize) -> T {
        self.values[voxel * self.stride]
    }

    pub fn sh(&self, voxel: usize) -> &[T] {
        &self.values[voxel * self.stride + 1..(voxel + 1) * self.stride]
    }
}

/// Read-only per-iteration view of the grid with activations precomputed.
pub(crate) struct GridView<'a, T> {
    grid: &'a RadianceFieldGrid<T>,
    sigma: Vec<T>,
    sigma_deriv: Vec<T>,
    stride: usize,
    k: usize,
}

impl<'a, T: Real> GridView<'a, T> {
    pub fn new(grid: &'a RadianceFieldGrid<T>) -> Self {
        let act = grid.density_activation();
        let stride = grid.stride();
        let (sigma, sigma_deriv) = grid
            .params()
            .par_chunks_exact(stride)
            .map(|v| (act.apply(v[0]), act.derivative(v[0])))
            .unzip();
        Self {
            grid,
            sigma,
            sigma_deriv,
            stride,
            k: coeffs_per_channel(grid.l_max()),
        }
    }
}

/// Dense gradient accumulator that remembers which voxels it touched.
pub(crate) struct GradBuffer<T> {
    pub data: Vec<T>,
    pub touched: Vec<u32>,
    mark: Vec<bool>,
    stride: usize,
}

impl<T: Real> GradBuffer<T> {
    pub fn new(voxels: usize, stride: usize) -> Self {
        Self {
            data: vec![T::zero(); voxels * stride],
            touched: Vec::new(),
            mark: vec![false; voxels],
            stride,
        }
    }

    #[inline]
    fn voxel_mut(&mut self, v: usize) -> &mut [T] {
        if !self.mark[v] {
            self.mark[v] = true;
            self.touched.push(v as u32);
        }
        &mut self.data[v * self.stride..(v + 1) * self.stride]
    }

    /// Adds the touched entries into `out` and clears itself.
    pub fn drain_into(&mut self, out: &mut [T]) {
        let s = self.stride;
        for &v in &self.touched {
            let v = v as usize;
            for (o, g) in out[v * s..(v + 1) * s]
                .iter_mut()
                .zip(&mut self.data[v * s..(v + 1) * s])
            {
                *o += *g;
                *g = T::zero();
            }
            self.mark[v] = false;
        }
        self.touched.clear();
    }
}

#[derive(Clone, Copy)]
struct Sample<T> {
    t: T,
    stencil: Option<Stencil<T>>,
    sigma: T,
    phi: [T; 3],
    dphi: [T; 3],
}

/// Per-worker buffers reused across rays.
pub(crate) struct Scratch<T> {
    samples: Vec<Sample<T>>,
    order: Vec<usize>,
    coarse_order: Vec<usize>,
    ts: Vec<T>,
    deltas: Vec<T>,
    weights: Vec<T>,
    aux: Vec<(T, T)>,
    g_sigma: Vec<T>,
    g_phi: Vec<[T; 3]>,
    u: Vec<T>,
    coeffs: Vec<T>,
    gcoef: Vec<T>,
}

impl<T: Real> Scratch<T> {
    pub fn new() -> Self {
        Self {
            samples: Vec::new(),
            order: Vec::new(),
            coarse_order: Vec::new(),
            ts: Vec::new(),
            deltas: Vec::new(),
            weights: Vec::new(),
            aux: Vec::new(),
            g_sigma: Vec::new(),
            g_phi: Vec::new(),
            u: Vec::new(),
            coeffs: Vec::new(),
            gcoef: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct RayLoss {
    pub coarse: f64,
    pub fine: f64,
    pub alpha: f64,
}

/// Per-ray RNG stream keyed by seed, iteration and batch position.
pub(crate) fn ray_rng(seed: u64, iteration: u64, ray: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(ray);
    rng
}

fn eval_sample<T: Real>(
    view: &GridView<'_, T>,
    ray: &Ray<T>,
    t: T,
    basis: &[T],
    act: crate::shmath::ActivationKind,
    coeffs: &mut [T],
) -> Sample<T> {
    let p = ray.at(t);
    let mut s = Sample {
        t,
        stencil: None,
        sigma: T::zero(),
        phi: [T::zero(); 3],
        dphi: [T::zero(); 3],
    };
    let Some(st) = view.grid.stencil(p) else {
        let (v, d) = act.apply_with_derivative(T::zero());
        s.phi = [v; 3];
        s.dphi = [d; 3];
        return s;
    };
    let params = view.grid.params();
    let stride = view.stride;
    coeffs.iter_mut().for_each(|c| *c = T::zero());
    let mut sigma = T::zero();
    for (&v, &w) in st.index.iter().zip(&st.weight) {
        if w == T::zero() {
            continue;
        }
        sigma += w * view.sigma[v];
        for (c, &d) in coeffs
            .iter_mut()
            .zip(&params[v * stride + 1..(v + 1) * stride])
        {
            *c += w * d;
        }
    }
    let k = view.k;
    for c in 0..CHANNELS {
        let z: T = coeffs[c * k..(c + 1) * k]
            .iter()
            .zip(basis)
            .map(|(&a, &b)| a * b)
            .sum();
        let (v, d) = act.apply_with_derivative(z);
        s.phi[c] = v;
        s.dphi[c] = d;
    }
    s.sigma = sigma;
    s.stencil = Some(st);
    s
}

/// Composites samples visited in `order`; fills `weights` and the per-step
/// weight derivatives `aux` and returns `(rgb, alpha, d alpha / d tau)`.
fn composite<T: Real>(
    model: TransmittanceModel,
    samples: &[Sample<T>],
    order: &[usize],
    deltas: &[T],
    weights: &mut Vec<T>,
    aux: &mut Vec<(T, T)>,
) -> ([T; 3], T, T) {
    weights.clear();
    aux.clear();
    let mut rgb = [T::zero(); 3];
    let mut depth = T::zero();
    for (i, &r) in order.iter().enumerate() {
        let s = &samples[r];
        let tau = s.sigma * deltas[i];
        let (w, d_own, d_prev) = segment_weight(model, depth, tau);
        aux.push((d_own, d_prev));
        depth += tau;
        weights.push(w);
        for c in 0..3 {
            rgb[c] += w * s.phi[c];
        }
    }
    let (alpha, d_alpha) = opacity(model, depth);
    (rgb, alpha, d_alpha)
}

#[allow(clippy::too_many_arguments)]
fn composite_backward<T: Real>(
    samples: &[Sample<T>],
    order: &[usize],
    deltas: &[T],
    weights: &[T],
    aux: &[(T, T)],
    g_rgb: [T; 3],
    g_alpha: T,
    g_sigma: &mut [T],
    g_phi: &mut [[T; 3]],
) {
    // every weight depends on the optical depth of all earlier segments
    let mut suffix = T::zero();
    for i in (0..order.len()).rev() {
        let r = order[i];
        let s = &samples[r];
        let w = weights[i];
        let g_w = g_rgb[0] * s.phi[0] + g_rgb[1] * s.phi[1] + g_rgb[2] * s.phi[2];
        for c in 0..3 {
            g_phi[r][c] += g_rgb[c] * w;
        }
        let (d_own, d_prev) = aux[i];
        let g_tau = g_w * d_own + suffix + g_alpha;
        suffix += g_w * d_prev;
        g_sigma[r] += g_tau * deltas[i];
    }
}

struct RayContext<'a, 'b, T> {
    view: &'a GridView<'b, T>,
    lcfg: &'a LossConfig,
    tcfg: &'a TrainConfig,
    scale: T,
}

/// Coarse pass plus inverse-CDF placement of the fine samples. Leaves the
/// coarse samples in `scratch.samples[..n_coarse]`.
fn plan_into<T: Real>(
    ctx: &RayContext<'_, '_, T>,
    ray: &Ray<T>,
    rng: &mut ChaCha8Rng,
    basis: &[T],
    scratch: &mut Scratch<T>,
) -> RayPlan<T> {
    let tcfg = ctx.tcfg;
    let n = tcfg.n_coarse;
    let width = (ray.t_far - ray.t_near) / T::from_usize_lossy(n);
    let coarse: Vec<T> = (0..n)
        .map(|i| {
            let u = if tcfg.stratified_jitter {
                T::lit(rng.gen::<f64>())
            } else {
                T::half()
            };
            ray.t_near + (T::from_usize_lossy(i) + u) * width
        })
        .collect();
    fill_samples(ctx, ray, &coarse, basis, scratch);
    scratch.coarse_order.clear();
    scratch.coarse_order.extend(0..n);
    let deltas = sample_spacings(&coarse, ray.t_near, ray.t_far);
    composite(
        tcfg.model,
        &scratch.samples,
        &scratch.coarse_order,
        &deltas,
        &mut scratch.weights,
        &mut scratch.aux,
    );
    scratch.u.clear();
    let m = tcfg.n_fine;
    for j in 0..m {
        let jitter = if tcfg.stratified_jitter {
            T::lit(rng.gen::<f64>())
        } else {
            T::half()
        };
        scratch
            .u
            .push((T::from_usize_lossy(j) + jitter) / T::from_usize_lossy(m));
    }
    let fine = hierarchical_resample(&scratch.weights, ray.t_near, ray.t_far, &scratch.u).ts;
    RayPlan { coarse, fine }
}

fn fill_samples<T: Real>(
    ctx: &RayContext<'_, '_, T>,
    ray: &Ray<T>,
    ts: &[T],
    basis: &[T],
    scratch: &mut Scratch<T>,
) {
    let act = ctx.tcfg.activation;
    scratch.samples.clear();
    scratch.coeffs.resize(CHANNELS * ctx.view.k, T::zero());
    for &t in ts {
        let s = eval_sample(ctx.view, ray, t, basis, act, &mut scratch.coeffs);
        scratch.samples.push(s);
    }
}

fn append_samples<T: Real>(
    ctx: &RayContext<'_, '_, T>,
    ray: &Ray<T>,
    ts: &[T],
    basis: &[T],
    scratch: &mut Scratch<T>,
) {
    let act = ctx.tcfg.activation;
    scratch.coeffs.resize(CHANNELS * ctx.view.k, T::zero());
    for &t in ts {
        let s = eval_sample(ctx.view, ray, t, basis, act, &mut scratch.coeffs);
        scratch.samples.push(s);
    }
}

/// Loss (and optionally gradient) of one ray whose coarse samples are already
/// in `scratch.samples[..plan.coarse.len()]`.
#[allow(clippy::too_many_arguments)]
fn ray_loss<T: Real>(
    ctx: &RayContext<'_, '_, T>,
    ray: &Ray<T>,
    plan: &RayPlan<T>,
    gt: [T; 3],
    gt_alpha: T,
    basis: &[T],
    scratch: &mut Scratch<T>,
    grad: Option<&mut GradBuffer<T>>,
    prediction: Option<&mut RayPrediction<T>>,
) -> RayLoss {
    let tcfg = ctx.tcfg;
    let nc = plan.coarse.len();
    scratch.samples.truncate(nc);
    append_samples(ctx, ray, &plan.fine, basis, scratch);
    let total = scratch.samples.len();

    // merge the two sorted runs into the union order
    scratch.order.clear();
    let (mut a, mut b) = (0, nc);
    while a < nc || b < total {
        if b >= total || (a < nc && scratch.samples[a].t <= scratch.samples[b].t) {
            scratch.order.push(a);
            a += 1;
        } else {
            scratch.order.push(b);
            b += 1;
        }
    }
    scratch.coarse_order.clear();
    scratch.coarse_order.extend(0..nc);

    let coarse_deltas = sample_spacings(&plan.coarse, ray.t_near, ray.t_far);
    let (coarse_rgb, _, _) = composite(
        tcfg.model,
        &scratch.samples,
        &scratch.coarse_order,
        &coarse_deltas,
        &mut scratch.weights,
        &mut scratch.aux,
    );
    let coarse_weights = scratch.weights.clone();
    let coarse_aux = scratch.aux.clone();

    scratch.ts.clear();
    scratch
        .ts
        .extend(scratch.order.iter().map(|&r| scratch.samples[r].t));
    scratch.deltas = sample_spacings(&scratch.ts, ray.t_near, ray.t_far);
    let (fine_rgb, fine_alpha, d_alpha) = composite(
        tcfg.model,
        &scratch.samples,
        &scratch.order,
        &scratch.deltas,
        &mut scratch.weights,
        &mut scratch.aux,
    );
    if let Some(p) = prediction {
        *p = RayPrediction {
            coarse: coarse_rgb,
            fine: fine_rgb,
            alpha: fine_alpha,
        };
    }

    let lcfg = ctx.lcfg;
    let loss = RayLoss {
        coarse: color_loss(coarse_rgb, gt, lcfg).to_f64_lossy(),
        fine: color_loss(fine_rgb, gt, lcfg).to_f64_lossy(),
        alpha: alpha_loss(fine_alpha, gt_alpha).to_f64_lossy(),
    };

    let Some(grad) = grad else {
        return loss;
    };
    let [wc, wf, wa] = lcfg.term_weights.map(T::lit);
    let scale = ctx.scale;
    let g_coarse = color_loss_gradient(coarse_rgb, gt, lcfg).map(|g| g * wc * scale);
    let g_fine = color_loss_gradient(fine_rgb, gt, lcfg).map(|g| g * wf * scale);
    let g_alpha = T::two() * (fine_alpha - gt_alpha) * wa * scale;

    scratch.g_sigma.clear();
    scratch.g_sigma.resize(total, T::zero());
    scratch.g_phi.clear();
    scratch.g_phi.resize(total, [T::zero(); 3]);
    composite_backward(
        &scratch.samples,
        &scratch.order,
        &scratch.deltas,
        &scratch.weights,
        &scratch.aux,
        g_fine,
        g_alpha * d_alpha,
        &mut scratch.g_sigma,
        &mut scratch.g_phi,
    );
    composite_backward(
        &scratch.samples,
        &scratch.coarse_order,
        &coarse_deltas,
        &coarse_weights,
        &coarse_aux,
        g_coarse,
        T::zero(),
        &mut scratch.g_sigma,
        &mut scratch.g_phi,
    );
    scatter(
        ctx.view,
        &scratch.samples,
        &scratch.g_sigma,
        &scratch.g_phi,
        basis,
        &mut scratch.gcoef,
        grad,
    );
    loss
}

fn scatter<T: Real>(
    view: &GridView<'_, T>,
    samples: &[Sample<T>],
    g_sigma: &[T],
    g_phi: &[[T; 3]],
    basis: &[T],
    gcoef: &mut Vec<T>,
    grad: &mut GradBuffer<T>,
) {
    let k = view.k;
    gcoef.resize(CHANNELS * k, T::zero());
    for (r, s) in samples.iter().enumerate() {
        let Some(st) = &s.stencil else { continue };
        let gs = g_sigma[r];
        for c in 0..CHANNELS {
            let gz = g_phi[r][c] * s.dphi[c];
            for (dst, &y) in gcoef[c * k..(c + 1) * k].iter_mut().zip(basis) {
                *dst = gz * y;
            }
        }
        for (&v, &w) in st.index.iter().zip(&st.weight) {
            if w == T::zero() {
                continue;
            }
            let dsig = view.sigma_deriv[v];
            let slot = grad.voxel_mut(v);
            slot[0] += gs * w * dsig;
            for (dst, &g) in slot[1..].iter_mut().zip(gcoef.iter()) {
                *dst += w * g;
            }
        }
    }
}

fn ray_basis<T: Real>(l_max: usize, ray: &Ray<T>) -> [T; 25] {
    let mut basis = [T::zero(); 25];
    sh_basis_into(l_max, -ray.dir, &mut basis);
    basis
}

#[inline]
fn is_degenerate<T: Real>(ray: &Ray<T>) -> bool {
    !(ray.t_far > ray.t_near)
}

fn missed_ray_loss<T: Real>(gt: [T; 3], gt_alpha: T, lcfg: &LossConfig) -> RayLoss {
    let zero = [T::zero(); 3];
    let c = color_loss(zero, gt, lcfg).to_f64_lossy();
    RayLoss {
        coarse: c,
        fine: c,
        alpha: alpha_loss(T::zero(), gt_alpha).to_f64_lossy(),
    }
}

fn combine(sums: RayLoss, n: usize, lcfg: &LossConfig) -> LossTerms {
    let n = n.max(1) as f64;
    let [wc, wf, wa] = lcfg.term_weights;
    let coarse = sums.coarse / n;
    let fine = sums.fine / n;
    let alpha = sums.alpha / n;
    LossTerms {
        coarse,
        fine,
        alpha,
        total: wc * coarse + wf * fine + wa * alpha,
    }
}

/// Core batch evaluation shared by the public entry points and the trainer.
/// `plans`, when given, fixes the sample positions; otherwise they are drawn
/// from the `(seed, iteration)` stream.
#[allow(clippy::too_many_arguments)]
pub(crate) fn evaluate_batch<T: Real>(
    batch: &RayBatch<T>,
    view: &GridView<'_, T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
    iteration: u64,
    plans: Option<&[RayPlan<T>]>,
    buffers: Option<&mut [GradBuffer<T>]>,
    want_plans: bool,
) -> (LossTerms, Vec<RayPlan<T>>, Vec<RayPrediction<T>>) {
    let n = batch.len();
    let chunks = n.div_ceil(CHUNK_RAYS);
    let scale = T::one() / T::from_usize_lossy(n.max(1));
    let ctx = RayContext {
        view,
        lcfg,
        tcfg,
        scale,
    };
    let l_max = view.grid.l_max();

    let run_chunk = |c: usize, mut grad: Option<&mut GradBuffer<T>>| {
        let mut scratch = Scratch::new();
        let mut sums = RayLoss::default();
        let mut chunk_plans = Vec::new();
        let mut preds = Vec::new();
        for i in c * CHUNK_RAYS..((c + 1) * CHUNK_RAYS).min(n) {
            let ray = &batch.rays[i];
            let (gt, ga) = (batch.gt_radiance[i], batch.gt_alpha[i]);
            let zero = RayPrediction {
                coarse: [T::zero(); 3],
                fine: [T::zero(); 3],
                alpha: T::zero(),
            };
            if is_degenerate(ray) {
                let l = missed_ray_loss(gt, ga, lcfg);
                sums.coarse += l.coarse;
                sums.fine += l.fine;
                sums.alpha += l.alpha;
                if want_plans {
                    chunk_plans.push(RayPlan::default());
                }
                preds.push(zero);
                continue;
            }
            let basis = ray_basis(l_max, ray);
            let basis = &basis[..view.k];
            let plan = match plans {
                Some(p) => {
                    fill_samples(&ctx, ray, &p[i].coarse, basis, &mut scratch);
                    p[i].clone()
                }
                None => {
                    let mut rng = ray_rng(tcfg.seed, iteration, i as u64);
                    plan_into(&ctx, ray, &mut rng, basis, &mut scratch)
                }
            };
            let mut pred = zero;
            let l = ray_loss(
                &ctx,
                ray,
                &plan,
                gt,
                ga,
                basis,
                &mut scratch,
                grad.as_deref_mut(),
                Some(&mut pred),
            );
            sums.coarse += l.coarse;
            sums.fine += l.fine;
            sums.alpha += l.alpha;
            preds.push(pred);
            if want_plans {
                chunk_plans.push(plan);
            }
        }
        (sums, chunk_plans, preds)
    };

    let results: Vec<_> = match buffers {
        Some(buffers) => {
            assert!(buffers.len() >= chunks, "one gradient buffer per chunk");
            buffers[..chunks]
                .par_iter_mut()
                .enumerate()
                .map(|(c, buf)| run_chunk(c, Some(buf)))
                .collect()
        }
        None => (0..chunks)
            .into_par_iter()
            .map(|c| run_chunk(c, None))
            .collect(),
    };

    let mut sums = RayLoss::default();
    let mut all_plans = Vec::new();
    let mut all_preds = Vec::with_capacity(n);
    for (s, p, q) in results {
        sums.coarse += s.coarse;
        sums.fine += s.fine;
        sums.alpha += s.alpha;
        all_plans.extend(p);
        all_preds.extend(q);
    }
    (combine(sums, n, lcfg), all_plans, all_preds)
}

pub(crate) fn reduce_buffers<T: Real>(buffers: &mut [GradBuffer<T>], out: &mut [T]) {
    // fixed chunk order keeps the summation deterministic
    for b in buffers {
        b.drain_into(out);
    }
}

/// Sample plans drawn from the `(tcfg.seed, iteration 0)` stream.
pub fn plan_batch<T: Real>(
    batch: &RayBatch<T>,
    grid: &RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
) -> Vec<RayPlan<T>> {
    let view = GridView::new(grid);
    evaluate_batch(batch, &view, lcfg, tcfg, 0, None, None, true).1
}

/// Mean coarse, fine and alpha loss terms over the batch.
pub fn batch_loss<T: Real>(
    batch: &RayBatch<T>,
    grid: &RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
) -> LossTerms {
    let view = GridView::new(grid);
    evaluate_batch(batch, &view, lcfg, tcfg, 0, None, None, false).0
}

pub fn batch_loss_with_plans<T: Real>(
    batch: &RayBatch<T>,
    grid: &RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
    plans: &[RayPlan<T>],
) -> LossTerms {
    let view = GridView::new(grid);
    evaluate_batch(batch, &view, lcfg, tcfg, 0, Some(plans), None, false).0
}

pub fn batch_predictions_with_plans<T: Real>(
    batch: &RayBatch<T>,
    grid: &RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
    plans: &[RayPlan<T>],
) -> Vec<RayPrediction<T>> {
    let view = GridView::new(grid);
    evaluate_batch(batch, &view, lcfg, tcfg, 0, Some(plans), None, false).2
}

fn gradient_impl<T: Real>(
    batch: &RayBatch<T>,
    grid: &RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
    plans: Option<&[RayPlan<T>]>,
) -> (LossTerms, GridGradient<T>) {
    let view = GridView::new(grid);
    let chunks = batch.len().div_ceil(CHUNK_RAYS);
    let mut buffers: Vec<_> = (0..chunks)
        .map(|_| GradBuffer::new(grid.voxel_count(), grid.stride()))
        .collect();
    let (terms, _, _) = evaluate_batch(
        batch,
        &view,
        lcfg,
        tcfg,
        0,
        plans,
        Some(&mut buffers),
        false,
    );
    let mut values = vec![T::zero(); grid.params().len()];
    reduce_buffers(&mut buffers, &mut values);
    (
        terms,
        GridGradient {
            values,
            stride: grid.stride(),
        },
    )
}

/// Analytic gradient of the total batch loss with respect to the grid's
/// density logits and SH logits.
pub fn batch_gradient<T: Real>(
    batch: &RayBatch<T>,
    grid: &RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
) -> (LossTerms, GridGradient<T>) {
    gradient_impl(batch, grid, lcfg, tcfg, None)
}

pub fn batch_gradient_with_plans<T: Real>(
    batch: &RayBatch<T>,
    grid: &RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
    plans: &[RayPlan<T>],
) -> (LossTerms, GridGradient<T>) {
    gradient_impl(batch, grid, lcfg, tcfg, Some(plans))
}
