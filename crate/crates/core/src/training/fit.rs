use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::adam::{Adam, AdamParams};
use super::grad::{evaluate_batch, reduce_buffers, GradBuffer, GridView, CHUNK_RAYS};
use super::loss::LossConfig;
use super::{RayBatch, TrainConfig};
use crate::error::{Error, Result};
use crate::field::RadianceFieldGrid;
use crate::io_util::{read_exact_or, LeReader, LeWriter};
use crate::scalar::Real;

const ADAM_MAGIC: &[u8; 6] = b"LFADAM";

/// One row of the loss history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossRecord {
    pub iteration: usize,
    pub coarse: f64,
    pub fine: f64,
    pub alpha: f64,
    pub total: f64,
    pub lr: f64,
}

/// State captured when training aborts.
#[derive(Debug, Clone)]
pub struct FitSnapshot {
    pub iteration: usize,
    /// Grid serialized in the regular grid file format, before the failing update.
    pub grid_bytes: Vec<u8>,
    pub history: Vec<LossRecord>,
}

#[derive(Debug, Clone)]
pub struct FitOutput<T> {
    pub history: Vec<LossRecord>,
    pub optimizer: Adam<T>,
}

/// Source of training batches.
pub trait RaySupplier<T> {
    fn total_rays(&self) -> usize;

    /// Fills `out` with the `n` rays that follow position `offset` in the
    /// supplier's sequence.
    fn fill_batch(&mut self, offset: u64, n: usize, out: &mut RayBatch<T>);
}

/// All training rays in memory; every epoch visits each ray once in a
/// seed-determined order.
#[derive(Debug, Clone)]
pub struct RayDataset<T> {
    rays: RayBatch<T>,
    seed: u64,
    epoch: Option<u64>,
    order: Vec<u32>,
}

impl<T: Real> RayDataset<T> {
    pub fn new(rays: RayBatch<T>, seed: u64) -> Result<Self> {
        rays.validate()?;
        if rays.is_empty() {
            return Err(Error::InvalidConfig("training set has no rays".into()));
        }
        Ok(Self {
            rays,
            seed,
            epoch: None,
            order: Vec::new(),
        })
    }

    pub fn rays(&self) -> &RayBatch<T> {
        &self.rays
    }

    fn shuffle_for(&mut self, epoch: u64) {
        if self.epoch == Some(epoch) {
            return;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ 0x5EED_0F_5A11_0000);
        rng.set_stream(epoch);
        self.order.clear();
        self.order.extend(0..self.rays.len() as u32);
        self.order.shuffle(&mut rng);
        self.epoch = Some(epoch);
    }
}

impl<T: Real> RaySupplier<T> for RayDataset<T> {
    fn total_rays(&self) -> usize {
        self.rays.len()
    }

    fn fill_batch(&mut self, offset: u64, n: usize, out: &mut RayBatch<T>) {
        out.rays.clear();
        out.gt_radiance.clear();
        out.gt_alpha.clear();
        let len = self.rays.len() as u64;
        for k in 0..n as u64 {
            let pos = offset + k;
            self.shuffle_for(pos / len);
            let i = self.order[(pos % len) as usize] as usize;
            out.push(
                self.rays.rays[i],
                self.rays.gt_radiance[i],
                self.rays.gt_alpha[i],
            );
        }
    }
}

/// Trains `grid` in place for `tcfg.iterations` Adam steps.
pub fn fit<T: Real, S: RaySupplier<T>>(
    supplier: &mut S,
    grid: &mut RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
    callback: &mut dyn FnMut(&LossRecord, &RadianceFieldGrid<T>),
) -> Result<FitOutput<T>> {
    let adam = Adam::new(grid.params().len(), AdamParams::default());
    fit_from(supplier, grid, lcfg, tcfg, adam, callback)
}

/// Continues training with an existing optimizer state; `adam.step` is the
/// number of iterations already done.
pub fn fit_from<T: Real, S: RaySupplier<T>>(
    supplier: &mut S,
    grid: &mut RadianceFieldGrid<T>,
    lcfg: &LossConfig,
    tcfg: &TrainConfig,
    mut adam: Adam<T>,
    callback: &mut dyn FnMut(&LossRecord, &RadianceFieldGrid<T>),
) -> Result<FitOutput<T>> {
    tcfg.validate()?;
    lcfg.validate()?;
    if supplier.total_rays() == 0 {
        return Err(Error::InvalidConfig("training set has no rays".into()));
    }
    if adam.len() != grid.params().len() {
        return Err(Error::ShapeMismatch {
            what: "optimizer state",
            expected: grid.params().len(),
            actual: adam.len(),
        });
    }
    let chunks = tcfg.batch_rays.div_ceil(CHUNK_RAYS);
    let mut buffers: Vec<_> = (0..chunks)
        .map(|_| GradBuffer::new(grid.voxel_count(), grid.stride()))
        .collect();
    let mut grad = vec![T::zero(); grid.params().len()];
    let mut batch = RayBatch::default();
    let mut history = Vec::new();

    for iteration in adam.step as usize..tcfg.iterations {
        supplier.fill_batch(
            iteration as u64 * tcfg.batch_rays as u64,
            tcfg.batch_rays,
            &mut batch,
        );
        let lr = tcfg.learning_rate(iteration);
        let terms = {
            let view = GridView::new(grid);
            evaluate_batch(
                &batch,
                &view,
                lcfg,
                tcfg,
                iteration as u64,
                None,
                Some(&mut buffers),
                false,
            )
            .0
        };
        let record = LossRecord {
            iteration,
            coarse: terms.coarse,
            fine: terms.fine,
            alpha: terms.alpha,
            total: terms.total,
            lr,
        };
        if !terms.total.is_finite() {
            let mut grid_bytes = Vec::new();
            grid.write_to(&mut grid_bytes)?;
            history.push(record);
            return Err(Error::NonFiniteLoss {
                iteration,
                detail: format!(
                    "coarse={} fine={} alpha={}",
                    terms.coarse, terms.fine, terms.alpha
                ),
                snapshot: Box::new(FitSnapshot {
                    iteration,
                    grid_bytes,
                    history,
                }),
            });
        }
        grad.iter_mut().for_each(|g| *g = T::zero());
        reduce_buffers(&mut buffers, &mut grad);
        adam.update(grid.params_mut(), &grad, lr);
        history.push(record);
        callback(&record, grid);
    }
    Ok(FitOutput {
        history,
        optimizer: adam,
    })
}

/// Grid file followed by the optimizer block.
pub fn save_checkpoint<T: Real>(
    path: impl AsRef<Path>,
    grid: &RadianceFieldGrid<T>,
    adam: &Adam<T>,
) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    let mut out = std::io::BufWriter::new(file);
    grid.write_to(&mut out)?;
    let mut w = LeWriter::new(&mut out);
    w.bytes(ADAM_MAGIC)?;
    w.u64(adam.step)?;
    w.u64(adam.len() as u64)?;
    for &v in adam.m.iter().chain(&adam.v) {
        w.f32(v.to_f32_lossy())?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(path: impl AsRef<Path>) -> Result<(RadianceFieldGrid<T>, Adam<T>)> {
    let path = path.as_ref();
    let mut r = std::io::BufReader::new(std::fs::File::open(path)?);
    let grid = RadianceFieldGrid::read_from(&mut r, path)?;
    let mut magic = [0u8; 6];
    read_exact_or(&mut r, &mut magic, path, "optimizer block")?;
    if &magic != ADAM_MAGIC {
        return Err(Error::format(path, "missing optimizer block"));
    }
    let mut lr = LeReader::new(&mut r, path);
    let step = lr.u64()?;
    let len = lr.u64()? as usize;
    if len != grid.params().len() {
        return Err(Error::format(
            path,
            "optimizer state does not match the grid",
        ));
    }
    let mut raw = vec![0f32; 2 * len];
    lr.f32_slice(&mut raw)?;
    let mut adam = Adam::new(len, AdamParams::default());
    adam.step = step;
    for (dst, &src) in adam.m.iter_mut().chain(adam.v.iter_mut()).zip(&raw) {
        *dst = T::lit(src as f64);
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::format(path, "trailing bytes after checkpoint"));
    }
    Ok((grid, adam))
}

pub fn write_history_csv(path: impl AsRef<Path>, history: &[LossRecord]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "iteration,coarse,fine,alpha,total,lr")?;
    for r in history {
        writeln!(
            out,
            "{},{:e},{:e},{:e},{:e},{:e}",
            r.iteration, r.coarse, r.fine, r.alpha, r.total, r.lr
        )?;
    }
    out.flush()?;
    Ok(())
}
