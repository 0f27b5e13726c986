//! Fitting a [`RadianceFieldGrid`](crate::field::RadianceFieldGrid) to HDR
//! views with the coarse/fine HDR color loss and alpha supervision.

mod adam;
mod fit;
mod grad;
mod loss;

pub use adam::{Adam, AdamParams};
pub use fit::{
    fit, fit_from, load_checkpoint, save_checkpoint, write_history_csv, FitOutput, FitSnapshot,
    LossRecord, RayDataset, RaySupplier,
};
pub use grad::{
    batch_gradient, batch_gradient_with_plans, batch_loss, batch_loss_with_plans,
    batch_predictions_with_plans, plan_batch, GridGradient, RayPlan, RayPrediction,
};
pub use loss::{
    alpha_loss, color_loss, color_loss_gradient, hdr_color_loss, ColorLoss, LossConfig, LossTerms,
};

use crate::error::{Error, Result};
use crate::raymarch::{Ray, TransmittanceModel};
use crate::scalar::Real;
use crate::shmath::ActivationKind;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub batch_rays: usize,
    pub n_coarse: usize,
    pub n_fine: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    pub iterations: usize,
    pub seed: u64,
    pub model: TransmittanceModel,
    pub activation: ActivationKind,
    /// Jitter coarse samples within their strata.
    pub stratified_jitter: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_rays: 1024,
            n_coarse: 64,
            n_fine: 128,
            lr_start: 5e-4,
            lr_end: 5e-6,
            iterations: 0,
            seed: 0,
            model: TransmittanceModel::Linear,
            activation: ActivationKind::ExtendedSigmoid { max: 1.0 },
            stratified_jitter: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.activation.validate()?;
        if self.batch_rays == 0 || self.n_coarse == 0 {
            return Err(Error::InvalidConfig(
                "batch_rays and n_coarse must be >= 1".into(),
            ));
        }
        if !(self.lr_end > 0.0 && self.lr_start >= self.lr_end) {
            return Err(Error::InvalidConfig(format!(
                "learning rates must satisfy lr_start >= lr_end > 0 (got {} and {})",
                self.lr_start, self.lr_end
            )));
        }
        Ok(())
    }

    /// Exponentially decaying rate: `lr_start * (lr_end/lr_start)^(i/iterations)`.
    pub fn learning_rate(&self, iteration: usize) -> f64 {
        if self.iterations == 0 {
            return self.lr_start;
        }
        if iteration >= self.iterations {
            return self.lr_end;
        }
        let frac = iteration as f64 / self.iterations as f64;
        self.lr_start * (self.lr_end / self.lr_start).powf(frac)
    }
}

/// Rays with ground-truth radiance and opacity.
#[derive(Debug, Clone, Default)]
pub struct RayBatch<T> {
    pub rays: Vec<Ray<T>>,
    pub gt_radiance: Vec<[T; 3]>,
    pub gt_alpha: Vec<T>,
}

impl<T: Real> RayBatch<T> {
    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    pub fn push(&mut self, ray: Ray<T>, radiance: [T; 3], alpha: T) {
        self.rays.push(ray);
        self.gt_radiance.push(radiance);
        self.gt_alpha.push(alpha);
    }

    pub fn validate(&self) -> Result<()> {
        if self.rays.len() != self.gt_radiance.len() || self.rays.len() != self.gt_alpha.len() {
            return Err(Error::ShapeMismatch {
                what: "ray batch",
                expected: self.rays.len(),
                actual: self.gt_radiance.len().min(self.gt_alpha.len()),
            });
        }
        for (rgb, &a) in self.gt_radiance.iter().zip(&self.gt_alpha) {
            if rgb.iter().any(|&c| !(c >= T::zero()) || !c.is_finite())
                || !(a >= T::zero() && a <= T::one())
            {
                return Err(Error::InvalidConfig(
                    "ground truth outside its valid range".into(),
                ));
            }
        }
        Ok(())
    }
}
