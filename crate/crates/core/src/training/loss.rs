use crate::scalar::Real;
use crate::shmath::reinhard_weight;

/// Per-channel color loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ColorLoss {
    /// Squared error divided by `(lambda * pred + eps)^2`.
    #[default]
    HdrRegularized,
    /// Plain squared error.
    Mse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Scale of the prediction in the denominator; the dataset's maximum
    /// radiance.
    pub lambda: f64,
    pub eps: f64,
    /// Weights of the coarse color, fine color and alpha terms.
    pub term_weights: [f64; 3],
    pub color: ColorLoss,
    /// Differentiate through the denominator. Off by default: the
    /// denominator acts as a per-ray weight.
    pub denominator_gradient: bool,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            eps: 0.01,
            term_weights: [1.0, 1.0, 1.0],
            color: ColorLoss::HdrRegularized,
            denominator_gradient: false,
        }
    }
}

impl LossConfig {
    pub fn with_lambda(lambda: f64) -> Self {
        Self {
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> crate::error::Result<()> {
        let ok = self.lambda > 0.0
            && self.eps > 0.0
            && self.term_weights.iter().all(|&w| w >= 0.0 && w.is_finite());
        if !ok {
            return Err(crate::error::Error::InvalidConfig(format!(
                "loss needs lambda > 0, eps > 0 and non-negative weights (got {self:?})"
            )));
        }
        Ok(())
    }
}

/// Mean per-ray loss terms of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossTerms {
    pub coarse: f64,
    pub fine: f64,
    pub alpha: f64,
    pub total: f64,
}

/// `sum_c ((pred - gt) / (lambda * pred + eps))^2`.
pub fn hdr_color_loss<T: Real>(pred: [T; 3], gt: [T; 3], cfg: &LossConfig) -> T {
    let (lambda, eps) = (T::lit(cfg.lambda), T::lit(cfg.eps));
    pred.iter()
        .zip(&gt)
        .map(|(&p, &g)| {
            let q = (p - g) / reinhard_weight(p, lambda, eps);
            q * q
        })
        .sum()
}

pub fn color_loss<T: Real>(pred: [T; 3], gt: [T; 3], cfg: &LossConfig) -> T {
    match cfg.color {
        ColorLoss::HdrRegularized => hdr_color_loss(pred, gt, cfg),
        ColorLoss::Mse => pred.iter().zip(&gt).map(|(&p, &g)| (p - g) * (p - g)).sum(),
    }
}

/// Gradient of [`color_loss`] with respect to the prediction.
pub fn color_loss_gradient<T: Real>(pred: [T; 3], gt: [T; 3], cfg: &LossConfig) -> [T; 3] {
    let (lambda, eps) = (T::lit(cfg.lambda), T::lit(cfg.eps));
    let mut out = [T::zero(); 3];
    for c in 0..3 {
        let r = pred[c] - gt[c];
        out[c] = match cfg.color {
            ColorLoss::Mse => T::two() * r,
            ColorLoss::HdrRegularized => {
                let d = reinhard_weight(pred[c], lambda, eps);
                if cfg.denominator_gradient {
                    T::two() * r * (d - lambda * r) / (d * d * d)
                } else {
                    T::two() * r / (d * d)
                }
            }
        };
    }
    out
}

/// Squared opacity error.
pub fn alpha_loss<T: Real>(pred: T, gt: T) -> T {
    (pred - gt) * (pred - gt)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hdr_loss_examples() {
        let cfg = LossConfig::with_lambda(1.0);
        assert_eq!(hdr_color_loss([2.5f64; 3], [2.5; 3], &cfg), 0.0);
        let v = hdr_color_loss([1.0f64; 3], [0.0; 3], &cfg);
        assert!((v - 3.0 / (1.01f64 * 1.01)).abs() < 1e-12);
        assert!((v - 2.94089).abs() < 1e-5);
        let cfg = LossConfig::with_lambda(10.0);
        let v = hdr_color_loss([0.0f64; 3], [1.0; 3], &cfg);
        assert!((v - 30000.0).abs() < 1e-8);
    }

    #[test]
    fn alpha_loss_examples() {
        assert_eq!(alpha_loss(0.5f64, 0.5), 0.0);
        assert_eq!(alpha_loss(1.0f64, 0.0), 1.0);
        assert_eq!(alpha_loss(0.25f64, 0.75), 0.25);
    }

    #[test]
    fn full_gradient_matches_finite_differences() {
        let cfg = LossConfig {
            lambda: 4.0,
            denominator_gradient: true,
            ..LossConfig::default()
        };
        let pred = [0.3f64, 2.0, 0.01];
        let gt = [0.5f64, 1.0, 0.0];
        let g = color_loss_gradient(pred, gt, &cfg);
        for c in 0..3 {
            let h = 1e-7;
            let mut a = pred;
            let mut b = pred;
            a[c] += h;
            b[c] -= h;
            let fd = (color_loss(a, gt, &cfg) - color_loss(b, gt, &cfg)) / (2.0 * h);
            assert!((fd - g[c]).abs() < 1e-5 * fd.abs().max(1.0));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn brighter_predictions_are_penalized_less(
                p in 0.0f64..50.0,
                dp in 0.01f64..10.0,
                r in 0.01f64..5.0,
                lambda in 0.1f64..20.0,
            ) {
                // same absolute residual, larger prediction
                let cfg = LossConfig::with_lambda(lambda);
                let lo = hdr_color_loss([p + r; 3], [p; 3], &cfg);
                let hi = hdr_color_loss([p + dp + r; 3], [p + dp; 3], &cfg);
                prop_assert!(hi < lo);
            }
        }
    }
}
