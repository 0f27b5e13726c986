//! Real spherical harmonics up to degree 4 and the activations that turn an
//! SH-projected logit into emitted radiance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{sigmoid, Real};
use crate::vec3::Vec3;

/// Highest supported SH degree.
pub const MAX_SH_DEGREE: usize = 4;

/// Number of color channels carried by every coefficient set.
pub const CHANNELS: usize = 3;

const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;
const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];
const C4: [f64; 9] = [
    2.503_342_941_796_704_6,
    -1.770_130_769_779_930_4,
    0.946_174_695_757_560_1,
    -0.669_046_543_557_289_2,
    0.105_785_546_915_204_31,
    -0.669_046_543_557_289_2,
    0.473_087_347_878_780_04,
    -1.770_130_769_779_930_4,
    0.625_835_735_449_176_1,
];

/// Coefficients per channel for degree `l_max`.
#[inline]
pub const fn coeffs_per_channel(l_max: usize) -> usize {
    (l_max + 1) * (l_max + 1)
}

pub fn check_degree(l_max: usize) -> Result<()> {
    if l_max > MAX_SH_DEGREE {
        return Err(Error::InvalidShDegree(l_max));
    }
    Ok(())
}

/// How [`sh_basis`] treats a direction that is not unit length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DirectionPolicy {
    #[default]
    Reject,
    Normalize,
}

/// Evaluates the real SH basis for `dir` into `out`, which must hold at least
/// `(l_max+1)^2` values. Order is `l` ascending, `m` from `-l` to `l`.
///
/// The direction is assumed to be unit length; no check is performed here.
pub fn sh_basis_into<T: Real>(l_max: usize, dir: Vec3<T>, out: &mut [T]) {
    debug_assert!(l_max <= MAX_SH_DEGREE);
    let (x, y, z) = (dir.x, dir.y, dir.z);
    let c = T::lit;
    out[0] = c(C0);
    if l_max == 0 {
        return;
    }
    out[1] = -c(C1) * y;
    out[2] = c(C1) * z;
    out[3] = -c(C1) * x;
    if l_max == 1 {
        return;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    out[4] = c(C2[0]) * xy;
    out[5] = c(C2[1]) * yz;
    out[6] = c(C2[2]) * (c(2.0) * zz - xx - yy);
    out[7] = c(C2[3]) * xz;
    out[8] = c(C2[4]) * (xx - yy);
    if l_max == 2 {
        return;
    }
    out[9] = c(C3[0]) * y * (c(3.0) * xx - yy);
    out[10] = c(C3[1]) * xy * z;
    out[11] = c(C3[2]) * y * (c(4.0) * zz - xx - yy);
    out[12] = c(C3[3]) * z * (c(2.0) * zz - c(3.0) * xx - c(3.0) * yy);
    out[13] = c(C3[4]) * x * (c(4.0) * zz - xx - yy);
    out[14] = c(C3[5]) * z * (xx - yy);
    out[15] = c(C3[6]) * x * (xx - c(3.0) * yy);
    if l_max == 3 {
        return;
    }
    out[16] = c(C4[0]) * xy * (xx - yy);
    out[17] = c(C4[1]) * yz * (c(3.0) * xx - yy);
    out[18] = c(C4[2]) * xy * (c(7.0) * zz - T::one());
    out[19] = c(C4[3]) * yz * (c(7.0) * zz - c(3.0));
    out[20] = c(C4[4]) * (zz * (c(35.0) * zz - c(30.0)) + c(3.0));
    out[21] = c(C4[5]) * xz * (c(7.0) * zz - c(3.0));
    out[22] = c(C4[6]) * (xx - yy) * (c(7.0) * zz - T::one());
    out[23] = c(C4[7]) * xz * (xx - c(3.0) * yy);
    out[24] = c(C4[8]) * (xx * (xx - c(3.0) * yy) - yy * (c(3.0) * xx - yy));
}

/// Real SH basis values for a unit direction.
pub fn sh_basis<T: Real>(l_max: usize, dir: Vec3<T>, policy: DirectionPolicy) -> Result<Vec<T>> {
    check_degree(l_max)?;
    let len = dir.length();
    let dir = if (len - T::one()).abs().to_f64_lossy() <= 1e-9 {
        dir
    } else {
        match policy {
            DirectionPolicy::Normalize if len > T::zero() && len.is_finite() => dir / len,
            _ => return Err(Error::NonUnitDirection(len.to_f64_lossy())),
        }
    };
    let mut out = vec![T::zero(); coeffs_per_channel(l_max)];
    sh_basis_into(l_max, dir, &mut out);
    Ok(out)
}

/// Per-channel SH logits, channel-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ShCoeffs<T> {
    l_max: usize,
    values: Vec<T>,
}

impl<T: Real> ShCoeffs<T> {
    pub fn zeros(l_max: usize) -> Result<Self> {
        check_degree(l_max)?;
        Ok(Self {
            l_max,
            values: vec![T::zero(); CHANNELS * coeffs_per_channel(l_max)],
        })
    }

    pub fn from_values(l_max: usize, values: Vec<T>) -> Result<Self> {
        check_degree(l_max)?;
        let expected = CHANNELS * coeffs_per_channel(l_max);
        if values.len() != expected {
            return Err(Error::ShapeMismatch {
                what: "SH coefficient vector",
                expected,
                actual: values.len(),
            });
        }
        Ok(Self { l_max, values })
    }

    #[inline]
    pub fn l_max(&self) -> usize {
        self.l_max
    }

    #[inline]
    pub fn values(&self) -> &[T] {
        &self.values
    }

    #[inline]
    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn channel(&self, c: usize) -> &[T] {
        let k = coeffs_per_channel(self.l_max);
        &self.values[c * k..(c + 1) * k]
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }
}

/// Maps an SH-projected logit to radiance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    /// `max * sigmoid(x)`, bounded in `(0, max)`.
    ExtendedSigmoid { max: f64 },
    /// `e^x`.
    Exponential,
    /// `-ln(1 - sigmoid(x) + eps)`, softly bounded above by `-ln(eps)`.
    LogSigmoid { eps: f64 },
}

impl ActivationKind {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ActivationKind::ExtendedSigmoid { max } if !(max > 0.0 && max.is_finite()) => Err(
                Error::InvalidConfig(format!("extended sigmoid max must be > 0, got {max}")),
            ),
            ActivationKind::LogSigmoid { eps } if !(eps > 0.0 && eps < 1.0) => Err(
                Error::InvalidConfig(format!("log-sigmoid eps must be in (0,1), got {eps}")),
            ),
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn apply<T: Real>(&self, x: T) -> T {
        match *self {
            ActivationKind::ExtendedSigmoid { max } => T::lit(max) * sigmoid(x),
            ActivationKind::Exponential => x.exp(),
            ActivationKind::LogSigmoid { eps } => -(sigmoid(-x) + T::lit(eps)).ln(),
        }
    }

    /// Returns `(S(x), S'(x))`.
    #[inline]
    pub fn apply_with_derivative<T: Real>(&self, x: T) -> (T, T) {
        match *self {
            ActivationKind::ExtendedSigmoid { max } => {
                let s = sigmoid(x);
                let m = T::lit(max);
                (m * s, m * s * (T::one() - s))
            }
            ActivationKind::Exponential => {
                let e = x.exp();
                (e, e)
            }
            ActivationKind::LogSigmoid { eps } => {
                let s = sigmoid(x);
                let sn = sigmoid(-x);
                let denom = sn + T::lit(eps);
                (-denom.ln(), s * sn / denom)
            }
        }
    }
}

/// Emitted RGB radiance toward `dir` for one set of coefficients.
pub fn decode_emission<T: Real>(coeffs: &ShCoeffs<T>, dir: Vec3<T>, act: ActivationKind) -> [T; 3] {
    let k = coeffs_per_channel(coeffs.l_max);
    let mut basis = [T::zero(); 25];
    sh_basis_into(coeffs.l_max, dir, &mut basis);
    decode_with_basis(coeffs.values(), &basis[..k], act)
}

/// Decodes channel-major `coeffs` against a precomputed basis.
#[inline]
pub fn decode_with_basis<T: Real>(coeffs: &[T], basis: &[T], act: ActivationKind) -> [T; 3] {
    let k = basis.len();
    let mut rgb = [T::zero(); 3];
    for (c, out) in rgb.iter_mut().enumerate() {
        let logit: T = coeffs[c * k..(c + 1) * k]
            .iter()
            .zip(basis)
            .map(|(&a, &b)| a * b)
            .sum();
        *out = act.apply(logit);
    }
    rgb
}

/// Denominator of the HDR-regularized color loss: `lambda * value + eps`.
#[inline]
pub fn reinhard_weight<T: Real>(value: T, lambda: T, eps: T) -> T {
    lambda * value + eps
}
