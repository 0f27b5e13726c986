//! Analytic luminaires used to synthesise training data.
//!
//! Each toy is defined directly as density plus SH logits under an
//! extended sigmoid with maximum [`TOY_L_MAX`], so a grid of matching
//! degree can represent it up to interpolation error.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::field::RadianceSource;
use crate::raymarch::Proxy;
use crate::scalar::Real;
use crate::shmath::{coeffs_per_channel, ActivationKind, CHANNELS};
use crate::vec3::{Aabb, Vec3};

/// Maximum emission of the toy activation; also the datasets' `L_max`.
pub const TOY_L_MAX: f64 = 10.0;
pub const TOY_HALF_EXTENT: f64 = 0.8;
pub const TOY_PROXY_RADIUS: f64 = 0.78;

const C0: f64 = 0.282_094_791_773_878_14;
const C1: f64 = 0.488_602_511_902_919_9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToyKind {
    /// Isotropic emissive ball.
    Sphere,
    /// Ball with a dark equatorial band and mild view dependence.
    Banded,
    /// Two small bulbs of different colors.
    Cluster,
}

impl ToyKind {
    pub const ALL: [ToyKind; 3] = [ToyKind::Sphere, ToyKind::Banded, ToyKind::Cluster];

    pub fn name(self) -> &'static str {
        match self {
            ToyKind::Sphere => "sphere",
            ToyKind::Banded => "banded",
            ToyKind::Cluster => "cluster",
        }
    }
}

impl fmt::Display for ToyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ToyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ToyKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::InvalidConfig(format!(
                    "unknown toy field '{s}' (expected sphere, banded or cluster)"
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToyLuminaire {
    pub kind: ToyKind,
}

fn smoothstep(e0: f64, e1: f64, x: f64) -> f64 {
    let t = ((x - e0) / (e1 - e0)).clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

/// Ball of radius `r` with a soft edge of half-width `w`.
fn ball(p: Vec3<f64>, center: Vec3<f64>, r: f64, w: f64, sigma: f64) -> f64 {
    sigma * (1.0 - smoothstep(r - w, r + w, (p - center).length()))
}

fn logit_of(emission: f64) -> f64 {
    let q = emission / TOY_L_MAX;
    (q / (1.0 - q)).ln()
}

impl ToyLuminaire {
    pub fn new(kind: ToyKind) -> Self {
        Self { kind }
    }

    pub fn activation() -> ActivationKind {
        ActivationKind::ExtendedSigmoid { max: TOY_L_MAX }
    }

    pub fn bbox_f64() -> Aabb<f64> {
        Aabb::centered_cube(TOY_HALF_EXTENT)
    }

    pub fn proxy<T: Real>() -> Proxy<T> {
        Proxy::Sphere {
            center: Vec3::zero(),
            radius: T::lit(TOY_PROXY_RADIUS),
        }
    }

    /// Density and degree-1 logits per channel
    /// `[dc, y, z, x]` at `p`.
    pub fn evaluate(&self, p: Vec3<f64>) -> (f64, [[f64; 4]; 3]) {
        let mut out = [[0.0; 4]; 3];
        let sigma = match self.kind {
            ToyKind::Sphere => {
                let dc = logit_of(6.0) / C0;
                for ch in &mut out {
                    ch[0] = dc;
                }
                ball(p, Vec3::zero(), 0.5, 0.08, 10.0)
            }
            ToyKind::Banded => {
                let band = 1.0 - smoothstep(0.08, 0.2, p.z.abs());
                let base = 8.0 - 7.95 * band;
                let tint = [1.0, 0.85, 0.7];
                for (ch, t) in out.iter_mut().zip(tint) {
                    ch[0] = logit_of(base * t) / C0;
                    ch[2] = 0.4 / C1;
                }
                ball(p, Vec3::zero(), 0.55, 0.1, 8.0)
            }
            ToyKind::Cluster => {
                let a = Vec3::lit(-0.3, 0.0, 0.0);
                let b = Vec3::lit(0.3, 0.0, 0.0);
                let (sa, sb) = (ball(p, a, 0.22, 0.06, 12.0), ball(p, b, 0.22, 0.06, 12.0));
                let color = if (p - a).length() < (p - b).length() {
                    [9.0, 7.0, 4.0]
                } else {
                    [3.0, 4.0, 6.0]
                };
                for (ch, c) in out.iter_mut().zip(color) {
                    ch[0] = logit_of(c) / C0;
                }
                sa + sb
            }
        };
        (sigma, out)
    }
}

impl<T: Real> RadianceSource<T> for ToyLuminaire {
    fn l_max(&self) -> usize {
        1
    }

    fn bbox(&self) -> Aabb<T> {
        Self::bbox_f64().cast()
    }

    fn sample(&self, p: Vec3<T>, coeffs: &mut [T]) -> T {
        let k = coeffs_per_channel(1);
        debug_assert_eq!(coeffs.len(), CHANNELS * k);
        let p = p.cast::<f64>();
        if !Self::bbox_f64().contains(p) {
            coeffs.iter_mut().for_each(|c| *c = T::zero());
            return T::zero();
        }
        let (sigma, logits) = self.evaluate(p);
        for (c, ch) in logits.iter().enumerate() {
            for (dst, &v) in coeffs[c * k..(c + 1) * k].iter_mut().zip(ch) {
                *dst = T::lit(v);
            }
        }
        T::lit(sigma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raymarch::{march, MarchSettings, Ray, TransmittanceModel};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn names_round_trip() {
        for k in ToyKind::ALL {
            assert_eq!(k.name().parse::<ToyKind>().unwrap(), k);
        }
        assert!("lamp".parse::<ToyKind>().is_err());
    }

    #[test]
    fn decoded_emission_matches_design() {
        let act = ToyLuminaire::activation();
        let toy = ToyLuminaire::new(ToyKind::Sphere);
        let (_, logits) = toy.evaluate(Vec3::zero());
        assert!((act.apply(logits[0][0] * C0) - 6.0).abs() < 1e-12);
        let toy = ToyLuminaire::new(ToyKind::Banded);
        let (_, logits) = toy.evaluate(Vec3::lit(0.5, 0.0, 0.0));
        assert!((act.apply(logits[0][0] * C0) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn center_ray_is_opaque() {
        let toy = ToyLuminaire::new(ToyKind::Sphere);
        let s = MarchSettings::exact(TransmittanceModel::Linear, ToyLuminaire::activation());
        let ray = Ray::new(
            Vec3::lit(0.0, 0.0, -2.0),
            Vec3::lit(0.0, 0.0, 1.0),
            0.0,
            4.0,
        )
        .unwrap();
        let ray = ray.clipped_to(&ToyLuminaire::proxy()).unwrap();
        let r = march::<f64, _, ChaCha8Rng>(&ray, &toy, &s, 512, None);
        assert_eq!(r.alpha, 1.0);
        // opaque linear medium with constant emission 6 yields 6/2
        assert!((r.radiance[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn outside_the_box_is_empty() {
        let toy = ToyLuminaire::new(ToyKind::Cluster);
        let mut c = [1.0f64; 12];
        assert_eq!(toy.sample(Vec3::lit(0.0, 0.0, 0.9), &mut c), 0.0);
        assert!(c.iter().all(|&v| v == 0.0));
    }
}
