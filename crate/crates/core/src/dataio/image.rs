use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Float image, row-major from the top row, channels interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    /// 1 (grey) or 3 (RGB).
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(
            channels == 1 || channels == 3,
            "images have 1 or 3 channels"
        );
        Self {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if !(channels == 1 || channels == 3) || data.len() != width * height * channels {
            return Err(Error::ShapeMismatch {
                what: "image data",
                expected: width * height * channels,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.data[i..i + self.channels]
    }

    /// Single channel `c` as its own image.
    pub fn channel(&self, c: usize) -> Image {
        let data = self
            .data
            .chunks_exact(self.channels)
            .map(|p| p[c])
            .collect();
        Image::from_data(self.width, self.height, 1, data).expect("consistent shape")
    }

    /// Mirror left-right.
    pub fn flipped_horizontally(&self) -> Image {
        let mut out = self.clone();
        for y in 0..self.height {
            for x in 0..self.width {
                out.pixel_mut(self.width - 1 - x, y)
                    .copy_from_slice(self.pixel(x, y));
            }
        }
        out
    }

    fn check_same_shape(&self, other: &Image) -> Result<()> {
        if self.width != other.width
            || self.height != other.height
            || self.channels != other.channels
        {
            return Err(Error::ShapeMismatch {
                what: "image pair",
                expected: self.data.len(),
                actual: other.data.len(),
            });
        }
        Ok(())
    }

    pub fn mse(&self, other: &Image) -> Result<f64> {
        self.check_same_shape(other)?;
        let n = self.data.len().max(1) as f64;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| {
                let d = a as f64 - b as f64;
                d * d
            })
            .sum::<f64>()
            / n)
    }

    /// Writes a portable float map (`PF` for RGB, `Pf` for grey), little
    /// endian, rows bottom to top as the format requires.
    pub fn write_pfm(&self, w: &mut impl Write) -> Result<()> {
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        write!(w, "{tag}\n{} {}\n-1.0\n", self.width, self.height)?;
        let row = self.width * self.channels;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for y in (0..self.height).rev() {
            for v in &self.data[y * row..(y + 1) * row] {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_pfm(r: &mut impl Read, path: &Path) -> Result<Self> {
        let mut r = BufReader::new(r);
        let bad = |m: &str| Error::format(path, m.to_string());
        let mut tokens = Vec::new();
        // three whitespace-separated header fields, terminated by a single
        // whitespace byte
        let mut current = Vec::new();
        while tokens.len() < 4 {
            let mut b = [0u8; 1];
            if r.read(&mut b)? == 0 {
                return Err(bad("truncated PFM header"));
            }
            if b[0].is_ascii_whitespace() {
                if !current.is_empty() {
                    tokens.push(
                        String::from_utf8(std::mem::take(&mut current))
                            .map_err(|_| bad("non-ASCII header"))?,
                    );
                }
            } else {
                current.push(b[0]);
                if current.len() > 32 {
                    return Err(bad("malformed PFM header"));
                }
            }
        }
        let channels = match tokens[0].as_str() {
            "PF" => 3,
            "Pf" => 1,
            _ => return Err(bad("not a PFM file")),
        };
        let width: usize = tokens[1].parse().map_err(|_| bad("bad width"))?;
        let height: usize = tokens[2].parse().map_err(|_| bad("bad height"))?;
        let scale: f64 = tokens[3].parse().map_err(|_| bad("bad scale"))?;
        if scale == 0.0 || !scale.is_finite() {
            return Err(bad("bad scale"));
        }
        if width == 0 || height == 0 || width.saturating_mul(height) > 1 << 28 {
            return Err(bad("bad dimensions"));
        }
        let little = scale < 0.0;
        let row = width * channels;
        let mut raw = vec![0u8; row * height * 4];
        r.read_exact(&mut raw)
            .map_err(|_| bad("truncated PFM data"))?;
        if r.fill_buf()?.first().is_some() {
            return Err(bad("trailing bytes after PFM data"));
        }
        let mut data = vec![0f32; row * height];
        for (k, chunk) in raw.chunks_exact(4).enumerate() {
            let bytes: [u8; 4] = chunk.try_into().expect("4 bytes");
            let v = if little {
                f32::from_le_bytes(bytes)
            } else {
                f32::from_be_bytes(bytes)
            };
            let (file_row, col) = (k / row, k % row);
            data[(height - 1 - file_row) * row + col] = v;
        }
        Image::from_data(width, height, channels, data)
    }

    pub fn save_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_pfm(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load_pfm(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut f = std::fs::File::open(path)?;
        Self::read_pfm(&mut f, path)
    }

    /// 8-bit binary PPM preview with the global Reinhard operator
    /// `L / (1 + L)` applied per channel, then gamma 2.2.
    pub fn save_preview_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(w, "P6\n{} {}\n255\n", self.width, self.height)?;
        let mut buf = Vec::with_capacity(self.pixel_count() * 3);
        for p in self.data.chunks_exact(self.channels) {
            for c in 0..3 {
                let v = p[c.min(self.channels - 1)].max(0.0);
                let t = (v / (1.0 + v)).powf(1.0 / 2.2);
                buf.push((t * 255.0 + 0.5).clamp(0.0, 255.0) as u8);
            }
        }
        w.write_all(&buf)?;
        w.flush()?;
        Ok(())
    }
}

/// Root mean square error over all channels.
pub fn rmse(a: &Image, b: &Image) -> Result<f64> {
    Ok(a.mse(b)?.sqrt())
}

/// `10 log10(peak^2 / MSE)`; `+inf` for identical images.
pub fn psnr(a: &Image, b: &Image, peak: f64) -> Result<f64> {
    if !(peak > 0.0) {
        return Err(Error::InvalidConfig("PSNR peak must be positive".into()));
    }
    let mse = a.mse(b)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / mse).log10())
}

fn gaussian_window() -> [f64; 11] {
    let mut w = [0.0; 11];
    for (i, v) in w.iter_mut().enumerate() {
        let x = i as f64 - 5.0;
        *v = (-x * x / (2.0 * 1.5 * 1.5)).exp();
    }
    let s: f64 = w.iter().sum();
    w.map(|v| v / s)
}

/// Separable 11-tap filter over valid positions only.
fn filter_valid(src: &[f64], w: usize, h: usize, k: &[f64; 11]) -> Vec<f64> {
    let (ow, oh) = (w - 10, h - 10);
    let mut tmp = vec![0.0; ow * h];
    for y in 0..h {
        for x in 0..ow {
            tmp[y * ow + x] = (0..11).map(|i| k[i] * src[y * w + x + i]).sum();
        }
    }
    let mut out = vec![0.0; ow * oh];
    for y in 0..oh {
        for x in 0..ow {
            out[y * ow + x] = (0..11).map(|i| k[i] * tmp[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), `K1 = 0.01`,
/// `K2 = 0.03`, over windows fully inside the image, averaged over channels.
pub fn ssim(a: &Image, b: &Image, data_range: f64) -> Result<f64> {
    a.check_same_shape(b)?;
    if a.width < 11 || a.height < 11 {
        return Err(Error::InvalidConfig(format!(
            "SSIM needs at least 11x11 pixels (got {}x{})",
            a.width, a.height
        )));
    }
    if !(data_range > 0.0) {
        return Err(Error::InvalidConfig(
            "SSIM data range must be positive".into(),
        ));
    }
    let k = gaussian_window();
    let c1 = (0.01 * data_range).powi(2);
    let c2 = (0.03 * data_range).powi(2);
    let (w, h) = (a.width, a.height);
    let mut total = 0.0;
    for c in 0..a.channels {
        let x: Vec<f64> = a
            .data
            .iter()
            .skip(c)
            .step_by(a.channels)
            .map(|&v| v as f64)
            .collect();
        let y: Vec<f64> = b
            .data
            .iter()
            .skip(c)
            .step_by(a.channels)
            .map(|&v| v as f64)
            .collect();
        let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
        let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
        let xy: Vec<f64> = x.iter().zip(&y).map(|(p, q)| p * q).collect();
        let mx = filter_valid(&x, w, h, &k);
        let my = filter_valid(&y, w, h, &k);
        let sxx = filter_valid(&xx, w, h, &k);
        let syy = filter_valid(&yy, w, h, &k);
        let sxy = filter_valid(&xy, w, h, &k);
        let n = mx.len() as f64;
        let mut sum = 0.0;
        for i in 0..mx.len() {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            sum += ((2.0 * ux * uy + c1) * (2.0 * cov + c2))
                / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
        }
        total += sum / n;
    }
    Ok(total / a.channels as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(seed: u64, w: usize, h: usize, c: usize) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..w * h * c)
            .map(|_| rng.gen_range(-5.0f32..50.0))
            .collect();
        Image::from_data(w, h, c, data).unwrap()
    }

    #[test]
    fn pfm_round_trip_is_bitwise() {
        for c in [1, 3] {
            let img = random_image(c as u64, 7, 5, c);
            let mut bytes = Vec::new();
            img.write_pfm(&mut bytes).unwrap();
            let back = Image::read_pfm(&mut bytes.as_slice(), Path::new("mem")).unwrap();
            assert_eq!(back.data.len(), img.data.len());
            for (a, b) in back.data.iter().zip(&img.data) {
                assert_eq!(a.to_bits(), b.to_bits());
            }
            assert!(img.data.iter().any(|&v| v < 0.0));
        }
    }

    #[test]
    fn pfm_size_arithmetic() {
        let img = Image::from_data(1, 1, 3, vec![12.5; 3]).unwrap();
        let mut bytes = Vec::new();
        img.write_pfm(&mut bytes).unwrap();
        assert_eq!(bytes.len(), "PF\n1 1\n-1.0\n".len() + 12);
    }

    #[test]
    fn pfm_rejects_garbage() {
        for bad in [
            &b"P6\n1 1\n255\n..."[..],
            b"PF\n-1 1\n-1.0\n",
            b"PF\n2 2\n-1.0\n1234",
            b"PF\n1",
        ] {
            assert!(Image::read_pfm(&mut &bad[..], Path::new("mem")).is_err());
        }
    }

    #[test]
    fn big_endian_pfm_is_accepted() {
        let mut bytes = b"Pf\n1 2\n1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&2.5f32.to_be_bytes());
        let img = Image::read_pfm(&mut bytes.as_slice(), Path::new("mem")).unwrap();
        // first stored row is the bottom one
        assert_eq!(img.data, vec![2.5, 1.5]);
    }

    #[test]
    fn metric_examples() {
        let a = Image::from_data(2, 2, 1, vec![0.0; 4]).unwrap();
        let b = Image::from_data(2, 2, 1, vec![1.0; 4]).unwrap();
        assert_eq!(rmse(&a, &a).unwrap(), 0.0);
        assert_eq!(rmse(&a, &b).unwrap(), 1.0);
        let checker = Image::from_data(2, 2, 1, vec![0.0, 1.0, 1.0, 0.0]).unwrap();
        assert!((rmse(&checker, &a).unwrap() - 0.5f64.sqrt()).abs() < 1e-15);
        assert_eq!(psnr(&a, &a, 1.0).unwrap(), f64::INFINITY);
        let c = Image::from_data(1, 1, 1, vec![0.1]).unwrap();
        let z = Image::from_data(1, 1, 1, vec![0.0]).unwrap();
        assert!((psnr(&c, &z, 1.0).unwrap() - 20.0).abs() < 1e-6);
        assert!(rmse(&a, &c).is_err());
    }

    #[test]
    fn ssim_examples() {
        let img = random_image(9, 16, 16, 3);
        assert!((ssim(&img, &img, 55.0).unwrap() - 1.0).abs() < 1e-12);
        let data: Vec<f32> = (0..16 * 16)
            .map(|i| ((i % 16 + i / 16) % 2) as f32)
            .collect();
        let a = Image::from_data(16, 16, 1, data.clone()).unwrap();
        let b = Image::from_data(16, 16, 1, data.iter().map(|v| 1.0 - v).collect()).unwrap();
        assert!(ssim(&a, &b, 1.0).unwrap() < 0.0);
        let small = Image::new(8, 8, 1);
        assert!(ssim(&small, &small, 1.0).is_err());
    }
}
