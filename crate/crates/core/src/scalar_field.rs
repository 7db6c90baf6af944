//! Grayscale images as scalar fields over the pixel grid.
//!
//! A [`ScalarImage`] holds one finite real value per pixel in row-major
//! order. Images come from PNG or PGM files, and are usually normalized to
//! `[0, 1]` (and optionally smoothed) before persistence is computed so that
//! persistence thresholds mean the same thing regardless of bit depth.

use std::fs;
use std::io::Write;
use std::path::Path;

use image::DynamicImage;

use crate::error::{Error, Result};

/// Row-major grid of finite intensities.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl ScalarImage {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::EmptyImage);
        }
        if values.len() != width * height {
            return Err(Error::InvalidImage(format!(
                "expected {} values for a {width}x{height} image, got {}",
                width * height,
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidImage(format!(
                "non-finite value {} at index {i}",
                values[i]
            )));
        }
        Ok(Self {
            width,
            height,
            values,
        })
    }

    /// Builds an image by evaluating `f(x, y)` at every pixel.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    /// Minimum and maximum value.
    pub fn range(&self) -> (f64, f64) {
        self.values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Applies `v -> scale * v + offset` to every pixel.
    pub fn map_affine(&self, scale: f64, offset: f64) -> Result<Self> {
        let values = self.values.iter().map(|v| scale * v + offset).collect();
        Self::new(self.width, self.height, values)
    }

    /// Replaces every value `v` by `max_value - v`.
    pub fn invert(&self, max_value: f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            values: self.values.iter().map(|v| max_value - v).collect(),
        }
    }
}

/// Affine map onto `[0, 1]`. Constant images map to all zeros.
pub fn normalize(image: &ScalarImage) -> ScalarImage {
    let (lo, hi) = image.range();
    let span = hi - lo;
    let values = if span > 0.0 {
        image
            .values
            .iter()
            .map(|&v| ((v - lo) / span).clamp(0.0, 1.0))
            .collect()
    } else {
        vec![0.0; image.len()]
    };
    ScalarImage {
        width: image.width,
        height: image.height,
        values,
    }
}

/// Normalized 1D Gaussian weights for offsets `-radius..=radius`, radius `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as isize;
    let denom = 2.0 * sigma * sigma;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|k| (-((k * k) as f64) / denom).exp())
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    kernel
}

/// Separable Gaussian blur with clamp-to-border sampling.
///
/// `sigma == 0` returns the input unchanged.
pub fn gaussian_smooth(image: &ScalarImage, sigma: f64) -> Result<ScalarImage> {
    if sigma < 0.0 || sigma.is_nan() {
        return Err(Error::NegativeSigma(sigma));
    }
    if sigma == 0.0 {
        return Ok(image.clone());
    }
    let kernel = gaussian_kernel(sigma);
    let radius = (kernel.len() / 2) as isize;
    let (w, h) = image.dims();

    let mut horizontal = vec![0.0; w * h];
    for y in 0..h {
        let row = &image.values[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sx = (x as isize + k as isize - radius).clamp(0, w as isize - 1) as usize;
                acc += weight * row[sx];
            }
            horizontal[y * w + x] = acc;
        }
    }

    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, weight) in kernel.iter().enumerate() {
                let sy = (y as isize + k as isize - radius).clamp(0, h as isize - 1) as usize;
                acc += weight * horizontal[sy * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    ScalarImage::new(w, h, out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Map `v` to `max_representable - v` so dark objects become maxima.
    pub invert: bool,
}

/// A decoded image together with the largest value its encoding can represent.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedImage {
    pub image: ScalarImage,
    pub max_representable: f64,
}

/// Loads a PNG or PGM (P2/P5) file as raw intensities.
pub fn load_image(path: impl AsRef<Path>, options: LoadOptions) -> Result<ScalarImage> {
    let decoded = decode_file(path)?;
    Ok(if options.invert {
        decoded.image.invert(decoded.max_representable)
    } else {
        decoded.image
    })
}

pub fn decode_file(path: impl AsRef<Path>) -> Result<DecodedImage> {
    let path = path.as_ref();
    let bytes = match fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(Error::FileNotFound(path.to_path_buf()))
        }
        Err(e) => return Err(e.into()),
    };
    decode_bytes(&bytes)
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0D, 0x0A, 0x1A, 0x0A];

pub fn decode_bytes(bytes: &[u8]) -> Result<DecodedImage> {
    if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes)
    } else if bytes.starts_with(b"P2") || bytes.starts_with(b"P5") {
        decode_pgm(bytes)
    } else {
        Err(Error::UnsupportedFormat(
            "expected a PNG or PGM (P2/P5) file".into(),
        ))
    }
}

fn luminance(r: f64, g: f64, b: f64) -> f64 {
    0.299 * r + 0.587 * g + 0.114 * b
}

fn decode_png(bytes: &[u8]) -> Result<DecodedImage> {
    let img = image::load_from_memory_with_format(bytes, image::ImageFormat::Png)
        .map_err(|e| Error::Decode(e.to_string()))?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w == 0 || h == 0 {
        return Err(Error::UnsupportedFormat("zero-dimension image".into()));
    }
    let (values, max): (Vec<f64>, f64) = match img {
        DynamicImage::ImageLuma8(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 255.0),
        DynamicImage::ImageLumaA8(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 255.0),
        DynamicImage::ImageLuma16(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 65535.0),
        DynamicImage::ImageLumaA16(buf) => (buf.pixels().map(|p| p.0[0] as f64).collect(), 65535.0),
        DynamicImage::ImageRgb8(buf) => (
            buf.pixels()
                .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            255.0,
        ),
        DynamicImage::ImageRgba8(buf) => (
            buf.pixels()
                .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            255.0,
        ),
        DynamicImage::ImageRgb16(buf) => (
            buf.pixels()
                .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            65535.0,
        ),
        DynamicImage::ImageRgba16(buf) => (
            buf.pixels()
                .map(|p| luminance(p.0[0] as f64, p.0[1] as f64, p.0[2] as f64))
                .collect(),
            65535.0,
        ),
        other => {
            return Err(Error::UnsupportedFormat(format!(
                "unsupported PNG color type {:?}",
                other.color()
            )))
        }
    };
    Ok(DecodedImage {
        image: ScalarImage::new(w, h, values)?,
        max_representable: max,
    })
}

/// Splits a PGM header into tokens, skipping `#` comments. Returns the
/// tokens and the byte offset just past the single whitespace byte that
/// follows the last token.
fn pgm_header(bytes: &[u8], count: usize) -> Result<(Vec<u64>, usize)> {
    let mut pos = 2;
    let mut tokens = Vec::with_capacity(count);
    while tokens.len() < count {
        match bytes.get(pos) {
            None => return Err(Error::Decode("truncated PGM header".into())),
            Some(b'#') => {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            }
            Some(c) if c.is_ascii_whitespace() => pos += 1,
            Some(c) if c.is_ascii_digit() => {
                let start = pos;
                while pos < bytes.len() && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
                let value = text
                    .parse::<u64>()
                    .map_err(|_| Error::Decode(format!("bad PGM header value {text}")))?;
                tokens.push(value);
            }
            Some(c) => {
                return Err(Error::Decode(format!(
                    "unexpected byte 0x{c:02x} in PGM header"
                )))
            }
        }
    }
    Ok((tokens, pos + 1))
}

fn decode_pgm(bytes: &[u8]) -> Result<DecodedImage> {
    let binary = bytes[1] == b'5';
    let (header, data_start) = pgm_header(bytes, 3)?;
    let (w, h, maxval) = (header[0] as usize, header[1] as usize, header[2]);
    if w == 0 || h == 0 {
        return Err(Error::UnsupportedFormat("zero-dimension image".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(Error::Decode(format!("PGM maxval {maxval} out of range")));
    }
    let n = w
        .checked_mul(h)
        .ok_or_else(|| Error::Decode("PGM dimensions overflow".into()))?;
    let values: Vec<f64> = if binary {
        let data = bytes.get(data_start..).unwrap_or(&[]);
        let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
        if data.len() < n * bytes_per_sample {
            return Err(Error::Decode(format!(
                "PGM raster truncated: need {} bytes, have {}",
                n * bytes_per_sample,
                data.len()
            )));
        }
        if bytes_per_sample == 1 {
            data[..n].iter().map(|&b| b as f64).collect()
        } else {
            data[..2 * n]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]) as f64)
                .collect()
        }
    } else {
        let text = std::str::from_utf8(bytes.get(data_start.min(bytes.len())..).unwrap_or(&[]))
            .map_err(|_| Error::Decode("non-ASCII PGM raster".into()))?;
        let samples: Vec<f64> = text
            .split_ascii_whitespace()
            .take(n)
            .map(|t| {
                t.parse::<u64>()
                    .map(|v| v as f64)
                    .map_err(|_| Error::Decode(format!("bad PGM sample {t}")))
            })
            .collect::<Result<_>>()?;
        if samples.len() < n {
            return Err(Error::Decode("PGM raster truncated".into()));
        }
        samples
    };
    if let Some(v) = values.iter().find(|&&v| v > maxval as f64) {
        return Err(Error::Decode(format!(
            "PGM sample {v} exceeds maxval {maxval}"
        )));
    }
    Ok(DecodedImage {
        image: ScalarImage::new(w, h, values)?,
        max_representable: maxval as f64,
    })
}

/// Quantizes a `[0, 1]` field to 16 bits.
fn quantize16(image: &ScalarImage) -> Vec<u16> {
    image
        .values
        .iter()
        .map(|v| (v.clamp(0.0, 1.0) * 65535.0).round() as u16)
        .collect()
}

/// Writes a `[0, 1]` field as a 16-bit grayscale PNG.
pub fn save_png16(image: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    write_png16(image.width, image.height, &quantize16(image), path)
}

/// Writes raw 16-bit samples as a grayscale PNG.
pub fn write_png16(
    width: usize,
    height: usize,
    samples: &[u16],
    path: impl AsRef<Path>,
) -> Result<()> {
    let buf = image::ImageBuffer::<image::Luma<u16>, Vec<u16>>::from_raw(
        width as u32,
        height as u32,
        samples.to_vec(),
    )
    .ok_or_else(|| Error::InvalidImage("sample count does not match dimensions".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => Error::Io(io),
            other => Error::Decode(other.to_string()),
        })
}

/// Writes a `[0, 1]` field as a binary PGM with maxval 65535.
pub fn save_pgm16(image: &ScalarImage, path: impl AsRef<Path>) -> Result<()> {
    let mut out = format!("P5\n{} {}\n65535\n", image.width, image.height).into_bytes();
    for s in quantize16(image) {
        out.extend_from_slice(&s.to_be_bytes());
    }
    let mut file = fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}
