//! Synthetic "cells": bright flat ovals scattered over a dark background,
//! rendered together with an exact ground-truth label map.

use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::Connectivity;
use crate::scalar_field::{write_png16, ScalarImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oval {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// Radians.
    pub rotation: f64,
    pub intensity: f64,
}

impl Oval {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let (s, c) = self.rotation.sin_cos();
        let u = (dx * c + dy * s) / self.semi_axes.0;
        let v = (-dx * s + dy * c) / self.semi_axes.1;
        u * u + v * v <= 1.0
    }

    /// Half extents of the axis-aligned bounding box.
    fn half_extent(&self) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let (a, b) = self.semi_axes;
        (
            (a * a * c * c + b * b * s * s).sqrt(),
            (a * a * s * s + b * b * c * c).sqrt(),
        )
    }

    /// Pixels whose centers fall inside the oval, or `None` if the oval's
    /// bounding box leaves the image.
    pub fn raster(&self, width: usize, height: usize) -> Option<Vec<usize>> {
        let (ex, ey) = self.half_extent();
        let (cx, cy) = self.center;
        let (x0, x1) = ((cx - ex).floor(), (cx + ex).ceil());
        let (y0, y1) = ((cy - ey).floor(), (cy + ey).ceil());
        if x0 < 0.0 || y0 < 0.0 || x1 > (width - 1) as f64 || y1 > (height - 1) as f64 {
            return None;
        }
        let mut pixels = Vec::new();
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                if self.contains(x as f64, y as f64) {
                    pixels.push(y * width + x);
                }
            }
        }
        Some(pixels)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub count: usize,
    pub semi_axis_range: (f64, f64),
    pub intensity_range: (f64, f64),
    pub background: f64,
    pub noise_sigma: f64,
    /// Largest fraction of a new oval's pixels that may land on earlier
    /// ovals. At 0, ovals must also be separated by at least one background
    /// pixel (8-connected) so each forms its own bright component.
    pub max_overlap: f64,
    pub max_attempts: usize,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            width: 1024,
            height: 1024,
            count: 80,
            semi_axis_range: (4.0, 12.0),
            intensity_range: (0.6, 1.0),
            background: 0.1,
            noise_sigma: 0.02,
            max_overlap: 0.0,
            max_attempts: 100_000,
        }
    }
}

impl SceneConfig {
    /// Midpoint between background and the dimmest possible oval.
    pub fn oracle_threshold(&self) -> f64 {
        0.5 * (self.background + self.intensity_range.0)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.width == 0 || self.height == 0 {
            return Err(Error::EmptyImage);
        }
        let (amin, amax) = self.semi_axis_range;
        if !(amin > 0.0 && amin <= amax && amax.is_finite()) {
            return bad("semi_axis_range must satisfy 0 < min <= max");
        }
        let (imin, imax) = self.intensity_range;
        if !(imin > self.background && imin <= imax && imax <= 1.0) {
            return bad("intensity_range must satisfy background < min <= max <= 1");
        }
        if !(0.0..1.0).contains(&self.background) {
            return bad("background must lie in [0, 1)");
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return bad("noise_sigma must be non-negative");
        }
        if !(0.0..1.0).contains(&self.max_overlap) {
            return bad("max_overlap must lie in [0, 1)");
        }
        if self.count > u16::MAX as usize {
            return bad("at most 65535 ovals are supported");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub config: SceneConfig,
    pub ovals: Vec<Oval>,
    /// 0 = background, `k` = oval `k` (1-based), row-major.
    pub label_map: Vec<u32>,
}

impl SyntheticScene {
    pub fn dims(&self) -> (usize, usize) {
        (self.config.width, self.config.height)
    }

    pub fn object_count(&self) -> usize {
        self.ovals.len()
    }

    /// Linear indices of every object's pixels, indexed by `id - 1`.
    pub fn object_pixels(&self) -> Vec<Vec<usize>> {
        let mut objects = vec![Vec::new(); self.ovals.len()];
        for (i, &l) in self.label_map.iter().enumerate() {
            if l > 0 {
                objects[l as usize - 1].push(i);
            }
        }
        objects
    }

    pub fn label_at(&self, x: usize, y: usize) -> u32 {
        self.label_map[y * self.config.width + x]
    }

    /// Writes the scene sidecar JSON (config and ovals).
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let doc = SceneDoc {
            config: self.config,
            ovals: self.ovals.clone(),
        };
        fs::write(path, serde_json::to_string_pretty(&doc)? + "\n")?;
        Ok(())
    }

    /// Writes the label map as a 16-bit grayscale PNG.
    pub fn save_labels(&self, path: impl AsRef<Path>) -> Result<()> {
        let samples: Vec<u16> = self.label_map.iter().map(|&l| l as u16).collect();
        write_png16(self.config.width, self.config.height, &samples, path)
    }

    /// Reads a scene back from its sidecar JSON and label PNG.
    pub fn load(json_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Self> {
        let doc: SceneDoc = serde_json::from_str(&fs::read_to_string(json_path)?)?;
        let decoded = crate::scalar_field::decode_file(labels_path)?;
        let dims = decoded.image.dims();
        if dims != (doc.config.width, doc.config.height) {
            return Err(Error::DimensionMismatch {
                expected: (doc.config.width, doc.config.height),
                actual: dims,
            });
        }
        let label_map = decoded.image.values().iter().map(|&v| v as u32).collect();
        Ok(Self {
            config: doc.config,
            ovals: doc.ovals,
            label_map,
        })
    }
}

#[derive(Serialize, Deserialize)]
struct SceneDoc {
    config: SceneConfig,
    ovals: Vec<Oval>,
}

/// Renders one scene. Deterministic in `config.seed`.
pub fn generate_scene(config: &SceneConfig) -> Result<(ScalarImage, SyntheticScene)> {
    config.validate()?;
    let (w, h) = (config.width, config.height);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut labels = vec![0u32; w * h];
    let mut pixel_counts: Vec<usize> = Vec::with_capacity(config.count);
    let mut ovals: Vec<Oval> = Vec::with_capacity(config.count);

    let mut attempts = 0;
    while ovals.len() < config.count {
        if attempts >= config.max_attempts {
            return Err(Error::PlacementFailure {
                count: config.count,
                attempts,
            });
        }
        attempts += 1;
        let oval = Oval {
            center: (rng.gen_range(0.0..w as f64), rng.gen_range(0.0..h as f64)),
            semi_axes: (
                sample_range(&mut rng, config.semi_axis_range),
                sample_range(&mut rng, config.semi_axis_range),
            ),
            rotation: rng.gen_range(0.0..std::f64::consts::PI),
            intensity: sample_range(&mut rng, config.intensity_range),
        };
        let Some(pixels) = oval.raster(w, h) else {
            continue;
        };
        if pixels.is_empty() {
            continue;
        }
        let id = ovals.len() as u32 + 1;
        if config.max_overlap == 0.0 {
            let clear = pixels.iter().all(|&p| {
                let (x, y) = (p % w, p / w);
                labels[p] == 0
                    && Connectivity::Eight
                        .neighbors(x, y, w, h)
                        .all(|(nx, ny)| labels[ny * w + nx] == 0)
            });
            if !clear {
                continue;
            }
            for &p in &pixels {
                labels[p] = id;
            }
            pixel_counts.push(pixels.len());
        } else {
            // Overlapping pixels go to the brighter oval (earlier on ties).
            let overlapped = pixels.iter().filter(|&&p| labels[p] != 0).count();
            if overlapped as f64 > config.max_overlap * pixels.len() as f64 {
                continue;
            }
            let mut lost = vec![0usize; ovals.len()];
            let mut won = 0;
            for &p in &pixels {
                match labels[p] {
                    0 => won += 1,
                    l if oval.intensity > ovals[l as usize - 1].intensity => {
                        lost[l as usize - 1] += 1;
                        won += 1;
                    }
                    _ => {}
                }
            }
            if won == 0
                || lost
                    .iter()
                    .zip(&pixel_counts)
                    .any(|(&l, &c)| l > 0 && l >= c)
            {
                continue;
            }
            for &p in &pixels {
                let l = labels[p];
                if l == 0 || oval.intensity > ovals[l as usize - 1].intensity {
                    labels[p] = id;
                }
            }
            for (c, l) in pixel_counts.iter_mut().zip(&lost) {
                *c -= l;
            }
            pixel_counts.push(won);
        }
        ovals.push(oval);
    }

    let noise = (config.noise_sigma > 0.0)
        .then(|| Normal::new(0.0, config.noise_sigma).expect("valid sigma"));
    let values: Vec<f64> = labels
        .iter()
        .map(|&l| {
            let base = if l == 0 {
                config.background
            } else {
                ovals[l as usize - 1].intensity.max(config.background)
            };
            match &noise {
                Some(n) => (base + n.sample(&mut rng)).clamp(0.0, 1.0),
                None => base,
            }
        })
        .collect();

    let image = ScalarImage::new(w, h, values)?;
    Ok((
        image,
        SyntheticScene {
            config: *config,
            ovals,
            label_map: labels,
        },
    ))
}

fn sample_range(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.gen_range(lo..=hi)
    }
}

/// `n_images` scenes; image `i` uses seed `config.seed + i`.
pub fn dataset(
    config: &SceneConfig,
    n_images: usize,
) -> Result<Vec<(ScalarImage, SyntheticScene)>> {
    (0..n_images)
        .map(|i| {
            generate_scene(&SceneConfig {
                seed: config.seed.wrapping_add(i as u64),
                ..*config
            })
        })
        .collect()
}
