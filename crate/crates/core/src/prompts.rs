//! Point prompt sets: topological prompts plus the grid and uniform-random
//! baselines, and the versioned JSON wire format they are exchanged in.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::{compute_diagram, filter_by_persistence, top_k, Connectivity};
use crate::scalar_field::{gaussian_smooth, normalize, ScalarImage};

pub const SCHEMA: &str = "topoprompt/v1";

/// Default persistence threshold, as a fraction of the normalized range.
pub const DEFAULT_MIN_PERSISTENCE: f64 = 0.05;

/// Foreground marker; the only label this crate emits.
pub const FOREGROUND: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    Tda,
    Grid,
    Random,
}

impl fmt::Display for Generator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Generator::Tda => "tda",
            Generator::Grid => "grid",
            Generator::Random => "random",
        })
    }
}

impl FromStr for Generator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tda" => Ok(Generator::Tda),
            "grid" => Ok(Generator::Grid),
            "random" => Ok(Generator::Random),
            other => Err(Error::InvalidConfig(format!("unknown generator {other}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptPoint {
    /// Column.
    pub x: usize,
    /// Row.
    pub y: usize,
    pub label: u8,
    /// Persistence of the source extremum; `+inf` for the global maximum, 0 for baselines.
    pub score: f64,
    pub rank: usize,
}

/// Parameters that produced a prompt set. Unused fields stay `None`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PromptParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_persistence: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invert: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connectivity: Option<Connectivity>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PromptSet {
    pub width: usize,
    pub height: usize,
    pub source: Option<String>,
    pub generator: Generator,
    pub params: PromptParams,
    pub points: Vec<PromptPoint>,
}

impl PromptSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn coords(&self) -> Vec<(usize, usize)> {
        self.points.iter().map(|p| (p.x, p.y)).collect()
    }

    /// Checks bounds, labels, rank contiguity and coordinate uniqueness.
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Schema("image dimensions must be positive".into()));
        }
        let mut seen = HashSet::with_capacity(self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            if p.x >= self.width || p.y >= self.height {
                return Err(Error::Schema(format!(
                    "point {i} at ({}, {}) is outside the {}x{} image",
                    p.x, p.y, self.width, self.height
                )));
            }
            if p.label != FOREGROUND {
                return Err(Error::Schema(format!("point {i} has label {}", p.label)));
            }
            if p.rank != i {
                return Err(Error::Schema(format!(
                    "point {i} has rank {}; ranks must be 0..n-1 in order",
                    p.rank
                )));
            }
            if p.score.is_nan() || p.score < 0.0 || p.score == f64::NEG_INFINITY {
                return Err(Error::Schema(format!(
                    "point {i} has invalid score {}",
                    p.score
                )));
            }
            if !seen.insert((p.x, p.y)) {
                return Err(Error::Schema(format!("duplicate point ({}, {})", p.x, p.y)));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        let wire = WireSet {
            schema: SCHEMA.to_string(),
            image: WireImage {
                width: self.width,
                height: self.height,
                source: self.source.clone(),
            },
            generator: self.generator,
            params: self.params.clone(),
            points: self
                .points
                .iter()
                .map(|p| WirePoint {
                    x: p.x,
                    y: p.y,
                    label: p.label,
                    score: if p.score == f64::INFINITY {
                        WireScore::Text("inf".into())
                    } else {
                        WireScore::Number(p.score)
                    },
                    rank: p.rank,
                })
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&wire)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let wire: WireSet = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        if wire.schema != SCHEMA {
            return Err(Error::Schema(format!(
                "unsupported schema {:?}, expected {SCHEMA:?}",
                wire.schema
            )));
        }
        let points = wire
            .points
            .into_iter()
            .map(|p| {
                let score = match p.score {
                    WireScore::Number(v) => v,
                    WireScore::Text(t) if t == "inf" => f64::INFINITY,
                    WireScore::Text(t) => {
                        return Err(Error::Schema(format!("invalid score {t:?}")))
                    }
                };
                Ok(PromptPoint {
                    x: p.x,
                    y: p.y,
                    label: p.label,
                    score,
                    rank: p.rank,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let set = PromptSet {
            width: wire.image.width,
            height: wire.image.height,
            source: wire.image.source,
            generator: wire.generator,
            params: wire.params,
            points,
        };
        set.validate()?;
        Ok(set)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireSet {
    schema: String,
    image: WireImage,
    generator: Generator,
    params: PromptParams,
    points: Vec<WirePoint>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireImage {
    width: usize,
    height: usize,
    source: Option<String>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WirePoint {
    x: usize,
    y: usize,
    label: u8,
    score: WireScore,
    rank: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireScore {
    Number(f64),
    Text(String),
}

pub fn export_prompts(set: &PromptSet, path: impl AsRef<Path>) -> Result<()> {
    let mut text = set.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn import_prompts(path: impl AsRef<Path>) -> Result<PromptSet> {
    let text = fs::read_to_string(path)?;
    PromptSet::from_json(&text)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TdaConfig {
    /// Keep at most this many points.
    pub budget: Option<usize>,
    /// Threshold on persistence in normalized units, applied before the budget.
    pub min_persistence: f64,
    pub sigma: f64,
    pub invert: bool,
    pub connectivity: Connectivity,
}

impl Default for TdaConfig {
    fn default() -> Self {
        Self {
            budget: None,
            min_persistence: DEFAULT_MIN_PERSISTENCE,
            sigma: 0.0,
            invert: false,
            connectivity: Connectivity::Eight,
        }
    }
}

impl TdaConfig {
    pub fn with_budget(budget: usize) -> Self {
        Self {
            budget: Some(budget),
            ..Self::default()
        }
    }

    fn params(&self) -> PromptParams {
        PromptParams {
            budget: self.budget,
            min_persistence: Some(self.min_persistence),
            sigma: Some(self.sigma),
            invert: Some(self.invert),
            connectivity: Some(self.connectivity),
            ..PromptParams::default()
        }
    }
}

/// The field the diagram is computed on: optional inversion, normalization
/// to `[0, 1]`, then optional smoothing.
pub fn preprocess(image: &ScalarImage, invert: bool, sigma: f64) -> Result<ScalarImage> {
    let base = if invert {
        image.invert(image.range().1)
    } else {
        image.clone()
    };
    gaussian_smooth(&normalize(&base), sigma)
}

/// One prompt per surviving local maximum, most persistent first.
pub fn tda_prompts(image: &ScalarImage, config: &TdaConfig) -> Result<PromptSet> {
    if config.min_persistence.is_nan() || config.min_persistence < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "min_persistence must be non-negative, got {}",
            config.min_persistence
        )));
    }
    let field = preprocess(image, config.invert, config.sigma)?;
    let diagram = compute_diagram(&field, config.connectivity)?;
    let mut kept = filter_by_persistence(&diagram, config.min_persistence);
    if let Some(budget) = config.budget {
        kept = top_k(&kept, budget);
    }
    let points = kept
        .pairs()
        .iter()
        .enumerate()
        .map(|(rank, pair)| {
            let (x, y) = field.coords(pair.extremum_index);
            PromptPoint {
                x,
                y,
                label: FOREGROUND,
                score: pair.persistence,
                rank,
            }
        })
        .collect();
    Ok(PromptSet {
        width: image.width(),
        height: image.height(),
        source: None,
        generator: Generator::Tda,
        params: config.params(),
        points,
    })
}

/// `n x n` cell-centered grid in row-major order.
///
/// Requires `1 <= n <= min(width, height)` so that every cell holds at least
/// one pixel and the points stay distinct.
pub fn grid_prompts(width: usize, height: usize, n: usize) -> Result<PromptSet> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    if n == 0 || n > width.min(height) {
        return Err(Error::InvalidConfig(format!(
            "grid size must be in 1..={} for a {width}x{height} image, got {n}",
            width.min(height)
        )));
    }
    // floor((i + 0.5) * extent / n) in exact integer arithmetic
    let center = |i: usize, extent: usize| ((2 * i + 1) * extent) / (2 * n);
    let points = (0..n)
        .flat_map(|j| (0..n).map(move |i| (i, j)))
        .enumerate()
        .map(|(rank, (i, j))| PromptPoint {
            x: center(i, width),
            y: center(j, height),
            label: FOREGROUND,
            score: 0.0,
            rank,
        })
        .collect();
    Ok(PromptSet {
        width,
        height,
        source: None,
        generator: Generator::Grid,
        params: PromptParams {
            n: Some(n),
            ..PromptParams::default()
        },
        points,
    })
}

/// `count` distinct pixels drawn uniformly at random.
///
/// The stream is ChaCha8 seeded with `seed_from_u64(seed)`; each candidate
/// draws a column then a row as `u32` ranges, and candidates already taken
/// are redrawn. This makes the output identical on every platform.
pub fn random_prompts(width: usize, height: usize, count: usize, seed: u64) -> Result<PromptSet> {
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage);
    }
    let available = width * height;
    if count > available {
        return Err(Error::BudgetExceedsPixels {
            requested: count,
            available,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = HashSet::with_capacity(count);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let x = rng.gen_range(0..width as u32) as usize;
        let y = rng.gen_range(0..height as u32) as usize;
        if taken.insert((x, y)) {
            points.push(PromptPoint {
                x,
                y,
                label: FOREGROUND,
                score: 0.0,
                rank: points.len(),
            });
        }
    }
    Ok(PromptSet {
        width,
        height,
        source: None,
        generator: Generator::Random,
        params: PromptParams {
            count: Some(count),
            seed: Some(seed),
            ..PromptParams::default()
        },
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tda_on_constant_image_is_single_point() {
        let img = ScalarImage::filled(6, 4, 2.5).unwrap();
        for cfg in [TdaConfig::default(), TdaConfig::with_budget(10)] {
            let set = tda_prompts(&img, &cfg).unwrap();
            assert_eq!(set.coords(), vec![(0, 0)]);
            assert_eq!(set.points[0].score, f64::INFINITY);
        }
    }

    #[test]
    fn tda_budget_on_row() {
        let img = ScalarImage::new(7, 1, vec![0.0, 6.0, 5.8, 7.0, 1.0, 5.0, 0.0]).unwrap();
        let cfg = TdaConfig {
            budget: Some(2),
            min_persistence: 0.0,
            ..TdaConfig::default()
        };
        let set = tda_prompts(&img, &cfg).unwrap();
        assert_eq!(set.coords(), vec![(3, 0), (5, 0)]);
        assert_eq!(set.points[1].rank, 1);
        set.validate().unwrap();
    }

    #[test]
    fn threshold_applies_before_budget() {
        let img = ScalarImage::new(7, 1, vec![0.0, 6.0, 5.8, 7.0, 1.0, 5.0, 0.0]).unwrap();
        // normalized persistences: inf, 4/7, 0.2/7
        let cfg = TdaConfig {
            budget: Some(5),
            min_persistence: 0.1,
            ..TdaConfig::default()
        };
        assert_eq!(tda_prompts(&img, &cfg).unwrap().len(), 2);
        let bad = TdaConfig {
            min_persistence: -1.0,
            ..TdaConfig::default()
        };
        assert!(tda_prompts(&img, &bad).is_err());
    }

    #[test]
    fn inverted_tda_finds_minima() {
        let img = ScalarImage::new(5, 1, vec![9.0, 1.0, 9.0, 9.0, 0.0]).unwrap();
        let cfg = TdaConfig {
            invert: true,
            ..TdaConfig::default()
        };
        let set = tda_prompts(&img, &cfg).unwrap();
        assert_eq!(set.coords(), vec![(4, 0), (1, 0)]);
    }

    #[test]
    fn grid_examples() {
        assert_eq!(grid_prompts(1024, 1024, 16).unwrap().len(), 256);
        assert_eq!(grid_prompts(1024, 1024, 64).unwrap().len(), 4096);
        let one = grid_prompts(100, 100, 1).unwrap();
        assert_eq!(one.coords(), vec![(50, 50)]);
        let g = grid_prompts(10, 4, 2).unwrap();
        assert_eq!(g.coords(), vec![(2, 1), (7, 1), (2, 3), (7, 3)]);
        g.validate().unwrap();
        assert!(grid_prompts(10, 4, 5).is_err());
        assert!(grid_prompts(10, 4, 0).is_err());
    }

    #[test]
    fn random_examples() {
        let a = random_prompts(1024, 1024, 4096, 7).unwrap();
        let b = random_prompts(1024, 1024, 4096, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 4096);
        a.validate().unwrap();
        assert!(random_prompts(1024, 1024, 0, 7).unwrap().is_empty());

        let s1: HashSet<_> = random_prompts(1024, 1024, 1024, 1)
            .unwrap()
            .coords()
            .into_iter()
            .collect();
        let s2: HashSet<_> = random_prompts(1024, 1024, 1024, 2)
            .unwrap()
            .coords()
            .into_iter()
            .collect();
        assert_ne!(s1, s2);

        // every pixel of a tiny image
        let full = random_prompts(3, 2, 6, 0).unwrap();
        assert_eq!(full.coords().into_iter().collect::<HashSet<_>>().len(), 6);
        assert!(matches!(
            random_prompts(3, 2, 7, 0),
            Err(Error::BudgetExceedsPixels {
                requested: 7,
                available: 6
            })
        ));
    }

    #[test]
    fn json_shape() {
        let img = ScalarImage::new(3, 1, vec![0.0, 1.0, 0.0]).unwrap();
        let set = tda_prompts(&img, &TdaConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&set.to_json().unwrap()).unwrap();
        assert_eq!(v["schema"], "topoprompt/v1");
        assert_eq!(v["image"]["width"], 3);
        assert!(v["image"]["source"].is_null());
        assert_eq!(v["generator"], "tda");
        assert_eq!(v["points"][0]["score"], "inf");
        assert_eq!(v["points"][0]["label"], 1);
        assert_eq!(v["params"]["connectivity"], "8");
    }

    #[test]
    fn empty_set_serializes_with_empty_points() {
        let set = random_prompts(4, 4, 0, 0).unwrap();
        let v: serde_json::Value = serde_json::from_str(&set.to_json().unwrap()).unwrap();
        assert_eq!(v["points"], serde_json::json!([]));
        assert_eq!(PromptSet::from_json(&set.to_json().unwrap()).unwrap(), set);
    }

    #[test]
    fn import_rejects_schema_violations() {
        let base = grid_prompts(4, 4, 2).unwrap();
        let json = base.to_json().unwrap();
        let mut v: serde_json::Value = serde_json::from_str(&json).unwrap();

        let mut out_of_bounds = v.clone();
        out_of_bounds["points"][0]["x"] = 4.into();
        assert!(matches!(
            PromptSet::from_json(&out_of_bounds.to_string()),
            Err(Error::Schema(_))
        ));

        let mut wrong_tag = v.clone();
        wrong_tag["schema"] = "topoprompt/v0".into();
        assert!(matches!(
            PromptSet::from_json(&wrong_tag.to_string()),
            Err(Error::Schema(_))
        ));

        let mut dup = v.clone();
        dup["points"][1]["x"] = dup["points"][0]["x"].clone();
        dup["points"][1]["y"] = dup["points"][0]["y"].clone();
        assert!(matches!(
            PromptSet::from_json(&dup.to_string()),
            Err(Error::Schema(_))
        ));

        let mut bad_rank = v.clone();
        bad_rank["points"][0]["rank"] = 3.into();
        assert!(matches!(
            PromptSet::from_json(&bad_rank.to_string()),
            Err(Error::Schema(_))
        ));

        let mut bad_score = v.clone();
        bad_score["points"][0]["score"] = "nan".into();
        assert!(matches!(
            PromptSet::from_json(&bad_score.to_string()),
            Err(Error::Schema(_))
        ));

        v["generator"] = "boxes".into();
        assert!(matches!(
            PromptSet::from_json(&v.to_string()),
            Err(Error::Schema(_))
        ));
        assert!(matches!(PromptSet::from_json("{"), Err(Error::Schema(_))));
    }
}
