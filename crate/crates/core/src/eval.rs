//! Scoring prompt sets against synthetic ground truth.
//!
//! Segmentation is stood in for by a threshold flood fill: a prompt on a
//! pixel at or above the threshold yields the 8-connected bright component
//! containing it. Every prompt is segmented independently, one call per
//! point, the way a promptable segmenter is queried.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::persistence::Connectivity;
use crate::prompts::{
    grid_prompts, random_prompts, tda_prompts, PromptPoint, PromptSet, TdaConfig,
};
use crate::scalar_field::ScalarImage;
use crate::synth::SyntheticScene;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleMask {
    /// Sorted linear indices.
    pub pixels: Vec<usize>,
    pub prompt_rank: usize,
    pub iou_vs_gt: Option<f64>,
}

/// The bright component under `point`, or `None` when the point is below `threshold`.
pub fn oracle_segment(
    image: &ScalarImage,
    point: &PromptPoint,
    threshold: f64,
) -> Option<OracleMask> {
    let (w, h) = image.dims();
    assert!(point.x < w && point.y < h, "prompt outside image");
    let values = image.values();
    let start = point.y * w + point.x;
    if values[start] < threshold {
        return None;
    }
    let mut visited = HashSet::from([start]);
    let mut stack = vec![start];
    while let Some(p) = stack.pop() {
        for (nx, ny) in Connectivity::Eight.neighbors(p % w, p / w, w, h) {
            let q = ny * w + nx;
            if values[q] >= threshold && visited.insert(q) {
                stack.push(q);
            }
        }
    }
    let mut pixels: Vec<usize> = visited.into_iter().collect();
    pixels.sort_unstable();
    Some(OracleMask {
        pixels,
        prompt_rank: point.rank,
        iou_vs_gt: None,
    })
}

fn check_dims(scene: &SyntheticScene, dims: (usize, usize)) -> Result<()> {
    if scene.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: scene.dims(),
            actual: dims,
        });
    }
    Ok(())
}

/// Fraction of objects containing at least one prompt. A scene without
/// objects counts as fully covered.
pub fn hit_rate(scene: &SyntheticScene, prompts: &PromptSet) -> Result<f64> {
    check_dims(scene, (prompts.width, prompts.height))?;
    let n = scene.object_count();
    if n == 0 {
        return Ok(1.0);
    }
    let hit: HashSet<u32> = prompts
        .points
        .iter()
        .map(|p| scene.label_at(p.x, p.y))
        .filter(|&l| l > 0)
        .collect();
    Ok(hit.len() as f64 / n as f64)
}

/// One mask-to-object assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Match {
    pub mask: usize,
    /// 1-based object id.
    pub object: u32,
    pub iou: f64,
}

/// Greedy one-to-one matching by IoU, highest first. Only overlapping
/// mask/object pairs are considered.
pub fn match_masks(masks: &[OracleMask], scene: &SyntheticScene) -> Vec<Match> {
    let mut object_sizes = vec![0usize; scene.object_count() + 1];
    for &l in &scene.label_map {
        object_sizes[l as usize] += 1;
    }
    let mut candidates = Vec::new();
    for (m, mask) in masks.iter().enumerate() {
        let mut overlap: HashMap<u32, usize> = HashMap::new();
        for &p in &mask.pixels {
            let l = scene.label_map[p];
            if l > 0 {
                *overlap.entry(l).or_default() += 1;
            }
        }
        for (object, inter) in overlap {
            let union = mask.pixels.len() + object_sizes[object as usize] - inter;
            candidates.push(Match {
                mask: m,
                object,
                iou: inter as f64 / union as f64,
            });
        }
    }
    candidates.sort_by(|a, b| {
        b.iou
            .total_cmp(&a.iou)
            .then(a.mask.cmp(&b.mask))
            .then(a.object.cmp(&b.object))
    });
    let mut used_masks = HashSet::new();
    let mut used_objects = HashSet::new();
    candidates
        .into_iter()
        .filter(|c| {
            if used_masks.contains(&c.mask) || used_objects.contains(&c.object) {
                return false;
            }
            used_masks.insert(c.mask);
            used_objects.insert(c.object);
            true
        })
        .collect()
}

/// Mean IoU of the masks that match an object; `None` when nothing matches.
pub fn quality(masks: &[OracleMask], scene: &SyntheticScene) -> Option<f64> {
    let matches = match_masks(masks, scene);
    (!matches.is_empty()).then(|| matches.iter().map(|m| m.iou).sum::<f64>() / matches.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    /// Deduplicated masks in prompt order; matched masks carry their IoU.
    pub masks: Vec<OracleMask>,
    /// Objects matched with IoU at or above the cutoff.
    pub detected: usize,
    pub total: usize,
    pub quality: Option<f64>,
}

impl Detection {
    pub fn accuracy(&self) -> f64 {
        if self.total == 0 {
            1.0
        } else {
            self.detected as f64 / self.total as f64
        }
    }
}

/// Segments every prompt independently and drops duplicate masks, keeping
/// the first occurrence in prompt order.
pub fn segment_prompts(
    image: &ScalarImage,
    prompts: &PromptSet,
    threshold: f64,
) -> Vec<OracleMask> {
    let mut seen: HashSet<Vec<usize>> = HashSet::new();
    let mut masks = Vec::new();
    for point in &prompts.points {
        if let Some(mask) = oracle_segment(image, point, threshold) {
            if seen.insert(mask.pixels.clone()) {
                masks.push(mask);
            }
        }
    }
    masks
}

/// Matches masks to ground truth and counts objects recovered with IoU >= `iou_min`.
pub fn score_masks(mut masks: Vec<OracleMask>, scene: &SyntheticScene, iou_min: f64) -> Detection {
    let matches = match_masks(&masks, scene);
    for m in &matches {
        masks[m.mask].iou_vs_gt = Some(m.iou);
    }
    let detected = matches.iter().filter(|m| m.iou >= iou_min).count();
    let quality = (!matches.is_empty())
        .then(|| matches.iter().map(|m| m.iou).sum::<f64>() / matches.len() as f64);
    Detection {
        masks,
        detected,
        total: scene.object_count(),
        quality,
    }
}

/// [`segment_prompts`] followed by [`score_masks`].
pub fn detect(
    image: &ScalarImage,
    scene: &SyntheticScene,
    prompts: &PromptSet,
    threshold: f64,
    iou_min: f64,
) -> Result<Detection> {
    check_dims(scene, image.dims())?;
    check_dims(scene, (prompts.width, prompts.height))?;
    Ok(score_masks(
        segment_prompts(image, prompts, threshold),
        scene,
        iou_min,
    ))
}

/// Fraction of objects recovered by the flood-fill segmenter with IoU >= `iou_min`.
pub fn detection_accuracy(
    image: &ScalarImage,
    scene: &SyntheticScene,
    prompts: &PromptSet,
    threshold: f64,
    iou_min: f64,
) -> Result<f64> {
    Ok(detect(image, scene, prompts, threshold, iou_min)?.accuracy())
}

/// A prompt generator as named in benchmark reports: `gridN`, `randomN`,
/// `tda` or `tdaK` (TDA with budget `K`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorSpec {
    Grid { n: usize },
    Random { count: usize, seed: u64 },
    Tda(TdaConfig),
}

impl GeneratorSpec {
    /// The seven columns of the reference comparison.
    pub fn standard_set(seed: u64) -> Vec<GeneratorSpec> {
        vec![
            GeneratorSpec::Grid { n: 16 },
            GeneratorSpec::Grid { n: 32 },
            GeneratorSpec::Grid { n: 64 },
            GeneratorSpec::Random { count: 256, seed },
            GeneratorSpec::Random { count: 1024, seed },
            GeneratorSpec::Random { count: 4096, seed },
            GeneratorSpec::Tda(TdaConfig::default()),
        ]
    }

    pub fn name(&self) -> String {
        match self {
            GeneratorSpec::Grid { n } => format!("grid{n}"),
            GeneratorSpec::Random { count, .. } => format!("random{count}"),
            GeneratorSpec::Tda(cfg) => match cfg.budget {
                Some(b) => format!("tda{b}"),
                None => "tda".to_string(),
            },
        }
    }

    /// Generates prompts for image `index` of a dataset. Random generators
    /// offset their seed by the image index.
    pub fn generate(&self, image: &ScalarImage, index: usize) -> Result<PromptSet> {
        let (w, h) = image.dims();
        match *self {
            GeneratorSpec::Grid { n } => grid_prompts(w, h, n),
            GeneratorSpec::Random { count, seed } => {
                random_prompts(w, h, count, seed.wrapping_add(index as u64))
            }
            GeneratorSpec::Tda(cfg) => tda_prompts(image, &cfg),
        }
    }

    /// Parses a generator name; TDA variants take their remaining settings from `tda`.
    pub fn parse_with(s: &str, seed: u64, tda: TdaConfig) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("unknown generator {s:?}"));
        let number = |rest: &str| rest.parse::<usize>().map_err(|_| bad());
        if let Some(rest) = s.strip_prefix("grid") {
            Ok(GeneratorSpec::Grid { n: number(rest)? })
        } else if let Some(rest) = s.strip_prefix("random") {
            Ok(GeneratorSpec::Random {
                count: number(rest)?,
                seed,
            })
        } else if let Some(rest) = s.strip_prefix("tda") {
            let budget = if rest.is_empty() {
                tda.budget
            } else {
                Some(number(rest)?)
            };
            Ok(GeneratorSpec::Tda(TdaConfig { budget, ..tda }))
        } else {
            Err(bad())
        }
    }
}

impl FromStr for GeneratorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse_with(s, 0, TdaConfig::default())
    }
}

impl fmt::Display for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    /// Segmentation threshold; `None` uses each scene's background/object midpoint.
    pub threshold: Option<f64>,
    pub iou_min: f64,
    pub repeat: usize,
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            threshold: None,
            iou_min: 0.5,
            repeat: 1,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub generator: String,
    pub prompt_count: f64,
    /// Mean wall-clock seconds per image for prompt generation plus segmentation.
    pub time_s: f64,
    pub accuracy_pct: f64,
    pub hit_rate_pct: f64,
    /// Mean IoU of matched masks; `None` if no image produced a match.
    pub quality: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub images: usize,
    pub repeat: usize,
    pub rows: Vec<BenchRow>,
}

impl BenchReport {
    pub fn row(&self, generator: &str) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.generator == generator)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("generator,prompt_count,time_s,accuracy_pct,quality\n");
        for r in &self.rows {
            let quality = r.quality.map(|q| format!("{q:.6}")).unwrap_or_default();
            out.push_str(&format!(
                "{},{},{:.6},{:.3},{}\n",
                r.generator, r.prompt_count, r.time_s, r.accuracy_pct, quality
            ));
        }
        out
    }

    pub fn to_table(&self) -> String {
        let mut out = format!(
            "{:<12} {:>9} {:>11} {:>10} {:>9} {:>8}\n",
            "generator", "prompts", "time[s]", "acc[%]", "hit[%]", "quality"
        );
        for r in &self.rows {
            let quality = r
                .quality
                .map(|q| format!("{q:.4}"))
                .unwrap_or_else(|| "-".into());
            out.push_str(&format!(
                "{:<12} {:>9.1} {:>11.6} {:>10.3} {:>9.3} {:>8}\n",
                r.generator, r.prompt_count, r.time_s, r.accuracy_pct, r.hit_rate_pct, quality
            ));
        }
        out
    }
}

struct ImageResult {
    time_s: f64,
    prompt_count: usize,
    accuracy: f64,
    hit_rate: f64,
    quality: Option<f64>,
}

fn run_image(
    spec: &GeneratorSpec,
    index: usize,
    image: &ScalarImage,
    scene: &SyntheticScene,
    config: &BenchConfig,
) -> Result<ImageResult> {
    let threshold = config
        .threshold
        .unwrap_or_else(|| scene.config.oracle_threshold());
    check_dims(scene, image.dims())?;
    // Only prompt generation and segmentation are timed; scoring is not.
    let mut total = 0.0;
    let mut last = None;
    for _ in 0..config.repeat {
        let start = Instant::now();
        let prompts = spec.generate(image, index)?;
        let masks = segment_prompts(image, &prompts, threshold);
        total += start.elapsed().as_secs_f64();
        last = Some((prompts, masks));
    }
    let (prompts, masks) = last.expect("repeat >= 1");
    let detection = score_masks(masks, scene, config.iou_min);
    Ok(ImageResult {
        time_s: total / config.repeat as f64,
        prompt_count: prompts.len(),
        accuracy: detection.accuracy(),
        hit_rate: hit_rate(scene, &prompts)?,
        quality: detection.quality,
    })
}

/// Runs every generator over every image and averages per generator.
///
/// Images may be processed on `config.jobs` threads; results are reduced in
/// image order so everything except timing is reproducible.
pub fn benchmark(
    dataset: &[(ScalarImage, SyntheticScene)],
    generators: &[GeneratorSpec],
    config: &BenchConfig,
) -> Result<BenchReport> {
    if dataset.is_empty() {
        return Err(Error::InvalidConfig(
            "benchmark needs at least one image".into(),
        ));
    }
    if generators.is_empty() {
        return Err(Error::InvalidConfig(
            "benchmark needs at least one generator".into(),
        ));
    }
    if config.repeat == 0 {
        return Err(Error::InvalidConfig("repeat must be at least 1".into()));
    }
    let jobs = config.jobs.max(1).min(dataset.len());

    let mut rows = Vec::with_capacity(generators.len());
    for spec in generators {
        let results: Vec<ImageResult> = if jobs == 1 {
            dataset
                .iter()
                .enumerate()
                .map(|(i, (img, scene))| run_image(spec, i, img, scene, config))
                .collect::<Result<_>>()?
        } else {
            let chunk = dataset.len().div_ceil(jobs);
            std::thread::scope(|s| {
                let handles: Vec<_> = dataset
                    .chunks(chunk)
                    .enumerate()
                    .map(|(c, part)| {
                        s.spawn(move || {
                            part.iter()
                                .enumerate()
                                .map(|(j, (img, scene))| {
                                    run_image(spec, c * chunk + j, img, scene, config)
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("benchmark worker panicked"))
                    .collect::<Result<Vec<Vec<_>>>>()
            })?
            .into_iter()
            .flatten()
            .collect()
        };

        let n = results.len() as f64;
        let qualities: Vec<f64> = results.iter().filter_map(|r| r.quality).collect();
        rows.push(BenchRow {
            generator: spec.name(),
            prompt_count: results.iter().map(|r| r.prompt_count as f64).sum::<f64>() / n,
            time_s: results.iter().map(|r| r.time_s).sum::<f64>() / n,
            accuracy_pct: 100.0 * results.iter().map(|r| r.accuracy).sum::<f64>() / n,
            hit_rate_pct: 100.0 * results.iter().map(|r| r.hit_rate).sum::<f64>() / n,
            quality: (!qualities.is_empty())
                .then(|| qualities.iter().sum::<f64>() / qualities.len() as f64),
        });
    }
    Ok(BenchReport {
        images: dataset.len(),
        repeat: config.repeat,
        rows,
    })
}
