//! Command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{benchmark, BenchConfig, GeneratorSpec};
use crate::persistence::{compute_diagram, filter_by_persistence, top_k, Connectivity};
use crate::prompts::{
    grid_prompts, preprocess, random_prompts, tda_prompts, TdaConfig, DEFAULT_MIN_PERSISTENCE,
};
use crate::scalar_field::{load_image, save_pgm16, save_png16, LoadOptions, ScalarImage};
use crate::synth::{dataset, SceneConfig, SyntheticScene};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "topoprompt",
    version,
    about = "Topological point prompts for promptable image segmenters",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a prompt set (JSON) for an image.
    Prompts(PromptsArgs),
    /// Export the persistence diagram of an image as CSV.
    Diagram(DiagramArgs),
    /// Render synthetic oval scenes with ground truth.
    Synth(SynthArgs),
    /// Compare prompt generators on a synthetic dataset.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Tda,
    Grid,
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ImageFormat {
    Png,
    Pgm,
}

fn parse_connectivity(s: &str) -> std::result::Result<Connectivity, String> {
    s.parse::<Connectivity>().map_err(|e| e.to_string())
}

#[derive(Debug, Args)]
pub struct TdaArgs {
    /// Keep at most this many points (applied after the threshold).
    #[arg(long)]
    pub budget: Option<usize>,
    /// Persistence threshold as a fraction of the normalized intensity range.
    #[arg(long, default_value_t = DEFAULT_MIN_PERSISTENCE)]
    pub min_persistence: f64,
    /// Gaussian pre-smoothing sigma in pixels (0 = off).
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    /// Neighborhood for the superlevel sweep: 4 or 8.
    #[arg(long, default_value = "8", value_parser = parse_connectivity)]
    pub connectivity: Connectivity,
}

impl TdaArgs {
    fn config(&self, invert: bool) -> TdaConfig {
        TdaConfig {
            budget: self.budget,
            min_persistence: self.min_persistence,
            sigma: self.sigma,
            invert,
            connectivity: self.connectivity,
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.min_persistence.is_nan() || self.min_persistence < 0.0 {
            return Err("--min-persistence must be >= 0".into());
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err("--sigma must be >= 0".into());
        }
        Ok(())
    }
}

#[derive(Debug, Args)]
pub struct PromptsArgs {
    /// Input image (PNG or PGM).
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output JSON path, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    pub output: String,
    #[arg(long, value_enum, default_value_t = Method::Tda)]
    pub method: Method,
    /// Treat dark objects on a bright background as maxima.
    #[arg(long)]
    pub invert: bool,
    #[command(flatten)]
    pub tda: TdaArgs,
    /// Grid points per side [grid, default 16].
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of random points [random, default 256].
    #[arg(long)]
    pub count: Option<usize>,
    /// PRNG seed [random, default 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct DiagramArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output CSV path, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    pub output: String,
    #[arg(long)]
    pub invert: bool,
    /// Gaussian pre-smoothing sigma in pixels (0 = off).
    #[arg(long, default_value_t = 0.0)]
    pub sigma: f64,
    #[arg(long, default_value = "8", value_parser = parse_connectivity)]
    pub connectivity: Connectivity,
    /// Drop pairs below this persistence (normalized units unless --raw).
    #[arg(long, default_value_t = 0.0)]
    pub min_persistence: f64,
    /// Keep only the first K pairs.
    #[arg(long)]
    pub top_k: Option<usize>,
    /// Skip normalization and report raw intensities.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Args)]
pub struct SceneArgs {
    /// Base seed; image i uses seed + i.
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, default_value_t = 1024)]
    pub width: usize,
    #[arg(long, default_value_t = 1024)]
    pub height: usize,
    /// Ovals per image.
    #[arg(long, default_value_t = 80)]
    pub count: usize,
    #[arg(long, default_value_t = 4.0)]
    pub min_axis: f64,
    #[arg(long, default_value_t = 12.0)]
    pub max_axis: f64,
    #[arg(long, default_value_t = 0.6)]
    pub min_intensity: f64,
    #[arg(long, default_value_t = 1.0)]
    pub max_intensity: f64,
    #[arg(long, default_value_t = 0.1)]
    pub background: f64,
    /// Additive Gaussian noise sigma (0 = noise-free).
    #[arg(long, default_value_t = 0.02)]
    pub noise_sigma: f64,
    /// Allowed overlap fraction between ovals (0 = disjoint and separated).
    #[arg(long, default_value_t = 0.0)]
    pub max_overlap: f64,
}

impl SceneArgs {
    fn config(&self) -> SceneConfig {
        SceneConfig {
            seed: self.seed,
            width: self.width,
            height: self.height,
            count: self.count,
            semi_axis_range: (self.min_axis, self.max_axis),
            intensity_range: (self.min_intensity, self.max_intensity),
            background: self.background,
            noise_sigma: self.noise_sigma,
            max_overlap: self.max_overlap,
            ..SceneConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output directory (created if missing).
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub n_images: usize,
    #[arg(long, value_enum, default_value_t = ImageFormat::Png)]
    pub format: ImageFormat,
    #[command(flatten)]
    pub scene: SceneArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Generate the dataset in memory instead of reading one.
    #[arg(long, conflicts_with = "dataset")]
    pub synth: bool,
    /// Directory written by `synth`.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Images to generate with --synth.
    #[arg(long, default_value_t = 10)]
    pub n_images: usize,
    #[command(flatten)]
    pub scene: SceneArgs,
    /// Comma-separated generators: gridN, randomN, tda, tdaK.
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "grid16,grid32,grid64,random256,random1024,random4096,tda"
    )]
    pub generators: Vec<String>,
    /// Seed for random generators (offset by image index).
    #[arg(long, default_value_t = 0)]
    pub prompt_seed: u64,
    #[command(flatten)]
    pub tda: TdaArgs,
    /// Segmentation threshold [default: background/object midpoint of each scene].
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Minimum IoU for a detection.
    #[arg(long, default_value_t = 0.5)]
    pub iou_min: f64,
    /// Timing repetitions per image.
    #[arg(long, default_value_t = 1)]
    pub repeat: usize,
    /// Worker threads across images.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Emit the report as JSON instead of CSV.
    #[arg(long)]
    pub json: bool,
    /// Output path, `-` for stdout.
    #[arg(short, long, default_value = "-")]
    pub output: String,
}

/// Parses `argv` (including the program name) and runs it.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    if let Err(msg) = validate(&cli.command) {
        eprintln!("error: {msg}");
        return EXIT_USAGE;
    }
    match execute(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}

fn validate(command: &Command) -> std::result::Result<(), String> {
    match command {
        Command::Prompts(a) => {
            a.tda.validate()?;
            let misplaced =
                |flag: &str, method: &str| Err(format!("{flag} only applies to --method {method}"));
            if a.method != Method::Grid && a.n.is_some() {
                return misplaced("--n", "grid");
            }
            if a.method != Method::Random && a.count.is_some() {
                return misplaced("--count", "random");
            }
            if a.method != Method::Random && a.seed.is_some() {
                return misplaced("--seed", "random");
            }
            if a.method != Method::Tda && a.tda.budget.is_some() {
                return misplaced("--budget", "tda");
            }
            if a.n == Some(0) {
                return Err("--n must be >= 1".into());
            }
            Ok(())
        }
        Command::Diagram(a) => {
            if !(a.sigma >= 0.0 && a.sigma.is_finite()) {
                return Err("--sigma must be >= 0".into());
            }
            if a.min_persistence.is_nan() || a.min_persistence < 0.0 {
                return Err("--min-persistence must be >= 0".into());
            }
            Ok(())
        }
        Command::Synth(_) => Ok(()),
        Command::Bench(a) => {
            a.tda.validate()?;
            if a.synth == a.dataset.is_some() {
                return Err("bench needs exactly one of --synth or --dataset".into());
            }
            if a.repeat == 0 {
                return Err("--repeat must be >= 1".into());
            }
            if a.jobs == 0 {
                return Err("--jobs must be >= 1".into());
            }
            if !(0.0..=1.0).contains(&a.iou_min) {
                return Err("--iou-min must lie in [0, 1]".into());
            }
            for g in &a.generators {
                GeneratorSpec::parse_with(g, a.prompt_seed, a.tda.config(false))
                    .map_err(|e| e.to_string())?;
            }
            Ok(())
        }
    }
}

fn write_output(target: &str, contents: &str) -> Result<()> {
    if target == "-" {
        let mut out = std::io::stdout().lock();
        out.write_all(contents.as_bytes())?;
        out.flush()?;
    } else {
        fs::write(target, contents)?;
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Prompts(a) => run_prompts(a),
        Command::Diagram(a) => run_diagram(a),
        Command::Synth(a) => run_synth(a),
        Command::Bench(a) => run_bench(a),
    }
}

fn run_prompts(a: PromptsArgs) -> Result<()> {
    let image = load_image(&a.input, LoadOptions::default())?;
    let mut set = match a.method {
        Method::Tda => tda_prompts(&image, &a.tda.config(a.invert))?,
        Method::Grid => grid_prompts(image.width(), image.height(), a.n.unwrap_or(16))?,
        Method::Random => random_prompts(
            image.width(),
            image.height(),
            a.count.unwrap_or(256),
            a.seed.unwrap_or(0),
        )?,
    };
    set.source = Some(a.input.display().to_string());
    let mut json = set.to_json()?;
    json.push('\n');
    write_output(&a.output, &json)
}

fn run_diagram(a: DiagramArgs) -> Result<()> {
    let image = load_image(&a.input, LoadOptions { invert: a.invert })?;
    let field = if a.raw {
        crate::scalar_field::gaussian_smooth(&image, a.sigma)?
    } else {
        preprocess(&image, false, a.sigma)?
    };
    let mut diagram =
        filter_by_persistence(&compute_diagram(&field, a.connectivity)?, a.min_persistence);
    if let Some(k) = a.top_k {
        diagram = top_k(&diagram, k);
    }
    write_output(&a.output, &diagram.to_csv())
}

fn scene_paths(dir: &Path, index: usize, format: ImageFormat) -> (PathBuf, PathBuf, PathBuf) {
    let ext = match format {
        ImageFormat::Png => "png",
        ImageFormat::Pgm => "pgm",
    };
    (
        dir.join(format!("image_{index:03}.{ext}")),
        dir.join(format!("scene_{index:03}.json")),
        dir.join(format!("labels_{index:03}.png")),
    )
}

fn run_synth(a: SynthArgs) -> Result<()> {
    let scenes = dataset(&a.scene.config(), a.n_images)?;
    fs::create_dir_all(&a.output)?;
    for (i, (image, scene)) in scenes.iter().enumerate() {
        let (img_path, json_path, labels_path) = scene_paths(&a.output, i, a.format);
        match a.format {
            ImageFormat::Png => save_png16(image, &img_path)?,
            ImageFormat::Pgm => save_pgm16(image, &img_path)?,
        }
        scene.save_json(&json_path)?;
        scene.save_labels(&labels_path)?;
    }
    eprintln!("wrote {} scene(s) to {}", scenes.len(), a.output.display());
    Ok(())
}

/// Loads every `scene_NNN.json` in `dir` with its image and label map.
/// Stored 16-bit images are rescaled back to `[0, 1]`.
pub fn load_dataset(dir: &Path) -> Result<Vec<(ScalarImage, SyntheticScene)>> {
    let mut indices: Vec<usize> = fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let name = e.file_name().into_string().ok()?;
            name.strip_prefix("scene_")?
                .strip_suffix(".json")?
                .parse()
                .ok()
        })
        .collect();
    indices.sort_unstable();
    if indices.is_empty() {
        return Err(Error::InvalidConfig(format!(
            "no scene_NNN.json files in {}",
            dir.display()
        )));
    }
    indices
        .into_iter()
        .map(|i| {
            let (png, json, labels) = scene_paths(dir, i, ImageFormat::Png);
            let img_path = if png.exists() {
                png
            } else {
                scene_paths(dir, i, ImageFormat::Pgm).0
            };
            let decoded = crate::scalar_field::decode_file(&img_path)?;
            let image = decoded
                .image
                .map_affine(1.0 / decoded.max_representable, 0.0)?;
            let scene = SyntheticScene::load(&json, &labels)?;
            if image.dims() != scene.dims() {
                return Err(Error::DimensionMismatch {
                    expected: scene.dims(),
                    actual: image.dims(),
                });
            }
            Ok((image, scene))
        })
        .collect()
}

fn run_bench(a: BenchArgs) -> Result<()> {
    let data = match &a.dataset {
        Some(dir) => load_dataset(dir)?,
        None => dataset(&a.scene.config(), a.n_images)?,
    };
    let generators = a
        .generators
        .iter()
        .map(|g| GeneratorSpec::parse_with(g, a.prompt_seed, a.tda.config(false)))
        .collect::<Result<Vec<_>>>()?;
    let config = BenchConfig {
        threshold: a.threshold,
        iou_min: a.iou_min,
        repeat: a.repeat,
        jobs: a.jobs,
    };
    let report = benchmark(&data, &generators, &config)?;
    eprint!("{}", report.to_table());
    let body = if a.json {
        serde_json::to_string_pretty(&report)? + "\n"
    } else {
        report.to_csv()
    };
    write_output(&a.output, &body)
}
