//! Point prompts for promptable image segmenters, placed at the
//! topologically significant local maxima of the image.
//!
//! The pipeline is `image -> normalize (-> smooth) -> 0-dimensional
//! superlevel persistence -> threshold / budget -> prompt points`. Grid and
//! uniform-random baselines, a synthetic oval benchmark and a flood-fill
//! stand-in segmenter are included so generators can be compared on
//! accuracy and cost.

pub mod cli;
pub mod error;
pub mod eval;
pub mod persistence;
pub mod prompts;
pub mod scalar_field;
pub mod synth;

pub use error::{Error, Result};
pub use eval::{
    benchmark, detect, detection_accuracy, hit_rate, oracle_segment, quality, score_masks,
    segment_prompts, BenchConfig, BenchReport, BenchRow, GeneratorSpec, OracleMask,
};
pub use persistence::{
    compute_diagram, filter_by_persistence, top_k, Connectivity, PersistenceDiagram,
    PersistencePair,
};
pub use prompts::{
    export_prompts, grid_prompts, import_prompts, random_prompts, tda_prompts, Generator,
    PromptParams, PromptPoint, PromptSet, TdaConfig,
};
pub use scalar_field::{gaussian_smooth, load_image, normalize, LoadOptions, ScalarImage};
pub use synth::{dataset, generate_scene, Oval, SceneConfig, SyntheticScene};
