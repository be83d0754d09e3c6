//! Dataset generation, batch evaluation, toy training and rendering.

pub mod config;
pub mod dataset;
pub mod evaluate;
pub mod render;
pub mod seeds;

pub use config::{FamilyFilter, RunConfig, SAMPLES_PER_LAYOUT};
pub use dataset::{
    cmd_eval, cmd_extract, cmd_generate, cmd_train_toy, cmd_validate, eval_label_tensor, exit_code, list_samples,
    with_pool, EvalSummary, ExtractOutcome, GenerateSummary, SampleKind, SampleMeta, SampleResult, SavedModel,
};
pub use evaluate::{eval_in_memory, family_rates, score, FamilyRate};
pub use render::{cmd_render, render_svg};
pub use seeds::{derive_seed, Salt};
