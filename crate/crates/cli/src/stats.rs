//! Per-run statistics and their CSV layout.

use std::io::Write;

use serde::Serialize;

use rlcuts::{LearningSchedule, RenderConfig};

/// One CSV row. The column order is the field order below and never changes:
///
/// | column | meaning |
/// |---|---|
/// | `scene` | scene identifier |
/// | `sampler` | `uniform`, `energy` or `rl` |
/// | `spp`, `passes`, `seed`, `width`, `height`, `max_depth`, `workers` | run setup |
/// | `cut_size`, `alpha`, `threshold_t`, `schedule`, `prior_visits`, `iterations` | cut learning setup |
/// | `base_tile`, `hash_capacity`, `jitter_scale`, `tangent_jitter`, `normal_jitter` | hash setup |
/// | `mse`, `relative_mse` | final error against the reference, empty without one |
/// | `mse_series` | `;`-separated MSE of the running image after each pass |
/// | `seconds` | wall time of the render |
/// | `occupied_cells` | hash cells holding a cut at the end |
/// | `fallback_rate` | lookups answered by the shared fallback cut, per camera sample |
/// | `split_collapse_changes` | `;`-separated topology changes per pass |
/// | `error` | failure message, empty on success |
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RenderStats {
    pub scene: String,
    pub sampler: String,
    pub spp: usize,
    pub passes: usize,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    pub max_depth: usize,
    pub workers: usize,
    pub cut_size: usize,
    pub alpha: f64,
    pub threshold_t: f64,
    pub schedule: String,
    pub prior_visits: f64,
    pub iterations: usize,
    pub base_tile: f64,
    pub hash_capacity: usize,
    pub jitter_scale: f64,
    pub tangent_jitter: bool,
    pub normal_jitter: f64,
    pub mse: Option<f64>,
    pub relative_mse: Option<f64>,
    pub mse_series: String,
    pub seconds: f64,
    pub occupied_cells: usize,
    pub fallback_rate: f64,
    pub split_collapse_changes: String,
    pub error: String,
}

pub const COLUMNS: [&str; 28] = [
    "scene",
    "sampler",
    "spp",
    "passes",
    "seed",
    "width",
    "height",
    "max_depth",
    "workers",
    "cut_size",
    "alpha",
    "threshold_t",
    "schedule",
    "prior_visits",
    "iterations",
    "base_tile",
    "hash_capacity",
    "jitter_scale",
    "tangent_jitter",
    "normal_jitter",
    "mse",
    "relative_mse",
    "mse_series",
    "seconds",
    "occupied_cells",
    "fallback_rate",
    "split_collapse_changes",
    "error",
];

impl RenderStats {
    /// A row with every setup column filled from `config`.
    pub fn from_config(scene: &str, width: usize, height: usize, config: &RenderConfig) -> Self {
        RenderStats {
            scene: scene.to_string(),
            sampler: config.sampler.name().to_string(),
            spp: config.spp,
            passes: config.passes,
            seed: config.seed,
            width,
            height,
            max_depth: config.max_depth,
            workers: config.workers,
            cut_size: config.cut.size,
            alpha: config.cut.alpha,
            threshold_t: config.cut.threshold,
            schedule: schedule_name(config.cut.schedule).to_string(),
            prior_visits: config.cut.prior_visits,
            iterations: config.cut.iterations,
            base_tile: config.hash.base_tile,
            hash_capacity: config.hash.capacity,
            jitter_scale: config.hash.jitter.scale,
            tangent_jitter: config.hash.jitter.tangent,
            normal_jitter: config.hash.jitter.normal,
            ..Default::default()
        }
    }
}

pub fn schedule_name(s: LearningSchedule) -> &'static str {
    match s {
        LearningSchedule::Constant => "constant",
        LearningSchedule::VisitCount => "visit-count",
    }
}

pub fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

pub fn write_stats<W: Write>(w: W, rows: &[RenderStats]) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    if rows.is_empty() {
        out.write_record(COLUMNS)?;
    }
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// MSE-vs-pass rows: `scene,sampler,spp,pass,mse,split_collapse_changes,seconds`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub scene: String,
    pub sampler: String,
    pub spp: usize,
    pub pass: usize,
    pub mse: Option<f64>,
    pub split_collapse_changes: usize,
    pub seconds: f64,
}
