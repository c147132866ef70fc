//! Render, reference, compare and bench commands for the light samplers.
//!
//! Exit codes: 0 success, 1 every bench run failed, 2 usage, 3 I/O, 4 malformed input
//! (scene or image files), 5 incompatible images.

pub mod scene_arg;
pub mod stats;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use rlcuts::estimators::render_with;
use rlcuts::hash_grid::JitterMode;
use rlcuts::image::compare;
use rlcuts::{
    CutConfig, HashGridParams, Image, LearningSchedule, RenderConfig, SamplerKind, SceneContext,
};

use scene_arg::SceneArg;
use stats::{join, ConvergenceRow, RenderStats};

pub const EXIT_RUNS_FAILED: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_MALFORMED: i32 = 4;
pub const EXIT_MISMATCH: i32 = 5;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] rlcuts::Error),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("all {0} runs failed")]
    AllRunsFailed(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use rlcuts::Error as E;
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Csv(_) => EXIT_IO,
            CliError::AllRunsFailed(_) => EXIT_RUNS_FAILED,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) => EXIT_USAGE,
                E::Io(_) => EXIT_IO,
                E::DimensionMismatch(..) => EXIT_MISMATCH,
                E::Parse { .. }
                | E::Schema(_)
                | E::Image(_)
                | E::EmptyScene
                | E::NoEmitters
                | E::DegenerateTriangle(_) => EXIT_MALFORMED,
            },
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Parser)]
#[command(name = "rlcuts", version, about = "Many-lights sampler benchmark harness")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Render one scene and write PFM, PPM and a one-row stats CSV.
    Render(RenderCmd),
    /// High-spp ground-truth render, PFM only.
    Reference(ReferenceCmd),
    /// MSE and relative MSE of image A against image B.
    Compare(CompareCmd),
    /// Cross product of scenes, samplers and spp values into one CSV.
    Bench(BenchCmd),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Schedule {
    Constant,
    VisitCount,
}

fn parse_sampler(s: &str) -> Result<SamplerKind, String> {
    s.parse().map_err(|e: rlcuts::Error| e.to_string())
}

fn parse_cut_size(s: &str) -> Result<usize, String> {
    match s {
        "128" => Ok(128),
        "256" => Ok(256),
        _ => Err(format!("cut size must be 128 or 256, got '{s}'")),
    }
}

/// Settings shared by every render.
#[derive(Clone, Debug, Args)]
pub struct RunOpts {
    #[arg(long, default_value_t = 16)]
    pub passes: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Overrides the scene camera's width.
    #[arg(long)]
    pub width: Option<usize>,
    #[arg(long)]
    pub height: Option<usize>,
    /// Path vertices with a direct-light sample; 1 is direct lighting only.
    #[arg(long, default_value_t = 1)]
    pub depth: usize,
    /// Worker threads; 1 is sequential and bit-reproducible, 0 uses all cores.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Leaves per cut.
    #[arg(long, default_value = "128", value_parser = parse_cut_size)]
    pub cut_size: usize,
    /// Learning rate of the constant schedule.
    #[arg(long, default_value_t = CutConfig::default().alpha)]
    pub alpha: f64,
    /// Split-collapse threshold.
    #[arg(long = "threshold-T", alias = "threshold-t", default_value_t = CutConfig::default().threshold)]
    pub threshold_t: f64,
    #[arg(long, value_enum, default_value_t = Schedule::Constant)]
    pub schedule: Schedule,
    /// Weight of the initial cluster values under the visit-count schedule.
    #[arg(long, default_value_t = CutConfig::default().prior_visits)]
    pub prior_visits: f64,
    /// Split-collapse rounds per pass.
    #[arg(long, default_value_t = CutConfig::default().iterations)]
    pub iterations: usize,
    /// World-space size of a level-0 hash cell.
    #[arg(long, default_value_t = HashGridParams::default().base_tile)]
    pub base_tile: f64,
    #[arg(long, default_value_t = HashGridParams::default().capacity)]
    pub hash_capacity: usize,
    /// Hash jitter range in cell units; 0 disables jitter.
    #[arg(long, default_value_t = HashGridParams::default().jitter.scale)]
    pub jitter_scale: f64,
    /// Jitter positions along all three axes instead of within the surface plane.
    #[arg(long)]
    pub no_tangent_jitter: bool,
    /// Multiplier on the jitter range for the normal quantization.
    #[arg(long, default_value_t = HashGridParams::default().jitter.normal)]
    pub normal_jitter: f64,
}

impl RunOpts {
    pub fn config(&self, sampler: SamplerKind, spp: usize) -> RenderConfig {
        RenderConfig {
            spp,
            passes: self.passes,
            max_depth: self.depth,
            sampler,
            cut: CutConfig {
                size: self.cut_size,
                alpha: self.alpha,
                threshold: self.threshold_t,
                iterations: self.iterations,
                schedule: match self.schedule {
                    Schedule::Constant => LearningSchedule::Constant,
                    Schedule::VisitCount => LearningSchedule::VisitCount,
                },
                prior_visits: self.prior_visits,
                ..CutConfig::default()
            },
            hash: HashGridParams {
                capacity: self.hash_capacity,
                base_tile: self.base_tile,
                jitter: JitterMode {
                    scale: self.jitter_scale,
                    tangent: !self.no_tangent_jitter,
                    normal: self.normal_jitter,
                },
                ..HashGridParams::default()
            },
            seed: self.seed,
            workers: self.workers,
        }
    }
}

#[derive(Debug, Args)]
pub struct RenderCmd {
    /// JSON scene file or `generator[:key=value,...]`.
    #[arg(long)]
    pub scene: String,
    #[arg(long, default_value = "rl", value_parser = parse_sampler)]
    pub sampler: SamplerKind,
    #[arg(long, default_value_t = 64)]
    pub spp: usize,
    /// Reference PFM; enables the MSE columns.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct ReferenceCmd {
    #[arg(long)]
    pub scene: String,
    /// At least 1024.
    #[arg(long, default_value_t = 4096)]
    pub spp: usize,
    #[arg(long, default_value = "uniform", value_parser = parse_sampler)]
    pub sampler: SamplerKind,
    /// Output PFM file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub run: RunOpts,
}

#[derive(Debug, Args)]
pub struct CompareCmd {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Debug, Args)]
pub struct BenchCmd {
    /// Comma-separated scene list.
    #[arg(long, value_delimiter = ',', required = true)]
    pub scenes: Vec<String>,
    #[arg(long, value_delimiter = ',', default_value = "uniform,energy,rl", value_parser = parse_sampler)]
    pub samplers: Vec<SamplerKind>,
    #[arg(long, value_delimiter = ',', default_value = "64")]
    pub spp: Vec<usize>,
    /// Spp of the per-scene reference. Existing `references/<scene>.pfm` files in the output
    /// directory are reused.
    #[arg(long, default_value_t = 4096)]
    pub reference_spp: usize,
    #[arg(long, default_value = "uniform", value_parser = parse_sampler)]
    pub reference_sampler: SamplerKind,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Also write the PFM and PPM of every run.
    #[arg(long)]
    pub save_images: bool,
    #[command(flatten)]
    pub run: RunOpts,
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match run(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Render(c) => cmd_render(&c),
        Command::Reference(c) => cmd_reference(&c),
        Command::Compare(c) => {
            let (mse, rel) = cmd_compare(&c.a, &c.b)?;
            println!("mse={mse:e} relative_mse={rel:e}");
            Ok(())
        }
        Command::Bench(c) => cmd_bench(&c),
    }
}

/// Result of one render with its table row and per-pass series.
pub struct Run {
    pub image: Image,
    pub stats: RenderStats,
    pub convergence: Vec<ConvergenceRow>,
}

/// Renders `scene` under `config`, scoring every pass against `reference` when given.
pub fn run_one(
    scene_id: &str,
    scene: &rlcuts::Scene,
    config: &RenderConfig,
    reference: Option<&Image>,
) -> Result<Run, CliError> {
    let ctx = SceneContext::new(scene)?;
    let (w, h) = (scene.camera.width, scene.camera.height);
    let mut stats = RenderStats::from_config(scene_id, w, h, config);
    let mut series = Vec::with_capacity(config.passes);
    let mut pass_error = None;
    let out = render_with(&ctx, config, |_, fb| {
        if let Some(r) = reference {
            match compare(&fb.image(), r) {
                Ok(e) => series.push(Some(e.mse)),
                Err(e) => pass_error = Some(e),
            }
        } else {
            series.push(None);
        }
    })?;
    if let Some(e) = pass_error {
        return Err(e.into());
    }
    if let Some(r) = reference {
        let e = compare(&out.image, r)?;
        stats.mse = Some(e.mse);
        stats.relative_mse = Some(e.relative);
    }
    stats.mse_series = join(series.iter().flatten().map(|m| format!("{m:e}")));
    stats.seconds = out.seconds;
    stats.occupied_cells = out.occupied_cells;
    stats.fallback_rate = out.fallback_hits as f64 / (w * h * config.spp) as f64;
    stats.split_collapse_changes = join(out.passes.iter().map(|p| p.update.split_collapse_changes));
    let convergence = out
        .passes
        .iter()
        .zip(&series)
        .map(|(p, mse)| ConvergenceRow {
            scene: scene_id.to_string(),
            sampler: config.sampler.name().to_string(),
            spp: config.spp,
            pass: p.pass,
            mse: *mse,
            split_collapse_changes: p.update.split_collapse_changes,
            seconds: p.seconds,
        })
        .collect();
    Ok(Run {
        image: out.image,
        stats,
        convergence,
    })
}

fn file_stem(scene_id: &str, config: &RenderConfig) -> String {
    format!("{scene_id}_{}_spp{}_seed{}", config.sampler.name(), config.spp, config.seed)
}

fn save_images(image: &Image, dir: &Path, stem: &str) -> Result<(), CliError> {
    image.save_pfm(dir.join(format!("{stem}.pfm")))?;
    image.save_ppm(dir.join(format!("{stem}.ppm")))?;
    Ok(())
}

fn write_csv<T: serde::Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = csv::Writer::from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn load_reference(path: &Path) -> Result<Image, CliError> {
    if !path.exists() {
        return Err(CliError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        });
    }
    Ok(Image::load_pfm(path)?)
}

pub fn cmd_render(c: &RenderCmd) -> Result<(), CliError> {
    let arg = SceneArg::parse(&c.scene)?;
    let config = c.run.config(c.sampler, c.spp);
    config.validate()?;
    let reference = c.reference.as_deref().map(load_reference).transpose()?;
    let scene = arg.build(c.run.width, c.run.height)?;
    fs::create_dir_all(&c.out).map_err(io_err(&c.out))?;
    let id = arg.id();
    let run = run_one(&id, &scene, &config, reference.as_ref())?;
    let stem = file_stem(&id, &config);
    save_images(&run.image, &c.out, &stem)?;
    let path = c.out.join(format!("{stem}.csv"));
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    stats::write_stats(file, &[run.stats])?;
    println!("wrote {}", c.out.join(&stem).display());
    Ok(())
}

pub const MIN_REFERENCE_SPP: usize = 1024;

pub fn cmd_reference(c: &ReferenceCmd) -> Result<(), CliError> {
    if c.spp < MIN_REFERENCE_SPP {
        return Err(CliError::Usage(format!(
            "reference spp must be at least {MIN_REFERENCE_SPP}, got {}",
            c.spp
        )));
    }
    let arg = SceneArg::parse(&c.scene)?;
    let config = c.run.config(c.sampler, c.spp);
    config.validate()?;
    let scene = arg.build(c.run.width, c.run.height)?;
    let image = reference_image(&scene, &config)?;
    if let Some(dir) = c.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    image.save_pfm(&c.out)?;
    Ok(())
}

pub fn reference_image(scene: &rlcuts::Scene, config: &RenderConfig) -> Result<Image, CliError> {
    let ctx = SceneContext::new(scene)?;
    Ok(rlcuts::estimators::render(&ctx, config)?.image)
}

pub fn cmd_compare(a: &Path, b: &Path) -> Result<(f64, f64), CliError> {
    let a = load_reference(a)?;
    let b = load_reference(b)?;
    let e = compare(&a, &b)?;
    Ok((e.mse, e.relative))
}

pub fn cmd_bench(c: &BenchCmd) -> Result<(), CliError> {
    if c.reference_spp < MIN_REFERENCE_SPP {
        return Err(CliError::Usage(format!(
            "reference spp must be at least {MIN_REFERENCE_SPP}, got {}",
            c.reference_spp
        )));
    }
    let scenes = c
        .scenes
        .iter()
        .map(|s| SceneArg::parse(s))
        .collect::<Result<Vec<_>, _>>()?;
    let ref_dir = c.out.join("references");
    fs::create_dir_all(&ref_dir).map_err(io_err(&ref_dir))?;

    let mut rows = Vec::new();
    let mut series = Vec::new();
    let mut failed = 0;
    for arg in &scenes {
        let id = arg.id();
        let scene = match arg.build(c.run.width, c.run.height) {
            Ok(s) => s,
            Err(e) => {
                for &sampler in &c.samplers {
                    for &spp in &c.spp {
                        rows.push(failed_row(&id, &c.run.config(sampler, spp), 0, 0, &e));
                        failed += 1;
                    }
                }
                continue;
            }
        };
        let (w, h) = (scene.camera.width, scene.camera.height);
        let reference = bench_reference(&scene, &ref_dir.join(format!("{id}.pfm")), c);
        for &sampler in &c.samplers {
            for &spp in &c.spp {
                let config = c.run.config(sampler, spp);
                let result = match &reference {
                    Ok(r) => config
                        .validate()
                        .map_err(CliError::from)
                        .and_then(|_| run_one(&id, &scene, &config, Some(r))),
                    Err(e) => Err(CliError::Usage(format!("reference failed: {e}"))),
                };
                match result {
                    Ok(run) => {
                        if c.save_images {
                            save_images(&run.image, &c.out, &file_stem(&id, &config))?;
                        }
                        eprintln!(
                            "{id} {sampler} spp {spp}: mse {:e} in {:.1}s",
                            run.stats.mse.unwrap_or(f64::NAN),
                            run.stats.seconds
                        );
                        rows.push(run.stats);
                        series.extend(run.convergence);
                    }
                    Err(e) => {
                        rows.push(failed_row(&id, &config, w, h, &e));
                        failed += 1;
                    }
                }
            }
        }
    }
    fs::create_dir_all(&c.out).map_err(io_err(&c.out))?;
    let path = c.out.join("bench.csv");
    let file = fs::File::create(&path).map_err(io_err(&path))?;
    stats::write_stats(file, &rows)?;
    write_csv(&c.out.join("convergence.csv"), &series)?;
    if !rows.is_empty() && failed == rows.len() {
        return Err(CliError::AllRunsFailed(failed));
    }
    Ok(())
}

fn bench_reference(scene: &rlcuts::Scene, path: &Path, c: &BenchCmd) -> Result<Image, CliError> {
    if path.exists() {
        return Image::load_pfm(path).map_err(Into::into);
    }
    let mut opts = c.run.clone();
    if c.reference_sampler != SamplerKind::RlLightcuts {
        opts.passes = 1;
    }
    opts.seed = c.run.seed.wrapping_add(0x5eed);
    let config = opts.config(c.reference_sampler, c.reference_spp);
    config.validate()?;
    let image = reference_image(scene, &config)?;
    image.save_pfm(path)?;
    Ok(image)
}

fn failed_row(id: &str, config: &RenderConfig, w: usize, h: usize, e: &CliError) -> RenderStats {
    RenderStats {
        error: e.to_string(),
        ..RenderStats::from_config(id, w, h, config)
    }
}
