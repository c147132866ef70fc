use std::f64::consts::{FRAC_1_PI, PI};
use std::time::Instant;

use rayon::prelude::*;

use super::nee::{nee_estimate, ShadingPoint};
use super::sampler::{sample_light, EnergyCdf, LightSelector, SamplerKind};
use crate::cut::{Cut, CutConfig, Feedback};
use crate::error::{Error, Result};
use crate::hash_grid::{CellHandle, HashGrid, HashGridParams};
use crate::image::Image;
use crate::light_tree::{emitter_records, EmitterRecord, LightTree};
use crate::math::Vec3;
use crate::rng::{pixel_jitter, SampleStream};
use crate::scene::{Ray, Scene, SceneAccel};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderConfig {
    /// Samples per pixel over all passes.
    pub spp: usize,
    pub passes: usize,
    /// Path vertices that receive a direct-light sample; 1 is direct lighting only.
    pub max_depth: usize,
    pub sampler: SamplerKind,
    pub cut: CutConfig,
    pub hash: HashGridParams,
    pub seed: u64,
    /// Worker threads; 1 renders sequentially and bit-reproducibly, 0 uses all cores.
    pub workers: usize,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            spp: 64,
            passes: 16,
            max_depth: 1,
            sampler: SamplerKind::RlLightcuts,
            cut: CutConfig::default(),
            hash: HashGridParams::default(),
            seed: 1,
            workers: 1,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 || self.passes == 0 {
            return Err(Error::invalid("spp and passes must be positive"));
        }
        if !self.spp.is_multiple_of(self.passes) {
            return Err(Error::invalid(format!(
                "spp ({}) must be divisible by passes ({})",
                self.spp, self.passes
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::invalid("max depth must be at least 1"));
        }
        self.cut.validate().map_err(Error::InvalidArgument)?;
        Ok(())
    }

    pub fn spp_per_pass(&self) -> usize {
        self.spp / self.passes
    }
}

/// Per-scene structures shared by all renders of that scene.
pub struct SceneContext<'s> {
    pub scene: &'s Scene,
    pub accel: SceneAccel,
    pub emitters: Vec<EmitterRecord>,
    pub tree: LightTree,
    pub energy: EnergyCdf,
}

impl<'s> SceneContext<'s> {
    pub fn new(scene: &'s Scene) -> Result<Self> {
        let accel = SceneAccel::build(scene)?;
        let emitters = emitter_records(scene);
        let tree = LightTree::build(&emitters)?;
        let energy = EnergyCdf::build(&emitters)?;
        Ok(Self {
            scene,
            accel,
            emitters,
            tree,
            energy,
        })
    }

    pub fn initial_cut(&self, cfg: &CutConfig) -> Cut {
        Cut::init(&self.tree, cfg.size, cfg.floor())
    }

    pub fn new_grid(&self, config: &RenderConfig) -> Result<HashGrid> {
        HashGrid::new(config.hash, self.initial_cut(&config.cut))
    }
}

/// Linear radiance sums and sample counts per pixel.
#[derive(Clone, Debug, PartialEq)]
pub struct Framebuffer {
    pub width: usize,
    pub height: usize,
    pub sum: Vec<Vec3>,
    pub count: Vec<u32>,
}

impl Framebuffer {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            sum: vec![Vec3::ZERO; width * height],
            count: vec![0; width * height],
        }
    }

    pub fn image(&self) -> Image {
        Image {
            width: self.width,
            height: self.height,
            pixels: self
                .sum
                .iter()
                .zip(&self.count)
                .map(|(&s, &c)| if c > 0 { s / c as f64 } else { Vec3::ZERO })
                .collect(),
        }
    }
}

fn cosine_hemisphere(n: Vec3, u1: f64, u2: f64) -> (Vec3, f64) {
    let r = u1.sqrt();
    let phi = 2.0 * PI * u2;
    let z = (1.0 - u1).max(0.0).sqrt();
    let (t, b) = n.orthonormal_basis();
    let d = (t * (r * phi.cos()) + b * (r * phi.sin()) + n * z).normalize();
    (d, z * FRAC_1_PI)
}

// Sample dimensions within a vertex's stream. The pixel position comes from `pixel_jitter`.
const DIM_JITTER: u32 = 2;
const DIM_LIGHT: u32 = 7;
const DIM_BOUNCE: u32 = 10;

/// Traces one camera path and returns its radiance.
fn trace_path(
    ctx: &SceneContext<'_>,
    grid: Option<&HashGrid>,
    config: &RenderConfig,
    px: usize,
    py: usize,
    sample: u64,
) -> Vec3 {
    let scene = ctx.scene;
    let cam = &scene.camera;
    let pixel = (py * cam.width + px) as u64;
    let (jx, jy) = pixel_jitter(config.seed, pixel, sample as u32);
    let mut ray = cam.generate_ray(px, py, jx, jy);
    let mut throughput = Vec3::ONE;
    let mut radiance = Vec3::ZERO;
    let eps = ctx.accel.epsilon();

    for depth in 0..config.max_depth {
        let rng = SampleStream::new(config.seed, pixel, sample, depth as u32);
        let Some(hit) = ctx.accel.intersect(&ray) else { break };
        let material = scene.material_of(hit.triangle_id);
        let facing = hit.geometric_normal.dot(ray.dir) < 0.0;
        if depth == 0 && facing && material.is_emissive() {
            radiance += throughput.mul_elem(material.emission);
        }
        if material.albedo.max_component() <= 0.0 {
            break;
        }
        let normal = if facing { hit.geometric_normal } else { -hit.geometric_normal };
        let sp = ShadingPoint {
            position: hit.position,
            normal,
            albedo: material.albedo,
        };

        let u = [rng.get(DIM_LIGHT), rng.get(DIM_LIGHT + 1), rng.get(DIM_LIGHT + 2)];
        match config.sampler {
            SamplerKind::Uniform | SamplerKind::Energy => {
                let selector = if config.sampler == SamplerKind::Uniform {
                    LightSelector::Uniform
                } else {
                    LightSelector::Energy(&ctx.energy)
                };
                let ls = sample_light(scene, &ctx.emitters, &selector, u[0], u[1], u[2]);
                let nee = nee_estimate(scene, &ctx.accel, &sp, &ls);
                radiance += throughput.mul_elem(nee.radiance);
            }
            SamplerKind::RlLightcuts => {
                let grid = grid.expect("reinforcement sampler needs a hash grid");
                let jitter = [
                    rng.get(DIM_JITTER),
                    rng.get(DIM_JITTER + 1),
                    rng.get(DIM_JITTER + 2),
                    rng.get(DIM_JITTER + 3),
                    rng.get(DIM_JITTER + 4),
                ];
                let key = grid.key_for(hit.position, normal, hit.area_pdf, &jitter);
                let handle = grid.lookup_or_insert(key);
                let ls = match grid.cell(handle) {
                    Some(cell) => {
                        let cut = cell.lock();
                        let selector = LightSelector::Cut { cut: &cut, tree: &ctx.tree };
                        sample_light(scene, &ctx.emitters, &selector, u[0], u[1], u[2])
                    }
                    None => {
                        let selector = LightSelector::Cut {
                            cut: grid.fallback_cut(),
                            tree: &ctx.tree,
                        };
                        sample_light(scene, &ctx.emitters, &selector, u[0], u[1], u[2])
                    }
                };
                let nee = nee_estimate(scene, &ctx.accel, &sp, &ls);
                radiance += throughput.mul_elem(nee.radiance);
                if let (CellHandle::Slot(_), Some(cell)) = (handle, grid.cell(handle)) {
                    let v = match config.cut.feedback {
                        Feedback::ClusterTotal => nee.feedback,
                        Feedback::RawContribution => nee.raw,
                    };
                    let s = ls.cluster_index.expect("cut sampling records the cluster");
                    cell.lock().update_q(s, v, &config.cut);
                    cell.mark_touched();
                }
            }
        }

        if depth + 1 == config.max_depth {
            break;
        }
        let (dir, pdf) = cosine_hemisphere(normal, rng.get(DIM_BOUNCE), rng.get(DIM_BOUNCE + 1));
        if pdf <= 0.0 {
            break;
        }
        // Lambertian: f * cos / pdf = albedo.
        throughput = throughput.mul_elem(material.albedo);
        ray = Ray {
            origin: hit.position,
            dir,
            t_min: eps,
            t_max: f64::INFINITY,
            dir_pdf: pdf,
        };
    }
    radiance
}

/// Renders `spp / passes` samples per pixel into `fb`. Reinforcement updates land in `grid`
/// immediately; cdfs and cut topology only change in [`end_of_pass_update`].
pub fn render_pass(
    ctx: &SceneContext<'_>,
    grid: Option<&HashGrid>,
    config: &RenderConfig,
    pass_index: usize,
    fb: &mut Framebuffer,
    pool: Option<&rayon::ThreadPool>,
) {
    let spp = config.spp_per_pass();
    let width = fb.width;
    let render_row = |(py, (sums, counts)): (usize, (&mut [Vec3], &mut [u32]))| {
        for px in 0..width {
            let mut acc = Vec3::ZERO;
            for j in 0..spp {
                let sample = (pass_index * spp + j) as u64;
                acc += trace_path(ctx, grid, config, px, py, sample);
            }
            sums[px] += acc;
            counts[px] += spp as u32;
        }
    };
    let rows = fb.sum.chunks_mut(width).zip(fb.count.chunks_mut(width));
    match pool {
        None => rows.enumerate().for_each(render_row),
        Some(pool) => pool.install(|| {
            fb.sum
                .par_chunks_mut(width)
                .zip(fb.count.par_chunks_mut(width))
                .enumerate()
                .for_each(render_row)
        }),
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PassUpdate {
    pub touched_cells: usize,
    pub split_collapse_changes: usize,
}

/// Adapts and re-normalizes every cell touched during the pass, then clears the marks.
pub fn end_of_pass_update(grid: &mut HashGrid, tree: &LightTree, cfg: &CutConfig) -> PassUpdate {
    let floor = cfg.floor();
    let (touched, changes) = grid
        .slots_mut()
        .par_iter_mut()
        .filter_map(|slot| slot.get_mut())
        .map(|cell| {
            if !cell.take_touched() {
                return (0, 0);
            }
            let cut = cell.cut_mut();
            let n = cut.split_collapse(tree, cfg.threshold, cfg.iterations, floor);
            cut.rebuild_cdf();
            (1, n)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    PassUpdate {
        touched_cells: touched,
        split_collapse_changes: changes,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PassReport {
    pub pass: usize,
    pub update: PassUpdate,
    pub seconds: f64,
}

#[derive(Clone, Debug)]
pub struct RenderOutput {
    pub image: Image,
    pub passes: Vec<PassReport>,
    pub occupied_cells: usize,
    pub fallback_hits: u64,
    pub cut_storage_bytes: usize,
    pub seconds: f64,
}

/// Runs all passes of `config`, calling `on_pass` with the running image after each one.
pub fn render_with(
    ctx: &SceneContext<'_>,
    config: &RenderConfig,
    mut on_pass: impl FnMut(&PassReport, &Framebuffer),
) -> Result<RenderOutput> {
    config.validate()?;
    let start = Instant::now();
    let cam = &ctx.scene.camera;
    let mut fb = Framebuffer::new(cam.width, cam.height);
    let mut grid = match config.sampler {
        SamplerKind::RlLightcuts => Some(ctx.new_grid(config)?),
        _ => None,
    };
    let pool = if config.workers == 1 {
        None
    } else {
        Some(
            rayon::ThreadPoolBuilder::new()
                .num_threads(config.workers)
                .build()
                .map_err(|e| Error::invalid(format!("thread pool: {e}")))?,
        )
    };
    let mut passes = Vec::with_capacity(config.passes);
    for pass in 0..config.passes {
        let t0 = Instant::now();
        render_pass(ctx, grid.as_ref(), config, pass, &mut fb, pool.as_ref());
        let update = match grid.as_mut() {
            Some(g) => end_of_pass_update(g, &ctx.tree, &config.cut),
            None => PassUpdate::default(),
        };
        let report = PassReport {
            pass,
            update,
            seconds: t0.elapsed().as_secs_f64(),
        };
        on_pass(&report, &fb);
        passes.push(report);
    }
    Ok(RenderOutput {
        image: fb.image(),
        passes,
        occupied_cells: grid.as_ref().map_or(0, HashGrid::occupied),
        fallback_hits: grid.as_ref().map_or(0, HashGrid::fallback_hits),
        cut_storage_bytes: grid.as_ref().map_or(0, HashGrid::cut_storage_bytes),
        seconds: start.elapsed().as_secs_f64(),
    })
}

pub fn render(ctx: &SceneContext<'_>, config: &RenderConfig) -> Result<RenderOutput> {
    render_with(ctx, config, |_, _| {})
}
