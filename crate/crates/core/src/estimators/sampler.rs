use std::fmt;
use std::str::FromStr;

use crate::cut::Cut;
use crate::error::{Error, Result};
use crate::light_tree::{EmitterRecord, LightTree};
use crate::math::Vec3;
use crate::scene::{sample_triangle_point, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SamplerKind {
    Uniform,
    Energy,
    RlLightcuts,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 3] = [SamplerKind::Uniform, SamplerKind::Energy, SamplerKind::RlLightcuts];

    pub fn name(self) -> &'static str {
        match self {
            SamplerKind::Uniform => "uniform",
            SamplerKind::Energy => "energy",
            SamplerKind::RlLightcuts => "rl",
        }
    }
}

impl fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(SamplerKind::Uniform),
            "energy" => Ok(SamplerKind::Energy),
            "rl" | "rl-lightcuts" => Ok(SamplerKind::RlLightcuts),
            other => Err(Error::invalid(format!("unknown sampler '{other}'"))),
        }
    }
}

/// Discrete distribution over emitters proportional to their energy.
#[derive(Clone, Debug)]
pub struct EnergyCdf {
    cdf: Vec<f64>,
}

impl EnergyCdf {
    pub fn build(emitters: &[EmitterRecord]) -> Result<Self> {
        if emitters.is_empty() {
            return Err(Error::NoEmitters);
        }
        let mut acc = 0.0;
        let cdf = emitters
            .iter()
            .map(|e| {
                acc += e.energy;
                acc
            })
            .collect();
        Ok(Self { cdf })
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    pub fn probability(&self, i: usize) -> f64 {
        let prev = if i == 0 { 0.0 } else { self.cdf[i - 1] };
        (self.cdf[i] - prev) / self.total()
    }

    /// Inverts the cdf at `u` in `[0, 1)`.
    pub fn sample(&self, u: f64) -> (usize, f64) {
        let target = u * self.total();
        let i = self.cdf.partition_point(|&c| c <= target).min(self.cdf.len() - 1);
        (i, self.probability(i))
    }
}

/// Where a light selection comes from.
#[derive(Clone, Copy)]
pub enum LightSelector<'a> {
    Uniform,
    Energy(&'a EnergyCdf),
    /// Cluster from the cut, then a uniform light inside the cluster's tree-order range.
    Cut { cut: &'a Cut, tree: &'a LightTree },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Selection {
    /// Index into the emitter list.
    pub emitter: usize,
    pub pdf: f64,
    pub cluster: Option<usize>,
    /// Probability of the light given its cluster (1 for the baselines).
    pub pdf_in_cluster: f64,
}

impl LightSelector<'_> {
    /// Chooses an emitter with a single uniform number; cut sampling reuses the remainder of
    /// `u` inside the chosen cluster.
    pub fn select(&self, emitter_count: usize, u: f64) -> Selection {
        match *self {
            LightSelector::Uniform => {
                let i = ((u * emitter_count as f64) as usize).min(emitter_count - 1);
                Selection {
                    emitter: i,
                    pdf: 1.0 / emitter_count as f64,
                    cluster: None,
                    pdf_in_cluster: 1.0,
                }
            }
            LightSelector::Energy(cdf) => {
                let (i, p) = cdf.sample(u);
                Selection {
                    emitter: i,
                    pdf: p,
                    cluster: None,
                    pdf_in_cluster: 1.0,
                }
            }
            LightSelector::Cut { cut, tree } => {
                let (s, p_cluster) = cut.sample_cluster(u);
                let (begin, end) = cut.cluster_range(s);
                let len = (end - begin) as usize;
                let lo = if s == 0 { 0.0 } else { cut.cdf()[s - 1] };
                let width = cut.cdf()[s] - lo;
                let rem = ((u * cut.total() - lo) / width).clamp(0.0, 1.0);
                let k = ((rem * len as f64) as usize).min(len - 1);
                Selection {
                    emitter: tree.emitter_at(begin as usize + k),
                    pdf: p_cluster / len as f64,
                    cluster: Some(s),
                    pdf_in_cluster: 1.0 / len as f64,
                }
            }
        }
    }

    /// Selection probability of emitter `i` (tree positions are resolved through `tree`).
    pub fn probability(&self, emitter_count: usize, i: usize, position_of: impl Fn(usize) -> u32) -> f64 {
        match *self {
            LightSelector::Uniform => 1.0 / emitter_count as f64,
            LightSelector::Energy(cdf) => cdf.probability(i),
            LightSelector::Cut { cut, .. } => {
                let s = cut.cluster_of(position_of(i));
                let (b, e) = cut.cluster_range(s);
                cut.cluster_probability(s) / (e - b) as f64
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightSample {
    pub emitter: usize,
    pub triangle_id: usize,
    pub point: Vec3,
    pub pdf_light_selection: f64,
    /// `1 / area` of the chosen triangle.
    pub pdf_area: f64,
    pub cluster_index: Option<usize>,
    pub pdf_in_cluster: f64,
}

/// Selects an emitter with `u1` and a uniform point on it with `(u2, u3)`.
pub fn sample_light(
    scene: &Scene,
    emitters: &[EmitterRecord],
    selector: &LightSelector<'_>,
    u1: f64,
    u2: f64,
    u3: f64,
) -> LightSample {
    let sel = selector.select(emitters.len(), u1);
    let triangle_id = emitters[sel.emitter].triangle_id;
    let (point, pdf_area) = sample_triangle_point(&scene.triangles[triangle_id], u2, u3)
        .expect("emitters have positive area");
    LightSample {
        emitter: sel.emitter,
        triangle_id,
        point,
        pdf_light_selection: sel.pdf,
        pdf_area,
        cluster_index: sel.cluster,
        pdf_in_cluster: sel.pdf_in_cluster,
    }
}
