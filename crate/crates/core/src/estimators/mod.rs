//! Next-event estimation under interchangeable light samplers, and the multi-pass
//! path tracer that drives the learning.

mod integrator;
mod nee;
mod sampler;

pub use integrator::{
    end_of_pass_update, render, render_pass, render_with, Framebuffer, PassReport, PassUpdate,
    RenderConfig, RenderOutput, SceneContext,
};
pub use nee::{nee_estimate, NeeResult, ShadingPoint};
pub use sampler::{sample_light, EnergyCdf, LightSample, LightSelector, SamplerKind, Selection};
