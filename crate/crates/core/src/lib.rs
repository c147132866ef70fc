//! Many-lights direct illumination with learned, bounded-size light tree cuts.
//!
//! Every cell of a sparse position/normal hash owns a fixed-size cut into one global light
//! hierarchy. Cluster values are learned online from the shadowed contribution of the samples
//! drawn through them, and the cut topology is refined between passes, so sampling follows
//! visibility while the memory per cell stays independent of the number of lights.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cut;
pub mod error;
pub mod estimators;
pub mod hash_grid;
pub mod image;
pub mod light_tree;
pub mod math;
pub mod rng;
pub mod scene;

pub use cut::{Cut, CutConfig, Feedback, LearningSchedule};
pub use error::{Error, Result};
pub use estimators::{RenderConfig, SamplerKind, SceneContext};
pub use hash_grid::{HashGrid, HashGridParams};
pub use image::Image;
pub use light_tree::{EmitterRecord, LightTree};
pub use math::Vec3;
pub use scene::Scene;
