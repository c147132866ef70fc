use std::f64::consts::FRAC_1_PI;

use super::sampler::LightSample;
use crate::math::Vec3;
use crate::scene::{Scene, SceneAccel};

/// A diffuse surface point about to receive a direct-light sample.
#[derive(Clone, Copy, Debug)]
pub struct ShadingPoint {
    pub position: Vec3,
    /// Unit normal on the side the path arrived from.
    pub normal: Vec3,
    pub albedo: Vec3,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeeResult {
    /// Unbiased radiance estimate: `f * Le * G * V / (p_select * p_area)`.
    pub radiance: Vec3,
    /// Estimate of the sampled cluster's total contribution:
    /// `lum(f * Le * G * V) / (p_in_cluster * p_area)`.
    pub feedback: f64,
    /// `lum(f * Le * G * V)` with no density division.
    pub raw: f64,
}

/// One next-event estimate toward `sample` from a Lambertian point.
pub fn nee_estimate(scene: &Scene, accel: &SceneAccel, sp: &ShadingPoint, sample: &LightSample) -> NeeResult {
    let light = &scene.triangles[sample.triangle_id];
    let to_light = sample.point - sp.position;
    let dist2 = to_light.length_squared();
    let dist = dist2.sqrt();
    if dist < accel.epsilon() {
        return NeeResult::default();
    }
    let wi = to_light / dist;
    let cos_x = sp.normal.dot(wi);
    let cos_y = -light.normal().dot(wi);
    if cos_x <= 0.0 || cos_y <= 0.0 {
        return NeeResult::default();
    }
    if accel.occluded(sp.position, sample.point) {
        return NeeResult::default();
    }
    let emission = scene.materials[light.material].emission;
    let contribution = (sp.albedo * FRAC_1_PI).mul_elem(emission) * (cos_x * cos_y / dist2);
    let lum = contribution.luminance();
    NeeResult {
        radiance: contribution / (sample.pdf_light_selection * sample.pdf_area),
        feedback: lum / (sample.pdf_in_cluster * sample.pdf_area),
        raw: lum,
    }
}
