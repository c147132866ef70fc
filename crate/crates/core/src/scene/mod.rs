//! Triangle scenes, intersection acceleration, procedural benchmark scenes and the JSON loader.

mod accel;
mod generators;
mod io;

pub use accel::{brute_force_intersect, brute_force_occluded, intersect_triangle, SceneAccel};
pub use generators::{
    dome_triangles, gen_cornell_grid, gen_cornell_grid_with, gen_window_room,
    gen_window_room_with, window_openings, CornellGridParams, WindowRoomParams, ROOM_MAX, ROOM_MIN,
};
pub use io::{load_scene, save_scene, scene_from_json, scene_to_json};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub p0: Vec3,
    pub p1: Vec3,
    pub p2: Vec3,
    pub material: usize,
}

impl Triangle {
    pub fn new(p0: Vec3, p1: Vec3, p2: Vec3, material: usize) -> Self {
        Self { p0, p1, p2, material }
    }

    /// Unnormalized normal; its length is twice the area.
    #[inline]
    pub fn cross(&self) -> Vec3 {
        (self.p1 - self.p0).cross(self.p2 - self.p0)
    }

    #[inline]
    pub fn area(&self) -> f64 {
        0.5 * self.cross().length()
    }

    /// Unit normal following the winding `p0 -> p1 -> p2`. Emitters radiate on this side.
    #[inline]
    pub fn normal(&self) -> Vec3 {
        self.cross().normalize()
    }

    pub fn centroid(&self) -> Vec3 {
        (self.p0 + self.p1 + self.p2) / 3.0
    }

    pub fn bounds(&self) -> Aabb {
        let mut b = Aabb::from_point(self.p0);
        b.grow(self.p1);
        b.grow(self.p2);
        b
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub albedo: Vec3,
    pub emission: Vec3,
}

impl Material {
    pub fn diffuse(albedo: Vec3) -> Self {
        Self {
            albedo,
            emission: Vec3::ZERO,
        }
    }

    pub fn emitter(emission: Vec3) -> Self {
        Self {
            albedo: Vec3::ZERO,
            emission,
        }
    }

    pub fn is_emissive(&self) -> bool {
        self.emission.luminance() > 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub origin: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub vfov_degrees: f64,
    pub width: usize,
    pub height: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Ray {
    pub origin: Vec3,
    /// Unit direction.
    pub dir: Vec3,
    pub t_min: f64,
    pub t_max: f64,
    /// Solid-angle density with which `dir` was generated; converts to the hit's area pdf.
    pub dir_pdf: f64,
}

impl Ray {
    pub fn new(origin: Vec3, dir: Vec3) -> Self {
        Self {
            origin,
            dir,
            t_min: 0.0,
            t_max: f64::INFINITY,
            dir_pdf: 1.0,
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.dir * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub position: Vec3,
    pub geometric_normal: Vec3,
    pub triangle_id: usize,
    /// Density of this vertex per unit surface area.
    pub area_pdf: f64,
}

impl Camera {
    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    fn frame(&self) -> (Vec3, Vec3, Vec3, f64) {
        let forward = (self.look_at - self.origin).normalize();
        let right = forward.cross(self.up).normalize();
        let up = right.cross(forward);
        let tan_half = (self.vfov_degrees.to_radians() * 0.5).tan();
        (forward, right, up, tan_half)
    }

    /// Primary ray through pixel `(px, py)` (row 0 at the top) at sub-pixel offset `(jx, jy)`.
    pub fn generate_ray(&self, px: usize, py: usize, jx: f64, jy: f64) -> Ray {
        let (forward, right, up, tan_half) = self.frame();
        let aspect = self.width as f64 / self.height as f64;
        let sx = (2.0 * (px as f64 + jx) / self.width as f64 - 1.0) * tan_half * aspect;
        let sy = (1.0 - 2.0 * (py as f64 + jy) / self.height as f64) * tan_half;
        let d = forward + right * sx + up * sy;
        let dir = d.normalize();
        // Image plane at unit distance: a pixel covers (2 tan/h)^2 of it.
        let pixel_area = (2.0 * tan_half / self.height as f64).powi(2);
        let cos = forward.dot(dir);
        Ray {
            dir_pdf: 1.0 / (pixel_area * cos * cos * cos),
            ..Ray::new(self.origin, dir)
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scene {
    pub triangles: Vec<Triangle>,
    pub materials: Vec<Material>,
    pub camera: Camera,
    emitter_ids: Vec<usize>,
}

impl Scene {
    /// Validates material references and derives the emitter list.
    pub fn new(triangles: Vec<Triangle>, materials: Vec<Material>, camera: Camera) -> Result<Self> {
        for (i, m) in materials.iter().enumerate() {
            let ok = |v: Vec3| v.is_finite() && v.x >= 0.0 && v.y >= 0.0 && v.z >= 0.0;
            if !ok(m.emission) || !ok(m.albedo) || m.albedo.max_component() > 1.0 {
                return Err(Error::Schema(format!("material {i} out of range")));
            }
        }
        if camera.width == 0 || camera.height == 0 {
            return Err(Error::Schema("camera resolution must be positive".into()));
        }
        if !(camera.vfov_degrees > 0.0 && camera.vfov_degrees < 180.0) {
            return Err(Error::Schema("camera vfov must lie in (0, 180)".into()));
        }
        let mut emitter_ids = Vec::new();
        for (i, t) in triangles.iter().enumerate() {
            let m = materials
                .get(t.material)
                .ok_or_else(|| Error::Schema(format!("triangle {i} references missing material {}", t.material)))?;
            if m.is_emissive() {
                if !(t.area() > 0.0) {
                    return Err(Error::DegenerateTriangle(i));
                }
                emitter_ids.push(i);
            }
        }
        Ok(Self {
            triangles,
            materials,
            camera,
            emitter_ids,
        })
    }

    pub fn emitter_ids(&self) -> &[usize] {
        &self.emitter_ids
    }

    pub fn material_of(&self, triangle_id: usize) -> &Material {
        &self.materials[self.triangles[triangle_id].material]
    }

    pub fn bounds(&self) -> Aabb {
        self.triangles
            .iter()
            .fold(Aabb::EMPTY, |b, t| b.union(t.bounds()))
    }
}

/// Uniform point on `tri` by the square-root warp; returns the point and its area density.
pub fn sample_triangle_point(tri: &Triangle, u1: f64, u2: f64) -> Result<(Vec3, f64)> {
    let area = tri.area();
    if !(area > 0.0) {
        return Err(Error::invalid("cannot sample a degenerate triangle"));
    }
    let su = u1.sqrt();
    let b0 = 1.0 - su;
    let b1 = u2 * su;
    let p = tri.p0 * b0 + tri.p1 * b1 + tri.p2 * (1.0 - b0 - b1);
    Ok((p, 1.0 / area))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_right() -> Triangle {
        Triangle::new(
            Vec3::new(0.0, 0.0, 0.0),
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            0,
        )
    }

    #[test]
    fn corner_mapping_and_pdf() {
        let t = unit_right();
        let (p, pdf) = sample_triangle_point(&t, 0.0, 0.0).unwrap();
        assert_eq!(p, t.p0);
        assert_eq!(pdf, 2.0);
        assert_eq!(pdf * t.area(), 1.0);
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let p = Vec3::new(1.0, 2.0, 3.0);
        let t = Triangle::new(p, p, Vec3::ZERO, 0);
        assert!(sample_triangle_point(&t, 0.3, 0.3).is_err());
    }

    #[test]
    fn sample_centroid_matches_triangle_centroid() {
        let t = Triangle::new(
            Vec3::new(-1.0, 0.5, 2.0),
            Vec3::new(3.0, 0.0, 1.0),
            Vec3::new(0.5, 4.0, -1.0),
            0,
        );
        let n = 100_000;
        let mut sum = Vec3::ZERO;
        for i in 0..n {
            let s = crate::rng::SampleStream::new(3, i, 0, 0);
            let (p, _) = sample_triangle_point(&t, s.get(0), s.get(1)).unwrap();
            sum += p;
        }
        let mean = sum / n as f64;
        let c = t.centroid();
        let scale = t.bounds().diagonal();
        assert!((mean - c).length() < 0.01 * scale, "{mean:?} vs {c:?}");
    }

    #[test]
    fn camera_center_ray_points_forward() {
        let cam = Camera {
            origin: Vec3::ZERO,
            look_at: Vec3::new(0.0, 0.0, -1.0),
            up: Vec3::new(0.0, 1.0, 0.0),
            vfov_degrees: 90.0,
            width: 2,
            height: 2,
        };
        let r = cam.generate_ray(1, 1, 0.0, 0.0);
        assert!((r.dir - Vec3::new(0.0, 0.0, -1.0)).length() < 1e-12);
        // Pixel of 1x1 on the unit-distance plane.
        assert!((r.dir_pdf - 1.0).abs() < 1e-12);
        let top_left = cam.generate_ray(0, 0, 0.0, 0.0);
        assert!(top_left.dir.x < 0.0 && top_left.dir.y > 0.0);
    }

    #[test]
    fn emitter_ids_are_derived() {
        let cam = Camera {
            origin: Vec3::ZERO,
            look_at: Vec3::new(0.0, 0.0, -1.0),
            up: Vec3::new(0.0, 1.0, 0.0),
            vfov_degrees: 60.0,
            width: 4,
            height: 4,
        };
        let mats = vec![Material::diffuse(Vec3::splat(0.5)), Material::emitter(Vec3::ONE)];
        let mut t1 = unit_right();
        t1.material = 1;
        let scene = Scene::new(vec![unit_right(), t1, unit_right()], mats.clone(), cam).unwrap();
        assert_eq!(scene.emitter_ids(), &[1]);

        let mut bad = unit_right();
        bad.material = 7;
        assert!(matches!(Scene::new(vec![bad], mats, cam), Err(Error::Schema(_))));
    }
}
