//! Geometry helpers and the quadrature oracle shared by the integration tests.
#![allow(dead_code)]

use rlcuts::estimators::ShadingPoint;
use rlcuts::scene::{Camera, SceneAccel, Triangle};
use rlcuts::{Scene, Vec3};

pub fn quad_down(x: f64, z: f64, size: f64, y: f64, material: usize) -> [Triangle; 2] {
    let (a, b, c, d) = (
        Vec3::new(x, y, z),
        Vec3::new(x + size, y, z),
        Vec3::new(x + size, y, z + size),
        Vec3::new(x, y, z + size),
    );
    // Both triangles face -y.
    [Triangle::new(a, b, d, material), Triangle::new(b, c, d, material)]
}

pub fn quad_up(x: f64, z: f64, size: f64, y: f64, material: usize) -> [Triangle; 2] {
    let (a, b, c, d) = (
        Vec3::new(x, y, z),
        Vec3::new(x + size, y, z),
        Vec3::new(x + size, y, z + size),
        Vec3::new(x, y, z + size),
    );
    [Triangle::new(a, d, b, material), Triangle::new(b, d, c, material)]
}

pub fn top_down_camera(width: usize, height: usize) -> Camera {
    Camera {
        origin: Vec3::new(0.0, 1.2, 0.01),
        look_at: Vec3::ZERO,
        up: Vec3::new(0.0, 0.0, -1.0),
        vfov_degrees: 90.0,
        width,
        height,
    }
}

/// Direct lighting at `sp` by midpoint quadrature over `n * n` congruent sub-triangles of each
/// emitter, with one shadow ray per node.
pub fn quadrature(scene: &Scene, accel: &SceneAccel, sp: &ShadingPoint, n: usize) -> Vec3 {
    let mut total = Vec3::ZERO;
    for &id in scene.emitter_ids() {
        let t = &scene.triangles[id];
        let (e1, e2) = (t.p1 - t.p0, t.p2 - t.p0);
        let le = scene.material_of(id).emission;
        let w = t.area() / (n * n) as f64;
        let mut node = |a: f64, b: f64| {
            let y = t.p0 + e1 * (a / n as f64) + e2 * (b / n as f64);
            let d = y - sp.position;
            let d2 = d.length_squared();
            let wi = d / d2.sqrt();
            let (cx, cy) = (sp.normal.dot(wi), -t.normal().dot(wi));
            if cx <= 0.0 || cy <= 0.0 || accel.occluded(sp.position, y) {
                return;
            }
            total += (sp.albedo * std::f64::consts::FRAC_1_PI).mul_elem(le) * (cx * cy / d2 * w);
        };
        for i in 0..n {
            for j in 0..n - i {
                node(i as f64 + 1.0 / 3.0, j as f64 + 1.0 / 3.0);
                if i + j + 1 < n {
                    node(i as f64 + 2.0 / 3.0, j as f64 + 2.0 / 3.0);
                }
            }
        }
    }
    total
}
