//! Procedural benchmark scenes.
//!
//! Both scenes are lit by a triangulated sphere of constant radiance ("dome") whose
//! triangles face inward. The dome is an octahedron subdivided `k` times and projected
//! onto the sphere, so valid triangle counts are `8 * 4^k` (8, 32, 128, 512, 2048, ...).

use super::{Camera, Material, Scene, Triangle};
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rng::{mix64, to_unit};

const WHITE: usize = 0;
const RED: usize = 1;
const GREEN: usize = 2;
const DOME: usize = 3;

/// Deterministic per-seed value stream for generator jitter.
struct Jitter {
    state: u64,
}

impl Jitter {
    fn new(seed: u64) -> Self {
        Self {
            state: mix64(seed ^ 0xa076_1d64_78bd_642f),
        }
    }

    fn next(&mut self) -> f64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        to_unit(mix64(self.state))
    }
}

/// Inward-facing triangulated sphere.
pub fn dome_triangles(center: Vec3, radius: f64, count: usize, material: usize) -> Result<Vec<Triangle>> {
    let mut levels = 0;
    let mut c = 8usize;
    while c < count {
        c *= 4;
        levels += 1;
    }
    if c != count {
        return Err(Error::invalid(format!(
            "dome triangle count must be 8 * 4^k, got {count}"
        )));
    }
    let axes = [
        Vec3::new(1.0, 0.0, 0.0),
        Vec3::new(-1.0, 0.0, 0.0),
        Vec3::new(0.0, 1.0, 0.0),
        Vec3::new(0.0, -1.0, 0.0),
        Vec3::new(0.0, 0.0, 1.0),
        Vec3::new(0.0, 0.0, -1.0),
    ];
    let mut faces: Vec<[Vec3; 3]> = Vec::with_capacity(count);
    for &sx in &[0usize, 1] {
        for &sy in &[2usize, 3] {
            for &sz in &[4usize, 5] {
                faces.push([axes[sx], axes[sy], axes[sz]]);
            }
        }
    }
    for _ in 0..levels {
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = (a + b).normalize();
            let bc = (b + c).normalize();
            let ca = (c + a).normalize();
            next.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        faces = next;
    }
    Ok(faces
        .into_iter()
        .map(|[a, b, c]| {
            let mut t = Triangle::new(center + a * radius, center + b * radius, center + c * radius, material);
            if t.normal().dot(t.centroid() - center) > 0.0 {
                std::mem::swap(&mut t.p1, &mut t.p2);
            }
            t
        })
        .collect())
}

/// Axis-aligned rectangle as two triangles; `normal_sign` picks the winding.
fn rect(origin: Vec3, edge_u: Vec3, edge_v: Vec3, material: usize, out: &mut Vec<Triangle>) {
    let a = origin;
    let b = origin + edge_u;
    let c = origin + edge_u + edge_v;
    let d = origin + edge_v;
    out.push(Triangle::new(a, b, c, material));
    out.push(Triangle::new(a, c, d, material));
}

fn base_materials(dome_emission: f64) -> Vec<Material> {
    vec![
        Material::diffuse(Vec3::splat(0.7)),
        Material::diffuse(Vec3::new(0.65, 0.1, 0.1)),
        Material::diffuse(Vec3::new(0.1, 0.6, 0.15)),
        Material::emitter(Vec3::splat(dome_emission)),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CornellGridParams {
    pub k: usize,
    pub seed: u64,
    pub dome_triangles: usize,
    pub dome_emission: f64,
    pub light_emission: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for CornellGridParams {
    fn default() -> Self {
        Self {
            k: 4,
            seed: 0,
            dome_triangles: 512,
            dome_emission: 0.001,
            light_emission: 12.0,
            width: 128,
            height: 128,
        }
    }
}

/// Side length of one box in the Cornell grid.
const BOX: f64 = 1.0;
/// Distance between neighbouring box origins.
const PITCH: f64 = 1.1;

pub fn gen_cornell_grid(k: usize, seed: u64) -> Result<Scene> {
    gen_cornell_grid_with(&CornellGridParams {
        k,
        seed,
        ..Default::default()
    })
}

/// A `k x k` wall of unit boxes open toward `+z`, each with a ceiling light, under a dim dome.
///
/// Box `(i, j)` occupies `x in [i*1.1, i*1.1+1]`, `y in [j*1.1, j*1.1+1]`, `z in [-1, 0]`.
/// Its two light triangles are emitters `2*(j*k+i)` and `2*(j*k+i)+1` in emitter order.
pub fn gen_cornell_grid_with(p: &CornellGridParams) -> Result<Scene> {
    if p.k == 0 {
        return Err(Error::invalid("cornell grid needs k >= 1"));
    }
    let mut jitter = Jitter::new(p.seed);
    let mut materials = base_materials(p.dome_emission);
    let mut tris = Vec::new();
    let x = Vec3::new(1.0, 0.0, 0.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    let z = Vec3::new(0.0, 0.0, 1.0);
    // Lights first so emitter order follows box order.
    for j in 0..p.k {
        for i in 0..p.k {
            let o = Vec3::new(i as f64 * PITCH, j as f64 * PITCH, -BOX);
            let tint = Vec3::new(
                0.85 + 0.3 * jitter.next(),
                0.85 + 0.3 * jitter.next(),
                0.85 + 0.3 * jitter.next(),
            );
            materials.push(Material::emitter(tint * p.light_emission));
            let size = 0.3;
            let cx = 0.5 + 0.2 * (jitter.next() - 0.5);
            let cz = 0.5 + 0.2 * (jitter.next() - 0.5);
            let corner = o + Vec3::new(cx - size / 2.0, BOX - 0.02, cz - size / 2.0);
            // Wound so the normal points down into the box.
            rect(corner, x * size, z * size, materials.len() - 1, &mut tris);
        }
    }
    for j in 0..p.k {
        for i in 0..p.k {
            let o = Vec3::new(i as f64 * PITCH, j as f64 * PITCH, -BOX);
            rect(o, x * BOX, y * BOX, WHITE, &mut tris); // back
            rect(o, z * BOX, x * BOX, WHITE, &mut tris); // floor
            rect(o + y * BOX, x * BOX, z * BOX, WHITE, &mut tris); // ceiling
            rect(o, y * BOX, z * BOX, RED, &mut tris); // left
            rect(o + x * BOX, z * BOX, y * BOX, GREEN, &mut tris); // right
        }
    }
    let span = (p.k as f64 - 1.0) * PITCH + BOX;
    let center = Vec3::new(span / 2.0, span / 2.0, -BOX / 2.0);
    tris.extend(dome_triangles(center, 12.0 * span.max(2.0), p.dome_triangles, DOME)?);

    let half_fov = 20.0f64;
    let distance = 1.1 * (span / 2.0) / half_fov.to_radians().tan();
    let camera = Camera {
        origin: Vec3::new(center.x, center.y, distance),
        look_at: Vec3::new(center.x, center.y, -BOX / 2.0),
        up: y,
        vfov_degrees: 2.0 * half_fov,
        width: p.width,
        height: p.height,
    };
    Scene::new(tris, materials, camera)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowRoomParams {
    pub n_windows: usize,
    pub seed: u64,
    pub dome_triangles: usize,
    pub dome_emission: f64,
    /// Without the window wall the room is open on its `+z` side.
    pub window_wall: bool,
    pub window_width: f64,
    /// Sill and lintel heights of every opening.
    pub window_sill: f64,
    pub window_lintel: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for WindowRoomParams {
    fn default() -> Self {
        Self {
            n_windows: 6,
            seed: 0,
            dome_triangles: 512,
            dome_emission: 1.0,
            window_wall: true,
            window_width: 0.8,
            window_sill: 0.8,
            window_lintel: 2.2,
            width: 128,
            height: 128,
        }
    }
}

/// Interior extent of the window room.
pub const ROOM_MIN: Vec3 = Vec3::new(-4.0, 0.0, -2.0);
pub const ROOM_MAX: Vec3 = Vec3::new(4.0, 3.0, 2.0);

pub fn gen_window_room(n_windows: usize, seed: u64) -> Result<Scene> {
    gen_window_room_with(&WindowRoomParams {
        n_windows,
        seed,
        ..Default::default()
    })
}

/// Closed box room lit only by a uniform dome seen through `n_windows` openings in its `+z` wall.
pub fn gen_window_room_with(p: &WindowRoomParams) -> Result<Scene> {
    if p.n_windows == 0 {
        return Err(Error::invalid("window room needs at least one window"));
    }
    let (lo, hi) = (ROOM_MIN, ROOM_MAX);
    let size = hi - lo;
    let slot = size.x / p.n_windows as f64;
    let (sill, lintel) = (p.window_sill, p.window_lintel);
    if slot < p.window_width + 0.1 || !(p.window_width > 0.0) {
        return Err(Error::invalid(format!("{} windows do not fit in the wall", p.n_windows)));
    }
    if !(0.0 < sill && sill < lintel && lintel < size.y) {
        return Err(Error::invalid(format!("window sill {sill} and lintel {lintel} must lie inside the wall")));
    }
    let mut jitter = Jitter::new(p.seed);
    let materials = base_materials(p.dome_emission);
    let mut tris = Vec::new();
    let x = Vec3::new(1.0, 0.0, 0.0);
    let y = Vec3::new(0.0, 1.0, 0.0);
    let z = Vec3::new(0.0, 0.0, 1.0);
    rect(lo, z * size.z, x * size.x, WHITE, &mut tris); // floor
    rect(Vec3::new(lo.x, hi.y, lo.z), x * size.x, z * size.z, WHITE, &mut tris); // ceiling
    rect(lo, x * size.x, y * size.y, WHITE, &mut tris); // back
    rect(lo, y * size.y, z * size.z, RED, &mut tris); // left
    rect(Vec3::new(hi.x, lo.y, lo.z), z * size.z, y * size.y, GREEN, &mut tris); // right

    if p.window_wall {
        let wall = Vec3::new(lo.x, lo.y, hi.z);
        rect(wall, x * size.x, y * sill, WHITE, &mut tris);
        rect(wall + y * lintel, x * size.x, y * (size.y - lintel), WHITE, &mut tris);
        // Piers between the openings, sill to lintel.
        let mut cursor = 0.0;
        for w in 0..p.n_windows {
            let slack = slot - p.window_width - 0.1;
            let start = w as f64 * slot + 0.05 + slack * jitter.next();
            rect(wall + x * cursor + y * sill, x * (start - cursor), y * (lintel - sill), WHITE, &mut tris);
            cursor = start + p.window_width;
        }
        rect(wall + x * cursor + y * sill, x * (size.x - cursor), y * (lintel - sill), WHITE, &mut tris);
    }

    let center = (lo + hi) * 0.5;
    tris.extend(dome_triangles(center, 40.0, p.dome_triangles, DOME)?);
    // Backs onto the window wall so the frame holds only indirectly reached surfaces.
    let camera = Camera {
        origin: Vec3::new(0.0, 1.4, hi.z - 0.1),
        look_at: Vec3::new(0.0, 1.2, lo.z),
        up: y,
        vfov_degrees: 75.0,
        width: p.width,
        height: p.height,
    };
    Scene::new(tris, materials, camera)
}

/// Bounds of window `w` of a room built with `p`, as `(x0, x1, y0, y1)` on the `+z` wall.
pub fn window_openings(p: &WindowRoomParams) -> Vec<(f64, f64, f64, f64)> {
    let slot = (ROOM_MAX.x - ROOM_MIN.x) / p.n_windows as f64;
    let mut jitter = Jitter::new(p.seed);
    (0..p.n_windows)
        .map(|w| {
            let slack = slot - p.window_width - 0.1;
            let start = ROOM_MIN.x + w as f64 * slot + 0.05 + slack * jitter.next();
            (start, start + p.window_width, p.window_sill, p.window_lintel)
        })
        .collect()
}
