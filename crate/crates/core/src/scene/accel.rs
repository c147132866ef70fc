use super::{Hit, Ray, Scene, Triangle};
use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};

const MAX_LEAF: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first index into `indices`. Interior: index of the right child (left is `self + 1`).
    offset: u32,
    /// Triangle count for leaves, 0 for interior nodes.
    count: u32,
    axis: u8,
}

/// Bounding volume hierarchy over scene triangles: median split on the longest centroid axis.
#[derive(Clone, Debug)]
pub struct SceneAccel {
    triangles: Vec<Triangle>,
    indices: Vec<u32>,
    nodes: Vec<Node>,
    epsilon: f64,
}

impl SceneAccel {
    pub fn build(scene: &Scene) -> Result<Self> {
        Self::from_triangles(scene.triangles.clone())
    }

    pub fn from_triangles(triangles: Vec<Triangle>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::EmptyScene);
        }
        let bounds: Vec<Aabb> = triangles.iter().map(Triangle::bounds).collect();
        let centroids: Vec<Vec3> = bounds.iter().map(Aabb::center).collect();
        let mut indices: Vec<u32> = (0..triangles.len() as u32).collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / MAX_LEAF + 1);
        build_recursive(&bounds, &centroids, &mut indices, 0, triangles.len(), &mut nodes);
        let scene_bounds = bounds.iter().fold(Aabb::EMPTY, |a, b| a.union(*b));
        Ok(Self {
            triangles,
            indices,
            nodes,
            epsilon: 1e-4 * scene_bounds.diagonal(),
        })
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// Ray offset used at both ends of shadow segments and for spawned rays.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn bounds(&self) -> Aabb {
        self.nodes[0].bounds
    }

    /// Closest hit with `t` in `(ray.t_min, ray.t_max)`.
    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let inv = Vec3::new(1.0 / ray.dir.x, 1.0 / ray.dir.y, 1.0 / ray.dir.z);
        let neg = [ray.dir.x < 0.0, ray.dir.y < 0.0, ray.dir.z < 0.0];
        let mut best_t = ray.t_max;
        let mut best_id = usize::MAX;
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(ray.origin, inv, ray.t_min, best_t).is_none() {
                continue;
            }
            if node.count > 0 {
                let first = node.offset as usize;
                for &ti in &self.indices[first..first + node.count as usize] {
                    let tri = &self.triangles[ti as usize];
                    if let Some(t) = intersect_triangle(tri, ray.origin, ray.dir, ray.t_min, best_t) {
                        best_t = t;
                        best_id = ti as usize;
                    }
                }
            } else {
                let left = stack[sp] + 1;
                let right = node.offset;
                // Visit the near child first: push it last.
                let (near, far) = if neg[node.axis as usize] { (right, left) } else { (left, right) };
                stack[sp] = far;
                stack[sp + 1] = near;
                sp += 2;
            }
        }
        (best_id != usize::MAX).then(|| make_hit(&self.triangles[best_id], best_id, ray, best_t))
    }

    /// True iff any triangle blocks the open segment between `a` and `b`, shortened by
    /// [`epsilon`](Self::epsilon) at both ends.
    pub fn occluded(&self, a: Vec3, b: Vec3) -> bool {
        let d = b - a;
        let len = d.length();
        if len <= 2.0 * self.epsilon {
            return false;
        }
        let dir = d / len;
        let (t_min, t_max) = (self.epsilon, len - self.epsilon);
        let inv = Vec3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut stack = [0u32; 64];
        let mut sp = 1;
        while sp > 0 {
            sp -= 1;
            let idx = stack[sp];
            let node = &self.nodes[idx as usize];
            if node.bounds.hit(a, inv, t_min, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let first = node.offset as usize;
                for &ti in &self.indices[first..first + node.count as usize] {
                    if intersect_triangle(&self.triangles[ti as usize], a, dir, t_min, t_max).is_some() {
                        return true;
                    }
                }
            } else {
                stack[sp] = idx + 1;
                stack[sp + 1] = node.offset;
                sp += 2;
            }
        }
        false
    }
}

fn build_recursive(
    bounds: &[Aabb],
    centroids: &[Vec3],
    indices: &mut [u32],
    begin: usize,
    end: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let node_bounds = indices[begin..end]
        .iter()
        .fold(Aabb::EMPTY, |b, &i| b.union(bounds[i as usize]));
    let id = nodes.len();
    nodes.push(Node {
        bounds: node_bounds,
        offset: begin as u32,
        count: (end - begin) as u32,
        axis: 0,
    });
    if end - begin <= MAX_LEAF {
        return id;
    }
    let cb = indices[begin..end]
        .iter()
        .fold(Aabb::EMPTY, |b, &i| b.union(Aabb::from_point(centroids[i as usize])));
    let axis = cb.longest_axis();
    let mid = (begin + end) / 2;
    indices[begin..end].select_nth_unstable_by(mid - begin, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
    });
    build_recursive(bounds, centroids, indices, begin, mid, nodes);
    let right = build_recursive(bounds, centroids, indices, mid, end, nodes);
    let node = &mut nodes[id];
    node.offset = right as u32;
    node.count = 0;
    node.axis = axis as u8;
    id
}

fn make_hit(tri: &Triangle, triangle_id: usize, ray: &Ray, t: f64) -> Hit {
    let n = tri.normal();
    let cos = n.dot(ray.dir).abs();
    Hit {
        t,
        position: ray.at(t),
        geometric_normal: n,
        triangle_id,
        area_pdf: (ray.dir_pdf * cos / (t * t)).max(f64::MIN_POSITIVE),
    }
}

/// Möller-Trumbore; returns `t` when the hit lies strictly inside `(t_min, t_max)`.
#[inline]
pub fn intersect_triangle(tri: &Triangle, origin: Vec3, dir: Vec3, t_min: f64, t_max: f64) -> Option<f64> {
    let e1 = tri.p1 - tri.p0;
    let e2 = tri.p2 - tri.p0;
    let p = dir.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri.p0;
    let u = s.dot(p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = dir.dot(q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv_det;
    (t > t_min && t < t_max).then_some(t)
}

/// Reference closest-hit loop over every triangle.
pub fn brute_force_intersect(triangles: &[Triangle], ray: &Ray) -> Option<Hit> {
    let mut best: Option<(usize, f64)> = None;
    for (i, tri) in triangles.iter().enumerate() {
        let t_max = best.map_or(ray.t_max, |b| b.1);
        if let Some(t) = intersect_triangle(tri, ray.origin, ray.dir, ray.t_min, t_max) {
            best = Some((i, t));
        }
    }
    best.map(|(i, t)| make_hit(&triangles[i], i, ray, t))
}

/// Reference any-hit loop with the same endpoint convention as [`SceneAccel::occluded`].
pub fn brute_force_occluded(triangles: &[Triangle], epsilon: f64, a: Vec3, b: Vec3) -> bool {
    let d = b - a;
    let len = d.length();
    if len <= 2.0 * epsilon {
        return false;
    }
    let dir = d / len;
    triangles
        .iter()
        .any(|t| intersect_triangle(t, a, dir, epsilon, len - epsilon).is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::SampleStream;

    fn quad_z(z: f64, half: f64) -> Vec<Triangle> {
        let a = Vec3::new(-half, -half, z);
        let b = Vec3::new(half, -half, z);
        let c = Vec3::new(half, half, z);
        let d = Vec3::new(-half, half, z);
        vec![Triangle::new(a, b, c, 0), Triangle::new(a, c, d, 0)]
    }

    #[test]
    fn empty_scene_is_an_error() {
        assert!(matches!(SceneAccel::from_triangles(vec![]), Err(Error::EmptyScene)));
    }

    #[test]
    fn single_triangle_through_centroid() {
        let tri = Triangle::new(
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::new(1.0, 0.0, 2.0),
            Vec3::new(0.0, 1.0, 2.0),
            0,
        );
        let accel = SceneAccel::from_triangles(vec![tri]).unwrap();
        let c = tri.centroid();
        let hit = accel
            .intersect(&Ray::new(Vec3::new(c.x, c.y, 0.0), Vec3::new(0.0, 0.0, 1.0)))
            .unwrap();
        assert_eq!(hit.triangle_id, 0);
        assert!((hit.t - 2.0).abs() < 1e-12);
        assert!((hit.geometric_normal.length() - 1.0).abs() < 1e-6);
        assert!(hit.area_pdf > 0.0);

        let miss = Ray::new(Vec3::new(5.0, 5.0, 0.0), Vec3::new(0.0, 0.0, 1.0));
        assert!(accel.intersect(&miss).is_none());
    }

    #[test]
    fn quad_at_unit_distance() {
        let accel = SceneAccel::from_triangles(quad_z(1.0, 1.0)).unwrap();
        let hit = accel
            .intersect(&Ray::new(Vec3::ZERO, Vec3::new(0.0, 0.0, 1.0)))
            .unwrap();
        assert!((hit.t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn no_self_intersection_past_t_min() {
        let accel = SceneAccel::from_triangles(quad_z(1.0, 1.0)).unwrap();
        let mut ray = Ray::new(Vec3::new(0.2, 0.1, 1.0), Vec3::new(0.3, 0.0, 1.0).normalize());
        ray.t_min = 1e-4;
        assert!(accel.intersect(&ray).is_none());
    }

    #[test]
    fn occlusion_by_wall() {
        let wall = SceneAccel::from_triangles(quad_z(0.0, 1.0)).unwrap();
        let a = Vec3::new(0.0, 0.0, -1.0);
        let b = Vec3::new(0.0, 0.0, 1.0);
        assert!(wall.occluded(a, b));
        assert!(wall.occluded(b, a));
        // Corridor beside the wall.
        let c = Vec3::new(3.0, 0.0, -1.0);
        let d = Vec3::new(3.0, 0.0, 1.0);
        assert!(!wall.occluded(c, d));
    }

    #[test]
    fn occlusion_ignores_endpoint_surfaces() {
        let accel = SceneAccel::from_triangles(quad_z(0.0, 1.0)).unwrap();
        // Segment starting on the quad and leaving it.
        assert!(!accel.occluded(Vec3::ZERO, Vec3::new(0.0, 0.0, 3.0)));
        assert!(!accel.occluded(Vec3::new(0.0, 0.0, 3.0), Vec3::ZERO));
    }

    fn random_soup(n: usize, seed: u64) -> Vec<Triangle> {
        (0..n)
            .map(|i| {
                let s = SampleStream::new(seed, i as u64, 0, 0);
                let c = Vec3::new(s.get(0), s.get(1), s.get(2)) * 10.0;
                let j = |k: u32| Vec3::new(s.get(k) - 0.5, s.get(k + 1) - 0.5, s.get(k + 2) - 0.5) * 0.6;
                Triangle::new(c + j(3), c + j(6), c + j(9), 0)
            })
            .collect()
    }

    #[test]
    fn bvh_agrees_with_brute_force_on_random_soup() {
        let tris = random_soup(10_000, 1);
        let accel = SceneAccel::from_triangles(tris.clone()).unwrap();
        let mut hits = 0;
        for i in 0..1000 {
            let s = SampleStream::new(2, i, 0, 0);
            let origin = Vec3::new(s.get(0), s.get(1), s.get(2)) * 14.0 - Vec3::splat(2.0);
            let target = Vec3::new(s.get(3), s.get(4), s.get(5)) * 10.0;
            let ray = Ray::new(origin, (target - origin).normalize());
            let fast = accel.intersect(&ray);
            let slow = brute_force_intersect(&tris, &ray);
            match (fast, slow) {
                (Some(f), Some(b)) => {
                    hits += 1;
                    assert_eq!(f.triangle_id, b.triangle_id, "ray {i}");
                    assert!((f.t - b.t).abs() <= 1e-5 * b.t.max(1.0));
                }
                (None, None) => {}
                other => panic!("ray {i} disagrees: {other:?}"),
            }
        }
        assert!(hits > 100, "too few hits ({hits}) for a meaningful comparison");
    }

    #[test]
    fn occluded_agrees_with_brute_force_and_is_symmetric() {
        let tris = random_soup(2_000, 5);
        let accel = SceneAccel::from_triangles(tris.clone()).unwrap();
        let (mut blocked, mut open) = (0, 0);
        for i in 0..2000 {
            let s = SampleStream::new(6, i, 0, 0);
            let a = Vec3::new(s.get(0), s.get(1), s.get(2)) * 10.0;
            let b = Vec3::new(s.get(3), s.get(4), s.get(5)) * 10.0;
            let fast = accel.occluded(a, b);
            assert_eq!(fast, brute_force_occluded(&tris, accel.epsilon(), a, b));
            assert_eq!(fast, accel.occluded(b, a));
            if fast {
                blocked += 1
            } else {
                open += 1
            }
        }
        assert!(blocked > 50 && open > 50);
    }
}
