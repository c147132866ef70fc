//! The global reference hierarchy over all emitters.
//!
//! Emitters are sorted by the Morton code of their centroid and the sorted range is split
//! recursively at the highest differing code bit (an LBVH). The tree carries no sampling
//! probabilities; per-cell cuts into it do.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::math::{Aabb, Vec3};
use crate::scene::Scene;

pub type NodeId = u32;

/// Marker for a missing child or parent.
pub const NONE: NodeId = NodeId::MAX;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EmitterRecord {
    pub triangle_id: usize,
    pub centroid: Vec3,
    /// `luminance(emission) * area`, a flux proxy.
    pub energy: f64,
}

/// Emitter records in the scene's emitter order.
pub fn emitter_records(scene: &Scene) -> Vec<EmitterRecord> {
    scene
        .emitter_ids()
        .iter()
        .map(|&i| {
            let t = &scene.triangles[i];
            EmitterRecord {
                triangle_id: i,
                centroid: t.centroid(),
                energy: scene.materials[t.material].emission.luminance() * t.area(),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LightNode {
    /// Range `[begin, end)` into the tree-ordered light array.
    pub begin: u32,
    pub end: u32,
    pub left: NodeId,
    pub right: NodeId,
    pub parent: NodeId,
    pub energy: f64,
}

impl LightNode {
    pub fn is_leaf(&self) -> bool {
        self.left == NONE
    }

    /// Lights below this node; never zero.
    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u32 {
        self.end - self.begin
    }
}

#[derive(Clone, Debug)]
pub struct LightTree {
    /// `order[i]` is the emitter index (into the record list) at tree position `i`.
    order: Vec<u32>,
    nodes: Vec<LightNode>,
}

const MORTON_BITS: u32 = 10;
const MORTON_MAX: u32 = 1 << MORTON_BITS;

fn spread_bits(v: u32) -> u32 {
    let mut x = v & 0x3ff;
    x = (x | (x << 16)) & 0x0300_00ff;
    x = (x | (x << 8)) & 0x0300_f00f;
    x = (x | (x << 4)) & 0x030c_30c3;
    x = (x | (x << 2)) & 0x0924_9249;
    x
}

/// Interleaves three 10-bit coordinates into a 30-bit code, `x` in the lowest bit of each
/// 3-bit group, then `y`, then `z`.
pub fn morton3(qx: u32, qy: u32, qz: u32) -> Result<u32> {
    if qx >= MORTON_MAX || qy >= MORTON_MAX || qz >= MORTON_MAX {
        return Err(Error::invalid(format!(
            "morton coordinates ({qx}, {qy}, {qz}) exceed {MORTON_BITS} bits"
        )));
    }
    Ok(spread_bits(qx) | (spread_bits(qy) << 1) | (spread_bits(qz) << 2))
}

fn quantize(v: f64, lo: f64, extent: f64) -> u32 {
    let q = ((v - lo) / extent * MORTON_MAX as f64).floor();
    (q.max(0.0) as u32).min(MORTON_MAX - 1)
}

impl LightTree {
    pub fn build(emitters: &[EmitterRecord]) -> Result<Self> {
        if emitters.is_empty() {
            return Err(Error::NoEmitters);
        }
        let mut bounds = emitters
            .iter()
            .fold(Aabb::EMPTY, |b, e| b.union(Aabb::from_point(e.centroid)));
        bounds.min -= Vec3::splat(1e-6);
        bounds.max += Vec3::splat(1e-6);
        let ext = bounds.extent();
        let codes: Vec<u32> = emitters
            .iter()
            .map(|e| {
                let c = e.centroid;
                morton3(
                    quantize(c.x, bounds.min.x, ext.x),
                    quantize(c.y, bounds.min.y, ext.y),
                    quantize(c.z, bounds.min.z, ext.z),
                )
                .expect("quantized coordinates are in range")
            })
            .collect();
        let mut order: Vec<u32> = (0..emitters.len() as u32).collect();
        // Stable: equal codes keep their original order.
        order.sort_by_key(|&i| codes[i as usize]);
        let sorted: Vec<u32> = order.iter().map(|&i| codes[i as usize]).collect();

        let mut tree = LightTree {
            order,
            nodes: Vec::with_capacity(2 * emitters.len() - 1),
        };
        tree.split(&sorted, emitters, 0, emitters.len() as u32, NONE);
        Ok(tree)
    }

    fn split(&mut self, codes: &[u32], emitters: &[EmitterRecord], begin: u32, end: u32, parent: NodeId) -> NodeId {
        let id = self.nodes.len() as NodeId;
        let energy = self.order[begin as usize..end as usize]
            .iter()
            .map(|&i| emitters[i as usize].energy)
            .sum();
        self.nodes.push(LightNode {
            begin,
            end,
            left: NONE,
            right: NONE,
            parent,
            energy,
        });
        if end - begin == 1 {
            return id;
        }
        let mid = split_position(&codes[begin as usize..end as usize]) as u32 + begin;
        let left = self.split(codes, emitters, begin, mid, id);
        let right = self.split(codes, emitters, mid, end, id);
        let node = &mut self.nodes[id as usize];
        node.left = left;
        node.right = right;
        id
    }

    pub fn root(&self) -> NodeId {
        0
    }

    pub fn light_count(&self) -> usize {
        self.order.len()
    }

    pub fn nodes(&self) -> &[LightNode] {
        &self.nodes
    }

    #[inline]
    pub fn node(&self, id: NodeId) -> &LightNode {
        &self.nodes[id as usize]
    }

    /// Emitter index stored at tree position `pos`.
    #[inline]
    pub fn emitter_at(&self, pos: usize) -> usize {
        self.order[pos] as usize
    }

    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn node_children(&self, id: NodeId) -> Result<Option<(NodeId, NodeId)>> {
        let node = self
            .nodes
            .get(id as usize)
            .ok_or_else(|| Error::invalid(format!("node {id} out of range")))?;
        Ok((!node.is_leaf()).then_some((node.left, node.right)))
    }

    /// Number of edges on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.nodes.len()];
        let mut max = 0;
        // Parents precede children in id order.
        for (i, n) in self.nodes.iter().enumerate().skip(1) {
            depth[i] = depth[n.parent as usize] + 1;
            max = max.max(depth[i]);
        }
        max
    }

    /// One node per line: `id begin end left right energy`, `-1` for missing children.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let id = |n: NodeId| if n == NONE { -1 } else { n as i64 };
        for (i, n) in self.nodes.iter().enumerate() {
            writeln!(out, "{i} {} {} {} {} {}", n.begin, n.end, id(n.left), id(n.right), n.energy).unwrap();
        }
        out
    }
}

/// Split index (relative to the slice) for a sorted run of codes: first position whose
/// highest differing bit is set, or the median when all codes are equal.
fn split_position(codes: &[u32]) -> usize {
    let first = codes[0];
    let last = codes[codes.len() - 1];
    if first == last {
        return codes.len() / 2;
    }
    let bit = 31 - (first ^ last).leading_zeros();
    let prefix_mask = !((1u32 << bit) - 1);
    let target = (first & prefix_mask) | (1 << bit);
    codes.partition_point(|&c| c < target)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_emitters(xs: &[f64]) -> Vec<EmitterRecord> {
        xs.iter()
            .enumerate()
            .map(|(i, &x)| EmitterRecord {
                triangle_id: i,
                centroid: Vec3::new(x, 0.0, 0.0),
                energy: 1.0 + i as f64,
            })
            .collect()
    }

    pub(crate) fn validate(tree: &LightTree, emitters: &[EmitterRecord]) {
        let n = tree.light_count();
        let root = tree.node(tree.root());
        assert_eq!((root.begin, root.end), (0, n as u32));
        let mut leaves = Vec::new();
        for (i, node) in tree.nodes().iter().enumerate() {
            let expect: f64 = (node.begin..node.end)
                .map(|p| emitters[tree.emitter_at(p as usize)].energy)
                .sum();
            assert!((node.energy - expect).abs() <= 1e-9 * expect.abs());
            match tree.node_children(i as NodeId).unwrap() {
                None => {
                    assert_eq!(node.len(), 1);
                    leaves.push(node.begin);
                }
                Some((l, r)) => {
                    let (l, r) = (tree.node(l), tree.node(r));
                    assert!(node.len() > 1);
                    assert_eq!(l.begin, node.begin);
                    assert_eq!(l.end, r.begin);
                    assert_eq!(r.end, node.end);
                    assert!(l.len() > 0 && r.len() > 0);
                }
            }
        }
        leaves.sort_unstable();
        assert_eq!(leaves, (0..n as u32).collect::<Vec<_>>());
        let mut seen = tree.order().to_vec();
        seen.sort_unstable();
        assert_eq!(seen, (0..n as u32).collect::<Vec<_>>());
        let total: f64 = emitters.iter().map(|e| e.energy).sum();
        assert!((root.energy - total).abs() <= 1e-9 * total);
    }

    #[test]
    fn morton_bit_order() {
        assert_eq!(morton3(0, 0, 0).unwrap(), 0);
        assert_eq!(morton3(1, 0, 0).unwrap(), 1);
        assert_eq!(morton3(0, 1, 0).unwrap(), 2);
        assert_eq!(morton3(0, 0, 1).unwrap(), 4);
        assert_eq!(morton3(1, 1, 1).unwrap(), 7);
        assert_eq!(morton3(1023, 1023, 1023).unwrap(), (1 << 30) - 1);
        assert!(morton3(1024, 0, 0).is_err());
    }

    #[test]
    fn single_emitter_tree() {
        let e = line_emitters(&[0.5]);
        let t = LightTree::build(&e).unwrap();
        assert_eq!(t.nodes().len(), 1);
        let r = t.node(t.root());
        assert!(r.is_leaf());
        assert_eq!((r.begin, r.end), (0, 1));
        assert!(LightTree::build(&[]).is_err());
    }

    #[test]
    fn four_on_a_line_split_in_half() {
        let e = line_emitters(&[0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0]);
        let t = LightTree::build(&e).unwrap();
        assert_eq!(t.order(), &[0, 1, 2, 3]);
        let (l, r) = t.node_children(t.root()).unwrap().unwrap();
        assert_eq!((t.node(l).begin, t.node(l).end), (0, 2));
        assert_eq!((t.node(r).begin, t.node(r).end), (2, 4));
        validate(&t, &e);
    }

    #[test]
    fn sorted_order_follows_morton_codes() {
        let e = line_emitters(&[0.9, 0.1, 0.5, 0.3]);
        let t = LightTree::build(&e).unwrap();
        assert_eq!(t.order(), &[1, 3, 2, 0]);
    }

    #[test]
    fn coincident_emitters_split_at_median() {
        let e = line_emitters(&[0.25; 7]);
        let t = LightTree::build(&e).unwrap();
        assert_eq!(t.order(), &[0, 1, 2, 3, 4, 5, 6]);
        let (l, _) = t.node_children(t.root()).unwrap().unwrap();
        assert_eq!(t.node(l).end, 3);
        assert_eq!(t.depth(), 3);
        validate(&t, &e);
    }

    #[test]
    fn two_emitters_and_leaves() {
        let e = line_emitters(&[0.0, 1.0]);
        let t = LightTree::build(&e).unwrap();
        let (l, r) = t.node_children(t.root()).unwrap().unwrap();
        assert!(t.node_children(l).unwrap().is_none());
        assert!(t.node_children(r).unwrap().is_none());
        assert!(t.node_children(99).is_err());
    }

    #[test]
    fn eight_evenly_spaced_is_balanced() {
        let xs: Vec<f64> = (0..8).map(|i| i as f64 / 7.0).collect();
        let e = line_emitters(&xs);
        let t = LightTree::build(&e).unwrap();
        assert_eq!(t.depth(), 3);
        validate(&t, &e);
    }

    #[test]
    fn random_emitters_satisfy_invariants() {
        let e: Vec<EmitterRecord> = (0..100u64)
            .map(|i| {
                let s = crate::rng::SampleStream::new(17, i, 0, 0);
                EmitterRecord {
                    triangle_id: i as usize,
                    centroid: Vec3::new(s.get(0), s.get(1), s.get(2)) * 5.0,
                    energy: 0.1 + s.get(3),
                }
            })
            .collect();
        let t = LightTree::build(&e).unwrap();
        validate(&t, &e);
        let again = LightTree::build(&e).unwrap();
        assert_eq!(t.order(), again.order());
        assert_eq!(t.nodes(), again.nodes());
        assert!(t.depth() <= 7 + 30);
    }

    #[test]
    fn dump_has_one_line_per_node() {
        let e = line_emitters(&[0.0, 1.0]);
        let t = LightTree::build(&e).unwrap();
        let d = t.dump();
        let lines: Vec<&str> = d.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "0 0 2 1 2 3");
        assert_eq!(lines[1], "1 0 1 -1 -1 1");
    }
}
