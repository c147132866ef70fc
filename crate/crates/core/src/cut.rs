//! Fixed-size tree cuts carrying a learned distribution over light clusters.
//!
//! A cut is an antichain of `M` light-tree nodes whose ranges partition the tree-ordered
//! light array. Each cluster owns a learned value `q` (an exponential moving average of its
//! observed contribution) and the cut keeps the inclusive prefix sum of `q` for sampling.
//! Between passes the cut topology is adapted by split-collapse: the most valuable splittable
//! cluster is refined into its two children while the cheapest pair of sibling clusters is
//! merged back into their parent, so the cut size never changes.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::light_tree::{LightTree, NodeId, NONE};

/// How the learning rate evolves for a cluster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum LearningSchedule {
    /// `alpha` from [`CutConfig`] on every update.
    #[default]
    Constant,
    /// `1 / (1 + prior_visits + n)` for the cluster's `n`-th update; a running mean in which
    /// the initial value counts as `prior_visits` observations.
    VisitCount,
}

/// What value a sample feeds back into its cluster.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Feedback {
    /// Single-sample estimate of the whole cluster's contribution: the sample's luminance
    /// divided by the in-cluster light and area densities.
    #[default]
    ClusterTotal,
    /// The sample's luminance with no density division.
    RawContribution,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutConfig {
    /// Leaves per cut, `M`. Clamped to the light count.
    pub size: usize,
    pub alpha: f64,
    /// Split-collapse threshold `T`.
    pub threshold: f64,
    /// Probability floor; `None` means `1e-4 / size`.
    pub eps_q: Option<f64>,
    /// Upper bound on split-collapse rounds per pass.
    pub iterations: usize,
    pub schedule: LearningSchedule,
    /// Pseudo-count of the initial `q` under [`LearningSchedule::VisitCount`].
    pub prior_visits: f64,
    pub feedback: Feedback,
}

impl Default for CutConfig {
    fn default() -> Self {
        Self {
            size: 128,
            alpha: 0.2,
            threshold: 4.0,
            eps_q: None,
            iterations: 1,
            schedule: LearningSchedule::Constant,
            prior_visits: 0.0,
            feedback: Feedback::ClusterTotal,
        }
    }
}

impl CutConfig {
    pub fn with_size(size: usize) -> Self {
        Self {
            size,
            ..Default::default()
        }
    }

    pub fn floor(&self) -> f64 {
        self.eps_q.unwrap_or(1e-4 / self.size.max(1) as f64)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.size == 0 {
            return Err("cut size must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(format!("alpha {} outside (0, 1]", self.alpha));
        }
        if !(self.threshold > 0.0) {
            return Err(format!("threshold {} must be positive", self.threshold));
        }
        if !(self.floor() > 0.0) {
            return Err("probability floor must be positive".into());
        }
        if !(self.prior_visits >= 0.0 && self.prior_visits.is_finite()) {
            return Err(format!("prior visits {} must be finite and non-negative", self.prior_visits));
        }
        if self.iterations == 0 {
            return Err("split-collapse iterations must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cut {
    node_ids: Vec<NodeId>,
    /// Exclusive end of each cluster's range in tree order.
    ends: Vec<u32>,
    q: Vec<f64>,
    cdf: Vec<f64>,
    visits: Vec<u32>,
}

/// Bytes of per-cluster state held by a cut.
pub const CUT_RECORD_BYTES: usize = std::mem::size_of::<NodeId>()
    + std::mem::size_of::<u32>()
    + 2 * std::mem::size_of::<f64>()
    + std::mem::size_of::<u32>();

impl Cut {
    /// Breadth-first frontier of `min(size, N)` nodes with `q` proportional to node energy.
    pub fn init(tree: &LightTree, size: usize, eps_q: f64) -> Cut {
        let m = size.clamp(1, tree.light_count());
        let mut frontier = vec![tree.root()];
        let mut queue = std::collections::VecDeque::from([tree.root()]);
        while frontier.len() < m {
            let Some(id) = queue.pop_front() else { break };
            let node = tree.node(id);
            if node.is_leaf() {
                continue;
            }
            let at = frontier.iter().position(|&f| f == id).unwrap();
            frontier.splice(at..=at, [node.left, node.right]);
            queue.extend([node.left, node.right]);
        }
        // The splice keeps the frontier in left-to-right range order.
        let total = tree.node(tree.root()).energy;
        let q: Vec<f64> = frontier
            .iter()
            .map(|&id| (tree.node(id).energy / total).max(eps_q))
            .collect();
        let mut cut = Cut {
            ends: frontier.iter().map(|&id| tree.node(id).end).collect(),
            visits: vec![0; frontier.len()],
            cdf: vec![0.0; frontier.len()],
            node_ids: frontier,
            q,
        };
        cut.rebuild_cdf();
        cut
    }

    /// Builds a cut from explicit nodes and values; the nodes must form a valid cut.
    pub fn from_parts(tree: &LightTree, node_ids: Vec<NodeId>, q: Vec<f64>) -> Cut {
        assert_eq!(node_ids.len(), q.len());
        let mut cut = Cut {
            ends: node_ids.iter().map(|&id| tree.node(id).end).collect(),
            visits: vec![0; q.len()],
            cdf: vec![0.0; q.len()],
            node_ids,
            q,
        };
        cut.rebuild_cdf();
        cut
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn node_ids(&self) -> &[NodeId] {
        &self.node_ids
    }

    pub fn ends(&self) -> &[u32] {
        &self.ends
    }

    pub fn q(&self) -> &[f64] {
        &self.q
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn visits(&self) -> &[u32] {
        &self.visits
    }

    /// Tree-order light range `[begin, end)` of cluster `s`.
    #[inline]
    pub fn cluster_range(&self, s: usize) -> (u32, u32) {
        let begin = if s == 0 { 0 } else { self.ends[s - 1] };
        (begin, self.ends[s])
    }

    /// Bytes of cluster state; depends on the cut size only.
    pub fn storage_bytes(&self) -> usize {
        self.len() * CUT_RECORD_BYTES
    }

    /// One learning step: `q[s] <- max((1 - a) q[s] + a v, eps)`. Leaves the cdf untouched.
    #[inline]
    pub fn update_q(&mut self, s: usize, v: f64, cfg: &CutConfig) {
        let n = self.visits[s];
        let alpha = match cfg.schedule {
            LearningSchedule::Constant => cfg.alpha,
            LearningSchedule::VisitCount => 1.0 / (1.0 + cfg.prior_visits + n as f64),
        };
        self.visits[s] = n.saturating_add(1);
        self.q[s] = ((1.0 - alpha) * self.q[s] + alpha * v).max(cfg.floor());
    }

    /// Inclusive prefix sum of `q`.
    pub fn rebuild_cdf(&mut self) {
        let mut acc = 0.0;
        for (c, &q) in self.cdf.iter_mut().zip(&self.q) {
            acc += q;
            *c = acc;
        }
    }

    pub fn total(&self) -> f64 {
        self.cdf[self.cdf.len() - 1]
    }

    /// Picks the smallest `s` with `u * total < cdf[s]`. The probability is read from the cdf,
    /// so it stays consistent with the draw while `q` is being updated.
    #[inline]
    pub fn sample_cluster(&self, u: f64) -> (usize, f64) {
        let total = self.total();
        let target = u * total;
        let s = self
            .cdf
            .partition_point(|&c| c <= target)
            .min(self.cdf.len() - 1);
        (s, self.cluster_probability(s))
    }

    /// Selection probability of cluster `s` under the current cdf.
    #[inline]
    pub fn cluster_probability(&self, s: usize) -> f64 {
        let prev = if s == 0 { 0.0 } else { self.cdf[s - 1] };
        (self.cdf[s] - prev) / self.total()
    }

    /// Cluster containing tree position `pos`.
    pub fn cluster_of(&self, pos: u32) -> usize {
        self.ends.partition_point(|&e| e <= pos)
    }

    /// Summed `q` of the cut leaves below each proper ancestor of a cut leaf.
    pub fn parent_masses(&self, tree: &LightTree) -> BTreeMap<NodeId, f64> {
        let mut masses = BTreeMap::new();
        for (&id, &q) in self.node_ids.iter().zip(&self.q) {
            let mut p = tree.node(id).parent;
            while p != NONE {
                *masses.entry(p).or_insert(0.0) += q;
                p = tree.node(p).parent;
            }
        }
        masses
    }

    /// Runs up to `iterations` split-collapse rounds and returns how many were applied.
    /// The cdf is left stale; call [`rebuild_cdf`](Self::rebuild_cdf) afterwards.
    pub fn split_collapse(&mut self, tree: &LightTree, threshold: f64, iterations: usize, eps_q: f64) -> usize {
        let mut changes = 0;
        for _ in 0..iterations {
            if !self.split_collapse_once(tree, threshold, eps_q) {
                break;
            }
            changes += 1;
        }
        changes
    }

    fn split_collapse_once(&mut self, tree: &LightTree, threshold: f64, eps_q: f64) -> bool {
        // Highest-valued leaf that can still be refined; lowest index wins ties.
        let mut split: Option<usize> = None;
        for (i, &id) in self.node_ids.iter().enumerate() {
            if !tree.node(id).is_leaf() && split.is_none_or(|b| self.q[i] > self.q[b]) {
                split = Some(i);
            }
        }
        let Some(split) = split else { return false };

        let mut ancestors = Vec::new();
        let mut p = tree.node(self.node_ids[split]).parent;
        while p != NONE {
            ancestors.push(p);
            p = tree.node(p).parent;
        }

        // Lowest-mass parent whose two children are adjacent cut leaves.
        let mut collapse: Option<(usize, NodeId, f64)> = None;
        for j in 0..self.len().saturating_sub(1) {
            let a = tree.node(self.node_ids[j]);
            let parent = a.parent;
            if parent == NONE {
                continue;
            }
            let pn = tree.node(parent);
            if pn.left != self.node_ids[j] || pn.right != self.node_ids[j + 1] {
                continue;
            }
            if ancestors.contains(&parent) {
                continue;
            }
            let mass = self.q[j] + self.q[j + 1];
            if collapse.is_none_or(|(_, _, m)| mass < m) {
                collapse = Some((j, parent, mass));
            }
        }
        let Some((j, parent, mass)) = collapse else { return false };

        let q_split = self.q[split];
        // Children inherit half the value each; refuse splits that would breach the floor.
        if !(q_split > threshold * mass) || q_split * 0.5 < eps_q {
            return false;
        }

        let m = self.len();
        let mut node_ids = Vec::with_capacity(m);
        let mut q = Vec::with_capacity(m);
        let mut visits = Vec::with_capacity(m);
        let mut i = 0;
        while i < m {
            if i == split {
                let n = tree.node(self.node_ids[i]);
                let v = self.visits[i] / 2;
                node_ids.extend([n.left, n.right]);
                q.extend([q_split * 0.5, q_split * 0.5]);
                visits.extend([v, v]);
                i += 1;
            } else if i == j {
                node_ids.push(parent);
                q.push(mass);
                visits.push(self.visits[j].saturating_add(self.visits[j + 1]));
                i += 2;
            } else {
                node_ids.push(self.node_ids[i]);
                q.push(self.q[i]);
                visits.push(self.visits[i]);
                i += 1;
            }
        }
        self.ends = node_ids.iter().map(|&id| tree.node(id).end).collect();
        self.node_ids = node_ids;
        self.q = q;
        self.visits = visits;
        true
    }

    /// Checks the partition, floor and cdf-monotonicity invariants.
    pub fn check_invariants(&self, tree: &LightTree, eps_q: f64) -> Result<(), String> {
        let m = self.len();
        if m == 0 || self.ends.len() != m || self.q.len() != m || self.cdf.len() != m || self.visits.len() != m {
            return Err("inconsistent table lengths".into());
        }
        let mut prev = 0u32;
        for (i, (&id, &end)) in self.node_ids.iter().zip(&self.ends).enumerate() {
            if end <= prev {
                return Err(format!("ends not strictly increasing at {i}"));
            }
            let n = tree
                .nodes()
                .get(id as usize)
                .ok_or_else(|| format!("cluster {i} names missing node {id}"))?;
            if n.begin != prev || n.end != end {
                return Err(format!(
                    "cluster {i} node {id} covers [{}, {}) but cut says [{prev}, {end})",
                    n.begin, n.end
                ));
            }
            prev = end;
        }
        if prev as usize != tree.light_count() {
            return Err(format!("cut ends at {prev}, expected {}", tree.light_count()));
        }
        if let Some(i) = self.q.iter().position(|&q| !(q >= eps_q) || !q.is_finite()) {
            return Err(format!("q[{i}] = {} below floor {eps_q}", self.q[i]));
        }
        if self.cdf.windows(2).any(|w| w[1] < w[0]) {
            return Err("cdf decreases".into());
        }
        Ok(())
    }

    /// True when the cdf is the prefix sum of the current `q` (within `1e-9` relative).
    pub fn cdf_matches_q(&self) -> bool {
        let sum: f64 = self.q.iter().sum();
        (self.total() - sum).abs() <= 1e-9 * sum
    }

    /// One line per leaf: `node_id end q cdf`.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for i in 0..self.len() {
            writeln!(out, "{} {} {} {}", self.node_ids[i], self.ends[i], self.q[i], self.cdf[i]).unwrap();
        }
        out
    }
}
