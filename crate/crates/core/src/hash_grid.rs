//! Sparse 5D hash of shading points (position and normal), one learned cut per cell.
//!
//! Positions are quantized with a cell size chosen from the vertex footprint, normals with a
//! fixed-precision octahedral map. Both quantizations can be jittered by up to one quantum so
//! cell boundaries turn into noise instead of visible seams.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::{Mutex, MutexGuard, OnceLock};

use crate::cut::Cut;
use crate::error::{Error, Result};
use crate::math::Vec3;
use crate::rng::mix64;

/// Octahedral bits per normal component.
pub const NORMAL_BITS: u32 = 4;
pub const MAX_LEVEL: u8 = 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct CellKey {
    pub qx: i32,
    pub qy: i32,
    pub qz: i32,
    /// Octahedral normal code, `u | v << NORMAL_BITS`.
    pub qn: u16,
    pub level: u8,
}

impl CellKey {
    fn hash(&self) -> u64 {
        let mut h = mix64(self.qx as u32 as u64 | ((self.qy as u32 as u64) << 32));
        h = mix64(h ^ (self.qz as u32 as u64) ^ ((self.qn as u64) << 32) ^ ((self.level as u64) << 48));
        h
    }
}

/// Footprint level: `clamp(round(log2(f / base_tile)), 0, 16)` with `f = 1 / sqrt(area_pdf)`.
pub fn level_for_footprint(area_pdf: f64, base_tile: f64) -> Result<u8> {
    if !(area_pdf > 0.0) {
        return Err(Error::invalid(format!("area pdf must be positive, got {area_pdf}")));
    }
    let footprint = 1.0 / area_pdf.sqrt();
    let level = (footprint / base_tile).log2().round();
    Ok(level.clamp(0.0, MAX_LEVEL as f64) as u8)
}

pub fn cell_size(base_tile: f64, level: u8) -> f64 {
    base_tile * (1u32 << level) as f64
}

/// Maps a unit vector to the `[0, 1]^2` octahedral square.
pub fn octahedral_encode(n: Vec3) -> (f64, f64) {
    let l1 = n.x.abs() + n.y.abs() + n.z.abs();
    let (mut u, mut v) = (n.x / l1, n.y / l1);
    if n.z < 0.0 {
        let (pu, pv) = (u, v);
        u = (1.0 - pv.abs()) * if pu >= 0.0 { 1.0 } else { -1.0 };
        v = (1.0 - pu.abs()) * if pv >= 0.0 { 1.0 } else { -1.0 };
    }
    (0.5 * (u + 1.0), 0.5 * (v + 1.0))
}

/// Jitter values in `[0, 1)`: three for position, two for the normal.
pub type Jitter = [f64; 5];

/// How the jitter offsets are applied.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct JitterMode {
    /// Offset range in units of one quantum; 0 disables jitter.
    pub scale: f64,
    /// Project the position offset onto the tangent plane of `normal`. Without this a point on
    /// an axis-aligned surface is scattered across the cells in front of and behind it.
    pub tangent: bool,
    /// Multiplier on `scale` for the two normal components.
    pub normal: f64,
}

impl JitterMode {
    pub const NONE: JitterMode = JitterMode { scale: 0.0, tangent: false, normal: 0.0 };

    /// Independent offsets on all five axes.
    pub fn per_axis(scale: f64) -> Self {
        Self { scale, tangent: false, normal: 1.0 }
    }
}

/// Quantizes a shading point. With zero jitter scale this is a pure function of its inputs.
pub fn make_key(position: Vec3, normal: Vec3, level: u8, jitter: &Jitter, mode: JitterMode, base_tile: f64) -> CellKey {
    let size = cell_size(base_tile, level);
    let mut off = Vec3::new(jitter[0] - 0.5, jitter[1] - 0.5, jitter[2] - 0.5) * mode.scale;
    if mode.tangent {
        off = off - normal * normal.dot(off);
    }
    let q = |x: f64, o: f64| (x / size + o).floor() as i32;
    let res = (1u32 << NORMAL_BITS) as f64;
    let (u, v) = octahedral_encode(normal);
    let nj = mode.scale * mode.normal;
    let qn = |x: f64, j: f64| (x * res + nj * (j - 0.5)).floor().clamp(0.0, res - 1.0) as u16;
    CellKey {
        qx: q(position.x, off.x),
        qy: q(position.y, off.y),
        qz: q(position.z, off.z),
        qn: qn(u, jitter[3]) | (qn(v, jitter[4]) << NORMAL_BITS),
        level,
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HashGridParams {
    pub capacity: usize,
    /// World-space size of a level-0 cell.
    pub base_tile: f64,
    pub jitter: JitterMode,
    pub probe_limit: usize,
}

impl Default for HashGridParams {
    fn default() -> Self {
        Self {
            capacity: 1 << 16,
            base_tile: 0.25,
            jitter: JitterMode {
                scale: 1.0,
                tangent: true,
                normal: 0.0,
            },
            probe_limit: 32,
        }
    }
}

pub struct Cell {
    pub key: CellKey,
    cut: Mutex<Cut>,
    touched: AtomicBool,
}

impl Cell {
    pub fn lock(&self) -> MutexGuard<'_, Cut> {
        self.cut.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn mark_touched(&self) {
        self.touched.store(true, Ordering::Relaxed);
    }

    pub fn is_touched(&self) -> bool {
        self.touched.load(Ordering::Relaxed)
    }

    /// Clears the touched flag, returning its previous value.
    pub fn take_touched(&self) -> bool {
        self.touched.swap(false, Ordering::Relaxed)
    }

    pub fn cut_mut(&mut self) -> &mut Cut {
        self.cut.get_mut().unwrap_or_else(|e| e.into_inner())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellHandle {
    Slot(u32),
    /// The table was full along the probe path; sample the shared, never-adapted cut.
    Fallback,
}

/// Open-addressing table of cells. Slots are claimed at most once and never evicted.
pub struct HashGrid {
    params: HashGridParams,
    slots: Vec<OnceLock<Cell>>,
    template: Cut,
    occupied: AtomicUsize,
    fallback_hits: AtomicU64,
}

impl HashGrid {
    /// `template` is copied into every cell on first access and also serves as the fallback.
    pub fn new(params: HashGridParams, template: Cut) -> Result<Self> {
        if params.capacity == 0 {
            return Err(Error::invalid("hash grid capacity must be at least 1"));
        }
        if !(params.base_tile > 0.0) {
            return Err(Error::invalid("base tile must be positive"));
        }
        let mut slots = Vec::with_capacity(params.capacity);
        slots.resize_with(params.capacity, OnceLock::new);
        Ok(Self {
            params,
            slots,
            template,
            occupied: AtomicUsize::new(0),
            fallback_hits: AtomicU64::new(0),
        })
    }

    pub fn params(&self) -> &HashGridParams {
        &self.params
    }

    pub fn key_for(&self, position: Vec3, normal: Vec3, area_pdf: f64, jitter: &Jitter) -> CellKey {
        let level = level_for_footprint(area_pdf, self.params.base_tile).unwrap_or(MAX_LEVEL);
        make_key(position, normal, level, jitter, self.params.jitter, self.params.base_tile)
    }

    /// Finds the cell for `key`, claiming and initializing an empty slot on first access.
    /// Concurrent callers racing for the same slot see exactly one initialization.
    pub fn lookup_or_insert(&self, key: CellKey) -> CellHandle {
        let cap = self.slots.len();
        let start = (key.hash() % cap as u64) as usize;
        for probe in 0..self.params.probe_limit.min(cap) {
            let idx = (start + probe) % cap;
            let cell = self.slots[idx].get_or_init(|| {
                self.occupied.fetch_add(1, Ordering::Relaxed);
                Cell {
                    key,
                    cut: Mutex::new(self.template.clone()),
                    touched: AtomicBool::new(false),
                }
            });
            if cell.key == key {
                return CellHandle::Slot(idx as u32);
            }
        }
        self.fallback_hits.fetch_add(1, Ordering::Relaxed);
        CellHandle::Fallback
    }

    pub fn cell(&self, handle: CellHandle) -> Option<&Cell> {
        match handle {
            CellHandle::Slot(i) => self.slots[i as usize].get(),
            CellHandle::Fallback => None,
        }
    }

    pub fn fallback_cut(&self) -> &Cut {
        &self.template
    }

    pub fn occupied(&self) -> usize {
        self.occupied.load(Ordering::Relaxed)
    }

    pub fn fallback_hits(&self) -> u64 {
        self.fallback_hits.load(Ordering::Relaxed)
    }

    pub fn cells(&self) -> impl Iterator<Item = &Cell> {
        self.slots.iter().filter_map(OnceLock::get)
    }

    pub fn cells_mut(&mut self) -> impl Iterator<Item = &mut Cell> {
        self.slots.iter_mut().filter_map(OnceLock::get_mut)
    }

    pub(crate) fn slots_mut(&mut self) -> &mut [OnceLock<Cell>] {
        &mut self.slots
    }

    /// Bytes of cluster state held by all occupied cells.
    pub fn cut_storage_bytes(&self) -> usize {
        self.cells().map(|c| c.lock().storage_bytes()).sum()
    }

    pub fn level_histogram(&self) -> [usize; MAX_LEVEL as usize + 1] {
        let mut h = [0; MAX_LEVEL as usize + 1];
        for c in self.cells() {
            h[c.key.level as usize] += 1;
        }
        h
    }

    /// CSV with summary rows followed by one row per populated level.
    pub fn stats_csv(&self) -> String {
        let mut out = String::from("stat,value\n");
        writeln!(out, "occupied,{}", self.occupied()).unwrap();
        writeln!(out, "capacity,{}", self.slots.len()).unwrap();
        writeln!(out, "fallback_hits,{}", self.fallback_hits()).unwrap();
        for (level, &n) in self.level_histogram().iter().enumerate() {
            if n > 0 {
                writeln!(out, "level_{level},{n}").unwrap();
            }
        }
        out
    }
}
