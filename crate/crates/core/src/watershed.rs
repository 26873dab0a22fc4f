//! Labels-controlled watershed by flooding.
//!
//! Voxels are claimed in `(priority, sequence)` order, where the priority is
//! the topography value of the voxel being claimed and the sequence is the
//! insertion counter of the hierarchical queue. Seeds are expanded in linear
//! scan order; every voxel enters the queue at most once and carries the label
//! of the front that reached it first. With `emit_lines`, a voxel that is
//! touching an already flooded voxel of a different label when it is dequeued
//! becomes a dam and stops its front.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Connectivity, GreyVolume, LabelVolume, Neighborhood, Volume};

const PENDING: u32 = 1 << 31;
const DAM: u32 = u32::MAX;

/// Outcome of a flood with its diagnostics.
#[derive(Clone, Debug)]
pub struct Flood {
    pub labels: LabelVolume,
    /// Voxels inside the mask (or the volume) that no seed could reach.
    pub unreached: usize,
    /// Voxels left at 0 as dams (always 0 without `emit_lines`).
    pub dams: usize,
}

/// Hierarchical FIFO queue over `n` discrete levels; pops in
/// `(level, insertion order)` order, including after pushes below the level
/// currently being drained.
#[derive(Debug)]
pub struct FloodOrder {
    buckets: Vec<VecDeque<u32>>,
    current: usize,
    len: usize,
}

impl FloodOrder {
    pub fn new(levels: usize) -> Self {
        FloodOrder {
            buckets: (0..levels).map(|_| VecDeque::new()).collect(),
            current: levels,
            len: 0,
        }
    }

    pub fn push(&mut self, level: usize, voxel: u32) {
        self.buckets[level].push_back(voxel);
        self.current = self.current.min(level);
        self.len += 1;
    }

    pub fn pop(&mut self) -> Option<(usize, u32)> {
        while self.current < self.buckets.len() {
            if let Some(v) = self.buckets[self.current].pop_front() {
                self.len -= 1;
                return Some((self.current, v));
            }
            self.current += 1;
        }
        None
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

/// Floods `topo` from `seeds`; see the module docs for the ordering rules.
pub fn watershed_from_labels(
    topo: &GreyVolume,
    seeds: &LabelVolume,
    c: Connectivity,
    mask: Option<&BinaryVolume>,
    emit_lines: bool,
) -> Result<LabelVolume> {
    Ok(watershed_flood(topo, seeds.clone(), c, mask, emit_lines)?.labels)
}

/// [`watershed_from_labels`] reusing the seed buffer for the output and
/// reporting diagnostics.
pub fn watershed_flood(
    topo: &GreyVolume,
    seeds: LabelVolume,
    c: Connectivity,
    mask: Option<&BinaryVolume>,
    emit_lines: bool,
) -> Result<Flood> {
    topo.dims().ensure_same(&seeds.dims())?;
    let t = topo.data();
    flood(256, |i| t[i] as usize, seeds, c, mask, emit_lines)
}

/// Flood over an arbitrary number of integer levels (`topo < levels`).
pub fn watershed_levels(
    topo: &Volume<u32>,
    levels: usize,
    seeds: LabelVolume,
    c: Connectivity,
    mask: Option<&BinaryVolume>,
    emit_lines: bool,
) -> Result<Flood> {
    topo.dims().ensure_same(&seeds.dims())?;
    let t = topo.data();
    if let Some(&bad) = t.iter().find(|&&v| v as usize >= levels) {
        return Err(Error::pre(format!(
            "topography level {bad} outside 0..{levels}"
        )));
    }
    flood(levels, |i| t[i] as usize, seeds, c, mask, emit_lines)
}

fn flood(
    levels: usize,
    level: impl Fn(usize) -> usize,
    seeds: LabelVolume,
    c: Connectivity,
    mask: Option<&BinaryVolume>,
    emit_lines: bool,
) -> Result<Flood> {
    let dims = seeds.dims();
    if let Some(m) = mask {
        dims.ensure_same(&m.dims())?;
    }
    if seeds.data().iter().all(|&l| l == 0) {
        return Err(Error::EmptySeeds);
    }
    if seeds.data().iter().any(|&l| l >= PENDING) {
        return Err(Error::pre("seed labels must be below 2^31"));
    }
    if let Some(m) = mask {
        let outside = seeds
            .data()
            .iter()
            .enumerate()
            .filter(|&(i, &l)| l != 0 && !m.get_index(i))
            .count();
        if outside > 0 {
            return Err(Error::SeedOutsideMask { count: outside });
        }
    }
    if dims.len() > PENDING as usize {
        return Err(Error::pre("volume too large for 32-bit voxel indices"));
    }

    let in_mask = |i: usize| mask.is_none_or(|m| m.get_index(i));
    let nb = Neighborhood::new(dims, c);
    let mut lab = seeds.into_vec();
    let mut queue = FloodOrder::new(levels);

    // A voxel's state: 0 = free, PENDING|l = queued with label l, DAM, else flooded.
    let expand = |p: usize, l: u32, lab: &mut [u32], queue: &mut FloodOrder| {
        nb.for_each(p, |q| {
            if lab[q] == 0 && in_mask(q) {
                lab[q] = PENDING | l;
                queue.push(level(q), q as u32);
            }
        });
    };

    for p in 0..lab.len() {
        let l = lab[p];
        if l != 0 && l & PENDING == 0 {
            expand(p, l, &mut lab, &mut queue);
        }
    }

    let mut dams = 0;
    while let Some((_, q)) = queue.pop() {
        let q = q as usize;
        let l = lab[q] & !PENDING;
        if emit_lines {
            let mut conflict = false;
            nb.for_each(q, |r| {
                let o = lab[r];
                if o != 0 && o != DAM && o & PENDING == 0 && o != l {
                    conflict = true;
                }
            });
            if conflict {
                lab[q] = DAM;
                dams += 1;
                continue;
            }
        }
        lab[q] = l;
        expand(q, l, &mut lab, &mut queue);
    }

    let mut unreached = 0;
    for (i, v) in lab.iter_mut().enumerate() {
        if *v == DAM {
            *v = 0;
        } else if *v == 0 && in_mask(i) {
            unreached += 1;
        }
    }
    Ok(Flood {
        labels: LabelVolume::from_vec(dims, lab)?,
        unreached,
        dams,
    })
}

/// Foreground exactly where `basins == label`.
pub fn select_basin(basins: &LabelVolume, label: u32) -> Result<BinaryVolume> {
    if label == 0 {
        return Err(Error::pre("label 0 is background, not a basin"));
    }
    let d = basins.data();
    let mut out = BinaryVolume::empty(basins.dims());
    for (i, &v) in d.iter().enumerate() {
        if v == label {
            out.set_index(i, true);
        }
    }
    Ok(out)
}
