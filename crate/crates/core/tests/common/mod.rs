//! Brute-force reference implementations shared by the integration tests.
//! Each one follows the textbook definition directly, with no attempt at speed.
#![allow(dead_code)]

use grainseg::morphology::StructuringElement;
use grainseg::{neighbors, BinaryVolume, BorderRule, Connectivity, Dims, LabelVolume, Volume};
use proptest::prelude::*;

pub fn dims_strategy(max: usize) -> impl Strategy<Value = Dims> {
    (1..=max, 1..=max, 1..=max).prop_map(|(x, y, z)| Dims::new(x, y, z).unwrap())
}

pub fn binary_strategy(max: usize) -> impl Strategy<Value = BinaryVolume> {
    dims_strategy(max).prop_flat_map(|d| {
        proptest::collection::vec(0u8..2, d.len())
            .prop_map(move |f| BinaryVolume::from_flags(d, &f).unwrap())
    })
}

/// Two masks on the same grid.
pub fn binary_pair_strategy(max: usize) -> impl Strategy<Value = (BinaryVolume, BinaryVolume)> {
    dims_strategy(max).prop_flat_map(|d| {
        let flags = || proptest::collection::vec(0u8..2, d.len());
        (flags(), flags()).prop_map(move |(a, b)| {
            (
                BinaryVolume::from_flags(d, &a).unwrap(),
                BinaryVolume::from_flags(d, &b).unwrap(),
            )
        })
    })
}

pub fn connectivity_strategy() -> impl Strategy<Value = Connectivity> {
    prop_oneof![
        Just(Connectivity::Six),
        Just(Connectivity::Eighteen),
        Just(Connectivity::TwentySix)
    ]
}

pub fn border_strategy() -> impl Strategy<Value = BorderRule> {
    prop_oneof![
        Just(BorderRule::OutsideBackground),
        Just(BorderRule::OutsideForeground),
        Just(BorderRule::ClampToEdge)
    ]
}

fn sample(a: &BinaryVolume, p: [i64; 3], border: BorderRule) -> bool {
    let d = a.dims();
    let n = [d.nx as i64, d.ny as i64, d.nz as i64];
    let inside = (0..3).all(|k| p[k] >= 0 && p[k] < n[k]);
    if inside {
        return a.get(p[0] as usize, p[1] as usize, p[2] as usize);
    }
    match border {
        BorderRule::OutsideBackground => false,
        BorderRule::OutsideForeground => true,
        BorderRule::ClampToEdge => {
            let c = [0, 1, 2].map(|k| p[k].clamp(0, n[k] - 1) as usize);
            a.get(c[0], c[1], c[2])
        }
    }
}

/// `{z | (B)_z ⊂ A}` straight from the offset set.
pub fn naive_erode(a: &BinaryVolume, se: &StructuringElement, border: BorderRule) -> BinaryVolume {
    let offs = se.offsets();
    BinaryVolume::from_fn(a.dims(), |x, y, z| {
        offs.iter().all(|o| {
            sample(
                a,
                [
                    x as i64 + o[0] as i64,
                    y as i64 + o[1] as i64,
                    z as i64 + o[2] as i64,
                ],
                border,
            )
        })
    })
}

/// `{z | (B)_z ∩ A ≠ ∅}` (B is symmetric).
pub fn naive_dilate(a: &BinaryVolume, se: &StructuringElement, border: BorderRule) -> BinaryVolume {
    let offs = se.offsets();
    BinaryVolume::from_fn(a.dims(), |x, y, z| {
        offs.iter().any(|o| {
            sample(
                a,
                [
                    x as i64 + o[0] as i64,
                    y as i64 + o[1] as i64,
                    z as i64 + o[2] as i64,
                ],
                border,
            )
        })
    })
}

/// Geodesic erosion iterated until nothing changes.
pub fn naive_reconstruct(marker: &Volume<i32>, mask: &Volume<i32>, c: Connectivity) -> Volume<i32> {
    let d = mask.dims();
    let mut g = marker.clone();
    loop {
        let mut next = g.clone();
        for i in 0..d.len() {
            let p = d.coords(i);
            let mut m = g.data()[i];
            for q in neighbors(p, c, d).unwrap() {
                m = m.min(g.at(q));
            }
            next.data_mut()[i] = m.max(mask.data()[i]);
        }
        if next == g {
            return g;
        }
        g = next;
    }
}

/// Regional minima as lists of linear indices (plateaus with no lower neighbor).
pub fn naive_minima(f: &Volume<i32>, c: Connectivity) -> Vec<Vec<usize>> {
    let d = f.dims();
    let mut seen = vec![false; d.len()];
    let mut out = Vec::new();
    for s in 0..d.len() {
        if seen[s] {
            continue;
        }
        let level = f.data()[s];
        let mut plateau = vec![s];
        seen[s] = true;
        let mut k = 0;
        let mut minimum = true;
        while k < plateau.len() {
            let p = plateau[k];
            k += 1;
            for q in neighbors(d.coords(p), c, d).unwrap() {
                let qi = d.index(q[0], q[1], q[2]);
                let v = f.data()[qi];
                if v < level {
                    minimum = false;
                } else if v == level && !seen[qi] {
                    seen[qi] = true;
                    plateau.push(qi);
                }
            }
        }
        if minimum {
            out.push(plateau);
        }
    }
    out
}

/// Dynamic of the minimum containing `start`: the smallest climb needed to
/// reach a strictly lower voxel; `None` for a global minimum.
pub fn naive_dynamic(f: &Volume<i32>, start: usize, c: Connectivity) -> Option<i32> {
    let d = f.dims();
    let m = f.data()[start];
    let mut levels: Vec<i32> = f.data().iter().copied().filter(|&v| v >= m).collect();
    levels.sort();
    levels.dedup();
    for t in levels {
        let mut seen = vec![false; d.len()];
        let mut stack = vec![start];
        seen[start] = true;
        while let Some(p) = stack.pop() {
            if f.data()[p] < m {
                return Some(t - m);
            }
            for q in neighbors(d.coords(p), c, d).unwrap() {
                let qi = d.index(q[0], q[1], q[2]);
                if !seen[qi] && f.data()[qi] <= t {
                    seen[qi] = true;
                    stack.push(qi);
                }
            }
        }
    }
    None
}

/// Priority-FIFO flood with the minimum entry found by linear scan.
pub fn flood_oracle(
    topo: &[u32],
    d: Dims,
    seeds: &LabelVolume,
    c: Connectivity,
    mask: Option<&BinaryVolume>,
    lines: bool,
) -> Vec<u32> {
    let n = d.len();
    let in_mask = |i: usize| mask.is_none_or(|m| m.get_index(i));
    let mut label = seeds.data().to_vec();
    let mut queued = vec![false; n];
    let mut pending: Vec<(u32, u64, usize, u32)> = Vec::new();
    let mut seq = 0u64;
    let nbrs = |i: usize| -> Vec<usize> {
        neighbors(d.coords(i), c, d)
            .unwrap()
            .into_iter()
            .map(|q| d.index(q[0], q[1], q[2]))
            .collect()
    };
    let mut push_from =
        |p: usize, l: u32, label: &[u32], queued: &mut [bool], pending: &mut Vec<_>| {
            for q in nbrs(p) {
                if label[q] == 0 && !queued[q] && in_mask(q) {
                    queued[q] = true;
                    pending.push((topo[q], seq, q, l));
                    seq += 1;
                }
            }
        };
    for p in 0..n {
        if seeds.data()[p] != 0 {
            queued[p] = true;
        }
    }
    for p in 0..n {
        let l = seeds.data()[p];
        if l != 0 {
            push_from(p, l, &label, &mut queued, &mut pending);
        }
    }
    while !pending.is_empty() {
        let mut best = 0;
        for k in 1..pending.len() {
            if (pending[k].0, pending[k].1) < (pending[best].0, pending[best].1) {
                best = k;
            }
        }
        let (_, _, q, l) = pending.remove(best);
        if lines && nbrs(q).iter().any(|&r| label[r] != 0 && label[r] != l) {
            continue;
        }
        label[q] = l;
        push_from(q, l, &label, &mut queued, &mut pending);
    }
    label
}

/// Squared distance to the nearest voxel outside `a` (the exterior of the
/// volume included), by exhaustive search.
pub fn brute_edt_sq(a: &BinaryVolume) -> Vec<u32> {
    let d = a.dims();
    let n = [d.nx as i64, d.ny as i64, d.nz as i64];
    (0..d.len())
        .map(|i| {
            if !a.get_index(i) {
                return 0;
            }
            let p = d.coords(i).map(|v| v as i64);
            let mut best = i64::MAX;
            for qz in -1..=n[2] {
                for qy in -1..=n[1] {
                    for qx in -1..=n[0] {
                        let q = [qx, qy, qz];
                        let inside = (0..3).all(|k| q[k] >= 0 && q[k] < n[k]);
                        if inside && a.get(qx as usize, qy as usize, qz as usize) {
                            continue;
                        }
                        best = best.min((0..3).map(|k| (q[k] - p[k]).pow(2)).sum());
                    }
                }
            }
            best as u32
        })
        .collect()
}

/// Component labels by flood fill from each unlabeled voxel in scan order.
pub fn naive_components(a: &BinaryVolume, c: Connectivity) -> Vec<u32> {
    let d = a.dims();
    let mut lab = vec![0u32; d.len()];
    let mut next = 0;
    for s in 0..d.len() {
        if !a.get_index(s) || lab[s] != 0 {
            continue;
        }
        next += 1;
        lab[s] = next;
        let mut stack = vec![s];
        while let Some(p) = stack.pop() {
            for q in neighbors(d.coords(p), c, d).unwrap() {
                let qi = d.index(q[0], q[1], q[2]);
                if a.get_index(qi) && lab[qi] == 0 {
                    lab[qi] = next;
                    stack.push(qi);
                }
            }
        }
    }
    lab
}

/// Ball of radius `r` around `c` (voxel centers).
pub fn ball(d: Dims, c: [f64; 3], r: f64) -> BinaryVolume {
    BinaryVolume::from_fn(d, |x, y, z| {
        let p = [x as f64, y as f64, z as f64];
        (0..3).map(|k| (p[k] - c[k]).powi(2)).sum::<f64>() <= r * r
    })
}
