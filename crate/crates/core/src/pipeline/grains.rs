//! Connected components, Euclidean distance transform and grain splitting.

use crate::error::Result;
use crate::minima::{dynamic_filter_in, regional_minima_in, DynamicParameter};
use crate::par;
use crate::volume::{
    BinaryVolume, Connectivity, Dims, LabelVolume, Neighborhood, Volume, WideVolume,
};
use crate::watershed::watershed_levels;

/// Labels `c`-connected foreground components `1..=n` in order of their
/// first voxel in scan order.
pub fn connected_components(a: &BinaryVolume, c: Connectivity) -> LabelVolume {
    let dims = a.dims();
    let nb = Neighborhood::new(dims, c);
    let mut lab = vec![0u32; dims.len()];
    let mut parent: Vec<u32> = vec![0];

    fn find(parent: &mut [u32], mut x: u32) -> u32 {
        while parent[x as usize] != x {
            let up = parent[parent[x as usize] as usize];
            parent[x as usize] = up;
            x = up;
        }
        x
    }

    for p in a.iter_ones() {
        let mut root = 0u32;
        nb.for_each_half(p, true, |q| {
            let l = lab[q];
            if l == 0 {
                return;
            }
            let r = find(&mut parent, l);
            if root == 0 {
                root = r;
            } else if r != root {
                let (lo, hi) = (root.min(r), root.max(r));
                parent[hi as usize] = lo;
                root = lo;
            }
        });
        if root == 0 {
            root = parent.len() as u32;
            parent.push(root);
        }
        lab[p] = root;
    }

    let mut final_of = vec![0u32; parent.len()];
    let mut next = 0u32;
    for l in lab.iter_mut().filter(|l| **l != 0) {
        let r = find(&mut parent, *l) as usize;
        if final_of[r] == 0 {
            next += 1;
            final_of[r] = next;
        }
        *l = final_of[r];
    }
    LabelVolume::from_vec(dims, lab).expect("length matches dims")
}

/// Squared Euclidean distance from each foreground voxel to the nearest
/// background voxel, where everything outside the volume counts as
/// background. Background voxels map to 0.
pub fn squared_distance_transform(a: &BinaryVolume) -> Volume<u32> {
    let d = a.dims();
    let (nx, ny, nz) = d.as_tuple();
    let mut g = vec![0u32; d.len()];

    // Along x: run lengths to the nearest background, faces included.
    par::for_each_chunk_mut(&mut g, nx, |row, out| {
        let base = row * nx;
        let mut last: i64 = -1;
        for x in 0..nx {
            if !a.get_index(base + x) {
                last = x as i64;
            }
            out[x] = (x as i64 - last) as u32;
        }
        let mut next = nx as i64;
        for x in (0..nx).rev() {
            if !a.get_index(base + x) {
                next = x as i64;
            }
            let dist = out[x].min((next - x as i64) as u32);
            out[x] = dist * dist;
        }
    });

    // Along y, slice by slice.
    par::for_each_chunk_mut(&mut g, nx * ny, |_, slice| {
        let mut env = Envelope::new(ny);
        let mut col = vec![0u32; ny];
        for x in 0..nx {
            for y in 0..ny {
                col[y] = slice[y * nx + x];
            }
            env.transform(&mut col);
            for y in 0..ny {
                slice[y * nx + x] = col[y];
            }
        }
    });

    // Along z, one xz-plane per y.
    let s = nx * ny;
    let planes: Vec<Vec<u32>> = par::map_range(ny, |y| {
        let mut env = Envelope::new(nz);
        let mut line = vec![0u32; nz];
        let mut plane = vec![0u32; nx * nz];
        for x in 0..nx {
            for z in 0..nz {
                line[z] = g[z * s + y * nx + x];
            }
            env.transform(&mut line);
            for z in 0..nz {
                plane[z * nx + x] = line[z];
            }
        }
        plane
    });
    for (y, plane) in planes.into_iter().enumerate() {
        for z in 0..nz {
            g[z * s + y * nx..z * s + (y + 1) * nx].copy_from_slice(&plane[z * nx..(z + 1) * nx]);
        }
    }
    Volume::from_vec(d, g).expect("length matches dims")
}

/// Exact Euclidean distance to the nearest background voxel (faces count as
/// adjacent to background).
pub fn distance_transform(a: &BinaryVolume) -> WideVolume {
    squared_distance_transform(a).map(|v| (v as f64).sqrt() as f32)
}

/// Lower envelope of parabolas for one line, with virtual background just
/// beyond both ends.
struct Envelope {
    v: Vec<usize>,
    z: Vec<f64>,
    out: Vec<u32>,
}

impl Envelope {
    fn new(n: usize) -> Self {
        Envelope {
            v: vec![0; n],
            z: vec![0.0; n + 1],
            out: vec![0; n],
        }
    }

    fn transform(&mut self, f: &mut [u32]) {
        let n = f.len();
        let fv = |q: usize| f[q] as f64 + (q * q) as f64;
        let (v, z) = (&mut self.v, &mut self.z);
        let mut k = 0usize;
        v[0] = 0;
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for q in 1..n {
            let mut s;
            loop {
                let p = v[k];
                s = (fv(q) - fv(p)) / (2.0 * (q - p) as f64);
                if s <= z[k] {
                    k -= 1;
                } else {
                    break;
                }
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        k = 0;
        for q in 0..n {
            while z[k + 1] < q as f64 {
                k += 1;
            }
            let p = v[k];
            let dq = q.abs_diff(p) as u64;
            let face = ((q + 1).min(n - q) as u64).pow(2);
            self.out[q] = (dq * dq + f[p] as u64).min(face) as u32;
        }
        f.copy_from_slice(&self.out);
    }
}

/// Splits touching grains: flood of the h-filtered negated distance from its
/// regional minima, restricted to the foreground.
///
/// Work is done per 26-connected component inside its bounding box grown by
/// one voxel, which gives the same result as processing the whole volume
/// (the nearest non-component voxel of any component voxel is a background
/// voxel adjacent to it). Grains are numbered component by component, in
/// scan order of their regional minimum within each component.
pub fn split_grains(
    a: &BinaryVolume,
    h: DynamicParameter<f32>,
    c: Connectivity,
) -> Result<LabelVolume> {
    let dims = a.dims();
    let boxes = component_boxes(a);
    let budget = (dims.len() / 16).max(1 << 18);
    let mut out = LabelVolume::zeros(dims);
    let mut next = 0u32;
    let mut start = 0;
    while start < boxes.len() {
        let mut end = start;
        let mut used = 0;
        while end < boxes.len() && (end == start || used + boxes[end].dims.len() <= budget) {
            used += boxes[end].dims.len();
            end += 1;
        }
        let results = par::map_slice(&boxes[start..end], |b| split_component(a, b, h, c));
        for (b, res) in boxes[start..end].iter().zip(results) {
            let local = res?;
            let o = out.data_mut();
            for (li, &l) in local.data().iter().enumerate() {
                if l != 0 {
                    let [x, y, z] = b.dims.coords(li);
                    o[dims.index(b.origin[0] + x, b.origin[1] + y, b.origin[2] + z)] = next + l;
                }
            }
            next += local.max_label();
        }
        start = end;
    }
    Ok(out)
}

struct ComponentBox {
    seed: usize,
    origin: [usize; 3],
    dims: Dims,
}

/// Bounding boxes (grown by one voxel, clipped) of the 26-connected
/// components, in order of first voxel.
fn component_boxes(a: &BinaryVolume) -> Vec<ComponentBox> {
    let dims = a.dims();
    let nb = Neighborhood::new(dims, Connectivity::TwentySix);
    let mut seen = BinaryVolume::empty(dims);
    let mut stack = Vec::new();
    let mut boxes = Vec::new();
    for seed in a.iter_ones() {
        if seen.get_index(seed) {
            continue;
        }
        let mut lo = dims.coords(seed);
        let mut hi = lo;
        seen.set_index(seed, true);
        stack.push(seed);
        while let Some(p) = stack.pop() {
            let cp = dims.coords(p);
            for k in 0..3 {
                lo[k] = lo[k].min(cp[k]);
                hi[k] = hi[k].max(cp[k]);
            }
            nb.for_each(p, |q| {
                if a.get_index(q) && !seen.get_index(q) {
                    seen.set_index(q, true);
                    stack.push(q);
                }
            });
        }
        let full = [dims.nx, dims.ny, dims.nz];
        let origin = [0, 1, 2].map(|k| lo[k].saturating_sub(1));
        let end = [0, 1, 2].map(|k| (hi[k] + 2).min(full[k]));
        let bdims = Dims::new(end[0] - origin[0], end[1] - origin[1], end[2] - origin[2])
            .expect("nonempty box");
        boxes.push(ComponentBox {
            seed,
            origin,
            dims: bdims,
        });
    }
    boxes
}

fn split_component(
    a: &BinaryVolume,
    b: &ComponentBox,
    h: DynamicParameter<f32>,
    c: Connectivity,
) -> Result<LabelVolume> {
    let gd = a.dims();
    let d = b.dims;
    let [ox, oy, oz] = b.origin;
    let local = |i: usize| {
        let [x, y, z] = d.coords(i);
        gd.index(ox + x, oy + y, oz + z)
    };

    let mut comp = BinaryVolume::empty(d);
    let [sx, sy, sz] = gd.coords(b.seed);
    let start = d.index(sx - ox, sy - oy, sz - oz);
    let nb26 = Neighborhood::new(d, Connectivity::TwentySix);
    let mut stack = vec![start];
    comp.set_index(start, true);
    while let Some(p) = stack.pop() {
        nb26.for_each(p, |q| {
            if !comp.get_index(q) && a.get_index(local(q)) {
                comp.set_index(q, true);
                stack.push(q);
            }
        });
    }

    let sq = squared_distance_transform(&comp);
    let neg = sq.map(|v| -((v as f64).sqrt() as f32));
    drop(sq);
    let t = dynamic_filter_in(&neg, h, c, Some(&comp))?;
    drop(neg);
    let seeds = regional_minima_in(&t, c, Some(&comp))?;

    let mut levels: Vec<f32> = comp.iter_ones().map(|i| t.data()[i]).collect();
    levels.sort_by(f32::total_cmp);
    levels.dedup();
    let mut rank = Volume::filled(d, 0u32);
    for i in comp.iter_ones() {
        let v = t.data()[i];
        rank.data_mut()[i] = levels.partition_point(|&l| l.total_cmp(&v).is_lt()) as u32;
    }
    drop(t);
    let flood = watershed_levels(&rank, levels.len().max(1), seeds, c, Some(&comp), false)?;
    Ok(flood.labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_sq(a: &BinaryVolume) -> Vec<u32> {
        let d = a.dims();
        let (nx, ny, nz) = d.as_tuple();
        (0..d.len())
            .map(|i| {
                if !a.get_index(i) {
                    return 0;
                }
                let [x, y, z] = d.coords(i);
                let (x, y, z) = (x as i64, y as i64, z as i64);
                let mut best = i64::MAX;
                for qz in -1..=nz as i64 {
                    for qy in -1..=ny as i64 {
                        for qx in -1..=nx as i64 {
                            let inside = qx >= 0
                                && qy >= 0
                                && qz >= 0
                                && qx < nx as i64
                                && qy < ny as i64
                                && qz < nz as i64;
                            if inside && a.get(qx as usize, qy as usize, qz as usize) {
                                continue;
                            }
                            best = best.min((qx - x).pow(2) + (qy - y).pow(2) + (qz - z).pow(2));
                        }
                    }
                }
                best as u32
            })
            .collect()
    }

    #[test]
    fn edt_examples() {
        let d = Dims::cube(9);
        assert!(distance_transform(&BinaryVolume::empty(d))
            .data()
            .iter()
            .all(|&v| v == 0.0));
        let single = BinaryVolume::from_fn(d, |x, y, z| (x, y, z) == (4, 4, 4));
        assert_eq!(distance_transform(&single).get(4, 4, 4), 1.0);
        let big = Dims::cube(11);
        let cube = BinaryVolume::from_fn(big, |x, y, z| {
            [x, y, z].iter().all(|&c| (2..9).contains(&c))
        });
        assert_eq!(distance_transform(&cube).get(5, 5, 5), 4.0);
        assert_eq!(
            squared_distance_transform(&cube).data(),
            brute_sq(&cube).as_slice()
        );
    }

    #[test]
    fn edt_matches_brute_force_with_faces() {
        let d = Dims::new(7, 5, 6).unwrap();
        let a = BinaryVolume::from_fn(d, |x, y, z| (x * 7 + y * 13 + z * 5) % 11 != 0);
        assert_eq!(
            squared_distance_transform(&a).data(),
            brute_sq(&a).as_slice()
        );
        let full = BinaryVolume::full(d);
        assert_eq!(
            squared_distance_transform(&full).data(),
            brute_sq(&full).as_slice()
        );
    }

    #[test]
    fn components_corner_touching_cubes() {
        let d = Dims::cube(6);
        let a = BinaryVolume::from_fn(d, |x, y, z| {
            let c1 = x < 2 && y < 2 && z < 2;
            let c2 = (2..4).contains(&x) && (2..4).contains(&y) && (2..4).contains(&z);
            c1 || c2
        });
        assert_eq!(
            connected_components(&a, Connectivity::TwentySix).max_label(),
            1
        );
        assert_eq!(connected_components(&a, Connectivity::Six).max_label(), 2);
        assert_eq!(
            connected_components(&BinaryVolume::empty(d), Connectivity::Six).max_label(),
            0
        );
    }

    #[test]
    fn components_merge_late() {
        // A U shape: two arms get different provisional labels and merge at
        // the bottom row; labels stay in first-voxel order.
        let d = Dims::new(5, 3, 1).unwrap();
        let a =
            BinaryVolume::from_flags(d, &[1, 0, 1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 1, 0, 1]).unwrap();
        let l = connected_components(&a, Connectivity::Six);
        assert_eq!(l.data(), &[1, 0, 1, 0, 2, 1, 0, 1, 0, 2, 1, 1, 1, 0, 2]);
    }

    #[test]
    fn split_single_sphere_and_empty() {
        let d = Dims::cube(15);
        let a = BinaryVolume::from_fn(d, |x, y, z| {
            let r2 = (x as i64 - 7).pow(2) + (y as i64 - 7).pow(2) + (z as i64 - 7).pow(2);
            r2 <= 25
        });
        let h = DynamicParameter::new(1.0).unwrap();
        let g = split_grains(&a, h, Connectivity::TwentySix).unwrap();
        assert_eq!(g.max_label(), 1);
        assert_eq!(g.nonzero(), a);
        let e = split_grains(&BinaryVolume::empty(d), h, Connectivity::TwentySix).unwrap();
        assert_eq!(e.max_label(), 0);
    }
}
