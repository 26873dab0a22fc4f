//! Grey-level reconstruction by erosion, the h-minima dynamic filter and
//! regional-minima labeling.
//!
//! All three accept an optional `domain` mask. Voxels outside the domain never
//! act as neighbors, so disjoint regions of one volume are processed as if
//! they were separate images; reconstruction copies the mask value there.

use std::collections::VecDeque;
use std::ops::Add;

use crate::error::{Error, Result};
use crate::volume::{BinaryVolume, Connectivity, LabelVolume, Neighborhood, Sample, Volume};

/// Scalars that can be raised by a dynamic `h` without saturating.
pub trait Level: Sample + Add<Output = Self> {
    const ZERO: Self;
}

impl Level for i32 {
    const ZERO: Self = 0;
}

impl Level for f32 {
    const ZERO: Self = 0.0;
}

/// Depth threshold `h ≥ 0` of the dynamic filter, in grey-level units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DynamicParameter<T>(T);

impl<T: Level> DynamicParameter<T> {
    pub fn new(h: T) -> Result<Self> {
        // NaN fails this comparison too.
        if !(h >= T::ZERO) {
            return Err(Error::pre(format!("dynamic h must be >= 0, got {h:?}")));
        }
        Ok(DynamicParameter(h))
    }

    pub fn get(self) -> T {
        self.0
    }
}

#[inline]
fn in_domain(domain: Option<&BinaryVolume>, i: usize) -> bool {
    domain.is_none_or(|d| d.get_index(i))
}

fn max<T: PartialOrd>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

fn min<T: PartialOrd>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// Reconstruction by erosion of `marker` over `mask`: the fixpoint of
/// `g ← max(ε_c(g), mask)`, where `ε_c` is the min over the voxel and its
/// `c`-neighbors.
pub fn geodesic_erode_to_stability<T: Sample>(
    marker: &Volume<T>,
    mask: &Volume<T>,
    c: Connectivity,
) -> Result<Volume<T>> {
    geodesic_erode_in(marker, mask, c, None)
}

/// [`geodesic_erode_to_stability`] restricted to `domain`.
///
/// Uses raster and anti-raster sweeps followed by FIFO propagation.
pub fn geodesic_erode_in<T: Sample>(
    marker: &Volume<T>,
    mask: &Volume<T>,
    c: Connectivity,
    domain: Option<&BinaryVolume>,
) -> Result<Volume<T>> {
    let dims = marker.dims();
    dims.ensure_same(&mask.dims())?;
    if let Some(d) = domain {
        dims.ensure_same(&d.dims())?;
    }
    let below = marker
        .data()
        .iter()
        .zip(mask.data())
        .enumerate()
        .filter(|&(i, (m, k))| in_domain(domain, i) && m < k)
        .count();
    if below > 0 {
        return Err(Error::pre(format!(
            "marker lies below mask on {below} voxels"
        )));
    }

    let mut g = marker.clone();
    let f = mask.data();
    if let Some(d) = domain {
        let gd = g.data_mut();
        for i in 0..gd.len() {
            if !d.get_index(i) {
                gd[i] = f[i];
            }
        }
    }
    let nb = Neighborhood::new(dims, c);
    let n = dims.len();
    let gd = g.data_mut();

    for p in 0..n {
        if !in_domain(domain, p) {
            continue;
        }
        let mut m = gd[p];
        nb.for_each_half(p, true, |q| {
            if in_domain(domain, q) {
                m = min(m, gd[q]);
            }
        });
        gd[p] = max(m, f[p]);
    }

    let mut fifo = VecDeque::new();
    for p in (0..n).rev() {
        if !in_domain(domain, p) {
            continue;
        }
        let mut m = gd[p];
        nb.for_each_half(p, false, |q| {
            if in_domain(domain, q) {
                m = min(m, gd[q]);
            }
        });
        let gp = max(m, f[p]);
        gd[p] = gp;
        let mut enqueue = false;
        nb.for_each_half(p, false, |q| {
            if in_domain(domain, q) && gd[q] > gp && gd[q] > f[q] {
                enqueue = true;
            }
        });
        if enqueue {
            fifo.push_back(p);
        }
    }

    while let Some(p) = fifo.pop_front() {
        let gp = gd[p];
        nb.for_each(p, |q| {
            if in_domain(domain, q) && gd[q] > gp && gd[q] != f[q] {
                gd[q] = max(gp, f[q]);
                fifo.push_back(q);
            }
        });
    }
    Ok(g)
}

/// h-minima filter: reconstruction by erosion of `f + h` over `f`. Fills every
/// valley whose depth does not exceed `h`.
pub fn dynamic_filter<T: Level>(
    f: &Volume<T>,
    h: DynamicParameter<T>,
    c: Connectivity,
) -> Volume<T> {
    dynamic_filter_in(f, h, c, None).expect("dims agree by construction")
}

/// [`dynamic_filter`] restricted to `domain`.
pub fn dynamic_filter_in<T: Level>(
    f: &Volume<T>,
    h: DynamicParameter<T>,
    c: Connectivity,
    domain: Option<&BinaryVolume>,
) -> Result<Volume<T>> {
    if h.get() == T::ZERO {
        return Ok(f.clone());
    }
    let h = h.get();
    let raised = f.map(|v| v + h);
    geodesic_erode_in(&raised, f, c, domain)
}

/// Labels every regional minimum (maximal `c`-connected plateau with no
/// strictly lower neighbor) with a distinct label `1..=n`, in order of each
/// plateau's first voxel in scan order.
pub fn regional_minima<T: Sample>(f: &Volume<T>, c: Connectivity) -> LabelVolume {
    regional_minima_in(f, c, None).expect("dims agree by construction")
}

/// [`regional_minima`] restricted to `domain`; outside voxels get label 0 and
/// are not considered neighbors.
pub fn regional_minima_in<T: Sample>(
    f: &Volume<T>,
    c: Connectivity,
    domain: Option<&BinaryVolume>,
) -> Result<LabelVolume> {
    let dims = f.dims();
    if let Some(d) = domain {
        dims.ensure_same(&d.dims())?;
    }
    let nb = Neighborhood::new(dims, c);
    let data = f.data();
    let mut labels = LabelVolume::zeros(dims);
    let mut visited = vec![false; dims.len()];
    let mut plateau = Vec::new();
    let mut stack = Vec::new();
    let mut next = 0u32;

    for start in 0..dims.len() {
        if visited[start] || !in_domain(domain, start) {
            continue;
        }
        let level = data[start];
        let mut is_min = true;
        plateau.clear();
        stack.push(start);
        visited[start] = true;
        while let Some(p) = stack.pop() {
            plateau.push(p);
            nb.for_each(p, |q| {
                if !in_domain(domain, q) {
                    return;
                }
                let v = data[q];
                if v < level {
                    is_min = false;
                } else if v == level && !visited[q] {
                    visited[q] = true;
                    stack.push(q);
                }
            });
        }
        if is_min {
            next += 1;
            let out = labels.data_mut();
            for &p in &plateau {
                out[p] = next;
            }
        }
    }
    Ok(labels)
}
