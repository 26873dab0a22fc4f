//! Cubic-window median filter.
//!
//! Each row is swept with a 256-bin running histogram; the median is tracked
//! incrementally as planes of the window enter and leave.

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{BorderRule, Dims, GreyVolume};

/// Median of the `(2r+1)^3` window around every voxel.
///
/// Outside voxels are valued by `border`: clamped coordinates, 0 or 255.
pub fn median_filter(v: &GreyVolume, radius: usize, border: BorderRule) -> Result<GreyVolume> {
    let dims = v.dims();
    if radius == 0 {
        return Ok(v.clone());
    }
    let side = 2 * radius + 1;
    side.checked_pow(3)
        .filter(|&n| n <= u32::MAX as usize)
        .ok_or_else(|| Error::pre(format!("median radius {radius} too large")))?;

    let mut out = vec![0u8; dims.len()];
    let src = v.data();
    par::for_each_chunk_mut(&mut out, dims.slice_len(), |z, slice| {
        let mut hist = [0u32; 256];
        for y in 0..dims.ny {
            median_row(
                src,
                dims,
                radius,
                border,
                y,
                z,
                &mut hist,
                &mut slice[y * dims.nx..(y + 1) * dims.nx],
            );
        }
    });
    Ok(GreyVolume::from_vec(dims, out)?.with_voxel_size(v.voxel_size()))
}

#[inline]
fn sample(src: &[u8], d: Dims, border: BorderRule, x: isize, y: isize, z: isize) -> u8 {
    let inside = x >= 0
        && y >= 0
        && z >= 0
        && (x as usize) < d.nx
        && (y as usize) < d.ny
        && (z as usize) < d.nz;
    if inside {
        return src[d.index(x as usize, y as usize, z as usize)];
    }
    match border {
        BorderRule::OutsideBackground => 0,
        BorderRule::OutsideForeground => 255,
        BorderRule::ClampToEdge => {
            let cx = x.clamp(0, d.nx as isize - 1) as usize;
            let cy = y.clamp(0, d.ny as isize - 1) as usize;
            let cz = z.clamp(0, d.nz as isize - 1) as usize;
            src[d.index(cx, cy, cz)]
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn median_row(
    src: &[u8],
    d: Dims,
    radius: usize,
    border: BorderRule,
    y: usize,
    z: usize,
    hist: &mut [u32; 256],
    out: &mut [u8],
) {
    let r = radius as isize;
    let (y, z) = (y as isize, z as isize);
    hist.iter_mut().for_each(|h| *h = 0);

    let plane = |hist: &mut [u32; 256], x: isize, add: bool| {
        for dz in -r..=r {
            for dy in -r..=r {
                let v = sample(src, d, border, x, y + dy, z + dz) as usize;
                if add {
                    hist[v] += 1;
                } else {
                    hist[v] -= 1;
                }
            }
        }
    };

    for x in -r..=r {
        plane(hist, x, true);
    }
    let n = (2 * radius + 1).pow(3) as u32;
    let target = n / 2;
    // Median is the smallest m with count(<= m) > target; `below` = count(< m).
    let mut m = 0usize;
    let mut below = 0u32;
    while below + hist[m] <= target {
        below += hist[m];
        m += 1;
    }
    out[0] = m as u8;

    for x in 1..d.nx as isize {
        let leaving = x - r - 1;
        let entering = x + r;
        for dz in -r..=r {
            for dy in -r..=r {
                let v = sample(src, d, border, leaving, y + dy, z + dz) as usize;
                hist[v] -= 1;
                if v < m {
                    below -= 1;
                }
                let v = sample(src, d, border, entering, y + dy, z + dz) as usize;
                hist[v] += 1;
                if v < m {
                    below += 1;
                }
            }
        }
        while below > target {
            m -= 1;
            below -= hist[m];
        }
        while below + hist[m] <= target {
            below += hist[m];
            m += 1;
        }
        out[x as usize] = m as u8;
    }
}
