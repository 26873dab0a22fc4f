//! Binary mathematical morphology on 3D masks.
//!
//! The structuring element `B_k` is the `k`-fold Minkowski sum of a unit
//! neighborhood `B` (6-, 18- or 26-connected ball plus the origin), with
//! `B_0 = {origin}`. Cube elements are applied separably along each axis;
//! the other shapes by `k` iterations of the unit element.

use crate::error::Result;
use crate::par;
use crate::volume::{BinaryVolume, BorderRule, Connectivity, Dims};

/// `B_k` built from a unit neighborhood.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StructuringElement {
    base: Connectivity,
    k: usize,
}

impl StructuringElement {
    pub fn new(base: Connectivity, k: usize) -> Self {
        StructuringElement { base, k }
    }

    /// `(2k+1)^3` cube, the 26-connected element iterated `k` times.
    pub fn cube(k: usize) -> Self {
        Self::new(Connectivity::TwentySix, k)
    }

    pub fn identity() -> Self {
        Self::new(Connectivity::TwentySix, 0)
    }

    pub fn base(&self) -> Connectivity {
        self.base
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn is_identity(&self) -> bool {
        self.k == 0
    }

    /// Explicit offset set of `B_k`, sorted by `(dz, dy, dx)`.
    pub fn offsets(&self) -> Vec<[i32; 3]> {
        let mut unit = self.base.offsets();
        unit.push([0, 0, 0]);
        let mut set = vec![[0, 0, 0]];
        for _ in 0..self.k {
            let mut next: Vec<[i32; 3]> = set
                .iter()
                .flat_map(|a| {
                    unit.iter()
                        .map(move |b| [a[0] + b[0], a[1] + b[1], a[2] + b[2]])
                })
                .collect();
            next.sort_by_key(|o| (o[2], o[1], o[0]));
            next.dedup();
            set = next;
        }
        set
    }
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::cube(1)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Op {
    Erode,
    Dilate,
}

/// `A ⊖ B_k = {z | (B_k)_z ⊂ A}`; outside voxels are valued by `border`.
pub fn erode(a: &BinaryVolume, se: &StructuringElement, border: BorderRule) -> BinaryVolume {
    apply(a, se, border, Op::Erode)
}

/// `A ⊕ B_k = {z | (B_k)_z ∩ A ≠ ∅}`; outside voxels are valued by `border`.
pub fn dilate(a: &BinaryVolume, se: &StructuringElement, border: BorderRule) -> BinaryVolume {
    apply(a, se, border, Op::Dilate)
}

/// Erosion then dilation, both with `border`.
pub fn open(a: &BinaryVolume, se: &StructuringElement, border: BorderRule) -> BinaryVolume {
    dilate(&erode(a, se, border), se, border)
}

/// Dilation then erosion, both with `border`.
pub fn close(a: &BinaryVolume, se: &StructuringElement, border: BorderRule) -> BinaryVolume {
    erode(&dilate(a, se, border), se, border)
}

/// Opening with the default border rules: the erosion treats the outside as
/// foreground and the dilation as background, so faces are neither eaten
/// away nor grown from.
pub fn opening(a: &BinaryVolume, se: &StructuringElement) -> BinaryVolume {
    dilate(
        &erode(a, se, BorderRule::OutsideForeground),
        se,
        BorderRule::OutsideBackground,
    )
}

/// Closing with the same default border rules as [`opening`].
pub fn closing(a: &BinaryVolume, se: &StructuringElement) -> BinaryVolume {
    erode(
        &dilate(a, se, BorderRule::OutsideBackground),
        se,
        BorderRule::OutsideForeground,
    )
}

/// `(A ∘ B) • B`: removes islands, then fills holes (default border rules).
pub fn open_close_filter(a: &BinaryVolume, se: &StructuringElement) -> BinaryVolume {
    closing(&opening(a, se), se)
}

/// `∂A = A \ (A ⊖ B)`, eroding with the outside treated as foreground.
pub fn inner_boundary(a: &BinaryVolume, se: &StructuringElement) -> Result<BinaryVolume> {
    inner_boundary_with(a, se, BorderRule::OutsideForeground)
}

pub fn inner_boundary_with(
    a: &BinaryVolume,
    se: &StructuringElement,
    border: BorderRule,
) -> Result<BinaryVolume> {
    a.and_not(&erode(a, se, border))
}

fn apply(a: &BinaryVolume, se: &StructuringElement, border: BorderRule, op: Op) -> BinaryVolume {
    if se.is_identity() {
        return a.clone();
    }
    let dims = a.dims();
    let mut cur = a.to_flags();
    let mut tmp = vec![0u8; cur.len()];
    match se.base() {
        Connectivity::TwentySix => {
            for axis in 0..3 {
                line_pass(&cur, &mut tmp, dims, axis, se.k(), border, op);
                std::mem::swap(&mut cur, &mut tmp);
            }
        }
        base => {
            let offsets = base.offsets();
            for _ in 0..se.k() {
                unit_pass(&cur, &mut tmp, dims, &offsets, border, op);
                std::mem::swap(&mut cur, &mut tmp);
            }
        }
    }
    BinaryVolume::from_flags(dims, &cur).expect("same dims")
}

#[inline]
fn outside_value(src: &[u8], border: BorderRule, clamped: usize) -> u8 {
    match border {
        BorderRule::OutsideBackground => 0,
        BorderRule::OutsideForeground => 1,
        BorderRule::ClampToEdge => src[clamped],
    }
}

/// 1D window of radius `r` along `axis` (cube elements are separable).
fn line_pass(
    src: &[u8],
    dst: &mut [u8],
    d: Dims,
    axis: usize,
    r: usize,
    border: BorderRule,
    op: Op,
) {
    let n = d.axis(axis) as isize;
    let stride = d.stride(axis);
    let r = r as isize;
    par::for_each_chunk_mut(dst, d.slice_len(), |z, out| {
        let base = z * d.slice_len();
        for (j, o) in out.iter_mut().enumerate() {
            let i = base + j;
            let pos = d.coords(i)[axis] as isize;
            let line_start = i - pos as usize * stride;
            let mut acc = match op {
                Op::Erode => 1u8,
                Op::Dilate => 0u8,
            };
            for t in pos - r..=pos + r {
                let v = if t < 0 || t >= n {
                    let c = t.clamp(0, n - 1) as usize;
                    outside_value(src, border, line_start + c * stride)
                } else {
                    src[line_start + t as usize * stride]
                };
                match op {
                    Op::Erode => acc &= v,
                    Op::Dilate => acc |= v,
                }
            }
            *o = acc;
        }
    });
}

/// One application of the unit element given by `offsets` plus the origin.
fn unit_pass(
    src: &[u8],
    dst: &mut [u8],
    d: Dims,
    offsets: &[[i32; 3]],
    border: BorderRule,
    op: Op,
) {
    par::for_each_chunk_mut(dst, d.slice_len(), |z, out| {
        let base = z * d.slice_len();
        for (j, o) in out.iter_mut().enumerate() {
            let i = base + j;
            let [x, y, z] = d.coords(i);
            let mut acc = src[i];
            for off in offsets {
                let q = [
                    x as i64 + off[0] as i64,
                    y as i64 + off[1] as i64,
                    z as i64 + off[2] as i64,
                ];
                let inside = q[0] >= 0
                    && q[1] >= 0
                    && q[2] >= 0
                    && (q[0] as usize) < d.nx
                    && (q[1] as usize) < d.ny
                    && (q[2] as usize) < d.nz;
                let v = if inside {
                    src[d.index(q[0] as usize, q[1] as usize, q[2] as usize)]
                } else {
                    let c = d.index(
                        q[0].clamp(0, d.nx as i64 - 1) as usize,
                        q[1].clamp(0, d.ny as i64 - 1) as usize,
                        q[2].clamp(0, d.nz as i64 - 1) as usize,
                    );
                    outside_value(src, border, c)
                };
                match op {
                    Op::Erode => acc &= v,
                    Op::Dilate => acc |= v,
                }
            }
            *o = acc;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(bits: &[u8]) -> BinaryVolume {
        BinaryVolume::from_flags(Dims::new(bits.len(), 1, 1).unwrap(), bits).unwrap()
    }

    fn cube_in(n: usize, lo: usize, hi: usize) -> BinaryVolume {
        BinaryVolume::from_fn(Dims::cube(n), |x, y, z| {
            (lo..=hi).contains(&x) && (lo..=hi).contains(&y) && (lo..=hi).contains(&z)
        })
    }

    #[test]
    fn element_offsets() {
        assert_eq!(StructuringElement::identity().offsets(), vec![[0, 0, 0]]);
        assert_eq!(StructuringElement::cube(1).offsets().len(), 27);
        assert_eq!(StructuringElement::cube(2).offsets().len(), 125);
        assert_eq!(
            StructuringElement::new(Connectivity::Six, 1)
                .offsets()
                .len(),
            7
        );
        // 6-connected B_2 is the L1 ball of radius 2: 1 + 6 + 18 = 25 voxels.
        assert_eq!(
            StructuringElement::new(Connectivity::Six, 2)
                .offsets()
                .len(),
            25
        );
        for se in [
            StructuringElement::new(Connectivity::Eighteen, 2),
            StructuringElement::cube(3),
        ] {
            let offs = se.offsets();
            for o in &offs {
                assert!(offs.contains(&[-o[0], -o[1], -o[2]]));
            }
        }
    }

    #[test]
    fn erode_full_volume_with_foreground_border() {
        let a = BinaryVolume::full(Dims::cube(5));
        assert_eq!(
            erode(
                &a,
                &StructuringElement::cube(1),
                BorderRule::OutsideForeground
            ),
            a
        );
    }

    #[test]
    fn erode_row_by_line() {
        // [0,1,1,1,0] eroded by a 3-wide line keeps only the middle voxel; the
        // volume is a single row, so the transverse outside must not erode.
        let a = row(&[0, 1, 1, 1, 0]);
        let e = erode(
            &a,
            &StructuringElement::cube(1),
            BorderRule::OutsideForeground,
        );
        assert_eq!(e.to_flags(), vec![0, 0, 1, 0, 0]);
    }

    #[test]
    fn erode_cube_leaves_center() {
        let a = cube_in(5, 1, 3);
        let e = erode(
            &a,
            &StructuringElement::cube(1),
            BorderRule::OutsideBackground,
        );
        assert_eq!(e.count(), 1);
        assert!(e.get(2, 2, 2));
    }

    #[test]
    fn dilate_single_voxel_six() {
        let mut a = BinaryVolume::empty(Dims::cube(5));
        a.set(2, 2, 2, true);
        let d = dilate(
            &a,
            &StructuringElement::new(Connectivity::Six, 1),
            BorderRule::OutsideBackground,
        );
        assert_eq!(d.count(), 7);
        for [x, y, z] in [
            [2, 2, 2],
            [1, 2, 2],
            [3, 2, 2],
            [2, 1, 2],
            [2, 3, 2],
            [2, 2, 1],
            [2, 2, 3],
        ] {
            assert!(d.get(x, y, z));
        }
        let empty = BinaryVolume::empty(Dims::cube(5));
        assert!(dilate(
            &empty,
            &StructuringElement::cube(2),
            BorderRule::OutsideBackground
        )
        .none());
    }

    #[test]
    fn open_removes_isolated_voxel_keeps_cluster() {
        let d = Dims::cube(12);
        let mut a = BinaryVolume::from_fn(d, |x, y, z| {
            (1..=5).contains(&x) && (1..=5).contains(&y) && (1..=5).contains(&z)
        });
        a.set(9, 9, 9, true);
        let o = open(
            &a,
            &StructuringElement::cube(1),
            BorderRule::OutsideBackground,
        );
        assert!(!o.get(9, 9, 9));
        assert_eq!(o.count(), 125);
    }

    #[test]
    fn close_fills_single_hole() {
        let mut a = cube_in(9, 2, 6);
        a.set(4, 4, 4, false);
        assert_eq!(closing(&a, &StructuringElement::cube(1)), cube_in(9, 2, 6));
        let c = close(
            &a,
            &StructuringElement::cube(1),
            BorderRule::OutsideBackground,
        );
        assert_eq!(c, cube_in(9, 2, 6));
    }

    #[test]
    fn filter_removes_island_and_fills_hole() {
        let d = Dims::cube(14);
        let clean = BinaryVolume::from_fn(d, |x, y, z| {
            (2..=8).contains(&x) && (2..=8).contains(&y) && (2..=8).contains(&z)
        });
        let mut noisy = clean.clone();
        noisy.set(5, 5, 5, false);
        noisy.set(12, 12, 12, true);
        let f = open_close_filter(&noisy, &StructuringElement::cube(1));
        assert_eq!(f, clean);
        let empty = BinaryVolume::empty(d);
        assert_eq!(
            open_close_filter(&empty, &StructuringElement::cube(1)),
            empty
        );
    }

    #[test]
    fn filter_keeps_smooth_sphere_interior() {
        let d = Dims::cube(17);
        let ball = BinaryVolume::from_fn(d, |x, y, z| {
            let (dx, dy, dz) = (x as f64 - 8.0, y as f64 - 8.0, z as f64 - 8.0);
            dx * dx + dy * dy + dz * dz <= 25.0
        });
        let se = StructuringElement::cube(1);
        let f = open_close_filter(&ball, &se);
        let direct = closing(&opening(&ball, &se), &se);
        assert_eq!(f, direct);
        // Differences are confined to the one-voxel shell of the sphere.
        let shell = inner_boundary(&ball, &se).unwrap();
        let interior = ball.and_not(&shell).unwrap();
        assert!(interior.is_subset_of(&f));
        let outside_ring = dilate(&ball, &se, BorderRule::OutsideBackground);
        assert!(f.is_subset_of(&outside_ring));
    }

    #[test]
    fn inner_boundary_cases() {
        let se = StructuringElement::cube(1);
        let full = BinaryVolume::full(Dims::cube(4));
        assert!(inner_boundary(&full, &se).unwrap().none());
        let empty = BinaryVolume::empty(Dims::cube(4));
        assert!(inner_boundary(&empty, &se).unwrap().none());
        let cube = cube_in(5, 1, 3);
        let b = inner_boundary(&cube, &se).unwrap();
        assert_eq!(b.count(), 26);
        assert!(!b.get(2, 2, 2));
    }

    #[test]
    fn k_zero_is_identity() {
        let a = cube_in(6, 1, 3);
        let id = StructuringElement::identity();
        for border in [BorderRule::OutsideBackground, BorderRule::OutsideForeground] {
            assert_eq!(open(&a, &id, border), a);
            assert_eq!(close(&a, &id, border), a);
        }
        assert_eq!(open_close_filter(&a, &id), a);
    }
}
