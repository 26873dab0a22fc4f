//! Volume data model shared by every kernel.
//!
//! Voxels are stored in a flat buffer with x varying fastest, then y, then z.
//! Coordinates are `[x, y, z]` triples.

use std::fmt::Debug;

use crate::error::{Error, Result};

/// Voxel coordinate `[x, y, z]`.
pub type Coord = [usize; 3];

/// Extent of a volume in voxels.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Dims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl Dims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::pre(format!(
                "dimensions must be positive, got {nx}x{ny}x{nz}"
            )));
        }
        nx.checked_mul(ny)
            .and_then(|v| v.checked_mul(nz))
            .ok_or_else(|| Error::pre("voxel count overflows usize"))?;
        Ok(Dims { nx, ny, nz })
    }

    /// Cube of side `n`. Panics on zero.
    pub fn cube(n: usize) -> Self {
        Dims::new(n, n, n).expect("cube side must be positive")
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn slice_len(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        debug_assert!(x < self.nx && y < self.ny && z < self.nz);
        (z * self.ny + y) * self.nx + x
    }

    #[inline]
    pub fn coords(&self, i: usize) -> Coord {
        let x = i % self.nx;
        let r = i / self.nx;
        [x, r % self.ny, r / self.ny]
    }

    #[inline]
    pub fn contains(&self, p: Coord) -> bool {
        p[0] < self.nx && p[1] < self.ny && p[2] < self.nz
    }

    /// Extent along axis 0 (x), 1 (y) or 2 (z).
    #[inline]
    pub fn axis(&self, axis: usize) -> usize {
        match axis {
            0 => self.nx,
            1 => self.ny,
            2 => self.nz,
            _ => panic!("axis out of range: {axis}"),
        }
    }

    /// Linear stride of one step along `axis`.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        match axis {
            0 => 1,
            1 => self.nx,
            2 => self.nx * self.ny,
            _ => panic!("axis out of range: {axis}"),
        }
    }

    pub fn as_tuple(&self) -> (usize, usize, usize) {
        (self.nx, self.ny, self.nz)
    }

    pub(crate) fn ensure_same(&self, other: &Dims) -> Result<()> {
        if self != other {
            return Err(Error::DimensionMismatch {
                left: self.as_tuple(),
                right: other.as_tuple(),
            });
        }
        Ok(())
    }
}

/// Scalar types a [`Volume`] may hold.
pub trait Sample: Copy + PartialOrd + PartialEq + Send + Sync + Debug + 'static {
    fn to_f64(self) -> f64;
}

macro_rules! impl_sample {
    ($($t:ty),*) => {
        $(impl Sample for $t {
            #[inline]
            fn to_f64(self) -> f64 {
                self as f64
            }
        })*
    };
}
impl_sample!(u8, u16, u32, i32, f32, f64);

/// Dense scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct Volume<T> {
    dims: Dims,
    data: Vec<T>,
    voxel_size: Option<f64>,
}

/// 8-bit grey-level volume, the raw tomography input.
pub type GreyVolume = Volume<u8>;

/// 32-bit real field used for gradients, distances and their negations.
pub type WideVolume = Volume<f32>;

impl<T: Copy> Volume<T> {
    pub fn filled(dims: Dims, value: T) -> Self {
        Volume {
            dims,
            data: vec![value; dims.len()],
            voxel_size: None,
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<T>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::pre(format!(
                "buffer holds {} voxels, dims need {}",
                data.len(),
                dims.len()
            )));
        }
        Ok(Volume {
            dims,
            data,
            voxel_size: None,
        })
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.len());
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    data.push(f(x, y, z));
                }
            }
        }
        Volume {
            dims,
            data,
            voxel_size: None,
        }
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn voxel_size(&self) -> Option<f64> {
        self.voxel_size
    }

    pub fn with_voxel_size(mut self, size: Option<f64>) -> Self {
        self.voxel_size = size;
        self
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = self.dims.index(x, y, z);
        self.data[i] = v;
    }

    #[inline]
    pub fn at(&self, p: Coord) -> T {
        self.get(p[0], p[1], p[2])
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> Volume<U> {
        Volume {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
            voxel_size: self.voxel_size,
        }
    }
}

impl<T: Sample> Volume<T> {
    /// Smallest and largest stored value.
    pub fn min_max(&self) -> (T, T) {
        let mut lo = self.data[0];
        let mut hi = self.data[0];
        for &v in &self.data[1..] {
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        (lo, hi)
    }
}

/// Foreground/background mask, one bit per voxel.
#[derive(Clone, PartialEq, Eq)]
pub struct BinaryVolume {
    dims: Dims,
    words: Vec<u64>,
}

impl Debug for BinaryVolume {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BinaryVolume")
            .field("dims", &self.dims)
            .field("foreground", &self.count())
            .finish()
    }
}

impl BinaryVolume {
    pub fn empty(dims: Dims) -> Self {
        BinaryVolume {
            dims,
            words: vec![0; dims.len().div_ceil(64)],
        }
    }

    pub fn full(dims: Dims) -> Self {
        let mut v = Self::empty(dims);
        v.words.iter_mut().for_each(|w| *w = !0);
        v.clear_tail();
        v
    }

    pub fn from_fn(dims: Dims, mut f: impl FnMut(usize, usize, usize) -> bool) -> Self {
        let mut v = Self::empty(dims);
        let mut i = 0;
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    if f(x, y, z) {
                        v.words[i >> 6] |= 1 << (i & 63);
                    }
                    i += 1;
                }
            }
        }
        v
    }

    /// Builds a mask from one flag per voxel (non-zero is foreground).
    pub fn from_flags(dims: Dims, flags: &[u8]) -> Result<Self> {
        if flags.len() != dims.len() {
            return Err(Error::pre(format!(
                "buffer holds {} voxels, dims need {}",
                flags.len(),
                dims.len()
            )));
        }
        let mut v = Self::empty(dims);
        for (w, chunk) in v.words.iter_mut().zip(flags.chunks(64)) {
            let mut word = 0u64;
            for (b, &f) in chunk.iter().enumerate() {
                word |= ((f != 0) as u64) << b;
            }
            *w = word;
        }
        Ok(v)
    }

    /// One byte per voxel, 1 for foreground and 0 for background.
    pub fn to_flags(&self) -> Vec<u8> {
        let n = self.dims.len();
        let mut out = Vec::with_capacity(n);
        for (wi, &w) in self.words.iter().enumerate() {
            let bits = (n - wi * 64).min(64);
            for b in 0..bits {
                out.push(((w >> b) & 1) as u8);
            }
        }
        out
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.dims.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn get_index(&self, i: usize) -> bool {
        (self.words[i >> 6] >> (i & 63)) & 1 == 1
    }

    #[inline]
    pub fn set_index(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.dims.len());
        let bit = 1u64 << (i & 63);
        if v {
            self.words[i >> 6] |= bit;
        } else {
            self.words[i >> 6] &= !bit;
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> bool {
        self.get_index(self.dims.index(x, y, z))
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: bool) {
        let i = self.dims.index(x, y, z);
        self.set_index(i, v);
    }

    /// Number of foreground voxels.
    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn none(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Linear indices of the foreground voxels, ascending.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(wi, &w)| {
            let mut w = w;
            std::iter::from_fn(move || {
                if w == 0 {
                    return None;
                }
                let b = w.trailing_zeros() as usize;
                w &= w - 1;
                Some(wi * 64 + b)
            })
        })
    }

    pub fn complement(&self) -> Self {
        let mut out = self.clone();
        out.words.iter_mut().for_each(|w| *w = !*w);
        out.clear_tail();
        out
    }

    pub fn and(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, |a, b| a & b)
    }

    pub fn or(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, |a, b| a | b)
    }

    /// Set difference `self \ other`.
    pub fn and_not(&self, other: &Self) -> Result<Self> {
        self.zip_words(other, |a, b| a & !b)
    }

    pub fn is_subset_of(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self
                .words
                .iter()
                .zip(&other.words)
                .all(|(a, b)| a & !b == 0)
    }

    /// Number of voxels set in both masks.
    pub fn overlap_count(&self, other: &Self) -> Result<usize> {
        self.dims.ensure_same(&other.dims)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    fn zip_words(&self, other: &Self, f: impl Fn(u64, u64) -> u64) -> Result<Self> {
        self.dims.ensure_same(&other.dims)?;
        Ok(BinaryVolume {
            dims: self.dims,
            words: self
                .words
                .iter()
                .zip(&other.words)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    fn clear_tail(&mut self) {
        let n = self.dims.len();
        if !n.is_multiple_of(64) {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << (n % 64)) - 1;
            }
        }
    }
}

/// Non-negative integer labels; 0 means "no label".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabelVolume {
    dims: Dims,
    data: Vec<u32>,
}

impl LabelVolume {
    pub fn zeros(dims: Dims) -> Self {
        LabelVolume {
            dims,
            data: vec![0; dims.len()],
        }
    }

    pub fn from_vec(dims: Dims, data: Vec<u32>) -> Result<Self> {
        if data.len() != dims.len() {
            return Err(Error::pre(format!(
                "buffer holds {} voxels, dims need {}",
                data.len(),
                dims.len()
            )));
        }
        Ok(LabelVolume { dims, data })
    }

    #[inline]
    pub fn dims(&self) -> Dims {
        self.dims
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> u32 {
        self.data[self.dims.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: u32) {
        let i = self.dims.index(x, y, z);
        self.data[i] = v;
    }

    #[inline]
    pub fn data(&self) -> &[u32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [u32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.data
    }

    /// Highest label present (0 for an unlabeled volume).
    pub fn max_label(&self) -> u32 {
        self.data.iter().copied().max().unwrap_or(0)
    }

    /// Voxels carrying a non-zero label.
    pub fn nonzero(&self) -> BinaryVolume {
        let flags: Vec<u8> = self.data.iter().map(|&l| (l != 0) as u8).collect();
        BinaryVolume::from_flags(self.dims, &flags).expect("same dims")
    }

    /// Voxel count per label, indexed by label (entry 0 counts unlabeled voxels).
    pub fn histogram(&self) -> Vec<usize> {
        let mut h = vec![0usize; self.max_label() as usize + 1];
        for &l in &self.data {
            h[l as usize] += 1;
        }
        h
    }
}

/// Lattice neighbor schemes on the cubic grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum Connectivity {
    Six,
    Eighteen,
    #[default]
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: u32) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            18 => Ok(Connectivity::Eighteen),
            26 => Ok(Connectivity::TwentySix),
            _ => Err(Error::pre(format!(
                "connectivity must be 6, 18 or 26, got {n}"
            ))),
        }
    }

    pub fn count(self) -> usize {
        match self {
            Connectivity::Six => 6,
            Connectivity::Eighteen => 18,
            Connectivity::TwentySix => 26,
        }
    }

    /// Neighbor offsets `[dx, dy, dz]`, sorted by `(dz, dy, dx)`.
    pub fn offsets(self) -> Vec<[i32; 3]> {
        let max_nonzero = match self {
            Connectivity::Six => 1,
            Connectivity::Eighteen => 2,
            Connectivity::TwentySix => 3,
        };
        let mut out = Vec::with_capacity(self.count());
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1i32..=1 {
                    let nz = (dx != 0) as u32 + (dy != 0) as u32 + (dz != 0) as u32;
                    if nz >= 1 && nz <= max_nonzero {
                        out.push([dx, dy, dz]);
                    }
                }
            }
        }
        out
    }
}

/// How voxels outside the volume are valued by windowed operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BorderRule {
    OutsideBackground,
    OutsideForeground,
    ClampToEdge,
}

/// In-bounds lattice neighbors of `p`, in `(dz, dy, dx)` order.
pub fn neighbors(p: Coord, c: Connectivity, dims: Dims) -> Result<Vec<Coord>> {
    if !dims.contains(p) {
        return Err(Error::pre(format!(
            "voxel {p:?} outside volume {:?}",
            dims.as_tuple()
        )));
    }
    let mut out = Vec::with_capacity(c.count());
    for [dx, dy, dz] in c.offsets() {
        let q = [
            p[0] as i64 + dx as i64,
            p[1] as i64 + dy as i64,
            p[2] as i64 + dz as i64,
        ];
        if q.iter().all(|&v| v >= 0) {
            let q = [q[0] as usize, q[1] as usize, q[2] as usize];
            if dims.contains(q) {
                out.push(q);
            }
        }
    }
    Ok(out)
}

/// Precomputed neighbor offsets for fast iteration over linear indices.
#[derive(Clone, Debug)]
pub(crate) struct Neighborhood {
    dims: Dims,
    offsets: Vec<([i32; 3], isize)>,
}

impl Neighborhood {
    pub(crate) fn new(dims: Dims, c: Connectivity) -> Self {
        let sx = 1isize;
        let sy = dims.nx as isize;
        let sz = (dims.nx * dims.ny) as isize;
        let offsets = c
            .offsets()
            .into_iter()
            .map(|o| {
                (
                    o,
                    o[0] as isize * sx + o[1] as isize * sy + o[2] as isize * sz,
                )
            })
            .collect();
        Neighborhood { dims, offsets }
    }

    /// Calls `f` with the linear index of every in-bounds neighbor of voxel `i`,
    /// in `(dz, dy, dx)` order.
    #[inline]
    pub(crate) fn for_each(&self, i: usize, mut f: impl FnMut(usize)) {
        let [x, y, z] = self.dims.coords(i);
        let d = self.dims;
        if x > 0 && y > 0 && z > 0 && x + 1 < d.nx && y + 1 < d.ny && z + 1 < d.nz {
            for &(_, delta) in &self.offsets {
                f((i as isize + delta) as usize);
            }
            return;
        }
        for &([dx, dy, dz], delta) in &self.offsets {
            let qx = x as isize + dx as isize;
            let qy = y as isize + dy as isize;
            let qz = z as isize + dz as isize;
            if qx >= 0
                && qy >= 0
                && qz >= 0
                && (qx as usize) < d.nx
                && (qy as usize) < d.ny
                && (qz as usize) < d.nz
            {
                f((i as isize + delta) as usize);
            }
        }
    }

    /// Like [`Neighborhood::for_each`] but only visits neighbors that precede
    /// (`forward == true`) or follow `i` in scan order.
    #[inline]
    pub(crate) fn for_each_half(&self, i: usize, forward: bool, mut f: impl FnMut(usize)) {
        self.for_each(i, |q| {
            if (q < i) == forward {
                f(q)
            }
        });
    }
}
