//! Chord-length distributions, two-point correlation functions and the L2
//! distance between descriptor curves.
//!
//! Both descriptors scan every axis-aligned voxel line along the requested
//! axes and accumulate exact integer counts, so results do not depend on the
//! order in which lines are processed.
//!
//! Two-point pairs wrap around periodically along each line: every voxel is
//! paired with the voxel `r` further along, modulo the line length. With that
//! pairing both voxels of a pair range over the whole volume, so `S2(0) = φ`
//! and the complement relation `S2_b(r) = S2_g(r) − 2φ + 1` hold exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{BinaryVolume, Dims};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DescriptorKind {
    Chord,
    TwoPoint,
}

impl DescriptorKind {
    pub fn name(self) -> &'static str {
        match self {
            DescriptorKind::Chord => "chord",
            DescriptorKind::TwoPoint => "two-point",
        }
    }
}

/// Which phase of the binary volume is measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Phase {
    Grain,
    Background,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Grain => "grain",
            Phase::Background => "background",
        }
    }
}

/// Subset of the x, y, z axes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Axes([bool; 3]);

impl Axes {
    pub fn all() -> Self {
        Axes([true; 3])
    }

    pub fn single(axis: usize) -> Self {
        let mut a = [false; 3];
        a[axis] = true;
        Axes(a)
    }

    /// Parses a string of axis letters such as `"xz"`.
    pub fn parse(s: &str) -> Result<Self> {
        let mut a = [false; 3];
        for ch in s.chars() {
            match ch.to_ascii_lowercase() {
                'x' => a[0] = true,
                'y' => a[1] = true,
                'z' => a[2] = true,
                _ => return Err(Error::pre(format!("unknown axis `{ch}` in `{s}`"))),
            }
        }
        if a == [false; 3] {
            return Err(Error::pre("no axis selected"));
        }
        Ok(Axes(a))
    }

    pub fn contains(&self, axis: usize) -> bool {
        self.0[axis]
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        (0..3).filter(|&k| self.0[k])
    }

    pub fn label(&self) -> String {
        self.iter().map(|k| ['x', 'y', 'z'][k]).collect()
    }
}

/// A measured descriptor: `values[i]` at lag `r_values[i]`, backed by the
/// integer `counts[i]` out of `totals[i]` samples.
#[derive(Clone, Debug, PartialEq)]
pub struct DescriptorCurve {
    pub kind: DescriptorKind,
    pub phase: Phase,
    pub r_values: Vec<usize>,
    pub values: Vec<f64>,
    pub counts: Vec<u64>,
    pub totals: Vec<u64>,
}

impl DescriptorCurve {
    /// Number of chords measured, or voxel pairs per lag.
    pub fn sample_count(&self) -> u64 {
        self.totals.first().copied().unwrap_or(0)
    }

    /// CSV with header `r,value,sample_count`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("r,value,sample_count\n");
        for i in 0..self.r_values.len() {
            s.push_str(&format!(
                "{},{},{}\n",
                self.r_values[i], self.values[i], self.counts[i]
            ));
        }
        s
    }
}

/// Half the smallest dimension, at least 1.
pub fn default_r_max(d: Dims) -> usize {
    (d.nx.min(d.ny).min(d.nz) / 2).max(1)
}

/// Extracts the phase indicator of a voxel line into packed bits.
fn gather(a: &BinaryVolume, start: usize, stride: usize, n: usize, phase: Phase) -> Vec<u64> {
    let mut bits = vec![0u64; n.div_ceil(64)];
    let want = phase == Phase::Grain;
    for t in 0..n {
        if a.get_index(start + t * stride) == want {
            bits[t / 64] |= 1 << (t % 64);
        }
    }
    bits
}

/// Calls `f(start)` for every line along `axis`, grouped into independent
/// chunks whose partial results are summed in order.
fn reduce_lines<F>(d: Dims, axis: usize, width: usize, f: F) -> Vec<u64>
where
    F: Fn(usize, &mut [u64]) + Sync + Send,
{
    let (nx, ny, nz) = d.as_tuple();
    // Chunk by the outermost axis that is not the line axis.
    let (chunks, inner): (usize, Box<dyn Fn(usize) -> Vec<usize> + Sync + Send>) = match axis {
        0 => (
            nz,
            Box::new(move |z| (0..ny).map(|y| d.index(0, y, z)).collect()),
        ),
        1 => (
            nz,
            Box::new(move |z| (0..nx).map(|x| d.index(x, 0, z)).collect()),
        ),
        _ => (
            ny,
            Box::new(move |y| (0..nx).map(|x| d.index(x, y, 0)).collect()),
        ),
    };
    let partial = par::map_range(chunks, |c| {
        let mut acc = vec![0u64; width];
        for start in inner(c) {
            f(start, &mut acc);
        }
        acc
    });
    let mut total = vec![0u64; width];
    for p in partial {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Histogram of interior chord lengths `1..=r_max` along the given axes.
/// Runs touching a volume face are discarded; chords longer than `r_max` are
/// not counted.
pub fn chord_length_distribution(
    a: &BinaryVolume,
    phase: Phase,
    axes: Axes,
    r_max: usize,
) -> Result<DescriptorCurve> {
    if r_max == 0 {
        return Err(Error::pre("r_max must be at least 1"));
    }
    let d = a.dims();
    let mut hist = vec![0u64; r_max + 1];
    for axis in axes.iter() {
        let n = d.axis(axis);
        let stride = d.stride(axis);
        let part = reduce_lines(d, axis, r_max + 1, |start, acc| {
            let bits = gather(a, start, stride, n, phase);
            let on = |t: usize| bits[t / 64] >> (t % 64) & 1 == 1;
            let mut t = 0;
            while t < n {
                if !on(t) {
                    t += 1;
                    continue;
                }
                let begin = t;
                while t < n && on(t) {
                    t += 1;
                }
                let len = t - begin;
                if begin > 0 && t < n && len <= r_max {
                    acc[len] += 1;
                }
            }
        });
        for (h, p) in hist.iter_mut().zip(part) {
            *h += p;
        }
    }
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::NoChords);
    }
    Ok(chord_curve(phase, &hist[1..], total))
}

fn chord_curve(phase: Phase, hist: &[u64], total: u64) -> DescriptorCurve {
    DescriptorCurve {
        kind: DescriptorKind::Chord,
        phase,
        r_values: (1..=hist.len()).collect(),
        values: hist.iter().map(|&c| c as f64 / total as f64).collect(),
        counts: hist.to_vec(),
        totals: vec![total; hist.len()],
    }
}

/// Chord lengths along `lines` random straight lines (seeded), sampled at
/// unit steps and binned to the nearest integer length. Meant for isotropy
/// studies; the axis-aligned version is the deterministic reference.
pub fn chord_length_distribution_random(
    a: &BinaryVolume,
    phase: Phase,
    lines: usize,
    seed: u64,
    r_max: usize,
) -> Result<DescriptorCurve> {
    if r_max == 0 {
        return Err(Error::pre("r_max must be at least 1"));
    }
    let d = a.dims();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = vec![0u64; r_max + 1];
    let want = phase == Phase::Grain;
    let bounds = [d.nx as f64, d.ny as f64, d.nz as f64];
    for _ in 0..lines {
        let dir = loop {
            let v: [f64; 3] = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            let n2: f64 = v.iter().map(|c| c * c).sum();
            if n2 > 1e-6 && n2 <= 1.0 {
                let n = n2.sqrt();
                break v.map(|c| c / n);
            }
        };
        let p0: [f64; 3] = [0, 1, 2].map(|k| rng.gen_range(0.0..bounds[k]));
        // Step back to the entry point, then walk forward in unit steps.
        let inside = |p: [f64; 3]| (0..3).all(|k| p[k] >= 0.0 && p[k] < bounds[k]);
        let mut t0 = 0.0;
        while inside([0, 1, 2].map(|k| p0[k] - (t0 + 1.0) * dir[k])) {
            t0 += 1.0;
        }
        let mut samples = Vec::new();
        let mut t = -t0;
        loop {
            let p = [0, 1, 2].map(|k| p0[k] + t * dir[k]);
            if !inside(p) {
                break;
            }
            samples.push(a.get(p[0] as usize, p[1] as usize, p[2] as usize) == want);
            t += 1.0;
        }
        let n = samples.len();
        let mut i = 0;
        while i < n {
            if !samples[i] {
                i += 1;
                continue;
            }
            let begin = i;
            while i < n && samples[i] {
                i += 1;
            }
            let len = i - begin;
            if begin > 0 && i < n && len <= r_max {
                hist[len] += 1;
            }
        }
    }
    let total: u64 = hist.iter().sum();
    if total == 0 {
        return Err(Error::NoChords);
    }
    Ok(chord_curve(phase, &hist[1..], total))
}

/// Probability that two voxels `r` apart along an axis (periodic pairing)
/// both belong to the phase, for `r = 0..=r_max`.
pub fn two_point_correlation(
    a: &BinaryVolume,
    phase: Phase,
    axes: Axes,
    r_max: usize,
) -> Result<DescriptorCurve> {
    let d = a.dims();
    if let Some(k) = axes.iter().find(|&k| r_max >= d.axis(k)) {
        return Err(Error::pre(format!(
            "r_max {r_max} must be below the {} extent {}",
            ['x', 'y', 'z'][k],
            d.axis(k)
        )));
    }
    let mut counts = vec![0u64; r_max + 1];
    let mut pairs = 0u64;
    for axis in axes.iter() {
        let n = d.axis(axis);
        let stride = d.stride(axis);
        pairs += d.len() as u64;
        let part = reduce_lines(d, axis, r_max + 1, |start, acc| {
            let bits = gather(a, start, stride, n, phase);
            let doubled = double(&bits, n);
            let words = bits.len();
            let tail = if n.is_multiple_of(64) {
                u64::MAX
            } else {
                (1u64 << (n % 64)) - 1
            };
            for (r, slot) in acc.iter_mut().enumerate() {
                let mut c = 0u64;
                for (k, &w) in bits.iter().enumerate() {
                    let mut shifted = window(&doubled, 64 * k + r);
                    if k + 1 == words {
                        shifted &= tail;
                    }
                    c += (w & shifted).count_ones() as u64;
                }
                *slot += c;
            }
        });
        for (t, p) in counts.iter_mut().zip(part) {
            *t += p;
        }
    }
    Ok(DescriptorCurve {
        kind: DescriptorKind::TwoPoint,
        phase,
        r_values: (0..=r_max).collect(),
        values: counts.iter().map(|&c| c as f64 / pairs as f64).collect(),
        counts,
        totals: vec![pairs; r_max + 1],
    })
}

/// The line repeated twice (`2n` bits), plus a spare zero word.
fn double(bits: &[u64], n: usize) -> Vec<u64> {
    let mut out = vec![0u64; (2 * n).div_ceil(64) + 1];
    for half in 0..2 {
        for t in 0..n {
            if bits[t / 64] >> (t % 64) & 1 == 1 {
                let u = t + half * n;
                out[u / 64] |= 1 << (u % 64);
            }
        }
    }
    out
}

/// 64 bits starting at bit `offset`.
#[inline]
fn window(bits: &[u64], offset: usize) -> u64 {
    let (w, s) = (offset / 64, offset % 64);
    let lo = bits[w] >> s;
    if s == 0 {
        lo
    } else {
        lo | bits.get(w + 1).copied().unwrap_or(0) << (64 - s)
    }
}

/// Euclidean norm of the pointwise difference of two curves on the same grid.
pub fn curve_distance(c1: &DescriptorCurve, c2: &DescriptorCurve) -> Result<f64> {
    if c1.kind != c2.kind {
        return Err(Error::CurveMismatch(format!(
            "{} vs {}",
            c1.kind.name(),
            c2.kind.name()
        )));
    }
    if c1.r_values != c2.r_values {
        return Err(Error::CurveMismatch("different lag grids".into()));
    }
    Ok(c1
        .values
        .iter()
        .zip(&c2.values)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(flags: &[u8]) -> BinaryVolume {
        BinaryVolume::from_flags(Dims::new(flags.len(), 1, 1).unwrap(), flags).unwrap()
    }

    #[test]
    fn chord_row_example() {
        let c =
            chord_length_distribution(&row(&[0, 1, 1, 0, 1, 0]), Phase::Grain, Axes::single(0), 3)
                .unwrap();
        assert_eq!(c.values, vec![0.5, 0.5, 0.0]);
        assert_eq!(c.sample_count(), 2);
    }

    #[test]
    fn chord_all_foreground_has_no_chords() {
        let a = BinaryVolume::full(Dims::cube(4));
        assert!(matches!(
            chord_length_distribution(&a, Phase::Grain, Axes::all(), 2),
            Err(Error::NoChords)
        ));
    }

    #[test]
    fn chord_stripes_give_a_spike() {
        let d = Dims::new(40, 3, 2).unwrap();
        let a = BinaryVolume::from_fn(d, |x, _, _| (x / 4) % 2 == 1);
        let c = chord_length_distribution(&a, Phase::Grain, Axes::single(0), 10).unwrap();
        assert_eq!(c.values[3], 1.0);
        assert_eq!(c.values.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn two_point_alternating_row() {
        let flags: Vec<u8> = (0..10).map(|i| (i % 2 == 0) as u8).collect();
        let c = two_point_correlation(&row(&flags), Phase::Grain, Axes::single(0), 3).unwrap();
        assert_eq!(c.values, vec![0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn two_point_long_lines_cross_word_boundaries() {
        let d = Dims::new(150, 2, 1).unwrap();
        let a = BinaryVolume::from_fn(d, |x, y, _| (x * 31 + y * 7) % 5 < 2);
        let c = two_point_correlation(&a, Phase::Grain, Axes::single(0), 140).unwrap();
        for r in 0..=140 {
            let mut n = 0;
            for y in 0..2 {
                for x in 0..150 {
                    n += (a.get(x, y, 0) && a.get((x + r) % 150, y, 0)) as u64;
                }
            }
            assert_eq!(c.counts[r], n, "lag {r}");
        }
    }

    #[test]
    fn two_point_r_max_checked() {
        assert!(two_point_correlation(&row(&[1, 0, 1]), Phase::Grain, Axes::single(0), 3).is_err());
    }

    #[test]
    fn distance_examples() {
        let mk = |v: Vec<f64>| DescriptorCurve {
            kind: DescriptorKind::TwoPoint,
            phase: Phase::Grain,
            r_values: (0..v.len()).collect(),
            counts: vec![0; v.len()],
            totals: vec![1; v.len()],
            values: v,
        };
        let a = mk(vec![0.5, 0.2, 0.1, 0.0]);
        assert_eq!(curve_distance(&a, &a).unwrap(), 0.0);
        let b = mk(vec![0.5, 0.5, 0.1, 0.0]);
        assert!((curve_distance(&a, &b).unwrap() - 0.3).abs() < 1e-15);
        let c = mk(vec![0.1, 0.2, 0.4, 0.4]);
        let want = (0.16f64 + 0.0 + 0.09 + 0.16).sqrt();
        assert!((curve_distance(&a, &c).unwrap() - want).abs() < 1e-15);
        let mut other = a.clone();
        other.kind = DescriptorKind::Chord;
        assert!(curve_distance(&a, &other).is_err());
        assert!(curve_distance(&a, &mk(vec![0.5])).is_err());
    }

    #[test]
    fn random_lines_are_seeded() {
        let d = Dims::cube(20);
        let a = BinaryVolume::from_fn(d, |x, y, z| (x / 3 + y / 4 + z / 5) % 2 == 0);
        let c1 = chord_length_distribution_random(&a, Phase::Grain, 200, 7, 15).unwrap();
        let c2 = chord_length_distribution_random(&a, Phase::Grain, 200, 7, 15).unwrap();
        assert_eq!(c1, c2);
        assert!((c1.values.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn axes_parsing() {
        assert_eq!(Axes::parse("zx").unwrap().label(), "xz");
        assert!(Axes::parse("").is_err());
        assert!(Axes::parse("w").is_err());
    }
}
