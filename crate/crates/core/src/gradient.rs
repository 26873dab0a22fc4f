//! Deriche recursive gradient and topography quantization.
//!
//! Each directional response is the derivative filter along its axis composed
//! with the smoothing filter along the two other axes. Both filters are the
//! second-order causal + anti-causal recursions parameterized by `alpha`, with
//! edge replication at the volume faces. The smoothing filter has unit DC gain
//! and the derivative filter returns 1 on a unit-slope ramp.
//!
//! The z-axis recursion is evaluated slice by slice: a descending pre-pass
//! stores the anti-causal state every `K ≈ sqrt(2 nz)` slices, and each block
//! is then recomputed from its checkpoint. Working memory stays at a few dozen
//! slices on top of the output, and the values are bit-identical to a plain
//! two-pass evaluation because the same operations run in the same order.

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{Dims, GreyVolume, WideVolume};

/// Smoothing scale of the Deriche operator (larger alpha = less smoothing).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DericheParams {
    alpha: f64,
}

impl DericheParams {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::pre(format!(
                "Deriche alpha must be > 0, got {alpha}"
            )));
        }
        Ok(DericheParams { alpha })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

impl Default for DericheParams {
    fn default() -> Self {
        DericheParams { alpha: 1.0 }
    }
}

/// `y+[n] = a1 x[n] + a2 x[n-1] + b1 y+[n-1] + b2 y+[n-2]`
/// `y-[n] = a3 x[n+1] + a4 x[n+2] + b1 y-[n+1] + b2 y-[n+2]`
#[derive(Clone, Copy, Debug)]
struct Recursive {
    a1: f64,
    a2: f64,
    a3: f64,
    a4: f64,
    b1: f64,
    b2: f64,
}

impl Recursive {
    fn raw(a: [f64; 4], alpha: f64) -> Self {
        let e = (-alpha).exp();
        Recursive {
            a1: a[0],
            a2: a[1],
            a3: a[2],
            a4: a[3],
            b1: 2.0 * e,
            b2: -e * e,
        }
    }

    fn scaled(self, s: f64) -> Self {
        Recursive {
            a1: self.a1 * s,
            a2: self.a2 * s,
            a3: self.a3 * s,
            a4: self.a4 * s,
            ..self
        }
    }

    fn denom(&self) -> f64 {
        1.0 - self.b1 - self.b2
    }

    /// Steady-state output of the causal half for a constant unit input.
    fn gain_causal(&self) -> f64 {
        (self.a1 + self.a2) / self.denom()
    }

    fn gain_anti(&self) -> f64 {
        (self.a3 + self.a4) / self.denom()
    }

    fn smoothing(alpha: f64) -> Self {
        let e = (-alpha).exp();
        let r = Self::raw([1.0, e * (alpha - 1.0), e * (alpha + 1.0), -e * e], alpha);
        r.scaled(1.0 / (r.gain_causal() + r.gain_anti()))
    }

    fn derivative(alpha: f64) -> Self {
        let r = Self::raw([0.0, 1.0, -1.0, 0.0], alpha);
        // Response to x[n] = n is  H-'(1) - H+'(1)  (derivatives of the two
        // halves' transfer functions in their delay variable, at 1).
        let q = r.denom();
        let dq = -r.b1 - 2.0 * r.b2;
        let d_causal = (r.a2 * q - (r.a1 + r.a2) * dq) / (q * q);
        let d_anti = ((r.a3 + 2.0 * r.a4) * q - (r.a3 + r.a4) * dq) / (q * q);
        r.scaled(1.0 / (d_anti - d_causal))
    }

    /// Filters one line into `out` (same length as `x`).
    fn line(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let first = x[0];
        let (mut xm1, mut ym1, mut ym2) = (
            first,
            first * self.gain_causal(),
            first * self.gain_causal(),
        );
        for i in 0..n {
            let y = self.a1 * x[i] + self.a2 * xm1 + self.b1 * ym1 + self.b2 * ym2;
            out[i] = y;
            xm1 = x[i];
            ym2 = ym1;
            ym1 = y;
        }
        let last = x[n - 1];
        let ga = last * self.gain_anti();
        let (mut xp1, mut xp2, mut yp1, mut yp2) = (last, last, ga, ga);
        for i in (0..n).rev() {
            let y = self.a3 * xp1 + self.a4 * xp2 + self.b1 * yp1 + self.b2 * yp2;
            out[i] += y;
            xp2 = xp1;
            xp1 = x[i];
            yp2 = yp1;
            yp1 = y;
        }
    }
}

/// Filters every row (x direction) of an `nx * ny` slice.
fn pass_x(f: &Recursive, src: &[f64], dst: &mut [f64], nx: usize) {
    par::for_each_chunk_mut(dst, nx, |y, row| {
        f.line(&src[y * nx..(y + 1) * nx], row);
    });
}

/// Filters every column (y direction) of an `nx * ny` slice, row-vectorized.
fn pass_y(f: &Recursive, src: &[f64], dst: &mut [f64], nx: usize, ny: usize) {
    let row = |y: usize| &src[y * nx..(y + 1) * nx];
    let gc = f.gain_causal();
    let mut ym1: Vec<f64> = row(0).iter().map(|v| v * gc).collect();
    let mut ym2 = ym1.clone();
    for y in 0..ny {
        let cur = row(y);
        let prev = row(y.saturating_sub(1));
        let out = &mut dst[y * nx..(y + 1) * nx];
        for i in 0..nx {
            let v = f.a1 * cur[i] + f.a2 * prev[i] + f.b1 * ym1[i] + f.b2 * ym2[i];
            out[i] = v;
            ym2[i] = ym1[i];
            ym1[i] = v;
        }
    }
    let ga = f.gain_anti();
    let mut yp1: Vec<f64> = row(ny - 1).iter().map(|v| v * ga).collect();
    let mut yp2 = yp1.clone();
    for y in (0..ny).rev() {
        let p1 = row((y + 1).min(ny - 1));
        let p2 = row((y + 2).min(ny - 1));
        let out = &mut dst[y * nx..(y + 1) * nx];
        for i in 0..nx {
            let v = f.a3 * p1[i] + f.a4 * p2[i] + f.b1 * yp1[i] + f.b2 * yp2[i];
            out[i] += v;
            yp2[i] = yp1[i];
            yp1[i] = v;
        }
    }
}

/// Streams the z-filtered volume to `consume(z, slice)` in ascending z.
fn for_each_z_filtered(v: &GreyVolume, f: &Recursive, mut consume: impl FnMut(usize, &[f64])) {
    let d = v.dims();
    let s = d.slice_len();
    let nz = d.nz;
    let src = v.data();
    let input = |z: usize| &src[z.min(nz - 1) * s..(z.min(nz - 1) + 1) * s];
    let block = ((2.0 * nz as f64).sqrt().ceil() as usize).clamp(1, nz);
    let nblocks = nz.div_ceil(block);

    // Descending pre-pass: anti-causal state entering each block from above.
    let ga = f.gain_anti();
    let mut yp1: Vec<f64> = input(nz - 1).iter().map(|&v| v as f64 * ga).collect();
    let mut yp2 = yp1.clone();
    let mut checkpoints: Vec<Option<(Vec<f64>, Vec<f64>)>> = vec![None; nblocks];
    for z in (0..nz).rev() {
        if (z + 1) % block == 0 || z + 1 == nz {
            checkpoints[z / block] = Some((yp1.clone(), yp2.clone()));
        }
        anti_step(f, input(z + 1), input(z + 2), &mut yp1, &mut yp2);
    }
    drop(yp1);
    drop(yp2);

    let gc = f.gain_causal();
    let mut ym1: Vec<f64> = input(0).iter().map(|&v| v as f64 * gc).collect();
    let mut ym2 = ym1.clone();
    let mut anti = vec![0.0f64; block * s];
    let mut out = vec![0.0f64; s];
    for (b, cp) in checkpoints.iter_mut().enumerate() {
        let z0 = b * block;
        let z1 = (z0 + block).min(nz);
        let (mut p1, mut p2) = cp.take().expect("checkpoint recorded for every block");
        for z in (z0..z1).rev() {
            anti_step(f, input(z + 1), input(z + 2), &mut p1, &mut p2);
            anti[(z - z0) * s..(z - z0 + 1) * s].copy_from_slice(&p1);
        }
        for z in z0..z1 {
            let cur = input(z);
            let prev = input(z.saturating_sub(1));
            let a = &anti[(z - z0) * s..(z - z0 + 1) * s];
            for i in 0..s {
                let y =
                    f.a1 * cur[i] as f64 + f.a2 * prev[i] as f64 + f.b1 * ym1[i] + f.b2 * ym2[i];
                ym2[i] = ym1[i];
                ym1[i] = y;
                out[i] = y + a[i];
            }
            consume(z, &out);
        }
    }
}

/// One descending step: `p1, p2` hold `y-[z+1], y-[z+2]` and become `y-[z], y-[z+1]`.
#[inline]
fn anti_step(f: &Recursive, x1: &[u8], x2: &[u8], p1: &mut [f64], p2: &mut [f64]) {
    for i in 0..p1.len() {
        let y = f.a3 * x1[i] as f64 + f.a4 * x2[i] as f64 + f.b1 * p1[i] + f.b2 * p2[i];
        p2[i] = p1[i];
        p1[i] = y;
    }
}

/// Gradient magnitude `sqrt(gx² + gy² + gz²)` of the Deriche responses.
pub fn deriche_gradient_magnitude(v: &GreyVolume, p: DericheParams) -> Result<WideVolume> {
    let d = v.dims();
    let smooth = Recursive::smoothing(p.alpha);
    let deriv = Recursive::derivative(p.alpha);
    let (nx, ny, s) = (d.nx, d.ny, d.slice_len());
    let mut acc = vec![0.0f32; d.len()];

    let mut t1 = vec![0.0f64; s];
    let mut t2 = vec![0.0f64; s];
    let mut gx = vec![0.0f64; s];
    let mut gy = vec![0.0f64; s];

    // x and y responses share the z smoothing.
    for_each_z_filtered(v, &smooth, |z, sz| {
        pass_y(&smooth, sz, &mut t1, nx, ny);
        pass_x(&deriv, &t1, &mut gx, nx);
        pass_y(&deriv, sz, &mut t2, nx, ny);
        pass_x(&smooth, &t2, &mut gy, nx);
        let out = &mut acc[z * s..(z + 1) * s];
        for i in 0..s {
            out[i] = (gx[i] * gx[i] + gy[i] * gy[i]) as f32;
        }
    });

    for_each_z_filtered(v, &deriv, |z, dz| {
        pass_y(&smooth, dz, &mut t1, nx, ny);
        pass_x(&smooth, &t1, &mut t2, nx);
        let out = &mut acc[z * s..(z + 1) * s];
        for i in 0..s {
            out[i] = (out[i] as f64 + t2[i] * t2[i]).sqrt() as f32;
        }
    });

    if acc.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Deriche gradient"));
    }
    Ok(WideVolume::from_vec(d, acc)?.with_voxel_size(v.voxel_size()))
}

/// Affine map of `[min, max]` onto `[0, 255]`, rounded to nearest.
/// A constant input maps to all zeros.
pub fn quantize_topography(g: &WideVolume) -> GreyVolume {
    let (lo, hi) = g.min_max();
    let (lo, hi) = (lo as f64, hi as f64);
    if hi <= lo {
        return GreyVolume::filled(g.dims(), 0).with_voxel_size(g.voxel_size());
    }
    let scale = 255.0 / (hi - lo);
    g.map(|v| ((v as f64 - lo) * scale).round().clamp(0.0, 255.0) as u8)
}

/// Gradient magnitude quantized to 256 flooding levels.
pub fn gradient_topography(v: &GreyVolume, p: DericheParams) -> Result<GreyVolume> {
    let g = deriche_gradient_magnitude(v, p)?;
    Ok(quantize_topography(&g))
}

#[doc(hidden)]
/// Reference evaluation without checkpointing, used by tests and benches.
pub fn deriche_components_reference(v: &GreyVolume, p: DericheParams) -> [Vec<f64>; 3] {
    let d = v.dims();
    let smooth = Recursive::smoothing(p.alpha);
    let deriv = Recursive::derivative(p.alpha);
    let base: Vec<f64> = v.data().iter().map(|&x| x as f64).collect();
    let along = |data: &[f64], f: &Recursive, axis: usize| -> Vec<f64> {
        let n = d.axis(axis);
        let stride = d.stride(axis);
        let mut out = vec![0.0; data.len()];
        let mut line = vec![0.0; n];
        let mut res = vec![0.0; n];
        for start in line_starts(d, axis) {
            for t in 0..n {
                line[t] = data[start + t * stride];
            }
            f.line(&line, &mut res);
            for t in 0..n {
                out[start + t * stride] = res[t];
            }
        }
        out
    };
    let gx = along(&along(&along(&base, &smooth, 2), &smooth, 1), &deriv, 0);
    let gy = along(&along(&along(&base, &smooth, 2), &deriv, 1), &smooth, 0);
    let gz = along(&along(&along(&base, &deriv, 2), &smooth, 1), &smooth, 0);
    [gx, gy, gz]
}

fn line_starts(d: Dims, axis: usize) -> Vec<usize> {
    let mut v = Vec::new();
    for z in 0..d.nz {
        for y in 0..d.ny {
            for x in 0..d.nx {
                let c = [x, y, z];
                if c[axis] == 0 {
                    v.push(d.index(x, y, z));
                }
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_normalization() {
        for alpha in [0.5, 1.0, 2.0] {
            let s = Recursive::smoothing(alpha);
            assert!((s.gain_causal() + s.gain_anti() - 1.0).abs() < 1e-12);
            let d = Recursive::derivative(alpha);
            let ramp: Vec<f64> = (0..200).map(|i| 3.0 * i as f64).collect();
            let mut out = vec![0.0; 200];
            d.line(&ramp, &mut out);
            assert!((out[100] - 3.0).abs() < 1e-9, "alpha {alpha}: {}", out[100]);
            let mut sm = vec![0.0; 200];
            s.line(&ramp, &mut sm);
            assert!((sm[100] - 300.0).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_volume_has_zero_gradient() {
        let v = GreyVolume::filled(Dims::new(9, 8, 7).unwrap(), 143);
        let g = deriche_gradient_magnitude(&v, DericheParams::default()).unwrap();
        assert!(g.data().iter().all(|&m| m.abs() < 1e-4));
    }

    #[test]
    fn checkpointed_matches_reference() {
        let d = Dims::new(7, 6, 19).unwrap();
        let v = GreyVolume::from_fn(d, |x, y, z| ((x * 37 + y * 11 + z * z * 5) % 256) as u8);
        let p = DericheParams::new(0.8).unwrap();
        let g = deriche_gradient_magnitude(&v, p).unwrap();
        let [gx, gy, gz] = deriche_components_reference(&v, p);
        for i in 0..d.len() {
            let m = (gx[i] * gx[i] + gy[i] * gy[i] + gz[i] * gz[i]).sqrt();
            assert!((g.data()[i] as f64 - m).abs() <= 1e-5 * m.max(1.0));
        }
    }

    #[test]
    fn invalid_alpha_rejected() {
        assert!(DericheParams::new(0.0).is_err());
        assert!(DericheParams::new(f64::NAN).is_err());
    }

    #[test]
    fn quantization_cases() {
        let d = Dims::new(4, 1, 1).unwrap();
        let c = WideVolume::filled(d, 3.5);
        assert!(quantize_topography(&c).data().iter().all(|&v| v == 0));
        let two = WideVolume::from_vec(d, vec![2.0, 7.0, 7.0, 2.0]).unwrap();
        assert_eq!(quantize_topography(&two).data(), &[0, 255, 255, 0]);
        let grid = WideVolume::from_vec(d, vec![0.0, 17.0, 255.0, 100.0]).unwrap();
        assert_eq!(quantize_topography(&grid).data(), &[0, 17, 255, 100]);
    }
}
