//! Seeded synthetic granular volumes with known ground truth.
//!
//! Spheres are rendered at a grain grey level over a matrix level, optionally
//! blurred with a Gaussian point-spread function, then perturbed by uniform integer noise in `[-a, a]` and
//! clamped to `0..=255`. The ground truth labels sphere `i` as `i + 1`;
//! voxels inside several spheres go to the nearest center (lower index on
//! ties).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::volume::{Dims, GreyVolume, LabelVolume};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Sphere {
    pub center: [f64; 3],
    pub radius: f64,
    /// Grey level; the phantom's grain level when `None`.
    pub level: Option<u8>,
}

impl Sphere {
    pub fn new(center: [f64; 3], radius: f64) -> Self {
        Sphere {
            center,
            radius,
            level: None,
        }
    }

    fn dist2(&self, p: [f64; 3]) -> f64 {
        (0..3).map(|k| (p[k] - self.center[k]).powi(2)).sum()
    }
}

/// Random packing: `count` spheres, of which `2 * neck_pairs` form pairs
/// whose centers are `1.5 r` apart (joined through a neck); every other pair
/// of spheres keeps at least `min_gap` voxels of matrix between surfaces.
#[derive(Clone, Debug, PartialEq)]
pub struct RandomPacking {
    pub count: usize,
    pub neck_pairs: usize,
    pub radius: (f64, f64),
    pub min_gap: f64,
    /// Grey levels cycled over clusters (a pair shares one); empty means the
    /// phantom's grain level.
    pub class_levels: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GrainModel {
    /// Explicit spheres; `necks` lists index pairs that are meant to overlap.
    Explicit {
        spheres: Vec<Sphere>,
        necks: Vec<(usize, usize)>,
    },
    Random(RandomPacking),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhantomSpec {
    pub dims: Dims,
    pub model: GrainModel,
    pub matrix_level: u8,
    pub grain_level: u8,
    /// Standard deviation of the Gaussian blur applied before the noise,
    /// in voxels (0 = sharp).
    pub blur: f64,
    pub noise: u8,
    pub seed: u64,
}

#[derive(Clone, Debug)]
pub struct Phantom {
    pub volume: GreyVolume,
    pub truth: LabelVolume,
    pub spheres: Vec<Sphere>,
    pub warnings: Vec<String>,
}

pub fn generate_phantom(spec: &PhantomSpec) -> Result<Phantom> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (spheres, necks) = match &spec.model {
        GrainModel::Explicit { spheres, necks } => (spheres.clone(), necks.clone()),
        GrainModel::Random(p) => pack(spec.dims, p, &mut rng)?,
    };
    let d = spec.dims;
    let bounds = [d.nx, d.ny, d.nz];
    for (i, s) in spheres.iter().enumerate() {
        let fits = (0..3).all(|k| {
            s.center[k] - s.radius >= 0.0 && s.center[k] + s.radius <= (bounds[k] - 1) as f64
        });
        if !fits || s.radius <= 0.0 {
            return Err(Error::pre(format!(
                "sphere {i} does not fit in {:?}",
                d.as_tuple()
            )));
        }
    }
    let mut warnings = Vec::new();
    for i in 0..spheres.len() {
        for j in i + 1..spheres.len() {
            let (a, b) = (&spheres[i], &spheres[j]);
            let touching = a.dist2(b.center).sqrt() <= a.radius + b.radius;
            if touching && !necks.contains(&(i, j)) && !necks.contains(&(j, i)) {
                warnings.push(format!(
                    "spheres {i} and {j} overlap without a requested neck"
                ));
            }
        }
    }

    let truth = render_truth(d, &spheres);
    let level_of = |l: u32| -> f64 {
        if l == 0 {
            spec.matrix_level as f64
        } else {
            spheres[l as usize - 1].level.unwrap_or(spec.grain_level) as f64
        }
    };
    let mut field: Vec<f64> = truth.data().iter().map(|&l| level_of(l)).collect();
    if !(spec.blur >= 0.0 && spec.blur.is_finite()) {
        return Err(Error::pre(format!(
            "blur must be a finite sigma >= 0, got {}",
            spec.blur
        )));
    }
    if spec.blur > 0.0 {
        gaussian_blur(&mut field, d, spec.blur);
    }

    let mut grey = vec![0u8; d.len()];
    let noise = spec.noise as i32;
    par::for_each_chunk_mut(&mut grey, d.slice_len(), |z, out| {
        let mut r = ChaCha8Rng::seed_from_u64(spec.seed);
        r.set_stream(z as u64 + 1);
        let base = z * d.slice_len();
        for (i, o) in out.iter_mut().enumerate() {
            let n = if noise > 0 {
                r.gen_range(-noise..=noise)
            } else {
                0
            };
            *o = (field[base + i].round() as i32 + n).clamp(0, 255) as u8;
        }
    });
    Ok(Phantom {
        volume: GreyVolume::from_vec(d, grey)?,
        truth,
        spheres,
        warnings,
    })
}

fn render_truth(d: Dims, spheres: &[Sphere]) -> LabelVolume {
    let mut truth = LabelVolume::zeros(d);
    let mut best = vec![f64::INFINITY; d.len()];
    for (i, s) in spheres.iter().enumerate() {
        let lo = |k: usize| (s.center[k] - s.radius).floor().max(0.0) as usize;
        let hi = |k: usize, n: usize| ((s.center[k] + s.radius).ceil() as usize).min(n - 1);
        for z in lo(2)..=hi(2, d.nz) {
            for y in lo(1)..=hi(1, d.ny) {
                for x in lo(0)..=hi(0, d.nx) {
                    let r2 = s.dist2([x as f64, y as f64, z as f64]);
                    let idx = d.index(x, y, z);
                    if r2 <= s.radius * s.radius && r2 < best[idx] {
                        best[idx] = r2;
                        truth.data_mut()[idx] = i as u32 + 1;
                    }
                }
            }
        }
    }
    truth
}

/// Separable Gaussian filter truncated at 3 sigma, replicating edges.
fn gaussian_blur(field: &mut [f64], d: Dims, sigma: f64) {
    let r = (3.0 * sigma).ceil() as isize;
    let mut kernel: Vec<f64> = (-r..=r)
        .map(|t| (-(t * t) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= sum);
    let mut tmp = vec![0.0; field.len()];
    for axis in 0..3 {
        let n = d.axis(axis) as isize;
        let stride = d.stride(axis);
        for start in 0..field.len() {
            if d.coords(start)[axis] != 0 {
                continue;
            }
            for t in 0..n {
                let mut acc = 0.0;
                for (k, w) in kernel.iter().enumerate() {
                    let u = (t + k as isize - r).clamp(0, n - 1) as usize;
                    acc += w * field[start + u * stride];
                }
                tmp[start + t as usize * stride] = acc;
            }
        }
        field.copy_from_slice(&tmp);
    }
}

type Packing = (Vec<Sphere>, Vec<(usize, usize)>);

fn pack(d: Dims, p: &RandomPacking, rng: &mut ChaCha8Rng) -> Result<Packing> {
    if 2 * p.neck_pairs > p.count {
        return Err(Error::pre("more neck pairs than spheres"));
    }
    let (rmin, rmax) = p.radius;
    if !(rmin > 0.0 && rmin <= rmax) {
        return Err(Error::pre("invalid radius range"));
    }
    let bounds = [d.nx as f64, d.ny as f64, d.nz as f64];
    let mut spheres: Vec<Sphere> = Vec::with_capacity(p.count);
    let mut necks = Vec::new();
    let clusters = p.neck_pairs + (p.count - 2 * p.neck_pairs);
    for cluster in 0..clusters {
        let paired = cluster < p.neck_pairs;
        let level = if p.class_levels.is_empty() {
            None
        } else {
            Some(p.class_levels[cluster % p.class_levels.len()])
        };
        let mut placed = false;
        for _ in 0..20_000 {
            let r = if rmin == rmax {
                rmin
            } else {
                rng.gen_range(rmin..=rmax)
            };
            let margin = r + 1.0;
            if (0..3).any(|k| bounds[k] - 1.0 - margin <= margin) {
                return Err(Error::pre("spheres do not fit in the volume"));
            }
            let c1 = [0, 1, 2].map(|k| rng.gen_range(margin..bounds[k] - 1.0 - margin));
            let mut cand = vec![Sphere {
                center: c1,
                radius: r,
                level,
            }];
            if paired {
                let dir = unit_vector(rng);
                let c2 = [0, 1, 2].map(|k| c1[k] + 1.5 * r * dir[k]);
                if (0..3).any(|k| c2[k] < margin || c2[k] > bounds[k] - 1.0 - margin) {
                    continue;
                }
                cand.push(Sphere {
                    center: c2,
                    radius: r,
                    level,
                });
            }
            let clear = cand.iter().all(|a| {
                spheres
                    .iter()
                    .all(|b| a.dist2(b.center).sqrt() >= a.radius + b.radius + p.min_gap)
            });
            if clear {
                if paired {
                    necks.push((spheres.len(), spheres.len() + 1));
                }
                spheres.extend(cand);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(Error::pre(format!(
                "could not place {} spheres with gap {} in {:?}",
                p.count,
                p.min_gap,
                d.as_tuple()
            )));
        }
    }
    Ok((spheres, necks))
}

fn unit_vector(rng: &mut ChaCha8Rng) -> [f64; 3] {
    loop {
        let v: [f64; 3] = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
        let n2: f64 = v.iter().map(|c| c * c).sum();
        if n2 > 1e-6 && n2 <= 1.0 {
            let n = n2.sqrt();
            return v.map(|c| c / n);
        }
    }
}
