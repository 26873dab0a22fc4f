//! Kernel timings on a 64³ phantom.
//!
//! With the default `parallel` feature each kernel runs twice: on rayon's
//! global pool and inside a one-thread pool. `--no-default-features` builds
//! the plain sequential loops instead, reported under `sequential`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use grainseg::descriptors::{two_point_correlation, Axes, Phase};
use grainseg::gradient::{gradient_topography, DericheParams};
use grainseg::median::median_filter;
use grainseg::morphology::{erode, StructuringElement};
use grainseg::phantom::{generate_phantom, GrainModel, PhantomSpec, RandomPacking};
use grainseg::pipeline::{squared_distance_transform, threshold, ThresholdRange};
use grainseg::{is_parallel, BinaryVolume, BorderRule, Dims, GreyVolume};

fn inputs() -> (GreyVolume, BinaryVolume) {
    let ph = generate_phantom(&PhantomSpec {
        dims: Dims::cube(64),
        model: GrainModel::Random(RandomPacking {
            count: 40,
            neck_pairs: 8,
            radius: (4.0, 7.0),
            min_gap: 2.0,
            class_levels: vec![],
        }),
        matrix_level: 60,
        grain_level: 190,
        blur: 0.8,
        noise: 20,
        seed: 1,
    })
    .expect("phantom");
    let mask = threshold(&ph.volume, ThresholdRange::new(125, 255).unwrap());
    (ph.volume, mask)
}

fn kernels(c: &mut Criterion) {
    let (grey, mask) = inputs();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap();
    let modes: &[&str] = if is_parallel() {
        &["rayon", "one-thread"]
    } else {
        &["sequential"]
    };

    let mut run = |name: &str, f: &(dyn Fn() + Sync)| {
        let mut g = c.benchmark_group(name);
        g.sample_size(10);
        for &mode in modes {
            g.bench_function(BenchmarkId::from_parameter(mode), |b| {
                if mode == "one-thread" {
                    b.iter(|| one.install(f))
                } else {
                    b.iter(f)
                }
            });
        }
        g.finish();
    };

    run("median_r1", &|| {
        median_filter(&grey, 1, BorderRule::ClampToEdge).unwrap();
    });
    run("erode_cube2", &|| {
        erode(
            &mask,
            &StructuringElement::cube(2),
            BorderRule::OutsideForeground,
        );
    });
    run("edt", &|| {
        squared_distance_transform(&mask);
    });
    run("deriche_gradient", &|| {
        gradient_topography(&grey, DericheParams::default()).unwrap();
    });
    run("two_point_r32", &|| {
        two_point_correlation(&mask, Phase::Grain, Axes::all(), 32).unwrap();
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
