use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use lpreach::funnel::{stream_slices, BundleMode};
use lpreach::metrics::{hausdorff_points_with, NearestMethod};
use lpreach::{build_bundle, build_funnel, count_words, enumerate_words, DEFAULT_WORD_CAP};
use lpreach_bench::{cloud, rotator};

fn enumeration(c: &mut Criterion) {
    let s = rotator(2.0, 6, 2, 1.0);
    let total = count_words(&s.plan, &s.instance, s.net.len(), DEFAULT_WORD_CAP).unwrap();
    let mut g = c.benchmark_group("words");
    g.bench_function(BenchmarkId::new("count", total), |b| {
        b.iter(|| count_words(&s.plan, &s.instance, s.net.len(), DEFAULT_WORD_CAP).unwrap())
    });
    g.bench_function(BenchmarkId::new("enumerate", total), |b| {
        b.iter(|| {
            enumerate_words(&s.plan, &s.instance, &s.net, DEFAULT_WORD_CAP)
                .unwrap()
                .count()
        })
    });
    g.finish();
}

fn bundles(c: &mut Criterion) {
    let s = rotator(2.0, 4, 2, 1.0);
    let mut g = c.benchmark_group("bundle");
    g.sample_size(20);
    g.bench_function("euler", |b| {
        b.iter(|| {
            let bundle = build_bundle(
                &s.spec,
                &s.instance,
                &s.plan,
                &s.net,
                BundleMode::Euler,
                DEFAULT_WORD_CAP,
            )
            .unwrap();
            build_funnel(&bundle)
        })
    });
    g.bench_function("oracle_32", |b| {
        b.iter(|| {
            build_bundle(
                &s.spec,
                &s.instance,
                &s.plan,
                &s.net,
                BundleMode::Oracle { substeps: 32 },
                DEFAULT_WORD_CAP,
            )
            .unwrap()
        })
    });
    let nodes: Vec<usize> = (0..=s.plan.n_steps).collect();
    g.bench_function("stream_slices", |b| {
        b.iter(|| {
            stream_slices(
                &s.spec,
                &s.instance,
                &s.plan,
                &s.net,
                &nodes,
                DEFAULT_WORD_CAP,
            )
            .unwrap()
        })
    });
    g.finish();
}

fn hausdorff(c: &mut Criterion) {
    let mut g = c.benchmark_group("hausdorff");
    g.sample_size(10);
    for n in [1_000usize, 4_000] {
        let a = cloud(n, 3, 1);
        let b = cloud(n, 3, 2);
        for (name, method) in [
            ("grid", NearestMethod::Grid),
            ("brute", NearestMethod::Brute),
        ] {
            g.bench_with_input(BenchmarkId::new(name, n), &n, |bch, _| {
                bch.iter(|| hausdorff_points_with(black_box(&a), black_box(&b), method).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, enumeration, bundles, hausdorff);
criterion_main!(benches);
