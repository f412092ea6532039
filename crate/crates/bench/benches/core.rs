use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use por_bench::round_fixture;
use por_core::consensus::run_round;
use por_core::crypto::{keygen, scalar_mul, sign, verify};
use por_core::macau::sha256;
use por_core::randomness::{fill_pool, run_suite, SuiteConfig};
use por_core::{CurveParams, EntropySource, Hash256, Mode, RoundConfig, SelectionRule};

fn bench_sha256(c: &mut Criterion) {
    let mut g = c.benchmark_group("sha256");
    for size in [64usize, 1024, 1 << 20] {
        let data = vec![0xa5u8; size];
        g.throughput(Throughput::Bytes(size as u64));
        g.bench_with_input(BenchmarkId::from_parameter(size), &data, |b, d| {
            b.iter(|| sha256(black_box(d)))
        });
    }
    g.finish();
}

fn bench_run_round(c: &mut Criterion) {
    let mut g = c.benchmark_group("run_round");
    let prevhash = Hash256::from_u64(7);
    for n in [4usize, 16, 64] {
        let (contribs, keys) = round_fixture(n, 1);
        for mode in [Mode::SmallSync, Mode::LargePrevhash, Mode::TimeWeighted] {
            let cfg = RoundConfig::new(mode, SelectionRule::Min, 100).unwrap();
            g.bench_function(BenchmarkId::new(mode.as_str(), n), |b| {
                b.iter(|| run_round(black_box(&contribs), 1, &prevhash, &cfg, &keys).unwrap())
            });
        }
    }
    g.finish();
}

fn bench_curves(c: &mut Criterion) {
    let mut g = c.benchmark_group("curve");
    for params in [CurveParams::test64(), CurveParams::secp256k1()] {
        let mut src = EntropySource::seeded(2);
        let pair = keygen(&mut src, &params).unwrap();
        g.bench_function(BenchmarkId::new("scalar_mul", &params.name), |b| {
            b.iter(|| scalar_mul(black_box(&pair.k), &params.g, &params).unwrap())
        });
        let sig = sign(&pair, b"message", &mut src, &params).unwrap();
        g.bench_function(BenchmarkId::new("sign", &params.name), |b| {
            b.iter(|| sign(&pair, black_box(b"message"), &mut src, &params).unwrap())
        });
        g.bench_function(BenchmarkId::new("verify", &params.name), |b| {
            b.iter(|| verify(&pair.public, black_box(b"message"), &sig, &params))
        });
    }
    g.finish();
}

fn bench_suite(c: &mut Criterion) {
    let pool = fill_pool(&mut EntropySource::seeded(3), 1 << 20).unwrap();
    let cfg = SuiteConfig::default();
    let mut g = c.benchmark_group("randomness");
    g.throughput(Throughput::Bytes(pool.as_bytes().len() as u64));
    g.bench_function("suite_1mbit", |b| b.iter(|| run_suite(black_box(&pool), &cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, bench_sha256, bench_run_round, bench_curves, bench_suite);
criterion_main!(benches);
