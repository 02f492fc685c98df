use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use encmotion_bench::{fixture, KEY_BITS};
use encmotion_core::codec::{enc_real, encode};
use encmotion_core::crypto::{cmult, decrypt, encrypt};

fn primitives(c: &mut Criterion) {
    let mut group = c.benchmark_group("elgamal");
    for bits in KEY_BITS {
        let mut f = fixture(bits);
        let m = encode(&f.pk, 0.123456, 1e6).unwrap();
        let a = encrypt(&f.pk, &m, &mut f.rng);
        let b2 = encrypt(&f.pk, &m, &mut f.rng);
        group.bench_with_input(BenchmarkId::new("encrypt", bits), &bits, |b, _| {
            b.iter(|| encrypt(&f.pk, black_box(&m), &mut f.rng))
        });
        group.bench_with_input(BenchmarkId::new("cmult", bits), &bits, |b, _| {
            b.iter(|| cmult(&f.pk, black_box(&a), black_box(&b2)))
        });
        group.bench_with_input(BenchmarkId::new("decrypt", bits), &bits, |b, _| {
            b.iter(|| decrypt(&f.pk, &f.sk, black_box(&a)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("enc_real", bits), &bits, |b, _| {
            b.iter(|| enc_real(&f.pk, black_box(-0.75), 1e6, &mut f.rng).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, primitives);
criterion_main!(benches);
