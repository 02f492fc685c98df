use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use encmotion_bench::{fixture, typical_input, KEY_BITS};
use encmotion_core::controller::{dec_plus, encrypt_input, eval_encrypted, step_encrypted_controller, ControllerInput};

/// One control period is two of these (leader and follower).
fn controller_round_trip(c: &mut Criterion) {
    let mut group = c.benchmark_group("controller_round_trip");
    for bits in KEY_BITS {
        let mut f = fixture(bits);
        let (state, v) = typical_input();
        group.bench_with_input(BenchmarkId::from_parameter(bits), &bits, |b, _| {
            b.iter(|| {
                step_encrypted_controller(
                    &f.pk,
                    &f.sk,
                    &f.enc_phi,
                    black_box(state),
                    black_box(v),
                    f.gains,
                    &[],
                    &mut f.rng,
                )
                .unwrap()
            })
        });
    }
    group.finish();
}

/// The three stages of a round trip separately, at the default key length.
fn stages(c: &mut Criterion) {
    let mut f = fixture(128);
    let (state, v) = typical_input();
    let xi = ControllerInput::new(state, v);
    let (enc_xi, _) = encrypt_input(&f.pk, &xi, f.gains.input, &[], &mut f.rng).unwrap();
    let products = eval_encrypted(&f.pk, &f.enc_phi, &enc_xi).unwrap();

    let mut group = c.benchmark_group("stages_128");
    group.bench_function("encrypt_input", |b| {
        b.iter(|| encrypt_input(&f.pk, black_box(&xi), f.gains.input, &[], &mut f.rng).unwrap())
    });
    group.bench_function("eval_encrypted", |b| {
        b.iter(|| eval_encrypted(&f.pk, &f.enc_phi, black_box(&enc_xi)).unwrap())
    });
    group.bench_function("dec_plus", |b| {
        b.iter(|| dec_plus(&f.pk, &f.sk, black_box(&products), f.gains.decoder).unwrap())
    });
    group.finish();
}

criterion_group!(benches, controller_round_trip, stages);
criterion_main!(benches);
