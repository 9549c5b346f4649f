use std::hint::black_box;

use bytevq_core::asrtoy::ctc_prefix_beam_search;
use bytevq_core::autoencoder::ctc_loss;
use bytevq_core::quantizer::rvq_quantize;
use bytevq_core::subword::{bpe_encode, bpe_train};
use bytevq_core::utf8::utf8_repair_decode;
use bytevq_core::{DenseMatrix, RvqCodec};
use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ctc(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let logits = DenseMatrix::randn(100, 41, 1.0, &mut rng);
    let targets: Vec<u32> = (0..30).map(|_| rng.random_range(0..40)).collect();
    c.bench_function("ctc_loss T=100 L=30 V=40", |b| {
        b.iter(|| ctc_loss(black_box(&logits), black_box(&targets)).unwrap())
    });
}

fn rvq(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let codec = RvqCodec::random(2, 256, 32, 0.25, 1).unwrap();
    let z: Vec<f64> = (0..32).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("rvq_quantize N=2 M=256 D=32", |b| {
        b.iter(|| rvq_quantize(black_box(&z), &codec).unwrap())
    });
}

fn bpe(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let corpus: Vec<Vec<u32>> = (0..300)
        .map(|_| (0..40).map(|_| rng.random_range(0..16u32)).collect())
        .collect();
    let vocab = bpe_train(&corpus, 16, 200).unwrap();
    let line = &corpus[0];
    c.bench_function("bpe_encode 40 symbols, 183 merges", |b| {
        b.iter(|| bpe_encode(&vocab, black_box(line)).unwrap())
    });
}

fn utf8(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let bytes: Vec<u8> = (0..4096).map(|_| rng.random()).collect();
    let text = "byte level 字节级 ".repeat(200);
    c.bench_function("utf8_repair_decode 4 KiB random", |b| {
        b.iter(|| utf8_repair_decode(black_box(&bytes)))
    });
    c.bench_function("utf8_repair_decode valid text", |b| {
        b.iter(|| utf8_repair_decode(black_box(text.as_bytes())))
    });
}

fn beam(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let logits = DenseMatrix::randn(80, 101, 2.0, &mut rng);
    c.bench_function("ctc_prefix_beam_search T=80 V=100 beam=8", |b| {
        b.iter(|| ctc_prefix_beam_search(black_box(&logits), 8, 1))
    });
}

criterion_group!(kernels, ctc, rvq, bpe, utf8, beam);
criterion_main!(kernels);
