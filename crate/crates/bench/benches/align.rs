use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::hint::black_box;

use corpora_core::align::{align, error_rate};
use corpora_core::textnorm::{tokenize, MetricUnit, NormalizationPolicy, Token};

const WORDS: &[&str] = &[
    "alpha", "beta", "gamma", "delta", "omega", "river", "stone", "cloud", "forest", "silver",
    "night", "dream", "garden", "winter", "candle", "mirror",
];

fn random_sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

/// Mutate roughly 20% of the words so the DP has real work to do.
fn perturb(rng: &mut ChaCha8Rng, text: &str) -> String {
    text.split_whitespace()
        .filter_map(|w| {
            if rng.random_bool(0.1) {
                None
            } else if rng.random_bool(0.1) {
                Some(WORDS[rng.random_range(0..WORDS.len())].to_string())
            } else {
                Some(w.to_string())
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn bench_align(c: &mut Criterion) {
    let mut group = c.benchmark_group("align");
    for &len in &[20usize, 80, 320] {
        let mut rng = ChaCha8Rng::seed_from_u64(len as u64);
        let reference = random_sentence(&mut rng, len);
        let hypothesis = perturb(&mut rng, &reference);
        let ref_tokens: Vec<Token> = tokenize(&reference, MetricUnit::Word);
        let hyp_tokens: Vec<Token> = tokenize(&hypothesis, MetricUnit::Word);
        group.throughput(Throughput::Elements(len as u64));
        group.bench_function(BenchmarkId::new("words", len), |b| {
            b.iter(|| align(black_box(&ref_tokens), black_box(&hyp_tokens)))
        });
    }
    group.finish();
}

fn bench_error_rate(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let reference = random_sentence(&mut rng, 60);
    let hypothesis = perturb(&mut rng, &reference);
    let mut group = c.benchmark_group("error_rate");
    group.bench_function("wer", |b| {
        b.iter(|| {
            error_rate(
                black_box(&reference),
                black_box(&hypothesis),
                "eng",
                &NormalizationPolicy::wer(),
            )
        })
    });
    group.bench_function("cer", |b| {
        b.iter(|| {
            error_rate(
                black_box(&reference),
                black_box(&hypothesis),
                "eng",
                &NormalizationPolicy::cer(),
            )
        })
    });
    group.finish();
}

criterion_group!(benches, bench_align, bench_error_rate);
criterion_main!(benches);
