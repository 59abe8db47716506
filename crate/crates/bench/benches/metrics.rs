use criterion::{black_box, criterion_group, criterion_main, Criterion};
use tabsynth::metrics::{dcr_nndr, similarity_report};
use tabsynth::privacy::{DpVariant, PrivacySpec};
use tabsynth_bench::loan_table;

fn bench_metrics(c: &mut Criterion) {
    let real = loan_table(1000, 0);
    let synth = loan_table(1000, 1);
    c.bench_function("similarity_1000", |b| {
        b.iter(|| similarity_report(black_box(&real), black_box(&synth), true).unwrap())
    });
    c.bench_function("dcr_nndr_1000", |b| b.iter(|| dcr_nndr(black_box(&real), black_box(&synth)).unwrap()));
    let mut spec = PrivacySpec::new(DpVariant::DDp, 20.0, 10);
    spec.epsilon = Some(1.0);
    spec.n_rows = Some(39_073);
    c.bench_function("plan_iterations", |b| b.iter(|| black_box(&spec).plan_iterations().unwrap()));
}

criterion_group!(benches, bench_metrics);
criterion_main!(benches);
