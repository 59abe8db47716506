use criterion::{criterion_group, criterion_main, Criterion};
use tabsynth::gan::{LossMode, TrainConfig, Trainer};
use tabsynth_bench::loan_table;

fn bench_epoch(c: &mut Criterion) {
    let table = loan_table(1000, 0);
    let mut g = c.benchmark_group("train_epoch_1000");
    g.sample_size(10);
    for (name, mode) in [("vanilla", LossMode::Vanilla), ("wgan_gp", LossMode::WganGp)] {
        let cfg = TrainConfig {
            epochs: 1,
            batch_size: 100,
            hidden: 64,
            latent_dim: 32,
            loss_mode: mode,
            ..TrainConfig::default()
        };
        let mut trainer = Trainer::new(&table, &cfg).unwrap();
        g.bench_function(name, |b| b.iter(|| trainer.run_epoch().unwrap()));
    }
    g.finish();
}

criterion_group!(benches, bench_epoch);
criterion_main!(benches);
