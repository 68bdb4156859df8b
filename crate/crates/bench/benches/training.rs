use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use colearn_core::data::{generate_synthetic, SyntheticConfig};
use colearn_core::experiments::Arm;
use colearn_core::models::{Model, ModelConfig, ModelKind};
use colearn_core::training::{train, TrainConfig};

fn one_epoch(c: &mut Criterion) {
    let split = generate_synthetic(&SyntheticConfig {
        n_samples: 300,
        ..SyntheticConfig::ncl_preset()
    })
    .unwrap();
    let base = TrainConfig {
        hidden_size: 32,
        max_epochs: 1,
        ..TrainConfig::default()
    };
    let mut group = c.benchmark_group("train_epoch_210_samples");
    group.sample_size(10);
    for (name, kind) in [("bi_eflstm", ModelKind::BiEflstm)] {
        let cfg =
            ModelConfig::for_dataset(kind, &split.dims, split.task, base.hidden_size).unwrap();
        let model = Model::new(&cfg, 0).unwrap();
        let train_cfg = Arm::Multimodal { level: 0.8 }.train_config(&base, 0);
        group.bench_function(name, |b| {
            b.iter(|| black_box(train(&model, &split, &train_cfg).unwrap().1.best_epoch))
        });
    }
    group.finish();
}

criterion_group!(benches, one_epoch);
criterion_main!(benches);
