use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::Rng;

use colearn_core::models::{lstm_cell_step, LstmParams, ParamStore};
use colearn_core::rng::{stream, Stream};
use colearn_core::{Tape, Tensor};

fn random(shape: &[usize], seed: u64) -> Tensor {
    let mut rng = stream(seed, Stream::Data);
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

fn matmul(c: &mut Criterion) {
    let mut group = c.benchmark_group("matmul_bt");
    for n in [32, 128] {
        let a = random(&[15, 4 * n], 1);
        let b = random(&[n, 4 * n], 2);
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |bench, _| {
            bench.iter(|| {
                let mut tape = Tape::new();
                let (av, bv) = (tape.leaf(a.clone()), tape.leaf(b.clone()));
                let y = tape.matmul_bt(av, bv).unwrap();
                let loss = tape.sum(y);
                tape.backward(loss).unwrap();
                black_box(tape.grad_data(bv).map(|g| g[0]))
            })
        });
    }
    group.finish();
}

fn lstm_sequence(c: &mut Criterion) {
    let mut group = c.benchmark_group("lstm_12_steps");
    for hidden in [32, 128] {
        let mut store = ParamStore::new();
        let cell = LstmParams::new(&mut store, "cell", 48, hidden, &mut stream(0, Stream::Init));
        let frames: Vec<Tensor> = (0..12).map(|t| random(&[15, 48], t)).collect();
        group.bench_with_input(
            BenchmarkId::new("forward_backward", hidden),
            &hidden,
            |bench, &hidden| {
                bench.iter(|| {
                    let mut tape = Tape::new();
                    let p = store.bind(&mut tape);
                    let mut h = tape.constant(Tensor::zeros(&[15, hidden]));
                    let mut c = h;
                    for x in &frames {
                        let x = tape.constant(x.clone());
                        (h, c) = lstm_cell_step(&mut tape, &p, &cell, x, h, c).unwrap();
                    }
                    let loss = tape.sum(h);
                    tape.backward(loss).unwrap();
                    black_box(p.gradients(&tape).len())
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, matmul, lstm_sequence);
criterion_main!(benches);
