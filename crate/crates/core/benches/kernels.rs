//! Sequential versus data-parallel kernels.
//!
//! With the `parallel` feature each benchmark runs inside a one-thread rayon
//! pool and inside the default pool. Without it only the sequential path
//! exists and is measured alone.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ncpdrive::autodiff::Graph;
use ncpdrive::data::{preprocess, synth_generate, Condition, Episode};
use ncpdrive::models::{ArchitectureSpec, Model, Variant};
use ncpdrive::{Rng, Tensor};

fn random(shape: &[usize], seed: u64) -> Tensor<f32> {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(shape, |_| rng.range(-1.0, 1.0) as f32).unwrap()
}

/// Runs `f` once per available execution mode, labelled by thread count.
fn modes(mut f: impl FnMut(&str, &dyn Fn(&mut (dyn FnMut() + Send)))) {
    #[cfg(feature = "parallel")]
    {
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        f("1-thread", &|body| single.install(&mut *body));
        let threads = rayon::current_num_threads();
        f(&format!("{threads}-thread"), &|body| body());
    }
    #[cfg(not(feature = "parallel"))]
    f("sequential", &|body| body());
}

fn training_loss(model: &Model, ep: &Episode) -> f32 {
    let mut g = Graph::new();
    g.bind(model.params()).unwrap();
    let frames: Vec<_> = ep.samples.iter().map(|s| g.constant(preprocess(&s.center))).collect();
    let (preds, _) = model.architecture().unroll(&mut g, &frames, None, None).unwrap();
    let mut loss = None;
    for (p, s) in preds.into_iter().zip(&ep.samples) {
        let e = g.sum_squared_error(p, &Tensor::vector(vec![s.steering])).unwrap();
        loss = Some(match loss {
            None => e,
            Some(l) => g.add(l, e).unwrap(),
        });
    }
    let loss = loss.unwrap();
    g.backward(loss).unwrap();
    g.value(loss).item().unwrap()
}

fn kernels(c: &mut Criterion) {
    let a = random(&[256, 256], 1);
    let b = random(&[256, 256], 2);
    let frame = random(&[66, 200, 3], 3);
    let k = random(&[5, 5, 3, 24], 4);
    let ep = synth_generate(Condition::Sunny, 4, 5).unwrap();
    let model = Model::new(ArchitectureSpec::new(Variant::CnnNcp, 0)).unwrap();

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    modes(|label, run| {
        group.bench_function(BenchmarkId::new("matmul_256", label), |bench| {
            bench.iter(|| run(&mut || drop(a.matmul(&b).unwrap())))
        });
        group.bench_function(BenchmarkId::new("conv2d_5x5x24_s2", label), |bench| {
            bench.iter(|| run(&mut || drop(frame.conv2d(&k, 2).unwrap())))
        });
        group.bench_function(BenchmarkId::new("cnn_ncp_step_t4", label), |bench| {
            bench.iter(|| {
                run(&mut || {
                    std::hint::black_box(training_loss(&model, &ep));
                })
            })
        });
    });
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
