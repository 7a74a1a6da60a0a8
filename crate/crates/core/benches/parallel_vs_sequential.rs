use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ringflight::event::{emit_events_in, ReferenceField, SensorParams};
use ringflight::feasibility::{generate_dataset, DatasetConfig};
use ringflight::par::Exec;
use ringflight::runner::{run_batch, ScenarioConfig};
use ringflight::world::{IntensityImage, Rect};

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn gradient(params: &SensorParams, phase: f64) -> IntensityImage {
    let mut img = IntensityImage::filled(params.width, params.height, 0.0);
    for y in 0..params.height {
        for x in 0..params.width {
            let v = 0.5 + 0.4 * ((x as f64 * 0.07 + phase).sin() * (y as f64 * 0.05).cos());
            img.set(x, y, v);
        }
    }
    img
}

fn event_synthesis(c: &mut Criterion) {
    let params = SensorParams::default();
    let before = gradient(&params, 0.0);
    let after = gradient(&params, 0.8);
    let rect = Rect::full(params.width, params.height);
    let mut g = c.benchmark_group("event_synthesis_full_frame");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                let mut refs = ReferenceField::from_frame(&before, &params).unwrap();
                black_box(emit_events_in(&mut refs, &after, rect, 0, 1000, &params, exec).unwrap())
            })
        });
    }
    g.finish();
}

fn dataset(c: &mut Criterion) {
    let cfg = DatasetConfig {
        train_n: 2000,
        test_n: 500,
        ..DatasetConfig::default()
    };
    let mut g = c.benchmark_group("dataset_2500");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(generate_dataset(&cfg, 9, exec).unwrap()))
        });
    }
    g.finish();
}

fn batch(c: &mut Criterion) {
    let cfg = ScenarioConfig::default();
    let mut g = c.benchmark_group("batch_2_runs");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| black_box(run_batch(&cfg, 2, 1, exec).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, event_synthesis, dataset, batch);
criterion_main!(benches);
