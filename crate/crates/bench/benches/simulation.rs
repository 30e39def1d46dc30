use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use dqps_core::calibration::{
    simulate_three_detector, simulate_two_detector, CalibSetup2, CalibSetup3,
};
use dqps_core::{run_simulation, ChannelModel, ProtocolParams};

const N: u64 = 100_000;

fn protocol(c: &mut Criterion) {
    let mut group = c.benchmark_group("protocol");
    group.sample_size(10).throughput(Throughput::Elements(N));
    let ch = ChannelModel::new(0.01, 1e-6, 0.1, 0.0).unwrap();
    for l in [2, 20] {
        let p = ProtocolParams::new(l, 0.01, 0.5, N, 1).unwrap();
        group.bench_function(format!("L={l}"), |b| {
            b.iter(|| run_simulation(black_box(&p), &ch))
        });
    }
    group.finish();
}

fn calibration(c: &mut Criterion) {
    let mut group = c.benchmark_group("calibration");
    group.sample_size(10).throughput(Throughput::Elements(N));
    let two = CalibSetup2::exact(10, 0.02, 0.5, 1.0, 1.0, N, 1);
    group.bench_function("2det L=10", |b| {
        b.iter(|| simulate_two_detector(black_box(&two)).unwrap())
    });
    let three = CalibSetup3::exact(10, 0.02, 1.0, 2.0 / 3.0, 0.5, 3, N, 1);
    group.bench_function("3det L=10", |b| {
        b.iter(|| simulate_three_detector(black_box(&three)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, protocol, calibration);
criterion_main!(benches);
