use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rectenna_bench::reference_circuit;
use rectenna_core::mpp::{find_mpp, LoadRange};
use rectenna_core::network::{linear_grid, s11_sweep};
use rectenna_core::pmic::{simulate, ColdStartOptions, HarvesterCurve, PmicConfig};
use rectenna_core::rectifier::{solve_resolved, FrontEnd};
use rectenna_core::{ComplexImpedance, Frequency};

fn s11(c: &mut Criterion) {
    let FrontEnd::Matched(design) = reference_circuit(0.0, 12e3).front_end else { unreachable!() };
    let net = design.network();
    let grid = linear_grid(Frequency::from_mhz(100.0).unwrap(), Frequency::from_mhz(2000.0).unwrap(), 1901).unwrap();
    let term = ComplexImpedance::resistive(2110.0);
    c.bench_function("s11 sweep, 1901 points", |b| {
        b.iter(|| s11_sweep(black_box(&net), |_| term, &grid, ComplexImpedance::resistive(50.0)).unwrap())
    });
}

fn steady_state(c: &mut Criterion) {
    let mut g = c.benchmark_group("steady state");
    g.sample_size(20);
    for dbm in [-15.0, 0.0, 10.0] {
        let circuit = reference_circuit(dbm, 12e3);
        g.bench_function(format!("{dbm} dBm"), |b| b.iter(|| solve_resolved(black_box(&circuit)).unwrap()));
    }
    g.finish();
}

fn mpp(c: &mut Criterion) {
    let mut g = c.benchmark_group("mpp search");
    g.sample_size(10);
    let circuit = reference_circuit(0.0, 12e3);
    g.bench_function("0 dBm", |b| b.iter(|| find_mpp(black_box(&circuit), LoadRange::default()).unwrap()));
    g.finish();
}

fn cold_start(c: &mut Criterion) {
    let cfg = PmicConfig { ic_quiescent_current: 1.8e-6, storage_capacitance: 93e-6, ..PmicConfig::default() };
    let h = HarvesterCurve { open_circuit_voltage: 0.6, points: vec![(0.3, 11.5e-6)] };
    let opts = ColdStartOptions { duration: 120.0, ..ColdStartOptions::default() };
    c.bench_function("cold start, 120 s at 1 ms", |b| b.iter(|| simulate(black_box(&cfg), &h, opts).unwrap()));
}

criterion_group!(benches, s11, steady_state, mpp, cold_start);
criterion_main!(benches);
