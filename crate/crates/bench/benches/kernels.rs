use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rsp_core::flow::{FlowConfig, FlowSolver};
use rsp_core::lattice::sample_chain;
use rsp_core::rsrg::run_rsrg;
use rsp_core::spinsim::{StateVector, XYHamiltonian};
use rsp_core::sweep::{SweepParams, SweepSystem};
use rsp_core::{AtomChain, Filling, LatticeParams};

fn rsrg(c: &mut Criterion) {
    let lattice = LatticeParams::new(100, 5.0, Filling::Fixed(30)).with_seed(3);
    let chain = sample_chain(&lattice).unwrap();
    c.bench_function("rsrg_30_atoms", |b| {
        b.iter(|| run_rsrg(black_box(&chain), 5.0).unwrap())
    });
}

fn flow_step(c: &mut Criterion) {
    let cfg = FlowConfig::default();
    let mut scalar = FlowSolver::scalar(0.3, &cfg).unwrap();
    c.bench_function("flow_step_scalar", |b| b.iter(|| scalar.step().unwrap()));
    let mut joint = FlowSolver::joint(0.3, &cfg).unwrap();
    c.bench_function("flow_step_joint", |b| b.iter(|| joint.step().unwrap()));
}

fn apply_h(c: &mut Criterion) {
    let lattice = LatticeParams::new(40, 5.0, Filling::Fixed(12)).with_seed(1);
    let chain = sample_chain(&lattice).unwrap();
    let h = XYHamiltonian::interaction(&chain, &lattice).unwrap();
    let v = StateVector::random(12, &mut ChaCha8Rng::seed_from_u64(7));
    let mut out = vec![Complex64::default(); v.dim()];
    c.bench_function("apply_h_12_atoms", |b| {
        b.iter(|| h.apply_into(black_box(v.amplitudes()), &mut out))
    });
}

fn evolve(c: &mut Criterion) {
    let chain = AtomChain::new(vec![0, 2, 5, 6, 11, 13]).unwrap();
    let lattice = LatticeParams::new(14, 5.0, Filling::Fixed(6));
    let system = SweepSystem::new(&chain, &lattice, &SweepParams::default()).unwrap();
    let mut group = c.benchmark_group("evolve");
    group.sample_size(10);
    group.bench_function("6_atoms_omega_0.1", |b| {
        b.iter(|| system.evolve(0.1, 1e-7).unwrap())
    });
    group.finish();
}

criterion_group!(benches, rsrg, flow_step, apply_h, evolve);
criterion_main!(benches);
