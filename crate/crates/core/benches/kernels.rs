use std::f64::consts::PI;
use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion};

use dualjump::grid::VelocityGrid;
use dualjump::kernels::{Frequencies, KernelSet, MeanSpeed};
use dualjump::kinetic::{CollisionMode, CollisionModel, KineticConfig, KineticSolver, VelocityInit};
use dualjump::macroscopic::{assemble_macro_model, MacroSolver, MacroVariant};
use dualjump::par::Exec;
use dualjump::particles::{simulate_event_driven, JumpModel, ParticleEnsemble};
use dualjump::spatial::{gaussian, SpatialGrid};

const MODES: [(&str, Exec); 2] = [("serial", Exec::Serial), ("parallel", Exec::Parallel)];

fn kernels(ns: usize, nt: usize) -> KernelSet {
    KernelSet::von_mises(
        VelocityGrid::new(ns, nt, 4.0).unwrap(),
        80.0,
        &MeanSpeed::HalfPlane { upper: 1.5, lower: 0.2 },
        10.0,
        PI / 2.0,
        Frequencies::default(),
    )
    .unwrap()
}

fn space(n: usize) -> SpatialGrid {
    SpatialGrid::new(n, n, [0.0, 2.5], [0.0, 2.5]).unwrap()
}

fn kinetic_step(c: &mut Criterion) {
    let ks = kernels(16, 32);
    let mut g = c.benchmark_group("kinetic_step");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut cfg = KineticConfig::new(space(64), CollisionMode::unscaled(CollisionModel::TwoOperator));
        cfg.exec = exec;
        let solver = KineticSolver::new(&ks, cfg).unwrap();
        let rho0 = space(64).sample(gaussian(1.0, 0.01, [1.25, 1.25]));
        let field = solver.initial_field(&rho0, VelocityInit::Equilibrium).unwrap();
        let dt = solver.max_dt();
        g.bench_function(BenchmarkId::new(name, "64x64x16x32"), |b| {
            b.iter_batched_ref(
                || field.clone(),
                |f| solver.step(f, dt).unwrap(),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn particles_event(c: &mut Criterion) {
    let ks = kernels(16, 32);
    let model = JumpModel::new(&ks);
    let mut g = c.benchmark_group("particles_event_driven");
    g.sample_size(10);
    for (name, exec) in MODES {
        let ens = ParticleEnsemble::sample(1 << 18, 3, &ks.grid, &ks.t_eq, [0.0, 0.0], exec).unwrap();
        g.bench_function(BenchmarkId::new(name, "262144"), |b| {
            b.iter_batched_ref(
                || ens.clone(),
                |e| black_box(simulate_event_driven(e, &model, 1.0, exec).unwrap()),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn macro_step(c: &mut Criterion) {
    let ks = kernels(32, 64);
    let model = assemble_macro_model(&ks, MacroVariant::M2, 0.1).unwrap();
    let mut g = c.benchmark_group("macro_step");
    for (name, exec) in MODES {
        let mut solver = MacroSolver::new(space(256), model);
        solver.exec = exec;
        let st = solver.state(space(256).sample(gaussian(1.0, 0.01, [1.25, 1.25]))).unwrap();
        let dt = solver.max_dt();
        g.bench_function(BenchmarkId::new(name, "256x256"), |b| {
            b.iter_batched_ref(|| st.clone(), |s| solver.step(s, dt).unwrap(), BatchSize::LargeInput)
        });
    }
    g.finish();
}

criterion_group!(benches, kinetic_step, particles_event, macro_step);
criterion_main!(benches);
