//! Dynamics evaluation, one control step and a short closed-loop run.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use usde_core::controllers::{control_step, TrajectoryPoint};
use usde_core::estimator::auxiliary_from_terms;
use usde_core::{run_scenario, ControllerState, JointVec, ManipulatorModel, Scenario, Usde, Variant};

fn models() -> Vec<(&'static str, ManipulatorModel)> {
    let planar = Scenario::planar2dof().model_nominal;
    vec![("planar2r", planar), ("franka_like", ManipulatorModel::franka_like())]
}

fn state(n: usize) -> (JointVec, JointVec) {
    let q = JointVec::from_fn(n, |i, _| 0.3 + 0.1 * i as f64);
    let qd = JointVec::from_fn(n, |i, _| 0.5 - 0.2 * i as f64);
    (q, qd)
}

fn bench_dynamics(c: &mut Criterion) {
    let mut group = c.benchmark_group("dynamics");
    for (name, model) in models() {
        let (q, qd) = state(model.dof());
        group.bench_with_input(BenchmarkId::new("mass_matrix", name), &model, |b, m| {
            b.iter(|| m.mass_matrix(black_box(&q)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("coriolis_matrix", name), &model, |b, m| {
            b.iter(|| m.coriolis_matrix(black_box(&q), black_box(&qd)).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("terms", name), &model, |b, m| {
            b.iter(|| m.terms(black_box(&q), black_box(&qd)).unwrap())
        });
    }
    group.finish();
}

fn bench_control_step(c: &mut Criterion) {
    let sc = Scenario::paper7dof();
    let model = &sc.model_nominal;
    let (q, qd) = state(7);
    let traj = TrajectoryPoint {
        t: 1.0,
        q: &q + JointVec::from_element(7, 0.01),
        qd: qd.clone(),
        qdd: JointVec::zeros(7),
    };
    let mut group = c.benchmark_group("control_step");
    for variant in Variant::ALL {
        group.bench_function(variant.name(), |b| {
            let mut state = ControllerState::new(variant, &sc.controller);
            let mut usde = Usde::new(7, sc.filter_k, sc.filter_hold).unwrap();
            b.iter(|| {
                let terms = model.terms(&q, &qd).unwrap();
                let d_hat = usde.update(&auxiliary_from_terms(&terms, &qd), sc.control_dt).unwrap();
                let out = control_step(
                    &mut state,
                    &sc.controller,
                    &terms,
                    &q,
                    &qd,
                    &traj,
                    &d_hat,
                    sc.control_dt,
                )
                .unwrap();
                usde.hold_torque(&out.tau);
                black_box(out)
            })
        });
    }
    group.finish();
}

fn bench_short_run(c: &mut Criterion) {
    let mut sc = Scenario::paper7dof();
    sc.duration = 0.1;
    let mut group = c.benchmark_group("run_0.1s_7dof");
    group.sample_size(10);
    for variant in [Variant::Fg, Variant::St] {
        group.bench_function(variant.name(), |b| {
            b.iter(|| run_scenario(black_box(&sc), variant).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_dynamics, bench_control_step, bench_short_run);
criterion_main!(benches);
