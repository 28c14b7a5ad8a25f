//! Hot-path benchmarks: map evaluation, sensitivity assembly, the
//! equilibrium oracle, projections, and whole closed-loop steps.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use nalgebra::DVector;

use modcoord_bench::scenario;
use modcoord_core::coordinator::{balance_project, coordinator_step};
use modcoord_core::equilibrium::solve_ne;
use modcoord_core::harness::run_closed_loop;
use modcoord_core::sensitivity::assemble_jacobians;

fn bench_game_map(c: &mut Criterion) {
    let s = scenario("ring3_acceptance.toml");
    let zeta = s
        .regulation
        .control_target(&s.initial_plant.q, &s.initial_plant.c)
        .unwrap();
    c.bench_function("game_map_ring3", |b| {
        b.iter(|| s.game.game_map(black_box(&s.initial_game), black_box(&zeta)))
    });
}

fn bench_sensitivity(c: &mut Criterion) {
    let s = scenario("ring3_acceptance.toml");
    c.bench_function("assemble_jacobians_ring3", |b| {
        b.iter(|| assemble_jacobians(&s.game, black_box(&s.initial_game)))
    });
}

fn bench_oracle(c: &mut Criterion) {
    let s = scenario("ring3_acceptance.toml");
    let zeta = s
        .regulation
        .control_target(&s.initial_plant.q, &s.initial_plant.c)
        .unwrap();
    c.bench_function("solve_ne_ring3_cold", |b| {
        b.iter(|| solve_ne(&s.game, black_box(&zeta), None))
    });
}

fn bench_balance_projection(c: &mut Criterion) {
    let s = scenario("ring3_dynamic.toml");
    let lay = *s.game.layout();
    let cfg = s.game.config();
    let spec = &s.game.specs()[0];
    let beta = DVector::from_vec(vec![2.1, 0.4, 1.3]);
    let alpha_hat = DVector::from_element(lay.arcs, 0.9);
    let lo = DVector::from_element(lay.arcs, cfg.margin);
    let hi = DVector::from_element(lay.arcs, spec.alpha_max - cfg.margin);
    c.bench_function("balance_project_ring3", |b| {
        b.iter(|| balance_project(s.game.graph(), &beta, black_box(&alpha_hat), &lo, &hi))
    });
}

fn bench_coordinator_step(c: &mut Criterion) {
    let s = scenario("ring3_dynamic.toml");
    let xi_dot = DVector::from_element(6, 0.01);
    c.bench_function("coordinator_step_ring3", |b| {
        b.iter(|| {
            coordinator_step(
                &s.game,
                &s.regulation,
                black_box(&s.initial_game),
                &s.initial_plant.q,
                &s.initial_plant.c,
                &xi_dot,
                s.dt,
            )
        })
    });
}

fn bench_closed_loop(c: &mut Criterion) {
    let mut s = scenario("ring3_dynamic.toml");
    s.horizon = 0.1; // 100 steps
    c.bench_function("closed_loop_100_steps", |b| b.iter(|| run_closed_loop(&s)));
}

criterion_group!(
    benches,
    bench_game_map,
    bench_sensitivity,
    bench_oracle,
    bench_balance_projection,
    bench_coordinator_step,
    bench_closed_loop
);
criterion_main!(benches);
