use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use gc_core::games::{solve_ef_game, solve_pebble_game, GameMode};
use gc_core::logic::{hintikka_type, rank_k_equiv, Fragment};
use gc_core::suites::{clique, cycle_graph, linear_order};

fn ef_games(c: &mut Criterion) {
    let l3 = linear_order(3);
    let l4 = linear_order(4);
    c.bench_function("ef_full_k3_l3_vs_l4", |b| {
        b.iter(|| solve_ef_game(black_box(&l3), black_box(&l4), 3, GameMode::Full).unwrap())
    });
    c.bench_function("ef_count_k2_l3_vs_l4", |b| {
        b.iter(|| solve_ef_game(black_box(&l3), black_box(&l4), 2, GameMode::Count).unwrap())
    });
}

fn pebble_games(c: &mut Criterion) {
    let two_triangles = clique(3).disjoint_union(&clique(3)).unwrap();
    let hexagon = cycle_graph(6);
    let mut group = c.benchmark_group("pebble");
    group.sample_size(20);
    group.bench_function("bijective_k2_2c3_vs_c6", |b| {
        b.iter(|| {
            solve_pebble_game(
                black_box(&two_triangles),
                black_box(&hexagon),
                2,
                GameMode::Count,
            )
            .unwrap()
        })
    });
    group.bench_function("existential_k3_k3_vs_k2", |b| {
        let k3 = clique(3);
        let k2 = clique(2);
        b.iter(|| solve_pebble_game(black_box(&k3), black_box(&k2), 3, GameMode::Ep).unwrap())
    });
    group.finish();
}

fn type_oracles(c: &mut Criterion) {
    let c6 = cycle_graph(6);
    c.bench_function("hintikka_counting_rank2_c6", |b| {
        b.iter(|| hintikka_type(black_box(&c6), &[], 2, true))
    });
    let two_triangles = clique(3).disjoint_union(&clique(3)).unwrap();
    c.bench_function("rank2_ep_verdict", |b| {
        b.iter(|| {
            rank_k_equiv(black_box(&two_triangles), black_box(&c6), 2, Fragment::Ep).unwrap()
        })
    });
}

criterion_group!(benches, ef_games, pebble_games, type_oracles);
criterion_main!(benches);
