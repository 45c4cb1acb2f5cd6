//! Parallel versus sequential search. With the default `parallel` feature
//! each benchmark runs once on a single worker and once on the full pool;
//! built with `--no-default-features` both variants take the sequential path.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use strong_ramsey::game::{MoveSpec, Player, Position};
use strong_ramsey::par;
use strong_ramsey::solver::{solve, SearchLimits};
use strong_ramsey::strategy::{OpeningClass, Phase, StrategyState};
use strong_ramsey::symmetry::{canonical_key, reduced_moves, Role, RoleMap};
use strong_ramsey::verifier::{opening_base, verify, VerifyOptions};

fn thread_variants() -> Vec<(&'static str, usize)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    if par::is_parallel() {
        vec![("one-worker", 1), ("pool", all)]
    } else {
        vec![("sequential", 1)]
    }
}

/// Subtree of the full game after P2's third edge lands on a fresh vertex
/// hanging off `x`: the generic continuation to the end phase.
fn generic_opening() -> (Position, StrategyState) {
    let (base, roles) = opening_base();
    let x = roles.get(Role::X).expect("x assigned");
    let p = base.apply(&MoveSpec::with_fresh(x, Player::P2)).expect("legal");
    let s = StrategyState { plan: Some(OpeningClass::Generic), ..StrategyState::in_phase(Phase::Opening, roles, 3) };
    (p, s)
}

fn bench_verify(c: &mut Criterion) {
    let (p, s) = generic_opening();
    let bound = 24 - p.total_edges() as u32;
    let mut group = c.benchmark_group("verify_generic_opening");
    group.sample_size(10);
    for (name, threads) in thread_variants() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| {
                par::with_threads(threads, || verify(black_box(&p), &s, VerifyOptions::new(bound)).expect("wins"))
            })
        });
    }
    group.finish();
}

/// Solves every successor class of a mid-game t=2 position.
fn bench_expand(c: &mut Criterion) {
    let p = Position::from_edges(
        2,
        Player::P2,
        &[(0, 1, Player::P1), (2, 3, Player::P2), (0, 2, Player::P1), (1, 3, Player::P2), (0, 4, Player::P1)],
        false,
    )
    .expect("legal");
    let classes = reduced_moves(&p, &RoleMap::new()).expect("ongoing");
    let succ: Vec<Position> = classes.iter().map(|m| p.apply(&m.rep).expect("legal")).collect();
    let limits = SearchLimits::new(7, 10_000_000).expect("positive");
    let mut group = c.benchmark_group("expand_p2_node");
    group.sample_size(10);
    for (name, threads) in thread_variants() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| par::with_threads(threads, || par::map(&succ, |q| solve(black_box(q), limits))))
        });
    }
    group.finish();
}

fn bench_keys(c: &mut Criterion) {
    // a path of alternating colours, grown one vertex at a time
    let positions: Vec<Position> = (2usize..=12)
        .map(|n| {
            let edges: Vec<_> = (0..n - 1)
                .map(|v| (v, v + 1, if v % 2 == 0 { Player::P1 } else { Player::P2 }))
                .chain((0..n.saturating_sub(2)).map(|v| (v, v + 2, if v % 3 == 0 { Player::P2 } else { Player::P1 })))
                .collect();
            Position::from_edges(3, Player::P1, &edges, true).expect("legal")
        })
        .collect();
    let mut group = c.benchmark_group("canonical_keys");
    for (name, threads) in thread_variants() {
        group.bench_function(BenchmarkId::new(name, threads), |b| {
            b.iter(|| {
                par::with_threads(threads, || par::map(&positions, |q| canonical_key(black_box(q), &RoleMap::new())))
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_verify, bench_expand, bench_keys);
criterion_main!(benches);
