use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use wpcn_bench::{feasible_seed, instance};
use wpcn_core::baselines::{run_scheme, GridSpec, Scheme};
use wpcn_core::problems::{solve_relaxed, BuildOptions};
use wpcn_core::{optimize, ProblemKind, Tolerances};

const KINDS: [ProblemKind; 3] = [ProblemKind::P1, ProblemKind::P2, ProblemKind::P3];

fn relaxed(c: &mut Criterion) {
    let mut g = c.benchmark_group("relaxed");
    for kind in KINDS {
        for n in [2, 4, 8] {
            let (p, ch) = instance(n, feasible_seed(kind, n, 0));
            g.bench_with_input(BenchmarkId::new(format!("{kind:?}"), n), &n, |b, _| {
                b.iter(|| solve_relaxed(kind, &p, &ch, &BuildOptions::default(), &Tolerances::default()).unwrap())
            });
        }
    }
    g.finish();
}

fn end_to_end(c: &mut Criterion) {
    let mut g = c.benchmark_group("optimize");
    for kind in KINDS {
        let (p, ch) = instance(4, feasible_seed(kind, 4, 0));
        g.bench_function(format!("{kind:?}/N=4"), |b| b.iter(|| optimize(kind, black_box(&p), &ch, &Tolerances::default()).unwrap()));
    }
    g.finish();
}

fn baselines(c: &mut Criterion) {
    let mut g = c.benchmark_group("baseline");
    let (p, ch) = instance(4, feasible_seed(ProblemKind::P1, 4, 0));
    for s in Scheme::ALL {
        g.bench_function(s.name(), |b| b.iter(|| run_scheme(s, &p, &ch, ProblemKind::P1, ch.seed, &Tolerances::default()).unwrap()));
    }
    g.finish();
}

fn oracle(c: &mut Criterion) {
    let mut g = c.benchmark_group("oracle");
    g.sample_size(10);
    let (p, ch) = instance(2, feasible_seed(ProblemKind::P1, 2, 0));
    let grid = GridSpec { tau_div: 24, theta_div: 16, power_div: 24 };
    g.bench_function("wsr_fixed/coarse", |b| {
        b.iter(|| wpcn_core::baselines::brute_force_wsr(&p, &ch, wpcn_core::PowerMode::Fixed, grid).unwrap())
    });
    g.finish();
}

criterion_group!(benches, relaxed, end_to_end, baselines, oracle);
criterion_main!(benches);
