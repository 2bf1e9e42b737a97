use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use topo_rec::characteristics;
use topo_rec::par::Execution;
use topo_rec::sampler::{self, AcceptanceFloors, GenerationConfig};
use topo_rec::synthetic;
use topo_rec::Side;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn bench(c: &mut Criterion) {
    let graph = synthetic::connected_power_law(2000, 1500, 40_000, 2.5, 7);

    let mut group = c.benchmark_group("characteristics");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("compute_all", name), &exec, |b, &exec| {
            b.iter(|| characteristics::compute_all_with(&graph, exec).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("user_clustering", name), &exec, |b, &exec| {
            b.iter(|| characteristics::clustering_coefficient_with(&graph, Side::User, exec))
        });
    }
    group.finish();

    let config = GenerationConfig {
        sample_count: 32,
        rate_range: (0.3, 0.6),
        master_seed: 1,
        floors: AcceptanceFloors {
            min_users: 50,
            min_items: 50,
            min_edges: 500,
        },
        ..GenerationConfig::default()
    };
    let mut group = c.benchmark_group("sampling");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("generate_samples", name), &exec, |b, &exec| {
            b.iter(|| sampler::generate_samples(&graph, &config, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
