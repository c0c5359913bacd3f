//! Sequential against level-parallel graph construction.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tbnet_core::graph::{build_graph, BuildConfig};
use tbnet_core::net::{parse_net, TbNet};
use tbnet_core::rational::int;
use tbnet_core::symbolic::EngineConfig;

fn model(name: &str) -> TbNet {
    let path = format!("{}/../../models/{name}", env!("CARGO_MANIFEST_DIR"));
    parse_net(&std::fs::read_to_string(path).expect("fixture")).expect("fixture parses")
}

fn build(c: &mut Criterion) {
    let cases = [
        ("running_example", model("running_example.tb"), BuildConfig::default()),
        (
            "running_example_no_ta",
            model("running_example.tb"),
            BuildConfig { engine: EngineConfig::without_ta(), time_limit: Some(int(3)), ..BuildConfig::default() },
        ),
        (
            "gas_burner_0.5_first_500",
            model("gas_burner_0.5.tb"),
            BuildConfig { max_states: 500, ..BuildConfig::default() },
        ),
    ];
    let mut group = c.benchmark_group("build_graph");
    group.sample_size(10);
    for (name, net, config) in &cases {
        for parallel in [false, true] {
            let mode = if parallel { "parallel" } else { "sequential" };
            let config = BuildConfig { parallel, ..*config };
            group.bench_with_input(BenchmarkId::new(mode, name), &config, |b, cfg| {
                b.iter(|| black_box(build_graph(net, *cfg)).nodes.len())
            });
        }
    }
    group.finish();
}

criterion_group!(benches, build);
criterion_main!(benches);
