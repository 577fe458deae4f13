use damm::bench::{run_study, BenchConfig, Study};
use std::time::Instant;

fn main() {
    let config = BenchConfig::for_study(Study::Misspec, 20260814);
    let start = Instant::now();
    let report = run_study(&config).unwrap();
    println!("elapsed: {:.1} s", start.elapsed().as_secs_f64());
    for metric in &report.metrics {
        println!("{}: median {:.4}", metric.name, metric.median);
        println!("  per-rep: {:?}", metric.per_replication);
    }
    for note in &report.notes {
        println!("note: {note}");
    }
}
