// Temporal edge list -> per-segment frequency matrix -> penalized fit, with
// the report written as CSV to stdout.

use std::path::Path;

use onestep::cli::dataset::{build_frequency_matrix, parse_edge_list_str};
use onestep::cli::emit::{emit_report, Format, LowRankBatch};
use onestep::experiments::{lambda_sweep, lambda_zero_solution};

const EDGES: &str = "\
# src dst timestamp
0 1 0
0 1 10
1 2 250
2 0 260
0 1 500
3 1 700
1 3 990
0 2 1000
";

pub fn run() -> onestep::Result<()> {
    let ds = parse_edge_list_str(EDGES, Path::new("inline"), 49)?;
    println!("{} events over {} nodes", ds.events.len(), ds.node_count);
    let model = build_frequency_matrix(&ds, 0.0)?;
    println!("frequencies:{}", model.freq);
    let lam0 = lambda_zero_solution(&model);
    let entries = lambda_sweep(&model, &[0.5 * lam0], 1.0, 100)?;
    let batch = LowRankBatch {
        node_count: model.n,
        lambda_zero_solution: lam0,
        entries,
    };
    emit_report(&batch, Path::new("-"), Format::Csv)
}

#[allow(dead_code)]
fn main() {
    run().unwrap();
}
