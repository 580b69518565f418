//! End-to-end NARMA-10 identification through the experiment harness:
//! generate data, train with each method and print the comparison table.
//!
//! The trajectory-based run here uses a small budget so it finishes in
//! about a minute; `configs/narma.toml` holds the full setting.

use std::path::PathBuf;

use trajflow::harness::{cmd_train, comparison_table, ExperimentConfig, Method, Problem};

fn main() -> trajflow::Result<()> {
    let root = std::env::temp_dir().join("trajflow-narma-example");
    let mut reports = Vec::new();
    for method in [Method::Dtb, Method::Ga, Method::Ebp] {
        let mut cfg = ExperimentConfig {
            problem: Problem::Narma,
            method,
            seed: 1,
            output: root.join(method.name()),
            ..Default::default()
        };
        cfg.explore.max_evaluations = 1_000_000;
        cfg.explore.saddle.q = Some(4);
        cfg.explore.flow.polish_iterations = 300;
        cfg.explore.flow.record_stride = 0;
        let r = cmd_train(&cfg)?;
        for f in &r.flags {
            println!("{}: flagged: {f}", method.name());
        }
        reports.push(r);
    }
    print!("{}", comparison_table(&reports));
    println!("runs written under {}", PathBuf::from(&root).display());
    Ok(())
}
