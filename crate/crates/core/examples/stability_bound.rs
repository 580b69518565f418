//! Largest perturbation growth rate that keeps a trained network's descent
//! flow stable, for a toy setting and for a generated NARMA dataset.

use trajflow::benchmarks::{gen_narma, NarmaConfig};
use trajflow::explorer::{stability_bound, StabilityBoundInput};

fn main() -> trajflow::Result<()> {
    let unit = StabilityBoundInput {
        n_samples: 1.0,
        m: 1.0,
        n: 1.0,
        k_u: 1.0,
        k_y: 1.0,
    };
    println!("unit case: {}", stability_bound(&unit)?);

    let p = gen_narma(&NarmaConfig::default())?;
    let train = p.train();
    let inp = StabilityBoundInput {
        n_samples: train.len() as f64,
        m: p.spec.m as f64,
        n: p.spec.n as f64,
        k_u: train.input_norm_max(),
        k_y: train.target_norm_max(),
    };
    println!("NARMA: k_u = {:.4}  k_y = {:.4}  gamma_max = {:.4e}", inp.k_u, inp.k_y, stability_bound(&inp)?);
    Ok(())
}
