//! Simulate the Bouc-Wen oscillator under a sine force, measure the
//! hysteresis loop, then build the identification dataset.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajflow::benchmarks::{gen_boucwen, loop_area, simulate_boucwen, BoucWenConfig, BoucWenParams, Excitation, Signal};

fn main() -> trajflow::Result<()> {
    let params = BoucWenParams::default();
    let exc = Excitation::Sine {
        amplitude: 50.0,
        frequency: 10.0,
    };
    let signal = Signal::new(&exc, &mut ChaCha8Rng::seed_from_u64(0))?;
    let dt = 1.0 / 15000.0;
    let states = simulate_boucwen(&params, &signal, dt, 1500)?;
    let y: Vec<f64> = states.iter().map(|s| s[0]).collect();
    let z: Vec<f64> = states.iter().map(|s| s[2]).collect();
    let peak = y.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    println!("peak displacement {peak:.3e}, loop area in (y, z) {:.3e}", loop_area(&y, &z));

    let p = gen_boucwen(&BoucWenConfig::default())?;
    println!(
        "dataset: {} samples, {} inputs, {} train; target mean {:.3e} std {:.3e}",
        p.data.len(),
        p.spec.n,
        p.n_train,
        p.scaling.target_mean[0],
        p.scaling.target_std[0]
    );
    Ok(())
}
