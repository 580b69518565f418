//! Train the second-order benchmark with the two reference trainers and
//! compare their test errors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajflow::baselines::{train_ebp, train_ga, EbpConfig, GaConfig};
use trajflow::benchmarks::{gen_second_order, NarmaConfig};
use trajflow::rnn::SseObjective;
use trajflow::Objective;

fn main() -> trajflow::Result<()> {
    let p = gen_second_order(&NarmaConfig::second_order())?;
    let (train, test) = (p.train(), p.test());
    let obj = SseObjective::new(p.spec, &train)?;
    let test_obj = SseObjective::new(p.spec, &test)?;
    let o0 = p.initial_point(&mut ChaCha8Rng::seed_from_u64(1))?;

    let ebp = train_ebp(&obj, o0.weights(), &p.bounds, &EbpConfig::default())?;
    let ga = train_ga(&obj, &p.bounds, &GaConfig::default())?;
    for (name, w) in [("EBP", &ebp.weights), ("GA", &ga.weights)] {
        println!(
            "{name}: train MSE {:.4e}  test MSE {:.4e}",
            obj.value(w)? / train.len() as f64,
            test_obj.value(w)? / test.len() as f64
        );
    }
    Ok(())
}
