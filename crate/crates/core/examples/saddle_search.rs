//! Find a decomposition point between two minima of a two-dimensional
//! double well and descend from both sides of it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajflow::constraints::with_slacks;
use trajflow::explorer::Dedup;
use trajflow::flow::{descend, FlowConfig};
use trajflow::objective::DoubleWell;
use trajflow::saddle::{find_decomposition_points, SaddleConfig};
use trajflow::Bounds;

fn main() -> trajflow::Result<()> {
    let obj = DoubleWell::new(2);
    let l = Bounds::uniform(2, 1.0)?;
    let flow = FlowConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = with_slacks(&[0.4, 0.6], &l)?;
    let min = descend(&obj, &start, &l, &flow, &mut rng)?;
    println!("minimum at o = {:?} ({:?})", min.end.weights(), min.terminal);

    let cfg = SaddleConfig {
        q: Some(8),
        ..Default::default()
    };
    let out = find_decomposition_points(&obj, &min.end, &l, &cfg, &flow, &Dedup::default(), &mut rng)?;
    for d in &out.found {
        println!(
            "saddle o = {:?} f = {:.4}  ->  {:?} / {:?}",
            d.candidate.x.weights(),
            d.candidate.value,
            d.minima[0].weights(),
            d.minima[1].weights()
        );
    }
    println!("{:?}", out.diagnostics);
    Ok(())
}
