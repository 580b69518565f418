//! Explore the one-dimensional double well `(o² - 0.25)²` on `|o| ≤ 1` and
//! print every minimum and decomposition point found.

use trajflow::constraints::with_slacks;
use trajflow::explorer::{explore, ExploreConfig};
use trajflow::objective::DoubleWell;
use trajflow::saddle::SaddleConfig;
use trajflow::Bounds;

fn main() -> trajflow::Result<()> {
    let obj = DoubleWell::new(1);
    let l = Bounds::uniform(1, 1.0)?;
    let x0 = with_slacks(&[0.3], &l)?;
    let cfg = ExploreConfig {
        seed: 7,
        saddle: SaddleConfig {
            q: Some(6),
            ..Default::default()
        },
        ..Default::default()
    };
    let reg = explore(&obj, None, &x0, &l, &cfg)?;
    for m in &reg.minima {
        println!("minimum {}: o = {:+.6}  f = {:.3e}  kkt = {:.1e}", m.id, m.x.weights()[0], m.sse_train, m.kkt);
    }
    for s in &reg.saddles {
        println!(
            "decomposition point: o = {:+.6}  s = {:+.6}  index {}  joins {:?}",
            s.x.weights()[0],
            s.x.slacks()[0],
            s.index,
            s.minima_pair
        );
    }
    println!("stopped: {}", reg.diagnostics.stop);
    Ok(())
}
