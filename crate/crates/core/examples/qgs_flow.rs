//! Pull an infeasible point onto the constraint set with the quotient
//! gradient flow and watch `‖h‖²` fall.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use trajflow::flow::{to_feasible, FlowConfig};
use trajflow::{Bounds, ParameterVector};

fn main() -> trajflow::Result<()> {
    let l = Bounds::new(vec![1.0, 5.0, 10.0])?;
    let x0 = ParameterVector::from_parts(&[3.0, -0.2, 40.0], &[0.1, 8.0, -2.0])?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let traj = to_feasible(&x0, &l, &FlowConfig::default(), &mut rng)?;
    let stride = (traj.samples.len() / 8).max(1);
    for s in traj.samples.iter().step_by(stride) {
        println!("t = {:10.4e}  ‖h‖² = {:.3e}  max|h| = {:.3e}", s.t, s.lyapunov, s.max_violation);
    }
    let end = &traj.end;
    println!("{:?} after {} samples; o = {:?}", traj.terminal, traj.samples.len(), end.weights());
    Ok(())
}
