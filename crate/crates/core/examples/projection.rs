//! The slack-variable constraint geometry: evaluate `h(x)`, project a
//! gradient onto the tangent space and check the projector algebra.

use trajflow::constraints::{eval_constraints, project_tangent, projection_block, with_slacks};
use trajflow::Bounds;

fn main() -> trajflow::Result<()> {
    let l = Bounds::new(vec![1.0, 2.0, 0.5])?;
    let x = with_slacks(&[0.3, -1.5, 0.5], &l)?;
    let ce = eval_constraints(&x, &l)?;
    println!("x = {:?}", x.as_slice());
    println!("max |h| = {:.2e}", ce.max_violation());

    let g = vec![1.0, -2.0, 0.5, 0.25, 3.0, -1.0];
    let pg = project_tangent(&g, &ce)?;
    println!("P g = {pg:?}");
    for i in 0..l.len() {
        let (o, s) = x.pair(i);
        let normal = 2.0 * o * pg[i] + 2.0 * s * pg[l.len() + i];
        let p = projection_block(o, s, l.get(i));
        let trace = p[0][0] + p[1][1];
        println!("pair {i}: Dh·Pg = {normal:+.1e}  trace P = {trace:.12}");
    }
    let twice = project_tangent(&pg, &ce)?;
    let idem = twice.iter().zip(&pg).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("|P²g - Pg|_inf = {idem:.1e}");
    Ok(())
}
