//! Objectives over the weight block `o` of a parameter vector.
//!
//! Everything downstream (flows, saddle search, explorer, baselines) talks to
//! an [`Objective`] rather than to the network directly, so small analytic
//! test functions can stand in for the training error.

use crate::constraints::ParameterVector;
use crate::error::{Error, Result};

/// A smooth function of the weights. The slack half of a parameter vector
/// never enters the objective.
pub trait Objective: Sync {
    /// Number of weights `n_p`.
    fn dim(&self) -> usize;

    fn value(&self, o: &[f64]) -> Result<f64>;

    /// Writes `∂f/∂o` into `grad` and returns `f(o)`.
    fn value_grad(&self, o: &[f64], grad: &mut [f64]) -> Result<f64>;
}

/// `(f, ∇f)` over the full `2·n_p` vector; the slack components are zero.
pub fn full_gradient(obj: &dyn Objective, x: &ParameterVector) -> Result<(f64, Vec<f64>)> {
    let n_p = x.n_params();
    if obj.dim() != n_p {
        return Err(Error::dim("objective", obj.dim(), n_p));
    }
    let mut g = vec![0.0; 2 * n_p];
    let f = obj.value_grad(x.weights(), &mut g[..n_p])?;
    Ok((f, g))
}

/// Separable double well `Σ (o_i² - c)²`; with `c = 0.25` the minima of
/// each coordinate sit at `±0.5` and the saddle at `0`.
#[derive(Debug, Clone)]
pub struct DoubleWell {
    pub dim: usize,
    pub center: f64,
}

impl DoubleWell {
    pub fn new(dim: usize) -> Self {
        Self { dim, center: 0.25 }
    }
}

impl Objective for DoubleWell {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, o: &[f64]) -> Result<f64> {
        Ok(o.iter().map(|v| (v * v - self.center).powi(2)).sum())
    }

    fn value_grad(&self, o: &[f64], grad: &mut [f64]) -> Result<f64> {
        let mut f = 0.0;
        for (g, v) in grad.iter_mut().zip(o) {
            let d = v * v - self.center;
            f += d * d;
            *g = 4.0 * v * d;
        }
        Ok(f)
    }
}

/// Diagonal quadratic `Σ c_i o_i²`. Negative coefficients give saddles.
#[derive(Debug, Clone)]
pub struct Quadratic {
    pub coeffs: Vec<f64>,
}

impl Quadratic {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn bowl(dim: usize) -> Self {
        Self::new(vec![1.0; dim])
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.coeffs.len()
    }

    fn value(&self, o: &[f64]) -> Result<f64> {
        Ok(o.iter().zip(&self.coeffs).map(|(v, c)| c * v * v).sum())
    }

    fn value_grad(&self, o: &[f64], grad: &mut [f64]) -> Result<f64> {
        for ((g, v), c) in grad.iter_mut().zip(o).zip(&self.coeffs) {
            *g = 2.0 * c * v;
        }
        self.value(o)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_well_gradient_matches_difference() {
        let f = DoubleWell::new(3);
        let o = [0.1, -0.7, 0.45];
        let mut g = [0.0; 3];
        f.value_grad(&o, &mut g).unwrap();
        for i in 0..3 {
            let mut p = o;
            let mut m = o;
            p[i] += 1e-6;
            m[i] -= 1e-6;
            let fd = (f.value(&p).unwrap() - f.value(&m).unwrap()) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }

    #[test]
    fn full_gradient_has_zero_slack_part() {
        let f = Quadratic::new(vec![1.0, -1.0]);
        let x = ParameterVector::from_parts(&[0.5, 0.25], &[1.0, 2.0]).unwrap();
        let (v, g) = full_gradient(&f, &x).unwrap();
        assert_eq!(v, 0.25 - 0.0625);
        assert_eq!(g, vec![1.0, -0.5, 0.0, 0.0]);
    }
}
