//! Tangent-space calculus on the feasible set.
//!
//! A feasible point is a product of circles `o_i² + s_i² = l_i²`, so its
//! tangent space has one direction per pair, `t_i = (s_i, -o_i)/r_i`.
//! Working in these `n_p` arc-length coordinates instead of the ambient
//! `2·n_p` space drops the radial directions exactly and halves the size of
//! every eigenproblem.
//!
//! The Hessian here is the Hessian of the Lagrangian projected onto the
//! tangent space, `Pr·(∇²f + Σ λ_i ∇²h_i)·Pr`. At a stationary point this is
//! the matrix whose inertia decides between minimum and saddle; the
//! multiplier term matters whenever a weight presses against its bound.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::constraints::{Bounds, ParameterVector, EPS_RANK};
use crate::error::{Error, Result};
use crate::objective::Objective;
use crate::rnn::{hessian_step, weight_hessian_fd};

/// Unit tangent `(t_o, t_s)` of each pair. Degenerate pairs get `(1, 0)`.
pub fn tangent_basis(x: &ParameterVector, l: &Bounds) -> Vec<(f64, f64)> {
    (0..x.n_params())
        .map(|i| {
            let (o, s) = x.pair(i);
            let r2 = o * o + s * s;
            if r2 <= EPS_RANK * l.get(i) * l.get(i) {
                (1.0, 0.0)
            } else {
                let r = r2.sqrt();
                (s / r, -o / r)
            }
        })
        .collect()
}

/// Maps tangent coordinates to an ambient `2·n_p` vector.
pub fn lift(basis: &[(f64, f64)], xi: &[f64]) -> Vec<f64> {
    let n_p = basis.len();
    let mut out = vec![0.0; 2 * n_p];
    for (i, ((to, ts), v)) in basis.iter().zip(xi).enumerate() {
        out[i] = to * v;
        out[n_p + i] = ts * v;
    }
    out
}

/// Tangent coordinates of an ambient vector (its projection onto the basis).
pub fn lower(basis: &[(f64, f64)], v: &[f64]) -> Vec<f64> {
    let n_p = basis.len();
    basis
        .iter()
        .enumerate()
        .map(|(i, (to, ts))| to * v[i] + ts * v[n_p + i])
        .collect()
}

/// Moves along each circle by arc length `xi_i` (the exponential map).
pub fn exp_step(x: &ParameterVector, xi: &[f64]) -> ParameterVector {
    let mut out = x.clone();
    for (i, d) in xi.iter().enumerate() {
        let (o, s) = x.pair(i);
        let r = (o * o + s * s).sqrt();
        if r == 0.0 {
            continue;
        }
        let (sin, cos) = (d / r).sin_cos();
        out.set_pair(i, (o * cos + s * sin, s * cos - o * sin));
    }
    out
}

/// Objective value and gradients at a point, in both coordinate systems.
#[derive(Debug, Clone)]
pub struct TangentGradient {
    pub value: f64,
    /// `∂f/∂o`.
    pub weight_grad: Vec<f64>,
    /// Riemannian gradient in arc-length coordinates; its norm equals
    /// `‖Pr·∇f‖`.
    pub grad: Vec<f64>,
    pub basis: Vec<(f64, f64)>,
}

impl TangentGradient {
    pub fn norm(&self) -> f64 {
        self.grad.iter().map(|g| g * g).sum::<f64>().sqrt()
    }
}

pub fn tangent_gradient(obj: &dyn Objective, x: &ParameterVector, l: &Bounds) -> Result<TangentGradient> {
    let n_p = x.n_params();
    if obj.dim() != n_p || l.len() != n_p {
        return Err(Error::dim("objective", n_p, obj.dim()));
    }
    let mut weight_grad = vec![0.0; n_p];
    let value = obj.value_grad(x.weights(), &mut weight_grad)?;
    let basis = tangent_basis(x, l);
    let grad = basis
        .iter()
        .zip(&weight_grad)
        .map(|((to, _), g)| to * g)
        .collect();
    Ok(TangentGradient {
        value,
        weight_grad,
        grad,
        basis,
    })
}

/// Projected Lagrangian Hessian in arc-length coordinates.
pub fn tangent_hessian(
    obj: &dyn Objective,
    x: &ParameterVector,
    tg: &TangentGradient,
) -> Result<DMatrix<f64>> {
    let n_p = x.n_params();
    let f_oo = weight_hessian_fd(obj, x.weights(), hessian_step(x))?;
    let mut h = DMatrix::zeros(n_p, n_p);
    for j in 0..n_p {
        let tj = tg.basis[j].0;
        for i in 0..n_p {
            h[(i, j)] = tg.basis[i].0 * tj * f_oo[(i, j)];
        }
    }
    for i in 0..n_p {
        let (o, s) = x.pair(i);
        let r2 = o * o + s * s;
        if r2 > 0.0 {
            h[(i, i)] -= o * tg.weight_grad[i] / r2;
        }
    }
    Ok(h)
}

/// Eigen-decomposition of a symmetric matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub eigenvalues: Vec<f64>,
    /// Column `j` is the unit eigenvector of `eigenvalues[j]`.
    pub eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn new(matrix: &DMatrix<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Eigen("matrix is not square".into()));
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen("matrix has non-finite entries".into()));
        }
        let eig = SymmetricEigen::try_new(matrix.clone(), f64::EPSILON, 0)
            .ok_or_else(|| Error::Eigen("symmetric eigen-solver did not converge".into()))?;
        let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
        // index order breaks ties so the result does not depend on the sort
        order.sort_by(|&a, &b| {
            eig.eigenvalues[a]
                .total_cmp(&eig.eigenvalues[b])
                .then(a.cmp(&b))
        });
        let eigenvalues = order.iter().map(|&j| eig.eigenvalues[j]).collect();
        let mut eigenvectors = DMatrix::zeros(matrix.nrows(), matrix.ncols());
        for (dst, &src) in order.iter().enumerate() {
            let mut col = eig.eigenvectors.column(src).clone_owned();
            // deterministic sign: largest-magnitude entry positive
            let (imax, _) = col
                .iter()
                .enumerate()
                .fold((0, 0.0), |acc, (i, v)| if v.abs() > acc.1 { (i, v.abs()) } else { acc });
            if col[imax] < 0.0 {
                col.neg_mut();
            }
            eigenvectors.set_column(dst, &col);
        }
        Ok(Self {
            eigenvalues,
            eigenvectors,
        })
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn vector(&self, j: usize) -> DVector<f64> {
        self.eigenvectors.column(j).clone_owned()
    }

    /// Coordinates `Vᵀg` of a vector in the eigenbasis.
    pub fn coords(&self, g: &[f64]) -> Vec<f64> {
        let g = DVector::from_column_slice(g);
        (self.eigenvectors.transpose() * g).iter().copied().collect()
    }

    /// `Σ_j c_j v_j`.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let c = DVector::from_column_slice(c);
        (&self.eigenvectors * c).iter().copied().collect()
    }

    /// `Σ λ_j v_j v_jᵀ`.
    pub fn reconstruct(&self) -> DMatrix<f64> {
        let lam = DMatrix::from_diagonal(&DVector::from_column_slice(&self.eigenvalues));
        &self.eigenvectors * lam * self.eigenvectors.transpose()
    }

    /// Threshold below which an eigenvalue counts as zero.
    pub fn zero_threshold(&self) -> f64 {
        let max_abs = self.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        1e-6 * (1.0 + max_abs)
    }

    /// Unit direction of lowest curvature. When the lowest eigenvalue is
    /// tied (within the zero threshold) the direction in the tied eigenspace
    /// most aligned with `g` is used; without any overlap the lowest-index
    /// eigenvector is taken.
    pub fn lowest_direction(&self, g: &[f64]) -> Vec<f64> {
        let tol = self.zero_threshold();
        let lam1 = self.eigenvalues[0];
        let tied: Vec<usize> = (0..self.dim())
            .take_while(|&j| self.eigenvalues[j] - lam1 <= tol)
            .collect();
        if tied.len() > 1 {
            let c = self.coords(g);
            let mut d = vec![0.0; self.dim()];
            for &j in &tied {
                for (i, v) in self.eigenvectors.column(j).iter().enumerate() {
                    d[i] += c[j] * v;
                }
            }
            let n = d.iter().map(|v| v * v).sum::<f64>().sqrt();
            let gn = g.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 1e-12 * (1.0 + gn) {
                return d.iter().map(|v| v / n).collect();
            }
        }
        self.vector(0).iter().copied().collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{eval_constraints, project_tangent};
    use crate::objective::{full_gradient, DoubleWell, Quadratic};

    #[test]
    fn tangent_gradient_norm_matches_projection() {
        let obj = DoubleWell::new(3);
        let l = Bounds::new(vec![1.0, 2.0, 0.5]).unwrap();
        let x = crate::constraints::with_slacks(&[0.3, -1.5, 0.1], &l).unwrap();
        let tg = tangent_gradient(&obj, &x, &l).unwrap();
        let (_, g) = full_gradient(&obj, &x).unwrap();
        let ce = eval_constraints(&x, &l).unwrap();
        let p = project_tangent(&g, &ce).unwrap();
        let lifted = lift(&tg.basis, &tg.grad);
        for (a, b) in lifted.iter().zip(&p) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn exp_step_stays_on_circle() {
        let l = Bounds::new(vec![1.0, 3.0]).unwrap();
        let x = crate::constraints::with_slacks(&[0.6, -2.0], &l).unwrap();
        let y = exp_step(&x, &[0.4, -1.3]);
        let ce = eval_constraints(&y, &l).unwrap();
        assert!(ce.max_violation() < 1e-14);
    }

    #[test]
    fn bound_maximum_has_negative_curvature() {
        // f = (o² - 0.25)² at o = 1, s = 0: stationary on the circle and a
        // local maximum along it, although Pr·∇²f·Pr vanishes there.
        let obj = DoubleWell::new(1);
        let l = Bounds::uniform(1, 1.0).unwrap();
        let x = ParameterVector::from_parts(&[1.0], &[0.0]).unwrap();
        let tg = tangent_gradient(&obj, &x, &l).unwrap();
        assert_eq!(tg.norm(), 0.0);
        let h = tangent_hessian(&obj, &x, &tg).unwrap();
        assert!((h[(0, 0)] + 3.0).abs() < 1e-9, "{}", h[(0, 0)]);
    }

    #[test]
    fn spectral_reconstruction_and_order() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, -1.0, 0.0, -1.0, -4.0]);
        let sd = SpectralData::new(&m).unwrap();
        assert!(sd.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        assert!((sd.reconstruct() - &m).norm() / m.norm() < 1e-12);
        let gram = sd.eigenvectors.transpose() * &sd.eigenvectors;
        assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn tie_break_follows_gradient() {
        let obj = Quadratic::bowl(2);
        let l = Bounds::uniform(2, 100.0).unwrap();
        let x = crate::constraints::with_slacks(&[0.7, 0.0], &l).unwrap();
        let tg = tangent_gradient(&obj, &x, &l).unwrap();
        let h = tangent_hessian(&obj, &x, &tg).unwrap();
        let sd = SpectralData::new(&h).unwrap();
        let v = sd.lowest_direction(&tg.grad);
        assert!((v[0].abs() - 1.0).abs() < 1e-6 && v[1].abs() < 1e-6, "{v:?}");
    }
}
