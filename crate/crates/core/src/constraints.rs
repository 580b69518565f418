//! Box constraints on network weights, rewritten as equality constraints
//! through slack variables.
//!
//! Each weight `o_i` with limit `l_i` gets a slack `s_i` and the constraint
//! `h_i(x) = o_i² - l_i² + s_i² = 0`. The feasible set is therefore a product
//! of circles, one per weight, and everything in this module works pair by
//! pair: the Jacobian `Dh` has exactly two nonzeros per row and `Dh·Dhᵀ` is
//! diagonal, so the tangent projection is a 2×2 block per pair and is never
//! formed as a dense matrix.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative threshold below which a pair `(o_i, s_i)` is treated as the
/// degenerate point `(0, 0)`, scaled by `l_i²`.
pub const EPS_RANK: f64 = 1e-12;

/// Network dimensions: `n` inputs, `m` hidden nodes, `t` outputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RnnSpec {
    pub n: usize,
    pub m: usize,
    pub t: usize,
}

impl RnnSpec {
    pub fn new(n: usize, m: usize, t: usize) -> Result<Self> {
        if n == 0 || m == 0 || t == 0 {
            return Err(Error::Config(format!(
                "network dimensions must be positive (n={n}, m={m}, t={t})"
            )));
        }
        Ok(Self { n, m, t })
    }

    /// Number of weights, `m² + m·(n + t)`.
    pub fn n_params(&self) -> usize {
        self.m * self.m + self.m * (self.n + self.t)
    }

    /// Offset of the output matrix `V` in the packed weight vector.
    pub fn v_offset(&self) -> usize {
        0
    }

    /// Offset of the input matrix `W`.
    pub fn w_offset(&self) -> usize {
        self.t * self.m
    }

    /// Offset of the recurrent matrix `B`.
    pub fn b_offset(&self) -> usize {
        self.t * self.m + self.m * self.n
    }
}

/// Per-parameter absolute limits `|o_i| <= l_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bounds {
    limits: Vec<f64>,
}

impl Bounds {
    pub fn new(limits: Vec<f64>) -> Result<Self> {
        if let Some((i, l)) = limits
            .iter()
            .enumerate()
            .find(|(_, l)| !(l.is_finite() && **l > 0.0))
        {
            return Err(Error::Config(format!(
                "bound l_{i} = {l} must be positive and finite"
            )));
        }
        Ok(Self { limits })
    }

    /// Same limit for every parameter.
    pub fn uniform(n_params: usize, limit: f64) -> Result<Self> {
        Self::new(vec![limit; n_params])
    }

    /// Limits laid out in pack order: `V` entries, then `W`, then `B`.
    pub fn for_network(spec: &RnnSpec, v_limit: f64, w_limit: f64, b_limit: f64) -> Result<Self> {
        let mut limits = Vec::with_capacity(spec.n_params());
        limits.extend(std::iter::repeat_n(v_limit, spec.t * spec.m));
        limits.extend(std::iter::repeat_n(w_limit, spec.m * spec.n));
        limits.extend(std::iter::repeat_n(b_limit, spec.m * spec.m));
        Self::new(limits)
    }

    pub fn len(&self) -> usize {
        self.limits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.limits.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.limits
    }

    pub fn get(&self, i: usize) -> f64 {
        self.limits[i]
    }

    pub fn max(&self) -> f64 {
        self.limits.iter().copied().fold(0.0, f64::max)
    }

    /// Euclidean norm of the limit vector.
    pub fn norm(&self) -> f64 {
        self.limits.iter().map(|l| l * l).sum::<f64>().sqrt()
    }
}

/// Full optimization state `x = [o s]`: `n_p` weights followed by `n_p` slacks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ParameterVector(Vec<f64>);

impl ParameterVector {
    pub fn from_vec(x: Vec<f64>) -> Result<Self> {
        if x.len() % 2 != 0 || x.is_empty() {
            return Err(Error::dim("parameter vector", "even, nonzero length", x.len()));
        }
        Ok(Self(x))
    }

    pub fn from_parts(weights: &[f64], slacks: &[f64]) -> Result<Self> {
        if weights.len() != slacks.len() {
            return Err(Error::dim("slack vector", weights.len(), slacks.len()));
        }
        let mut x = Vec::with_capacity(2 * weights.len());
        x.extend_from_slice(weights);
        x.extend_from_slice(slacks);
        Self::from_vec(x)
    }

    pub fn zeros(n_params: usize) -> Self {
        Self(vec![0.0; 2 * n_params])
    }

    pub fn n_params(&self) -> usize {
        self.0.len() / 2
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.0[..self.n_params()]
    }

    pub fn slacks(&self) -> &[f64] {
        &self.0[self.n_params()..]
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        let n = self.n_params();
        &mut self.0[..n]
    }

    pub fn slacks_mut(&mut self) -> &mut [f64] {
        let n = self.n_params();
        &mut self.0[n..]
    }

    /// The `(o_i, s_i)` pair of constraint `i`.
    pub fn pair(&self, i: usize) -> (f64, f64) {
        (self.0[i], self.0[self.n_params() + i])
    }

    pub fn set_pair(&mut self, i: usize, (o, s): (f64, f64)) {
        let n = self.n_params();
        self.0[i] = o;
        self.0[n + i] = s;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }
}

/// Constraint residuals and the two nonzeros of each Jacobian row.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintEval {
    pub h: Vec<f64>,
    /// `(2·x_i, 2·x_{n_p+i})` for row `i` of `Dh`.
    pub dh_pairs: Vec<(f64, f64)>,
    /// Rows whose pair is below the rank threshold and treated as zero.
    pub degenerate: Vec<bool>,
}

impl ConstraintEval {
    pub fn max_violation(&self) -> f64 {
        self.h.iter().fold(0.0, |acc, h| acc.max(h.abs()))
    }

    /// `hᵀh`.
    pub fn squared_norm(&self) -> f64 {
        self.h.iter().map(|h| h * h).sum()
    }
}

fn check_lengths(x: &ParameterVector, l: &Bounds) -> Result<()> {
    if x.n_params() != l.len() {
        return Err(Error::dim("bounds", x.n_params(), l.len()));
    }
    Ok(())
}

fn check_shape(what: &'static str, m: &DMatrix<f64>, rows: usize, cols: usize) -> Result<()> {
    if m.nrows() != rows || m.ncols() != cols {
        return Err(Error::dim(
            what,
            format!("{rows}x{cols}"),
            format!("{}x{}", m.nrows(), m.ncols()),
        ));
    }
    Ok(())
}

fn push_row_major(out: &mut Vec<f64>, m: &DMatrix<f64>) {
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter());
    }
}

/// Flattens the weight matrices and slacks in canonical order: `V`, `W`, `B`
/// (each row-major), then the slacks.
pub fn pack(
    spec: &RnnSpec,
    w: &DMatrix<f64>,
    b: &DMatrix<f64>,
    v: &DMatrix<f64>,
    s: &[f64],
) -> Result<ParameterVector> {
    check_shape("W", w, spec.m, spec.n)?;
    check_shape("B", b, spec.m, spec.m)?;
    check_shape("V", v, spec.t, spec.m)?;
    let n_p = spec.n_params();
    if s.len() != n_p {
        return Err(Error::dim("slack vector", n_p, s.len()));
    }
    let mut x = Vec::with_capacity(2 * n_p);
    push_row_major(&mut x, v);
    push_row_major(&mut x, w);
    push_row_major(&mut x, b);
    x.extend_from_slice(s);
    ParameterVector::from_vec(x)
}

/// Inverse of [`pack`]: returns `(W, B, V, s)`.
pub fn unpack(
    x: &ParameterVector,
    spec: &RnnSpec,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>, Vec<f64>)> {
    let n_p = spec.n_params();
    if x.len() != 2 * n_p {
        return Err(Error::dim("parameter vector", 2 * n_p, x.len()));
    }
    let o = x.weights();
    let v = DMatrix::from_row_slice(spec.t, spec.m, &o[spec.v_offset()..spec.w_offset()]);
    let w = DMatrix::from_row_slice(spec.m, spec.n, &o[spec.w_offset()..spec.b_offset()]);
    let b = DMatrix::from_row_slice(spec.m, spec.m, &o[spec.b_offset()..n_p]);
    Ok((w, b, v, x.slacks().to_vec()))
}

/// Slacks that make each in-bound weight exactly feasible. Out-of-bound
/// weights get a zero slack and stay infeasible.
pub fn init_slacks(o: &[f64], l: &Bounds) -> Result<Vec<f64>> {
    if o.len() != l.len() {
        return Err(Error::dim("bounds", o.len(), l.len()));
    }
    Ok(o
        .iter()
        .zip(l.as_slice())
        .map(|(o, l)| (l * l - o * o).max(0.0).sqrt())
        .collect())
}

/// Convenience: weights plus slacks from [`init_slacks`].
pub fn with_slacks(o: &[f64], l: &Bounds) -> Result<ParameterVector> {
    let s = init_slacks(o, l)?;
    ParameterVector::from_parts(o, &s)
}

pub fn eval_constraints(x: &ParameterVector, l: &Bounds) -> Result<ConstraintEval> {
    check_lengths(x, l)?;
    let n_p = x.n_params();
    let mut h = Vec::with_capacity(n_p);
    let mut dh_pairs = Vec::with_capacity(n_p);
    let mut degenerate = Vec::with_capacity(n_p);
    for i in 0..n_p {
        let (o, s) = x.pair(i);
        let li = l.get(i);
        h.push(o * o - li * li + s * s);
        dh_pairs.push((2.0 * o, 2.0 * s));
        degenerate.push(o * o + s * s <= EPS_RANK * li * li);
    }
    Ok(ConstraintEval {
        h,
        dh_pairs,
        degenerate,
    })
}

/// Applies the tangent projection `I - Dhᵀ(DhDhᵀ)⁻¹Dh` to `g` pair by pair.
/// Degenerate pairs use the identity block.
pub fn project_tangent(g: &[f64], ce: &ConstraintEval) -> Result<Vec<f64>> {
    let n_p = ce.h.len();
    if g.len() != 2 * n_p {
        return Err(Error::dim("gradient", 2 * n_p, g.len()));
    }
    let mut out = g.to_vec();
    for i in 0..n_p {
        if ce.degenerate[i] {
            continue;
        }
        let (a, b) = ce.dh_pairs[i];
        let r2 = a * a + b * b;
        let dot = (a * g[i] + b * g[n_p + i]) / r2;
        out[i] = g[i] - a * dot;
        out[n_p + i] = g[n_p + i] - b * dot;
    }
    Ok(out)
}

/// The 2×2 block of the projection for pair `(o, s)`, row-major.
pub fn projection_block(o: f64, s: f64, l: f64) -> [[f64; 2]; 2] {
    let r2 = o * o + s * s;
    if r2 <= EPS_RANK * l * l {
        return [[1.0, 0.0], [0.0, 1.0]];
    }
    [
        [1.0 - o * o / r2, -o * s / r2],
        [-o * s / r2, 1.0 - s * s / r2],
    ]
}

/// Radially rescales every pair back onto its circle `o² + s² = l²`.
pub fn retract(x: &ParameterVector, l: &Bounds) -> Result<ParameterVector> {
    check_lengths(x, l)?;
    let mut out = x.clone();
    retract_in_place(&mut out, l)?;
    Ok(out)
}

pub(crate) fn retract_in_place(x: &mut ParameterVector, l: &Bounds) -> Result<()> {
    for i in 0..x.n_params() {
        let (o, s) = x.pair(i);
        let li = l.get(i);
        let r2 = o * o + s * s;
        if r2 <= EPS_RANK * li * li || !r2.is_finite() {
            return Err(Error::DegeneratePair { index: i });
        }
        let scale = li / r2.sqrt();
        x.set_pair(i, (o * scale, s * scale));
    }
    Ok(())
}

/// Least-squares Lagrange multipliers `argmin_λ ‖g + Dhᵀλ‖`. Zero for
/// degenerate rows.
pub fn multipliers(g: &[f64], ce: &ConstraintEval) -> Vec<f64> {
    let n_p = ce.h.len();
    (0..n_p)
        .map(|i| {
            if ce.degenerate[i] {
                return 0.0;
            }
            let (a, b) = ce.dh_pairs[i];
            -(a * g[i] + b * g[n_p + i]) / (a * a + b * b)
        })
        .collect()
}

/// Norm of the KKT stationarity residual `‖g + Dhᵀλ‖` at the least-squares
/// multipliers.
pub fn kkt_residual(x: &ParameterVector, g: &[f64], ce: &ConstraintEval) -> Result<f64> {
    let n_p = x.n_params();
    if g.len() != 2 * n_p || ce.h.len() != n_p {
        return Err(Error::dim("gradient", 2 * n_p, g.len()));
    }
    let lambda = multipliers(g, ce);
    let mut sum = 0.0;
    for i in 0..n_p {
        let (a, b) = ce.dh_pairs[i];
        let ra = g[i] + lambda[i] * a;
        let rb = g[n_p + i] + lambda[i] * b;
        sum += ra * ra + rb * rb;
    }
    Ok(sum.sqrt())
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn one_pair(o: f64, s: f64) -> ParameterVector {
        ParameterVector::from_parts(&[o], &[s]).unwrap()
    }

    #[test]
    fn n_params_matches_layout() {
        let spec = RnnSpec::new(1, 2, 1).unwrap();
        assert_eq!(spec.n_params(), 8);
        let z = |r, c| DMatrix::zeros(r, c);
        let x = pack(&spec, &z(2, 1), &z(2, 2), &z(1, 2), &[0.0; 8]).unwrap();
        assert_eq!(x.len(), 16);
        assert!(x.as_slice().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn pack_rejects_wrong_shape_and_names_matrix() {
        let spec = RnnSpec::new(1, 2, 1).unwrap();
        let z = |r, c| DMatrix::zeros(r, c);
        let err = pack(&spec, &z(2, 1), &z(2, 3), &z(1, 2), &[0.0; 8]).unwrap_err();
        assert!(err.to_string().contains(" B"), "{err}");
    }

    #[test]
    fn unpack_rejects_odd_length() {
        let spec = RnnSpec::new(1, 2, 1).unwrap();
        let x = ParameterVector::from_vec(vec![0.0; 14]).unwrap();
        assert!(unpack(&x, &spec).is_err());
        assert!(ParameterVector::from_vec(vec![0.0; 15]).is_err());
    }

    #[test]
    fn pack_order_is_v_w_b() {
        let spec = RnnSpec::new(2, 2, 1).unwrap();
        let w = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        let b = DMatrix::from_row_slice(2, 2, &[5.0, 6.0, 7.0, 8.0]);
        let v = DMatrix::from_row_slice(1, 2, &[9.0, 10.0]);
        let x = pack(&spec, &w, &b, &v, &[0.0; 10]).unwrap();
        assert_eq!(
            x.weights(),
            &[9.0, 10.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        );
    }

    #[test]
    fn init_slacks_cases() {
        let l = Bounds::new(vec![1.0, 1.0, 1.0]).unwrap();
        let s = init_slacks(&[0.6, 1.0, 2.0], &l).unwrap();
        assert!(close(s[0], 0.8, 1e-15));
        assert_eq!(s[1], 0.0);
        assert_eq!(s[2], 0.0);
        let x = ParameterVector::from_parts(&[0.6, 1.0, 2.0], &s).unwrap();
        let ce = eval_constraints(&x, &l).unwrap();
        assert!(ce.h[0].abs() < 1e-15);
        assert_eq!(ce.h[1], 0.0);
        assert_eq!(ce.h[2], 3.0);
    }

    #[test]
    fn constraint_rows() {
        let l = Bounds::uniform(1, 1.0).unwrap();
        let ce = eval_constraints(&one_pair(2.0, 0.0), &l).unwrap();
        assert_eq!(ce.h[0], 3.0);
        assert_eq!(ce.dh_pairs[0], (4.0, 0.0));
        let ce = eval_constraints(&one_pair(0.0, 0.0), &l).unwrap();
        assert_eq!(ce.h[0], -1.0);
        assert_eq!(ce.dh_pairs[0], (0.0, 0.0));
        assert!(ce.degenerate[0]);
    }

    #[test]
    fn projection_examples() {
        let l = Bounds::uniform(1, 1.0).unwrap();
        let ce = eval_constraints(&one_pair(0.6, 0.8), &l).unwrap();
        let p = project_tangent(&[1.0, 0.0], &ce).unwrap();
        assert!(close(p[0], 0.64, 1e-15) && close(p[1], -0.48, 1e-15));

        let ce = eval_constraints(&one_pair(0.0, 1.0), &l).unwrap();
        assert_eq!(project_tangent(&[0.3, -0.7], &ce).unwrap(), vec![0.3, 0.0]);

        let ce = eval_constraints(&one_pair(1.0, 0.0), &l).unwrap();
        assert_eq!(project_tangent(&[0.3, -0.7], &ce).unwrap(), vec![0.0, -0.7]);
    }

    #[test]
    fn degenerate_pair_uses_identity() {
        let l = Bounds::uniform(1, 1.0).unwrap();
        let ce = eval_constraints(&one_pair(0.0, 0.0), &l).unwrap();
        assert_eq!(project_tangent(&[0.3, -0.7], &ce).unwrap(), vec![0.3, -0.7]);
        assert_eq!(projection_block(0.0, 0.0, 1.0), [[1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn retraction_examples() {
        let l = Bounds::uniform(1, 1.0).unwrap();
        let r = retract(&one_pair(1.2, 1.6), &l).unwrap();
        assert!(close(r.pair(0).0, 0.6, 1e-15) && close(r.pair(0).1, 0.8, 1e-15));

        let x = one_pair(0.6, 0.8);
        let r = retract(&x, &l).unwrap();
        assert!(close(r.pair(0).0, 0.6, 1e-15) && close(r.pair(0).1, 0.8, 1e-15));

        match retract(&one_pair(0.0, 0.0), &l) {
            Err(Error::DegeneratePair { index }) => assert_eq!(index, 0),
            other => panic!("expected degenerate pair error, got {other:?}"),
        }
    }

    #[test]
    fn kkt_residual_cases() {
        let l = Bounds::uniform(2, 1.0).unwrap();
        let x = ParameterVector::from_parts(&[0.6, 0.0], &[0.8, 1.0]).unwrap();
        let ce = eval_constraints(&x, &l).unwrap();
        assert_eq!(kkt_residual(&x, &[0.0; 4], &ce).unwrap(), 0.0);
        assert_eq!(multipliers(&[0.0; 4], &ce), vec![0.0, 0.0]);
        // purely radial gradient: a multiple of each Dh row
        let g = [0.6 * 3.0, 0.0, 0.8 * 3.0, -2.0];
        assert!(kkt_residual(&x, &g, &ce).unwrap() < 1e-15);
    }
}
