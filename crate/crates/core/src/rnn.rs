//! Single-hidden-layer recurrent network:
//!
//! ```text
//! z(k) = tanh(W·u(k) + B·z(k-1)),   ŷ(k) = V·z(k)
//! ```
//!
//! with the sum of squared output errors as training objective. Gradients
//! are exact (backpropagation through the full horizon); the Hessian is a
//! central difference of the analytic gradient.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{unpack, ParameterVector, RnnSpec};
use crate::error::{Error, Result};
use crate::objective::{full_gradient, Objective};

/// Hidden-node nonlinearity. `Identity` exists as a linear test hook.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Activation {
    #[default]
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, a: f64) -> f64 {
        match self {
            Activation::Tanh => a.tanh(),
            Activation::Identity => a,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    fn slope(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - z * z,
            Activation::Identity => 1.0,
        }
    }
}

/// Weight matrices `W` (m×n), `B` (m×m), `V` (t×m).
#[derive(Debug, Clone, PartialEq)]
pub struct RnnWeights {
    pub w: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl RnnWeights {
    pub fn from_parameters(x: &ParameterVector, spec: &RnnSpec) -> Result<Self> {
        let (w, b, v, _) = unpack(x, spec)?;
        Ok(Self { w, b, v })
    }

    pub fn spec(&self) -> Result<RnnSpec> {
        let spec = RnnSpec::new(self.w.ncols(), self.w.nrows(), self.v.nrows())?;
        if self.b.shape() != (spec.m, spec.m) {
            return Err(Error::dim(
                "B",
                format!("{0}x{0}", spec.m),
                format!("{}x{}", self.b.nrows(), self.b.ncols()),
            ));
        }
        if self.v.ncols() != spec.m {
            return Err(Error::dim("V", spec.m, self.v.ncols()));
        }
        Ok(spec)
    }

    /// Weights in pack order (`V`, `W`, `B`, row-major).
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for m in [&self.v, &self.w, &self.b] {
            for r in 0..m.nrows() {
                out.extend(m.row(r).iter());
            }
        }
        out
    }
}

/// Input/target sequence treated as one contiguous run of the recurrence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    n_in: usize,
    n_out: usize,
    inputs: Vec<f64>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<Vec<f64>>, targets: Vec<Vec<f64>>) -> Result<Self> {
        if inputs.is_empty() || inputs.len() != targets.len() {
            return Err(Error::dim("dataset targets", inputs.len(), targets.len()));
        }
        let n_in = inputs[0].len();
        let n_out = targets[0].len();
        let flat_in: Vec<f64> = inputs.iter().flatten().copied().collect();
        let flat_out: Vec<f64> = targets.iter().flatten().copied().collect();
        Self::from_flat(n_in, n_out, flat_in, flat_out)
    }

    pub fn from_flat(n_in: usize, n_out: usize, inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if n_in == 0 || n_out == 0 || inputs.len() % n_in != 0 || targets.len() % n_out != 0 {
            return Err(Error::dim("dataset row width", n_in, inputs.len()));
        }
        let len = inputs.len() / n_in;
        if len == 0 || targets.len() / n_out != len {
            return Err(Error::dim("dataset targets", len, targets.len() / n_out));
        }
        if inputs.iter().chain(&targets).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: 0,
                context: "dataset entry",
            });
        }
        Ok(Self {
            n_in,
            n_out,
            inputs,
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.inputs.len() / self.n_in
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_inputs(&self) -> usize {
        self.n_in
    }

    pub fn n_outputs(&self) -> usize {
        self.n_out
    }

    pub fn input(&self, k: usize) -> &[f64] {
        &self.inputs[k * self.n_in..(k + 1) * self.n_in]
    }

    pub fn target(&self, k: usize) -> &[f64] {
        &self.targets[k * self.n_out..(k + 1) * self.n_out]
    }

    /// Contiguous split into `[0, at)` and `[at, len)`.
    pub fn split(&self, at: usize) -> Result<(Dataset, Dataset)> {
        if at == 0 || at >= self.len() {
            return Err(Error::Config(format!(
                "split point {at} outside 1..{}",
                self.len()
            )));
        }
        let head = Dataset {
            n_in: self.n_in,
            n_out: self.n_out,
            inputs: self.inputs[..at * self.n_in].to_vec(),
            targets: self.targets[..at * self.n_out].to_vec(),
        };
        let tail = Dataset {
            n_in: self.n_in,
            n_out: self.n_out,
            inputs: self.inputs[at * self.n_in..].to_vec(),
            targets: self.targets[at * self.n_out..].to_vec(),
        };
        Ok((head, tail))
    }

    /// Largest Euclidean norm of any input vector.
    pub fn input_norm_max(&self) -> f64 {
        (0..self.len())
            .map(|k| self.input(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// Largest Euclidean norm of any target vector.
    pub fn target_norm_max(&self) -> f64 {
        (0..self.len())
            .map(|k| self.target(k).iter().map(|v| v * v).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    pub fn targets_flat(&self) -> &[f64] {
        &self.targets
    }

    pub fn inputs_flat(&self) -> &[f64] {
        &self.inputs
    }
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub states: Vec<Vec<f64>>,
    pub preactivations: Vec<Vec<f64>>,
    pub outputs: Vec<Vec<f64>>,
    pub errors: Vec<Vec<f64>>,
}

fn check_data(spec: &RnnSpec, data: &Dataset) -> Result<()> {
    if data.n_inputs() != spec.n {
        return Err(Error::dim("dataset inputs", spec.n, data.n_inputs()));
    }
    if data.n_outputs() != spec.t {
        return Err(Error::dim("dataset targets", spec.t, data.n_outputs()));
    }
    Ok(())
}

/// Runs the recurrence from hidden state `z0`.
pub fn forward(weights: &RnnWeights, data: &Dataset, z0: &[f64]) -> Result<ForwardTrace> {
    let spec = weights.spec()?;
    check_data(&spec, data)?;
    if z0.len() != spec.m {
        return Err(Error::dim("initial state", spec.m, z0.len()));
    }
    let o = weights.to_flat();
    let mut scratch = Scratch::new(&spec, data.len());
    run_forward(&o, &spec, data, z0, Activation::Tanh, &mut scratch)?;
    let (m, t) = (spec.m, spec.t);
    let v = &o[spec.v_offset()..spec.w_offset()];
    let mut trace = ForwardTrace {
        states: Vec::with_capacity(data.len()),
        preactivations: Vec::with_capacity(data.len()),
        outputs: Vec::with_capacity(data.len()),
        errors: Vec::with_capacity(data.len()),
    };
    for k in 0..data.len() {
        let z = &scratch.z[(k + 1) * m..(k + 2) * m];
        // same accumulation order as the forward kernel
        let out: Vec<f64> = (0..t)
            .map(|r| (0..m).fold(0.0, |acc, j| acc + v[r * m + j] * z[j]))
            .collect();
        let err = out.iter().zip(data.target(k)).map(|(yh, y)| yh - y).collect();
        trace.states.push(z.to_vec());
        trace.preactivations.push(scratch.a[k * m..(k + 1) * m].to_vec());
        trace.outputs.push(out);
        trace.errors.push(err);
    }
    Ok(trace)
}

/// `Σ_k e(k)ᵀe(k)`.
pub fn sse(trace: &ForwardTrace) -> f64 {
    trace.errors.iter().flatten().map(|e| e * e).sum()
}

struct Scratch {
    /// Hidden states with `z(0)` in the first `m` slots.
    z: Vec<f64>,
    a: Vec<f64>,
    e: Vec<f64>,
}

impl Scratch {
    fn new(spec: &RnnSpec, len: usize) -> Self {
        Self {
            z: vec![0.0; (len + 1) * spec.m],
            a: vec![0.0; len * spec.m],
            e: vec![0.0; len * spec.t],
        }
    }
}

fn run_forward(
    o: &[f64],
    spec: &RnnSpec,
    data: &Dataset,
    z0: &[f64],
    act: Activation,
    s: &mut Scratch,
) -> Result<f64> {
    let (n, m, t) = (spec.n, spec.m, spec.t);
    let v = &o[spec.v_offset()..spec.w_offset()];
    let w = &o[spec.w_offset()..spec.b_offset()];
    let b = &o[spec.b_offset()..spec.n_params()];
    s.z[..m].copy_from_slice(z0);
    let mut total = 0.0;
    for k in 0..data.len() {
        let u = data.input(k);
        let (prev, rest) = s.z.split_at_mut((k + 1) * m);
        let z_prev = &prev[k * m..];
        let z = &mut rest[..m];
        for j in 0..m {
            let wr = &w[j * n..(j + 1) * n];
            let br = &b[j * m..(j + 1) * m];
            let mut acc = 0.0;
            for i in 0..n {
                acc += wr[i] * u[i];
            }
            for i in 0..m {
                acc += br[i] * z_prev[i];
            }
            s.a[k * m + j] = acc;
            z[j] = act.apply(acc);
        }
        let y = data.target(k);
        for r in 0..t {
            let vr = &v[r * m..(r + 1) * m];
            let mut yh = 0.0;
            for j in 0..m {
                yh += vr[j] * z[j];
            }
            let e = yh - y[r];
            s.e[k * t + r] = e;
            total += e * e;
        }
        if !total.is_finite() {
            return Err(Error::NonFinite {
                step: k,
                context: "forward pass",
            });
        }
    }
    Ok(total)
}

/// SSE and its gradient with respect to the packed weights, via reverse
/// accumulation over the whole horizon.
fn sse_with_gradient(
    o: &[f64],
    spec: &RnnSpec,
    data: &Dataset,
    act: Activation,
    grad: &mut [f64],
) -> Result<f64> {
    let (n, m, t) = (spec.n, spec.m, spec.t);
    let len = data.len();
    let mut s = Scratch::new(spec, len);
    let z0 = vec![0.0; m];
    let total = run_forward(o, spec, data, &z0, act, &mut s)?;

    let v = &o[spec.v_offset()..spec.w_offset()];
    let b = &o[spec.b_offset()..spec.n_params()];
    grad.iter_mut().for_each(|g| *g = 0.0);
    let (gv, rest) = grad.split_at_mut(spec.w_offset());
    let (gw, gb) = rest.split_at_mut(m * n);

    let mut da_next = vec![0.0; m];
    let mut dz = vec![0.0; m];
    let mut da = vec![0.0; m];
    for k in (0..len).rev() {
        let z = &s.z[(k + 1) * m..(k + 2) * m];
        let z_prev = &s.z[k * m..(k + 1) * m];
        let e = &s.e[k * t..(k + 1) * t];
        dz.iter_mut().for_each(|d| *d = 0.0);
        for r in 0..t {
            let two_e = 2.0 * e[r];
            let vr = &v[r * m..(r + 1) * m];
            let gvr = &mut gv[r * m..(r + 1) * m];
            for j in 0..m {
                dz[j] += vr[j] * two_e;
                gvr[j] += two_e * z[j];
            }
        }
        // Bᵀ·δa(k+1)
        for (i, dn) in da_next.iter().enumerate() {
            if *dn == 0.0 {
                continue;
            }
            let br = &b[i * m..(i + 1) * m];
            for j in 0..m {
                dz[j] += br[j] * dn;
            }
        }
        for j in 0..m {
            da[j] = dz[j] * act.slope(z[j]);
        }
        let u = data.input(k);
        for j in 0..m {
            let d = da[j];
            let gwr = &mut gw[j * n..(j + 1) * n];
            for i in 0..n {
                gwr[i] += d * u[i];
            }
            let gbr = &mut gb[j * m..(j + 1) * m];
            for i in 0..m {
                gbr[i] += d * z_prev[i];
            }
        }
        std::mem::swap(&mut da_next, &mut da);
    }
    if grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            step: 0,
            context: "gradient",
        });
    }
    Ok(total)
}

/// Training error of a network as an [`Objective`] over its packed weights.
#[derive(Debug, Clone, Copy)]
pub struct SseObjective<'a> {
    pub spec: RnnSpec,
    pub data: &'a Dataset,
    pub activation: Activation,
}

impl<'a> SseObjective<'a> {
    pub fn new(spec: RnnSpec, data: &'a Dataset) -> Result<Self> {
        check_data(&spec, data)?;
        Ok(Self {
            spec,
            data,
            activation: Activation::Tanh,
        })
    }

    pub fn with_activation(mut self, activation: Activation) -> Self {
        self.activation = activation;
        self
    }

    /// Network outputs `ŷ(k)` for the given packed weights.
    pub fn predict(&self, o: &[f64]) -> Result<Vec<Vec<f64>>> {
        let mut s = Scratch::new(&self.spec, self.data.len());
        let z0 = vec![0.0; self.spec.m];
        run_forward(o, &self.spec, self.data, &z0, self.activation, &mut s)?;
        let (m, t) = (self.spec.m, self.spec.t);
        let v = &o[self.spec.v_offset()..self.spec.w_offset()];
        Ok((0..self.data.len())
            .map(|k| {
                let z = &s.z[(k + 1) * m..(k + 2) * m];
                (0..t)
                    .map(|r| v[r * m..(r + 1) * m].iter().zip(z).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect())
    }
}

impl Objective for SseObjective<'_> {
    fn dim(&self) -> usize {
        self.spec.n_params()
    }

    fn value(&self, o: &[f64]) -> Result<f64> {
        let mut s = Scratch::new(&self.spec, self.data.len());
        let z0 = vec![0.0; self.spec.m];
        run_forward(o, &self.spec, self.data, &z0, self.activation, &mut s)
    }

    fn value_grad(&self, o: &[f64], grad: &mut [f64]) -> Result<f64> {
        sse_with_gradient(o, &self.spec, self.data, self.activation, grad)
    }
}

/// Gradient of the SSE over the full `2·n_p` vector (slack part zero).
pub fn grad_sse(x: &ParameterVector, spec: &RnnSpec, data: &Dataset) -> Result<Vec<f64>> {
    if x.len() != 2 * spec.n_params() {
        return Err(Error::dim("parameter vector", 2 * spec.n_params(), x.len()));
    }
    let obj = SseObjective::new(*spec, data)?;
    Ok(full_gradient(&obj, x)?.1)
}

/// Finite-difference Hessian of the SSE over the full `2·n_p` vector.
pub fn hessian_fd(x: &ParameterVector, spec: &RnnSpec, data: &Dataset) -> Result<DMatrix<f64>> {
    let obj = SseObjective::new(*spec, data)?;
    hessian_fd_objective(&obj, x)
}

/// Step used by the central-difference Hessian.
pub fn hessian_step(x: &ParameterVector) -> f64 {
    f64::max(1e-5, 1e-7 * x.norm())
}

/// Central differences of the analytic gradient, symmetrized. Columns for
/// slack coordinates are identically zero because no objective reads the
/// slacks, so only the weight block is differenced.
pub fn hessian_fd_objective(obj: &dyn Objective, x: &ParameterVector) -> Result<DMatrix<f64>> {
    let n_p = x.n_params();
    let block = weight_hessian_fd(obj, x.weights(), hessian_step(x))?;
    let mut h = DMatrix::zeros(2 * n_p, 2 * n_p);
    h.view_mut((0, 0), (n_p, n_p)).copy_from(&block);
    Ok(h)
}

/// Symmetrized central-difference Hessian of `obj` over the weights only.
pub(crate) fn weight_hessian_fd(obj: &dyn Objective, o: &[f64], delta: f64) -> Result<DMatrix<f64>> {
    let n_p = o.len();
    if obj.dim() != n_p {
        return Err(Error::dim("objective", obj.dim(), n_p));
    }
    let columns: Vec<Vec<f64>> = (0..n_p)
        .into_par_iter()
        .map(|j| {
            let mut plus = o.to_vec();
            let mut minus = o.to_vec();
            plus[j] += delta;
            minus[j] -= delta;
            let mut gp = vec![0.0; n_p];
            let mut gm = vec![0.0; n_p];
            obj.value_grad(&plus, &mut gp)?;
            obj.value_grad(&minus, &mut gm)?;
            Ok(gp
                .iter()
                .zip(&gm)
                .map(|(a, b)| (a - b) / (2.0 * delta))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut h = DMatrix::zeros(n_p, n_p);
    for (j, col) in columns.iter().enumerate() {
        for (i, v) in col.iter().enumerate() {
            h[(i, j)] = *v;
        }
    }
    let sym = (&h + h.transpose()) * 0.5;
    if sym.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            step: 0,
            context: "hessian",
        });
    }
    Ok(sym)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::Quadratic;

    fn scalar_net(w: f64, b: f64, v: f64) -> RnnWeights {
        RnnWeights {
            w: DMatrix::from_element(1, 1, w),
            b: DMatrix::from_element(1, 1, b),
            v: DMatrix::from_element(1, 1, v),
        }
    }

    #[test]
    fn scalar_forward_step() {
        let data = Dataset::new(vec![vec![0.5]], vec![vec![0.0]]).unwrap();
        let tr = forward(&scalar_net(1.0, 0.0, 2.0), &data, &[0.0]).unwrap();
        assert!((tr.states[0][0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((tr.states[0][0] - 0.46212).abs() < 1e-5);
        assert!((tr.outputs[0][0] - 0.92423).abs() < 1e-5);
    }

    #[test]
    fn zero_weights_give_negated_targets() {
        let data = Dataset::new(
            vec![vec![1.0, -2.0], vec![0.3, 0.1], vec![5.0, 5.0]],
            vec![vec![0.7], vec![-1.5], vec![2.0]],
        )
        .unwrap();
        let w = RnnWeights {
            w: DMatrix::zeros(3, 2),
            b: DMatrix::zeros(3, 3),
            v: DMatrix::zeros(1, 3),
        };
        let tr = forward(&w, &data, &[0.0; 3]).unwrap();
        for k in 0..3 {
            assert!(tr.states[k].iter().all(|z| *z == 0.0));
            assert_eq!(tr.outputs[k][0], 0.0);
            assert_eq!(tr.errors[k][0], -data.target(k)[0]);
        }
    }

    #[test]
    fn sse_arithmetic() {
        let mk = |errors: Vec<Vec<f64>>| ForwardTrace {
            states: vec![],
            preactivations: vec![],
            outputs: vec![],
            errors,
        };
        assert_eq!(sse(&mk(vec![vec![0.0, 0.0]])), 0.0);
        assert_eq!(sse(&mk(vec![vec![3.0, 4.0]])), 25.0);
        let a = sse(&mk(vec![vec![0.3], vec![-1.2]]));
        let b = sse(&mk(vec![vec![0.6], vec![-2.4]]));
        assert!((b - 4.0 * a).abs() < 1e-14);
    }

    #[test]
    fn feedforward_when_no_recurrence() {
        let data = Dataset::new(vec![vec![0.2], vec![-0.9], vec![1.4]], vec![vec![0.0]; 3]).unwrap();
        let net = scalar_net(0.8, 0.0, -1.3);
        let tr = forward(&net, &data, &[0.0]).unwrap();
        for k in 0..3 {
            let expect = -1.3 * (0.8 * data.input(k)[0]).tanh();
            assert!((tr.outputs[k][0] - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_forward_is_reported() {
        let data = Dataset::new(vec![vec![1.0]], vec![vec![0.0]]).unwrap();
        let net = scalar_net(1.0, 0.0, f64::INFINITY);
        assert!(matches!(
            forward(&net, &data, &[0.0]),
            Err(Error::NonFinite { step: 0, .. })
        ));
    }

    #[test]
    fn hessian_of_quadratic_is_exact() {
        let q = Quadratic::bowl(3);
        let x = ParameterVector::from_parts(&[0.3, -0.2, 1.1], &[0.5, 0.5, 0.5]).unwrap();
        let h = hessian_fd_objective(&q, &x).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == j && i < 3 { 2.0 } else { 0.0 };
                assert!((h[(i, j)] - expect).abs() < 1e-8, "({i},{j}) {}", h[(i, j)]);
            }
        }
        assert_eq!(h.clone(), h.transpose());
    }
}
