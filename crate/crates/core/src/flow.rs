//! The two gradient flows and their integrator.
//!
//! * QGS: `ẋ = -Dh(x)ᵀh(x)`, the gradient flow of `‖h‖²/2`. Its attractors
//!   are feasible points.
//! * PGS: `ẋ = -Pr(x)·∇f(x)`, the objective's gradient flow restricted to
//!   the feasible set. Its attractors are constrained local minima.
//!
//! Both are integrated with an embedded Dormand–Prince 5(4) pair. PGS
//! states are retracted onto the feasible set after every accepted step.
//! Along forward flows the Lyapunov function (`hᵀh` or `f`) is checked at
//! every accepted step and steps that would raise it are rejected.

use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{
    eval_constraints, project_tangent, retract, retract_in_place, Bounds, ConstraintEval,
    ParameterVector, EPS_RANK,
};
use crate::error::{Error, Result};
use crate::manifold::{exp_step, tangent_gradient, tangent_hessian, SpectralData};
use crate::objective::{full_gradient, Objective};

/// Integration and termination settings shared by both flows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowConfig {
    pub step_init: f64,
    pub step_min: f64,
    pub step_max: f64,
    /// Stationarity threshold on `‖field‖`.
    pub tol_converge: f64,
    /// Feasibility threshold on `max |h_i|`.
    pub tol_h: f64,
    pub max_steps: usize,
    pub lyapunov_check: bool,
    pub rtol: f64,
    pub atol: f64,
    /// Integration horizon in pseudo-time; unbounded when absent.
    pub t_final: Option<f64>,
    /// Reverse flows stop once the Lyapunov value grows by this factor.
    pub escape_factor: f64,
    /// Reverse flows stop once `‖x‖` exceeds this multiple of `max l_i`.
    pub escape_radius: f64,
    /// Perturbations allowed when QGS stalls at a degenerate `(0, 0)` pair.
    pub max_restarts: usize,
    /// Trust-region Newton iterations applied after a forward PGS run.
    pub polish_iterations: usize,
    /// Keep the state of every `record_stride`-th sample (0: endpoints only).
    pub record_stride: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            step_init: 1e-3,
            step_min: 1e-12,
            step_max: 10.0,
            tol_converge: 1e-6,
            tol_h: 1e-8,
            max_steps: 50_000,
            lyapunov_check: true,
            rtol: 1e-6,
            atol: 1e-9,
            t_final: None,
            escape_factor: 100.0,
            escape_radius: 1e3,
            max_restarts: 3,
            polish_iterations: 50,
            record_stride: 1,
        }
    }
}

impl FlowConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.step_min > 0.0
            && self.step_min <= self.step_init
            && self.step_init <= self.step_max
            && self.tol_converge > 0.0
            && self.tol_h > 0.0
            && self.max_steps >= 1
            && self.rtol > 0.0
            && self.atol > 0.0
            && self.t_final.is_none_or(|t| t > 0.0)
            && self.escape_factor > 1.0
            && self.escape_radius > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid flow configuration: {self:?}")))
        }
    }

    /// Fixed-step integration (no error control).
    pub fn fixed_step(&self) -> bool {
        self.step_min == self.step_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Direction {
    Forward,
    Reverse,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Forward => 1.0,
            Direction::Reverse => -1.0,
        }
    }
}

/// Which vector field to integrate.
#[derive(Clone, Copy)]
pub enum Flow<'a> {
    Qgs,
    Pgs(&'a dyn Objective),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Terminal {
    Converged,
    BudgetExhausted,
    Escaped,
    Diverged,
    /// A forward flow could not take a step without raising its Lyapunov
    /// function: it has reached the resolution limit of the integrator.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowSample {
    pub t: f64,
    pub field_norm: f64,
    pub lyapunov: f64,
    pub max_violation: f64,
    pub x: Option<ParameterVector>,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<FlowSample>,
    pub terminal: Terminal,
    pub end: ParameterVector,
    /// Degenerate-pair perturbations applied along the way.
    pub restarts: usize,
    /// Objective-gradient (or constraint) evaluations spent.
    pub evaluations: usize,
}

impl Trajectory {
    pub fn last(&self) -> &FlowSample {
        self.samples.last().expect("trajectory always has a start sample")
    }

    pub fn lyapunov_values(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.lyapunov).collect()
    }

    /// Delimited dump, one accepted step per line: `t, field_norm, lyapunov`
    /// then the state entries when the state was recorded.
    pub fn write_dump<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,field_norm,lyapunov,x...")?;
        for s in &self.samples {
            write!(out, "{},{},{}", s.t, s.field_norm, s.lyapunov)?;
            if let Some(x) = &s.x {
                for v in x.as_slice() {
                    write!(out, ",{v}")?;
                }
            }
            writeln!(out)?;
        }
        Ok(())
    }
}

/// `-Dhᵀh`, pair by pair.
pub fn qgs_field(x: &ParameterVector, l: &Bounds) -> Result<Vec<f64>> {
    let ce = eval_constraints(x, l)?;
    Ok(qgs_from_eval(x, &ce))
}

fn qgs_from_eval(x: &ParameterVector, ce: &ConstraintEval) -> Vec<f64> {
    let n_p = x.n_params();
    let mut out = vec![0.0; 2 * n_p];
    for i in 0..n_p {
        let (o, s) = x.pair(i);
        out[i] = -2.0 * o * ce.h[i];
        out[n_p + i] = -2.0 * s * ce.h[i];
    }
    out
}

/// `-Pr·∇f` at a feasible point.
pub fn pgs_field(x: &ParameterVector, obj: &dyn Objective, l: &Bounds, tol_h: f64) -> Result<Vec<f64>> {
    let ce = eval_constraints(x, l)?;
    let viol = ce.max_violation();
    if viol > tol_h {
        return Err(Error::Infeasible {
            max_violation: viol,
            tolerance: tol_h,
        });
    }
    Ok(pgs_unchecked(x, obj, &ce)?.1)
}

fn pgs_unchecked(x: &ParameterVector, obj: &dyn Objective, ce: &ConstraintEval) -> Result<(f64, Vec<f64>)> {
    let (f, g) = full_gradient(obj, x)?;
    let mut p = project_tangent(&g, ce)?;
    p.iter_mut().for_each(|v| *v = -*v);
    Ok((f, p))
}

/// `hᵀh`.
pub fn lyapunov_qgs(x: &ParameterVector, l: &Bounds) -> Result<f64> {
    Ok(eval_constraints(x, l)?.squared_norm())
}

/// The objective value (the SSE for a network objective).
pub fn lyapunov_pgs(x: &ParameterVector, obj: &dyn Objective) -> Result<f64> {
    obj.value(x.weights())
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Field value plus the quantities monitored at each sample.
struct Eval {
    field: Vec<f64>,
    lyapunov: f64,
    max_violation: f64,
}

fn evaluate(flow: Flow<'_>, x: &ParameterVector, l: &Bounds) -> Result<Eval> {
    let ce = eval_constraints(x, l)?;
    let max_violation = ce.max_violation();
    match flow {
        Flow::Qgs => Ok(Eval {
            field: qgs_from_eval(x, &ce),
            lyapunov: ce.squared_norm(),
            max_violation,
        }),
        Flow::Pgs(obj) => {
            let (f, field) = pgs_unchecked(x, obj, &ce)?;
            Ok(Eval {
                field,
                lyapunov: f,
                max_violation,
            })
        }
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];

/// One Dormand–Prince step from `x` with first stage `k1 = f(x)`.
/// Returns the fifth-order state and the embedded error estimate.
pub(crate) fn dopri_step<F>(f: &mut F, x: &[f64], k1: &[f64], h: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let n = x.len();
    let mut k: Vec<Vec<f64>> = Vec::with_capacity(7);
    k.push(k1.to_vec());
    let mut stage = vec![0.0; n];
    for s in 1..7 {
        debug_assert!(C[s] > 0.0);
        for i in 0..n {
            let mut acc = 0.0;
            for (j, kj) in k.iter().enumerate() {
                acc += A[s][j] * kj[i];
            }
            stage[i] = x[i] + h * acc;
        }
        k.push(f(&stage)?);
    }
    // stage 7 sits at the fifth-order solution
    let x5 = stage;
    let mut err = vec![0.0; n];
    for (i, e) in err.iter_mut().enumerate() {
        let mut acc = 0.0;
        for s in 0..7 {
            let b5 = if s < 6 { A[6][s] } else { 0.0 };
            acc += (b5 - B4[s]) * k[s][i];
        }
        *e = h * acc;
    }
    Ok((x5, err))
}

pub(crate) fn error_norm(x: &[f64], x_new: &[f64], err: &[f64], cfg: &FlowConfig) -> f64 {
    let sum: f64 = x
        .iter()
        .zip(x_new)
        .zip(err)
        .map(|((a, b), e)| {
            let scale = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / scale).powi(2)
        })
        .sum();
    (sum / x.len() as f64).sqrt()
}

/// Pairs sitting near the non-feasible stationary point `(0, 0)` of QGS.
fn stalled_pairs(x: &ParameterVector, l: &Bounds) -> Vec<usize> {
    (0..x.n_params())
        .filter(|&i| {
            let (o, s) = x.pair(i);
            o * o + s * s < 0.25 * l.get(i) * l.get(i)
        })
        .collect()
}

/// Integrates `ẋ = ±field` from `x0`.
///
/// PGS requires a feasible start (within `tol_h`). `rng` is only drawn from
/// when QGS stalls at a degenerate pair and that pair has to be nudged.
pub fn integrate<R: Rng + ?Sized>(
    flow: Flow<'_>,
    x0: &ParameterVector,
    l: &Bounds,
    direction: Direction,
    cfg: &FlowConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    cfg.validate()?;
    let mut x = x0.clone();
    if x.n_params() != l.len() {
        return Err(Error::dim("bounds", x.n_params(), l.len()));
    }
    if let Flow::Pgs(_) = flow {
        let viol = eval_constraints(&x, l)?.max_violation();
        if viol > cfg.tol_h {
            return Err(Error::Infeasible {
                max_violation: viol,
                tolerance: cfg.tol_h,
            });
        }
        retract_in_place(&mut x, l)?;
    }
    let sign = direction.sign();
    let forward = direction == Direction::Forward;
    let record = |step: usize, x: &ParameterVector, force: bool| {
        if force || (cfg.record_stride > 0 && step % cfg.record_stride == 0) {
            Some(x.clone())
        } else {
            None
        }
    };

    let mut evaluations = 1;
    let mut cur = evaluate(flow, &x, l)?;
    let v0 = cur.lyapunov;
    let mut samples = vec![FlowSample {
        t: 0.0,
        field_norm: norm(&cur.field),
        lyapunov: cur.lyapunov,
        max_violation: cur.max_violation,
        x: record(0, &x, true),
    }];
    let mut t = 0.0f64;
    let mut h = cfg.step_init;
    let mut restarts = 0;
    let mut steps = 0;
    let radius_limit = cfg.escape_radius * l.max();

    let mut field_fn = |z: &[f64]| -> Result<Vec<f64>> {
        let p = ParameterVector::from_vec(z.to_vec())?;
        let mut e = evaluate(flow, &p, l)?.field;
        if sign < 0.0 {
            e.iter_mut().for_each(|v| *v = -*v);
        }
        Ok(e)
    };

    let terminal = loop {
        let fnorm = norm(&cur.field);
        if forward {
            let converged = match flow {
                Flow::Qgs => fnorm <= cfg.tol_converge && cur.max_violation <= cfg.tol_h,
                Flow::Pgs(_) => fnorm <= cfg.tol_converge,
            };
            if converged {
                break Terminal::Converged;
            }
            if let Flow::Qgs = flow {
                if cur.max_violation > cfg.tol_h && cur.max_violation <= cfg.tol_h.sqrt() {
                    // each pair moves along its own ray: finish with the radial projection
                    retract_in_place(&mut x, l)?;
                    cur = evaluate(flow, &x, l)?;
                    evaluations += 1;
                    steps += 1;
                    samples.push(FlowSample {
                        t,
                        field_norm: norm(&cur.field),
                        lyapunov: cur.lyapunov,
                        max_violation: cur.max_violation,
                        x: record(steps, &x, false),
                    });
                    continue;
                }
                if fnorm <= cfg.tol_converge {
                    let stuck = stalled_pairs(&x, l);
                    if !stuck.is_empty() {
                        if restarts >= cfg.max_restarts {
                            break Terminal::Stalled;
                        }
                        restarts += 1;
                        for &i in &stuck {
                            let li = l.get(i);
                            let o = rng.random_range(-0.01 * li..0.01 * li);
                            let s = rng.random_range(-0.01 * li..0.01 * li);
                            x.set_pair(i, (o, s));
                        }
                        cur = evaluate(flow, &x, l)?;
                        evaluations += 1;
                        continue;
                    }
                }
            }
        } else if t != 0.0 {
            let grown = v0 > 0.0 && cur.lyapunov >= cfg.escape_factor * v0;
            if grown || x.norm() > radius_limit || fnorm <= cfg.tol_converge {
                break Terminal::Escaped;
            }
        } else if fnorm <= cfg.tol_converge {
            break Terminal::Escaped;
        }
        if steps >= cfg.max_steps {
            break Terminal::BudgetExhausted;
        }
        let remaining = cfg.t_final.unwrap_or(f64::INFINITY) - t.abs();
        if remaining <= 0.0 {
            break Terminal::BudgetExhausted;
        }
        let h_eff = h.min(remaining);
        let mut k1 = cur.field.clone();
        if sign < 0.0 {
            k1.iter_mut().for_each(|v| *v = -*v);
        }
        let (x_new, err) = match dopri_step(&mut field_fn, x.as_slice(), &k1, h_eff) {
            Ok(v) => v,
            Err(Error::NonFinite { .. }) => break Terminal::Diverged,
            Err(e) => return Err(e),
        };
        evaluations += 6;
        if x_new.iter().any(|v| !v.is_finite()) {
            break Terminal::Diverged;
        }
        let err_norm = if cfg.fixed_step() {
            0.0
        } else {
            error_norm(x.as_slice(), &x_new, &err, cfg)
        };
        if err_norm > 1.0 {
            h = (h_eff * (0.9 * err_norm.powf(-0.2)).max(0.2)).max(cfg.step_min);
            if h_eff <= cfg.step_min {
                break Terminal::Diverged;
            }
            continue;
        }
        let mut candidate = ParameterVector::from_vec(x_new)?;
        if let Flow::Pgs(_) = flow {
            if retract_in_place(&mut candidate, l).is_err() {
                break Terminal::Diverged;
            }
        }
        let next = match evaluate(flow, &candidate, l) {
            Ok(e) => e,
            Err(Error::NonFinite { .. }) => break Terminal::Diverged,
            Err(e) => return Err(e),
        };
        evaluations += 1;
        if forward && cfg.lyapunov_check && next.lyapunov > cur.lyapunov {
            if h_eff <= cfg.step_min || cfg.fixed_step() {
                break Terminal::Stalled;
            }
            h = (0.5 * h_eff).max(cfg.step_min);
            continue;
        }
        steps += 1;
        t += sign * h_eff;
        x = candidate;
        cur = next;
        samples.push(FlowSample {
            t,
            field_norm: norm(&cur.field),
            lyapunov: cur.lyapunov,
            max_violation: cur.max_violation,
            x: record(steps, &x, false),
        });
        if !cfg.fixed_step() {
            let grow = if err_norm == 0.0 {
                5.0
            } else {
                (0.9 * err_norm.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h_eff * grow).clamp(cfg.step_min, cfg.step_max);
        }
    };
    if let Some(last) = samples.last_mut() {
        if last.x.is_none() {
            last.x = Some(x.clone());
        }
    }
    Ok(Trajectory {
        samples,
        terminal,
        end: x,
        restarts,
        evaluations,
    })
}

/// Forward QGS from `x0` to a feasible point.
pub fn to_feasible<R: Rng + ?Sized>(
    x0: &ParameterVector,
    l: &Bounds,
    cfg: &FlowConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    integrate(Flow::Qgs, x0, l, Direction::Forward, cfg, rng)
}

/// Forward PGS from a feasible `x0`, followed by trust-region Newton polish
/// of the endpoint. The polish only accepts steps that lower the objective,
/// so the Lyapunov sequence stays non-increasing across both phases.
pub fn descend<R: Rng + ?Sized>(
    obj: &dyn Objective,
    x0: &ParameterVector,
    l: &Bounds,
    cfg: &FlowConfig,
    rng: &mut R,
) -> Result<Trajectory> {
    let mut traj = integrate(Flow::Pgs(obj), x0, l, Direction::Forward, cfg, rng)?;
    if traj.terminal != Terminal::Diverged && cfg.polish_iterations > 0 {
        polish(obj, l, cfg, &mut traj)?;
    }
    Ok(traj)
}

/// Riemannian trust-region Newton iterations on the endpoint of a PGS
/// trajectory. Appends one sample per accepted step.
pub fn polish(obj: &dyn Objective, l: &Bounds, cfg: &FlowConfig, traj: &mut Trajectory) -> Result<()> {
    let target = 0.1 * cfg.tol_converge;
    let mut x = retract(&traj.end, l)?;
    let mut tg = tangent_gradient(obj, &x, l)?;
    traj.evaluations += 1;
    let delta_max = l.norm();
    let mut delta = (0.1 * delta_max).min(tg.norm().max(1e-3));
    let mut t = traj.last().t;
    for _ in 0..cfg.polish_iterations {
        if tg.norm() <= target {
            break;
        }
        let hess = tangent_hessian(obj, &x, &tg)?;
        traj.evaluations += 2 * x.n_params();
        let sd = SpectralData::new(&hess)?;
        let mut accepted = false;
        while delta > 1e-14 * delta_max {
            let (d, pred) = trust_region_step(&sd, &tg.grad, delta);
            let mut trial = exp_step(&x, &d);
            retract_in_place(&mut trial, l)?;
            let f_new = match obj.value(trial.weights()) {
                Ok(v) => v,
                Err(Error::NonFinite { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            };
            traj.evaluations += 1;
            let actual = tg.value - f_new;
            let rho = if pred > 0.0 { actual / pred } else { 0.0 };
            let dnorm = norm(&d);
            if rho < 0.25 {
                delta = 0.25 * dnorm.min(delta);
            } else if rho > 0.75 && dnorm >= 0.99 * delta {
                delta = (2.0 * delta).min(delta_max);
            }
            let negligible = pred <= 1e-15 * tg.value.abs().max(f64::MIN_POSITIVE);
            if f_new <= tg.value && (rho > 1e-4 || negligible) {
                let next = tangent_gradient(obj, &trial, l)?;
                traj.evaluations += 1;
                if negligible && next.norm() >= tg.norm() {
                    // rounding-level model; no further progress is possible
                    break;
                }
                x = trial;
                tg = next;
                t += dnorm;
                accepted = true;
                break;
            }
        }
        if !accepted {
            break;
        }
        let ce = eval_constraints(&x, l)?;
        traj.samples.push(FlowSample {
            t,
            field_norm: tg.norm(),
            lyapunov: tg.value,
            max_violation: ce.max_violation(),
            x: Some(x.clone()),
        });
    }
    let field_norm = tg.norm();
    traj.end = x;
    if field_norm <= cfg.tol_converge {
        traj.terminal = Terminal::Converged;
    }
    Ok(())
}

/// Solves `min gᵀd + ½dᵀHd` subject to `‖d‖ ≤ Δ` given the eigen-decomposition
/// of `H`. Returns the step and the predicted decrease.
pub(crate) fn trust_region_step(sd: &SpectralData, g: &[f64], delta: f64) -> (Vec<f64>, f64) {
    let c = sd.coords(g);
    let lam = &sd.eigenvalues;
    let step_for = |mu: f64| -> Vec<f64> {
        c.iter()
            .zip(lam)
            .map(|(cj, lj)| {
                let den = lj + mu;
                if den > 0.0 {
                    -cj / den
                } else {
                    0.0
                }
            })
            .collect()
    };
    let len = |d: &[f64]| d.iter().map(|v| v * v).sum::<f64>().sqrt();
    let lam_min = lam[0];
    let mut dt = None;
    if lam_min > 0.0 {
        let newton = step_for(0.0);
        if len(&newton) <= delta {
            dt = Some(newton);
        }
    }
    let dt = dt.unwrap_or_else(|| {
        let cnorm = len(&c);
        let lo0 = (-lam_min).max(0.0);
        let mut lo = lo0 + 1e-14 * (1.0 + lo0);
        let mut hi = lo0 + cnorm / delta + 1e-12;
        let at_lo = step_for(lo);
        if len(&at_lo) <= delta {
            // hard case: pad along the lowest eigenvector up to the boundary
            let mut d = at_lo;
            let pad = (delta * delta - len(&d).powi(2)).max(0.0).sqrt();
            d[0] += if c[0] > 0.0 { -pad } else { pad };
            return d;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if len(&step_for(mid)) > delta {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        step_for(hi)
    });
    let pred = -dt
        .iter()
        .zip(&c)
        .zip(lam)
        .map(|((d, cj), lj)| cj * d + 0.5 * lj * d * d)
        .sum::<f64>();
    (sd.combine(&dt), pred)
}

/// Perturbs each coordinate by `N(0, (scale·l_i)²)`.
pub fn perturb<R: Rng + ?Sized>(x: &ParameterVector, l: &Bounds, scale: f64, rng: &mut R) -> ParameterVector {
    use rand_distr::{Distribution, StandardNormal};
    let mut out = x.clone();
    let n_p = x.n_params();
    for i in 0..n_p {
        let (o, s) = x.pair(i);
        let sd = scale * l.get(i);
        let zo: f64 = StandardNormal.sample(rng);
        let zs: f64 = StandardNormal.sample(rng);
        out.set_pair(i, (o + sd * zo, s + sd * zs));
    }
    out
}

/// True when every pair is away from the degenerate point.
pub fn is_regular(x: &ParameterVector, l: &Bounds) -> bool {
    (0..x.n_params()).all(|i| {
        let (o, s) = x.pair(i);
        o * o + s * s > EPS_RANK * l.get(i) * l.get(i)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::with_slacks;
    use crate::objective::DoubleWell;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn qgs_field_examples() {
        let l = Bounds::uniform(1, 1.0).unwrap();
        let f = qgs_field(&with_slacks(&[0.6], &l).unwrap(), &l).unwrap();
        assert!(norm(&f) < 1e-15);
        let x = ParameterVector::from_parts(&[2.0], &[0.0]).unwrap();
        assert_eq!(qgs_field(&x, &l).unwrap(), vec![-12.0, 0.0]);
        let x = ParameterVector::from_parts(&[0.0], &[0.0]).unwrap();
        assert_eq!(qgs_field(&x, &l).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn pgs_field_rejects_infeasible_and_pins_bound() {
        let obj = DoubleWell::new(1);
        let l = Bounds::uniform(1, 1.0).unwrap();
        let x = ParameterVector::from_parts(&[2.0], &[0.0]).unwrap();
        assert!(matches!(
            pgs_field(&x, &obj, &l, 1e-8),
            Err(Error::Infeasible { .. })
        ));
        let x = ParameterVector::from_parts(&[1.0], &[0.0]).unwrap();
        assert_eq!(pgs_field(&x, &obj, &l, 1e-8).unwrap()[0], 0.0);
    }

    #[test]
    fn feasible_qgs_start_converges_immediately() {
        let l = Bounds::uniform(2, 1.0).unwrap();
        let x = with_slacks(&[0.3, -0.9], &l).unwrap();
        let tr = integrate(Flow::Qgs, &x, &l, Direction::Forward, &FlowConfig::default(), &mut rng()).unwrap();
        assert_eq!(tr.terminal, Terminal::Converged);
        assert_eq!(tr.samples.len(), 1);
    }

    #[test]
    fn degenerate_start_is_perturbed() {
        let l = Bounds::uniform(2, 1.0).unwrap();
        let x = ParameterVector::from_parts(&[0.0, 0.5], &[0.0, 0.5]).unwrap();
        let tr = integrate(Flow::Qgs, &x, &l, Direction::Forward, &FlowConfig::default(), &mut rng()).unwrap();
        assert_eq!(tr.terminal, Terminal::Converged);
        assert!(tr.restarts >= 1);
        assert!(eval_constraints(&tr.end, &l).unwrap().max_violation() <= 1e-8);
    }

    #[test]
    fn reverse_qgs_from_feasible_point_is_stationary() {
        let l = Bounds::uniform(1, 1.0).unwrap();
        let x = with_slacks(&[0.3], &l).unwrap();
        let tr = integrate(Flow::Qgs, &x, &l, Direction::Reverse, &FlowConfig::default(), &mut rng()).unwrap();
        assert_eq!(tr.terminal, Terminal::Escaped);
    }

    #[test]
    fn reverse_qgs_escapes() {
        let l = Bounds::uniform(2, 1.0).unwrap();
        let x = ParameterVector::from_parts(&[0.7, 0.2], &[0.75, 0.9]).unwrap();
        let tr = integrate(Flow::Qgs, &x, &l, Direction::Reverse, &FlowConfig::default(), &mut rng()).unwrap();
        assert_eq!(tr.terminal, Terminal::Escaped);
        assert!(tr.last().lyapunov >= 100.0 * tr.samples[0].lyapunov);
        assert!(tr.samples.windows(2).all(|w| w[1].t < w[0].t));
    }

    #[test]
    fn trust_region_step_respects_radius() {
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 2.0]);
        let sd = SpectralData::new(&m).unwrap();
        let (d, pred) = trust_region_step(&sd, &[0.5, 1.0], 0.3);
        assert!((norm(&d) - 0.3).abs() < 1e-9);
        assert!(pred > 0.0);
        let m = nalgebra::DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 2.0]);
        let sd = SpectralData::new(&m).unwrap();
        let (d, _) = trust_region_step(&sd, &[1.0, 1.0], 10.0);
        assert!((d[0] + 0.25).abs() < 1e-14 && (d[1] + 0.5).abs() < 1e-14);
    }

    #[test]
    fn config_validation() {
        let cfg = FlowConfig {
            step_min: 1.0,
            step_init: 0.1,
            ..FlowConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(FlowConfig::default().validate().is_ok());
    }
}
