//! Decomposition points: index-1 saddles linking two local minima.
//!
//! Around a local minimum, `q` perturbed probes each follow the reflected
//! gradient `Θ₁ = (2P₁ - I)∇f` (ascending along the lowest-curvature
//! direction, descending along all others) until `‖Θ₁‖` bottoms out. The
//! endpoint is refined to a stationary point, classified by its Hessian
//! inertia, and kept when its two unstable descents reach different minima.
//!
//! All linear algebra happens in the arc-length tangent coordinates of
//! [`crate::manifold`], so radial directions never enter an eigenproblem.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{eval_constraints, retract, retract_in_place, Bounds, ParameterVector};
use crate::error::{Error, Result};
use crate::explorer::Dedup;
use crate::flow::{descend, FlowConfig, Terminal};
use crate::manifold::{
    exp_step, lift, tangent_gradient, tangent_hessian, SpectralData, TangentGradient,
};
use crate::objective::Objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SaddleConfig {
    /// Probes per minimum; `None` means `ceil(0.15·n_p)`.
    pub q: Option<usize>,
    /// Offset along the unstable direction for the two descents.
    pub epsilon: f64,
    /// Standard deviation of the probe perturbation.
    pub perturb_sigma: f64,
    /// Reflected-flow steps per probe.
    pub budget: usize,
    /// Accepted reflected-flow steps between Hessian refreshes.
    pub hessian_refresh: usize,
    /// Largest move of any pair per step, as a fraction of its bound.
    pub max_move: f64,
    /// Stationarity tolerance relative to `1 + f`.
    pub kkt_rel: f64,
    pub refine_iterations: usize,
}

impl Default for SaddleConfig {
    fn default() -> Self {
        Self {
            q: None,
            epsilon: 0.01,
            perturb_sigma: 0.01,
            budget: 300,
            hessian_refresh: 10,
            max_move: 0.05,
            kkt_rel: 1e-5,
            refine_iterations: 200,
        }
    }
}

impl SaddleConfig {
    pub fn probes(&self, n_p: usize) -> usize {
        self.q
            .unwrap_or_else(|| (0.15 * n_p as f64).ceil() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.epsilon > 0.0
            && self.perturb_sigma >= 0.0
            && self.budget >= 1
            && self.hessian_refresh >= 1
            && self.max_move > 0.0
            && self.kkt_rel > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid saddle configuration: {self:?}")))
        }
    }

    fn tol_kkt(&self, f: f64) -> f64 {
        self.kkt_rel * (1.0 + f.abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleCandidate {
    pub x: ParameterVector,
    /// Number of negative tangent-space curvatures.
    pub index: usize,
    /// Unit unstable direction in the ambient `2·n_p` space.
    pub unstable_dir: Vec<f64>,
    pub value: f64,
    pub kkt: f64,
    /// Registry ids of the two minima it connects, once registered.
    pub minima_pair: Option<(usize, usize)>,
}

/// An accepted decomposition point and the endpoints of its two descents.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub candidate: SaddleCandidate,
    pub minima: [ParameterVector; 2],
    pub values: [f64; 2],
}

/// Why probes were dropped.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeDiagnostics {
    pub probes: usize,
    pub refine_failures: usize,
    pub degenerate: usize,
    pub wrong_index: usize,
    pub same_endpoints: usize,
    pub duplicates: usize,
    pub accepted: usize,
    pub evaluations: usize,
}

impl ProbeDiagnostics {
    pub fn absorb(&mut self, other: &ProbeDiagnostics) {
        self.probes += other.probes;
        self.refine_failures += other.refine_failures;
        self.degenerate += other.degenerate;
        self.wrong_index += other.wrong_index;
        self.same_endpoints += other.same_endpoints;
        self.duplicates += other.duplicates;
        self.accepted += other.accepted;
        self.evaluations += other.evaluations;
    }
}

#[derive(Debug, Clone, Default)]
pub struct SearchOutcome {
    pub found: Vec<Decomposition>,
    pub diagnostics: ProbeDiagnostics,
}

#[cfg(test)]
fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn require_feasible(x: &ParameterVector, l: &Bounds) -> Result<()> {
    let viol = eval_constraints(x, l)?.max_violation();
    if viol > 1e-8 {
        return Err(Error::Infeasible {
            max_violation: viol,
            tolerance: 1e-8,
        });
    }
    Ok(())
}

/// `(2v₁v₁ᵀ - I)·g` in tangent coordinates.
pub fn reflect(sd: &SpectralData, g: &[f64]) -> Vec<f64> {
    let v1 = sd.lowest_direction(g);
    let dot: f64 = v1.iter().zip(g).map(|(a, b)| a * b).sum();
    v1.iter().zip(g).map(|(v, gi)| 2.0 * dot * v - gi).collect()
}

/// The reflected gradient `Θ₁` at a feasible point, as an ambient vector
/// lying in the tangent space.
pub fn reflected_field(obj: &dyn Objective, x: &ParameterVector, l: &Bounds) -> Result<Vec<f64>> {
    require_feasible(x, l)?;
    let tg = tangent_gradient(obj, x, l)?;
    let sd = SpectralData::new(&tangent_hessian(obj, x, &tg)?)?;
    Ok(lift(&tg.basis, &reflect(&sd, &tg.grad)))
}

/// Hessian spectrum at a point and the resulting index.
#[derive(Debug, Clone)]
pub struct Classification {
    pub index: usize,
    pub spectral: SpectralData,
    pub gradient: TangentGradient,
}

pub fn classify_with_spectrum(obj: &dyn Objective, x: &ParameterVector, l: &Bounds) -> Result<Classification> {
    let gradient = tangent_gradient(obj, x, l)?;
    let spectral = SpectralData::new(&tangent_hessian(obj, x, &gradient)?)?;
    let tau = spectral.zero_threshold();
    if let Some(&lam) = spectral.eigenvalues.iter().find(|v| v.abs() <= tau) {
        return Err(Error::DegenerateEquilibrium {
            eigenvalue: lam,
            threshold: tau,
        });
    }
    let index = spectral.eigenvalues.iter().filter(|&&v| v < -tau).count();
    Ok(Classification {
        index,
        spectral,
        gradient,
    })
}

/// Number of negative tangent-space curvatures at a stationary point.
pub fn classify_equilibrium(obj: &dyn Objective, x: &ParameterVector, l: &Bounds) -> Result<usize> {
    Ok(classify_with_spectrum(obj, x, l)?.index)
}

/// Scales a tangent step so that no pair moves by more than
/// `max_move·l_i`.
fn cap_step(d: &mut [f64], l: &Bounds, max_move: f64) {
    let worst = d
        .iter()
        .enumerate()
        .map(|(i, v)| v.abs() / l.get(i))
        .fold(0.0f64, f64::max);
    if worst > max_move {
        let s = max_move / worst;
        d.iter_mut().for_each(|v| *v *= s);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReflectedStop {
    /// `‖Θ₁‖` stopped decreasing in the negative-curvature region.
    LocalMinimum,
    /// `‖Θ₁‖` fell below the stationarity tolerance.
    Stationary,
    Diverged,
    BudgetExhausted,
}

#[derive(Debug, Clone)]
pub struct ReflectedOutcome {
    pub end: ParameterVector,
    pub stop: ReflectedStop,
    pub steps: usize,
    pub field_norms: Vec<f64>,
    pub evaluations: usize,
}

fn phi(rho: f64, dt: f64) -> f64 {
    let z = rho * dt;
    if z.abs() < 1e-8 {
        dt * (1.0 + 0.5 * z)
    } else {
        (z.min(50.0).exp() - 1.0) / rho
    }
}

/// Integrates `ẋ = Θ₁(x)` from `x0`.
///
/// Each step freezes the Hessian eigenbasis and advances every eigenmode
/// exactly under the linearized field (exponential Euler); mode 1 grows or
/// decays with rate `λ₁`, the others with `-λ_j`. The stop is declared at
/// the smallest `‖Θ₁‖` seen once the flow is in a region of negative
/// lowest curvature and five further steps have not improved on it.
pub fn reflected_flow(
    obj: &dyn Objective,
    x0: &ParameterVector,
    l: &Bounds,
    cfg: &SaddleConfig,
) -> Result<ReflectedOutcome> {
    let n_p = x0.n_params();
    let mut x = retract(x0, l)?;
    let mut tg = tangent_gradient(obj, &x, l)?;
    let mut evaluations = 1;
    let mut field_norms = vec![tg.norm()];
    let mut sd: Option<SpectralData> = None;
    let mut dt = 0.0;
    let mut best: Option<(f64, ParameterVector, usize)> = None;
    let mut since_refresh = 0;
    let mut steps = 0;
    let stop = loop {
        if steps >= cfg.budget {
            break ReflectedStop::BudgetExhausted;
        }
        if sd.is_none() || since_refresh >= cfg.hessian_refresh {
            let h = tangent_hessian(obj, &x, &tg)?;
            evaluations += 2 * n_p;
            let s = SpectralData::new(&h)?;
            let scale = s.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v.abs()));
            if dt == 0.0 {
                dt = 1.0 / scale.max(1e-12);
            }
            sd = Some(s);
            since_refresh = 0;
        }
        let spec = sd.as_ref().expect("hessian computed above");
        let lam1 = spec.eigenvalues[0];
        let negative = lam1 < -spec.zero_threshold();
        let gnorm = tg.norm();
        if negative && gnorm <= cfg.tol_kkt(tg.value) {
            break ReflectedStop::Stationary;
        }
        let c = spec.coords(&tg.grad);
        let xi: Vec<f64> = c
            .iter()
            .zip(&spec.eigenvalues)
            .enumerate()
            .map(|(j, (cj, lj))| {
                let s = if j == 0 { 1.0 } else { -1.0 };
                s * cj * phi(s * lj, dt)
            })
            .collect();
        let mut d = spec.combine(&xi);
        cap_step(&mut d, l, cfg.max_move);
        let mut trial = exp_step(&x, &d);
        retract_in_place(&mut trial, l)?;
        let next = match tangent_gradient(obj, &trial, l) {
            Ok(t) => t,
            Err(Error::NonFinite { .. }) => break ReflectedStop::Diverged,
            Err(e) => return Err(e),
        };
        evaluations += 1;
        steps += 1;
        since_refresh += 1;
        x = trial;
        tg = next;
        let n = tg.norm();
        field_norms.push(n);
        dt = (2.0 * dt).min(1e6);
        if negative {
            match &best {
                Some((b, _, _)) if *b <= n => {}
                _ => best = Some((n, x.clone(), steps)),
            }
            if let Some((_, _, at)) = &best {
                if steps - at >= 5 {
                    break ReflectedStop::LocalMinimum;
                }
            }
        } else {
            best = None;
        }
    };
    let end = match (stop, best) {
        (ReflectedStop::LocalMinimum, Some((_, bx, _))) => bx,
        _ => x,
    };
    Ok(ReflectedOutcome {
        end,
        stop,
        steps,
        field_norms,
        evaluations,
    })
}

/// Levenberg iteration on `∇f = 0` over the feasible set: each step is
/// `d = -Σ λ_j c_j / (λ_j² + μ) v_j` in tangent coordinates, followed by the
/// exponential map. Returns `None` when the residual cannot be brought below
/// the tolerance within the iteration budget.
pub fn refine_stationary(
    obj: &dyn Objective,
    x0: &ParameterVector,
    l: &Bounds,
    cfg: &SaddleConfig,
) -> Result<(Option<ParameterVector>, usize)> {
    let n_p = x0.n_params();
    let mut x = retract(x0, l)?;
    let mut tg = tangent_gradient(obj, &x, l)?;
    let mut evaluations = 1;
    let mut sd: Option<SpectralData> = None;
    let mut mu = 0.0;
    for _ in 0..cfg.refine_iterations {
        if tg.norm() <= cfg.tol_kkt(tg.value) {
            return Ok((Some(x), evaluations));
        }
        if sd.is_none() {
            let s = SpectralData::new(&tangent_hessian(obj, &x, &tg)?)?;
            evaluations += 2 * n_p;
            if mu == 0.0 {
                let big = s.eigenvalues.iter().fold(0.0f64, |a, v| a.max(v * v));
                mu = 1e-8 * big.max(1e-300);
            }
            sd = Some(s);
        }
        let s = sd.as_ref().expect("hessian computed above");
        let c = s.coords(&tg.grad);
        let coef: Vec<f64> = c
            .iter()
            .zip(&s.eigenvalues)
            .map(|(cj, lj)| -lj * cj / (lj * lj + mu))
            .collect();
        let mut d = s.combine(&coef);
        cap_step(&mut d, l, cfg.max_move);
        let mut trial = exp_step(&x, &d);
        retract_in_place(&mut trial, l)?;
        let next = match tangent_gradient(obj, &trial, l) {
            Ok(t) => t,
            Err(Error::NonFinite { .. }) => {
                mu *= 4.0;
                continue;
            }
            Err(e) => return Err(e),
        };
        evaluations += 1;
        if next.norm() < tg.norm() {
            x = trial;
            tg = next;
            mu = (mu / 3.0).max(1e-300);
            sd = None;
        } else {
            mu *= 4.0;
        }
    }
    if tg.norm() <= cfg.tol_kkt(tg.value) {
        Ok((Some(x), evaluations))
    } else {
        Ok((None, evaluations))
    }
}

enum ProbeResult {
    RefineFailed,
    Degenerate,
    WrongIndex,
    SameEndpoints,
    Accepted(Box<Decomposition>),
}

fn run_probe(
    obj: &dyn Objective,
    start: &ParameterVector,
    l: &Bounds,
    cfg: &SaddleConfig,
    flow_cfg: &FlowConfig,
    dedup: &Dedup,
    seed: u64,
) -> Result<(ProbeResult, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let reflected = reflected_flow(obj, start, l, cfg)?;
    let mut evals = reflected.evaluations;
    if reflected.stop == ReflectedStop::Diverged {
        return Ok((ProbeResult::RefineFailed, evals));
    }
    let (refined, e) = refine_stationary(obj, &reflected.end, l, cfg)?;
    evals += e;
    let Some(xd) = refined else {
        return Ok((ProbeResult::RefineFailed, evals));
    };
    let class = match classify_with_spectrum(obj, &xd, l) {
        Ok(c) => c,
        Err(Error::DegenerateEquilibrium { .. }) => return Ok((ProbeResult::Degenerate, evals)),
        Err(e) => return Err(e),
    };
    evals += 2 * xd.n_params() + 1;
    if class.index != 1 {
        return Ok((ProbeResult::WrongIndex, evals));
    }
    let v = class.spectral.vector(0);
    let v: Vec<f64> = v.iter().copied().collect();
    let mut ends = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let step: Vec<f64> = v.iter().map(|a| sign * cfg.epsilon * a).collect();
        let mut x0 = exp_step(&xd, &step);
        retract_in_place(&mut x0, l)?;
        let tr = descend(obj, &x0, l, flow_cfg, &mut rng)?;
        evals += tr.evaluations;
        if tr.terminal != Terminal::Converged {
            return Ok((ProbeResult::RefineFailed, evals));
        }
        let f = tr.last().lyapunov;
        ends.push((tr.end, f));
    }
    let (b, a) = (ends.pop().unwrap(), ends.pop().unwrap());
    if dedup.same(a.0.weights(), a.1, b.0.weights(), b.1) {
        return Ok((ProbeResult::SameEndpoints, evals));
    }
    let candidate = SaddleCandidate {
        unstable_dir: lift(&class.gradient.basis, &v),
        value: class.gradient.value,
        kkt: class.gradient.norm(),
        x: xd,
        index: 1,
        minima_pair: None,
    };
    Ok((
        ProbeResult::Accepted(Box::new(Decomposition {
            candidate,
            minima: [a.0, b.0],
            values: [a.1, b.1],
        })),
        evals,
    ))
}

/// Searches for decomposition points around the local minimum `x_min`.
///
/// Probe seeds are drawn from `rng` up front; probes then run in parallel
/// and are merged in probe order, so the outcome does not depend on
/// scheduling. Saddles that coincide under `dedup` are reported once.
pub fn find_decomposition_points<R: Rng + ?Sized>(
    obj: &dyn Objective,
    x_min: &ParameterVector,
    l: &Bounds,
    cfg: &SaddleConfig,
    flow_cfg: &FlowConfig,
    dedup: &Dedup,
    rng: &mut R,
) -> Result<SearchOutcome> {
    cfg.validate()?;
    let q = cfg.probes(x_min.n_params());
    // probes come in antithetic pairs x_min ± δ
    let mut starts = Vec::with_capacity(q);
    let mut offset = Vec::new();
    for k in 0..q {
        if k % 2 == 0 {
            offset = (0..x_min.len())
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut *rng);
                    cfg.perturb_sigma * z
                })
                .collect();
        } else {
            offset.iter_mut().for_each(|v: &mut f64| *v = -*v);
        }
        let mut p = x_min.clone();
        for (v, d) in p.as_mut_slice().iter_mut().zip(&offset) {
            *v += d;
        }
        retract_in_place(&mut p, l)?;
        starts.push((p, rng.random::<u64>()));
    }
    let results: Vec<(ProbeResult, usize)> = starts
        .par_iter()
        .map(|(p, seed)| run_probe(obj, p, l, cfg, flow_cfg, dedup, *seed))
        .collect::<Result<_>>()?;
    let mut out = SearchOutcome::default();
    out.diagnostics.probes = q;
    for (r, evals) in results {
        out.diagnostics.evaluations += evals;
        match r {
            ProbeResult::RefineFailed => out.diagnostics.refine_failures += 1,
            ProbeResult::Degenerate => out.diagnostics.degenerate += 1,
            ProbeResult::WrongIndex => out.diagnostics.wrong_index += 1,
            ProbeResult::SameEndpoints => out.diagnostics.same_endpoints += 1,
            ProbeResult::Accepted(d) => {
                let dup = out.found.iter().any(|e| {
                    dedup.same(
                        e.candidate.x.weights(),
                        e.candidate.value,
                        d.candidate.x.weights(),
                        d.candidate.value,
                    )
                });
                if dup {
                    out.diagnostics.duplicates += 1;
                } else {
                    out.diagnostics.accepted += 1;
                    out.found.push(*d);
                }
            }
        }
    }
    Ok(out)
}
