//! Multi-minimum exploration: alternate feasibility (QGS), descent (PGS),
//! saddle search and escape, and keep a registry of everything found.

use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::constraints::{eval_constraints, retract, Bounds, ParameterVector};
use crate::error::{Error, Result};
use crate::flow::{descend, integrate, perturb, to_feasible, Direction, Flow, FlowConfig, Terminal};
use crate::manifold::tangent_gradient;
use crate::objective::Objective;
use crate::rnn::{Dataset, SseObjective};
use crate::saddle::{find_decomposition_points, ProbeDiagnostics, SaddleCandidate, SaddleConfig};
use crate::RnnSpec;

pub const REGISTRY_SCHEMA: u32 = 1;

/// When two points count as the same minimum (or saddle).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Dedup {
    /// Tolerance on `‖o_a - o_b‖_∞`.
    pub delta: f64,
    /// Tolerance on the objective difference.
    pub tau_sse: f64,
}

impl Default for Dedup {
    fn default() -> Self {
        Self {
            delta: 1e-3,
            tau_sse: 1e-6,
        }
    }
}

impl Dedup {
    pub fn same(&self, oa: &[f64], fa: f64, ob: &[f64], fb: f64) -> bool {
        let dist = oa
            .iter()
            .zip(ob)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        dist <= self.delta && (fa - fb).abs() <= self.tau_sse
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimumRecord {
    pub id: usize,
    pub component_id: usize,
    pub sse_train: f64,
    pub sse_validation: f64,
    pub kkt: f64,
    pub x: ParameterVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub id: usize,
    pub representative: ParameterVector,
    pub arrivals: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ExploreDiagnostics {
    pub rounds: usize,
    pub evaluations: usize,
    pub qgs_restarts: usize,
    pub unconverged_descents: usize,
    pub rediscoveries: usize,
    pub probes: ProbeDiagnostics,
    pub stop: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimaRegistry {
    pub schema_version: u32,
    pub minima: Vec<MinimumRecord>,
    pub saddles: Vec<SaddleCandidate>,
    pub components: Vec<ComponentRecord>,
    pub diagnostics: ExploreDiagnostics,
}

impl Default for MinimaRegistry {
    fn default() -> Self {
        Self {
            schema_version: REGISTRY_SCHEMA,
            minima: Vec::new(),
            saddles: Vec::new(),
            components: Vec::new(),
            diagnostics: ExploreDiagnostics::default(),
        }
    }
}

impl MinimaRegistry {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            path: "<registry>".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str, origin: &Path) -> Result<Self> {
        let reg: Self = serde_json::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        if reg.schema_version != REGISTRY_SCHEMA {
            return Err(Error::Schema {
                path: origin.to_path_buf(),
                message: format!(
                    "registry schema {} (expected {REGISTRY_SCHEMA})",
                    reg.schema_version
                ),
            });
        }
        Ok(reg)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path)
    }

    pub fn get(&self, id: usize) -> Option<&MinimumRecord> {
        self.minima.iter().find(|m| m.id == id)
    }

    pub fn best_validation(&self) -> Option<f64> {
        self.minima
            .iter()
            .map(|m| m.sse_validation)
            .min_by(f64::total_cmp)
    }

    fn find(&self, o: &[f64], f: f64, dedup: &Dedup) -> Option<usize> {
        self.minima
            .iter()
            .find(|m| dedup.same(m.x.weights(), m.sse_train, o, f))
            .map(|m| m.id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selection {
    Validation,
    Training,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExploreConfig {
    pub max_components: usize,
    pub max_minima: usize,
    /// Work budget in objective-gradient evaluations.
    pub max_evaluations: usize,
    pub seed: u64,
    pub selection: Selection,
    /// Component radius as a fraction of `‖l‖`.
    pub component_radius: f64,
    /// Escape perturbation standard deviation as a fraction of `l_i`.
    pub escape_sigma: f64,
    pub dedup: Dedup,
    pub saddle: SaddleConfig,
    pub flow: FlowConfig,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            max_components: 6,
            max_minima: 50,
            max_evaluations: 2_000_000,
            seed: 0,
            selection: Selection::Validation,
            component_radius: 0.05,
            escape_sigma: 0.05,
            dedup: Dedup::default(),
            saddle: SaddleConfig::default(),
            flow: FlowConfig::default(),
        }
    }
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_components == 0 || self.max_minima == 0 || self.max_evaluations == 0 {
            return Err(Error::Config("explore budgets must be at least 1".into()));
        }
        if !(self.component_radius > 0.0 && self.escape_sigma > 0.0) {
            return Err(Error::Config(
                "component_radius and escape_sigma must be positive".into(),
            ));
        }
        self.flow.validate()?;
        self.saddle.validate()
    }
}

fn distance(a: &ParameterVector, b: &ParameterVector) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

struct Explorer<'a> {
    train: &'a dyn Objective,
    validation: Option<&'a dyn Objective>,
    l: &'a Bounds,
    cfg: &'a ExploreConfig,
    reg: MinimaRegistry,
    explored: Vec<bool>,
}

impl Explorer<'_> {
    fn budget_left(&self) -> bool {
        self.reg.diagnostics.evaluations < self.cfg.max_evaluations
            && self.reg.minima.len() < self.cfg.max_minima
    }

    fn assign_component(&mut self, x: &ParameterVector) -> (usize, bool) {
        let radius = self.cfg.component_radius * self.l.norm();
        if let Some(c) = self
            .reg
            .components
            .iter_mut()
            .find(|c| distance(&c.representative, x) <= radius)
        {
            c.arrivals += 1;
            return (c.id, false);
        }
        let id = self.reg.components.len();
        self.reg.components.push(ComponentRecord {
            id,
            representative: x.clone(),
            arrivals: 1,
        });
        (id, true)
    }

    /// Adds a descent endpoint, returning its id (new or existing).
    fn register(&mut self, x: &ParameterVector, component: usize) -> Result<Option<usize>> {
        let tg = tangent_gradient(self.train, x, self.l)?;
        let f = tg.value;
        let kkt = tg.norm();
        let feasible = eval_constraints(x, self.l)?.max_violation() <= self.cfg.flow.tol_h;
        if !feasible || kkt > 1e-5 * (1.0 + f.abs()) {
            self.reg.diagnostics.unconverged_descents += 1;
            return Ok(None);
        }
        if let Some(id) = self.reg.find(x.weights(), f, &self.cfg.dedup) {
            return Ok(Some(id));
        }
        if self.reg.minima.len() >= self.cfg.max_minima {
            return Ok(None);
        }
        let sse_validation = match self.validation {
            Some(v) => v.value(x.weights())?,
            None => f,
        };
        let id = self.reg.minima.len();
        self.reg.minima.push(MinimumRecord {
            id,
            component_id: component,
            sse_train: f,
            sse_validation,
            kkt,
            x: x.clone(),
        });
        self.explored.push(false);
        Ok(Some(id))
    }

    fn descend_and_register(
        &mut self,
        start: &ParameterVector,
        component: usize,
        rng: &mut ChaCha8Rng,
    ) -> Result<Option<usize>> {
        let tr = descend(self.train, start, self.l, &self.cfg.flow, rng)?;
        self.reg.diagnostics.evaluations += tr.evaluations;
        if tr.terminal != Terminal::Converged {
            self.reg.diagnostics.unconverged_descents += 1;
            return Ok(None);
        }
        self.register(&tr.end, component)
    }

    fn search_component(&mut self, component: usize, rng: &mut ChaCha8Rng) -> Result<()> {
        while self.budget_left() {
            let Some(idx) = (0..self.reg.minima.len())
                .find(|&i| !self.explored[i] && self.reg.minima[i].component_id == component)
            else {
                break;
            };
            self.explored[idx] = true;
            let x_min = self.reg.minima[idx].x.clone();
            let out = find_decomposition_points(
                self.train,
                &x_min,
                self.l,
                &self.cfg.saddle,
                &self.cfg.flow,
                &self.cfg.dedup,
                rng,
            )?;
            self.reg.diagnostics.evaluations += out.diagnostics.evaluations;
            self.reg.diagnostics.probes.absorb(&out.diagnostics);
            for dec in out.found {
                let known = self.reg.saddles.iter().any(|s| {
                    self.cfg
                        .dedup
                        .same(s.x.weights(), s.value, dec.candidate.x.weights(), dec.candidate.value)
                });
                let a = self.register(&dec.minima[0], component)?;
                let b = self.register(&dec.minima[1], component)?;
                if !known {
                    let mut cand = dec.candidate;
                    cand.minima_pair = a.zip(b);
                    self.reg.saddles.push(cand);
                }
            }
        }
        Ok(())
    }
}

/// Explores the feasible set starting from `x0`.
///
/// `validation` scores each minimum for [`select_global`]; without it the
/// training value is used for both.
pub fn explore(
    train: &dyn Objective,
    validation: Option<&dyn Objective>,
    x0: &ParameterVector,
    l: &Bounds,
    cfg: &ExploreConfig,
) -> Result<MinimaRegistry> {
    cfg.validate()?;
    if x0.n_params() != l.len() || train.dim() != l.len() {
        return Err(Error::dim("explore start", l.len(), x0.n_params()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut ex = Explorer {
        train,
        validation,
        l,
        cfg,
        reg: MinimaRegistry::default(),
        explored: Vec::new(),
    };
    let mut x = x0.clone();
    let mut consecutive_known = 0;
    let stop = loop {
        ex.reg.diagnostics.rounds += 1;
        let qgs = to_feasible(&x, l, &cfg.flow, &mut rng)?;
        ex.reg.diagnostics.evaluations += qgs.evaluations;
        ex.reg.diagnostics.qgs_restarts += qgs.restarts;
        let feasible = retract(&qgs.end, l)?;
        let (component, fresh) = ex.assign_component(&feasible);
        if fresh {
            consecutive_known = 0;
        } else {
            consecutive_known += 1;
            ex.reg.diagnostics.rediscoveries += 1;
        }
        let found = if qgs.terminal == Terminal::Converged {
            ex.descend_and_register(&feasible, component, &mut rng)?
        } else {
            None
        };
        ex.search_component(component, &mut rng)?;

        if ex.reg.diagnostics.evaluations >= cfg.max_evaluations {
            break "evaluation budget";
        }
        if ex.reg.minima.len() >= cfg.max_minima {
            break "minima budget";
        }
        if ex.reg.components.len() >= cfg.max_components && fresh {
            break "component budget";
        }
        if consecutive_known >= cfg.max_components {
            break "rediscovered known components";
        }
        // escape from the basin just explored
        let anchor = found
            .map(|id| ex.reg.minima[id].x.clone())
            .unwrap_or(feasible);
        let kicked = perturb(&anchor, l, cfg.escape_sigma, &mut rng);
        let rev = integrate(Flow::Qgs, &kicked, l, Direction::Reverse, &cfg.flow, &mut rng)?;
        ex.reg.diagnostics.evaluations += rev.evaluations;
        x = perturb(&rev.end, l, cfg.escape_sigma, &mut rng);
    };
    ex.reg.diagnostics.stop = stop.to_string();
    Ok(ex.reg)
}

/// Last fifth of a training set held out for model selection.
pub fn validation_split(data: &Dataset) -> Result<(Dataset, Dataset)> {
    let n_val = data.len() / 5;
    data.split(data.len() - n_val)
}

/// [`explore`] on the training error of a network.
pub fn explore_network(
    spec: &RnnSpec,
    train: &Dataset,
    validation: &Dataset,
    x0: &ParameterVector,
    l: &Bounds,
    cfg: &ExploreConfig,
) -> Result<MinimaRegistry> {
    let t = SseObjective::new(*spec, train)?;
    let v = SseObjective::new(*spec, validation)?;
    explore(&t, Some(&v), x0, l, cfg)
}

/// Id of the selected minimum. Ties go to the lower KKT residual, then to
/// the earlier registration.
pub fn select_global(reg: &MinimaRegistry, mode: Selection) -> Result<usize> {
    let score = |m: &MinimumRecord| match mode {
        Selection::Validation => m.sse_validation,
        Selection::Training => m.sse_train,
    };
    reg.minima
        .iter()
        .min_by(|a, b| {
            score(a)
                .total_cmp(&score(b))
                .then(a.kkt.total_cmp(&b.kkt))
                .then(a.id.cmp(&b.id))
        })
        .map(|m| m.id)
        .ok_or(Error::EmptyRegistry)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityBoundInput {
    pub n_samples: f64,
    pub m: f64,
    pub n: f64,
    pub k_u: f64,
    pub k_y: f64,
}

/// Largest perturbation growth rate `γ` that keeps the perturbed descent
/// flow asymptotically stable:
/// `N·√(N·m)·(√m + √(k_y·(k_u·√n + m)))²`.
pub fn stability_bound(inp: &StabilityBoundInput) -> Result<f64> {
    let StabilityBoundInput {
        n_samples,
        m,
        n,
        k_u,
        k_y,
    } = *inp;
    if [n_samples, m, n, k_u, k_y].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
        return Err(Error::Config(format!(
            "stability bound inputs must be positive: {inp:?}"
        )));
    }
    let inner = m.sqrt() + (k_y * (k_u * n.sqrt() + m)).sqrt();
    Ok(n_samples * (n_samples * m).sqrt() * inner * inner)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::with_slacks;
    use crate::objective::{DoubleWell, Quadratic};

    fn record(id: usize, train: f64, val: f64, kkt: f64) -> MinimumRecord {
        MinimumRecord {
            id,
            component_id: 0,
            sse_train: train,
            sse_validation: val,
            kkt,
            x: ParameterVector::zeros(1),
        }
    }

    #[test]
    fn selection_rules() {
        let mut reg = MinimaRegistry::default();
        assert!(matches!(
            select_global(&reg, Selection::Validation),
            Err(Error::EmptyRegistry)
        ));
        reg.minima.push(record(0, 1.0, 0.2, 1e-7));
        assert_eq!(select_global(&reg, Selection::Validation).unwrap(), 0);
        reg.minima.push(record(1, 2.0, 0.1, 1e-7));
        assert_eq!(select_global(&reg, Selection::Validation).unwrap(), 1);
        assert_eq!(select_global(&reg, Selection::Training).unwrap(), 0);
        let mut tied = MinimaRegistry::default();
        tied.minima.push(record(0, 1.0, 0.1, 1e-6));
        tied.minima.push(record(1, 1.0, 0.1, 1e-9));
        tied.minima.push(record(2, 1.0, 0.1, 1e-9));
        assert_eq!(select_global(&tied, Selection::Validation).unwrap(), 1);
    }

    #[test]
    fn bound_examples() {
        let one = StabilityBoundInput {
            n_samples: 1.0,
            m: 1.0,
            n: 1.0,
            k_u: 1.0,
            k_y: 1.0,
        };
        let v = stability_bound(&one).unwrap();
        assert!((v - (1.0 + 2f64.sqrt()).powi(2)).abs() < 1e-12);
        let four = StabilityBoundInput {
            n_samples: 4.0,
            ..one
        };
        assert!((stability_bound(&four).unwrap() / v - 8.0).abs() < 1e-9);
        assert!(stability_bound(&StabilityBoundInput { m: 0.0, ..one }).is_err());
    }

    #[test]
    fn dedup_needs_both_tolerances() {
        let d = Dedup::default();
        assert!(d.same(&[0.5, 0.1], 1.0, &[0.5005, 0.1], 1.0 + 5e-7));
        assert!(!d.same(&[0.5, 0.1], 1.0, &[0.502, 0.1], 1.0));
        assert!(!d.same(&[0.5, 0.1], 1.0, &[0.5, 0.1], 1.0 + 1e-5));
    }

    #[test]
    fn registry_round_trip() {
        let mut reg = MinimaRegistry::default();
        let mut r = record(0, 0.1 + 0.2, 1.0 / 3.0, 1e-9);
        r.x = ParameterVector::from_parts(&[0.1, -2.0 / 7.0], &[std::f64::consts::PI, 1e-300]).unwrap();
        reg.minima.push(r);
        let text = reg.to_json().unwrap();
        let back = MinimaRegistry::from_json(&text, Path::new("mem")).unwrap();
        assert_eq!(back, reg);
        let bad = text.replace("\"schema_version\": 1", "\"schema_version\": 9");
        assert!(matches!(
            MinimaRegistry::from_json(&bad, Path::new("mem")),
            Err(Error::Schema { .. })
        ));
    }

    fn toy_config(seed: u64) -> ExploreConfig {
        ExploreConfig {
            seed,
            saddle: SaddleConfig {
                q: Some(6),
                ..SaddleConfig::default()
            },
            ..ExploreConfig::default()
        }
    }

    #[test]
    fn double_well_registry() {
        let obj = DoubleWell::new(1);
        let l = Bounds::uniform(1, 1.0).unwrap();
        let x0 = ParameterVector::from_parts(&[0.3], &[0.2]).unwrap();
        let reg = explore(&obj, None, &x0, &l, &toy_config(1)).unwrap();
        let mut o: Vec<f64> = reg.minima.iter().map(|m| m.x.weights()[0]).collect();
        o.sort_by(f64::total_cmp);
        assert_eq!(o.len(), 2, "{reg:?}");
        assert!((o[0] + 0.5).abs() < 1e-3 && (o[1] - 0.5).abs() < 1e-3);
        assert_eq!(reg.saddles.len(), 1);
        assert!(reg.saddles[0].x.weights()[0].abs() < 1e-3);
    }

    #[test]
    fn bowl_registry() {
        let obj = Quadratic::bowl(2);
        let l = Bounds::uniform(2, 1.0).unwrap();
        let x0 = with_slacks(&[0.4, -0.3], &l).unwrap();
        let reg = explore(&obj, None, &x0, &l, &toy_config(2)).unwrap();
        assert_eq!(reg.minima.len(), 1);
        assert!(reg.saddles.is_empty());
    }

    #[test]
    fn exploration_is_deterministic() {
        let obj = DoubleWell::new(2);
        let l = Bounds::uniform(2, 1.0).unwrap();
        let x0 = with_slacks(&[0.1, 0.2], &l).unwrap();
        let a = explore(&obj, None, &x0, &l, &toy_config(5)).unwrap();
        let b = explore(&obj, None, &x0, &l, &toy_config(5)).unwrap();
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }
}
