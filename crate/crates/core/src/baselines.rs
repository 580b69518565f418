//! Reference trainers: plain gradient descent (EBP) and a real-coded
//! genetic algorithm. Both work on any [`Objective`] and keep every weight
//! inside its bound.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::Bounds;
use crate::error::{Error, Result};
use crate::objective::Objective;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EbpConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for EbpConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 5000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EbpResult {
    pub weights: Vec<f64>,
    /// SSE before the first update and after each epoch.
    pub history: Vec<f64>,
    pub diverged: bool,
}

fn clip(o: &mut [f64], l: &Bounds) {
    for (i, v) in o.iter_mut().enumerate() {
        let li = l.get(i);
        *v = v.clamp(-li, li);
    }
}

/// Gradient descent `o ← clip(o - η∇f(o))` from `o0`.
///
/// Stops early and flags divergence when the value exceeds `10⁶` times its
/// starting value or stops being finite.
pub fn train_ebp(obj: &dyn Objective, o0: &[f64], l: &Bounds, cfg: &EbpConfig) -> Result<EbpResult> {
    if !(cfg.learning_rate > 0.0) {
        return Err(Error::Config("learning_rate must be positive".into()));
    }
    if o0.len() != obj.dim() || l.len() != obj.dim() {
        return Err(Error::dim("ebp start", obj.dim(), o0.len()));
    }
    let mut o = o0.to_vec();
    clip(&mut o, l);
    let mut grad = vec![0.0; o.len()];
    let f0 = obj.value_grad(&o, &mut grad)?;
    let mut history = vec![f0];
    let mut diverged = false;
    for _ in 0..cfg.epochs {
        let prev = o.clone();
        for (v, g) in o.iter_mut().zip(&grad) {
            *v -= cfg.learning_rate * g;
        }
        clip(&mut o, l);
        let f = match obj.value_grad(&o, &mut grad) {
            Ok(f) if f.is_finite() => f,
            Ok(_) | Err(Error::NonFinite { .. }) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        if !f.is_finite() || f > 1e6 * f0.max(f64::MIN_POSITIVE) {
            o = prev;
            diverged = true;
            break;
        }
        history.push(f);
    }
    Ok(EbpResult {
        weights: o,
        history,
        diverged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaConfig {
    pub population: usize,
    pub generations: usize,
    pub crossover_rate: f64,
    /// Per-gene mutation probability.
    pub mutation_rate: f64,
    /// Mutation standard deviation as a fraction of each bound.
    pub mutation_sigma: f64,
    pub tournament_size: usize,
    pub elitism_count: usize,
    /// BLX-α blend extension.
    pub blend_alpha: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population: 50,
            generations: 200,
            crossover_rate: 0.8,
            mutation_rate: 0.1,
            mutation_sigma: 0.1,
            tournament_size: 3,
            elitism_count: 2,
            blend_alpha: 0.5,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |r: f64| (0.0..=1.0).contains(&r);
        if self.population < 2
            || !unit(self.crossover_rate)
            || !unit(self.mutation_rate)
            || self.mutation_sigma < 0.0
            || self.tournament_size == 0
            || self.elitism_count > self.population
            || self.blend_alpha < 0.0
        {
            return Err(Error::Config(format!("invalid GA configuration: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaResult {
    pub weights: Vec<f64>,
    /// Best value found so far, after initialization and after each
    /// generation.
    pub history: Vec<f64>,
}

fn fitness(obj: &dyn Objective, pop: &[Vec<f64>]) -> Vec<f64> {
    pop.par_iter()
        .map(|o| match obj.value(o) {
            Ok(f) if f.is_finite() => f,
            _ => f64::INFINITY,
        })
        .collect()
}

fn tournament<R: Rng + ?Sized>(scores: &[f64], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..scores.len());
    for _ in 1..size {
        let c = rng.random_range(0..scores.len());
        if scores[c] < scores[best] || (scores[c] == scores[best] && c < best) {
            best = c;
        }
    }
    best
}

fn ranking(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    idx
}

/// Real-coded GA with uniform initialization inside the bounds, tournament
/// selection, BLX-α crossover, clipped Gaussian mutation and elitism.
pub fn train_ga(obj: &dyn Objective, l: &Bounds, cfg: &GaConfig) -> Result<GaResult> {
    let n = obj.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let pop: Vec<Vec<f64>> = (0..cfg.population.max(2))
        .map(|_| {
            (0..n)
                .map(|i| {
                    let li = l.get(i);
                    rng.random_range(-li..=li)
                })
                .collect()
        })
        .collect();
    evolve(obj, l, cfg, pop, &mut rng)
}

/// Runs the GA from a given initial population.
pub fn evolve<R: Rng + ?Sized>(
    obj: &dyn Objective,
    l: &Bounds,
    cfg: &GaConfig,
    mut pop: Vec<Vec<f64>>,
    rng: &mut R,
) -> Result<GaResult> {
    cfg.validate()?;
    let n = obj.dim();
    if l.len() != n || pop.iter().any(|p| p.len() != n) || pop.len() != cfg.population {
        return Err(Error::dim("GA population", cfg.population, pop.len()));
    }
    let mut scores = fitness(obj, &pop);
    let first = ranking(&scores)[0];
    let mut best = (scores[first], pop[first].clone());
    let mut history = vec![best.0];
    for _ in 0..cfg.generations {
        let order = ranking(&scores);
        let mut next: Vec<Vec<f64>> = order[..cfg.elitism_count]
            .iter()
            .map(|&i| pop[i].clone())
            .collect();
        while next.len() < cfg.population {
            let a = &pop[tournament(&scores, cfg.tournament_size, rng)];
            let b = &pop[tournament(&scores, cfg.tournament_size, rng)];
            let mut child: Vec<f64> = if rng.random::<f64>() < cfg.crossover_rate {
                a.iter()
                    .zip(b)
                    .map(|(x, y)| {
                        let (lo, hi) = (x.min(*y), x.max(*y));
                        let ext = cfg.blend_alpha * (hi - lo);
                        if hi - lo > 0.0 || ext > 0.0 {
                            rng.random_range(lo - ext..=hi + ext)
                        } else {
                            lo
                        }
                    })
                    .collect()
            } else {
                a.clone()
            };
            for (i, v) in child.iter_mut().enumerate() {
                if rng.random::<f64>() < cfg.mutation_rate {
                    let z: f64 = StandardNormal.sample(rng);
                    *v += cfg.mutation_sigma * l.get(i) * z;
                }
            }
            clip(&mut child, l);
            next.push(child);
        }
        pop = next;
        scores = fitness(obj, &pop);
        let top = ranking(&scores)[0];
        if scores[top] < best.0 {
            best = (scores[top], pop[top].clone());
        }
        history.push(best.0);
    }
    Ok(GaResult {
        weights: best.1,
        history,
    })
}
