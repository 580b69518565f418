//! Experiment plumbing behind the command-line tool: configs, training runs,
//! reports and comparison tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::baselines::{train_ebp, train_ga, EbpConfig, GaConfig};
use crate::benchmarks::{BoucWenConfig, GeneratorConfig, NarmaConfig, SysIdProblem};
use crate::constraints::{with_slacks, Bounds};
use crate::error::{Error, Result};
use crate::explorer::{
    explore, explore_network, select_global, stability_bound, validation_split, ExploreConfig,
    MinimaRegistry, StabilityBoundInput,
};
use crate::objective::{DoubleWell, Objective};
use crate::rnn::{Dataset, SseObjective};

pub const REPORT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Problem {
    Narma,
    SecondOrder,
    Boucwen,
    /// One-dimensional double well `(o² - 0.25)²` with `|o| ≤ 1`.
    Toy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Dtb,
    Ga,
    Ebp,
}

impl Problem {
    pub fn name(self) -> &'static str {
        match self {
            Problem::Narma => "narma",
            Problem::SecondOrder => "second_order",
            Problem::Boucwen => "boucwen",
            Problem::Toy => "toy",
        }
    }
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Dtb => "dtb",
            Method::Ga => "ga",
            Method::Ebp => "ebp",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Samples with `‖y‖` below this fraction of the test-target RMS are
    /// excluded from the maximum generalization error.
    pub outlier_fraction: f64,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self {
            outlier_fraction: 0.05,
        }
    }
}

/// Everything a run depends on. `seed` overrides the per-module seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub method: Method,
    pub seed: u64,
    pub output: PathBuf,
    pub narma: NarmaConfig,
    pub second_order: NarmaConfig,
    pub boucwen: BoucWenConfig,
    pub explore: ExploreConfig,
    pub ga: GaConfig,
    pub ebp: EbpConfig,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: Problem::Narma,
            method: Method::Dtb,
            seed: 1,
            output: PathBuf::from("runs/default"),
            narma: NarmaConfig::default(),
            second_order: NarmaConfig::second_order(),
            boucwen: BoucWenConfig::default(),
            explore: ExploreConfig::default(),
            ga: GaConfig::default(),
            ebp: EbpConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("config serialization: {e}")))
    }

    /// Copy with the master seed pushed into every module.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        c.narma.seed = c.seed;
        c.second_order.seed = c.seed;
        c.boucwen.seed = c.seed;
        c.explore.seed = c.seed;
        c.ga.seed = c.seed;
        c.ebp.seed = c.seed;
        c
    }

    pub fn generator(&self) -> Option<GeneratorConfig> {
        match self.problem {
            Problem::Narma => Some(GeneratorConfig::Narma(self.narma.clone())),
            Problem::SecondOrder => Some(GeneratorConfig::SecondOrder(self.second_order.clone())),
            Problem::Boucwen => Some(GeneratorConfig::Boucwen(self.boucwen.clone())),
            Problem::Toy => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.report.outlier_fraction >= 0.0) {
            return Err(Error::Config("outlier_fraction must be non-negative".into()));
        }
        match self.method {
            Method::Dtb => self.explore.validate()?,
            Method::Ga => self.ga.validate()?,
            Method::Ebp => {
                if !(self.ebp.learning_rate > 0.0) {
                    return Err(Error::Config("learning_rate must be positive".into()));
                }
            }
        }
        match self.problem {
            Problem::Narma => self.narma.validate(),
            Problem::SecondOrder => self.second_order.validate(),
            Problem::Boucwen => self.boucwen.validate(),
            Problem::Toy => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub train_mse: f64,
    pub test_mse: f64,
    /// Largest generalization error in percent over non-outlier test samples.
    pub max_generalization_error_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub split: String,
    pub k: usize,
    pub target: Vec<f64>,
    pub output: Vec<f64>,
    pub error_pct: f64,
    pub outlier: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub method: Method,
    pub seed: u64,
    /// Reasons the run should not be trusted; empty for a clean run.
    pub flags: Vec<String>,
    pub metrics: Option<Metrics>,
    pub minima: usize,
    pub components: usize,
    pub saddles: usize,
    /// Work spent, in objective-gradient evaluations.
    pub evaluations: usize,
    pub k_u: Option<f64>,
    pub k_y: Option<f64>,
    pub gamma_max: Option<f64>,
    pub y_floor: Option<f64>,
    pub series: Vec<SeriesPoint>,
}

impl RunReport {
    pub fn is_flagged(&self) -> bool {
        !self.flags.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| Error::Config(format!("report serialization: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let version = raw.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(REPORT_SCHEMA as u64) {
            return Err(Error::Schema {
                path: path.to_path_buf(),
                message: format!("report schema {version:?} (expected {REPORT_SCHEMA})"),
            });
        }
        serde_json::from_value(raw).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    pub schema_version: u32,
    pub problem: Problem,
    pub method: Method,
    pub weights: Vec<f64>,
}

/// Where a run keeps its files.
#[derive(Debug, Clone)]
pub struct RunPaths {
    pub root: PathBuf,
}

impl RunPaths {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }
    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset")
    }
    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }
    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }
    pub fn weights(&self) -> PathBuf {
        self.root.join("weights.json")
    }
    pub fn registry(&self) -> PathBuf {
        self.root.join("registry.json")
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Generates the configured benchmark into `<output>/dataset`.
pub fn cmd_gen(cfg: &ExperimentConfig) -> Result<SysIdProblem> {
    let cfg = cfg.effective();
    let gen = cfg
        .generator()
        .ok_or_else(|| Error::Config("the toy problem has no dataset".into()))?;
    let problem = gen.generate()?;
    problem.save(&RunPaths::new(&cfg.output).dataset())?;
    Ok(problem)
}

fn load_or_generate(cfg: &ExperimentConfig) -> Result<SysIdProblem> {
    let dir = RunPaths::new(&cfg.output).dataset();
    if dir.join("meta.json").exists() {
        let p = SysIdProblem::load(&dir)?;
        if Some(&p.generator) == cfg.generator().as_ref() {
            return Ok(p);
        }
    }
    cmd_gen(cfg)
}

struct Trained {
    weights: Option<Vec<f64>>,
    flags: Vec<String>,
    registry: Option<MinimaRegistry>,
    evaluations: usize,
}

fn train_method(
    cfg: &ExperimentConfig,
    obj: &dyn Objective,
    network: Option<(&SysIdProblem, &Dataset)>,
    l: &Bounds,
    start: &[f64],
) -> Result<Trained> {
    match cfg.method {
        Method::Dtb => {
            let x0 = with_slacks(start, l)?;
            let reg = match network {
                Some((p, train)) => {
                    let (fit, val) = validation_split(train)?;
                    explore_network(&p.spec, &fit, &val, &x0, l, &cfg.explore)?
                }
                None => explore(obj, None, &x0, l, &cfg.explore)?,
            };
            let evaluations = reg.diagnostics.evaluations;
            let (weights, flags) = match select_global(&reg, cfg.explore.selection) {
                Ok(id) => (Some(reg.minima[id].x.weights().to_vec()), Vec::new()),
                Err(Error::EmptyRegistry) => (
                    None,
                    vec![format!(
                        "no converged minimum within budget (stop: {})",
                        reg.diagnostics.stop
                    )],
                ),
                Err(e) => return Err(e),
            };
            Ok(Trained {
                weights,
                flags,
                registry: Some(reg),
                evaluations,
            })
        }
        Method::Ebp => {
            let r = train_ebp(obj, start, l, &cfg.ebp)?;
            let mut flags = Vec::new();
            if r.diverged {
                flags.push("gradient descent diverged".to_string());
            }
            let finite = r.weights.iter().all(|v| v.is_finite());
            Ok(Trained {
                weights: finite.then_some(r.weights),
                flags,
                registry: None,
                evaluations: r.history.len(),
            })
        }
        Method::Ga => {
            let r = train_ga(obj, l, &cfg.ga)?;
            Ok(Trained {
                weights: Some(r.weights),
                flags: Vec::new(),
                registry: None,
                evaluations: cfg.ga.population * (cfg.ga.generations + 1),
            })
        }
    }
}

fn mse(targets: &[Vec<f64>], outputs: &[Vec<f64>]) -> f64 {
    let total: f64 = targets
        .iter()
        .zip(outputs)
        .map(|(y, o)| y.iter().zip(o).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
        .sum();
    total / targets.len().max(1) as f64
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Outputs and targets of the whole sequence in physical units.
fn physical_series(p: &SysIdProblem, o: &[f64]) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    let obj = SseObjective::new(p.spec, &p.data)?;
    let raw = obj.predict(o)?;
    let unscale = |v: &[f64]| -> Vec<f64> {
        v.iter()
            .enumerate()
            .map(|(r, x)| p.scaling.unscale_target(r, *x))
            .collect()
    };
    let outputs = raw.iter().map(|v| unscale(v)).collect();
    let targets = (0..p.data.len())
        .map(|k| unscale(p.data.target(k)))
        .collect();
    Ok((targets, outputs))
}

fn evaluate(p: &SysIdProblem, o: &[f64], outlier_fraction: f64) -> Result<(Metrics, f64, Vec<SeriesPoint>)> {
    let (targets, outputs) = physical_series(p, o)?;
    let n = p.n_train;
    let test_rms = (targets[n..].iter().map(|y| norm(y).powi(2)).sum::<f64>()
        / (targets.len() - n) as f64)
        .sqrt();
    let y_floor = outlier_fraction * test_rms;
    let mut series = Vec::with_capacity(targets.len());
    let mut max_pct: Option<f64> = None;
    for (k, (y, yh)) in targets.iter().zip(&outputs).enumerate() {
        let test = k >= n;
        let err: Vec<f64> = y.iter().zip(yh).map(|(a, b)| b - a).collect();
        let ny = norm(y);
        let pct = 100.0 * norm(&err) / ny;
        let outlier = ny < y_floor;
        if test && !outlier && pct.is_finite() {
            max_pct = Some(max_pct.map_or(pct, |m| m.max(pct)));
        }
        series.push(SeriesPoint {
            split: if test { "test" } else { "train" }.to_string(),
            k: if test { k - n } else { k },
            target: y.clone(),
            output: yh.clone(),
            error_pct: if pct.is_finite() { pct } else { f64::MAX },
            outlier,
        });
    }
    let metrics = Metrics {
        train_mse: mse(&targets[..n], &outputs[..n]),
        test_mse: mse(&targets[n..], &outputs[n..]),
        max_generalization_error_pct: max_pct,
    };
    Ok((metrics, y_floor, series))
}

fn finish(mut report: RunReport, paths: &RunPaths, trained: &Trained) -> Result<RunReport> {
    if let Some(m) = &report.metrics {
        if !(m.train_mse.is_finite() && m.test_mse.is_finite()) {
            report.flags.push("non-finite error on the data".to_string());
            report.metrics = None;
        }
    }
    std::fs::create_dir_all(&paths.root).map_err(|e| Error::io(&paths.root, e))?;
    if let Some(reg) = &trained.registry {
        reg.save(&paths.registry())?;
    }
    if let Some(w) = &trained.weights {
        let file = WeightsFile {
            schema_version: REPORT_SCHEMA,
            problem: report.problem,
            method: report.method,
            weights: w.clone(),
        };
        let text = serde_json::to_string_pretty(&file)
            .map_err(|e| Error::Config(format!("weights serialization: {e}")))?;
        write(&paths.weights(), &(text + "\n"))?;
    }
    write(&paths.config(), &report.config.to_toml()?)?;
    write(&paths.report(), &report.to_json()?)?;
    Ok(report)
}

/// Trains with the configured method and writes `config.toml`,
/// `report.json`, `weights.json` and, for `dtb`, `registry.json` under
/// `<output>`. Numerical trouble in the method ends up in `flags`.
pub fn cmd_train(cfg: &ExperimentConfig) -> Result<RunReport> {
    let cfg = cfg.effective();
    cfg.validate()?;
    let paths = RunPaths::new(&cfg.output);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut report = RunReport {
        schema_version: REPORT_SCHEMA,
        config: cfg.clone(),
        problem: cfg.problem,
        method: cfg.method,
        seed: cfg.seed,
        flags: Vec::new(),
        metrics: None,
        minima: 0,
        components: 0,
        saddles: 0,
        evaluations: 0,
        k_u: None,
        k_y: None,
        gamma_max: None,
        y_floor: None,
        series: Vec::new(),
    };
    let trained = if cfg.problem == Problem::Toy {
        let obj = DoubleWell::new(1);
        let l = Bounds::uniform(1, 1.0)?;
        let start = [rng.random_range(-1.0..1.0)];
        let trained = train_method(&cfg, &obj, None, &l, &start)?;
        if let Some(w) = &trained.weights {
            let f = obj.value(w)?;
            report.metrics = Some(Metrics {
                train_mse: f,
                test_mse: f,
                max_generalization_error_pct: None,
            });
        }
        trained
    } else {
        let p = load_or_generate(&cfg)?;
        let train = p.train();
        let obj = SseObjective::new(p.spec, &train)?;
        let start = p.initial_point(&mut rng)?.weights().to_vec();
        let trained = train_method(&cfg, &obj, Some((&p, &train)), &p.bounds, &start)?;
        let k_u = train.input_norm_max();
        let k_y = train.target_norm_max();
        report.k_u = Some(k_u);
        report.k_y = Some(k_y);
        report.gamma_max = Some(stability_bound(&StabilityBoundInput {
            n_samples: train.len() as f64,
            m: p.spec.m as f64,
            n: p.spec.n as f64,
            k_u,
            k_y,
        })?);
        if let Some(w) = &trained.weights {
            match evaluate(&p, w, cfg.report.outlier_fraction) {
                Ok((metrics, y_floor, series)) => {
                    report.metrics = Some(metrics);
                    report.y_floor = Some(y_floor);
                    report.series = series;
                }
                Err(Error::NonFinite { .. }) => {
                    report.flags.push("network output is not finite".to_string())
                }
                Err(e) => return Err(e),
            }
        }
        trained
    };
    report.flags.extend(trained.flags.iter().cloned());
    report.evaluations = trained.evaluations;
    if let Some(reg) = &trained.registry {
        report.minima = reg.minima.len();
        report.components = reg.components.len();
        report.saddles = reg.saddles.len();
    }
    finish(report, &paths, &trained)
}

/// Loads `report.json` from each run directory.
pub fn load_reports(dirs: &[PathBuf]) -> Result<Vec<RunReport>> {
    if dirs.is_empty() {
        return Err(Error::Config("report needs at least one run directory".into()));
    }
    dirs.iter()
        .map(|d| RunReport::load(&RunPaths::new(d).report()))
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

/// One row per run: `problem,method,seed,train_mse,test_mse,...`.
pub fn comparison_table(reports: &[RunReport]) -> String {
    let mut s = String::from(
        "problem,method,seed,train_mse,test_mse,max_gen_error_pct,minima,components,saddles,evaluations,gamma_max,flagged\n",
    );
    for r in reports {
        let m = r.metrics.as_ref();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.problem.name(),
            r.method.name(),
            r.seed,
            opt(m.map(|m| m.train_mse)),
            opt(m.map(|m| m.test_mse)),
            opt(m.and_then(|m| m.max_generalization_error_pct)),
            r.minima,
            r.components,
            r.saddles,
            r.evaluations,
            opt(r.gamma_max),
            r.is_flagged()
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub problem: Problem,
    pub method: Method,
    pub runs: usize,
    /// Runs that produced usable metrics.
    pub scored: usize,
    pub test_mse_mean: Option<f64>,
    pub test_mse_std: Option<f64>,
}

/// Test MSE mean and sample standard deviation per problem and method, in
/// the order DTB, GA, EBP.
pub fn summarize(reports: &[RunReport]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(Problem, Method), (usize, Vec<f64>)> = BTreeMap::new();
    for r in reports {
        let e = groups.entry((r.problem, r.method)).or_default();
        e.0 += 1;
        if let Some(m) = &r.metrics {
            e.1.push(m.test_mse);
        }
    }
    groups
        .into_iter()
        .map(|((problem, method), (runs, v))| {
            let n = v.len();
            let mean = (n > 0).then(|| v.iter().sum::<f64>() / n as f64);
            let std = mean.filter(|_| n > 1).map(|mu| {
                (v.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
            });
            SummaryRow {
                problem,
                method,
                runs,
                scored: n,
                test_mse_mean: mean,
                test_mse_std: std,
            }
        })
        .collect()
}

pub fn summary_table(rows: &[SummaryRow]) -> String {
    let mut s = String::from("problem,method,runs,scored,test_mse_mean,test_mse_std\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            r.problem.name(),
            r.method.name(),
            r.runs,
            r.scored,
            opt(r.test_mse_mean),
            opt(r.test_mse_std)
        );
    }
    s
}

/// Long-format plotting data: `run,split,k,output_index,target,output,error_pct,outlier`.
pub fn series_table(reports: &[RunReport]) -> String {
    let mut s = String::from("run,split,k,output_index,target,output,error_pct,outlier\n");
    for r in reports {
        let label = format!("{}-{}-{}", r.problem.name(), r.method.name(), r.seed);
        for p in &r.series {
            for (i, (y, yh)) in p.target.iter().zip(&p.output).enumerate() {
                let _ = writeln!(
                    s,
                    "{label},{},{},{i},{y:?},{yh:?},{:?},{}",
                    p.split, p.k, p.error_pct, p.outlier
                );
            }
        }
    }
    s
}

/// Writes `comparison.csv`, `summary.csv` and `series.csv` into `out` and
/// returns the summary rows.
pub fn cmd_report(dirs: &[PathBuf], out: &Path) -> Result<Vec<SummaryRow>> {
    let reports = load_reports(dirs)?;
    let rows = summarize(&reports);
    write(&out.join("comparison.csv"), &comparison_table(&reports))?;
    write(&out.join("summary.csv"), &summary_table(&rows))?;
    write(&out.join("series.csv"), &series_table(&reports))?;
    Ok(rows)
}

/// Human-readable dump of a registry.
pub fn inspect_registry(reg: &MinimaRegistry) -> String {
    let mut s = String::new();
    let d = &reg.diagnostics;
    let _ = writeln!(
        s,
        "components {}  minima {}  saddles {}  rounds {}  evaluations {}  stop: {}",
        reg.components.len(),
        reg.minima.len(),
        reg.saddles.len(),
        d.rounds,
        d.evaluations,
        d.stop
    );
    let _ = writeln!(s, "id  component  sse_train  sse_validation  kkt");
    for m in &reg.minima {
        let _ = writeln!(
            s,
            "{}  {}  {:.6e}  {:.6e}  {:.3e}",
            m.id, m.component_id, m.sse_train, m.sse_validation, m.kkt
        );
    }
    for (i, c) in reg.saddles.iter().enumerate() {
        let pair = c
            .minima_pair
            .map(|(a, b)| format!("{a}-{b}"))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            s,
            "saddle {i}: index {}  value {:.6e}  kkt {:.3e}  joins {pair}",
            c.index, c.value, c.kkt
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy(dir: &Path, seed: u64) -> ExperimentConfig {
        let mut cfg = ExperimentConfig {
            problem: Problem::Toy,
            method: Method::Dtb,
            seed,
            output: dir.to_path_buf(),
            ..Default::default()
        };
        cfg.explore.saddle.q = Some(6);
        cfg
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = ExperimentConfig::default().effective();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text, Path::new("mem")).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("seed = 1\nlearning_rat = 2\n", Path::new("c.toml"));
        assert!(matches!(err, Err(Error::Parse { .. })));
        let err = ExperimentConfig::from_toml("[ebp]\nepoch = 3\n", Path::new("c.toml"));
        assert!(matches!(err, Err(Error::Parse { .. })));
    }

    #[test]
    fn toy_dtb_run() {
        let dir = tempfile::tempdir().unwrap();
        let r = cmd_train(&toy(dir.path(), 3)).unwrap();
        assert_eq!(r.minima, 2);
        assert_eq!(r.saddles, 1);
        assert!(!r.is_flagged());
        assert!(r.metrics.unwrap().train_mse < 1e-10);
        let reg = MinimaRegistry::load(&dir.path().join("registry.json")).unwrap();
        assert!(inspect_registry(&reg).contains("minima 2"));
    }

    #[test]
    fn report_rejects_other_schema() {
        let dir = tempfile::tempdir().unwrap();
        let r = cmd_train(&toy(dir.path(), 1)).unwrap();
        let text = r.to_json().unwrap().replace("\"schema_version\": 1", "\"schema_version\": 7");
        std::fs::write(dir.path().join("report.json"), text).unwrap();
        let err = load_reports(&[dir.path().to_path_buf()]);
        assert!(matches!(err, Err(Error::Schema { .. })));
        assert!(load_reports(&[]).is_err());
    }

    #[test]
    fn summary_statistics() {
        let base = RunReport {
            schema_version: REPORT_SCHEMA,
            config: ExperimentConfig::default(),
            problem: Problem::Narma,
            method: Method::Ga,
            seed: 1,
            flags: vec![],
            metrics: Some(Metrics {
                train_mse: 0.0,
                test_mse: 1.0,
                max_generalization_error_pct: None,
            }),
            minima: 0,
            components: 0,
            saddles: 0,
            evaluations: 0,
            k_u: None,
            k_y: None,
            gamma_max: None,
            y_floor: None,
            series: vec![],
        };
        let mut b = base.clone();
        b.metrics.as_mut().unwrap().test_mse = 3.0;
        let mut c = base.clone();
        c.method = Method::Dtb;
        c.metrics = None;
        let rows = summarize(&[base, b, c]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].method, Method::Dtb);
        assert_eq!(rows[0].scored, 0);
        assert_eq!(rows[1].test_mse_mean, Some(2.0));
        assert!((rows[1].test_mse_std.unwrap() - 2f64.sqrt()).abs() < 1e-15);
    }
}
