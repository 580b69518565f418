//! The three identification benchmarks: NARMA-10, a second-order rational
//! system and the Bouc-Wen hysteretic oscillator.

use std::f64::consts::PI;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::constraints::{with_slacks, Bounds, ParameterVector, RnnSpec};
use crate::error::{Error, Result};
use crate::rnn::Dataset;

pub const DATASET_SCHEMA: u32 = 1;

/// Settings shared by the two discrete-time generators.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NarmaConfig {
    /// Generated steps including the washout.
    pub horizon: usize,
    pub input_sigma: f64,
    pub washout: usize,
    pub n_train: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for NarmaConfig {
    fn default() -> Self {
        Self {
            horizon: 160,
            input_sigma: 0.5,
            washout: 10,
            n_train: 100,
            hidden: 6,
            seed: 1,
        }
    }
}

impl NarmaConfig {
    pub fn second_order() -> Self {
        Self {
            hidden: 8,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= self.washout {
            return Err(Error::Config(format!(
                "horizon {} must exceed washout {}",
                self.horizon, self.washout
            )));
        }
        if !(self.input_sigma > 0.0) || self.hidden == 0 {
            return Err(Error::Config("input_sigma and hidden must be positive".into()));
        }
        let usable = self.horizon - self.washout;
        if self.n_train == 0 || self.n_train >= usable {
            return Err(Error::Config(format!(
                "n_train {} must lie in 1..{usable}",
                self.n_train
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoucWenParams {
    pub m_l: f64,
    pub c_l: f64,
    pub k_l: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma_bw: f64,
    pub delta: f64,
    pub v_exp: f64,
}

impl Default for BoucWenParams {
    fn default() -> Self {
        Self {
            m_l: 2.0,
            c_l: 10.0,
            k_l: 5e4,
            alpha: 5e4,
            beta: 1e3,
            gamma_bw: 0.8,
            delta: -1.1,
            v_exp: 1.0,
        }
    }
}

impl BoucWenParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.m_l > 0.0) || !(self.v_exp >= 1.0) {
            return Err(Error::Config("Bouc-Wen needs m_l > 0 and v_exp >= 1".into()));
        }
        Ok(())
    }

    /// `ż` for the standard Bouc-Wen law.
    pub fn z_rate(&self, ydot: f64, z: f64) -> f64 {
        let (zpow_m1_z, zpow) = if self.v_exp == 1.0 {
            (z, z.abs())
        } else {
            (z.abs().powf(self.v_exp - 1.0) * z, z.abs().powf(self.v_exp))
        };
        self.alpha * ydot - self.beta * (self.gamma_bw * ydot.abs() * zpow_m1_z + self.delta * ydot * zpow)
    }

    /// Time derivative of the state `(y, ẏ, z)` under force `s`.
    pub fn rhs(&self, state: [f64; 3], s: f64) -> [f64; 3] {
        let [y, yd, z] = state;
        let ydd = (s - self.k_l * y - self.c_l * yd - z) / self.m_l;
        [yd, ydd, self.z_rate(yd, z)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Excitation {
    /// Sum of equal-amplitude cosines on a uniform grid of frequencies with
    /// seeded random phases, scaled to the requested RMS.
    Multisine {
        rms: f64,
        f_min: f64,
        f_max: f64,
        lines: usize,
    },
    Sine { amplitude: f64, frequency: f64 },
}

impl Default for Excitation {
    fn default() -> Self {
        Excitation::Multisine {
            rms: 50.0,
            f_min: 5.0,
            f_max: 150.0,
            lines: 30,
        }
    }
}

/// A concrete excitation signal `s(t)`.
#[derive(Debug, Clone)]
pub struct Signal {
    amps: Vec<f64>,
    freqs: Vec<f64>,
    phases: Vec<f64>,
}

impl Signal {
    pub fn new<R: Rng + ?Sized>(exc: &Excitation, rng: &mut R) -> Result<Self> {
        match *exc {
            Excitation::Sine {
                amplitude,
                frequency,
            } => Ok(Self {
                amps: vec![amplitude],
                freqs: vec![frequency],
                phases: vec![-PI / 2.0],
            }),
            Excitation::Multisine {
                rms,
                f_min,
                f_max,
                lines,
            } => {
                if lines == 0 || !(f_max >= f_min) || !(f_min > 0.0) {
                    return Err(Error::Config(format!("invalid multisine: {exc:?}")));
                }
                let a = rms * (2.0 / lines as f64).sqrt();
                let freqs = (0..lines)
                    .map(|j| {
                        if lines == 1 {
                            f_min
                        } else {
                            f_min + (f_max - f_min) * j as f64 / (lines - 1) as f64
                        }
                    })
                    .collect();
                let phases = (0..lines).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
                Ok(Self {
                    amps: vec![a; lines],
                    freqs,
                    phases,
                })
            }
        }
    }

    pub fn at(&self, t: f64) -> f64 {
        self.amps
            .iter()
            .zip(&self.freqs)
            .zip(&self.phases)
            .map(|((a, f), p)| a * (2.0 * PI * f * t + p).cos())
            .sum()
    }
}

/// Classic fixed-step RK4 from rest; returns the state after every step.
pub fn simulate_boucwen(
    params: &BoucWenParams,
    signal: &Signal,
    dt: f64,
    steps: usize,
) -> Result<Vec<[f64; 3]>> {
    let mut x = [0.0; 3];
    let mut out = Vec::with_capacity(steps + 1);
    out.push(x);
    let add = |a: [f64; 3], b: [f64; 3], h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2]];
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = params.rhs(x, signal.at(t));
        let k2 = params.rhs(add(x, k1, 0.5 * dt), signal.at(t + 0.5 * dt));
        let k3 = params.rhs(add(x, k2, 0.5 * dt), signal.at(t + 0.5 * dt));
        let k4 = params.rhs(add(x, k3, dt), signal.at(t + dt));
        for i in 0..3 {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                step: k + 1,
                context: "Bouc-Wen state",
            });
        }
        out.push(x);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoucWenConfig {
    pub params: BoucWenParams,
    pub excitation: Excitation,
    pub sample_rate: f64,
    /// RK4 steps per sample.
    pub substeps: usize,
    /// Samples discarded before the kept window.
    pub transient: usize,
    /// Samples kept (train plus test).
    pub horizon: usize,
    pub n_train: usize,
    pub hidden: usize,
    pub seed: u64,
}

impl Default for BoucWenConfig {
    fn default() -> Self {
        Self {
            params: BoucWenParams::default(),
            excitation: Excitation::default(),
            sample_rate: 750.0,
            substeps: 20,
            transient: 750,
            horizon: 150,
            n_train: 100,
            hidden: 7,
            seed: 1,
        }
    }
}

impl BoucWenConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.sample_rate > 0.0) || self.substeps == 0 || self.hidden == 0 {
            return Err(Error::Config("sample_rate, substeps and hidden must be positive".into()));
        }
        if self.n_train == 0 || self.n_train >= self.horizon {
            return Err(Error::Config(format!(
                "n_train {} must lie in 1..{}",
                self.n_train, self.horizon
            )));
        }
        Ok(())
    }
}

/// Per-column affine map `scaled = (raw - mean) / std`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaling {
    pub input_mean: Vec<f64>,
    pub input_std: Vec<f64>,
    pub target_mean: Vec<f64>,
    pub target_std: Vec<f64>,
}

impl Scaling {
    pub fn identity(n_in: usize, n_out: usize) -> Self {
        Self {
            input_mean: vec![0.0; n_in],
            input_std: vec![1.0; n_in],
            target_mean: vec![0.0; n_out],
            target_std: vec![1.0; n_out],
        }
    }

    /// Maps a scaled target back to physical units.
    pub fn unscale_target(&self, r: usize, v: f64) -> f64 {
        v * self.target_std[r] + self.target_mean[r]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorConfig {
    Narma(NarmaConfig),
    SecondOrder(NarmaConfig),
    Boucwen(BoucWenConfig),
}

impl GeneratorConfig {
    pub fn name(&self) -> &'static str {
        match self {
            GeneratorConfig::Narma(_) => "narma",
            GeneratorConfig::SecondOrder(_) => "second_order",
            GeneratorConfig::Boucwen(_) => "boucwen",
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            GeneratorConfig::Narma(c) | GeneratorConfig::SecondOrder(c) => c.seed,
            GeneratorConfig::Boucwen(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            GeneratorConfig::Narma(c) | GeneratorConfig::SecondOrder(c) => c.seed = seed,
            GeneratorConfig::Boucwen(c) => c.seed = seed,
        }
        self
    }

    pub fn generate(&self) -> Result<SysIdProblem> {
        match self {
            GeneratorConfig::Narma(c) => gen_narma(c),
            GeneratorConfig::SecondOrder(c) => gen_second_order(c),
            GeneratorConfig::Boucwen(c) => gen_boucwen(c),
        }
    }
}

/// A generated benchmark with everything needed to train on it.
#[derive(Debug, Clone, PartialEq)]
pub struct SysIdProblem {
    pub generator: GeneratorConfig,
    /// All kept samples; the first `n_train` form the training set.
    pub data: Dataset,
    pub n_train: usize,
    pub spec: RnnSpec,
    pub bounds: Bounds,
    /// Standard deviation of the initial weights.
    pub init_sigma: f64,
    pub scaling: Scaling,
}

impl SysIdProblem {
    pub fn train(&self) -> Dataset {
        self.data.split(self.n_train).expect("validated split").0
    }

    pub fn test(&self) -> Dataset {
        self.data.split(self.n_train).expect("validated split").1
    }

    /// Initial weights drawn `N(0, init_sigma²)` and clipped into the bounds,
    /// with slacks on the positive branch.
    pub fn initial_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<ParameterVector> {
        let normal = Normal::new(0.0, self.init_sigma)
            .map_err(|e| Error::Config(format!("init sigma: {e}")))?;
        let o: Vec<f64> = (0..self.spec.n_params())
            .map(|i| {
                let li = self.bounds.get(i);
                normal.sample(rng).clamp(-li, li)
            })
            .collect();
        with_slacks(&o, &self.bounds)
    }

    pub fn metadata(&self) -> DatasetMeta {
        DatasetMeta {
            schema_version: DATASET_SCHEMA,
            generator: self.generator.clone(),
            n_inputs: self.data.n_inputs(),
            n_outputs: self.data.n_outputs(),
            n_samples: self.data.len(),
            n_train: self.n_train,
            hidden: self.spec.m,
            bounds: NetworkBounds::standard(),
            init_sigma: self.init_sigma,
            scaling: self.scaling.clone(),
        }
    }

    /// Writes `dataset.csv` and `meta.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_dataset_csv(&dir.join("dataset.csv"), &self.data)?;
        let meta = serde_json::to_string_pretty(&self.metadata()).map_err(|e| Error::Parse {
            path: dir.join("meta.json"),
            message: e.to_string(),
        })?;
        let path = dir.join("meta.json");
        std::fs::write(&path, meta + "\n").map_err(|e| Error::io(&path, e))
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join("meta.json");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let meta: DatasetMeta = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        if meta.schema_version != DATASET_SCHEMA {
            return Err(Error::Schema {
                path,
                message: format!(
                    "dataset schema {} (expected {DATASET_SCHEMA})",
                    meta.schema_version
                ),
            });
        }
        let data = read_dataset_csv(&dir.join("dataset.csv"))?;
        if data.n_inputs() != meta.n_inputs || data.n_outputs() != meta.n_outputs || data.len() != meta.n_samples {
            return Err(Error::Schema {
                path,
                message: "metadata does not match dataset.csv".into(),
            });
        }
        let spec = RnnSpec::new(meta.n_inputs, meta.hidden, meta.n_outputs)?;
        let bounds = meta.bounds.resolve(&spec)?;
        Ok(Self {
            generator: meta.generator,
            data,
            n_train: meta.n_train,
            spec,
            bounds,
            init_sigma: meta.init_sigma,
            scaling: meta.scaling,
        })
    }
}

/// Box limits per weight block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkBounds {
    pub v: f64,
    pub w: f64,
    pub b: f64,
}

impl NetworkBounds {
    /// `V ∈ [-10, 10]`, `W, B ∈ [-5, 5]`.
    pub fn standard() -> Self {
        Self {
            v: 10.0,
            w: 5.0,
            b: 5.0,
        }
    }

    pub fn resolve(&self, spec: &RnnSpec) -> Result<Bounds> {
        Bounds::for_network(spec, self.v, self.w, self.b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetMeta {
    pub schema_version: u32,
    pub generator: GeneratorConfig,
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub n_samples: usize,
    pub n_train: usize,
    pub hidden: usize,
    pub bounds: NetworkBounds,
    pub init_sigma: f64,
    pub scaling: Scaling,
}

/// Header `k,u_1..u_n,y_1..y_t`, one row per sample.
pub fn write_dataset_csv(path: &Path, data: &Dataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    let mut header = vec!["k".to_string()];
    header.extend((1..=data.n_inputs()).map(|i| format!("u_{i}")));
    header.extend((1..=data.n_outputs()).map(|i| format!("y_{i}")));
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for k in 0..data.len() {
        let mut row = vec![k.to_string()];
        row.extend(data.input(k).iter().map(|v| format!("{v:?}")));
        row.extend(data.target(k).iter().map(|v| format!("{v:?}")));
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let header = r.headers().map_err(|e| csv_err(path, e))?.clone();
    let n_in = header.iter().filter(|h| h.starts_with("u_")).count();
    let n_out = header.iter().filter(|h| h.starts_with("y_")).count();
    if header.get(0) != Some("k") || n_in + n_out + 1 != header.len() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: "expected header k,u_1..u_n,y_1..y_t".into(),
        });
    }
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for (row, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        for (j, field) in rec.iter().enumerate().skip(1) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                message: format!("row {row}, column {j}: not a number: {field:?}"),
            })?;
            if j <= n_in {
                inputs.push(v);
            } else {
                targets.push(v);
            }
        }
    }
    Dataset::from_flat(n_in, n_out, inputs, targets)
}

fn csv_err(path: &Path, e: csv::Error) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// One step of the NARMA-10 recurrence. `y_hist[0]` is `y(k)`, `y_hist[i]`
/// is `y(k-i)`; `d_now = d(k)`, `d_lag9 = d(k-9)`.
pub fn narma_step(y_hist: &[f64; 10], d_now: f64, d_lag9: f64) -> f64 {
    let sum: f64 = y_hist[1..].iter().sum();
    0.3 * y_hist[0] + 0.05 * y_hist[0] * sum + 1.5 * d_lag9 * d_now + 0.1
}

/// `y(k+1)` of the second-order rational system.
pub fn second_order_step(y: f64, y_prev: f64, d: f64) -> f64 {
    y * y_prev * (y + 0.25) / (1.0 + y * y + y_prev * y_prev) + d
}

fn lag(v: &[f64], k: usize, i: usize) -> f64 {
    if k >= i {
        v[k - i]
    } else {
        0.0
    }
}

fn draw_inputs(cfg: &NarmaConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let normal = Normal::new(0.0, cfg.input_sigma).expect("validated sigma");
    (0..cfg.horizon).map(|_| normal.sample(&mut rng)).collect()
}

fn check_divergence(y: &[f64], seed: u64) -> Result<()> {
    if let Some(v) = y.iter().find(|v| !v.is_finite() || v.abs() > 1e6) {
        return Err(Error::Divergent {
            seed,
            magnitude: v.abs(),
        });
    }
    Ok(())
}

fn finish(
    generator: GeneratorConfig,
    inputs: Vec<Vec<f64>>,
    targets: Vec<Vec<f64>>,
    n_train: usize,
    hidden: usize,
    init_sigma: f64,
    scaling: Scaling,
) -> Result<SysIdProblem> {
    let n = inputs[0].len();
    let data = Dataset::new(inputs, targets)?;
    let spec = RnnSpec::new(n, hidden, 1)?;
    let bounds = NetworkBounds::standard().resolve(&spec)?;
    Ok(SysIdProblem {
        generator,
        data,
        n_train,
        spec,
        bounds,
        init_sigma,
        scaling,
    })
}

/// NARMA-10 with inputs `[d(k..k-9), y(k..k-4)]` and target `y(k+1)`.
pub fn gen_narma(cfg: &NarmaConfig) -> Result<SysIdProblem> {
    cfg.validate()?;
    let d = draw_inputs(cfg);
    let mut y = vec![0.0; cfg.horizon + 1];
    for k in 0..cfg.horizon {
        let mut hist = [0.0; 10];
        for (i, h) in hist.iter_mut().enumerate() {
            *h = lag(&y, k, i);
        }
        y[k + 1] = narma_step(&hist, d[k], lag(&d, k, 9));
    }
    check_divergence(&y, cfg.seed)?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for k in cfg.washout..cfg.horizon {
        let mut u: Vec<f64> = (0..10).map(|i| lag(&d, k, i)).collect();
        u.extend((0..5).map(|i| lag(&y, k, i)));
        inputs.push(u);
        targets.push(vec![y[k + 1]]);
    }
    finish(
        GeneratorConfig::Narma(cfg.clone()),
        inputs,
        targets,
        cfg.n_train,
        cfg.hidden,
        1.0,
        Scaling::identity(15, 1),
    )
}

/// Second-order system with inputs `[d(k), d(k-1), y(k), y(k-1)]` and
/// target `y(k+1)`.
pub fn gen_second_order(cfg: &NarmaConfig) -> Result<SysIdProblem> {
    cfg.validate()?;
    let d = draw_inputs(cfg);
    let mut y = vec![0.0; cfg.horizon + 1];
    for k in 0..cfg.horizon {
        y[k + 1] = second_order_step(y[k], lag(&y, k, 1), d[k]);
    }
    check_divergence(&y, cfg.seed)?;
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for k in cfg.washout..cfg.horizon {
        inputs.push(vec![d[k], lag(&d, k, 1), y[k], lag(&y, k, 1)]);
        targets.push(vec![y[k + 1]]);
    }
    finish(
        GeneratorConfig::SecondOrder(cfg.clone()),
        inputs,
        targets,
        cfg.n_train,
        cfg.hidden,
        1.0,
        Scaling::identity(4, 1),
    )
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 0.0 { std } else { 1.0 })
}

/// Bouc-Wen oscillator sampled at `sample_rate`, inputs
/// `[s(k..k-5), y(k-1..k-5)]`, target `y(k)`. Force and displacement are
/// standardized with statistics of the training window.
pub fn gen_boucwen(cfg: &BoucWenConfig) -> Result<SysIdProblem> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let signal = Signal::new(&cfg.excitation, &mut rng)?;
    let dt = 1.0 / (cfg.sample_rate * cfg.substeps as f64);
    let n_samples = cfg.transient + cfg.horizon;
    let states = simulate_boucwen(&cfg.params, &signal, dt, n_samples * cfg.substeps)?;
    let y: Vec<f64> = (0..n_samples).map(|k| states[k * cfg.substeps][0]).collect();
    let s: Vec<f64> = (0..n_samples)
        .map(|k| signal.at(k as f64 / cfg.sample_rate))
        .collect();
    let first = cfg.transient.max(5);
    let train_end = first + cfg.n_train;
    let (s_mean, s_std) = mean_std(&s[first..train_end]);
    let (y_mean, y_std) = mean_std(&y[first..train_end]);
    let mut inputs = Vec::new();
    let mut targets = Vec::new();
    for k in first..n_samples {
        let mut u: Vec<f64> = (0..6).map(|i| (s[k - i] - s_mean) / s_std).collect();
        u.extend((1..6).map(|i| (y[k - i] - y_mean) / y_std));
        inputs.push(u);
        targets.push(vec![(y[k] - y_mean) / y_std]);
    }
    let scaling = Scaling {
        input_mean: [vec![s_mean; 6], vec![y_mean; 5]].concat(),
        input_std: [vec![s_std; 6], vec![y_std; 5]].concat(),
        target_mean: vec![y_mean],
        target_std: vec![y_std],
    };
    finish(
        GeneratorConfig::Boucwen(cfg.clone()),
        inputs,
        targets,
        cfg.n_train,
        cfg.hidden,
        0.1f64.sqrt(),
        scaling,
    )
}

/// Signed area enclosed by a closed polyline (shoelace formula).
pub fn loop_area(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len().min(ys.len());
    let mut a = 0.0;
    for i in 0..n {
        let j = (i + 1) % n;
        a += xs[i] * ys[j] - xs[j] * ys[i];
    }
    0.5 * a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn narma_recurrence_examples() {
        assert_eq!(narma_step(&[0.0; 10], 0.0, 0.0), 0.1);
        assert_eq!(narma_step(&[0.0; 10], 1.0, 1.0), 1.6);
    }

    #[test]
    fn second_order_examples() {
        assert_eq!(second_order_step(0.0, 0.0, 0.5), 0.5);
        assert_eq!(second_order_step(1.0, 0.0, 0.0), 0.0);
        assert!((second_order_step(1.0, 1.0, 0.0) - 1.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn narma_shapes_and_determinism() {
        let cfg = NarmaConfig::default();
        let a = gen_narma(&cfg).unwrap();
        let b = gen_narma(&cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.data.len(), 150);
        assert_eq!(a.train().len(), 100);
        assert_eq!(a.test().len(), 50);
        assert_eq!(a.spec, RnnSpec::new(15, 6, 1).unwrap());
        assert_eq!(a.train().input(1), &a.data.input(1)[..]);
        assert_eq!(a.test().input(0), a.data.input(100));
    }

    #[test]
    fn narma_input_variance() {
        let cfg = NarmaConfig::default();
        let d = draw_inputs(&cfg);
        let (_, sd) = mean_std(&d);
        assert!((sd * sd - 0.25).abs() < 0.05, "{}", sd * sd);
    }

    #[test]
    fn horizon_must_exceed_washout() {
        let cfg = NarmaConfig {
            horizon: 5,
            ..NarmaConfig::default()
        };
        assert!(matches!(gen_narma(&cfg), Err(Error::Config(_))));
    }

    #[test]
    fn boucwen_rate_vanishes_without_velocity() {
        let p = BoucWenParams::default();
        assert_eq!(p.z_rate(0.0, 123.0), 0.0);
        assert_eq!(p.z_rate(0.0, -4.0), 0.0);
    }

    #[test]
    fn boucwen_rest_stays_at_rest() {
        let p = BoucWenParams::default();
        let sig = Signal::new(
            &Excitation::Sine {
                amplitude: 0.0,
                frequency: 5.0,
            },
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        let traj = simulate_boucwen(&p, &sig, 1e-4, 1000).unwrap();
        assert!(traj.iter().all(|s| s == &[0.0; 3]));
    }

    #[test]
    fn dataset_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = gen_narma(&NarmaConfig::default()).unwrap();
        p.save(dir.path()).unwrap();
        let back = SysIdProblem::load(dir.path()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn boucwen_metadata_echoes_parameters() {
        let cfg = BoucWenConfig {
            transient: 50,
            ..BoucWenConfig::default()
        };
        let p = gen_boucwen(&cfg).unwrap();
        let meta = serde_json::to_value(p.metadata()).unwrap();
        let params = &meta["generator"]["params"];
        assert_eq!(params["m_l"], 2.0);
        assert_eq!(params["k_l"], 5e4);
        assert_eq!(params["delta"], -1.1);
        assert_eq!(p.data.n_inputs(), 11);
        assert_eq!(p.spec.m, 7);
    }
}
