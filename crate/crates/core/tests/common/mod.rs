//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use trajflow::rnn::Dataset;
use trajflow::RnnSpec;

/// Straightforward re-implementation of the network error, row-major `V`
/// (t×m), `W` (m×n), `B` (m×m) packed in that order, `z(0) = 0`.
pub fn oracle_sse(spec: &RnnSpec, data: &Dataset, o: &[f64]) -> f64 {
    let (n, m, t) = (spec.n, spec.m, spec.t);
    let v = &o[..t * m];
    let w = &o[t * m..t * m + m * n];
    let b = &o[t * m + m * n..];
    let mut z = vec![0.0; m];
    let mut total = 0.0;
    for k in 0..data.len() {
        let u = data.input(k);
        let next: Vec<f64> = (0..m)
            .map(|j| {
                let a: f64 = (0..n).map(|i| w[j * n + i] * u[i]).sum::<f64>()
                    + (0..m).map(|i| b[j * m + i] * z[i]).sum::<f64>();
                a.tanh()
            })
            .collect();
        z = next;
        for r in 0..t {
            let y: f64 = (0..m).map(|j| v[r * m + j] * z[j]).sum();
            total += (y - data.target(k)[r]).powi(2);
        }
    }
    total
}

/// Central differences refined by two Richardson extrapolations (sixth
/// order in `h`).
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, o: &[f64], h: f64) -> Vec<f64> {
    let mut x = o.to_vec();
    let central = |i: usize, step: f64, x: &mut Vec<f64>| {
        let keep = x[i];
        x[i] = keep + step;
        let fp = f(x);
        x[i] = keep - step;
        let fm = f(x);
        x[i] = keep;
        (fp - fm) / (2.0 * step)
    };
    (0..o.len())
        .map(|i| {
            let d: Vec<f64> = [h, h / 2.0, h / 4.0].iter().map(|&s| central(i, s, &mut x)).collect();
            let r1 = (4.0 * d[1] - d[0]) / 3.0;
            let r2 = (4.0 * d[2] - d[1]) / 3.0;
            (16.0 * r2 - r1) / 15.0
        })
        .collect()
}

pub fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Random network and data with `m ≤ 4`, `n ≤ 3`, one output and at most
/// 20 samples.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R) -> (RnnSpec, Dataset, Vec<f64>) {
    let m = rng.random_range(1..=4);
    let n = rng.random_range(1..=3);
    let len = rng.random_range(1..=20);
    let spec = RnnSpec::new(n, m, 1).unwrap();
    let inputs = (0..len).map(|_| (0..n).map(|_| gaussian(rng)).collect()).collect();
    let targets = (0..len).map(|_| vec![gaussian(rng)]).collect();
    let data = Dataset::new(inputs, targets).unwrap();
    let o = (0..spec.n_params()).map(|_| gaussian(rng)).collect();
    (spec, data, o)
}

/// Local minima of a one-dimensional function on a uniform grid.
pub fn grid_minima(f: impl Fn(f64) -> f64, lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).round() as usize;
    let vals: Vec<f64> = (0..=n).map(|i| f(lo + i as f64 * step)).collect();
    (1..n)
        .filter(|&i| vals[i] < vals[i - 1] && vals[i] <= vals[i + 1])
        .map(|i| lo + i as f64 * step)
        .collect()
}

pub fn max_rel_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / y.abs().max(1e-8))
        .fold(0.0, f64::max)
}
