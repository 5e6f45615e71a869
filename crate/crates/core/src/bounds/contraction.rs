//! Monte Carlo check of the perturbed averaging envelope: for
//! `X(t+1) = X(t)Wᵀ + Δ(t)` with `E‖Δ_i(t)‖² ≤ δ(t)²`, the mean distance to
//! the average stays below `2ηρ^t + δ(0)ρ^{t/2}/(1−ρ) + δ(t/2)/(1−ρ)` and the
//! mean squared distance below its square.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub struct ContractionCase {
    pub weights: DMatrix<f64>,
    pub rho: f64,
    /// Initial columns are drawn uniformly from the ball of this radius.
    pub eta: f64,
    pub dim: usize,
    /// Perturbation budget δ(t), nonincreasing.
    pub delta: Box<dyn Fn(usize) -> f64 + Send + Sync>,
    pub horizon: usize,
    pub trials: usize,
    pub seed: u64,
}

impl ContractionCase {
    pub fn envelope(&self, t: usize) -> f64 {
        let q = 1.0 - self.rho;
        2.0 * self.eta * self.rho.powi(t as i32)
            + (self.delta)(0) * self.rho.powi((t / 2) as i32) / q
            + (self.delta)(t / 2) / q
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionPoint {
    pub t: usize,
    pub mean_dist: f64,
    pub stderr_dist: f64,
    pub mean_sq: f64,
    pub stderr_sq: f64,
    pub envelope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContractionReport {
    pub points: Vec<ContractionPoint>,
    /// Times where a mean exceeds its bound by more than `slack` standard errors.
    pub violations: Vec<usize>,
    /// First `(t, trial)` whose own path exceeded the first-moment envelope (informational).
    pub first_path_exceedance: Option<(usize, usize)>,
}

/// Uniform draw from the `dim`-ball of radius `r`.
pub fn uniform_in_ball(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vec<f64> {
    let mut v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let radius = r * rng.random::<f64>().powf(1.0 / dim as f64);
    v.iter_mut().for_each(|x| *x *= radius / n);
    v
}

pub fn perturbed_contraction_check(
    case: &ContractionCase,
    slack: f64,
) -> Result<ContractionReport> {
    let n = case.weights.nrows();
    if n == 0 || case.weights.ncols() != n {
        return Err(Error::OutOfRange(
            "weight matrix must be square and nonempty".into(),
        ));
    }
    for i in 0..n {
        let (r, c) = (case.weights.row(i).sum(), case.weights.column(i).sum());
        if (r - 1.0).abs() > 1e-12 || (c - 1.0).abs() > 1e-12 {
            return Err(Error::OutOfRange(
                "weight matrix must be doubly stochastic".into(),
            ));
        }
    }
    if case.trials < 2 {
        return Err(Error::OutOfRange("need at least two trials".into()));
    }
    let steps = case.horizon + 1;
    let mut sum_d = vec![0.0; steps];
    let mut sum_d2 = vec![0.0; steps];
    let mut sum_s = vec![0.0; steps];
    let mut sum_s2 = vec![0.0; steps];
    let mut first_path_exceedance = None;
    let d = case.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(case.seed);
    let mut x = vec![0.0; n * d];
    let mut next = vec![0.0; n * d];

    for trial in 0..case.trials {
        for i in 0..n {
            x[i * d..(i + 1) * d].copy_from_slice(&uniform_in_ball(&mut rng, d, case.eta));
        }
        for t in 0..steps {
            let (dist, sq) = spread(&x, n, d);
            sum_d[t] += dist;
            sum_d2[t] += dist * dist;
            sum_s[t] += sq;
            sum_s2[t] += sq * sq;
            if first_path_exceedance.is_none() && dist > case.envelope(t) {
                first_path_exceedance = Some((t, trial));
            }
            if t == case.horizon {
                break;
            }
            let budget = (case.delta)(t);
            for i in 0..n {
                let noise = uniform_in_ball(&mut rng, d, budget);
                for k in 0..d {
                    let mut acc = 0.0;
                    for j in 0..n {
                        acc += case.weights[(i, j)] * x[j * d + k];
                    }
                    next[i * d + k] = acc + noise[k];
                }
            }
            std::mem::swap(&mut x, &mut next);
        }
    }

    let m = case.trials as f64;
    let stats = |s: f64, s2: f64| {
        let mean = s / m;
        let var = ((s2 - m * mean * mean) / (m - 1.0)).max(0.0);
        (mean, (var / m).sqrt())
    };
    let mut points = Vec::with_capacity(steps);
    let mut violations = Vec::new();
    for t in 0..steps {
        let (mean_dist, stderr_dist) = stats(sum_d[t], sum_d2[t]);
        let (mean_sq, stderr_sq) = stats(sum_s[t], sum_s2[t]);
        let envelope = case.envelope(t);
        if mean_dist > envelope + slack * stderr_dist
            || mean_sq > envelope * envelope + slack * stderr_sq
        {
            violations.push(t);
        }
        points.push(ContractionPoint {
            t,
            mean_dist,
            stderr_dist,
            mean_sq,
            stderr_sq,
            envelope,
        });
    }
    Ok(ContractionReport {
        points,
        violations,
        first_path_exceedance,
    })
}

// (1/n)Σ‖x_i − x̄‖ and (1/n)Σ‖x_i − x̄‖².
fn spread(x: &[f64], n: usize, d: usize) -> (f64, f64) {
    let mut avg = vec![0.0; d];
    for i in 0..n {
        for k in 0..d {
            avg[k] += x[i * d + k] / n as f64;
        }
    }
    let (mut dist, mut sq) = (0.0, 0.0);
    for i in 0..n {
        let s: f64 = (0..d).map(|k| (x[i * d + k] - avg[k]).powi(2)).sum();
        dist += s.sqrt();
        sq += s;
    }
    (dist / n as f64, sq / n as f64)
}
