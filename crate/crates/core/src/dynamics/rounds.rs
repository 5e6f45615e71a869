//! One synchronous round of each update rule.

use crate::error::{Error, Result};
use crate::network::{NominalWeights, Topology};
use crate::problem::Problem;
use crate::trust::ClassificationSnapshot;
use crate::vecops::norm;

const STOCHASTIC_TOL: f64 = 1e-12;

/// Row-major values of the legitimate agents, `n × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Values {
    dim: usize,
    data: Vec<f64>,
}

impl Values {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: data.len(),
            });
        }
        Ok(Values { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Problem("rows of unequal length".into()));
        }
        Values::new(dim, rows.concat())
    }

    pub fn zeros(n: usize, dim: usize) -> Self {
        Values {
            dim,
            data: vec![0.0; n * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_agents(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn agent(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn agent_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for row in self.rows() {
            for (a, v) in m.iter_mut().zip(row) {
                *a += v;
            }
        }
        let n = self.n_agents() as f64;
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// Weights one round actually applied, in monitored-edge order.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundWeights {
    pub self_weights: Vec<f64>,
    pub edge_weights: Vec<f64>,
}

/// What every legitimate agent received this round, one `dim`-vector per
/// monitored edge, together with the announced `d_j(t)`.
#[derive(Debug, Clone)]
pub struct Inbox {
    pub values: Vec<f64>,
    pub degrees: Vec<usize>,
}

pub struct RoundOutput {
    pub next: Values,
    /// max_i ‖φ_i(t)‖.
    pub max_residual: f64,
    pub weights: Option<RoundWeights>,
}

/// Trust-weighted projected gradient round.
///
/// With `active == false` (t < T0) all neighbor weights vanish, and with γ = 0
/// the values stay put. `residual_limit`, when given, is G and every
/// `‖φ_i‖ ≤ γG` is enforced.
#[allow(clippy::too_many_arguments)]
pub fn resilient_round(
    x: &Values,
    topology: &Topology,
    snapshot: &ClassificationSnapshot,
    inbox: &Inbox,
    problem: &Problem,
    gamma: f64,
    active: bool,
    t: usize,
    residual_limit: Option<f64>,
    record_weights: bool,
) -> Result<RoundOutput> {
    let dim = x.dim();
    let n = topology.n_legitimate();
    let domain = problem.domain();
    let mut next = Values::zeros(n, dim);
    let mut c = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut max_residual = 0.0f64;
    let mut weights = record_weights.then(|| RoundWeights {
        self_weights: Vec::with_capacity(n),
        edge_weights: Vec::with_capacity(topology.n_monitored_edges()),
    });
    let mut edge_w = Vec::new();

    for i in 0..n {
        let (start, end) = (topology.edge_offset(i), topology.edge_offset(i + 1));
        let d_i = snapshot.d[i];
        edge_w.clear();
        let mut off = 0.0;
        for e in start..end {
            let w = if active && snapshot.trusted[e] {
                1.0 / (2.0 * d_i.max(inbox.degrees[e]) as f64)
            } else {
                0.0
            };
            edge_w.push(w);
            off += w;
        }
        let w_ii = 1.0 - off;
        if w_ii < 0.5 - STOCHASTIC_TOL || edge_w.iter().any(|&w| w < 0.0) {
            return Err(Error::Invariant {
                round: t,
                what: format!("weight row of agent {i} is not admissible"),
            });
        }

        for (ck, xk) in c.iter_mut().zip(x.agent(i)) {
            *ck = w_ii * xk;
        }
        for (k, e) in (start..end).enumerate() {
            let received = &inbox.values[e * dim..(e + 1) * dim];
            for (ck, v) in c.iter_mut().zip(received) {
                *ck += edge_w[k] * v;
            }
        }

        let out = next.agent_mut(i);
        problem.objectives()[i].gradient_into(&c, &mut grad);
        for ((o, ck), gk) in out.iter_mut().zip(&c).zip(&grad) {
            *o = ck - gamma * gk;
        }
        domain.project_in_place(out);
        let residual = out
            .iter()
            .zip(&c)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        if let Some(g) = residual_limit {
            let limit = gamma * g;
            if residual > limit * (1.0 + 1e-12) + 1e-12 {
                return Err(Error::Invariant {
                    round: t,
                    what: format!("agent {i}: residual {residual} exceeds gamma*G = {limit}"),
                });
            }
        }
        max_residual = max_residual.max(residual);
        if let Some(w) = weights.as_mut() {
            w.self_weights.push(w_ii);
            w.edge_weights.extend_from_slice(&edge_w);
        }
    }
    Ok(RoundOutput {
        next,
        max_residual,
        weights,
    })
}

/// Malicious-free round with the nominal weights: `z⁺ = Π(Wz − γ∇f(Wz))`.
///
/// Terms are accumulated in the same order as [`resilient_round`], so both
/// agree bit-for-bit when trust is perfect.
pub fn nominal_round(
    z: &Values,
    weights: &NominalWeights,
    problem: &Problem,
    gamma: f64,
) -> Values {
    let dim = z.dim();
    let n = weights.size();
    let domain = problem.domain();
    let mut next = Values::zeros(n, dim);
    let mut r = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    for i in 0..n {
        let w_ii = weights.weight(i, i);
        for (rk, zk) in r.iter_mut().zip(z.agent(i)) {
            *rk = w_ii * zk;
        }
        for j in (0..n).filter(|&j| j != i) {
            let w = weights.weight(i, j);
            if w != 0.0 {
                for (rk, zk) in r.iter_mut().zip(z.agent(j)) {
                    *rk += w * zk;
                }
            }
        }
        problem.objectives()[i].gradient_into(&r, &mut grad);
        let out = next.agent_mut(i);
        for ((o, rk), gk) in out.iter_mut().zip(&r).zip(&grad) {
            *o = rk - gamma * gk;
        }
        domain.project_in_place(out);
    }
    next
}

/// Trims up to `f` received values strictly above `own` and up to `f`
/// strictly below, then averages the rest with `own`.
pub fn wmsr_filter(own: f64, received: &[f64], f: usize) -> f64 {
    let mut above: Vec<f64> = received.iter().copied().filter(|&v| v > own).collect();
    let mut below: Vec<f64> = received.iter().copied().filter(|&v| v < own).collect();
    // Stable sorts keep index order among ties.
    above.sort_by(|a, b| b.total_cmp(a));
    below.sort_by(|a, b| a.total_cmp(b));
    let kept_above = &above[f.min(above.len())..];
    let kept_below = &below[f.min(below.len())..];
    let equal = received.iter().filter(|&&v| v == own).count();
    let count = 1 + equal + kept_above.len() + kept_below.len();
    let sum =
        own * (1 + equal) as f64 + kept_above.iter().sum::<f64>() + kept_below.iter().sum::<f64>();
    sum / count as f64
}

/// W-MSR baseline: coordinate-wise trimmed mean of self and all neighbors,
/// then a projected gradient step.
pub fn wmsr_round(
    x: &Values,
    topology: &Topology,
    inbox: &Inbox,
    problem: &Problem,
    f: usize,
    gamma: f64,
) -> Values {
    let dim = x.dim();
    let n = topology.n_legitimate();
    let domain = problem.domain();
    let mut next = Values::zeros(n, dim);
    let mut c = vec![0.0; dim];
    let mut grad = vec![0.0; dim];
    let mut received = Vec::new();
    for i in 0..n {
        let (start, end) = (topology.edge_offset(i), topology.edge_offset(i + 1));
        for (k, ck) in c.iter_mut().enumerate() {
            received.clear();
            received.extend((start..end).map(|e| inbox.values[e * dim + k]));
            *ck = wmsr_filter(x.agent(i)[k], &received, f);
        }
        problem.objectives()[i].gradient_into(&c, &mut grad);
        let out = next.agent_mut(i);
        for ((o, ck), gk) in out.iter_mut().zip(&c).zip(&grad) {
            *o = ck - gamma * gk;
        }
        domain.project_in_place(out);
    }
    next
}

/// (1/n)Σ‖x_i − x̄‖.
pub fn mean_distance_to_average(x: &Values) -> f64 {
    let avg = x.mean();
    let mut diff = vec![0.0; x.dim()];
    let total: f64 = x
        .rows()
        .map(|row| {
            for ((d, a), b) in diff.iter_mut().zip(row).zip(&avg) {
                *d = a - b;
            }
            norm(&diff)
        })
        .sum();
    total / x.n_agents() as f64
}
