//! Stochastic trust observations, the β accumulators, trusted neighborhoods
//! and the closed-form misclassification bounds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::network::{DegreeCounts, Topology};

/// Maps a uniform draw on `[0, 1)` to a trust observation in `[0, 1]`.
///
/// The simulator feeds one uniform per (edge, round) through this hook, so any
/// inverse-CDF sampler keeps the per-edge stream layout and reproducibility.
pub trait AlphaSampler: Send + Sync {
    fn alpha(&self, uniform: f64, target_is_malicious: bool) -> f64;
}

/// Uniform trust observations centred at `0.5 + E_L` (legitimate target) or
/// `0.5 + E_M` (malicious target) with width `spread`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrustModel {
    e_legitimate: f64,
    e_malicious: f64,
    spread: f64,
    seed: u64,
}

impl TrustModel {
    pub fn new(e_legitimate: f64, e_malicious: f64, spread: f64, seed: u64) -> Result<Self> {
        if !(e_legitimate > 0.0) {
            return Err(Error::TrustModel(format!(
                "E_L must be positive, got {e_legitimate}"
            )));
        }
        if !(e_malicious < 0.0) {
            return Err(Error::TrustModel(format!(
                "E_M must be negative, got {e_malicious}"
            )));
        }
        if !(0.0..=1.0).contains(&spread) {
            return Err(Error::TrustModel(format!(
                "spread must lie in [0, 1], got {spread}"
            )));
        }
        for e in [e_legitimate, e_malicious] {
            let (lo, hi) = (0.5 + e - spread / 2.0, 0.5 + e + spread / 2.0);
            if lo < 0.0 || hi > 1.0 {
                return Err(Error::TrustModel(format!(
                    "support [{lo}, {hi}] leaves [0, 1]"
                )));
            }
        }
        Ok(TrustModel {
            e_legitimate,
            e_malicious,
            spread,
            seed,
        })
    }

    /// The reference experiment's model: `E_L = -E_M = 0.05`.
    pub fn symmetric(offset: f64, spread: f64, seed: u64) -> Result<Self> {
        Self::new(offset, -offset, spread, seed)
    }

    pub fn e_legitimate(&self) -> f64 {
        self.e_legitimate
    }

    pub fn e_malicious(&self) -> f64 {
        self.e_malicious
    }

    pub fn spread(&self) -> f64 {
        self.spread
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        TrustModel { seed, ..self }
    }

    pub fn mean(&self, target_is_malicious: bool) -> f64 {
        0.5 + if target_is_malicious {
            self.e_malicious
        } else {
            self.e_legitimate
        }
    }

    /// Random stream for monitored edge `edge`, positioned at round 0.
    pub fn edge_stream(&self, edge: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(edge as u64);
        rng
    }
}

impl AlphaSampler for TrustModel {
    fn alpha(&self, uniform: f64, target_is_malicious: bool) -> f64 {
        let mean = self.mean(target_is_malicious);
        (mean - self.spread / 2.0 + self.spread * uniform).clamp(0.0, 1.0)
    }
}

// One f64 draw consumes one u64, i.e. two 32-bit ChaCha words.
const WORDS_PER_DRAW: u128 = 2;

/// α for monitored edge `edge` at round `round`, computed directly from the
/// stream position. Agrees bit-for-bit with sequential draws from [`AlphaStreams`].
pub fn sample_alpha(
    model: &TrustModel,
    edge: usize,
    target_is_malicious: bool,
    round: usize,
) -> f64 {
    let mut rng = model.edge_stream(edge);
    rng.set_word_pos(WORDS_PER_DRAW * round as u128);
    model.alpha(rng.random::<f64>(), target_is_malicious)
}

/// Independent per-edge observation streams for one simulation run.
#[derive(Debug, Clone)]
pub struct AlphaStreams {
    model: TrustModel,
    streams: Vec<ChaCha8Rng>,
    target_malicious: Vec<bool>,
}

impl AlphaStreams {
    pub fn new(model: TrustModel, topology: &Topology) -> Self {
        let edges = topology.monitored_edges();
        let streams = (0..edges.len()).map(|e| model.edge_stream(e)).collect();
        let target_malicious = edges
            .iter()
            .map(|&(_, j)| topology.is_malicious(j))
            .collect();
        AlphaStreams {
            model,
            streams,
            target_malicious,
        }
    }

    /// Draws this round's observation for every monitored edge into `out`.
    pub fn draw_round(&mut self, out: &mut Vec<f64>) {
        out.clear();
        for (rng, &mal) in self.streams.iter_mut().zip(&self.target_malicious) {
            out.push(self.model.alpha(rng.random::<f64>(), mal));
        }
    }
}

/// β_ij(t) for every monitored edge, in [`Topology::monitored_edges`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustState {
    beta: Vec<f64>,
    round: usize,
}

impl TrustState {
    pub fn new(topology: &Topology) -> Self {
        TrustState {
            beta: vec![0.0; topology.n_monitored_edges()],
            round: 0,
        }
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn round(&self) -> usize {
        self.round
    }

    /// β_ij ← β_ij + (α_ij − 0.5) for every edge; advances the round.
    pub fn update_beta(&mut self, alphas: &[f64]) -> Result<()> {
        if alphas.len() != self.beta.len() {
            return Err(Error::Dimension {
                expected: self.beta.len(),
                got: alphas.len(),
            });
        }
        for (b, a) in self.beta.iter_mut().zip(alphas) {
            *b += a - 0.5;
        }
        self.round += 1;
        Ok(())
    }

    pub fn trusted_neighborhoods(&self, topology: &Topology) -> ClassificationSnapshot {
        let mut snap = ClassificationSnapshot::empty(topology);
        self.classify_into(topology, &mut snap);
        snap
    }

    /// Like [`TrustState::trusted_neighborhoods`], reusing `snapshot`'s buffers.
    pub fn classify_into(&self, topology: &Topology, snapshot: &mut ClassificationSnapshot) {
        snapshot.round = self.round;
        snapshot.trusted.clear();
        snapshot.trusted.extend(self.beta.iter().map(|&b| b >= 0.0));
        snapshot.d.clear();
        for i in 0..topology.n_legitimate() {
            let start = topology.edge_offset(i);
            let end = topology.edge_offset(i + 1);
            let count = snapshot.trusted[start..end].iter().filter(|&&t| t).count();
            snapshot.d.push(count + 1);
        }
    }
}

/// N_i(t) and d_i(t) = |N_i(t)| + 1 for every legitimate agent at one round.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassificationSnapshot {
    pub round: usize,
    /// Per monitored edge: whether the target is currently trusted.
    pub trusted: Vec<bool>,
    /// d_i(t) per legitimate agent.
    pub d: Vec<usize>,
}

impl ClassificationSnapshot {
    fn empty(topology: &Topology) -> Self {
        ClassificationSnapshot {
            round: 0,
            trusted: Vec::with_capacity(topology.n_monitored_edges()),
            d: Vec::with_capacity(topology.n_legitimate()),
        }
    }

    /// Everything trusted, as at round 0.
    pub fn all_trusted(topology: &Topology) -> Self {
        TrustState::new(topology).trusted_neighborhoods(topology)
    }

    pub fn trusted_set(&self, topology: &Topology, agent: usize) -> Vec<usize> {
        let start = topology.edge_offset(agent);
        topology
            .neighbors(agent)
            .iter()
            .zip(&self.trusted[start..])
            .filter_map(|(&j, &t)| t.then_some(j))
            .collect()
    }

    /// True when some legitimate neighbor is distrusted or some malicious neighbor trusted.
    pub fn has_misclassification(&self, topology: &Topology) -> bool {
        (0..topology.n_legitimate()).any(|i| {
            let start = topology.edge_offset(i);
            topology
                .neighbors(i)
                .iter()
                .zip(&self.trusted[start..])
                .any(|(&j, &t)| t == topology.is_malicious(j))
        })
    }
}

/// Closed-form misclassification bounds after `k` observations per edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MisclassificationBounds {
    /// Bound on Pr(some legitimate agent misclassifies some neighbor at one time).
    pub p_c: f64,
    /// Bound on Pr(some misclassification at any time after `k`).
    pub p_e: f64,
    /// Per-edge bound on Pr(β_ij(k) < 0) for a legitimate target.
    pub edge_legitimate: f64,
    /// Per-edge bound on Pr(β_ij(k) ≥ 0) for a malicious target.
    pub edge_malicious: f64,
}

pub fn p_c(k: i64, counts: DegreeCounts, e_l: f64, e_m: f64) -> f64 {
    if k < 0 {
        return 0.0;
    }
    let k = k as f64;
    counts.legitimate as f64 * (-2.0 * k * e_l * e_l).exp()
        + counts.malicious as f64 * (-2.0 * k * e_m * e_m).exp()
}

pub fn p_e(k: i64, counts: DegreeCounts, e_l: f64, e_m: f64) -> f64 {
    let k = k as f64;
    let term = |d: usize, e: f64| {
        if d == 0 {
            0.0
        } else {
            d as f64 * (-2.0 * k * e * e).exp() / (1.0 - (-2.0 * e * e).exp())
        }
    };
    term(counts.legitimate, e_l) + term(counts.malicious, e_m)
}

pub fn error_bounds(k: i64, counts: DegreeCounts, e_l: f64, e_m: f64) -> MisclassificationBounds {
    let edge = |e: f64, wrong_sign: bool| {
        if k < 0 || wrong_sign {
            1.0
        } else {
            (-2.0 * k as f64 * e * e).exp()
        }
    };
    MisclassificationBounds {
        p_c: p_c(k, counts, e_l, e_m),
        p_e: p_e(k, counts, e_l, e_m),
        edge_legitimate: edge(e_l, e_l < 0.0),
        edge_malicious: edge(e_m, e_m > 0.0),
    }
}

/// Bound on Pr(T_f = k): `min{p_c(k − 1), 1}`.
pub fn prob_tf_equals_bound(k: i64, counts: DegreeCounts, e_l: f64, e_m: f64) -> f64 {
    p_c(k - 1, counts, e_l, e_m).min(1.0)
}

/// Bound on Pr(T_f > k − 1): `min{p_e(k − 1), 1}`.
pub fn prob_tf_exceeds_bound(k: i64, counts: DegreeCounts, e_l: f64, e_m: f64) -> f64 {
    p_e(k - 1, counts, e_l, e_m).min(1.0)
}

/// Correct classification time observed over rounds `0..horizon`.
///
/// Smallest `k` such that every round in `k..horizon` classifies every edge
/// correctly; `None` when round `horizon − 1` still misclassifies.
pub fn detect_tf(
    history: &[ClassificationSnapshot],
    topology: &Topology,
    horizon: usize,
) -> Option<usize> {
    let mut tracker = TfTracker::default();
    for (round, snap) in history.iter().take(horizon).enumerate() {
        tracker.observe(round, snap.has_misclassification(topology));
    }
    tracker.finish(horizon)
}

/// Streaming form of [`detect_tf`] that keeps only the last misclassified round.
#[derive(Debug, Clone, Copy, Default)]
pub struct TfTracker {
    last_misclassified: Option<usize>,
}

impl TfTracker {
    pub fn observe(&mut self, round: usize, misclassified: bool) {
        if misclassified {
            self.last_misclassified = Some(round);
        }
    }

    pub fn finish(&self, horizon: usize) -> Option<usize> {
        match self.last_misclassified {
            None => Some(0),
            Some(r) if r + 1 >= horizon => None,
            Some(r) => Some(r + 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn counts(l: usize, m: usize) -> DegreeCounts {
        DegreeCounts {
            legitimate: l,
            malicious: m,
        }
    }

    #[test]
    fn degenerate_spread_is_constant() {
        let model = TrustModel::new(0.05, -0.05, 0.0, 7).unwrap();
        for round in 0..20 {
            assert_relative_eq!(sample_alpha(&model, 3, false, round), 0.55, epsilon = 1e-15);
            assert_relative_eq!(sample_alpha(&model, 4, true, round), 0.45, epsilon = 1e-15);
        }
    }

    #[test]
    fn sample_mean_and_support() {
        let model = TrustModel::new(0.05, -0.05, 0.8, 11).unwrap();
        let mut rng = model.edge_stream(0);
        let n = 1_000_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let a = model.alpha(rng.random::<f64>(), false);
            assert!((0.15..=0.95).contains(&a));
            sum += a;
        }
        assert!((sum / n as f64 - 0.55).abs() < 1e-3);
    }

    #[test]
    fn direct_and_sequential_draws_agree() {
        let topology = Topology::canonical().with_malicious_attached(3);
        let model = TrustModel::new(0.05, -0.05, 0.8, 99).unwrap();
        let mut streams = AlphaStreams::new(model, &topology);
        let edges = topology.monitored_edges();
        let mut buf = Vec::new();
        for round in 0..25 {
            streams.draw_round(&mut buf);
            for (e, &(_, j)) in edges.iter().enumerate() {
                assert_eq!(
                    buf[e].to_bits(),
                    sample_alpha(&model, e, topology.is_malicious(j), round).to_bits()
                );
            }
        }
    }

    #[test]
    fn rejects_support_outside_unit_interval() {
        assert!(TrustModel::new(0.05, -0.05, 0.95, 0).is_err());
        assert!(TrustModel::new(0.0, -0.05, 0.5, 0).is_err());
        assert!(TrustModel::new(0.05, 0.01, 0.5, 0).is_err());
        assert!(TrustModel::new(0.05, -0.05, 0.9, 0).is_ok());
    }

    #[test]
    fn beta_accumulation_examples() {
        let topology = Topology::new(2, 0, [(0, 1)]).unwrap();
        let mut state = TrustState::new(&topology);
        for a in [0.6, 0.4, 0.7] {
            state.update_beta(&[a, 0.5]).unwrap();
        }
        assert_relative_eq!(state.beta()[0], 0.2, epsilon = 1e-12);
        assert_eq!(state.beta()[1], 0.0);
        assert_eq!(state.round(), 3);

        let mut state = TrustState::new(&topology);
        for t in 1..=50 {
            state.update_beta(&[0.45, 0.45]).unwrap();
            assert_relative_eq!(state.beta()[0], -0.05 * t as f64, epsilon = 1e-12);
        }
        assert!(state.update_beta(&[0.5]).is_err());
    }

    #[test]
    fn neighborhoods_follow_sign_rule() {
        let topology = Topology::new(4, 0, [(0, 1), (0, 2), (0, 3)]).unwrap();
        let state = TrustState::new(&topology);
        let snap = state.trusted_neighborhoods(&topology);
        assert_eq!(snap.d, vec![4, 2, 2, 2]);

        let mut state = TrustState {
            beta: vec![0.2, 0.0, -0.3, 0.0, 0.0, 0.0],
            round: 5,
        };
        let snap = state.trusted_neighborhoods(&topology);
        assert_eq!(snap.trusted_set(&topology, 0), vec![1, 2]);
        assert_eq!(snap.d[0], 3);
        state.beta[1] = -0.01;
        assert_eq!(
            state
                .trusted_neighborhoods(&topology)
                .trusted_set(&topology, 0),
            vec![1]
        );
    }

    #[test]
    fn error_bound_examples() {
        let b = error_bounds(0, counts(2, 1), 0.05, -0.05);
        assert_eq!(b.p_c, 3.0);
        assert_eq!(error_bounds(-1, counts(5, 9), 0.05, -0.05).p_c, 0.0);
        assert!(error_bounds(-1, counts(5, 9), 0.05, -0.05).p_e > 1.0);

        let b = error_bounds(100, counts(1, 1), 0.05, -0.05);
        // Independent scalar evaluation of the closed forms.
        let edge = (-0.5f64).exp();
        assert_relative_eq!(b.p_c, 2.0 * edge, epsilon = 1e-12);
        assert_relative_eq!(b.p_c, 1.2130613194252668, epsilon = 1e-12);
        assert_relative_eq!(
            b.p_e,
            2.0 * edge / (1.0 - (-0.005f64).exp()),
            epsilon = 1e-9
        );
        assert_relative_eq!(b.p_e, 243.21929998677214, epsilon = 1e-9);
        assert_relative_eq!(b.edge_legitimate, edge, epsilon = 1e-15);
        assert_relative_eq!(b.edge_malicious, edge, epsilon = 1e-15);

        let b = error_bounds(10, counts(1, 1), -0.05, 0.05);
        assert_eq!(b.edge_legitimate, 1.0);
        assert_eq!(b.edge_malicious, 1.0);
    }

    #[test]
    fn probability_wrappers_clamp() {
        let c = counts(30, 225);
        assert_eq!(prob_tf_equals_bound(0, c, 0.05, -0.05), 0.0);
        assert_eq!(prob_tf_exceeds_bound(0, c, 0.05, -0.05), 1.0);
        assert!(prob_tf_equals_bound(5000, c, 0.05, -0.05) < 1e-8);
    }

    #[test]
    fn tf_detection() {
        // No malicious agents, deterministic trust: never misclassified.
        let topology = Topology::canonical();
        let snap = ClassificationSnapshot::all_trusted(&topology);
        assert_eq!(detect_tf(&vec![snap; 10], &topology, 10), Some(0));

        // Deterministic malicious observations: misclassified only at round 0.
        let topology = Topology::canonical().with_malicious_attached(2);
        let model = TrustModel::new(0.05, -0.05, 0.0, 1).unwrap();
        let mut streams = AlphaStreams::new(model, &topology);
        let mut state = TrustState::new(&topology);
        let mut history = Vec::new();
        let mut buf = Vec::new();
        for _ in 0..10 {
            history.push(state.trusted_neighborhoods(&topology));
            streams.draw_round(&mut buf);
            state.update_beta(&buf).unwrap();
        }
        assert_eq!(detect_tf(&history, &topology, 10), Some(1));
        assert_eq!(detect_tf(&history[..1], &topology, 1), None);
    }

    #[test]
    fn tracker_edge_cases() {
        let mut t = TfTracker::default();
        t.observe(0, true);
        t.observe(3, true);
        assert_eq!(t.finish(10), Some(4));
        assert_eq!(t.finish(4), None);
    }
}

#[cfg(test)]
mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn incremental_beta_matches_batch(seed in any::<u64>(), rounds in 1usize..200) {
            let topology = Topology::canonical().with_malicious_attached(2);
            let model = TrustModel::new(0.05, -0.05, 0.8, seed).unwrap();
            let mut streams = AlphaStreams::new(model, &topology);
            let mut state = TrustState::new(&topology);
            let mut buf = Vec::new();
            for _ in 0..rounds {
                streams.draw_round(&mut buf);
                state.update_beta(&buf).unwrap();
            }
            let edges = topology.monitored_edges();
            for (e, &(_, j)) in edges.iter().enumerate() {
                let batch: f64 = (0..rounds).map(|k| sample_alpha(&model, e, topology.is_malicious(j), k) - 0.5).sum();
                prop_assert!((batch - state.beta()[e]).abs() < 1e-9);
            }
        }

        #[test]
        fn bounds_nonincreasing_in_k(k in 0i64..5000, l in 0usize..100, m in 0usize..300, el in 0.01f64..0.4, em in 0.01f64..0.4) {
            let c = DegreeCounts { legitimate: l, malicious: m };
            prop_assert!(p_c(k + 1, c, el, -em) <= p_c(k, c, el, -em));
            prop_assert!(p_e(k + 1, c, el, -em) <= p_e(k, c, el, -em));
        }
    }
}
