//! Full runs: trust learning plus one of the update rules, round by round.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use super::attack::Attack;
use super::rounds::{nominal_round, resilient_round, wmsr_round, Inbox, RoundWeights, Values};
use super::schedule::StepSchedule;
use crate::error::{Error, Result};
use crate::network::{nominal_weight_matrix, Topology};
use crate::problem::Problem;
use crate::trust::{AlphaStreams, ClassificationSnapshot, TfTracker, TrustModel, TrustState};

// Stream id reserved for initial values; trust observations use ids 0..edges.
const INITIAL_VALUE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Resilient,
    Nominal,
    Wmsr { f: usize },
}

impl Algorithm {
    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Resilient => "resilient",
            Algorithm::Nominal => "nominal",
            Algorithm::Wmsr { .. } => "wmsr",
        }
    }
}

/// Everything a run needs besides its seed.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub topology: Topology,
    pub trust: TrustModel,
    pub problem: Problem,
    pub schedule: StepSchedule,
    pub attack: Attack,
    pub horizon: usize,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::OutOfRange("horizon must be at least 1".into()));
        }
        if self.problem.n_agents() != self.topology.n_legitimate() {
            return Err(Error::Dimension {
                expected: self.topology.n_legitimate(),
                got: self.problem.n_agents(),
            });
        }
        Ok(())
    }

    /// SHA-256 over a canonical description of the configuration.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.topology.to_text());
        h.update(format!("{:?}", self.problem));
        h.update(format!(
            "{:?}{:?}{:?}{:?}{}",
            self.trust, self.schedule, self.attack.strategy, self.attack.degree, self.horizon
        ));
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Which states a run keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Record {
    All,
    Times(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub record: Record,
    pub record_weights: bool,
    /// Enforce ‖φ_i(t)‖ ≤ γ(t − T0)G every resilient round.
    pub check_residuals: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record: Record::All,
            record_weights: false,
            check_residuals: true,
        }
    }
}

/// Outcome of classification tracking over the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfObservation {
    /// The algorithm does not learn trust.
    NotApplicable,
    Reached(usize),
    /// Still misclassifying at the last round.
    NotReached,
}

#[derive(Debug, Clone)]
pub struct SimulationTrace {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub config_hash: String,
    pub horizon: usize,
    /// Recorded times, ascending, within `0..=horizon`.
    pub times: Vec<usize>,
    /// x(t) for each recorded time.
    pub states: Vec<Values>,
    /// Weights applied at rounds `0..horizon`, when requested.
    pub weights: Option<Vec<RoundWeights>>,
    /// max_i ‖φ_i(t)‖ per round (resilient only, empty otherwise).
    pub max_residuals: Vec<f64>,
    pub t_f: TfObservation,
}

impl SimulationTrace {
    pub fn state_at(&self, t: usize) -> Option<&Values> {
        self.times.binary_search(&t).ok().map(|k| &self.states[k])
    }
}

/// splitmix64 of `master` offset by `index`; decorrelates realization seeds.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// x(0) uniform on the box, drawn from a stream independent of the trust streams.
pub fn initial_values(problem: &Problem, seed: u64) -> Values {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INITIAL_VALUE_STREAM);
    let eta = problem.domain().eta;
    let data = (0..problem.n_agents() * problem.dim())
        .map(|_| rng.random_range(-eta..=eta))
        .collect();
    Values::new(problem.dim(), data).expect("shape matches")
}

struct Recorder {
    record: Record,
    times: Vec<usize>,
    states: Vec<Values>,
}

impl Recorder {
    fn new(record: &Record, horizon: usize) -> Self {
        let record = match record {
            Record::All => Record::All,
            Record::Times(ts) => {
                let mut ts: Vec<usize> = ts.iter().copied().filter(|&t| t <= horizon).collect();
                ts.sort_unstable();
                ts.dedup();
                Record::Times(ts)
            }
        };
        Recorder {
            record,
            times: Vec::new(),
            states: Vec::new(),
        }
    }

    fn offer(&mut self, t: usize, x: &Values) {
        let keep = match &self.record {
            Record::All => true,
            Record::Times(ts) => ts.binary_search(&t).is_ok(),
        };
        if keep {
            self.times.push(t);
            self.states.push(x.clone());
        }
    }
}

/// Runs `horizon` synchronous rounds of `algorithm` and records the trace.
///
/// All algorithms draw x(0) and trust observations from the same seeded
/// streams, so runs with equal seeds face identical randomness.
pub fn run_simulation(
    config: &RunConfig,
    algorithm: Algorithm,
    seed: u64,
    options: &RunOptions,
) -> Result<SimulationTrace> {
    simulate(config, algorithm, seed, options).map_err(|source| Error::Run {
        seed,
        source: Box::new(source),
    })
}

fn simulate(
    config: &RunConfig,
    algorithm: Algorithm,
    seed: u64,
    options: &RunOptions,
) -> Result<SimulationTrace> {
    config.validate()?;
    let topology = &config.topology;
    let problem = &config.problem;
    let schedule = &config.schedule;
    let domain = problem.domain();
    let dim = problem.dim();
    let horizon = config.horizon;

    let mut x = initial_values(problem, seed);
    let mut recorder = Recorder::new(&options.record, horizon);
    recorder.offer(0, &x);
    let mut weights_log = options.record_weights.then(Vec::new);
    let mut max_residuals = Vec::new();

    let edges = topology.monitored_edges();
    let malicious_degree: Vec<usize> = edges
        .iter()
        .map(|&(_, j)| {
            if topology.is_malicious(j) {
                config.attack.degree.reported(topology, j)
            } else {
                0
            }
        })
        .collect();
    let mut inbox = Inbox {
        values: vec![0.0; edges.len() * dim],
        degrees: vec![0; edges.len()],
    };
    let strategy = &config.attack.strategy;
    let fill_malicious = |inbox: &mut Inbox, t: usize, first: bool| -> Result<()> {
        if !first && strategy.is_constant() {
            return Ok(());
        }
        for (e, &(i, j)) in edges.iter().enumerate() {
            if topology.is_malicious(j) {
                let v = strategy.input(t, j, i, &domain)?;
                inbox.values[e * dim..(e + 1) * dim].copy_from_slice(&v);
                inbox.degrees[e] = malicious_degree[e];
            }
        }
        Ok(())
    };
    let fill_legitimate =
        |inbox: &mut Inbox, x: &Values, snapshot: Option<&ClassificationSnapshot>| {
            for (e, &(_, j)) in edges.iter().enumerate() {
                if !topology.is_malicious(j) {
                    inbox.values[e * dim..(e + 1) * dim].copy_from_slice(x.agent(j));
                    inbox.degrees[e] = snapshot.map_or(0, |s| s.d[j]);
                }
            }
        };

    let t_f = match algorithm {
        Algorithm::Resilient => {
            let g = problem.regularity_constants().g;
            let mut streams = AlphaStreams::new(config.trust.with_seed(seed), topology);
            let mut state = TrustState::new(topology);
            let mut snapshot = ClassificationSnapshot::all_trusted(topology);
            let mut tracker = TfTracker::default();
            let mut alphas = Vec::with_capacity(edges.len());
            max_residuals.reserve(horizon);
            for t in 0..horizon {
                state.classify_into(topology, &mut snapshot);
                tracker.observe(t, snapshot.has_misclassification(topology));
                fill_malicious(&mut inbox, t, t == 0)?;
                fill_legitimate(&mut inbox, &x, Some(&snapshot));
                let out = resilient_round(
                    &x,
                    topology,
                    &snapshot,
                    &inbox,
                    problem,
                    schedule.at_round(t),
                    schedule.is_active(t),
                    t,
                    options.check_residuals.then_some(g),
                    options.record_weights,
                )?;
                x = out.next;
                max_residuals.push(out.max_residual);
                if let (Some(log), Some(w)) = (weights_log.as_mut(), out.weights) {
                    log.push(w);
                }
                streams.draw_round(&mut alphas);
                state.update_beta(&alphas)?;
                recorder.offer(t + 1, &x);
            }
            match tracker.finish(horizon) {
                Some(k) => TfObservation::Reached(k),
                None => TfObservation::NotReached,
            }
        }
        Algorithm::Nominal => {
            let w = nominal_weight_matrix(topology)?;
            for t in 0..horizon {
                if schedule.is_active(t) {
                    x = nominal_round(&x, &w, problem, schedule.at_round(t));
                }
                recorder.offer(t + 1, &x);
            }
            TfObservation::NotApplicable
        }
        Algorithm::Wmsr { f } => {
            for t in 0..horizon {
                fill_malicious(&mut inbox, t, t == 0)?;
                fill_legitimate(&mut inbox, &x, None);
                // The baseline has no observation window; it runs γ(t) from t = 0.
                x = wmsr_round(&x, topology, &inbox, problem, f, schedule.gamma(t as i64));
                recorder.offer(t + 1, &x);
            }
            TfObservation::NotApplicable
        }
    };

    Ok(SimulationTrace {
        algorithm,
        seed,
        config_hash: config.fingerprint(),
        horizon,
        times: recorder.times,
        states: recorder.states,
        weights: weights_log,
        max_residuals,
        t_f,
    })
}
