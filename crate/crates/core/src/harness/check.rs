//! The invariant and domination suite behind the `check` command.
//!
//! Each check returns a [`CheckItem`]; hard errors (bad configs, I/O) are
//! reserved for `Err`. A failed check is a result, not an error.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bounds::contraction::{perturbed_contraction_check, ContractionCase};
use crate::bounds::{nominal_rate_bound, BoundKind, BoundParams};
use crate::dynamics::{run_simulation, Algorithm, Record, RunOptions, StepSchedule};
use crate::error::Result;
use crate::network::{nominal_weight_matrix, Topology};
use crate::problem::Problem;
use crate::trust::{AlphaSampler, TrustModel};
use crate::vecops::dist;

use super::config::ExperimentConfig;
use super::experiment::{run_experiment, ExperimentResult};
use super::export::{experiment_rows, render_experiment_csv};
use super::metrics::state_error;
use super::report::{
    compare_distance_to_average, compare_to_bounds, CurveCheck, DEFAULT_SLACK_SIGMAS,
};

const TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckItem {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckItem {
    fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        CheckItem {
            name: name.to_string(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct CheckReport {
    pub items: Vec<CheckItem>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.items.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.items.iter().filter(|c| !c.passed)
    }
}

#[derive(Debug, Clone)]
pub struct CheckOptions {
    /// Rounds of the short runs used for structural checks.
    pub structural_horizon: usize,
    /// Rounds of the deterministic malicious-free rate check.
    pub nominal_horizon: usize,
    pub projection_pairs: usize,
    pub hoeffding_histories: usize,
    pub contraction_trials: usize,
    /// Also run the Monte Carlo domination experiment (the expensive part).
    pub domination: bool,
    pub seed: u64,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            structural_horizon: 300,
            nominal_horizon: 2000,
            projection_pairs: 10_000,
            hoeffding_histories: 10_000,
            contraction_trials: 1000,
            domination: true,
            seed: 0,
        }
    }
}

/// Every check in order. Only the configuration's own malicious setup and
/// problem are exercised.
pub fn run_checks(config: &ExperimentConfig, opts: &CheckOptions) -> Result<CheckReport> {
    config.validate()?;
    let run = &config.run;
    let mut items = vec![
        check_nominal_matrix(&run.topology)?,
        check_round_weights(config, opts.structural_horizon, opts.seed)?,
        check_freeze_before_window(config, opts.seed)?,
        check_feasibility(config, opts.structural_horizon, opts.seed)?,
        check_projection(&run.problem, opts.projection_pairs, opts.seed),
        check_gradients(&run.problem, 200, opts.seed),
        check_replay(config, opts.seed)?,
        check_nominal_rate(config, opts.nominal_horizon, opts.seed)?,
    ];
    let points = hoeffding_check(
        &run.trust.with_seed(opts.seed),
        opts.hoeffding_histories,
        &[10, 100, 1000],
    );
    let worst = points
        .iter()
        .map(|p| p.p_hat - p.bound - p.slack)
        .fold(f64::NEG_INFINITY, f64::max);
    items.push(CheckItem::new(
        "misclassification_concentration",
        points.iter().all(HoeffdingPoint::passed),
        format!("{} points, worst excess {worst:.3e}", points.len()),
    ));
    for (name, case) in contraction_cases(&run.topology, opts.contraction_trials, opts.seed)? {
        let rep = perturbed_contraction_check(&case, DEFAULT_SLACK_SIGMAS)?;
        items.push(CheckItem::new(
            &format!("perturbed_contraction_{name}"),
            rep.violations.is_empty(),
            format!(
                "{} times, {} violations",
                rep.points.len(),
                rep.violations.len()
            ),
        ));
    }
    if opts.domination {
        let dom = bound_domination(config)?;
        items.extend(dom.items());
    }
    Ok(CheckReport { items })
}

pub fn check_nominal_matrix(topology: &Topology) -> Result<CheckItem> {
    let w = nominal_weight_matrix(topology)?;
    let m = &w.matrix;
    let n = m.nrows();
    let mut problems = Vec::new();
    if (m - m.transpose()).abs().max() > TOL {
        problems.push("not symmetric".to_string());
    }
    for i in 0..n {
        if (m.row(i).sum() - 1.0).abs() > TOL || (m.column(i).sum() - 1.0).abs() > TOL {
            problems.push(format!("row/column {i} does not sum to 1"));
        }
        if m[(i, i)] < 0.5 - TOL {
            problems.push(format!("diagonal {i} below 1/2"));
        }
    }
    if m.iter().any(|&v| v < 0.0) {
        problems.push("negative entry".into());
    }
    if !(w.rho_l > 0.0 && w.rho_l < 1.0) {
        problems.push(format!("rho_L = {} outside (0, 1)", w.rho_l));
    }
    Ok(CheckItem::new(
        "nominal_weights",
        problems.is_empty(),
        if problems.is_empty() {
            format!("rho_L = {:.12}", w.rho_l)
        } else {
            problems.join("; ")
        },
    ))
}

/// Applied weights of a resilient run: nonnegative rows summing to 1 with w_ii ≥ 1/2.
pub fn check_round_weights(
    config: &ExperimentConfig,
    horizon: usize,
    seed: u64,
) -> Result<CheckItem> {
    let mut run = config.run.clone();
    run.horizon = horizon.min(run.horizon).max(1);
    let opts = RunOptions {
        record: Record::Times(vec![]),
        record_weights: true,
        check_residuals: true,
    };
    let trace = run_simulation(&run, Algorithm::Resilient, seed, &opts)?;
    let topo = &run.topology;
    let mut bad = None;
    'rounds: for (t, w) in trace.weights.iter().flatten().enumerate() {
        for i in 0..topo.n_legitimate() {
            let row = &w.edge_weights[topo.edge_offset(i)..topo.edge_offset(i + 1)];
            let sum = w.self_weights[i] + row.iter().sum::<f64>();
            if (sum - 1.0).abs() > TOL
                || w.self_weights[i] < 0.5 - TOL
                || row.iter().any(|&v| v < 0.0)
            {
                bad = Some((t, i));
                break 'rounds;
            }
        }
    }
    Ok(CheckItem::new(
        "round_weights",
        bad.is_none(),
        match bad {
            None => format!("{} rounds", run.horizon),
            Some((t, i)) => format!("agent {i} at round {t}"),
        },
    ))
}

/// Before T0 the resilient and malicious-free dynamics leave x(0) untouched.
/// A window of at least 5 rounds is imposed when the configuration has none.
pub fn check_freeze_before_window(config: &ExperimentConfig, seed: u64) -> Result<CheckItem> {
    let mut run = config.run.clone();
    let t0 = run.schedule.t0().max(5);
    run.schedule = StepSchedule::new(run.schedule.kind().clone(), t0)?;
    run.horizon = t0 + 2;
    let opts = RunOptions {
        record: Record::All,
        ..Default::default()
    };
    let mut frozen = true;
    let mut moved_after = true;
    for alg in [Algorithm::Resilient, Algorithm::Nominal] {
        let trace = run_simulation(&run, alg, seed, &opts)?;
        frozen &= trace.states[..=t0].iter().all(|s| *s == trace.states[0]);
        moved_after &= trace.states[t0 + 1] != trace.states[0];
    }
    Ok(CheckItem::new(
        "freeze_before_window",
        frozen && moved_after,
        format!("T0 = {t0}, frozen {frozen}, moves after {moved_after}"),
    ))
}

/// Every recorded state of every algorithm lies in the constraint set.
pub fn check_feasibility(
    config: &ExperimentConfig,
    horizon: usize,
    seed: u64,
) -> Result<CheckItem> {
    let mut run = config.run.clone();
    run.horizon = horizon.min(run.horizon).max(1);
    let domain = run.problem.domain();
    let mut states = 0;
    let mut outside = 0;
    for alg in [
        Algorithm::Resilient,
        Algorithm::Nominal,
        Algorithm::Wmsr { f: 2 },
    ] {
        let trace = run_simulation(&run, alg, seed, &RunOptions::default())?;
        for s in &trace.states {
            states += 1;
            if !s.rows().all(|x| domain.contains(x)) {
                outside += 1;
            }
        }
    }
    Ok(CheckItem::new(
        "feasibility",
        outside == 0,
        format!("{states} states, {outside} outside"),
    ))
}

/// ‖Π(x) − Π(y)‖ ≤ ‖x − y‖ on random pairs spread well beyond the box.
pub fn check_projection(problem: &Problem, pairs: usize, seed: u64) -> CheckItem {
    let domain = problem.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = 3.0 * domain.eta;
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let x: Vec<f64> = (0..domain.dim).map(|_| rng.random_range(-r..r)).collect();
        let y: Vec<f64> = (0..domain.dim).map(|_| rng.random_range(-r..r)).collect();
        let d = dist(&x, &y);
        worst = worst.max(dist(&domain.project(&x), &domain.project(&y)) - d);
    }
    CheckItem::new(
        "projection_nonexpansive",
        worst <= TOL,
        format!("{pairs} pairs, worst excess {worst:.3e}"),
    )
}

/// Central differences of each local objective against its gradient, relative 1e-5.
pub fn check_gradients(problem: &Problem, points: usize, seed: u64) -> CheckItem {
    let domain = problem.domain();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let mut worst = 0.0f64;
    for _ in 0..points {
        let x: Vec<f64> = (0..domain.dim)
            .map(|_| rng.random_range(-domain.eta..domain.eta))
            .collect();
        for f in problem.objectives() {
            let g = f.gradient(&x).expect("dimension matches");
            let h = 1e-4 * (1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs())));
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
            for k in 0..x.len() {
                let (mut xp, mut xm) = (x.clone(), x.clone());
                xp[k] += h;
                xm[k] -= h;
                let fd = (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * h);
                worst = worst.max((fd - g[k]).abs() / scale);
            }
        }
    }
    CheckItem::new(
        "gradient_finite_differences",
        worst <= 1e-5,
        format!("worst relative error {worst:.3e}"),
    )
}

/// Two executions of a reduced experiment render byte-identical CSV.
pub fn check_replay(config: &ExperimentConfig, seed: u64) -> Result<CheckItem> {
    let mut cfg = config.clone();
    cfg.run.horizon = cfg.run.horizon.min(500);
    cfg.sample_times.retain(|&t| t <= cfg.run.horizon);
    if cfg.sample_times.last() != Some(&cfg.run.horizon) {
        cfg.sample_times.push(cfg.run.horizon);
    }
    cfg.realizations = cfg.realizations.min(4);
    cfg.seed = seed;
    let a = render_experiment_csv(&experiment_rows(&run_experiment(&cfg)?))?;
    let b = render_experiment_csv(&experiment_rows(&run_experiment(&cfg)?))?;
    Ok(CheckItem::new(
        "replay_determinism",
        a == b,
        format!("{} bytes", a.len()),
    ))
}

/// Malicious-free dynamic under the stepsize the rate assumes: the mean
/// squared distance to the optimum stays below the rate at every round.
pub fn check_nominal_rate(
    config: &ExperimentConfig,
    horizon: usize,
    seed: u64,
) -> Result<CheckItem> {
    let worst = nominal_rate_excess(config, horizon, seed)?;
    Ok(CheckItem::new(
        "nominal_rate_domination",
        worst.0 <= 0.0,
        format!(
            "T in [1, {horizon}], max(empirical - bound) = {:.3e} at T = {}",
            worst.0, worst.1
        ),
    ))
}

/// `max_T (empirical − bound)` and its argmax for the malicious-free dynamic
/// with γ(t) = 2/(μ(t+2)) from t = 0.
pub fn nominal_rate_excess(
    config: &ExperimentConfig,
    horizon: usize,
    seed: u64,
) -> Result<(f64, usize)> {
    let mut run = config.run.clone();
    let mu = run.problem.regularity_constants().mu;
    run.schedule = StepSchedule::analysis(mu, 0)?;
    run.horizon = horizon;
    let params = BoundParams::from_setup(&run.problem, &run.topology, &run.trust, 0, None)?;
    let x_star = run.problem.constrained_optimum()?;
    let trace = run_simulation(&run, Algorithm::Nominal, seed, &RunOptions::default())?;
    let mut worst = (f64::NEG_INFINITY, 0);
    for t in 1..=horizon {
        let (_, sq) = state_error(&trace.states[t], &x_star)?;
        let excess = sq - nominal_rate_bound(t, &params)?;
        if excess > worst.0 {
            worst = (excess, t);
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoeffdingPoint {
    pub t: usize,
    pub malicious: bool,
    /// Fraction of histories misclassified at `t`.
    pub p_hat: f64,
    /// e^{−2tE²}.
    pub bound: f64,
    /// 3√(p̂(1−p̂)/n).
    pub slack: f64,
}

impl HoeffdingPoint {
    pub fn passed(&self) -> bool {
        self.p_hat <= self.bound + self.slack
    }
}

/// Empirical misclassification frequency of independent single-edge
/// histories: β(t) < 0 for legitimate targets, β(t) ≥ 0 for malicious ones.
pub fn hoeffding_check(
    model: &TrustModel,
    histories: usize,
    times: &[usize],
) -> Vec<HoeffdingPoint> {
    let horizon = times.iter().copied().max().unwrap_or(0);
    let mut out = Vec::new();
    for malicious in [false, true] {
        let mut hits = vec![0usize; times.len()];
        for h in 0..histories {
            // Disjoint stream ids for the two populations.
            let mut rng = model.edge_stream(2 * h + malicious as usize);
            let mut beta = 0.0;
            for t in 1..=horizon {
                beta += model.alpha(rng.random::<f64>(), malicious) - 0.5;
                if let Some(k) = times.iter().position(|&s| s == t) {
                    if (!malicious && beta < 0.0) || (malicious && beta >= 0.0) {
                        hits[k] += 1;
                    }
                }
            }
        }
        let e = if malicious {
            model.e_malicious()
        } else {
            model.e_legitimate()
        };
        for (k, &t) in times.iter().enumerate() {
            let p_hat = hits[k] as f64 / histories as f64;
            out.push(HoeffdingPoint {
                t,
                malicious,
                p_hat,
                bound: (-2.0 * t as f64 * e * e).exp(),
                slack: 3.0 * (p_hat * (1.0 - p_hat) / histories as f64).sqrt(),
            });
        }
    }
    out
}

/// Three mixing matrices (ρ = 0, ρ = 1/2 and the nominal weights of
/// `topology`) with perturbations of size δ(t) = G₀/(t+2).
pub fn contraction_cases(
    topology: &Topology,
    trials: usize,
    seed: u64,
) -> Result<Vec<(&'static str, ContractionCase)>> {
    let nominal = nominal_weight_matrix(topology)?;
    let n = nominal.size();
    let complete = DMatrix::from_element(n, n, 1.0 / n as f64);
    let lazy = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
    let case =
        |weights: DMatrix<f64>, rho: f64, dim: usize, horizon: usize, s: u64| ContractionCase {
            weights,
            rho,
            eta: 50.0,
            dim,
            delta: Box::new(|t| 20.0 / (t as f64 + 2.0)),
            horizon,
            trials,
            seed: seed.wrapping_add(s),
        };
    Ok(vec![
        ("rho_zero", case(complete, 0.0, 1, 100, 1)),
        ("rho_half", case(lazy, 0.5, 2, 100, 2)),
        (
            "nominal",
            case(nominal.matrix.clone(), nominal.rho_l, 1, 300, 3),
        ),
    ])
}

/// Results of the Monte Carlo domination experiment.
#[derive(Debug, Clone)]
pub struct Domination {
    pub result: ExperimentResult,
    pub gap: Vec<CurveCheck>,
    pub distance: CurveCheck,
}

impl Domination {
    pub fn passed(&self) -> bool {
        self.gap.iter().all(CurveCheck::passed) && self.distance.passed()
    }

    fn items(&self) -> Vec<CheckItem> {
        let mut items: Vec<CheckItem> = self
            .gap
            .iter()
            .map(|c| {
                CheckItem::new(
                    &format!("domination_{}", c.curve),
                    c.passed(),
                    format!("{} times, {} violations", c.checked, c.violations.len()),
                )
            })
            .collect();
        let d = &self.distance;
        items.push(CheckItem::new(
            "domination_delta_m",
            d.passed(),
            format!("{} times, {} violations", d.checked, d.violations.len()),
        ));
        if let Some(r) = self.result.get("resilient").and_then(|a| a.residuals) {
            items.push(CheckItem::new(
                "residual_bound",
                r.max_ratio <= 1.0 + 1e-9,
                format!("{} rounds, max ratio {:.6}", r.rounds_checked, r.max_ratio),
            ));
        }
        items
    }
}

/// The resilient algorithm under γ(t) = 2/(μ(t − T0 + 2)), the schedule the
/// bounds assume; mean squared error against every gap bound at sampled
/// T ≥ T0 + 1 and mean distance to average against δ_M at t ≥ T0.
pub fn bound_domination(config: &ExperimentConfig) -> Result<Domination> {
    let mut cfg = config.clone();
    let mu = cfg.run.problem.regularity_constants().mu;
    cfg.run.schedule = StepSchedule::analysis(mu, cfg.run.schedule.t0())?;
    cfg.algorithms = vec![Algorithm::Resilient];
    let result = run_experiment(&cfg)?;
    let stats = &result.get("resilient").expect("resilient was run").stats;
    // The malicious-free rate does not apply under attack.
    let attacked: Vec<_> = result
        .curves
        .iter()
        .filter(|c| c.name != BoundKind::Nominal.name())
        .cloned()
        .collect();
    let gap = compare_to_bounds(stats, &attacked, DEFAULT_SLACK_SIGMAS);
    let distance = compare_distance_to_average(stats, &result.delta_m, DEFAULT_SLACK_SIGMAS);
    Ok(Domination {
        result,
        gap,
        distance,
    })
}
