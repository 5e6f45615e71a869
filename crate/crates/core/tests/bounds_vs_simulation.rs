use std::path::PathBuf;

use resilient_opt::bounds::*;
use resilient_opt::dynamics::{
    mean_distance_to_average, run_simulation, Algorithm, RunOptions, StepSchedule,
};
use resilient_opt::harness::check::nominal_rate_excess;
use resilient_opt::harness::{
    compare_to_bounds, run_experiment, ExperimentConfig, DEFAULT_SLACK_SIGMAS,
};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn nominal_rate_holds_deterministically() {
    for cfg in [
        ExperimentConfig::consensus_preset(0).unwrap(),
        ExperimentConfig::regularized_preset(0).unwrap(),
    ] {
        for seed in [0, 1, 2] {
            let (excess, t) = nominal_rate_excess(&cfg, 2000, seed).unwrap();
            assert!(
                excess <= 0.0,
                "d={} seed {seed}: exceeds by {excess} at T={t}",
                cfg.run.problem.dim()
            );
        }
    }
}

#[test]
fn nominal_distance_to_average_envelope() {
    for cfg in [
        ExperimentConfig::consensus_preset(0).unwrap(),
        ExperimentConfig::regularized_preset(0).unwrap(),
    ] {
        let mut run = cfg.run.clone();
        run.schedule = StepSchedule::analysis(run.problem.regularity_constants().mu, 0).unwrap();
        run.horizon = 2000;
        let p = BoundParams::from_setup(&run.problem, &run.topology, &run.trust, 0, None).unwrap();
        let trace = run_simulation(&run, Algorithm::Nominal, 5, &RunOptions::default()).unwrap();
        for (t, x) in trace.states.iter().enumerate() {
            let g = nominal_distance_to_average_bound(t, &p);
            assert!(mean_distance_to_average(x) <= g, "t={t}");
        }
    }
}

#[test]
fn optimized_split_beats_each_instantiation() {
    let cfg = ExperimentConfig::consensus_preset(0).unwrap();
    for t0 in [0, 100] {
        let p = BoundParams::from_setup(
            &cfg.run.problem,
            &cfg.run.topology,
            &cfg.run.trust,
            t0,
            None,
        )
        .unwrap();
        for t in [t0 + 2, t0 + 50, 1000, 5000, 20_000] {
            let best = best_gap_bound_tf(t, &p).unwrap();
            assert!(best <= gap_bound_fixed_window(t, &p).unwrap());
            assert!(best <= gap_bound_midpoint(t, &p).unwrap());
            let m = (((t as f64).ln() / (2.0 * p.e_l.min(-p.e_m).powi(2))).ceil()) as usize;
            if (t0..t).contains(&m) {
                assert!(best <= expected_gap_bound_tf(t, m, &p).unwrap());
            }
        }
    }
}

#[test]
fn logarithmic_tail_is_not_an_instantiation() {
    // The (D_L + D_M)/t tail omits the 1/(1 − e^{−2E²}) factor of p_e, so the
    // logarithmic evaluator can undercut the optimized split.
    let cfg = ExperimentConfig::consensus_preset(0).unwrap();
    let p = BoundParams::from_setup(&cfg.run.problem, &cfg.run.topology, &cfg.run.trust, 0, None)
        .unwrap();
    let t = 10_000;
    let v = gap_bound_logarithmic(t, &p).unwrap().unwrap();
    assert!(v < best_gap_bound_tf(t, &p).unwrap());
}

#[test]
fn shipped_configs_stay_below_tightened_bound() {
    let mut seen = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_none_or(|e| e != "toml") {
            continue;
        }
        let mut cfg = ExperimentConfig::from_file(&path).unwrap();
        cfg.realizations = cfg.realizations.min(10);
        cfg.algorithms = vec![Algorithm::Resilient];
        let res = run_experiment(&cfg).unwrap();
        let stats = &res.get("resilient").unwrap().stats;
        let tight: Vec<_> = res
            .curves
            .iter()
            .filter(|c| c.name == BoundKind::Tightened.name())
            .cloned()
            .collect();
        let check = &compare_to_bounds(stats, &tight, DEFAULT_SLACK_SIGMAS)[0];
        assert!(
            check.checked > 0 && check.passed(),
            "{}: {check:?}",
            path.display()
        );
        seen += 1;
    }
    assert!(seen >= 5);
}
