//! Acceptance run. Prints one line per criterion and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use resilient_opt::bounds::contraction::perturbed_contraction_check;
use resilient_opt::dynamics::Algorithm;
use resilient_opt::harness::check::{
    bound_domination, contraction_cases, hoeffding_check, nominal_rate_excess, run_checks,
    CheckOptions,
};
use resilient_opt::harness::{
    run_experiment, summarize_residuals, ExperimentConfig, ResidualSummary, DEFAULT_SLACK_SIGMAS,
};
use resilient_opt::network::Topology;
use resilient_opt::problem::Problem;
use resilient_opt::trust::TrustModel;

type Outcome = Result<(bool, String), String>;

fn chain(e: resilient_opt::error::Error) -> String {
    let mut out = e.to_string();
    let mut src = std::error::Error::source(&e);
    while let Some(s) = src {
        out.push_str(&format!(": {s}"));
        src = s.source();
    }
    out
}

struct Line {
    id: u8,
    title: &'static str,
    passed: bool,
    detail: String,
    elapsed: Duration,
}

fn timed(
    id: u8,
    title: &'static str,
    limit: Option<Duration>,
    f: impl FnOnce() -> Outcome,
) -> Line {
    let start = Instant::now();
    let out = f();
    let elapsed = start.elapsed();
    let (mut passed, mut detail) = out.unwrap_or_else(|e| (false, format!("error: {e}")));
    if let Some(limit) = limit {
        if elapsed > limit {
            passed = false;
            detail.push_str(&format!("; over the {}s budget", limit.as_secs()));
        }
    }
    Line {
        id,
        title,
        passed,
        detail,
        elapsed,
    }
}

fn secs(s: u64) -> Option<Duration> {
    Some(Duration::from_secs(s))
}

fn optima() -> Outcome {
    let c = Problem::reference_consensus()
        .optimal_point()
        .map_err(chain)?;
    let r = Problem::reference_regularized()
        .optimal_point()
        .map_err(chain)?;
    let expected = [-50.0, -16.54, -21.19, -19.64, 50.0];
    let ok_c = (c[0] - 31.367).abs() <= 1e-3;
    let ok_r = r.iter().zip(expected).all(|(a, b)| (a - b).abs() <= 1e-2);
    Ok((
        ok_c && ok_r,
        format!(
            "consensus {:.4}, regularized {:?}",
            c[0],
            r.iter()
                .map(|v| (v * 100.0).round() / 100.0)
                .collect::<Vec<_>>()
        ),
    ))
}

fn nominal_rate() -> Outcome {
    let cfg = ExperimentConfig::consensus_preset(0).map_err(chain)?;
    let mut worst = (f64::NEG_INFINITY, 0);
    for seed in 0..5 {
        let w = nominal_rate_excess(&cfg, 2000, seed).map_err(chain)?;
        if w.0 > worst.0 {
            worst = w;
        }
    }
    Ok((
        worst.0 <= 0.0,
        format!(
            "5 seeds, T in [1, 2000], max(empirical - bound) = {:.3e} at T = {}",
            worst.0, worst.1
        ),
    ))
}

fn concentration() -> Outcome {
    let model = TrustModel::symmetric(0.05, 0.8, 2024).map_err(chain)?;
    let pts = hoeffding_check(&model, 10_000, &[10, 100, 1000]);
    let detail = pts
        .iter()
        .map(|p| {
            format!(
                "{}{}: {:.4} <= {:.4}",
                if p.malicious { "M" } else { "L" },
                p.t,
                p.p_hat,
                p.bound + p.slack
            )
        })
        .collect::<Vec<_>>()
        .join(", ");
    Ok((pts.iter().all(|p| p.passed()), detail))
}

/// Resilient final ratio and W-MSR final ratio for each window.
fn experiment(
    preset: fn(usize) -> resilient_opt::error::Result<ExperimentConfig>,
    residuals: &mut Vec<ResidualSummary>,
) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for t0 in [0, 100] {
        let mut cfg = preset(t0).map_err(chain)?;
        cfg.algorithms = vec![Algorithm::Resilient, Algorithm::Wmsr { f: 2 }];
        cfg.seed = 20_240 + t0 as u64;
        let res = run_experiment(&cfg).map_err(chain)?;
        let r = res.get("resilient").unwrap();
        let w = res.get("wmsr").unwrap();
        residuals.extend(r.residuals);
        let (rr, wr) = (r.stats.final_ratio(), w.stats.final_ratio());
        ok &= rr < 0.1 && wr > 0.5 && wr >= 5.0 * rr;
        parts.push(format!(
            "T0={t0}: resilient {rr:.4}, wmsr {wr:.4} ({:.0}x)",
            wr / rr
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn domination(
    residuals: &mut Vec<ResidualSummary>,
    distance_only: bool,
    cache: &mut Vec<(usize, resilient_opt::harness::check::Domination)>,
) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for t0 in [0, 100] {
        if !cache.iter().any(|(t, _)| *t == t0) {
            let mut cfg = ExperimentConfig::consensus_preset(t0).map_err(chain)?;
            cfg.seed = 7_000 + t0 as u64;
            let d = bound_domination(&cfg).map_err(chain)?;
            residuals.extend(d.result.get("resilient").and_then(|a| a.residuals));
            cache.push((t0, d));
        }
        let d = &cache.iter().find(|(t, _)| *t == t0).unwrap().1;
        if distance_only {
            ok &= d.distance.passed();
            parts.push(format!(
                "T0={t0}: {} times, {} violations",
                d.distance.checked,
                d.distance.violations.len()
            ));
        } else {
            for c in &d.gap {
                ok &= c.passed();
                parts.push(format!(
                    "T0={t0} {}: {}/{}",
                    c.curve,
                    c.checked - c.violations.len(),
                    c.checked
                ));
            }
        }
    }
    Ok((ok, parts.join(", ")))
}

fn contraction() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, case) in contraction_cases(&Topology::canonical(), 1000, 99).map_err(chain)? {
        let rep = perturbed_contraction_check(&case, DEFAULT_SLACK_SIGMAS).map_err(chain)?;
        ok &= rep.violations.is_empty();
        parts.push(format!(
            "{name} (rho={:.4}): {} violations over {} times",
            case.rho,
            rep.violations.len(),
            rep.points.len()
        ));
    }
    Ok((ok, parts.join("; ")))
}

fn structural() -> Outcome {
    let opts = CheckOptions {
        domination: false,
        ..CheckOptions::default()
    };
    let mut failed = Vec::new();
    let mut count = 0;
    for cfg in [
        ExperimentConfig::consensus_preset(100),
        ExperimentConfig::regularized_preset(0),
    ] {
        let rep = run_checks(&cfg.map_err(chain)?, &opts).map_err(chain)?;
        count += rep.items.len();
        failed.extend(rep.failures().map(|c| format!("{}: {}", c.name, c.detail)));
    }
    Ok((
        failed.is_empty(),
        if failed.is_empty() {
            format!("{count} checks green")
        } else {
            failed.join("; ")
        },
    ))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut residuals = Vec::new();
    let mut cache = Vec::new();
    let mut lines = vec![
        timed(1, "closed-form optima", secs(1), optima),
        timed(
            2,
            "deterministic malicious-free rate",
            secs(10),
            nominal_rate,
        ),
        timed(
            3,
            "trust misclassification concentration",
            secs(30),
            concentration,
        ),
        timed(5, "1-D experiment: resilient vs W-MSR", secs(300), || {
            experiment(ExperimentConfig::consensus_preset, &mut residuals)
        }),
        timed(6, "5-D experiment: resilient vs W-MSR", secs(600), || {
            experiment(ExperimentConfig::regularized_preset, &mut residuals)
        }),
        timed(
            7,
            "tightened and split-point bound domination",
            None,
            || domination(&mut residuals, false, &mut cache),
        ),
        timed(8, "distance-to-average domination", None, || {
            domination(&mut residuals, true, &mut cache)
        }),
        timed(9, "perturbed contraction harness", None, contraction),
        timed(10, "structural property suite", None, structural),
    ];
    lines.push(timed(4, "per-round residual bound", None, || {
        let s = summarize_residuals(&residuals).ok_or("no resilient rounds recorded")?;
        Ok((
            s.max_ratio <= 1.0 + 1e-9,
            format!(
                "{} rounds checked, max |phi|/(gamma G) = {:.6}",
                s.rounds_checked, s.max_ratio
            ),
        ))
    }));
    lines.sort_by_key(|l| l.id);

    println!(
        "acceptance ({} features)",
        if cfg!(feature = "parallel") {
            "parallel"
        } else {
            "sequential"
        }
    );
    for l in &lines {
        println!(
            "[{}] {:>2}. {:<42} {:>7.2}s  {}",
            if l.passed { "PASS" } else { "FAIL" },
            l.id,
            l.title,
            l.elapsed.as_secs_f64(),
            l.detail
        );
    }
    let failed = lines.iter().filter(|l| !l.passed).count();
    println!(
        "{} passed, {} failed, {:.1}s total",
        lines.len() - failed,
        failed,
        start.elapsed().as_secs_f64()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
