//! TOML experiment descriptions.
//!
//! ```toml
//! [topology]
//! graph = "canonical"      # or a path to an edge-list file
//! malicious = 15
//!
//! [trust]
//! e_legitimate = 0.05
//! e_malicious = -0.05
//! spread = 0.8
//!
//! [problem]
//! preset = "consensus"     # "consensus", "regularized", or `file = "..."`
//!
//! [schedule]
//! kind = "experimental"    # or "analysis"
//! t0 = 100
//!
//! [attack]
//! value = [-50.0]
//! degree = "honest"        # "one" or an integer
//!
//! [run]
//! horizon = 10000
//! realizations = 100
//! algorithms = ["resilient", "wmsr"]
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::dynamics::{
    Algorithm, Attack, DegreeReport, MaliciousStrategy, RunConfig, StepKind, StepSchedule,
};
use crate::error::{Error, Result};
use crate::network::Topology;
use crate::par::Execution;
use crate::problem::Problem;
use crate::trust::TrustModel;

pub const DEFAULT_REALIZATIONS: usize = 100;
pub const DEFAULT_SAMPLE_POINTS: usize = 40;
pub const DEFAULT_WMSR_F: usize = 2;

/// Which point the error metrics measure distance to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reference {
    /// Exact minimizer over the box.
    #[default]
    Exact,
    /// Coordinate-wise clip of the unconstrained minimizer.
    Clipped,
}

impl Reference {
    pub fn point(&self, problem: &Problem) -> Result<Vec<f64>> {
        match self {
            Reference::Exact => problem.constrained_optimum(),
            Reference::Clipped => problem.optimal_point(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub run: RunConfig,
    pub realizations: usize,
    /// Ascending, deduplicated, within `0..=horizon`, starting at 0.
    pub sample_times: Vec<usize>,
    pub algorithms: Vec<Algorithm>,
    pub reference: Reference,
    pub seed: u64,
    pub output_dir: Option<PathBuf>,
    pub execution: Execution,
}

impl ExperimentConfig {
    /// Defaults around a run: all three algorithms, log grid, exact reference.
    pub fn new(run: RunConfig) -> Self {
        let sample_times =
            default_sample_grid(run.horizon, run.schedule.t0(), DEFAULT_SAMPLE_POINTS);
        ExperimentConfig {
            run,
            realizations: DEFAULT_REALIZATIONS,
            sample_times,
            algorithms: vec![
                Algorithm::Resilient,
                Algorithm::Nominal,
                Algorithm::Wmsr { f: DEFAULT_WMSR_F },
            ],
            reference: Reference::Exact,
            seed: 0,
            output_dir: None,
            execution: Execution::default(),
        }
    }

    /// One-dimensional consensus on the canonical graph, every legitimate
    /// agent attached to all 15 malicious agents sending −η.
    pub fn consensus_preset(t0: usize) -> Result<Self> {
        let problem = Problem::reference_consensus();
        let eta = problem.domain().eta;
        Ok(Self::new(RunConfig {
            topology: Topology::canonical().with_malicious_attached(15),
            trust: TrustModel::symmetric(0.05, 0.8, 0)?,
            problem,
            schedule: StepSchedule::experimental(t0),
            attack: Attack::constant(vec![-eta]),
            horizon: 10_000,
        }))
    }

    /// Five-dimensional regularized least squares with 30 malicious agents
    /// sending the corner (η, η, η, η, −η).
    pub fn regularized_preset(t0: usize) -> Result<Self> {
        let problem = Problem::reference_regularized();
        let eta = problem.domain().eta;
        Ok(Self::new(RunConfig {
            topology: Topology::canonical().with_malicious_attached(30),
            trust: TrustModel::symmetric(0.05, 0.6, 0)?,
            problem,
            schedule: StepSchedule::experimental(t0),
            attack: Attack::constant(vec![eta, eta, eta, eta, -eta]),
            horizon: 10_000,
        }))
    }

    pub fn validate(&self) -> Result<()> {
        self.run.validate()?;
        if self.realizations == 0 {
            return Err(Error::Config("realizations must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(Error::Config("no algorithms selected".into()));
        }
        if let Some(&t) = self.sample_times.iter().find(|&&t| t > self.run.horizon) {
            return Err(Error::Config(format!(
                "sample time {t} exceeds horizon {}",
                self.run.horizon
            )));
        }
        if self.sample_times.first() != Some(&0) {
            return Err(Error::Config("sample times must include 0".into()));
        }
        if self.sample_times.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(
                "sample times must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_toml(&text, base)
    }

    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.build(base_dir)
    }
}

/// `{0, T0, T0+1, horizon}` plus `points` log-spaced times in `[1, horizon]`.
pub fn default_sample_grid(horizon: usize, t0: usize, points: usize) -> Vec<usize> {
    let mut grid = vec![0, horizon];
    if t0 <= horizon {
        grid.push(t0);
    }
    if t0 < horizon {
        grid.push(t0 + 1);
    }
    if horizon >= 1 && points >= 2 {
        let top = (horizon as f64).ln();
        for k in 0..points {
            let t = (top * k as f64 / (points - 1) as f64).exp().round() as usize;
            grid.push(t.clamp(1, horizon));
        }
    }
    grid.sort_unstable();
    grid.dedup();
    grid
}

pub fn parse_algorithm(name: &str, wmsr_f: usize) -> Result<Algorithm> {
    match name.trim() {
        "resilient" => Ok(Algorithm::Resilient),
        "nominal" => Ok(Algorithm::Nominal),
        "wmsr" => Ok(Algorithm::Wmsr { f: wmsr_f }),
        other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    topology: TopologySection,
    trust: TrustSection,
    problem: ProblemSection,
    #[serde(default)]
    schedule: ScheduleSection,
    attack: AttackSection,
    run: RunSection,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TopologySection {
    graph: String,
    /// Attach this many malicious agents to every legitimate agent.
    #[serde(default)]
    malicious: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrustSection {
    e_legitimate: f64,
    e_malicious: f64,
    spread: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProblemSection {
    preset: Option<String>,
    file: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ScheduleKindSpec {
    #[default]
    Experimental,
    Analysis,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleSection {
    #[serde(default)]
    kind: ScheduleKindSpec,
    #[serde(default)]
    t0: usize,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum DegreeSpec {
    Named(String),
    Fixed(usize),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SquareWave {
    high: Vec<f64>,
    low: Vec<f64>,
    half_period: usize,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct AttackSection {
    value: Option<Vec<f64>>,
    square_wave: Option<SquareWave>,
    degree: Option<DegreeSpec>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    horizon: usize,
    realizations: Option<usize>,
    algorithms: Option<Vec<String>>,
    wmsr_f: Option<usize>,
    sample_times: Option<Vec<usize>>,
    sample_points: Option<usize>,
    #[serde(default)]
    reference: Reference,
    seed: Option<u64>,
    out: Option<PathBuf>,
    #[serde(default)]
    sequential: bool,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl ConfigFile {
    fn build(self, base: &Path) -> Result<ExperimentConfig> {
        let graph = match self.topology.graph.as_str() {
            "canonical" => Topology::canonical(),
            path => Topology::from_file(resolve(base, Path::new(path)))?,
        };
        let topology = if self.topology.malicious > 0 {
            graph.with_malicious_attached(self.topology.malicious)
        } else {
            graph
        };

        let trust = TrustModel::new(
            self.trust.e_legitimate,
            self.trust.e_malicious,
            self.trust.spread,
            0,
        )?;

        let problem = match (self.problem.preset.as_deref(), &self.problem.file) {
            (Some("consensus"), None) => Problem::reference_consensus(),
            (Some("regularized"), None) => Problem::reference_regularized(),
            (None, Some(f)) => Problem::from_file(resolve(base, f))?,
            (Some(other), None) => {
                return Err(Error::Config(format!("unknown problem preset {other:?}")))
            }
            _ => {
                return Err(Error::Config(
                    "problem needs exactly one of `preset` or `file`".into(),
                ))
            }
        };

        let t0 = self.schedule.t0;
        let schedule = match self.schedule.kind {
            ScheduleKindSpec::Experimental => StepSchedule::experimental(t0),
            ScheduleKindSpec::Analysis => StepSchedule::new(
                StepKind::Analysis {
                    mu: problem.regularity_constants().mu,
                },
                t0,
            )?,
        };

        let strategy = match (self.attack.value, self.attack.square_wave) {
            (Some(v), None) => MaliciousStrategy::Constant(v),
            (None, Some(w)) => MaliciousStrategy::square_wave(w.high, w.low, w.half_period),
            _ => {
                return Err(Error::Config(
                    "attack needs exactly one of `value` or `square_wave`".into(),
                ))
            }
        };
        let degree = match self.attack.degree {
            None => DegreeReport::Honest,
            Some(DegreeSpec::Named(s)) if s == "honest" => DegreeReport::Honest,
            Some(DegreeSpec::Named(s)) if s == "one" => DegreeReport::One,
            Some(DegreeSpec::Named(s)) => {
                return Err(Error::Config(format!("unknown degree report {s:?}")))
            }
            Some(DegreeSpec::Fixed(d)) => DegreeReport::Fixed(d),
        };

        let r = self.run;
        let run = RunConfig {
            topology,
            trust,
            problem,
            schedule,
            attack: Attack { strategy, degree },
            horizon: r.horizon,
        };
        let mut cfg = ExperimentConfig::new(run);
        if let Some(n) = r.realizations {
            cfg.realizations = n;
        }
        let f = r.wmsr_f.unwrap_or(DEFAULT_WMSR_F);
        cfg.algorithms = match r.algorithms {
            Some(names) => names
                .iter()
                .map(|n| parse_algorithm(n, f))
                .collect::<Result<_>>()?,
            None => vec![
                Algorithm::Resilient,
                Algorithm::Nominal,
                Algorithm::Wmsr { f },
            ],
        };
        cfg.sample_times = match (r.sample_times, r.sample_points) {
            (Some(mut ts), _) => {
                ts.sort_unstable();
                ts.dedup();
                ts
            }
            (None, points) => {
                default_sample_grid(r.horizon, t0, points.unwrap_or(DEFAULT_SAMPLE_POINTS))
            }
        };
        cfg.reference = r.reference;
        cfg.seed = r.seed.unwrap_or(0);
        cfg.output_dir = r.out.map(|p| resolve(base, &p));
        if r.sequential {
            cfg.execution = Execution::Sequential;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = r#"
[topology]
graph = "canonical"
malicious = 15

[trust]
e_legitimate = 0.05
e_malicious = -0.05
spread = 0.8

[problem]
preset = "consensus"

[schedule]
kind = "analysis"
t0 = 100

[attack]
value = [-50.0]
degree = "one"

[run]
horizon = 500
realizations = 3
algorithms = ["resilient", "wmsr"]
wmsr_f = 3
sample_points = 5
"#;

    #[test]
    fn parses_example() {
        let cfg = ExperimentConfig::from_toml(EXAMPLE, Path::new(".")).unwrap();
        assert_eq!(cfg.run.topology.n_malicious(), 15);
        assert_eq!(cfg.run.schedule.t0(), 100);
        assert_eq!(cfg.run.schedule.kind(), &StepKind::Analysis { mu: 1.0 });
        assert_eq!(cfg.run.attack.degree, DegreeReport::One);
        assert_eq!(
            cfg.algorithms,
            vec![Algorithm::Resilient, Algorithm::Wmsr { f: 3 }]
        );
        assert_eq!(cfg.realizations, 3);
        assert!(
            cfg.sample_times.contains(&0)
                && cfg.sample_times.contains(&100)
                && cfg.sample_times.contains(&101)
        );
        assert_eq!(*cfg.sample_times.last().unwrap(), 500);
    }

    #[test]
    fn rejects_unknown_fields_and_bad_grids() {
        let extra = EXAMPLE.replace("horizon = 500", "horizon = 500\nbogus = 1");
        assert!(matches!(
            ExperimentConfig::from_toml(&extra, Path::new(".")),
            Err(Error::Config(_))
        ));
        let late = EXAMPLE.replace("sample_points = 5", "sample_times = [0, 900]");
        assert!(matches!(
            ExperimentConfig::from_toml(&late, Path::new(".")),
            Err(Error::Config(_))
        ));
        let no_origin = EXAMPLE.replace("sample_points = 5", "sample_times = [5, 9]");
        assert!(matches!(
            ExperimentConfig::from_toml(&no_origin, Path::new(".")),
            Err(Error::Config(_))
        ));
        let none = EXAMPLE.replace("realizations = 3", "realizations = 0");
        assert!(ExperimentConfig::from_toml(&none, Path::new(".")).is_err());
    }

    #[test]
    fn grid_has_transition_points() {
        let g = default_sample_grid(10_000, 100, 40);
        for t in [0, 1, 100, 101, 10_000] {
            assert!(g.contains(&t), "{t}");
        }
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(default_sample_grid(0, 0, 10), vec![0]);
    }

    #[test]
    fn presets_validate() {
        ExperimentConfig::consensus_preset(100)
            .unwrap()
            .validate()
            .unwrap();
        let r = ExperimentConfig::regularized_preset(0).unwrap();
        r.validate().unwrap();
        assert_eq!(r.run.problem.dim(), 5);
    }
}
