//! What malicious agents send.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::network::Topology;
use crate::problem::BoxConstraint;

type Callback = Arc<dyn Fn(usize, usize, usize) -> Vec<f64> + Send + Sync>;

/// Values sent by malicious agents. Edges are keyed `(malicious sender, legitimate receiver)`.
#[derive(Clone)]
pub enum MaliciousStrategy {
    /// Same vector to everyone at every round.
    Constant(Vec<f64>),
    /// Byzantine: a value per edge, `default` for edges missing from the table.
    PerEdge {
        table: HashMap<(usize, usize), Vec<f64>>,
        default: Vec<f64>,
    },
    /// `f(t, sender, receiver)`.
    TimeVarying(Callback),
}

impl MaliciousStrategy {
    pub fn time_varying(
        f: impl Fn(usize, usize, usize) -> Vec<f64> + Send + Sync + 'static,
    ) -> Self {
        MaliciousStrategy::TimeVarying(Arc::new(f))
    }

    /// Alternates between `high` and `low` every `half_period` rounds.
    pub fn square_wave(high: Vec<f64>, low: Vec<f64>, half_period: usize) -> Self {
        let half_period = half_period.max(1);
        Self::time_varying(move |t, _, _| {
            if (t / half_period).is_multiple_of(2) {
                high.clone()
            } else {
                low.clone()
            }
        })
    }

    /// The value `sender` passes to `receiver` at round `t`; rejects values outside `domain`.
    pub fn input(
        &self,
        t: usize,
        sender: usize,
        receiver: usize,
        domain: &BoxConstraint,
    ) -> Result<Vec<f64>> {
        let value = match self {
            MaliciousStrategy::Constant(v) => v.clone(),
            MaliciousStrategy::PerEdge { table, default } => {
                table.get(&(sender, receiver)).unwrap_or(default).clone()
            }
            MaliciousStrategy::TimeVarying(f) => f(t, sender, receiver),
        };
        if value.len() != domain.dim {
            return Err(Error::Dimension {
                expected: domain.dim,
                got: value.len(),
            });
        }
        if !domain.contains(&value) {
            return Err(Error::StrategyOutsideSet {
                t,
                from: sender,
                to: receiver,
            });
        }
        Ok(value)
    }

    /// Whether the output depends on neither time nor edge.
    pub fn is_constant(&self) -> bool {
        matches!(self, MaliciousStrategy::Constant(_))
    }
}

impl fmt::Debug for MaliciousStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MaliciousStrategy::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            MaliciousStrategy::PerEdge { table, default } => {
                let mut entries: Vec<_> = table.iter().collect();
                entries.sort_by_key(|(k, _)| **k);
                f.debug_struct("PerEdge")
                    .field("table", &entries)
                    .field("default", default)
                    .finish()
            }
            MaliciousStrategy::TimeVarying(_) => f.write_str("TimeVarying(..)"),
        }
    }
}

/// The `d_j(t)` a malicious agent announces alongside its value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegreeReport {
    /// `|N_j| + 1`, what an all-trusting honest agent would send.
    #[default]
    Honest,
    /// Always 1, which maximizes the weight legitimate neighbors assign.
    One,
    Fixed(usize),
}

impl DegreeReport {
    pub fn reported(&self, topology: &Topology, agent: usize) -> usize {
        match *self {
            DegreeReport::Honest => topology.neighbors(agent).len() + 1,
            DegreeReport::One => 1,
            DegreeReport::Fixed(d) => d.max(1),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Attack {
    pub strategy: MaliciousStrategy,
    pub degree: DegreeReport,
}

impl Attack {
    pub fn constant(value: Vec<f64>) -> Self {
        Attack {
            strategy: MaliciousStrategy::Constant(value),
            degree: DegreeReport::Honest,
        }
    }
}
