//! Diminishing stepsizes with an observation window.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum StepKind {
    /// γ(k) = 2/(μ(k+2)), the schedule the convergence bounds assume.
    Analysis { mu: f64 },
    /// γ(k) = 1/(k+2).
    Experimental,
    /// γ(k) = seq[k], holding the last entry afterwards.
    Custom(Vec<f64>),
}

/// A stepsize sequence shifted by the observation window `t0`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepSchedule {
    kind: StepKind,
    t0: usize,
}

impl StepSchedule {
    pub fn new(kind: StepKind, t0: usize) -> Result<Self> {
        match &kind {
            StepKind::Analysis { mu } if !(*mu > 0.0) => {
                return Err(Error::OutOfRange(format!(
                    "analysis stepsize needs mu > 0, got {mu}"
                )))
            }
            StepKind::Custom(seq) => {
                if seq.is_empty() || seq.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
                    return Err(Error::OutOfRange(
                        "custom stepsizes must be finite and nonnegative".into(),
                    ));
                }
                if seq.windows(2).any(|w| w[1] > w[0]) {
                    return Err(Error::OutOfRange(
                        "custom stepsizes must be nonincreasing".into(),
                    ));
                }
            }
            _ => {}
        }
        Ok(StepSchedule { kind, t0 })
    }

    pub fn analysis(mu: f64, t0: usize) -> Result<Self> {
        Self::new(StepKind::Analysis { mu }, t0)
    }

    pub fn experimental(t0: usize) -> Self {
        StepSchedule {
            kind: StepKind::Experimental,
            t0,
        }
    }

    pub fn kind(&self) -> &StepKind {
        &self.kind
    }

    pub fn t0(&self) -> usize {
        self.t0
    }

    /// The unshifted sequence γ(k); zero for negative `k`.
    pub fn gamma(&self, k: i64) -> f64 {
        if k < 0 {
            return 0.0;
        }
        match &self.kind {
            StepKind::Analysis { mu } => 2.0 / (mu * (k as f64 + 2.0)),
            StepKind::Experimental => 1.0 / (k as f64 + 2.0),
            StepKind::Custom(seq) => seq[(k as usize).min(seq.len() - 1)],
        }
    }

    /// Stepsize applied at round `t`, i.e. γ(t − T0).
    pub fn at_round(&self, t: usize) -> f64 {
        self.gamma(t as i64 - self.t0 as i64)
    }

    pub fn is_active(&self, t: usize) -> bool {
        t >= self.t0
    }
}
