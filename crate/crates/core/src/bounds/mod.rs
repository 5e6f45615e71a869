//! Closed-form convergence bounds on the mean squared distance to the optimum,
//! evaluated as curves over time.
//!
//! All `t/2` arguments are floors. Stepsizes inside the formulas are
//! γ(k) = 2/(μ(k+2)).

pub mod contraction;
pub mod expr;

use crate::error::{Error, Result};
use crate::network::{degree_counts, nominal_weight_matrix, DegreeCounts, Topology};
use crate::problem::Problem;
use crate::trust::{p_c, p_e, TrustModel};

// Relative agreement required between the two C_M evaluations.
const CROSS_CHECK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    pub mu: f64,
    pub l: f64,
    pub g: f64,
    /// Norm radius of the constraint set.
    pub eta: f64,
    pub rho: f64,
    pub e_l: f64,
    pub e_m: f64,
    pub counts: DegreeCounts,
    pub t0: usize,
}

impl BoundParams {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        mu: f64,
        l: f64,
        g: f64,
        eta: f64,
        rho: f64,
        e_l: f64,
        e_m: f64,
        counts: DegreeCounts,
        t0: usize,
    ) -> Result<Self> {
        if !(mu > 0.0) {
            return Err(Error::BoundParams(format!("mu must be positive, got {mu}")));
        }
        if !(l >= mu) || !(g > 0.0) || !(eta > 0.0) {
            return Err(Error::BoundParams(format!(
                "need L >= mu, G > 0, eta > 0 (L={l}, G={g}, eta={eta})"
            )));
        }
        if !(0.0..1.0).contains(&rho) {
            return Err(Error::BoundParams(format!(
                "rho must lie in [0, 1), got {rho}"
            )));
        }
        if !(e_l > 0.0 && e_m < 0.0) {
            return Err(Error::BoundParams(format!(
                "need E_L > 0 > E_M, got {e_l}, {e_m}"
            )));
        }
        let p = BoundParams {
            mu,
            l,
            g,
            eta,
            rho,
            e_l,
            e_m,
            counts,
            t0,
        };
        p.cross_check(t0)?;
        Ok(p)
    }

    /// Derives every constant from a concrete setup. `norm_radius` defaults to η√d.
    pub fn from_setup(
        problem: &Problem,
        topology: &Topology,
        trust: &TrustModel,
        t0: usize,
        norm_radius: Option<f64>,
    ) -> Result<Self> {
        let c = problem.regularity_constants();
        let rho = nominal_weight_matrix(topology)?.rho_l;
        let eta = norm_radius.unwrap_or_else(|| problem.domain().norm_radius());
        BoundParams::new(
            c.mu,
            c.l,
            c.g,
            eta,
            rho,
            trust.e_legitimate(),
            trust.e_malicious(),
            degree_counts(topology),
            t0,
        )
    }

    pub fn with_t0(self, t0: usize) -> Result<Self> {
        self.cross_check(t0)?;
        Ok(BoundParams { t0, ..self })
    }

    /// The trivial bound 4η².
    pub fn ceiling(&self) -> f64 {
        4.0 * self.eta * self.eta
    }

    /// γ(k) = 2/(μ(k+2)), zero for negative `k`.
    pub fn gamma(&self, k: i64) -> f64 {
        if k < 0 {
            0.0
        } else {
            2.0 / (self.mu * (k as f64 + 2.0))
        }
    }

    pub fn p_c(&self, k: i64) -> f64 {
        p_c(k, self.counts, self.e_l, self.e_m)
    }

    pub fn p_e(&self, k: i64) -> f64 {
        p_e(k, self.counts, self.e_l, self.e_m)
    }

    fn cross_check(&self, t0: usize) -> Result<()> {
        let direct = c_m(t0, self);
        let tree = c_m_via_expr(t0, self);
        let scale = direct.abs().max(tree.abs()).max(f64::MIN_POSITIVE);
        if (direct - tree).abs() > CROSS_CHECK_TOL * scale {
            return Err(Error::BoundParams(format!(
                "C_M evaluations disagree: {direct} vs {tree}"
            )));
        }
        Ok(())
    }
}

/// h̄(T), the numerator of the malicious-free rate. Requires `T ≥ 1`.
pub fn h_bar(big_t: usize, p: &BoundParams) -> Result<f64> {
    if big_t == 0 {
        return Err(Error::OutOfRange("h_bar needs T >= 1".into()));
    }
    let t = big_t as f64;
    let BoundParams {
        mu, l, g, eta, rho, ..
    } = *p;
    let q = 1.0 - rho;
    let ml = mu + l;
    Ok(g * g * t / mu
        + 2.0 * g * g * t / (mu * q)
        + 8.0 * ml * g * g / (mu * mu * q * q) * ((t + 2.0) / 2.0).ln()
        + 2.0 * eta * g / q
        + 2.0 * ml * (mu * eta + 2.0 * g).powi(2) / (mu * mu * q * q)
        + (2.0 * g * g + 4.0 * g * eta * ml) / (mu * q.powi(3))
        + g * g * ml / (mu * mu * q.powi(4)))
}

/// min{4η², 4h̄(T)/(μT(T+1))} for the malicious-free dynamic.
pub fn nominal_rate_bound(big_t: usize, p: &BoundParams) -> Result<f64> {
    let t = big_t as f64;
    Ok(p.ceiling()
        .min(4.0 * h_bar(big_t, p)? / (p.mu * t * (t + 1.0))))
}

/// g(t): mean distance of the malicious-free dynamic's values to their average.
pub fn nominal_distance_to_average_bound(t: usize, p: &BoundParams) -> f64 {
    let q = 1.0 - p.rho;
    let envelope = p.rho.powi(t as i32) * 2.0 * p.eta
        + p.rho.powi((t / 2) as i32) * p.g * p.gamma(0) / q
        + p.g * p.gamma((t / 2) as i64) / q;
    (2.0 * p.eta).min(envelope)
}

/// The classification-time bound with split point `m ∈ [T0, t−1]`.
pub fn expected_gap_bound_tf(t: usize, m: usize, p: &BoundParams) -> Result<f64> {
    if m < p.t0 || m + 1 > t {
        return Err(Error::OutOfRange(format!(
            "split point {m} outside [{}, {}]",
            p.t0,
            t as i64 - 1
        )));
    }
    let k = (t - m) as f64;
    let head = p
        .ceiling()
        .min(4.0 * h_bar(t - m, p)? / (p.mu * k * (k + 1.0)));
    Ok(head + p.ceiling() * p.p_e(m as i64).min(1.0))
}

/// Minimum of [`expected_gap_bound_tf`] over every admissible split point.
pub fn best_gap_bound_tf(t: usize, p: &BoundParams) -> Result<f64> {
    if t < p.t0 + 1 {
        return Err(Error::OutOfRange(format!("need t >= T0 + 1, got t={t}")));
    }
    let mut best = f64::INFINITY;
    for m in p.t0..t {
        best = best.min(expected_gap_bound_tf(t, m, p)?);
    }
    Ok(best)
}

/// Split point `m = T0`. Needs `t ≥ T0 + 1`.
pub fn gap_bound_fixed_window(t: usize, p: &BoundParams) -> Result<f64> {
    expected_gap_bound_tf(t, p.t0, p)
}

/// Split at the midpoint, in the halved-argument form. Needs `t ≥ T0 + 2`.
pub fn gap_bound_midpoint(t: usize, p: &BoundParams) -> Result<f64> {
    if t < p.t0 + 2 {
        return Err(Error::OutOfRange(format!(
            "midpoint form needs t >= T0 + 2, got t={t}"
        )));
    }
    let s = (t - p.t0) as f64;
    let head = p
        .ceiling()
        .min(16.0 * h_bar((t - p.t0) / 2, p)? / (p.mu * s * (s + 2.0)));
    let m = ((t + p.t0) / 2) as i64 - 1;
    Ok(head + p.ceiling() * p.p_e(m).min(1.0))
}

/// Split at `m = ⌈ln t / (2 min{E_L², E_M²})⌉`, with the `(D_L + D_M)/t` tail.
/// Defined only when `T0 ≤ m ≤ t − 1`; returns `None` otherwise.
pub fn gap_bound_logarithmic(t: usize, p: &BoundParams) -> Result<Option<f64>> {
    if t < 2 {
        return Ok(None);
    }
    let e2 = (p.e_l * p.e_l).min(p.e_m * p.e_m);
    let m = ((t as f64).ln() / (2.0 * e2)).ceil() as usize;
    if m < p.t0 || m + 1 > t {
        return Ok(None);
    }
    let k = (t - m) as f64;
    let head = p
        .ceiling()
        .min(4.0 * h_bar(t - m, p)? / (p.mu * k * (k + 1.0)));
    let d = (p.counts.legitimate + p.counts.malicious) as f64;
    Ok(Some(head + p.ceiling() * d / t as f64))
}

/// δ_M(t, T0): mean distance of the legitimate values to their average under attack.
pub fn delta_m(t: usize, p: &BoundParams) -> Result<f64> {
    if t < p.t0 {
        return Err(Error::OutOfRange(format!(
            "delta_M needs t >= T0, got t={t}, T0={}",
            p.t0
        )));
    }
    let s = t - p.t0;
    let q = 1.0 - p.rho;
    Ok(2.0 * p.eta * p.rho.powi(s as i32)
        + (2.0 * p.eta * p.p_c(p.t0 as i64).sqrt() + p.g * p.gamma(0)) * p.rho.powi((s / 2) as i32)
            / q
        + 2.0 * (p.eta * p.p_c(((t + p.t0) / 2) as i64).sqrt() + p.g * p.gamma((s / 2) as i64)) / q)
}

/// C̃₁(T0, E, D).
pub fn c_tilde_1(t0: usize, e: f64, d: usize, p: &BoundParams) -> f64 {
    let BoundParams {
        mu, l, g, eta, rho, ..
    } = *p;
    let q = 1.0 - rho;
    let sd = (d as f64).sqrt();
    let decay = (-(t0 as f64) * e * e).exp();
    let bracket = g / (1.0 - (-e * e).exp()).powi(2)
        + (g + (eta + 4.0 / mu) * (mu + l)) / q.powi(2)
        + (mu + l) * (g + 2.0 * mu * sd * decay) / (mu * q.powi(3));
    16.0 * eta * decay * sd / q * bracket
}

/// C̃₂(T0, E, D).
pub fn c_tilde_2(t0: usize, e: f64, d: usize, p: &BoundParams) -> f64 {
    let BoundParams { mu, l, g, eta, .. } = *p;
    let r = (-2.0 * e * e).exp();
    let bracket = 4.0 * eta * r / (1.0 - r).powi(2)
        + (6.0 * eta + g / mu) * r / (1.0 - r)
        + 4.0 * eta
        + 4.0 * eta * l / (mu * mu)
        + g / mu;
    4.0 * eta * (l + 1.0) * d as f64 * (-2.0 * t0 as f64 * e * e).exp() / (1.0 - r) * bracket
}

/// C_M(T0) = 2C₁(T0) + μC₂(T0), the additive penalty from malicious presence.
pub fn c_m(t0: usize, p: &BoundParams) -> f64 {
    let (dl, dm) = (p.counts.legitimate, p.counts.malicious);
    let c1 = c_tilde_1(t0, p.e_l, dl, p) + c_tilde_1(t0, p.e_m, dm, p);
    let c2 = c_tilde_2(t0, p.e_l, dl, p) + c_tilde_2(t0, p.e_m, dm, p);
    2.0 * c1 + p.mu * c2
}

/// C_M(T0) evaluated through [`expr`] trees instead of the direct code.
pub fn c_m_via_expr(t0: usize, p: &BoundParams) -> f64 {
    let (t1, t2) = (expr::c_tilde_1(), expr::c_tilde_2());
    let env = |e: f64, d: usize| expr::Env {
        eta: p.eta,
        g: p.g,
        mu: p.mu,
        l: p.l,
        rho: p.rho,
        t0: t0 as f64,
        e,
        d: d as f64,
    };
    let (el, em) = (
        env(p.e_l, p.counts.legitimate),
        env(p.e_m, p.counts.malicious),
    );
    2.0 * (t1.eval(&el) + t1.eval(&em)) + p.mu * (t2.eval(&el) + t2.eval(&em))
}

/// min{4η², (4h̄(T − T0) + C_M(T0))/(μ(T − T0)(T − T0 + 1))}. Needs `T ≥ T0 + 1`.
pub fn tightened_gap_bound(big_t: usize, p: &BoundParams) -> Result<f64> {
    if big_t <= p.t0 {
        return Err(Error::OutOfRange(format!(
            "need T > T0, got T={big_t}, T0={}",
            p.t0
        )));
    }
    let k = (big_t - p.t0) as f64;
    Ok(p.ceiling()
        .min((4.0 * h_bar(big_t - p.t0, p)? + c_m(p.t0, p)) / (p.mu * k * (k + 1.0))))
}

/// Per-round penalty terms of the tightened analysis, for diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenaltyTerms {
    /// Contribution of misweighted neighbors, h_M(t, T0).
    pub h_m: f64,
    /// Contribution of disagreement among legitimate agents, h̃_M(t, T0).
    pub h_tilde_m: f64,
}

pub fn penalty_terms(t: usize, p: &BoundParams) -> Result<PenaltyTerms> {
    let gamma = p.gamma(t as i64 - p.t0 as i64);
    let h_m = 4.0
        * p.eta
        * p.eta
        * p.p_c(t as i64)
        * (2.0 * (p.l + 1.0)
            + gamma * gamma * p.l * p.l
            + gamma * p.g * (p.l + 1.0) / (2.0 * p.eta));
    let dm = delta_m(t, p)?;
    let h_tilde_m = gamma * p.g * p.g + 2.0 * p.g * dm + (p.mu + p.l) * dm * dm;
    Ok(PenaltyTerms { h_m, h_tilde_m })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BoundKind {
    /// Malicious-free rate.
    Nominal,
    FixedWindow,
    Midpoint,
    Logarithmic,
    Tightened,
    /// Distance-to-average envelope under attack.
    DeltaM,
}

impl BoundKind {
    pub const GAP_BOUNDS: [BoundKind; 5] = [
        BoundKind::Nominal,
        BoundKind::FixedWindow,
        BoundKind::Midpoint,
        BoundKind::Logarithmic,
        BoundKind::Tightened,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            BoundKind::Nominal => "bound_thm1",
            BoundKind::FixedWindow => "bound_cor5a",
            BoundKind::Midpoint => "bound_cor5b",
            BoundKind::Logarithmic => "bound_cor5c",
            BoundKind::Tightened => "bound_thm9",
            BoundKind::DeltaM => "delta_m",
        }
    }

    /// Value at `t`, or `None` where the bound is not defined. Gap bounds are clamped at 4η².
    pub fn evaluate(&self, t: usize, p: &BoundParams) -> Result<Option<f64>> {
        let clamp = |v: f64| Some(v.min(p.ceiling()));
        Ok(match self {
            // The malicious-free dynamic starts its clock at T0.
            BoundKind::Nominal => (t > p.t0)
                .then(|| nominal_rate_bound(t - p.t0, p))
                .transpose()?,
            BoundKind::FixedWindow => (t > p.t0)
                .then(|| gap_bound_fixed_window(t, p))
                .transpose()?
                .and_then(clamp),
            BoundKind::Midpoint => (t >= p.t0 + 2)
                .then(|| gap_bound_midpoint(t, p))
                .transpose()?
                .and_then(clamp),
            BoundKind::Logarithmic => gap_bound_logarithmic(t, p)?.and_then(clamp),
            BoundKind::Tightened => (t > p.t0).then(|| tightened_gap_bound(t, p)).transpose()?,
            BoundKind::DeltaM => (t >= p.t0).then(|| delta_m(t, p)).transpose()?,
        })
    }
}

/// A bound evaluated on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub name: String,
    pub grid: Vec<usize>,
    pub values: Vec<Option<f64>>,
}

pub fn bound_curve(kind: BoundKind, grid: &[usize], p: &BoundParams) -> Result<BoundCurve> {
    let values = grid
        .iter()
        .map(|&t| kind.evaluate(t, p))
        .collect::<Result<_>>()?;
    Ok(BoundCurve {
        name: kind.name().to_string(),
        grid: grid.to_vec(),
        values,
    })
}
