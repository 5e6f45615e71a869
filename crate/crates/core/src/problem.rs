//! Quadratic per-agent objectives on a box, their regularity constants and optima.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::vecops::{axpy, dot, norm};

/// Offsets of the reference experiment's local targets.
pub const REFERENCE_B: [f64; 15] = [
    115.7, 163.3, -81.7, 127.2, -63.7, 58.4, -3.1, 62.9, 54.5, 144.9, -121.1, 9.3, -2.6, -124.5,
    131.0,
];

/// Regressors of the reference 5-dimensional instance, one row per agent.
pub const REFERENCE_A: [[f64; 5]; 15] = [
    [-0.87, -1.05, -2.81, -0.4, -1.76],
    [-0.88, -0.34, 0.34, -2.46, 0.44],
    [-0.25, 0.47, -0.09, -0.99, -2.33],
    [-0.27, -0.61, -2.5, -0.79, 0.46],
    [-0.23, 1.83, 0.89, -0.83, -0.67],
    [-1.6, 0.27, -0.81, -2.77, -0.21],
    [-1.42, -1.11, -1.63, -0.66, -1.54],
    [-1.19, -0.3, -1.97, -1.42, -1.21],
    [-1.43, -1.64, 0.17, -2.11, -2.11],
    [-0.73, 0.46, -0.42, -1.75, 0.22],
    [-0.97, -0.12, -2.35, -2.51, -1.63],
    [-1.18, -1.42, -0.13, -1.66, 0.36],
    [-0.63, -2.19, -1.15, -1.65, -2.02],
    [0.59, -2.08, 0.26, -0.74, -2.66],
    [-3.05, -0.7, 0.2, -1.94, -1.4],
];

/// Regularization weight of the reference 5-dimensional instance.
pub const REFERENCE_LAMBDA: f64 = 0.5;

/// Box half-width of the reference experiments.
pub const REFERENCE_ETA: f64 = 50.0;

/// `f(x) = ½(aᵀx − b)² + (λ/2)‖x‖²`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticObjective {
    pub a: Vec<f64>,
    pub b: f64,
    pub lambda: f64,
}

impl QuadraticObjective {
    pub fn new(a: Vec<f64>, b: f64, lambda: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Problem(
                "objective needs dimension at least 1".into(),
            ));
        }
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::Problem(format!(
                "lambda must be finite and nonnegative, got {lambda}"
            )));
        }
        if !b.is_finite() || a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Problem("objective data must be finite".into()));
        }
        Ok(QuadraticObjective { a, b, lambda })
    }

    pub fn dim(&self) -> usize {
        self.a.len()
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        if x.len() == self.a.len() {
            Ok(())
        } else {
            Err(Error::Dimension {
                expected: self.a.len(),
                got: x.len(),
            })
        }
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let r = dot(&self.a, x) - self.b;
        Ok(0.5 * r * r + 0.5 * self.lambda * dot(x, x))
    }

    /// `a(aᵀx − b) + λx`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut out = vec![0.0; x.len()];
        self.gradient_into(x, &mut out);
        Ok(out)
    }

    /// Unchecked gradient for the simulation hot loop; lengths must agree.
    pub fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let r = dot(&self.a, x) - self.b;
        for ((o, &ai), &xi) in out.iter_mut().zip(&self.a).zip(x) {
            *o = ai * r + self.lambda * xi;
        }
    }
}

/// The box `[−η, η]^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxConstraint {
    pub eta: f64,
    pub dim: usize,
}

impl BoxConstraint {
    pub fn new(eta: f64, dim: usize) -> Result<Self> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::Problem(format!("eta must be positive, got {eta}")));
        }
        if dim == 0 {
            return Err(Error::Problem("box dimension must be at least 1".into()));
        }
        Ok(BoxConstraint { eta, dim })
    }

    pub fn project(&self, y: &[f64]) -> Vec<f64> {
        let mut out = y.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, y: &mut [f64]) {
        for v in y {
            *v = v.clamp(-self.eta, self.eta);
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim && x.iter().all(|v| v.abs() <= self.eta)
    }

    /// Radius of the smallest centred ball containing the box, `η√d`.
    pub fn norm_radius(&self) -> f64 {
        self.eta * (self.dim as f64).sqrt()
    }
}

/// μ (strong convexity), L (gradient Lipschitz) and G (gradient norm bound on X).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProblemConstants {
    pub mu: f64,
    pub l: f64,
    pub g: f64,
}

impl ProblemConstants {
    /// Bound formulas divide by μ; simulation alone does not need it.
    pub fn strongly_convex(&self) -> bool {
        self.mu > 0.0
    }
}

/// One objective per legitimate agent over a shared box.
#[derive(Debug, Clone, PartialEq)]
pub struct Problem {
    objectives: Vec<QuadraticObjective>,
    domain: BoxConstraint,
}

impl Problem {
    pub fn new(objectives: Vec<QuadraticObjective>, domain: BoxConstraint) -> Result<Self> {
        if objectives.is_empty() {
            return Err(Error::Problem("at least one objective is required".into()));
        }
        for obj in &objectives {
            if obj.dim() != domain.dim {
                return Err(Error::Dimension {
                    expected: domain.dim,
                    got: obj.dim(),
                });
            }
        }
        Ok(Problem { objectives, domain })
    }

    /// Scalar consensus: `f_i(x) = ½(x − b_i)²` on `[−η, η]`.
    pub fn consensus(b: &[f64], eta: f64) -> Result<Self> {
        let objectives = b
            .iter()
            .map(|&bi| QuadraticObjective::new(vec![1.0], bi, 0.0))
            .collect::<Result<_>>()?;
        Problem::new(objectives, BoxConstraint::new(eta, 1)?)
    }

    /// The 15-agent scalar consensus instance of the reference experiment.
    pub fn reference_consensus() -> Self {
        Problem::consensus(&REFERENCE_B, REFERENCE_ETA).expect("reference data is valid")
    }

    /// The 15-agent regularized least-squares instance in dimension 5, with `b_i` doubled.
    pub fn reference_regularized() -> Self {
        let objectives = REFERENCE_A
            .iter()
            .zip(REFERENCE_B)
            .map(|(a, b)| QuadraticObjective::new(a.to_vec(), 2.0 * b, REFERENCE_LAMBDA))
            .collect::<Result<_>>()
            .expect("reference data is valid");
        Problem::new(objectives, BoxConstraint::new(REFERENCE_ETA, 5).unwrap()).unwrap()
    }

    pub fn objectives(&self) -> &[QuadraticObjective] {
        &self.objectives
    }

    pub fn domain(&self) -> BoxConstraint {
        self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim
    }

    pub fn n_agents(&self) -> usize {
        self.objectives.len()
    }

    /// Gradient of the average objective `(1/n)Σ f_i`.
    pub fn average_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut total = vec![0.0; self.dim()];
        for obj in &self.objectives {
            axpy(&mut total, 1.0 / self.n_agents() as f64, &obj.gradient(x)?);
        }
        Ok(total)
    }

    pub fn average_value(&self, x: &[f64]) -> Result<f64> {
        let mut total = 0.0;
        for obj in &self.objectives {
            total += obj.value(x)?;
        }
        Ok(total / self.n_agents() as f64)
    }

    // H = λ̄I + (1/n)Σ a aᵀ and c = (1/n)Σ a b, so ∇F(x) = Hx − c.
    fn normal_equations(&self) -> (DMatrix<f64>, DVector<f64>) {
        let d = self.dim();
        let n = self.n_agents() as f64;
        let mut h = DMatrix::zeros(d, d);
        let mut c = DVector::zeros(d);
        for obj in &self.objectives {
            let a = DVector::from_column_slice(&obj.a);
            h += &a * a.transpose() / n;
            for k in 0..d {
                h[(k, k)] += obj.lambda / n;
            }
            c += a * (obj.b / n);
        }
        (h, c)
    }

    /// Minimizer of the average objective over all of ℝ^d.
    pub fn unconstrained_optimum(&self) -> Result<Vec<f64>> {
        let (h, c) = self.normal_equations();
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::Singular("λI + (1/n)Σ a aᵀ is not positive definite".into()))?;
        Ok(chol.solve(&c).iter().copied().collect())
    }

    /// The unconstrained optimum clipped coordinate-wise to `[−η, η]`.
    ///
    /// Equals the constrained minimizer for scalar problems; in higher dimension
    /// it is only an approximation, see [`Problem::constrained_optimum`].
    pub fn optimal_point(&self) -> Result<Vec<f64>> {
        Ok(self.domain.project(&self.unconstrained_optimum()?))
    }

    /// Exact minimizer of the average objective over the box, by projected
    /// gradient iteration to machine precision.
    pub fn constrained_optimum(&self) -> Result<Vec<f64>> {
        let (h, c) = self.normal_equations();
        let eig = h.clone().symmetric_eigen();
        let l_max = eig.eigenvalues.max();
        if !(eig.eigenvalues.min() > 0.0) {
            return Err(Error::Singular(
                "average objective is not strongly convex".into(),
            ));
        }
        let mut x = DVector::from_vec(self.optimal_point()?);
        let step = 1.0 / l_max;
        for _ in 0..1_000_000 {
            let mut next = &x - (&h * &x - &c) * step;
            self.domain.project_in_place(next.as_mut_slice());
            let moved = (&next - &x).norm();
            x = next;
            if moved <= 1e-14 * x.norm().max(1.0) {
                break;
            }
        }
        Ok(x.iter().copied().collect())
    }

    /// μ = min_i(λ + λ_min(a_i a_iᵀ)), L = max_i(λ + ‖a_i‖²),
    /// G = max_i(‖a_i‖(‖a_i‖R + |b_i|) + λR) with R = η√d.
    pub fn regularity_constants(&self) -> ProblemConstants {
        let radius = self.domain.norm_radius();
        let d = self.dim();
        let mut mu = f64::INFINITY;
        let mut l = 0.0f64;
        let mut g = 0.0f64;
        for obj in &self.objectives {
            let a2 = dot(&obj.a, &obj.a);
            // a aᵀ has rank one: its smallest eigenvalue is ‖a‖² only in dimension 1.
            let lam_min = if d == 1 { a2 } else { 0.0 };
            mu = mu.min(obj.lambda + lam_min);
            l = l.max(obj.lambda + a2);
            let an = norm(&obj.a);
            g = g.max(an * (an * radius + obj.b.abs()) + obj.lambda * radius);
        }
        ProblemConstants { mu, l, g }
    }

    /// Parses the problem file format:
    ///
    /// ```text
    /// dim <d>
    /// lambda <λ>
    /// eta <η>
    /// <a_1> ... <a_d> <b>     # one row per legitimate agent
    /// ```
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let (mut dim, mut lambda, mut eta) = (None, None, None);
        let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let real = |s: &str| -> Result<f64> {
                s.parse().map_err(|_| {
                    Error::parse(origin, line_no, format!("expected a number, got {s:?}"))
                })
            };
            match fields.as_slice() {
                ["dim", v] => {
                    dim = Some(
                        v.parse::<usize>()
                            .map_err(|_| Error::parse(origin, line_no, "bad dimension"))?,
                    )
                }
                ["lambda", v] => lambda = Some(real(v)?),
                ["eta", v] => eta = Some(real(v)?),
                _ => rows.push((
                    line_no,
                    fields.iter().map(|s| real(s)).collect::<Result<_>>()?,
                )),
            }
        }
        let dim = dim.ok_or_else(|| Error::parse(origin, 0, "missing `dim`"))?;
        let lambda = lambda.ok_or_else(|| Error::parse(origin, 0, "missing `lambda`"))?;
        let eta = eta.ok_or_else(|| Error::parse(origin, 0, "missing `eta`"))?;
        let mut objectives = Vec::with_capacity(rows.len());
        for (line_no, mut row) in rows {
            if row.len() != dim + 1 {
                return Err(Error::parse(
                    origin,
                    line_no,
                    format!("expected {} numbers, got {}", dim + 1, row.len()),
                ));
            }
            let b = row.pop().unwrap();
            objectives.push(QuadraticObjective::new(row, b, lambda)?);
        }
        Problem::new(objectives, BoxConstraint::new(eta, dim)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Serializes to the file format; requires a common λ across agents.
    pub fn to_text(&self) -> Result<String> {
        let lambda = self.objectives[0].lambda;
        if self.objectives.iter().any(|o| o.lambda != lambda) {
            return Err(Error::Problem(
                "file format needs a single shared lambda".into(),
            ));
        }
        let mut out = format!(
            "dim {}\nlambda {lambda:?}\neta {:?}\n",
            self.dim(),
            self.domain.eta
        );
        for obj in &self.objectives {
            for a in &obj.a {
                let _ = write!(out, "{a:?} ");
            }
            let _ = writeln!(out, "{:?}", obj.b);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gradient_examples() {
        let f = QuadraticObjective::new(vec![1.0, 0.0], 2.0, 1.0).unwrap();
        assert_eq!(f.gradient(&[3.0, 4.0]).unwrap(), vec![4.0, 4.0]);
        let f = QuadraticObjective::new(vec![1.0], 7.0, 0.0).unwrap();
        assert_eq!(f.gradient(&[7.0]).unwrap(), vec![0.0]);
        assert!(f.gradient(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn objective_examples() {
        let f = QuadraticObjective::new(vec![1.0, 0.0], 2.0, 0.0).unwrap();
        assert_eq!(f.value(&[2.0, 7.0]).unwrap(), 0.0);
        let f = QuadraticObjective::new(vec![0.0, 0.0], 0.0, 2.0).unwrap();
        assert_eq!(f.value(&[1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn projection_examples() {
        let b = BoxConstraint::new(50.0, 2).unwrap();
        assert_eq!(b.project(&[60.0, -10.0]), vec![50.0, -10.0]);
        assert_eq!(b.project(&[3.0, -4.0]), vec![3.0, -4.0]);
        let b = BoxConstraint::new(50.0, 3).unwrap();
        assert_eq!(b.project(&[-51.0, 51.0, 0.0]), vec![-50.0, 50.0, 0.0]);
    }

    #[test]
    fn consensus_optimum() {
        let p = Problem::reference_consensus();
        let x = p.optimal_point().unwrap();
        assert_relative_eq!(
            x[0],
            REFERENCE_B.iter().sum::<f64>() / 15.0,
            epsilon = 1e-12
        );
        assert!((x[0] - 31.367).abs() < 1e-3);
        assert_relative_eq!(p.constrained_optimum().unwrap()[0], x[0], epsilon = 1e-10);
    }

    #[test]
    fn regularized_optimum() {
        let p = Problem::reference_regularized();
        let uc = p.unconstrained_optimum().unwrap();
        let expected_uc = [-61.67, -16.54, -21.19, -19.64, 60.4];
        for (got, want) in uc.iter().zip(expected_uc) {
            assert!((got - want).abs() < 0.01, "{got} vs {want}");
        }
        let clipped = p.optimal_point().unwrap();
        let expected = [-50.0, -16.54, -21.19, -19.64, 50.0];
        for (got, want) in clipped.iter().zip(expected) {
            assert!((got - want).abs() < 0.01, "{got} vs {want}");
        }
        // Independent active-set solve with coordinates 0 and 4 pinned at the bounds.
        let exact = p.constrained_optimum().unwrap();
        let oracle = [-50.0, -13.527, -20.827, -22.047, 50.0];
        for (got, want) in exact.iter().zip(oracle) {
            assert!((got - want).abs() < 1e-3, "{got} vs {want}");
        }
    }

    #[test]
    fn single_agent_clip() {
        let p = Problem::new(
            vec![QuadraticObjective::new(vec![1.0], 10.0, 0.0).unwrap()],
            BoxConstraint::new(5.0, 1).unwrap(),
        )
        .unwrap();
        assert_eq!(p.optimal_point().unwrap(), vec![5.0]);
    }

    #[test]
    fn singular_system_rejected() {
        let objs = (0..3)
            .map(|_| QuadraticObjective::new(vec![1.0, 0.0], 1.0, 0.0).unwrap())
            .collect();
        let p = Problem::new(objs, BoxConstraint::new(5.0, 2).unwrap()).unwrap();
        assert!(matches!(p.unconstrained_optimum(), Err(Error::Singular(_))));
    }

    #[test]
    fn constants_examples() {
        let c = Problem::reference_consensus().regularity_constants();
        assert_eq!((c.mu, c.l), (1.0, 1.0));
        assert_relative_eq!(c.g, 50.0 + 163.3, epsilon = 1e-12);

        let objs = (0..4)
            .map(|_| QuadraticObjective::new(vec![0.0; 5], 3.0, 1.0).unwrap())
            .collect();
        let c = Problem::new(objs, BoxConstraint::new(2.0, 5).unwrap())
            .unwrap()
            .regularity_constants();
        assert_eq!((c.mu, c.l), (1.0, 1.0));
        assert_relative_eq!(c.g, 2.0 * 5f64.sqrt(), epsilon = 1e-12);

        let c = Problem::reference_regularized().regularity_constants();
        assert_eq!(c.mu, REFERENCE_LAMBDA);
        // Row 15 has the largest squared norm: 3.05² + 0.7² + 0.2² + 1.94² + 1.4².
        assert_relative_eq!(c.l, REFERENCE_LAMBDA + 15.5561, epsilon = 1e-9);
        // Direct evaluation over the table in numpy.
        assert_relative_eq!(c.g, 2828.486571450427, max_relative = 1e-12);
    }

    #[test]
    fn file_round_trip() {
        let p = Problem::reference_regularized();
        let text = p.to_text().unwrap();
        assert_eq!(Problem::parse(&text, "rt").unwrap(), p);
        assert!(Problem::parse("dim 2\nlambda 0\neta 1\n1 2\n", "x").is_err());
        assert!(Problem::parse("lambda 0\neta 1\n1 2\n", "x").is_err());
    }
}
