//! Communication graph, legitimate/malicious partition and the nominal
//! (malicious-free) Metropolis-style weight matrix with its spectral gap.
//!
//! Agents are indexed `0..n`, legitimate agents first: ids `0..n_legitimate`
//! are legitimate and `n_legitimate..n` are malicious. The partition is a
//! modelling artifact; legitimate agents never consult it when running the
//! protocol, only the simulator and the bound evaluators do.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const CANONICAL_15: &str = include_str!("../data/canonical_15.graph");

/// Undirected communication graph with a legitimate/malicious labelling.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n_legitimate: usize,
    n_malicious: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
    // Start of agent i's block in the directed legitimate->neighbor edge list.
    edge_offsets: Vec<usize>,
}

impl Topology {
    /// Builds a topology, normalizing edges to `(min, max)` and dropping duplicates.
    ///
    /// Rejects self-loops, out-of-range indices and a disconnected legitimate subgraph.
    pub fn new(
        n_legitimate: usize,
        n_malicious: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        if n_legitimate == 0 {
            return Err(Error::Topology(
                "at least one legitimate agent is required".into(),
            ));
        }
        let n = n_legitimate + n_malicious;
        let mut normalized = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Topology(format!("self-loop on agent {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Topology(format!(
                    "edge ({a}, {b}) references an agent outside 0..{n}"
                )));
            }
            normalized.push((a.min(b), a.max(b)));
        }
        normalized.sort_unstable();
        normalized.dedup();

        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in &normalized {
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        let mut edge_offsets = Vec::with_capacity(n_legitimate + 1);
        let mut acc = 0;
        for list in neighbors.iter().take(n_legitimate) {
            edge_offsets.push(acc);
            acc += list.len();
        }
        edge_offsets.push(acc);

        let topology = Topology {
            n_legitimate,
            n_malicious,
            edges: normalized,
            neighbors,
            edge_offsets,
        };
        topology.check_legitimate_connected()?;
        Ok(topology)
    }

    fn check_legitimate_connected(&self) -> Result<()> {
        let mut seen = vec![false; self.n_legitimate];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        let mut reached = 1;
        while let Some(i) = queue.pop_front() {
            for j in self.legitimate_neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    reached += 1;
                    queue.push_back(j);
                }
            }
        }
        if reached == self.n_legitimate {
            Ok(())
        } else {
            Err(Error::Disconnected {
                reached,
                total: self.n_legitimate,
            })
        }
    }

    /// The fixed 15-agent legitimate test graph (ring plus seeded chords), no malicious agents.
    ///
    /// Stands in for the unpublished edge set of the reference experiment's figure.
    pub fn canonical() -> Self {
        Self::parse(CANONICAL_15, "canonical_15.graph").expect("embedded canonical graph is valid")
    }

    /// Ring over `n` legitimate agents plus `chords` distinct random non-ring edges.
    pub fn ring_with_chords(n: usize, chords: usize, seed: u64) -> Result<Self> {
        let mut edges: Vec<(usize, usize)> = if n > 1 {
            (0..n).map(|i| (i, (i + 1) % n)).collect()
        } else {
            Vec::new()
        };
        let mut candidates: Vec<(usize, usize)> = (0..n)
            .flat_map(|a| (a + 1..n).map(move |b| (a, b)))
            .filter(|&(a, b)| b - a != 1 && !(a == 0 && b == n - 1))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        candidates.shuffle(&mut rng);
        if chords > candidates.len() {
            return Err(Error::Topology(format!(
                "{chords} chords requested, only {} available",
                candidates.len()
            )));
        }
        edges.extend(candidates.into_iter().take(chords));
        Topology::new(n, 0, edges)
    }

    /// Returns a copy with `count` additional malicious agents, each connected to every legitimate agent.
    pub fn with_malicious_attached(&self, count: usize) -> Self {
        let base = self.n_legitimate + self.n_malicious;
        let mut edges = self.edges.clone();
        for m in base..base + count {
            edges.extend((0..self.n_legitimate).map(|i| (i, m)));
        }
        Topology::new(self.n_legitimate, self.n_malicious + count, edges)
            .expect("attaching malicious agents preserves validity")
    }

    pub fn n_legitimate(&self) -> usize {
        self.n_legitimate
    }

    pub fn n_malicious(&self) -> usize {
        self.n_malicious
    }

    pub fn n_agents(&self) -> usize {
        self.n_legitimate + self.n_malicious
    }

    pub fn is_malicious(&self, agent: usize) -> bool {
        agent >= self.n_legitimate
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Sorted neighbor list N_i.
    pub fn neighbors(&self, agent: usize) -> &[usize] {
        &self.neighbors[agent]
    }

    pub fn legitimate_neighbors(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[agent]
            .iter()
            .copied()
            .filter(move |&j| j < self.n_legitimate)
    }

    pub fn malicious_neighbors(&self, agent: usize) -> impl Iterator<Item = usize> + '_ {
        self.neighbors[agent]
            .iter()
            .copied()
            .filter(move |&j| j >= self.n_legitimate)
    }

    /// Number of directed legitimate->neighbor edges monitored by trust observations.
    pub fn n_monitored_edges(&self) -> usize {
        self.edge_offsets[self.n_legitimate]
    }

    /// Index of legitimate agent `i`'s first monitored edge; edges of `i` are
    /// `offset(i)..offset(i + 1)` in the order of [`Topology::neighbors`].
    pub fn edge_offset(&self, legitimate: usize) -> usize {
        self.edge_offsets[legitimate]
    }

    /// Directed monitored edges `(i, j)`, `i` legitimate, `j ∈ N_i`, in canonical order.
    pub fn monitored_edges(&self) -> Vec<(usize, usize)> {
        (0..self.n_legitimate)
            .flat_map(|i| self.neighbors[i].iter().map(move |&j| (i, j)))
            .collect()
    }

    /// Parses the plain-text edge list format:
    ///
    /// ```text
    /// agents <n_legit> <n_mal>
    /// edge <i> <j>
    /// ```
    ///
    /// Blank lines and `#` comments are ignored.
    pub fn parse(text: &str, origin: &str) -> Result<Self> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            let num = |s: &str| -> Result<usize> {
                s.parse().map_err(|_| {
                    Error::parse(
                        origin,
                        line_no,
                        format!("expected a nonnegative integer, got {s:?}"),
                    )
                })
            };
            match fields.as_slice() {
                ["agents", l, m] => {
                    if header.is_some() {
                        return Err(Error::parse(origin, line_no, "duplicate `agents` header"));
                    }
                    header = Some((num(l)?, num(m)?));
                }
                ["edge", a, b] => {
                    if header.is_none() {
                        return Err(Error::parse(
                            origin,
                            line_no,
                            "`edge` before `agents` header",
                        ));
                    }
                    edges.push((num(a)?, num(b)?));
                }
                _ => {
                    return Err(Error::parse(
                        origin,
                        line_no,
                        format!("unrecognized line {line:?}"),
                    ))
                }
            }
        }
        let (l, m) = header.ok_or_else(|| Error::parse(origin, 0, "missing `agents` header"))?;
        Topology::new(l, m, edges)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("agents {} {}\n", self.n_legitimate, self.n_malicious);
        for &(a, b) in &self.edges {
            let _ = writeln!(out, "edge {a} {b}");
        }
        out
    }
}

/// Total legitimate (`D_L`) and malicious (`D_M`) neighbor counts seen from legitimate agents.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DegreeCounts {
    pub legitimate: usize,
    pub malicious: usize,
}

pub fn degree_counts(topology: &Topology) -> DegreeCounts {
    let mut counts = DegreeCounts {
        legitimate: 0,
        malicious: 0,
    };
    for i in 0..topology.n_legitimate() {
        for &j in topology.neighbors(i) {
            if topology.is_malicious(j) {
                counts.malicious += 1;
            } else {
                counts.legitimate += 1;
            }
        }
    }
    counts
}

/// The nominal weight matrix over the legitimate subgraph and its mixing rate.
#[derive(Debug, Clone)]
pub struct NominalWeights {
    pub matrix: DMatrix<f64>,
    /// Second largest eigenvalue modulus of `matrix`.
    pub rho_l: f64,
    /// `d_{i,L} = |N_i ∩ L| + 1`.
    pub d_l: Vec<usize>,
}

impl NominalWeights {
    pub fn size(&self) -> usize {
        self.d_l.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }
}

pub fn nominal_weight_matrix(topology: &Topology) -> Result<NominalWeights> {
    // `Topology::new` already rejects disconnected legitimate subgraphs.
    topology.check_legitimate_connected()?;
    let n = topology.n_legitimate();
    let d_l: Vec<usize> = (0..n)
        .map(|i| topology.legitimate_neighbors(i).count() + 1)
        .collect();
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut off = 0.0;
        for j in topology.legitimate_neighbors(i) {
            let w = 1.0 / (2.0 * d_l[i].max(d_l[j]) as f64);
            matrix[(i, j)] = w;
            off += w;
        }
        matrix[(i, i)] = 1.0 - off;
    }
    let rho_l = spectral_gap(&matrix);
    Ok(NominalWeights { matrix, rho_l, d_l })
}

/// Second largest eigenvalue modulus of a symmetric doubly stochastic matrix.
///
/// One copy of the largest-modulus eigenvalue (the Perron eigenvalue 1) is
/// dropped; a 1x1 matrix has no second eigenvalue and yields 0.
pub fn spectral_gap(weights: &DMatrix<f64>) -> f64 {
    if weights.nrows() <= 1 {
        return 0.0;
    }
    let eig = SymmetricEigen::new(weights.clone());
    let mut moduli: Vec<f64> = eig.eigenvalues.iter().map(|v| v.abs()).collect();
    moduli.sort_by(|a, b| b.total_cmp(a));
    moduli[1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn path3() -> Topology {
        Topology::new(3, 0, [(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn two_agent_weights() {
        let t = Topology::new(2, 0, [(0, 1)]).unwrap();
        let w = nominal_weight_matrix(&t).unwrap();
        assert_eq!(w.matrix[(0, 1)], 0.25);
        assert_eq!(w.matrix[(0, 0)], 0.75);
        assert_relative_eq!(w.rho_l, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn single_agent_weights() {
        let t = Topology::new(1, 0, []).unwrap();
        let w = nominal_weight_matrix(&t).unwrap();
        assert_eq!(w.matrix, DMatrix::from_element(1, 1, 1.0));
        assert_eq!(w.rho_l, 0.0);
    }

    #[test]
    fn path_of_three() {
        let w = nominal_weight_matrix(&path3()).unwrap();
        assert_eq!(w.d_l, vec![2, 3, 2]);
        assert_relative_eq!(w.matrix[(0, 1)], 1.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(w.matrix[(0, 0)], 5.0 / 6.0, epsilon = 1e-15);
        assert_relative_eq!(w.matrix[(1, 1)], 2.0 / 3.0, epsilon = 1e-15);
        assert_eq!(w.matrix[(0, 2)], 0.0);
    }

    #[test]
    fn identity_has_unit_gap() {
        assert_eq!(spectral_gap(&DMatrix::identity(3, 3)), 1.0);
    }

    #[test]
    fn rejects_bad_graphs() {
        assert!(matches!(
            Topology::new(3, 0, [(0, 1)]),
            Err(Error::Disconnected {
                reached: 2,
                total: 3
            })
        ));
        assert!(Topology::new(2, 0, [(1, 1)]).is_err());
        assert!(Topology::new(2, 0, [(0, 2)]).is_err());
        assert!(Topology::new(0, 1, []).is_err());
        // Connectivity through a malicious agent does not count.
        assert!(Topology::new(2, 1, [(0, 2), (1, 2)]).is_err());
    }

    #[test]
    fn degree_count_examples() {
        let t = Topology::new(2, 0, [(0, 1)]).unwrap();
        assert_eq!(
            degree_counts(&t),
            DegreeCounts {
                legitimate: 2,
                malicious: 0
            }
        );
        let t = Topology::new(1, 1, [(0, 1)]).unwrap();
        assert_eq!(
            degree_counts(&t),
            DegreeCounts {
                legitimate: 0,
                malicious: 1
            }
        );
        let t = Topology::canonical().with_malicious_attached(15);
        assert_eq!(degree_counts(&t).malicious, 225);
    }

    #[test]
    fn parse_round_trip_and_errors() {
        let t = Topology::canonical().with_malicious_attached(2);
        assert_eq!(Topology::parse(&t.to_text(), "rt").unwrap(), t);
        assert!(Topology::parse("edge 0 1\n", "x").is_err());
        assert!(Topology::parse("agents 2 0\nedge 0 x\n", "x").is_err());
        assert!(Topology::parse("agents 2 0\nvertex 0\n", "x").is_err());
        let with_comments = "# header\nagents 2 0\n\nedge 0 1 # link\n";
        assert_eq!(
            Topology::parse(with_comments, "x").unwrap().edges(),
            &[(0, 1)]
        );
    }

    #[test]
    fn monitored_edge_layout() {
        let t = Topology::new(2, 1, [(0, 1), (0, 2), (1, 2)]).unwrap();
        assert_eq!(t.monitored_edges(), vec![(0, 1), (0, 2), (1, 0), (1, 2)]);
        assert_eq!(t.edge_offset(1), 2);
        assert_eq!(t.n_monitored_edges(), 4);
    }

    #[test]
    fn canonical_graph_matches_generator() {
        let generated = Topology::ring_with_chords(15, 8, 2024).unwrap();
        assert_eq!(Topology::canonical(), generated);
    }

    #[test]
    fn canonical_spectral_gap_golden() {
        // Pinned from an independent dense eigensolver run on the same matrix.
        let w = nominal_weight_matrix(&Topology::canonical()).unwrap();
        assert_relative_eq!(w.rho_l, 0.9466317691440699, epsilon = 1e-10);
        assert_eq!(degree_counts(&Topology::canonical()).legitimate, 46);
    }

    #[test]
    fn two_by_two_gap() {
        let m = DMatrix::from_row_slice(2, 2, &[0.75, 0.25, 0.25, 0.75]);
        assert_relative_eq!(spectral_gap(&m), 0.5, epsilon = 1e-12);
    }
}
