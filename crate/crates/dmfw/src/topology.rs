//! Communication graphs and the doubly stochastic gossip matrix built on
//! them.
//!
//! The gossip weights follow the degree rule
//! `W_ij = 1 / (1 + max(d_i, d_j))` on edges, zero off the edge set, and
//! `W_ii = 1 - sum_{j in N(i)} W_ij` on the diagonal. On a connected graph
//! the resulting matrix is symmetric, doubly stochastic, and contracts the
//! disagreement subspace at rate `|lambda_2(W)| < 1`.

use std::collections::BTreeSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::{self, DenseMatrix};
use crate::rng::{self, TAG_TOPOLOGY};
use crate::scalar::Real;

/// Shape of the communication graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TopologyKind {
    Complete,
    Cycle,
    Line,
    Star,
    /// G(n, p) random graph, rebuilt with fresh seeds until connected.
    ErdosRenyi {
        p: f64,
    },
}

/// An undirected, connected, simple graph over agents `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
}

impl Topology {
    /// Validates and stores an edge set: pairs are normalized to
    /// `(min, max)`, self-loops are rejected, and the graph must be
    /// connected.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSize(format!(
                "topology needs at least 2 nodes, got {n}"
            )));
        }
        let mut set = BTreeSet::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::Construction(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::Construction(format!(
                    "edge ({a},{b}) out of range for n={n}"
                )));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let t = Self { n, edges: set };
        if !t.is_connected() {
            return Err(Error::Construction("graph is not connected".into()));
        }
        Ok(t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.n).filter(|&j| self.has_edge(i, j)).collect()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0usize; self.n];
        for &(a, b) in &self.edges {
            d[a] += 1;
            d[b] += 1;
        }
        d
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in self.neighbors(i) {
                if !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count == self.n
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::InvalidArgument("permutation length mismatch".into()));
        }
        Self::new(self.n, self.edges.iter().map(|&(a, b)| (perm[a], perm[b])))
    }

    /// Edge-list text format: first line `n <count>`, then one `i j` line
    /// per edge.
    pub fn to_edge_list(&self) -> String {
        let mut out = format!("n {}\n", self.n);
        for &(a, b) in &self.edges {
            out.push_str(&format!("{a} {b}\n"));
        }
        out
    }

    pub fn from_edge_list(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Construction("empty edge list".into()))?;
        let mut parts = header.split_whitespace();
        if parts.next() != Some("n") {
            return Err(Error::Construction(
                "edge list must start with a `n <count>` line".into(),
            ));
        }
        let n: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Construction("bad node count in edge list header".into()))?;
        let mut edges = Vec::new();
        for line in lines {
            let mut it = line.split_whitespace();
            let a: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Construction(format!("bad edge line: {line:?}")))?;
            let b: usize = it
                .next()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Construction(format!("bad edge line: {line:?}")))?;
            edges.push((a, b));
        }
        Self::new(n, edges)
    }
}

/// Builds a connected topology of the requested shape. The seed only
/// matters for `ErdosRenyi`, which redraws (up to a bounded number of
/// reseeds) until the sample is connected.
pub fn build_topology(kind: TopologyKind, n: usize, seed: u64) -> Result<Topology> {
    if n < 2 {
        return Err(Error::InvalidSize(format!(
            "topology needs at least 2 nodes, got {n}"
        )));
    }
    match kind {
        TopologyKind::Complete => {
            Topology::new(n, (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))))
        }
        TopologyKind::Line => Topology::new(n, (0..n - 1).map(|i| (i, i + 1))),
        TopologyKind::Cycle => Topology::new(n, (0..n).map(|i| (i, (i + 1) % n))),
        TopologyKind::Star => Topology::new(n, (1..n).map(|i| (0, i))),
        TopologyKind::ErdosRenyi { p } => {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::InvalidArgument(format!(
                    "erdos_renyi edge probability must lie in (0,1], got {p}"
                )));
            }
            const MAX_RESEEDS: u64 = 1000;
            for attempt in 0..MAX_RESEEDS {
                let mut rng = rng::substream(seed, &[TAG_TOPOLOGY, attempt]);
                let mut edges = Vec::new();
                for i in 0..n {
                    for j in i + 1..n {
                        if rng.random_range(0.0..1.0) < p {
                            edges.push((i, j));
                        }
                    }
                }
                if let Ok(t) = Topology::new(n, edges) {
                    return Ok(t);
                }
            }
            Err(Error::Construction(format!(
                "erdos_renyi(p={p}) failed to produce a connected graph in {MAX_RESEEDS} reseeds"
            )))
        }
    }
}

/// Symmetric doubly stochastic mixing matrix aligned with a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct GossipMatrix<T> {
    n: usize,
    entries: DenseMatrix<T>,
}

impl<T: Real> GossipMatrix<T> {
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.entries.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[T] {
        self.entries.row(i)
    }

    /// The trivial 1x1 matrix used by the single-agent centralized
    /// baseline.
    pub fn single() -> Self {
        Self {
            n: 1,
            entries: DenseMatrix::identity(1),
        }
    }

    /// `sum_j W_ij rows[j]` with a fixed reduction order (j ascending).
    pub fn weighted_row_sum(&self, i: usize, rows: &[&[T]]) -> Vec<T> {
        debug_assert_eq!(rows.len(), self.n);
        let dim = rows[0].len();
        let mut out = vec![T::zero(); dim];
        for (j, row) in rows.iter().enumerate() {
            let w = self.get(i, j);
            if w != T::zero() {
                linalg::add_scaled(&mut out, w, row);
            }
        }
        out
    }

    /// W x for an n-vector (one scalar per agent).
    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.entries.matvec(x)
    }

    /// A copy with one row and its mirrored column rescaled — a
    /// deliberately broken matrix (row sums off 1, symmetry intact) used
    /// as a negative fixture by the validation suite.
    pub fn scaled_row_fixture(&self, row: usize, factor: T) -> Self {
        let mut entries = self.entries.clone();
        for j in 0..self.n {
            entries.set(row, j, entries.get(row, j) * factor);
            if j != row {
                entries.set(j, row, entries.get(j, row) * factor);
            }
        }
        Self { n: self.n, entries }
    }

    pub fn as_matrix(&self) -> &DenseMatrix<T> {
        &self.entries
    }
}

/// Assembles the gossip matrix from the degree rule. Each unordered pair is
/// computed once and mirrored, so `W_ij == W_ji` holds exactly; diagonal
/// sums run over the sorted off-diagonal values so that relabeling nodes
/// permutes the matrix bit-for-bit.
pub fn build_gossip_matrix<T: Real>(topo: &Topology) -> Result<GossipMatrix<T>> {
    let n = topo.n();
    let deg = topo.degrees();
    let mut m = DenseMatrix::zeros(n, n);
    for (i, j) in topo.edges() {
        let w = T::one() / (T::one() + T::from_usize(deg[i].max(deg[j])).unwrap());
        m.set(i, j, w);
        m.set(j, i, w);
    }
    for i in 0..n {
        let mut offdiag: Vec<T> = (0..n)
            .filter(|&j| j != i)
            .map(|j| m.get(i, j))
            .filter(|w| *w != T::zero())
            .collect();
        offdiag.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let s: T = offdiag.iter().copied().sum();
        m.set(i, i, T::one() - s);
    }
    let g = GossipMatrix { n, entries: m };
    // The degree rule keeps every diagonal entry nonnegative; anything else
    // is a bug worth failing loudly on.
    for i in 0..n {
        if g.get(i, i) < T::zero() {
            return Err(Error::Construction(format!(
                "negative diagonal gossip weight at node {i}"
            )));
        }
    }
    Ok(g)
}

/// `|lambda_2|`: the second-largest eigenvalue magnitude of the symmetric
/// matrix (largest modulus over the non-principal spectrum).
pub fn second_eigenvalue_magnitude<T: Real>(w: &GossipMatrix<T>) -> Result<T> {
    if w.n() == 1 {
        return Ok(T::zero());
    }
    let eig = linalg::symmetric_eigenvalues(w.as_matrix())?;
    let second = eig[1].abs();
    let smallest = eig[eig.len() - 1].abs();
    Ok(second.max(smallest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gossip(kind: TopologyKind, n: usize) -> GossipMatrix<f64> {
        build_gossip_matrix(&build_topology(kind, n, 7).unwrap()).unwrap()
    }

    #[test]
    fn line_of_three_edges() {
        let t = build_topology(TopologyKind::Line, 3, 0).unwrap();
        let edges: Vec<_> = t.edges().collect();
        assert_eq!(edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn paper_shape_edge_counts() {
        assert_eq!(
            build_topology(TopologyKind::Cycle, 7, 0).unwrap().n_edges(),
            7
        );
        assert_eq!(
            build_topology(TopologyKind::Line, 7, 0).unwrap().n_edges(),
            6
        );
        // Simple-graph count for the complete graph: n(n-1)/2.
        assert_eq!(
            build_topology(TopologyKind::Complete, 13, 0)
                .unwrap()
                .n_edges(),
            78
        );
        assert_eq!(
            build_topology(TopologyKind::Complete, 7, 0)
                .unwrap()
                .n_edges(),
            21
        );
        assert_eq!(
            build_topology(TopologyKind::Star, 7, 0).unwrap().n_edges(),
            6
        );
    }

    #[test]
    fn too_small_is_rejected() {
        assert!(matches!(
            build_topology(TopologyKind::Complete, 1, 0),
            Err(Error::InvalidSize(_))
        ));
    }

    #[test]
    fn line3_weights_from_degree_rule() {
        // degrees (1,2,1): W_01 = W_12 = 1/3, diag (2/3, 1/3, 2/3).
        let w = gossip(TopologyKind::Line, 3);
        assert_eq!(w.get(0, 1), 1.0 / 3.0);
        assert_eq!(w.get(1, 2), 1.0 / 3.0);
        assert_eq!(w.get(0, 2), 0.0);
        assert!((w.get(0, 0) - 2.0 / 3.0).abs() < 1e-15);
        assert!((w.get(1, 1) - 1.0 / 3.0).abs() < 1e-15);
        assert!((w.get(2, 2) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn complete_graph_weights_are_uniform() {
        for n in [2usize, 5, 13] {
            let w = gossip(TopologyKind::Complete, n);
            for i in 0..n {
                for j in 0..n {
                    assert!((w.get(i, j) - 1.0 / n as f64).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn two_node_line_splits_evenly() {
        let w = gossip(TopologyKind::Line, 2);
        for i in 0..2 {
            for j in 0..2 {
                assert_eq!(w.get(i, j), 0.5);
            }
        }
    }

    #[test]
    fn second_eigenvalue_examples() {
        // Rank-one doubly stochastic matrices have |lambda_2| = 0.
        assert!(second_eigenvalue_magnitude(&gossip(TopologyKind::Complete, 6)).unwrap() < 1e-10);
        assert!(second_eigenvalue_magnitude(&gossip(TopologyKind::Line, 2)).unwrap() < 1e-10);
        // Cycle(4): circulant with first row (1/3, 1/3, 0, 1/3) has
        // eigenvalues (1 + 2 cos(2 pi k / 4)) / 3, so |lambda_2| = 1/3.
        let slem = second_eigenvalue_magnitude(&gossip(TopologyKind::Cycle, 4)).unwrap();
        assert!((slem - 1.0 / 3.0).abs() < 1e-8, "got {slem}");
    }

    #[test]
    fn edge_list_round_trip() {
        let t = build_topology(TopologyKind::Star, 5, 0).unwrap();
        let text = t.to_edge_list();
        assert!(text.starts_with("n 5\n"));
        let back = Topology::from_edge_list(&text).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn edge_list_rejects_garbage() {
        assert!(Topology::from_edge_list("").is_err());
        assert!(Topology::from_edge_list("m 3\n0 1\n1 2\n").is_err());
        assert!(Topology::from_edge_list("n 3\n0 one\n").is_err());
        // Disconnected.
        assert!(Topology::from_edge_list("n 4\n0 1\n2 3\n").is_err());
    }

    #[test]
    fn erdos_renyi_is_connected_and_deterministic() {
        let a = build_topology(TopologyKind::ErdosRenyi { p: 0.4 }, 9, 42).unwrap();
        let b = build_topology(TopologyKind::ErdosRenyi { p: 0.4 }, 9, 42).unwrap();
        assert_eq!(a, b);
        let c = build_topology(TopologyKind::ErdosRenyi { p: 0.4 }, 9, 43).unwrap();
        // Different seeds will almost surely differ on 36 candidate edges.
        assert_ne!(a, c);
    }

    #[test]
    fn erdos_renyi_rejects_bad_p() {
        assert!(build_topology(TopologyKind::ErdosRenyi { p: 0.0 }, 5, 0).is_err());
        assert!(build_topology(TopologyKind::ErdosRenyi { p: 1.5 }, 5, 0).is_err());
    }

    #[test]
    fn relabeling_permutes_the_matrix_exactly() {
        let t = build_topology(TopologyKind::Star, 6, 0).unwrap();
        let perm = vec![3, 0, 5, 1, 4, 2];
        let tp = t.relabel(&perm).unwrap();
        let w: GossipMatrix<f64> = build_gossip_matrix(&t).unwrap();
        let wp: GossipMatrix<f64> = build_gossip_matrix(&tp).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                assert_eq!(w.get(i, j), wp.get(perm[i], perm[j]));
            }
        }
    }

    #[test]
    fn generic_over_f32() {
        let w: GossipMatrix<f32> =
            build_gossip_matrix(&build_topology(TopologyKind::Cycle, 5, 0).unwrap()).unwrap();
        for i in 0..5 {
            let row_sum: f32 = (0..5).map(|j| w.get(i, j)).sum();
            assert!((row_sum - 1.0).abs() < 1e-6);
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn arb_kind() -> impl Strategy<Value = TopologyKind> {
            prop_oneof![
                Just(TopologyKind::Complete),
                Just(TopologyKind::Cycle),
                Just(TopologyKind::Line),
                Just(TopologyKind::Star),
                (0.2f64..1.0).prop_map(|p| TopologyKind::ErdosRenyi { p }),
            ]
        }

        proptest! {
            #[test]
            fn gossip_invariants_hold_up_to_fifty_agents(
                kind in arb_kind(),
                n in 2usize..=50,
                seed in 0u64..5000,
            ) {
                let topo = build_topology(kind, n, seed).unwrap();
                let w: GossipMatrix<f64> = build_gossip_matrix(&topo).unwrap();
                for i in 0..n {
                    let row: f64 = (0..n).map(|j| w.get(i, j)).sum();
                    prop_assert!((row - 1.0).abs() <= 1e-12);
                    let col: f64 = (0..n).map(|j| w.get(j, i)).sum();
                    prop_assert!((col - 1.0).abs() <= 1e-12);
                    for j in 0..n {
                        prop_assert_eq!(w.get(i, j), w.get(j, i));
                        prop_assert!((0.0..=1.0).contains(&w.get(i, j)));
                        if i != j && !topo.has_edge(i, j) {
                            prop_assert_eq!(w.get(i, j), 0.0);
                        }
                    }
                }
                let slem = second_eigenvalue_magnitude(&w).unwrap();
                prop_assert!(slem < 1.0);
            }
        }
    }
}
