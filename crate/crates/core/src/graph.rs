//! Directed communication graph, its Laplacian, and the spectral constants
//! that enter the consensus error bounds.
//!
//! Adjacency follows the in-neighbor convention: `a_ij = 1` means agent `j`
//! sends its state to agent `i` (edge `j → i`). Entries are restricted to
//! `{0, 1}` and the diagonal is zero.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{kron_identity, spectral_norm, Matrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("adjacency row {row} has {len} entries, expected {expected}")]
    NotSquare { row: usize, len: usize, expected: usize },
    #[error("adjacency entry a[{row}][{col}] = {value} is not 0 or 1 (weighted graphs are not supported)")]
    NotBinary { row: usize, col: usize, value: i64 },
    #[error("adjacency diagonal a[{0}][{0}] must be zero")]
    SelfLoop(usize),
}

/// Directed graph over `N ≥ 2` agents with binary adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    num_agents: usize,
    // row-major, a[i * N + j]
    adjacency: Vec<u8>,
}

impl DirectedGraph {
    /// Builds a graph from adjacency rows, rejecting anything but a zero-diagonal
    /// 0/1 square matrix with at least two rows.
    pub fn from_rows<R: AsRef<[i64]>>(rows: &[R]) -> Result<Self, GraphError> {
        let n = rows.len();
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        let mut adjacency = Vec::with_capacity(n * n);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n {
                return Err(GraphError::NotSquare { row: i, len: row.len(), expected: n });
            }
            for (j, &value) in row.iter().enumerate() {
                match value {
                    0 => adjacency.push(0),
                    1 if i == j => return Err(GraphError::SelfLoop(i)),
                    1 => adjacency.push(1),
                    _ => return Err(GraphError::NotBinary { row: i, col: j, value }),
                }
            }
        }
        Ok(Self { num_agents: n, adjacency })
    }

    /// Graph with no edges.
    pub fn empty(num_agents: usize) -> Result<Self, GraphError> {
        let rows = vec![vec![0i64; num_agents]; num_agents];
        Self::from_rows(&rows)
    }

    pub fn num_agents(&self) -> usize {
        self.num_agents
    }

    /// `a_ij`: true when `j` is an in-neighbor of `i`.
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.num_agents + j] == 1
    }

    pub fn in_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_agents).filter(move |&j| self.has_edge(i, j))
    }

    pub fn in_degree(&self, i: usize) -> usize {
        self.in_neighbors(i).count()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().filter(|&&a| a == 1).count()
    }

    pub fn adjacency_matrix(&self) -> Matrix {
        Matrix::from_fn(self.num_agents, self.num_agents, |i, j| {
            f64::from(self.adjacency[i * self.num_agents + j])
        })
    }

    /// Laplacian in exact integer arithmetic, row-major.
    pub fn laplacian_exact(&self) -> Vec<i64> {
        let n = self.num_agents;
        let mut l = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                if self.has_edge(i, j) {
                    l[i * n + j] = -1;
                    l[i * n + i] += 1;
                }
            }
        }
        l
    }

    /// `l_ii = Σ_k a_ik`, `l_ij = -a_ij`.
    pub fn laplacian(&self) -> Matrix {
        let n = self.num_agents;
        let exact = self.laplacian_exact();
        Matrix::from_fn(n, n, |i, j| exact[i * n + j] as f64)
    }

    /// True iff some root reaches every agent along directed edges.
    ///
    /// Breadth-first search from every candidate root. Debug builds cross-check
    /// the answer against the rank of the Laplacian.
    pub fn has_spanning_tree(&self) -> bool {
        let found = (0..self.num_agents).any(|root| self.reaches_all(root));
        debug_assert_eq!(
            found,
            self.laplacian_rank() == self.num_agents - 1,
            "reachability and Laplacian rank disagree"
        );
        found
    }

    fn reaches_all(&self, root: usize) -> bool {
        let n = self.num_agents;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        let mut count = 1;
        while let Some(j) = queue.pop_front() {
            // j → i whenever a_ij = 1
            for i in 0..n {
                if !seen[i] && self.has_edge(i, j) {
                    seen[i] = true;
                    count += 1;
                    queue.push_back(i);
                }
            }
        }
        count == n
    }

    /// Numerical rank of the Laplacian; singular values below `1e-9·σ_max`
    /// count as zero.
    pub fn laplacian_rank(&self) -> usize {
        let sv = self.laplacian().svd(false, false).singular_values;
        let max = sv.iter().copied().fold(0.0, f64::max);
        if max == 0.0 {
            return 0;
        }
        sv.iter().filter(|&&s| s > 1e-9 * max).count()
    }

    pub fn spectral_constants(&self) -> SpectralConstants {
        SpectralConstants {
            rho_l: sq(spectral_norm(&self.laplacian())),
            rho_a: sq(spectral_norm(&self.adjacency_matrix())),
        }
    }

    /// `ℒ ⊗ I_n`.
    pub fn lifted_laplacian(&self, dim: usize) -> Matrix {
        kron_identity(&self.laplacian(), dim)
    }

    /// `𝒜 ⊗ I_n`.
    pub fn lifted_adjacency(&self, dim: usize) -> Matrix {
        kron_identity(&self.adjacency_matrix(), dim)
    }
}

/// Squared spectral norms of the Laplacian and adjacency matrices. The
/// Kronecker lift `⊗ I_n` leaves both unchanged.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConstants {
    pub rho_l: f64,
    pub rho_a: f64,
}

fn sq(x: f64) -> f64 {
    x * x
}

/// `P = I_N - (1/N)·𝟏𝟏ᵀ`.
pub fn disagreement_projector(num_agents: usize) -> Matrix {
    let inv = 1.0 / num_agents as f64;
    Matrix::from_fn(num_agents, num_agents, |i, j| {
        if i == j {
            1.0 - inv
        } else {
            -inv
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;
    use proptest::prelude::*;

    fn paper_graph() -> DirectedGraph {
        DirectedGraph::from_rows(&[[0, 1, 1, 0], [0, 0, 0, 1], [0, 0, 0, 1], [1, 0, 0, 0]]).unwrap()
    }

    #[test]
    fn paper_laplacian() {
        let l = paper_graph().laplacian_exact();
        assert_eq!(l, [2, -1, -1, 0, 0, 1, 0, -1, 0, 0, 1, -1, -1, 0, 0, 1]);
    }

    #[test]
    fn empty_graph_has_zero_laplacian() {
        let g = DirectedGraph::empty(3).unwrap();
        assert!(g.laplacian_exact().iter().all(|&v| v == 0));
        assert!(!g.has_spanning_tree());
        let sc = g.spectral_constants();
        assert_eq!((sc.rho_l, sc.rho_a), (0.0, 0.0));
    }

    #[test]
    fn rejects_invalid_adjacency() {
        assert_eq!(DirectedGraph::from_rows(&[[1, 0], [0, 0]]), Err(GraphError::SelfLoop(0)));
        assert!(matches!(
            DirectedGraph::from_rows(&[[0, 2], [0, 0]]),
            Err(GraphError::NotBinary { value: 2, .. })
        ));
        assert_eq!(DirectedGraph::from_rows(&[[0]]), Err(GraphError::TooFewAgents(1)));
        assert!(matches!(
            DirectedGraph::from_rows(&[vec![0, 1], vec![0]]),
            Err(GraphError::NotSquare { row: 1, .. })
        ));
    }

    #[test]
    fn spanning_tree_examples() {
        assert!(paper_graph().has_spanning_tree());
        assert!(!DirectedGraph::from_rows(&[[0, 0], [0, 0]]).unwrap().has_spanning_tree());
        // chain 1 → 2 → 3
        let chain = DirectedGraph::from_rows(&[[0, 0, 0], [1, 0, 0], [0, 1, 0]]).unwrap();
        assert!(chain.has_spanning_tree());
        // two roots feeding a sink has no spanning tree
        let v = DirectedGraph::from_rows(&[[0, 0, 0], [0, 0, 0], [1, 1, 0]]).unwrap();
        assert!(!v.has_spanning_tree());
    }

    #[test]
    fn paper_graph_zero_is_simple_eigenvalue() {
        assert_eq!(paper_graph().laplacian_rank(), 3);
    }

    #[test]
    fn projector_two_agents() {
        let p = disagreement_projector(2);
        assert_eq!(p.as_slice(), &[0.5, -0.5, -0.5, 0.5]);
    }

    #[test]
    fn bidirectional_pair_spectral_constants() {
        let g = DirectedGraph::from_rows(&[[0, 1], [1, 0]]).unwrap();
        let sc = g.spectral_constants();
        assert!((sc.rho_l - 4.0).abs() < 1e-12);
        assert!((sc.rho_a - 1.0).abs() < 1e-12);
    }

    // Frozen from an independent SVD (numpy) of the 4×4 matrices:
    // σ(ℒ) = {√7, 2, 1, 0}, σ(𝒜) = {√2, √2, 1, 0}.
    #[test]
    fn paper_spectral_constants() {
        let sc = paper_graph().spectral_constants();
        assert!((sc.rho_l - 7.0).abs() < 1e-10, "{}", sc.rho_l);
        assert!((sc.rho_a - 2.0).abs() < 1e-10, "{}", sc.rho_a);
    }

    #[test]
    fn kronecker_lift_preserves_spectral_norm() {
        let g = paper_graph();
        let base = spectral_norm(&g.laplacian());
        for dim in 1..=3 {
            assert!((spectral_norm(&g.lifted_laplacian(dim)) - base).abs() < 1e-10);
        }
    }

    fn arb_graph() -> impl Strategy<Value = DirectedGraph> {
        (2usize..8).prop_flat_map(|n| {
            proptest::collection::vec(proptest::bool::weighted(0.3), n * n).prop_map(move |bits| {
                let rows: Vec<Vec<i64>> = (0..n)
                    .map(|i| (0..n).map(|j| i64::from(i != j && bits[i * n + j])).collect())
                    .collect();
                DirectedGraph::from_rows(&rows).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn laplacian_rows_sum_to_zero(g in arb_graph()) {
            let n = g.num_agents();
            let l = g.laplacian_exact();
            for i in 0..n {
                prop_assert_eq!(l[i * n..(i + 1) * n].iter().sum::<i64>(), 0);
            }
        }

        #[test]
        fn reachability_matches_rank(g in arb_graph()) {
            prop_assert_eq!(g.has_spanning_tree(), g.laplacian_rank() == g.num_agents() - 1);
        }
    }

    proptest! {
        #[test]
        fn projector_is_symmetric_idempotent(n in 1usize..12) {
            let p = disagreement_projector(n);
            prop_assert!((&p - p.transpose()).amax() == 0.0);
            prop_assert!((&p * &p - &p).amax() < 1e-12);
            let ones = Matrix::from_element(n, 1, 1.0);
            prop_assert!((&p * ones).amax() < 1e-12);
            let eig = symmetric_eigenvalues(&p);
            prop_assert!(eig[0].abs() < 1e-12);
            for e in &eig[1..] {
                prop_assert!((e - 1.0).abs() < 1e-12);
            }
        }
    }
}
