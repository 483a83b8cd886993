//! Communication graphs for both layers and the system matrices derived
//! from them.
//!
//! Followers interact over an undirected connected graph with Laplacian
//! `L`; the leader reaches a nonempty subset of followers, encoded by the
//! diagonal indicator matrix `diag(b_i)`. The closed-loop system matrix is
//! `A = -(L + diag(b_i))`, which is Hurwitz whenever the graph invariants
//! hold.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Tolerance on the spectral abscissa below which a matrix counts as Hurwitz.
pub const TOL_HURWITZ: f64 = 1e-9;

/// Undirected follower graph plus the leader-link indicator vector.
///
/// Indices are 0-based internally; config files use 1-based indices.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentGraph {
    n_agents: usize,
    edges: Vec<(usize, usize)>,
    leader_links: Vec<bool>,
}

impl AgentGraph {
    /// Validates and constructs a graph.
    ///
    /// Rejects self-loops, duplicate or out-of-range edges, disconnected
    /// follower graphs, and graphs with no leader link.
    pub fn new(
        n_agents: usize,
        edges: Vec<(usize, usize)>,
        leader_links: Vec<bool>,
    ) -> Result<Self> {
        if n_agents == 0 {
            return Err(Error::InvalidGraph("graph must have at least one agent".into()));
        }
        if leader_links.len() != n_agents {
            return Err(Error::InvalidGraph(format!(
                "leader_links has {} entries for {} agents",
                leader_links.len(),
                n_agents
            )));
        }
        let mut normalized: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
        for &(i, j) in &edges {
            if i >= n_agents || j >= n_agents {
                return Err(Error::InvalidGraph(format!(
                    "edge ({}, {}) references an index >= {}",
                    i + 1,
                    j + 1,
                    n_agents
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at agent {}", i + 1)));
            }
            let e = (i.min(j), i.max(j));
            if normalized.contains(&e) {
                return Err(Error::InvalidGraph(format!(
                    "duplicate edge ({}, {})",
                    e.0 + 1,
                    e.1 + 1
                )));
            }
            normalized.push(e);
        }
        if !leader_links.iter().any(|&b| b) {
            return Err(Error::InvalidGraph(
                "at least one agent must receive the leader state directly".into(),
            ));
        }
        let graph = Self { n_agents, edges: normalized, leader_links };
        let components = graph.components();
        if components.len() > 1 {
            return Err(Error::Disconnected {
                components: components
                    .into_iter()
                    .map(|c| c.into_iter().map(|i| i + 1).collect())
                    .collect(),
            });
        }
        Ok(graph)
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn leader_links(&self) -> &[bool] {
        &self.leader_links
    }

    /// Connected components of the follower graph, by traversal.
    fn components(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_agents];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        let mut seen = vec![false; self.n_agents];
        let mut components = Vec::new();
        for start in 0..self.n_agents {
            if seen[start] {
                continue;
            }
            let mut component = Vec::new();
            let mut queue = vec![start];
            seen[start] = true;
            while let Some(v) = queue.pop() {
                component.push(v);
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        queue.push(w);
                    }
                }
            }
            component.sort_unstable();
            components.push(component);
        }
        components
    }

    /// Graph Laplacian: `l_ij = -1` on edges, diagonal entries are degrees.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n_agents;
        let mut l = DMatrix::zeros(n, n);
        for &(i, j) in &self.edges {
            l[(i, j)] = -1.0;
            l[(j, i)] = -1.0;
            l[(i, i)] += 1.0;
            l[(j, j)] += 1.0;
        }
        l
    }

    /// Leader-link indicator as a vector of 0/1 entries.
    pub fn leader_vector(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.n_agents,
            self.leader_links.iter().map(|&b| if b { 1.0 } else { 0.0 }),
        )
    }

    /// Closed-loop system matrix `A = -(L + diag(b_i))` and leader input
    /// vector `B = diag(b_i) * 1`.
    ///
    /// The returned `A` is verified Hurwitz; a non-Hurwitz result is only
    /// possible if the graph invariants were bypassed.
    pub fn system_matrix(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let mut a = -self.laplacian();
        let b = self.leader_vector();
        for i in 0..self.n_agents {
            a[(i, i)] -= b[i];
        }
        let (is_hurwitz, abscissa) = hurwitz_check(&a)?;
        if !is_hurwitz {
            return Err(Error::NotHurwitz { abscissa });
        }
        Ok((a, b))
    }
}

/// Whether all eigenvalues of `m` have real part below `-TOL_HURWITZ`,
/// together with the spectral abscissa (max real part).
pub fn hurwitz_check(m: &DMatrix<f64>) -> Result<(bool, f64)> {
    assert_eq!(m.nrows(), m.ncols(), "hurwitz_check expects a square matrix");
    // the zero matrix trips the Schur iteration; its spectrum is {0}
    if m.amax() == 0.0 {
        return Ok((false, 0.0));
    }
    let eigs = nalgebra::linalg::Schur::try_new(m.clone(), 1e-12, 100_000)
        .ok_or_else(|| {
            Error::EigenSolver("Schur iteration did not converge within 100000 steps".into())
        })?
        .complex_eigenvalues();
    let abscissa = eigs
        .iter()
        .map(|e| e.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if !abscissa.is_finite() {
        return Err(Error::EigenSolver(format!(
            "non-finite spectral abscissa {abscissa}"
        )));
    }
    Ok((abscissa < -TOL_HURWITZ, abscissa))
}

/// Physical and auxiliary layer graphs; one virtual agent per follower.
#[derive(Debug, Clone)]
pub struct LayerPair {
    pub physical: AgentGraph,
    pub auxiliary: AgentGraph,
}

impl LayerPair {
    pub fn new(physical: AgentGraph, auxiliary: AgentGraph) -> Result<Self> {
        if physical.n_agents() != auxiliary.n_agents() {
            return Err(Error::InvalidGraph(format!(
                "layer sizes differ: physical {} vs auxiliary {}",
                physical.n_agents(),
                auxiliary.n_agents()
            )));
        }
        Ok(Self { physical, auxiliary })
    }

    /// Auxiliary layer mirroring the physical topology.
    pub fn mirrored(physical: AgentGraph) -> Self {
        let auxiliary = physical.clone();
        Self { physical, auxiliary }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn reference_graph() -> AgentGraph {
        AgentGraph::new(
            5,
            vec![(0, 1), (0, 2), (0, 4), (1, 2), (2, 3)],
            vec![true, false, false, false, false],
        )
        .unwrap()
    }

    #[test]
    fn reference_laplacian_matches() {
        let l = reference_graph().laplacian();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(5, 5, &[
             3.0, -1.0, -1.0,  0.0, -1.0,
            -1.0,  2.0, -1.0,  0.0,  0.0,
            -1.0, -1.0,  3.0, -1.0,  0.0,
             0.0,  0.0, -1.0,  1.0,  0.0,
            -1.0,  0.0,  0.0,  0.0,  1.0,
        ]);
        assert_eq!(l, expected);
    }

    #[test]
    fn reference_system_matrix_matches() {
        let (a, b) = reference_graph().system_matrix().unwrap();
        #[rustfmt::skip]
        let expected = DMatrix::from_row_slice(5, 5, &[
            -4.0,  1.0,  1.0,  0.0,  1.0,
             1.0, -2.0,  1.0,  0.0,  0.0,
             1.0,  1.0, -3.0,  1.0,  0.0,
             0.0,  0.0,  1.0, -1.0,  0.0,
             1.0,  0.0,  0.0,  0.0, -1.0,
        ]);
        assert_eq!(a, expected);
        assert_eq!(b, DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0, 0.0]));
    }

    #[test]
    fn single_follower() {
        let g = AgentGraph::new(1, vec![], vec![true]).unwrap();
        assert_eq!(g.laplacian(), DMatrix::from_element(1, 1, 0.0));
        let (a, b) = g.system_matrix().unwrap();
        assert_eq!(a[(0, 0)], -1.0);
        assert_eq!(b[0], 1.0);
    }

    #[test]
    fn complete_graph_on_three_nodes() {
        let g = AgentGraph::new(3, vec![(0, 1), (0, 2), (1, 2)], vec![true, true, true]).unwrap();
        let l = g.laplacian();
        for i in 0..3 {
            assert_eq!(l[(i, i)], 2.0);
            for j in 0..3 {
                if i != j {
                    assert_eq!(l[(i, j)], -1.0);
                }
                // row sums verified by direct summation
            }
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn laplacian_row_sums_and_symmetry() {
        let g = reference_graph();
        let l = g.laplacian();
        for i in 0..5 {
            assert!(l.row(i).sum().abs() <= 1e-12);
        }
        let (a, _) = g.system_matrix().unwrap();
        assert_eq!(a, a.transpose());
    }

    #[test]
    fn system_matrix_ones_identity() {
        // A*1 = -B, used by the error-coordinate derivation.
        let (a, b) = reference_graph().system_matrix().unwrap();
        let ones = DVector::from_element(5, 1.0);
        let lhs = &a * &ones;
        for i in 0..5 {
            assert!((lhs[i] + b[i]).abs() <= 1e-12);
        }
    }

    #[test]
    fn random_valid_graphs_are_hurwitz() {
        // Chains of varying length with a single leader link: eigenvalue
        // oracle must confirm all eigenvalues strictly negative.
        for n in 1..12usize {
            let edges = (0..n.saturating_sub(1)).map(|i| (i, i + 1)).collect();
            let mut links = vec![false; n];
            links[0] = true;
            let g = AgentGraph::new(n, edges, links).unwrap();
            let (a, _) = g.system_matrix().unwrap();
            let (ok, abscissa) = hurwitz_check(&a).unwrap();
            assert!(ok, "chain of {n} not Hurwitz: abscissa {abscissa}");
        }
    }

    #[test]
    fn disconnected_graph_lists_components() {
        let err = AgentGraph::new(4, vec![(0, 1), (2, 3)], vec![true, false, false, false])
            .unwrap_err();
        match err {
            Error::Disconnected { components } => {
                assert_eq!(components, vec![vec![1, 2], vec![3, 4]]);
            }
            other => panic!("expected Disconnected, got {other:?}"),
        }
    }

    #[test]
    fn rejects_self_loops_duplicates_and_missing_leader() {
        assert!(AgentGraph::new(2, vec![(0, 0)], vec![true, false]).is_err());
        assert!(AgentGraph::new(2, vec![(0, 1), (1, 0)], vec![true, false]).is_err());
        assert!(AgentGraph::new(2, vec![(0, 1)], vec![false, false]).is_err());
        assert!(AgentGraph::new(2, vec![(0, 5)], vec![true, false]).is_err());
    }

    #[test]
    fn hurwitz_check_cases() {
        let zero = DMatrix::<f64>::zeros(3, 3);
        let (ok, _) = hurwitz_check(&zero).unwrap();
        assert!(!ok);

        let neg_i = -DMatrix::<f64>::identity(4, 4);
        let (ok, abscissa) = hurwitz_check(&neg_i).unwrap();
        assert!(ok);
        assert!((abscissa + 1.0).abs() <= 1e-12);

        let (a, _) = reference_graph().system_matrix().unwrap();
        let (ok, _) = hurwitz_check(&a).unwrap();
        assert!(ok);
    }

    #[test]
    fn layer_pair_requires_matching_sizes() {
        let p = reference_graph();
        let aux = AgentGraph::new(2, vec![(0, 1)], vec![true, false]).unwrap();
        assert!(LayerPair::new(p.clone(), aux).is_err());
        let pair = LayerPair::mirrored(p);
        assert_eq!(pair.physical, pair.auxiliary);
    }
}
