//! Local-communication graph: generation, mixing matrices and the spectral
//! quantities that set consensus speed.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::OnceLock;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};

/// Connectivity retries before Erdős–Rényi generation gives up.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

/// Connected, undirected, loop-free graph stored as sorted adjacency lists.
///
/// The Laplacian spectrum is computed on first request and cached.
#[derive(Debug, Clone)]
pub struct SensorGraph {
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
    d_max: usize,
    spectrum: OnceLock<Vec<f64>>,
}

impl PartialEq for SensorGraph {
    fn eq(&self, other: &Self) -> bool {
        self.adjacency == other.adjacency
    }
}

impl SensorGraph {
    /// Builds a graph from unordered pairs. Duplicates are merged; self-loops,
    /// out-of-range endpoints and disconnected graphs are rejected.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if n == 0 {
            return Err(invalid("graph needs at least one node"));
        }
        let mut adjacency = vec![Vec::new(); n];
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(invalid(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if i == j {
                return Err(invalid(format!("self-loop at node {i}")));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        let graph = Self::from_adjacency(adjacency);
        if !graph.is_connected() {
            return Err(invalid("graph is not connected"));
        }
        Ok(graph)
    }

    fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let edge_count = adjacency.iter().map(Vec::len).sum::<usize>() / 2;
        let d_max = adjacency.iter().map(Vec::len).max().unwrap_or(0);
        Self {
            adjacency,
            edge_count,
            d_max,
            spectrum: OnceLock::new(),
        }
    }

    pub fn complete(n: usize) -> Result<Self> {
        Self::from_edges(n, (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))))
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::from_edges(n, (1..n).map(|i| (i - 1, i)))
    }

    /// `G(n, p_edge)`, resampled until connected.
    pub fn erdos_renyi(n: usize, p_edge: f64, seed: u64) -> Result<Self> {
        if n < 2 {
            return Err(invalid("Erdős–Rényi graph needs n >= 2"));
        }
        if !(p_edge > 0.0 && p_edge <= 1.0) {
            return Err(invalid(format!("edge probability must lie in (0, 1], got {p_edge}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_GENERATION_ATTEMPTS {
            let mut adjacency = vec![Vec::new(); n];
            for i in 0..n {
                for j in (i + 1)..n {
                    if rng.random::<f64>() < p_edge {
                        adjacency[i].push(j);
                        adjacency[j].push(i);
                    }
                }
            }
            let graph = Self::from_adjacency(adjacency);
            if graph.is_connected() {
                return Ok(graph);
            }
        }
        Err(Error::GenerationFailure(format!(
            "no connected G({n}, {p_edge}) sample in {MAX_GENERATION_ATTEMPTS} attempts; edge probability too small"
        )))
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn d_max(&self) -> usize {
        self.d_max
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count as f64 / self.n() as f64
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(i, nbrs)| nbrs.iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
    }

    fn is_connected(&self) -> bool {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &v in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut l = DMatrix::zeros(n, n);
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            l[(i, i)] = nbrs.len() as f64;
            for &j in nbrs {
                l[(i, j)] = -1.0;
            }
        }
        l
    }

    /// Laplacian eigenvalues in ascending order.
    pub fn laplacian_spectrum(&self) -> &[f64] {
        self.spectrum.get_or_init(|| {
            let mut values: Vec<f64> = self.laplacian().symmetric_eigenvalues().iter().copied().collect();
            values.sort_by(f64::total_cmp);
            values
        })
    }

    /// Second-smallest Laplacian eigenvalue (0 for a single node).
    pub fn algebraic_connectivity(&self) -> f64 {
        self.laplacian_spectrum().get(1).copied().unwrap_or(0.0)
    }

    /// `W = I - L / d_max`; the identity for a single node.
    pub fn consensus_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        if self.d_max == 0 {
            return DMatrix::identity(n, n);
        }
        DMatrix::identity(n, n) - self.laplacian() / self.d_max as f64
    }

    /// `out = W y`, computed from the adjacency lists.
    pub fn consensus_step(&self, y: &[f64], out: &mut [f64]) {
        let inv = if self.d_max == 0 { 0.0 } else { 1.0 / self.d_max as f64 };
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            let yi = y[i];
            let pull: f64 = nbrs.iter().map(|&j| y[j] - yi).sum();
            out[i] = yi + inv * pull;
        }
    }

    pub fn metropolis_weights(&self) -> MetropolisWeights {
        let rows = self
            .adjacency
            .iter()
            .map(|nbrs| {
                let di = nbrs.len();
                let off: Vec<(usize, f64)> = nbrs
                    .iter()
                    .map(|&j| (j, 1.0 / di.max(self.adjacency[j].len()) as f64))
                    .collect();
                let diag = 1.0 - off.iter().map(|(_, c)| c).sum::<f64>();
                (diag, off)
            })
            .collect();
        MetropolisWeights { rows }
    }

    /// Second-largest eigenvalue modulus of the consensus matrix.
    pub fn slem(&self) -> Result<f64> {
        if self.n() == 1 {
            return Ok(0.0);
        }
        let spectrum = self.laplacian_spectrum();
        if spectrum.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite Laplacian eigenvalue".into()));
        }
        let d = self.d_max as f64;
        let second = (1.0 - spectrum[1] / d).abs();
        let last = (1.0 - spectrum[spectrum.len() - 1] / d).abs();
        Ok(second.max(last))
    }

    /// One `i j` pair per line, 0-based indices.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::with_capacity(self.edge_count * 10);
        for (i, j) in self.edges() {
            let _ = writeln!(out, "{i} {j}");
        }
        out
    }

    /// Parses an edge list; the node count is one past the largest index.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn parse_edge_list(text: &str) -> Result<Self> {
        let mut edges = Vec::new();
        let mut max_index = 0;
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<usize> {
                tok.ok_or_else(|| Error::Parse(format!("line {}: expected `i j`", lineno + 1)))?
                    .parse::<usize>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
            };
            let i = parse(parts.next())?;
            let j = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(Error::Parse(format!("line {}: trailing tokens", lineno + 1)));
            }
            max_index = max_index.max(i).max(j);
            edges.push((i, j));
        }
        if edges.is_empty() {
            return Err(Error::Parse("edge list is empty".into()));
        }
        Self::from_edges(max_index + 1, edges)
    }

    pub fn read_edge_list(path: &Path) -> Result<Self> {
        Self::parse_edge_list(&std::fs::read_to_string(path)?)
    }

    pub fn write_edge_list(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_edge_list())?;
        Ok(())
    }
}

/// Symmetric doubly stochastic weights `c_ij = 1 / max(|N_i|, |N_j|)` on
/// edges, with the diagonal taking the remaining mass.
#[derive(Debug, Clone, PartialEq)]
pub struct MetropolisWeights {
    rows: Vec<(f64, Vec<(usize, f64)>)>,
}

impl MetropolisWeights {
    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.rows[i].0
    }

    pub fn neighbor_weights(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i].1
    }

    /// `out = C v`.
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        for (i, (diag, off)) in self.rows.iter().enumerate() {
            out[i] = diag * v[i] + off.iter().map(|&(j, c)| c * v[j]).sum::<f64>();
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut c = DMatrix::zeros(n, n);
        for (i, (diag, off)) in self.rows.iter().enumerate() {
            c[(i, i)] = *diag;
            for &(j, w) in off {
                c[(i, j)] = w;
            }
        }
        c
    }
}

/// Smallest `t >= 1` with `rho^t <= delta`: the first power at which the
/// consensus matrix is within `delta` of its limit in spectral norm.
pub fn switching_time(rho: f64, delta: f64) -> Result<u64> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::NoConvergence(format!(
            "consensus does not converge (second-largest eigenvalue modulus {rho})"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(invalid(format!("delta must lie in (0, 1], got {delta}")));
    }
    if rho == 0.0 {
        return Ok(1);
    }
    let estimate = (delta.ln() / rho.ln()).ceil();
    let mut t = if estimate.is_finite() {
        estimate.max(1.0) as u64
    } else {
        1
    };
    // correct the logarithm's rounding against the defining inequality
    while t > 1 && rho.powi((t - 1) as i32) <= delta {
        t -= 1;
    }
    while rho.powi(t as i32) > delta {
        t += 1;
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_malformed_graphs() {
        assert!(SensorGraph::from_edges(3, [(0, 0)]).is_err());
        assert!(SensorGraph::from_edges(3, [(0, 3)]).is_err());
        assert!(SensorGraph::from_edges(3, [(0, 1)]).is_err());
        assert!(SensorGraph::from_edges(0, []).is_err());
    }

    #[test]
    fn duplicate_edges_merge() {
        let g = SensorGraph::from_edges(2, [(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edge_count(), 1);
    }

    #[test]
    fn two_node_swap() {
        let g = SensorGraph::path(2).unwrap();
        let mut out = [0.0; 2];
        g.consensus_step(&[1.5, -2.0], &mut out);
        assert_eq!(out, [-2.0, 1.5]);
        assert!((g.slem().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(
            switching_time(g.slem().unwrap().max(1.0), 0.5).unwrap_err().category(),
            "no-convergence"
        );
    }

    #[test]
    fn triangle_step() {
        let g = SensorGraph::complete(3).unwrap();
        let mut out = [0.0; 3];
        g.consensus_step(&[3.0, 0.0, 0.0], &mut out);
        assert_eq!(out, [0.0, 1.5, 1.5]);
    }

    #[test]
    fn metropolis_on_path() {
        let c = SensorGraph::path(3).unwrap().metropolis_weights().to_dense();
        let expected = DMatrix::from_row_slice(3, 3, &[0.5, 0.5, 0.0, 0.5, 0.0, 0.5, 0.0, 0.5, 0.5]);
        assert_eq!(c, expected);
    }

    #[test]
    fn single_node_graph() {
        let g = SensorGraph::complete(1).unwrap();
        assert_eq!(g.d_max(), 0);
        assert_eq!(g.slem().unwrap(), 0.0);
        assert_eq!(g.metropolis_weights().self_weight(0), 1.0);
        assert_eq!(g.consensus_matrix(), DMatrix::identity(1, 1));
    }

    #[test]
    fn switching_time_exact_powers() {
        assert_eq!(switching_time(0.5, 0.25).unwrap(), 2);
        assert_eq!(switching_time(0.5, 0.5).unwrap(), 1);
        assert_eq!(switching_time(0.3, 1.0).unwrap(), 1);
        assert_eq!(switching_time(0.0, 1e-9).unwrap(), 1);
        assert!(switching_time(0.5, 0.0).is_err());
        assert!(switching_time(0.5, 1.5).is_err());
    }

    #[test]
    fn edge_list_round_trip() {
        let g = SensorGraph::erdos_renyi(30, 0.2, 11).unwrap();
        let back = SensorGraph::parse_edge_list(&g.to_edge_list()).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn edge_list_parse_errors() {
        assert_eq!(SensorGraph::parse_edge_list("0 x\n").unwrap_err().category(), "parse");
        assert_eq!(SensorGraph::parse_edge_list("0 1 2\n").unwrap_err().category(), "parse");
        assert_eq!(
            SensorGraph::parse_edge_list("# nothing\n").unwrap_err().category(),
            "parse"
        );
        let g = SensorGraph::parse_edge_list("# header\n0 1\n\n1 2\n").unwrap();
        assert_eq!(g.n(), 3);
    }

    #[test]
    fn sparse_generation_fails_loudly() {
        let err = SensorGraph::erdos_renyi(200, 1e-4, 1).unwrap_err();
        assert_eq!(err.category(), "generation-failure");
    }
}
