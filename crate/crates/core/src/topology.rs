//! Communication graphs for the decentralized protocol.
//!
//! A topology pairs a binary adjacency `S` (unit diagonal) with a sync
//! interval `τ`. `S` is used as an aggregation mask; its spectral mixing
//! quality `ζ` is measured on the Metropolis-Hastings weights built from it.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{second_largest_abs_eigenvalue, LinalgError, Mat};
use crate::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("topology needs at least 2 workers, got {0}")]
    TooFewWorkers(usize),
    #[error("sync interval tau must be at least 1")]
    ZeroTau,
    #[error("unknown topology `{0}` (expected full, grid or ring)")]
    UnknownKind(String),
    #[error("adjacency must be square, symmetric and binary with unit diagonal")]
    BadAdjacency,
    #[error("graph is not connected")]
    Disconnected,
    #[error("task index {index} out of range for {m} workers")]
    IndexOutOfRange { index: usize, m: usize },
    #[error("round index must start at 1")]
    ZeroRound,
    #[error("matrix has {found} columns, topology has {expected} workers")]
    ColumnMismatch { expected: usize, found: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyKind {
    Full,
    Grid,
    Ring,
    /// Built from a caller-supplied adjacency.
    Custom,
}

impl FromStr for TopologyKind {
    type Err = TopologyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "full" => Ok(TopologyKind::Full),
            "grid" => Ok(TopologyKind::Grid),
            "ring" => Ok(TopologyKind::Ring),
            other => Err(TopologyError::UnknownKind(other.to_string())),
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TopologyKind::Full => "full",
            TopologyKind::Grid => "grid",
            TopologyKind::Ring => "ring",
            TopologyKind::Custom => "custom",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Topology<T> {
    kind: TopologyKind,
    m: usize,
    tau: usize,
    adjacency: Vec<Vec<bool>>,
    zeta: T,
}

/// Preset graph on `m` workers with sync interval `tau`.
///
/// `grid` lays the workers out on an `r × c` lattice with `r` the largest
/// divisor of `m` not exceeding `√m`; a prime `m` degenerates to a path.
pub fn build_topology<T: Scalar>(
    kind: TopologyKind,
    m: usize,
    tau: usize,
) -> Result<Topology<T>, TopologyError> {
    if m < 2 {
        return Err(TopologyError::TooFewWorkers(m));
    }
    let mut adj = vec![vec![false; m]; m];
    let mut link = |i: usize, j: usize| {
        adj[i][j] = true;
        adj[j][i] = true;
    };
    match kind {
        TopologyKind::Full => {
            for i in 0..m {
                for j in 0..m {
                    link(i, j);
                }
            }
        }
        TopologyKind::Ring => {
            for i in 0..m {
                link(i, i);
                link(i, (i + 1) % m);
            }
        }
        TopologyKind::Grid => {
            let rows = (1..=m).filter(|r| m.is_multiple_of(*r) && r * r <= m).max().unwrap_or(1);
            let cols = m / rows;
            for r in 0..rows {
                for c in 0..cols {
                    let i = r * cols + c;
                    link(i, i);
                    if c + 1 < cols {
                        link(i, i + 1);
                    }
                    if r + 1 < rows {
                        link(i, i + cols);
                    }
                }
            }
        }
        TopologyKind::Custom => return Err(TopologyError::UnknownKind("custom".into())),
    }
    finish(kind, adj, tau)
}

/// Topology from an explicit symmetric adjacency; self loops are added.
pub fn from_adjacency<T: Scalar>(
    adjacency: Vec<Vec<bool>>,
    tau: usize,
) -> Result<Topology<T>, TopologyError> {
    let m = adjacency.len();
    if m < 2 {
        return Err(TopologyError::TooFewWorkers(m));
    }
    let mut adj = adjacency;
    for (i, row) in adj.iter_mut().enumerate() {
        if row.len() != m {
            return Err(TopologyError::BadAdjacency);
        }
        row[i] = true;
    }
    for i in 0..m {
        for j in 0..i {
            if adj[i][j] != adj[j][i] {
                return Err(TopologyError::BadAdjacency);
            }
        }
    }
    finish(TopologyKind::Custom, adj, tau)
}

fn finish<T: Scalar>(
    kind: TopologyKind,
    adjacency: Vec<Vec<bool>>,
    tau: usize,
) -> Result<Topology<T>, TopologyError> {
    if tau == 0 {
        return Err(TopologyError::ZeroTau);
    }
    if !connected(&adjacency) {
        return Err(TopologyError::Disconnected);
    }
    let zeta = second_largest_abs_eigenvalue(&metropolis(&adjacency))?;
    Ok(Topology {
        kind,
        m: adjacency.len(),
        tau,
        adjacency,
        zeta,
    })
}

fn connected(adj: &[Vec<bool>]) -> bool {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(i) = stack.pop() {
        for (j, &e) in adj[i].iter().enumerate() {
            if e && !seen[j] {
                seen[j] = true;
                stack.push(j);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn metropolis<T: Scalar>(adj: &[Vec<bool>]) -> Mat<T> {
    let m = adj.len();
    let deg: Vec<usize> = (0..m)
        .map(|i| (0..m).filter(|&j| j != i && adj[i][j]).count())
        .collect();
    let mut w = Mat::zeros(m, m);
    for i in 0..m {
        let mut off = T::zero();
        for j in 0..m {
            if i != j && adj[i][j] {
                let x = T::from_usize_lossy(1 + deg[i].max(deg[j])).recip();
                w.set(i, j, x);
                off += x;
            }
        }
        w.set(i, i, T::one() - off);
    }
    w
}

impl<T: Scalar> Topology<T> {
    pub fn kind(&self) -> TopologyKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn tau(&self) -> usize {
        self.tau
    }

    /// Second largest absolute eigenvalue of the Metropolis mixing matrix.
    pub fn zeta(&self) -> T {
        self.zeta
    }

    pub fn adjacent(&self, i: usize, j: usize) -> bool {
        self.adjacency[i][j]
    }

    /// Binary adjacency `S` as a matrix.
    pub fn adjacency(&self) -> Mat<T> {
        Mat::from_fn(self.m, self.m, |i, j| {
            if self.adjacency[i][j] {
                T::one()
            } else {
                T::zero()
            }
        })
    }

    /// Metropolis-Hastings weights derived from `S`.
    pub fn metropolis_weights(&self) -> Mat<T> {
        metropolis(&self.adjacency)
    }

    /// Neighbours of `i` including `i` itself, in increasing order.
    pub fn neighbors(&self, i: usize) -> Vec<usize> {
        (0..self.m).filter(|&j| self.adjacency[i][j]).collect()
    }

    /// Neighbours of `i` excluding `i`.
    pub fn peers(&self, i: usize) -> Vec<usize> {
        (0..self.m)
            .filter(|&j| j != i && self.adjacency[i][j])
            .collect()
    }

    /// Number of directed peer links, `Σ_i |𝒩_i \ {i}|`.
    pub fn directed_edges(&self) -> usize {
        (0..self.m).map(|i| self.peers(i).len()).sum()
    }

    /// `t mod τ = 0`.
    pub fn is_sync_round(&self, t: usize) -> bool {
        t > 0 && t.is_multiple_of(self.tau)
    }

    /// `S` on sync rounds, `I` otherwise.
    pub fn schedule_matrix(&self, t: usize) -> Result<Mat<T>, TopologyError> {
        if t == 0 {
            return Err(TopologyError::ZeroRound);
        }
        Ok(if self.is_sync_round(t) {
            self.adjacency()
        } else {
            Mat::identity(self.m)
        })
    }

    /// `A·Diag([S]_i)`: columns of non-neighbours zeroed.
    pub fn neighbor_aggregate(&self, a: &Mat<T>, i: usize) -> Result<Mat<T>, TopologyError> {
        if i >= self.m {
            return Err(TopologyError::IndexOutOfRange { index: i, m: self.m });
        }
        if a.cols() != self.m {
            return Err(TopologyError::ColumnMismatch {
                expected: self.m,
                found: a.cols(),
            });
        }
        let mut out = a.clone();
        for j in 0..self.m {
            if !self.adjacency[i][j] {
                out.col_mut(j).iter_mut().for_each(|x| *x = T::zero());
            }
        }
        Ok(out)
    }
}

/// `A·Diag([S]_i)` for an arbitrary square `S`: column `j` scaled by `S_ij`.
pub fn aggregate_with<T: Scalar>(a: &Mat<T>, s: &Mat<T>, i: usize) -> Result<Mat<T>, TopologyError> {
    let m = s.rows();
    if !s.is_square() || a.cols() != m {
        return Err(TopologyError::ColumnMismatch {
            expected: m,
            found: a.cols(),
        });
    }
    if i >= m {
        return Err(TopologyError::IndexOutOfRange { index: i, m });
    }
    let mut out = a.clone();
    for j in 0..m {
        let k = s.get(i, j);
        out.col_mut(j).iter_mut().for_each(|x| *x *= k);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_graph_mixes_perfectly() {
        let t = build_topology::<f64>(TopologyKind::Full, 4, 1).unwrap();
        assert_eq!(t.zeta(), 0.0);
        assert!(t.adjacency().as_slice().iter().all(|&x| x == 1.0));
    }

    #[test]
    fn ring_of_four() {
        let t = build_topology::<f64>(TopologyKind::Ring, 4, 1).unwrap();
        assert!((t.zeta() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(t.neighbors(0), vec![0, 1, 3]);
        assert_eq!(t.directed_edges(), 8);
    }

    #[test]
    fn zeta_ordering_and_growth() {
        let z = |k, m| build_topology::<f64>(k, m, 1).unwrap().zeta();
        let (f, g, r) = (
            z(TopologyKind::Full, 16),
            z(TopologyKind::Grid, 16),
            z(TopologyKind::Ring, 16),
        );
        assert!(f < g && g < r, "{f} {g} {r}");
        assert!(z(TopologyKind::Ring, 32) > z(TopologyKind::Ring, 8));
    }

    #[test]
    fn grid_shape() {
        let t = build_topology::<f64>(TopologyKind::Grid, 6, 1).unwrap();
        // 2 × 3 lattice: corner 0 touches 1 and 3.
        assert_eq!(t.peers(0), vec![1, 3]);
        assert_eq!(t.peers(4), vec![1, 3, 5]);
    }

    #[test]
    fn schedule_rule() {
        let t = build_topology::<f64>(TopologyKind::Ring, 5, 2).unwrap();
        assert_eq!(t.schedule_matrix(2).unwrap(), t.adjacency());
        assert_eq!(t.schedule_matrix(3).unwrap(), Mat::identity(5));
        assert!(t.schedule_matrix(0).is_err());
    }

    #[test]
    fn aggregate_masks() {
        let a = Mat::from_fn(2, 3, |r, c| (r * 3 + c + 1) as f64);
        let ring = build_topology::<f64>(TopologyKind::Ring, 3, 1).unwrap();
        assert_eq!(ring.neighbor_aggregate(&a, 1).unwrap(), a);
        let path = from_adjacency::<f64>(
            vec![
                vec![false, true, false],
                vec![true, false, true],
                vec![false, true, false],
            ],
            1,
        )
        .unwrap();
        let masked = path.neighbor_aggregate(&a, 0).unwrap();
        assert_eq!(masked.col(2), &[0.0, 0.0]);
        assert_eq!(masked.col(1), a.col(1));
        assert!(path.neighbor_aggregate(&a, 3).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert_eq!(
            build_topology::<f64>(TopologyKind::Ring, 1, 1),
            Err(TopologyError::TooFewWorkers(1))
        );
        assert_eq!(
            build_topology::<f64>(TopologyKind::Ring, 4, 0),
            Err(TopologyError::ZeroTau)
        );
        assert_eq!(
            from_adjacency::<f64>(vec![vec![true, false], vec![false, true]], 1),
            Err(TopologyError::Disconnected)
        );
        assert!("star".parse::<TopologyKind>().is_err());
    }
}
