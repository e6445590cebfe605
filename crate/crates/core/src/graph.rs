//! Weighted covariate graphs and their normalized Laplacians.
//!
//! The Laplacian of a weighted undirected graph has unit diagonal on every
//! vertex with positive degree and `-w(u,v) / sqrt(d_u d_v)` between adjacent
//! vertices. Isolated vertices get an all-zero row and column, so they carry
//! no smoothness penalty. The sign-adjusted variant multiplies each
//! off-diagonal entry by `sign_u * sign_v`; a zero sign removes the coupling
//! but keeps the diagonal, which keeps the matrix positive semi-definite.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected graph over `p` covariates with nonnegative edge weights.
///
/// Edges are stored once with `u < v`, sorted, and zero-weight edges are
/// dropped at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    p: usize,
    edges: Vec<Edge>,
    degrees: Vec<f64>,
    adjacency: Vec<Vec<(usize, f64)>>,
}

impl WeightedGraph {
    /// Builds a graph from `(u, v, weight)` triples.
    ///
    /// Self-loops, negative or non-finite weights, out-of-range vertices and
    /// repeated pairs (in either orientation) are rejected.
    pub fn new(p: usize, edge_list: &[(usize, usize, f64)]) -> Result<Self> {
        let mut seen = HashSet::with_capacity(edge_list.len());
        let mut edges = Vec::with_capacity(edge_list.len());
        for &(a, b, weight) in edge_list {
            for index in [a, b] {
                if index >= p {
                    return Err(Error::VertexOutOfRange { index, p });
                }
            }
            if a == b {
                return Err(Error::SelfLoop(a));
            }
            if !weight.is_finite() || weight < 0.0 {
                return Err(Error::InvalidWeight { u: a, v: b, weight });
            }
            if weight == 0.0 {
                continue;
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((u, v)) {
                return Err(Error::DuplicateEdge(u, v));
            }
            edges.push(Edge { u, v, weight });
        }
        edges.sort_by_key(|e| (e.u, e.v));

        let mut degrees = vec![0.0; p];
        let mut adjacency = vec![Vec::new(); p];
        for e in &edges {
            degrees[e.u] += e.weight;
            degrees[e.v] += e.weight;
            adjacency[e.u].push((e.v, e.weight));
            adjacency[e.v].push((e.u, e.weight));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(v, _)| v);
        }
        Ok(Self {
            p,
            edges,
            degrees,
            adjacency,
        })
    }

    /// Graph with `p` vertices and no edges.
    pub fn empty(p: usize) -> Self {
        Self {
            p,
            edges: Vec::new(),
            degrees: vec![0.0; p],
            adjacency: vec![Vec::new(); p],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degrees
    }

    pub fn degree(&self, u: usize) -> f64 {
        self.degrees[u]
    }

    pub fn neighbors(&self, u: usize) -> &[(usize, f64)] {
        &self.adjacency[u]
    }

    pub fn is_isolated(&self, u: usize) -> bool {
        self.degrees[u] == 0.0
    }

    /// Largest edge weight, 0 for an edgeless graph.
    pub fn max_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.weight).fold(0.0, f64::max)
    }

    /// Relabels vertex `u` as `perm[u]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        check_dim("permutation length", self.p, perm.len())?;
        let triples: Vec<_> = self
            .edges
            .iter()
            .map(|e| (perm[e.u], perm[e.v], e.weight))
            .collect();
        Self::new(self.p, &triples)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaplacianKind {
    Standard,
    SignAdjusted,
    /// The identity matrix; turns the smoothness penalty into a ridge penalty.
    Identity,
}

/// Symmetric `p x p` penalty matrix stored as a diagonal plus sparse
/// off-diagonal rows. Use [`LaplacianMatrix::to_dense`] for spectral work.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplacianMatrix {
    kind: LaplacianKind,
    diag: Vec<f64>,
    off_diag: Vec<Vec<(usize, f64)>>,
    signs: Option<Vec<i8>>,
    max_edge_weight: f64,
    /// `s_u sqrt(d_u)`; spans the null space on each connected component
    /// whose signs are all nonzero.
    null_direction: Vec<f64>,
}

impl LaplacianMatrix {
    pub fn identity(p: usize) -> Self {
        Self {
            kind: LaplacianKind::Identity,
            diag: vec![1.0; p],
            off_diag: vec![Vec::new(); p],
            signs: None,
            max_edge_weight: 0.0,
            null_direction: vec![0.0; p],
        }
    }

    pub fn p(&self) -> usize {
        self.diag.len()
    }

    pub fn kind(&self) -> LaplacianKind {
        self.kind
    }

    pub fn signs(&self) -> Option<&[i8]> {
        self.signs.as_deref()
    }

    pub fn max_edge_weight(&self) -> f64 {
        self.max_edge_weight
    }

    pub fn diag(&self, u: usize) -> f64 {
        self.diag[u]
    }

    /// Nonzero off-diagonal entries `(v, L(u, v))` of row `u`.
    pub fn row(&self, u: usize) -> &[(usize, f64)] {
        &self.off_diag[u]
    }

    pub fn entry(&self, u: usize, v: usize) -> f64 {
        if u == v {
            return self.diag[u];
        }
        self.off_diag[u]
            .iter()
            .find(|&&(w, _)| w == v)
            .map_or(0.0, |&(_, x)| x)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let p = self.p();
        let mut m = DMatrix::zeros(p, p);
        for u in 0..p {
            m[(u, u)] = self.diag[u];
            for &(v, x) in &self.off_diag[u] {
                m[(u, v)] = x;
            }
        }
        m
    }

    /// `(L beta)_u` for one row.
    pub fn row_dot(&self, u: usize, beta: &[f64]) -> f64 {
        self.diag[u] * beta[u]
            + self.off_diag[u]
                .iter()
                .map(|&(v, x)| x * beta[v])
                .sum::<f64>()
    }

    pub fn apply(&self, beta: &[f64]) -> Result<Vec<f64>> {
        check_dim("coefficient vector", self.p(), beta.len())?;
        Ok((0..self.p()).map(|u| self.row_dot(u, beta)).collect())
    }

    /// `beta^T L beta`, evaluated over the stored nonzeros only.
    pub fn quadratic_form(&self, beta: &[f64]) -> Result<f64> {
        check_dim("coefficient vector", self.p(), beta.len())?;
        Ok(self.quadratic_form_unchecked(beta))
    }

    pub(crate) fn quadratic_form_unchecked(&self, beta: &[f64]) -> f64 {
        let mut total = 0.0;
        for u in 0..self.p() {
            let bu = beta[u];
            if bu == 0.0 {
                continue;
            }
            total += self.diag[u] * bu * bu;
            for &(v, x) in &self.off_diag[u] {
                total += x * bu * beta[v];
            }
        }
        total
    }

    /// Connected components of the off-diagonal pattern with at least two
    /// vertices, each paired with the restriction of the null direction.
    pub(crate) fn coupled_groups(&self) -> Vec<(Vec<usize>, Vec<f64>)> {
        let p = self.p();
        let mut seen = vec![false; p];
        let mut groups = Vec::new();
        for start in 0..p {
            if seen[start] || self.off_diag[start].is_empty() {
                continue;
            }
            seen[start] = true;
            let mut members = vec![start];
            let mut k = 0;
            while k < members.len() {
                for &(v, _) in &self.off_diag[members[k]] {
                    if !seen[v] {
                        seen[v] = true;
                        members.push(v);
                    }
                }
                k += 1;
            }
            members.sort_unstable();
            let dir = members.iter().map(|&u| self.null_direction[u]).collect();
            groups.push((members, dir));
        }
        groups
    }

    /// Smallest and largest eigenvalues of the dense matrix.
    pub fn extreme_eigenvalues(&self) -> (f64, f64) {
        extreme_eigenvalues(&self.to_dense())
    }

    /// Applies the vertex relabeling `u -> perm[u]` to rows and columns.
    pub fn permute(&self, perm: &[usize]) -> Result<Self> {
        let p = self.p();
        check_dim("permutation length", p, perm.len())?;
        let mut diag = vec![0.0; p];
        let mut null_direction = vec![0.0; p];
        let mut off_diag = vec![Vec::new(); p];
        for u in 0..p {
            diag[perm[u]] = self.diag[u];
            null_direction[perm[u]] = self.null_direction[u];
            off_diag[perm[u]] = self.off_diag[u]
                .iter()
                .map(|&(v, x)| (perm[v], x))
                .collect::<Vec<_>>();
            off_diag[perm[u]].sort_by_key(|&(v, _)| v);
        }
        let signs = self.signs.as_ref().map(|s| {
            let mut out = vec![0; p];
            for u in 0..p {
                out[perm[u]] = s[u];
            }
            out
        });
        Ok(Self {
            kind: self.kind,
            diag,
            off_diag,
            signs,
            max_edge_weight: self.max_edge_weight,
            null_direction,
        })
    }
}

/// Normalized Laplacian of `g`.
pub fn laplacian(g: &WeightedGraph) -> LaplacianMatrix {
    build(g, None)
}

/// Sign-adjusted Laplacian `L*`; `signs` must take values in {-1, 0, 1}.
pub fn signed_laplacian(g: &WeightedGraph, signs: &[i8]) -> Result<LaplacianMatrix> {
    check_dim("sign vector", g.p(), signs.len())?;
    if let Some(bad) = signs.iter().find(|s| !(-1..=1).contains(*s)) {
        return Err(Error::InvalidArgument(format!(
            "sign values must be -1, 0 or 1, got {bad}"
        )));
    }
    Ok(build(g, Some(signs)))
}

fn build(g: &WeightedGraph, signs: Option<&[i8]>) -> LaplacianMatrix {
    let p = g.p();
    let diag = (0..p)
        .map(|u| if g.is_isolated(u) { 0.0 } else { 1.0 })
        .collect();
    let off_diag = (0..p)
        .map(|u| {
            g.neighbors(u)
                .iter()
                .filter_map(|&(v, w)| {
                    let sign = signs.map_or(1.0, |s| f64::from(s[u] * s[v]));
                    if sign == 0.0 {
                        return None;
                    }
                    Some((v, -sign * w / (g.degree(u) * g.degree(v)).sqrt()))
                })
                .collect()
        })
        .collect();
    LaplacianMatrix {
        kind: if signs.is_some() {
            LaplacianKind::SignAdjusted
        } else {
            LaplacianKind::Standard
        },
        diag,
        off_diag,
        signs: signs.map(<[i8]>::to_vec),
        max_edge_weight: g.max_weight(),
        null_direction: (0..p)
            .map(|u| signs.map_or(1.0, |s| f64::from(s[u])) * g.degree(u).sqrt())
            .collect(),
    }
}

/// Smallest and largest eigenvalues of a symmetric matrix; `(0, 0)` when empty.
pub fn extreme_eigenvalues(m: &DMatrix<f64>) -> (f64, f64) {
    if m.nrows() == 0 {
        return (0.0, 0.0);
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    let max = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    (min, max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_graph(rng: &mut ChaCha8Rng, p: usize, unit: bool) -> WeightedGraph {
        let mut triples = Vec::new();
        for u in 0..p {
            for v in (u + 1)..p {
                if rng.random_bool(0.4) {
                    let w = if unit { 1.0 } else { rng.random_range(0.05..3.0) };
                    triples.push((u, v, w));
                }
            }
        }
        WeightedGraph::new(p, &triples).unwrap()
    }

    /// Edge-sum form of the (sign-adjusted) smoothness penalty.
    fn edge_sum(g: &WeightedGraph, beta: &[f64], signs: Option<&[i8]>) -> f64 {
        g.edges()
            .iter()
            .map(|e| {
                let (du, dv) = (g.degree(e.u), g.degree(e.v));
                let (su, sv) = signs.map_or((1.0, 1.0), |s| (s[e.u] as f64, s[e.v] as f64));
                if su * sv == 0.0 {
                    e.weight * (beta[e.u].powi(2) / du + beta[e.v].powi(2) / dv)
                } else {
                    e.weight * (su * beta[e.u] / du.sqrt() - sv * beta[e.v] / dv.sqrt()).powi(2)
                }
            })
            .sum()
    }

    #[test]
    fn single_unit_edge_degrees() {
        let g = WeightedGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(g.degrees(), &[1.0, 1.0]);
    }

    #[test]
    fn reversed_pair_is_duplicate() {
        let err = WeightedGraph::new(2, &[(0, 1, 1.0), (1, 0, 1.0)]).unwrap_err();
        assert_eq!(err, Error::DuplicateEdge(0, 1));
    }

    #[test]
    fn degrees_are_weight_sums() {
        let g = WeightedGraph::new(3, &[(0, 1, 0.5), (1, 2, 0.5)]).unwrap();
        assert_eq!(g.degrees(), &[0.5, 1.0, 0.5]);
    }

    #[test]
    fn construction_errors() {
        assert_eq!(
            WeightedGraph::new(2, &[(1, 1, 1.0)]).unwrap_err(),
            Error::SelfLoop(1)
        );
        assert!(matches!(
            WeightedGraph::new(2, &[(0, 1, -1.0)]),
            Err(Error::InvalidWeight { .. })
        ));
        assert!(matches!(
            WeightedGraph::new(2, &[(0, 2, 1.0)]),
            Err(Error::VertexOutOfRange { index: 2, p: 2 })
        ));
        assert!(matches!(
            WeightedGraph::new(2, &[(0, 1, f64::NAN)]),
            Err(Error::InvalidWeight { .. })
        ));
    }

    #[test]
    fn zero_weight_edges_dropped() {
        let g = WeightedGraph::new(3, &[(0, 1, 0.0), (1, 2, 2.0)]).unwrap();
        assert_eq!(g.edges().len(), 1);
        assert!(g.is_isolated(0));
        assert_eq!(g.edges()[0], Edge { u: 1, v: 2, weight: 2.0 });
    }

    #[test]
    fn two_node_laplacian() {
        let g = WeightedGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        let l = laplacian(&g).to_dense();
        assert_eq!(l, DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]));
        let (min, max) = laplacian(&g).extreme_eigenvalues();
        assert_abs_diff_eq!(min, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(max, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn isolated_vertex_row_is_zero() {
        let g = WeightedGraph::new(3, &[(0, 1, 1.0)]).unwrap();
        let l = laplacian(&g).to_dense();
        for k in 0..3 {
            assert_eq!(l[(2, k)], 0.0);
            assert_eq!(l[(k, 2)], 0.0);
        }
    }

    #[test]
    fn edgeless_graph_has_zero_spectrum() {
        let l = laplacian(&WeightedGraph::empty(4));
        assert_eq!(l.extreme_eigenvalues(), (0.0, 0.0));
    }

    #[test]
    fn star_spectrum() {
        let g = WeightedGraph::new(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        let l = laplacian(&g);
        for v in 1..4 {
            assert_abs_diff_eq!(l.entry(0, v), -1.0 / 3f64.sqrt(), epsilon = 1e-15);
        }
        let mut eig: Vec<f64> = SymmetricEigen::new(l.to_dense())
            .eigenvalues
            .iter()
            .copied()
            .collect();
        eig.sort_by(f64::total_cmp);
        for (got, want) in eig.iter().zip([0.0, 1.0, 1.0, 2.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-10);
        }
    }

    #[test]
    fn path_graph_extremes() {
        let g = WeightedGraph::new(4, &[(0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let (min, max) = laplacian(&g).extreme_eigenvalues();
        assert_abs_diff_eq!(min, 0.0, epsilon = 1e-10);
        assert!(max <= 2.0 + 1e-10);
        // bipartite graphs attain 2
        assert_abs_diff_eq!(max, 2.0, epsilon = 1e-10);
    }

    #[test]
    fn signed_laplacian_cases() {
        let g = WeightedGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        let plus = signed_laplacian(&g, &[1, 1]).unwrap();
        assert_eq!(plus.to_dense(), laplacian(&g).to_dense());
        let flipped = signed_laplacian(&g, &[1, -1]).unwrap().to_dense();
        assert_eq!(flipped, DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]));
        assert!(matches!(
            signed_laplacian(&g, &[1]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(signed_laplacian(&g, &[2, 1]).is_err());
    }

    #[test]
    fn zero_sign_removes_coupling_and_stays_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let p = rng.random_range(2..9);
            let g = random_graph(&mut rng, p, false);
            let mut signs: Vec<i8> = (0..p).map(|_| rng.random_range(-1..=1)).collect();
            let zero = rng.random_range(0..p);
            signs[zero] = 0;
            let l = signed_laplacian(&g, &signs).unwrap();
            assert!(l.row(zero).is_empty());
            for v in 0..p {
                if v != zero {
                    assert_eq!(l.entry(v, zero), 0.0);
                }
            }
            assert_eq!(l.diag(zero), if g.is_isolated(zero) { 0.0 } else { 1.0 });
            assert!(l.extreme_eigenvalues().0 >= -1e-10);
        }
    }

    #[test]
    fn quadratic_form_examples() {
        let g = WeightedGraph::new(2, &[(0, 1, 1.0)]).unwrap();
        let l = laplacian(&g);
        assert_eq!(l.quadratic_form(&[1.0, -1.0]).unwrap(), 4.0);
        assert!(l.quadratic_form(&[1.0]).is_err());

        // sqrt-degree vector lies in the null space of a connected graph
        let g = WeightedGraph::new(4, &[(0, 1, 1.0), (0, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let beta: Vec<f64> = g.degrees().iter().map(|d| 2.5 * d.sqrt()).collect();
        assert_abs_diff_eq!(laplacian(&g).quadratic_form(&beta).unwrap(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn quadratic_form_matches_edge_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let p = rng.random_range(2..10);
            let g = random_graph(&mut rng, p, false);
            let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
            let q = laplacian(&g).quadratic_form(&beta).unwrap();
            assert_abs_diff_eq!(q, edge_sum(&g, &beta, None), epsilon = 1e-12);

            let signs: Vec<i8> = (0..p).map(|_| rng.random_range(-1..=1)).collect();
            let qs = signed_laplacian(&g, &signs).unwrap().quadratic_form(&beta).unwrap();
            assert_abs_diff_eq!(qs, edge_sum(&g, &beta, Some(&signs)), epsilon = 1e-12);
            assert!(qs >= -1e-12);
        }
    }

    #[test]
    fn dense_and_sparse_quadratic_forms_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = random_graph(&mut rng, 7, false);
        let l = laplacian(&g);
        let beta = nalgebra::DVector::from_fn(7, |_, _| rng.random_range(-1.0..1.0));
        let dense = (beta.transpose() * l.to_dense() * &beta)[(0, 0)];
        assert_abs_diff_eq!(l.quadratic_form(beta.as_slice()).unwrap(), dense, epsilon = 1e-12);
    }

    #[test]
    fn relabeling_preserves_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..30 {
            let p = rng.random_range(2..9);
            let g = random_graph(&mut rng, p, false);
            let mut perm: Vec<usize> = (0..p).collect();
            for i in (1..p).rev() {
                perm.swap(i, rng.random_range(0..=i));
            }
            let beta: Vec<f64> = (0..p).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut permuted = vec![0.0; p];
            for u in 0..p {
                permuted[perm[u]] = beta[u];
            }
            let relabeled = g.relabel(&perm).unwrap();
            let a = laplacian(&g).quadratic_form(&beta).unwrap();
            let b = laplacian(&relabeled).quadratic_form(&permuted).unwrap();
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            let diff = laplacian(&g).permute(&perm).unwrap().to_dense()
                - laplacian(&relabeled).to_dense();
            assert!(diff.amax() < 1e-14);
        }
    }
}
