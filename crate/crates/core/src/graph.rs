//! k-nearest-neighbour graphs and graph (geodesic) distances.

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;
use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Default neighbourhood size.
pub const DEFAULT_K_NN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub i: usize,
    pub j: usize,
    pub weight: f64,
}

/// Undirected weighted k-NN graph. `adjacency[i]` is sorted by neighbour index.
#[derive(Debug, Clone)]
pub struct GeodesicGraph {
    n_nodes: usize,
    k_nn: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
    bridges: Vec<Edge>,
}

impl GeodesicGraph {
    /// Build from an explicit undirected edge list. Duplicate edges keep their first weight.
    pub fn from_edges(n_nodes: usize, k_nn: usize, edges: &[Edge]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n_nodes];
        for e in edges {
            if e.i >= n_nodes || e.j >= n_nodes || e.i == e.j {
                return Err(Error::arg(format!("invalid edge ({}, {})", e.i, e.j)));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::DegenerateInput(format!(
                    "edge ({}, {}) has non-positive weight {}",
                    e.i, e.j, e.weight
                )));
            }
            adjacency[e.i].push((e.j, e.weight));
            adjacency[e.j].push((e.i, e.weight));
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
            list.dedup_by_key(|&mut (j, _)| j);
        }
        Ok(Self {
            n_nodes,
            k_nn,
            adjacency,
            bridges: Vec::new(),
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn k_nn(&self) -> usize {
        self.k_nn
    }

    pub fn neighbors(&self, i: usize) -> &[(usize, f64)] {
        &self.adjacency[i]
    }

    pub fn bridges(&self) -> &[Edge] {
        &self.bridges
    }

    /// Every undirected edge once, as `i < j`, in lexicographic order.
    pub fn edges(&self) -> Vec<Edge> {
        let mut out = Vec::new();
        for (i, list) in self.adjacency.iter().enumerate() {
            out.extend(
                list.iter()
                    .filter(|&&(j, _)| j > i)
                    .map(|&(j, weight)| Edge { i, j, weight }),
            );
        }
        out
    }

    pub fn weight(&self, i: usize, j: usize) -> Option<f64> {
        self.adjacency[i]
            .binary_search_by_key(&j, |&(n, _)| n)
            .ok()
            .map(|p| self.adjacency[i][p].1)
    }

    /// Add an undirected edge (or overwrite its weight).
    pub fn insert_edge(&mut self, i: usize, j: usize, weight: f64) {
        for (a, b) in [(i, j), (j, i)] {
            match self.adjacency[a].binary_search_by_key(&b, |&(n, _)| n) {
                Ok(p) => self.adjacency[a][p].1 = weight,
                Err(p) => self.adjacency[a].insert(p, (b, weight)),
            }
        }
    }

    /// Connected-component id per node; ids are numbered by lowest member.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let mut comp = vec![usize::MAX; self.n_nodes];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..self.n_nodes {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            stack.push(start);
            while let Some(u) = stack.pop() {
                for &(v, _) in &self.adjacency[u] {
                    if comp[v] == usize::MAX {
                        comp[v] = count;
                        stack.push(v);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    pub fn is_connected(&self) -> bool {
        self.components().0 <= 1
    }

    /// Symmetry, positivity and finiteness of weights.
    pub fn check_invariants(&self) -> Result<()> {
        for (i, list) in self.adjacency.iter().enumerate() {
            for &(j, w) in list {
                if !(w > 0.0 && w.is_finite()) {
                    return Err(Error::Numerical(format!("edge ({i}, {j}) weight {w}")));
                }
                if self.weight(j, i) != Some(w) {
                    return Err(Error::Numerical(format!("edge ({i}, {j}) is not symmetric")));
                }
            }
        }
        Ok(())
    }

    /// Debug dump as `i,j,weight` lines (each undirected edge once).
    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let mut emit = || -> std::io::Result<()> {
            writeln!(out, "i,j,weight")?;
            for e in self.edges() {
                writeln!(out, "{},{},{}", e.i, e.j, e.weight)?;
            }
            out.flush()
        };
        emit().map_err(|e| Error::io(path, e))
    }
}

/// Row-major copy of the samples so distance loops walk contiguous memory.
fn row_major(data: &Dataset) -> (Vec<f64>, usize) {
    let x = data.samples();
    let m = x.ncols();
    let mut buf = vec![0.0; x.nrows() * m];
    for i in 0..x.nrows() {
        for j in 0..m {
            buf[i * m + j] = x[(i, j)];
        }
    }
    (buf, m)
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Euclidean distance between observations `i` and `j`.
pub fn euclidean(data: &Dataset, i: usize, j: usize) -> f64 {
    let x = data.samples();
    (x.row(i) - x.row(j)).norm()
}

/// Union-symmetrised k-NN graph with Euclidean weights.
///
/// Neighbour ties are broken by lower index.
pub fn build_knn_graph(data: &Dataset, k_nn: usize) -> Result<GeodesicGraph> {
    let n = data.n_samples();
    if k_nn == 0 || k_nn >= n {
        return Err(Error::arg(format!("k_nn must be in [1, N); got {k_nn} with N = {n}")));
    }
    let (rows, m) = row_major(data);
    let row = |i: usize| &rows[i * m..(i + 1) * m];

    let mut edges = Vec::with_capacity(n * k_nn);
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(n);
    for i in 0..n {
        cand.clear();
        cand.extend((0..n).filter(|&j| j != i).map(|j| (sq_dist(row(i), row(j)), j)));
        let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        cand.select_nth_unstable_by(k_nn - 1, by_dist);
        for &(d2, j) in &cand[..k_nn] {
            if d2 == 0.0 {
                return Err(Error::DegenerateInput(format!(
                    "observations {i} and {j} coincide; deduplicate before building the graph"
                )));
            }
            let (a, b) = if i < j { (i, j) } else { (j, i) };
            edges.push(Edge {
                i: a,
                j: b,
                weight: d2.sqrt(),
            });
        }
    }
    edges.sort_by_key(|e| (e.i, e.j));
    edges.dedup_by(|a, b| a.i == b.i && a.j == b.j);
    GeodesicGraph::from_edges(n, k_nn, &edges)
}

/// Join components by repeatedly adding the shortest Euclidean edge between the
/// two closest components (single linkage). New edges are recorded in `bridges`.
pub fn connect_components(graph: &GeodesicGraph, data: &Dataset) -> Result<GeodesicGraph> {
    let n = graph.n_nodes();
    if data.n_samples() != n {
        return Err(Error::arg("graph and dataset sizes differ"));
    }
    let (count, comp) = graph.components();
    let mut out = graph.clone();
    if count <= 1 {
        return Ok(out);
    }

    // Closest cross pair for every pair of components.
    let (rows, m) = row_major(data);
    let row = |i: usize| &rows[i * m..(i + 1) * m];
    let mut best: Vec<Option<(f64, usize, usize)>> = vec![None; count * count];
    for i in 0..n {
        for j in (i + 1)..n {
            let (ci, cj) = (comp[i], comp[j]);
            if ci == cj {
                continue;
            }
            let d2 = sq_dist(row(i), row(j));
            let slot = &mut best[ci.min(cj) * count + ci.max(cj)];
            if slot.is_none_or(|(b, _, _)| d2 < b) {
                *slot = Some((d2, i, j));
            }
        }
    }
    let mut candidates: Vec<(f64, usize, usize, usize, usize)> = Vec::new();
    for a in 0..count {
        for b in (a + 1)..count {
            if let Some((d2, i, j)) = best[a * count + b] {
                candidates.push((d2, i, j, a, b));
            }
        }
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));

    let mut parent: Vec<usize> = (0..count).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (d2, i, j, a, b) in candidates {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra == rb {
            continue;
        }
        if d2 == 0.0 {
            return Err(Error::DegenerateInput(format!("observations {i} and {j} coincide")));
        }
        parent[ra.max(rb)] = ra.min(rb);
        let weight = d2.sqrt();
        out.insert_edge(i, j, weight);
        out.bridges.push(Edge { i, j, weight });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceKind {
    LandmarkToAll,
    AllPairs,
}

/// Graph distances: one row per source, one column per node.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    pub values: DMatrix<f64>,
    pub kind: DistanceKind,
    pub sources: Vec<usize>,
}

impl DistanceMatrix {
    pub fn check_invariants(&self) -> Result<()> {
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numerical("distance matrix has negative or non-finite entries".into()));
        }
        for (r, &s) in self.sources.iter().enumerate() {
            if self.values[(r, s)] != 0.0 {
                return Err(Error::Numerical(format!("self-distance of node {s} is not zero")));
            }
        }
        Ok(())
    }

    /// Columns restricted to the sources, giving the source × source block.
    pub fn source_block(&self) -> DMatrix<f64> {
        let k = self.sources.len();
        DMatrix::from_fn(k, k, |a, b| self.values[(a, self.sources[b])])
    }
}

#[derive(Clone, Copy, PartialEq)]
struct HeapItem(f64, usize);

impl Eq for HeapItem {}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn dijkstra(graph: &GeodesicGraph, source: usize, dist: &mut [f64]) {
    dist.fill(f64::INFINITY);
    dist[source] = 0.0;
    let mut heap = BinaryHeap::new();
    heap.push(Reverse(HeapItem(0.0, source)));
    while let Some(Reverse(HeapItem(d, u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in graph.neighbors(u) {
            let nd = d + w;
            if nd < dist[v] {
                dist[v] = nd;
                heap.push(Reverse(HeapItem(nd, v)));
            }
        }
    }
}

/// Single-source shortest paths from each source (Dijkstra with a binary heap).
pub fn shortest_paths_from(graph: &GeodesicGraph, sources: &[usize]) -> Result<DistanceMatrix> {
    let n = graph.n_nodes();
    if sources.is_empty() {
        return Err(Error::arg("at least one source is required"));
    }
    if let Some(&bad) = sources.iter().find(|&&s| s >= n) {
        return Err(Error::arg(format!("source index {bad} out of range for {n} nodes")));
    }
    let mut values = DMatrix::zeros(sources.len(), n);
    let mut dist = vec![0.0; n];
    for (r, &s) in sources.iter().enumerate() {
        dijkstra(graph, s, &mut dist);
        if let Some(unreached) = dist.iter().position(|d| !d.is_finite()) {
            return Err(Error::arg(format!(
                "graph is disconnected: node {unreached} unreachable from {s}"
            )));
        }
        for (c, &d) in dist.iter().enumerate() {
            values[(r, c)] = d;
        }
    }
    Ok(DistanceMatrix {
        values,
        kind: DistanceKind::LandmarkToAll,
        sources: sources.to_vec(),
    })
}

/// All-pairs graph distances via one Dijkstra run per node.
///
/// Path sums accumulate in different orders from the two endpoints, so the
/// result is made exactly symmetric by taking the smaller of `d(i,j)`, `d(j,i)`.
pub fn full_geodesic_matrix(graph: &GeodesicGraph) -> Result<DistanceMatrix> {
    let all: Vec<usize> = (0..graph.n_nodes()).collect();
    let mut dm = shortest_paths_from(graph, &all)?;
    symmetrize_min(&mut dm.values);
    dm.kind = DistanceKind::AllPairs;
    Ok(dm)
}

/// All-pairs graph distances by Floyd–Warshall; O(N³), for cross-checking.
pub fn floyd_warshall(graph: &GeodesicGraph) -> Result<DistanceMatrix> {
    let n = graph.n_nodes();
    let mut d = vec![f64::INFINITY; n * n];
    for i in 0..n {
        d[i * n + i] = 0.0;
        for &(j, w) in graph.neighbors(i) {
            d[i * n + j] = w;
        }
    }
    for k in 0..n {
        for i in 0..n {
            let dik = d[i * n + k];
            if !dik.is_finite() {
                continue;
            }
            for j in 0..n {
                let cand = dik + d[k * n + j];
                if cand < d[i * n + j] {
                    d[i * n + j] = cand;
                }
            }
        }
    }
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::arg("graph is disconnected"));
    }
    let mut values = DMatrix::from_fn(n, n, |i, j| d[i * n + j]);
    symmetrize_min(&mut values);
    Ok(DistanceMatrix {
        values,
        kind: DistanceKind::AllPairs,
        sources: (0..n).collect(),
    })
}

fn symmetrize_min(values: &mut DMatrix<f64>) {
    let n = values.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = values[(i, j)].min(values[(j, i)]);
            values[(i, j)] = v;
            values[(j, i)] = v;
        }
    }
}
