//! Undirected simple graphs, edge-list I/O, perturbation and ground-truth handling.
//!
//! Nodes carry their original string label; internally they are indexed densely
//! `0..n` in order of first appearance in the input.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::seeded;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<usize>>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

/// Incrementally assembles a [`Graph`]; duplicate edges collapse and self-loops are dropped.
#[derive(Default)]
pub struct GraphBuilder {
    adjacency: Vec<Vec<usize>>,
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `label`, registering it if unseen.
    pub fn add_node(&mut self, label: &str) -> usize {
        if let Some(&i) = self.index.get(label) {
            return i;
        }
        let i = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        self.adjacency.push(Vec::new());
        i
    }

    pub fn add_edge(&mut self, a: &str, b: &str) {
        let i = self.add_node(a);
        let j = self.add_node(b);
        self.add_edge_indices(i, j);
    }

    fn add_edge_indices(&mut self, i: usize, j: usize) {
        if i != j {
            self.adjacency[i].push(j);
            self.adjacency[j].push(i);
        }
    }

    pub fn build(mut self) -> Graph {
        for nbrs in &mut self.adjacency {
            nbrs.sort_unstable();
            nbrs.dedup();
        }
        Graph {
            adjacency: self.adjacency,
            labels: self.labels,
            index: self.index,
        }
    }
}

impl Graph {
    /// Builds a graph over `labels` (index order preserved) from index pairs.
    pub fn from_index_edges(labels: Vec<String>, edges: &[(usize, usize)]) -> Result<Self> {
        let mut b = GraphBuilder::new();
        for l in &labels {
            if b.index.contains_key(l) {
                return Err(Error::InvalidArgument(format!("duplicate label `{l}`")));
            }
            b.add_node(l);
        }
        let n = labels.len();
        for &(i, j) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {n} nodes"
                )));
            }
            b.add_edge_indices(i, j);
        }
        Ok(b.build())
    }

    pub fn num_nodes(&self) -> usize {
        self.labels.len()
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Sorted neighbor indices of node `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i].binary_search(&j).is_ok()
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    /// Each undirected edge once, as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(i, nbrs)| {
            nbrs.iter()
                .copied()
                .filter(move |&j| j > i)
                .map(move |j| (i, j))
        })
    }

    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut d: Vec<usize> = self.adjacency.iter().map(Vec::len).collect();
        d.sort_unstable();
        d
    }

    /// Checks symmetry, absence of self-loops and duplicates, and label indexing.
    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.adjacency.len() != n || self.index.len() != n {
            return Err(Error::InvalidArgument("label/adjacency size mismatch".into()));
        }
        for (i, nbrs) in self.adjacency.iter().enumerate() {
            if nbrs.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidArgument(format!(
                    "adjacency of node {i} is not strictly sorted"
                )));
            }
            for &j in nbrs {
                if j >= n || j == i || !self.has_edge(j, i) {
                    return Err(Error::InvalidArgument(format!(
                        "edge ({i}, {j}) is not a valid undirected edge"
                    )));
                }
            }
            if self.index.get(&self.labels[i]) != Some(&i) {
                return Err(Error::InvalidArgument(format!("label index broken at {i}")));
            }
        }
        Ok(())
    }

    /// Copy of the graph whose labels are the decimal node indices.
    pub fn anonymized(&self) -> Graph {
        let labels: Vec<String> = (0..self.num_nodes()).map(|i| i.to_string()).collect();
        let index = labels.iter().cloned().zip(0..).collect();
        Graph {
            adjacency: self.adjacency.clone(),
            labels,
            index,
        }
    }
}

/// Parses a whitespace-separated edge list.
///
/// Lines are `src dst [weight ...]`; `#` starts a comment line and blank lines are
/// skipped. A line with a single token declares a node without edges. Without
/// `signed_mode`, edges with negative weight are discarded (their endpoints are not
/// registered); with it they are kept as ordinary edges.
pub fn parse_edge_list(text: &str, signed_mode: bool) -> Result<Graph> {
    let mut b = GraphBuilder::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut tokens = line.split_whitespace();
        let src = tokens.next().expect("non-empty line has a token");
        let Some(dst) = tokens.next() else {
            b.add_node(src);
            continue;
        };
        if let Some(w) = tokens.next() {
            let weight: f64 = w.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                message: format!("weight `{w}` is not a number"),
            })?;
            if weight.is_nan() {
                return Err(Error::Parse {
                    line: lineno + 1,
                    message: "weight is NaN".into(),
                });
            }
            if weight < 0.0 && !signed_mode {
                continue;
            }
        }
        b.add_edge(src, dst);
    }
    if b.labels.is_empty() {
        return Err(Error::Empty("edge list contains no nodes".into()));
    }
    Ok(b.build())
}

pub fn read_edge_list(path: impl AsRef<Path>, signed_mode: bool) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text, signed_mode)
}

/// Serializes `g` so that [`parse_edge_list`] reproduces it exactly: every node is
/// declared first (fixing index order and keeping isolated nodes), then every edge.
pub fn to_edge_list(g: &Graph) -> String {
    let mut out = String::new();
    for l in &g.labels {
        let _ = writeln!(out, "{l}");
    }
    for (i, j) in g.edges() {
        let _ = writeln!(out, "{} {}", g.labels[i], g.labels[j]);
    }
    out
}

pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, to_edge_list(g)).map_err(|e| Error::io(path, e))
}

/// Relabels node indices with a seeded uniform permutation; `perm[old] == new`.
/// Node labels travel with their nodes.
pub fn permute_nodes(g: &Graph, seed: u64) -> (Graph, Vec<usize>) {
    let mut perm: Vec<usize> = (0..g.num_nodes()).collect();
    perm.shuffle(&mut seeded(seed, 0));
    let permuted = apply_permutation(g, &perm).expect("shuffle yields a permutation");
    (permuted, perm)
}

/// Moves node `i` to index `perm[i]`.
pub fn apply_permutation(g: &Graph, perm: &[usize]) -> Result<Graph> {
    let n = g.num_nodes();
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: perm.len(),
        });
    }
    let mut seen = vec![false; n];
    for &p in perm {
        if p >= n || std::mem::replace(&mut seen[p], true) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
    }
    let mut labels = vec![String::new(); n];
    let mut adjacency = vec![Vec::new(); n];
    for old in 0..n {
        let new = perm[old];
        labels[new] = g.labels[old].clone();
        let mut nbrs: Vec<usize> = g.adjacency[old].iter().map(|&j| perm[j]).collect();
        nbrs.sort_unstable();
        adjacency[new] = nbrs;
    }
    let index = labels.iter().cloned().zip(0..).collect();
    Ok(Graph {
        adjacency,
        labels,
        index,
    })
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (old, &new) in perm.iter().enumerate() {
        inv[new] = old;
    }
    inv
}

/// Removes exactly `floor(fraction * |E|)` distinct edges chosen uniformly at random.
pub fn remove_edges(g: &Graph, fraction: f64, seed: u64) -> Result<Graph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!(
            "edge removal fraction {fraction} outside [0, 1]"
        )));
    }
    let edges: Vec<(usize, usize)> = g.edges().collect();
    let m = edges.len();
    // Tolerance absorbs representation error such as 0.29 * 100 = 28.999...
    let k = ((fraction * m as f64) + 1e-9).floor() as usize;
    let k = k.min(m);
    let mut drop = vec![false; m];
    for e in sample(&mut seeded(seed, 1), m, k) {
        drop[e] = true;
    }
    let kept: Vec<(usize, usize)> = edges
        .into_iter()
        .zip(drop)
        .filter_map(|(e, d)| (!d).then_some(e))
        .collect();
    Graph::from_index_edges(g.labels.clone(), &kept)
}

/// Ring lattice of `n` nodes, each joined to its `k/2` nearest neighbors on either
/// side, with every lattice edge rewired to a random endpoint with probability `beta`.
pub fn watts_strogatz(n: usize, k: usize, beta: f64, seed: u64) -> Result<Graph> {
    if k % 2 != 0 || k >= n {
        return Err(Error::InvalidArgument(format!(
            "need even k < n, got n={n} k={k}"
        )));
    }
    let mut rng = seeded(seed, 2);
    let mut adj: Vec<HashSet<usize>> = vec![HashSet::new(); n];
    for i in 0..n {
        for s in 1..=k / 2 {
            let j = (i + s) % n;
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    for s in 1..=k / 2 {
        for i in 0..n {
            let j = (i + s) % n;
            if !adj[i].contains(&j) || rng.random::<f64>() >= beta {
                continue;
            }
            if adj[i].len() >= n - 1 {
                continue;
            }
            let t = loop {
                let t = rng.random_range(0..n);
                if t != i && !adj[i].contains(&t) {
                    break t;
                }
            };
            adj[i].remove(&j);
            adj[j].remove(&i);
            adj[i].insert(t);
            adj[t].insert(i);
        }
    }
    let mut edges = Vec::new();
    for (i, nbrs) in adj.iter().enumerate() {
        edges.extend(nbrs.iter().filter(|&&j| j > i).map(|&j| (i, j)));
    }
    edges.sort_unstable();
    Graph::from_index_edges((0..n).map(|i| i.to_string()).collect(), &edges)
}

/// Ground-truth node pairs `(label in first graph, label in second graph)`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Correspondence {
    pairs: Vec<(String, String)>,
}

impl Correspondence {
    pub fn new(pairs: Vec<(String, String)>) -> Result<Self> {
        let mut left = HashSet::new();
        let mut right = HashSet::new();
        for (a, b) in &pairs {
            if !left.insert(a.as_str()) {
                return Err(Error::NotOneToOne(a.clone()));
            }
            if !right.insert(b.as_str()) {
                return Err(Error::NotOneToOne(b.clone()));
            }
        }
        Ok(Self { pairs })
    }

    /// Truth for a permuted copy: node `i` of `original` sits at `perm[i]` in `permuted`.
    pub fn from_permutation(original: &Graph, permuted: &Graph, perm: &[usize]) -> Self {
        let pairs = perm
            .iter()
            .enumerate()
            .map(|(old, &new)| (permuted.label(new).to_owned(), original.label(old).to_owned()))
            .collect();
        Self { pairs }
    }

    pub fn pairs(&self) -> &[(String, String)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Same pairs with the two sides exchanged.
    pub fn reversed(&self) -> Self {
        Self {
            pairs: self.pairs.iter().map(|(a, b)| (b.clone(), a.clone())).collect(),
        }
    }

    /// Two tab-separated label columns per line; `#` comment lines are skipped.
    pub fn parse(text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split('\t');
            match (cols.next(), cols.next(), cols.next()) {
                (Some(a), Some(b), None) if !a.is_empty() && !b.is_empty() => {
                    pairs.push((a.trim().to_owned(), b.trim().to_owned()))
                }
                _ => {
                    return Err(Error::Parse {
                        line: lineno + 1,
                        message: "expected two tab-separated labels".into(),
                    })
                }
            }
        }
        Self::new(pairs)
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (a, b) in &self.pairs {
            let _ = writeln!(out, "{a}\t{b}");
        }
        out
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_tsv()).map_err(|e| Error::io(path, e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GraphSize {
    pub num_nodes: usize,
    pub num_edges: usize,
}

impl From<&Graph> for GraphSize {
    fn from(g: &Graph) -> Self {
        Self {
            num_nodes: g.num_nodes(),
            num_edges: g.num_edges(),
        }
    }
}

/// Dataset summary in the shape of a two-network statistics table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphStats {
    pub first: GraphSize,
    pub second: Option<GraphSize>,
    pub overlap_nodes: Option<usize>,
    pub overlap_edges: Option<usize>,
}

pub fn graph_stats(g1: &Graph, g2: Option<&Graph>, corr: Option<&Correspondence>) -> Result<GraphStats> {
    let mut stats = GraphStats {
        first: g1.into(),
        second: g2.map(GraphSize::from),
        overlap_nodes: None,
        overlap_edges: None,
    };
    let (Some(g2), Some(corr)) = (g2, corr) else {
        if corr.is_some() {
            return Err(Error::InvalidArgument(
                "a correspondence needs two graphs".into(),
            ));
        }
        return Ok(stats);
    };
    let mut map = vec![None; g1.num_nodes()];
    for (a, b) in corr.pairs() {
        let i = g1.index_of(a).ok_or_else(|| Error::UnknownLabel(a.clone()))?;
        let j = g2.index_of(b).ok_or_else(|| Error::UnknownLabel(b.clone()))?;
        map[i] = Some(j);
    }
    let overlap_edges = g1
        .edges()
        .filter(|&(u, v)| match (map[u], map[v]) {
            (Some(a), Some(b)) => g2.has_edge(a, b),
            _ => false,
        })
        .count();
    stats.overlap_nodes = Some(corr.len());
    stats.overlap_edges = Some(overlap_edges);
    Ok(stats)
}
