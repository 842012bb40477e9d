//! Homogeneous graphs, normalized Laplacians, and meta-path induced
//! subgraphs of heterogeneous graphs.

use std::collections::BTreeSet;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linalg::symmetric_eigen;
use crate::sparse::CsrMatrix;

/// Node count above which the exact top Laplacian eigenvalue is replaced by
/// the spectral bound 2.
pub const EXACT_LAMBDA_MAX_NODES: usize = 2000;

/// Undirected simple graph over `0..num_nodes`.
#[derive(Debug, Clone)]
pub struct Graph {
    num_nodes: usize,
    /// Canonical edge set: each undirected edge stored once as `(i, j)`
    /// with `i < j`, sorted.
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Build a graph from an edge list. Duplicate edges and `(j, i)`
    /// mirrors collapse to one undirected edge; self-loops are dropped.
    pub fn build(num_nodes: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if num_nodes == 0 {
            return Err(Error::input("graph needs at least one node"));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edge_list {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::input(format!(
                    "edge ({a}, {b}) out of range for {num_nodes} nodes"
                )));
            }
            if a == b {
                continue;
            }
            set.insert((a.min(b), a.max(b)));
        }
        Ok(Graph {
            num_nodes,
            edges: set.into_iter().collect(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    /// Canonical `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.num_nodes];
        for &(i, j) in &self.edges {
            deg[i] += 1.0;
            deg[j] += 1.0;
        }
        deg
    }

    /// 0/1 adjacency in sparse form.
    pub fn adjacency(&self) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.edges.len() * 2);
        for &(i, j) in &self.edges {
            triplets.push((i, j, 1.0));
            triplets.push((j, i, 1.0));
        }
        CsrMatrix::from_triplets(self.num_nodes, &triplets)
    }

    pub fn adjacency_dense(&self) -> Array2<f64> {
        let mut a = Array2::<f64>::zeros((self.num_nodes, self.num_nodes));
        for &(i, j) in &self.edges {
            a[[i, j]] = 1.0;
            a[[j, i]] = 1.0;
        }
        a
    }

    /// Read a graph from an edge-list file: one `src<TAB>dst` pair per
    /// line, 0-indexed. Blank lines and `#` comments are skipped.
    pub fn from_edge_file(path: &Path, num_nodes: usize) -> Result<Self> {
        let edges = read_edge_file(path)?;
        Graph::build(num_nodes, &edges)
    }
}

/// Parse an edge-list file into raw pairs.
pub fn read_edge_file(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::load(path.display().to_string(), 0, e.to_string()))?;
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split('\t');
        let parse = |tok: Option<&str>| -> Result<usize> {
            tok.ok_or_else(|| {
                Error::load(
                    path.display().to_string(),
                    lineno + 1,
                    "expected `src<TAB>dst`",
                )
            })?
            .trim()
            .parse::<usize>()
            .map_err(|e| Error::load(path.display().to_string(), lineno + 1, e.to_string()))
        };
        let src = parse(parts.next())?;
        let dst = parse(parts.next())?;
        edges.push((src, dst));
    }
    Ok(edges)
}

/// Symmetric normalized Laplacian `I - D^{-1/2} A D^{-1/2}` with the rows
/// and columns of isolated nodes set identically to zero, keeping the
/// spectrum inside `[0, 2]` and treating such nodes as pure low-pass.
#[derive(Debug, Clone)]
pub struct NormalizedLaplacian {
    matrix: CsrMatrix,
    lambda_max: f64,
}

impl NormalizedLaplacian {
    pub fn new(graph: &Graph) -> Self {
        let n = graph.num_nodes();
        let deg = graph.degrees();
        let inv_sqrt: Vec<f64> = deg
            .iter()
            .map(|&d| if d > 0.0 { 1.0 / d.sqrt() } else { 0.0 })
            .collect();

        let mut triplets = Vec::with_capacity(n + graph.num_edges() * 2);
        for (i, &d) in deg.iter().enumerate() {
            if d > 0.0 {
                triplets.push((i, i, 1.0));
            }
        }
        for &(i, j) in graph.edges() {
            // One value per unordered pair keeps the matrix bit-symmetric.
            let v = -inv_sqrt[i] * inv_sqrt[j];
            triplets.push((i, j, v));
            triplets.push((j, i, v));
        }
        let matrix = CsrMatrix::from_triplets(n, &triplets);

        let lambda_max = if n <= EXACT_LAMBDA_MAX_NODES {
            let (vals, _) = symmetric_eigen(&matrix.to_dense());
            vals.last().copied().unwrap_or(0.0).clamp(0.0, 2.0)
        } else {
            2.0
        };
        NormalizedLaplacian { matrix, lambda_max }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn num_nodes(&self) -> usize {
        self.matrix.num_rows()
    }

    /// Largest eigenvalue: exact below [`EXACT_LAMBDA_MAX_NODES`] nodes,
    /// otherwise the bound 2.
    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }
}

/// Typed node sets plus named relation blocks.
#[derive(Debug, Clone)]
pub struct HeteroGraph {
    /// `(type name, node count)` in declaration order.
    types: Vec<(String, usize)>,
    relations: Vec<Relation>,
}

/// A directed 0/1 incidence block between two node types.
#[derive(Debug, Clone)]
pub struct Relation {
    pub name: String,
    pub source: String,
    pub target: String,
    /// Adjacency rows: `rows[s]` lists target-type indices reachable
    /// from source-type node `s`. Rows are sorted and deduplicated.
    rows: Vec<Vec<usize>>,
}

impl HeteroGraph {
    pub fn new(types: Vec<(String, usize)>) -> Self {
        HeteroGraph {
            types,
            relations: Vec::new(),
        }
    }

    pub fn node_count(&self, type_name: &str) -> Result<usize> {
        self.types
            .iter()
            .find(|(t, _)| t == type_name)
            .map(|&(_, n)| n)
            .ok_or_else(|| Error::schema(format!("unknown node type `{type_name}`")))
    }

    pub fn types(&self) -> &[(String, usize)] {
        &self.types
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn add_relation(
        &mut self,
        name: impl Into<String>,
        source: impl Into<String>,
        target: impl Into<String>,
        pairs: &[(usize, usize)],
    ) -> Result<()> {
        let (name, source, target) = (name.into(), source.into(), target.into());
        let ns = self.node_count(&source)?;
        let nt = self.node_count(&target)?;
        let mut rows: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); ns];
        for &(s, t) in pairs {
            if s >= ns || t >= nt {
                return Err(Error::schema(format!(
                    "relation `{name}` pair ({s}, {t}) exceeds shape {ns} x {nt}"
                )));
            }
            rows[s].insert(t);
        }
        self.relations.push(Relation {
            name,
            source,
            target,
            rows: rows.into_iter().map(|r| r.into_iter().collect()).collect(),
        });
        Ok(())
    }

    /// Find the relation that carries a step from `from` to `to`, possibly
    /// traversed in reverse. Errors if no relation matches or if the step
    /// is ambiguous (several relations between the pair, or a directed
    /// relation within one type, which could be walked either way).
    fn resolve_step(&self, from: &str, to: &str) -> Result<(usize, bool)> {
        let mut hits = Vec::new();
        for (idx, rel) in self.relations.iter().enumerate() {
            if rel.source == from && rel.target == to {
                hits.push((idx, false));
            }
            if rel.target == from && rel.source == to {
                hits.push((idx, true));
            }
        }
        match hits.len() {
            0 => Err(Error::schema(format!(
                "no relation connects `{from}` to `{to}`"
            ))),
            1 => Ok(hits[0]),
            _ => {
                let names: Vec<&str> = hits
                    .iter()
                    .map(|&(idx, _)| self.relations[idx].name.as_str())
                    .collect();
                Err(Error::schema(format!(
                    "step `{from}` -> `{to}` is ambiguous; candidate relations: {}",
                    names.join(", ")
                )))
            }
        }
    }
}

impl Relation {
    fn reversed_rows(&self, target_count: usize) -> Vec<Vec<usize>> {
        let mut rows: Vec<Vec<usize>> = vec![Vec::new(); target_count];
        for (s, ts) in self.rows.iter().enumerate() {
            for &t in ts {
                rows[t].push(s);
            }
        }
        rows
    }
}

/// A closed type sequence such as `A-P-A`: first and last types equal,
/// every consecutive pair resolvable against a declared relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPath {
    types: Vec<String>,
}

impl MetaPath {
    pub fn new(types: Vec<String>) -> Result<Self> {
        if types.len() < 3 {
            return Err(Error::input("a meta-path needs at least three node types"));
        }
        if types.first() != types.last() {
            return Err(Error::input(
                "a meta-path must start and end on the same node type",
            ));
        }
        Ok(MetaPath { types })
    }

    /// Parse dash-joined type names, e.g. `A-P-A`.
    pub fn parse(text: &str) -> Result<Self> {
        MetaPath::new(text.split('-').map(|s| s.trim().to_string()).collect())
    }

    pub fn types(&self) -> &[String] {
        &self.types
    }

    pub fn end_type(&self) -> &str {
        &self.types[0]
    }
}

impl std::fmt::Display for MetaPath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.types.join("-"))
    }
}

/// Number of distinct walks between end-type nodes along the path, as
/// sparse `(i, j, count)` triplets including the diagonal.
pub fn metapath_walk_counts(hg: &HeteroGraph, path: &MetaPath) -> Result<Vec<(usize, usize, u64)>> {
    let start_count = hg.node_count(path.end_type())?;
    // frontier[s] maps reachable node -> walk count, starting from s.
    let mut frontier: Vec<Vec<(usize, u64)>> = (0..start_count).map(|s| vec![(s, 1u64)]).collect();

    for step in path.types().windows(2) {
        let (rel_idx, reversed) = hg.resolve_step(&step[0], &step[1])?;
        let rel = &hg.relations()[rel_idx];
        // Reversed traversal indexes rows by the relation's target type,
        // which is this step's source type.
        let reversed_storage;
        let rows: &[Vec<usize>] = if reversed {
            reversed_storage = rel.reversed_rows(hg.node_count(&rel.target)?);
            &reversed_storage
        } else {
            &rel.rows
        };

        for reach in frontier.iter_mut() {
            let mut counts = std::collections::BTreeMap::new();
            for &(node, walks) in reach.iter() {
                for &next in &rows[node] {
                    *counts.entry(next).or_insert(0u64) += walks;
                }
            }
            *reach = counts.into_iter().collect();
        }
    }

    let mut triplets = Vec::new();
    for (s, reach) in frontier.iter().enumerate() {
        for &(t, walks) in reach {
            triplets.push((s, t, walks));
        }
    }
    Ok(triplets)
}

/// Homogeneous subgraph induced by a meta-path: connect end-type nodes
/// joined by at least one walk, drop self-connections, symmetrize.
pub fn metapath_adjacency(hg: &HeteroGraph, path: &MetaPath) -> Result<Graph> {
    let n = hg.node_count(path.end_type())?;
    let counts = metapath_walk_counts(hg, path)?;
    let edges: Vec<(usize, usize)> = counts
        .into_iter()
        .filter(|&(i, j, w)| i != j && w > 0)
        .map(|(i, j, _)| (i, j))
        .collect();
    Graph::build(n, &edges)
}
