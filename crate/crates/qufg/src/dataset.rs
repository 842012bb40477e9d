//! Dataset manifests, loaders, and the synthetic fixture generator.
//!
//! A dataset lives in a directory with a TOML manifest pointing at an
//! edge-list file, a feature CSV, a label CSV and a split file. A
//! heterogeneous dataset swaps the edge list for a schema file plus a set
//! of meta-paths; features, labels and splits then refer to the nodes of
//! the meta-paths' end type.

use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::graph::{metapath_adjacency, read_edge_file, Graph, HeteroGraph, MetaPath};
use crate::rng::Stream;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestFile {
    dataset: ManifestDataset,
    hetero: Option<ManifestHetero>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestDataset {
    name: String,
    num_nodes: Option<usize>,
    edges: Option<String>,
    features: String,
    labels: String,
    splits: String,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestHetero {
    schema: String,
    target_type: String,
    metapaths: Vec<String>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaFile {
    types: toml::value::Table,
    relations: Vec<SchemaRelation>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SchemaRelation {
    name: String,
    source: String,
    target: String,
    edges: String,
}

/// The graph side of a dataset.
#[derive(Debug, Clone)]
pub enum DatasetGraph {
    Homogeneous(Graph),
    Heterogeneous {
        hetero: HeteroGraph,
        metapaths: Vec<MetaPath>,
        /// Meta-path induced subgraphs over the target type, one per path.
        subgraphs: Vec<Graph>,
    },
}

/// A loaded node-classification dataset.
#[derive(Debug, Clone)]
pub struct NodeDataset {
    pub name: String,
    pub graph: DatasetGraph,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub train_mask: Vec<usize>,
    pub val_mask: Vec<usize>,
    pub test_mask: Vec<usize>,
}

impl NodeDataset {
    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_features(&self) -> usize {
        self.features.ncols()
    }

    /// The homogeneous graphs the model trains on: the graph itself, or
    /// one subgraph per meta-path.
    pub fn graphs(&self) -> Vec<&Graph> {
        match &self.graph {
            DatasetGraph::Homogeneous(g) => vec![g],
            DatasetGraph::Heterogeneous { subgraphs, .. } => subgraphs.iter().collect(),
        }
    }

    pub fn is_heterogeneous(&self) -> bool {
        matches!(self.graph, DatasetGraph::Heterogeneous { .. })
    }

    fn validate(&self) -> Result<()> {
        let n = self.num_nodes();
        if self.labels.len() != n {
            return Err(Error::input(format!(
                "dataset has {n} nodes but {} labels",
                self.labels.len()
            )));
        }
        for g in self.graphs() {
            if g.num_nodes() != n {
                return Err(Error::input(format!(
                    "graph has {} nodes but features have {n} rows",
                    g.num_nodes()
                )));
            }
        }
        if let Some(&bad) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::input(format!(
                "label {bad} exceeds the declared {} classes",
                self.num_classes
            )));
        }
        if self.train_mask.is_empty() {
            return Err(Error::input("train mask must not be empty"));
        }
        let mut seen = vec![0u8; n];
        for (mask_name, mask) in [
            ("train", &self.train_mask),
            ("val", &self.val_mask),
            ("test", &self.test_mask),
        ] {
            for &i in mask.iter() {
                if i >= n {
                    return Err(Error::input(format!(
                        "{mask_name} mask index {i} out of range"
                    )));
                }
                if seen[i] != 0 {
                    return Err(Error::input(format!(
                        "node {i} appears in more than one split mask"
                    )));
                }
                seen[i] = 1;
            }
        }
        Ok(())
    }
}

fn resolve(base: &Path, rel: &str) -> PathBuf {
    base.join(rel)
}

fn read_features(path: &Path) -> Result<Array2<f64>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::load(path.display().to_string(), 0, e.to_string()))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::load(path.display().to_string(), lineno + 1, e.to_string()))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::load(
                    path.display().to_string(),
                    lineno + 1,
                    format!(
                        "ragged row: {} columns, expected {}",
                        row.len(),
                        first.len()
                    ),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::load(
            path.display().to_string(),
            0,
            "no feature rows",
        ));
    }
    let (n, d) = (rows.len(), rows[0].len());
    Ok(Array2::from_shape_fn((n, d), |(i, j)| rows[i][j]))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::load(path.display().to_string(), 0, e.to_string()))?;
    let mut labels = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        labels.push(
            line.parse::<usize>()
                .map_err(|e| Error::load(path.display().to_string(), lineno + 1, e.to_string()))?,
        );
    }
    Ok(labels)
}

fn read_splits(path: &Path, n: usize) -> Result<(Vec<usize>, Vec<usize>, Vec<usize>)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::load(path.display().to_string(), 0, e.to_string()))?;
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: String| Error::load(path.display().to_string(), lineno + 1, msg);
        let (idx, role) = line
            .split_once(',')
            .ok_or_else(|| err("expected `index,role`".into()))?;
        let idx: usize = idx.trim().parse().map_err(|e| err(format!("{e}")))?;
        if idx >= n {
            return Err(err(format!("node index {idx} out of range for {n} nodes")));
        }
        match role.trim() {
            "train" => train.push(idx),
            "val" => val.push(idx),
            "test" => test.push(idx),
            other => return Err(err(format!("unknown split role `{other}`"))),
        }
    }
    Ok((train, val, test))
}

fn load_schema(path: &Path) -> Result<HeteroGraph> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::load(path.display().to_string(), 0, e.to_string()))?;
    let schema: SchemaFile =
        toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));

    let mut types = Vec::new();
    for (name, value) in &schema.types {
        let count = value
            .as_integer()
            .ok_or_else(|| Error::config(format!("type `{name}` count must be an integer")))?;
        if count <= 0 {
            return Err(Error::config(format!(
                "type `{name}` must have a positive node count"
            )));
        }
        types.push((name.clone(), count as usize));
    }
    let mut hg = HeteroGraph::new(types);
    for rel in &schema.relations {
        let pairs = read_edge_file(&resolve(base, &rel.edges))?;
        hg.add_relation(&rel.name, &rel.source, &rel.target, &pairs)?;
    }
    Ok(hg)
}

/// Load a dataset from its manifest.
pub fn load_dataset(manifest_path: &Path) -> Result<NodeDataset> {
    let text = std::fs::read_to_string(manifest_path)
        .map_err(|e| Error::load(manifest_path.display().to_string(), 0, e.to_string()))?;
    let manifest: ManifestFile = toml::from_str(&text)
        .map_err(|e| Error::config(format!("{}: {e}", manifest_path.display())))?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));

    let features = read_features(&resolve(base, &manifest.dataset.features))?;
    let n = features.nrows();

    let graph = match &manifest.hetero {
        None => {
            let edges_file = manifest
                .dataset
                .edges
                .as_ref()
                .ok_or_else(|| Error::config("homogeneous dataset needs an `edges` entry"))?;
            let num_nodes = manifest.dataset.num_nodes.unwrap_or(n);
            if num_nodes != n {
                return Err(Error::input(format!(
                    "manifest declares {num_nodes} nodes but features have {n} rows"
                )));
            }
            DatasetGraph::Homogeneous(Graph::from_edge_file(
                &resolve(base, edges_file),
                num_nodes,
            )?)
        }
        Some(h) => {
            let hetero = load_schema(&resolve(base, &h.schema))?;
            let target_count = hetero.node_count(&h.target_type)?;
            if target_count != n {
                return Err(Error::input(format!(
                    "target type `{}` has {target_count} nodes but features have {n} rows",
                    h.target_type
                )));
            }
            let mut metapaths = Vec::new();
            let mut subgraphs = Vec::new();
            for text in &h.metapaths {
                let path = MetaPath::parse(text)?;
                if path.end_type() != h.target_type {
                    return Err(Error::config(format!(
                        "meta-path `{path}` does not end on target type `{}`",
                        h.target_type
                    )));
                }
                subgraphs.push(metapath_adjacency(&hetero, &path)?);
                metapaths.push(path);
            }
            if metapaths.is_empty() {
                return Err(Error::config(
                    "heterogeneous dataset needs at least one meta-path",
                ));
            }
            DatasetGraph::Heterogeneous {
                hetero,
                metapaths,
                subgraphs,
            }
        }
    };

    let labels = read_labels(&resolve(base, &manifest.dataset.labels))?;
    let num_classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let (train_mask, val_mask, test_mask) =
        read_splits(&resolve(base, &manifest.dataset.splits), n)?;

    let ds = NodeDataset {
        name: manifest.dataset.name,
        graph,
        features,
        labels,
        num_classes,
        train_mask,
        val_mask,
        test_mask,
    };
    ds.validate()?;
    Ok(ds)
}

/// Two clusters of equal size joined by a single bridge edge. Features are
/// 0/1 block indicators of the cluster (first half of the columns for
/// cluster 0, second half for cluster 1), labels are the cluster index.
/// Intra-cluster edges combine a connecting ring with seeded random
/// chords of the given probability. Splits take roughly 10% train and 20%
/// validation per cluster, the rest test.
pub fn two_cluster_dataset(
    cluster_size: usize,
    intra_edge_prob: f64,
    num_features: usize,
    seed: u64,
) -> NodeDataset {
    assert!(cluster_size >= 2, "clusters need at least two nodes");
    assert!(
        num_features >= 2,
        "need at least one indicator column per cluster"
    );
    let n = 2 * cluster_size;
    let stream = Stream::new(seed, "fixture-two-cluster");
    let mut edges = Vec::new();
    for cluster in 0..2usize {
        let base = cluster * cluster_size;
        for i in 0..cluster_size {
            edges.push((base + i, base + (i + 1) % cluster_size));
        }
        for i in 0..cluster_size {
            for j in (i + 1)..cluster_size {
                if stream.uniform(&[cluster as u64, i as u64, j as u64]) < intra_edge_prob {
                    edges.push((base + i, base + j));
                }
            }
        }
    }
    edges.push((0, cluster_size));
    let graph = Graph::build(n, &edges).expect("fixture edges are in range");

    let half = num_features / 2;
    let features = Array2::from_shape_fn((n, num_features), |(i, j)| {
        let cluster = usize::from(i >= cluster_size);
        let on = if cluster == 0 { j < half } else { j >= half };
        f64::from(on)
    });
    let labels: Vec<usize> = (0..n).map(|i| usize::from(i >= cluster_size)).collect();

    let train_per = (cluster_size / 10).max(2).min(cluster_size - 2);
    let val_per = (cluster_size / 5).max(1).min(cluster_size - train_per - 1);
    let mut train_mask = Vec::new();
    let mut val_mask = Vec::new();
    let mut test_mask = Vec::new();
    for cluster in 0..2usize {
        let base = cluster * cluster_size;
        for i in 0..cluster_size {
            let node = base + i;
            if i < train_per {
                train_mask.push(node);
            } else if i < train_per + val_per {
                val_mask.push(node);
            } else {
                test_mask.push(node);
            }
        }
    }

    NodeDataset {
        name: format!("two-cluster-{n}"),
        graph: DatasetGraph::Homogeneous(graph),
        features,
        labels,
        num_classes: 2,
        train_mask,
        val_mask,
        test_mask,
    }
}

/// The 10-node toy: two complete 5-cliques joined by one edge, with
/// cluster-indicator features.
pub fn two_clique_dataset() -> NodeDataset {
    let mut ds = two_cluster_dataset(5, 1.0, 2, 0);
    ds.name = "two-clique-10".into();
    ds
}

/// Write a homogeneous dataset as manifest + data files into `dir`, so it
/// can be loaded back with [`load_dataset`]. Returns the manifest path.
pub fn write_dataset_files(ds: &NodeDataset, dir: &Path) -> Result<PathBuf> {
    let graph = match &ds.graph {
        DatasetGraph::Homogeneous(g) => g,
        DatasetGraph::Heterogeneous { .. } => {
            return Err(Error::input(
                "only homogeneous datasets can be exported this way",
            ))
        }
    };
    std::fs::create_dir_all(dir)?;

    let mut edges_text = String::new();
    for &(i, j) in graph.edges() {
        edges_text.push_str(&format!("{i}\t{j}\n"));
    }
    std::fs::write(dir.join("edges.tsv"), edges_text)?;

    let mut feat = String::new();
    for i in 0..ds.num_nodes() {
        let row: Vec<String> = (0..ds.num_features())
            .map(|j| format!("{}", ds.features[[i, j]]))
            .collect();
        feat.push_str(&row.join(","));
        feat.push('\n');
    }
    std::fs::write(dir.join("features.csv"), feat)?;

    let mut labels_text = String::new();
    for &l in &ds.labels {
        labels_text.push_str(&format!("{l}\n"));
    }
    std::fs::write(dir.join("labels.csv"), labels_text)?;

    let mut splits = String::new();
    for (role, mask) in [
        ("train", &ds.train_mask),
        ("val", &ds.val_mask),
        ("test", &ds.test_mask),
    ] {
        for &i in mask.iter() {
            splits.push_str(&format!("{i},{role}\n"));
        }
    }
    std::fs::write(dir.join("splits.csv"), splits)?;

    let manifest = format!(
        "[dataset]\nname = \"{}\"\nnum_nodes = {}\nedges = \"edges.tsv\"\n\
         features = \"features.csv\"\nlabels = \"labels.csv\"\nsplits = \"splits.csv\"\n",
        ds.name,
        ds.num_nodes()
    );
    let manifest_path = dir.join("manifest.toml");
    std::fs::write(&manifest_path, manifest)?;
    Ok(manifest_path)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixtures_dir() -> PathBuf {
        Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/fixtures")
    }

    #[test]
    fn bundled_toy_fixture_loads() {
        let ds = load_dataset(&fixtures_dir().join("toy10/manifest.toml")).unwrap();
        assert_eq!(ds.num_nodes(), 10);
        assert_eq!(ds.num_features(), 4);
        assert_eq!(ds.num_classes, 3);
        assert_eq!(ds.train_mask.len(), 4);
        assert_eq!(ds.val_mask.len(), 3);
        assert_eq!(ds.test_mask.len(), 3);
        assert!(!ds.is_heterogeneous());
    }

    #[test]
    fn bundled_hetero_fixture_loads() {
        let ds = load_dataset(&fixtures_dir().join("hetero_toy/manifest.toml")).unwrap();
        assert!(ds.is_heterogeneous());
        assert_eq!(ds.num_nodes(), 4);
        assert_eq!(ds.graphs().len(), 1);
        // a1 and a2 share p1; a3 and a4 share p3
        let sub = ds.graphs()[0];
        assert!(sub.edges().contains(&(0, 1)));
    }

    #[test]
    fn feature_row_mismatch_is_a_load_error() {
        let dir = tempfile::tempdir().unwrap();
        let ds = two_clique_dataset();
        let manifest = write_dataset_files(&ds, dir.path()).unwrap();
        // corrupt: drop one feature row
        let feat_path = dir.path().join("features.csv");
        let text = std::fs::read_to_string(&feat_path).unwrap();
        let shorter: Vec<&str> = text.lines().take(9).collect();
        std::fs::write(&feat_path, shorter.join("\n")).unwrap();
        assert!(load_dataset(&manifest).is_err());
    }

    #[test]
    fn overlapping_masks_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let ds = two_clique_dataset();
        let manifest = write_dataset_files(&ds, dir.path()).unwrap();
        let split_path = dir.path().join("splits.csv");
        let mut text = std::fs::read_to_string(&split_path).unwrap();
        text.push_str("0,test\n"); // node 0 is already train
        std::fs::write(&split_path, text).unwrap();
        assert!(load_dataset(&manifest).is_err());
    }

    #[test]
    fn unknown_manifest_keys_list_the_valid_ones() {
        let dir = tempfile::tempdir().unwrap();
        let ds = two_clique_dataset();
        let manifest = write_dataset_files(&ds, dir.path()).unwrap();
        let mut text = std::fs::read_to_string(&manifest).unwrap();
        text.push_str("nonsense_key = 3\n");
        std::fs::write(&manifest, text).unwrap();
        let err = load_dataset(&manifest).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("nonsense_key"), "got: {msg}");
        assert!(msg.contains("expected"), "got: {msg}");
    }

    #[test]
    fn export_then_load_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = two_cluster_dataset(12, 0.3, 4, 7);
        let manifest = write_dataset_files(&ds, dir.path()).unwrap();
        let back = load_dataset(&manifest).unwrap();
        assert_eq!(back.num_nodes(), ds.num_nodes());
        assert_eq!(back.features, ds.features);
        assert_eq!(back.labels, ds.labels);
        assert_eq!(back.train_mask, ds.train_mask);
        match (&back.graph, &ds.graph) {
            (DatasetGraph::Homogeneous(a), DatasetGraph::Homogeneous(b)) => {
                assert_eq!(a.edges(), b.edges());
            }
            _ => panic!("expected homogeneous graphs"),
        }
    }

    #[test]
    fn two_cluster_fixture_shape() {
        let ds = two_cluster_dataset(100, 0.08, 8, 3);
        assert_eq!(ds.num_nodes(), 200);
        assert_eq!(ds.num_classes, 2);
        assert_eq!(
            ds.train_mask.len() + ds.val_mask.len() + ds.test_mask.len(),
            200
        );
        // indicator features are binary and balanced
        assert!(ds.features.iter().all(|&v| v == 0.0 || v == 1.0));
        assert_eq!(ds.labels.iter().filter(|&&l| l == 1).count(), 100);
    }
}
