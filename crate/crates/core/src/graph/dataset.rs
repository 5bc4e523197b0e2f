use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Graph, GraphBuilder};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How node features are derived at load time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureOptions {
    /// Degrees above this are clamped before one-hot encoding.
    pub degree_cap: usize,
    /// Appends a constant 1 column so no feature row has zero norm.
    pub constant_channel: bool,
}

impl Default for FeatureOptions {
    fn default() -> Self {
        FeatureOptions {
            degree_cap: 64,
            constant_channel: true,
        }
    }
}

/// Where the categorical node labels came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelSource {
    /// Labels read from the input, remapped to `0..k`.
    Given,
    /// No labels in the input; capped degrees are used instead.
    Degree,
}

/// A graph as read from disk, before label remapping and feature building.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RawGraph {
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    pub labels: Option<Vec<i64>>,
    pub edge_labels: Option<Vec<i64>>,
    pub y: Option<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub label_source: LabelSource,
    /// Number of distinct categorical node labels (one-hot width).
    pub node_label_count: usize,
    pub edge_label_count: usize,
    pub options: FeatureOptions,
}

fn dense_map(values: impl Iterator<Item = i64>) -> BTreeMap<i64, u32> {
    let mut m = BTreeMap::new();
    for v in values {
        m.entry(v).or_insert(0);
    }
    for (i, slot) in m.values_mut().enumerate() {
        *slot = i as u32;
    }
    m
}

fn one_hot(labels: &[u32], width: usize, constant: bool) -> Tensor {
    let cols = width + usize::from(constant);
    let mut values = vec![0.0; labels.len() * cols];
    for (i, &l) in labels.iter().enumerate() {
        values[i * cols + l as usize] = 1.0;
        if constant {
            values[i * cols + width] = 1.0;
        }
    }
    Tensor::matrix(labels.len(), cols, values).expect("consistent shape")
}

impl Dataset {
    /// Builds a dataset from raw graphs: remaps labels to dense ranges and
    /// derives one-hot node (and edge) features.
    pub fn from_raw(name: &str, raws: Vec<RawGraph>, options: FeatureOptions) -> Result<Self> {
        if raws.is_empty() {
            return Err(Error::parse(name, "dataset contains no graphs"));
        }
        let class_map = dense_map(raws.iter().filter_map(|r| r.y));
        let has_labels = raws.iter().all(|r| r.labels.is_some());
        let node_map = dense_map(raws.iter().flat_map(|r| r.labels.iter().flatten().copied()));
        let has_edge_labels = raws.iter().all(|r| r.edge_labels.is_some());
        let edge_map = dense_map(raws.iter().flat_map(|r| r.edge_labels.iter().flatten().copied()));

        let mut graphs = Vec::with_capacity(raws.len());
        for raw in raws {
            let mut b = GraphBuilder::new(raw.n, raw.edges);
            if has_edge_labels {
                let el: Vec<u32> = raw.edge_labels.unwrap().iter().map(|l| edge_map[l]).collect();
                b = b.edge_features(one_hot(&el, edge_map.len(), false)).edge_labels(el);
            }
            if let Some(y) = raw.y {
                b = b.graph_label(class_map[&y] as usize);
            }
            if has_labels {
                b = b.labels(raw.labels.unwrap().iter().map(|l| node_map[l]).collect());
            }
            let g = b.build()?;
            let g = if has_labels {
                let f = one_hot(g.node_labels(), node_map.len(), options.constant_channel);
                g.with_features(f)?
            } else {
                let labels: Vec<u32> = (0..g.node_count())
                    .map(|v| g.degree(v).min(options.degree_cap) as u32)
                    .collect();
                let f = one_hot(&labels, options.degree_cap + 1, options.constant_channel);
                let mut rebuilt = GraphBuilder::new(g.node_count(), g.edges().to_vec())
                    .labels(labels)
                    .features(f);
                rebuilt.edge_labels = g.edge_labels().map(<[u32]>::to_vec);
                rebuilt.edge_features = g.edge_features().cloned();
                rebuilt.graph_label = g.graph_label();
                rebuilt.build()?
            };
            graphs.push(g);
        }
        let node_label_count = if has_labels {
            node_map.len()
        } else {
            options.degree_cap + 1
        };
        let ds = Dataset {
            name: name.to_string(),
            graphs,
            num_classes: class_map.len(),
            label_source: if has_labels {
                LabelSource::Given
            } else {
                LabelSource::Degree
            },
            node_label_count,
            edge_label_count: if has_edge_labels { edge_map.len() } else { 0 },
            options,
        };
        ds.validate()?;
        Ok(ds)
    }

    fn validate(&self) -> Result<()> {
        let dim = self.graphs[0].feature_dim();
        for (i, g) in self.graphs.iter().enumerate() {
            if g.feature_dim() != dim {
                return Err(Error::shape(format!("graph {i} has a different feature width")));
            }
            if let Some(y) = g.graph_label() {
                if y >= self.num_classes {
                    return Err(Error::parse(&self.name, format!("graph {i} label {y} out of range")));
                }
            }
        }
        Ok(())
    }

    /// Loads a TU directory or a `.json` fixture file.
    pub fn load(path: &Path, options: FeatureOptions) -> Result<Self> {
        if path.is_dir() {
            let name = path
                .file_name()
                .and_then(|s| s.to_str())
                .ok_or_else(|| Error::parse(path, "cannot derive dataset name from path"))?;
            super::parse_tu_dataset(path, name, options)
        } else {
            Self::from_json_file(path, options)
        }
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.graphs[0].feature_dim().unwrap_or(0)
    }

    pub fn edge_feature_dim(&self) -> usize {
        self.graphs[0].edge_features().map_or(0, Tensor::cols)
    }

    pub fn mean_node_count(&self) -> f64 {
        let total: usize = self.graphs.iter().map(Graph::node_count).sum();
        total as f64 / self.graphs.len() as f64
    }

    pub fn labels(&self) -> Vec<Option<usize>> {
        self.graphs.iter().map(Graph::graph_label).collect()
    }

    /// A dataset restricted to the given graph indices.
    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            graphs: idx.iter().map(|&i| self.graphs[i].clone()).collect(),
            ..self.clone_meta()
        }
    }

    fn clone_meta(&self) -> Dataset {
        Dataset {
            name: self.name.clone(),
            graphs: Vec::new(),
            num_classes: self.num_classes,
            label_source: self.label_source,
            node_label_count: self.node_label_count,
            edge_label_count: self.edge_label_count,
            options: self.options,
        }
    }

    pub fn from_json_str(name: &str, text: &str, options: FeatureOptions) -> Result<Self> {
        let parsed: JsonDataset =
            serde_json::from_str(text).map_err(|e| Error::parse(name, e.to_string()))?;
        let raws = parsed
            .graphs
            .into_iter()
            .map(|g| RawGraph {
                n: g.n,
                edges: g.edges.into_iter().map(|[u, v]| (u, v)).collect(),
                labels: g.labels,
                edge_labels: None,
                y: g.y,
            })
            .collect();
        Dataset::from_raw(name, raws, options)
    }

    pub fn from_json_file(path: &Path, options: FeatureOptions) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::parse(path, e.to_string()))?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("dataset");
        Dataset::from_json_str(name, &text, options)
    }

    pub fn to_json(&self) -> String {
        let graphs = self
            .graphs
            .iter()
            .map(|g| JsonGraph {
                n: g.node_count(),
                edges: g.edges().iter().map(|&(u, v)| [u, v]).collect(),
                labels: (self.label_source == LabelSource::Given)
                    .then(|| g.node_labels().iter().map(|&l| l as i64).collect()),
                y: g.graph_label().map(|y| y as i64),
            })
            .collect();
        serde_json::to_string(&JsonDataset { graphs }).expect("serializable")
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonDataset {
    graphs: Vec<JsonGraph>,
}

#[derive(Debug, Serialize, Deserialize)]
struct JsonGraph {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<i64>,
}
