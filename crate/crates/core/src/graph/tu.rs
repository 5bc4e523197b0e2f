//! TU benchmark format: `<name>_A.txt`, `<name>_graph_indicator.txt`,
//! `<name>_graph_labels.txt`, and optional `<name>_node_labels.txt` /
//! `<name>_edge_labels.txt`. Node and graph ids on disk are 1-based.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::dataset::{Dataset, FeatureOptions, LabelSource, RawGraph};
use crate::error::{Error, Result};

fn file(root: &Path, name: &str, suffix: &str) -> PathBuf {
    root.join(format!("{name}_{suffix}.txt"))
}

fn read_required(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::parse(path, format!("cannot read: {e}")))
}

fn read_optional(path: &Path) -> Result<Option<String>> {
    if path.exists() {
        read_required(path).map(Some)
    } else {
        Ok(None)
    }
}

/// Parses one integer per non-empty line (first comma-separated field).
fn int_lines(path: &Path, text: &str) -> Result<Vec<i64>> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .enumerate()
        .map(|(i, l)| {
            let first = l.split(',').next().unwrap_or("").trim();
            first
                .parse::<i64>()
                .map_err(|_| Error::parse(path, format!("line {}: expected an integer, got '{l}'", i + 1)))
        })
        .collect()
}

fn pair_lines(path: &Path, text: &str) -> Result<Vec<(usize, usize)>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().map(str::trim).enumerate() {
        if l.is_empty() {
            continue;
        }
        let mut it = l.split(',').map(str::trim);
        let parse = |s: Option<&str>| -> Result<usize> {
            s.and_then(|s| s.parse::<usize>().ok())
                .filter(|&v| v >= 1)
                .ok_or_else(|| Error::parse(path, format!("line {}: malformed edge '{l}'", i + 1)))
        };
        let u = parse(it.next())?;
        let v = parse(it.next())?;
        out.push((u - 1, v - 1));
    }
    Ok(out)
}

/// Reads a TU-format dataset from `root`.
pub fn parse_tu_dataset(root: &Path, name: &str, options: FeatureOptions) -> Result<Dataset> {
    let a_path = file(root, name, "A");
    let ind_path = file(root, name, "graph_indicator");
    let gl_path = file(root, name, "graph_labels");
    let nl_path = file(root, name, "node_labels");
    let el_path = file(root, name, "edge_labels");

    let edges = pair_lines(&a_path, &read_required(&a_path)?)?;
    let indicator = int_lines(&ind_path, &read_required(&ind_path)?)?;
    let graph_labels = int_lines(&gl_path, &read_required(&gl_path)?)?;
    let node_labels = read_optional(&nl_path)?
        .map(|t| int_lines(&nl_path, &t))
        .transpose()?;
    let edge_labels = read_optional(&el_path)?
        .map(|t| int_lines(&el_path, &t))
        .transpose()?;

    let total_nodes = indicator.len();
    if let Some(nl) = &node_labels {
        if nl.len() != total_nodes {
            return Err(Error::parse(
                &nl_path,
                format!("{} node labels for {total_nodes} nodes", nl.len()),
            ));
        }
    }
    if let Some(el) = &edge_labels {
        if el.len() != edges.len() {
            return Err(Error::parse(
                &el_path,
                format!("{} edge labels for {} adjacency lines", el.len(), edges.len()),
            ));
        }
    }

    // graph ids in order of first appearance; nodes numbered locally in order
    let mut graph_index: HashMap<i64, usize> = HashMap::new();
    let mut local = Vec::with_capacity(total_nodes);
    let mut raws: Vec<RawGraph> = Vec::new();
    for &gid in &indicator {
        let next = graph_index.len();
        let g = *graph_index.entry(gid).or_insert(next);
        if g == raws.len() {
            raws.push(RawGraph::default());
        }
        local.push((g, raws[g].n));
        raws[g].n += 1;
    }
    if raws.len() != graph_labels.len() {
        return Err(Error::parse(
            &gl_path,
            format!(
                "{} graph labels but the indicator names {} graphs",
                graph_labels.len(),
                raws.len()
            ),
        ));
    }
    for (raw, &y) in raws.iter_mut().zip(&graph_labels) {
        raw.y = Some(y);
    }
    if let Some(nl) = &node_labels {
        for raw in raws.iter_mut() {
            raw.labels = Some(Vec::with_capacity(raw.n));
        }
        for (node, &l) in nl.iter().enumerate() {
            raws[local[node].0].labels.as_mut().unwrap().push(l);
        }
    }
    if edge_labels.is_some() {
        for raw in raws.iter_mut() {
            raw.edge_labels = Some(Vec::new());
        }
    }

    let mut seen = HashSet::new();
    let mut repeated = 0usize;
    for (i, &(u, v)) in edges.iter().enumerate() {
        for x in [u, v] {
            if x >= total_nodes {
                return Err(Error::parse(
                    &a_path,
                    format!("node {} exceeds the {total_nodes} indicator entries", x + 1),
                ));
            }
        }
        let ((gu, lu), (gv, lv)) = (local[u], local[v]);
        if gu != gv {
            return Err(Error::parse(
                &a_path,
                format!("edge ({}, {}) joins two different graphs", u + 1, v + 1),
            ));
        }
        // each undirected edge normally appears once per direction
        if !seen.insert((u, v)) {
            repeated += 1;
            continue;
        }
        if u > v && seen.contains(&(v, u)) {
            continue;
        }
        let raw = &mut raws[gu];
        raw.edges.push((lu, lv));
        if let (Some(el), Some(dst)) = (&edge_labels, raw.edge_labels.as_mut()) {
            dst.push(el[i]);
        }
    }
    if repeated > 0 {
        log::warn!("{name}: ignored {repeated} repeated adjacency line(s)");
    }
    Dataset::from_raw(name, raws, options)
}

/// Writes `ds` in TU format under `root` with file prefix `ds.name`.
///
/// Node labels are written only when the dataset carried them; degree-derived
/// labels are recomputed on reload.
pub fn write_tu_dataset(ds: &Dataset, root: &Path) -> Result<()> {
    fs::create_dir_all(root)?;
    let mut a = String::new();
    let mut ind = String::new();
    let mut gl = String::new();
    let mut nl = String::new();
    let mut el = String::new();
    let mut offset = 0;
    for (gi, g) in ds.graphs.iter().enumerate() {
        for v in 0..g.node_count() {
            writeln!(ind, "{}", gi + 1).unwrap();
            writeln!(nl, "{}", g.node_labels()[v]).unwrap();
        }
        for (ei, &(u, v)) in g.edges().iter().enumerate() {
            writeln!(a, "{}, {}", u + offset + 1, v + offset + 1).unwrap();
            writeln!(a, "{}, {}", v + offset + 1, u + offset + 1).unwrap();
            if let Some(labels) = g.edge_labels() {
                writeln!(el, "{}", labels[ei]).unwrap();
                writeln!(el, "{}", labels[ei]).unwrap();
            }
        }
        let y = g
            .graph_label()
            .ok_or_else(|| Error::State(format!("graph {gi} has no label; TU requires one")))?;
        writeln!(gl, "{y}").unwrap();
        offset += g.node_count();
    }
    let name = &ds.name;
    fs::write(file(root, name, "A"), a)?;
    fs::write(file(root, name, "graph_indicator"), ind)?;
    fs::write(file(root, name, "graph_labels"), gl)?;
    if ds.label_source == LabelSource::Given {
        fs::write(file(root, name, "node_labels"), nl)?;
    }
    if ds.edge_label_count > 0 {
        fs::write(file(root, name, "edge_labels"), el)?;
    }
    Ok(())
}
