#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;

use dgpm::graph::{Dataset, FeatureOptions, Graph, RawGraph};

pub fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

/// The MUTAG benchmark shipped under `data/`, if present.
pub fn mutag() -> Option<Dataset> {
    let dir = data_dir("MUTAG");
    if !dir.is_dir() {
        return None;
    }
    Some(Dataset::load(&dir, FeatureOptions::default()).expect("MUTAG parses"))
}

/// Random connected labelled graph on `n` nodes (tree plus a few chords).
pub fn random_raw<R: Rng>(n: usize, labels: i64, rng: &mut R) -> RawGraph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.gen_range(0..v), v)).collect();
    for _ in 0..rng.gen_range(0..=n / 2) {
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && !edges.contains(&(u, v)) && !edges.contains(&(v, u)) {
            edges.push((u, v));
        }
    }
    RawGraph {
        n,
        edges,
        labels: Some((0..n).map(|_| rng.gen_range(0..labels)).collect()),
        edge_labels: None,
        y: Some(rng.gen_range(0..2)),
    }
}

/// A dataset of `count` random graphs with node counts in `sizes`.
/// Label 0 is forced to appear so one-hot widths agree across calls.
pub fn random_dataset<R: Rng>(count: usize, sizes: std::ops::RangeInclusive<usize>, rng: &mut R) -> Dataset {
    let mut raws: Vec<RawGraph> = (0..count)
        .map(|_| {
            let n = rng.gen_range(sizes.clone());
            random_raw(n, 4, rng)
        })
        .collect();
    for (k, l) in (0..4).enumerate() {
        if let Some(ls) = raws[k % count].labels.as_mut() {
            ls[0] = l;
        }
    }
    raws[0].y = Some(0);
    raws[count - 1].y = Some(1);
    Dataset::from_raw("random", raws, FeatureOptions::default()).unwrap()
}

pub fn graph_refs(ds: &Dataset) -> Vec<&Graph> {
    ds.graphs.iter().collect()
}

/// Minimum transport cost between uniform distributions over `n` rows and
/// `m` columns, found by enumerating every basis of the transportation
/// polytope. Masses are scaled by `n·m` so feasibility checks are exact.
///
/// A basis is a set of `n + m − 1` cells forming a spanning tree of the
/// bipartite row/column graph; its flow is forced by peeling leaves.
pub fn brute_force_transport(cost: &[f64], n: usize, m: usize) -> f64 {
    let cells = n * m;
    let k = n + m - 1;
    let mut best = f64::INFINITY;
    let mut chosen: Vec<usize> = (0..k).collect();
    loop {
        if let Some(c) = basis_cost(cost, n, m, &chosen) {
            best = best.min(c);
        }
        // next k-combination of 0..cells in lexicographic order
        let mut i = k;
        while i > 0 && chosen[i - 1] == cells - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        chosen[i - 1] += 1;
        for j in i..k {
            chosen[j] = chosen[j - 1] + 1;
        }
    }
    best / (n * m) as f64
}

fn basis_cost(cost: &[f64], n: usize, m: usize, cells: &[usize]) -> Option<f64> {
    let mut supply = vec![m as i64; n];
    let mut demand = vec![n as i64; m];
    let mut open: Vec<usize> = cells.to_vec();
    let mut total = 0.0;
    while !open.is_empty() {
        let row_deg = |r: usize, open: &[usize]| open.iter().filter(|&&c| c / m == r).count();
        let col_deg = |q: usize, open: &[usize]| open.iter().filter(|&&c| c % m == q).count();
        let leaf = open.iter().position(|&c| row_deg(c / m, &open) == 1 || col_deg(c % m, &open) == 1)?;
        let c = open.swap_remove(leaf);
        let (r, q) = (c / m, c % m);
        // a leaf row (column) must ship everything it has left through this cell
        let flow = if row_deg(r, &open) == 0 { supply[r] } else { demand[q] };
        if flow < 0 {
            return None;
        }
        supply[r] -= flow;
        demand[q] -= flow;
        total += flow as f64 * cost[c];
    }
    if supply.iter().chain(&demand).all(|&s| s == 0) {
        Some(total)
    } else {
        None
    }
}
