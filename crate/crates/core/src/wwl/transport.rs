//! Exact transportation problem via the primal transportation simplex
//! (u-v potentials on a spanning-tree basis, Bland's rule for pivots).
//!
//! Supplies and demands are integers, so every basic solution is integral
//! and the optimum is found exactly; only the objective is summed in `f64`.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// An optimal integral flow for a balanced transportation instance.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub rows: usize,
    pub cols: usize,
    /// Row-major `rows × cols` flow amounts.
    pub flow: Vec<u64>,
    pub cost: f64,
    pub pivots: usize,
}

impl TransportSolution {
    pub fn at(&self, i: usize, j: usize) -> u64 {
        self.flow[i * self.cols + j]
    }
}

/// Coupling with uniform marginals `1/n` and `1/m`.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub coupling: Vec<f64>,
}

impl TransportPlan {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.coupling[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.at(i, j)).sum())
            .collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| self.at(i, j)).sum())
            .collect()
    }
}

const REDUCED_COST_TOL: f64 = 1e-12;

/// Minimizes `Σ cost[i][j] · flow[i][j]` subject to row sums `supply` and
/// column sums `demand` (which must balance).
pub fn solve_transport(cost: &[f64], supply: &[u64], demand: &[u64]) -> Result<TransportSolution> {
    let (n, m) = (supply.len(), demand.len());
    if n == 0 || m == 0 {
        return Err(Error::shape("transportation problem with an empty side"));
    }
    if cost.len() != n * m {
        return Err(Error::shape(format!(
            "cost matrix has {} entries, expected {}",
            cost.len(),
            n * m
        )));
    }
    if supply.iter().sum::<u64>() != demand.iter().sum::<u64>() {
        return Err(Error::Numeric("unbalanced supply and demand".into()));
    }
    if cost.iter().any(|c| !c.is_finite()) {
        return Err(Error::Numeric("non-finite transport cost".into()));
    }

    let mut flow = vec![0u64; n * m];
    let mut basic = vec![false; n * m];

    // north-west corner start: n + m - 1 basic cells forming a spanning tree
    let (mut s, mut d) = (supply.to_vec(), demand.to_vec());
    let (mut i, mut j) = (0, 0);
    while i < n && j < m {
        let x = s[i].min(d[j]);
        flow[i * m + j] = x;
        basic[i * m + j] = true;
        s[i] -= x;
        d[j] -= x;
        if s[i] == 0 && i + 1 < n {
            i += 1;
        } else {
            j += 1;
        }
    }

    let mut pivots = 0;
    let mut u = vec![0.0; n];
    let mut v = vec![0.0; m];
    loop {
        potentials(cost, &basic, n, m, &mut u, &mut v);
        let entering = (0..n * m).find(|&c| {
            !basic[c] && cost[c] - u[c / m] - v[c % m] < -REDUCED_COST_TOL
        });
        let Some(enter) = entering else { break };
        let (ei, ej) = (enter / m, enter % m);

        // tree path from column ej back to row ei; cells alternate -, +, -, ...
        let path = tree_path(&basic, n, m, ej, ei);
        let minus: Vec<usize> = path.iter().step_by(2).copied().collect();
        let theta = minus.iter().map(|&c| flow[c]).min().expect("cycle has a minus cell");
        let leave = *minus
            .iter()
            .filter(|&&c| flow[c] == theta)
            .min()
            .expect("some cell attains theta");
        for (k, &c) in path.iter().enumerate() {
            if k % 2 == 0 {
                flow[c] -= theta;
            } else {
                flow[c] += theta;
            }
        }
        flow[enter] += theta;
        basic[leave] = false;
        basic[enter] = true;
        pivots += 1;
    }

    let total = flow
        .iter()
        .zip(cost)
        .filter(|(f, _)| **f > 0)
        .map(|(&f, &c)| f as f64 * c)
        .sum();
    Ok(TransportSolution {
        rows: n,
        cols: m,
        flow,
        cost: total,
        pivots,
    })
}

/// Solves `u[i] + v[j] = cost[i][j]` over basic cells with `u[0] = 0`.
fn potentials(cost: &[f64], basic: &[bool], n: usize, m: usize, u: &mut [f64], v: &mut [f64]) {
    let mut row_done = vec![false; n];
    let mut col_done = vec![false; m];
    row_done[0] = true;
    u[0] = 0.0;
    // tree nodes: rows are 0..n, columns are n..n+m
    let mut queue = VecDeque::from([0usize]);
    while let Some(node) = queue.pop_front() {
        if node < n {
            let i = node;
            for j in 0..m {
                if basic[i * m + j] && !col_done[j] {
                    v[j] = cost[i * m + j] - u[i];
                    col_done[j] = true;
                    queue.push_back(n + j);
                }
            }
        } else {
            let j = node - n;
            for i in 0..n {
                if basic[i * m + j] && !row_done[i] {
                    u[i] = cost[i * m + j] - v[j];
                    row_done[i] = true;
                    queue.push_back(i);
                }
            }
        }
    }
    debug_assert!(row_done.iter().all(|&b| b) && col_done.iter().all(|&b| b));
}

/// Cells on the basis-tree path from column `start_col` to row `end_row`.
fn tree_path(basic: &[bool], n: usize, m: usize, start_col: usize, end_row: usize) -> Vec<usize> {
    let start = n + start_col;
    let mut parent = vec![usize::MAX; n + m];
    parent[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(node) = queue.pop_front() {
        if node == end_row {
            break;
        }
        let neighbours: Vec<usize> = if node < n {
            (0..m).filter(|&j| basic[node * m + j]).map(|j| n + j).collect()
        } else {
            let j = node - n;
            (0..n).filter(|&i| basic[i * m + j]).collect()
        };
        for w in neighbours {
            if parent[w] == usize::MAX {
                parent[w] = node;
                queue.push_back(w);
            }
        }
    }
    let mut cells = Vec::new();
    let mut node = end_row;
    while node != start {
        let p = parent[node];
        let (row, col) = if node < n { (node, p - n) } else { (p, node - n) };
        cells.push(row * m + col);
        node = p;
    }
    cells.reverse();
    cells
}
