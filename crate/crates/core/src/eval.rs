//! Repeated stratified k-fold evaluation with an L2-regularized logistic
//! regression (one-vs-rest), `C` picked by inner cross-validation.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::gemm;
use crate::train::GraphEmbedding;

pub const DEFAULT_C_GRID: [f64; 5] = [1e-3, 1e-2, 0.1, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyOptions {
    pub folds: usize,
    pub runs: usize,
    pub c_grid: Vec<f64>,
    /// Folds of the inner split that selects `C` on each training part.
    pub inner_folds: usize,
    pub seed: u64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            folds: 10,
            runs: 5,
            c_grid: DEFAULT_C_GRID.to_vec(),
            inner_folds: 3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Test accuracy in [0, 1] of every fold, one list per run.
    pub fold_accuracies: Vec<Vec<f64>>,
    /// `C` selected for every fold, one list per run.
    pub selected_c: Vec<Vec<f64>>,
    /// Mean over all folds of all runs.
    pub mean: f64,
    /// Population standard deviation of the per-run means.
    pub std: f64,
    pub runs: usize,
}

impl EvalReport {
    fn from_folds(fold_accuracies: Vec<Vec<f64>>, selected_c: Vec<Vec<f64>>) -> Self {
        let run_means: Vec<f64> = fold_accuracies.iter().map(|r| mean(r)).collect();
        let all: Vec<f64> = fold_accuracies.iter().flatten().copied().collect();
        let m = mean(&run_means);
        let var = run_means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / run_means.len() as f64;
        EvalReport {
            runs: fold_accuracies.len(),
            mean: mean(&all),
            std: var.sqrt(),
            fold_accuracies,
            selected_c,
        }
    }

    pub fn run_means(&self) -> Vec<f64> {
        self.fold_accuracies.iter().map(|r| mean(r)).collect()
    }
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "accuracy {:.2} ± {:.2} % over {} run(s)",
            100.0 * self.mean,
            100.0 * self.std,
            self.runs
        )
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Labeled design matrix in a canonical row order.
struct Data {
    x: Vec<f64>,
    y: Vec<usize>,
    dim: usize,
    classes: usize,
}

impl Data {
    fn new(embeddings: &[GraphEmbedding]) -> Result<Self> {
        let dim = embeddings.first().map_or(0, |e| e.vector.len());
        let mut rows: Vec<(usize, &[f64])> = Vec::with_capacity(embeddings.len());
        for e in embeddings {
            let y = e
                .label
                .ok_or_else(|| Error::Eval(format!("graph {} has no label", e.graph_id)))?;
            if e.vector.len() != dim {
                return Err(Error::Eval("embeddings differ in dimension".into()));
            }
            if e.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Eval(format!("graph {} has a non-finite embedding", e.graph_id)));
            }
            rows.push((y, &e.vector));
        }
        // input order must not matter
        rows.sort_by(|a, b| {
            a.0.cmp(&b.0).then_with(|| {
                let ka = a.1.iter().map(|v| v.to_bits());
                ka.cmp(b.1.iter().map(|v| v.to_bits()))
            })
        });
        let mut labels: Vec<usize> = rows.iter().map(|r| r.0).collect();
        labels.dedup();
        if labels.len() < 2 {
            return Err(Error::Eval("need at least two classes".into()));
        }
        let y = rows
            .iter()
            .map(|r| labels.binary_search(&r.0).expect("label listed"))
            .collect();
        Ok(Data {
            x: rows.iter().flat_map(|r| r.1.iter().copied()).collect(),
            y,
            dim,
            classes: labels.len(),
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

/// Assigns every index to one of `k` folds, stratified by label.
fn stratified_folds(y: &[usize], classes: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut fold = vec![0; y.len()];
    let mut next = 0;
    for c in 0..classes {
        let mut idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == c).collect();
        idx.shuffle(rng);
        for i in idx {
            fold[i] = next % k;
            next += 1;
        }
    }
    fold
}

/// Standardized rows of `idx` with a trailing bias column, using the
/// statistics of `fit_idx`.
struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    fn fit(data: &Data, idx: &[usize]) -> Self {
        let d = data.dim;
        let n = idx.len() as f64;
        let mut mean = vec![0.0; d];
        for &i in idx {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for &i in idx {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    1.0 / sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    fn design(&self, data: &Data, idx: &[usize]) -> Vec<f64> {
        let mut out = Vec::with_capacity(idx.len() * (data.dim + 1));
        for &i in idx {
            for ((v, m), s) in data.row(i).iter().zip(&self.mean).zip(&self.scale) {
                out.push((v - m) * s);
            }
            out.push(1.0);
        }
        out
    }
}

fn softplus(a: f64) -> f64 {
    a.max(0.0) + (-a.abs()).exp().ln_1p()
}

fn sigmoid(a: f64) -> f64 {
    crate::tensor::sigmoid(a)
}

/// Minimizes `½‖w‖² + C Σ log(1 + exp(−y_i (w·x_i + b)))` by damped Newton
/// steps. `x` is `n × p` with the bias column last; `y` is ±1.
fn fit_logistic(x: &[f64], y: &[f64], p: usize, c: f64, start: Option<&[f64]>) -> Vec<f64> {
    let n = y.len();
    let mut theta = start.map_or_else(|| vec![0.0; p], <[f64]>::to_vec);
    let objective = |theta: &[f64], z: &mut Vec<f64>| {
        margins(x, theta, p, z);
        let reg: f64 = theta[..p - 1].iter().map(|w| w * w).sum::<f64>() / 2.0;
        reg + c * z.iter().zip(y).map(|(zi, yi)| softplus(-yi * zi)).sum::<f64>()
    };
    let mut z = Vec::with_capacity(n);
    let mut f = objective(&theta, &mut z);
    let mut scaled = vec![0.0; n * p];
    let mut h = vec![0.0; p * p];
    for _ in 0..100 {
        let mut grad: Vec<f64> = theta.clone();
        grad[p - 1] = 0.0;
        for i in 0..n {
            let r = -y[i] * sigmoid(-y[i] * z[i]) * c;
            let d = sigmoid(z[i]) * (1.0 - sigmoid(z[i]));
            let sd = (c * d).sqrt();
            let row = &x[i * p..(i + 1) * p];
            for j in 0..p {
                grad[j] += r * row[j];
                scaled[i * p + j] = sd * row[j];
            }
        }
        gemm(&scaled, n, p, true, &scaled, n, p, false, &mut h, false);
        for j in 0..p {
            h[j * p + j] += if j + 1 < p { 1.0 } else { 1e-10 };
        }
        let step = match cholesky_solve(&mut h, p, &grad) {
            Some(s) => s,
            None => break,
        };
        let decrement: f64 = grad.iter().zip(&step).map(|(g, s)| g * s).sum();
        if decrement <= 1e-12 * (1.0 + f.abs()) {
            break;
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a - t * s).collect();
            let ft = objective(&trial, &mut z);
            if ft <= f - 1e-4 * t * decrement {
                theta = trial;
                f = ft;
                accepted = true;
                break;
            }
            t /= 2.0;
        }
        if !accepted {
            margins(x, &theta, p, &mut z);
            break;
        }
    }
    theta
}

fn margins(x: &[f64], theta: &[f64], p: usize, z: &mut Vec<f64>) {
    z.clear();
    z.extend(x.chunks_exact(p).map(|row| row.iter().zip(theta).map(|(a, b)| a * b).sum::<f64>()));
}

/// Solves `A s = b` for symmetric positive definite `A` (overwritten).
fn cholesky_solve(a: &mut [f64], p: usize, b: &[f64]) -> Option<Vec<f64>> {
    for j in 0..p {
        let mut d = a[j * p + j];
        for k in 0..j {
            d -= a[j * p + k] * a[j * p + k];
        }
        if d <= 0.0 || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        a[j * p + j] = d;
        for i in j + 1..p {
            let mut s = a[i * p + j];
            for k in 0..j {
                s -= a[i * p + k] * a[j * p + k];
            }
            a[i * p + j] = s / d;
        }
    }
    let mut s = b.to_vec();
    for i in 0..p {
        for k in 0..i {
            s[i] -= a[i * p + k] * s[k];
        }
        s[i] /= a[i * p + i];
    }
    for i in (0..p).rev() {
        for k in i + 1..p {
            s[i] -= a[k * p + i] * s[k];
        }
        s[i] /= a[i * p + i];
    }
    Some(s)
}

/// One-vs-rest model: one weight vector per class (a single one for two
/// classes).
struct Model {
    weights: Vec<Vec<f64>>,
}

impl Model {
    fn fit(x: &[f64], y: &[usize], p: usize, classes: usize, c: f64, warm: Option<&Model>) -> Model {
        let targets: Vec<usize> = if classes == 2 { vec![1] } else { (0..classes).collect() };
        let weights = targets
            .iter()
            .enumerate()
            .map(|(k, &cls)| {
                let yy: Vec<f64> = y.iter().map(|&l| if l == cls { 1.0 } else { -1.0 }).collect();
                fit_logistic(x, &yy, p, c, warm.map(|m| m.weights[k].as_slice()))
            })
            .collect();
        Model { weights }
    }

    fn predict(&self, row: &[f64]) -> usize {
        let score = |w: &Vec<f64>| row.iter().zip(w).map(|(a, b)| a * b).sum::<f64>();
        if self.weights.len() == 1 {
            usize::from(score(&self.weights[0]) > 0.0)
        } else {
            let scores: Vec<f64> = self.weights.iter().map(score).collect();
            (0..scores.len())
                .max_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(b.cmp(&a)))
                .expect("at least one class")
        }
    }

    fn accuracy(&self, x: &[f64], y: &[usize], p: usize) -> f64 {
        let hits = x.chunks_exact(p).zip(y).filter(|(row, &l)| self.predict(row) == l).count();
        hits as f64 / y.len() as f64
    }
}

/// Fits on `train`, returns test accuracy and the chosen `C`.
fn fit_and_score(data: &Data, train: &[usize], test: &[usize], opts: &ClassifyOptions, rng: &mut ChaCha8Rng) -> (f64, f64) {
    let p = data.dim + 1;
    let st = Standardizer::fit(data, train);
    let xtr = st.design(data, train);
    let ytr: Vec<usize> = train.iter().map(|&i| data.y[i]).collect();

    let c = if opts.c_grid.len() == 1 {
        opts.c_grid[0]
    } else {
        let inner = stratified_folds(&ytr, data.classes, opts.inner_folds.max(2), rng);
        let mut grid = opts.c_grid.clone();
        grid.sort_by(f64::total_cmp);
        let mut score = vec![0.0; grid.len()];
        for f in 0..opts.inner_folds.max(2) {
            let (fit_rows, val_rows): (Vec<usize>, Vec<usize>) = (0..ytr.len()).partition(|&i| inner[i] != f);
            if val_rows.is_empty() || fit_rows.is_empty() {
                continue;
            }
            let pick = |rows: &[usize]| -> (Vec<f64>, Vec<usize>) {
                (
                    rows.iter().flat_map(|&i| xtr[i * p..(i + 1) * p].iter().copied()).collect(),
                    rows.iter().map(|&i| ytr[i]).collect(),
                )
            };
            let (xf, yf) = pick(&fit_rows);
            let (xv, yv) = pick(&val_rows);
            let mut warm: Option<Model> = None;
            for (k, &c) in grid.iter().enumerate() {
                let m = Model::fit(&xf, &yf, p, data.classes, c, warm.as_ref());
                score[k] += m.accuracy(&xv, &yv, p);
                warm = Some(m);
            }
        }
        // ties go to the stronger regularization
        let best = (0..grid.len())
            .max_by(|&a, &b| score[a].total_cmp(&score[b]).then(b.cmp(&a)))
            .expect("non-empty grid");
        grid[best]
    };

    let model = Model::fit(&xtr, &ytr, p, data.classes, c, None);
    let xte = st.design(data, test);
    let yte: Vec<usize> = test.iter().map(|&i| data.y[i]).collect();
    (model.accuracy(&xte, &yte, p), c)
}

/// Repeated stratified k-fold test accuracy of the linear classifier.
pub fn classify_cv(embeddings: &[GraphEmbedding], opts: &ClassifyOptions) -> Result<EvalReport> {
    if opts.folds < 2 || opts.runs == 0 {
        return Err(Error::Config("need at least 2 folds and 1 run".into()));
    }
    if opts.c_grid.is_empty() || opts.c_grid.iter().any(|c| !(*c > 0.0 && c.is_finite())) {
        return Err(Error::Config("C grid must hold positive values".into()));
    }
    let data = Data::new(embeddings)?;
    if data.y.len() < opts.folds {
        return Err(Error::Eval(format!(
            "{} labeled graphs for {} folds",
            data.y.len(),
            opts.folds
        )));
    }
    let mut accs = Vec::with_capacity(opts.runs);
    let mut chosen = Vec::with_capacity(opts.runs);
    for run in 0..opts.runs {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed.wrapping_add(run as u64));
        let fold = stratified_folds(&data.y, data.classes, opts.folds, &mut rng);
        let mut run_acc = Vec::with_capacity(opts.folds);
        let mut run_c = Vec::with_capacity(opts.folds);
        for f in 0..opts.folds {
            let (train, test): (Vec<usize>, Vec<usize>) = (0..data.y.len()).partition(|&i| fold[i] != f);
            let (acc, c) = fit_and_score(&data, &train, &test, opts, &mut rng);
            run_acc.push(acc);
            run_c.push(c);
        }
        log::debug!("run {}: mean accuracy {:.4}", run + 1, mean(&run_acc));
        accs.push(run_acc);
        chosen.push(run_c);
    }
    Ok(EvalReport::from_folds(accs, chosen))
}
