//! Bradley-Terry scores from pairwise preference votes.
//!
//! Scores are log-strengths, `P(i beats j) = 1 / (1 + exp(s_j - s_i))`,
//! fitted by Newton's method on the log-likelihood with the anchor item
//! pinned at 0. Standard errors come from the inverse observed information
//! of the free scores; the anchor's is 0.

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gradient tolerance per vote (the log-likelihood gradient scales with the vote total).
pub const GRAD_TOL: f64 = 1e-10;
/// Largest Newton step treated as converged.
pub const STEP_TOL: f64 = 1e-12;
pub const MAX_ITERATIONS: usize = 500;
/// Pseudo-wins added each way to every compared pair when smoothing.
pub const SMOOTHING: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub struct VoteMatrix {
    items: Vec<String>,
    /// `wins[i][j]`: how often item `i` was preferred over item `j`.
    wins: Vec<Vec<u64>>,
}

impl VoteMatrix {
    pub fn new(items: Vec<String>, wins: Vec<Vec<u64>>) -> Result<Self> {
        let k = items.len();
        if k < 2 {
            return Err(Error::Votes(format!("need at least two items, got {k}")));
        }
        if wins.len() != k || wins.iter().any(|r| r.len() != k) {
            return Err(Error::Votes(format!("win matrix must be {k}x{k}")));
        }
        if let Some(i) = (0..k).find(|&i| wins[i][i] != 0) {
            return Err(Error::Votes(format!("item {:?} has self-votes", items[i])));
        }
        let mut seen = std::collections::HashSet::new();
        if let Some(dup) = items.iter().find(|n| !seen.insert(n.as_str())) {
            return Err(Error::Votes(format!("duplicate item {dup:?}")));
        }
        Ok(VoteMatrix { items, wins })
    }

    /// Builds the matrix from `(winner, loser, count)` rows; items are
    /// ordered by first appearance.
    pub fn from_records<S: AsRef<str>>(rows: impl IntoIterator<Item = (S, S, u64)>) -> Result<Self> {
        let mut index: HashMap<String, usize> = HashMap::new();
        let mut items = Vec::new();
        let mut triples = Vec::new();
        let mut id = |name: &str, items: &mut Vec<String>| -> usize {
            *index.entry(name.to_string()).or_insert_with(|| {
                items.push(name.to_string());
                items.len() - 1
            })
        };
        for (w, l, c) in rows {
            let (w, l) = (w.as_ref().trim(), l.as_ref().trim());
            if w == l {
                return Err(Error::Votes(format!("row compares {w:?} with itself")));
            }
            let (wi, li) = (id(w, &mut items), id(l, &mut items));
            triples.push((wi, li, c));
        }
        let k = items.len();
        let mut wins = vec![vec![0u64; k]; k];
        for (wi, li, c) in triples {
            wins[wi][li] += c;
        }
        VoteMatrix::new(items, wins)
    }

    /// Reads `winner,loser,count` rows (header optional).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|e| Error::Votes(format!("{}: {e}", path.display())))?;
        let mut rows = Vec::new();
        for (line, rec) in reader.records().enumerate() {
            let rec = rec.map_err(|e| Error::Votes(format!("{}: {e}", path.display())))?;
            if rec.len() != 3 {
                return Err(Error::Votes(format!("{} row {}: expected winner,loser,count", path.display(), line + 1)));
            }
            match rec[2].parse::<u64>() {
                Ok(c) => rows.push((rec[0].to_string(), rec[1].to_string(), c)),
                Err(_) if line == 0 => continue,
                Err(_) => {
                    return Err(Error::Votes(format!("{} row {}: bad count {:?}", path.display(), line + 1, &rec[2])))
                }
            }
        }
        VoteMatrix::from_records(rows)
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn wins(&self, i: usize, j: usize) -> u64 {
        self.wins[i][j]
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Same votes with item `anchor` moved to the front.
    pub fn with_anchor(&self, anchor: &str) -> Result<Self> {
        let a = self
            .items
            .iter()
            .position(|n| n == anchor)
            .ok_or_else(|| Error::Votes(format!("anchor {anchor:?} is not an item")))?;
        let order: Vec<usize> = std::iter::once(a).chain((0..self.len()).filter(|&i| i != a)).collect();
        Ok(self.permuted(&order))
    }

    /// Reorders items so that new item `k` is old item `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        VoteMatrix {
            items: order.iter().map(|&i| self.items[i].clone()).collect(),
            wins: order.iter().map(|&i| order.iter().map(|&j| self.wins[i][j]).collect()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FitOptions {
    /// Add [`SMOOTHING`] pseudo-wins each way on every compared pair.
    pub smoothing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtFit {
    pub items: Vec<String>,
    pub scores: Vec<f64>,
    pub stderr: Vec<f64>,
    pub iterations: usize,
    pub smoothed: bool,
}

/// Logistic link: probability that an item with score `si` beats one with `sj`.
pub fn win_prob(si: f64, sj: f64) -> f64 {
    1.0 / (1.0 + (sj - si).exp())
}

pub fn predict_win_prob(scores: &[f64], i: usize, j: usize) -> f64 {
    win_prob(scores[i], scores[j])
}

fn reachable(k: usize, edge: impl Fn(usize, usize) -> bool) -> Vec<bool> {
    let mut seen = vec![false; k];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(i) = queue.pop_front() {
        for j in 0..k {
            if !seen[j] && edge(i, j) {
                seen[j] = true;
                queue.push_back(j);
            }
        }
    }
    seen
}

fn check_identifiable(v: &VoteMatrix, w: &[Vec<f64>]) -> Result<()> {
    let k = v.len();
    let n = |i: usize, j: usize| w[i][j] + w[j][i];
    if let Some(i) = (0..k).find(|&i| (0..k).all(|j| n(i, j) == 0.0)) {
        return Err(Error::NoComparisons(v.items[i].clone()));
    }
    let seen = reachable(k, |i, j| n(i, j) > 0.0);
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(Error::Disconnected(format!("{:?} cannot be reached from {:?}", v.items[i], v.items[0])));
    }
    // A finite maximum exists iff the directed "beat" graph is strongly connected.
    let forward = reachable(k, |i, j| w[i][j] > 0.0);
    let backward = reachable(k, |i, j| w[j][i] > 0.0);
    if let Some(i) = (0..k).find(|&i| !forward[i] || !backward[i]) {
        let side = if !forward[i] { "never loses to" } else { "never beats" };
        return Err(Error::Separation(format!(
            "{:?} {side} the group containing {:?}",
            v.items[i], v.items[0]
        )));
    }
    Ok(())
}

fn log_likelihood(w: &[Vec<f64>], s: &[f64]) -> f64 {
    let k = s.len();
    let mut ll = 0.0;
    for i in 0..k {
        for j in 0..k {
            if w[i][j] > 0.0 {
                // log σ(s_i - s_j), computed stably
                let d = s[i] - s[j];
                ll -= w[i][j] * if d > 0.0 { (-d).exp().ln_1p() } else { -d + d.exp().ln_1p() };
            }
        }
    }
    ll
}

/// Gradient and negative Hessian of the log-likelihood w.r.t. scores 1..k.
fn derivatives(w: &[Vec<f64>], s: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let k = s.len();
    let mut grad = DVector::zeros(k - 1);
    let mut info = DMatrix::zeros(k - 1, k - 1);
    for i in 0..k {
        for j in (i + 1)..k {
            let n = w[i][j] + w[j][i];
            if n == 0.0 {
                continue;
            }
            let p = win_prob(s[i], s[j]);
            let g = w[i][j] - n * p;
            let h = n * p * (1.0 - p);
            if i > 0 {
                grad[i - 1] += g;
                info[(i - 1, i - 1)] += h;
            }
            if j > 0 {
                grad[j - 1] -= g;
                info[(j - 1, j - 1)] += h;
            }
            if i > 0 && j > 0 {
                info[(i - 1, j - 1)] -= h;
                info[(j - 1, i - 1)] -= h;
            }
        }
    }
    (grad, info)
}

/// Maximum-likelihood fit with the first item as the zero anchor.
pub fn fit_bradley_terry(v: &VoteMatrix, opts: FitOptions) -> Result<BtFit> {
    let k = v.len();
    let mut w: Vec<Vec<f64>> = (0..k).map(|i| (0..k).map(|j| v.wins[i][j] as f64).collect()).collect();
    if opts.smoothing {
        for i in 0..k {
            for j in 0..k {
                if i != j && v.wins[i][j] + v.wins[j][i] > 0 {
                    w[i][j] += SMOOTHING;
                }
            }
        }
    }
    check_identifiable(v, &w)?;

    let total: f64 = w.iter().flatten().sum();
    let tol = GRAD_TOL * total.max(1.0);
    let mut s = vec![0.0; k];
    let mut iterations = 0;
    let mut ll = log_likelihood(&w, &s);
    loop {
        let (grad, info) = derivatives(&w, &s);
        let gnorm = grad.norm();
        let step = info
            .clone()
            .cholesky()
            .map(|c| c.solve(&grad))
            .ok_or(Error::NonConvergence { iterations, grad_norm: gnorm })?;
        if gnorm <= tol || step.amax() <= STEP_TOL {
            let cov = info
                .try_inverse()
                .ok_or(Error::NonConvergence { iterations, grad_norm: gnorm })?;
            let mut stderr = vec![0.0];
            stderr.extend((0..k - 1).map(|i| cov[(i, i)].max(0.0).sqrt()));
            return Ok(BtFit { items: v.items.clone(), scores: s, stderr, iterations, smoothed: opts.smoothing });
        }
        if iterations >= MAX_ITERATIONS {
            return Err(Error::NonConvergence { iterations, grad_norm: gnorm });
        }
        iterations += 1;
        // Step halving keeps the likelihood non-decreasing.
        let mut t = 1.0;
        loop {
            let trial: Vec<f64> = std::iter::once(0.0).chain((0..k - 1).map(|i| s[i + 1] + t * step[i])).collect();
            let trial_ll = log_likelihood(&w, &trial);
            if trial_ll >= ll || t < 1e-8 {
                s = trial;
                ll = trial_ll;
                break;
            }
            t *= 0.5;
        }
    }
}
