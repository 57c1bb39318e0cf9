//! Greedy point exchange for clustered designs.
//!
//! Gradient methods locate cluster positions well but can stall with the
//! wrong number of points per cluster. Point exchange repeatedly swaps one
//! design point for a candidate location, taking the swap that most improves
//! the fixed-sample criterion `Ĵ`, until no swap helps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimate::{criterion, j_hat, Objective};
use crate::linalg::Matrix;
use crate::models::{FisherModel, ThetaSample};

pub const DEFAULT_PK_RADIUS: f64 = 0.25;
pub const DEFAULT_GEOSTAT_RADIUS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterSummary {
    pub centers: Vec<Vec<f64>>,
    /// Point index → cluster index.
    pub assignment: Vec<usize>,
    pub counts: Vec<usize>,
}

fn split_points(coords: &[f64], coord_dim: usize) -> Vec<&[f64]> {
    coords.chunks(coord_dim).collect()
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Single-linkage clustering with link distance `radius`.
///
/// Times are sorted and consecutive gaps within `radius` are merged; planar
/// points are merged whenever any pair lies within `radius`. Clusters are
/// numbered by their smallest coordinate (times) or smallest member index
/// (locations).
pub fn cluster_design(coords: &[f64], coord_dim: usize, radius: f64) -> ClusterSummary {
    debug_assert!(radius > 0.0);
    let pts = split_points(coords, coord_dim);
    let n = pts.len();
    let mut assignment = vec![usize::MAX; n];
    let mut n_clusters = 0;

    if coord_dim == 1 {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(a.cmp(&b)));
        let mut prev: Option<f64> = None;
        for &i in &order {
            let x = pts[i][0];
            match prev {
                Some(p) if x - p <= radius => {}
                _ => n_clusters += 1,
            }
            assignment[i] = n_clusters - 1;
            prev = Some(x);
        }
    } else {
        // union-find over all close pairs
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        let r2 = radius * radius;
        for i in 0..n {
            for j in 0..i {
                if dist2(pts[i], pts[j]) <= r2 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut label = vec![usize::MAX; n];
        for (i, slot) in assignment.iter_mut().enumerate() {
            let root = find(&mut parent, i);
            if label[root] == usize::MAX {
                label[root] = n_clusters;
                n_clusters += 1;
            }
            *slot = label[root];
        }
    }

    let mut counts = vec![0usize; n_clusters];
    let mut centers = vec![vec![0.0; coord_dim]; n_clusters];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (acc, v) in centers[c].iter_mut().zip(pts[i]) {
            *acc += v;
        }
    }
    for (c, center) in centers.iter_mut().enumerate() {
        for v in center.iter_mut() {
            *v /= counts[c] as f64;
        }
    }
    ClusterSummary {
        centers,
        assignment,
        counts,
    }
}

/// Cluster centres of the design followed by its original points, without
/// exact duplicates.
pub fn candidate_pool(coords: &[f64], coord_dim: usize, radius: f64) -> Vec<Vec<f64>> {
    let summary = cluster_design(coords, coord_dim, radius);
    let mut pool: Vec<Vec<f64>> = Vec::new();
    for cand in summary
        .centers
        .into_iter()
        .chain(coords.chunks(coord_dim).map(|c| c.to_vec()))
    {
        if !pool.contains(&cand) {
            pool.push(cand);
        }
    }
    pool
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExchangeResult {
    /// Natural coordinates after exchange.
    pub design: Vec<f64>,
    pub j_hat_before: f64,
    pub j_hat_after: f64,
    /// `Ĵ` after each accepted swap, starting with the input value.
    pub history: Vec<f64>,
    pub iterations: usize,
}

/// Evaluates `Ĵ` of candidate designs, using per-point contributions when the
/// model's information is additive over points.
enum Scorer<'a, M: FisherModel + ?Sized> {
    Additive {
        pool_terms: Vec<Matrix>,
        kind: Objective,
    },
    Direct {
        model: &'a M,
        fixed: &'a [ThetaSample],
        kind: Objective,
    },
}

fn mean_point_fisher<M: FisherModel + ?Sized>(
    model: &M,
    fixed: &[ThetaSample],
    point: &[f64],
) -> Option<Result<Matrix>> {
    let p = model.spec().p;
    let mut acc = Matrix::zeros(p, p);
    for theta in fixed {
        match model.point_fisher(theta, point)? {
            Ok(f) => {
                if let Err(e) = acc.add_assign_scaled(&f, 1.0) {
                    return Some(Err(e));
                }
            }
            Err(e) => return Some(Err(e)),
        }
    }
    Some(Ok(acc.scaled(1.0 / fixed.len() as f64)))
}

impl<'a, M: FisherModel + ?Sized> Scorer<'a, M> {
    fn new(
        model: &'a M,
        fixed: &'a [ThetaSample],
        pool: &[Vec<f64>],
        kind: Objective,
    ) -> Result<Self> {
        let mut terms = Vec::with_capacity(pool.len());
        for cand in pool {
            match mean_point_fisher(model, fixed, cand) {
                Some(t) => terms.push(t?),
                None => return Ok(Scorer::Direct { model, fixed, kind }),
            }
        }
        Ok(Scorer::Additive {
            pool_terms: terms,
            kind,
        })
    }

    /// `slots[i]` is the pool index occupied by design point `i`.
    fn score(&self, slots: &[usize], pool: &[Vec<f64>]) -> Result<f64> {
        match self {
            Scorer::Additive { pool_terms, kind } => {
                let p = pool_terms[0].rows();
                let mut acc = Matrix::zeros(p, p);
                for &s in slots {
                    acc.add_assign_scaled(&pool_terms[s], 1.0)?;
                }
                Ok(criterion(&acc, *kind))
            }
            Scorer::Direct { model, fixed, kind } => {
                j_hat(*model, fixed, &flatten(slots, pool), *kind)
            }
        }
    }
}

fn flatten(slots: &[usize], pool: &[Vec<f64>]) -> Vec<f64> {
    slots
        .iter()
        .flat_map(|&s| pool[s].iter().copied())
        .collect()
}

/// Greedy best-improvement point exchange.
///
/// `design` is in natural coordinates. Every design point must be expressible
/// as a pool entry or is added to the pool. Ties go to the smallest
/// `(point index, candidate index)`.
pub fn point_exchange<M: FisherModel + ?Sized>(
    model: &M,
    fixed: &[ThetaSample],
    design: &[f64],
    pool: &[Vec<f64>],
    kind: Objective,
    max_iters: usize,
) -> Result<ExchangeResult> {
    if pool.is_empty() {
        return Err(Error::Empty("candidate pool"));
    }
    if fixed.is_empty() {
        return Err(Error::Empty("fixed theta sample"));
    }
    let coord_dim = model.spec().coord_dim;
    if pool.iter().any(|c| c.len() != coord_dim) {
        return Err(Error::dims(coord_dim, "pool entry of another size"));
    }
    let mut pool: Vec<Vec<f64>> = pool.to_vec();
    let mut slots = Vec::with_capacity(design.len() / coord_dim);
    for pt in design.chunks(coord_dim) {
        let idx = match pool.iter().position(|c| c.as_slice() == pt) {
            Some(i) => i,
            None => {
                pool.push(pt.to_vec());
                pool.len() - 1
            }
        };
        slots.push(idx);
    }

    let scorer = Scorer::new(model, fixed, &pool, kind)?;
    let j_before = j_hat(model, fixed, design, kind)?;
    let mut current = scorer.score(&slots, &pool)?;
    let mut history = vec![j_before];
    let mut iterations = 0;

    while iterations < max_iters {
        iterations += 1;
        let moves: Vec<(usize, usize)> = (0..slots.len())
            .flat_map(|i| (0..pool.len()).map(move |c| (i, c)))
            .filter(|&(i, c)| slots[i] != c)
            .collect();
        let scores: Vec<Result<f64>> = moves
            .par_iter()
            .map(|&(i, c)| {
                let mut trial = slots.clone();
                trial[i] = c;
                scorer.score(&trial, &pool)
            })
            .collect();
        let mut best: Option<(usize, f64)> = None;
        for (k, s) in scores.into_iter().enumerate() {
            let s = s?;
            if !s.is_finite() {
                continue;
            }
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
        match best {
            Some((k, s)) if s > current + 1e-12 * current.abs() => {
                let (i, c) = moves[k];
                slots[i] = c;
                current = s;
                history.push(j_hat(model, fixed, &flatten(&slots, &pool), kind)?);
            }
            _ => break,
        }
    }

    let out = flatten(&slots, &pool);
    let j_after = j_hat(model, fixed, &out, kind)?;
    Ok(ExchangeResult {
        design: out,
        j_hat_before: j_before,
        j_hat_after: j_after,
        history,
        iterations,
    })
}
