//! Comparison policies: uniform random, one-step feasibility probability,
//! objective-alternating straddle, and optimistic clustering (MOO+Cluster).

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::acquisition::{feasibility_gate_hard, SoftAcqParams};
use crate::error::{check_dim, invalid, Error, Result};
use crate::geometry::{sq_dist, OutcomeSet};
use crate::gp::{ucb_values, GpModel};
use crate::normal;

/// Straddle exploration weight.
pub const STRADDLE_KAPPA: f64 = 1.96;

const DEGENERATE_STD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Random,
    OneStep,
    Straddle,
    MooCluster,
    MocCas,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Random,
        PolicyKind::OneStep,
        PolicyKind::Straddle,
        PolicyKind::MooCluster,
        PolicyKind::MocCas,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Random => "random",
            PolicyKind::OneStep => "one_step",
            PolicyKind::Straddle => "straddle",
            PolicyKind::MooCluster => "moo_cluster",
            PolicyKind::MocCas => "moc_cas",
        }
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| invalid("policy", format!("unknown policy `{s}`")))
    }
}

/// Uniform index into a shortlist; consumes exactly one draw.
pub fn score_random<R: Rng>(shortlist_size: usize, rng: &mut R) -> Result<usize> {
    if shortlist_size == 0 {
        return Err(Error::EmptyShortlist);
    }
    Ok(rng.random_range(0..shortlist_size))
}

/// `P(f_i(x) ≥ τ_i ∀i)` under independent Gaussian posteriors.
pub fn one_step_from_posterior(means: &[f64], stds: &[f64], thresholds: &[f64]) -> f64 {
    means
        .iter()
        .zip(stds)
        .zip(thresholds)
        .map(|((mu, sd), tau)| {
            if *sd < DEGENERATE_STD {
                if mu >= tau {
                    1.0
                } else {
                    0.0
                }
            } else {
                normal::cdf((mu - tau) / sd)
            }
        })
        .product()
}

pub fn score_one_step(models: &[GpModel], x: &[f64], thresholds: &[f64]) -> Result<f64> {
    check_dim(models.len(), thresholds.len())?;
    let (means, stds) = predict_all(models, x)?;
    Ok(one_step_from_posterior(&means, &stds, thresholds))
}

/// Objective targeted at iteration `t ≥ 1` (0-based): cycles from the first.
pub fn straddle_objective(t: usize, m: usize) -> usize {
    (t.max(1) - 1) % m
}

pub fn straddle_from_posterior(mean: f64, std: f64, threshold: f64) -> f64 {
    STRADDLE_KAPPA * std - (mean - threshold).abs()
}

pub fn score_straddle(models: &[GpModel], x: &[f64], thresholds: &[f64], t: usize) -> Result<f64> {
    check_dim(models.len(), thresholds.len())?;
    let i = straddle_objective(t, models.len());
    let (mu, sd) = models[i].predict(x)?;
    Ok(straddle_from_posterior(mu, sd, thresholds[i]))
}

fn predict_all(models: &[GpModel], x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut means = Vec::with_capacity(models.len());
    let mut stds = Vec::with_capacity(models.len());
    for m in models {
        let (mu, sd) = m.predict(x)?;
        means.push(mu);
        stds.push(sd);
    }
    Ok((means, stds))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub k: usize,
    pub max_iters: usize,
    pub seed: u64,
}

impl Default for ClusterConfig {
    fn default() -> Self {
        Self {
            k: 5,
            max_iters: 50,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeans {
    pub assignment: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Inertia after each assignment step.
    pub inertia_trace: Vec<f64>,
}

impl KMeans {
    pub fn inertia(&self) -> f64 {
        self.inertia_trace.last().copied().unwrap_or(0.0)
    }
}

/// k-means++ seeding followed by Lloyd iterations until the assignment stops
/// changing or `max_iters` is reached.
pub fn kmeans(points: &[Vec<f64>], config: &ClusterConfig) -> Result<KMeans> {
    let n = points.len();
    if n == 0 {
        return Err(invalid("points", "k-means needs at least one point"));
    }
    if config.k == 0 {
        return Err(invalid("k", "must be >= 1"));
    }
    let dim = points[0].len();
    for p in points {
        check_dim(dim, p.len())?;
    }
    let k = config.k.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centroids = plus_plus_seeds(points, k, &mut rng);

    let mut assignment = assign(points, &centroids);
    let mut inertia_trace = vec![inertia(points, &centroids, &assignment)];
    for _ in 0..config.max_iters {
        centroids = update_centroids(points, &assignment, &centroids);
        let next = assign(points, &centroids);
        inertia_trace.push(inertia(points, &centroids, &next));
        if next == assignment {
            break;
        }
        assignment = next;
    }
    Ok(KMeans {
        assignment,
        centroids,
        inertia_trace,
    })
}

fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, w) in d2.iter().enumerate() {
                if target < *w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.push(points[pick].clone());
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(sq_dist(p, &points[pick]));
        }
    }
    centroids
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = sq_dist(p, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best.0
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> Vec<usize> {
    points.iter().map(|p| nearest(p, centroids)).collect()
}

fn inertia(points: &[Vec<f64>], centroids: &[Vec<f64>], assignment: &[usize]) -> f64 {
    points
        .iter()
        .zip(assignment)
        .map(|(p, a)| sq_dist(p, &centroids[*a]))
        .sum()
}

fn update_centroids(points: &[Vec<f64>], assignment: &[usize], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = old.len();
    let dim = points[0].len();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, a) in points.iter().zip(assignment) {
        counts[*a] += 1;
        for (s, v) in sums[*a].iter_mut().zip(p) {
            *s += v;
        }
    }
    let mut centroids: Vec<Vec<f64>> = sums
        .into_iter()
        .zip(&counts)
        .zip(old)
        .map(|((s, c), prev)| {
            if *c == 0 {
                prev.clone()
            } else {
                s.into_iter().map(|v| v / *c as f64).collect()
            }
        })
        .collect();
    // An empty cluster moves to the point worst served by its centroid.
    for j in 0..k {
        if counts[j] > 0 {
            continue;
        }
        let far = points
            .iter()
            .zip(assignment)
            .enumerate()
            .map(|(i, (p, a))| (i, sq_dist(p, &centroids[*a])))
            .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
        centroids[j] = points[far.0].clone();
    }
    centroids
}

/// MOO+Cluster selection over a shortlist of inputs.
///
/// Keeps optimistically feasible candidates, clusters their `U` with k-means,
/// scores each cluster by how many members lie at least `r` from every prior
/// outcome, then returns the member of the best cluster farthest from the
/// prior outcomes. With no optimistically feasible candidate it falls back to
/// the one-step maximizer. Returns a position in `shortlist`.
pub fn select_moo_cluster(
    models: &[GpModel],
    shortlist: &[Vec<f64>],
    beta: f64,
    params: &SoftAcqParams,
    prior: &OutcomeSet,
    config: &ClusterConfig,
) -> Result<usize> {
    if shortlist.is_empty() {
        return Err(Error::EmptyShortlist);
    }
    let mut u_all = Vec::with_capacity(shortlist.len());
    for x in shortlist {
        u_all.push(ucb_values(models, x, beta)?);
    }
    moo_cluster_from_ucb(models, shortlist, &u_all, params, prior, config)
}

pub(crate) fn moo_cluster_from_ucb(
    models: &[GpModel],
    shortlist: &[Vec<f64>],
    u_all: &[Vec<f64>],
    params: &SoftAcqParams,
    prior: &OutcomeSet,
    config: &ClusterConfig,
) -> Result<usize> {
    let mut kept = Vec::new();
    for (i, u) in u_all.iter().enumerate() {
        if feasibility_gate_hard(u, &params.thresholds)? {
            kept.push(i);
        }
    }
    if kept.is_empty() {
        let mut best = (0, f64::NEG_INFINITY);
        for (i, x) in shortlist.iter().enumerate() {
            let s = score_one_step(models, x, &params.thresholds)?;
            if s > best.1 {
                best = (i, s);
            }
        }
        return Ok(best.0);
    }

    let points: Vec<Vec<f64>> = kept.iter().map(|&i| u_all[i].clone()).collect();
    let km = kmeans(&points, config)?;
    let k = km.centroids.len();
    let r2 = params.r * params.r;
    let mut score = vec![0usize; k];
    let mut size = vec![0usize; k];
    for (p, &c) in points.iter().zip(&km.assignment) {
        size[c] += 1;
        if !prior.points().iter().any(|y| sq_dist(y, p) < r2) {
            score[c] += 1;
        }
    }
    let best_cluster = (0..k)
        .filter(|&c| size[c] > 0)
        .max_by(|&a, &b| (score[a], size[a]).cmp(&(score[b], size[b])).then(b.cmp(&a)))
        .expect("at least one nonempty cluster");

    let mut pick: Option<(usize, f64)> = None;
    for (slot, &c) in km.assignment.iter().enumerate() {
        if c != best_cluster {
            continue;
        }
        let dist = if prior.is_empty() {
            0.0
        } else {
            prior.min_distance(&points[slot])
        };
        // kept is ascending, so strict > keeps the lowest index on ties
        if pick.is_none_or(|(_, d)| dist > d) {
            pick = Some((kept[slot], dist));
        }
    }
    Ok(pick.expect("best cluster is nonempty").0)
}
