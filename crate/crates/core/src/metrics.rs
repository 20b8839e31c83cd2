//! Evaluation metrics: cumulative positives, AUP, T@X, incremental coverage
//! and fill trackers, and aggregation over paired trials.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::geometry::{box_samples, sq_dist, FeasibleRegion};

/// `P(t)`: feasible observations among the first `t`.
pub fn positives_series(feasible_flags: &[bool]) -> Vec<u64> {
    feasible_flags
        .iter()
        .scan(0u64, |acc, f| {
            *acc += u64::from(*f);
            Some(*acc)
        })
        .collect()
}

/// Area under the positives curve, plain-sum variant `Σ_t P(t)`.
pub fn aup(series: &[u64]) -> u64 {
    series.iter().sum()
}

/// First iteration at which a positives target is met.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TAt {
    Reached(usize),
    NotReached,
}

impl TAt {
    pub fn reached(self) -> Option<usize> {
        match self {
            TAt::Reached(t) => Some(t),
            TAt::NotReached => None,
        }
    }
}

impl std::fmt::Display for TAt {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TAt::Reached(t) => write!(f, "{t}"),
            TAt::NotReached => f.write_str(">budget"),
        }
    }
}

/// `min t : P(t) ≥ x` with 1-based `t`.
pub fn t_at(series: &[u64], x: u64) -> TAt {
    series
        .iter()
        .position(|p| *p >= x)
        .map_or(TAt::NotReached, |i| TAt::Reached(i + 1))
}

/// Mean and adjusted standard error `std / √n` (sample std, ddof = 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
    /// Set when fewer than two values were available, so `se` is reported as 0.
    pub degenerate: bool,
}

pub fn aggregate(values: &[f64]) -> Aggregate {
    let n = values.len();
    if n == 0 {
        return Aggregate {
            mean: f64::NAN,
            se: 0.0,
            n,
            degenerate: true,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return Aggregate {
            mean,
            se: 0.0,
            n,
            degenerate: true,
        };
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    Aggregate {
        mean,
        se: var.sqrt() / (n as f64).sqrt(),
        n,
        degenerate: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TAtAggregate {
    /// Over trials that reached the target; `None` when none did.
    pub mean: Option<f64>,
    pub se: Option<f64>,
    pub not_reached: usize,
}

pub fn aggregate_t_at(values: &[TAt]) -> TAtAggregate {
    let reached: Vec<f64> = values.iter().filter_map(|v| v.reached()).map(|t| t as f64).collect();
    let not_reached = values.len() - reached.len();
    if reached.is_empty() {
        return TAtAggregate {
            mean: None,
            se: None,
            not_reached,
        };
    }
    let a = aggregate(&reached);
    TAtAggregate {
        mean: Some(a.mean),
        se: Some(a.se),
        not_reached,
    }
}

/// Summary of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub aup: u64,
    pub final_positives: u64,
    pub final_fill: f64,
    pub final_covered: f64,
    pub t_at: BTreeMap<u64, TAt>,
}

impl TrialSummary {
    pub fn from_series(positives: &[u64], fill: &[f64], covered: &[f64], targets: &[u64]) -> Self {
        Self {
            aup: aup(positives),
            final_positives: positives.last().copied().unwrap_or(0),
            final_fill: fill.last().copied().unwrap_or(f64::INFINITY),
            final_covered: covered.last().copied().unwrap_or(0.0),
            t_at: targets.iter().map(|&x| (x, t_at(positives, x))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub aup: Aggregate,
    pub positives: Aggregate,
    pub fill: Aggregate,
    pub covered: Aggregate,
    pub t_at: BTreeMap<u64, TAtAggregate>,
}

pub fn aggregate_trials(trials: &[TrialSummary]) -> PolicySummary {
    let collect = |f: fn(&TrialSummary) -> f64| -> Vec<f64> { trials.iter().map(f).collect() };
    let targets: Vec<u64> = trials
        .iter()
        .flat_map(|t| t.t_at.keys().copied())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    PolicySummary {
        aup: aggregate(&collect(|t| t.aup as f64)),
        positives: aggregate(&collect(|t| t.final_positives as f64)),
        fill: aggregate(&collect(|t| t.final_fill)),
        covered: aggregate(&collect(|t| t.final_covered)),
        t_at: targets
            .into_iter()
            .map(|x| {
                let vals: Vec<TAt> = trials.iter().filter_map(|t| t.t_at.get(&x).copied()).collect();
                (x, aggregate_t_at(&vals))
            })
            .collect(),
    }
}

/// Covered volume `Vol(B_r(Z_t) ∩ S ∩ box)` maintained as outcomes arrive.
///
/// Uses the same fixed sample as [`crate::geometry::covered_volume`] for the
/// seed, so its value matches a from-scratch estimate exactly and never
/// decreases.
#[derive(Debug, Clone)]
pub struct CoverageTracker {
    samples: Vec<Vec<f64>>,
    covered: Vec<bool>,
    hits: usize,
    r2: f64,
    box_volume: f64,
}

impl CoverageTracker {
    pub fn new(region: &FeasibleRegion, r: f64, n_mc: usize, seed: u64) -> Self {
        let samples = box_samples(region, n_mc, seed);
        Self {
            covered: vec![false; samples.len()],
            samples,
            hits: 0,
            r2: r * r,
            box_volume: region.box_volume(),
        }
    }

    pub fn add(&mut self, outcome: &[f64]) {
        for (z, c) in self.samples.iter().zip(self.covered.iter_mut()) {
            if !*c && sq_dist(z, outcome) < self.r2 {
                *c = true;
                self.hits += 1;
            }
        }
    }

    pub fn value(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.hits as f64 / self.samples.len() as f64 * self.box_volume
    }
}

/// Fill distance over a fixed reference set, maintained as outcomes arrive.
#[derive(Debug, Clone)]
pub struct FillTracker {
    reference: Vec<Vec<f64>>,
    nearest_sq: Vec<f64>,
}

impl FillTracker {
    pub fn new(reference: Vec<Vec<f64>>) -> Self {
        Self {
            nearest_sq: vec![f64::INFINITY; reference.len()],
            reference,
        }
    }

    pub fn add(&mut self, outcome: &[f64]) {
        for (z, d) in self.reference.iter().zip(self.nearest_sq.iter_mut()) {
            *d = d.min(sq_dist(z, outcome));
        }
    }

    pub fn value(&self) -> f64 {
        self.nearest_sq.iter().copied().fold(0.0, f64::max).sqrt()
    }
}
