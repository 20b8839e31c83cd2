//! Desk-scale ground truth: smooth multi-objective test functions on the unit
//! box, planted candidate pools, and threshold calibration to a target
//! feasibility rate.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pool::Pool;

const PROBE_POINTS: usize = 10_000;
const BUMPS_PER_OBJECTIVE: usize = 3;
const CALIBRATION_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Blobs,
    Ridges,
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProblemKind::Blobs => "blobs",
            ProblemKind::Ridges => "ridges",
        })
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "blobs" => Ok(ProblemKind::Blobs),
            "ridges" => Ok(ProblemKind::Ridges),
            other => Err(invalid("problem", format!("unknown synthetic kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// Σ_k w_k exp(−‖x − c_k‖² / 2s_k²)
    Bumps { centers: Vec<Vec<f64>>, widths: Vec<f64>, weights: Vec<f64> },
    /// sin(ω·x + φ) + ½ sin(2ω'·x + φ')
    Ridge { dir: Vec<f64>, phase: f64, dir2: Vec<f64>, phase2: f64 },
}

impl Shape {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Shape::Bumps { centers, widths, weights } => centers
                .iter()
                .zip(widths)
                .zip(weights)
                .map(|((c, s), w)| {
                    let d2: f64 = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
                    w * (-d2 / (2.0 * s * s)).exp()
                })
                .sum(),
            Shape::Ridge { dir, phase, dir2, phase2 } => {
                let a: f64 = dir.iter().zip(x).map(|(w, v)| w * v).sum();
                let b: f64 = dir2.iter().zip(x).map(|(w, v)| w * v).sum();
                (a + phase).sin() + 0.5 * (b + phase2).sin()
            }
        }
    }
}

/// Smooth objectives on `[0, 1]^d`, each rescaled so its range over a seeded
/// probe set is `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticProblem {
    kind: ProblemKind,
    dim_in: usize,
    shapes: Vec<Shape>,
    offsets: Vec<f64>,
    spans: Vec<f64>,
    pub noise_std: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl SyntheticProblem {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.shapes.len()
    }

    pub fn with_noise_std(mut self, noise_std: f64) -> Self {
        self.noise_std = noise_std;
        self
    }

    /// Noise-free objective vector.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        self.shapes
            .iter()
            .zip(self.offsets.iter().zip(&self.spans))
            .map(|(s, (o, w))| (s.eval(x) - o) / w)
            .collect()
    }

    pub fn observe<R: Rng>(&self, x: &[f64], rng: &mut R) -> Vec<f64> {
        self.evaluate(x)
            .into_iter()
            .map(|v| v + self.noise_std * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    pub fn sample_input<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| a + (b - a) * rng.random::<f64>())
            .collect()
    }
}

/// Default observation noise in scaled objective units.
pub const DEFAULT_NOISE_STD: f64 = 0.01;

pub fn make_smooth_problem(kind: ProblemKind, d: usize, m: usize, seed: u64) -> Result<SyntheticProblem> {
    if d == 0 || m == 0 {
        return Err(invalid("problem", "d and m must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let root_d = (d as f64).sqrt();
    let shapes: Vec<Shape> = (0..m)
        .map(|_| match kind {
            ProblemKind::Blobs => Shape::Bumps {
                centers: (0..BUMPS_PER_OBJECTIVE)
                    .map(|_| (0..d).map(|_| rng.random_range(0.1..0.9)).collect())
                    .collect(),
                widths: (0..BUMPS_PER_OBJECTIVE)
                    .map(|_| root_d * rng.random_range(0.15..0.3))
                    .collect(),
                weights: (0..BUMPS_PER_OBJECTIVE).map(|_| rng.random_range(0.5..1.0)).collect(),
            },
            ProblemKind::Ridges => {
                let mut unit = || -> Vec<f64> {
                    let v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                    let n = v.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
                    v.into_iter().map(|a| a / n).collect()
                };
                let f1 = 2.0 * std::f64::consts::PI;
                let dir: Vec<f64> = unit().into_iter().map(|a| a * f1).collect();
                let dir2: Vec<f64> = unit().into_iter().map(|a| a * f1 * 1.5).collect();
                Shape::Ridge {
                    dir,
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                    dir2,
                    phase2: rng.random_range(0.0..std::f64::consts::TAU),
                }
            }
        })
        .collect();

    let probe: Vec<Vec<f64>> = (0..PROBE_POINTS)
        .map(|_| (0..d).map(|_| rng.random::<f64>()).collect())
        .collect();
    let mut offsets = Vec::with_capacity(m);
    let mut spans = Vec::with_capacity(m);
    for s in &shapes {
        let (lo, hi) = probe
            .iter()
            .map(|x| s.eval(x))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        offsets.push(lo);
        spans.push((hi - lo).max(1e-12));
    }
    Ok(SyntheticProblem {
        kind,
        dim_in: d,
        shapes,
        offsets,
        spans,
        noise_std: DEFAULT_NOISE_STD,
        lower: vec![0.0; d],
        upper: vec![1.0; d],
    })
}

/// `n` uniform inputs with their noise-free outcomes as ground truth.
pub fn make_pool(problem: &SyntheticProblem, n: usize, seed: u64) -> Result<Pool> {
    if n == 0 {
        return Err(invalid("pool_size", "must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let features: Vec<Vec<f64>> = (0..n).map(|_| problem.sample_input(&mut rng)).collect();
    let outcomes = features.iter().map(|x| problem.evaluate(x)).collect();
    let ids = (0..n).map(|i| i.to_string()).collect();
    Pool::new(ids, features, Some(outcomes), problem.noise_std)
}

/// Fraction of rows meeting every threshold.
pub fn feasible_fraction(outcomes: &[Vec<f64>], thresholds: &[f64]) -> f64 {
    let hits = outcomes
        .iter()
        .filter(|y| y.iter().zip(thresholds).all(|(v, t)| v >= t))
        .count();
    hits as f64 / outcomes.len() as f64
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Thresholds at a common per-objective quantile level, chosen by bisection
/// so that the feasible fraction of the pool is closest to `target_rate`.
pub fn calibrate_thresholds(pool: &Pool, target_rate: f64) -> Result<Vec<f64>> {
    if !(target_rate > 0.0 && target_rate < 1.0) {
        return Err(invalid("target_rate", "must lie in (0, 1)"));
    }
    let outcomes = pool.outcomes().ok_or(Error::MissingOutcomes)?;
    calibrate_outcomes(outcomes, target_rate)
}

pub(crate) fn calibrate_outcomes(outcomes: &[Vec<f64>], target_rate: f64) -> Result<Vec<f64>> {
    let m = outcomes.first().map_or(0, Vec::len);
    let columns: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            let mut c: Vec<f64> = outcomes.iter().map(|y| y[i]).collect();
            c.sort_by(f64::total_cmp);
            c
        })
        .collect();
    for (i, c) in columns.iter().enumerate() {
        if c.first() == c.last() {
            return Err(Error::DegeneratePool { objective: i });
        }
    }
    let thresholds = |q: f64| -> Vec<f64> { columns.iter().map(|c| quantile(c, q)).collect() };
    let rate = |q: f64| feasible_fraction(outcomes, &thresholds(q));

    // rate(q) is non-increasing in q
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > CALIBRATION_TOL {
        let mid = 0.5 * (lo + hi);
        if rate(mid) > target_rate {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q = if (rate(lo) - target_rate).abs() <= (rate(hi) - target_rate).abs() {
        lo
    } else {
        hi
    };
    Ok(thresholds(q))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn problems_are_deterministic() {
        for kind in [ProblemKind::Blobs, ProblemKind::Ridges] {
            let a = make_smooth_problem(kind, 3, 2, 5).unwrap();
            let b = make_smooth_problem(kind, 3, 2, 5).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            for _ in 0..100 {
                let x = a.sample_input(&mut rng);
                assert_eq!(a.evaluate(&x), b.evaluate(&x));
            }
        }
    }

    #[test]
    fn outputs_are_scaled_to_unit_range() {
        for kind in [ProblemKind::Blobs, ProblemKind::Ridges] {
            let p = make_smooth_problem(kind, 4, 3, 1).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(77);
            for _ in 0..10_000 {
                for v in p.evaluate(&p.sample_input(&mut rng)) {
                    assert!((-0.05..=1.05).contains(&v), "{kind}: {v}");
                }
            }
        }
    }

    #[test]
    fn objectives_differ() {
        let p = make_smooth_problem(ProblemKind::Blobs, 2, 3, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let probe: Vec<Vec<f64>> = (0..500).map(|_| p.sample_input(&mut rng)).collect();
        let vals: Vec<Vec<f64>> = probe.iter().map(|x| p.evaluate(x)).collect();
        for i in 0..3 {
            for j in i + 1..3 {
                let diff = vals.iter().map(|v| (v[i] - v[j]).abs()).fold(0.0, f64::max);
                assert!(diff > 0.1);
            }
        }
    }

    #[test]
    fn pool_is_reproducible_and_exact() {
        let p = make_smooth_problem(ProblemKind::Blobs, 3, 2, 1).unwrap();
        let a = make_pool(&p, 1000, 4).unwrap();
        let b = make_pool(&p, 1000, 4).unwrap();
        assert_eq!(a.features(), b.features());
        for (x, y) in a.features().iter().zip(a.outcomes().unwrap()) {
            assert_eq!(&p.evaluate(x), y);
        }
    }

    #[test]
    fn calibration_on_uniform_outcomes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 100_000;
        let ys: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.random(), rng.random()]).collect();
        let tau = calibrate_outcomes(&ys, 0.25).unwrap();
        assert!((tau[0] - 0.5).abs() < 0.02 && (tau[1] - 0.5).abs() < 0.02, "{tau:?}");
        assert!((feasible_fraction(&ys, &tau) - 0.25).abs() < 0.02);

        let all = calibrate_outcomes(&ys, 0.999).unwrap();
        assert!(all.iter().all(|t| *t < 0.01));
    }

    #[test]
    fn calibration_hits_thirty_percent_on_blobs() {
        let p = make_smooth_problem(ProblemKind::Blobs, 4, 3, 1).unwrap();
        let pool = make_pool(&p, 5000, 2).unwrap();
        let tau = calibrate_thresholds(&pool, 0.3).unwrap();
        let rate = feasible_fraction(pool.outcomes().unwrap(), &tau);
        assert!((rate - 0.3).abs() <= 0.02, "{rate}");
    }

    #[test]
    fn calibration_is_monotone_in_target() {
        let p = make_smooth_problem(ProblemKind::Ridges, 2, 2, 6).unwrap();
        let pool = make_pool(&p, 3000, 1).unwrap();
        let mut last: Option<Vec<f64>> = None;
        for target in [0.1, 0.2, 0.3, 0.5, 0.7] {
            let tau = calibrate_thresholds(&pool, target).unwrap();
            if let Some(prev) = &last {
                assert!(tau.iter().zip(prev).all(|(a, b)| a <= b));
            }
            last = Some(tau);
        }
    }

    #[test]
    fn degenerate_pool_is_rejected() {
        let ys = vec![vec![0.5, 0.1], vec![0.5, 0.2]];
        assert!(matches!(
            calibrate_outcomes(&ys, 0.5),
            Err(Error::DegeneratePool { objective: 0 })
        ));
    }
}
