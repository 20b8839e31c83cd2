//! Empirical check of the gap between the hard (Monte-Carlo) and soft
//! acquisitions.
//!
//! Each instance draws a random GP state, evaluates the optimistic outcome
//! `U` at a random input, places prior outcomes at least `min_separation·r`
//! away from `U`, and sweeps thresholds `τ = U − margin` for a range of
//! margins (in units of λ). Once the margin clears `assert_margin·λ` the
//! normalized gap `|hard − soft| / V_m(r)` should sit below
//! `tolerance + 3·σ_MC`, and across the sweep it should fall as the margin
//! grows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acquisition::{hard_from_ucb, soft_from_ucb, OverlapWeight, SoftAcqParams};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ball_volume, FeasibleRegion, OutcomeSet};
use crate::gp::{ucb_values, GpModel, KernelParams, Scaling};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub objectives: Vec<usize>,
    pub prior_counts: Vec<usize>,
    pub repeats: usize,
    /// Sweep of minimum feasibility margins, in units of λ.
    pub margins: Vec<f64>,
    pub r: f64,
    pub lambda: f64,
    pub beta: f64,
    pub overlap: OverlapWeight,
    pub n_mc: usize,
    pub input_dim: usize,
    pub min_separation: f64,
    pub assert_margin: f64,
    pub tolerance: f64,
    pub max_spearman: f64,
    pub seed: u64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            objectives: vec![2, 3, 4, 5],
            prior_counts: vec![1, 10, 30],
            repeats: 2,
            margins: vec![1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 6.0, 8.0, 10.0],
            r: 0.05,
            lambda: 0.025,
            beta: 2.0,
            overlap: OverlapWeight::BallMass,
            n_mc: 100_000,
            input_dim: 2,
            min_separation: 6.0,
            assert_margin: 6.0,
            tolerance: 0.02,
            max_spearman: -0.8,
            seed: 0,
        }
    }
}

impl CheckConfig {
    pub fn validate(&self) -> Result<()> {
        if self.objectives.is_empty() || self.objectives.contains(&0) {
            return Err(invalid("check_objectives", "need objective counts >= 1"));
        }
        if self.prior_counts.is_empty() {
            return Err(invalid("check_prior_counts", "must be nonempty"));
        }
        if self.margins.len() < 2 || self.margins.iter().any(|m| !(*m >= 0.0)) {
            return Err(invalid("check_margins", "need at least two nonnegative margins"));
        }
        if self.repeats == 0 || self.n_mc == 0 || self.input_dim == 0 {
            return Err(invalid("check", "repeats, n_mc and input_dim must be >= 1"));
        }
        SoftAcqParams::new(self.r, self.lambda, vec![0.0])?;
        Ok(())
    }
}

/// One (instance, margin) evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapPoint {
    pub instance: usize,
    pub objectives: usize,
    pub priors: usize,
    pub margin: f64,
    pub hard: f64,
    pub soft: f64,
    pub volume: f64,
    pub gap: f64,
    pub mc_sigma: f64,
    pub asserted: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub instance: usize,
    pub objectives: usize,
    pub priors: usize,
    pub spearman: f64,
}

/// Center placed on a prior outcome: hard coverage is zero, soft keeps
/// `V_m(r)·(1 − w)`. Logged, never asserted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapCase {
    pub objectives: usize,
    pub hard: f64,
    pub soft: f64,
    pub expected_soft: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub points: Vec<GapPoint>,
    pub sweeps: Vec<SweepSummary>,
    pub overlap_cases: Vec<OverlapCase>,
    pub max_asserted_gap: f64,
    pub max_spearman: f64,
    pub violations: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passed() {
            Ok(self)
        } else {
            Err(Error::CheckFailed(self.violations))
        }
    }
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let ra = ranks(a);
    let rb = ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in ra.iter().zip(&rb) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return 0.0;
    }
    sab / (saa * sbb).sqrt()
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..v.len()).collect();
    order.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && v[order[j + 1]] == v[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

struct Instance {
    objectives: usize,
    priors: usize,
    u: Vec<f64>,
    prior: OutcomeSet,
    seed: u64,
}

fn random_instance(config: &CheckConfig, objectives: usize, priors: usize, seed: u64) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = config.input_dim;
    let kp = KernelParams::isotropic(d, 0.3, 1.0, 1e-2)?;
    let mut models = Vec::with_capacity(objectives);
    for _ in 0..objectives {
        let mut model = GpModel::prior(kp.clone(), Scaling::identity(d))?;
        for _ in 0..priors {
            let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
            model = model.condition(&x, rng.random_range(-1.0..1.0))?;
        }
        models.push(model);
    }
    let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
    let u = ucb_values(&models, &x, config.beta)?;
    let mut prior = OutcomeSet::new();
    for _ in 0..priors {
        let dir: Vec<f64> = (0..objectives).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let dist = config.r * (config.min_separation + 4.0 * rng.random::<f64>());
        prior.push(u.iter().zip(&dir).map(|(c, v)| c + dist * v / norm).collect())?;
    }
    Ok(Instance {
        objectives,
        priors,
        u,
        prior,
        seed: rng.random(),
    })
}

fn evaluate(config: &CheckConfig, inst: &Instance, margin: f64) -> Result<(f64, f64)> {
    let tau: Vec<f64> = inst.u.iter().map(|v| v - margin * config.lambda).collect();
    let ub: Vec<f64> = inst.u.iter().map(|v| v + 1.0).collect();
    let region = FeasibleRegion::new(tau.clone(), ub)?;
    let params = SoftAcqParams::new(config.r, config.lambda, tau)?.with_overlap(config.overlap);
    let hard = hard_from_ucb(&inst.u, config.r, &inst.prior, &region, config.n_mc, inst.seed)?;
    let soft = soft_from_ucb(&inst.u, &params, &inst.prior)?.value;
    Ok((hard, soft))
}

/// Runs the full sweep. Violations are collected, not raised; see
/// [`CheckReport::into_result`].
pub fn run_check(config: &CheckConfig) -> Result<CheckReport> {
    config.validate()?;
    let mut specs = Vec::new();
    for &m in &config.objectives {
        for &t in &config.prior_counts {
            for _ in 0..config.repeats {
                specs.push((m, t));
            }
        }
    }
    let mut seeder = ChaCha8Rng::seed_from_u64(config.seed);
    let seeds: Vec<u64> = specs.iter().map(|_| seeder.random()).collect();

    let per_instance: Vec<(Vec<GapPoint>, SweepSummary)> = specs
        .par_iter()
        .zip(&seeds)
        .enumerate()
        .map(|(id, (&(m, t), &seed))| {
            let inst = random_instance(config, m, t, seed)?;
            let volume = ball_volume(m, config.r);
            let mut points = Vec::with_capacity(config.margins.len());
            for &margin in &config.margins {
                let (hard, soft) = evaluate(config, &inst, margin)?;
                let p = hard / volume;
                points.push(GapPoint {
                    instance: id,
                    objectives: inst.objectives,
                    priors: inst.priors,
                    margin,
                    hard,
                    soft,
                    volume,
                    gap: (hard - soft).abs() / volume,
                    mc_sigma: (p * (1.0 - p).max(0.0) / config.n_mc as f64).sqrt(),
                    asserted: margin >= config.assert_margin,
                });
            }
            let margins: Vec<f64> = points.iter().map(|p| p.margin).collect();
            let gaps: Vec<f64> = points.iter().map(|p| p.gap).collect();
            let summary = SweepSummary {
                instance: id,
                objectives: m,
                priors: t,
                spearman: spearman(&margins, &gaps),
            };
            Ok((points, summary))
        })
        .collect::<Result<_>>()?;

    let mut violations = Vec::new();
    let mut points = Vec::new();
    let mut sweeps = Vec::new();
    for (pts, sweep) in per_instance {
        for p in &pts {
            if p.asserted && p.gap >= config.tolerance + 3.0 * p.mc_sigma {
                violations.push(format!(
                    "instance {} (m={}, priors={}) margin {}λ: gap {:.4} exceeds {:.4}",
                    p.instance,
                    p.objectives,
                    p.priors,
                    p.margin,
                    p.gap,
                    config.tolerance + 3.0 * p.mc_sigma
                ));
            }
        }
        if !(sweep.spearman < config.max_spearman) {
            violations.push(format!(
                "instance {} (m={}, priors={}): spearman {:.3} not below {}",
                sweep.instance, sweep.objectives, sweep.priors, sweep.spearman, config.max_spearman
            ));
        }
        points.extend(pts);
        sweeps.push(sweep);
    }

    let mut overlap_cases = Vec::new();
    for &m in &config.objectives {
        let u = vec![0.5; m];
        let tau: Vec<f64> = u.iter().map(|v| v - 100.0 * config.lambda).collect();
        let region = FeasibleRegion::new(tau.clone(), vec![2.0; m])?;
        let params = SoftAcqParams::new(config.r, config.lambda, tau)?.with_overlap(config.overlap);
        let prior = OutcomeSet::from_points(vec![u.clone()])?;
        let volume = ball_volume(m, config.r);
        overlap_cases.push(OverlapCase {
            objectives: m,
            hard: hard_from_ucb(&u, config.r, &prior, &region, config.n_mc, config.seed)?,
            soft: soft_from_ucb(&u, &params, &prior)?.value,
            expected_soft: volume * (1.0 - config.overlap.weight(m, config.r)),
        });
    }

    let max_asserted_gap = points
        .iter()
        .filter(|p| p.asserted)
        .map(|p| p.gap)
        .fold(0.0, f64::max);
    let max_spearman = sweeps.iter().map(|s| s.spearman).fold(f64::NEG_INFINITY, f64::max);
    Ok(CheckReport {
        points,
        sweeps,
        overlap_cases,
        max_asserted_gap,
        max_spearman,
        violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spearman_cases() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[5.0, 1.0, 5.0]), vec![2.5, 1.0, 2.5]);
        assert_eq!(spearman(&[1.0, 2.0], &[4.0, 4.0]), 0.0);
    }

    fn small() -> CheckConfig {
        CheckConfig {
            objectives: vec![2, 3],
            prior_counts: vec![0, 5],
            repeats: 1,
            n_mc: 20_000,
            ..CheckConfig::default()
        }
    }

    #[test]
    fn small_check_passes_and_is_deterministic() {
        let a = run_check(&small()).unwrap();
        assert!(a.passed(), "{:?}", a.violations);
        assert_eq!(a, run_check(&small()).unwrap());
        for case in &a.overlap_cases {
            assert_eq!(case.hard, 0.0);
            assert!((case.soft - case.expected_soft).abs() < 1e-12 * case.expected_soft.abs().max(1.0));
        }
    }

    #[test]
    fn no_priors_and_huge_margin_gives_full_ball() {
        let cfg = CheckConfig {
            objectives: vec![3],
            prior_counts: vec![0],
            repeats: 1,
            margins: vec![50.0, 60.0],
            ..CheckConfig::default()
        };
        let rep = run_check(&cfg).unwrap();
        for p in &rep.points {
            assert!(p.gap <= 3.0 * p.mc_sigma + 1e-12, "{p:?}");
        }
    }

    #[test]
    fn tight_tolerance_reports_violations() {
        let cfg = CheckConfig {
            assert_margin: 0.0,
            tolerance: 0.0,
            ..small()
        };
        let rep = run_check(&cfg).unwrap();
        assert!(!rep.passed());
        assert!(matches!(rep.into_result(), Err(Error::CheckFailed(v)) if !v.is_empty()));
    }
}
