//! Coverage acquisition: the exact (hard) incremental-coverage gain behind an
//! optimistic feasibility gate, and its smooth surrogate
//! `V_m(r) · p_sat(U) · n(U)` with analytic gradients.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, invalid, Result};
use crate::geometry::{ball_volume, gauss_const, new_coverage_hard, sq_dist, FeasibleRegion, OutcomeSet};
use crate::gp::{ucb, GpModel};
use crate::normal;

/// `β_t = β₀ · a_t` with `a_t = max(floor, 1/√t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimismSchedule {
    pub beta0: f64,
    pub floor: f64,
}

impl OptimismSchedule {
    pub fn new(beta0: f64, floor: f64) -> Result<Self> {
        if !(beta0 > 0.0) {
            return Err(invalid("beta0", "must be > 0"));
        }
        if !(floor > 0.0 && floor <= 1.0) {
            return Err(invalid("anneal_floor", "must lie in (0, 1]"));
        }
        Ok(Self { beta0, floor })
    }

    /// Annealing multiplier for iteration `t ≥ 1`.
    pub fn anneal(&self, t: usize) -> f64 {
        (1.0 / (t.max(1) as f64).sqrt()).max(self.floor)
    }

    pub fn beta(&self, t: usize) -> f64 {
        self.beta0 * self.anneal(t)
    }
}

/// Weight on each Gaussian overlap term of the soft union.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OverlapWeight {
    /// `c_m(r)`: each prior outcome contributes a unit-mass Gaussian density.
    #[default]
    Density,
    /// `V_m(r) · c_m(r)`: each prior outcome contributes `V_m(r)·κ_r`, the
    /// same mass-preserving stand-in used for the candidate's own ball.
    BallMass,
}

impl OverlapWeight {
    pub fn weight(self, m: usize, r: f64) -> f64 {
        match self {
            OverlapWeight::Density => gauss_const(m, r),
            OverlapWeight::BallMass => ball_volume(m, r) * gauss_const(m, r),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftAcqParams {
    pub r: f64,
    pub lambda: f64,
    pub thresholds: Vec<f64>,
    pub overlap: OverlapWeight,
}

impl SoftAcqParams {
    pub fn new(r: f64, lambda: f64, thresholds: Vec<f64>) -> Result<Self> {
        if !(r > 0.0) {
            return Err(invalid("r", "must be > 0"));
        }
        if !(lambda > 0.0) {
            return Err(invalid("lambda", "must be > 0"));
        }
        Ok(Self {
            r,
            lambda,
            thresholds,
            overlap: OverlapWeight::default(),
        })
    }

    pub fn with_overlap(mut self, overlap: OverlapWeight) -> Self {
        self.overlap = overlap;
        self
    }

    pub fn dim(&self) -> usize {
        self.thresholds.len()
    }
}

/// A scalar with its gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Valued {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// 1 iff `U_i ≥ τ_i` for every objective.
pub fn feasibility_gate_hard(u: &[f64], thresholds: &[f64]) -> Result<bool> {
    check_dim(thresholds.len(), u.len())?;
    Ok(u.iter().zip(thresholds).all(|(a, t)| a >= t))
}

/// Probit gate `Π Φ((U_i − τ_i)/λ)`, evaluated as a sum of log-CDFs.
pub fn p_sat(u: &[f64], params: &SoftAcqParams) -> Result<Valued> {
    check_dim(params.dim(), u.len())?;
    let z: Vec<f64> = u
        .iter()
        .zip(&params.thresholds)
        .map(|(a, t)| (a - t) / params.lambda)
        .collect();
    let ln_p: f64 = z.iter().map(|v| normal::ln_cdf(*v)).sum();
    let ln_lambda = params.lambda.ln();
    let grad = z
        .iter()
        .map(|v| (ln_p + normal::pdf_over_cdf(*v).ln() - ln_lambda).exp())
        .collect();
    Ok(Valued {
        value: ln_p.exp(),
        grad,
    })
}

/// Soft novelty `1 − w Σ_s exp(−‖U − y_s‖² / 4r²)` with `w = c_m(r)`.
///
/// Not clamped: heavy overlap makes it negative.
pub fn novelty(u: &[f64], prior: &OutcomeSet, r: f64) -> Result<Valued> {
    novelty_weighted(u, prior, r, OverlapWeight::Density)
}

pub fn novelty_weighted(u: &[f64], prior: &OutcomeSet, r: f64, overlap: OverlapWeight) -> Result<Valued> {
    let m = u.len();
    let w = overlap.weight(m, r);
    let inv4r2 = 1.0 / (4.0 * r * r);
    let mut value = 1.0;
    let mut grad = vec![0.0; m];
    for y in prior.points() {
        check_dim(m, y.len())?;
        let e = w * (-sq_dist(u, y) * inv4r2).exp();
        value -= e;
        for ((g, a), b) in grad.iter_mut().zip(u).zip(y) {
            *g += e * (a - b) * 2.0 * inv4r2;
        }
    }
    Ok(Valued { value, grad })
}

/// Soft acquisition as a function of the optimistic prediction `U`.
pub fn soft_from_ucb(u: &[f64], params: &SoftAcqParams, prior: &OutcomeSet) -> Result<Valued> {
    let v = ball_volume(params.dim(), params.r);
    let gate = p_sat(u, params)?;
    let nov = novelty_weighted(u, prior, params.r, params.overlap)?;
    let grad = gate
        .grad
        .iter()
        .zip(&nov.grad)
        .map(|(gp, gn)| v * (gp * nov.value + gate.value * gn))
        .collect();
    Ok(Valued {
        value: v * gate.value * nov.value,
        grad,
    })
}

/// Soft acquisition at input `x`, with the input gradient via the chain rule
/// through `∇_x U(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftAcquisition {
    pub value: f64,
    pub grad: Vec<f64>,
    pub ucb: Vec<f64>,
}

pub fn soft_acquisition(
    models: &[GpModel],
    x: &[f64],
    beta: f64,
    params: &SoftAcqParams,
    prior: &OutcomeSet,
) -> Result<SoftAcquisition> {
    check_dim(params.dim(), models.len())?;
    let u = ucb(models, x, beta)?;
    let outer = soft_from_ucb(&u.values, params, prior)?;
    let mut grad = vec![0.0; x.len()];
    for (gu, row) in outer.grad.iter().zip(&u.jacobian) {
        for (g, du) in grad.iter_mut().zip(row) {
            *g += gu * du;
        }
    }
    Ok(SoftAcquisition {
        value: outer.value,
        grad,
        ucb: u.values,
    })
}

/// Hard acquisition as a function of `U`.
pub fn hard_from_ucb(
    u: &[f64],
    r: f64,
    prior: &OutcomeSet,
    region: &FeasibleRegion,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    if !feasibility_gate_hard(u, region.thresholds())? {
        return Ok(0.0);
    }
    new_coverage_hard(region, prior, u, r, n_mc, seed)
}

#[allow(clippy::too_many_arguments)]
pub fn hard_acquisition(
    models: &[GpModel],
    x: &[f64],
    beta: f64,
    params: &SoftAcqParams,
    prior: &OutcomeSet,
    region: &FeasibleRegion,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    check_dim(region.dim(), models.len())?;
    let u = ucb(models, x, beta)?;
    hard_from_ucb(&u.values, params.r, prior, region, n_mc, seed)
}

/// A scored candidate for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub index: usize,
    pub value: f64,
    pub ucb: Vec<f64>,
}

/// Picks the best-scoring candidate; candidates within `tol · max(1, |best|)`
/// of the best are tied and resolved by the largest distance from their `U`
/// to the prior outcomes, then by the lowest index.
pub fn tie_break(candidates: &[Scored], prior: &OutcomeSet, tol: f64) -> Option<usize> {
    let best = candidates
        .iter()
        .map(|c| c.value)
        .filter(|v| !v.is_nan())
        .fold(f64::NEG_INFINITY, f64::max);
    if candidates.is_empty() {
        return None;
    }
    let band = tol * best.abs().max(1.0);
    let tied = candidates
        .iter()
        .filter(|c| best == f64::NEG_INFINITY || c.value >= best - band);
    let key = |c: &Scored| {
        if prior.is_empty() {
            0.0
        } else {
            prior.min_distance(&c.ucb)
        }
    };
    tied.fold(None::<(&Scored, f64)>, |acc, c| {
        let k = key(c);
        match acc {
            None => Some((c, k)),
            Some((b, bk)) if k > bk || (k == bk && c.index < b.index) => Some((c, k)),
            keep => keep,
        }
    })
    .map(|(c, _)| c.index)
}
