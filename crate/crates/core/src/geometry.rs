//! Objective-space coverage geometry.
//!
//! The feasible region is the orthant `{z : z_i ≥ τ_i}`. Volumes and fill
//! distances are computed inside the box `[τ, upper_bounds]`, which keeps them
//! finite. Coverage balls are open: `‖z − y‖ < r`.
//!
//! Monte-Carlo estimates draw from ChaCha streams split into fixed-size
//! chunks (one stream per chunk), so results are bit-identical for a seed
//! regardless of how many threads evaluate the chunks.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{check_dim, invalid, Error, Result};

const MC_CHUNK: usize = 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibleRegion {
    thresholds: Vec<f64>,
    upper_bounds: Vec<f64>,
}

impl FeasibleRegion {
    pub fn new(thresholds: Vec<f64>, upper_bounds: Vec<f64>) -> Result<Self> {
        check_dim(thresholds.len(), upper_bounds.len())?;
        if thresholds.is_empty() {
            return Err(invalid("thresholds", "need at least one objective"));
        }
        if thresholds.iter().zip(&upper_bounds).any(|(t, u)| !(t < u)) {
            return Err(invalid("upper_bounds", "every threshold must lie below its upper bound"));
        }
        Ok(Self {
            thresholds,
            upper_bounds,
        })
    }

    /// Region with the unit ceiling used for objectives scaled to `[0, 1]`.
    pub fn with_unit_ceiling(thresholds: Vec<f64>) -> Result<Self> {
        let ub = vec![1.0; thresholds.len()];
        Self::new(thresholds, ub)
    }

    pub fn thresholds(&self) -> &[f64] {
        &self.thresholds
    }

    pub fn upper_bounds(&self) -> &[f64] {
        &self.upper_bounds
    }

    pub fn dim(&self) -> usize {
        self.thresholds.len()
    }

    pub fn box_volume(&self) -> f64 {
        self.thresholds
            .iter()
            .zip(&self.upper_bounds)
            .map(|(t, u)| u - t)
            .product()
    }

    #[inline]
    pub(crate) fn contains(&self, z: &[f64]) -> bool {
        z.iter().zip(&self.thresholds).all(|(v, t)| v >= t)
    }
}

/// Observed outcome vectors `Z_t`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutcomeSet {
    points: Vec<Vec<f64>>,
}

impl OutcomeSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_points(points: Vec<Vec<f64>>) -> Result<Self> {
        if let Some(first) = points.first() {
            for p in &points {
                check_dim(first.len(), p.len())?;
            }
        }
        Ok(Self { points })
    }

    pub fn push(&mut self, point: Vec<f64>) -> Result<()> {
        if let Some(first) = self.points.first() {
            check_dim(first.len(), point.len())?;
        }
        self.points.push(point);
        Ok(())
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Smallest Euclidean distance from `z` to any outcome (`+∞` when empty).
    pub fn min_distance(&self, z: &[f64]) -> f64 {
        self.points
            .iter()
            .map(|p| sq_dist(p, z))
            .fold(f64::INFINITY, f64::min)
            .sqrt()
    }

    #[inline]
    fn covers(&self, z: &[f64], r2: f64) -> bool {
        self.points.iter().any(|p| sq_dist(p, z) < r2)
    }
}

#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Volume of the `m`-ball of radius `r`: `π^{m/2} / Γ(m/2 + 1) · r^m`.
pub fn ball_volume(m: usize, r: f64) -> f64 {
    let half = m as f64 / 2.0;
    (half * PI.ln() - libm::lgamma(half + 1.0) + m as f64 * r.ln()).exp()
}

/// `(4π r²)^{−m/2}`, the peak of `N(·; 0, 2r²I)`.
pub fn gauss_const(m: usize, r: f64) -> f64 {
    (4.0 * PI * r * r).powf(-(m as f64) / 2.0)
}

pub fn in_feasible(region: &FeasibleRegion, z: &[f64]) -> Result<bool> {
    check_dim(region.dim(), z.len())?;
    Ok(region.contains(z))
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

fn chunk_sizes(n: usize) -> impl IndexedParallelIterator<Item = (usize, usize)> {
    let chunks = n.div_ceil(MC_CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(move |c| (c, MC_CHUNK.min(n - c * MC_CHUNK)))
}

/// Uniform points in the box `[τ, upper_bounds]`, chunk-seeded.
pub fn box_samples(region: &FeasibleRegion, n_mc: usize, seed: u64) -> Vec<Vec<f64>> {
    let lo = region.thresholds();
    let hi = region.upper_bounds();
    chunk_sizes(n_mc)
        .flat_map_iter(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            (0..size)
                .map(|_| lo.iter().zip(hi).map(|(a, b)| a + (b - a) * rng.random::<f64>()).collect())
                .collect::<Vec<Vec<f64>>>()
        })
        .collect()
}

/// Monte-Carlo estimate of `Vol(B_r(Z) ∩ S ∩ box)`.
pub fn covered_volume(region: &FeasibleRegion, outcomes: &OutcomeSet, r: f64, n_mc: usize, seed: u64) -> f64 {
    if outcomes.is_empty() || n_mc == 0 {
        return 0.0;
    }
    let r2 = r * r;
    let hits: usize = box_samples(region, n_mc, seed)
        .par_iter()
        .filter(|z| outcomes.covers(z, r2))
        .count();
    hits as f64 / n_mc as f64 * region.box_volume()
}

/// Monte-Carlo estimate of `Vol((B_r(center) ∩ S) \ B_r(Z))`: the feasible
/// volume a new ball at `center` would add.
pub fn new_coverage_hard(
    region: &FeasibleRegion,
    outcomes: &OutcomeSet,
    center: &[f64],
    r: f64,
    n_mc: usize,
    seed: u64,
) -> Result<f64> {
    let m = region.dim();
    check_dim(m, center.len())?;
    if n_mc == 0 {
        return Ok(0.0);
    }
    // Ball entirely outside the orthant: nothing to sample.
    if center.iter().zip(region.thresholds()).any(|(c, t)| c + r <= *t) {
        return Ok(0.0);
    }
    let r2 = r * r;
    let hits: usize = chunk_sizes(n_mc)
        .map(|(c, size)| {
            let mut rng = chunk_rng(seed, c);
            let mut z = vec![0.0; m];
            let mut count = 0;
            for _ in 0..size {
                sample_in_ball(&mut rng, center, r, &mut z);
                if region.contains(&z) && !outcomes.covers(&z, r2) {
                    count += 1;
                }
            }
            count
        })
        .sum();
    Ok(hits as f64 / n_mc as f64 * ball_volume(m, r))
}

fn sample_in_ball(rng: &mut ChaCha8Rng, center: &[f64], r: f64, out: &mut [f64]) {
    let m = center.len();
    let mut norm2 = 0.0;
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
        norm2 += *v * *v;
    }
    let radius = r * rng.random::<f64>().powf(1.0 / m as f64);
    let scale = radius / norm2.sqrt();
    for (v, c) in out.iter_mut().zip(center) {
        *v = c + *v * scale;
    }
}

/// Largest distance from a reference point to its nearest outcome.
///
/// Returns `+∞` when no outcome has been observed yet.
pub fn fill_distance(region: &FeasibleRegion, outcomes: &OutcomeSet, reference: &[Vec<f64>]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::EmptyReference);
    }
    for z in reference {
        if !in_feasible(region, z)? {
            return Err(invalid("reference", "every reference point must be feasible"));
        }
    }
    if outcomes.is_empty() {
        return Ok(f64::INFINITY);
    }
    Ok(reference
        .iter()
        .map(|z| outcomes.min_distance(z))
        .fold(0.0, f64::max))
}

/// How the finite stand-in for the feasible region is built.
#[derive(Debug, Clone, Copy)]
pub enum ReferenceMode<'a> {
    /// Lattice with `density` points per axis over `[τ, upper_bounds]`.
    Grid { density: usize },
    /// The feasible rows of a known outcome matrix.
    Pool(&'a [Vec<f64>]),
}

/// Lattice density used when no outcome matrix is available.
pub fn default_grid_density(m: usize) -> usize {
    if m == 2 {
        33
    } else {
        (4096f64).powf(1.0 / m as f64).ceil() as usize
    }
}

pub fn build_reference(region: &FeasibleRegion, mode: ReferenceMode<'_>) -> Result<Vec<Vec<f64>>> {
    match mode {
        ReferenceMode::Grid { density } => {
            if density < 2 {
                return Err(invalid("density", "grid reference needs at least 2 points per axis"));
            }
            let m = region.dim();
            let axes: Vec<Vec<f64>> = (0..m)
                .map(|i| {
                    let (lo, hi) = (region.thresholds[i], region.upper_bounds[i]);
                    (0..density)
                        .map(|k| lo + (hi - lo) * k as f64 / (density - 1) as f64)
                        .collect()
                })
                .collect();
            let total = density.pow(m as u32);
            Ok((0..total)
                .map(|mut idx| {
                    (0..m)
                        .map(|i| {
                            let k = idx % density;
                            idx /= density;
                            axes[i][k]
                        })
                        .collect()
                })
                .collect())
        }
        ReferenceMode::Pool(source) => {
            let mut rows = Vec::new();
            for z in source {
                if in_feasible(region, z)? {
                    rows.push(z.clone());
                }
            }
            if rows.is_empty() {
                return Err(Error::EmptyReference);
            }
            Ok(rows)
        }
    }
}
