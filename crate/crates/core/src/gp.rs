//! Exact Gaussian-process regression, one independent model per objective.
//!
//! Models use an ARD squared-exponential kernel and are conditioned one
//! observation at a time by extending the Cholesky factor of `K + σ²I`.
//! Inputs and targets can carry a frozen affine [`Scaling`]; every public
//! query takes and returns values in the caller's (unscaled) units.

use std::f64::consts::PI;

use crate::error::{check_dim, invalid, Error, Result};
use crate::linalg::{cholesky, extend_factor, solve_spd, SpdFactor};

/// Below this posterior standard deviation its input gradient is reported as 0.
pub const STD_GRAD_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct KernelParams {
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(invalid("lengthscales", "must have at least one entry"));
        }
        if lengthscales.iter().any(|l| !(*l > 0.0) || !l.is_finite()) {
            return Err(invalid("lengthscales", "entries must be finite and > 0"));
        }
        if !(signal_variance > 0.0) {
            return Err(invalid("signal_variance", "must be > 0"));
        }
        if !(noise_variance > 0.0) {
            return Err(invalid("noise_variance", "must be > 0"));
        }
        Ok(Self {
            lengthscales,
            signal_variance,
            noise_variance,
        })
    }

    /// Shared lengthscale across all `dim` inputs.
    pub fn isotropic(dim: usize, lengthscale: f64, signal_variance: f64, noise_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], signal_variance, noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    #[inline]
    fn eval(&self, x1: &[f64], x2: &[f64]) -> f64 {
        let q: f64 = x1
            .iter()
            .zip(x2)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let z = (a - b) / l;
                z * z
            })
            .sum();
        self.signal_variance * (-0.5 * q).exp()
    }
}

/// `σ_f² · exp(−½ Σ_j ((x1_j − x2_j)/ℓ_j)²)`.
pub fn kernel_eval(params: &KernelParams, x1: &[f64], x2: &[f64]) -> Result<f64> {
    check_dim(params.dim(), x1.len())?;
    check_dim(params.dim(), x2.len())?;
    Ok(params.eval(x1, x2))
}

/// Frozen per-dimension z-scoring of inputs and z-scoring of targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Scaling {
    pub input_shift: Vec<f64>,
    pub input_scale: Vec<f64>,
    pub target_shift: f64,
    pub target_scale: f64,
}

impl Scaling {
    pub fn identity(dim: usize) -> Self {
        Self {
            input_shift: vec![0.0; dim],
            input_scale: vec![1.0; dim],
            target_shift: 0.0,
            target_scale: 1.0,
        }
    }

    /// Estimates the scaling from a sample. Zero-variance columns keep unit scale.
    pub fn fit(inputs: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        let n = inputs.len();
        if n == 0 || targets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n.max(1),
                got: targets.len(),
            });
        }
        let d = inputs[0].len();
        let mut input_shift = vec![0.0; d];
        let mut input_scale = vec![1.0; d];
        for j in 0..d {
            let col: Vec<f64> = inputs.iter().map(|x| x[j]).collect();
            let (m, s) = mean_std(&col);
            input_shift[j] = m;
            if s > 1e-12 {
                input_scale[j] = s;
            }
        }
        let (target_shift, s) = mean_std(targets);
        Ok(Self {
            input_shift,
            input_scale,
            target_shift,
            target_scale: if s > 1e-12 { s } else { 1.0 },
        })
    }

    pub fn scale_input(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.input_shift)
            .zip(&self.input_scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        (y - self.target_shift) / self.target_scale
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Posterior mean and standard deviation at one input, with input gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    pub std: f64,
    pub mean_grad: Vec<f64>,
    pub std_grad: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    params: KernelParams,
    scaling: Scaling,
    train_inputs: Vec<Vec<f64>>,
    train_targets: Vec<f64>,
    factor: SpdFactor,
    alpha: Vec<f64>,
}

impl GpModel {
    /// Model with no observations: posterior equals the zero-mean prior.
    pub fn prior(params: KernelParams, scaling: Scaling) -> Result<Self> {
        check_dim(params.dim(), scaling.input_shift.len())?;
        Ok(Self {
            params,
            scaling,
            train_inputs: Vec::new(),
            train_targets: Vec::new(),
            factor: SpdFactor::empty(),
            alpha: Vec::new(),
        })
    }

    /// Batch fit on raw inputs and targets.
    pub fn fit(params: KernelParams, scaling: Scaling, inputs: &[Vec<f64>], targets: &[f64]) -> Result<Self> {
        check_dim(inputs.len(), targets.len())?;
        let mut model = Self::prior(params, scaling)?;
        if inputs.is_empty() {
            return Ok(model);
        }
        for x in inputs {
            check_dim(model.params.dim(), x.len())?;
        }
        let xs: Vec<Vec<f64>> = inputs.iter().map(|x| model.scaling.scale_input(x)).collect();
        let ys: Vec<f64> = targets.iter().map(|y| model.scaling.scale_target(*y)).collect();
        let gram = model.gram(&xs);
        model.factor = cholesky(&gram, 0.0)?;
        model.alpha = solve_spd(&model.factor, &ys)?;
        model.train_inputs = xs;
        model.train_targets = ys;
        Ok(model)
    }

    fn gram(&self, xs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = xs.len();
        let mut k = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in 0..=i {
                let v = self.params.eval(&xs[i], &xs[j]);
                k[i][j] = v;
                k[j][i] = v;
            }
            k[i][i] += self.params.noise_variance;
        }
        k
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn scaling(&self) -> &Scaling {
        &self.scaling
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn len(&self) -> usize {
        self.train_targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.train_targets.is_empty()
    }

    pub fn factor(&self) -> &SpdFactor {
        &self.factor
    }

    /// Returns a new model that also conditions on `(x_new, y_new)`.
    pub fn condition(&self, x_new: &[f64], y_new: f64) -> Result<GpModel> {
        check_dim(self.dim(), x_new.len())?;
        let xs = self.scaling.scale_input(x_new);
        let ys = self.scaling.scale_target(y_new);
        let cross: Vec<f64> = self.train_inputs.iter().map(|x| self.params.eval(x, &xs)).collect();
        let diag = self.params.signal_variance + self.params.noise_variance;
        let factor = extend_factor(&self.factor, &cross, diag)?;
        let mut train_inputs = self.train_inputs.clone();
        train_inputs.push(xs);
        let mut train_targets = self.train_targets.clone();
        train_targets.push(ys);
        let alpha = solve_spd(&factor, &train_targets)?;
        Ok(GpModel {
            params: self.params.clone(),
            scaling: self.scaling.clone(),
            train_inputs,
            train_targets,
            factor,
            alpha,
        })
    }

    /// Posterior mean and standard deviation without gradients.
    pub fn predict(&self, x: &[f64]) -> Result<(f64, f64)> {
        check_dim(self.dim(), x.len())?;
        let xs = self.scaling.scale_input(x);
        let mut v: Vec<f64> = self.train_inputs.iter().map(|t| self.params.eval(t, &xs)).collect();
        let mean: f64 = v.iter().zip(&self.alpha).map(|(k, a)| k * a).sum();
        self.factor.forward_in_place(&mut v);
        let var = self.params.signal_variance - v.iter().map(|a| a * a).sum::<f64>();
        let std = var.max(0.0).sqrt();
        let s = &self.scaling;
        Ok((s.target_shift + s.target_scale * mean, s.target_scale * std))
    }

    /// Posterior at `x` with analytic input gradients of mean and std.
    pub fn posterior(&self, x: &[f64]) -> Result<Posterior> {
        let d = self.dim();
        check_dim(d, x.len())?;
        let xs = self.scaling.scale_input(x);
        let t = self.len();

        let k: Vec<f64> = self.train_inputs.iter().map(|tx| self.params.eval(tx, &xs)).collect();
        // dk[s][j] = ∂k(x_s, x)/∂x_j in scaled coordinates
        let inv_l2: Vec<f64> = self.params.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
        let dk = |s: usize, j: usize| -k[s] * (xs[j] - self.train_inputs[s][j]) * inv_l2[j];

        let mean: f64 = k.iter().zip(&self.alpha).map(|(a, b)| a * b).sum();
        let mut mean_grad = vec![0.0; d];
        for s in 0..t {
            for (j, g) in mean_grad.iter_mut().enumerate() {
                *g += dk(s, j) * self.alpha[s];
            }
        }

        let (var, w) = if t == 0 {
            (self.params.signal_variance, Vec::new())
        } else {
            let v = self.factor.forward_solve(&k)?;
            let var = self.params.signal_variance - v.iter().map(|a| a * a).sum::<f64>();
            (var, self.factor.backward_solve(&v)?)
        };
        let std = var.max(0.0).sqrt();
        let mut std_grad = vec![0.0; d];
        if std >= STD_GRAD_FLOOR {
            for s in 0..t {
                for (j, g) in std_grad.iter_mut().enumerate() {
                    // ∂var/∂x_j = −2 wᵀ ∂k/∂x_j, ∂std = ∂var / (2 std)
                    *g -= w[s] * dk(s, j) / std;
                }
            }
        }

        let sc = &self.scaling;
        let unscale = |g: Vec<f64>| -> Vec<f64> {
            g.into_iter()
                .zip(&sc.input_scale)
                .map(|(v, s)| sc.target_scale * v / s)
                .collect()
        };
        Ok(Posterior {
            mean: sc.target_shift + sc.target_scale * mean,
            std: sc.target_scale * std,
            mean_grad: unscale(mean_grad),
            std_grad: unscale(std_grad),
        })
    }

    /// Exact log marginal likelihood of the (scaled) training targets.
    pub fn log_marginal_likelihood(&self) -> f64 {
        let n = self.len() as f64;
        let fit: f64 = self.train_targets.iter().zip(&self.alpha).map(|(y, a)| y * a).sum();
        -0.5 * fit - self.factor.half_log_det() - 0.5 * n * (2.0 * PI).ln()
    }
}

/// Picks the grid element with the largest log marginal likelihood on
/// `(inputs, targets)`, taken as already scaled. Earlier elements win ties;
/// elements whose Gram matrix cannot be factored are skipped.
pub fn prefit_hyperparams(inputs: &[Vec<f64>], targets: &[f64], grid: &[KernelParams]) -> Result<KernelParams> {
    if inputs.len() < 2 {
        return Err(invalid("inputs", "prefit needs at least two points"));
    }
    if grid.is_empty() {
        return Err(invalid("grid", "must be nonempty"));
    }
    let mut best: Option<(f64, &KernelParams)> = None;
    for params in grid {
        let scaling = Scaling::identity(params.dim());
        let lml = match GpModel::fit(params.clone(), scaling, inputs, targets) {
            Ok(m) => m.log_marginal_likelihood(),
            Err(Error::NotPositiveDefinite { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(b, _)| lml > b) {
            best = Some((lml, params));
        }
    }
    best.map(|(_, p)| p.clone()).ok_or(Error::AllCandidatesFailed)
}

/// Log-spaced grid: `n_len` shared lengthscales in `[0.1√d, 10√d]` times
/// `n_var` signal variances in `[0.1, 10]`, lengthscale-major.
pub fn default_grid(dim: usize, n_len: usize, n_var: usize, noise_variance: f64) -> Result<Vec<KernelParams>> {
    let root_d = (dim as f64).sqrt();
    let mut grid = Vec::with_capacity(n_len * n_var);
    for l in log_space(0.1 * root_d, 10.0 * root_d, n_len) {
        for sv in log_space(0.1, 10.0, n_var) {
            grid.push(KernelParams::isotropic(dim, l, sv, noise_variance)?);
        }
    }
    Ok(grid)
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![(lo * hi).sqrt()];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Per-objective optimistic prediction `U_i = μ_i + √β σ_i` and its Jacobian.
#[derive(Debug, Clone, PartialEq)]
pub struct Ucb {
    pub values: Vec<f64>,
    /// `m × d`, row `i` is `∇_x U_i`.
    pub jacobian: Vec<Vec<f64>>,
}

pub fn ucb(models: &[GpModel], x: &[f64], beta: f64) -> Result<Ucb> {
    let root_beta = beta.max(0.0).sqrt();
    let mut values = Vec::with_capacity(models.len());
    let mut jacobian = Vec::with_capacity(models.len());
    for model in models {
        let p = model.posterior(x)?;
        values.push(p.mean + root_beta * p.std);
        jacobian.push(
            p.mean_grad
                .iter()
                .zip(&p.std_grad)
                .map(|(gm, gs)| gm + root_beta * gs)
                .collect(),
        );
    }
    Ok(Ucb { values, jacobian })
}

/// `U` without gradients; used for bulk shortlist scoring.
pub fn ucb_values(models: &[GpModel], x: &[f64], beta: f64) -> Result<Vec<f64>> {
    let root_beta = beta.max(0.0).sqrt();
    models
        .iter()
        .map(|m| m.predict(x).map(|(mu, sd)| mu + root_beta * sd))
        .collect()
}
