//! Experiment configuration: a flat TOML file with typed validation.
//!
//! ```toml
//! problem = "blobs"
//! policies = ["random", "moc_cas"]
//! trials = 2
//! budget = 50
//! ```
//!
//! Every key is optional except `problem`; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::acquisition::OverlapWeight;
use crate::baselines::PolicyKind;
use crate::check::CheckConfig;
use crate::error::{invalid, Error, Result};
use crate::pool::Pool;
use crate::search::{AcquisitionMode, MocConfig};
use crate::synthetic::{calibrate_thresholds, make_pool, make_smooth_problem, ProblemKind, SyntheticProblem};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceMode {
    #[default]
    Pool,
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AblationAxis {
    R,
    Beta0,
}

impl AblationAxis {
    pub fn name(self) -> &'static str {
        match self {
            AblationAxis::R => "r",
            AblationAxis::Beta0 => "beta0",
        }
    }
}

impl std::str::FromStr for AblationAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "r" => Ok(AblationAxis::R),
            "beta0" => Ok(AblationAxis::Beta0),
            other => Err(invalid("ablate_axis", format!("unknown axis `{other}` (expected r or beta0)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `blobs`, `ridges`, or `pool` (read from `pool_path`).
    pub problem: String,
    pub pool_path: Option<PathBuf>,
    pub mode: SpaceMode,
    pub dim: usize,
    pub objectives: usize,
    pub pool_size: usize,
    pub problem_seed: u64,
    pub noise_std: f64,
    /// Used to calibrate thresholds when `thresholds` is absent.
    pub feasible_fraction: f64,
    pub thresholds: Option<Vec<f64>>,
    pub upper_bounds: Option<Vec<f64>>,

    pub policies: Vec<PolicyKind>,
    pub trials: usize,
    pub seeds: Option<Vec<u64>>,
    pub out: Option<PathBuf>,

    pub r: f64,
    pub lambda: Option<f64>,
    pub beta0: f64,
    pub anneal_floor: f64,
    pub budget: usize,
    pub n_init: usize,
    pub per_objective_cap: usize,
    pub random_cap: usize,
    pub n_mc_acq: usize,
    pub n_mc_metric: usize,
    pub prefit_size: usize,
    pub grid_lengthscales: usize,
    pub grid_variances: usize,
    pub noise_variance: f64,
    pub acquisition: AcquisitionMode,
    pub overlap: OverlapWeight,
    pub tie_tol: f64,
    pub cluster_k: usize,
    pub cluster_max_iters: usize,
    pub n_starts: usize,
    pub max_steps: usize,
    pub record_wall_time: bool,
    pub t_at: Vec<u64>,

    pub ablate_axis: Option<AblationAxis>,
    pub ablate_values: Vec<f64>,

    pub check_objectives: Vec<usize>,
    pub check_prior_counts: Vec<usize>,
    pub check_repeats: usize,
    pub check_margins: Vec<f64>,
    pub check_n_mc: usize,
    pub check_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let moc = MocConfig::default();
        let check = CheckConfig::default();
        Self {
            problem: String::new(),
            pool_path: None,
            mode: SpaceMode::Pool,
            dim: 4,
            objectives: 3,
            pool_size: 5000,
            problem_seed: 0,
            noise_std: crate::synthetic::DEFAULT_NOISE_STD,
            feasible_fraction: 0.3,
            thresholds: None,
            upper_bounds: None,
            policies: PolicyKind::ALL.to_vec(),
            trials: 4,
            seeds: None,
            out: None,
            r: moc.r,
            lambda: moc.lambda,
            beta0: moc.beta0,
            anneal_floor: moc.anneal_floor,
            budget: moc.budget,
            n_init: moc.n_init,
            per_objective_cap: moc.per_objective_cap,
            random_cap: moc.random_cap,
            n_mc_acq: moc.n_mc_acq,
            n_mc_metric: moc.n_mc_metric,
            prefit_size: moc.prefit_size,
            grid_lengthscales: moc.grid_lengthscales,
            grid_variances: moc.grid_variances,
            noise_variance: moc.noise_variance,
            acquisition: moc.acquisition,
            overlap: moc.overlap,
            tie_tol: moc.tie_tol,
            cluster_k: moc.cluster_k,
            cluster_max_iters: moc.cluster_max_iters,
            n_starts: moc.n_starts,
            max_steps: moc.max_steps,
            record_wall_time: moc.record_wall_time,
            t_at: moc.t_at,
            ablate_axis: None,
            ablate_values: Vec::new(),
            check_objectives: check.objectives,
            check_prior_counts: check.prior_counts,
            check_repeats: check.repeats,
            check_margins: check.margins,
            check_n_mc: check.n_mc,
            check_seed: check.seed,
        }
    }
}

/// The search space a config resolves to.
#[derive(Debug, Clone)]
pub enum Problem {
    Pool(Pool),
    Continuous(SyntheticProblem),
}

impl Problem {
    pub fn space(&self) -> crate::search::SearchSpace<'_> {
        match self {
            Problem::Pool(p) => crate::search::SearchSpace::Pool(p),
            Problem::Continuous(p) => crate::search::SearchSpace::Continuous(p),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        let config: Self = toml::from_str(text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text, path)
    }

    pub fn seeds(&self) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..self.trials as u64).collect())
    }

    pub fn validate(&self) -> Result<()> {
        match self.problem.as_str() {
            "" => return Err(invalid("problem", "required (blobs, ridges or pool)")),
            "pool" => {
                if self.pool_path.is_none() {
                    return Err(invalid("pool_path", "required when problem = \"pool\""));
                }
                if self.mode == SpaceMode::Continuous {
                    return Err(invalid("mode", "a pool file cannot be searched in continuous mode"));
                }
            }
            other => {
                other.parse::<ProblemKind>()?;
            }
        }
        if self.policies.is_empty() {
            return Err(invalid("policies", "must be nonempty"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be >= 1"));
        }
        if let Some(seeds) = &self.seeds {
            if seeds.len() != self.trials {
                return Err(invalid(
                    "seeds",
                    format!("{} seeds given for {} trials", seeds.len(), self.trials),
                ));
            }
        }
        if self.dim == 0 || self.objectives == 0 {
            return Err(invalid("dim", "dim and objectives must be >= 1"));
        }
        if !(self.feasible_fraction > 0.0 && self.feasible_fraction < 1.0) {
            return Err(invalid("feasible_fraction", "must lie in (0, 1)"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(invalid("noise_std", "must be >= 0"));
        }
        if !self.ablate_values.iter().all(|v| v.is_finite()) {
            return Err(invalid("ablate_values", "must be finite"));
        }
        // placeholder thresholds let the search settings validate before the problem is built
        let m = self.thresholds.as_ref().map_or(self.objectives, Vec::len);
        let probe = self.moc_config(self.thresholds.clone().unwrap_or_else(|| vec![0.0; m]), 0);
        probe.validate()?;
        self.check_config().validate()
    }

    /// Search settings for one trial, given resolved thresholds.
    pub fn moc_config(&self, thresholds: Vec<f64>, seed: u64) -> MocConfig {
        MocConfig {
            thresholds,
            upper_bounds: self.upper_bounds.clone(),
            r: self.r,
            lambda: self.lambda,
            beta0: self.beta0,
            anneal_floor: self.anneal_floor,
            budget: self.budget,
            n_init: self.n_init,
            per_objective_cap: self.per_objective_cap,
            random_cap: self.random_cap,
            n_mc_acq: self.n_mc_acq,
            n_mc_metric: self.n_mc_metric,
            seed,
            prefit_size: self.prefit_size,
            grid_lengthscales: self.grid_lengthscales,
            grid_variances: self.grid_variances,
            noise_variance: self.noise_variance,
            acquisition: self.acquisition,
            overlap: self.overlap,
            tie_tol: self.tie_tol,
            cluster_k: self.cluster_k,
            cluster_max_iters: self.cluster_max_iters,
            n_starts: self.n_starts,
            max_steps: self.max_steps,
            record_wall_time: self.record_wall_time,
            t_at: self.t_at.clone(),
        }
    }

    pub fn check_config(&self) -> CheckConfig {
        CheckConfig {
            objectives: self.check_objectives.clone(),
            prior_counts: self.check_prior_counts.clone(),
            repeats: self.check_repeats,
            margins: self.check_margins.clone(),
            r: self.r,
            lambda: self.lambda.unwrap_or(self.r / 2.0),
            beta: self.beta0,
            overlap: self.overlap,
            n_mc: self.check_n_mc,
            seed: self.check_seed,
            ..CheckConfig::default()
        }
    }

    /// Builds the problem and resolves thresholds (calibrating them when not given).
    pub fn build_problem(&self) -> Result<(Problem, Vec<f64>)> {
        if self.problem == "pool" {
            let path = self.pool_path.as_ref().ok_or_else(|| invalid("pool_path", "required"))?;
            let pool = Pool::load_csv(path)?.with_noise_std(self.noise_std);
            if pool.is_live_oracle() {
                return Err(Error::MissingOutcomes);
            }
            let thresholds = match &self.thresholds {
                Some(t) => t.clone(),
                None => calibrate_thresholds(&pool, self.feasible_fraction)?,
            };
            return Ok((Problem::Pool(pool), thresholds));
        }
        let kind: ProblemKind = self.problem.parse()?;
        let problem =
            make_smooth_problem(kind, self.dim, self.objectives, self.problem_seed)?.with_noise_std(self.noise_std);
        let pool = make_pool(&problem, self.pool_size, self.problem_seed.wrapping_add(1))?.with_noise_std(self.noise_std);
        let thresholds = match &self.thresholds {
            Some(t) => t.clone(),
            None => calibrate_thresholds(&pool, self.feasible_fraction)?,
        };
        let built = match self.mode {
            SpaceMode::Pool => Problem::Pool(pool),
            SpaceMode::Continuous => Problem::Continuous(problem),
        };
        Ok((built, thresholds))
    }

    /// SHA-256 of the canonical JSON form, ignoring the output location.
    pub fn hash(&self) -> String {
        let canonical = Self { out: None, ..self.clone() };
        let json = serde_json::to_string(&canonical).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, Path::new("test.toml"))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("problem = \"blobs\"\npolicies = [\"moc_cas\"]\n").unwrap();
        assert_eq!(c.policies, vec![PolicyKind::MocCas]);
        let d = ExperimentConfig::default();
        assert_eq!((c.budget, c.n_init, c.trials, c.r), (d.budget, d.n_init, 4, d.r));
        assert_eq!(c.seeds(), vec![0, 1, 2, 3]);
        assert_eq!(c.per_objective_cap, 50);
        assert_eq!(c.random_cap, 100);
    }

    #[test]
    fn rejects_bad_values() {
        match parse("problem = \"blobs\"\nr = -0.1\n") {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "r"),
            other => panic!("{other:?}"),
        }
        match parse("problem = \"blobs\"\ntrials = 2\nseeds = [1, 2, 3]\n") {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "seeds"),
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("problem = \"blobs\"\nbudget = 0\n"), Err(Error::Validation { .. })));
        assert!(matches!(parse("policies = [\"random\"]\n"), Err(Error::Validation { .. })));
        assert!(matches!(parse("problem = \"pool\"\n"), Err(Error::Validation { .. })));
    }

    #[test]
    fn parse_errors_carry_location() {
        match parse("problem = \"blobs\"\nbudgett = 3\n") {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("budgett"), "{message}");
                assert!(message.contains("line 2"), "{message}");
            }
            other => panic!("{other:?}"),
        }
        assert!(matches!(parse("problem = \"blobs\"\nbudget = \"x\"\n"), Err(Error::Parse { .. })));
        assert!(matches!(parse("problem = \"blobs\"\npolicies = [\"nope\"]\n"), Err(Error::Parse { .. })));
    }

    #[test]
    fn hash_tracks_content_not_output_dir() {
        let a = parse("problem = \"blobs\"\n").unwrap();
        let b = ExperimentConfig {
            out: Some("elsewhere".into()),
            ..a.clone()
        };
        let c = ExperimentConfig { budget: 7, ..a.clone() };
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash().len(), 64);
    }

    #[test]
    fn builds_synthetic_problem_with_calibrated_thresholds() {
        let c = parse("problem = \"ridges\"\ndim = 2\nobjectives = 2\npool_size = 500\n").unwrap();
        let (problem, thresholds) = c.build_problem().unwrap();
        assert_eq!(thresholds.len(), 2);
        match problem {
            Problem::Pool(p) => {
                let frac = crate::synthetic::feasible_fraction(p.outcomes().unwrap(), &thresholds);
                assert!((frac - 0.3).abs() < 0.02);
            }
            Problem::Continuous(_) => panic!("expected pool mode"),
        }
    }
}
