//! JSON experiment configs: schema types plus semantic validation.
//!
//! Deserialization is strict (`deny_unknown_fields` everywhere) so typos
//! surface as validation errors instead of silently picking defaults. The
//! semantic checks in [`ExperimentConfig::validate`] catch everything that
//! can be decided without touching the filesystem or running a task.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::priors::PriorModel;
use crate::seqspace::{BesovWeights, CoeffVec};

/// Builtin problem names accepted by [`ProblemSpec::Builtin`].
pub const BUILTIN_NAMES: [&str; 3] = ["gauss-1d", "hier-1d", "smoothing"];

/// Default row count of the smoothing builtin's forward operator.
pub const SMOOTHING_DEFAULT_ROWS: usize = 32;
/// Default singular-value decay exponent of the smoothing builtin.
pub const SMOOTHING_DEFAULT_ALPHA: f64 = 1.5;
/// Smallest truncation level the smoothing builtin supports; the ground
/// truth has a fixed coefficient at index 8, and keeping every level at or
/// above it makes the data identical across refinement levels.
pub const SMOOTHING_MIN_TRUNC: usize = 8;

/// Top-level experiment description: a forward problem, an optional prior
/// override, a truncation level, a master seed, and one task.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub prior: Option<PriorSpec>,
    pub trunc: usize,
    pub seed: u64,
    pub task: TaskSpec,
}

/// Where the forward operator and data come from.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemSpec {
    /// A named deterministic test problem; see [`BUILTIN_NAMES`].
    Builtin(BuiltinSpec),
    /// Operator matrix and data vector loaded from CSV files.
    Files(FilesSpec),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct BuiltinSpec {
    pub name: String,
    /// Row count for `smoothing`; rejected for the 1-d builtins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_rows: Option<usize>,
    /// Column decay exponent for `smoothing`; rejected for the 1-d builtins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct FilesSpec {
    pub matrix_file: PathBuf,
    pub data_file: PathBuf,
}

/// Prior family. The 1-d builtins fix their own prior; `smoothing` defaults
/// to `besov {s: 1.5, p: 1.5, d: 1}` when absent; file problems require one.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", rename_all_fields = "kebab-case", deny_unknown_fields)]
pub enum PriorSpec {
    WhiteNoise,
    GaussianDiag { cm_weights: Vec<f64> },
    Besov { s: f64, p: f64, d: u32 },
    Hierarchical { cov_weights: Vec<f64>, mean_direction: Vec<f64>, rho_variance: f64 },
}

impl PriorSpec {
    /// Instantiates the prior at truncation `trunc`. Weight vectors must be
    /// at least `trunc` long and are truncated to it, which is what lets one
    /// config drive every level of a refinement study.
    pub fn build(&self, trunc: usize) -> crate::error::Result<PriorModel> {
        use crate::error::Error;
        match self {
            PriorSpec::WhiteNoise => PriorModel::white_noise(trunc),
            PriorSpec::GaussianDiag { cm_weights } => {
                if cm_weights.len() < trunc {
                    return Err(Error::InvalidParam(format!(
                        "cm-weights has {} entries but truncation is {trunc}",
                        cm_weights.len()
                    )));
                }
                PriorModel::gaussian_diag(cm_weights[..trunc].to_vec())
            }
            PriorSpec::Besov { s, p, d } => {
                Ok(PriorModel::besov(BesovWeights::new(*s, *p, *d, trunc)?))
            }
            PriorSpec::Hierarchical { cov_weights, mean_direction, rho_variance } => {
                if cov_weights.len() < trunc || mean_direction.len() < trunc {
                    return Err(Error::InvalidParam(format!(
                        "hierarchical weights have {} and {} entries but truncation is {trunc}",
                        cov_weights.len(),
                        mean_direction.len()
                    )));
                }
                PriorModel::hierarchical(
                    cov_weights[..trunc].to_vec(),
                    CoeffVec::new(mean_direction[..trunc].to_vec())?,
                    *rho_variance,
                )
            }
        }
    }
}

fn default_sampler() -> SamplerChoice {
    SamplerChoice::Auto
}

fn default_norm() -> NormChoice {
    NormChoice::Euclid
}

/// Posterior sampler selection for `estimate-cm` and `bregman-compare`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SamplerChoice {
    /// Importance sampling, falling back to random-walk Metropolis when the
    /// weights degenerate.
    Auto,
    Is,
    Rwm,
}

/// Norm used for successive differences in a refinement study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormChoice {
    Euclid,
    /// Weighted norm of the configured Besov prior; requires one.
    Besov,
}

/// The experiment to run. Optional knobs fall back to library defaults.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(rename_all = "kebab-case", rename_all_fields = "kebab-case", deny_unknown_fields)]
pub enum TaskSpec {
    SamplePrior {
        count: usize,
        #[serde(default)]
        emit_draws: bool,
    },
    SolveMap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grad_tol: Option<f64>,
    },
    EstimateCm {
        count: usize,
        #[serde(default = "default_sampler")]
        sampler: SamplerChoice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        step_size: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        burn_in: Option<usize>,
    },
    VerifyOm {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        nodes: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_random: Option<usize>,
    },
    VerifyWmap {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_directions: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tol: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grad_tol: Option<f64>,
    },
    BregmanCompare {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        n_samples: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grad_tol: Option<f64>,
    },
    RefineStudy {
        levels: Vec<usize>,
        #[serde(default = "default_norm")]
        norm: NormChoice,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_iter: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        grad_tol: Option<f64>,
    },
}

impl TaskSpec {
    /// Table-friendly task name, matching the config tag.
    pub fn name(&self) -> &'static str {
        match self {
            TaskSpec::SamplePrior { .. } => "sample-prior",
            TaskSpec::SolveMap { .. } => "solve-map",
            TaskSpec::EstimateCm { .. } => "estimate-cm",
            TaskSpec::VerifyOm { .. } => "verify-om",
            TaskSpec::VerifyWmap { .. } => "verify-wmap",
            TaskSpec::BregmanCompare { .. } => "bregman-compare",
            TaskSpec::RefineStudy { .. } => "refine-study",
        }
    }
}

impl ExperimentConfig {
    /// Semantic checks beyond what the type system enforces. Returns a
    /// human-readable reason on the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.trunc == 0 {
            return Err("trunc must be at least 1".into());
        }
        match &self.problem {
            ProblemSpec::Builtin(spec) => self.validate_builtin(spec)?,
            ProblemSpec::Files(_) => {
                if self.prior.is_none() {
                    return Err("file-based problems require an explicit prior".into());
                }
            }
        }
        if let Some(prior) = &self.prior {
            self.validate_prior(prior)?;
        }
        self.validate_task()
    }

    fn validate_builtin(&self, spec: &BuiltinSpec) -> Result<(), String> {
        if !BUILTIN_NAMES.contains(&spec.name.as_str()) {
            return Err(format!(
                "unknown builtin problem {:?}; expected one of {:?}",
                spec.name, BUILTIN_NAMES
            ));
        }
        match spec.name.as_str() {
            "smoothing" => {
                if self.trunc < SMOOTHING_MIN_TRUNC {
                    return Err(format!(
                        "smoothing requires trunc >= {SMOOTHING_MIN_TRUNC}, got {}",
                        self.trunc
                    ));
                }
                if spec.m_rows == Some(0) {
                    return Err("m-rows must be at least 1".into());
                }
                if let Some(alpha) = spec.alpha {
                    if !alpha.is_finite() || alpha <= 0.0 {
                        return Err(format!("alpha must be positive and finite, got {alpha}"));
                    }
                }
            }
            _ => {
                if self.trunc != 1 {
                    return Err(format!(
                        "builtin {:?} is one-dimensional; trunc must be 1, got {}",
                        spec.name, self.trunc
                    ));
                }
                if self.prior.is_some() {
                    return Err(format!("builtin {:?} fixes its own prior", spec.name));
                }
                if spec.m_rows.is_some() || spec.alpha.is_some() {
                    return Err(format!(
                        "m-rows and alpha only apply to the smoothing builtin, not {:?}",
                        spec.name
                    ));
                }
            }
        }
        Ok(())
    }

    fn validate_prior(&self, prior: &PriorSpec) -> Result<(), String> {
        match prior {
            PriorSpec::WhiteNoise => Ok(()),
            PriorSpec::GaussianDiag { cm_weights } => {
                if cm_weights.len() != self.trunc {
                    return Err(format!(
                        "cm-weights has {} entries but trunc is {}",
                        cm_weights.len(),
                        self.trunc
                    ));
                }
                if let Some(q) = cm_weights.iter().find(|q| !q.is_finite() || **q <= 0.0) {
                    return Err(format!("cm-weights entries must be positive, got {q}"));
                }
                Ok(())
            }
            PriorSpec::Besov { s, p, d } => {
                if !s.is_finite() || *s <= 0.0 {
                    return Err(format!("besov smoothness s must be positive, got {s}"));
                }
                if !p.is_finite() || *p <= 1.0 || *p > 2.0 {
                    return Err(format!("besov integrability p must satisfy 1 < p <= 2, got {p}"));
                }
                if *d == 0 {
                    return Err("besov dimension d must be at least 1".into());
                }
                Ok(())
            }
            PriorSpec::Hierarchical { cov_weights, mean_direction, rho_variance } => {
                if cov_weights.len() != self.trunc || mean_direction.len() != self.trunc {
                    return Err(format!(
                        "hierarchical weight lengths {} and {} must equal trunc {}",
                        cov_weights.len(),
                        mean_direction.len(),
                        self.trunc
                    ));
                }
                if let Some(q) = cov_weights.iter().find(|q| !q.is_finite() || **q <= 0.0) {
                    return Err(format!("cov-weights entries must be positive, got {q}"));
                }
                if !rho_variance.is_finite() || *rho_variance <= 0.0 {
                    return Err(format!(
                        "rho-variance must be positive and finite, got {rho_variance}"
                    ));
                }
                if mean_direction.iter().any(|e| !e.is_finite()) {
                    return Err("mean-direction entries must be finite".into());
                }
                Ok(())
            }
        }
    }

    fn validate_task(&self) -> Result<(), String> {
        match &self.task {
            TaskSpec::SamplePrior { count, .. } => {
                if *count == 0 {
                    return Err("sample-prior count must be at least 1".into());
                }
            }
            TaskSpec::SolveMap { max_iter, grad_tol } => {
                check_solver_knobs(*max_iter, *grad_tol)?;
            }
            TaskSpec::EstimateCm { count, sampler, step_size, burn_in } => {
                if *count == 0 {
                    return Err("estimate-cm count must be at least 1".into());
                }
                if *sampler == SamplerChoice::Is && (step_size.is_some() || burn_in.is_some()) {
                    return Err(
                        "step-size and burn-in only apply to the rwm sampler".into()
                    );
                }
                if let Some(step) = step_size {
                    if !step.is_finite() || *step <= 0.0 {
                        return Err(format!("step-size must be positive, got {step}"));
                    }
                }
            }
            TaskSpec::VerifyOm { nodes, n_random } => {
                if *nodes == Some(0) || *nodes == Some(1) {
                    return Err("verify-om needs at least 2 quadrature nodes".into());
                }
                let _ = n_random;
            }
            TaskSpec::VerifyWmap { tol, max_iter, grad_tol, .. } => {
                if let Some(tol) = tol {
                    if !tol.is_finite() || *tol <= 0.0 {
                        return Err(format!("tol must be positive, got {tol}"));
                    }
                }
                check_solver_knobs(*max_iter, *grad_tol)?;
            }
            TaskSpec::BregmanCompare { n_samples, max_iter, grad_tol } => {
                if *n_samples == Some(0) {
                    return Err("bregman-compare n-samples must be at least 1".into());
                }
                check_solver_knobs(*max_iter, *grad_tol)?;
            }
            TaskSpec::RefineStudy { levels, norm, max_iter, grad_tol } => {
                if levels.is_empty() {
                    return Err("refine-study needs at least one level".into());
                }
                if !levels.windows(2).all(|w| w[0] < w[1]) {
                    return Err("refine-study levels must be strictly increasing".into());
                }
                if *levels.last().unwrap() != self.trunc {
                    return Err(format!(
                        "last refine-study level {} must equal trunc {}",
                        levels.last().unwrap(),
                        self.trunc
                    ));
                }
                match &self.problem {
                    ProblemSpec::Builtin(spec) if spec.name == "smoothing" => {
                        if levels[0] < SMOOTHING_MIN_TRUNC {
                            return Err(format!(
                                "smoothing levels must all be >= {SMOOTHING_MIN_TRUNC}, got {}",
                                levels[0]
                            ));
                        }
                    }
                    ProblemSpec::Builtin(spec) => {
                        return Err(format!(
                            "builtin {:?} is one-dimensional and cannot be refined",
                            spec.name
                        ));
                    }
                    ProblemSpec::Files(_) => {}
                }
                if matches!(self.prior, Some(PriorSpec::Hierarchical { .. })) {
                    return Err("refine-study does not support hierarchical priors".into());
                }
                if *norm == NormChoice::Besov {
                    let besov_prior = match &self.prior {
                        Some(PriorSpec::Besov { .. }) => true,
                        None => matches!(
                            &self.problem,
                            ProblemSpec::Builtin(spec) if spec.name == "smoothing"
                        ),
                        _ => false,
                    };
                    if !besov_prior {
                        return Err("the besov refinement norm requires a besov prior".into());
                    }
                }
                check_solver_knobs(*max_iter, *grad_tol)?;
            }
        }
        Ok(())
    }
}

fn check_solver_knobs(max_iter: Option<usize>, grad_tol: Option<f64>) -> Result<(), String> {
    if max_iter == Some(0) {
        return Err("max-iter must be at least 1".into());
    }
    if let Some(tol) = grad_tol {
        if !tol.is_finite() || tol <= 0.0 {
            return Err(format!("grad-tol must be positive and finite, got {tol}"));
        }
    }
    Ok(())
}
