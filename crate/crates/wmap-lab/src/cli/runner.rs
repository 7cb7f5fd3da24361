//! Executes a parsed experiment config and renders the result tables.
//!
//! Failures are classified into three kinds that map directly onto process
//! exit codes: [`RunErrorKind::Parse`] (2) for unreadable or syntactically
//! invalid configs, [`RunErrorKind::Validation`] (3) for configs that parse
//! but describe an impossible experiment (including unusable matrix or data
//! files), and [`RunErrorKind::Task`] (4) for runtime failures such as a
//! solver that does not converge or an unwritable output directory.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::cli::config::{
    BuiltinSpec, ExperimentConfig, FilesSpec, NormChoice, PriorSpec, ProblemSpec, SamplerChoice,
    TaskSpec, SMOOTHING_DEFAULT_ALPHA, SMOOTHING_DEFAULT_ROWS, SMOOTHING_MIN_TRUNC,
};
use crate::cli::report::{Cell, Format, Provenance, Report, Table};
use crate::error::{Error, Result};
use crate::fomin;
use crate::posterior::{cm_estimate, ForwardOperator, PosteriorModel};
use crate::priors::{Dir, Point, PriorModel};
use crate::sample::{derive_seed, BatchSource, SampleBatch};
use crate::seqspace::{BesovWeights, CoeffVec};
use crate::solvers::{
    refinement_study, solve_wmap, verify_solution, RefinementLevel, RefinementNorm, SolveOptions,
    SolveResult,
};

/// Seed tag for the smoothing builtin's operator columns (one RNG stream per
/// column, which keeps coarse operators prefixes of finer ones).
pub const TAG_SMOOTH_COLS: u64 = 11;
/// Seed tag for the smoothing builtin's fixed noise realization.
pub const TAG_SMOOTH_NOISE: u64 = 12;
/// Seed tag for the base point of a translation-density check.
pub const TAG_OM_POINT: u64 = 13;
/// Seed tag for the random directions of a translation-density check.
pub const TAG_OM_DIRS: u64 = 14;

/// Ground-truth support of the smoothing builtin: coefficient `1/l` at these
/// indices, zero elsewhere. All lie at or below [`SMOOTHING_MIN_TRUNC`], so
/// the synthetic data is identical at every admissible truncation.
const SMOOTHING_TRUTH_SUPPORT: [usize; 5] = [1, 2, 3, 5, 8];
/// Besov parameters `(s, p, d)` of the smoothing builtin's default prior.
pub const SMOOTHING_DEFAULT_PRIOR: (f64, f64, u32) = (1.5, 1.5, 1);

/// Failure classification; see the module docs for the exit-code mapping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunErrorKind {
    Parse,
    Validation,
    Task,
}

/// A classified runner failure with a one-line reason.
#[derive(Debug)]
pub struct RunError {
    pub kind: RunErrorKind,
    pub message: String,
}

impl RunError {
    pub fn parse(message: impl Into<String>) -> Self {
        RunError { kind: RunErrorKind::Parse, message: message.into() }
    }

    pub fn validation(message: impl Into<String>) -> Self {
        RunError { kind: RunErrorKind::Validation, message: message.into() }
    }

    pub fn task(message: impl Into<String>) -> Self {
        RunError { kind: RunErrorKind::Task, message: message.into() }
    }

    /// Machine-readable failure class, used as a prefix on the diagnostic
    /// stream.
    pub fn label(&self) -> &'static str {
        match self.kind {
            RunErrorKind::Parse => "parse",
            RunErrorKind::Validation => "validation",
            RunErrorKind::Task => "task",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            RunErrorKind::Parse => 2,
            RunErrorKind::Validation => 3,
            RunErrorKind::Task => 4,
        }
    }
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.label(), self.message)
    }
}

impl std::error::Error for RunError {}

fn task_err(e: Error) -> RunError {
    RunError::task(e.to_string())
}

/// A completed run: the in-memory report plus the files written.
#[derive(Debug)]
pub struct RunOutcome {
    pub report: Report,
    pub written: Vec<PathBuf>,
}

/// Loads, validates, executes, and renders a config file.
pub fn run(config_path: &Path, out_dir: &Path, formats: &[Format]) -> std::result::Result<RunOutcome, RunError> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| RunError::parse(format!("cannot read {}: {e}", config_path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| RunError::parse(format!("{}: {e}", config_path.display())))?;
    let config: ExperimentConfig = serde_json::from_value(value.clone())
        .map_err(|e| RunError::validation(e.to_string()))?;
    config.validate().map_err(RunError::validation)?;
    let (tables, warnings) = execute(&config)?;
    let report = Report {
        task: config.task.name().to_string(),
        config: value,
        provenance: Provenance::capture(config.seed),
        tables,
        warnings,
    };
    let written = report
        .emit(out_dir, formats)
        .map_err(|e| RunError::task(format!("cannot write report to {}: {e}", out_dir.display())))?;
    Ok(RunOutcome { report, written })
}

/// Runs a validated config and returns its tables and warnings.
pub fn execute(config: &ExperimentConfig) -> std::result::Result<(Vec<Table>, Vec<String>), RunError> {
    if let TaskSpec::RefineStudy { levels, norm, max_iter, grad_tol } = &config.task {
        return run_refine(config, levels, *norm, *max_iter, *grad_tol);
    }
    let post = build_problem(config)?;
    match &config.task {
        TaskSpec::SamplePrior { count, emit_draws } => {
            run_sample_prior(config, &post, *count, *emit_draws)
        }
        TaskSpec::SolveMap { max_iter, grad_tol } => {
            let opts = solve_options(*max_iter, *grad_tol);
            let result = converged_solve(&post, &opts)?;
            Ok((solve_tables(&result), Vec::new()))
        }
        TaskSpec::EstimateCm { count, sampler, step_size, burn_in } => {
            run_estimate_cm(config, &post, *count, *sampler, *step_size, *burn_in)
        }
        TaskSpec::VerifyOm { nodes, n_random } => {
            run_verify_om(config, &post, nodes.unwrap_or(64), n_random.unwrap_or(5))
        }
        TaskSpec::VerifyWmap { n_directions, tol, max_iter, grad_tol } => {
            let opts = solve_options(*max_iter, *grad_tol);
            let result = converged_solve(&post, &opts)?;
            let report = verify_solution(
                &post,
                &result,
                n_directions.unwrap_or(20),
                config.seed,
                tol.unwrap_or(1e-6),
            )
            .map_err(task_err)?;
            let mut scan = Table::new("scan", &["direction_id", "ratio"]);
            for entry in &report.scans {
                scan.push(vec![Cell::Text(entry.id.clone()), Cell::Num(entry.ratio)]);
            }
            let mut summary = Table::new(
                "summary",
                &["residual", "residual_ok", "max_ratio", "ratios_ok", "objective_ok", "tol", "passed"],
            );
            summary.push(vec![
                Cell::Num(report.residual),
                Cell::Bool(report.residual_ok),
                Cell::Num(report.max_ratio),
                Cell::Bool(report.ratios_ok),
                Cell::Bool(report.objective_ok),
                Cell::Num(report.tol),
                Cell::Bool(report.passed),
            ]);
            Ok((vec![scan, summary], Vec::new()))
        }
        TaskSpec::BregmanCompare { n_samples, max_iter, grad_tol } => {
            run_bregman_compare(config, &post, n_samples.unwrap_or(10_000), *max_iter, *grad_tol)
        }
        TaskSpec::RefineStudy { .. } => unreachable!("handled above"),
    }
}

fn solve_options(max_iter: Option<usize>, grad_tol: Option<f64>) -> SolveOptions {
    let mut opts = SolveOptions::default();
    if let Some(m) = max_iter {
        opts.max_iter = m;
    }
    if let Some(t) = grad_tol {
        opts.grad_tol = t;
    }
    opts
}

fn converged_solve(
    post: &PosteriorModel,
    opts: &SolveOptions,
) -> std::result::Result<SolveResult, RunError> {
    let result = solve_wmap(post, opts).map_err(task_err)?;
    if !result.converged {
        return Err(RunError::task(format!(
            "solver stopped after {} iterations with residual {:.3e} above tolerance {:.3e}",
            result.iterations, result.residual, opts.grad_tol
        )));
    }
    Ok(result)
}

fn coordinate_labels(point: &Point) -> Vec<String> {
    let mut labels: Vec<String> = (1..=point.trunc()).map(|i| format!("u{i}")).collect();
    if matches!(point, Point::Hier(_)) {
        labels.push("t".into());
    }
    labels
}

fn sampler_label(source: BatchSource) -> &'static str {
    match source {
        BatchSource::DirectPrior => "prior",
        BatchSource::PriorImportance => "is",
        BatchSource::RwMetropolis => "rwm",
    }
}

// ---------------------------------------------------------------------------
// Problem construction.

/// Builds a builtin problem with all knobs at their defaults.
pub fn builtin_problem(name: &str, trunc: usize, seed: u64) -> Result<PosteriorModel> {
    builtin_problem_with(name, trunc, seed, None, None, None)
}

/// Builds a builtin problem; `m_rows`, `alpha`, and `prior` apply to the
/// `smoothing` family only.
pub fn builtin_problem_with(
    name: &str,
    trunc: usize,
    seed: u64,
    m_rows: Option<usize>,
    alpha: Option<f64>,
    prior: Option<&PriorSpec>,
) -> Result<PosteriorModel> {
    match name {
        "gauss-1d" => {
            if trunc != 1 {
                return Err(Error::InvalidParam(format!(
                    "gauss-1d is one-dimensional, got truncation {trunc}"
                )));
            }
            PosteriorModel::new(
                PriorModel::white_noise(1)?,
                ForwardOperator::from_rows(&[vec![1.0]])?,
                vec![2.0],
            )
        }
        "hier-1d" => {
            if trunc != 1 {
                return Err(Error::InvalidParam(format!(
                    "hier-1d is one-dimensional, got truncation {trunc}"
                )));
            }
            PosteriorModel::new(
                PriorModel::hierarchical(vec![1.0], CoeffVec::new(vec![1.0])?, 1.0)?,
                ForwardOperator::from_rows(&[vec![1.0]])?,
                vec![3.0],
            )
        }
        "smoothing" => {
            let prior_model = match prior {
                Some(spec) => spec.build(trunc)?,
                None => default_smoothing_prior(trunc)?,
            };
            smoothing_problem(
                trunc,
                seed,
                m_rows.unwrap_or(SMOOTHING_DEFAULT_ROWS),
                alpha.unwrap_or(SMOOTHING_DEFAULT_ALPHA),
                prior_model,
            )
        }
        other => Err(Error::InvalidParam(format!("unknown builtin problem {other:?}"))),
    }
}

/// The smoothing builtin's default prior at a given truncation.
pub fn default_smoothing_prior(trunc: usize) -> Result<PriorModel> {
    let (s, p, d) = SMOOTHING_DEFAULT_PRIOR;
    Ok(PriorModel::besov(BesovWeights::new(s, p, d, trunc)?))
}

/// A mildly ill-posed synthetic deconvolution problem: column `l` of the
/// operator is `l^{-alpha}` times a fixed Gaussian vector drawn from its own
/// RNG stream, the ground truth is sparse (see [`SMOOTHING_TRUTH_SUPPORT`]),
/// and the data carries one fixed noise realization. Operators at different
/// truncations of the same seed are nested column prefixes with identical
/// data, which is what a refinement study needs.
pub fn smoothing_problem(
    trunc: usize,
    seed: u64,
    m_rows: usize,
    alpha: f64,
    prior: PriorModel,
) -> Result<PosteriorModel> {
    if trunc < SMOOTHING_MIN_TRUNC {
        return Err(Error::InvalidParam(format!(
            "smoothing requires truncation >= {SMOOTHING_MIN_TRUNC}, got {trunc}"
        )));
    }
    if m_rows == 0 {
        return Err(Error::InvalidParam("smoothing needs at least one data row".into()));
    }
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidParam(format!(
            "smoothing decay exponent must be positive, got {alpha}"
        )));
    }
    if prior.trunc() != trunc {
        return Err(Error::TruncMismatch { expected: trunc, found: prior.trunc() });
    }
    let mut a = DMatrix::<f64>::zeros(m_rows, trunc);
    for l in 1..=trunc {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_SMOOTH_COLS));
        rng.set_stream(l as u64);
        let scale = (l as f64).powf(-alpha);
        for k in 0..m_rows {
            a[(k, l - 1)] = scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
    let mut data = vec![0.0; m_rows];
    for &l in &SMOOTHING_TRUTH_SUPPORT {
        let truth = 1.0 / l as f64;
        for (k, entry) in data.iter_mut().enumerate() {
            *entry += a[(k, l - 1)] * truth;
        }
    }
    let mut noise_rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_SMOOTH_NOISE));
    for entry in data.iter_mut() {
        *entry += noise_rng.sample::<f64, _>(StandardNormal);
    }
    PosteriorModel::new(prior, ForwardOperator::new(a)?, data)
}

fn build_problem(config: &ExperimentConfig) -> std::result::Result<PosteriorModel, RunError> {
    match &config.problem {
        ProblemSpec::Builtin(BuiltinSpec { name, m_rows, alpha }) => builtin_problem_with(
            name,
            config.trunc,
            config.seed,
            *m_rows,
            *alpha,
            config.prior.as_ref(),
        )
        .map_err(|e| RunError::validation(e.to_string())),
        ProblemSpec::Files(files) => build_file_problem(config, files),
    }
}

fn build_file_problem(
    config: &ExperimentConfig,
    files: &FilesSpec,
) -> std::result::Result<PosteriorModel, RunError> {
    let rows = load_matrix(&files.matrix_file)?;
    let data = load_vector(&files.data_file)?;
    if rows[0].len() != config.trunc {
        return Err(RunError::validation(format!(
            "matrix {} has {} columns but trunc is {}",
            files.matrix_file.display(),
            rows[0].len(),
            config.trunc
        )));
    }
    let prior = config
        .prior
        .as_ref()
        .expect("validated: file problems carry a prior")
        .build(config.trunc)
        .map_err(|e| RunError::validation(e.to_string()))?;
    let op = ForwardOperator::from_rows(&rows).map_err(|e| RunError::validation(e.to_string()))?;
    PosteriorModel::new(prior, op, data).map_err(|e| RunError::validation(e.to_string()))
}

/// Reads a headerless numeric CSV as matrix rows; every record must have the
/// same width.
fn load_matrix(path: &Path) -> std::result::Result<Vec<Vec<f64>>, RunError> {
    let rows = read_numeric_csv(path)?;
    if rows.is_empty() {
        return Err(RunError::validation(format!("{} is empty", path.display())));
    }
    Ok(rows)
}

/// Reads a headerless numeric CSV as a flat vector (one value per record or
/// one comma-separated row).
fn load_vector(path: &Path) -> std::result::Result<Vec<f64>, RunError> {
    let rows = read_numeric_csv(path)?;
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    if flat.is_empty() {
        return Err(RunError::validation(format!("{} is empty", path.display())));
    }
    Ok(flat)
}

fn read_numeric_csv(path: &Path) -> std::result::Result<Vec<Vec<f64>>, RunError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| RunError::validation(format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record =
            record.map_err(|e| RunError::validation(format!("{}: {e}", path.display())))?;
        let row = record
            .iter()
            .map(|field| {
                field.parse::<f64>().map_err(|_| {
                    RunError::validation(format!(
                        "{} record {}: not a number: {field:?}",
                        path.display(),
                        i + 1
                    ))
                })
            })
            .collect::<std::result::Result<Vec<f64>, RunError>>()?;
        rows.push(row);
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Task implementations.

fn run_sample_prior(
    config: &ExperimentConfig,
    post: &PosteriorModel,
    count: usize,
    emit_draws: bool,
) -> std::result::Result<(Vec<Table>, Vec<String>), RunError> {
    let batch = post
        .prior()
        .sample(config.trunc, config.seed, count)
        .map_err(task_err)?;
    let labels = coordinate_labels(&batch.draws()[0]);
    let flats: Vec<Vec<f64>> = batch.draws().iter().map(Point::flat).collect();
    let k = flats.len() as f64;
    let mut moments = Table::new("moments", &["coordinate", "mean", "variance"]);
    for (j, label) in labels.iter().enumerate() {
        let mean = flats.iter().map(|f| f[j]).sum::<f64>() / k;
        let variance = if flats.len() > 1 {
            Cell::Num(flats.iter().map(|f| (f[j] - mean).powi(2)).sum::<f64>() / (k - 1.0))
        } else {
            Cell::Empty
        };
        moments.push(vec![Cell::Text(label.clone()), Cell::Num(mean), variance]);
    }
    let mut tables = vec![moments];
    if emit_draws {
        let mut draws = Table::new("draws", &["draw", "coordinate", "value"]);
        for (i, flat) in flats.iter().enumerate() {
            for (label, value) in labels.iter().zip(flat) {
                draws.push(vec![
                    Cell::Int(i as i64 + 1),
                    Cell::Text(label.clone()),
                    Cell::Num(*value),
                ]);
            }
        }
        tables.push(draws);
    }
    Ok((tables, batch.warnings().to_vec()))
}

fn solve_tables(result: &SolveResult) -> Vec<Table> {
    let labels = coordinate_labels(&result.argmin);
    let mut solution = Table::new("solution", &["coordinate", "value"]);
    for (label, value) in labels.iter().zip(result.argmin.flat()) {
        solution.push(vec![Cell::Text(label.clone()), Cell::Num(value)]);
    }
    let mut summary = Table::new("summary", &["objective", "residual", "iterations", "converged"]);
    summary.push(vec![
        Cell::Num(result.objective),
        Cell::Num(result.residual),
        Cell::Int(result.iterations as i64),
        Cell::Bool(result.converged),
    ]);
    vec![solution, summary]
}

fn default_burn_in(count: usize) -> usize {
    1000.max(count / 10)
}

/// Draws a posterior batch under the configured sampler policy; `auto`
/// falls back from importance sampling to the random-walk chain when the
/// weights degenerate.
fn posterior_batch(
    post: &PosteriorModel,
    seed: u64,
    count: usize,
    sampler: SamplerChoice,
    step_size: Option<f64>,
    burn_in: Option<usize>,
) -> Result<(SampleBatch, Vec<String>)> {
    let mut warnings = Vec::new();
    let rwm = |post: &PosteriorModel| {
        post.sample_rwm(
            seed,
            count,
            step_size.unwrap_or(0.25),
            burn_in.unwrap_or_else(|| default_burn_in(count)),
        )
    };
    let batch = match sampler {
        SamplerChoice::Is => post.sample_is(seed, count)?,
        SamplerChoice::Rwm => rwm(post)?,
        SamplerChoice::Auto => {
            let is = post.sample_is(seed, count)?;
            if is.is_degenerate() {
                warnings.push(format!(
                    "importance weights degenerate (effective sample size {:.1} of {count}); \
                     fell back to random-walk Metropolis",
                    is.ess()
                ));
                rwm(post)?
            } else {
                is
            }
        }
    };
    warnings.extend(batch.warnings().iter().cloned());
    Ok((batch, warnings))
}

fn run_estimate_cm(
    config: &ExperimentConfig,
    post: &PosteriorModel,
    count: usize,
    sampler: SamplerChoice,
    step_size: Option<f64>,
    burn_in: Option<usize>,
) -> std::result::Result<(Vec<Table>, Vec<String>), RunError> {
    let (batch, warnings) =
        posterior_batch(post, config.seed, count, sampler, step_size, burn_in)
            .map_err(task_err)?;
    let estimate = cm_estimate(&batch).map_err(task_err)?;
    let labels = coordinate_labels(&estimate.mean);
    let mut cm = Table::new("cm", &["coordinate", "estimate", "stderr"]);
    for ((label, value), se) in labels.iter().zip(estimate.mean.flat()).zip(&estimate.stderr) {
        cm.push(vec![Cell::Text(label.clone()), Cell::Num(value), Cell::Num(*se)]);
    }
    let mut summary = Table::new("summary", &["sampler", "count", "ess", "acceptance_rate"]);
    let ess = match batch.source() {
        BatchSource::PriorImportance => Cell::Num(batch.ess()),
        _ => Cell::Empty,
    };
    let acceptance = match batch.acceptance_rate() {
        Some(rate) => Cell::Num(rate),
        None => Cell::Empty,
    };
    summary.push(vec![
        Cell::Text(sampler_label(batch.source()).into()),
        Cell::Int(batch.len() as i64),
        ess,
        acceptance,
    ]);
    Ok((vec![cm, summary], warnings))
}

fn run_verify_om(
    config: &ExperimentConfig,
    post: &PosteriorModel,
    nodes: usize,
    n_random: usize,
) -> std::result::Result<(Vec<Table>, Vec<String>), RunError> {
    let u = post
        .prior()
        .sample(config.trunc, derive_seed(config.seed, TAG_OM_POINT), 1)
        .map_err(task_err)?
        .into_draws()
        .remove(0);
    let mut labeled = fomin::unit_directions(&u);
    let (scales, hyper_scale) = post.prior().sampling_scales();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, TAG_OM_DIRS));
    for k in 1..=n_random {
        let entries: Vec<f64> = scales
            .iter()
            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let h = CoeffVec::new(entries).map_err(task_err)?;
        let dir = match &u {
            Point::Coeff(_) => Dir::Coeff(h),
            Point::Hier(_) => {
                let sd = hyper_scale.expect("hierarchical prior has a hyper scale");
                Dir::hier(h, sd * rng.sample::<f64, _>(StandardNormal)).map_err(task_err)?
            }
        };
        labeled.push((format!("rand-{k}"), dir));
    }
    let mut table = Table::new(
        "om-check",
        &["direction_id", "ratio_quadrature", "ratio_exact", "rel_err"],
    );
    for (id, dir) in &labeled {
        let quad = fomin::om_ratio_quadrature(post, &u, dir, nodes).map_err(task_err)?;
        let exact = fomin::om_ratio_exact(post, &u, dir).map_err(task_err)?;
        let rel = (quad - exact).abs() / exact.abs().max(f64::MIN_POSITIVE);
        table.push(vec![
            Cell::Text(id.clone()),
            Cell::Num(quad),
            Cell::Num(exact),
            Cell::Num(rel),
        ]);
    }
    Ok((vec![table], Vec::new()))
}

fn run_bregman_compare(
    config: &ExperimentConfig,
    post: &PosteriorModel,
    n_samples: usize,
    max_iter: Option<usize>,
    grad_tol: Option<f64>,
) -> std::result::Result<(Vec<Table>, Vec<String>), RunError> {
    let opts = solve_options(max_iter, grad_tol);
    let map = converged_solve(post, &opts)?;
    let (batch, mut warnings) = posterior_batch(
        post,
        config.seed,
        n_samples,
        SamplerChoice::Auto,
        None,
        None,
    )
    .map_err(task_err)?;
    let cm = cm_estimate(&batch).map_err(task_err)?;
    let report =
        crate::bregman::compare_map_cm(post, &map.argmin, &cm.mean, &batch).map_err(task_err)?;
    let mut costs = Table::new("costs", &["estimator", "cost", "stderr"]);
    costs.push(vec![
        Cell::Text("map".into()),
        Cell::Num(report.cost_at_map.0),
        Cell::Num(report.cost_at_map.1),
    ]);
    costs.push(vec![
        Cell::Text("cm".into()),
        Cell::Num(report.cost_at_cm.0),
        Cell::Num(report.cost_at_cm.1),
    ]);
    let mut summary = Table::new(
        "summary",
        &["verdict", "diff", "diff_stderr", "n_samples", "sampler"],
    );
    summary.push(vec![
        Cell::Text(report.verdict.to_string()),
        Cell::Num(report.paired_diff.0),
        Cell::Num(report.paired_diff.1),
        Cell::Int(report.n_samples as i64),
        Cell::Text(sampler_label(report.source).into()),
    ]);
    // compare_map_cm copies the batch warnings; the fallback notice (if any)
    // is already in ours, so only keep what is new.
    for w in &report.warnings {
        if !warnings.contains(w) {
            warnings.push(w.clone());
        }
    }
    Ok((vec![costs, summary], warnings))
}

fn run_refine(
    config: &ExperimentConfig,
    levels: &[usize],
    norm_choice: NormChoice,
    max_iter: Option<usize>,
    grad_tol: Option<f64>,
) -> std::result::Result<(Vec<Table>, Vec<String>), RunError> {
    let mut opts = SolveOptions::default();
    opts.max_iter = max_iter.unwrap_or(200_000);
    opts.grad_tol = grad_tol.unwrap_or(1e-12);
    let norm = match norm_choice {
        NormChoice::Euclid => RefinementNorm::Euclid,
        NormChoice::Besov => {
            let (s, p, d) = match &config.prior {
                Some(PriorSpec::Besov { s, p, d }) => (*s, *p, *d),
                // Validation guarantees this arm is the smoothing builtin
                // with its default prior.
                _ => SMOOTHING_DEFAULT_PRIOR,
            };
            RefinementNorm::Besov { s, p, d }
        }
    };
    let study = match &config.problem {
        ProblemSpec::Builtin(spec) => {
            let seed = config.seed;
            let m_rows = spec.m_rows;
            let alpha = spec.alpha;
            let prior = config.prior.clone();
            let make = move |n: usize| -> Result<PosteriorModel> {
                builtin_problem_with("smoothing", n, seed, m_rows, alpha, prior.as_ref())
            };
            refinement_study(&make, levels, &opts, &norm).map_err(task_err)?
        }
        ProblemSpec::Files(files) => {
            let rows = load_matrix(&files.matrix_file)?;
            let data = load_vector(&files.data_file)?;
            if rows[0].len() != config.trunc {
                return Err(RunError::validation(format!(
                    "matrix {} has {} columns but trunc is {}",
                    files.matrix_file.display(),
                    rows[0].len(),
                    config.trunc
                )));
            }
            let prior = config.prior.clone().expect("validated: file problems carry a prior");
            let make = move |n: usize| -> Result<PosteriorModel> {
                let sub: Vec<Vec<f64>> = rows.iter().map(|r| r[..n].to_vec()).collect();
                PosteriorModel::new(prior.build(n)?, ForwardOperator::from_rows(&sub)?, data.clone())
            };
            refinement_study(&make, levels, &opts, &norm).map_err(task_err)?
        }
    };
    Ok((vec![refine_table(&study)], Vec::new()))
}

fn refine_table(study: &[RefinementLevel]) -> Table {
    let mut table = Table::new(
        "refine",
        &["n", "diff_norm", "objective", "residual", "iterations"],
    );
    for level in study {
        let diff = match level.diff_from_prev {
            Some(d) => Cell::Num(d),
            None => Cell::Empty,
        };
        table.push(vec![
            Cell::Int(level.trunc as i64),
            diff,
            Cell::Num(level.result.objective),
            Cell::Num(level.result.residual),
            Cell::Int(level.result.iterations as i64),
        ]);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cli::report::Format;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn write_config(dir: &Path, text: &str) -> PathBuf {
        let path = dir.join("config.json");
        let mut file = fs::File::create(&path).unwrap();
        file.write_all(text.as_bytes()).unwrap();
        path
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(RunError::parse("x").exit_code(), 2);
        assert_eq!(RunError::validation("x").exit_code(), 3);
        assert_eq!(RunError::task("x").exit_code(), 4);
        assert_eq!(RunError::parse("bad").to_string(), "parse: bad");
    }

    #[test]
    fn missing_and_malformed_configs_are_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let missing = run(&dir.path().join("nope.json"), dir.path(), &[Format::Json]);
        assert_eq!(missing.unwrap_err().kind, RunErrorKind::Parse);
        let path = write_config(dir.path(), "{not json");
        let malformed = run(&path, dir.path(), &[Format::Json]);
        assert_eq!(malformed.unwrap_err().kind, RunErrorKind::Parse);
    }

    #[test]
    fn schema_and_semantic_problems_are_validation_errors() {
        let dir = tempfile::tempdir().unwrap();
        let unknown_field = write_config(
            dir.path(),
            r#"{"problem": {"builtin": {"name": "gauss-1d"}}, "trunc": 1, "seed": 1,
                "task": {"solve-map": {"iterations": 5}}}"#,
        );
        let err = run(&unknown_field, dir.path(), &[Format::Json]).unwrap_err();
        assert_eq!(err.kind, RunErrorKind::Validation);
        let bad_trunc = write_config(
            dir.path(),
            r#"{"problem": {"builtin": {"name": "smoothing"}}, "trunc": 4, "seed": 1,
                "task": {"solve-map": {}}}"#,
        );
        let err = run(&bad_trunc, dir.path(), &[Format::Json]).unwrap_err();
        assert_eq!(err.kind, RunErrorKind::Validation);
    }

    #[test]
    fn starved_solver_is_a_task_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"problem": {"builtin": {"name": "smoothing"}}, "trunc": 8, "seed": 1,
                "task": {"solve-map": {"max-iter": 1, "grad-tol": 1e-14}}}"#,
        );
        let err = run(&path, dir.path(), &[Format::Json]).unwrap_err();
        assert_eq!(err.kind, RunErrorKind::Task);
        assert!(err.message.contains("residual"));
    }

    #[test]
    fn gauss_solve_map_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"problem": {"builtin": {"name": "gauss-1d"}}, "trunc": 1, "seed": 7,
                "task": {"solve-map": {}}}"#,
        );
        let out = dir.path().join("out");
        let outcome = run(&path, &out, &[Format::Csv, Format::Json]).unwrap();
        assert_eq!(outcome.written.len(), 3); // solution, summary, report.json
        let solution = fs::read_to_string(out.join("solution.csv")).unwrap();
        let mut lines = solution.lines();
        assert_eq!(lines.next(), Some("coordinate,value"));
        let row = lines.next().unwrap();
        let value: f64 = row.strip_prefix("u1,").unwrap().parse().unwrap();
        assert_relative_eq!(value, 1.0, epsilon = 1e-12);
        let summary = fs::read_to_string(out.join("summary.csv")).unwrap();
        assert!(summary.starts_with("objective,residual,iterations,converged"));
        let objective: f64 = summary.lines().nth(1).unwrap().split(',').next().unwrap().parse().unwrap();
        assert_relative_eq!(objective, 1.0, epsilon = 1e-12);
        assert!(summary.contains(",0,true"));
    }

    #[test]
    fn repeated_runs_are_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_config(
            dir.path(),
            r#"{"problem": {"builtin": {"name": "smoothing"}}, "trunc": 8, "seed": 5,
                "task": {"estimate-cm": {"count": 200, "sampler": "is"}}}"#,
        );
        let out1 = dir.path().join("a");
        let out2 = dir.path().join("b");
        run(&path, &out1, &[Format::Csv]).unwrap();
        run(&path, &out2, &[Format::Csv]).unwrap();
        for name in ["cm.csv", "summary.csv"] {
            let a = fs::read(out1.join(name)).unwrap();
            let b = fs::read(out2.join(name)).unwrap();
            assert_eq!(a, b, "{name} differs between identical runs");
        }
    }

    #[test]
    fn smoothing_operators_nest_across_truncations() {
        let coarse = smoothing_problem(8, 3, 16, 1.5, default_smoothing_prior(8).unwrap()).unwrap();
        let fine = smoothing_problem(16, 3, 16, 1.5, default_smoothing_prior(16).unwrap()).unwrap();
        assert_eq!(coarse.data(), fine.data());
        let am = coarse.op().matrix();
        let bm = fine.op().matrix();
        for k in 0..16 {
            for l in 0..8 {
                assert_eq!(am[(k, l)], bm[(k, l)], "column {l} changed with truncation");
            }
        }
        // A different seed moves the operator.
        let other = smoothing_problem(8, 4, 16, 1.5, default_smoothing_prior(8).unwrap()).unwrap();
        assert_ne!(am[(0, 0)], other.op().matrix()[(0, 0)]);
    }

    #[test]
    fn sample_prior_moments_match_family() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"builtin": {"name": "smoothing"}}, "trunc": 8, "seed": 9,
                "task": {"sample-prior": {"count": 4000}}}"#,
        )
        .unwrap();
        config.validate().unwrap();
        let (tables, _) = execute(&config).unwrap();
        assert_eq!(tables[0].name, "moments");
        assert_eq!(tables[0].rows.len(), 8);
        // First coordinate of the default Besov prior: mean 0, spread order 1.
        match (&tables[0].rows[0][1], &tables[0].rows[0][2]) {
            (Cell::Num(mean), Cell::Num(var)) => {
                assert!(mean.abs() < 0.1, "mean {mean}");
                assert!(*var > 0.1 && *var < 2.0, "variance {var}");
            }
            other => panic!("unexpected cells {other:?}"),
        }
    }

    #[test]
    fn verify_om_reports_tiny_errors() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"builtin": {"name": "smoothing"}}, "trunc": 8, "seed": 2,
                "task": {"verify-om": {"nodes": 64, "n-random": 3}}}"#,
        )
        .unwrap();
        config.validate().unwrap();
        let (tables, _) = execute(&config).unwrap();
        let table = &tables[0];
        assert_eq!(table.name, "om-check");
        assert_eq!(table.rows.len(), 8 + 3);
        for row in &table.rows {
            match &row[3] {
                Cell::Num(rel) => assert!(*rel <= 1e-6, "relative error {rel}"),
                other => panic!("unexpected cell {other:?}"),
            }
        }
    }

    #[test]
    fn verify_wmap_passes_on_hier_builtin() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"builtin": {"name": "hier-1d"}}, "trunc": 1, "seed": 2,
                "task": {"verify-wmap": {"n-directions": 10, "tol": 1e-6}}}"#,
        )
        .unwrap();
        config.validate().unwrap();
        let (tables, _) = execute(&config).unwrap();
        let summary = &tables[1];
        let passed = summary.rows[0].last().unwrap();
        assert_eq!(*passed, Cell::Bool(true));
        // Scan covers signed unit, signed hyper, and random directions.
        assert_eq!(tables[0].rows.len(), 4 + 10);
    }

    #[test]
    fn bregman_compare_on_gauss_builtin() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"builtin": {"name": "gauss-1d"}}, "trunc": 1, "seed": 3,
                "task": {"bregman-compare": {"n-samples": 4000}}}"#,
        )
        .unwrap();
        config.validate().unwrap();
        let (tables, _) = execute(&config).unwrap();
        let summary = &tables[1];
        assert_eq!(summary.rows[0][0], Cell::Text("map-leq-cm".into()));
        assert_eq!(summary.rows[0][4], Cell::Text("is".into()));
    }

    #[test]
    fn refine_study_runs_on_files() {
        let dir = tempfile::tempdir().unwrap();
        let matrix = dir.path().join("a.csv");
        fs::write(&matrix, "1.0,0.5,0.25,0.125\n0.0,1.0,0.5,0.25\n").unwrap();
        let data = dir.path().join("m.csv");
        fs::write(&data, "1.0\n0.5\n").unwrap();
        let text = format!(
            r#"{{"problem": {{"files": {{"matrix-file": {:?}, "data-file": {:?}}}}},
                "prior": "white-noise", "trunc": 4, "seed": 3,
                "task": {{"refine-study": {{"levels": [2, 3, 4]}}}}}}"#,
            matrix.to_str().unwrap(),
            data.to_str().unwrap()
        );
        let config: ExperimentConfig = serde_json::from_str(&text).unwrap();
        config.validate().unwrap();
        let (tables, _) = execute(&config).unwrap();
        let table = &tables[0];
        assert_eq!(table.rows.len(), 3);
        assert_eq!(table.rows[0][1], Cell::Empty);
        assert!(matches!(table.rows[1][1], Cell::Num(d) if d > 0.0));
    }

    #[test]
    fn numeric_csv_loader_rejects_text() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.csv");
        fs::write(&path, "1.0,2.0\n1.0,oops\n").unwrap();
        let err = load_matrix(&path).unwrap_err();
        assert_eq!(err.kind, RunErrorKind::Validation);
        assert!(err.message.contains("oops"));
    }

    #[test]
    fn estimate_cm_matches_conjugate_mean_on_gauss() {
        let config: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"builtin": {"name": "gauss-1d"}}, "trunc": 1, "seed": 11,
                "task": {"estimate-cm": {"count": 40000}}}"#,
        )
        .unwrap();
        config.validate().unwrap();
        let (tables, warnings) = execute(&config).unwrap();
        assert!(warnings.is_empty(), "unexpected warnings: {warnings:?}");
        match (&tables[0].rows[0][1], &tables[0].rows[0][2]) {
            (Cell::Num(mean), Cell::Num(se)) => {
                assert_relative_eq!(*mean, 1.0, epsilon = 4.0 * se.max(1e-3));
            }
            other => panic!("unexpected cells {other:?}"),
        }
    }
}
