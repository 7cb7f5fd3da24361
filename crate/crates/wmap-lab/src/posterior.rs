//! The Bayesian update: linear forward operator with unit-variance Gaussian
//! noise, the resulting posterior as a [`LogDensityField`], Monte Carlo
//! samplers, conditional-mean estimates and small-ball probabilities.
//!
//! The posterior has unnormalized log-density
//! `−½|Au − m|² + log prior density(u)`, and its logarithmic derivative is
//! the sum of the data-misfit term `−⟨Au−m, Ah⟩` and the prior's `β_h(u)`.
//! Non-unit noise covariance is out of scope; pre-whiten `A` and `m` before
//! ingestion.

use nalgebra::{DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fomin::LogDensityField;
use crate::priors::{HierState, Point, PriorModel};
use crate::sample::{derive_seed, BatchSource, SampleBatch, CHUNK_SIZE};
use crate::seqspace::CoeffVec;

// Purpose tags separating the RNG streams of one user-facing seed.
const TAG_IS_DRAWS: u64 = 1;
const TAG_RWM_CHAIN: u64 = 2;
const TAG_RWM_INIT: u64 = 3;

/// Dense linear forward map from coefficient space to data space.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardOperator {
    matrix: DMatrix<f64>,
}

impl ForwardOperator {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() == 0 || matrix.ncols() == 0 {
            return Err(Error::InvalidParam(
                "forward operator must have at least one row and column".into(),
            ));
        }
        if matrix.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("forward operator entry".into()));
        }
        Ok(Self { matrix })
    }

    /// Builds the operator from measurement rows (all of equal length).
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        if rows.is_empty() || rows[0].is_empty() {
            return Err(Error::InvalidParam(
                "forward operator must have at least one row and column".into(),
            ));
        }
        let ncols = rows[0].len();
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(Error::DimensionMismatch(
                "forward-operator rows have unequal lengths".into(),
            ));
        }
        let matrix = DMatrix::from_row_iterator(
            rows.len(),
            ncols,
            rows.iter().flat_map(|r| r.iter().copied()),
        );
        Self::new(matrix)
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParam("truncation must be >= 1".into()));
        }
        Ok(Self {
            matrix: DMatrix::identity(n, n),
        })
    }

    /// Number of measurements.
    pub fn m_rows(&self) -> usize {
        self.matrix.nrows()
    }

    /// Truncation of the coefficient space it acts on.
    pub fn trunc(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn apply(&self, u: &CoeffVec) -> Result<DVector<f64>> {
        if u.trunc() != self.trunc() {
            return Err(Error::TruncMismatch {
                expected: self.trunc(),
                found: u.trunc(),
            });
        }
        Ok(&self.matrix * DVector::from_column_slice(u.entries()))
    }

    pub fn apply_transpose(&self, r: &DVector<f64>) -> Result<DVector<f64>> {
        if r.len() != self.m_rows() {
            return Err(Error::DimensionMismatch(format!(
                "expected data vector of length {}, got {}",
                self.m_rows(),
                r.len()
            )));
        }
        Ok(self.matrix.transpose() * r)
    }
}

/// Posterior of a linear inverse problem `m = Au + e`, `e ~ N(0, I)`, under
/// one of the prior families.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorModel {
    prior: PriorModel,
    op: ForwardOperator,
    data: DVector<f64>,
}

impl PosteriorModel {
    pub fn new(prior: PriorModel, op: ForwardOperator, data: Vec<f64>) -> Result<Self> {
        if op.trunc() != prior.trunc() {
            return Err(Error::TruncMismatch {
                expected: prior.trunc(),
                found: op.trunc(),
            });
        }
        if data.len() != op.m_rows() {
            return Err(Error::DimensionMismatch(format!(
                "operator produces {} measurements but data has length {}",
                op.m_rows(),
                data.len()
            )));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("data entry".into()));
        }
        Ok(Self {
            prior,
            op,
            data: DVector::from_vec(data),
        })
    }

    pub fn prior(&self) -> &PriorModel {
        &self.prior
    }

    pub fn op(&self) -> &ForwardOperator {
        &self.op
    }

    pub fn data(&self) -> &[f64] {
        self.data.as_slice()
    }

    /// The data residual `A u − m` (hierarchical states contribute their
    /// coefficient part).
    pub fn misfit(&self, point: &Point) -> Result<DVector<f64>> {
        self.prior.check_point(point)?;
        Ok(self.op.apply(point.coeff_part())? - &self.data)
    }

    /// The variational objective `F(u) = ½|Au − m|² + J(u)`, whose minimizer
    /// is the weak mode of the posterior.
    pub fn objective(&self, point: &Point) -> Result<f64> {
        let r = self.misfit(point)?;
        Ok(0.5 * r.norm_squared() + self.prior.j_value(point)?)
    }

    /// Importance sampling with prior proposals: draws from the prior carry
    /// log-weights `−½|Av − m|²`. Deterministic given the seed; a degenerate
    /// effective sample size is flagged on the batch, not an error.
    pub fn sample_is(&self, seed: u64, count: usize) -> Result<SampleBatch> {
        let proposals = self
            .prior
            .sample(self.prior.trunc(), derive_seed(seed, TAG_IS_DRAWS), count)?
            .into_draws();
        let log_weights = proposals
            .iter()
            .map(|v| Ok(-0.5 * self.misfit(v)?.norm_squared()))
            .collect::<Result<Vec<f64>>>()?;
        SampleBatch::new(
            proposals,
            Some(log_weights),
            seed,
            BatchSource::PriorImportance,
            Some(CHUNK_SIZE),
            None,
        )
    }

    /// Random-walk Metropolis targeting the posterior. Proposals are
    /// Gaussian, scaled per-coordinate by `step_size` times the prior's
    /// sampling scale (hierarchical states also move their hyperparameter).
    /// Returns the `count` post-burn-in states, unweighted; an acceptance
    /// rate outside `[0.1, 0.6]` is flagged on the batch.
    pub fn sample_rwm(
        &self,
        seed: u64,
        count: usize,
        step_size: f64,
        burn_in: usize,
    ) -> Result<SampleBatch> {
        if !(step_size.is_finite() && step_size > 0.0) {
            return Err(Error::InvalidParam(format!(
                "step size must be finite and > 0, got {step_size}"
            )));
        }
        if count == 0 {
            return Err(Error::InvalidParam("sample count must be >= 1".into()));
        }
        let (scales, hyper_scale) = self.prior.sampling_scales();
        let mut state = self
            .prior
            .sample(self.prior.trunc(), derive_seed(seed, TAG_RWM_INIT), 1)?
            .into_draws()
            .remove(0);
        let mut state_ld = self.log_density(&state)?;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_RWM_CHAIN));
        let propose = |state: &Point, rng: &mut ChaCha8Rng| -> Point {
            let entries: Vec<f64> = state
                .coeff_part()
                .entries()
                .iter()
                .zip(&scales)
                .map(|(x, s)| x + step_size * s * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let coeffs = CoeffVec::new(entries).expect("finite proposal");
            match state {
                Point::Coeff(_) => Point::Coeff(coeffs),
                Point::Hier(h) => {
                    let sd = hyper_scale.expect("hierarchical model has a hyper scale");
                    let t = h.hyper() + step_size * sd * rng.sample::<f64, _>(StandardNormal);
                    Point::Hier(HierState::new(coeffs, t).expect("finite proposal"))
                }
            }
        };
        let mut draws = Vec::with_capacity(count);
        let mut accepted = 0usize;
        for it in 0..burn_in + count {
            let proposal = propose(&state, &mut rng);
            let ld = self.log_density(&proposal)?;
            let log_alpha = ld - state_ld;
            if log_alpha >= 0.0 || rng.random::<f64>() < log_alpha.exp() {
                state = proposal;
                state_ld = ld;
                if it >= burn_in {
                    accepted += 1;
                }
            }
            if it >= burn_in {
                draws.push(state.clone());
            }
        }
        let rate = accepted as f64 / count as f64;
        SampleBatch::new(
            draws,
            None,
            seed,
            BatchSource::RwMetropolis,
            None,
            Some(rate),
        )
    }
}

impl LogDensityField for PosteriorModel {
    fn trunc(&self) -> usize {
        self.prior.trunc()
    }

    fn log_density(&self, point: &Point) -> Result<f64> {
        let r = self.misfit(point)?;
        Ok(-0.5 * r.norm_squared() + self.prior.log_density(point)?)
    }

    fn log_deriv(&self, point: &Point, dir: &crate::priors::Dir) -> Result<f64> {
        let r = self.misfit(point)?;
        let ah = self.op.apply(dir.coeff_part())?;
        Ok(-r.dot(&ah) + self.prior.log_deriv(point, dir)?)
    }

    fn translation_kinks(
        &self,
        point: &Point,
        dir: &crate::priors::Dir,
    ) -> Result<Option<Vec<f64>>> {
        // The likelihood term is quadratic along any line; roughness comes
        // from the prior alone.
        self.prior.translation_kinks(point, dir)
    }
}

/// A conditional-mean estimate: componentwise posterior mean with matching
/// standard errors (flat layout, hyperparameter last for hierarchical
/// states).
#[derive(Debug, Clone, PartialEq)]
pub struct CmEstimate {
    pub mean: Point,
    pub stderr: Vec<f64>,
}

/// Componentwise (weighted) sample mean of a batch.
pub fn cm_estimate(batch: &SampleBatch) -> Result<CmEstimate> {
    let draws = batch.draws();
    let width = draws[0].flat().len();
    let mut means = Vec::with_capacity(width);
    let mut stderrs = Vec::with_capacity(width);
    for j in 0..width {
        let values: Vec<f64> = draws.iter().map(|d| d.flat()[j]).collect();
        let (mean, se) = batch.summarize(&values)?;
        means.push(mean);
        stderrs.push(se);
    }
    let mean = match &draws[0] {
        Point::Coeff(_) => Point::Coeff(CoeffVec::new(means)?),
        Point::Hier(_) => {
            let hyper = means.pop().expect("hierarchical flat layout ends in t");
            Point::Hier(HierState::new(CoeffVec::new(means)?, hyper)?)
        }
    };
    Ok(CmEstimate {
        mean,
        stderr: stderrs,
    })
}

/// Monte Carlo estimate of the posterior probability of a Euclidean ball.
#[derive(Debug, Clone, PartialEq)]
pub struct BallEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// Raw number of draws inside the ball; zero hits means the estimate is
    /// vacuous at this radius and should be flagged by the caller.
    pub hits: usize,
}

/// Estimates `μ(B_eps(center))` from a posterior batch using the indicator
/// of the Euclidean ball (hierarchical states include the hyperparameter
/// component in the distance). Zero hits yield `(0, 0)` rather than an
/// error.
pub fn small_ball_prob(
    post: &PosteriorModel,
    center: &Point,
    eps: f64,
    batch: &SampleBatch,
) -> Result<BallEstimate> {
    if !(eps.is_finite() && eps > 0.0) {
        return Err(Error::InvalidParam(format!(
            "ball radius must be finite and > 0, got {eps}"
        )));
    }
    post.prior().check_point(center)?;
    let mut hits = 0usize;
    let indicators: Vec<f64> = batch
        .draws()
        .iter()
        .map(|d| {
            let inside = d.euclid_dist(center)? <= eps;
            if inside {
                hits += 1;
            }
            Ok(if inside { 1.0 } else { 0.0 })
        })
        .collect::<Result<_>>()?;
    let (estimate, stderr) = batch.summarize(&indicators)?;
    Ok(BallEstimate {
        estimate,
        stderr,
        hits,
    })
}
