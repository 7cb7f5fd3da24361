//! Weak-mode solvers: minimize `F(u) = ½|Au − m|² + J(u)`.
//!
//! The Gaussian and hierarchical families have closed-form minimizers (normal
//! equations, solved directly). The Besov family is minimized iteratively by
//! a proximal-gradient descent with backtracking: a forward step on the
//! smooth misfit followed by an exact per-coordinate proximal step on the
//! separable `Σ w_l |u_l|^p` term. For `p < 2` the regularizer's curvature
//! blows up like `|u|^{p−2}` near zero coefficients, which stalls plain
//! gradient steps; the proximal step handles those coordinates exactly, and
//! the backtracking condition only ever relaxes the step on the smooth part.
//!
//! Every solve reports the sup-norm first-order residual of the posterior
//! field at its final iterate, and `converged` is true exactly when that
//! residual meets `grad_tol`.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::fomin;
use crate::posterior::PosteriorModel;
use crate::priors::{Dir, HierState, Point, PriorModel};
use crate::sample::derive_seed;
use crate::seqspace::{besov_norm_p, BesovWeights, CoeffVec};

const TAG_VERIFY_DIRS: u64 = 4;

/// Options for [`solve_wmap`].
#[derive(Debug, Clone)]
pub struct SolveOptions {
    pub max_iter: usize,
    /// Stop when the sup-norm first-order residual falls below this.
    pub grad_tol: f64,
    /// Backtracking shrink factor, in `(0, 1)`.
    pub shrink: f64,
    /// Sufficient-decrease constant, in `(0, 0.5]`.
    pub sufficient_decrease: f64,
    /// Initial iterate; defaults to the prior mode (all zeros).
    pub init: Option<Point>,
    /// Use the iterative path even for families with a direct solve.
    pub force_iterative: bool,
    /// Record the objective after every accepted step.
    pub track_objectives: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            max_iter: 50_000,
            grad_tol: 1e-8,
            shrink: 0.5,
            sufficient_decrease: 1e-4,
            init: None,
            force_iterative: false,
            track_objectives: false,
        }
    }
}

impl SolveOptions {
    fn validate(&self) -> Result<()> {
        if self.max_iter == 0 {
            return Err(Error::InvalidParam("max_iter must be >= 1".into()));
        }
        if !(self.grad_tol.is_finite() && self.grad_tol > 0.0) {
            return Err(Error::InvalidParam(format!(
                "grad_tol must be finite and > 0, got {}",
                self.grad_tol
            )));
        }
        if !(self.shrink > 0.0 && self.shrink < 1.0) {
            return Err(Error::InvalidParam(format!(
                "shrink factor must lie in (0, 1), got {}",
                self.shrink
            )));
        }
        if !(self.sufficient_decrease > 0.0 && self.sufficient_decrease <= 0.5) {
            return Err(Error::InvalidParam(format!(
                "sufficient-decrease constant must lie in (0, 0.5], got {}",
                self.sufficient_decrease
            )));
        }
        Ok(())
    }
}

/// Outcome of a solve. `converged` holds exactly when
/// `residual <= grad_tol`, with `residual` the sup-norm first-order residual
/// of the posterior field at `argmin`.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub argmin: Point,
    pub objective: f64,
    pub residual: f64,
    /// Accepted iteration count; 0 for direct solves.
    pub iterations: usize,
    pub converged: bool,
    /// Objective values after each accepted step (when tracking was on).
    pub objective_trace: Option<Vec<f64>>,
}

// ---------------------------------------------------------------------------
// Internal descent machinery.

/// A problem shape the backtracking driver can descend on: smooth part value
/// and gradient, a (possibly proximal) update, and the first-order residual.
trait DescentProblem {
    fn value(&self, x: &DVector<f64>) -> f64;
    fn smooth_grad(&self, x: &DVector<f64>) -> DVector<f64>;
    fn step_to(&self, x: &DVector<f64>, g: &DVector<f64>, step: f64) -> DVector<f64>;
    fn residual(&self, x: &DVector<f64>, g: &DVector<f64>) -> f64;
    fn lipschitz(&self) -> f64;
}

/// Quadratic misfit plus a separable power regularizer `Σ c_l |x_l|^p`
/// (Besov: `c = w`; Gaussian when forced iterative: `c = q/2`, `p = 2`).
struct SeparableProx {
    a: DMatrix<f64>,
    m: DVector<f64>,
    c: Vec<f64>,
    p: f64,
    lips: f64,
}

impl SeparableProx {
    fn j_deriv(&self, x: f64, c: f64) -> f64 {
        if x == 0.0 {
            0.0
        } else {
            c * self.p * x.signum() * x.abs().powf(self.p - 1.0)
        }
    }

    /// Solves `min_v (v−z)²/(2t) + c|v|^p` exactly per coordinate.
    fn prox_coord(&self, z: f64, c: f64, t: f64) -> f64 {
        if z == 0.0 || c == 0.0 {
            return if c == 0.0 { z } else { 0.0 };
        }
        if self.p == 2.0 {
            return z / (1.0 + 2.0 * t * c);
        }
        // Root of f(v) = v + tcp·v^{p−1} − |z| on (0, |z|]; f is increasing
        // and concave for p < 2, so Newton from the right stays bracketed.
        let az = z.abs();
        let tcp = t * c * self.p;
        let pm1 = self.p - 1.0;
        let (mut lo, mut hi) = (0.0_f64, az);
        let mut v = az;
        for _ in 0..100 {
            let fv = v + tcp * v.powf(pm1) - az;
            if fv >= 0.0 {
                hi = v;
            } else {
                lo = v;
            }
            if hi - lo <= 1e-16 * hi {
                break;
            }
            let dfv = 1.0 + tcp * pm1 * v.powf(pm1 - 1.0);
            let newton = v - fv / dfv;
            v = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        z.signum() * 0.5 * (lo + hi)
    }
}

impl DescentProblem for SeparableProx {
    fn value(&self, x: &DVector<f64>) -> f64 {
        let r = &self.a * x - &self.m;
        let reg: f64 = x
            .iter()
            .zip(&self.c)
            .map(|(xi, ci)| ci * xi.abs().powf(self.p))
            .sum();
        0.5 * r.norm_squared() + reg
    }

    fn smooth_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.a.transpose() * (&self.a * x - &self.m)
    }

    fn step_to(&self, x: &DVector<f64>, g: &DVector<f64>, step: f64) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter()
                .zip(g.iter())
                .zip(&self.c)
                .map(|((xi, gi), ci)| self.prox_coord(xi - step * gi, *ci, step)),
        )
    }

    fn residual(&self, x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        x.iter()
            .zip(g.iter())
            .zip(&self.c)
            .map(|((xi, gi), ci)| (gi + self.j_deriv(*xi, *ci)).abs())
            .fold(0.0, f64::max)
    }

    fn lipschitz(&self) -> f64 {
        self.lips
    }
}

/// The hierarchical objective is jointly quadratic in `(u, t)`:
/// `F(x) = ½ xᵀHx − rhsᵀx + ½|m|²` with the bordered normal matrix `H`.
struct QuadraticSmooth {
    h: DMatrix<f64>,
    rhs: DVector<f64>,
    constant: f64,
    lips: f64,
}

impl DescentProblem for QuadraticSmooth {
    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * (&self.h * x).dot(x) - self.rhs.dot(x) + self.constant
    }

    fn smooth_grad(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x - &self.rhs
    }

    fn step_to(&self, x: &DVector<f64>, g: &DVector<f64>, step: f64) -> DVector<f64> {
        x - g * step
    }

    fn residual(&self, _x: &DVector<f64>, g: &DVector<f64>) -> f64 {
        g.amax()
    }

    fn lipschitz(&self) -> f64 {
        self.lips
    }
}

struct DescentOutcome {
    x: DVector<f64>,
    iterations: usize,
    trace: Option<Vec<f64>>,
}

fn run_descent(
    prob: &dyn DescentProblem,
    x0: DVector<f64>,
    opts: &SolveOptions,
) -> DescentOutcome {
    let l = prob.lipschitz();
    // Base step just under 1/L keeps the sufficient-decrease test satisfied
    // without backtracking whenever the local curvature matches L.
    let base = if l > 0.0 { 0.99 / l } else { 1.0 };
    let mut step = base;
    let mut x = x0;
    let mut fx = prob.value(&x);
    let mut trace = opts.track_objectives.then(|| vec![fx]);
    let mut iterations = 0;
    // Stop slightly inside grad_tol so the authoritative residual recomputed
    // from the posterior field cannot tip back over the threshold.
    let inner_tol = 0.9 * opts.grad_tol;
    while iterations < opts.max_iter {
        let g = prob.smooth_grad(&x);
        if prob.residual(&x, &g) <= inner_tol {
            break;
        }
        step = (step * 2.0).min(base);
        let mut stalled = false;
        // Near the minimizer the true decrease drops below one ulp of the
        // objective; without this allowance the line search would shrink
        // forever on rounding noise instead of polishing to the fixed point.
        let slack = f64::EPSILON * fx.abs().max(1.0);
        loop {
            let cand = prob.step_to(&x, &g, step);
            let fc = prob.value(&cand);
            let dd: f64 = cand
                .iter()
                .zip(x.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dd == 0.0 {
                stalled = true;
                break;
            }
            if fc <= fx - opts.sufficient_decrease * dd / step + slack {
                x = cand;
                fx = fc;
                break;
            }
            step *= opts.shrink;
            if step < 1e-18 * base {
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
        iterations += 1;
        if let Some(t) = &mut trace {
            t.push(fx);
        }
    }
    DescentOutcome {
        x,
        iterations,
        trace,
    }
}

// ---------------------------------------------------------------------------
// Assembly helpers.

fn point_to_flat(p: &Point) -> DVector<f64> {
    DVector::from_vec(p.flat())
}

fn flat_to_point(x: &DVector<f64>, hier: bool) -> Result<Point> {
    let s = x.as_slice();
    if hier {
        let n = s.len() - 1;
        Ok(Point::Hier(HierState::new(
            CoeffVec::new(s[..n].to_vec())?,
            s[n],
        )?))
    } else {
        Ok(Point::Coeff(CoeffVec::new(s.to_vec())?))
    }
}

fn largest_singular_value(a: &DMatrix<f64>) -> f64 {
    a.singular_values().iter().fold(0.0_f64, |m, s| m.max(*s))
}

/// Bordered normal system of the hierarchical objective:
/// rows `1..N`: `(AᵀA + Q)u − tQe = Aᵀm`; row `N+1`: `−(Qe)ᵀu + (eᵀQe + 1/ρ)t = 0`.
fn hier_system(
    a: &DMatrix<f64>,
    data: &DVector<f64>,
    q: &[f64],
    e: &[f64],
    rho: f64,
) -> (DMatrix<f64>, DVector<f64>) {
    let n = a.ncols();
    let mut h = DMatrix::zeros(n + 1, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(&(a.transpose() * a));
    for i in 0..n {
        h[(i, i)] += q[i];
        h[(i, n)] = -q[i] * e[i];
        h[(n, i)] = -q[i] * e[i];
    }
    h[(n, n)] = q.iter().zip(e).map(|(qi, ei)| qi * ei * ei).sum::<f64>() + 1.0 / rho;
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&(a.transpose() * data));
    (h, rhs)
}

fn spd_solve(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    Cholesky::new(h.clone())
        .map(|chol| chol.solve(rhs))
        .ok_or_else(|| Error::InvalidParam("normal equations are not positive definite".into()))
}

/// Minimizes `F(u) = ½|Au − m|² + J(u)` over the truncated space.
///
/// Gaussian-diagonal and hierarchical priors use their normal equations
/// (`iterations = 0`) unless `force_iterative` is set; Besov priors always
/// use the proximal-gradient descent. Non-convergence within `max_iter` is
/// reported via `converged = false` with the best iterate, never silently.
pub fn solve_wmap(post: &PosteriorModel, opts: &SolveOptions) -> Result<SolveResult> {
    opts.validate()?;
    let a = post.op().matrix();
    let data = DVector::from_column_slice(post.data());
    let hier = matches!(post.prior(), PriorModel::Hierarchical { .. });
    if let Some(init) = &opts.init {
        post.prior().check_point(init)?;
    }

    let (x, iterations, trace): (DVector<f64>, usize, Option<Vec<f64>>) = match post.prior() {
        PriorModel::GaussianDiag { cm_weights } if !opts.force_iterative => {
            let mut normal = a.transpose() * a;
            for (i, q) in cm_weights.iter().enumerate() {
                normal[(i, i)] += q;
            }
            (spd_solve(&normal, &(a.transpose() * &data))?, 0, None)
        }
        PriorModel::Hierarchical {
            cov_weights,
            mean_dir,
            rho_variance,
        } if !opts.force_iterative => {
            let (h, rhs) = hier_system(a, &data, cov_weights, mean_dir.entries(), *rho_variance);
            (spd_solve(&h, &rhs)?, 0, None)
        }
        prior => {
            let x0 = match &opts.init {
                Some(p) => point_to_flat(p),
                None => DVector::zeros(if hier { a.ncols() + 1 } else { a.ncols() }),
            };
            let prob: Box<dyn DescentProblem> = match prior {
                PriorModel::GaussianDiag { cm_weights } => Box::new(SeparableProx {
                    a: a.clone(),
                    m: data.clone(),
                    c: cm_weights.iter().map(|q| 0.5 * q).collect(),
                    p: 2.0,
                    lips: largest_singular_value(a).powi(2),
                }),
                PriorModel::Besov(wts) => Box::new(SeparableProx {
                    a: a.clone(),
                    m: data.clone(),
                    c: wts.norm_weights().to_vec(),
                    p: wts.p(),
                    lips: largest_singular_value(a).powi(2),
                }),
                PriorModel::Hierarchical {
                    cov_weights,
                    mean_dir,
                    rho_variance,
                } => {
                    let (h, rhs) =
                        hier_system(a, &data, cov_weights, mean_dir.entries(), *rho_variance);
                    let lips = largest_singular_value(&h);
                    Box::new(QuadraticSmooth {
                        h,
                        rhs,
                        constant: 0.5 * data.norm_squared(),
                        lips,
                    })
                }
            };
            let out = run_descent(prob.as_ref(), x0, opts);
            (out.x, out.iterations, out.trace)
        }
    };

    let argmin = flat_to_point(&x, hier)?;
    let residual = fomin::optimality_residual(post, &argmin)?;
    Ok(SolveResult {
        objective: post.objective(&argmin)?,
        converged: residual <= opts.grad_tol,
        argmin,
        residual,
        iterations,
        objective_trace: trace,
    })
}

// ---------------------------------------------------------------------------
// Verification.

/// One entry of the translation-density scan.
#[derive(Debug, Clone)]
pub struct ScanEntry {
    pub id: String,
    pub ratio: f64,
}

/// Certificate for a weak-mode candidate: the first-order residual, the
/// density-ratio scan, and objective comparisons against perturbed points.
#[derive(Debug, Clone)]
pub struct VerificationReport {
    pub residual: f64,
    pub residual_ok: bool,
    pub scans: Vec<ScanEntry>,
    pub max_ratio: f64,
    pub ratios_ok: bool,
    pub objective_ok: bool,
    pub tol: f64,
    pub passed: bool,
}

/// Checks a converged solve three ways: (a) sup-norm residual `<= tol`,
/// (b) `r_h(û) <= 1 + tol` over `±e_i` (and `±tau`) plus `n_directions`
/// random prior-scale directions, (c) `F(û) <= F(û + 0.1·h) + tol` for every
/// scanned direction. The scan is a certificate over the listed directions,
/// not a proof over the whole space.
pub fn verify_solution(
    post: &PosteriorModel,
    result: &SolveResult,
    n_directions: usize,
    seed: u64,
    tol: f64,
) -> Result<VerificationReport> {
    if !result.converged {
        return Err(Error::InvalidParam(
            "verification requires a converged solve".into(),
        ));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParam(format!(
            "tolerance must be finite and > 0, got {tol}"
        )));
    }
    let u = &result.argmin;
    let residual = fomin::optimality_residual(post, u)?;
    let residual_ok = residual <= tol;

    let mut labeled: Vec<(String, Dir)> = Vec::new();
    for (id, dir) in fomin::unit_directions(u) {
        labeled.push((format!("+{id}"), dir.clone()));
        labeled.push((format!("-{id}"), dir.scaled(-1.0)?));
    }
    let (scales, hyper_scale) = post.prior().sampling_scales();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, TAG_VERIFY_DIRS));
    for k in 1..=n_directions {
        let entries: Vec<f64> = scales
            .iter()
            .map(|s| s * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let h = CoeffVec::new(entries)?;
        let dir = match u {
            Point::Coeff(_) => Dir::Coeff(h),
            Point::Hier(_) => {
                let sd = hyper_scale.expect("hierarchical prior has a hyper scale");
                Dir::hier(h, sd * rng.sample::<f64, _>(StandardNormal))?
            }
        };
        labeled.push((format!("rand-{k}"), dir));
    }

    let dirs: Vec<Dir> = labeled.iter().map(|(_, d)| d.clone()).collect();
    let ratios = fomin::wmap_inequality_scan(post, u, &dirs)?;
    let scans: Vec<ScanEntry> = labeled
        .iter()
        .zip(&ratios)
        .map(|((id, _), r)| ScanEntry {
            id: id.clone(),
            ratio: *r,
        })
        .collect();
    let max_ratio = ratios.iter().fold(f64::NEG_INFINITY, |m, r| m.max(*r));
    let ratios_ok = max_ratio <= 1.0 + tol;

    let f0 = post.objective(u)?;
    let mut objective_ok = true;
    for (_, dir) in &labeled {
        let perturbed = u.translate(dir, 0.1)?;
        if f0 > post.objective(&perturbed)? + tol {
            objective_ok = false;
            break;
        }
    }

    Ok(VerificationReport {
        residual,
        residual_ok,
        scans,
        max_ratio,
        ratios_ok,
        objective_ok,
        tol,
        passed: residual_ok && ratios_ok && objective_ok,
    })
}

// ---------------------------------------------------------------------------
// Refinement.

/// Norm used for successive solution differences in a refinement study.
#[derive(Debug, Clone, PartialEq)]
pub enum RefinementNorm {
    /// Plain Euclidean norm on coefficients.
    Euclid,
    /// Weighted Besov norm with the given smoothness parameters.
    Besov { s: f64, p: f64, d: u32 },
}

/// One level of a refinement study.
#[derive(Debug, Clone)]
pub struct RefinementLevel {
    pub trunc: usize,
    pub result: SolveResult,
    /// Norm of `û_N − lift(û_prev)`; `None` at the first level.
    pub diff_from_prev: Option<f64>,
}

/// Solves a nested family of problems at increasing truncations and reports
/// successive differences of zero-extended solutions. Every level must
/// converge; hierarchical families are not supported (their state does not
/// embed by zero-extension).
pub fn refinement_study(
    make_problem: &dyn Fn(usize) -> Result<PosteriorModel>,
    levels: &[usize],
    opts: &SolveOptions,
    norm: &RefinementNorm,
) -> Result<Vec<RefinementLevel>> {
    if levels.is_empty() {
        return Err(Error::InvalidParam("refinement needs at least one level".into()));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParam(
            "refinement levels must be strictly increasing".into(),
        ));
    }
    if opts.init.is_some() {
        return Err(Error::InvalidParam(
            "refinement levels have different truncations; leave the initial point unset".into(),
        ));
    }
    if let RefinementNorm::Besov { s, p, d } = norm {
        // Validate the parameters once, independent of truncation.
        BesovWeights::new(*s, *p, *d, 1)?;
    }
    let mut out: Vec<RefinementLevel> = Vec::with_capacity(levels.len());
    let mut prev: Option<CoeffVec> = None;
    for &n in levels {
        let post = make_problem(n)?;
        if post.prior().trunc() != n {
            return Err(Error::TruncMismatch {
                expected: n,
                found: post.prior().trunc(),
            });
        }
        let result = solve_wmap(&post, opts)?;
        if !result.converged {
            return Err(Error::NotConverged {
                iterations: result.iterations,
                residual: result.residual,
            });
        }
        let current = match &result.argmin {
            Point::Coeff(u) => u.clone(),
            Point::Hier(_) => {
                return Err(Error::StateMismatch(
                    "refinement study supports coefficient-space families only".into(),
                ))
            }
        };
        let diff_from_prev = match &prev {
            None => None,
            Some(coarse) => {
                let diff = current.sub(&coarse.zero_extend(n)?)?;
                let value = match norm {
                    RefinementNorm::Euclid => diff.euclid_norm(),
                    RefinementNorm::Besov { s, p, d } => {
                        besov_norm_p(&diff, &BesovWeights::new(*s, *p, *d, n)?)?
                    }
                };
                Some(value)
            }
        };
        prev = Some(current);
        out.push(RefinementLevel {
            trunc: n,
            result,
            diff_from_prev,
        });
    }
    Ok(out)
}
