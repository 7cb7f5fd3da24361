//! Translation densities and first-order optimality certificates.
//!
//! For a measure with coordinate density `π`, the translation density along a
//! direction `h` is `r_h(u) = π(u − h) / π(u)`: the Radon–Nikodym derivative
//! of the `h`-shifted measure, evaluated through shrinking balls at `u`. Two
//! independent routes compute it:
//!
//! * [`om_ratio_exact`] — directly from log-densities (the oracle),
//! * [`om_ratio_quadrature`] — the Onsager–Machlup integral form
//!   `r_h(u) = exp(−∫₀¹ β_h(u − s·h) ds)` built solely from the logarithmic
//!   derivative `β`.
//!
//! Their agreement on every input is the operational check that a field's
//! `(log_density, log_deriv)` pair is mutually consistent. The module also
//! provides the sup-norm first-order residual and the density-ratio scan used
//! to certify weak-mode candidates: at a mode, `r_h(u) ≤ 1` for every `h`.

use crate::error::{Error, Result};
use crate::priors::{Dir, Point, PriorModel};
use crate::quadrature;
use crate::seqspace::{basis_direction, CoeffVec};

/// A fixed measure exposed through its log-density and logarithmic
/// derivative. Implemented by prior fields and posterior models.
pub trait LogDensityField {
    /// Truncation of the coefficient space.
    fn trunc(&self) -> usize;

    /// Log of the (possibly unnormalized) density at `point`.
    fn log_density(&self, point: &Point) -> Result<f64>;

    /// Directional derivative `β_h` of the log-density at `point` along
    /// `dir`; linear in `dir`.
    fn log_deriv(&self, point: &Point, dir: &Dir) -> Result<f64>;

    /// Interior parameters `s ∈ (0, 1)` where `s ↦ log_density(point − s·dir)`
    /// loses smoothness; `None` when the whole path is smooth.
    fn translation_kinks(&self, point: &Point, dir: &Dir) -> Result<Option<Vec<f64>>> {
        let _ = (point, dir);
        Ok(None)
    }
}

/// A [`PriorModel`] viewed as a [`LogDensityField`].
pub struct PriorField<'a>(pub &'a PriorModel);

impl LogDensityField for PriorField<'_> {
    fn trunc(&self) -> usize {
        self.0.trunc()
    }

    fn log_density(&self, point: &Point) -> Result<f64> {
        self.0.log_density(point)
    }

    fn log_deriv(&self, point: &Point, dir: &Dir) -> Result<f64> {
        self.0.log_deriv(point, dir)
    }

    fn translation_kinks(&self, point: &Point, dir: &Dir) -> Result<Option<Vec<f64>>> {
        self.0.translation_kinks(point, dir)
    }
}

fn check_field_args<F: LogDensityField + ?Sized>(field: &F, u: &Point, h: &Dir) -> Result<()> {
    if u.trunc() != field.trunc() {
        return Err(Error::TruncMismatch {
            expected: field.trunc(),
            found: u.trunc(),
        });
    }
    if h.trunc() != field.trunc() {
        return Err(Error::TruncMismatch {
            expected: field.trunc(),
            found: h.trunc(),
        });
    }
    Ok(())
}

/// Polynomial re-parameterization of `[0, 1]` whose first three derivatives
/// vanish at both ends: `q(τ) = 35τ⁴ − 84τ⁵ + 70τ⁶ − 20τ⁷`,
/// `q′(τ) = 140τ³(1−τ)³`. Mapping a panel through `q` flattens integrable
/// endpoint singularities (here `|·|^{p−1}` kinks) so that plain
/// Gauss–Legendre regains fast convergence.
fn flatten_map(tau: f64) -> (f64, f64) {
    let t3 = tau * tau * tau;
    let omt = 1.0 - tau;
    let q = (((-20.0 * tau + 70.0) * tau - 84.0) * tau + 35.0) * t3 * tau;
    let dq = 140.0 * t3 * omt * omt * omt;
    (q, dq)
}

/// Translation density `r_h(u)` via the Onsager–Machlup integral form:
/// `exp(−I)` with `I` the Gauss–Legendre quadrature of
/// `s ↦ field.log_deriv(u − s·h, h)` over `[0, 1]` at the given node count.
///
/// When the field reports kinks along the path, the interval is split there
/// and each piece is integrated under the end-flattening map, with `nodes`
/// points per piece; smooth paths use a single plain panel (so fields whose
/// `β` is linear along lines are integrated exactly already at 2 nodes).
pub fn om_ratio_quadrature<F: LogDensityField + ?Sized>(
    field: &F,
    u: &Point,
    h: &Dir,
    nodes: usize,
) -> Result<f64> {
    if nodes < 2 {
        return Err(Error::InvalidParam(format!(
            "quadrature needs at least 2 nodes, got {nodes}"
        )));
    }
    check_field_args(field, u, h)?;
    let beta_at = |s: f64| -> Result<f64> { field.log_deriv(&u.translate(h, -s)?, h) };
    let integral = match field.translation_kinks(u, h)? {
        None => quadrature::try_integrate(beta_at, 0.0, 1.0, nodes)?,
        Some(kinks) => {
            let rule = quadrature::gauss_legendre(nodes)?;
            let (xs, ws) = &*rule;
            let mut bounds = Vec::with_capacity(kinks.len() + 2);
            bounds.push(0.0);
            bounds.extend(kinks);
            bounds.push(1.0);
            let mut total = 0.0;
            for piece in bounds.windows(2) {
                let (a, b) = (piece[0], piece[1]);
                if b - a <= 0.0 {
                    continue;
                }
                let mut acc = 0.0;
                for (x, w) in xs.iter().zip(ws) {
                    let tau = 0.5 * (x + 1.0);
                    let (q, dq) = flatten_map(tau);
                    acc += 0.5 * w * dq * beta_at(a + (b - a) * q)?;
                }
                total += (b - a) * acc;
            }
            total
        }
    };
    let ratio = (-integral).exp();
    if !ratio.is_finite() {
        return Err(Error::NonFinite("translation-density quadrature".into()));
    }
    Ok(ratio)
}

/// Translation density `r_h(u) = exp(log_density(u − h) − log_density(u))`,
/// straight from the field's log-density. Oracle for
/// [`om_ratio_quadrature`].
pub fn om_ratio_exact<F: LogDensityField + ?Sized>(field: &F, u: &Point, h: &Dir) -> Result<f64> {
    check_field_args(field, u, h)?;
    let shifted = u.translate(h, -1.0)?;
    let ratio = (field.log_density(&shifted)? - field.log_density(u)?).exp();
    if !ratio.is_finite() {
        return Err(Error::NonFinite("translation-density ratio".into()));
    }
    Ok(ratio)
}

/// Unit scan directions for a state: the coordinate directions `e_1..e_N`,
/// plus the hyperparameter direction (labelled `tau`) for hierarchical
/// states. Labels are stable identifiers used in reports.
pub fn unit_directions(point: &Point) -> Vec<(String, Dir)> {
    let n = point.trunc();
    let mut dirs = Vec::with_capacity(n + 1);
    for i in 1..=n {
        let e = basis_direction(i, n).expect("index within truncation");
        let dir = match point {
            Point::Coeff(_) => Dir::Coeff(e),
            Point::Hier(_) => Dir::Hier { h: e, tau: 0.0 },
        };
        dirs.push((format!("e{i}"), dir));
    }
    if matches!(point, Point::Hier(_)) {
        let zero = CoeffVec::zeros(n).expect("positive truncation");
        dirs.push(("tau".into(), Dir::Hier { h: zero, tau: 1.0 }));
    }
    dirs
}

/// Sup-norm first-order optimality residual: `max_i |β_{e_i}(u)|` over the
/// unit directions of the state (including the hyperparameter direction for
/// hierarchical states). Zero at an interior mode of a smooth field.
pub fn optimality_residual<F: LogDensityField + ?Sized>(field: &F, u: &Point) -> Result<f64> {
    let mut worst = 0.0_f64;
    for (_, dir) in unit_directions(u) {
        worst = worst.max(field.log_deriv(u, &dir)?.abs());
    }
    Ok(worst)
}

/// Evaluates the translation-density ratio `r_h(u)` for each direction. A
/// weak-mode candidate must keep every value at or below 1 (up to the
/// caller's tolerance); any ratio above 1 names a strictly improving
/// translation.
pub fn wmap_inequality_scan<F: LogDensityField + ?Sized>(
    field: &F,
    u: &Point,
    directions: &[Dir],
) -> Result<Vec<f64>> {
    directions
        .iter()
        .map(|h| om_ratio_exact(field, u, h))
        .collect()
}
