//! Gauss–Legendre quadrature rules.
//!
//! Nodes and weights are computed by Newton iteration on the Legendre
//! polynomials (standard cosine initial guesses) and cached per node count.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Result<Arc<(Vec<f64>, Vec<f64>)>> {
    if n == 0 {
        return Err(Error::InvalidParam("quadrature rule needs n >= 1".into()));
    }
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    if let Some(rule) = guard.get(&n) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(compute_rule(n));
    guard.insert(n, Arc::clone(&rule));
    Ok(rule)
}

fn compute_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    let nf = n as f64;
    for i in 0..half {
        // Initial guess for the i-th root (descending order).
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        for _ in 0..100 {
            let (p, d) = legendre_and_deriv(n, x);
            let dx = p / d;
            x -= dx;
            if dx.abs() <= 1e-15 * (1.0 + x.abs()) {
                break;
            }
        }
        let (_, dp) = legendre_and_deriv(n, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        // Middle node is exactly zero for odd rules.
        nodes[n / 2] = 0.0;
        let (_, d) = legendre_and_deriv(n, 0.0);
        weights[n / 2] = 2.0 / (d * d);
    }
    (nodes, weights)
}

/// Evaluates `(P_n(x), P_n'(x))` by the three-term recurrence.
fn legendre_and_deriv(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let denom = x * x - 1.0;
    let deriv = if denom.abs() < 1e-300 {
        // Endpoint derivative: P_n'(±1) = ±n(n+1)/2.
        x.signum() * (n * (n + 1)) as f64 / 2.0
    } else {
        (n as f64) * (x * p1 - p0) / denom
    };
    (p1, deriv)
}

/// Single-panel Gauss–Legendre integral of `f` over `[a, b]` with `n` nodes.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, n: usize) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("integration interval".into()));
    }
    let rule = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        acc += w * f(mid + hw * x);
    }
    Ok(acc * hw)
}

/// Fallible-integrand variant of [`integrate`].
pub fn try_integrate<F>(mut f: F, a: f64, b: f64, n: usize) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite("integration interval".into()));
    }
    let rule = gauss_legendre(n)?;
    let mid = 0.5 * (a + b);
    let hw = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in rule.0.iter().zip(&rule.1) {
        acc += w * f(mid + hw * x)?;
    }
    Ok(acc * hw)
}
