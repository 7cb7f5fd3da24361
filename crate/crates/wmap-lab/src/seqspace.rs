//! Coefficient-space primitives shared by every model family.
//!
//! Everything in this crate works at a finite truncation: a vector holds the
//! first `N` coefficients of a basis expansion. The truncation is part of a
//! value's identity — operations never pad or shrink silently, and combining
//! vectors of different truncations is a hard error rather than a broadcast.
//!
//! [`BesovWeights`] caches the three coordinate weight sequences of a Besov
//! `B^s_{pp}` model at a fixed truncation:
//!
//! * `w_l = l^(p(s/d + 1/2) - 1)` — norm weights, `‖u‖^p = Σ w_l |u_l|^p`,
//! * `a_l = l^(-s/d - 1/2 + 1/p)` — sampling scales (coordinate `l` of a draw
//!   is `a_l X_l` with `X_l` standard `p`-generalized Gaussian),
//! * `c_l = 1 / a_l` — standardizing scales.
//!
//! These satisfy `a_l c_l = 1` and `a_l^(-p) = w_l` identically.

use crate::error::{Error, Result};

/// Finite vector of expansion coefficients `(u_1, …, u_N)`.
///
/// Entries are validated to be finite at construction; the truncation `N` is
/// `trunc()` and always equals the number of stored entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVec {
    entries: Vec<f64>,
}

impl CoeffVec {
    /// Wraps a coefficient vector. Errors on an empty vector or any non-finite
    /// entry.
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParam(
                "coefficient vector must have truncation >= 1".into(),
            ));
        }
        if let Some(idx) = entries.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "coefficient {} of {} is not finite",
                idx + 1,
                entries.len()
            )));
        }
        Ok(Self { entries })
    }

    /// The zero vector at truncation `trunc`.
    pub fn zeros(trunc: usize) -> Result<Self> {
        if trunc == 0 {
            return Err(Error::InvalidParam("truncation must be >= 1".into()));
        }
        Self::new(vec![0.0; trunc])
    }

    /// Truncation `N`.
    pub fn trunc(&self) -> usize {
        self.entries.len()
    }

    /// Coefficients as a slice (0-based storage of `u_1..u_N`).
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    fn check_same_trunc(&self, other: &CoeffVec) -> Result<()> {
        if self.trunc() != other.trunc() {
            return Err(Error::TruncMismatch {
                expected: self.trunc(),
                found: other.trunc(),
            });
        }
        Ok(())
    }

    /// Coordinate-wise sum; truncations must match.
    pub fn add(&self, other: &CoeffVec) -> Result<CoeffVec> {
        self.check_same_trunc(other)?;
        CoeffVec::new(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }

    /// Coordinate-wise difference; truncations must match.
    pub fn sub(&self, other: &CoeffVec) -> Result<CoeffVec> {
        self.check_same_trunc(other)?;
        CoeffVec::new(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// `self + t * other`; truncations must match.
    pub fn axpy(&self, t: f64, other: &CoeffVec) -> Result<CoeffVec> {
        self.check_same_trunc(other)?;
        if !t.is_finite() {
            return Err(Error::NonFinite("axpy scale".into()));
        }
        CoeffVec::new(
            self.entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + t * b)
                .collect(),
        )
    }

    /// Scalar multiple.
    pub fn scaled(&self, t: f64) -> Result<CoeffVec> {
        if !t.is_finite() {
            return Err(Error::NonFinite("scale factor".into()));
        }
        CoeffVec::new(self.entries.iter().map(|a| a * t).collect())
    }

    /// Embeds the vector into a finer truncation by appending zeros. The new
    /// truncation must not be smaller than the current one.
    pub fn zero_extend(&self, trunc: usize) -> Result<CoeffVec> {
        if trunc < self.trunc() {
            return Err(Error::TruncMismatch {
                expected: self.trunc(),
                found: trunc,
            });
        }
        let mut entries = self.entries.clone();
        entries.resize(trunc, 0.0);
        CoeffVec::new(entries)
    }

    /// Euclidean norm of the coefficient vector.
    pub fn euclid_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Cached coordinate weights of a Besov `B^s_{pp}` model at one truncation.
///
/// Construction enforces `1 < p <= 2`, `s > 0`, `d >= 1` and `trunc >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct BesovWeights {
    s: f64,
    p: f64,
    d: u32,
    norm_weights: Vec<f64>,
    sampling_scales: Vec<f64>,
    standardizing_scales: Vec<f64>,
}

impl BesovWeights {
    pub fn new(s: f64, p: f64, d: u32, trunc: usize) -> Result<Self> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::InvalidParam(format!(
                "Besov smoothness s must be finite and > 0, got {s}"
            )));
        }
        if !(p.is_finite() && p > 1.0 && p <= 2.0) {
            return Err(Error::InvalidParam(format!(
                "Besov integrability p must satisfy 1 < p <= 2, got {p}"
            )));
        }
        if d == 0 {
            return Err(Error::InvalidParam("spatial dimension d must be >= 1".into()));
        }
        if trunc == 0 {
            return Err(Error::InvalidParam("truncation must be >= 1".into()));
        }
        let sd = s / f64::from(d);
        let w_exp = p * (sd + 0.5) - 1.0;
        let a_exp = -sd - 0.5 + 1.0 / p;
        let mut norm_weights = Vec::with_capacity(trunc);
        let mut sampling_scales = Vec::with_capacity(trunc);
        let mut standardizing_scales = Vec::with_capacity(trunc);
        for l in 1..=trunc {
            let lf = l as f64;
            let w = lf.powf(w_exp);
            let a = lf.powf(a_exp);
            if !(w.is_finite() && a.is_finite() && w > 0.0 && a > 0.0) {
                return Err(Error::NonFinite(format!(
                    "Besov weight overflow at coordinate {l} (s={s}, p={p}, d={d})"
                )));
            }
            norm_weights.push(w);
            sampling_scales.push(a);
            standardizing_scales.push(1.0 / a);
        }
        Ok(Self {
            s,
            p,
            d,
            norm_weights,
            sampling_scales,
            standardizing_scales,
        })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn trunc(&self) -> usize {
        self.norm_weights.len()
    }

    /// Norm weights `w_l`.
    pub fn norm_weights(&self) -> &[f64] {
        &self.norm_weights
    }

    /// Sampling scales `a_l`.
    pub fn sampling_scales(&self) -> &[f64] {
        &self.sampling_scales
    }

    /// Standardizing scales `c_l = 1 / a_l`.
    pub fn standardizing_scales(&self) -> &[f64] {
        &self.standardizing_scales
    }
}

/// Besov norm `(Σ w_l |u_l|^p)^(1/p)` of `u` under `wts`.
pub fn besov_norm_p(u: &CoeffVec, wts: &BesovWeights) -> Result<f64> {
    if u.trunc() != wts.trunc() {
        return Err(Error::TruncMismatch {
            expected: wts.trunc(),
            found: u.trunc(),
        });
    }
    let p = wts.p();
    let sum: f64 = u
        .entries()
        .iter()
        .zip(wts.norm_weights())
        .map(|(x, w)| w * x.abs().powf(p))
        .sum();
    if !sum.is_finite() {
        return Err(Error::NonFinite("Besov norm overflow".into()));
    }
    Ok(sum.powf(1.0 / p))
}

/// Weighted inner product `Σ q_l u_l v_l` with strictly positive weights.
pub fn weighted_inner(u: &CoeffVec, v: &CoeffVec, weights: &[f64]) -> Result<f64> {
    if u.trunc() != v.trunc() {
        return Err(Error::TruncMismatch {
            expected: u.trunc(),
            found: v.trunc(),
        });
    }
    if weights.len() != u.trunc() {
        return Err(Error::TruncMismatch {
            expected: u.trunc(),
            found: weights.len(),
        });
    }
    if weights.iter().any(|q| !(q.is_finite() && *q > 0.0)) {
        return Err(Error::InvalidParam(
            "inner-product weights must be finite and > 0".into(),
        ));
    }
    let sum = u
        .entries()
        .iter()
        .zip(v.entries())
        .zip(weights)
        .map(|((a, b), q)| q * a * b)
        .sum::<f64>();
    if !sum.is_finite() {
        return Err(Error::NonFinite("weighted inner product overflow".into()));
    }
    Ok(sum)
}

/// The 1-based coordinate direction `e_index` at truncation `trunc`.
pub fn basis_direction(index: usize, trunc: usize) -> Result<CoeffVec> {
    if trunc == 0 {
        return Err(Error::InvalidParam("truncation must be >= 1".into()));
    }
    if index == 0 || index > trunc {
        return Err(Error::IndexOutOfRange { index, trunc });
    }
    let mut entries = vec![0.0; trunc];
    entries[index - 1] = 1.0;
    CoeffVec::new(entries)
}
