//! Closed real intervals and their vector, matrix and box forms.
//!
//! Endpoint arithmetic uses ordinary round-to-nearest floating point. Products
//! are evaluated over the full set of four endpoint products rather than by
//! sign cases, so every rule here can be read off directly against the
//! textbook definitions.

use std::ops::{Add, Mul};

use ndarray::{Array1, Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    /// Builds an interval, rejecting reversed or non-finite endpoints.
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidArgument(format!("non-finite interval [{lo}, {hi}]")));
        }
        if lo > hi {
            return Err(Error::InvalidArgument(format!("reversed interval [{lo}, {hi}]")));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: f64) -> Self {
        Self { lo: x, hi: x }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// `max(|lo|, |hi|)`, the largest magnitude attained on the interval.
    pub fn mag(&self) -> f64 {
        self.lo.abs().max(self.hi.abs())
    }

    /// Multiplication by a real scalar.
    pub fn scale(self, w: f64) -> Interval {
        Interval {
            lo: w.max(0.0) * self.lo + w.min(0.0) * self.hi,
            hi: w.max(0.0) * self.hi + w.min(0.0) * self.lo,
        }
    }

    pub fn shift(self, c: f64) -> Interval {
        Interval {
            lo: self.lo + c,
            hi: self.hi + c,
        }
    }
}

/// Product of two intervals: hull of the four endpoint products.
impl Mul for Interval {
    type Output = Interval;

    fn mul(self, other: Interval) -> Interval {
        let s = [
            self.lo * other.lo,
            self.lo * other.hi,
            self.hi * other.lo,
            self.hi * other.hi,
        ];
        Interval {
            lo: s.iter().copied().fold(f64::INFINITY, f64::min),
            hi: s.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

impl Add for Interval {
    type Output = Interval;

    fn add(self, other: Interval) -> Interval {
        Interval {
            lo: self.lo + other.lo,
            hi: self.hi + other.hi,
        }
    }
}

/// Multiplies two intervals given by their endpoints and returns `(lo, hi)`.
#[inline]
pub(crate) fn mul_bounds(alo: f64, ahi: f64, blo: f64, bhi: f64) -> (f64, f64) {
    let p1 = alo * blo;
    let p2 = alo * bhi;
    let p3 = ahi * blo;
    let p4 = ahi * bhi;
    (p1.min(p2).min(p3).min(p4), p1.max(p2).max(p3).max(p4))
}

/// Interval product of `a` and `b`.
pub fn interval_mul(a: Interval, b: Interval) -> Interval {
    a * b
}

/// Bounds `Σ wᵢ hᵢ` over `hᵢ ∈ [LB(hᵢ), UB(hᵢ)]`.
pub fn interval_linear(w: ArrayView1<f64>, h: &IntervalVector) -> Result<Interval> {
    crate::error::check_len("interval_linear", h.len(), w.len())?;
    let mut lo = 0.0;
    let mut hi = 0.0;
    for ((&wi, &l), &u) in w.iter().zip(h.lo.iter()).zip(h.hi.iter()) {
        let (pos, neg) = (wi.max(0.0), wi.min(0.0));
        lo += pos * l + neg * u;
        hi += pos * u + neg * l;
    }
    Ok(Interval { lo, hi })
}

/// Elementwise interval vector stored as separate endpoint arrays.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalVector {
    pub lo: Array1<f64>,
    pub hi: Array1<f64>,
}

impl IntervalVector {
    pub fn new(lo: Array1<f64>, hi: Array1<f64>) -> Result<Self> {
        crate::error::check_len("IntervalVector", lo.len(), hi.len())?;
        if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidArgument(
                "interval vector has lo > hi or NaN entries".into(),
            ));
        }
        Ok(Self { lo, hi })
    }

    pub fn point(x: ArrayView1<f64>) -> Self {
        Self {
            lo: x.to_owned(),
            hi: x.to_owned(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            lo: Array1::zeros(n),
            hi: Array1::zeros(n),
        }
    }

    pub fn len(&self) -> usize {
        self.lo.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lo.is_empty()
    }

    pub fn get(&self, i: usize) -> Interval {
        Interval {
            lo: self.lo[i],
            hi: self.hi[i],
        }
    }

    pub fn set(&mut self, i: usize, v: Interval) {
        self.lo[i] = v.lo;
        self.hi[i] = v.hi;
    }

    /// True when `x` lies inside every coordinate interval, up to `tol`.
    pub fn contains(&self, x: ArrayView1<f64>, tol: f64) -> bool {
        x.len() == self.len()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }

    /// Widens every endpoint outward by `slack`.
    pub fn inflate(&self, slack: f64) -> Self {
        Self {
            lo: &self.lo - slack,
            hi: &self.hi + slack,
        }
    }
}

/// Elementwise interval matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct IntervalMatrix {
    pub lo: Array2<f64>,
    pub hi: Array2<f64>,
}

impl IntervalMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            lo: Array2::zeros((rows, cols)),
            hi: Array2::zeros((rows, cols)),
        }
    }

    pub fn point(m: &Array2<f64>) -> Self {
        Self {
            lo: m.clone(),
            hi: m.clone(),
        }
    }

    pub fn dim(&self) -> (usize, usize) {
        self.lo.dim()
    }

    pub fn get(&self, r: usize, c: usize) -> Interval {
        Interval {
            lo: self.lo[[r, c]],
            hi: self.hi[[r, c]],
        }
    }

    pub fn row(&self, r: usize) -> IntervalVector {
        IntervalVector {
            lo: self.lo.row(r).to_owned(),
            hi: self.hi.row(r).to_owned(),
        }
    }

    pub fn contains(&self, m: &Array2<f64>, tol: f64) -> bool {
        m.dim() == self.dim()
            && m.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }

    /// Elementwise `max(|LB|, |UB|)`.
    pub fn mag(&self) -> Array2<f64> {
        let mut out = self.lo.mapv(f64::abs);
        out.zip_mut_with(&self.hi, |a, &h| *a = a.max(h.abs()));
        out
    }
}

/// An axis-aligned box `[lo, hi] ⊂ ℝᵈ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::InvalidBox(format!(
                "lower has {} entries, upper has {}",
                lo.len(),
                hi.len()
            )));
        }
        for (i, (l, h)) in lo.iter().zip(hi.iter()).enumerate() {
            if !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidBox(format!("non-finite bound at {i}")));
            }
            if l > h {
                return Err(Error::InvalidBox(format!("lo > hi at {i}")));
            }
        }
        Ok(Self { lo, hi })
    }

    /// The degenerate box `{z}`.
    pub fn point(z: &[f64]) -> Result<Self> {
        Self::new(z.to_vec(), z.to_vec())
    }

    /// `{z : ‖z − center‖∞ ≤ eps} ∩ [0, 1]ᵈ`.
    pub fn linf_ball_unit(center: &[f64], eps: f64) -> Result<Self> {
        if !(eps >= 0.0) || !eps.is_finite() {
            return Err(Error::InvalidArgument(format!("eps must be >= 0, got {eps}")));
        }
        let lo = center.iter().map(|&c| (c - eps).max(0.0)).collect();
        let hi = center.iter().map(|&c| (c + eps).min(1.0)).collect();
        Self::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, i: usize) -> f64 {
        self.hi[i] - self.lo[i]
    }

    pub fn widths(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    pub fn max_width(&self) -> f64 {
        self.widths().into_iter().fold(0.0, f64::max)
    }

    pub fn mean_width(&self) -> f64 {
        if self.lo.is_empty() {
            0.0
        } else {
            self.widths().iter().sum::<f64>() / self.dim() as f64
        }
    }

    /// Euclidean length of the diagonal.
    pub fn diameter(&self) -> f64 {
        self.widths().iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)).collect()
    }

    pub fn is_degenerate(&self) -> bool {
        self.lo.iter().zip(&self.hi).all(|(l, h)| l == h)
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(&v, (&l, &h))| l <= v && v <= h)
    }

    /// Whether `other` lies entirely inside `self`.
    pub fn contains_box(&self, other: &IntervalBox) -> bool {
        other.dim() == self.dim() && (0..self.dim()).all(|i| self.lo[i] <= other.lo[i] && other.hi[i] <= self.hi[i])
    }

    /// Clamps `z` into the box in place.
    pub fn project(&self, z: &mut [f64]) {
        for ((v, &l), &h) in z.iter_mut().zip(&self.lo).zip(&self.hi) {
            *v = v.clamp(l, h);
        }
    }

    pub fn as_interval_vector(&self) -> IntervalVector {
        IntervalVector {
            lo: Array1::from(self.lo.clone()),
            hi: Array1::from(self.hi.clone()),
        }
    }

    /// Splits coordinate `dim` at `at`, returning the lower and upper halves.
    pub fn split_at(&self, dim: usize, at: f64) -> (IntervalBox, IntervalBox) {
        let mut left = self.clone();
        let mut right = self.clone();
        left.hi[dim] = at;
        right.lo[dim] = at;
        (left, right)
    }
}
