//! Convexifying diagonal shifts for the margin objective.
//!
//! A shift `α` turns `g` into
//! `g_α(z) = g(z) + Σᵢ αᵢ (zᵢ − lᵢ)(zᵢ − uᵢ)`, which under-estimates `g` on
//! `[l, u]` and is convex there once `H_g(z) + 2·diag(α)` is positive
//! semidefinite over the box.
//!
//! Two shift rules are provided:
//!
//! * [`power_method_uniform_alpha`]: `α = ρ(L_H)/2`, with the spectral radius
//!   of the lower-bounding Hessian `L_H` estimated by power iteration. `L_H`
//!   is never formed; [`LowerBoundingHessian`] applies it to a vector from the
//!   rank-1 structure of the interval Hessian in `O(N·d·k)`.
//! * [`nonuniform_alpha`]: a scaled Gershgorin rule using a lower bound on the
//!   Hessian diagonal and magnitude bounds on the off-diagonal entries.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::ibp::{gradient_bounds_from, ibp_hidden_bounds, linear_bounds};
use crate::interval::{mul_bounds, Interval, IntervalBox};
use crate::network::{Network, Objective};

/// Floor applied to box widths when they are used as Gershgorin scalings.
pub const MIN_SCALING: f64 = 1e-12;

/// A diagonal convexification shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum AlphaShift {
    Uniform(f64),
    PerCoordinate(Vec<f64>),
}

impl AlphaShift {
    pub fn coefficient(&self, i: usize) -> f64 {
        match self {
            AlphaShift::Uniform(a) => *a,
            AlphaShift::PerCoordinate(v) => v[i],
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            AlphaShift::Uniform(a) => *a == 0.0,
            AlphaShift::PerCoordinate(v) => v.iter().all(|&a| a == 0.0),
        }
    }

    /// The largest coefficient.
    pub fn max_coefficient(&self) -> f64 {
        match self {
            AlphaShift::Uniform(a) => *a,
            AlphaShift::PerCoordinate(v) => v.iter().copied().fold(0.0, f64::max),
        }
    }

    fn validate(&self, d: usize) -> Result<()> {
        let ok = match self {
            AlphaShift::Uniform(a) => a.is_finite() && *a >= 0.0,
            AlphaShift::PerCoordinate(v) => {
                check_len("AlphaShift", d, v.len())?;
                v.iter().all(|a| a.is_finite() && *a >= 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument("shift entries must be finite and >= 0".into()))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerMethodConfig {
    /// Stop once `‖v − v_prev‖₂ ≤ tol` across one double application.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerMethodConfig {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 5000,
            seed: 0,
        }
    }
}

/// Rank-1 representation of the interval Hessian of `g` over a box.
///
/// Each term `t` contributes `G_t w_tᵀ + w_t G_tᵀ` where `G_t` is an interval
/// vector (a `δ`-weighted gradient bound) and `w_t` a weight column. Rows of
/// the arrays below are terms.
#[derive(Debug, Clone)]
pub struct HessianTerms {
    g_lo: Array2<f64>,
    g_hi: Array2<f64>,
    w_pos: Array2<f64>,
    w_neg: Array2<f64>,
}

impl HessianTerms {
    pub fn new(obj: &Objective, region: &IntervalBox) -> Result<Self> {
        let net = obj.network();
        let hb = ibp_hidden_bounds(net, region)?;
        let grads = gradient_bounds_from(net, &hb);
        let weights = net.weights();
        let (d, k) = weights[0].dim();
        let n_terms = (weights.len() - 1) * k;
        let mut g_lo = Array2::zeros((n_terms, d));
        let mut g_hi = Array2::zeros((n_terms, d));
        let mut w_pos = Array2::zeros((n_terms, d));
        let mut w_neg = Array2::zeros((n_terms, d));

        // Interval weights δ, seeded by the output row combination.
        let mut lw: Vec<f64> = obj.c_diff().to_vec();
        let mut uw = lw.clone();
        let mut row = 0;
        for n in (1..weights.len()).rev() {
            let w = &weights[n];
            let (lg, ug) = match net {
                Network::Ccp(_) => (grads[n - 1].lo.clone(), grads[n - 1].hi.clone()),
                Network::Ncp(ncp) => {
                    let st = ncp.s()[n - 1].t().to_owned();
                    let pos = st.mapv(|v| v.max(0.0));
                    let neg = st.mapv(|v| v.min(0.0));
                    (
                        pos.dot(&grads[n - 1].lo) + neg.dot(&grads[n - 1].hi),
                        pos.dot(&grads[n - 1].hi) + neg.dot(&grads[n - 1].lo),
                    )
                }
            };
            for i in 0..k {
                for p in 0..d {
                    let (lo, hi) = mul_bounds(lw[i], uw[i], lg[[i, p]], ug[[i, p]]);
                    g_lo[[row, p]] = lo;
                    g_hi[[row, p]] = hi;
                    w_pos[[row, p]] = w[[p, i]].max(0.0);
                    w_neg[[row, p]] = w[[p, i]].min(0.0);
                }
                row += 1;
            }
            let factor = hb.factor(net, n + 1);
            let mut nlw = vec![0.0; k];
            let mut nuw = vec![0.0; k];
            for i in 0..k {
                let (lo, hi) = mul_bounds(factor.lo[i], factor.hi[i], lw[i], uw[i]);
                nlw[i] = lo;
                nuw[i] = hi;
            }
            if let Network::Ncp(ncp) = net {
                let s = &ncp.s()[n - 1];
                let mixed = linear_bounds(
                    s,
                    &crate::interval::IntervalVector {
                        lo: Array1::from(nlw),
                        hi: Array1::from(nuw),
                    },
                );
                nlw = mixed.lo.to_vec();
                nuw = mixed.hi.to_vec();
            }
            lw = nlw;
            uw = nuw;
        }
        Ok(Self {
            g_lo,
            g_hi,
            w_pos,
            w_neg,
        })
    }

    pub fn dim(&self) -> usize {
        self.g_lo.ncols()
    }

    pub fn n_terms(&self) -> usize {
        self.g_lo.nrows()
    }

    /// `(LB(M)·v, UB(M)·v)`.
    pub fn bound_matvecs(&self, v: &Array1<f64>) -> (Array1<f64>, Array1<f64>) {
        let a_pos = self.w_pos.dot(v);
        let a_neg = self.w_neg.dot(v);
        let b_lo = self.g_lo.dot(v);
        let b_hi = self.g_hi.dot(v);
        let lower = self.g_lo.t().dot(&a_pos)
            + self.g_hi.t().dot(&a_neg)
            + self.w_pos.t().dot(&b_lo)
            + self.w_neg.t().dot(&b_hi);
        let upper = self.g_hi.t().dot(&a_pos)
            + self.g_lo.t().dot(&a_neg)
            + self.w_pos.t().dot(&b_hi)
            + self.w_neg.t().dot(&b_lo);
        (lower, upper)
    }

    /// Lower bound on every diagonal Hessian entry over the box.
    pub fn diag_lower(&self) -> Array1<f64> {
        let t = &self.w_pos * &self.g_lo + &self.w_neg * &self.g_hi;
        t.sum_axis(ndarray::Axis(0)) * 2.0
    }

    fn magnitudes(&self) -> (Array2<f64>, Array2<f64>) {
        let mut g = self.g_lo.mapv(f64::abs);
        g.zip_mut_with(&self.g_hi, |a, &h| *a = a.max(h.abs()));
        let w = &self.w_pos - &self.w_neg;
        (g, w)
    }

    /// `rᵢ = Σ_{j≠i} mn(h_ij)·d_j/d_i` with `mn` bounded by the rank-1 sum.
    pub fn mn_rowsum(&self, dvec: &Array1<f64>) -> Array1<f64> {
        let (g, w) = self.magnitudes();
        let gd = g.dot(dvec);
        let wd = w.dot(dvec);
        let full = g.t().dot(&wd) + w.t().dot(&gd);
        let diag = (&g * &w).sum_axis(ndarray::Axis(0)) * 2.0;
        let mut r = full - &(diag * dvec);
        r.zip_mut_with(dvec, |ri, &di| *ri = (*ri / di).max(0.0));
        r
    }
}

/// Matrix-free lower-bounding Hessian
/// `L_H = (LB(M) + UB(M))/2 + diag((LB(M)·1 − UB(M)·1)/2)`.
#[derive(Debug, Clone)]
pub struct LowerBoundingHessian {
    terms: HessianTerms,
    radius: Array1<f64>,
}

impl LowerBoundingHessian {
    pub fn new(obj: &Objective, region: &IntervalBox) -> Result<Self> {
        let terms = HessianTerms::new(obj, region)?;
        let ones = Array1::ones(terms.dim());
        let (l1, u1) = terms.bound_matvecs(&ones);
        let radius = (l1 - u1) * 0.5;
        Ok(Self { terms, radius })
    }

    pub fn dim(&self) -> usize {
        self.terms.dim()
    }

    pub fn apply(&self, v: &Array1<f64>) -> Array1<f64> {
        let (lv, uv) = self.terms.bound_matvecs(v);
        (lv + uv) * 0.5 + &self.radius * v
    }

    /// Power iteration on `L_H²`, returning the estimate of `ρ(L_H)`.
    pub fn spectral_radius(&self, cfg: &PowerMethodConfig) -> Result<f64> {
        if !(cfg.tol > 0.0) {
            return Err(Error::InvalidArgument("power method tol must be > 0".into()));
        }
        let d = self.dim();
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
        let mut start = None;
        for _ in 0..=3 {
            let mut v = Array1::from_shape_fn(d, |_| rng.random::<f64>());
            let norm = v.dot(&v).sqrt();
            if norm == 0.0 {
                continue;
            }
            v /= norm;
            let image = self.apply(&v);
            if image.iter().any(|x| *x != 0.0) {
                start = Some(v);
                break;
            }
        }
        let Some(mut v) = start else {
            return Ok(0.0);
        };
        let mut r = 0.0;
        for _ in 0..cfg.max_iter {
            let prev = v.clone();
            for _ in 0..2 {
                let next = self.apply(&v);
                r = next.dot(&next).sqrt();
                if !r.is_finite() {
                    return Err(Error::Numerical("non-finite power iterate".into()));
                }
                if r == 0.0 {
                    return Ok(0.0);
                }
                v = next / r;
            }
            let diff = &v - &prev;
            if diff.dot(&diff).sqrt() <= cfg.tol {
                return Ok(r);
            }
        }
        Err(Error::ConvergenceFailure {
            iterations: cfg.max_iter,
        })
    }
}

/// `L_H · v` for the objective over the box, without forming `L_H`.
pub fn lh_matvec(obj: &Objective, region: &IntervalBox, v: &[f64]) -> Result<Array1<f64>> {
    check_len("lh_matvec", obj.dim(), v.len())?;
    let op = LowerBoundingHessian::new(obj, region)?;
    Ok(op.apply(&Array1::from(v.to_vec())))
}

/// Uniform shift `α = ρ(L_H)/2`.
pub fn power_method_uniform_alpha(obj: &Objective, region: &IntervalBox, cfg: &PowerMethodConfig) -> Result<f64> {
    let op = LowerBoundingHessian::new(obj, region)?;
    Ok(op.spectral_radius(cfg)? / 2.0)
}

/// Upper bounds on the scaled off-diagonal row sums of `|H_g|` over the box.
pub fn mn_hessian_rowsum(obj: &Objective, region: &IntervalBox, dvec: &[f64]) -> Result<Array1<f64>> {
    check_len("mn_hessian_rowsum", obj.dim(), dvec.len())?;
    if dvec.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(
            "scaling vector must be strictly positive".into(),
        ));
    }
    let terms = HessianTerms::new(obj, region)?;
    Ok(terms.mn_rowsum(&Array1::from(dvec.to_vec())))
}

/// Lower bounds on the Hessian diagonal over the box.
pub fn hessian_diag_lower(obj: &Objective, region: &IntervalBox) -> Result<Array1<f64>> {
    Ok(HessianTerms::new(obj, region)?.diag_lower())
}

/// Per-coordinate shift from the scaled Gershgorin rule with `d = u − l`.
pub fn nonuniform_alpha(obj: &Objective, region: &IntervalBox) -> Result<AlphaShift> {
    let terms = HessianTerms::new(obj, region)?;
    let widths = region.widths();
    let dvec = Array1::from_iter(widths.iter().map(|&w| w.max(MIN_SCALING)));
    let rows = terms.mn_rowsum(&dvec);
    let diag = terms.diag_lower();
    let alphas = (0..obj.dim())
        .map(|i| {
            if widths[i] == 0.0 {
                0.0
            } else {
                (-0.5 * (diag[i] - rows[i])).max(0.0)
            }
        })
        .collect();
    Ok(AlphaShift::PerCoordinate(alphas))
}

fn check_inside(region: &IntervalBox, z: &[f64]) -> Result<()> {
    check_len("alpha objective", region.dim(), z.len())?;
    for (i, (&v, (&l, &h))) in z.iter().zip(region.lo().iter().zip(region.hi())).enumerate() {
        if !(l <= v && v <= h) {
            return Err(Error::Domain { index: i });
        }
    }
    Ok(())
}

/// `g_α(z) = g(z) + Σᵢ αᵢ (zᵢ − lᵢ)(zᵢ − uᵢ)`.
pub fn alpha_objective_value(obj: &Objective, shift: &AlphaShift, region: &IntervalBox, z: &[f64]) -> Result<f64> {
    check_inside(region, z)?;
    shift.validate(obj.dim())?;
    let mut v = obj.value(z)?;
    for (i, &zi) in z.iter().enumerate() {
        v += shift.coefficient(i) * (zi - region.lo()[i]) * (zi - region.hi()[i]);
    }
    Ok(v)
}

/// `∇g_α(z) = ∇g(z) + α ∗ (2z − l − u)`.
pub fn alpha_objective_gradient(
    obj: &Objective,
    shift: &AlphaShift,
    region: &IntervalBox,
    z: &[f64],
) -> Result<Array1<f64>> {
    check_inside(region, z)?;
    shift.validate(obj.dim())?;
    let mut g = obj.gradient(z)?;
    for (i, &zi) in z.iter().enumerate() {
        g[i] += shift.coefficient(i) * (2.0 * zi - region.lo()[i] - region.hi()[i]);
    }
    Ok(g)
}

/// Convenience used by the search: the shift interval of `Σ αᵢ(zᵢ−lᵢ)(zᵢ−uᵢ)`.
pub fn shift_term_range(shift: &AlphaShift, region: &IntervalBox) -> Interval {
    let lo: f64 = (0..region.dim())
        .map(|i| -0.25 * shift.coefficient(i) * region.width(i).powi(2))
        .sum();
    Interval { lo, hi: 0.0 }
}
