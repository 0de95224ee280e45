//! Interval bound propagation through polynomial networks: hidden units,
//! outputs, input gradients and (densely, for small inputs) Hessians.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{check_len, Result};
use crate::interval::{mul_bounds, Interval, IntervalBox, IntervalMatrix, IntervalVector};
use crate::network::{Network, Objective};

/// Bounds `m · x` for `x` in an interval vector; `m` is a point matrix.
pub(crate) fn linear_bounds(m: &Array2<f64>, x: &IntervalVector) -> IntervalVector {
    let pos = m.mapv(|v| v.max(0.0));
    let neg = m.mapv(|v| v.min(0.0));
    IntervalVector {
        lo: pos.dot(&x.lo) + neg.dot(&x.hi),
        hi: pos.dot(&x.hi) + neg.dot(&x.lo),
    }
}

/// Same as [`linear_bounds`] but for a right-hand interval matrix.
fn linear_bounds_mat(m: &Array2<f64>, x: &IntervalMatrix) -> IntervalMatrix {
    let pos = m.mapv(|v| v.max(0.0));
    let neg = m.mapv(|v| v.min(0.0));
    IntervalMatrix {
        lo: pos.dot(&x.lo) + neg.dot(&x.hi),
        hi: pos.dot(&x.hi) + neg.dot(&x.lo),
    }
}

fn product_bounds(a: &IntervalVector, b: &IntervalVector) -> IntervalVector {
    let mut out = IntervalVector::zeros(a.len());
    for i in 0..a.len() {
        let (lo, hi) = mul_bounds(a.lo[i], a.hi[i], b.lo[i], b.hi[i]);
        out.lo[i] = lo;
        out.hi[i] = hi;
    }
    out
}

/// Per-degree interval bounds on the hidden quantities of a network.
#[derive(Debug, Clone)]
pub struct HiddenBounds {
    /// `x̂ⁿ = Wₙᵀz` for `n = 1..N`.
    pub pre: Vec<IntervalVector>,
    /// `xⁿ` for `n = 1..N`.
    pub post: Vec<IntervalVector>,
    /// NCP only: `σⁿ = Sₙᵀxⁿ⁻¹ + bₙ` for `n = 2..N` (index `n − 2`).
    pub sigma: Vec<IntervalVector>,
}

impl HiddenBounds {
    /// Bounds on the multiplicative factor applied at degree `n` (1-based, `n ≥ 2`):
    /// `x̂ⁿ + 1` for CCP and `x̂ⁿ` for NCP.
    pub fn factor(&self, net: &Network, n: usize) -> IntervalVector {
        match net {
            Network::Ccp(_) => IntervalVector {
                lo: &self.pre[n - 1].lo + 1.0,
                hi: &self.pre[n - 1].hi + 1.0,
            },
            Network::Ncp(_) => self.pre[n - 1].clone(),
        }
    }
}

pub fn ibp_hidden_bounds(net: &Network, region: &IntervalBox) -> Result<HiddenBounds> {
    check_len("ibp_hidden_bounds", net.input_dim(), region.dim())?;
    let zb = region.as_interval_vector();
    let pre: Vec<IntervalVector> = net
        .weights()
        .iter()
        .map(|w| linear_bounds(&w.t().to_owned(), &zb))
        .collect();
    let mut post = vec![pre[0].clone()];
    let mut sigma = Vec::new();
    for n in 1..pre.len() {
        let prev = &post[n - 1];
        let next = match net {
            Network::Ccp(_) => {
                let factor = IntervalVector {
                    lo: &pre[n].lo + 1.0,
                    hi: &pre[n].hi + 1.0,
                };
                product_bounds(&factor, prev)
            }
            Network::Ncp(ncp) => {
                let mut s = linear_bounds(&ncp.s()[n - 1].t().to_owned(), prev);
                s.lo += &ncp.b()[n - 1];
                s.hi += &ncp.b()[n - 1];
                let x = product_bounds(&pre[n], &s);
                sigma.push(s);
                x
            }
        };
        post.push(next);
    }
    Ok(HiddenBounds { pre, post, sigma })
}

/// Sound elementwise bounds on `f(z)` over the box.
pub fn ibp_output_bounds(net: &Network, region: &IntervalBox) -> Result<IntervalVector> {
    let hb = ibp_hidden_bounds(net, region)?;
    let mut out = linear_bounds(net.c(), hb.post.last().unwrap());
    out.lo += net.beta();
    out.hi += net.beta();
    Ok(out)
}

/// Bounds on the margin `g` from one forward pass: `[LB(f_t) − UB(f_γ), UB(f_t) − LB(f_γ)]`.
pub fn ibp_objective_bounds(obj: &Objective, region: &IntervalBox) -> Result<Interval> {
    let out = ibp_output_bounds(obj.network(), region)?;
    let (t, a) = (obj.true_class(), obj.adv_class());
    Ok(Interval {
        lo: out.lo[t] - out.hi[a],
        hi: out.hi[t] - out.lo[a],
    })
}

/// Sound lower bound on `min_{z ∈ box} g(z)`.
pub fn ibp_objective_lower(obj: &Objective, region: &IntervalBox) -> Result<f64> {
    Ok(ibp_objective_bounds(obj, region)?.lo)
}

/// Bounds on the Jacobians `J(xⁿ)` (`k × d`, row `i` is `∇xᵢⁿ`), one per degree.
pub fn ibp_gradient_bounds(net: &Network, region: &IntervalBox) -> Result<Vec<IntervalMatrix>> {
    let hb = ibp_hidden_bounds(net, region)?;
    Ok(gradient_bounds_from(net, &hb))
}

pub(crate) fn gradient_bounds_from(net: &Network, hb: &HiddenBounds) -> Vec<IntervalMatrix> {
    let weights = net.weights();
    let (d, k) = weights[0].dim();
    let first = weights[0].t().to_owned();
    let mut out = vec![IntervalMatrix::point(&first)];
    for n in 1..weights.len() {
        let w = &weights[n];
        let prev = &out[n - 1];
        // Unit-wise multiplier of the previous Jacobian, and the multiplier of wᵢ.
        let (mult, carry, src) = match net {
            Network::Ccp(_) => (hb.factor(net, n + 1), hb.post[n - 1].clone(), prev.clone()),
            Network::Ncp(ncp) => (
                hb.pre[n].clone(),
                hb.sigma[n - 1].clone(),
                linear_bounds_mat(&ncp.s()[n - 1].t().to_owned(), prev),
            ),
        };
        let mut next = IntervalMatrix::zeros(k, d);
        for i in 0..k {
            let c = carry.get(i);
            let m = mult.get(i);
            for p in 0..d {
                let t1 = c.scale(w[[p, i]]);
                let (lo, hi) = mul_bounds(m.lo, m.hi, src.lo[[i, p]], src.hi[[i, p]]);
                next.lo[[i, p]] = t1.lo + lo;
                next.hi[[i, p]] = t1.hi + hi;
            }
        }
        out.push(next);
    }
    out
}

/// Bounds on the output Jacobian `J(f)` (`o × d`).
pub fn ibp_output_gradient_bounds(net: &Network, region: &IntervalBox) -> Result<IntervalMatrix> {
    let grads = ibp_gradient_bounds(net, region)?;
    Ok(linear_bounds_mat(net.c(), grads.last().unwrap()))
}

/// Bounds on `∇g` over the box.
pub fn ibp_objective_gradient_bounds(obj: &Objective, region: &IntervalBox) -> Result<IntervalVector> {
    let grads = ibp_gradient_bounds(obj.network(), region)?;
    let last = grads.last().unwrap();
    let row = obj.c_diff().view().insert_axis(ndarray::Axis(0)).to_owned();
    let b = linear_bounds_mat(&row, last);
    Ok(IntervalVector {
        lo: b.lo.row(0).to_owned(),
        hi: b.hi.row(0).to_owned(),
    })
}

/// Adds the interval bounds of `G wᵀ + w Gᵀ` to `acc`, for interval `G` and point `w`.
fn accumulate_rank_one(acc: &mut IntervalMatrix, g_lo: &Array1<f64>, g_hi: &Array1<f64>, w: ArrayView1<f64>) {
    let d = w.len();
    for p in 0..d {
        for q in 0..d {
            let (wq_pos, wq_neg) = (w[q].max(0.0), w[q].min(0.0));
            let (wp_pos, wp_neg) = (w[p].max(0.0), w[p].min(0.0));
            acc.lo[[p, q]] += g_lo[p] * wq_pos + g_hi[p] * wq_neg + wp_pos * g_lo[q] + wp_neg * g_hi[q];
            acc.hi[[p, q]] += g_hi[p] * wq_pos + g_lo[p] * wq_neg + wp_pos * g_hi[q] + wp_neg * g_lo[q];
        }
    }
}

/// Dense interval matrix `[M]` containing `H_g(z)` for all `z` in the box.
///
/// The Hessian is expanded as a sum of degree-wise rank-1 contributions whose
/// scalar weights `δ` are tracked as intervals, starting from `C_{t:} − C_{γ:}`
/// at the output and multiplied by each degree's factor on the way down. This
/// is the same interval family the matrix-free lower-bounding operator works
/// with. Materializes `d × d`; intended for small inputs.
pub fn ibp_hessian_bounds_dense(obj: &Objective, region: &IntervalBox) -> Result<IntervalMatrix> {
    let net = obj.network();
    let hb = ibp_hidden_bounds(net, region)?;
    let grads = gradient_bounds_from(net, &hb);
    let weights = net.weights();
    let (d, k) = weights[0].dim();
    let mut acc = IntervalMatrix::zeros(d, d);
    let mut delta: Vec<Interval> = obj.c_diff().iter().map(|&c| Interval::point(c)).collect();

    for n in (1..weights.len()).rev() {
        let w = &weights[n];
        let factor = hb.factor(net, n + 1);
        // Interval rows that multiply wᵢ in the rank-1 term.
        let src = match net {
            Network::Ccp(_) => grads[n - 1].clone(),
            Network::Ncp(ncp) => linear_bounds_mat(&ncp.s()[n - 1].t().to_owned(), &grads[n - 1]),
        };
        for (i, di) in delta.iter().enumerate() {
            let mut g_lo = Array1::zeros(d);
            let mut g_hi = Array1::zeros(d);
            for p in 0..d {
                let (lo, hi) = mul_bounds(di.lo, di.hi, src.lo[[i, p]], src.hi[[i, p]]);
                g_lo[p] = lo;
                g_hi[p] = hi;
            }
            accumulate_rank_one(&mut acc, &g_lo, &g_hi, w.column(i));
        }
        let scaled: Vec<Interval> = delta.iter().enumerate().map(|(i, &di)| di * factor.get(i)).collect();
        delta = match net {
            Network::Ccp(_) => scaled,
            Network::Ncp(ncp) => {
                let s = &ncp.s()[n - 1];
                (0..k)
                    .map(|j| {
                        scaled
                            .iter()
                            .enumerate()
                            .fold(Interval::point(0.0), |acc, (i, si)| acc + si.scale(s[[j, i]]))
                    })
                    .collect()
            }
        };
    }
    Ok(acc)
}
