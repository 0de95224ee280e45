//! Polynomial network definitions and exact evaluation.
//!
//! Two factorizations are supported:
//!
//! * **CCP**: `x¹ = W₁ᵀz`, `xⁿ = (Wₙᵀz) ∗ xⁿ⁻¹ + xⁿ⁻¹`, `f(z) = C xᴺ + β`.
//! * **NCP**: `x¹ = W₁ᵀz`, `xⁿ = (Wₙᵀz) ∗ (Sₙᵀxⁿ⁻¹ + bₙ)`, `f(z) = C xᴺ + β`.
//!
//! Every `Wₙ` is `d × k` and its `i`-th column `w_{[n]:i}` feeds hidden unit
//! `i`. All storage is dense and row-major.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{check_len, Error, Result};

/// Coupled CP decomposition network.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpNetwork {
    weights: Vec<Array2<f64>>,
    c: Array2<f64>,
    beta: Array1<f64>,
}

/// Nested coupled CP decomposition network.
#[derive(Debug, Clone, PartialEq)]
pub struct NcpNetwork {
    weights: Vec<Array2<f64>>,
    /// `S₂ … S_N`, each `k × k`.
    s: Vec<Array2<f64>>,
    /// `b₂ … b_N`, each of length `k`.
    b: Vec<Array1<f64>>,
    c: Array2<f64>,
    beta: Array1<f64>,
}

fn all_finite<'a>(mut it: impl Iterator<Item = &'a f64>) -> bool {
    it.all(|v| v.is_finite())
}

fn validate_common(weights: &[Array2<f64>], c: &Array2<f64>, beta: &Array1<f64>) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidNetwork("degree must be at least 1".into()));
    }
    let (d, k) = weights[0].dim();
    if d == 0 || k == 0 {
        return Err(Error::InvalidNetwork("input and hidden sizes must be positive".into()));
    }
    for (n, w) in weights.iter().enumerate() {
        if w.dim() != (d, k) {
            return Err(Error::InvalidNetwork(format!(
                "W[{}] has shape {:?}, expected ({d}, {k})",
                n + 1,
                w.dim()
            )));
        }
        if !all_finite(w.iter()) {
            return Err(Error::InvalidNetwork(format!("W[{}] has non-finite entries", n + 1)));
        }
    }
    let (o, ck) = c.dim();
    if o == 0 || ck != k {
        return Err(Error::InvalidNetwork(format!(
            "C has shape {:?}, expected (o, {k}) with o > 0",
            c.dim()
        )));
    }
    if beta.len() != o {
        return Err(Error::InvalidNetwork(format!(
            "beta has length {}, expected {o}",
            beta.len()
        )));
    }
    if !all_finite(c.iter()) || !all_finite(beta.iter()) {
        return Err(Error::InvalidNetwork("C or beta has non-finite entries".into()));
    }
    Ok(())
}

impl CcpNetwork {
    pub fn new(weights: Vec<Array2<f64>>, c: Array2<f64>, beta: Array1<f64>) -> Result<Self> {
        validate_common(&weights, &c, &beta)?;
        Ok(Self { weights, c, beta })
    }

    /// Hidden activations `x¹ … xᴺ`.
    fn hidden_trace(&self, z: ArrayView1<f64>) -> Vec<Array1<f64>> {
        let mut xs = Vec::with_capacity(self.weights.len());
        xs.push(self.weights[0].t().dot(&z));
        for w in &self.weights[1..] {
            let prev = xs.last().unwrap();
            let mut x = w.t().dot(&z);
            x.zip_mut_with(prev, |a, &p| *a = *a * p + p);
            xs.push(x);
        }
        xs
    }

    /// `f(z) = C xᴺ + β`.
    pub fn forward(&self, z: &[f64]) -> Result<Array1<f64>> {
        check_len("ccp_forward", self.input_dim(), z.len())?;
        let xs = self.hidden_trace(ArrayView1::from(z));
        Ok(self.c.dot(xs.last().unwrap()) + &self.beta)
    }

    /// Gradient of `cᵀxᴺ` by reverse accumulation.
    fn weighted_gradient(&self, z: ArrayView1<f64>, cw: ArrayView1<f64>) -> Array1<f64> {
        let xs = self.hidden_trace(z);
        let n_deg = self.weights.len();
        let mut lambda = cw.to_owned();
        let mut grad = Array1::zeros(self.input_dim());
        for n in (1..n_deg).rev() {
            let w = &self.weights[n];
            let pre = w.t().dot(&z);
            let seed = &lambda * &xs[n - 1];
            grad += &w.dot(&seed);
            lambda.zip_mut_with(&pre, |l, &a| *l *= a + 1.0);
        }
        grad += &self.weights[0].dot(&lambda);
        grad
    }

    /// Exact Hessian of `cᵀxᴺ` via the forward recursion
    /// `∇²xᵢⁿ = ∇xᵢⁿ⁻¹ wᵀ + w ∇xᵢⁿ⁻¹ᵀ + (wᵀz + 1) ∇²xᵢⁿ⁻¹`.
    fn weighted_hessian(&self, z: ArrayView1<f64>, cw: ArrayView1<f64>) -> Array2<f64> {
        let d = self.input_dim();
        let k = self.hidden_dim();
        let xs = self.hidden_trace(z);
        let mut out = Array2::zeros((d, d));
        for i in 0..k {
            let mut grad = self.weights[0].column(i).to_owned();
            let mut hess = Array2::<f64>::zeros((d, d));
            for (n, w) in self.weights.iter().enumerate().skip(1) {
                let wi = w.column(i);
                let a = wi.dot(&z) + 1.0;
                let x_prev = xs[n - 1][i];
                let mut next = Array2::zeros((d, d));
                for p in 0..d {
                    for q in 0..d {
                        next[[p, q]] = (grad[p] * wi[q] + grad[q] * wi[p]) + a * hess[[p, q]];
                    }
                }
                hess = next;
                let mut g = wi.to_owned() * x_prev;
                g.scaled_add(a, &grad);
                grad = g;
            }
            out.scaled_add(cw[i], &hess);
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.weights.len()
    }
    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }
    pub fn hidden_dim(&self) -> usize {
        self.weights[0].ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }
    pub fn c(&self) -> &Array2<f64> {
        &self.c
    }
    pub fn beta(&self) -> &Array1<f64> {
        &self.beta
    }
    pub(crate) fn parts_mut(&mut self) -> (&mut Vec<Array2<f64>>, &mut Array2<f64>, &mut Array1<f64>) {
        (&mut self.weights, &mut self.c, &mut self.beta)
    }
}

impl NcpNetwork {
    pub fn new(
        weights: Vec<Array2<f64>>,
        s: Vec<Array2<f64>>,
        b: Vec<Array1<f64>>,
        c: Array2<f64>,
        beta: Array1<f64>,
    ) -> Result<Self> {
        validate_common(&weights, &c, &beta)?;
        let k = weights[0].ncols();
        let levels = weights.len() - 1;
        if s.len() != levels || b.len() != levels {
            return Err(Error::InvalidNetwork(format!(
                "NCP of degree {} needs {levels} S and b entries, got {} and {}",
                weights.len(),
                s.len(),
                b.len()
            )));
        }
        for (n, (sn, bn)) in s.iter().zip(&b).enumerate() {
            if sn.dim() != (k, k) || bn.len() != k {
                return Err(Error::InvalidNetwork(format!(
                    "S[{}]/b[{}] shapes {:?}/{} inconsistent with k = {k}",
                    n + 2,
                    n + 2,
                    sn.dim(),
                    bn.len()
                )));
            }
            if !all_finite(sn.iter()) || !all_finite(bn.iter()) {
                return Err(Error::InvalidNetwork(format!(
                    "S[{}] or b[{}] not finite",
                    n + 2,
                    n + 2
                )));
            }
        }
        Ok(Self { weights, s, b, c, beta })
    }

    /// Returns `(x¹ … xᴺ, σ² … σᴺ)` where `σⁿ = Sₙᵀxⁿ⁻¹ + bₙ`.
    fn hidden_trace(&self, z: ArrayView1<f64>) -> (Vec<Array1<f64>>, Vec<Array1<f64>>) {
        let mut xs = Vec::with_capacity(self.weights.len());
        let mut sig = Vec::with_capacity(self.s.len());
        xs.push(self.weights[0].t().dot(&z));
        for (n, w) in self.weights.iter().enumerate().skip(1) {
            let sigma = self.s[n - 1].t().dot(xs.last().unwrap()) + &self.b[n - 1];
            let x = w.t().dot(&z) * &sigma;
            sig.push(sigma);
            xs.push(x);
        }
        (xs, sig)
    }

    pub fn forward(&self, z: &[f64]) -> Result<Array1<f64>> {
        check_len("ncp_forward", self.input_dim(), z.len())?;
        let (xs, _) = self.hidden_trace(ArrayView1::from(z));
        Ok(self.c.dot(xs.last().unwrap()) + &self.beta)
    }

    fn weighted_gradient(&self, z: ArrayView1<f64>, cw: ArrayView1<f64>) -> Array1<f64> {
        let (_, sig) = self.hidden_trace(z);
        let mut lambda = cw.to_owned();
        let mut grad = Array1::zeros(self.input_dim());
        for n in (1..self.weights.len()).rev() {
            let w = &self.weights[n];
            let pre = w.t().dot(&z);
            grad += &w.dot(&(&lambda * &sig[n - 1]));
            lambda = self.s[n - 1].dot(&(&lambda * &pre));
        }
        grad += &self.weights[0].dot(&lambda);
        grad
    }

    fn weighted_hessian(&self, z: ArrayView1<f64>, cw: ArrayView1<f64>) -> Array2<f64> {
        let d = self.input_dim();
        let k = self.hidden_dim();
        let (_, sig) = self.hidden_trace(z);
        // Per-unit gradients (k × d) and Hessians.
        let mut grads = self.weights[0].t().to_owned();
        let mut hess: Vec<Array2<f64>> = vec![Array2::zeros((d, d)); k];
        for (n, w) in self.weights.iter().enumerate().skip(1) {
            let s = &self.s[n - 1];
            let mixed = s.t().dot(&grads); // row i: Σ_j s_ji ∇x_j
            let mut next_grads = Array2::zeros((k, d));
            let mut next_hess = Vec::with_capacity(k);
            for i in 0..k {
                let wi = w.column(i);
                let a = wi.dot(&z);
                let gi = mixed.row(i);
                let mut h = Array2::zeros((d, d));
                for (j, hj) in hess.iter().enumerate() {
                    let sji = s[[j, i]];
                    if sji != 0.0 {
                        h.scaled_add(sji, hj);
                    }
                }
                h *= a;
                for p in 0..d {
                    for q in 0..d {
                        h[[p, q]] += wi[p] * gi[q] + gi[p] * wi[q];
                    }
                }
                next_hess.push(h);
                let mut row = next_grads.row_mut(i);
                row.assign(&(&wi * sig[n - 1][i]));
                row.scaled_add(a, &gi);
            }
            grads = next_grads;
            hess = next_hess;
        }
        let mut out = Array2::zeros((d, d));
        for (i, h) in hess.iter().enumerate() {
            out.scaled_add(cw[i], h);
        }
        out
    }

    pub fn degree(&self) -> usize {
        self.weights.len()
    }
    pub fn input_dim(&self) -> usize {
        self.weights[0].nrows()
    }
    pub fn hidden_dim(&self) -> usize {
        self.weights[0].ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }
    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }
    pub fn s(&self) -> &[Array2<f64>] {
        &self.s
    }
    pub fn b(&self) -> &[Array1<f64>] {
        &self.b
    }
    pub fn c(&self) -> &Array2<f64> {
        &self.c
    }
    pub fn beta(&self) -> &Array1<f64> {
        &self.beta
    }
}

/// Either network kind behind one evaluation interface.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Ccp(CcpNetwork),
    Ncp(NcpNetwork),
}

impl From<CcpNetwork> for Network {
    fn from(n: CcpNetwork) -> Self {
        Network::Ccp(n)
    }
}

impl From<NcpNetwork> for Network {
    fn from(n: NcpNetwork) -> Self {
        Network::Ncp(n)
    }
}

impl Network {
    pub fn forward(&self, z: &[f64]) -> Result<Array1<f64>> {
        match self {
            Network::Ccp(n) => n.forward(z),
            Network::Ncp(n) => n.forward(z),
        }
    }

    /// Index of the largest output (lowest index on ties).
    pub fn predict(&self, z: &[f64]) -> Result<usize> {
        let f = self.forward(z)?;
        Ok(argmax(f.view()))
    }

    pub fn degree(&self) -> usize {
        match self {
            Network::Ccp(n) => n.degree(),
            Network::Ncp(n) => n.degree(),
        }
    }
    pub fn input_dim(&self) -> usize {
        match self {
            Network::Ccp(n) => n.input_dim(),
            Network::Ncp(n) => n.input_dim(),
        }
    }
    pub fn hidden_dim(&self) -> usize {
        match self {
            Network::Ccp(n) => n.hidden_dim(),
            Network::Ncp(n) => n.hidden_dim(),
        }
    }
    pub fn output_dim(&self) -> usize {
        match self {
            Network::Ccp(n) => n.output_dim(),
            Network::Ncp(n) => n.output_dim(),
        }
    }
    pub fn weights(&self) -> &[Array2<f64>] {
        match self {
            Network::Ccp(n) => n.weights(),
            Network::Ncp(n) => n.weights(),
        }
    }
    pub fn c(&self) -> &Array2<f64> {
        match self {
            Network::Ccp(n) => n.c(),
            Network::Ncp(n) => n.c(),
        }
    }
    pub fn beta(&self) -> &Array1<f64> {
        match self {
            Network::Ccp(n) => n.beta(),
            Network::Ncp(n) => n.beta(),
        }
    }
}

pub(crate) fn argmax(v: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// The margin `g(z) = f(z)_t − f(z)_γ` for a fixed class pair.
#[derive(Debug, Clone)]
pub struct Objective<'a> {
    net: &'a Network,
    true_class: usize,
    adv_class: usize,
    c_diff: Array1<f64>,
}

impl<'a> Objective<'a> {
    pub fn new(net: &'a Network, true_class: usize, adv_class: usize) -> Result<Self> {
        let o = net.output_dim();
        if true_class == adv_class || true_class >= o || adv_class >= o {
            return Err(Error::InvalidClass {
                true_class,
                adv_class,
                outputs: o,
            });
        }
        let c = net.c();
        let c_diff = &c.row(true_class) - &c.row(adv_class);
        Ok(Self {
            net,
            true_class,
            adv_class,
            c_diff,
        })
    }

    pub fn network(&self) -> &'a Network {
        self.net
    }
    pub fn true_class(&self) -> usize {
        self.true_class
    }
    pub fn adv_class(&self) -> usize {
        self.adv_class
    }
    pub fn dim(&self) -> usize {
        self.net.input_dim()
    }

    /// `C_{t:} − C_{γ:}`, the output row combination defining `g`.
    pub fn c_diff(&self) -> &Array1<f64> {
        &self.c_diff
    }

    /// `β_t − β_γ`.
    pub fn beta_diff(&self) -> f64 {
        let b = self.net.beta();
        b[self.true_class] - b[self.adv_class]
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        let f = self.net.forward(z)?;
        Ok(f[self.true_class] - f[self.adv_class])
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Array1<f64>> {
        check_len("objective_gradient", self.dim(), z.len())?;
        let zv = ArrayView1::from(z);
        Ok(match self.net {
            Network::Ccp(n) => n.weighted_gradient(zv, self.c_diff.view()),
            Network::Ncp(n) => n.weighted_gradient(zv, self.c_diff.view()),
        })
    }

    pub fn value_and_gradient(&self, z: &[f64]) -> Result<(f64, Array1<f64>)> {
        Ok((self.value(z)?, self.gradient(z)?))
    }

    /// Exact dense Hessian `H_g(z)`.
    ///
    /// Allocates `d × d` per hidden unit; meant for checking the bounding
    /// code on small inputs, not for the search itself.
    pub fn hessian_dense(&self, z: &[f64]) -> Result<Array2<f64>> {
        check_len("objective_hessian_dense", self.dim(), z.len())?;
        let zv = ArrayView1::from(z);
        Ok(match self.net {
            Network::Ccp(n) => n.weighted_hessian(zv, self.c_diff.view()),
            Network::Ncp(n) => n.weighted_hessian(zv, self.c_diff.view()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    pub(crate) fn scalar_ccp(ws: &[f64], c: f64, beta: f64) -> CcpNetwork {
        CcpNetwork::new(ws.iter().map(|&w| array![[w]]).collect(), array![[c]], array![beta]).unwrap()
    }

    #[test]
    fn ccp_forward_scalar_examples() {
        let n1 = scalar_ccp(&[2.0], 3.0, 1.0);
        assert_eq!(n1.forward(&[0.5]).unwrap()[0], 4.0);
        let n2 = scalar_ccp(&[1.0, 1.0], 1.0, 0.0);
        assert_eq!(n2.forward(&[2.0]).unwrap()[0], 6.0);
        assert!(matches!(n2.forward(&[1.0, 2.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn ncp_forward_scalar_examples() {
        let mk = |b: f64| {
            NcpNetwork::new(
                vec![array![[1.0]], array![[1.0]]],
                vec![array![[1.0]]],
                vec![array![b]],
                array![[1.0]],
                array![0.0],
            )
            .unwrap()
        };
        assert_eq!(mk(0.0).forward(&[3.0]).unwrap()[0], 9.0);
        assert_eq!(mk(1.0).forward(&[3.0]).unwrap()[0], 12.0);
    }

    #[test]
    fn objective_examples() {
        let constant: Network = CcpNetwork::new(vec![array![[0.7]]], array![[0.0], [0.0]], array![10.0, 0.0])
            .unwrap()
            .into();
        let obj = Objective::new(&constant, 0, 1).unwrap();
        assert_eq!(obj.value(&[0.3]).unwrap(), 10.0);

        let dup: Network = CcpNetwork::new(
            vec![array![[1.0]], array![[1.0]]],
            array![[0.0], [1.0]],
            array![0.0, 0.0],
        )
        .unwrap()
        .into();
        let obj = Objective::new(&dup, 0, 1).unwrap();
        assert_eq!(obj.value(&[2.0]).unwrap(), -6.0);
        // g(z) = -z² - z
        assert_eq!(obj.gradient(&[0.25]).unwrap()[0], -1.5);
        assert_eq!(obj.hessian_dense(&[0.25]).unwrap()[[0, 0]], -2.0);
    }

    #[test]
    fn invalid_classes_rejected() {
        let net: Network = scalar_ccp(&[1.0], 1.0, 0.0).into();
        assert!(matches!(Objective::new(&net, 0, 0), Err(Error::InvalidClass { .. })));
        assert!(Objective::new(&net, 0, 1).is_err());
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(CcpNetwork::new(vec![], array![[1.0]], array![0.0]).is_err());
        assert!(CcpNetwork::new(vec![array![[1.0, 2.0]], array![[1.0]]], array![[1.0, 1.0]], array![0.0]).is_err());
        assert!(CcpNetwork::new(vec![array![[f64::NAN]]], array![[1.0]], array![0.0]).is_err());
        assert!(NcpNetwork::new(
            vec![array![[1.0]], array![[1.0]]],
            vec![],
            vec![],
            array![[1.0]],
            array![0.0]
        )
        .is_err());
    }

    #[test]
    fn degree_one_is_affine() {
        let net: Network = CcpNetwork::new(
            vec![array![[1.0, -2.0], [0.5, 3.0]]],
            array![[1.0, 2.0], [-1.0, 0.5]],
            array![0.1, 0.2],
        )
        .unwrap()
        .into();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let g = obj.gradient(&[0.3, 0.9]).unwrap();
        // (C_t − C_γ) W₁ᵀ
        let expected = net.weights()[0].dot(obj.c_diff());
        assert_eq!(g, expected);
        assert_eq!(obj.gradient(&[0.0, 0.0]).unwrap(), expected);
        assert!(obj.hessian_dense(&[0.3, 0.9]).unwrap().iter().all(|&h| h == 0.0));
    }
}
