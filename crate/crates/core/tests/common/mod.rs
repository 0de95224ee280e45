#![allow(dead_code)]

use ndarray::{Array1, Array2};
use pnverify::model_io::{generate_random_network, NetworkDims, NetworkKind, UniformStream};
use pnverify::{IntervalBox, Network};

pub fn dims(degree: usize, input: usize, hidden: usize, output: usize) -> NetworkDims {
    NetworkDims {
        degree,
        input,
        hidden,
        output,
    }
}

/// Random network with dimensions drawn from the seed.
pub fn random_net(kind: NetworkKind, seed: u64, max_d: usize, max_k: usize, max_n: usize) -> Network {
    let mut s = UniformStream::new(seed ^ 0xA5A5_0000);
    let mut pick = |hi: usize| 1 + (s.next_unit() * hi as f64) as usize % hi;
    let d = pick(max_d);
    let k = pick(max_k);
    let n = pick(max_n);
    let o = 1 + pick(3);
    generate_random_network(kind, dims(n, d, k, o), seed, 1.0).unwrap()
}

/// Random sub-box of the unit cube around a random centre.
pub fn random_box(d: usize, seed: u64, max_radius: f64) -> IntervalBox {
    let mut s = UniformStream::new(seed.wrapping_mul(31).wrapping_add(7));
    let centre: Vec<f64> = (0..d).map(|_| s.next_unit()).collect();
    let eps = 0.01 + (max_radius - 0.01) * s.next_unit();
    IntervalBox::linf_ball_unit(&centre, eps).unwrap()
}

pub fn random_vector(d: usize, seed: u64) -> Array1<f64> {
    let mut s = UniformStream::new(seed);
    Array1::from_shape_fn(d, |_| s.next_symmetric(1.0))
}

pub fn max_abs(a: &Array2<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn max_abs_vec(a: &Array1<f64>) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// `max|a − b| / max(1, max|b|)`.
pub fn rel_err_vec(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    max_abs_vec(&(a - b)) / max_abs_vec(b).max(1.0)
}

pub fn rel_err_mat(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    max_abs(&(a - b)) / max_abs(b).max(1.0)
}

/// Soundness tolerance for comparing round-to-nearest bounds with samples.
pub fn slack(v: f64) -> f64 {
    1e-9 * (1.0 + v.abs())
}

/// Hidden states `x¹..xᴺ` and their Jacobians (`k × d`), by forward mode.
pub fn hidden_with_jacobians(net: &Network, z: &[f64]) -> (Vec<Array1<f64>>, Vec<Array2<f64>>) {
    let zv = Array1::from(z.to_vec());
    let ws = net.weights();
    let mut xs = vec![ws[0].t().dot(&zv)];
    let mut js = vec![ws[0].t().to_owned()];
    for n in 1..ws.len() {
        let a = ws[n].t().dot(&zv);
        let wt = ws[n].t();
        let (carry, carry_j, factor) = match net {
            Network::Ccp(_) => (xs[n - 1].clone(), js[n - 1].clone(), a.mapv(|v| v + 1.0)),
            Network::Ncp(ncp) => {
                let st = ncp.s()[n - 1].t();
                (st.dot(&xs[n - 1]) + &ncp.b()[n - 1], st.dot(&js[n - 1]), a.clone())
            }
        };
        let x = &factor * &carry;
        let mut j = Array2::zeros(js[0].dim());
        for i in 0..x.len() {
            let row = &wt.row(i) * carry[i] + &(&carry_j.row(i) * factor[i]);
            j.row_mut(i).assign(&row);
        }
        xs.push(x);
        js.push(j);
    }
    (xs, js)
}
