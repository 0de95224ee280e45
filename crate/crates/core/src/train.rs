//! Full-batch gradient descent on softmax cross-entropy for small CCP networks.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model_io::{generate_random_network, NetworkDims, NetworkKind};
use crate::network::{CcpNetwork, Network};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub degree: usize,
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub init_scale: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            degree: 2,
            hidden: 8,
            epochs: 200,
            lr: 0.5,
            init_scale: 0.5,
            seed: 0,
        }
    }
}

/// Parameter gradients, shaped like the network parts.
#[derive(Debug, Clone, PartialEq)]
pub struct CcpGradients {
    pub weights: Vec<Array2<f64>>,
    pub c: Array2<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub network: CcpNetwork,
    /// Loss before each epoch, plus the final loss.
    pub losses: Vec<f64>,
    pub accuracy: f64,
}

fn log_softmax_loss(f: &Array1<f64>, label: usize) -> (f64, Array1<f64>) {
    let max = f.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let exps = f.mapv(|v| (v - max).exp());
    let sum = exps.sum();
    let loss = sum.ln() + max - f[label];
    let mut grad = exps / sum;
    grad[label] -= 1.0;
    (loss, grad)
}

/// Mean cross-entropy and its gradient with respect to every parameter.
pub fn loss_and_gradients(net: &CcpNetwork, data: &Dataset) -> Result<(f64, CcpGradients)> {
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let mut grads = CcpGradients {
        weights: net.weights().iter().map(|w| Array2::zeros(w.dim())).collect(),
        c: Array2::zeros(net.c().dim()),
        beta: Array1::zeros(net.beta().len()),
    };
    let scale = 1.0 / data.len() as f64;
    let mut total = 0.0;
    for s in &data.samples {
        if s.label >= net.output_dim() {
            return Err(Error::InvalidArgument(format!(
                "label {} exceeds network outputs {}",
                s.label,
                net.output_dim()
            )));
        }
        let z = Array1::from(s.features.clone());
        let pre: Vec<Array1<f64>> = net.weights().iter().map(|w| w.t().dot(&z)).collect();
        let mut xs = vec![pre[0].clone()];
        for a in &pre[1..] {
            let prev = xs.last().unwrap();
            xs.push(a * prev + prev);
        }
        let f = net.c().dot(xs.last().unwrap()) + net.beta();
        let (loss, df) = log_softmax_loss(&f, s.label);
        total += loss;
        let df = df * scale;

        let top = xs.last().unwrap();
        for (o, &g) in df.iter().enumerate() {
            grads.c.row_mut(o).scaled_add(g, top);
        }
        grads.beta += &df;
        let mut dx = net.c().t().dot(&df);
        for n in (1..pre.len()).rev() {
            let da = &dx * &xs[n - 1];
            accumulate_outer(&mut grads.weights[n], &z, &da);
            dx = &dx * &pre[n].mapv(|a| a + 1.0);
        }
        accumulate_outer(&mut grads.weights[0], &z, &dx);
    }
    Ok((total * scale, grads))
}

fn accumulate_outer(target: &mut Array2<f64>, z: &Array1<f64>, v: &Array1<f64>) {
    for (p, &zp) in z.iter().enumerate() {
        target.row_mut(p).scaled_add(zp, v);
    }
}

pub fn accuracy(net: &Network, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut correct = 0;
    for s in &data.samples {
        if net.predict(&s.features)? == s.label {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Train a CCP network from a seeded random initialization.
pub fn toy_train(data: &Dataset, cfg: &TrainConfig) -> Result<TrainReport> {
    let classes = data.num_classes();
    if classes < 2 {
        return Err(Error::InvalidArgument("training needs at least two classes".into()));
    }
    if data.dim() == 0 {
        return Err(Error::InvalidArgument("dataset has no features".into()));
    }
    let dims = NetworkDims {
        degree: cfg.degree,
        input: data.dim(),
        hidden: cfg.hidden,
        output: classes,
    };
    let Network::Ccp(mut net) = generate_random_network(NetworkKind::Ccp, dims, cfg.seed, cfg.init_scale)? else {
        unreachable!("generator returns the requested kind")
    };
    let mut losses = Vec::with_capacity(cfg.epochs + 1);
    for epoch in 0..=cfg.epochs {
        let (loss, grads) = loss_and_gradients(&net, data)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDiverged { epoch, loss });
        }
        losses.push(loss);
        if epoch == cfg.epochs || cfg.lr == 0.0 {
            continue;
        }
        let (ws, c, beta) = net.parts_mut();
        for (w, g) in ws.iter_mut().zip(&grads.weights) {
            w.scaled_add(-cfg.lr, g);
        }
        c.scaled_add(-cfg.lr, &grads.c);
        beta.scaled_add(-cfg.lr, &grads.beta);
    }
    let accuracy = accuracy(&Network::Ccp(net.clone()), data)?;
    Ok(TrainReport {
        network: net,
        losses,
        accuracy,
    })
}
