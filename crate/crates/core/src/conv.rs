//! Lowering of 2-D convolutions to dense (Toeplitz-structured) matrices.
//!
//! Images are flattened channel-major (`c, h, w`, row-major) and kernels are
//! laid out as `[out_channel][in_channel][kh][kw]`. The convolution is a
//! cross-correlation with zero padding.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::CcpNetwork;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvLayerSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel_h: usize,
    pub kernel_w: usize,
    pub stride: usize,
    pub padding: usize,
    pub input_h: usize,
    pub input_w: usize,
}

impl ConvLayerSpec {
    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::Convolution("channel counts must be positive".into()));
        }
        if self.kernel_h == 0 || self.kernel_w == 0 || self.stride == 0 {
            return Err(Error::Convolution("kernel size and stride must be positive".into()));
        }
        if self.input_h + 2 * self.padding < self.kernel_h || self.input_w + 2 * self.padding < self.kernel_w {
            return Err(Error::Convolution(format!(
                "kernel {}x{} larger than padded input {}x{}",
                self.kernel_h,
                self.kernel_w,
                self.input_h + 2 * self.padding,
                self.input_w + 2 * self.padding
            )));
        }
        Ok(())
    }

    pub fn output_h(&self) -> usize {
        (self.input_h + 2 * self.padding - self.kernel_h) / self.stride + 1
    }

    pub fn output_w(&self) -> usize {
        (self.input_w + 2 * self.padding - self.kernel_w) / self.stride + 1
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.input_h * self.input_w
    }

    pub fn output_len(&self) -> usize {
        self.out_channels * self.output_h() * self.output_w()
    }

    pub fn kernel_len(&self) -> usize {
        self.out_channels * self.in_channels * self.kernel_h * self.kernel_w
    }
}

/// Dense matrix `M` with `M · flatten(image) = flatten(conv(image))`.
pub fn conv_to_dense(spec: &ConvLayerSpec, kernel: &[f64]) -> Result<Array2<f64>> {
    spec.validate()?;
    if kernel.len() != spec.kernel_len() {
        return Err(Error::Convolution(format!(
            "kernel has {} weights, spec needs {}",
            kernel.len(),
            spec.kernel_len()
        )));
    }
    let (oh, ow) = (spec.output_h(), spec.output_w());
    let (ih, iw) = (spec.input_h as isize, spec.input_w as isize);
    let mut m = Array2::zeros((spec.output_len(), spec.input_len()));
    for oc in 0..spec.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let row = (oc * oh + oy) * ow + ox;
                for ic in 0..spec.in_channels {
                    for ky in 0..spec.kernel_h {
                        let y = (oy * spec.stride + ky) as isize - spec.padding as isize;
                        if y < 0 || y >= ih {
                            continue;
                        }
                        for kx in 0..spec.kernel_w {
                            let x = (ox * spec.stride + kx) as isize - spec.padding as isize;
                            if x < 0 || x >= iw {
                                continue;
                            }
                            let kidx = ((oc * spec.in_channels + ic) * spec.kernel_h + ky) * spec.kernel_w + kx;
                            let col = (ic * spec.input_h + y as usize) * spec.input_w + x as usize;
                            m[[row, col]] += kernel[kidx];
                        }
                    }
                }
            }
        }
    }
    Ok(m)
}

/// A CCP network whose input maps `W_[n]ᵀ z` are convolutions.
///
/// Every degree must produce the same flattened hidden size `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvCcpNetwork {
    pub layers: Vec<(ConvLayerSpec, Vec<f64>)>,
    pub c: Array2<f64>,
    pub beta: Array1<f64>,
}

impl ConvCcpNetwork {
    pub fn new(layers: Vec<(ConvLayerSpec, Vec<f64>)>, c: Array2<f64>, beta: Array1<f64>) -> Result<Self> {
        let net = Self { layers, c, beta };
        net.to_dense()?;
        Ok(net)
    }

    /// Equivalent dense CCP network with `W_[n] = M_nᵀ`.
    pub fn to_dense(&self) -> Result<CcpNetwork> {
        if self.layers.is_empty() {
            return Err(Error::InvalidNetwork("no convolution layers".into()));
        }
        let first = self.layers[0].0;
        let mut weights = Vec::with_capacity(self.layers.len());
        for (spec, kernel) in &self.layers {
            if spec.input_len() != first.input_len() || spec.output_len() != first.output_len() {
                return Err(Error::Convolution(
                    "all degrees must share input and output sizes".into(),
                ));
            }
            weights.push(conv_to_dense(spec, kernel)?.reversed_axes());
        }
        CcpNetwork::new(weights, self.c.clone(), self.beta.clone())
    }
}
