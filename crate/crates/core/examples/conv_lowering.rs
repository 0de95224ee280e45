//! Lower a convolutional CCP network to its dense equivalent.

use ndarray::{Array1, Array2};
use pnverify::conv::{ConvCcpNetwork, ConvLayerSpec};
use pnverify::model_io::UniformStream;
use pnverify::Network;

fn main() -> pnverify::Result<()> {
    let spec = ConvLayerSpec {
        in_channels: 1,
        out_channels: 2,
        kernel_h: 3,
        kernel_w: 3,
        stride: 1,
        padding: 1,
        input_h: 5,
        input_w: 5,
    };
    let mut s = UniformStream::new(3);
    let mut kernel = || {
        (0..spec.kernel_len())
            .map(|_| s.next_symmetric(0.5))
            .collect::<Vec<_>>()
    };
    let layers = vec![(spec, kernel()), (spec, kernel())];
    let k = spec.output_len();
    let c = Array2::from_shape_fn((2, k), |(o, i)| if i % 2 == o { 0.1 } else { -0.1 });
    let conv = ConvCcpNetwork::new(layers, c, Array1::zeros(2))?;
    let dense: Network = conv.to_dense()?.into();
    println!(
        "input {} -> hidden {} (dense W1 is {:?})",
        dense.input_dim(),
        dense.hidden_dim(),
        dense.weights()[0].dim()
    );
    let nonzero = dense.weights()[0].iter().filter(|v| **v != 0.0).count();
    println!("W1 has {nonzero} non-zero entries of {}", dense.weights()[0].len());
    println!("f(0.5) = {:.5}", dense.forward(&vec![0.5; dense.input_dim()])?);
    Ok(())
}
