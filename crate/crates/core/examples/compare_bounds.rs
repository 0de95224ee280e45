//! Mean gap between the PGD upper bound and each root lower bound, per radius.

use pnverify::commands::{compare_bounds, write_gap_csv, CompareOptions};
use pnverify::model_io::{generate_random_network, NetworkDims, NetworkKind, UniformStream};

fn main() -> pnverify::Result<()> {
    let d = 32;
    let nets = (2..=4)
        .map(|degree| {
            let dims = NetworkDims {
                degree,
                input: d,
                hidden: 25,
                output: 10,
            };
            generate_random_network(NetworkKind::Ccp, dims, degree as u64, 1.0 / (d as f64).sqrt())
        })
        .collect::<pnverify::Result<Vec<_>>>()?;
    let mut s = UniformStream::new(0);
    let points: Vec<Vec<f64>> = (0..5).map(|_| (0..d).map(|_| s.next_unit()).collect()).collect();
    let rows = compare_bounds(&nets, &points, &[0.001, 0.01, 0.05], &CompareOptions::default())?;
    write_gap_csv(&rows, std::io::stdout())
}
