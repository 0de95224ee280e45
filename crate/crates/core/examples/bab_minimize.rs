//! Global minimum of a margin over a box by branch and bound, with each
//! bounding method.

use std::time::Instant;

use pnverify::bab::{bab_minimize, BabConfig, BoundMethod};
use pnverify::model_io::{generate_random_network, NetworkDims, NetworkKind};
use pnverify::{IntervalBox, Objective};

fn main() -> pnverify::Result<()> {
    let dims = NetworkDims {
        degree: 3,
        input: 2,
        hidden: 6,
        output: 2,
    };
    let net = generate_random_network(NetworkKind::Ccp, dims, 5, 1.0)?;
    let obj = Objective::new(&net, 0, 1)?;
    let region = IntervalBox::linf_ball_unit(&[0.4, 0.6], 0.1)?;
    for method in BoundMethod::ALL {
        let cfg = BabConfig {
            bound_method: method,
            gap_tol: 1e-4,
            ..Default::default()
        };
        let start = Instant::now();
        let out = bab_minimize(&obj, &region, &cfg)?;
        println!(
            "{:>8}: {:?} after {} iterations ({} boxes bounded) in {:.1?}",
            method.name(),
            out.verdict,
            out.stats.iterations,
            out.stats.bounded_boxes,
            start.elapsed()
        );
    }
    Ok(())
}
