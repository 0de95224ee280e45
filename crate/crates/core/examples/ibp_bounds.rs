//! Interval bounds on outputs, gradients and Hessian over an l-inf ball.

use pnverify::ibp::{ibp_hessian_bounds_dense, ibp_objective_bounds, ibp_objective_gradient_bounds, ibp_output_bounds};
use pnverify::model_io::{generate_random_network, NetworkDims, NetworkKind};
use pnverify::{IntervalBox, Objective};

fn main() -> pnverify::Result<()> {
    let dims = NetworkDims {
        degree: 3,
        input: 3,
        hidden: 5,
        output: 2,
    };
    let net = generate_random_network(NetworkKind::Ncp, dims, 4, 1.0)?;
    let region = IntervalBox::linf_ball_unit(&[0.5, 0.3, 0.7], 0.05)?;
    let out = ibp_output_bounds(&net, &region)?;
    for o in 0..out.len() {
        println!("f_{o} in [{:.4}, {:.4}]", out.lo[o], out.hi[o]);
    }

    let obj = Objective::new(&net, 0, 1)?;
    let g = ibp_objective_bounds(&obj, &region)?;
    println!(
        "g in [{:.4}, {:.4}], value at centre {:.4}",
        g.lo,
        g.hi,
        obj.value(&region.center())?
    );
    let grad = ibp_objective_gradient_bounds(&obj, &region)?;
    println!("grad lower {:.3}\ngrad upper {:.3}", grad.lo, grad.hi);
    let h = ibp_hessian_bounds_dense(&obj, &region)?;
    println!("Hessian lower\n{:.3}\nHessian upper\n{:.3}", h.lo, h.hi);
    Ok(())
}
