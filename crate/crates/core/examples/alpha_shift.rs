//! Uniform and per-coordinate convexifying shifts, and the lower bounds they
//! certify compared with IBP.

use pnverify::alpha::{nonuniform_alpha, power_method_uniform_alpha, AlphaShift, PowerMethodConfig};
use pnverify::ibp::ibp_objective_lower;
use pnverify::model_io::{generate_random_network, NetworkDims, NetworkKind};
use pnverify::optimize::{lower_bound_alpha, upper_bound, PgdConfig};
use pnverify::{IntervalBox, Objective};

fn main() -> pnverify::Result<()> {
    let dims = NetworkDims {
        degree: 3,
        input: 8,
        hidden: 10,
        output: 2,
    };
    let net = generate_random_network(NetworkKind::Ccp, dims, 11, 0.4)?;
    let obj = Objective::new(&net, 0, 1)?;
    let region = IntervalBox::linf_ball_unit(&[0.5; 8], 0.1)?;
    let pgd = PgdConfig::default();

    let (_, ub) = upper_bound(&obj, &region, &pgd)?;
    println!("PGD upper bound      {ub:.6}");
    println!("IBP lower bound      {:.6}", ibp_objective_lower(&obj, &region)?);

    let alpha = power_method_uniform_alpha(&obj, &region, &PowerMethodConfig::default())?;
    let uniform = AlphaShift::Uniform(alpha);
    println!(
        "uniform alpha {alpha:.4}: lower bound {:.6}",
        lower_bound_alpha(&obj, &region, &uniform, &pgd)?
    );

    let per_coord = nonuniform_alpha(&obj, &region)?;
    println!(
        "per-coordinate alpha (max {:.4}): lower bound {:.6}",
        per_coord.max_coefficient(),
        lower_bound_alpha(&obj, &region, &per_coord, &pgd)?
    );
    Ok(())
}
