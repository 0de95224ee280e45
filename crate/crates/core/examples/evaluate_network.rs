//! Forward pass, margin objective and its derivatives for a random CCP net.

use pnverify::model_io::{generate_random_network, NetworkDims, NetworkKind};
use pnverify::Objective;

fn main() -> pnverify::Result<()> {
    let dims = NetworkDims {
        degree: 3,
        input: 4,
        hidden: 6,
        output: 3,
    };
    let net = generate_random_network(NetworkKind::Ccp, dims, 1, 0.8)?;
    let z = [0.2, 0.5, 0.9, 0.4];
    let f = net.forward(&z)?;
    println!("f(z) = {f:.4}, predicted class {}", net.predict(&z)?);

    let obj = Objective::new(&net, 0, 2)?;
    println!("g(z) = f_0 - f_2 = {:.6}", obj.value(&z)?);
    println!("grad g = {:.4}", obj.gradient(&z)?);
    println!("Hessian of g:\n{:.4}", obj.hessian_dense(&z)?);
    Ok(())
}
