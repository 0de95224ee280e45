//! Robustness verdicts for one input over a range of radii.

use pnverify::bab::{verify_instance, BabConfig};
use pnverify::dataset::two_blobs;
use pnverify::train::{toy_train, TrainConfig};
use pnverify::Network;

fn main() -> pnverify::Result<()> {
    let data = two_blobs(200, 0.08, 0)?;
    let net: Network = toy_train(&data, &TrainConfig::default())?.network.into();
    let z0 = [0.35, 0.3];
    for eps in [0.05, 0.1, 0.2, 0.3] {
        let v = verify_instance(&net, &z0, eps, None, &BabConfig::default())?;
        print!("eps {eps:<5} predicted {} -> {:?}", v.predicted, v.status);
        for c in &v.classes {
            print!("  [class {}: {:?}]", c.adv_class, c.verdict);
        }
        println!();
    }
    Ok(())
}
