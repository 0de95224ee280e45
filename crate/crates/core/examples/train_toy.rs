//! Train a degree-2 CCP network on two blobs and report its robustness.

use pnverify::bab::BabConfig;
use pnverify::commands::{cmd_verify, VerifyOptions};
use pnverify::dataset::two_blobs;
use pnverify::train::{toy_train, TrainConfig};
use pnverify::Network;

fn main() -> pnverify::Result<()> {
    let train = two_blobs(200, 0.08, 0)?;
    let report = toy_train(&train, &TrainConfig::default())?;
    println!(
        "loss {:.4} -> {:.4}, train accuracy {:.3}",
        report.losses[0],
        report.losses.last().unwrap(),
        report.accuracy
    );
    let net: Network = report.network.into();
    let test = two_blobs(50, 0.08, 1)?;
    for eps in [0.05, 0.15, 0.25] {
        let opts = VerifyOptions {
            eps,
            bab: BabConfig {
                max_iterations: Some(200),
                ..Default::default()
            },
            ..Default::default()
        };
        let s = cmd_verify(&net, &test, &opts)?.summary;
        println!(
            "eps {eps}: verified {:.2}, upper bound {:.2}, clean {:.2}",
            s.verified_accuracy, s.upper_bound_accuracy, s.clean_accuracy
        );
    }
    Ok(())
}
