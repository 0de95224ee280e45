#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use pnverify::alpha::PowerMethodConfig;
use pnverify::bab::{BabConfig, BoundMethod};
use pnverify::commands::{cmd_verify, compare_bounds, write_gap_csv, CompareOptions, VerifyOptions};
use pnverify::dataset::{load_dataset_csv, save_dataset_csv, two_blobs};
use pnverify::model_io::{
    generate_random_network, load_network, save_model, ModelFile, NetworkDims, NetworkKind, UniformStream,
};
use pnverify::optimize::PgdConfig;
use pnverify::train::{toy_train, TrainConfig};

#[derive(Parser)]
#[command(
    name = "pnverify",
    version,
    about = "Robustness verification for polynomial networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bound {
    Ibp,
    Alpha,
    AlphaNu,
}

impl From<Bound> for BoundMethod {
    fn from(b: Bound) -> Self {
        match b {
            Bound::Ibp => BoundMethod::Ibp,
            Bound::Alpha => BoundMethod::AlphaUniform,
            Bound::AlphaNu => BoundMethod::AlphaNonUniform,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Ccp,
    Ncp,
}

#[derive(Subcommand)]
enum Command {
    /// Verify every dataset row within an l-inf ball; writes JSON lines.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        eps: f64,
        /// Seconds per (instance, class) problem.
        #[arg(long, default_value_t = 60.0)]
        time_limit: f64,
        #[arg(long)]
        max_iterations: Option<usize>,
        #[arg(long, value_enum, default_value = "alpha")]
        bound: Bound,
        #[arg(long, default_value_t = 1000)]
        max_instances: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
        /// Record per-instance wall time.
        #[arg(long)]
        timings: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Mean gap between the PGD upper bound and each lower-bounding method.
    CompareBounds {
        #[arg(long, required = true, num_args = 1..)]
        model: Vec<PathBuf>,
        #[arg(long, value_delimiter = ',', required = true)]
        eps: Vec<f64>,
        /// Points to bound around; random points are used when omitted.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a random network with weights uniform in [-scale, scale].
    Gen {
        #[arg(long, value_enum, default_value = "ccp")]
        kind: Kind,
        #[arg(long)]
        degree: usize,
        #[arg(long)]
        input: usize,
        #[arg(long)]
        hidden: usize,
        #[arg(long)]
        output: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a two-class 2-D blob dataset.
    Blobs {
        #[arg(long, default_value_t = 200)]
        n: usize,
        #[arg(long, default_value_t = 0.08)]
        spread: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a small CCP network on a CSV dataset.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 2)]
        degree: usize,
        #[arg(long, default_value_t = 8)]
        hidden: usize,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long, default_value_t = 0.5)]
        lr: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn output(path: Option<&PathBuf>) -> pnverify::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(io::stdout().lock()),
    })
}

fn run(cli: Cli) -> pnverify::Result<()> {
    match cli.command {
        Command::Verify {
            model,
            data,
            eps,
            time_limit,
            max_iterations,
            bound,
            max_instances,
            seed,
            threads,
            timings,
            out,
        } => {
            if !(time_limit > 0.0) {
                return Err(pnverify::Error::InvalidArgument("--time-limit must be > 0".into()));
            }
            let net = load_network(&model)?;
            let data = load_dataset_csv(&data)?;
            let opts = VerifyOptions {
                eps,
                max_instances,
                threads,
                timings,
                bab: BabConfig {
                    time_limit: Some(Duration::from_secs_f64(time_limit)),
                    max_iterations,
                    bound_method: bound.into(),
                    pgd: PgdConfig {
                        seed,
                        ..Default::default()
                    },
                    power: PowerMethodConfig {
                        seed,
                        ..Default::default()
                    },
                    ..Default::default()
                },
            };
            let report = cmd_verify(&net, &data, &opts)?;
            let mut w = output(out.as_ref())?;
            report.write_jsonl(&mut w)?;
            w.flush()?;
            eprintln!("{}", serde_json::to_string_pretty(&report.summary)?);
        }
        Command::CompareBounds {
            model,
            eps,
            data,
            samples,
            seed,
            out,
        } => {
            let nets = model.iter().map(load_network).collect::<pnverify::Result<Vec<_>>>()?;
            let d = nets[0].input_dim();
            let points: Vec<Vec<f64>> = match data {
                Some(p) => load_dataset_csv(p)?
                    .samples
                    .into_iter()
                    .take(samples)
                    .map(|s| s.features)
                    .collect(),
                None => {
                    let mut s = UniformStream::new(seed);
                    (0..samples).map(|_| (0..d).map(|_| s.next_unit()).collect()).collect()
                }
            };
            let opts = CompareOptions {
                pgd: PgdConfig {
                    seed,
                    ..Default::default()
                },
                power: PowerMethodConfig {
                    seed,
                    ..Default::default()
                },
            };
            let rows = compare_bounds(&nets, &points, &eps, &opts)?;
            write_gap_csv(&rows, output(out.as_ref())?)?;
        }
        Command::Gen {
            kind,
            degree,
            input,
            hidden,
            output: o,
            seed,
            scale,
            out,
        } => {
            let kind = match kind {
                Kind::Ccp => NetworkKind::Ccp,
                Kind::Ncp => NetworkKind::Ncp,
            };
            let dims = NetworkDims {
                degree,
                input,
                hidden,
                output: o,
            };
            let net = generate_random_network(kind, dims, seed, scale)?;
            let file = ModelFile::new(net).with_meta("seed", seed).with_meta("scale", scale);
            save_model(&file, out)?;
        }
        Command::Blobs { n, spread, seed, out } => save_dataset_csv(&two_blobs(n, spread, seed)?, out)?,
        Command::Train {
            data,
            degree,
            hidden,
            epochs,
            lr,
            seed,
            out,
        } => {
            let data = load_dataset_csv(&data)?;
            let cfg = TrainConfig {
                degree,
                hidden,
                epochs,
                lr,
                seed,
                ..Default::default()
            };
            let report = toy_train(&data, &cfg)?;
            let file = ModelFile::new(report.network)
                .with_meta("seed", seed)
                .with_meta("train_accuracy", report.accuracy)
                .with_meta("final_loss", report.losses.last().copied().unwrap_or(f64::NAN));
            save_model(&file, out)?;
            eprintln!("train accuracy {:.4}", report.accuracy);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
