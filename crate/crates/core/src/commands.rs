//! Batch front-ends behind the command-line tool: dataset verification with
//! JSON-lines reports, bound-tightness comparison, generation and training.

use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::PowerMethodConfig;
use crate::bab::{root_shift, verify_instance, BabConfig, BoundMethod, InstanceStatus, Verdict};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::ibp::ibp_objective_lower;
use crate::interval::IntervalBox;
use crate::network::{argmax, Network, Objective};
use crate::optimize::{lower_bound_alpha, upper_bound, PgdConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOptions {
    pub eps: f64,
    pub max_instances: usize,
    pub bab: BabConfig,
    /// Worker threads for instances; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Include wall-clock times in the records (makes output run-dependent).
    pub timings: bool,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            eps: 0.01,
            max_instances: 1000,
            bab: BabConfig::default(),
            threads: None,
            timings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassRecord {
    pub adv_class: usize,
    pub verdict: Verdict,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub index: usize,
    pub label: usize,
    pub predicted: usize,
    pub status: InstanceStatus,
    pub classes: Vec<ClassRecord>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub instances: usize,
    pub verified: usize,
    pub falsified: usize,
    pub timeout: usize,
    pub misclassified: usize,
    pub clean_accuracy: f64,
    pub verified_accuracy: f64,
    /// `1 − (falsified + misclassified) / instances`.
    pub upper_bound_accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_time_ms: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub records: Vec<InstanceRecord>,
    pub summary: Summary,
}

impl RunReport {
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("JSON is UTF-8")
    }
}

pub fn summarize(records: &[InstanceRecord]) -> Summary {
    let n = records.len();
    let count = |s: InstanceStatus| records.iter().filter(|r| r.status == s).count();
    let (verified, falsified, timeout, misclassified) = (
        count(InstanceStatus::Verified),
        count(InstanceStatus::Falsified),
        count(InstanceStatus::Timeout),
        count(InstanceStatus::Misclassified),
    );
    let frac = |k: usize| if n == 0 { 0.0 } else { k as f64 / n as f64 };
    let times: Vec<f64> = records.iter().filter_map(|r| r.wall_time_ms).collect();
    Summary {
        instances: n,
        verified,
        falsified,
        timeout,
        misclassified,
        clean_accuracy: frac(n - misclassified),
        verified_accuracy: frac(verified),
        upper_bound_accuracy: 1.0 - frac(falsified + misclassified),
        mean_time_ms: (!times.is_empty()).then(|| times.iter().sum::<f64>() / times.len() as f64),
    }
}

fn verify_one(net: &Network, index: usize, data: &Dataset, opts: &VerifyOptions) -> Result<InstanceRecord> {
    let sample = &data.samples[index];
    let start = Instant::now();
    let v = verify_instance(net, &sample.features, opts.eps, Some(sample.label), &opts.bab)?;
    Ok(InstanceRecord {
        index,
        label: sample.label,
        predicted: v.predicted,
        status: v.status,
        classes: v
            .classes
            .into_iter()
            .map(|c| ClassRecord {
                adv_class: c.adv_class,
                verdict: c.verdict,
                iterations: c.stats.iterations,
            })
            .collect(),
        wall_time_ms: opts.timings.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Verify the first `max_instances` rows of `data`. Records are ordered by
/// row index regardless of thread count.
pub fn cmd_verify(net: &Network, data: &Dataset, opts: &VerifyOptions) -> Result<RunReport> {
    if data.dim() != net.input_dim() && !data.is_empty() {
        return Err(Error::DimensionMismatch {
            context: "cmd_verify dataset",
            expected: net.input_dim(),
            found: data.dim(),
        });
    }
    let n = data.len().min(opts.max_instances);
    let run =
        || -> Result<Vec<InstanceRecord>> { (0..n).into_par_iter().map(|i| verify_one(net, i, data, opts)).collect() };
    let records = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let summary = summarize(&records);
    Ok(RunReport { records, summary })
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CompareOptions {
    pub pgd: PgdConfig,
    pub power: PowerMethodConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub eps: f64,
    pub method: String,
    pub mean_gap: f64,
    pub problems: usize,
}

/// Lower bound on the root box alone, for one method.
pub fn root_lower_bound(
    obj: &Objective,
    region: &IntervalBox,
    method: BoundMethod,
    opts: &CompareOptions,
) -> Result<f64> {
    let cfg = BabConfig {
        bound_method: method,
        pgd: opts.pgd,
        power: opts.power,
        ..Default::default()
    };
    match root_shift(obj, region, &cfg)?.0 {
        Some(shift) => lower_bound_alpha(obj, region, &shift, &opts.pgd),
        None => ibp_objective_lower(obj, region),
    }
}

/// Mean `PGD upper bound − lower bound` per method and `ε` over every
/// (network, point) pair, using the strongest competing class at each point.
pub fn compare_bounds(
    nets: &[Network],
    points: &[Vec<f64>],
    eps_list: &[f64],
    opts: &CompareOptions,
) -> Result<Vec<GapRow>> {
    let mut rows = Vec::new();
    for &eps in eps_list {
        let mut sums = [0.0; 3];
        let mut problems = 0;
        for net in nets {
            for z0 in points {
                let out = net.forward(z0)?;
                let t = argmax(out.view());
                let Some(adv) = (0..out.len())
                    .filter(|&c| c != t)
                    .max_by(|&a, &b| out[a].total_cmp(&out[b]).then(b.cmp(&a)))
                else {
                    return Err(Error::InvalidArgument("comparison needs at least two classes".into()));
                };
                let obj = Objective::new(net, t, adv)?;
                let region = IntervalBox::linf_ball_unit(z0, eps)?;
                let (_, ub) = upper_bound(&obj, &region, &opts.pgd)?;
                for (sum, method) in sums.iter_mut().zip(BoundMethod::ALL) {
                    *sum += ub - root_lower_bound(&obj, &region, method, opts)?;
                }
                problems += 1;
            }
        }
        for (sum, method) in sums.iter().zip(BoundMethod::ALL) {
            rows.push(GapRow {
                eps,
                method: method.name().to_string(),
                mean_gap: if problems == 0 { 0.0 } else { sum / problems as f64 },
                problems,
            });
        }
    }
    Ok(rows)
}

pub fn write_gap_csv(rows: &[GapRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
