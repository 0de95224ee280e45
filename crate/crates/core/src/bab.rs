//! Branch-and-bound minimization of the margin objective.
//!
//! Best-first search over boxes: the box with the smallest stored lower bound
//! is split along its widest side and both halves are bounded. Upper bounds
//! come from PGD on `g`; lower bounds come from IBP or from PGD on the
//! convexified `g_α`, with the shift computed once on the root box.
//!
//! In verification mode the search stops as soon as a feasible point with
//! `g ≤ 0` is found, and only keeps boxes whose lower bound is `≤ 0`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::alpha::{nonuniform_alpha, power_method_uniform_alpha, AlphaShift, PowerMethodConfig};
use crate::error::{Error, Result};
use crate::ibp::ibp_objective_lower;
use crate::interval::IntervalBox;
use crate::network::{argmax, Network, Objective};
use crate::optimize::{lower_bound_alpha, upper_bound, PgdConfig};

const SEED_STRIDE: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundMethod {
    Ibp,
    AlphaUniform,
    AlphaNonUniform,
}

impl BoundMethod {
    pub const ALL: [BoundMethod; 3] = [
        BoundMethod::Ibp,
        BoundMethod::AlphaUniform,
        BoundMethod::AlphaNonUniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::Ibp => "ibp",
            BoundMethod::AlphaUniform => "alpha",
            BoundMethod::AlphaNonUniform => "alpha-nu",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BabConfig {
    pub gap_tol: f64,
    pub time_limit: Option<Duration>,
    /// Cap on outer iterations; hitting it reports `Timeout`.
    pub max_iterations: Option<usize>,
    pub bound_method: BoundMethod,
    pub pgd: PgdConfig,
    pub power: PowerMethodConfig,
    pub verification_mode: bool,
    /// Bound the two children of a split on separate threads.
    pub parallel_children: bool,
    /// Keep the per-iteration bound history and discarded boxes.
    pub record_trace: bool,
}

impl Default for BabConfig {
    fn default() -> Self {
        Self {
            gap_tol: 1e-6,
            time_limit: Some(Duration::from_secs(60)),
            max_iterations: None,
            bound_method: BoundMethod::AlphaUniform,
            pgd: PgdConfig::default(),
            power: PowerMethodConfig::default(),
            verification_mode: false,
            parallel_children: false,
            record_trace: false,
        }
    }
}

impl BabConfig {
    fn validate(&self) -> Result<()> {
        if !(self.gap_tol > 0.0) {
            return Err(Error::InvalidArgument("gap_tol must be > 0".into()));
        }
        if self.time_limit.is_some_and(|t| t.is_zero()) {
            return Err(Error::InvalidArgument("time_limit must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    Verified,
    Falsified {
        counterexample: Vec<f64>,
        margin: f64,
    },
    Timeout {
        best_lb: f64,
        best_ub: f64,
        best_point: Option<Vec<f64>>,
    },
    Minimum {
        value: f64,
        point: Vec<f64>,
    },
}

/// A box discarded by the search, with the lower bound that justified it.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscardedBox {
    pub region: IntervalBox,
    pub lower_bound: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BabStats {
    pub iterations: usize,
    pub bounded_boxes: usize,
    pub pruned_boxes: usize,
    pub shift: Option<AlphaShift>,
    /// The root shift could not be computed and IBP was used instead.
    pub ibp_fallback: bool,
    /// Certified lower bound on `g` over the root box when the search stopped:
    /// the smallest bound among queued and discarded boxes.
    pub lower_bound: f64,
    /// `(global_lb, global_ub)` at the start of each outer iteration.
    pub trace: Vec<(f64, f64)>,
    pub discarded: Vec<DiscardedBox>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BabOutcome {
    pub verdict: Verdict,
    pub stats: BabStats,
}

/// Split along the widest dimension (lowest index on ties) at its midpoint.
pub fn branch(region: &IntervalBox) -> Result<(IntervalBox, IntervalBox)> {
    let widths = region.widths();
    let mut best = 0;
    for (i, &w) in widths.iter().enumerate() {
        if w > widths[best] {
            best = i;
        }
    }
    if !(widths[best] > 0.0) {
        return Err(Error::DegenerateBox);
    }
    let mid = 0.5 * (region.lo()[best] + region.hi()[best]);
    Ok(region.split_at(best, mid))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Subproblem {
    pub region: IntervalBox,
    pub lower_bound: f64,
}

#[derive(Debug)]
struct Entry {
    sub: Subproblem,
    seq: u64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest bound, then the oldest entry.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .sub
            .lower_bound
            .total_cmp(&self.sub.lower_bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Min-heap of subproblems keyed by lower bound, ties broken by insertion order.
#[derive(Debug, Default)]
pub struct SubproblemQueue {
    heap: BinaryHeap<Entry>,
    next_seq: u64,
}

impl SubproblemQueue {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, sub: Subproblem) {
        self.heap.push(Entry {
            sub,
            seq: self.next_seq,
        });
        self.next_seq += 1;
    }

    pub fn pop(&mut self) -> Option<Subproblem> {
        self.heap.pop().map(|e| e.sub)
    }

    pub fn min_lower_bound(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.sub.lower_bound)
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Drop every entry whose lower bound exceeds `bound`.
    pub fn prune_above(&mut self, bound: f64) -> Vec<Subproblem> {
        let entries = std::mem::take(&mut self.heap).into_vec();
        let mut removed = Vec::new();
        for e in entries {
            if e.sub.lower_bound > bound {
                removed.push(e.sub);
            } else {
                self.heap.push(e);
            }
        }
        removed
    }
}

struct ChildBound {
    lower: f64,
    upper: f64,
    point: Vec<f64>,
}

struct Bounder<'a> {
    obj: &'a Objective<'a>,
    cfg: &'a BabConfig,
    shift: Option<AlphaShift>,
}

impl Bounder<'_> {
    fn bound(&self, region: &IntervalBox, call: u64) -> Result<ChildBound> {
        if region.is_degenerate() {
            let point = region.center();
            let v = self.obj.value(&point)?;
            return Ok(ChildBound {
                lower: v,
                upper: v,
                point,
            });
        }
        let pgd = PgdConfig {
            seed: self.cfg.pgd.seed.wrapping_add(call.wrapping_mul(SEED_STRIDE)),
            ..self.cfg.pgd
        };
        let (point, upper) = upper_bound(self.obj, region, &pgd)?;
        let lower = match &self.shift {
            Some(shift) => lower_bound_alpha(self.obj, region, shift, &pgd)?,
            None => ibp_objective_lower(self.obj, region)?,
        };
        Ok(ChildBound { lower, upper, point })
    }
}

/// Convexification shift for the configured method on `region`, or `None`
/// for IBP. A power method that fails to converge yields `Ok(None)` with the
/// flag set so the caller can fall back to IBP.
pub fn root_shift(obj: &Objective, region: &IntervalBox, cfg: &BabConfig) -> Result<(Option<AlphaShift>, bool)> {
    match cfg.bound_method {
        BoundMethod::Ibp => Ok((None, false)),
        BoundMethod::AlphaUniform => match power_method_uniform_alpha(obj, region, &cfg.power) {
            Ok(a) => Ok((Some(AlphaShift::Uniform(a)), false)),
            Err(Error::ConvergenceFailure { .. }) => Ok((None, true)),
            Err(e) => Err(e),
        },
        BoundMethod::AlphaNonUniform => Ok((Some(nonuniform_alpha(obj, region)?), false)),
    }
}

/// Minimize `g` over `root`, or in verification mode decide whether `g > 0`
/// on all of it.
pub fn bab_minimize(obj: &Objective, root: &IntervalBox, cfg: &BabConfig) -> Result<BabOutcome> {
    cfg.validate()?;
    if root.dim() != obj.dim() {
        return Err(Error::DimensionMismatch {
            context: "bab_minimize",
            expected: obj.dim(),
            found: root.dim(),
        });
    }
    let start = Instant::now();
    let (shift, ibp_fallback) = root_shift(obj, root, cfg)?;
    let bounder = Bounder {
        obj,
        cfg,
        shift: shift.clone(),
    };
    let mut stats = BabStats {
        shift,
        ibp_fallback,
        ..Default::default()
    };

    let mut queue = SubproblemQueue::new();
    queue.push(Subproblem {
        region: root.clone(),
        lower_bound: f64::NEG_INFINITY,
    });
    let mut global_ub = f64::INFINITY;
    let mut best_point: Option<Vec<f64>> = None;
    let mut calls: u64 = 0;
    let mut discarded_min = f64::INFINITY;

    while let Some(global_lb) = queue.min_lower_bound() {
        if cfg.record_trace {
            stats.trace.push((global_lb, global_ub));
        }
        if !cfg.verification_mode && global_ub - global_lb <= cfg.gap_tol {
            break;
        }
        let out_of_time = cfg.time_limit.is_some_and(|t| start.elapsed() >= t);
        let out_of_iters = cfg.max_iterations.is_some_and(|m| stats.iterations >= m);
        if out_of_time || out_of_iters {
            stats.lower_bound = global_lb.min(discarded_min);
            return Ok(BabOutcome {
                verdict: Verdict::Timeout {
                    best_lb: stats.lower_bound,
                    best_ub: global_ub,
                    best_point,
                },
                stats,
            });
        }
        stats.iterations += 1;

        let parent = queue.pop().expect("queue is non-empty");
        let children = if parent.region.is_degenerate() {
            vec![parent.region.clone()]
        } else {
            let (a, b) = branch(&parent.region)?;
            vec![a, b]
        };
        let bounds: Vec<Result<ChildBound>> = if children.len() == 2 && cfg.parallel_children {
            let (a, b) = rayon::join(
                || bounder.bound(&children[0], calls),
                || bounder.bound(&children[1], calls + 1),
            );
            vec![a, b]
        } else {
            children
                .iter()
                .enumerate()
                .map(|(i, c)| bounder.bound(c, calls + i as u64))
                .collect()
        };
        calls += 2;

        for (region, bound) in children.into_iter().zip(bounds) {
            let bound = bound?;
            stats.bounded_boxes += 1;
            let lower = bound.lower.max(parent.lower_bound);
            if bound.upper < global_ub {
                global_ub = bound.upper;
                best_point = Some(bound.point.clone());
                for sub in queue.prune_above(global_ub) {
                    stats.pruned_boxes += 1;
                    discarded_min = discarded_min.min(sub.lower_bound);
                    if cfg.record_trace {
                        stats.discarded.push(DiscardedBox {
                            region: sub.region,
                            lower_bound: sub.lower_bound,
                        });
                    }
                }
            }
            if cfg.verification_mode && bound.upper <= 0.0 {
                let margin = obj.value(&bound.point)?;
                if margin <= 0.0 && root.contains(&bound.point) {
                    stats.lower_bound = queue
                        .min_lower_bound()
                        .unwrap_or(f64::INFINITY)
                        .min(discarded_min)
                        .min(parent.lower_bound);
                    return Ok(BabOutcome {
                        verdict: Verdict::Falsified {
                            counterexample: bound.point,
                            margin,
                        },
                        stats,
                    });
                }
            }
            let keep = lower < global_ub && (!cfg.verification_mode || lower <= 0.0);
            if keep {
                queue.push(Subproblem {
                    region,
                    lower_bound: lower,
                });
            } else {
                stats.pruned_boxes += 1;
                discarded_min = discarded_min.min(lower);
                if cfg.record_trace {
                    stats.discarded.push(DiscardedBox {
                        region,
                        lower_bound: lower,
                    });
                }
            }
        }
    }

    stats.lower_bound = queue.min_lower_bound().unwrap_or(f64::INFINITY).min(discarded_min);
    let verdict = if cfg.verification_mode {
        Verdict::Verified
    } else {
        Verdict::Minimum {
            value: global_ub,
            point: best_point.expect("at least one box was bounded"),
        }
    };
    Ok(BabOutcome { verdict, stats })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceStatus {
    Verified,
    Falsified,
    Timeout,
    Misclassified,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassResult {
    pub adv_class: usize,
    pub verdict: Verdict,
    pub stats: BabStats,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InstanceVerdict {
    pub predicted: usize,
    pub status: InstanceStatus,
    pub classes: Vec<ClassResult>,
}

/// Verify robustness of `net` at `z0` within the clamped ℓ∞ ball of radius
/// `eps`. Adversarial classes are tried in decreasing order of their output
/// at `z0`; the first falsified class ends the search.
pub fn verify_instance(
    net: &Network,
    z0: &[f64],
    eps: f64,
    label: Option<usize>,
    cfg: &BabConfig,
) -> Result<InstanceVerdict> {
    if !(eps >= 0.0) || !eps.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "eps must be finite and >= 0, got {eps}"
        )));
    }
    if let Some(i) = z0.iter().position(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::Domain { index: i });
    }
    let out = net.forward(z0)?;
    let predicted = argmax(out.view());
    if label.is_some_and(|l| l != predicted) {
        return Ok(InstanceVerdict {
            predicted,
            status: InstanceStatus::Misclassified,
            classes: Vec::new(),
        });
    }
    let root = IntervalBox::linf_ball_unit(z0, eps)?;
    let mut order: Vec<usize> = (0..out.len()).filter(|&c| c != predicted).collect();
    order.sort_by(|&a, &b| out[b].total_cmp(&out[a]));

    let cfg = BabConfig {
        verification_mode: true,
        ..cfg.clone()
    };
    let mut classes = Vec::new();
    let mut status = InstanceStatus::Verified;
    for adv in order {
        let obj = Objective::new(net, predicted, adv)?;
        let outcome = bab_minimize(&obj, &root, &cfg)?;
        match outcome.verdict {
            Verdict::Falsified { .. } => status = InstanceStatus::Falsified,
            Verdict::Timeout { .. } => status = InstanceStatus::Timeout,
            _ => {}
        }
        let done = status == InstanceStatus::Falsified;
        classes.push(ClassResult {
            adv_class: adv,
            verdict: outcome.verdict,
            stats: outcome.stats,
        });
        if done {
            break;
        }
    }
    Ok(InstanceVerdict {
        predicted,
        status,
        classes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::CcpNetwork;
    use ndarray::array;

    fn neg_quadratic() -> Network {
        CcpNetwork::new(
            vec![array![[1.0]], array![[1.0]]],
            array![[0.0], [1.0]],
            array![0.0, 0.0],
        )
        .unwrap()
        .into()
    }

    fn constant(beta: ndarray::Array1<f64>) -> Network {
        let o = beta.len();
        CcpNetwork::new(vec![array![[1.0], [1.0]]], ndarray::Array2::zeros((o, 1)), beta)
            .unwrap()
            .into()
    }

    #[test]
    fn branch_examples() {
        let b = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 4.0]).unwrap();
        let (l, r) = branch(&b).unwrap();
        assert_eq!((l.lo(), l.hi()), (&[0.0, 0.0][..], &[1.0, 2.0][..]));
        assert_eq!((r.lo(), r.hi()), (&[0.0, 2.0][..], &[1.0, 4.0][..]));
        let sq = IntervalBox::new(vec![0.0, 0.0], vec![2.0, 2.0]).unwrap();
        let (l, _) = branch(&sq).unwrap();
        assert_eq!(l.hi(), &[1.0, 2.0]);
        assert!(matches!(
            branch(&IntervalBox::point(&[0.3]).unwrap()),
            Err(Error::DegenerateBox)
        ));
    }

    #[test]
    fn queue_pops_minimum_then_oldest() {
        let mut q = SubproblemQueue::new();
        for (i, lb) in [3.0, 1.0, 2.0, 1.0].into_iter().enumerate() {
            q.push(Subproblem {
                region: IntervalBox::point(&[i as f64]).unwrap(),
                lower_bound: lb,
            });
        }
        let first = q.pop().unwrap();
        assert_eq!((first.lower_bound, first.region.lo()[0]), (1.0, 1.0));
        assert_eq!(q.pop().unwrap().region.lo()[0], 3.0);
        assert_eq!(q.prune_above(2.0).len(), 1);
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn minimizes_negative_quadratic() {
        let net = neg_quadratic();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let root = IntervalBox::new(vec![0.0], vec![1.0]).unwrap();
        for method in BoundMethod::ALL {
            let cfg = BabConfig {
                bound_method: method,
                ..Default::default()
            };
            let out = bab_minimize(&obj, &root, &cfg).unwrap();
            match out.verdict {
                Verdict::Minimum { value, point } => {
                    assert!((value + 2.0).abs() <= 1e-6, "{method:?}: {value}");
                    assert!((point[0] - 1.0).abs() < 1e-6);
                }
                v => panic!("{v:?}"),
            }
        }
    }

    #[test]
    fn constant_margin_verifies_at_root() {
        let net = constant(array![10.0, 0.0]);
        let obj = Objective::new(&net, 0, 1).unwrap();
        let root = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let cfg = BabConfig {
            verification_mode: true,
            ..Default::default()
        };
        let out = bab_minimize(&obj, &root, &cfg).unwrap();
        assert_eq!(out.verdict, Verdict::Verified);
        assert_eq!(out.stats.iterations, 1);
    }

    #[test]
    fn negative_margin_falsifies_at_root() {
        let net = constant(array![-1.0, 0.0]);
        let obj = Objective::new(&net, 0, 1).unwrap();
        let root = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let cfg = BabConfig {
            verification_mode: true,
            ..Default::default()
        };
        let out = bab_minimize(&obj, &root, &cfg).unwrap();
        match out.verdict {
            Verdict::Falsified { margin, counterexample } => {
                assert_eq!(margin, -1.0);
                assert!(root.contains(&counterexample));
            }
            v => panic!("{v:?}"),
        }
    }

    #[test]
    fn instance_level_verdicts() {
        let net = constant(array![10.0, 0.0, 0.0]);
        let v = verify_instance(&net, &[0.5, 0.5], 0.1, Some(0), &BabConfig::default()).unwrap();
        assert_eq!(v.status, InstanceStatus::Verified);
        assert_eq!(v.classes.len(), 2);
        let v = verify_instance(&net, &[0.5, 0.5], 0.1, Some(1), &BabConfig::default()).unwrap();
        assert_eq!(v.status, InstanceStatus::Misclassified);
        assert!(verify_instance(&net, &[0.5, 0.5], -0.1, None, &BabConfig::default()).is_err());
        assert!(verify_instance(&net, &[1.5, 0.5], 0.1, None, &BabConfig::default()).is_err());
    }

    #[test]
    fn zero_radius_is_decided() {
        let net = neg_quadratic();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let root = IntervalBox::point(&[0.5]).unwrap();
        let out = bab_minimize(&obj, &root, &BabConfig::default()).unwrap();
        assert_eq!(
            out.verdict,
            Verdict::Minimum {
                value: -0.75,
                point: vec![0.5]
            }
        );
    }

    #[test]
    fn iteration_cap_reports_timeout() {
        let net = neg_quadratic();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let root = IntervalBox::new(vec![0.0], vec![1.0]).unwrap();
        let cfg = BabConfig {
            max_iterations: Some(0),
            ..Default::default()
        };
        let out = bab_minimize(&obj, &root, &cfg).unwrap();
        assert!(matches!(out.verdict, Verdict::Timeout { .. }));
    }
}
