//! Acceptance suite. Prints one `criterion N: PASS|FAIL` line per criterion
//! and exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use common::*;
use ndarray::Array2;
use pnverify::alpha::{
    alpha_objective_value, lh_matvec, nonuniform_alpha, power_method_uniform_alpha, AlphaShift, PowerMethodConfig,
};
use pnverify::bab::{bab_minimize, verify_instance, BabConfig, BoundMethod, Verdict};
use pnverify::commands::{cmd_verify, compare_bounds, CompareOptions, VerifyOptions};
use pnverify::dataset::{two_blobs, Dataset};
use pnverify::ibp::{
    ibp_gradient_bounds, ibp_hessian_bounds_dense, ibp_hidden_bounds, ibp_objective_bounds,
    ibp_objective_gradient_bounds, ibp_output_bounds, ibp_output_gradient_bounds,
};
use pnverify::model_io::{generate_random_network, NetworkKind};
use pnverify::optimize::{lower_bound_alpha, PgdConfig};
use pnverify::oracle::{
    dense_lh, dense_mn_matrix, dense_spectral_radius, finite_diff_gradient, finite_diff_hessian, grid_minimize,
    min_eigenvalue, sample_box, GridSpec,
};
use pnverify::train::{toy_train, TrainConfig};
use pnverify::{IntervalBox, Network, Objective};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(lo: f64, v: f64, hi: f64) -> bool {
    lo - slack(lo) <= v && v <= hi + slack(hi)
}

/// Random instance with at least two outputs.
fn instance(kind: NetworkKind, seed: u64, max_d: usize, max_k: usize, max_n: usize) -> Network {
    let net = random_net(kind, seed, max_d, max_k, max_n);
    if net.output_dim() >= 2 {
        return net;
    }
    generate_random_network(
        kind,
        dims(net.degree(), net.input_dim(), net.hidden_dim(), 2),
        seed,
        1.0,
    )
    .unwrap()
}

fn small_instances(count: u64, max_d: usize) -> Vec<(Network, IntervalBox)> {
    (0..count)
        .map(|seed| {
            let kind = if seed % 2 == 0 {
                NetworkKind::Ccp
            } else {
                NetworkKind::Ncp
            };
            let net = instance(kind, 1_000 + seed, max_d, 8, 4);
            let b = random_box(net.input_dim(), seed, 0.3);
            (net, b)
        })
        .collect()
}

fn derivatives() -> Outcome {
    let start = Instant::now();
    let (mut worst_g, mut worst_h): (f64, f64) = (0.0, 0.0);
    let nets = (0..100u64)
        .map(|s| instance(NetworkKind::Ccp, s, 8, 8, 4))
        .chain((0..50u64).map(|s| instance(NetworkKind::Ncp, 500 + s, 8, 8, 4)));
    for (i, net) in nets.enumerate() {
        let obj = Objective::new(&net, 0, 1).unwrap();
        let z = random_box(net.input_dim(), i as u64, 0.3).center();
        let g = obj.gradient(&z).unwrap();
        let fd = finite_diff_gradient(|p| obj.value(p), &z, 1e-5).unwrap();
        worst_g = worst_g.max(rel_err_vec(&fd, &g));
        let h = obj.hessian_dense(&z).unwrap();
        let fdh = finite_diff_hessian(|p| obj.gradient(p), &z, 1e-4).unwrap();
        worst_h = worst_h.max(rel_err_mat(&fdh, &h));
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst_g <= 1e-5 && worst_h <= 1e-4 && secs < 60.0,
        format!("150 nets, max gradient rel err {worst_g:.1e} (<= 1e-5), Hessian {worst_h:.1e} (<= 1e-4), {secs:.1}s (< 60s)"),
    )
}

fn ibp_soundness() -> Outcome {
    let start = Instant::now();
    let mut violations = 0usize;
    let mut checks = 0usize;
    let mut count = |ok: bool| {
        checks += 1;
        violations += !ok as usize;
    };
    for (ci, (net, b)) in small_instances(50, 6).iter().enumerate() {
        let obj = Objective::new(net, 0, 1).unwrap();
        let hidden = ibp_hidden_bounds(net, b).unwrap();
        let out = ibp_output_bounds(net, b).unwrap();
        let grads = ibp_gradient_bounds(net, b).unwrap();
        let out_grad = ibp_output_gradient_bounds(net, b).unwrap();
        let gb = ibp_objective_bounds(&obj, b).unwrap();
        let ggb = ibp_objective_gradient_bounds(&obj, b).unwrap();
        let hess = ibp_hessian_bounds_dense(&obj, b).unwrap();
        for z in sample_box(b, 10_000, ci as u64) {
            let (xs, js) = hidden_with_jacobians(net, &z);
            for n in 0..xs.len() {
                for i in 0..xs[n].len() {
                    count(within(hidden.post[n].lo[i], xs[n][i], hidden.post[n].hi[i]));
                    for p in 0..z.len() {
                        count(within(grads[n].lo[[i, p]], js[n][[i, p]], grads[n].hi[[i, p]]));
                    }
                }
            }
            let f = net.forward(&z).unwrap();
            let jf = net.c().dot(js.last().unwrap());
            for o in 0..f.len() {
                count(within(out.lo[o], f[o], out.hi[o]));
                for p in 0..z.len() {
                    count(within(out_grad.lo[[o, p]], jf[[o, p]], out_grad.hi[[o, p]]));
                }
            }
            count(within(gb.lo, obj.value(&z).unwrap(), gb.hi));
            let grad = obj.gradient(&z).unwrap();
            for p in 0..z.len() {
                count(within(ggb.lo[p], grad[p], ggb.hi[p]));
            }
            let h = obj.hessian_dense(&z).unwrap();
            for ((&lo, &hi), &v) in hess.lo.iter().zip(&hess.hi).zip(&h) {
                count(within(lo, v, hi));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        violations == 0 && secs < 120.0,
        format!("50 configs x 10^4 samples, {violations} violations in {checks} checks, {secs:.1}s (< 120s)"),
    )
}

fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let cov: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let var: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    cov / var
}

fn rank_one_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let kind = if seed % 2 == 0 {
            NetworkKind::Ccp
        } else {
            NetworkKind::Ncp
        };
        let net = instance(kind, 2_000 + seed, 8, 8, 4);
        let obj = Objective::new(&net, 0, 1).unwrap();
        let b = random_box(net.input_dim(), seed, 0.4);
        let v = random_vector(net.input_dim(), seed);
        let dense = dense_lh(&obj, &b).unwrap().dot(&v);
        let fast = lh_matvec(&obj, &b, v.as_slice().unwrap()).unwrap();
        worst = worst.max(max_abs_vec(&(&dense - &fast)));
    }

    let ds = [1024usize, 2048, 4096, 8192, 16384, 32768];
    let mut times = Vec::new();
    for &d in &ds {
        let net = generate_random_network(NetworkKind::Ccp, dims(3, d, 16, 2), 7, 1.0 / (d as f64).sqrt()).unwrap();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let b = random_box(d, 3, 0.05);
        let v = random_vector(d, 4).to_vec();
        let reps = (65_536 / d).max(2);
        let best = (0..7)
            .map(|_| {
                let t = Instant::now();
                for _ in 0..reps {
                    std::hint::black_box(lh_matvec(&obj, &b, &v).unwrap());
                }
                t.elapsed().as_secs_f64() / reps as f64
            })
            .fold(f64::INFINITY, f64::min);
        times.push(best);
    }
    let xs: Vec<f64> = ds.iter().map(|&d| d as f64).collect();
    let slope = log_log_slope(&xs, &times);
    outcome(
        worst <= 1e-9 && (0.8..=1.3).contains(&slope),
        format!(
            "max |dense - matvec| {worst:.1e} (<= 1e-9) on 100 triples; log-log slope {slope:.3} in [0.8, 1.3] for d = 1024..32768"
        ),
    )
}

fn spectral_bound() -> Outcome {
    let cfg = PowerMethodConfig::default();
    let (mut worst_rel, mut worst_eig): (f64, f64) = (0.0, f64::INFINITY);
    let mut failures = 0;
    let instances = small_instances(40, 8);
    for (i, (net, b)) in instances.iter().enumerate() {
        let obj = Objective::new(net, 0, 1).unwrap();
        let rho = dense_spectral_radius(&dense_lh(&obj, b).unwrap()).unwrap();
        let alpha = match power_method_uniform_alpha(&obj, b, &cfg) {
            Ok(a) => a,
            Err(pnverify::Error::ConvergenceFailure { .. }) => {
                failures += 1;
                continue;
            }
            Err(e) => panic!("{e}"),
        };
        worst_rel = worst_rel.max((2.0 * alpha - rho).abs() / rho.max(f64::MIN_POSITIVE));
        let shift = Array2::<f64>::eye(obj.dim()) * (2.0 * alpha);
        for z in sample_box(b, 1_000, i as u64) {
            let h = obj.hessian_dense(&z).unwrap() + &shift;
            worst_eig = worst_eig.min(min_eigenvalue(&h).unwrap());
        }
    }
    outcome(
        failures == 0 && worst_rel <= 1e-4 && worst_eig >= -1e-6,
        format!(
            "{} instances (d <= 8): max rel err of 2*alpha vs dense rho {worst_rel:.1e} (<= 1e-4), \
             min lambda_min(H + 2 alpha I) {worst_eig:.2e} (>= -1e-6) over 10^3 z each, {failures} non-converged",
            instances.len()
        ),
    )
}

fn nonuniform_validity() -> Outcome {
    let mut worst_eig = f64::INFINITY;
    let mut dominance_violations = 0;
    for (i, (net, b)) in small_instances(40, 8).iter().enumerate() {
        let obj = Objective::new(net, 0, 1).unwrap();
        let shift = nonuniform_alpha(&obj, b).unwrap();
        let d = obj.dim();
        let diag = Array2::from_diag(&ndarray::Array1::from_shape_fn(d, |j| 2.0 * shift.coefficient(j)));
        let mn = dense_mn_matrix(&obj, b).unwrap();
        for z in sample_box(b, 1_000, 77 + i as u64) {
            let h = obj.hessian_dense(&z).unwrap();
            worst_eig = worst_eig.min(min_eigenvalue(&(&h + &diag)).unwrap());
            dominance_violations += h.iter().zip(&mn).filter(|(v, m)| v.abs() > **m + slack(**m)).count();
        }
    }
    outcome(
        worst_eig >= -1e-6 && dominance_violations == 0,
        format!(
            "40 instances x 10^3 z: min lambda_min(H + 2 diag(alpha)) {worst_eig:.2e} (>= -1e-6), \
             {dominance_violations} entries where |H| exceeds the mn bound"
        ),
    )
}

fn under_bounding() -> Outcome {
    let mut violations = 0usize;
    let mut cert_violations = 0usize;
    let pgd = PgdConfig::default();
    for (i, (net, b)) in small_instances(50, 6).iter().enumerate() {
        let obj = Objective::new(net, 0, 1).unwrap();
        let mut shifts = vec![nonuniform_alpha(&obj, b).unwrap()];
        if let Ok(a) = power_method_uniform_alpha(&obj, b, &PowerMethodConfig::default()) {
            shifts.push(AlphaShift::Uniform(a));
        }
        let samples = sample_box(b, 10_000, 300 + i as u64);
        let values: Vec<f64> = samples.iter().map(|z| obj.value(z).unwrap()).collect();
        let min_sampled = values.iter().cloned().fold(f64::INFINITY, f64::min);
        for shift in &shifts {
            for (z, &g) in samples.iter().zip(&values) {
                violations += (alpha_objective_value(&obj, shift, b, z).unwrap() > g) as usize;
            }
            let lb = lower_bound_alpha(&obj, b, shift, &pgd).unwrap();
            cert_violations += (lb > min_sampled) as usize;
        }
    }
    outcome(
        violations == 0 && cert_violations == 0,
        format!(
            "50 instances x 10^4 samples x both shifts: {violations} points with g_alpha > g, \
             {cert_violations} certified lower bounds above a sampled value"
        ),
    )
}

fn bab_completeness() -> Outcome {
    let start = Instant::now();
    let root = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
    let grid = GridSpec {
        resolution: 401,
        polish: true,
    };
    let cfg = BabConfig {
        time_limit: None,
        ..Default::default()
    };
    let (mut worst, mut lb_above, mut not_minimum) = (0.0f64, 0, 0);
    let nets = (0..50u64).map(|s| (2, s)).chain((0..25u64).map(|s| (3, 100 + s)));
    for (degree, seed) in nets {
        let net = generate_random_network(NetworkKind::Ccp, dims(degree, 2, 8, 3), 3_000 + seed, 1.0).unwrap();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let oracle = grid_minimize(&obj, &root, &grid).unwrap();
        let out = bab_minimize(&obj, &root, &cfg).unwrap();
        match out.verdict {
            Verdict::Minimum { value, .. } => worst = worst.max((value - oracle.value).abs()),
            _ => not_minimum += 1,
        }
        lb_above += (out.stats.lower_bound > oracle.value) as usize;
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worst <= 1e-3 && lb_above == 0 && not_minimum == 0 && secs < 600.0,
        format!(
            "75 nets (d = 2): max |BaB - grid| {worst:.1e} (<= 1e-3), {lb_above} certified bounds above the oracle, \
             {not_minimum} unfinished, {secs:.1}s (< 600s)"
        ),
    )
}

struct Toy {
    net: Network,
    test: Dataset,
}

fn toy() -> Toy {
    let train = two_blobs(200, 0.08, 0).unwrap();
    let report = toy_train(&train, &TrainConfig::default()).unwrap();
    Toy {
        net: report.network.into(),
        test: two_blobs(30, 0.08, 1).unwrap(),
    }
}

const EPS_SWEEP: [f64; 10] = [0.005, 0.01, 0.02, 0.04, 0.06, 0.08, 0.1, 0.15, 0.2, 0.3];

fn verification_consistency(toy: &Toy) -> Outcome {
    let cfg = BabConfig {
        time_limit: Some(Duration::from_secs(20)),
        ..Default::default()
    };
    let grid = GridSpec {
        resolution: 401,
        polish: true,
    };
    let (mut triples, mut mismatches, mut bad_cex) = (0, 0, 0);
    let (mut verified, mut falsified) = (0, 0);
    for &eps in &EPS_SWEEP {
        for s in &toy.test.samples {
            let v = verify_instance(&toy.net, &s.features, eps, None, &cfg).unwrap();
            let region = IntervalBox::linf_ball_unit(&s.features, eps).unwrap();
            for c in &v.classes {
                let obj = Objective::new(&toy.net, v.predicted, c.adv_class).unwrap();
                let oracle = grid_minimize(&obj, &region, &grid).unwrap().value;
                triples += 1;
                match &c.verdict {
                    Verdict::Verified => {
                        verified += 1;
                        mismatches += (oracle <= 0.0) as usize;
                    }
                    Verdict::Falsified { counterexample, .. } => {
                        falsified += 1;
                        mismatches += (oracle > 0.0) as usize;
                        bad_cex +=
                            (obj.value(counterexample).unwrap() > 0.0 || !region.contains(counterexample)) as usize;
                    }
                    _ => mismatches += 1,
                }
            }
        }
    }
    outcome(
        mismatches == 0 && bad_cex == 0,
        format!(
            "{triples} (instance, class, eps) triples over 10 eps values: {verified} verified, {falsified} falsified, \
             {mismatches} disagreements with the oracle sign, {bad_cex} invalid counterexamples"
        ),
    )
}

fn gap_trend() -> Outcome {
    let start = Instant::now();
    let d = 64;
    let eps = [0.001, 0.01, 0.05];
    let mut worse = Vec::new();
    let mut cells = Vec::new();
    for degree in 2..=7 {
        let nets: Vec<Network> = (0..3u64)
            .map(|s| {
                generate_random_network(
                    NetworkKind::Ccp,
                    dims(degree, d, 25, 10),
                    40 * degree as u64 + s,
                    1.0 / (d as f64).sqrt(),
                )
                .unwrap()
            })
            .collect();
        let points: Vec<Vec<f64>> = (0..5u64).map(|s| random_box(d, 900 + s, 0.1).center()).collect();
        let rows = compare_bounds(&nets, &points, &eps, &CompareOptions::default()).unwrap();
        for &e in &eps {
            let gap = |m: BoundMethod| {
                rows.iter()
                    .find(|r| r.eps == e && r.method == m.name())
                    .unwrap()
                    .mean_gap
            };
            let (ibp, alpha) = (gap(BoundMethod::Ibp), gap(BoundMethod::AlphaUniform));
            if e <= 0.01 {
                cells.push(format!("N={degree} eps={e}: {alpha:.2e} vs {ibp:.2e}"));
                if alpha.partial_cmp(&ibp) != Some(std::cmp::Ordering::Less) {
                    worse.push(format!("N={degree} eps={e}"));
                }
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        worse.is_empty() && secs < 300.0,
        format!(
            "alpha gap < IBP gap in {}/{} (degree, eps <= 0.01) cells{}; {secs:.1}s (< 300s); {}",
            cells.len() - worse.len(),
            cells.len(),
            if worse.is_empty() {
                String::new()
            } else {
                format!(", not in {}", worse.join(", "))
            },
            cells.join("; ")
        ),
    )
}

fn verified_gap(toy: &Toy) -> Outcome {
    let eps = 0.2;
    let test = two_blobs(100, 0.08, 1).unwrap();
    let count = |method: BoundMethod, budget: usize| {
        let opts = VerifyOptions {
            eps,
            threads: Some(1),
            bab: BabConfig {
                bound_method: method,
                max_iterations: Some(budget),
                time_limit: None,
                ..Default::default()
            },
            ..Default::default()
        };
        cmd_verify(&toy.net, &test, &opts).unwrap().summary.verified
    };
    let (ibp, alpha) = (count(BoundMethod::Ibp, 5), count(BoundMethod::AlphaUniform, 5));
    let (ibp_root, alpha_root) = (count(BoundMethod::Ibp, 1), count(BoundMethod::AlphaUniform, 1));
    outcome(
        alpha > ibp,
        format!(
            "eps {eps}, {} instances, 5 iterations per problem: alpha verifies {alpha}, IBP {ibp} \
             (root bound only: {alpha_root} vs {ibp_root})",
            test.len()
        ),
    )
}

fn determinism(toy: &Toy) -> Outcome {
    let opts = VerifyOptions {
        eps: 0.1,
        threads: Some(1),
        bab: BabConfig {
            time_limit: None,
            max_iterations: Some(500),
            ..Default::default()
        },
        ..Default::default()
    };
    let a = cmd_verify(&toy.net, &toy.test, &opts).unwrap().to_jsonl();
    let b = cmd_verify(&toy.net, &toy.test, &opts).unwrap().to_jsonl();
    outcome(
        a.as_bytes() == b.as_bytes(),
        format!(
            "two single-threaded runs, {} bytes each, identical: {}",
            a.len(),
            a == b
        ),
    )
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Outcome + 'a>);

fn main() -> ExitCode {
    let toy = toy();
    let criteria: Vec<Criterion> = vec![
        ("derivative correctness", Box::new(derivatives)),
        ("IBP soundness", Box::new(ibp_soundness)),
        (
            "rank-1 / dense equivalence and linear scaling",
            Box::new(rank_one_equivalence),
        ),
        ("uniform spectral shift", Box::new(spectral_bound)),
        ("non-uniform shift validity", Box::new(nonuniform_validity)),
        ("under-bounding", Box::new(under_bounding)),
        ("BaB completeness", Box::new(bab_completeness)),
        ("verification consistency", Box::new(|| verification_consistency(&toy))),
        ("alpha gap below IBP gap", Box::new(gap_trend)),
        ("alpha verifies more than IBP", Box::new(|| verified_gap(&toy))),
        ("determinism", Box::new(|| determinism(&toy))),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += !o.pass as usize;
        println!(
            "criterion {}: {} {name}: {}",
            i + 1,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
