//! Projected gradient descent over boxes.
//!
//! [`upper_bound`] runs PGD on `g` itself; any feasible point gives a valid
//! upper bound on the box minimum. [`lower_bound_alpha`] runs PGD on the
//! convexified `g_α` and turns the iterates into a certified lower bound with
//! the linearization (Frank-Wolfe) gap: for convex `h` and any `z` in the box,
//!
//! `min h ≥ h(z) + Σᵢ min(∂ᵢh(z)·(lᵢ − zᵢ), ∂ᵢh(z)·(uᵢ − zᵢ))`.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::alpha::{alpha_objective_gradient, alpha_objective_value, AlphaShift};
use crate::error::{Error, Result};
use crate::interval::IntervalBox;
use crate::network::Objective;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PgdConfig {
    pub iterations: usize,
    /// Step length as a fraction of the mean box width.
    pub step_scale: f64,
    pub restarts: usize,
    pub seed: u64,
}

impl Default for PgdConfig {
    fn default() -> Self {
        Self {
            iterations: 100,
            step_scale: 0.1,
            restarts: 3,
            seed: 0,
        }
    }
}

impl PgdConfig {
    fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.restarts == 0 || !(self.step_scale > 0.0) {
            return Err(Error::InvalidArgument(
                "PGD iterations, restarts and step_scale must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PgdOutcome {
    pub point: Vec<f64>,
    pub value: f64,
    /// Best linearization lower bound seen over all iterates. Only a valid
    /// bound on the box minimum when the objective is convex on the box.
    pub linear_lower: f64,
}

/// `Σᵢ min(gᵢ(lᵢ − zᵢ), gᵢ(uᵢ − zᵢ))`, the most the linear model can drop.
pub fn linearization_gap(grad: &[f64], region: &IntervalBox, z: &[f64]) -> f64 {
    grad.iter()
        .zip(z)
        .zip(region.lo().iter().zip(region.hi()))
        .map(|((&g, &zi), (&l, &h))| (g * (l - zi)).min(g * (h - zi)))
        .sum()
}

fn check_finite(value: f64, grad: &Array1<f64>) -> Result<()> {
    if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite objective value {value}")));
    }
    Ok(())
}

/// Fixed-step PGD with clamping, restarted from the box center and then from
/// seeded uniform points. Returns the best point over all restarts; ties keep
/// the earliest restart.
pub fn pgd_minimize<F>(mut value_grad: F, region: &IntervalBox, cfg: &PgdConfig) -> Result<PgdOutcome>
where
    F: FnMut(&[f64]) -> Result<(f64, Array1<f64>)>,
{
    cfg.validate()?;
    let step = cfg.step_scale * region.mean_width();
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    let mut best: Option<PgdOutcome> = None;
    let mut linear_lower = f64::NEG_INFINITY;

    for restart in 0..cfg.restarts {
        let mut z: Vec<f64> = if restart == 0 {
            region.center()
        } else {
            region
                .lo()
                .iter()
                .zip(region.hi())
                .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
                .collect()
        };
        for it in 0..=cfg.iterations {
            let (value, grad) = value_grad(&z)?;
            check_finite(value, &grad)?;
            linear_lower = linear_lower.max(value + linearization_gap(grad.as_slice().unwrap(), region, &z));
            if best.as_ref().is_none_or(|b| value < b.value) {
                best = Some(PgdOutcome {
                    point: z.clone(),
                    value,
                    linear_lower: f64::NEG_INFINITY,
                });
            }
            if it == cfg.iterations || step == 0.0 {
                break;
            }
            for (zi, gi) in z.iter_mut().zip(grad.iter()) {
                *zi -= step * gi;
            }
            region.project(&mut z);
        }
    }
    let mut best = best.expect("at least one restart");
    best.linear_lower = linear_lower;
    Ok(best)
}

/// PGD on `g`; the returned value is `g` at a feasible point.
pub fn upper_bound(obj: &Objective, region: &IntervalBox, cfg: &PgdConfig) -> Result<(Vec<f64>, f64)> {
    let out = pgd_minimize(|z| obj.value_and_gradient(z), region, cfg)?;
    Ok((out.point, out.value))
}

/// Certified lower bound on `min g` over the box, valid whenever the shift
/// makes `g_α` convex there.
pub fn lower_bound_alpha(obj: &Objective, region: &IntervalBox, shift: &AlphaShift, cfg: &PgdConfig) -> Result<f64> {
    let out = pgd_minimize(
        |z| {
            Ok((
                alpha_objective_value(obj, shift, region, z)?,
                alpha_objective_gradient(obj, shift, region, z)?,
            ))
        },
        region,
        cfg,
    )?;
    Ok(out.linear_lower.min(out.value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{CcpNetwork, Network};
    use ndarray::array;

    fn unit() -> IntervalBox {
        IntervalBox::new(vec![0.0], vec![1.0]).unwrap()
    }

    fn neg_quadratic() -> Network {
        CcpNetwork::new(
            vec![array![[1.0]], array![[1.0]]],
            array![[0.0], [1.0]],
            array![0.0, 0.0],
        )
        .unwrap()
        .into()
    }

    #[test]
    fn interior_quadratic_minimum() {
        let out = pgd_minimize(
            |z| Ok(((z[0] - 0.3).powi(2), array![2.0 * (z[0] - 0.3)])),
            &unit(),
            &PgdConfig::default(),
        )
        .unwrap();
        assert!((out.point[0] - 0.3).abs() < 1e-4);
        assert!(out.value <= 1e-8);
        assert!(out.linear_lower <= out.value && out.linear_lower > -1e-6);
    }

    #[test]
    fn boundary_minimum() {
        let out = pgd_minimize(|z| Ok((-z[0], array![-1.0])), &unit(), &PgdConfig::default()).unwrap();
        assert_eq!(out.point, vec![1.0]);
        assert_eq!(out.value, -1.0);
        assert_eq!(out.linear_lower, -1.0);
    }

    #[test]
    fn shifted_negative_quadratic() {
        let net = neg_quadratic();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let lb = lower_bound_alpha(&obj, &unit(), &AlphaShift::Uniform(1.0), &PgdConfig::default()).unwrap();
        assert!((lb + 2.0).abs() <= 1e-6);
        let (z, ub) = upper_bound(&obj, &unit(), &PgdConfig::default()).unwrap();
        assert_eq!(z, vec![1.0]);
        assert!((ub + 2.0).abs() <= 1e-12);
    }

    #[test]
    fn affine_net_with_zero_shift() {
        let net: Network = CcpNetwork::new(
            vec![array![[1.0, -1.0], [0.5, 2.0]]],
            array![[1.0, 0.0], [0.0, 1.0]],
            array![0.0, 0.0],
        )
        .unwrap()
        .into();
        let obj = Objective::new(&net, 0, 1).unwrap();
        let b = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        let lb = lower_bound_alpha(&obj, &b, &AlphaShift::Uniform(0.0), &PgdConfig::default()).unwrap();
        let (_, ub) = upper_bound(&obj, &b, &PgdConfig::default()).unwrap();
        // g = 2z₀ − 1.5z₁ on the unit square: minimum −1.5 at (0, 1).
        assert!((lb + 1.5).abs() < 1e-12);
        assert!((ub + 1.5).abs() < 1e-12);
    }

    #[test]
    fn non_finite_is_reported() {
        let r = pgd_minimize(|_| Ok((f64::NAN, array![0.0])), &unit(), &PgdConfig::default());
        assert!(matches!(r, Err(Error::Numerical(_))));
    }

    #[test]
    fn deterministic_given_seed() {
        let f = |z: &[f64]| Ok(((3.0 * z[0]).sin(), array![3.0 * (3.0 * z[0]).cos()]));
        let cfg = PgdConfig {
            seed: 7,
            ..Default::default()
        };
        assert_eq!(
            pgd_minimize(f, &unit(), &cfg).unwrap(),
            pgd_minimize(f, &unit(), &cfg).unwrap()
        );
    }
}
