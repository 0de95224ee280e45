//! Brute-force references for testing: grid minimization, dense lower-bounding
//! Hessians with full eigendecompositions, finite differences, sampling
//! harnesses and direct convolution.
//!
//! Nothing here is used by the verifier itself. The only production entry
//! points these helpers call are network evaluation and
//! [`ibp_hessian_bounds_dense`].

use nalgebra::{DMatrix, SymmetricEigen};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::conv::ConvLayerSpec;
use crate::error::{Error, Result};
use crate::ibp::ibp_hessian_bounds_dense;
use crate::interval::IntervalBox;
use crate::network::Objective;

/// Largest dimension for which the dense oracles will build matrices.
pub const DENSE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub resolution: usize,
    pub polish: bool,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            resolution: 401,
            polish: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridMinimum {
    pub value: f64,
    pub point: Vec<f64>,
    /// Largest gradient norm seen times the half-diagonal of a grid cell: a
    /// heuristic bound on how far the unpolished grid value may sit above the
    /// true minimum.
    pub resolution_error: f64,
}

/// Exhaustive grid search for `d ≤ 3`, optionally refined by projected
/// gradient descent with backtracking from the best grid point.
pub fn grid_minimize(obj: &Objective, region: &IntervalBox, spec: &GridSpec) -> Result<GridMinimum> {
    let d = region.dim();
    if d > 3 {
        return Err(Error::InvalidArgument(format!("grid oracle supports d <= 3, got {d}")));
    }
    if spec.resolution < 3 {
        return Err(Error::InvalidArgument("grid resolution must be >= 3".into()));
    }
    let r = spec.resolution;
    let axis = |i: usize, j: usize| {
        let (l, h) = (region.lo()[i], region.hi()[i]);
        l + (h - l) * j as f64 / (r - 1) as f64
    };
    let total = r.pow(d as u32);
    let mut best = (f64::INFINITY, vec![0.0; d]);
    let mut max_grad: f64 = 0.0;
    let mut z = vec![0.0; d];
    for flat in 0..total {
        let mut rem = flat;
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = axis(i, rem % r);
            rem /= r;
        }
        let v = obj.value(&z)?;
        if v < best.0 || (v == best.0 && z < best.1) {
            best = (v, z.clone());
        }
        if flat % 7 == 0 {
            let g = obj.gradient(&z)?;
            max_grad = max_grad.max(g.dot(&g).sqrt());
        }
    }
    let cell: f64 = region
        .widths()
        .iter()
        .map(|w| (w / (r - 1) as f64 / 2.0).powi(2))
        .sum::<f64>()
        .sqrt();
    let (mut value, mut point) = best;
    if spec.polish {
        (value, point) = polish(obj, region, point, value)?;
    }
    Ok(GridMinimum {
        value,
        point,
        resolution_error: max_grad * cell,
    })
}

fn polish(obj: &Objective, region: &IntervalBox, mut z: Vec<f64>, mut value: f64) -> Result<(f64, Vec<f64>)> {
    let mut step = region.max_width().max(1e-12);
    for _ in 0..2000 {
        let g = obj.gradient(&z)?;
        let mut accepted = false;
        while step > 1e-14 {
            let mut cand: Vec<f64> = z.iter().zip(g.iter()).map(|(a, b)| a - step * b).collect();
            region.project(&mut cand);
            let cv = obj.value(&cand)?;
            if cv < value {
                z = cand;
                value = cv;
                accepted = true;
                step *= 2.0;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    Ok((value, z))
}

/// `L_H` built entrywise from the dense interval Hessian.
pub fn dense_lh(obj: &Objective, region: &IntervalBox) -> Result<Array2<f64>> {
    if obj.dim() > DENSE_CAP {
        return Err(Error::InvalidArgument(format!(
            "dense oracle capped at d = {DENSE_CAP}"
        )));
    }
    let m = ibp_hessian_bounds_dense(obj, region)?;
    let d = obj.dim();
    let mut lh = (&m.lo + &m.hi) * 0.5;
    for i in 0..d {
        let radius: f64 = (0..d).map(|j| m.lo[[i, j]] - m.hi[[i, j]]).sum::<f64>() / 2.0;
        lh[[i, i]] += radius;
    }
    Ok(lh)
}

fn eigenvalues(m: &Array2<f64>) -> Result<Vec<f64>> {
    let (r, c) = m.dim();
    if r != c {
        return Err(Error::InvalidArgument("matrix must be square".into()));
    }
    if r > DENSE_CAP {
        return Err(Error::InvalidArgument(format!(
            "dense oracle capped at d = {DENSE_CAP}"
        )));
    }
    let dm = DMatrix::from_fn(r, c, |i, j| m[[i, j]]);
    Ok(SymmetricEigen::new(dm).eigenvalues.iter().copied().collect())
}

/// `max |λ|` of a symmetric matrix.
pub fn dense_spectral_radius(m: &Array2<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.into_iter().fold(0.0, |a, l| a.max(l.abs())))
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &Array2<f64>) -> Result<f64> {
    Ok(eigenvalues(m)?.into_iter().fold(f64::INFINITY, f64::min))
}

/// Entrywise magnitude bound `max(|LB|, |UB|)` of the dense interval Hessian.
pub fn dense_mn_matrix(obj: &Objective, region: &IntervalBox) -> Result<Array2<f64>> {
    Ok(ibp_hessian_bounds_dense(obj, region)?.mag())
}

/// Central differences of a scalar function.
pub fn finite_diff_gradient<F>(mut f: F, z: &[f64], h: f64) -> Result<Array1<f64>>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let mut g = Array1::zeros(z.len());
    let mut p = z.to_vec();
    for i in 0..z.len() {
        p[i] = z[i] + h;
        let up = f(&p)?;
        p[i] = z[i] - h;
        let down = f(&p)?;
        p[i] = z[i];
        g[i] = (up - down) / (2.0 * h);
    }
    Ok(g)
}

/// Central differences of a gradient, symmetrized.
pub fn finite_diff_hessian<F>(mut grad: F, z: &[f64], h: f64) -> Result<Array2<f64>>
where
    F: FnMut(&[f64]) -> Result<Array1<f64>>,
{
    let d = z.len();
    let mut m = Array2::zeros((d, d));
    let mut p = z.to_vec();
    for j in 0..d {
        p[j] = z[j] + h;
        let up = grad(&p)?;
        p[j] = z[j] - h;
        let down = grad(&p)?;
        p[j] = z[j];
        for i in 0..d {
            m[[i, j]] = (up[i] - down[i]) / (2.0 * h);
        }
    }
    Ok((&m + &m.t()) * 0.5)
}

/// Uniform samples from a box; corners are always included first.
pub fn sample_box(region: &IntervalBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let d = region.dim();
    let mut out = Vec::with_capacity(n);
    for corner in [region.lo().to_vec(), region.hi().to_vec()] {
        if out.len() < n {
            out.push(corner);
        }
    }
    while out.len() < n {
        out.push(
            (0..d)
                .map(|i| region.lo()[i] + region.width(i) * rng.random::<f64>())
                .collect(),
        );
    }
    out
}

/// Count sampled points at which `holds` is false.
pub fn sampling_soundness<F>(region: &IntervalBox, n: usize, seed: u64, mut holds: F) -> Result<usize>
where
    F: FnMut(&[f64]) -> Result<bool>,
{
    let mut violations = 0;
    for z in sample_box(region, n, seed) {
        if !holds(&z)? {
            violations += 1;
        }
    }
    Ok(violations)
}

/// Direct zero-padded cross-correlation on a CHW-flattened image.
pub fn direct_conv2d(spec: &ConvLayerSpec, kernel: &[f64], image: &[f64]) -> Result<Vec<f64>> {
    spec.validate()?;
    if kernel.len() != spec.kernel_len() || image.len() != spec.input_len() {
        return Err(Error::Convolution("kernel or image length does not match spec".into()));
    }
    let (oh, ow) = (spec.output_h(), spec.output_w());
    let mut out = vec![0.0; spec.output_len()];
    for oc in 0..spec.out_channels {
        for oy in 0..oh {
            for ox in 0..ow {
                let mut acc = 0.0;
                for ic in 0..spec.in_channels {
                    for ky in 0..spec.kernel_h {
                        for kx in 0..spec.kernel_w {
                            let y = (oy * spec.stride + ky) as isize - spec.padding as isize;
                            let x = (ox * spec.stride + kx) as isize - spec.padding as isize;
                            if y < 0 || x < 0 || y >= spec.input_h as isize || x >= spec.input_w as isize {
                                continue;
                            }
                            let w = kernel[((oc * spec.in_channels + ic) * spec.kernel_h + ky) * spec.kernel_w + kx];
                            acc += w * image[(ic * spec.input_h + y as usize) * spec.input_w + x as usize];
                        }
                    }
                }
                out[(oc * oh + oy) * ow + ox] = acc;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn spectral_radius_examples() {
        assert_eq!(dense_spectral_radius(&array![[-2.0]]).unwrap(), 2.0);
        assert!((dense_spectral_radius(&array![[2.0, 0.0], [0.0, -5.0]]).unwrap() - 5.0).abs() < 1e-12);
        assert!((min_eigenvalue(&array![[2.0, 0.0], [0.0, -5.0]]).unwrap() + 5.0).abs() < 1e-12);
    }

    #[test]
    fn finite_differences_on_quadratic() {
        let f = |z: &[f64]| Ok(z[0] * z[0] + 3.0 * z[0] * z[1]);
        let g = finite_diff_gradient(f, &[1.0, 2.0], 1e-5).unwrap();
        assert!((g[0] - 8.0).abs() < 1e-8 && (g[1] - 3.0).abs() < 1e-8);
        let h = finite_diff_hessian(|z| Ok(array![2.0 * z[0] + 3.0 * z[1], 3.0 * z[0]]), &[1.0, 2.0], 1e-4).unwrap();
        assert!((&h - &array![[2.0, 3.0], [3.0, 0.0]]).iter().all(|e| e.abs() < 1e-8));
    }

    #[test]
    fn harness_detects_corrupted_bound() {
        let b = IntervalBox::new(vec![0.0], vec![1.0]).unwrap();
        assert_eq!(sampling_soundness(&b, 100, 0, |z| Ok(z[0] >= 0.0)).unwrap(), 0);
        assert!(sampling_soundness(&b, 100, 0, |z| Ok(z[0] >= 0.0 + 1.0)).unwrap() > 0);
    }
}
