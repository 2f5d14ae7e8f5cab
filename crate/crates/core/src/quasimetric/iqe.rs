//! Interval quasimetric embedding (IQE) distance.
//!
//! A component compares two vectors `u, v ∈ R^m` through the Lebesgue
//! measure of `⋃_j [u_j, max(u_j, v_j)]`. Components are combined with a
//! learned max/mean mixture.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::error::{check_len, Error, Result};
use crate::nn::sigmoid;
use crate::Real;

/// Reusable sort buffer for the interval sweep.
#[derive(Debug, Default, Clone)]
pub struct IqeScratch<T> {
    starts: Vec<(T, usize)>,
}

impl<T: Real> IqeScratch<T> {
    pub fn new() -> Self {
        Self { starts: Vec::new() }
    }
}

/// Measure of the union of intervals `[u_j, max(u_j, v_j)]`.
pub fn iqe_component_distance<T: Real>(u: &[T], v: &[T]) -> Result<T> {
    check_len("iqe component", u.len(), v.len())?;
    let mut scratch = IqeScratch::new();
    Ok(component_sweep(u, v, &mut scratch, None))
}

/// Interval sweep. With `grads = Some((gu, gv))` the subgradient of the
/// measure is added there: `-1` on each merged segment's starting `u_j`,
/// `+1` on its closing `v_j`; covered endpoints get nothing.
pub(crate) fn component_sweep<T: Real>(
    u: &[T],
    v: &[T],
    scratch: &mut IqeScratch<T>,
    mut grads: Option<(&mut [T], &mut [T])>,
) -> T {
    let starts = &mut scratch.starts;
    starts.clear();
    starts.extend(
        u.iter()
            .zip(v)
            .enumerate()
            .filter(|(_, (a, b))| *b > *a)
            .map(|(j, (&a, _))| (a, j)),
    );
    if starts.is_empty() {
        return T::zero();
    }
    starts.sort_unstable_by(|a, b| {
        a.0.partial_cmp(&b.0)
            .unwrap_or(Ordering::Equal)
            .then(a.1.cmp(&b.1))
    });

    let mut total = T::zero();
    let (mut seg_start, mut seg_end_j) = (starts[0].1, starts[0].1);
    let mut seg_end = v[seg_end_j];
    let mut close = |start: usize, end_j: usize, end: T, total: &mut T| {
        *total += end - u[start];
        if let Some((gu, gv)) = grads.as_mut() {
            gu[start] -= T::one();
            gv[end_j] += T::one();
        }
    };
    for &(a, j) in &starts[1..] {
        if a <= seg_end {
            if v[j] > seg_end {
                seg_end = v[j];
                seg_end_j = j;
            }
        } else {
            close(seg_start, seg_end_j, seg_end, &mut total);
            seg_start = j;
            seg_end_j = j;
            seg_end = v[j];
        }
    }
    close(seg_start, seg_end_j, seg_end, &mut total);
    total
}

/// `μ·max + (1-μ)·mean` of nonnegative component distances, `μ = sigmoid(mix_raw)`.
pub fn iqe_maxmean<T: Real>(components: &[T], mix_raw: T) -> Result<T> {
    if let Some(&bad) = components.iter().find(|&&d| d < T::zero()) {
        return Err(Error::NegativeInput(bad.as_f64()));
    }
    if components.is_empty() {
        return Err(Error::EmptyBatch);
    }
    Ok(maxmean(components, mix_raw, None).0)
}

/// Returns `(value, d value / d mix_raw)`; with `grad` the per-component
/// derivative is written there. Ties in the max go to the first index.
pub(crate) fn maxmean<T: Real>(d: &[T], mix_raw: T, grad: Option<&mut [T]>) -> (T, T) {
    let k = T::of(d.len() as f64);
    let mut arg = 0;
    for (i, &x) in d.iter().enumerate() {
        if x > d[arg] {
            arg = i;
        }
    }
    let max = d[arg];
    let mean = d.iter().copied().sum::<T>() / k;
    let mu = sigmoid(mix_raw);
    if let Some(g) = grad {
        let share = (T::one() - mu) / k;
        g.iter_mut().for_each(|x| *x = share);
        g[arg] += mu;
    }
    (
        mu * max + (T::one() - mu) * mean,
        (max - mean) * mu * (T::one() - mu),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Independent oracle: measure of a union of intervals by scanning the
    /// elementary cells between consecutive distinct endpoints.
    fn union_measure_oracle(u: &[f64], v: &[f64]) -> f64 {
        let mut pts: Vec<f64> = u.iter().chain(v).copied().collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut total = 0.0;
        for w in pts.windows(2) {
            let mid = 0.5 * (w[0] + w[1]);
            if u.iter().zip(v).any(|(&a, &b)| a <= mid && mid <= b.max(a)) {
                total += w[1] - w[0];
            }
        }
        total
    }

    #[test]
    fn fixtures() {
        assert_eq!(iqe_component_distance(&[0.0f64, 0.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(iqe_component_distance(&[0.0f64, 0.0], &[1.0, 2.0]).unwrap(), 2.0);
        assert_eq!(iqe_component_distance(&[1.0f64, 2.0], &[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(iqe_component_distance(&[0.0f64, 3.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert!(iqe_component_distance(&[0.0f64], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn sweep_matches_cell_oracle() {
        let mut rng = crate::rng::seeded(5);
        use rand::Rng;
        for _ in 0..2000 {
            let m = rng.random_range(1..9);
            let u: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let got = iqe_component_distance(&u, &v).unwrap();
            assert_abs_diff_eq!(got, union_measure_oracle(&u, &v), epsilon = 1e-12);
        }
    }

    #[test]
    fn sweep_gradient_matches_finite_differences() {
        let mut rng = crate::rng::seeded(9);
        use rand::Rng;
        let mut scratch = IqeScratch::new();
        for _ in 0..500 {
            let m = rng.random_range(1..7);
            let u: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let v: Vec<f64> = (0..m).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut gu = alloc::vec![0.0; m];
            let mut gv = alloc::vec![0.0; m];
            component_sweep(&u, &v, &mut scratch, Some((&mut gu, &mut gv)));
            let h = 1e-7;
            for j in 0..m {
                let mut up = u.clone();
                up[j] += h;
                let mut dn = u.clone();
                dn[j] -= h;
                let fd = (union_measure_oracle(&up, &v) - union_measure_oracle(&dn, &v)) / (2.0 * h);
                assert_abs_diff_eq!(gu[j], fd, epsilon = 1e-5);
                let mut vp = v.clone();
                vp[j] += h;
                let mut vn = v.clone();
                vn[j] -= h;
                let fd = (union_measure_oracle(&u, &vp) - union_measure_oracle(&u, &vn)) / (2.0 * h);
                assert_abs_diff_eq!(gv[j], fd, epsilon = 1e-5);
            }
        }
    }

    #[test]
    fn maxmean_values() {
        assert_eq!(iqe_maxmean(&[0.0f64, 0.0, 0.0], 3.0).unwrap(), 0.0);
        assert_abs_diff_eq!(iqe_maxmean(&[2.0f64, 0.0], 0.0).unwrap(), 1.5, epsilon = 1e-15);
        assert_abs_diff_eq!(iqe_maxmean(&[3.0f64, 1.0], 20.0).unwrap(), 3.0, epsilon = 1e-8);
        assert!(iqe_maxmean(&[1.0f64, -0.5], 0.0).is_err());
    }

    #[test]
    fn maxmean_stays_between_mean_and_max() {
        let mut rng = crate::rng::seeded(2);
        use rand::Rng;
        for _ in 0..1000 {
            let d: Vec<f64> = (0..5).map(|_| rng.random_range(0.0..4.0)).collect();
            let mix = rng.random_range(-8.0..8.0);
            let r = iqe_maxmean(&d, mix).unwrap();
            let mean = d.iter().sum::<f64>() / 5.0;
            let max = d.iter().cloned().fold(0.0, f64::max);
            assert!(r >= mean - 1e-12 && r <= max + 1e-12);
        }
    }

    #[test]
    fn maxmean_gradients() {
        let d = [0.4f64, 1.3, 0.2, 1.3];
        let mix = 0.7;
        let mut g = [0.0; 4];
        let (_, dmix) = maxmean(&d, mix, Some(&mut g));
        let h = 1e-6;
        let fd = (maxmean(&d, mix + h, None).0 - maxmean(&d, mix - h, None).0) / (2.0 * h);
        assert_abs_diff_eq!(dmix, fd, epsilon = 1e-8);
        let mu = sigmoid(mix);
        // First of the tied maxima takes the max share.
        assert_abs_diff_eq!(g[1], mu + (1.0 - mu) / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(g[3], (1.0 - mu) / 4.0, epsilon = 1e-15);
    }
}
