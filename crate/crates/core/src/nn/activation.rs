use crate::Real;

/// Numerically stable logistic function.
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// `(1/beta) * ln(1 + exp(beta * x))` without overflow.
pub fn softplus<T: Real>(x: T, beta: T) -> T {
    let bx = beta * x;
    if bx > T::of(20.0) {
        x + (-bx).exp() / beta
    } else {
        bx.exp().ln_1p() / beta
    }
}

/// d softplus(x, beta) / dx = sigmoid(beta * x).
pub fn softplus_grad<T: Real>(x: T, beta: T) -> T {
    sigmoid(beta * x)
}

/// Inverse of `softplus(·, 1)` for `y > 0`.
pub fn softplus_inverse<T: Real>(y: T) -> T {
    if y > T::of(20.0) {
        y + (-(-y).exp_m1()).ln()
    } else {
        y.exp_m1().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn softplus_reference_values() {
        assert_abs_diff_eq!(softplus(0.0f64, 1.0), core::f64::consts::LN_2, epsilon = 1e-12);
        assert_abs_diff_eq!(softplus(1000.0f64, 1.0), 1000.0, epsilon = 1e-9);
        assert_abs_diff_eq!(softplus_grad(0.0f64, 1.0), 0.5, epsilon = 1e-15);
        assert!(softplus(-1000.0f64, 1.0) >= 0.0);
        assert!(softplus(1e4f32, 1.0).is_finite());
    }

    #[test]
    fn softplus_dominates_relu_and_is_convex() {
        let grid: alloc::vec::Vec<f64> = (-400..=400).map(|i| i as f64 * 0.05).collect();
        for &x in &grid {
            for beta in [0.01, 0.5, 1.0, 3.0] {
                let y = softplus(x, beta);
                assert!(y >= x.max(0.0), "softplus({x},{beta}) = {y}");
                // Strict while the excess is above f64 resolution.
                if (beta * x).abs() < 25.0 {
                    assert!(y > x.max(0.0), "softplus({x},{beta}) = {y}");
                }
                let h = 1e-3;
                let second = softplus(x + h, beta) - 2.0 * y + softplus(x - h, beta);
                assert!(second >= -1e-9, "convexity at {x}");
                assert!(softplus(x + h, beta) > y);
            }
        }
    }

    #[test]
    fn softplus_inverse_round_trips() {
        for y in [1e-4f64, 0.01, 0.5, 3.0, 30.0] {
            assert_abs_diff_eq!(softplus(softplus_inverse(y), 1.0), y, epsilon = 1e-9 * y.max(1.0));
        }
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        assert_eq!(sigmoid(-1000.0f64), 0.0);
        assert_eq!(sigmoid(1000.0f64), 1.0);
        assert_abs_diff_eq!(sigmoid(0.0f32), 0.5);
    }
}
