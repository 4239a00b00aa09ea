//! Quadrature rules used by the averaging pipeline.
//!
//! Period integrals use composite Simpson weights on an even panel grid.
//! Running prefix integrals (needed for `v₁`, `w` and the near-identity
//! map at arbitrary `τ`) accumulate panel-by-panel with a 3-point
//! Gauss–Legendre rule so the prefix values at every grid node carry the
//! same accuracy as the full-period rule.

use nalgebra::DVector;

/// Abscissae of the 3-point Gauss–Legendre rule on `[-1, 1]`.
const GL3_X: [f64; 3] = [-0.774_596_669_241_483_4, 0.0, 0.774_596_669_241_483_4];
/// Weights of the 3-point Gauss–Legendre rule on `[-1, 1]`.
const GL3_W: [f64; 3] = [5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0];

/// Composite Simpson quadrature of a scalar function over `[a, b]`.
///
/// `panels` is rounded up to the next even count of at least 2.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let m = panels.max(2).next_multiple_of(2);
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for j in 1..m {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + j as f64 * h);
    }
    acc * h / 3.0
}

/// Composite Simpson quadrature of a vector-valued function over `[a, b]`.
pub fn simpson_vec<F: Fn(f64) -> DVector<f64>>(
    f: F,
    a: f64,
    b: f64,
    panels: usize,
    dim: usize,
) -> DVector<f64> {
    let m = panels.max(2).next_multiple_of(2);
    let h = (b - a) / m as f64;
    let mut acc = f(a) + f(b);
    for j in 1..m {
        let w = if j % 2 == 1 { 4.0 } else { 2.0 };
        acc += f(a + j as f64 * h) * w;
    }
    debug_assert_eq!(acc.len(), dim);
    acc * (h / 3.0)
}

/// Integral of `f` over the single interval `[a, b]` by 3-point
/// Gauss–Legendre. Exact for quintics; error `O((b-a)^7)`.
pub fn gauss3<T, F>(f: F, a: f64, b: f64, zero: T) -> T
where
    T: std::ops::AddAssign + std::ops::Mul<f64, Output = T> + Clone,
    F: Fn(f64) -> T,
{
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut acc = zero;
    for k in 0..3 {
        acc += f(mid + half * GL3_X[k]) * (half * GL3_W[k]);
    }
    acc
}

/// Simpson weights for an even panel grid with `m + 1` nodes spanning one
/// full interval: `h/3 · [1, 4, 2, 4, …, 2, 4, 1]`.
pub fn simpson_weights(m: usize, h: f64) -> Vec<f64> {
    assert!(
        m >= 2 && m.is_multiple_of(2),
        "composite Simpson needs an even panel count"
    );
    let mut w = vec![0.0; m + 1];
    w[0] = h / 3.0;
    w[m] = h / 3.0;
    for (j, wj) in w.iter_mut().enumerate().take(m).skip(1) {
        *wj = if j % 2 == 1 { 4.0 * h / 3.0 } else { 2.0 * h / 3.0 };
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn simpson_integrates_polynomials_exactly() {
        // Simpson is exact for cubics.
        let val = simpson(|x| x * x * x - 2.0 * x + 1.0, 0.0, 2.0, 2);
        let exact = 4.0 - 4.0 + 2.0;
        assert!((val - exact).abs() < 1e-13, "got {val}, want {exact}");
    }

    #[test]
    fn simpson_full_period_of_sin_squared() {
        let val = simpson(|t| t.sin().powi(2), 0.0, 2.0 * PI, 64);
        assert!((val - PI).abs() < 1e-12, "got {val}");
    }

    #[test]
    fn gauss3_matches_antiderivative_of_trig() {
        // One panel of width 0.7: truncation error ~ (b-a)^7 / 2e6.
        let val = gauss3(|t: f64| t.cos(), 0.2, 0.9, 0.0f64);
        let exact = 0.9f64.sin() - 0.2f64.sin();
        assert!((val - exact).abs() < 1e-7, "got {val}, want {exact}");
    }

    #[test]
    fn weights_sum_to_interval_length() {
        let w = simpson_weights(8, 0.25);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn simpson_vec_matches_scalar() {
        let v = simpson_vec(
            |t| DVector::from_vec(vec![t.sin(), t.cos()]),
            0.0,
            1.0,
            32,
            2,
        );
        assert!((v[0] - (1.0 - 1.0f64.cos())).abs() < 1e-8);
        assert!((v[1] - 1.0f64.sin()).abs() < 1e-8);
    }
}
