//! Cost functions driving the extremum-seeking loops, their declared
//! regularity constants, and sampling-based checkers for those constants.
//!
//! Gradients are analytic; central finite differences of the value appear
//! only as test and checker oracles. Each shipped cost is radial about its
//! minimizer, so the gradient is `c(s)·(x − x*)` with `s = |x − x*|` and a
//! coefficient that stays finite as `s → 0`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::rng::SplitMix64;
use crate::{Error, Result};

pub type ValueFn = dyn Fn(&DVector<f64>) -> f64 + Send + Sync;
pub type GradientFn = dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync;
pub type ClassKFn = dyn Fn(f64) -> f64 + Send + Sync;

/// Value/gradient/minimizer bundle with declared regularity constants:
/// `l_j` bounds the Hessian norm, `m_j` (when present) uniformly bounds
/// the gradient, and `alpha_j` is the declared class-K lower-bound
/// function.
#[derive(Clone)]
pub struct CostFunction {
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
    x_star: DVector<f64>,
    j_star: f64,
    l_j: f64,
    m_j: Option<f64>,
    alpha_j: Arc<ClassKFn>,
    name: String,
}

impl std::fmt::Debug for CostFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostFunction")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("j_star", &self.j_star)
            .field("l_j", &self.l_j)
            .field("m_j", &self.m_j)
            .finish()
    }
}

impl CostFunction {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.gradient)(x)
    }

    pub fn value_arc(&self) -> Arc<ValueFn> {
        Arc::clone(&self.value)
    }

    pub fn gradient_arc(&self) -> Arc<GradientFn> {
        Arc::clone(&self.gradient)
    }

    pub fn x_star(&self) -> &DVector<f64> {
        &self.x_star
    }

    pub fn j_star(&self) -> f64 {
        self.j_star
    }

    /// Declared Hessian-norm bound (gradient Lipschitz constant).
    pub fn l_j(&self) -> f64 {
        self.l_j
    }

    /// Declared uniform gradient bound, when the cost has one.
    pub fn m_j(&self) -> Option<f64> {
        self.m_j
    }

    pub fn alpha_j(&self, s: f64) -> f64 {
        (self.alpha_j)(s)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Radial coefficient for `J = s² + 3 sin²(s) + 1`: `∇J = (2 + 3 sin(2s)/s)(x − x*)`.
fn nonconvex_coeff(s: f64) -> f64 {
    if s < 1e-8 {
        // sin(2s)/s = 2 - (2s)²·s/6·... ; the limit 2 is enough at this scale.
        8.0
    } else {
        2.0 + 3.0 * (2.0 * s).sin() / s
    }
}

/// Example cost `J(x) = |x−x*|² + 3 sin²(|x−x*|) + 1`: nonconvex, yet its
/// gradient still dominates the declared class-K lower bound
/// `α_J(s) = 0.5·tanh(s)`. Constants: `L_J = 20`, `J* = 1`, no uniform
/// gradient bound.
pub fn cost_nonconvex_sin(x_star: DVector<f64>) -> CostFunction {
    let dim = x_star.len();
    let xs = x_star.clone();
    let value = Arc::new(move |x: &DVector<f64>| {
        let s = (x - &xs).norm();
        s * s + 3.0 * s.sin().powi(2) + 1.0
    });
    let xs = x_star.clone();
    let gradient = Arc::new(move |x: &DVector<f64>| {
        let d = x - &xs;
        let s = d.norm();
        d * nonconvex_coeff(s)
    });
    CostFunction {
        dim,
        value,
        gradient,
        x_star,
        j_star: 1.0,
        l_j: 20.0,
        m_j: None,
        alpha_j: Arc::new(|s| 0.5 * s.tanh()),
        name: "nonconvex_sin".into(),
    }
}

/// Radial coefficient for `J = s·tanh(s) − 100`: `∇J = (tanh(s)/s + sech²(s))(x − x*)`.
fn tanh_coeff(s: f64) -> f64 {
    let sech2 = 1.0 / s.cosh().powi(2);
    if s < 1e-8 {
        // tanh(s)/s → 1.
        1.0 + sech2
    } else {
        s.tanh() / s + sech2
    }
}

/// Example cost `J(x) = |x−x*|·tanh(|x−x*|) − 100`: a smooth regularization
/// of the vector norm with uniformly bounded gradient. Constants:
/// `L_J = 3`, `M_J = 2`, `α_J = tanh`, `J* = −100`. The gradient at the
/// minimizer is taken as its continuity limit 0.
pub fn cost_tanh_norm(x_star: DVector<f64>) -> CostFunction {
    let dim = x_star.len();
    let xs = x_star.clone();
    let value = Arc::new(move |x: &DVector<f64>| {
        let s = (x - &xs).norm();
        s * s.tanh() - 100.0
    });
    let xs = x_star.clone();
    let gradient = Arc::new(move |x: &DVector<f64>| {
        let d = x - &xs;
        let s = d.norm();
        d * tanh_coeff(s)
    });
    CostFunction {
        dim,
        value,
        gradient,
        x_star,
        j_star: -100.0,
        l_j: 3.0,
        m_j: Some(2.0),
        alpha_j: Arc::new(|s| s.tanh()),
        name: "tanh_norm".into(),
    }
}

/// Quadratic cost `J(x) = ½(x−x*)ᵀH(x−x*)` for symmetric positive
/// definite `H`. Constants: `L_J = λ_max(H)`, `α_J(s) = λ_min(H)·tanh(s)`,
/// `J* = 0`.
pub fn cost_quadratic(x_star: DVector<f64>, h: DMatrix<f64>) -> Result<CostFunction> {
    let dim = x_star.len();
    if h.nrows() != dim || h.ncols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: h.nrows(),
        });
    }
    let asym = (&h - h.transpose()).norm();
    if asym > 1e-12 * (1.0 + h.norm()) {
        return Err(Error::NotSpd);
    }
    if nalgebra::Cholesky::new(h.clone()).is_none() {
        return Err(Error::NotSpd);
    }
    let eigs = h.clone().symmetric_eigen().eigenvalues;
    let l_max = eigs.iter().cloned().fold(f64::MIN, f64::max);
    let mu = eigs.iter().cloned().fold(f64::MAX, f64::min);

    let xs = x_star.clone();
    let hv = h.clone();
    let value = Arc::new(move |x: &DVector<f64>| {
        let d = x - &xs;
        0.5 * d.dot(&(&hv * &d))
    });
    let xs = x_star.clone();
    let gradient = Arc::new(move |x: &DVector<f64>| &h * (x - &xs));
    Ok(CostFunction {
        dim,
        value,
        gradient,
        x_star,
        j_star: 0.0,
        l_j: l_max,
        m_j: None,
        alpha_j: Arc::new(move |s| mu * s.tanh()),
        name: "quadratic".into(),
    })
}

/// Arbitrary cost assembled from parts; used for checker counterexamples
/// and custom experiments.
#[allow(clippy::too_many_arguments)]
pub fn cost_custom(
    dim: usize,
    value: Arc<ValueFn>,
    gradient: Arc<GradientFn>,
    x_star: DVector<f64>,
    j_star: f64,
    l_j: f64,
    m_j: Option<f64>,
    alpha_j: Arc<ClassKFn>,
    name: impl Into<String>,
) -> CostFunction {
    CostFunction {
        dim,
        value,
        gradient,
        x_star,
        j_star,
        l_j,
        m_j,
        alpha_j,
        name: name.into(),
    }
}

/// Known-structure open-loop drift `b₀` with its declared domination
/// coefficient `|b₀(x)| ≤ κ₃·|∇J(x)|` and Lipschitz constant.
#[derive(Clone)]
pub struct DriftField {
    b0: Arc<GradientFn>,
    kappa3: f64,
    l0: f64,
    name: String,
}

impl std::fmt::Debug for DriftField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DriftField")
            .field("name", &self.name)
            .field("kappa3", &self.kappa3)
            .field("l0", &self.l0)
            .finish()
    }
}

impl DriftField {
    /// Zero drift, the common ES case.
    pub fn none(dim: usize) -> Self {
        Self {
            b0: Arc::new(move |_x| DVector::zeros(dim)),
            kappa3: 0.0,
            l0: 0.0,
            name: "none".into(),
        }
    }

    /// Destabilizing drift `b₀(x) = coeff·(x − x*)` with a declared κ₃.
    pub fn linear_destabilizing(coeff: f64, x_star: DVector<f64>, kappa3: f64) -> Self {
        let xs = x_star;
        Self {
            b0: Arc::new(move |x| (x - &xs) * coeff),
            kappa3,
            l0: coeff.abs(),
            name: format!("linear_destabilizing({coeff})"),
        }
    }

    pub fn b0(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.b0)(x)
    }

    pub fn b0_arc(&self) -> Arc<GradientFn> {
        Arc::clone(&self.b0)
    }

    pub fn kappa3(&self) -> f64 {
        self.kappa3
    }

    pub fn l0(&self) -> f64 {
        self.l0
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Samples `|b₀(x)| ≤ κ₃·|∇J(x)|` in a ball around the minimizer and
    /// reports the worst ratio.
    pub fn check_domination(
        &self,
        cost: &CostFunction,
        n_samples: usize,
        radius: f64,
        seed: u64,
    ) -> DominationReport {
        let mut rng = SplitMix64::new(seed);
        let mut worst_ratio = 0.0f64;
        for _ in 0..n_samples {
            let x = cost.x_star() + rng.in_ball(cost.dim(), radius);
            let g = cost.gradient(&x).norm();
            if g < 1e-14 {
                continue;
            }
            worst_ratio = worst_ratio.max(self.b0(&x).norm() / g);
        }
        DominationReport {
            worst_ratio,
            kappa3: self.kappa3,
            pass: worst_ratio <= self.kappa3 + 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct DominationReport {
    pub worst_ratio: f64,
    pub kappa3: f64,
    pub pass: bool,
}

/// Result of sampling `α_J(|x−x*|)²·|x−x*|² ≤ |∇J(x)|²`.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct Assumption5aReport {
    /// Worst (most negative) margin `|∇J|² − α_J²·s²` over the samples.
    pub worst_margin: f64,
    pub pass: bool,
}

/// Samples points uniformly in the ball of `radius` around the minimizer
/// and reports the worst margin of the gradient-domination inequality;
/// fails if any margin drops below −1e−9.
pub fn check_assumption5a(
    cost: &CostFunction,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> Assumption5aReport {
    let mut rng = SplitMix64::new(seed);
    let mut worst = f64::MAX;
    for _ in 0..n_samples {
        let x = cost.x_star() + rng.in_ball(cost.dim(), radius);
        let s = (&x - cost.x_star()).norm();
        let g2 = cost.gradient(&x).norm_squared();
        let bound = cost.alpha_j(s).powi(2) * s * s;
        worst = worst.min(g2 - bound);
    }
    Assumption5aReport {
        worst_margin: worst,
        pass: worst >= -1e-9,
    }
}

/// Result of estimating the Hessian operator norm by finite differences.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct HessianBoundReport {
    pub max_estimate: f64,
    pub declared_bound: f64,
    pub pass: bool,
}

/// Estimates `|∇²J(x)|` at sampled points by symmetric finite differences
/// of the analytic gradient; passes if the maximum stays within the
/// declared bound (with a 1e−3 relative slack for the differencing error).
pub fn check_hessian_bound(
    cost: &CostFunction,
    n_samples: usize,
    radius: f64,
    seed: u64,
) -> HessianBoundReport {
    let mut rng = SplitMix64::new(seed);
    let n = cost.dim();
    let mut max_est = 0.0f64;
    for _ in 0..n_samples {
        let x = cost.x_star() + rng.in_ball(n, radius);
        let h = 1e-5 * (1.0 + x.norm());
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let col = (cost.gradient(&xp) - cost.gradient(&xm)) / (2.0 * h);
            hess.set_column(i, &col);
        }
        // Symmetrize before taking the operator norm.
        let sym = (&hess + hess.transpose()) * 0.5;
        let op = sym
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |m, &l| m.max(l.abs()));
        max_est = max_est.max(op);
    }
    HessianBoundReport {
        max_estimate: max_est,
        declared_bound: cost.l_j(),
        pass: max_est <= cost.l_j() * (1.0 + 1e-3),
    }
}

/// Central finite difference of the cost value, the test oracle for the
/// analytic gradients.
pub fn fd_gradient(cost: &CostFunction, x: &DVector<f64>) -> DVector<f64> {
    let n = cost.dim();
    let mut g = DVector::zeros(n);
    for i in 0..n {
        let h = 1e-6 * (1.0 + x[i].abs());
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        g[i] = (cost.value(&xp) - cost.value(&xm)) / (2.0 * h);
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v2(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn grad_matches_fd(cost: &CostFunction, n_points: usize, radius: f64) {
        let mut rng = SplitMix64::new(2024);
        for _ in 0..n_points {
            let x = cost.x_star() + rng.in_ball(cost.dim(), radius);
            let g = cost.gradient(&x);
            let fd = fd_gradient(cost, &x);
            let scale = g.norm().max(1e-3);
            assert!(
                (&g - &fd).norm() / scale < 1e-5,
                "{}: gradient {g:?} vs fd {fd:?} at {x:?}",
                cost.name()
            );
        }
    }

    #[test]
    fn nonconvex_sin_constants() {
        let c = cost_nonconvex_sin(v2(0.0, 0.0));
        assert_eq!(c.value(c.x_star()), 1.0);
        assert_eq!(c.gradient(c.x_star()).norm(), 0.0);
        assert_eq!(c.l_j(), 20.0);
        assert!(c.m_j().is_none());
        assert!((c.alpha_j(2.0) - 0.5 * 2.0f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn nonconvex_sin_gradient_vs_fd() {
        grad_matches_fd(&cost_nonconvex_sin(v2(0.3, -0.8)), 1000, 30.0);
    }

    #[test]
    fn nonconvex_dh_factor_stays_in_open_interval() {
        // The radial derivative factor Dh = 1 + (3/2)·sin(2s)/s·(1/2)… is
        // nonconvex_coeff / 2 and must stay inside (1/4, 4).
        let mut rng = SplitMix64::new(5);
        for _ in 0..10_000 {
            let s = rng.uniform_in(1e-6, 60.0);
            let dh = nonconvex_coeff(s) / 2.0;
            assert!(dh > 0.25 && dh < 4.0, "Dh = {dh} at s = {s}");
        }
    }

    #[test]
    fn tanh_norm_constants_and_bounded_gradient() {
        let c = cost_tanh_norm(v2(0.0, 0.0));
        assert_eq!(c.value(c.x_star()), -100.0);
        assert_eq!(c.l_j(), 3.0);
        assert_eq!(c.m_j(), Some(2.0));
        let mut rng = SplitMix64::new(11);
        for _ in 0..10_000 {
            let x = rng.in_ball(2, 500.0);
            let g = c.gradient(&x).norm();
            assert!(g <= 2.0 + 1e-12, "|grad| = {g} at {x:?}");
        }
    }

    #[test]
    fn tanh_norm_gradient_vs_fd() {
        grad_matches_fd(&cost_tanh_norm(v2(-1.0, 2.0)), 1000, 20.0);
    }

    #[test]
    fn tanh_norm_is_radially_symmetric() {
        let c = cost_tanh_norm(v2(1.0, -2.0));
        let mut rng = SplitMix64::new(3);
        for _ in 0..200 {
            let v = rng.gaussian_vector(2) * 3.0;
            let angle = rng.uniform_in(0.0, std::f64::consts::TAU);
            let (s, co) = angle.sin_cos();
            let rv = v2(co * v[0] - s * v[1], s * v[0] + co * v[1]);
            let a = c.value(&(c.x_star() + &v));
            let b = c.value(&(c.x_star() + &rv));
            assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn quadratic_identity_hessian() {
        let c = cost_quadratic(v2(1.0, 1.0), DMatrix::identity(2, 2)).unwrap();
        let x = v2(4.0, 5.0); // x* + (3, 4)
        assert!((c.value(&x) - 12.5).abs() < 1e-14);
        assert!((c.alpha_j(0.7) - 0.7f64.tanh()).abs() < 1e-15);
        grad_matches_fd(&c, 200, 10.0);
    }

    #[test]
    fn quadratic_rejects_non_spd() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -2.0]);
        assert!(matches!(cost_quadratic(v2(0.0, 0.0), m), Err(Error::NotSpd)));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, -0.5, 1.0]);
        assert!(matches!(
            cost_quadratic(v2(0.0, 0.0), asym),
            Err(Error::NotSpd)
        ));
    }

    #[test]
    fn quadratic_diag_satisfies_gradient_domination() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0]);
        let c = cost_quadratic(v2(0.0, 0.0), h).unwrap();
        let mut rng = SplitMix64::new(17);
        for _ in 0..10_000 {
            let x = rng.in_ball(2, 50.0);
            let s = x.norm();
            let lhs = c.gradient(&x).norm_squared();
            let rhs = s.tanh().powi(2) * s * s;
            assert!(lhs >= rhs - 1e-12, "lhs {lhs} < rhs {rhs} at {x:?}");
        }
    }

    #[test]
    fn assumption5a_passes_for_shipped_costs() {
        let r = check_assumption5a(&cost_nonconvex_sin(v2(0.0, 0.0)), 5000, 40.0, 1);
        assert!(r.pass, "worst margin {}", r.worst_margin);
        let q = cost_quadratic(v2(0.0, 0.0), DMatrix::identity(2, 2)).unwrap();
        let r = check_assumption5a(&q, 5000, 40.0, 2);
        assert!(r.pass, "worst margin {}", r.worst_margin);
    }

    #[test]
    fn assumption5a_fails_for_quartic() {
        // J = |x|⁴ has a gradient that vanishes cubically at the origin, so
        // no fixed class-K α_J with α_J(s) ≳ s can be dominated near 0.
        let quartic = cost_custom(
            2,
            Arc::new(|x: &DVector<f64>| x.norm().powi(4)),
            Arc::new(|x: &DVector<f64>| x * (4.0 * x.norm_squared())),
            v2(0.0, 0.0),
            0.0,
            1.0,
            None,
            Arc::new(|s: f64| 0.5 * s.tanh()),
            "quartic",
        );
        // Oracle: at s = 0.01, |grad|² = 16 s⁶ = 1.6e-11 while the bound is
        // (0.5 tanh s)² s² ≈ 2.5e-9, so the margin is decisively negative.
        let s = 0.01f64;
        assert!(16.0 * s.powi(6) < (0.5 * s.tanh()).powi(2) * s * s);
        let r = check_assumption5a(&quartic, 5000, 0.05, 3);
        assert!(!r.pass, "quartic should fail, margin {}", r.worst_margin);
    }

    #[test]
    fn hessian_bound_estimates() {
        let h = DMatrix::from_row_slice(2, 2, &[2.0, 0.3, 0.3, 1.0]);
        let lmax = h
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(f64::MIN, |m, &l| m.max(l));
        let q = cost_quadratic(v2(0.0, 0.0), h).unwrap();
        let r = check_hessian_bound(&q, 200, 20.0, 4);
        assert!(
            (r.max_estimate - lmax).abs() / lmax < 1e-4,
            "estimate {} vs λmax {lmax}",
            r.max_estimate
        );
        assert!(r.pass);

        let r = check_hessian_bound(&cost_nonconvex_sin(v2(0.0, 0.0)), 500, 30.0, 5);
        assert!(r.max_estimate <= 20.0, "estimate {}", r.max_estimate);
        assert!(r.pass);

        let r = check_hessian_bound(&cost_tanh_norm(v2(0.0, 0.0)), 500, 30.0, 6);
        assert!(r.max_estimate <= 3.0, "estimate {}", r.max_estimate);
        assert!(r.pass);
    }

    #[test]
    fn drift_domination_for_example_constants() {
        // b₀ = ½(x−x*) against the nonconvex cost: the declared κ₃ = 0.8
        // must dominate the sampled ratio (the true supremum is ≈ 0.72).
        let c = cost_nonconvex_sin(v2(0.0, 0.0));
        let d = DriftField::linear_destabilizing(0.5, v2(0.0, 0.0), 0.8);
        let r = d.check_domination(&c, 10_000, 50.0, 7);
        assert!(r.pass, "worst ratio {}", r.worst_ratio);
        assert!(r.worst_ratio > 0.5, "sampling should see nontrivial ratios");
    }

    #[test]
    fn constructors_accept_arbitrary_minimizers() {
        let c = cost_nonconvex_sin(v2(1e10, -1e10));
        assert_eq!(c.value(c.x_star()), 1.0);
        let d = cost_nonconvex_sin(v2(0.0, 0.0));
        let x = v2(0.4, -0.7);
        let expect = x.norm_squared() + 3.0 * x.norm().sin().powi(2) + 1.0;
        assert!((d.value(&x) - expect).abs() < 1e-12);
    }
}
