use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::core::{common_period, Rational};
use crate::quad::simpson_vec;
use crate::rng::SplitMix64;
use crate::{Error, Result};

/// Vector field of the oscillatory system: `(x, τ) ↦ ℝⁿ`.
///
/// Fields must be pure: the averaging quadratures and the batch simulator
/// call them concurrently and assume identical outputs for identical
/// inputs. This purity is a documented contract, not enforced.
pub type FieldFn = dyn Fn(&DVector<f64>, f64) -> DVector<f64> + Send + Sync;

/// Analytic Jacobian `D_x f(x, τ)` of a vector field.
pub type JacFn = dyn Fn(&DVector<f64>, f64) -> DMatrix<f64> + Send + Sync;

/// Seed for the internal sampling used by construction-time checks.
const VALIDATION_SEED: u64 = 0x6C62_6573_5F73_7973;

/// The pair `(f₁, f₂)` with a common period `T` in the fast time, the
/// object of `dx/dt = ε⁻¹ f₁(x,τ) + f₂(x,τ)`, `dτ/dt = ε⁻²`.
///
/// Construction verifies by sampling that both fields are `T`-periodic in
/// `τ` (warning on violation) and that `f₁` has zero τ-mean over `[0, T]`
/// (hard error: the second-order averaging construction is meaningless
/// without it).
#[derive(Clone)]
pub struct OscillatorySystem {
    dim: usize,
    period: f64,
    f1: Arc<FieldFn>,
    f2: Arc<FieldFn>,
    jac_f1: Option<Arc<JacFn>>,
    name: String,
    warnings: Vec<String>,
}

impl std::fmt::Debug for OscillatorySystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OscillatorySystem")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("period", &self.period)
            .field("analytic_jac", &self.jac_f1.is_some())
            .finish()
    }
}

impl OscillatorySystem {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Common period `T` of both fields in the fast time.
    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn f1(&self, x: &DVector<f64>, tau: f64) -> DVector<f64> {
        (self.f1)(x, tau)
    }

    pub fn f2(&self, x: &DVector<f64>, tau: f64) -> DVector<f64> {
        (self.f2)(x, tau)
    }

    pub fn f1_arc(&self) -> Arc<FieldFn> {
        Arc::clone(&self.f1)
    }

    pub fn f2_arc(&self) -> Arc<FieldFn> {
        Arc::clone(&self.f2)
    }

    /// Analytic `D_x f₁` when one was supplied.
    pub fn jac_f1(&self, x: &DVector<f64>, tau: f64) -> Option<DMatrix<f64>> {
        self.jac_f1.as_ref().map(|j| j(x, tau))
    }

    pub fn has_analytic_jac(&self) -> bool {
        self.jac_f1.is_some()
    }

    /// Combined right-hand side `ε⁻¹ f₁ + f₂`.
    pub fn f_eps(&self, x: &DVector<f64>, tau: f64, epsilon: f64) -> DVector<f64> {
        self.f1(x, tau) / epsilon + self.f2(x, tau)
    }

    /// Non-fatal findings from the construction-time sampling checks.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }
}

/// Builds an [`OscillatorySystem`] with `period = common_period(freqs)`.
///
/// Periodicity of both fields is spot-checked at 16 sampled states
/// (tolerance 1e-9, violations collected as warnings); the τ-mean of `f₁`
/// over one period is required to vanish at every sampled state beyond
/// tolerance 1e-6, otherwise construction fails.
pub fn make_system(
    dim: usize,
    f1: Arc<FieldFn>,
    f2: Arc<FieldFn>,
    jac_f1: Option<Arc<JacFn>>,
    freqs: &[Rational],
    name: impl Into<String>,
) -> Result<OscillatorySystem> {
    let period = common_period(freqs)?;
    let name = name.into();
    let mut rng = SplitMix64::new(VALIDATION_SEED);

    let mut warnings = Vec::new();
    let mut worst_mean = 0.0f64;
    let mut field_scale = 0.0f64;
    for _ in 0..16 {
        let x = rng.gaussian_vector(dim) * 2.0;

        // Periodicity spot checks at two interior phases.
        for tau in [0.31 * period, 0.77 * period] {
            for (label, field) in [("f1", &f1), ("f2", &f2)] {
                let a = field(&x, tau);
                let b = field(&x, tau + period);
                let scale = 1.0 + a.norm();
                if (&a - &b).norm() > 1e-9 * scale {
                    warnings.push(format!(
                        "{label} not {period:.6}-periodic at sampled state (|Δ| = {:.3e})",
                        (&a - &b).norm()
                    ));
                }
            }
        }

        let mean = simpson_vec(|s| f1(&x, s), 0.0, period, 256, dim) / period;
        worst_mean = worst_mean.max(mean.norm());
        field_scale = field_scale.max(f1(&x, 0.25 * period).norm());
    }

    if worst_mean > 1e-6 * (1.0 + field_scale) {
        return Err(Error::NotZeroMean { worst: worst_mean });
    }

    Ok(OscillatorySystem {
        dim,
        period,
        f1,
        f2,
        jac_f1,
        name,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn unit_freq() -> Vec<Rational> {
        vec![Rational::integer(1)]
    }

    #[test]
    fn sine_fast_field_is_accepted() {
        let f1: Arc<FieldFn> = Arc::new(|_x, tau| DVector::from_vec(vec![1.5 * tau.sin()]));
        let f2: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(1));
        let sys = make_system(1, f1, f2, None, &unit_freq(), "sine").unwrap();
        assert!((sys.period() - 2.0 * PI).abs() < 1e-15);
        assert!(sys.warnings().is_empty(), "{:?}", sys.warnings());
    }

    #[test]
    fn sin_squared_fast_field_is_rejected() {
        // mean of sin² over a period is 1/2, which violates the zero-mean
        // requirement on f₁.
        let f1: Arc<FieldFn> = Arc::new(|_x, tau| DVector::from_vec(vec![tau.sin().powi(2)]));
        let f2: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(1));
        let err = make_system(1, f1, f2, None, &unit_freq(), "bad").unwrap_err();
        assert!(matches!(err, Error::NotZeroMean { worst } if worst > 0.4));
        assert!(err.to_string().contains("f1 not zero-mean"));
    }

    #[test]
    fn non_lipschitz_slow_field_is_fine() {
        // sin² belongs in f₂, where no zero-mean constraint applies.
        let f1: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(1));
        let f2: Arc<FieldFn> = Arc::new(|x, tau| {
            DVector::from_vec(vec![-x[0].abs().sqrt() * x[0].signum() * tau.sin().powi(2)])
        });
        let sys = make_system(1, f1, f2, None, &unit_freq(), "ex1").unwrap();
        assert!((sys.period() - 2.0 * PI).abs() < 1e-15);
        assert!(sys.warnings().is_empty());
    }

    #[test]
    fn aperiodic_field_produces_warnings() {
        let f1: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(1));
        let f2: Arc<FieldFn> = Arc::new(|_x, tau| DVector::from_vec(vec![0.1 * tau]));
        let sys = make_system(1, f1, f2, None, &unit_freq(), "ramp").unwrap();
        assert!(!sys.warnings().is_empty());
    }

    #[test]
    fn f_eps_combines_both_fields() {
        let f1: Arc<FieldFn> = Arc::new(|_x, tau| DVector::from_vec(vec![tau.sin()]));
        let f2: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::from_vec(vec![3.0]));
        let sys = make_system(1, f1, f2, None, &unit_freq(), "combo").unwrap();
        let v = sys.f_eps(&DVector::zeros(1), PI / 2.0, 0.1);
        assert!((v[0] - (10.0 + 3.0)).abs() < 1e-12);
    }
}
