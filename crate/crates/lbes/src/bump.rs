//! The smooth "reverse" bump function φ and the δ-radius bookkeeping.
//!
//! φ vanishes inside radius δ₁, equals one outside radius δ₂, and blends
//! smoothly in the annulus between them. Multiplying a vector field by φ
//! excises whatever irregularity the field has near the origin while
//! leaving it untouched on the exterior set `M₂ = {|x| ≥ δ₂}`.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::core::FieldFn;
use crate::{Error, Result};

/// Margin ϵ = √3 − 1 used when no explicit margin is given; with it,
/// δ₂ = (1+ϵ)δ₁ and δ₃ = (4/3)(1+ϵ)δ₂ give δ₃ = 4δ₁.
pub fn default_eps_margin() -> f64 {
    3.0f64.sqrt() - 1.0
}

/// Annulus radii `(δ₁, δ₂, δ₃)` with margin ϵ, constrained by
/// δ₁ ≥ 0, δ₂ ≥ (1+ϵ)δ₁ and δ₃ > (1+ϵ)δ₂.
///
/// They induce the nested exterior sets `M₁ ⊇ M₂ ⊇ M₃` with
/// `Mⱼ = {|x| ≥ δⱼ}`. The degenerate choice δ₁ = δ₂ = 0 selects φ ≡ 1.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deltas {
    delta1: f64,
    delta2: f64,
    delta3: f64,
    eps_margin: f64,
}

impl Deltas {
    pub fn new(delta1: f64, delta2: f64, delta3: f64, eps_margin: f64) -> Result<Self> {
        if [delta1, delta2, delta3, eps_margin]
            .iter()
            .any(|v| !v.is_finite())
        {
            return Err(Error::InvalidDeltas("radii must be finite".into()));
        }
        if eps_margin <= 0.0 {
            return Err(Error::InvalidDeltas(format!(
                "eps_margin must be positive, got {eps_margin}"
            )));
        }
        if delta1 < 0.0 {
            return Err(Error::InvalidDeltas(format!(
                "delta1 must be nonnegative, got {delta1}"
            )));
        }
        if delta2 < (1.0 + eps_margin) * delta1 {
            return Err(Error::InvalidDeltas(format!(
                "delta2 = {delta2} violates delta2 >= (1+eps)*delta1 = {}",
                (1.0 + eps_margin) * delta1
            )));
        }
        if delta3 <= (1.0 + eps_margin) * delta2 {
            return Err(Error::InvalidDeltas(format!(
                "delta3 = {delta3} violates delta3 > (1+eps)*delta2 = {}",
                (1.0 + eps_margin) * delta2
            )));
        }
        Ok(Self {
            delta1,
            delta2,
            delta3,
            eps_margin,
        })
    }

    /// Radii with the default margin ϵ = √3 − 1.
    pub fn with_default_margin(delta1: f64, delta2: f64, delta3: f64) -> Result<Self> {
        Self::new(delta1, delta2, delta3, default_eps_margin())
    }

    /// Degenerate radii (0, 0, δ₃): φ ≡ 1, no field modification.
    pub fn identity(delta3: f64) -> Result<Self> {
        Self::with_default_margin(0.0, 0.0, delta3)
    }

    pub fn delta1(&self) -> f64 {
        self.delta1
    }

    pub fn delta2(&self) -> f64 {
        self.delta2
    }

    pub fn delta3(&self) -> f64 {
        self.delta3
    }

    pub fn eps_margin(&self) -> f64 {
        self.eps_margin
    }

    /// φ ≡ 1 everywhere (the δ₁ = δ₂ = 0 branch).
    pub fn is_degenerate(&self) -> bool {
        self.delta2 == 0.0
    }
}

/// `χ₁(r) = exp(−1/r)` for `r > 0`, zero otherwise. C^∞, values in [0, 1).
pub fn chi1(r: f64) -> f64 {
    // Below ~1e-15 the exponent underflows anyway; returning 0 avoids the
    // overflowing 1/r.
    if r < 1e-15 {
        0.0
    } else {
        (-1.0 / r).exp()
    }
}

/// Derivative of χ₁: `exp(−1/r)/r²` for `r > 0`, zero otherwise.
fn chi1_deriv(r: f64) -> f64 {
    if r < 1e-15 {
        0.0
    } else {
        (-1.0 / r).exp() / (r * r)
    }
}

/// `χ₂(r) = χ₁(r) / (χ₁(r) + χ₁(1−r))`: a C^∞ ramp that is 0 for r ≤ 0,
/// 1 for r ≥ 1 and monotone in between. The denominator never vanishes.
pub fn chi2(r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    if r >= 1.0 {
        return 1.0;
    }
    let a = chi1(r);
    a / (a + chi1(1.0 - r))
}

/// Derivative of χ₂ by the quotient rule; identically zero outside (0, 1).
fn chi2_deriv(r: f64) -> f64 {
    if r <= 0.0 || r >= 1.0 {
        return 0.0;
    }
    let a = chi1(r);
    let b = chi1(1.0 - r);
    let da = chi1_deriv(r);
    let db = chi1_deriv(1.0 - r);
    let denom = a + b;
    (da * b + a * db) / (denom * denom)
}

/// The reverse bump `φ(x) = χ₂((|x| − δ₁)/(δ₂ − δ₁))`, with φ ≡ 1 on the
/// degenerate branch δ₁ = δ₂ = 0.
///
/// Exactly 1 for |x| ≥ δ₂ and exactly 0 for |x| ≤ δ₁ when δ₂ > δ₁.
pub fn phi(x: &DVector<f64>, d: &Deltas) -> f64 {
    if d.is_degenerate() {
        return 1.0;
    }
    chi2((x.norm() - d.delta1) / (d.delta2 - d.delta1))
}

/// Radial-profile version of [`phi`] for scalar radius `r = |x|`.
pub fn phi_radial(r: f64, d: &Deltas) -> f64 {
    if d.is_degenerate() {
        return 1.0;
    }
    chi2((r - d.delta1) / (d.delta2 - d.delta1))
}

/// Analytic gradient `∇φ(x) = χ₂'(u)·x / (|x|(δ₂−δ₁))` with
/// `u = (|x|−δ₁)/(δ₂−δ₁)`; zero outside the open annulus δ₁ < |x| < δ₂.
pub fn grad_phi(x: &DVector<f64>, d: &Deltas) -> DVector<f64> {
    let n = x.len();
    if d.is_degenerate() {
        return DVector::zeros(n);
    }
    let r = x.norm();
    let width = d.delta2 - d.delta1;
    let u = (r - d.delta1) / width;
    if u <= 0.0 || u >= 1.0 || r == 0.0 {
        return DVector::zeros(n);
    }
    x * (chi2_deriv(u) / (width * r))
}

/// The modified field `f̂(x, τ) = φ(x)·f(x, τ)`: equal to `f` on
/// `M₂ = {|x| ≥ δ₂}` and identically zero on `{|x| ≤ δ₁}`.
pub fn hat_field(f: Arc<FieldFn>, d: Deltas) -> Arc<FieldFn> {
    Arc::new(move |x, tau| f(x, tau) * phi(x, &d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, FRAC_PI_2};

    // Radii (1, 2, 3) need a margin below 1/2; the default √3−1 would
    // demand δ₃ > 3.46.
    fn d123() -> Deltas {
        Deltas::new(1.0, 2.0, 3.0, 0.25).unwrap()
    }

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_vec(vec![x])
    }

    #[test]
    fn chi1_branches() {
        assert_eq!(chi1(-1.0), 0.0);
        assert_eq!(chi1(0.0), 0.0);
        assert!((chi1(1.0) - 1.0 / E).abs() < 1e-15);
        assert!(chi1(1e9) < 1.0);
    }

    #[test]
    fn chi2_endpoints_and_midpoint() {
        assert_eq!(chi2(0.0), 0.0);
        assert_eq!(chi2(1.0), 1.0);
        // χ₁(1/2) appears in both numerator and denominator.
        assert!((chi2(0.5) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn chi2_symmetry_identity_on_grid() {
        for k in 0..=1000 {
            let r = -0.2 + 1.4 * k as f64 / 1000.0;
            let s = chi2(r) + chi2(1.0 - r);
            assert!((s - 1.0).abs() < 1e-12, "identity broken at r = {r}: {s}");
        }
    }

    #[test]
    fn chi2_monotone_on_grid() {
        let mut prev = -1.0;
        for k in 0..=2000 {
            let v = chi2(-0.5 + 2.0 * k as f64 / 2000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn phi_plateaus_are_exact() {
        let d = d123();
        assert_eq!(phi(&vec1(3.0), &d), 1.0);
        assert_eq!(phi(&vec1(-2.0), &d), 1.0);
        assert_eq!(phi(&vec1(0.5), &d), 0.0);
        assert_eq!(phi(&vec1(0.0), &d), 0.0);
        let inside = phi(&vec1(1.5), &d);
        assert!(inside > 0.0 && inside < 1.0);
    }

    #[test]
    fn degenerate_branch_is_identically_one() {
        let d = Deltas::identity(1.0).unwrap();
        for x in [-7.0, 0.0, 0.3, 1e6] {
            assert_eq!(phi(&vec1(x), &d), 1.0);
        }
    }

    #[test]
    fn delta_constraints_enforced() {
        assert!(Deltas::with_default_margin(-0.1, 1.0, 3.0).is_err());
        assert!(Deltas::with_default_margin(1.0, 1.5, 5.0).is_err()); // δ₂ < (1+ϵ)δ₁
        assert!(Deltas::with_default_margin(0.0, 1.0, 1.0).is_err()); // δ₃ ≤ (1+ϵ)δ₂
        assert!(Deltas::new(1.0, 2.0, 3.0, 0.0).is_err());
        // Degenerate radii with an arbitrary δ₃ are fine.
        assert!(Deltas::identity(0.5).unwrap().is_degenerate());
    }

    #[test]
    fn membership_chain_is_nested() {
        let d = d123();
        assert!(d.delta1() <= d.delta2() && d.delta2() < d.delta3());
    }

    #[test]
    fn grad_phi_zero_outside_annulus() {
        let d = d123();
        for x in [0.0, 0.5, 1.0, 2.0, 3.5] {
            assert_eq!(grad_phi(&vec1(x), &d).norm(), 0.0, "at |x| = {x}");
        }
    }

    #[test]
    fn grad_phi_matches_finite_differences() {
        let d = d123();
        let h = 1e-6;
        for point in [
            vec![1.5, 0.0],
            vec![1.2, 0.9],
            vec![-1.1, 1.05],
            vec![0.8, 0.9],
        ] {
            let x = DVector::from_vec(point);
            let g = grad_phi(&x, &d);
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (phi(&xp, &d) - phi(&xm, &d)) / (2.0 * h);
                let scale = g[i].abs().max(1e-3);
                assert!(
                    (g[i] - fd).abs() / scale < 1e-6,
                    "component {i} at {x:?}: analytic {} vs fd {fd}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn phi_is_c1_across_the_transition_radii() {
        let d = d123();
        let h = 1e-5;
        let deriv = |r: f64| (phi_radial(r + h, &d) - phi_radial(r - h, &d)) / (2.0 * h);
        for r in [d.delta1(), d.delta2()] {
            let jump = (deriv(r + 2.0 * h) - deriv(r - 2.0 * h)).abs();
            assert!(jump < 1e-4, "derivative jump {jump} across r = {r}");
        }
    }

    #[test]
    fn hat_field_matches_branches() {
        let d = d123();
        let f: Arc<FieldFn> = Arc::new(|x, tau| {
            DVector::from_vec(vec![-x[0].abs().sqrt() * x[0].signum() * tau.sin().powi(2)])
        });
        let fh = hat_field(Arc::clone(&f), d);

        // Zero inside δ₁.
        assert_eq!(fh(&vec1(0.5), FRAC_PI_2)[0], 0.0);
        // Identical to f on M₂.
        let x = vec1(5.0);
        assert_eq!(fh(&x, FRAC_PI_2)[0], f(&x, FRAC_PI_2)[0]);

        // Degenerate deltas: pointwise equal everywhere.
        let fh1 = hat_field(Arc::clone(&f), Deltas::identity(1.0).unwrap());
        let x = vec1(0.37);
        assert_eq!(fh1(&x, 1.2)[0], f(&x, 1.2)[0]);
    }
}
