//! Simulation and numerical verification of Lie-bracket extremum-seeking
//! systems in ℝⁿ.
//!
//! The library is organized around highly oscillatory systems of the form
//!
//! ```text
//! dx/dt = ε⁻¹ f₁(x, τ) + f₂(x, τ),      dτ/dt = ε⁻²,
//! ```
//!
//! where both fields share a common period `T` in the fast time `τ` and
//! `f₁` has zero τ-mean. The [`averaging`] module realizes the second-order
//! averaging machinery for such systems numerically: the smoothed fields
//! `f̂ₖ = φ·fₖ` obtained from the reverse bump function φ ([`bump`]), the
//! iterated integrals `v₁`, `w`, `v₂`, the averaged field `f̄`, the
//! near-identity map `Φ` with its fixed-point inverse, and the pushforward
//! residual split. The [`eslaws`] module builds the two extremum-seeking
//! feedback laws and the vibrational stabilization loop as closed-loop
//! [`core::OscillatorySystem`]s over the cost functions in [`costs`], and
//! [`sim`] integrates everything with a fixed-step RK4 scheme tied to the
//! fast period, including batch runs and empirical ultimate-bound
//! estimation. [`presets`] bundles the shipped experiment setups.

pub mod averaging;
pub mod bump;
pub mod core;
pub mod costs;
pub mod eslaws;
pub mod presets;
pub mod quad;
pub mod rng;
pub mod sim;

mod error;

pub use error::Error;

/// Crate-wide result type.
pub type Result<T> = std::result::Result<T, Error>;
