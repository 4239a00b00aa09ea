//! Shipped experiment setups: the non-Lipschitz scalar system, the
//! vibrational double integrator, and the two extremum-seeking loops.
//!
//! Presets carry paper-scale minimizers by default; the `_at` constructors
//! rebuild the same loop around an arbitrary minimizer for desk-scale
//! verification runs, where the huge offsets would otherwise eat floating
//! point precision.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::bump::Deltas;
use crate::core::{make_system, FieldFn, OscillatorySystem, Rational, SimConfig, State};
use crate::costs::{cost_nonconvex_sin, cost_tanh_norm, CostFunction, DriftField};
use crate::eslaws::{
    assemble_es_system, assemble_vibrational_system, ControlDirections, EsLaw, Frequencies,
};
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 4] = [
    "example1_nonlipschitz",
    "example2_vibrational",
    "example5_law1_nonconvex",
    "example6_law2_bounded",
];

/// A fully-specified experiment: system, bump radii, and default
/// integration settings.
#[derive(Debug)]
pub struct Preset {
    pub name: &'static str,
    pub system: Arc<OscillatorySystem>,
    pub deltas: Deltas,
    pub sim: SimConfig,
    pub kind: PresetKind,
}

/// What the preset is made of, for consumers that need the ingredients
/// (descent checks, closed-form references).
#[derive(Debug)]
#[allow(clippy::large_enum_variant)]
pub enum PresetKind {
    NonLipschitz,
    Vibrational {
        b: DMatrix<f64>,
        gamma1: f64,
        gamma2: f64,
    },
    ExtremumSeeking {
        cost: CostFunction,
        drift: DriftField,
        dirs: ControlDirections,
        freqs: Frequencies,
        law: EsLaw,
    },
}

impl Preset {
    /// The ES ingredients, when this preset is a cost-seeking loop.
    pub fn es_parts(&self) -> Option<(&CostFunction, &DriftField, &ControlDirections, &Frequencies, EsLaw)> {
        match &self.kind {
            PresetKind::ExtremumSeeking {
                cost,
                drift,
                dirs,
                freqs,
                law,
            } => Some((cost, drift, dirs, freqs, *law)),
            _ => None,
        }
    }
}

fn v2(a: f64, b: f64) -> DVector<f64> {
    DVector::from_vec(vec![a, b])
}

/// Initial offset of norm 1000 used by the ES presets.
fn diagonal_offset() -> DVector<f64> {
    let c = 1000.0 / 2.0f64.sqrt();
    v2(c, -c)
}

/// Scalar system `dx/dt = −|x|^{1/2}·sign(x)·sin²(τ)`: continuous but not
/// Lipschitz at the origin, with averaged flow `−½|x|^{1/2}·sign(x)`.
pub fn example1_nonlipschitz() -> Preset {
    let f1: Arc<FieldFn> = Arc::new(|_x, _tau| DVector::zeros(1));
    let f2: Arc<FieldFn> = Arc::new(|x, tau| {
        DVector::from_vec(vec![-x[0].abs().sqrt() * x[0].signum() * tau.sin().powi(2)])
    });
    let system = Arc::new(
        make_system(1, f1, f2, None, &[Rational::integer(1)], "example1_nonlipschitz")
            .expect("preset system is valid"),
    );
    let sim = SimConfig {
        epsilon: 0.05,
        t_final: 200.0,
        steps_per_fast_period: 200,
        x0: State::new(vec![100.0]).expect("finite"),
        tau0: 0.0,
        seed: 1,
        record_stride: 100,
    };
    Preset {
        name: "example1_nonlipschitz",
        system,
        deltas: Deltas::identity(1.0).expect("valid deltas"),
        sim,
        kind: PresetKind::NonLipschitz,
    }
}

/// Double integrator `ẋ = v`, `v̇ = ε⁻¹·B·u` under the log-phase dither on
/// `V = |γ₁x + γ₂v|² + ½`, with B = (1,1;1,−1), γ₁ = ¾, γ₂ = 1 and the
/// large initial condition x(0) = (10⁶, −10⁶), v(0) = (10³, −10³).
pub fn example2_vibrational() -> Preset {
    let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
    let (gamma1, gamma2) = (0.75, 1.0);
    let system = Arc::new(
        assemble_vibrational_system(b.clone(), gamma1, gamma2).expect("preset system is valid"),
    );
    let sim = SimConfig {
        epsilon: 1.0 / (8.0 * std::f64::consts::PI).sqrt(),
        t_final: 20.0,
        steps_per_fast_period: 200,
        x0: State::new(vec![1e6, -1e6, 1e3, -1e3]).expect("finite"),
        tau0: 0.0,
        seed: 2,
        record_stride: 20,
    };
    Preset {
        name: "example2_vibrational",
        system,
        deltas: Deltas::identity(1.0).expect("valid deltas"),
        sim,
        kind: PresetKind::Vibrational { b, gamma1, gamma2 },
    }
}

/// Law-1 loop over the nonconvex sinusoidal cost with destabilizing drift
/// `b₀ = ½(x − x*)`: γ = 1, κ₃ = 0.8, ε = 1/√(4π), minimizer at the given
/// point.
pub fn example5_law1_nonconvex_at(x_star: DVector<f64>) -> Preset {
    let cost = cost_nonconvex_sin(x_star.clone());
    let drift = DriftField::linear_destabilizing(0.5, x_star.clone(), 0.8);
    let dirs = ControlDirections::new(vec![[v2(1.0, 0.0), v2(0.0, 1.0)]], 1.0)
        .expect("identity directions are exciting");
    let freqs = Frequencies::small_integers(1);
    let system = Arc::new(
        assemble_es_system(&cost, &drift, &dirs, &freqs, EsLaw::Law1)
            .expect("preset system is valid"),
    );
    let sim = SimConfig {
        epsilon: 1.0 / (4.0 * std::f64::consts::PI).sqrt(),
        t_final: 60.0,
        steps_per_fast_period: 200,
        x0: State::from_vector(diagonal_offset()).expect("finite"),
        tau0: 0.0,
        seed: 5,
        record_stride: 50,
    };
    Preset {
        name: "example5_law1_nonconvex",
        system,
        deltas: Deltas::identity(0.5).expect("valid deltas"),
        sim,
        kind: PresetKind::ExtremumSeeking {
            cost,
            drift,
            dirs,
            freqs,
            law: EsLaw::Law1,
        },
    }
}

/// [`example5_law1_nonconvex_at`] with the default minimizer
/// `x* = (10¹⁰, −10¹⁰)`. Note the state here is the shifted coordinate
/// `x̃ = x − x*`, so the huge offset only enters through the cost.
pub fn example5_law1_nonconvex() -> Preset {
    example5_law1_nonconvex_at(v2(1e10, -1e10))
}

/// Law-2 loop over the tanh-regularized norm cost, no drift,
/// b = ((2,0),(0,2)): γ = 2, κ₃ = 0, ε = 1/√(4π).
pub fn example6_law2_bounded_at(x_star: DVector<f64>) -> Preset {
    let cost = cost_tanh_norm(x_star);
    let drift = DriftField::none(2);
    let dirs = ControlDirections::new(vec![[v2(2.0, 0.0), v2(0.0, 2.0)]], 2.0)
        .expect("scaled directions are exciting");
    let freqs = Frequencies::small_integers(1);
    let system = Arc::new(
        assemble_es_system(&cost, &drift, &dirs, &freqs, EsLaw::Law2)
            .expect("preset system is valid"),
    );
    let sim = SimConfig {
        epsilon: 1.0 / (4.0 * std::f64::consts::PI).sqrt(),
        t_final: 350.0,
        steps_per_fast_period: 200,
        x0: State::from_vector(diagonal_offset()).expect("finite"),
        tau0: 0.0,
        seed: 6,
        record_stride: 200,
    };
    Preset {
        name: "example6_law2_bounded",
        system,
        deltas: Deltas::identity(0.5).expect("valid deltas"),
        sim,
        kind: PresetKind::ExtremumSeeking {
            cost,
            drift,
            dirs,
            freqs,
            law: EsLaw::Law2,
        },
    }
}

/// [`example6_law2_bounded_at`] with the default minimizer `x* = (10³, −10³)`.
pub fn example6_law2_bounded() -> Preset {
    example6_law2_bounded_at(v2(1e3, -1e3))
}

/// Look up a preset by its CLI name.
pub fn by_name(name: &str) -> Result<Preset> {
    match name {
        "example1_nonlipschitz" => Ok(example1_nonlipschitz()),
        "example2_vibrational" => Ok(example2_vibrational()),
        "example5_law1_nonconvex" => Ok(example5_law1_nonconvex()),
        "example6_law2_bounded" => Ok(example6_law2_bounded()),
        other => Err(Error::UnknownPreset(
            other.to_string(),
            PRESET_NAMES.join(", "),
        )),
    }
}

/// All four shipped presets.
pub fn all() -> Vec<Preset> {
    PRESET_NAMES
        .iter()
        .map(|n| by_name(n).expect("shipped preset"))
        .collect()
}

/// The linear map matched by the quadrature average of the vibrational
/// loop: blocks `(0, I; −2γ₁γ₂BBᵀ, −2γ₂²BBᵀ)`.
///
/// The factor 2 in the lower blocks comes from the gradient of the squared
/// norm inside `V`; the quadrature average and trajectory-level
/// simulations both confirm it.
pub fn vibrational_averaged_matrix(b: &DMatrix<f64>, gamma1: f64, gamma2: f64) -> DMatrix<f64> {
    let n = b.nrows();
    let bbt = b * b.transpose();
    let mut a = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        a[(i, n + i)] = 1.0;
    }
    a.view_mut((n, 0), (n, n))
        .copy_from(&(&bbt * (-2.0 * gamma1 * gamma2)));
    a.view_mut((n, n), (n, n))
        .copy_from(&(&bbt * (-2.0 * gamma2 * gamma2)));
    a
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_build_cleanly() {
        for p in all() {
            assert!(p.system.warnings().is_empty(), "{}: {:?}", p.name, p.system.warnings());
            assert!(p.sim.validate().is_ok());
        }
    }

    #[test]
    fn by_name_rejects_unknown() {
        let err = by_name("example9_mystery").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("example9_mystery"));
        assert!(msg.contains("example1_nonlipschitz"), "must list presets: {msg}");
    }

    #[test]
    fn preset_parameters_match_declared_constants() {
        let p5 = example5_law1_nonconvex();
        let (cost, drift, dirs, _freqs, law) = p5.es_parts().unwrap();
        assert_eq!(law, EsLaw::Law1);
        assert_eq!(dirs.gamma(), 1.0);
        assert_eq!(drift.kappa3(), 0.8);
        assert_eq!(cost.j_star(), 1.0);
        assert!((p5.sim.epsilon - 1.0 / (4.0 * std::f64::consts::PI).sqrt()).abs() < 1e-15);

        let p6 = example6_law2_bounded();
        let (cost, drift, dirs, _freqs, law) = p6.es_parts().unwrap();
        assert_eq!(law, EsLaw::Law2);
        assert_eq!(dirs.gamma(), 2.0);
        assert_eq!(drift.kappa3(), 0.0);
        assert_eq!(cost.m_j(), Some(2.0));
    }

    #[test]
    fn vibrational_matrix_blocks() {
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let a = vibrational_averaged_matrix(&b, 0.75, 1.0);
        // BBᵀ = 2I, so the lower-left block is −3I and the lower-right −4I.
        assert_eq!(a[(0, 2)], 1.0);
        assert_eq!(a[(2, 0)], -3.0);
        assert_eq!(a[(3, 1)], -3.0);
        assert_eq!(a[(2, 2)], -4.0);
        assert_eq!(a[(3, 3)], -4.0);
        assert_eq!(a[(2, 1)], 0.0);
    }
}
