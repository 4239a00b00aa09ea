//! Experiment configuration: a single JSON document whose fields mirror
//! the preset ingredients. Named presets fully populate every field;
//! explicit fields in a user config override the preset values.
//! Rational frequencies are encoded as strings `"p/q"` so they survive
//! serialization exactly.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use lbes::bump::{default_eps_margin, Deltas};
use lbes::core::{OscillatorySystem, Rational, SimConfig, State};
use lbes::costs::{cost_nonconvex_sin, cost_quadratic, cost_tanh_norm, CostFunction, DriftField};
use lbes::eslaws::{
    assemble_es_system, assemble_vibrational_system, ControlDirections, EsLaw, Frequencies,
};
use lbes::presets::{self, PresetKind};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostSpec {
    NonconvexSin { x_star: Vec<f64> },
    TanhNorm { x_star: Vec<f64> },
    Quadratic { x_star: Vec<f64>, h: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DriftSpec {
    None,
    LinearDestabilizing { coeff: f64, kappa3: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VibrationalSpec {
    pub b: Vec<Vec<f64>>,
    pub gamma1: f64,
    pub gamma2: f64,
}

/// Field-wise overridable integration settings.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimOverrides {
    pub epsilon: Option<f64>,
    pub t_final: Option<f64>,
    pub steps_per_fast_period: Option<usize>,
    pub x0: Option<Vec<f64>>,
    pub tau0: Option<f64>,
    pub seed: Option<u64>,
    pub record_stride: Option<usize>,
}

impl SimOverrides {
    fn from_config(cfg: &SimConfig) -> Self {
        Self {
            epsilon: Some(cfg.epsilon),
            t_final: Some(cfg.t_final),
            steps_per_fast_period: Some(cfg.steps_per_fast_period),
            x0: Some(cfg.x0.as_vector().iter().copied().collect()),
            tau0: Some(cfg.tau0),
            seed: Some(cfg.seed),
            record_stride: Some(cfg.record_stride),
        }
    }

    fn merge_over(&self, base: &Self) -> Self {
        Self {
            epsilon: self.epsilon.or(base.epsilon),
            t_final: self.t_final.or(base.t_final),
            steps_per_fast_period: self.steps_per_fast_period.or(base.steps_per_fast_period),
            x0: self.x0.clone().or_else(|| base.x0.clone()),
            tau0: self.tau0.or(base.tau0),
            seed: self.seed.or(base.seed),
            record_stride: self.record_stride.or(base.record_stride),
        }
    }

    fn build(&self) -> Result<SimConfig, CliError> {
        let epsilon = self
            .epsilon
            .ok_or_else(|| CliError::config("sim.epsilon is required"))?;
        let t_final = self
            .t_final
            .ok_or_else(|| CliError::config("sim.t_final is required"))?;
        let x0 = self
            .x0
            .clone()
            .ok_or_else(|| CliError::config("sim.x0 is required"))?;
        let cfg = SimConfig {
            epsilon,
            t_final,
            steps_per_fast_period: self.steps_per_fast_period.unwrap_or(200),
            x0: State::new(x0).map_err(CliError::from_lbes)?,
            tau0: self.tau0.unwrap_or(0.0),
            seed: self.seed.unwrap_or(0),
            record_stride: self.record_stride.unwrap_or(1),
        };
        cfg.validate().map_err(CliError::from_lbes)?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DeltasSpec {
    pub delta1: Option<f64>,
    pub delta2: Option<f64>,
    pub delta3: Option<f64>,
    pub eps_margin: Option<f64>,
}

impl DeltasSpec {
    fn from_deltas(d: &Deltas) -> Self {
        Self {
            delta1: Some(d.delta1()),
            delta2: Some(d.delta2()),
            delta3: Some(d.delta3()),
            eps_margin: Some(d.eps_margin()),
        }
    }

    fn merge_over(&self, base: &Self) -> Self {
        Self {
            delta1: self.delta1.or(base.delta1),
            delta2: self.delta2.or(base.delta2),
            delta3: self.delta3.or(base.delta3),
            eps_margin: self.eps_margin.or(base.eps_margin),
        }
    }

    fn build(&self) -> Result<Deltas, CliError> {
        Deltas::new(
            self.delta1.unwrap_or(0.0),
            self.delta2.unwrap_or(0.0),
            self.delta3.unwrap_or(1.0),
            self.eps_margin.unwrap_or_else(default_eps_margin),
        )
        .map_err(CliError::from_lbes)
    }
}

/// The experiment document. Either `vibrational` or the cost-loop fields
/// (`cost`, `directions`, `gamma`, `frequencies`, `law`) describe the
/// system; `experiment` names a preset that fills in everything.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSpec>,
    /// `r` channels of two direction vectors each.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directions: Option<Vec<[Vec<f64>; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    /// Rationals as strings, e.g. `["1", "3/4"]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequencies: Option<Vec<Rational>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<u8>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vibrational: Option<VibrationalSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimOverrides>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<DeltasSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

impl ExperimentConfig {
    /// Fully-populated config for a named preset.
    pub fn for_preset(name: &str) -> Result<Self, CliError> {
        let preset = presets::by_name(name).map_err(CliError::from_lbes)?;
        let mut cfg = ExperimentConfig {
            experiment: Some(preset.name.to_string()),
            sim: Some(SimOverrides::from_config(&preset.sim)),
            deltas: Some(DeltasSpec::from_deltas(&preset.deltas)),
            output_dir: Some("out".into()),
            ..Default::default()
        };
        match &preset.kind {
            PresetKind::NonLipschitz => {}
            PresetKind::Vibrational { b, gamma1, gamma2 } => {
                cfg.vibrational = Some(VibrationalSpec {
                    b: matrix_rows(b),
                    gamma1: *gamma1,
                    gamma2: *gamma2,
                });
            }
            PresetKind::ExtremumSeeking {
                cost,
                drift,
                dirs,
                freqs,
                law,
            } => {
                cfg.cost = Some(match cost.name() {
                    "nonconvex_sin" => CostSpec::NonconvexSin {
                        x_star: cost.x_star().iter().copied().collect(),
                    },
                    "tanh_norm" => CostSpec::TanhNorm {
                        x_star: cost.x_star().iter().copied().collect(),
                    },
                    other => {
                        return Err(CliError::config(format!("unhandled preset cost {other}")))
                    }
                });
                cfg.drift = Some(if drift.kappa3() == 0.0 {
                    DriftSpec::None
                } else {
                    DriftSpec::LinearDestabilizing {
                        coeff: drift.l0(),
                        kappa3: drift.kappa3(),
                    }
                });
                cfg.directions = Some(
                    dirs.channels()
                        .iter()
                        .map(|pair| {
                            [
                                pair[0].iter().copied().collect(),
                                pair[1].iter().copied().collect(),
                            ]
                        })
                        .collect(),
                );
                cfg.gamma = Some(dirs.gamma());
                cfg.frequencies = Some(freqs.as_slice().to_vec());
                cfg.law = Some(law.index());
            }
        }
        Ok(cfg)
    }

    /// Overlay `self` on top of `base`; fields present here win.
    pub fn merge_over(&self, base: &Self) -> Self {
        Self {
            experiment: self.experiment.clone().or_else(|| base.experiment.clone()),
            cost: self.cost.clone().or_else(|| base.cost.clone()),
            drift: self.drift.clone().or_else(|| base.drift.clone()),
            directions: self.directions.clone().or_else(|| base.directions.clone()),
            gamma: self.gamma.or(base.gamma),
            frequencies: self
                .frequencies
                .clone()
                .or_else(|| base.frequencies.clone()),
            law: self.law.or(base.law),
            vibrational: self
                .vibrational
                .clone()
                .or_else(|| base.vibrational.clone()),
            sim: match (&self.sim, &base.sim) {
                (Some(a), Some(b)) => Some(a.merge_over(b)),
                (a, b) => a.clone().or_else(|| b.clone()),
            },
            deltas: match (&self.deltas, &base.deltas) {
                (Some(a), Some(b)) => Some(a.merge_over(b)),
                (a, b) => a.clone().or_else(|| b.clone()),
            },
            output_dir: self.output_dir.clone().or_else(|| base.output_dir.clone()),
        }
    }
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(CliError::config("matrix rows must be nonempty and rectangular"));
    }
    let flat: Vec<f64> = rows.iter().flatten().copied().collect();
    Ok(DMatrix::from_row_slice(n, rows[0].len(), &flat))
}

/// A config resolved into executable pieces.
pub struct ResolvedExperiment {
    pub name: String,
    pub system: Arc<OscillatorySystem>,
    pub deltas: Deltas,
    pub sim: SimConfig,
    pub cost: Option<CostFunction>,
    pub output_dir: String,
}

/// Builds the system described by a (merged, fully populated) config.
pub fn resolve(cfg: &ExperimentConfig) -> Result<ResolvedExperiment, CliError> {
    let name = cfg
        .experiment
        .clone()
        .unwrap_or_else(|| "custom".to_string());
    let sim = cfg
        .sim
        .as_ref()
        .ok_or_else(|| CliError::config("sim settings are required"))?
        .build()?;
    let deltas = cfg.deltas.clone().unwrap_or_default().build()?;
    let output_dir = cfg.output_dir.clone().unwrap_or_else(|| "out".into());

    if cfg.vibrational.is_some() && cfg.cost.is_some() {
        return Err(CliError::config(
            "config must describe either a vibrational loop or a cost loop, not both",
        ));
    }

    if let Some(v) = &cfg.vibrational {
        let b = matrix_from_rows(&v.b)?;
        let system = assemble_vibrational_system(b, v.gamma1, v.gamma2)
            .map_err(CliError::from_lbes)?;
        return Ok(ResolvedExperiment {
            name,
            system: Arc::new(system),
            deltas,
            sim,
            cost: None,
            output_dir,
        });
    }

    if let Some(cost_spec) = &cfg.cost {
        let cost = build_cost(cost_spec)?;
        let drift = match cfg.drift.clone().unwrap_or(DriftSpec::None) {
            DriftSpec::None => DriftField::none(cost.dim()),
            DriftSpec::LinearDestabilizing { coeff, kappa3 } => {
                DriftField::linear_destabilizing(coeff, cost.x_star().clone(), kappa3)
            }
        };
        let dirs_spec = cfg
            .directions
            .as_ref()
            .ok_or_else(|| CliError::config("directions are required for a cost loop"))?;
        let gamma = cfg
            .gamma
            .ok_or_else(|| CliError::config("gamma is required for a cost loop"))?;
        let channels: Vec<[DVector<f64>; 2]> = dirs_spec
            .iter()
            .map(|pair| {
                [
                    DVector::from_vec(pair[0].clone()),
                    DVector::from_vec(pair[1].clone()),
                ]
            })
            .collect();
        let dirs = ControlDirections::new(channels, gamma).map_err(CliError::from_lbes)?;
        let freqs = Frequencies::new(
            cfg.frequencies
                .clone()
                .ok_or_else(|| CliError::config("frequencies are required for a cost loop"))?,
        )
        .map_err(CliError::from_lbes)?;
        let law = EsLaw::from_index(
            cfg.law
                .ok_or_else(|| CliError::config("law (1 or 2) is required for a cost loop"))?,
        )
        .map_err(CliError::from_lbes)?;
        let system =
            assemble_es_system(&cost, &drift, &dirs, &freqs, law).map_err(CliError::from_lbes)?;
        return Ok(ResolvedExperiment {
            name,
            system: Arc::new(system),
            deltas,
            sim,
            cost: Some(cost),
            output_dir,
        });
    }

    // Neither vibrational nor cost loop: only the shipped non-Lipschitz
    // preset has a bare system.
    if name == "example1_nonlipschitz" {
        let p = presets::example1_nonlipschitz();
        return Ok(ResolvedExperiment {
            name,
            system: p.system,
            deltas,
            sim,
            cost: None,
            output_dir,
        });
    }
    Err(CliError::config(
        "config must name a preset or describe a vibrational/cost loop",
    ))
}

fn build_cost(spec: &CostSpec) -> Result<CostFunction, CliError> {
    Ok(match spec {
        CostSpec::NonconvexSin { x_star } => cost_nonconvex_sin(DVector::from_vec(x_star.clone())),
        CostSpec::TanhNorm { x_star } => cost_tanh_norm(DVector::from_vec(x_star.clone())),
        CostSpec::Quadratic { x_star, h } => {
            let hm = matrix_from_rows(h)?;
            cost_quadratic(DVector::from_vec(x_star.clone()), hm).map_err(CliError::from_lbes)?
        }
    })
}
