use serde::{Deserialize, Serialize};

use crate::core::State;
use crate::{Error, Result};

fn default_steps() -> usize {
    200
}

fn default_stride() -> usize {
    1
}

/// Integration settings for one oscillatory run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Small parameter ε ∈ (0, 1].
    pub epsilon: f64,
    /// Slow-time horizon.
    pub t_final: f64,
    /// Fixed RK4 steps per fast period (≥ 16), so `dt = ε²·T/steps`.
    #[serde(default = "default_steps")]
    pub steps_per_fast_period: usize,
    pub x0: State,
    /// Initial fast time τ₀ ≥ 0.
    #[serde(default)]
    pub tau0: f64,
    /// Seed for batch initial-condition sampling.
    #[serde(default)]
    pub seed: u64,
    /// Output decimation: record every `record_stride`-th step.
    #[serde(default = "default_stride")]
    pub record_stride: usize,
}

impl SimConfig {
    pub fn new(epsilon: f64, t_final: f64, x0: State) -> Result<Self> {
        let cfg = Self {
            epsilon,
            t_final,
            steps_per_fast_period: default_steps(),
            x0,
            tau0: 0.0,
            seed: 0,
            record_stride: 1,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_steps(mut self, steps: usize) -> Result<Self> {
        self.steps_per_fast_period = steps;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Result<Self> {
        self.record_stride = stride;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must lie in (0, 1], got {}",
                self.epsilon
            )));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "t_final must be positive, got {}",
                self.t_final
            )));
        }
        if self.steps_per_fast_period < 16 {
            return Err(Error::InvalidConfig(format!(
                "steps_per_fast_period must be at least 16, got {}",
                self.steps_per_fast_period
            )));
        }
        if !(self.tau0 >= 0.0 && self.tau0.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "tau0 must be nonnegative, got {}",
                self.tau0
            )));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidConfig(
                "record_stride must be positive".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x0() -> State {
        State::new(vec![1.0]).unwrap()
    }

    #[test]
    fn accepts_valid_config() {
        let cfg = SimConfig::new(0.1, 10.0, x0()).unwrap();
        assert_eq!(cfg.steps_per_fast_period, 200);
        assert_eq!(cfg.record_stride, 1);
    }

    #[test]
    fn rejects_out_of_range_epsilon() {
        assert!(SimConfig::new(0.0, 10.0, x0()).is_err());
        assert!(SimConfig::new(1.5, 10.0, x0()).is_err());
        assert!(SimConfig::new(-0.1, 10.0, x0()).is_err());
    }

    #[test]
    fn rejects_too_few_steps() {
        assert!(SimConfig::new(0.1, 10.0, x0()).unwrap().with_steps(8).is_err());
        assert!(SimConfig::new(0.1, 10.0, x0()).unwrap().with_steps(16).is_ok());
    }

    #[test]
    fn config_serde_round_trip() {
        let cfg = SimConfig::new(0.05, 200.0, x0())
            .unwrap()
            .with_seed(42)
            .with_stride(100)
            .unwrap();
        let json = serde_json::to_string(&cfg).unwrap();
        let back: SimConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(cfg, back);
    }
}
