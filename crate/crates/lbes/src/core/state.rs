use nalgebra::DVector;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::{Error, Result};

/// A validated state vector in ℝⁿ: finite entries, dimension fixed at
/// construction and at least 1.
///
/// `State` guards the API boundary (configs, presets, CLI input); the hot
/// integration and quadrature loops work on the underlying
/// [`DVector<f64>`] directly.
#[derive(Clone, Debug, PartialEq)]
pub struct State(DVector<f64>);

impl State {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::EmptyState);
        }
        if components.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        Ok(Self(DVector::from_vec(components)))
    }

    pub fn from_vector(v: DVector<f64>) -> Result<Self> {
        Self::new(v.iter().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.0
    }
}

impl std::ops::Deref for State {
    type Target = DVector<f64>;

    fn deref(&self) -> &Self::Target {
        &self.0
    }
}

impl Serialize for State {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.0.as_slice().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for State {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let components = Vec::<f64>::deserialize(deserializer)?;
        State::new(components).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(matches!(State::new(vec![]), Err(Error::EmptyState)));
        assert!(matches!(
            State::new(vec![1.0, f64::NAN]),
            Err(Error::NonFiniteState)
        ));
        assert!(matches!(
            State::new(vec![f64::INFINITY]),
            Err(Error::NonFiniteState)
        ));
    }

    #[test]
    fn accepts_finite_vectors() {
        let s = State::new(vec![1.0, -2.5]).unwrap();
        assert_eq!(s.dim(), 2);
        assert_eq!(s[1], -2.5);
    }

    #[test]
    fn serde_round_trip() {
        let s = State::new(vec![3.0, 4.0]).unwrap();
        let json = serde_json::to_string(&s).unwrap();
        let back: State = serde_json::from_str(&json).unwrap();
        assert_eq!(s, back);
    }

    #[test]
    fn serde_rejects_nan() {
        assert!(serde_json::from_str::<State>("[1.0,null]").is_err());
    }
}
