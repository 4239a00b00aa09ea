//! Domain types shared by all modules: validated state vectors, exact
//! rational dither frequencies, oscillatory two-field systems, and the
//! simulation configuration.

mod config;
mod rational;
mod state;
mod system;

pub use config::SimConfig;
pub use rational::{common_period, Rational};
pub use state::State;
pub use system::{make_system, FieldFn, JacFn, OscillatorySystem};
