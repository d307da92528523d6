//! Qubit dynamics in a two-layer hierarchical cavity environment.
//!
//! A qubit couples to a lossy cavity m₀, which in turn couples to two mutually
//! coupled cavities m₁, m₂ whose reservoirs are either memoryless or
//! Lorentzian. The crate integrates the single-excitation amplitude equations,
//! evaluates trace-distance non-Markovianity and the quantum speed limit
//! ratio, and runs parameter sweeps over the couplings.
//!
//! All rates are in units of Γ₀ (the loss rate of m₀) and times in 1/Γ₀.

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod measures;
pub mod model;
pub mod svg;
pub mod sweep;

pub use dynamics::{
    integrate, integrate_expm, integrate_volterra, simulate, AmplitudeTrajectory, SolverConfig,
};
pub use error::{Error, Result};
pub use measures::{measure, MeasureReport, QubitDensity};
pub use model::{
    build_generator, classify_regime, validate, GeneratorMatrix, ModelParams, RegimeLabel,
    ScanParameter, SecondLayerEnv,
};
pub use sweep::{find_crossover, run_sweep, SweepResult, SweepSpec};
