//! Mean-field GDA: particles, coupling, equilibria and transport distances.

pub mod coupling;
pub mod experiment;
pub mod kappa;
pub mod kernel;
pub mod mne;
pub mod particles;
pub mod transport;

pub use coupling::{coupled_step, rc_ramp, sc_of, CoupledPair, TracePoint};
pub use experiment::{contraction_experiment, ContractionReport, CouplingInit, CouplingParams};
pub use kappa::{kappa_profile, KappaEstimate, KappaSampling, MeasureRef};
pub use kernel::{verify_geometry, BenchmarkKernel, GameKernel, Geometry, Side};
pub use mne::{mne_fixed_point, tensor_grid, GridMeasurePair, MneOptions, MneResult};
pub use particles::{step_particles, ParticleSystem};
pub use transport::{wasserstein1, WeightedPoints};
