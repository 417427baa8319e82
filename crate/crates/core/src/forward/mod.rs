//! Synthetic data: phantoms, the explicit wave solver, trace extraction,
//! projection and noise.

pub mod cauchy;
pub mod model;
pub mod phantom;
pub mod wave;

pub use cauchy::{add_noise, add_noise_projected, extract_cauchy, project_cauchy, BoundaryVectors, CauchyData, TraceRecorder};
pub use model::{initial_denominator, InitialField, Nonlinearity};
pub use phantom::{make_phantom, PhantomKind, Potential, Shape};
pub use wave::{check_cfl, solve_wave, solve_wave_forced, solve_wave_observed, StartRule, WaveField, WaveProblem};
