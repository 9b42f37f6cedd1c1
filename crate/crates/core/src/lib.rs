//! Simulation of geometrical-optical illusions as a perceptual strain.
//!
//! A stimulus is lifted to an orientation score with a bank of complex Gabor
//! filters, the normalized orientation energy polarizes a cometric on the
//! image plane, and its regularized inverse is treated as the strain of a
//! small deformation. Two Neumann-Poisson problems then yield the displacement
//! that turns the drawn figure into the predicted percept.
//!
//! ```no_run
//! use goi_core::pipeline::{run_pipeline, PipelineConfig};
//!
//! let config = PipelineConfig::preset("hering").unwrap();
//! let run = run_pipeline(&config).unwrap();
//! for line in &run.metrics.lines {
//!     println!("{:+.3} px", line.mid_deflection);
//! }
//! ```

pub mod error;
pub mod gabor;
pub mod pipeline;
pub mod raster;
pub mod response;
pub mod solver;
pub mod stimulus;
pub mod tensor;
pub mod warp;

pub use error::{Error, ErrorCategory, Result};
pub use gabor::{build_bank, GaborBank, GaborFilter, GaborParams};
pub use raster::{load_image, save_image, RasterImage};
pub use response::{energy, lift, normalized_weights, EnergyField, OrientationResponse};
pub use solver::{solve_displacement, solve_neumann_poisson, DisplacementField, SolveReport, SolverParams};
pub use stimulus::{generate, Stimulus, StimulusKind, StimulusSpec, TargetLine};
pub use tensor::{cometric, invert_to_metric, SymTensorField, TensorParams};
pub use warp::{deflection_metrics, displace_points, warp_image, DeflectionMetrics};
