//! Sound source localization with the steered-response power phase transform
//! (SRP-PHAT) and its low-rank accelerated form, SVD-PHAT.
//!
//! The exact method scores every candidate direction of a spherical scan grid
//! against the PHAT-whitened cross-spectra of all microphone pairs. The
//! accelerated method factorizes the steering matrix once, offline, projects
//! each observation onto the leading right singular vectors and finds the best
//! direction with an exact nearest-neighbor query over a normalized dictionary.
//!
//! Module map:
//!
//! - [`geometry`]: array configurations, scan grids, time differences of arrival.
//! - [`spectral`]: sine-window STFT and PHAT cross-spectrum assembly.
//! - [`srp`]: steering matrix and the exhaustive baseline.
//! - [`svd`]: offline factorization, online projection and localization, model files.
//! - [`nn_index`]: exact k-d tree over the normalized dictionary.
//! - [`sim`]: free-field scene simulation, error metrics and the rank sweep benchmark.
//! - [`audio`]: multichannel WAV input and output.
//!
//! ```
//! use svdphat::geometry::{ArrayConfig, ScanGrid};
//! use svdphat::srp::SteeringMatrix;
//! use svdphat::svd::SvdPhatModel;
//!
//! let config = ArrayConfig::preset("3d").unwrap();
//! let grid = ScanGrid::icosphere(2).unwrap();
//! let steering = SteeringMatrix::build(&config, &grid).unwrap();
//! let model = SvdPhatModel::fit(&steering, 1e-3).unwrap();
//!
//! // A cross-spectrum that matches grid point 17 exactly.
//! let x = steering.matched_observation(17);
//! assert_eq!(model.localize(&x).unwrap().index, 17);
//! ```

pub mod audio;
mod codec;
mod error;
pub mod geometry;
pub mod nn_index;
pub mod sim;
pub mod spectral;
pub mod srp;
pub mod svd;

pub use error::{Error, Result};

/// Cartesian 3-vector in meters (positions) or a dimensionless direction.
pub type Vec3 = [f64; 3];

pub use num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/geometry.md")]
    mod geometry {}
    #[doc = include_str!("../../../book/src/srp_phat.md")]
    mod srp_phat {}
    #[doc = include_str!("../../../book/src/svd_phat.md")]
    mod svd_phat {}
    #[doc = include_str!("../../../book/src/nearest_neighbor.md")]
    mod nearest_neighbor {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/model_file.md")]
    mod model_file {}
}
