//! Edge detection by spectrum congruency of multiscale local patches.
//!
//! The pipeline is: optional Gaussian prefilter, per-pixel multiscale patch
//! vectors ([`patch`]), the congruency map ([`congruency`]), non-maximum
//! suppression and thresholding ([`thinning`]). [`eval`] scores binary edge
//! maps against ground truth, [`canny`] provides the baseline detector and
//! [`synth`] builds scenes with exact ground truth.
//!
//! ```
//! use speccon_core::{make_shapes, spectrum_congruency_map, nms, binarize, fom, ScaleSet};
//!
//! let scene = make_shapes(96, 96).unwrap();
//! let sc = spectrum_congruency_map(&scene.image, &ScaleSet::default(), None).unwrap();
//! let edges = binarize(&nms(&sc).unwrap(), 0.3, 0.3).unwrap();
//! assert!(fom(&edges, &scene.gt, 1.0 / 9.0).unwrap() > 0.5);
//! ```

pub mod canny;
pub mod config;
pub mod congruency;
pub mod error;
pub mod eval;
pub mod image;
pub mod integral;
pub mod io;
pub mod patch;
pub mod reference;
pub mod synth;
pub mod thinning;

pub use canny::canny;
pub use config::{DetectorConfig, Method};
pub use congruency::{
    congruency_in_basis, congruency_of_vectors, energy_maps, noise_threshold, project,
    spectrum_congruency_map, Congruency, EdgeStrengthMap, EnergyMaps, NoiseModel, OrthonormalBasis,
    Prefilter, AMPLITUDE_GUARD,
};
pub use error::{Error, Result};
pub use eval::{
    distance_transform, evaluate, fom, match_edges, ods_ois, ods_ois_thinned, prf, EvalReport,
    PrCurve, PrSample, Prf, DEFAULT_BETA,
};
pub use image::{gaussian_smooth, sobel_gradients, to_grayscale, GradientField, Image, RgbImage};
pub use integral::{integral_image, SummedAreaTable};
pub use patch::{
    downsample_patch, extract_patch, patch_field, remove_dc, Patch, PatchVector, PatchVectorField,
    ScalePreset, ScaleSet,
};
pub use synth::{add_gaussian_noise, make_shapes, SynthScene};
pub use thinning::{binarize, nms, EdgeMap};
