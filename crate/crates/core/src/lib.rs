//! Shape recognition from binary segmentation masks using topologically
//! persistent features.
//!
//! Every mask is turned into `d` grayscale height images (one per direction
//! on the unit circle). The 0-dimensional sublevel persistence of each image
//! is computed on its cubical complex, and the resulting diagrams are
//! vectorized in one of two ways:
//!
//! * **sparse persistence images**: a Gaussian-smoothed persistence image per
//!   direction, subsampled at the pixels chosen by column-pivoted QR on the
//!   dominant left singular vectors of the training images;
//! * **bottleneck amplitudes**: one scalar per direction.
//!
//! A small fully connected network ([`classifier`]) is trained on either
//! feature kind. [`experiment`] drives the stratified five-fold protocol and
//! [`metrics`] produces support-weighted precision/recall/F1.
//!
//! ```
//! use shapetopo::{filtration, mask::BinaryMask, persistence};
//!
//! let mask = BinaryMask::from_rows(&[&[1, 0, 1, 1, 0]]).unwrap();
//! let dir = filtration::make_directions(8)[0];
//! let hf = filtration::height_field(&mask, dir);
//! let pd = persistence::compute_pd0(&hf);
//! assert_eq!(pd.pairs.len(), 2);
//! ```

pub mod classifier;
pub mod cli;
pub mod error;
pub mod experiment;
pub mod features;
pub mod filtration;
pub mod folds;
pub mod manifest;
pub mod mask;
pub mod metrics;
pub mod persistence;
pub mod qr;
pub mod sampler;
pub mod synth;
pub mod vectorize;

mod binio;

pub use error::{Error, Result};
