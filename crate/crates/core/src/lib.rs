//! Imaging toolkit for time series: eight series-to-image transforms, the
//! input alignment path used by vision backbones, three small trainable
//! patch models with analytic gradients, and the evaluation harness
//! (perturbations, segment-length and look-back sweeps, reoccurrence
//! counting).

pub mod alignment;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod framework;
pub mod image;
pub mod imaging;
pub mod io;
pub mod models;
pub mod series;
pub mod training;

pub use error::{Error, Result};
pub use exec::Exec;
pub use image::GrayImage;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The single RNG type used for every seeded stream.
pub type Rng = ChaCha8Rng;

pub(crate) fn seeded_rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
