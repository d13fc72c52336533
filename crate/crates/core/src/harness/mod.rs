//! Experiment drivers behind the `l21snf` binary: data generation, fits,
//! rank sweeps and image-batch packing.

pub mod config;
pub mod experiment;
pub mod images;
pub mod pgm;

pub use experiment::{
    cmd_fit, cmd_gen, cmd_sweep, AlphaChoice, Algorithm, DataSource, ExperimentSpec, FitSummary, InitMethod,
};
pub use images::{cmd_images_pack, cmd_images_unpack, ImageBatchMeta};

use crate::error::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Process exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        return EXIT_NUMERICAL;
    }
    match err {
        Error::InvalidConfig(_) | Error::InvalidBounds { .. } => EXIT_USAGE,
        _ => EXIT_DATA,
    }
}
