//! Configuration, snapshot persistence and report files.

mod config;
mod expr;
mod output;
mod snapshot;

pub use config::{
    ExperimentConfig, ExponentConfig, GridConfig, InitialConfig, InitialKind, ToleranceConfig,
};
pub use expr::{evaluate, Exponent};
pub use output::{sha256_hex, Manifest, ManifestEntry, OutputDir};
pub use snapshot::{decode_snapshot, encode_snapshot, load_snapshot, save_snapshot, MAGIC, VERSION};
