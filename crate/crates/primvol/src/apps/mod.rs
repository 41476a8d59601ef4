//! File formats, synthetic data, texture transfer, and the CLI.

mod cli;
mod formats;
mod synth;
mod transfer;

pub use cli::{cli_main, RunManifest};
pub use formats::{
    load_cameras, load_loss_trace, load_pfm, load_pose_sequence, load_primitive_set,
    quantize_set, read_bytes, save_cameras, save_loss_trace, save_pfm, save_png,
    save_pose_sequence, save_primitive_set,
};
pub use synth::{
    load_dataset, make_synthetic_subject, ring_cameras, save_dataset, SyntheticSubject,
};
pub use transfer::transfer_texture;
