//! Deterministic encoders turning raw sensor recordings into images.

mod augment;
mod filter;
mod formats;
mod sfi;
mod signal;

pub use augment::{augment, AugmentConfig};
pub use filter::{composite, prewitt, rescale_unit, CompositeImage, PREWITT_KERNEL};
pub use formats::{
    parse_inertial_csv, parse_pgm, read_depth_dir, read_inertial_csv, write_inertial_csv,
    write_pgm16, write_pgm8, Pgm,
};
pub use sfi::{
    make_sfi, sfi_energy, DepthSequence, SfiImage, DEFAULT_MOTION_THRESHOLD, DEFAULT_SEGMENTS,
};
pub use signal::{
    make_signal_image, raw_signal_image, signal_windows, stacking_order, InertialSequence,
    SignalImage, INERTIAL_CHANNELS, SIGNAL_COLS, SIGNAL_ROWS, WINDOW_STRIDE,
};
