//! `mfr`: a command-line stand-in for the mobile food record app.
//!
//! Image pairs are captured into a local queue, uploaded with `sync`, and
//! the server's predictions are reviewed with a line-based dialog. State
//! lives in one JSON file guarded by a file lock; see [`session`].

pub mod capture;
pub mod client;
pub mod commands;
pub mod error;
pub mod review;
pub mod session;

pub use commands::{run, Cli, Io};
pub use error::CliError;
