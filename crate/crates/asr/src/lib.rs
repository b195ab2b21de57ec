//! Command line and HTTP front end of the ASR pricing engine.

pub mod commands;
pub mod service;

pub use asr_core;
