//! Skeleton-based sign gesture recognition.
//!
//! The pipeline normalizes Kinect-style 20-joint skeleton frames for position
//! and facing direction, classifies gesture sequences with a stacked LSTM
//! trained from scratch, and evaluates with leave-one-signer-out
//! cross-validation. A synthetic generator stands in for recorded data.

pub mod cli;
pub mod datagen;
pub mod dataio;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod gradcheck;
pub mod nn;
pub mod par;
pub mod skeleton;
pub mod training;

pub use error::*;
