//! Symmetric three-party Bell inequalities with inefficient detectors:
//! quantum values, classical bounds, threshold-minimizing synthesis and the
//! catalog of known inequalities.

pub mod catalog;
pub mod inequality;
pub mod optimize;
pub mod quantum;
pub mod strategies;
pub mod synthesis;

pub use bellforge_lp::Rational;
