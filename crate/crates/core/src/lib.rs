//! Simulation of adaptive task difficulty for upper-limb rehabilitation.
//!
//! A controller sets the amplitude of a sinusoidal elbow-flexion task trial by
//! trial. A simulated patient (a NARX sensorimotor network driving a
//! second-order elbow joint) attempts each task, and the error between target
//! and executed joint angle drives the next update.

pub mod cli;
pub mod config;
pub mod controller;
pub mod elbow;
pub mod error;
pub mod experiment;
pub mod narx;
pub mod seeding;
pub mod task;

pub use error::{Result, SimError};
