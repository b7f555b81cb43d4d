//! Simulation of stochastic nucleation in a two-well martensite model.

pub mod blocks;
pub mod cli;
pub mod config;
pub mod error;
pub mod fragment;
pub mod geometry;
pub mod interfaces;
pub mod render;
pub mod rng;
pub mod sobolev;
pub mod stats;
pub mod verify;
pub mod wells;

pub use error::{Error, Result};
