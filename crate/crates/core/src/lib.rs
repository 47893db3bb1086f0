//! Kolmogorov-Arnold autoencoders for 1-D signals.
//!
//! Layers carry hand-written backward passes checked against finite
//! differences; see [`nn::gradcheck`]. The crate builds four autoencoder
//! families ([`models::Family`]) and runs them on five tasks ([`tasks`]).

pub mod cli;
pub mod config;
pub mod data;
pub mod error;
pub mod kan;
pub mod models;
pub mod nn;
pub mod optim;
pub mod splines;
pub mod suite;
pub mod tasks;

pub use error::{Error, Result};
