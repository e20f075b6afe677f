//! C-RAN network slicing simulator and continuous-control training engine.

pub mod agent;
pub mod config;
pub mod cost;
pub mod env;
pub mod error;
pub mod nn;
pub mod optim;
pub mod replay;
pub mod rng;
pub mod traffic;
