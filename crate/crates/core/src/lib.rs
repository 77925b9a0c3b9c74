//! Simulation and control benchmark for a decoupled two-segment
//! tendon-driven continuum robot.
//!
//! The crate models the full experiment pipeline at desk scale:
//!
//! * [`kinematics`] — constant-curvature forward and differential
//!   kinematics of the two bending segments plus a rigid tool frame.
//! * [`plant`] — the simulated robot: motor counts through a tendon-sheath
//!   transmission with hysteresis and drift, into configuration space, with
//!   a noisy pose sensor.
//! * [`nn`] — a small from-scratch neural-network engine (dense, LSTM, GRU)
//!   with backpropagation through time and Adam, sized for 4x128 networks.
//! * [`controllers`] — five pose controllers behind one interface:
//!   resolved-rate Jacobian, MPC, FNN, LSTM and GRU.
//! * [`datagen`] — Monte Carlo data collection on the plant, splitting,
//!   windowing and persistence.
//! * [`benchmark`] — reference trajectories, the trial runner and the
//!   MAE/STD/RMSE reporting.
//! * [`config`] — the TOML run configuration shared by the CLI.

pub mod benchmark;
pub mod config;
pub mod controllers;
pub mod datagen;
pub mod kinematics;
pub mod nn;
pub mod plant;
pub mod seed;

mod error;

pub use error::{Error, Result};
