//! Bresa: reflexive hierarchical safe RL.
//!
//! A task policy (SAC) plans high-level actions; a trajectory controller
//! executes them as minor actions in a high-frequency control loop; a safety
//! critic re-estimates risk every control tick and can interrupt execution
//! (the reflex), handing the next decision to a recovery policy. The crate
//! ships two benchmark environments — a 2D navigation task with noisy minor
//! actions and a planar contact-rich maze under variable impedance control —
//! plus the offline data collection, training orchestration, and experiment
//! harness needed to compare the reflexive method against the non-reflexive
//! baseline.

pub mod controller;
pub mod dataset;
pub mod env;
pub mod error;
pub mod geom;
pub mod nn;
pub mod replay;

pub use error::{BresaError, ErrorCategory, Result};
