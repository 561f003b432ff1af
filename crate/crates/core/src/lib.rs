//! Cost-aware routing for multi-step agent workflows.
//!
//! The crate trains a small feature-fusion network that scores each workflow
//! step and routes it to a strong or a weak model tier. Around that core it
//! provides cold-start data synthesis, on-policy trajectory collection with
//! outcome-driven relabeling, tier backends with exact cost accounting, and a
//! benchmark harness that compares routing strategies on identical task
//! suites.

pub mod backends;
pub mod bench;
pub mod checkpoint;
pub mod coldstart;
pub mod error;
pub mod features;
mod httpx;
pub mod nn;
pub mod router;
pub mod rng;
pub mod runtime;
pub mod task;
pub mod trajectory;
pub mod training;

pub use error::{Error, Result};
pub use router::ModelTier;
