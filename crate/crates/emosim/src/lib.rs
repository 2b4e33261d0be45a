//! Layered affective agent simulation.
//!
//! An infant-like agent regulates its affective state through facial
//! interaction with a mirroring caregiver. Three mechanisms stack: a frozen
//! glimpse network reads valence/arousal off each caregiver image ([`ram`]),
//! a compensation memory and a fatigue rule reshape that appraisal from
//! experience and from within ([`memory`], [`appraisal`]), and a predictive
//! actor-critic policy chooses facial actions that keep the resulting
//! interoceptive state near a homeostatic set point ([`predictor`],
//! [`ddpg`], [`homeostasis`]). The interaction loop, logging, and bit-exact
//! checkpoint/resume live in [`orchestrator`].
//!
//! All numerics are hand-rolled f64 with analytic gradients; [`nn`] carries
//! the layers and the finite-difference harness that keeps them honest.
//! Runs are deterministic: one master seed fans out into named ChaCha
//! streams ([`rng`]) and identical configurations produce byte-identical
//! artifacts.

pub mod analysis;
pub mod appraisal;
pub mod checkpoint;
pub mod config;
pub mod ddpg;
pub mod env;
pub mod error;
pub mod homeostasis;
pub mod memory;
pub mod nn;
pub mod orchestrator;
pub mod predictor;
pub mod ram;
pub mod rng;
pub mod stats;
pub mod svg;
pub mod tensor;
