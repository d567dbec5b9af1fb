//! Noise-tolerant quantum tickets: a qubit-level simulator, verifiers,
//! counterfeiting attacks, exact probability oracles and analytic bounds.
//!
//! Two schemes are covered. Qtickets are measured qubit by qubit against
//! secret six-state labels. Classical-verification (cv) tickets are
//! redeemed remotely by answering a per-block basis challenge.

pub mod attacks;
pub mod bounds;
pub mod cv;
pub mod games;
pub mod linalg;
pub mod qticket;
pub mod quantum;
pub mod rng;
pub mod serial;
pub mod store;
pub mod sweep;
pub mod tails;
pub mod tolerance;

pub use rng::RngStream;
pub use serial::Serial;
pub use tolerance::Tolerance;
