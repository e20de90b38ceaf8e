//! Structured neural PI control for equilibrium-independent passive systems.
//!
//! The library builds proportional-integral controllers whose P and I terms
//! are strictly monotone vector fields, obtained as input-gradients of
//! strictly convex neural networks. Because monotonicity is enforced by
//! construction, closed-loop stability and setpoint tracking hold for any
//! parameter values, so the networks can be trained freely for transient
//! performance.
//!
//! Modules:
//! - [`scnn`]: strictly convex scalar networks, their input gradients and
//!   hand-derived parameter gradients (including the gradient-of-gradient
//!   path needed when the controller output is itself a gradient).
//! - [`monotone`]: communication-partitioned monotone operators and the PI
//!   control law built from them.
//! - [`plants`]: vehicle-platoon and power-network models with storage
//!   functions and equilibrium solvers.
//! - [`sim`]: closed-loop rollouts with disturbance schedules.
//! - [`train`]: transient-cost losses, backpropagation through the rollout,
//!   Adam, and baseline controllers.
//! - [`certify`]: numerical certificates for monotonicity, passivity,
//!   Lyapunov decrease, and output tracking.

pub mod certify;
pub mod checkpoint;
pub mod config;
pub mod error;
pub mod linalg;
pub mod monotone;
pub mod plants;
pub mod scnn;
pub mod sim;
pub mod train;

pub use error::{Error, Result};
