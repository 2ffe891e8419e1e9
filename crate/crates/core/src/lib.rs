//! Modeling and simulation core for a six-axis, piezo-driven compliant
//! parallel positioner.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only numerics:
//!
//! * [`kinematics`]: mobility count, Jacobian forward/inverse maps,
//!   regression fit of the Jacobian, compliance statics and the actuator
//!   force budget.
//! * [`workspace`]: reachable set of box-bounded actuator inputs as a
//!   zonotope (axis ranges, amplification, exact volume, planar projections).
//! * [`plant`]: voltage to Bouc-Wen actuator to Jacobian to modal structure
//!   to quantized capacitive sensing.
//! * [`control`]: discrete PID with anti-windup and the closed-loop runner.
//! * [`signals`]: staircase, circle, rose, sine, chirp reference generators.
//! * [`analysis`]: tracking statistics, resolution detectability,
//!   hysteresis loop metrics and chirp frequency response.
//!
//! Task-space quantities are in µm and µrad, actuator quantities in µm or
//! volts, wrenches and stiffness in SI units. Every conversion is explicit.
#![no_std]
// Negated comparisons reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod analysis;
pub mod control;
mod error;
pub mod kinematics;
pub mod plant;
pub mod signals;
mod vector;
pub mod workspace;

pub use error::{Error, Result};
pub use vector::{ActuatorVec6, Axis, Pose6, VoltageVec6, Wrench6};
