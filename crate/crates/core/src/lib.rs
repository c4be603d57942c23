//! Numerics for singular integrals on horizontal curves in Carnot groups.
//!
//! The crate is organised bottom-up:
//!
//! * [`group`]: stratified group arithmetic in exponential coordinates
//!   (BCH group law, dilations, homogeneous norms, horizontal projection).
//! * [`kernels`]: 1-dimensional Calderón–Zygmund kernels, adjoints and
//!   Littlewood–Paley pieces.
//! * [`curves`]: lifting of first-layer velocities to horizontal curves,
//!   arc-length quadrature, tangent lines and flatness measurements.
//! * [`measure`]: weighted point sets and 1-regularity estimates.
//! * [`cubes`]: Christ dyadic cubes on discrete sets and the maximal function.
//! * [`sio`]: truncated singular integral operators, norm estimation,
//!   annular integrals and the T1 testing condition.
//! * [`experiments`]: reproducible verification campaigns driven by the CLI.

pub mod cubes;
pub mod curves;
pub mod error;
pub mod experiments;
pub mod group;
pub mod kernels;
pub mod measure;
pub mod sio;

pub use error::{Error, Result};
pub use group::{CarnotGroup, GroupPoint, NormKind};
