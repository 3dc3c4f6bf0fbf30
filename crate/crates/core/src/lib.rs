//! Event-camera object classification with spatio-temporal graphs.
//!
//! The pipeline: an [`events::EventStream`] is cut to a time window,
//! compressed by [`sampling::nonuniform_sample`], turned into a radius graph
//! by [`graph::build_radius_graph`] and classified by a plain or residual
//! spline-kernel graph network ([`nn`], [`model`]). [`complexity`] gives
//! analytic FLOP and parameter counts; [`cli`] wires it all to the command
//! line.

pub mod autodiff;
pub mod cli;
pub mod complexity;
pub mod error;
pub mod events;
pub mod graph;
pub mod model;
pub mod nn;
pub mod sampling;

pub use error::{Error, Result};
