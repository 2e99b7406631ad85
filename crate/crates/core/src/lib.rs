//! Scene-text image synthesis from 3D triangle-mesh worlds: G-buffer
//! rendering, text region proposal, text rasterization and placement on
//! surfaces, and rendering of annotated training samples.

// NaN must fail range checks, which negated comparisons express directly.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod demo;
pub mod gbuffer;
pub mod geometry;
pub mod pipeline;
pub mod placement;
pub mod region;
pub mod render;
pub mod scene;
pub mod text;
