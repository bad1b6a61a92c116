//! Kinematic 4D control signals for robot-world generative simulation.
//!
//! The pipeline turns a URDF robot plus an action sequence into per-frame
//! camera-space pointmaps, occupancy masks and RGB renders, prepares them as
//! conditioning signals, curates fixed-length episodes, and evaluates 4D
//! outputs with geometric and image metrics.
//!
//! - [`robot_model`]: URDF and mesh ingestion
//! - [`kinematics`]: FK, IK, velocity integration, trajectory expansion
//! - [`projection`]: pinhole camera and z-buffer rasterization into pointmaps
//! - [`control_signal`]: soft masks, normalization, concatenation, perturbations
//! - [`curation`]: episodes, failure synthesis, stratified splits
//! - [`metrics`]: Chamfer, F-score, PSNR, SSIM, success-rate comparison

// `!(x > 0.0)` guards are written that way so NaN fails them
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control_signal;
pub mod curation;
pub mod image_io;
pub mod kinematics;
pub mod metrics;
pub mod projection;
pub mod rng;
pub mod robot_model;
