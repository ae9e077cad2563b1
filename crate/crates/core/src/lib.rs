//! Multi-person 2D pose representation and parsing.
//!
//! Annotated poses are encoded into per-joint confidence maps and per-limb
//! direction fields ([`codec`]). Predicted maps are decoded back into
//! candidate joints and scored limb connections ([`detect`]), assembled into
//! people inside bounding boxes, de-duplicated and completed ([`parse`]), and
//! scored with OKS / AP ([`eval`]). [`synth`] generates replayable synthetic
//! scenes so the whole chain can be checked without a trained network.

pub mod codec;
pub mod detect;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod grid;
pub mod parse;
pub mod pose;
pub mod skeleton;
pub mod synth;

pub use error::{PoseError, Result};
pub use geometry::{BoundingBox, Point2};
pub use grid::FieldGrid;
pub use pose::{Pose, PoseJoint, SceneAnnotation};
pub use skeleton::{canonical_skeleton, Joint, Skeleton, NUM_JOINTS, NUM_LIMBS};
