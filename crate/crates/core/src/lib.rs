//! Deep perceptual similarity (DPS) metrics built on frozen convolutional
//! feature extractors, with per-channel scalar adaption to user-defined
//! distortion orderings.
//!
//! The crate is organised bottom-up:
//!
//! * [`tensor_net`] loads frozen networks from a portable weight container
//!   and extracts activations at tap layers.
//! * [`similarity`] compares two feature stacks (spatial, mean, sort and the
//!   combined forms) and differentiates the distance with respect to the
//!   per-channel scalars.
//! * [`distortions`] implements the six distortion kinds, orderings and
//!   labelled triplet generation.
//! * [`adaption`] trains the scalars together with a small judge network.
//! * [`evaluation`] scores metrics with 2AFC and JND and ingests datasets.

pub mod adaption;
pub mod distortions;
pub mod error;
pub mod evaluation;
pub mod metric;
pub mod seed;
pub mod similarity;
pub mod synthetic;
pub mod tensor_net;

pub use error::{Error, Result};
pub use tensor_net::{FeatureStack, ImageTensor, LoadedNetwork, NetworkSpec, Tensor3, WeightContainer};
