//! Polarimetric line-of-sight interference channels.
//!
//! Builds the channel matrices of a `K`-pair interference network whose
//! nodes carry co-located electric and magnetic dipoles, designs
//! zero-forcing precoders and combiners (closed forms and generic
//! null-space constructions), and certifies the resulting multiplexing
//! gain against the `2K` ceiling imposed by the keyhole rank of each link.

#![allow(clippy::needless_range_loop)]

pub mod certify;
pub mod design_dump;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod linalg;
pub mod polarization;
pub mod report;
pub mod scenario_file;
pub mod zfdesign;

pub use error::{Error, Result};
pub use geometry::{
    genericity_margin, link_geometry, random_generic_scenario, LinkGeometry, Scenario,
};
pub use polarization::{ComponentSet, DipoleComponent, DipoleConfig, PolarizationChannel};
