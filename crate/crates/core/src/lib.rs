//! Rearrangement planning directly in segmented point-cloud space.
//!
//! A scene is a [`geom::SegmentedCloud`]; an action moves one object by a
//! rigid transform. [`search`] runs multi-goal A* over such actions, with
//! candidate moves proposed by the demonstration-derived suggesters in
//! [`suggest`], a deviation estimate from [`mde`], and task heuristics from
//! [`tasks`]. Plans are replayed in the kinematic simulator in [`scene`].

pub mod bench;
pub mod data;
pub mod error;
pub mod geom;
pub mod mde;
pub mod scene;
pub mod search;
pub mod suggest;
pub mod tasks;
pub mod util;

pub use error::{Error, Result};
