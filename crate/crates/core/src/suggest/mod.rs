//! Object and placement suggesters fitted from demonstrations.

mod metrics;
mod object;
mod placement;
mod slots;

pub use metrics::{evaluate_suggesters, SuggesterMetrics};
pub use object::{
    fit_object_suggester, object_features, softmax, suggest_objects, ObjectSuggesterModel, UniformObjects,
};
pub use placement::{
    fit_placement_suggester, identify_anchor, rescore, sample_without_replacement, suggest_placements, Anchor,
    LatentCandidate, ModeTable, PlacementMode, PlacementSample, PlacementSuggesterModel, MODE_MERGE_RADIUS,
};
pub use slots::SlotPlacements;

use crate::error::Result;
use crate::geom::{ObjectId, RigidTransform, SegmentedCloud};

/// Probability that each object should be moved next.
pub trait ObjectPrior: Sync {
    fn object_probabilities(&self, cloud: &SegmentedCloud) -> Result<Vec<(ObjectId, f64)>>;
}

/// Candidate transforms for one object, each with its model probability.
pub trait PlacementSource: Sync {
    fn propose(
        &self,
        cloud: &SegmentedCloud,
        object: ObjectId,
        k: usize,
        seed: u64,
    ) -> Result<Vec<(RigidTransform, f64)>>;
}
