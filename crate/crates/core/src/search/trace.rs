use serde::{Deserialize, Serialize};

use super::StepCosts;
use crate::error::{Error, Result};
use crate::geom::Action;

/// One generated node as written to a search trace.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub action: Option<Action>,
    pub costs: StepCosts,
    pub g: f64,
    pub h: f64,
    pub f: f64,
    pub depth: usize,
    pub is_goal: bool,
    /// Times this node was expanded; rollouts re-expand the root.
    pub expansions: usize,
}

/// Structural checks on a trace: ids are positions, the root is the only
/// parentless node, parents precede children and were expanded, depths
/// increase by one, `f = g + h`, and `g` accumulates step totals.
pub fn check_trace(trace: &[TraceNode]) -> Result<()> {
    let bad = |id: usize, why: &str| {
        Err(Error::CorruptRecord {
            line: id + 1,
            reason: why.to_string(),
        })
    };
    let Some(root) = trace.first() else {
        return bad(0, "empty trace");
    };
    if root.parent.is_some() || root.action.is_some() || root.depth != 0 || root.g != 0.0 {
        return bad(0, "malformed root");
    }
    for (i, n) in trace.iter().enumerate() {
        if n.id != i {
            return bad(i, "id out of order");
        }
        if (n.f - (n.g + n.h)).abs() > 1e-12 * n.f.abs().max(1.0) {
            return bad(i, "f != g + h");
        }
        if i == 0 {
            continue;
        }
        let Some(p) = n.parent.filter(|p| *p < i) else {
            return bad(i, "missing or later parent");
        };
        let parent = &trace[p];
        if parent.expansions == 0 || n.depth != parent.depth + 1 || n.action.is_none() {
            return bad(i, "inconsistent parent link");
        }
        if (n.g - (parent.g + n.costs.total)).abs() > 1e-9 {
            return bad(i, "g does not accumulate step cost");
        }
        if n.action.as_ref().map(|a| a.object) == parent.action.as_ref().map(|a| a.object) {
            return bad(i, "same object moved twice in a row");
        }
    }
    Ok(())
}
