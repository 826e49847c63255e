//! Multi-goal A* over point-cloud states, with beam-search and random-rollout
//! baselines.

mod astar;
mod baselines;
mod trace;

pub use astar::{astar_plan, astar_search};
pub use baselines::{beam_search, beam_search_plan, random_rollout_plan, random_rollouts};
pub use trace::{check_trace, TraceNode};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    lift_column_overlap, transform_object, voxel_overlap, Action, ObjectId, SegmentedCloud, DEFAULT_VOXEL_SIZE,
};
use crate::mde::{predict_deviation, MdeModel};
use crate::suggest::{ObjectPrior, PlacementSource};
use crate::tasks::{alignment_error, evaluate_task, TaskSpec};
use crate::util::mix_seed;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalScore {
    #[default]
    LowestCollisionSum,
    BestAlignment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchParams {
    pub k: usize,
    pub action_cost: f64,
    pub w_c: f64,
    pub w_d: f64,
    pub w_p: f64,
    /// Goals to collect before stopping.
    pub m: usize,
    /// Node expansion budget.
    pub budget: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub goal_score: GoalScore,
    pub voxel_size: f64,
}

impl Default for SearchParams {
    fn default() -> Self {
        Self {
            k: 10,
            action_cost: 0.01,
            w_c: 1.0,
            w_d: 1.0,
            w_p: 0.1,
            m: 1,
            budget: 200,
            max_depth: 6,
            seed: 0,
            goal_score: GoalScore::LowestCollisionSum,
            voxel_size: DEFAULT_VOXEL_SIZE,
        }
    }
}

impl SearchParams {
    pub fn block_stacking() -> Self {
        Self::default()
    }

    pub fn table_bussing() -> Self {
        Self {
            k: 3,
            m: 10,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let weights_ok = [self.w_c, self.w_d, self.w_p]
            .iter()
            .all(|w| *w >= 0.0 && w.is_finite());
        if self.k == 0 || self.budget == 0 || self.m == 0 || !weights_ok || !(self.action_cost > 0.0) {
            return Err(Error::InvalidSpec(format!("invalid search parameters {self:?}")));
        }
        if !(self.voxel_size > 0.0) {
            return Err(Error::InvalidVoxelSize(self.voxel_size));
        }
        Ok(())
    }
}

/// The two suggesters the search samples from.
#[derive(Clone, Copy)]
pub struct Suggesters<'a> {
    pub objects: &'a dyn ObjectPrior,
    pub placements: &'a dyn PlacementSource,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepCosts {
    pub action: f64,
    pub collision: f64,
    pub deviation: f64,
    pub probability: f64,
    pub total: f64,
}

/// Weighted step cost from its raw terms.
pub fn combine_costs(
    params: &SearchParams,
    collision: f64,
    deviation: f64,
    p_object: f64,
    p_placement: f64,
) -> StepCosts {
    let probability = 1.0 - p_placement * p_object;
    StepCosts {
        action: params.action_cost,
        collision,
        deviation,
        probability,
        total: params.action_cost + params.w_c * collision + params.w_d * deviation + params.w_p * probability,
    }
}

/// Costs of `action` taken in `parent`, whose result is `child`. The
/// collision term averages the moved object's voxel overlap at its placed
/// pose with the overlap of the column it descends through.
pub fn step_cost(
    parent: &SegmentedCloud,
    child: &SegmentedCloud,
    action: &Action,
    mde: Option<&MdeModel>,
    p_object: f64,
    p_placement: f64,
    params: &SearchParams,
) -> Result<StepCosts> {
    let overlap = voxel_overlap(child, action.object, params.voxel_size)?;
    let column = lift_column_overlap(child, action.object, params.voxel_size)?;
    let deviation = match mde {
        Some(model) if params.w_d > 0.0 => predict_deviation(model, parent, action)?,
        _ => 0.0,
    };
    Ok(combine_costs(
        params,
        0.5 * (overlap + column),
        deviation,
        p_object,
        p_placement,
    ))
}

/// A node of the search tree.
#[derive(Clone, Debug)]
pub struct SearchNode {
    pub id: usize,
    pub cloud: SegmentedCloud,
    pub action: Option<Action>,
    pub parent: Option<usize>,
    pub g: f64,
    pub h: f64,
    pub f: f64,
    pub depth: usize,
    pub costs: StepCosts,
    pub is_goal: bool,
    /// Collision costs summed along the path.
    pub collision_sum: f64,
}

impl SearchNode {
    pub fn root(cloud: SegmentedCloud, task: &TaskSpec) -> Result<Self> {
        let eval = evaluate_task(&cloud, task)?;
        Ok(Self {
            id: 0,
            cloud,
            action: None,
            parent: None,
            g: 0.0,
            h: eval.heuristic,
            f: eval.heuristic,
            depth: 0,
            costs: StepCosts::default(),
            is_goal: eval.is_goal,
            collision_sum: 0.0,
        })
    }

    pub fn last_moved(&self) -> Option<ObjectId> {
        self.action.as_ref().map(|a| a.object)
    }

    pub fn trace(&self) -> TraceNode {
        TraceNode {
            id: self.id,
            parent: self.parent,
            action: self.action,
            costs: self.costs,
            g: self.g,
            h: self.h,
            f: self.f,
            depth: self.depth,
            is_goal: self.is_goal,
            expansions: 0,
        }
    }
}

/// Everything a search needs besides the root.
#[derive(Clone, Copy)]
pub struct SearchContext<'a> {
    pub task: &'a TaskSpec,
    pub suggesters: Suggesters<'a>,
    pub mde: Option<&'a MdeModel>,
    pub params: &'a SearchParams,
}

/// Proposes `k` placements for every eligible object (all but the last one
/// moved) and scores each child. Children are ordered by (object id, sample
/// index) and numbered from `first_id`. Objects without an applicable
/// placement mode contribute no children.
pub fn expand_node(node: &SearchNode, ctx: &SearchContext, first_id: usize) -> Result<Vec<SearchNode>> {
    let params = ctx.params;
    let priors = ctx.suggesters.objects.object_probabilities(&node.cloud)?;
    let mut proposals = Vec::new();
    for (object, p_object) in priors {
        if Some(object) == node.last_moved() {
            continue;
        }
        let seed = mix_seed(params.seed, ((node.id as u64) << 20) ^ u64::from(object.0));
        match ctx.suggesters.placements.propose(&node.cloud, object, params.k, seed) {
            Ok(v) => proposals.extend(v.into_iter().map(|(t, p)| (Action::new(object, t), p_object, p))),
            Err(Error::NoApplicableMode(_)) => {}
            Err(e) => return Err(e),
        }
    }
    proposals
        .into_par_iter()
        .enumerate()
        .map(|(i, (action, p_object, p_placement))| {
            let cloud = transform_object(&node.cloud, &action)?;
            let costs = step_cost(&node.cloud, &cloud, &action, ctx.mde, p_object, p_placement, params)?;
            let eval = evaluate_task(&cloud, ctx.task)?;
            let g = node.g + costs.total;
            Ok(SearchNode {
                id: first_id + i,
                cloud,
                action: Some(action),
                parent: Some(node.id),
                g,
                h: eval.heuristic,
                f: g + eval.heuristic,
                depth: node.depth + 1,
                costs,
                is_goal: eval.is_goal,
                collision_sum: node.collision_sum + costs.collision,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchStats {
    pub seconds: f64,
    pub generated: usize,
    pub expanded: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    /// Empty when the root already satisfies the goal.
    pub plan: Vec<Action>,
    pub solved: bool,
    /// Trace ids of the goal nodes found.
    pub goals: Vec<usize>,
    /// Trace id of the goal whose path is returned.
    pub selected: Option<usize>,
    pub stats: SearchStats,
    /// One record per generated node, the root first, indexed by id.
    pub trace: Vec<TraceNode>,
}

impl SearchResult {
    fn finish(mut self, start: std::time::Instant) -> Self {
        self.stats.seconds = start.elapsed().as_secs_f64();
        self.stats.generated = self.trace.len().saturating_sub(1);
        self.solved = self.selected.is_some();
        if let Some(goal) = self.selected {
            self.plan = backtrack(&self.trace, goal);
        }
        self
    }

    /// `Err(NoPlanFound)` unless a goal was reached.
    pub fn into_plan_result(self, method: &str) -> Result<Self> {
        if self.solved {
            Ok(self)
        } else {
            Err(Error::NoPlanFound(format!(
                "{method}: no goal after {} expansions ({} nodes generated)",
                self.stats.expanded, self.stats.generated
            )))
        }
    }
}

/// Actions from the root to `node`, in execution order.
pub fn backtrack(trace: &[TraceNode], node: usize) -> Vec<Action> {
    let mut plan = Vec::new();
    let mut cur = Some(node);
    while let Some(id) = cur {
        let n = &trace[id];
        if let Some(a) = &n.action {
            plan.push(*a);
        }
        cur = n.parent;
    }
    plan.reverse();
    plan
}

/// Goal-selection score, lower is better.
fn goal_score(node: &SearchNode, ctx: &SearchContext) -> Result<f64> {
    match ctx.params.goal_score {
        GoalScore::LowestCollisionSum => Ok(node.collision_sum),
        GoalScore::BestAlignment => alignment_error(&node.cloud, ctx.task),
    }
}
