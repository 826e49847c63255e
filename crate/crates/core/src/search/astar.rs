use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use super::{expand_node, goal_score, SearchContext, SearchNode, SearchResult, SearchStats};
use crate::error::Result;
use crate::geom::SegmentedCloud;

/// Open-list entry; the heap pops the lowest (f, g, insertion order).
struct Open(SearchNode, usize);

impl Open {
    fn key(&self) -> (f64, f64, usize) {
        (self.0.f, self.0.g, self.1)
    }
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        let (a, b) = (self.key(), other.key());
        b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)).then(b.2.cmp(&a.2))
    }
}

/// Multi-goal A*. Goals are recorded when popped; the search stops once `m`
/// goals are recorded, the expansion budget is spent, or the open list
/// empties. If the budget runs out before any goal is popped, goal nodes
/// already generated are used instead. The recorded goal with the best
/// goal score (ties: lower g, then earlier id) gives the plan.
pub fn astar_search(root: &SegmentedCloud, ctx: &SearchContext) -> Result<SearchResult> {
    let start = Instant::now();
    ctx.params.validate()?;
    ctx.task.validate()?;
    let root = SearchNode::root(root.clone(), ctx.task)?;
    let mut out = SearchResult {
        plan: Vec::new(),
        solved: false,
        goals: Vec::new(),
        selected: None,
        stats: SearchStats::default(),
        trace: vec![root.trace()],
    };
    if root.is_goal {
        out.goals.push(0);
        out.selected = Some(0);
        return Ok(out.finish(start));
    }

    let mut open = BinaryHeap::new();
    open.push(Open(root, 0));
    let mut pushed = 1usize;
    let mut goals: Vec<(f64, f64, usize)> = Vec::new();
    while goals.len() < ctx.params.m && out.stats.expanded < ctx.params.budget {
        let Some(Open(node, _)) = open.pop() else { break };
        if node.is_goal {
            goals.push((goal_score(&node, ctx)?, node.g, node.id));
            continue;
        }
        if node.depth >= ctx.params.max_depth {
            continue;
        }
        let children = expand_node(&node, ctx, out.trace.len())?;
        out.stats.expanded += 1;
        out.trace[node.id].expansions += 1;
        for child in children {
            out.trace.push(child.trace());
            open.push(Open(child, pushed));
            pushed += 1;
        }
    }
    if goals.is_empty() {
        for Open(node, _) in open.iter() {
            if node.is_goal {
                goals.push((goal_score(node, ctx)?, node.g, node.id));
            }
        }
    }
    goals.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    out.goals = goals.iter().map(|g| g.2).collect();
    out.goals.sort_unstable();
    out.selected = goals.first().map(|g| g.2);
    Ok(out.finish(start))
}

/// [`astar_search`], failing with `NoPlanFound` when no goal was reached.
pub fn astar_plan(root: &SegmentedCloud, ctx: &SearchContext) -> Result<SearchResult> {
    astar_search(root, ctx)?.into_plan_result("A*")
}
