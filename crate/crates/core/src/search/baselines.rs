use std::time::Instant;

use rand::Rng;

use super::{expand_node, SearchContext, SearchNode, SearchResult, SearchStats};
use crate::error::Result;
use crate::geom::SegmentedCloud;
use crate::util::seeded_rng;

fn start_result(root: &SearchNode) -> SearchResult {
    SearchResult {
        plan: Vec::new(),
        solved: false,
        goals: Vec::new(),
        selected: None,
        stats: SearchStats::default(),
        trace: vec![root.trace()],
    }
}

/// Greedy descent keeping only the child with the lowest (f, g). Stops at a
/// goal, a dead end, or the depth limit.
pub fn beam_search(root: &SegmentedCloud, ctx: &SearchContext) -> Result<SearchResult> {
    let start = Instant::now();
    ctx.params.validate()?;
    ctx.task.validate()?;
    let mut node = SearchNode::root(root.clone(), ctx.task)?;
    let mut out = start_result(&node);
    while !node.is_goal && node.depth < ctx.params.max_depth {
        let children = expand_node(&node, ctx, out.trace.len())?;
        out.stats.expanded += 1;
        out.trace[node.id].expansions += 1;
        out.trace.extend(children.iter().map(SearchNode::trace));
        let best = children
            .into_iter()
            .min_by(|a, b| a.f.total_cmp(&b.f).then(a.g.total_cmp(&b.g)).then(a.id.cmp(&b.id)));
        match best {
            Some(b) => node = b,
            None => break,
        }
    }
    if node.is_goal {
        out.goals.push(node.id);
        out.selected = Some(node.id);
    }
    Ok(out.finish(start))
}

pub fn beam_search_plan(root: &SegmentedCloud, ctx: &SearchContext) -> Result<SearchResult> {
    beam_search(root, ctx)?.into_plan_result("beam search")
}

/// Independent rollouts from the root, each picking a uniformly random
/// child per step, until a goal appears or the expansion budget is spent.
/// The deviation estimator is not consulted.
pub fn random_rollouts(root: &SegmentedCloud, ctx: &SearchContext) -> Result<SearchResult> {
    let start = Instant::now();
    ctx.params.validate()?;
    ctx.task.validate()?;
    let ctx = SearchContext { mde: None, ..*ctx };
    let root = SearchNode::root(root.clone(), ctx.task)?;
    let mut out = start_result(&root);
    if root.is_goal {
        out.goals.push(0);
        out.selected = Some(0);
        return Ok(out.finish(start));
    }
    let mut rng = seeded_rng(ctx.params.seed);
    'rollouts: while out.stats.expanded < ctx.params.budget {
        let mut node = root.clone();
        while node.depth < ctx.params.max_depth {
            if out.stats.expanded >= ctx.params.budget {
                break 'rollouts;
            }
            let mut children = expand_node(&node, &ctx, out.trace.len())?;
            out.stats.expanded += 1;
            out.trace[node.id].expansions += 1;
            out.trace.extend(children.iter().map(SearchNode::trace));
            if children.is_empty() {
                if node.depth == 0 {
                    break 'rollouts;
                }
                break;
            }
            let pick = rng.random_range(0..children.len());
            node = children.swap_remove(pick);
            if node.is_goal {
                out.goals.push(node.id);
                out.selected = Some(node.id);
                break 'rollouts;
            }
        }
    }
    Ok(out.finish(start))
}

pub fn random_rollout_plan(root: &SegmentedCloud, ctx: &SearchContext) -> Result<SearchResult> {
    random_rollouts(root, ctx)?.into_plan_result("random rollouts")
}
