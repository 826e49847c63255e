use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::object_center;
use crate::scene::{generate_scene, Layout, SceneSpec};
use crate::tasks::{reference_plate, Goal, TaskSpec};
use crate::util::mix_seed;

/// One benchmark scene with its difficulty annotation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteScene {
    pub name: String,
    /// Fewest pick-and-place steps that can solve it (block stacking), or
    /// the number of objects off the best plate (bussing).
    pub complexity: usize,
    pub spec: SceneSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SuiteConfig {
    /// Every three-block stack configuration needing at least two moves,
    /// cycled over random placements.
    BlockStacking {
        count: usize,
        seed: u64,
    },
    /// Bussing scenes starting with loaded plates.
    StackedBussing {
        count: usize,
        seed: u64,
    },
    Explicit {
        scenes: Vec<SuiteScene>,
    },
}

/// Stacks (template indices, bottom first) for every arrangement of `n`
/// labeled blocks.
pub fn all_stackings(n: usize) -> Vec<Vec<Vec<usize>>> {
    fn rec(i: usize, n: usize, cur: &mut Vec<Vec<usize>>, out: &mut Vec<Vec<Vec<usize>>>) {
        if i == n {
            let mut v: Vec<Vec<usize>> = cur.iter().filter(|s| s.len() > 1).cloned().collect();
            v.sort();
            out.push(v);
            return;
        }
        for s in 0..cur.len() {
            for pos in 0..=cur[s].len() {
                cur[s].insert(pos, i);
                rec(i + 1, n, cur, out);
                cur[s].remove(pos);
            }
        }
        cur.push(vec![i]);
        rec(i + 1, n, cur, out);
        cur.pop();
    }
    let mut out = Vec::new();
    rec(0, n, &mut Vec::new(), &mut out);
    out.sort();
    out.dedup();
    out
}

/// Fewest moves in the symbolic blocks world from `stacks` to a single tower
/// `goal` (indices, top first). Unlisted blocks may end anywhere.
pub fn symbolic_steps(n: usize, stacks: &[Vec<usize>], goal: &[usize]) -> Option<usize> {
    let mut start = vec![None; n];
    for s in stacks {
        for w in s.windows(2) {
            start[w[1]] = Some(w[0]);
        }
    }
    let done = |on: &Vec<Option<usize>>| {
        goal.windows(2).all(|w| on[w[0]] == Some(w[1])) && goal.last().is_none_or(|b| on[*b].is_none())
    };
    let mut seen = BTreeSet::from([start.clone()]);
    let mut queue = VecDeque::from([(start, 0)]);
    while let Some((on, d)) = queue.pop_front() {
        if done(&on) {
            return Some(d);
        }
        let clear: Vec<usize> = (0..n).filter(|b| !on.contains(&Some(*b))).collect();
        for &b in &clear {
            let mut dests: Vec<Option<usize>> = clear.iter().filter(|c| **c != b).map(|c| Some(*c)).collect();
            dests.push(None);
            for dest in dests {
                if on[b] == dest {
                    continue;
                }
                let mut next = on.clone();
                next[b] = dest;
                if seen.insert(next.clone()) {
                    queue.push_back((next, d + 1));
                }
            }
        }
    }
    None
}

fn goal_indices(spec: &SceneSpec, task: &TaskSpec) -> Result<Vec<usize>> {
    let Goal::BlockStacking { order } = &task.goal else {
        return Err(Error::Config("block-stacking suite needs a block-stacking goal".into()));
    };
    order
        .iter()
        .map(|c| {
            spec.templates
                .iter()
                .position(|t| &t.class == c)
                .ok_or_else(|| Error::MissingObject(c.clone()))
        })
        .collect()
}

fn bussing_complexity(spec: &SceneSpec, task: &TaskSpec) -> Result<usize> {
    let Goal::TableBussing { plate_class, threshold } = &task.goal else {
        return Err(Error::Config("bussing suite needs a bussing goal".into()));
    };
    let cloud = generate_scene(spec)?;
    let (plate, _) = reference_plate(&cloud, plate_class)?;
    let c = object_center(&cloud, plate)?;
    let mut n = 0;
    for id in cloud.object_ids().filter(|id| *id != plate) {
        let o = object_center(&cloud, id)?;
        n += usize::from((o[0] - c[0]).hypot(o[1] - c[1]) >= *threshold);
    }
    Ok(n)
}

const BUSSING_STACKS: [&[&[usize]]; 5] = [
    &[&[1, 3]],
    &[&[1, 2]],
    &[&[1, 2, 3]],
    &[&[1, 3], &[0, 2]],
    &[&[1, 2], &[0, 3]],
];

/// Materializes the suite for `family` and `task`.
pub fn build_suite(config: &SuiteConfig, family: &str, task: &TaskSpec) -> Result<Vec<SuiteScene>> {
    match config {
        SuiteConfig::Explicit { scenes } => Ok(scenes.clone()),
        SuiteConfig::BlockStacking { count, seed } => {
            let probe = SceneSpec::random_family(family, vec![], 0)?;
            let n = probe.templates.len();
            let goal = goal_indices(&probe, task)?;
            let eligible: Vec<(Vec<Vec<usize>>, usize)> = all_stackings(n)
                .into_iter()
                .filter_map(|s| symbolic_steps(n, &s, &goal).map(|d| (s, d)))
                .filter(|(_, d)| *d >= 2)
                .collect();
            if eligible.is_empty() {
                return Err(Error::Config("no block configuration needs two or more steps".into()));
            }
            (0..*count)
                .map(|i| {
                    let (stacks, d) = &eligible[i % eligible.len()];
                    let spec = SceneSpec::random_family(family, stacks.clone(), mix_seed(*seed, i as u64))?;
                    Ok(SuiteScene {
                        name: format!("scene{i:02}"),
                        complexity: *d,
                        spec,
                    })
                })
                .collect()
        }
        SuiteConfig::StackedBussing { count, seed } => (0..*count)
            .map(|i| {
                let stacks = BUSSING_STACKS[i % BUSSING_STACKS.len()]
                    .iter()
                    .map(|s| s.to_vec())
                    .collect();
                let spec = SceneSpec::random_family(family, stacks, mix_seed(*seed, i as u64))?;
                if let Layout::Random { stacks, .. } = &spec.layout {
                    if stacks.iter().flatten().any(|t| *t >= spec.templates.len()) {
                        return Err(Error::Config(format!(
                            "family `{family}` too small for the bussing suite"
                        )));
                    }
                }
                let complexity = bussing_complexity(&spec, task)?;
                Ok(SuiteScene {
                    name: format!("scene{i:02}"),
                    complexity,
                    spec,
                })
            })
            .collect(),
    }
}
