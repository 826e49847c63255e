//! Heuristic and goal functions computed from the point cloud alone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{object_center, ObjectId, SegmentedCloud};
use crate::scene::{ContactParams, TaskKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Goal {
    /// Stack the named classes in one tower, listed top to bottom.
    BlockStacking { order: Vec<String> },
    /// Gather every object onto one object of `plate_class`.
    TableBussing {
        #[serde(default = "default_plate_class")]
        plate_class: String,
        /// Max XY distance of any object's center from the reference plate's.
        threshold: f64,
    },
}

fn default_plate_class() -> String {
    "plate".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub goal: Goal,
    /// XY center misalignment allowed between stacked blocks, meters.
    #[serde(default = "default_xy_tol")]
    pub xy_tolerance: f64,
    /// Allowed deviation of a block's bottom from its resting height, meters.
    #[serde(default = "default_height_tol")]
    pub height_tolerance: f64,
    #[serde(default)]
    pub contact: ContactParams,
}

fn default_xy_tol() -> f64 {
    0.015
}

fn default_height_tol() -> f64 {
    0.01
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskEval {
    pub heuristic: f64,
    pub is_goal: bool,
}

impl TaskSpec {
    pub fn block_stacking<S: Into<String>>(order: impl IntoIterator<Item = S>) -> Self {
        Self {
            goal: Goal::BlockStacking {
                order: order.into_iter().map(Into::into).collect(),
            },
            xy_tolerance: default_xy_tol(),
            height_tolerance: default_height_tol(),
            contact: ContactParams::default(),
        }
    }

    pub fn table_bussing(threshold: f64) -> Self {
        Self {
            goal: Goal::TableBussing {
                plate_class: default_plate_class(),
                threshold,
            },
            xy_tolerance: default_xy_tol(),
            height_tolerance: default_height_tol(),
            contact: ContactParams::default(),
        }
    }

    pub fn kind(&self) -> TaskKind {
        match self.goal {
            Goal::BlockStacking { .. } => TaskKind::BlockStacking,
            Goal::TableBussing { .. } => TaskKind::TableBussing,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xy_tolerance > 0.0 && self.height_tolerance > 0.0) {
            return Err(Error::Config("task tolerances must be positive".into()));
        }
        match &self.goal {
            Goal::BlockStacking { order } => {
                if order.is_empty() {
                    return Err(Error::Config("empty stacking order".into()));
                }
                let mut sorted = order.clone();
                sorted.sort();
                sorted.dedup();
                if sorted.len() != order.len() {
                    return Err(Error::Config("stacking order repeats a class".into()));
                }
            }
            Goal::TableBussing { threshold, .. } => {
                if !(*threshold > 0.0) {
                    return Err(Error::Config("bussing threshold must be positive".into()));
                }
            }
        }
        Ok(())
    }
}

/// Heuristic value and goal flag for `cloud`.
pub fn evaluate_task(cloud: &SegmentedCloud, spec: &TaskSpec) -> Result<TaskEval> {
    match &spec.goal {
        Goal::BlockStacking { order } => {
            let ids = resolve_order(cloud, order)?;
            let placed = blocks_in_place(cloud, &ids, spec)?;
            let out = ids.len() - placed;
            Ok(TaskEval {
                heuristic: out as f64,
                is_goal: out == 0,
            })
        }
        Goal::TableBussing { plate_class, threshold } => {
            let (_, dists) = reference_plate(cloud, plate_class)?;
            Ok(TaskEval {
                heuristic: dists.iter().sum(),
                is_goal: dists.iter().all(|d| *d < *threshold),
            })
        }
    }
}

fn resolve_order(cloud: &SegmentedCloud, order: &[String]) -> Result<Vec<ObjectId>> {
    order
        .iter()
        .map(|c| cloud.find_class(c).ok_or_else(|| Error::MissingObject(c.clone())))
        .collect()
}

/// Number of blocks in place counting up from the bottom of the target
/// tower: the bottom block must rest on the table, every other block on the
/// next one down, aligned in XY and at the right height, with everything
/// beneath it in place.
fn blocks_in_place(cloud: &SegmentedCloud, top_to_bottom: &[ObjectId], spec: &TaskSpec) -> Result<usize> {
    let c = &spec.contact;
    let mut placed = 0;
    let mut below: Option<ObjectId> = None;
    for &id in top_to_bottom.iter().rev() {
        let bb = cloud.bbox(id)?;
        let ok = match below {
            None => (bb.min.z - c.rest_height(None)).abs() <= spec.height_tolerance,
            Some(b) => {
                let lb = cloud.bbox(b)?;
                let [x0, y0] = bb.center_xy();
                let [x1, y1] = lb.center_xy();
                (x0 - x1).hypot(y0 - y1) <= spec.xy_tolerance
                    && (bb.min.z - c.rest_height(Some(lb.max.z))).abs() <= spec.height_tolerance
            }
        };
        if !ok {
            break;
        }
        placed += 1;
        below = Some(id);
    }
    Ok(placed)
}

/// The plate whose summed XY distance to every other object is smallest
/// (lowest id on ties), with those distances in object-id order.
pub fn reference_plate(cloud: &SegmentedCloud, plate_class: &str) -> Result<(ObjectId, Vec<f64>)> {
    let centers: Vec<(ObjectId, [f64; 2])> = cloud
        .object_ids()
        .map(|id| Ok((id, object_center(cloud, id)?)))
        .collect::<Result<_>>()?;
    let mut best: Option<(f64, ObjectId, Vec<f64>)> = None;
    for (pid, pc) in centers
        .iter()
        .filter(|(id, _)| cloud.class_of(*id).ok() == Some(plate_class))
    {
        let dists: Vec<f64> = centers
            .iter()
            .filter(|(id, _)| id != pid)
            .map(|(_, c)| (c[0] - pc[0]).hypot(c[1] - pc[1]))
            .collect();
        let sum: f64 = dists.iter().sum();
        if best.as_ref().is_none_or(|(s, _, _)| sum < *s) {
            best = Some((sum, *pid, dists));
        }
    }
    best.map(|(_, id, d)| (id, d))
        .ok_or_else(|| Error::MissingObject(plate_class.to_string()))
}

/// Sum of XY center offsets between consecutive blocks of the target tower
/// (block stacking), or the summed distance to the reference plate (bussing).
/// Lower is better.
pub fn alignment_error(cloud: &SegmentedCloud, spec: &TaskSpec) -> Result<f64> {
    match &spec.goal {
        Goal::BlockStacking { order } => {
            let ids = resolve_order(cloud, order)?;
            let mut sum = 0.0;
            for w in ids.windows(2) {
                let a = object_center(cloud, w[0])?;
                let b = object_center(cloud, w[1])?;
                sum += (a[0] - b[0]).hypot(a[1] - b[1]);
            }
            Ok(sum)
        }
        Goal::TableBussing { plate_class, .. } => Ok(reference_plate(cloud, plate_class)?.1.iter().sum()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{family_templates, generate_scene, ExplicitPose, Layout, ObjectTemplate, SceneSpec};

    fn pose(x: f64, y: f64, on: Option<usize>) -> ExplicitPose {
        ExplicitPose { x, y, yaw: 0.0, on }
    }

    fn scene(templates: Vec<ObjectTemplate>, poses: Vec<ExplicitPose>) -> SegmentedCloud {
        generate_scene(&SceneSpec {
            task: TaskKind::BlockStacking,
            templates,
            layout: Layout::Explicit { poses },
            seed: 0,
        })
        .unwrap()
    }

    fn rgb() -> TaskSpec {
        TaskSpec::block_stacking(["block_red", "block_green", "block_blue"])
    }

    // templates: 0 red, 1 green, 2 blue
    fn blocks(poses: Vec<ExplicitPose>) -> SegmentedCloud {
        scene(family_templates("block_stacking_3").unwrap(), poses)
    }

    #[test]
    fn all_unstacked_scores_two() {
        let c = blocks(vec![pose(0.0, 0.0, None), pose(0.2, 0.0, None), pose(-0.2, 0.0, None)]);
        let e = evaluate_task(&c, &rgb()).unwrap();
        assert_eq!(e.heuristic, 2.0);
        assert!(!e.is_goal);
    }

    #[test]
    fn green_on_blue_scores_one() {
        let c = blocks(vec![
            pose(0.0, 0.0, None),
            pose(-0.2, 0.0, Some(2)),
            pose(-0.2, 0.0, None),
        ]);
        let e = evaluate_task(&c, &rgb()).unwrap();
        assert_eq!(e.heuristic, 1.0);
        assert!(!e.is_goal);
    }

    #[test]
    fn full_tower_is_goal() {
        let c = blocks(vec![
            pose(0.1, 0.1, Some(1)),
            pose(0.1, 0.1, Some(2)),
            pose(0.1, 0.1, None),
        ]);
        let e = evaluate_task(&c, &rgb()).unwrap();
        assert_eq!(
            e,
            TaskEval {
                heuristic: 0.0,
                is_goal: true
            }
        );
        assert_eq!(alignment_error(&c, &rgb()).unwrap(), 0.0);
    }

    #[test]
    fn misaligned_top_block_is_out_of_place() {
        let c = blocks(vec![
            pose(0.13, 0.1, Some(1)),
            pose(0.1, 0.1, Some(2)),
            pose(0.1, 0.1, None),
        ]);
        let e = evaluate_task(&c, &rgb()).unwrap();
        assert_eq!(e.heuristic, 1.0);
    }

    #[test]
    fn wrong_order_tower() {
        // blue on green on red: only... nothing in place, red is not the bottom
        let c = blocks(vec![
            pose(0.0, 0.0, None),
            pose(0.0, 0.0, Some(0)),
            pose(0.0, 0.0, Some(1)),
        ]);
        assert_eq!(evaluate_task(&c, &rgb()).unwrap().heuristic, 3.0);
    }

    #[test]
    fn missing_class() {
        let c = blocks(vec![pose(0.0, 0.0, None), pose(0.2, 0.0, None), pose(-0.2, 0.0, None)]);
        let spec = TaskSpec::block_stacking(["block_red", "block_yellow"]);
        assert!(matches!(evaluate_task(&c, &spec), Err(Error::MissingObject(s)) if s == "block_yellow"));
        assert!(matches!(
            evaluate_task(&c, &TaskSpec::table_bussing(0.09)),
            Err(Error::MissingObject(_))
        ));
    }

    fn bussing(poses: Vec<ExplicitPose>) -> SegmentedCloud {
        // 0 plate, 1 plate, 2 bowl, 3 cup
        let t = vec![
            ObjectTemplate::cylinder("plate", 0.09, 0.02),
            ObjectTemplate::cylinder("plate", 0.09, 0.02),
            ObjectTemplate::cylinder("bowl", 0.06, 0.04),
            ObjectTemplate::cylinder("cup", 0.035, 0.06),
        ];
        scene(t, poses)
    }

    #[test]
    fn bussing_gathered_is_goal() {
        let c = bussing(vec![
            pose(0.0, 0.0, None),
            pose(0.0, 0.0, Some(0)),
            pose(0.0, 0.0, Some(1)),
            pose(0.0, 0.0, Some(2)),
        ]);
        let e = evaluate_task(&c, &TaskSpec::table_bussing(0.09)).unwrap();
        assert!(e.heuristic.abs() < 1e-12);
        assert!(e.is_goal);
    }

    #[test]
    fn bussing_distances_sum() {
        // plate 1 and bowl... cup 0.3 m away, bowl 0.4 m away, second plate on the first
        let c = bussing(vec![
            pose(0.0, 0.0, None),
            pose(0.0, 0.0, Some(0)),
            pose(0.0, 0.4, None),
            pose(0.3, 0.0, None),
        ]);
        let spec = TaskSpec::table_bussing(0.09);
        let e = evaluate_task(&c, &spec).unwrap();
        assert!((e.heuristic - 0.7).abs() < 1e-12);
        assert!(!e.is_goal);
        let (reference, _) = reference_plate(&c, "plate").unwrap();
        assert_eq!(reference, ObjectId(0));
    }

    #[test]
    fn reference_plate_prefers_loaded_plate() {
        let c = bussing(vec![
            pose(0.0, 0.0, None),
            pose(0.5, 0.0, None),
            pose(0.5, 0.0, Some(1)),
            pose(0.5, 0.0, Some(2)),
        ]);
        let (reference, d) = reference_plate(&c, "plate").unwrap();
        assert_eq!(reference, ObjectId(1));
        assert!((d.iter().sum::<f64>() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(rgb().validate().is_ok());
        assert!(TaskSpec::table_bussing(0.0).validate().is_err());
        assert!(TaskSpec::block_stacking(["a", "a"]).validate().is_err());
    }
}
