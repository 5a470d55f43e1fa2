//! Goal-condition evaluation for finished (or partially finished) tasks.

use serde::{Deserialize, Serialize};

use super::catalog::ClassId;
use super::scene::{GridScene, ObjectId, Placement};
use crate::error::{Error, Result};
use crate::planner::{TaskSpec, TaskType};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub conditions: Vec<Condition>,
}

impl ConditionReport {
    pub fn satisfied(&self) -> usize {
        self.conditions.iter().filter(|c| c.met).count()
    }

    pub fn total(&self) -> usize {
        self.conditions.len()
    }

    pub fn all_met(&self) -> bool {
        self.satisfied() == self.total()
    }

    pub fn fraction(&self) -> f64 {
        if self.conditions.is_empty() {
            0.0
        } else {
            self.satisfied() as f64 / self.total() as f64
        }
    }
}

fn class(scene: &GridScene, name: &str) -> Result<ClassId> {
    scene
        .catalog
        .id(name)
        .ok_or_else(|| Error::UnknownTask(format!("unknown class {name:?}")))
}

/// Whether `id` sits (possibly nested) inside some instance of `container`.
fn inside_class(scene: &GridScene, id: ObjectId, container: ClassId) -> bool {
    scene
        .instances_of(container)
        .any(|c| c.id != id && scene.is_within(id, c.id))
}

fn directly_inside_class(scene: &GridScene, id: ObjectId, container: ClassId) -> bool {
    match scene.objects[id as usize].placement {
        Placement::Inside(p) => scene.class_of(p) == container,
        _ => false,
    }
}

/// Evaluate the task's goal conditions. Per-instance conditions are scored
/// on whichever instance satisfies the most of them.
pub fn check_goal_conditions(scene: &GridScene, task: &TaskSpec) -> Result<ConditionReport> {
    let o = class(scene, &task.object)?;
    let r = class(scene, &task.receptacle)?;
    let sliced_name = format!("{} is sliced", task.object);
    let in_r = format!("{} in {}", task.object, task.receptacle);

    let mut best: Option<Vec<Condition>> = None;
    let mut consider = |conds: Vec<Condition>| {
        let score = conds.iter().filter(|c| c.met).count();
        if best
            .as_ref()
            .is_none_or(|b| score > b.iter().filter(|c| c.met).count())
        {
            best = Some(conds);
        }
    };
    let cond = |name: &str, met: bool| Condition {
        name: name.to_string(),
        met,
    };
    let objects: Vec<ObjectId> = scene.instances_of(o).map(|x| x.id).collect();
    let slice_cond = |id: Option<ObjectId>| {
        cond(
            &sliced_name,
            id.is_some_and(|i| scene.objects[i as usize].state.is_sliced),
        )
    };

    match task.task_type {
        TaskType::PickPlace => {
            for id in objects
                .iter()
                .copied()
                .map(Some)
                .chain(std::iter::once(None))
            {
                let mut c = vec![cond(&in_r, id.is_some_and(|i| inside_class(scene, i, r)))];
                if task.slice {
                    c.push(slice_cond(id));
                }
                consider(c);
            }
        }
        TaskType::LookExamine => {
            let lamp_on = scene.instances_of(r).any(|l| l.state.is_toggled);
            for id in objects
                .iter()
                .copied()
                .map(Some)
                .chain(std::iter::once(None))
            {
                let held =
                    id.is_some_and(|i| scene.objects[i as usize].placement == Placement::Held);
                let mut c = vec![
                    cond(&format!("{} held", task.object), held),
                    cond(
                        &format!("{} on while {} held", task.receptacle, task.object),
                        held && lamp_on,
                    ),
                ];
                if task.slice {
                    c.push(slice_cond(id));
                }
                consider(c);
            }
        }
        TaskType::PlaceTwo => {
            let mut per_receptacle: Vec<usize> = scene
                .instances_of(r)
                .map(|rec| {
                    objects
                        .iter()
                        .filter(|&&i| i != rec.id && scene.is_within(i, rec.id))
                        .count()
                })
                .collect();
            per_receptacle.sort_unstable();
            let top = per_receptacle.last().copied().unwrap_or(0);
            let mut c = vec![
                cond(
                    &format!("one {} in {}", task.object, task.receptacle),
                    top >= 1,
                ),
                cond(
                    &format!("two {} in one {}", task.object, task.receptacle),
                    top >= 2,
                ),
            ];
            if task.slice {
                let any_sliced = objects
                    .iter()
                    .any(|&i| scene.objects[i as usize].state.is_sliced);
                c.push(cond(&sliced_name, any_sliced));
            }
            consider(c);
        }
        TaskType::Stack => {
            let m_name = task.movable_receptacle.as_deref().ok_or_else(|| {
                Error::UnknownTask("Stack task without movable_receptacle".into())
            })?;
            let m = class(scene, m_name)?;
            let movables: Vec<ObjectId> = scene.instances_of(m).map(|x| x.id).collect();
            for id in objects
                .iter()
                .copied()
                .map(Some)
                .chain(std::iter::once(None))
            {
                for mid in movables
                    .iter()
                    .copied()
                    .map(Some)
                    .chain(std::iter::once(None))
                {
                    let o_in_m = matches!((id, mid), (Some(i), Some(mm)) if i != mm && scene.is_within(i, mm));
                    let m_in_r = mid.is_some_and(|mm| inside_class(scene, mm, r));
                    let mut c = vec![
                        cond(&format!("{} in {}", task.object, m_name), o_in_m),
                        cond(&format!("{} in {}", m_name, task.receptacle), m_in_r),
                    ];
                    if task.slice {
                        c.push(slice_cond(id));
                    }
                    consider(c);
                }
            }
        }
        TaskType::HeatPlace | TaskType::CoolPlace | TaskType::CleanPlace => {
            let (label, get): (&str, fn(&super::scene::ObjectState) -> bool) = match task.task_type
            {
                TaskType::HeatPlace => ("heated", |s| s.is_heated),
                TaskType::CoolPlace => ("cooled", |s| s.is_cooled),
                _ => ("cleaned", |s| s.is_cleaned),
            };
            for id in objects
                .iter()
                .copied()
                .map(Some)
                .chain(std::iter::once(None))
            {
                let state = id.is_some_and(|i| get(&scene.objects[i as usize].state));
                let mut c = vec![
                    cond(&format!("{} is {label}", task.object), state),
                    cond(&in_r, id.is_some_and(|i| inside_class(scene, i, r))),
                ];
                if task.slice {
                    c.push(slice_cond(id));
                }
                consider(c);
            }
        }
    }
    Ok(ConditionReport {
        conditions: best.unwrap_or_default(),
    })
}

/// True when `id` rests directly in an instance of the named class.
pub fn rests_in(scene: &GridScene, id: ObjectId, container: ClassId) -> bool {
    directly_inside_class(scene, id, container)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::world::catalog::Catalog;

    fn kitchen() -> (GridScene, ObjectId, ObjectId) {
        let mut s = GridScene::empty(8, 8, Arc::new(Catalog::default()), 0);
        let c = s.catalog.clone();
        let table = s.add_object(c.id("DiningTable").unwrap(), Placement::Cell { x: 2, z: 2 });
        let egg = s.add_object(c.id("Egg").unwrap(), Placement::Cell { x: 4, z: 4 });
        (s, table, egg)
    }

    #[test]
    fn heat_place_counts_both_conditions() {
        let (mut s, table, egg) = kitchen();
        let task = TaskSpec::new(TaskType::HeatPlace, "Egg", "DiningTable");
        assert_eq!(check_goal_conditions(&s, &task).unwrap().satisfied(), 0);
        s.objects[egg as usize].state.is_heated = true;
        s.set_placement(egg, Placement::Held);
        let r = check_goal_conditions(&s, &task).unwrap();
        assert_eq!((r.satisfied(), r.total()), (1, 2));
        s.set_placement(egg, Placement::Inside(table));
        let r = check_goal_conditions(&s, &task).unwrap();
        assert_eq!((r.satisfied(), r.total()), (2, 2));
        assert!(rests_in(&s, egg, s.catalog.id("DiningTable").unwrap()));
    }

    #[test]
    fn place_two_needs_same_receptacle() {
        let (mut s, table, egg) = kitchen();
        let c = s.catalog.clone();
        let egg2 = s.add_object(c.id("Egg").unwrap(), Placement::Cell { x: 5, z: 5 });
        let task = TaskSpec::new(TaskType::PlaceTwo, "Egg", "DiningTable");
        s.set_placement(egg, Placement::Inside(table));
        assert_eq!(check_goal_conditions(&s, &task).unwrap().satisfied(), 1);
        s.set_placement(egg2, Placement::Inside(table));
        assert!(check_goal_conditions(&s, &task).unwrap().all_met());
    }

    #[test]
    fn unknown_class_is_rejected() {
        let (s, _, _) = kitchen();
        let task = TaskSpec::new(TaskType::PickPlace, "Unicorn", "DiningTable");
        assert!(matches!(
            check_goal_conditions(&s, &task),
            Err(Error::UnknownTask(_))
        ));
    }
}
