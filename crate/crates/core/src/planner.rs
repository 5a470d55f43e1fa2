//! Task specifications and template expansion into (verb, noun) subgoals.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{AffordanceMask, Catalog, ClassKind};

pub const TASK_FILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskType {
    LookExamine,
    PickPlace,
    PlaceTwo,
    Stack,
    HeatPlace,
    CoolPlace,
    CleanPlace,
}

impl TaskType {
    pub const ALL: [TaskType; 7] = [
        TaskType::LookExamine,
        TaskType::PickPlace,
        TaskType::PlaceTwo,
        TaskType::Stack,
        TaskType::HeatPlace,
        TaskType::CoolPlace,
        TaskType::CleanPlace,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskType::LookExamine => "LookExamine",
            TaskType::PickPlace => "PickPlace",
            TaskType::PlaceTwo => "PlaceTwo",
            TaskType::Stack => "Stack",
            TaskType::HeatPlace => "HeatPlace",
            TaskType::CoolPlace => "CoolPlace",
            TaskType::CleanPlace => "CleanPlace",
        }
    }
}

/// A structured task. For `LookExamine` the receptacle names the light.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(rename = "type")]
    pub task_type: TaskType,
    pub object: String,
    pub receptacle: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub movable_receptacle: Option<String>,
    #[serde(default)]
    pub slice: bool,
}

impl TaskSpec {
    pub fn new(task_type: TaskType, object: &str, receptacle: &str) -> Self {
        TaskSpec {
            task_type,
            object: object.to_string(),
            receptacle: receptacle.to_string(),
            movable_receptacle: None,
            slice: false,
        }
    }

    pub fn with_movable(mut self, movable: &str) -> Self {
        self.movable_receptacle = Some(movable.to_string());
        self
    }

    pub fn sliced(mut self) -> Self {
        self.slice = true;
        self
    }

    /// Check class names and argument shapes against a catalog.
    pub fn validate(&self, catalog: &Catalog) -> Result<()> {
        let lookup = |name: &str, field: &str| {
            catalog
                .id(name)
                .ok_or_else(|| Error::InvalidSpec(format!("{field}: unknown class {name:?}")))
        };
        let obj = lookup(&self.object, "object")?;
        let info = catalog.get(obj);
        if !info.affordances.contains(AffordanceMask::PICKUPABLE) {
            return Err(Error::InvalidSpec(format!(
                "object: {} is not pickupable",
                self.object
            )));
        }
        let rec = lookup(&self.receptacle, "receptacle")?;
        let rec_info = catalog.get(rec);
        if self.task_type == TaskType::LookExamine {
            if !rec_info.affordances.contains(AffordanceMask::TOGGLEABLE_ON) {
                return Err(Error::InvalidSpec(format!(
                    "receptacle: {} is not a light",
                    self.receptacle
                )));
            }
        } else if !rec_info.affordances.contains(AffordanceMask::RECEPTACLE) {
            return Err(Error::InvalidSpec(format!(
                "receptacle: {} is not a receptacle",
                self.receptacle
            )));
        }
        match (&self.movable_receptacle, self.task_type) {
            (Some(m), TaskType::Stack) => {
                let mid = lookup(m, "movable_receptacle")?;
                let mi = catalog.get(mid);
                if mi.kind != ClassKind::Small
                    || !mi
                        .affordances
                        .contains(AffordanceMask::RECEPTACLE | AffordanceMask::PICKUPABLE)
                {
                    return Err(Error::InvalidSpec(format!(
                        "movable_receptacle: {m} cannot be carried"
                    )));
                }
            }
            (None, TaskType::Stack) => {
                return Err(Error::InvalidSpec(
                    "movable_receptacle: required for Stack".into(),
                ))
            }
            (Some(_), _) => {
                return Err(Error::InvalidSpec(
                    "movable_receptacle: only valid for Stack".into(),
                ))
            }
            (None, _) => {}
        }
        if self.slice {
            if !info.affordances.contains(AffordanceMask::SLICEABLE) {
                return Err(Error::InvalidSpec(format!(
                    "slice: {} is not sliceable",
                    self.object
                )));
            }
            if catalog.slicer().is_none() {
                return Err(Error::InvalidSpec(
                    "slice: catalog has no knife class".into(),
                ));
            }
        }
        Ok(())
    }
}

impl fmt::Display for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}", self.task_type.name(), self.object)?;
        if let Some(m) = &self.movable_receptacle {
            write!(f, ", {m}")?;
        }
        write!(f, ", {}", self.receptacle)?;
        if self.slice {
            f.write_str(", sliced")?;
        }
        f.write_str(")")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verb {
    GotoLocation,
    PickUp,
    Put,
    Slice,
    Toggle,
    Heat,
    Cool,
    Clean,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Noun {
    Class(String),
    /// Any open-top receptacle surface, bound when executed.
    AnySurface,
}

impl Noun {
    pub fn class(name: &str) -> Noun {
        Noun::Class(name.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Subgoal {
    pub verb: Verb,
    pub noun: Noun,
}

impl Subgoal {
    pub fn new(verb: Verb, noun: &str) -> Self {
        Subgoal {
            verb,
            noun: Noun::class(noun),
        }
    }
}

impl fmt::Display for Subgoal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.noun {
            Noun::Class(c) => write!(f, "({:?}, {c})", self.verb),
            Noun::AnySurface => write!(f, "({:?}, AnySurface)", self.verb),
        }
    }
}

pub const MICROWAVE: &str = "Microwave";
pub const FRIDGE: &str = "Fridge";
pub const SINK_BASIN: &str = "SinkBasin";
pub const KNIFE: &str = "Knife";

/// Expand a task into its subgoal template.
pub fn plan_from_task(task: &TaskSpec) -> Result<Vec<Subgoal>> {
    use Verb::*;
    let o = task.object.as_str();
    let r = task.receptacle.as_str();
    if o.is_empty() || r.is_empty() {
        return Err(Error::InvalidSpec(
            "object and receptacle are required".into(),
        ));
    }
    let mut plan = Vec::new();
    if task.slice {
        plan.push(Subgoal::new(PickUp, KNIFE));
        plan.push(Subgoal::new(Slice, o));
        plan.push(Subgoal {
            verb: Put,
            noun: Noun::AnySurface,
        });
    }
    let body: Vec<Subgoal> = match task.task_type {
        TaskType::LookExamine => vec![Subgoal::new(PickUp, o), Subgoal::new(Toggle, r)],
        TaskType::PickPlace => vec![Subgoal::new(PickUp, o), Subgoal::new(Put, r)],
        TaskType::PlaceTwo => vec![
            Subgoal::new(PickUp, o),
            Subgoal::new(GotoLocation, o),
            Subgoal::new(Put, r),
            Subgoal::new(PickUp, o),
            Subgoal::new(Put, r),
        ],
        TaskType::Stack => {
            let m = task.movable_receptacle.as_deref().ok_or_else(|| {
                Error::InvalidSpec("movable_receptacle: required for Stack".into())
            })?;
            vec![
                Subgoal::new(PickUp, o),
                Subgoal::new(Put, m),
                Subgoal::new(PickUp, m),
                Subgoal::new(Put, r),
            ]
        }
        TaskType::HeatPlace => vec![
            Subgoal::new(PickUp, o),
            Subgoal::new(Heat, MICROWAVE),
            Subgoal::new(Put, r),
        ],
        TaskType::CoolPlace => vec![
            Subgoal::new(PickUp, o),
            Subgoal::new(Cool, FRIDGE),
            Subgoal::new(Put, r),
        ],
        TaskType::CleanPlace => vec![
            Subgoal::new(PickUp, o),
            Subgoal::new(Clean, SINK_BASIN),
            Subgoal::new(Put, r),
        ],
    };
    plan.extend(body);
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskFile {
    pub version: u32,
    pub tasks: Vec<TaskSpec>,
}

/// Parse a task file body. Errors carry the line, column and offending field.
pub fn parse_tasks(text: &str) -> Result<Vec<TaskSpec>> {
    let file: TaskFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    if file.version != TASK_FILE_VERSION {
        return Err(Error::Parse(format!(
            "version: unsupported task file version {}",
            file.version
        )));
    }
    Ok(file.tasks)
}

pub fn parse_task_file(path: &Path) -> Result<Vec<TaskSpec>> {
    let text = std::fs::read_to_string(path)?;
    parse_tasks(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn tasks_to_json(tasks: &[TaskSpec]) -> String {
    let file = TaskFile {
        version: TASK_FILE_VERSION,
        tasks: tasks.to_vec(),
    };
    let mut s = serde_json::to_string_pretty(&file).expect("task specs serialize");
    s.push('\n');
    s
}

pub fn write_task_file(path: &Path, tasks: &[TaskSpec]) -> Result<()> {
    std::fs::write(path, tasks_to_json(tasks))?;
    Ok(())
}
