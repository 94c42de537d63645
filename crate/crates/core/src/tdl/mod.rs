//! The task definition language: parsing, validation, task libraries and
//! parameter substitution.

mod library;
mod parse;

use std::fmt;

use indexmap::IndexMap;

use crate::world::{PropValue, Property};

pub use library::{load_library, substitute_params, GroundTask, LibraryError, TaskLibrary, BENCHMARK_TASKS};
pub use parse::{parse_task_definition, parse_task_definition_with, ParseOptions};

/// Cardinality of a component or relation head.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Determiner {
    A,
    All,
    Count(u32),
    /// An unsubstituted `#k` parameter slot; only legal before substitution.
    Slot(usize),
}

impl Determiner {
    /// Required instance count with `a` treated as 1; `None` for `all`.
    pub fn count(&self) -> Option<u32> {
        match self {
            Determiner::A => Some(1),
            Determiner::Count(n) => Some(*n),
            Determiner::All | Determiner::Slot(_) => None,
        }
    }

    pub fn token(&self) -> String {
        match self {
            Determiner::A => "a".into(),
            Determiner::All => "all".into(),
            Determiner::Count(n) => n.to_string(),
            Determiner::Slot(k) => format!("#{k}"),
        }
    }
}

impl fmt::Display for Determiner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TailDeterminer {
    A,
    The,
}

impl TailDeterminer {
    pub fn token(self) -> &'static str {
        match self {
            TailDeterminer::A => "a",
            TailDeterminer::The => "the",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomicComponent {
    pub determiner: Determiner,
    pub primary_condition: Property,
    pub instance_shareable: bool,
    pub conditions: IndexMap<Property, PropValue>,
    pub condition_failure_descs: IndexMap<Property, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskRefComponent {
    pub determiner: Determiner,
    pub task_name: String,
    pub task_params: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    Atomic(AtomicComponent),
    TaskRef(TaskRefComponent),
}

impl Component {
    pub fn determiner(&self) -> &Determiner {
        match self {
            Component::Atomic(a) => &a.determiner,
            Component::TaskRef(t) => &t.determiner,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub property: Property,
    pub tail_entity_list: Vec<String>,
    pub tail_determiner_list: Vec<TailDeterminer>,
    pub head_entity_list: Vec<String>,
    pub head_determiner_list: Vec<Determiner>,
    pub failure_desc: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskDefinition {
    pub task_id: i64,
    pub task_name: String,
    pub task_nparams: usize,
    pub task_anchor_object: Option<String>,
    pub desc: String,
    pub components: IndexMap<String, Component>,
    pub relations: Vec<Relation>,
}

impl TaskDefinition {
    pub fn component(&self, key: &str) -> Option<&Component> {
        self.components.get(key)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TdlError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: missing required field `{field}`")]
    MissingField { path: String, field: String },
    #[error("{path}: unknown field `{field}`")]
    UnknownField { path: String, field: String },
    #[error("{path}: expected {expected}")]
    WrongType { path: String, expected: &'static str },
    #[error("{path}: unknown determiner `{token}`")]
    UnknownDeterminer { path: String, token: String },
    #[error("{path}: unknown property `{name}`")]
    UnknownProperty { path: String, name: String },
    #[error("component `{component}`: primary_condition `{property}` is not among its conditions")]
    PrimaryNotInConditions { component: String, property: String },
    #[error("component `{component}`: failure description for `{property}`, which is not a condition")]
    FailureDescNotInConditions { component: String, property: String },
    #[error("component `{component}`: must have exactly one of `task_name` or `conditions`")]
    ComponentKind { component: String },
    #[error("task_anchor_object `{0}` is not a component key")]
    AnchorNotComponent(String),
    #[error("relation {index}: `{key}` is not a component key")]
    UnknownEntity { index: usize, key: String },
    #[error("relation {index}: {list} has {got} entries, expected {expected}")]
    ListLength { index: usize, list: &'static str, expected: usize, got: usize },
    #[error("relation {index}: property `{property}` is not supported in relations")]
    UnsupportedRelation { index: usize, property: String },
    #[error("parameter slot #{slot} out of range for task_nparams = {nparams}")]
    SlotOutOfRange { slot: usize, nparams: usize },
    #[error("substitution makes two keys equal: `{0}`")]
    DuplicateKey(String),
    #[error("task `{task}` takes {expected} parameters, got {got}")]
    Arity { task: String, expected: usize, got: usize },
}
