use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde_json::{Map, Value};

use super::parse::{from_value, slots_in, ParseOptions};
use super::{parse_task_definition, Component, TaskDefinition, TdlError};
use crate::world::ClassHierarchy;

/// The twelve top-level benchmark tasks, in table order.
pub const BENCHMARK_TASKS: [&str; 12] = [
    "Water Plant",
    "Make Coffee",
    "Clean All X",
    "Put All X On Y",
    "Boil Potato",
    "Plate Of Toast",
    "N Slices Of X In Y",
    "Put All X In One Y",
    "N Cooked X Slices In Y",
    "Prepare Sandwich",
    "Prepare Salad",
    "Prepare Breakfast",
];

const SHIPPED: &[(&str, &str)] = &[
    ("toast.task", include_str!("../../tasks/toast.task")),
    ("clean_x.task", include_str!("../../tasks/clean_x.task")),
    ("water_plant.task", include_str!("../../tasks/water_plant.task")),
    ("make_coffee.task", include_str!("../../tasks/make_coffee.task")),
    ("clean_all_x.task", include_str!("../../tasks/clean_all_x.task")),
    ("put_all_x_on_y.task", include_str!("../../tasks/put_all_x_on_y.task")),
    ("boil_potato.task", include_str!("../../tasks/boil_potato.task")),
    ("plate_of_toast.task", include_str!("../../tasks/plate_of_toast.task")),
    ("n_slices_of_x_in_y.task", include_str!("../../tasks/n_slices_of_x_in_y.task")),
    ("put_all_x_in_one_y.task", include_str!("../../tasks/put_all_x_in_one_y.task")),
    ("n_cooked_x_slices_in_y.task", include_str!("../../tasks/n_cooked_x_slices_in_y.task")),
    ("prepare_sandwich.task", include_str!("../../tasks/prepare_sandwich.task")),
    ("prepare_salad.task", include_str!("../../tasks/prepare_salad.task")),
    ("prepare_breakfast.task", include_str!("../../tasks/prepare_breakfast.task")),
];

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum LibraryError {
    #[error("{origin}: {error}")]
    Parse { origin: String, error: TdlError },
    #[error("duplicate task_name `{0}`")]
    Duplicate(String),
    #[error("task `{task}` component `{component}` references unknown task `{target}`")]
    UnknownTarget { task: String, component: String, target: String },
    #[error("task `{task}` component `{component}` passes {got} parameters to `{target}`, which takes {expected}")]
    Arity {
        task: String,
        component: String,
        target: String,
        expected: usize,
        got: usize,
    },
    #[error("task reference cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("task `{task}` relates component `{component}`, but `{target}` has no anchor object")]
    NullAnchor { task: String, component: String, target: String },
    #[error("no task named `{0}`")]
    NoSuchTask(String),
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Tdl(#[from] TdlError),
}

/// A validated set of task definitions with resolved cross-references.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskLibrary {
    tasks: BTreeMap<String, TaskDefinition>,
    hierarchy: ClassHierarchy,
}

/// A definition whose parameter slots have all been filled in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTask {
    pub def: TaskDefinition,
    pub source_task: String,
    pub params: Vec<String>,
}

impl GroundTask {
    /// The human-readable prompt, e.g. "Make a plate of toast."
    pub fn render_desc(&self) -> String {
        self.def.desc.clone()
    }
}

/// Parse every source and build a library from the results.
pub fn load_library<S: AsRef<str>>(sources: &[S], hierarchy: ClassHierarchy) -> Result<TaskLibrary, LibraryError> {
    let mut defs = Vec::new();
    for (i, s) in sources.iter().enumerate() {
        let def = parse_task_definition(s.as_ref()).map_err(|error| LibraryError::Parse {
            origin: format!("source {i}"),
            error,
        })?;
        defs.push(def);
    }
    TaskLibrary::from_definitions(defs, hierarchy)
}

impl TaskLibrary {
    pub fn from_definitions(defs: Vec<TaskDefinition>, hierarchy: ClassHierarchy) -> Result<Self, LibraryError> {
        let mut tasks = BTreeMap::new();
        for def in defs {
            if tasks.contains_key(&def.task_name) {
                return Err(LibraryError::Duplicate(def.task_name));
            }
            tasks.insert(def.task_name.clone(), def);
        }
        let lib = TaskLibrary { tasks, hierarchy };
        lib.check_references()?;
        lib.check_cycles()?;
        lib.check_anchors()?;
        Ok(lib)
    }

    /// The definitions that ship with the engine.
    pub fn shipped() -> Self {
        Self::shipped_sources()
            .and_then(|defs| Self::from_definitions(defs, ClassHierarchy::builtin()))
            .expect("shipped task library is valid")
    }

    pub fn shipped_source_texts() -> &'static [(&'static str, &'static str)] {
        SHIPPED
    }

    fn shipped_sources() -> Result<Vec<TaskDefinition>, LibraryError> {
        SHIPPED
            .iter()
            .map(|(origin, text)| {
                parse_task_definition(text).map_err(|error| LibraryError::Parse {
                    origin: origin.to_string(),
                    error,
                })
            })
            .collect()
    }

    /// Load every `.task` file under `dir`, recursively, in path order.
    pub fn from_dir(dir: &Path, hierarchy: ClassHierarchy) -> Result<Self, LibraryError> {
        let mut files = Vec::new();
        collect_task_files(dir, &mut files).map_err(|e| LibraryError::Io(format!("{}: {e}", dir.display())))?;
        files.sort();
        let mut defs = Vec::new();
        for f in files {
            let text = std::fs::read_to_string(&f).map_err(|e| LibraryError::Io(format!("{}: {e}", f.display())))?;
            let def = parse_task_definition(&text).map_err(|error| LibraryError::Parse {
                origin: f.display().to_string(),
                error,
            })?;
            defs.push(def);
        }
        Self::from_definitions(defs, hierarchy)
    }

    pub fn get(&self, name: &str) -> Option<&TaskDefinition> {
        self.tasks.get(name)
    }

    pub fn hierarchy(&self) -> &ClassHierarchy {
        &self.hierarchy
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub fn definitions(&self) -> impl Iterator<Item = &TaskDefinition> {
        self.tasks.values()
    }

    /// Look up and ground a task in one step.
    pub fn ground(&self, name: &str, params: &[String]) -> Result<GroundTask, LibraryError> {
        let def = self.get(name).ok_or_else(|| LibraryError::NoSuchTask(name.to_string()))?;
        Ok(substitute_params(def, params)?)
    }

    fn check_references(&self) -> Result<(), LibraryError> {
        for def in self.tasks.values() {
            for (key, comp) in &def.components {
                let Component::TaskRef(r) = comp else { continue };
                let Some(target) = self.tasks.get(&r.task_name) else {
                    return Err(LibraryError::UnknownTarget {
                        task: def.task_name.clone(),
                        component: key.clone(),
                        target: r.task_name.clone(),
                    });
                };
                if target.task_nparams != r.task_params.len() {
                    return Err(LibraryError::Arity {
                        task: def.task_name.clone(),
                        component: key.clone(),
                        target: r.task_name.clone(),
                        expected: target.task_nparams,
                        got: r.task_params.len(),
                    });
                }
            }
        }
        Ok(())
    }

    fn check_cycles(&self) -> Result<(), LibraryError> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Active,
            Done,
        }
        fn visit<'a>(
            lib: &'a TaskLibrary,
            name: &'a str,
            marks: &mut BTreeMap<&'a str, Mark>,
            path: &mut Vec<&'a str>,
        ) -> Result<(), LibraryError> {
            match marks.get(name) {
                Some(Mark::Done) => return Ok(()),
                Some(Mark::Active) => {
                    let start = path.iter().position(|n| *n == name).unwrap_or(0);
                    let mut cycle: Vec<String> = path[start..].iter().map(|s| s.to_string()).collect();
                    cycle.push(name.to_string());
                    return Err(LibraryError::Cycle(cycle));
                }
                None => {}
            }
            marks.insert(name, Mark::Active);
            path.push(name);
            if let Some(def) = lib.tasks.get(name) {
                for comp in def.components.values() {
                    if let Component::TaskRef(r) = comp {
                        visit(lib, &r.task_name, marks, path)?;
                    }
                }
            }
            path.pop();
            marks.insert(name, Mark::Done);
            Ok(())
        }
        let mut marks = BTreeMap::new();
        for name in self.tasks.keys() {
            visit(self, name, &mut marks, &mut Vec::new())?;
        }
        Ok(())
    }

    fn check_anchors(&self) -> Result<(), LibraryError> {
        for def in self.tasks.values() {
            let related: BTreeSet<&String> = def
                .relations
                .iter()
                .flat_map(|r| r.head_entity_list.iter().chain(&r.tail_entity_list))
                .collect();
            for key in related {
                let mut comp = &def.components[key];
                let mut owner = def;
                while let Component::TaskRef(r) = comp {
                    let target = &self.tasks[&r.task_name];
                    let Some(anchor) = &target.task_anchor_object else {
                        return Err(LibraryError::NullAnchor {
                            task: owner.task_name.clone(),
                            component: key.clone(),
                            target: target.task_name.clone(),
                        });
                    };
                    owner = target;
                    comp = &target.components[anchor];
                }
            }
        }
        Ok(())
    }
}

fn collect_task_files(dir: &Path, out: &mut Vec<std::path::PathBuf>) -> std::io::Result<()> {
    for entry in std::fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect_task_files(&path, out)?;
        } else if path.extension().is_some_and(|e| e == "task") {
            out.push(path);
        }
    }
    Ok(())
}

/// Replace every `#k` slot with `params[k]`, as plain text, then re-read the
/// definition.
pub fn substitute_params(def: &TaskDefinition, params: &[String]) -> Result<GroundTask, TdlError> {
    if params.len() != def.task_nparams {
        return Err(TdlError::Arity {
            task: def.task_name.clone(),
            expected: def.task_nparams,
            got: params.len(),
        });
    }
    let replaced = replace_value(&def.to_value(), params)?;
    let ground = from_value(&replaced, ParseOptions::default())?;
    Ok(GroundTask {
        def: ground,
        source_task: def.task_name.clone(),
        params: params.to_vec(),
    })
}

fn replace_value(v: &Value, params: &[String]) -> Result<Value, TdlError> {
    Ok(match v {
        Value::String(s) => Value::String(replace_text(s, params)),
        Value::Array(items) => Value::Array(
            items
                .iter()
                .map(|i| replace_value(i, params))
                .collect::<Result<_, _>>()?,
        ),
        Value::Object(map) => {
            let mut out = Map::new();
            for (k, item) in map {
                let key = replace_text(k, params);
                if out.contains_key(&key) {
                    return Err(TdlError::DuplicateKey(key));
                }
                out.insert(key, replace_value(item, params)?);
            }
            Value::Object(out)
        }
        other => other.clone(),
    })
}

pub(crate) fn replace_text(s: &str, params: &[String]) -> String {
    if slots_in(s).is_empty() {
        return s.to_string();
    }
    let bytes = s.as_bytes();
    let mut out = String::with_capacity(s.len());
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'#' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if let Some(p) = s[start..end].parse::<usize>().ok().and_then(|k| params.get(k)) {
                out.push_str(p);
                i = end;
                continue;
            }
        }
        let ch = s[i..].chars().next().expect("in bounds");
        out.push(ch);
        i += ch.len_utf8();
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replace_text_handles_glued_slots() {
        let p = vec!["Fork".to_string(), "in".to_string(), "Sink".to_string()];
        assert_eq!(replace_text("The #0 needs to be put #1to a #2", &p), "The Fork needs to be put into a Sink");
        assert_eq!(replace_text("#0Sliced", &p), "ForkSliced");
        assert_eq!(replace_text("no slots", &p), "no slots");
    }

    #[test]
    fn shipped_library_loads() {
        let lib = TaskLibrary::shipped();
        for name in BENCHMARK_TASKS {
            assert!(lib.get(name).is_some(), "{name}");
        }
        assert_eq!(lib.len(), 14);
    }
}
