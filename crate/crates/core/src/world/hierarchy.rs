use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HierarchyError {
    #[error("class hierarchy cycle: {}", .0.join(" -> "))]
    Cycle(Vec<String>),
    #[error("malformed hierarchy file: {0}")]
    Format(String),
}

/// Named object classes, each a set of object types and/or other class names.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHierarchy {
    classes: BTreeMap<String, BTreeSet<String>>,
    #[serde(skip)]
    expanded: BTreeMap<String, BTreeSet<String>>,
}

#[derive(Serialize, Deserialize)]
struct HierarchyFile {
    version: u32,
    classes: BTreeMap<String, BTreeSet<String>>,
}

impl ClassHierarchy {
    pub fn new(classes: BTreeMap<String, BTreeSet<String>>) -> Result<Self, HierarchyError> {
        let mut expanded = BTreeMap::new();
        for name in classes.keys() {
            let mut stack = Vec::new();
            let set = expand(name, &classes, &mut stack)?;
            expanded.insert(name.clone(), set);
        }
        Ok(ClassHierarchy { classes, expanded })
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a [&'a str])>) -> Result<Self, HierarchyError> {
        let classes = pairs
            .into_iter()
            .map(|(c, members)| (c.to_string(), members.iter().map(|m| m.to_string()).collect()))
            .collect();
        Self::new(classes)
    }

    pub fn from_json(text: &str) -> Result<Self, HierarchyError> {
        let file: HierarchyFile =
            serde_json::from_str(text).map_err(|e| HierarchyError::Format(e.to_string()))?;
        if file.version != 1 {
            return Err(HierarchyError::Format(format!("unsupported version {}", file.version)));
        }
        Self::new(file.classes)
    }

    pub fn to_json(&self) -> String {
        let file = HierarchyFile {
            version: 1,
            classes: self.classes.clone(),
        };
        serde_json::to_string_pretty(&file).expect("hierarchy serializes")
    }

    /// The hierarchy shipped with the engine.
    pub fn builtin() -> Self {
        Self::from_json(include_str!("../../data/hierarchy.json")).expect("builtin hierarchy is valid")
    }

    pub fn is_class(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.classes.keys().map(String::as_str)
    }

    /// Every object type reachable from `class`, transitively. A name that is
    /// not a class expands to itself.
    pub fn expand(&self, class: &str) -> BTreeSet<String> {
        match self.expanded.get(class) {
            Some(set) => set.clone(),
            None => BTreeSet::from([class.to_string()]),
        }
    }

    /// True when `object_type` is `class` itself or a transitive member of it.
    pub fn is_member(&self, object_type: &str, class: &str) -> bool {
        object_type == class
            || self
                .expanded
                .get(class)
                .is_some_and(|set| set.contains(object_type))
    }
}

fn expand(
    name: &str,
    classes: &BTreeMap<String, BTreeSet<String>>,
    stack: &mut Vec<String>,
) -> Result<BTreeSet<String>, HierarchyError> {
    if let Some(pos) = stack.iter().position(|s| s == name) {
        let mut cycle = stack[pos..].to_vec();
        cycle.push(name.to_string());
        return Err(HierarchyError::Cycle(cycle));
    }
    let Some(members) = classes.get(name) else {
        return Ok(BTreeSet::from([name.to_string()]));
    };
    stack.push(name.to_string());
    let mut out = BTreeSet::new();
    for m in members {
        if classes.contains_key(m) {
            // a subclass contributes its name too so class-of-class queries work
            out.insert(m.clone());
        }
        out.extend(expand(m, classes, stack)?);
    }
    stack.pop();
    Ok(out)
}
