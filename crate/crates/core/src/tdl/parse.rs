use indexmap::IndexMap;
use serde_json::{Map, Value};

use super::{
    AtomicComponent, Component, Determiner, Relation, TailDeterminer, TaskDefinition, TaskRefComponent, TdlError,
};
use crate::world::{PropValue, Property};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Ignore unknown fields instead of rejecting them.
    pub lenient: bool,
}

pub fn parse_task_definition(text: &str) -> Result<TaskDefinition, TdlError> {
    parse_task_definition_with(text, ParseOptions::default())
}

pub fn parse_task_definition_with(text: &str, opts: ParseOptions) -> Result<TaskDefinition, TdlError> {
    let value: Value = serde_json::from_str(text).map_err(|e| TdlError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    from_value(&value, opts)
}

const TASK_FIELDS: &[&str] = &[
    "task_id",
    "task_name",
    "task_nparams",
    "task_anchor_object",
    "desc",
    "components",
    "relations",
];
const ATOMIC_FIELDS: &[&str] = &[
    "determiner",
    "primary_condition",
    "instance_shareable",
    "conditions",
    "condition_failure_descs",
];
const TASKREF_FIELDS: &[&str] = &["determiner", "task_name", "task_params"];
const RELATION_FIELDS: &[&str] = &[
    "property",
    "tail_entity_list",
    "tail_determiner_list",
    "head_entity_list",
    "head_determiner_list",
    "failure_desc",
];

pub(crate) fn from_value(value: &Value, opts: ParseOptions) -> Result<TaskDefinition, TdlError> {
    let top = as_object(value, "task")?;
    check_fields(top, "task", TASK_FIELDS, opts)?;

    let task_id = required(top, "task", "task_id")?
        .as_i64()
        .ok_or_else(|| wrong("task_id", "an integer"))?;
    let task_name = string(required(top, "task", "task_name")?, "task_name")?;
    let task_nparams = required(top, "task", "task_nparams")?
        .as_u64()
        .ok_or_else(|| wrong("task_nparams", "a non-negative integer"))? as usize;
    let task_anchor_object = match required(top, "task", "task_anchor_object")? {
        Value::Null => None,
        v => Some(string(v, "task_anchor_object")?),
    };
    let desc = string(required(top, "task", "desc")?, "desc")?;

    let comps = as_object(required(top, "task", "components")?, "components")?;
    let mut components = IndexMap::new();
    for (key, v) in comps {
        components.insert(key.clone(), component(key, v, opts)?);
    }

    let rels = required(top, "task", "relations")?
        .as_array()
        .ok_or_else(|| wrong("relations", "a list"))?;
    let mut relations = Vec::new();
    for (i, r) in rels.iter().enumerate() {
        relations.push(relation(i, r, opts)?);
    }

    let def = TaskDefinition {
        task_id,
        task_name,
        task_nparams,
        task_anchor_object,
        desc,
        components,
        relations,
    };
    validate(&def)?;
    check_slots(value, task_nparams)?;
    Ok(def)
}

fn validate(def: &TaskDefinition) -> Result<(), TdlError> {
    if let Some(anchor) = &def.task_anchor_object {
        if !def.components.contains_key(anchor) {
            return Err(TdlError::AnchorNotComponent(anchor.clone()));
        }
    }
    for (i, r) in def.relations.iter().enumerate() {
        if r.head_determiner_list.len() != r.head_entity_list.len() {
            return Err(TdlError::ListLength {
                index: i,
                list: "head_determiner_list",
                expected: r.head_entity_list.len(),
                got: r.head_determiner_list.len(),
            });
        }
        if r.tail_determiner_list.len() != r.tail_entity_list.len() {
            return Err(TdlError::ListLength {
                index: i,
                list: "tail_determiner_list",
                expected: r.tail_entity_list.len(),
                got: r.tail_determiner_list.len(),
            });
        }
        for key in r.head_entity_list.iter().chain(&r.tail_entity_list) {
            if !def.components.contains_key(key) {
                return Err(TdlError::UnknownEntity { index: i, key: key.clone() });
            }
        }
    }
    Ok(())
}

/// Every `#k` in any string or key must satisfy k < nparams.
fn check_slots(value: &Value, nparams: usize) -> Result<(), TdlError> {
    let mut err = None;
    visit_strings(value, &mut |s| {
        for k in slots_in(s) {
            if k >= nparams && err.is_none() {
                err = Some(TdlError::SlotOutOfRange { slot: k, nparams });
            }
        }
    });
    err.map_or(Ok(()), Err)
}

pub(crate) fn visit_strings(value: &Value, f: &mut impl FnMut(&str)) {
    match value {
        Value::String(s) => f(s),
        Value::Array(items) => items.iter().for_each(|v| visit_strings(v, f)),
        Value::Object(map) => {
            for (k, v) in map {
                f(k);
                visit_strings(v, f);
            }
        }
        _ => {}
    }
}

/// Slot indices appearing in `s` as `#` followed by a run of digits.
pub(crate) fn slots_in(s: &str) -> Vec<usize> {
    let bytes = s.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'#' {
            let start = i + 1;
            let mut end = start;
            while end < bytes.len() && bytes[end].is_ascii_digit() {
                end += 1;
            }
            if end > start {
                if let Ok(k) = s[start..end].parse() {
                    out.push(k);
                }
                i = end;
                continue;
            }
        }
        i += 1;
    }
    out
}

fn component(key: &str, v: &Value, opts: ParseOptions) -> Result<Component, TdlError> {
    let path = format!("components.{key}");
    let obj = as_object(v, &path)?;
    let has_task = obj.contains_key("task_name");
    let has_conds = obj.contains_key("conditions");
    if has_task == has_conds {
        return Err(TdlError::ComponentKind { component: key.to_string() });
    }
    let determiner = determiner(required(obj, &path, "determiner")?, &format!("{path}.determiner"))?;
    if has_task {
        check_fields(obj, &path, TASKREF_FIELDS, opts)?;
        let task_name = string(&obj["task_name"], &format!("{path}.task_name"))?;
        let params_path = format!("{path}.task_params");
        let task_params = match obj.get("task_params") {
            None => Vec::new(),
            Some(v) => v
                .as_array()
                .ok_or_else(|| wrong(&params_path, "a list of strings"))?
                .iter()
                .map(|p| string(p, &params_path))
                .collect::<Result<_, _>>()?,
        };
        return Ok(Component::TaskRef(TaskRefComponent {
            determiner,
            task_name,
            task_params,
        }));
    }

    check_fields(obj, &path, ATOMIC_FIELDS, opts)?;
    let primary_path = format!("{path}.primary_condition");
    let primary_condition = property(&string(required(obj, &path, "primary_condition")?, &primary_path)?, &primary_path)?;
    let instance_shareable = match obj.get("instance_shareable") {
        None => false,
        Some(v) => v
            .as_bool()
            .ok_or_else(|| wrong(&format!("{path}.instance_shareable"), "true or false"))?,
    };
    let cond_path = format!("{path}.conditions");
    let mut conditions = IndexMap::new();
    for (name, v) in as_object(&obj["conditions"], &cond_path)? {
        let p = property(name, &cond_path)?;
        let value = match v {
            Value::String(s) => PropValue::Str(s.clone()),
            Value::Number(n) => PropValue::Int(
                n.as_i64()
                    .ok_or_else(|| wrong(&format!("{cond_path}.{name}"), "an integer or string"))?,
            ),
            _ => return Err(wrong(&format!("{cond_path}.{name}"), "an integer or string")),
        };
        conditions.insert(p, value);
    }
    if !conditions.contains_key(&primary_condition) {
        return Err(TdlError::PrimaryNotInConditions {
            component: key.to_string(),
            property: primary_condition.name().to_string(),
        });
    }
    let fd_path = format!("{path}.condition_failure_descs");
    let mut condition_failure_descs = IndexMap::new();
    if let Some(v) = obj.get("condition_failure_descs") {
        for (name, d) in as_object(v, &fd_path)? {
            let p = property(name, &fd_path)?;
            if !conditions.contains_key(&p) {
                return Err(TdlError::FailureDescNotInConditions {
                    component: key.to_string(),
                    property: name.clone(),
                });
            }
            condition_failure_descs.insert(p, string(d, &format!("{fd_path}.{name}"))?);
        }
    }
    Ok(Component::Atomic(AtomicComponent {
        determiner,
        primary_condition,
        instance_shareable,
        conditions,
        condition_failure_descs,
    }))
}

fn relation(index: usize, v: &Value, opts: ParseOptions) -> Result<Relation, TdlError> {
    let path = format!("relations[{index}]");
    let obj = as_object(v, &path)?;
    check_fields(obj, &path, RELATION_FIELDS, opts)?;
    let prop_name = string(required(obj, &path, "property")?, &format!("{path}.property"))?;
    if prop_name != Property::ParentReceptacles.name() {
        return Err(TdlError::UnsupportedRelation { index, property: prop_name });
    }
    let list = |field: &str| -> Result<Vec<&Value>, TdlError> {
        Ok(required(obj, &path, field)?
            .as_array()
            .ok_or_else(|| wrong(&format!("{path}.{field}"), "a list"))?
            .iter()
            .collect())
    };
    let strings = |field: &str| -> Result<Vec<String>, TdlError> {
        list(field)?
            .into_iter()
            .map(|v| string(v, &format!("{path}.{field}")))
            .collect()
    };
    let head_determiner_list = list("head_determiner_list")?
        .into_iter()
        .map(|v| determiner(v, &format!("{path}.head_determiner_list")))
        .collect::<Result<_, _>>()?;
    let tail_determiner_list = list("tail_determiner_list")?
        .into_iter()
        .map(|v| match v.as_str() {
            Some("a") => Ok(TailDeterminer::A),
            Some("the") => Ok(TailDeterminer::The),
            _ => Err(TdlError::UnknownDeterminer {
                path: format!("{path}.tail_determiner_list"),
                token: v.to_string(),
            }),
        })
        .collect::<Result<_, _>>()?;
    Ok(Relation {
        property: Property::ParentReceptacles,
        tail_entity_list: strings("tail_entity_list")?,
        tail_determiner_list,
        head_entity_list: strings("head_entity_list")?,
        head_determiner_list,
        failure_desc: string(required(obj, &path, "failure_desc")?, &format!("{path}.failure_desc"))?,
    })
}

fn determiner(v: &Value, path: &str) -> Result<Determiner, TdlError> {
    let bad = || TdlError::UnknownDeterminer {
        path: path.to_string(),
        token: match v {
            Value::String(s) => s.clone(),
            other => other.to_string(),
        },
    };
    match v {
        Value::Number(n) => match n.as_u64() {
            Some(n) if n >= 1 && n <= u32::MAX as u64 => Ok(Determiner::Count(n as u32)),
            _ => Err(bad()),
        },
        Value::String(s) => match s.as_str() {
            "a" => Ok(Determiner::A),
            "all" => Ok(Determiner::All),
            s if s.starts_with('#') && s.len() > 1 && s[1..].bytes().all(|b| b.is_ascii_digit()) => {
                s[1..].parse().map(Determiner::Slot).map_err(|_| bad())
            }
            s if !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit()) => match s.parse::<u32>() {
                Ok(n) if n >= 1 => Ok(Determiner::Count(n)),
                _ => Err(bad()),
            },
            _ => Err(bad()),
        },
        _ => Err(bad()),
    }
}

fn property(name: &str, path: &str) -> Result<Property, TdlError> {
    name.parse().map_err(|_| TdlError::UnknownProperty {
        path: path.to_string(),
        name: name.to_string(),
    })
}

fn as_object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, TdlError> {
    v.as_object().ok_or_else(|| wrong(path, "an object"))
}

fn required<'a>(obj: &'a Map<String, Value>, path: &str, field: &str) -> Result<&'a Value, TdlError> {
    obj.get(field).ok_or_else(|| TdlError::MissingField {
        path: path.to_string(),
        field: field.to_string(),
    })
}

fn string(v: &Value, path: &str) -> Result<String, TdlError> {
    v.as_str().map(str::to_string).ok_or_else(|| wrong(path, "a string"))
}

fn wrong(path: &str, expected: &'static str) -> TdlError {
    TdlError::WrongType {
        path: path.to_string(),
        expected,
    }
}

fn check_fields(obj: &Map<String, Value>, path: &str, allowed: &[&str], opts: ParseOptions) -> Result<(), TdlError> {
    if opts.lenient {
        return Ok(());
    }
    match obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        Some(k) => Err(TdlError::UnknownField {
            path: path.to_string(),
            field: k.clone(),
        }),
        None => Ok(()),
    }
}

impl TaskDefinition {
    /// The record form, with fields in the order the listings use.
    pub fn to_value(&self) -> Value {
        let mut top = Map::new();
        top.insert("task_id".into(), self.task_id.into());
        top.insert("task_name".into(), self.task_name.clone().into());
        top.insert("task_nparams".into(), self.task_nparams.into());
        top.insert(
            "task_anchor_object".into(),
            self.task_anchor_object.clone().map_or(Value::Null, Value::from),
        );
        top.insert("desc".into(), self.desc.clone().into());
        let mut comps = Map::new();
        for (key, c) in &self.components {
            comps.insert(key.clone(), component_value(c));
        }
        top.insert("components".into(), Value::Object(comps));
        top.insert(
            "relations".into(),
            Value::Array(self.relations.iter().map(relation_value).collect()),
        );
        Value::Object(top)
    }

    pub fn to_source(&self) -> String {
        serde_json::to_string_pretty(&self.to_value()).expect("task serializes")
    }
}

fn determiner_value(d: &Determiner) -> Value {
    match d {
        Determiner::Count(n) => Value::from(*n),
        other => Value::from(other.token()),
    }
}

fn component_value(c: &Component) -> Value {
    let mut m = Map::new();
    match c {
        Component::Atomic(a) => {
            m.insert("determiner".into(), determiner_value(&a.determiner));
            m.insert("primary_condition".into(), a.primary_condition.name().into());
            m.insert("instance_shareable".into(), a.instance_shareable.into());
            let conds = a
                .conditions
                .iter()
                .map(|(p, v)| (p.name().to_string(), v.to_json()))
                .collect();
            m.insert("conditions".into(), Value::Object(conds));
            let descs = a
                .condition_failure_descs
                .iter()
                .map(|(p, d)| (p.name().to_string(), Value::from(d.clone())))
                .collect();
            m.insert("condition_failure_descs".into(), Value::Object(descs));
        }
        Component::TaskRef(t) => {
            m.insert("determiner".into(), determiner_value(&t.determiner));
            m.insert("task_name".into(), t.task_name.clone().into());
            m.insert("task_params".into(), t.task_params.clone().into());
        }
    }
    Value::Object(m)
}

fn relation_value(r: &Relation) -> Value {
    let mut m = Map::new();
    m.insert("property".into(), r.property.name().into());
    m.insert("tail_entity_list".into(), r.tail_entity_list.clone().into());
    m.insert(
        "tail_determiner_list".into(),
        r.tail_determiner_list.iter().map(|d| Value::from(d.token())).collect(),
    );
    m.insert("head_entity_list".into(), r.head_entity_list.clone().into());
    m.insert(
        "head_determiner_list".into(),
        r.head_determiner_list.iter().map(determiner_value).collect(),
    );
    m.insert("failure_desc".into(), r.failure_desc.clone().into());
    Value::Object(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "task_id": 1, "task_name": "Find Mug", "task_nparams": 0,
        "task_anchor_object": "mug", "desc": "Find a mug.",
        "components": {"mug": {"determiner": "a", "primary_condition": "objectType",
            "instance_shareable": false, "conditions": {"objectType": "Mug"},
            "condition_failure_descs": {}}},
        "relations": []
    }"#;

    #[test]
    fn minimal_definition() {
        let def = parse_task_definition(MINIMAL).unwrap();
        assert_eq!(def.task_anchor_object.as_deref(), Some("mug"));
        assert_eq!(parse_task_definition(&def.to_source()).unwrap(), def);
    }

    #[test]
    fn syntax_errors_carry_position() {
        let err = parse_task_definition("{\n  \"task_id\": ,\n}").unwrap_err();
        assert!(matches!(err, TdlError::Syntax { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn unknown_fields_strict_and_lenient() {
        let text = MINIMAL.replace("\"relations\": []", "\"relations\": [], \"author\": \"x\"");
        assert!(matches!(
            parse_task_definition(&text),
            Err(TdlError::UnknownField { .. })
        ));
        assert!(parse_task_definition_with(&text, ParseOptions { lenient: true }).is_ok());
    }

    #[test]
    fn determiner_tokens() {
        let path = "d";
        assert_eq!(determiner(&Value::from("a"), path).unwrap(), Determiner::A);
        assert_eq!(determiner(&Value::from("all"), path).unwrap(), Determiner::All);
        assert_eq!(determiner(&Value::from(3), path).unwrap(), Determiner::Count(3));
        assert_eq!(determiner(&Value::from("2"), path).unwrap(), Determiner::Count(2));
        assert_eq!(determiner(&Value::from("#0"), path).unwrap(), Determiner::Slot(0));
        for bad in [Value::from("the"), Value::from(0), Value::from("some"), Value::from(-1)] {
            assert!(determiner(&bad, path).is_err(), "{bad}");
        }
    }

    #[test]
    fn primary_condition_must_be_a_condition() {
        let text = MINIMAL.replace("\"primary_condition\": \"objectType\"", "\"primary_condition\": \"isDirty\"");
        assert!(matches!(
            parse_task_definition(&text),
            Err(TdlError::PrimaryNotInConditions { .. })
        ));
    }

    #[test]
    fn slots_are_bounded_by_nparams() {
        let text = MINIMAL.replace("Find a mug.", "Find a #1.");
        assert_eq!(
            parse_task_definition(&text).unwrap_err(),
            TdlError::SlotOutOfRange { slot: 1, nparams: 0 }
        );
        assert_eq!(slots_in("put #1to a #2, #12#3"), vec![1, 2, 12, 3]);
        assert_eq!(slots_in("#x # #"), Vec::<usize>::new());
    }

    #[test]
    fn component_kind_is_exclusive() {
        let text = MINIMAL.replace("\"conditions\"", "\"task_name\": \"Toast\", \"conditions\"");
        assert!(matches!(
            parse_task_definition(&text),
            Err(TdlError::ComponentKind { .. })
        ));
    }
}
