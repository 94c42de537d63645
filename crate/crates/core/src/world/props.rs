use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The closed set of object properties the engine knows about.
///
/// Names serialize exactly as they appear in task definitions and Progress
/// Check responses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Property {
    #[serde(rename = "objectType")]
    ObjectType,
    /// Derived: never stored on an object, answered through the class hierarchy.
    #[serde(rename = "objectClass")]
    ObjectClass,
    #[serde(rename = "isDirty")]
    IsDirty,
    #[serde(rename = "isCooked")]
    IsCooked,
    #[serde(rename = "isBoiled")]
    IsBoiled,
    #[serde(rename = "isFilledWithLiquid")]
    IsFilledWithLiquid,
    #[serde(rename = "isFilledWithCoffee")]
    IsFilledWithCoffee,
    /// Id of the object a slice was cut from.
    #[serde(rename = "slicedFrom")]
    SlicedFrom,
    #[serde(rename = "parentReceptacles")]
    ParentReceptacles,
    #[serde(rename = "receptacle")]
    Receptacle,
    #[serde(rename = "openable")]
    Openable,
    #[serde(rename = "isOpen")]
    IsOpen,
    #[serde(rename = "toggleable")]
    Toggleable,
    #[serde(rename = "isToggled")]
    IsToggled,
    #[serde(rename = "pickupable")]
    Pickupable,
    #[serde(rename = "sliceable")]
    Sliceable,
    #[serde(rename = "fillable")]
    Fillable,
    #[serde(rename = "visibleHeight")]
    VisibleHeight,
}

impl Property {
    pub const ALL: [Property; 18] = [
        Property::ObjectType,
        Property::ObjectClass,
        Property::IsDirty,
        Property::IsCooked,
        Property::IsBoiled,
        Property::IsFilledWithLiquid,
        Property::IsFilledWithCoffee,
        Property::SlicedFrom,
        Property::ParentReceptacles,
        Property::Receptacle,
        Property::Openable,
        Property::IsOpen,
        Property::Toggleable,
        Property::IsToggled,
        Property::Pickupable,
        Property::Sliceable,
        Property::Fillable,
        Property::VisibleHeight,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Property::ObjectType => "objectType",
            Property::ObjectClass => "objectClass",
            Property::IsDirty => "isDirty",
            Property::IsCooked => "isCooked",
            Property::IsBoiled => "isBoiled",
            Property::IsFilledWithLiquid => "isFilledWithLiquid",
            Property::IsFilledWithCoffee => "isFilledWithCoffee",
            Property::SlicedFrom => "slicedFrom",
            Property::ParentReceptacles => "parentReceptacles",
            Property::Receptacle => "receptacle",
            Property::Openable => "openable",
            Property::IsOpen => "isOpen",
            Property::Toggleable => "toggleable",
            Property::IsToggled => "isToggled",
            Property::Pickupable => "pickupable",
            Property::Sliceable => "sliceable",
            Property::Fillable => "fillable",
            Property::VisibleHeight => "visibleHeight",
        }
    }

    /// Properties holding 0/1 flags.
    pub fn is_boolean(self) -> bool {
        !matches!(
            self,
            Property::ObjectType
                | Property::ObjectClass
                | Property::SlicedFrom
                | Property::ParentReceptacles
                | Property::VisibleHeight
        )
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown property `{0}`")]
pub struct UnknownProperty(pub String);

impl FromStr for Property {
    type Err = UnknownProperty;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Property::ALL
            .iter()
            .copied()
            .find(|p| p.name() == s)
            .ok_or_else(|| UnknownProperty(s.to_string()))
    }
}

/// A property value: integers for flags and heights, strings for types and ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PropValue {
    Int(i64),
    Str(String),
}

impl PropValue {
    pub fn flag(b: bool) -> Self {
        PropValue::Int(b as i64)
    }

    pub fn str(s: impl Into<String>) -> Self {
        PropValue::Str(s.into())
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            PropValue::Int(v) => Some(*v),
            PropValue::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropValue::Str(s) => Some(s),
            PropValue::Int(_) => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            PropValue::Int(v) => serde_json::Value::from(*v),
            PropValue::Str(s) => serde_json::Value::from(s.as_str()),
        }
    }
}

impl fmt::Display for PropValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PropValue::Int(v) => write!(f, "{v}"),
            PropValue::Str(s) => f.write_str(s),
        }
    }
}

impl From<i64> for PropValue {
    fn from(v: i64) -> Self {
        PropValue::Int(v)
    }
}

impl From<&str> for PropValue {
    fn from(v: &str) -> Self {
        PropValue::Str(v.to_string())
    }
}
