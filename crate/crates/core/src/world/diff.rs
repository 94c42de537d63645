use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{ObjectInstance, PropValue, Property, WorldState};

/// One changed (object, property) pair. `None` marks absence, so creation and
/// removal of objects (slicing) are expressible.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PropertyDelta {
    pub object_id: String,
    pub property: Property,
    pub value_before: Option<PropValue>,
    pub value_after: Option<PropValue>,
}

impl PropertyDelta {
    pub fn reversed(&self) -> PropertyDelta {
        PropertyDelta {
            object_id: self.object_id.clone(),
            property: self.property,
            value_before: self.value_after.clone(),
            value_after: self.value_before.clone(),
        }
    }
}

/// All property-level differences between two snapshots, ordered by
/// (object id, property).
pub fn diff_states(before: &WorldState, after: &WorldState) -> BTreeSet<PropertyDelta> {
    let mut out = BTreeSet::new();
    let ids: BTreeSet<&String> = before.objects.keys().chain(after.objects.keys()).collect();
    for id in ids {
        let a = before.objects.get(id);
        let b = after.objects.get(id);
        let props: BTreeSet<Property> = a
            .iter()
            .chain(b.iter())
            .flat_map(|o| o.properties.keys().copied())
            .collect();
        for p in props {
            let va = a.and_then(|o| o.properties.get(&p)).cloned();
            let vb = b.and_then(|o| o.properties.get(&p)).cloned();
            if va != vb {
                out.insert(PropertyDelta {
                    object_id: id.clone(),
                    property: p,
                    value_before: va,
                    value_after: vb,
                });
            }
        }
    }
    out
}

/// Apply deltas to a snapshot's property view. Objects whose properties all
/// become absent are removed; unknown objects are created without a cell.
pub fn apply_deltas<'a>(world: &WorldState, deltas: impl IntoIterator<Item = &'a PropertyDelta>) -> WorldState {
    let mut out = world.clone();
    let mut touched = BTreeSet::new();
    for d in deltas {
        let obj = out
            .objects
            .entry(d.object_id.clone())
            .or_insert_with(|| ObjectInstance {
                object_id: d.object_id.clone(),
                cell: None,
                properties: Default::default(),
            });
        match &d.value_after {
            Some(v) => {
                obj.properties.insert(d.property, v.clone());
            }
            None => {
                obj.properties.remove(&d.property);
            }
        }
        touched.insert(d.object_id.clone());
    }
    for id in touched {
        if out.objects.get(&id).is_some_and(|o| o.properties.is_empty()) {
            out.objects.remove(&id);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{catalog, format_object_id};

    fn mug_world() -> WorldState {
        let mut w = WorldState::default();
        let mut mug = ObjectInstance::new(format_object_id("Mug", 1.0, 1.0, 1.0), catalog::lookup("Mug").unwrap());
        mug.set(Property::IsDirty, PropValue::Int(1));
        w.held_object = Some(mug.object_id.clone());
        w.insert(mug);
        w
    }

    #[test]
    fn identical_states_have_no_delta() {
        let w = mug_world();
        assert!(diff_states(&w, &w).is_empty());
    }

    #[test]
    fn two_property_writes_give_two_deltas() {
        let a = mug_world();
        let mut b = a.clone();
        let id = b.held_object.clone().unwrap();
        let mug = b.object_mut(&id).unwrap();
        mug.set(Property::IsDirty, PropValue::Int(0));
        mug.set(Property::IsFilledWithCoffee, PropValue::Int(1));
        let d = diff_states(&a, &b);
        assert_eq!(d.len(), 2);
        let mirrored: BTreeSet<_> = diff_states(&b, &a).into_iter().map(|d| d.reversed()).collect();
        assert_eq!(mirrored, d);
        assert_eq!(apply_deltas(&a, &d).objects, b.objects);
    }

    #[test]
    fn creation_and_removal_use_absent_marker() {
        let a = mug_world();
        let mut b = a.clone();
        b.objects.clear();
        b.held_object = None;
        let d = diff_states(&a, &b);
        assert!(d.iter().all(|x| x.value_after.is_none()));
        assert!(apply_deltas(&a, &d).objects.is_empty());
        let back = diff_states(&b, &a);
        assert!(back.iter().all(|x| x.value_before.is_none()));
    }
}
