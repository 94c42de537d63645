use std::collections::BTreeMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{Evaluation, Slot, TaskTree};
use crate::world::{catalog, matches_property, PropValue, Property, WorldState};

/// The Progress Check response. Field names follow the published format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgressReport {
    pub task_desc: String,
    pub success: u8,
    pub subgoals: Vec<Subgoal>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Subgoal {
    pub representative_obj_id: Option<String>,
    pub step_successes: Vec<u8>,
    pub success: u8,
    pub description: String,
    pub steps: Vec<Step>,
    pub problem_keys: IndexMap<String, Vec<ProblemKey>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub success: u8,
    #[serde(rename = "objectId")]
    pub object_id: Option<String>,
    #[serde(rename = "objectType")]
    pub object_type: String,
    pub desc: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ProblemKey {
    #[serde(rename = "objectType")]
    pub object_type: String,
    pub determiner: String,
    pub property_name: String,
    pub desired_property_value: PropValue,
}

impl ProgressReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// All problem keys in report order, paired with their object id.
    pub fn problem_keys(&self) -> impl Iterator<Item = (&str, &ProblemKey)> {
        self.subgoals
            .iter()
            .flat_map(|s| s.problem_keys.iter())
            .flat_map(|(id, keys)| keys.iter().map(move |k| (id.as_str(), k)))
    }
}

impl TaskTree {
    pub fn report(&self, world: &WorldState) -> ProgressReport {
        let ev = self.evaluate(world);
        let mut subgoals = Vec::new();
        let mut slot_subgoal = BTreeMap::new();
        self.collect_subgoals(0, world, &ev, &mut subgoals, &mut slot_subgoal);

        for (ni, node) in self.nodes.iter().enumerate() {
            for (ri, rel) in node.relations.iter().enumerate() {
                let rev = &ev.relations[ni][ri];
                if rev.satisfied {
                    continue;
                }
                let Some(&sg) = rel.heads.first().and_then(|(s, _)| slot_subgoal.get(s)) else {
                    continue;
                };
                let subgoal: &mut Subgoal = &mut subgoals[sg];
                subgoal.success = 0;
                let Some(Some(tail)) = rev.chosen_tails.first() else { continue };
                for (hi, id) in &rev.deficits {
                    let key = ProblemKey {
                        object_type: world.object_type(id).unwrap_or("").to_string(),
                        determiner: rel.heads[*hi].1.token(),
                        property_name: rel.rel.property.name().to_string(),
                        desired_property_value: PropValue::Str(tail.clone()),
                    };
                    subgoal.problem_keys.entry(id.clone()).or_default().push(key);
                }
                if let Some((_, first)) = rev.deficits.first() {
                    subgoal.steps.push(Step {
                        success: 0,
                        object_id: Some(first.clone()),
                        object_type: world.object_type(first).unwrap_or("").to_string(),
                        desc: rel.rel.failure_desc.clone(),
                    });
                }
            }
        }

        ProgressReport {
            task_desc: self.root().desc.clone(),
            success: ev.success as u8,
            subgoals,
        }
    }

    fn collect_subgoals(
        &self,
        node: usize,
        world: &WorldState,
        ev: &Evaluation,
        out: &mut Vec<Subgoal>,
        slot_subgoal: &mut BTreeMap<usize, usize>,
    ) {
        let entries: Vec<_> = self.node_entries(node).collect();
        let shareable: Vec<usize> = entries
            .iter()
            .filter_map(|(_, s, _)| *s)
            .filter(|s| self.slots[*s].comp.instance_shareable)
            .collect();
        let has_own = entries
            .iter()
            .filter_map(|(_, s, _)| *s)
            .any(|s| !self.slots[s].comp.instance_shareable);
        let preconditions: Vec<u8> = shareable.iter().map(|s| ev.slots[*s].satisfied as u8).collect();
        let preconditions_ok = preconditions.iter().all(|f| *f == 1);

        for (_, slot, child) in entries {
            if let Some(s) = slot {
                let own = !self.slots[s].comp.instance_shareable;
                if own || (!has_own && shareable.first() == Some(&s)) {
                    let sg = self.subgoal(s, world, ev, &preconditions, preconditions_ok);
                    slot_subgoal.insert(s, out.len());
                    out.push(sg);
                }
            }
            if let Some(c) = child {
                self.collect_subgoals(c, world, ev, out, slot_subgoal);
            }
        }
    }

    fn subgoal(&self, s: usize, world: &WorldState, ev: &Evaluation, preconditions: &[u8], preconditions_ok: bool) -> Subgoal {
        let slot = &self.slots[s];
        let se = &ev.slots[s];
        let h = self.hierarchy();
        let score = |id: &str| -> usize {
            let obj = &world.objects[id];
            slot.comp
                .conditions
                .iter()
                .filter(|(p, v)| matches_property(world, obj, **p, v, h))
                .count()
        };
        let rank = |ids: &[String]| -> Vec<String> {
            let mut v: Vec<(usize, String)> = ids.iter().map(|id| (score(id), id.clone())).collect();
            v.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
            v.into_iter().map(|(_, id)| id).collect()
        };

        let sources = slice_sources(world, slot);
        let ranked = rank(&se.candidates);
        let unsatisfied: Vec<String> = ranked.iter().filter(|id| !se.satisfying.contains(id)).cloned().collect();
        let mut focus: Vec<String> = match slot.det.count() {
            Some(n) => unsatisfied
                .iter()
                .take((n as usize).saturating_sub(se.satisfying.len()))
                .cloned()
                .collect(),
            None => unsatisfied.clone(),
        };
        let short = match slot.det.count() {
            Some(n) => focus.len() + se.satisfying.len() < n as usize,
            None => se.candidates.is_empty(),
        };
        if short {
            if let Some(src) = rank(&sources).into_iter().next() {
                focus.push(src);
            }
        }

        let representative = if se.satisfied {
            ranked.first().cloned()
        } else {
            unsatisfied
                .first()
                .cloned()
                .or_else(|| focus.first().cloned())
                .or_else(|| ranked.first().cloned())
        };

        let mut step_successes = preconditions.to_vec();
        let mut steps = Vec::new();
        let rep_obj = representative.as_deref().and_then(|id| world.object(id));
        for (p, desc) in &slot.comp.condition_failure_descs {
            let ok = rep_obj.is_some_and(|o| matches_property(world, o, *p, &slot.comp.conditions[p], h));
            step_successes.push(ok as u8);
            steps.push(Step {
                success: ok as u8,
                object_id: representative.clone(),
                object_type: rep_obj.map(|o| o.object_type().to_string()).unwrap_or_default(),
                desc: desc.clone(),
            });
        }

        let mut problem_keys = IndexMap::new();
        if !se.satisfied {
            for id in &focus {
                let obj = &world.objects[id];
                let keys: Vec<ProblemKey> = slot
                    .comp
                    .condition_failure_descs
                    .keys()
                    .filter(|p| !matches_property(world, obj, **p, &slot.comp.conditions[*p], h))
                    .map(|p| ProblemKey {
                        object_type: obj.object_type().to_string(),
                        determiner: slot.det.token(),
                        property_name: p.name().to_string(),
                        desired_property_value: slot.comp.conditions[p].clone(),
                    })
                    .collect();
                if !keys.is_empty() {
                    problem_keys.insert(id.clone(), keys);
                }
            }
        }

        Subgoal {
            representative_obj_id: representative,
            step_successes,
            success: (se.satisfied && preconditions_ok) as u8,
            description: self.nodes[slot.node].def.desc.clone(),
            steps,
            problem_keys,
        }
    }
}

/// Unsliced objects that slicing would turn into candidates for `slot`.
fn slice_sources(world: &WorldState, slot: &Slot) -> Vec<String> {
    let Some(PropValue::Str(t)) = slot.comp.conditions.get(&Property::ObjectType) else {
        return Vec::new();
    };
    let Some(src) = catalog::slice_source(t) else {
        return Vec::new();
    };
    world.objects_of_type(src).map(|o| o.object_id.clone()).collect()
}
