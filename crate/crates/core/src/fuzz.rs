//! Seeded generators of small random worlds for property tests and the
//! checker/oracle agreement runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::checker::TaskTree;
use crate::world::{catalog, format_object_id, Cell, ObjectInstance, PropValue, Property, WorldState};

/// Parameter sets used when sweeping every shipped task.
pub fn sample_params(task: &str) -> Vec<Vec<String>> {
    let v = |items: &[&str]| items.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    match task {
        "Clean All X" => vec![v(&["Plate"]), v(&["Mug"]), v(&["Drinkware"])],
        "Put All X On Y" => vec![v(&["Fork", "in", "Sink"]), v(&["TissueBox", "on", "SideTable"]), v(&["Silverware", "in", "Sink"])],
        "Put All X In One Y" => vec![v(&["Fork", "in", "Sink"]), v(&["Mug", "on", "CounterTop"]), v(&["TissueBox", "on", "Tables"])],
        "N Slices Of X In Y" => vec![v(&["2", "Tomato", "Plate"]), v(&["1", "Lettuce", "Bowl"])],
        "N Cooked X Slices In Y" => vec![v(&["1", "Potato", "Plate"]), v(&["2", "Potato", "Bowl"])],
        "Prepare Sandwich" => vec![v(&["Tomato"]), v(&["Lettuce"])],
        "Prepare Salad" => vec![v(&["1", "1"]), v(&["2", "1"])],
        "Clean X" => vec![v(&["Plate"])],
        _ => vec![Vec::new()],
    }
}

/// Object types a task's components can match, plus a few distractors.
pub fn task_types(tree: &TaskTree) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for slot in &tree.slots {
        for p in [Property::ObjectType, Property::ObjectClass] {
            if let Some(PropValue::Str(s)) = slot.comp.conditions.get(&p) {
                for t in tree.hierarchy().expand(s) {
                    if catalog::lookup(&t).is_some() {
                        out.push(t.clone());
                    }
                    if let Some(src) = catalog::slice_source(&t) {
                        out.push(src.to_string());
                    }
                }
            }
        }
    }
    out.extend(["CounterTop", "Plate", "Sink", "Book"].map(String::from));
    out.sort();
    out.dedup();
    out
}

/// A random world of `1..=max_objects` objects drawn from `types`, with
/// random state flags and an acyclic random containment.
pub fn random_world(seed: u64, types: &[String], max_objects: usize) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=max_objects.max(1));
    let mut world = WorldState::default();
    let mut receptacles: Vec<String> = Vec::new();
    for i in 0..n {
        let t = types.choose(&mut rng).expect("non-empty type list");
        let info = catalog::lookup(t).expect("catalog type");
        let id = format_object_id(t, i as f64, 0.0, (i % 3) as f64);
        let mut obj = ObjectInstance::new(id.clone(), info);
        for p in [
            Property::IsDirty,
            Property::IsCooked,
            Property::IsBoiled,
            Property::IsFilledWithLiquid,
            Property::IsFilledWithCoffee,
            Property::IsOpen,
            Property::IsToggled,
        ] {
            if obj.properties.contains_key(&p) {
                obj.set(p, PropValue::Int(rng.gen_range(0..=1)));
            }
        }
        if !receptacles.is_empty() && !info.fixture && rng.gen_bool(0.75) {
            let parent = receptacles.choose(&mut rng).expect("non-empty").clone();
            obj.set(Property::ParentReceptacles, PropValue::Str(parent));
        } else {
            obj.cell = Some(Cell::new(i as i32, 0));
        }
        if info.receptacle {
            receptacles.push(id);
        }
        world.insert(obj);
    }
    world
}
