//! Object state transitions triggered by appliances, run to quiescence after
//! every successful action.

use std::collections::BTreeSet;
use std::fmt;

use crate::fuzz;
use crate::world::{diff_states, PropValue, Property, PropertyDelta, WorldState};

/// A property write proposed by a rule.
pub type Write = (String, Property, PropValue);

#[derive(Clone, Copy)]
pub struct TransitionRule {
    pub name: &'static str,
    pub effect: fn(&WorldState) -> Vec<Write>,
}

impl fmt::Debug for TransitionRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("TransitionRule").field(&self.name).finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RuleError {
    #[error("rules are not confluent: orders disagree on probe world {probe}")]
    NonConfluent { probe: usize },
    #[error("rules do not reach a fixpoint on probe world {probe}")]
    NoFixpoint { probe: usize },
}

const MAX_ROUNDS: usize = 64;

fn switched_on<'a>(w: &'a WorldState, object_type: &'a str) -> impl Iterator<Item = &'a str> + 'a {
    w.objects_of_type(object_type)
        .filter(|o| o.flag(Property::IsToggled))
        .map(|o| o.object_id.as_str())
}

fn set_inside(w: &WorldState, container: &str, p: Property, v: i64, out: &mut Vec<Write>, keep: impl Fn(&str) -> bool) {
    for id in w.descendants(container) {
        let has = w.objects[&id].properties.contains_key(&p);
        if has && keep(&id) {
            out.push((id, p, PropValue::Int(v)));
        }
    }
}

fn toaster(w: &WorldState) -> Vec<Write> {
    let mut out = Vec::new();
    for t in switched_on(w, "Toaster") {
        set_inside(w, t, Property::IsCooked, 1, &mut out, |_| true);
    }
    out
}

fn microwave(w: &WorldState) -> Vec<Write> {
    let mut out = Vec::new();
    for m in switched_on(w, "Microwave") {
        set_inside(w, m, Property::IsCooked, 1, &mut out, |_| true);
    }
    out
}

fn stove(w: &WorldState) -> Vec<Write> {
    let mut out = Vec::new();
    for burner in switched_on(w, "StoveBurner") {
        for pot in w.descendants(burner) {
            if w.objects[&pot].flag(Property::IsFilledWithLiquid) {
                set_inside(w, &pot, Property::IsBoiled, 1, &mut out, |_| true);
            }
        }
    }
    out
}

fn coffee(w: &WorldState) -> Vec<Write> {
    let mut out = Vec::new();
    for m in switched_on(w, "CoffeeMachine") {
        set_inside(w, m, Property::IsFilledWithCoffee, 1, &mut out, |id| {
            !w.objects[id].flag(Property::IsDirty)
        });
    }
    out
}

fn faucet(w: &WorldState) -> Vec<Write> {
    let mut out = Vec::new();
    for f in switched_on(w, "Faucet") {
        let Some(cell) = w.objects[f].cell else { continue };
        for sink in w.objects_of_type("Sink").filter(|s| s.cell.is_some_and(|c| c.manhattan(cell) <= 1)) {
            set_inside(w, &sink.object_id, Property::IsDirty, 0, &mut out, |_| true);
            set_inside(w, &sink.object_id, Property::IsFilledWithLiquid, 1, &mut out, |_| true);
        }
    }
    out
}

pub const SHIPPED_RULES: [TransitionRule; 5] = [
    TransitionRule { name: "toaster-cooks", effect: toaster },
    TransitionRule { name: "microwave-cooks", effect: microwave },
    TransitionRule { name: "stove-boils", effect: stove },
    TransitionRule { name: "coffee-machine-fills", effect: coffee },
    TransitionRule { name: "faucet-rinses", effect: faucet },
];

#[derive(Debug, Clone)]
pub struct RuleSet {
    rules: Vec<TransitionRule>,
}

/// Apply rules in `order` until none proposes a change.
fn quiesce(rules: &[TransitionRule], order: &[usize], w: &mut WorldState) -> Option<usize> {
    for round in 0..MAX_ROUNDS {
        let mut changed = false;
        for &i in order {
            for (id, p, v) in (rules[i].effect)(w) {
                let obj = w.object_mut(&id).expect("rule writes existing objects");
                if obj.get(p) != Some(&v) {
                    obj.set(p, v);
                    changed = true;
                }
            }
        }
        if !changed {
            return Some(round);
        }
    }
    None
}

fn probe_worlds() -> Vec<WorldState> {
    let types: Vec<String> = [
        "Toaster", "Microwave", "StoveBurner", "CoffeeMachine", "Faucet", "Sink", "CounterTop", "BreadSliced", "Potato",
        "PotatoSliced", "Pot", "Mug", "Cup", "Bowl", "Plate",
    ]
    .map(String::from)
    .to_vec();
    (0..64).map(|seed| fuzz::random_world(seed, &types, 10)).collect()
}

impl RuleSet {
    /// Register a rule set, rejecting it if two application orders reach
    /// different quiescent states on any probe world.
    pub fn new(rules: Vec<TransitionRule>) -> Result<Self, RuleError> {
        let forward: Vec<usize> = (0..rules.len()).collect();
        let reverse: Vec<usize> = forward.iter().rev().copied().collect();
        for (probe, world) in probe_worlds().into_iter().enumerate() {
            let mut a = world.clone();
            let mut b = world;
            if quiesce(&rules, &forward, &mut a).is_none() || quiesce(&rules, &reverse, &mut b).is_none() {
                return Err(RuleError::NoFixpoint { probe });
            }
            if a != b {
                return Err(RuleError::NonConfluent { probe });
            }
        }
        Ok(RuleSet { rules })
    }

    pub fn shipped() -> Self {
        RuleSet {
            rules: SHIPPED_RULES.to_vec(),
        }
    }

    pub fn rules(&self) -> &[TransitionRule] {
        &self.rules
    }

    /// Run to quiescence in registration order.
    pub fn run(&self, world: &mut WorldState) {
        let order: Vec<usize> = (0..self.rules.len()).collect();
        quiesce(&self.rules, &order, world);
    }

    /// Run to quiescence in an explicit order; `None` if no fixpoint is reached.
    pub fn run_in_order(&self, world: &mut WorldState, order: &[usize]) -> Option<()> {
        quiesce(&self.rules, order, world).map(|_| ())
    }
}

/// Run the shipped rules to quiescence and report what changed.
pub fn apply_transition_rules(world: &WorldState) -> (WorldState, BTreeSet<PropertyDelta>) {
    let mut next = world.clone();
    RuleSet::shipped().run(&mut next);
    let deltas = diff_states(world, &next);
    (next, deltas)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_rules_pass_registration() {
        RuleSet::new(SHIPPED_RULES.to_vec()).unwrap();
    }

    #[test]
    fn flip_flop_rules_are_rejected() {
        fn on(w: &WorldState) -> Vec<Write> {
            w.objects_of_type("Mug")
                .map(|o| (o.object_id.clone(), Property::IsDirty, PropValue::Int(1)))
                .collect()
        }
        fn off(w: &WorldState) -> Vec<Write> {
            w.objects_of_type("Mug")
                .map(|o| (o.object_id.clone(), Property::IsDirty, PropValue::Int(0)))
                .collect()
        }
        let rules = vec![
            TransitionRule { name: "dirty", effect: on },
            TransitionRule { name: "clean", effect: off },
        ];
        assert!(RuleSet::new(rules).is_err());
    }
}
