//! Rule-based Commander: reads the Progress Check report, picks the first
//! unsolved problem key and turns it into templated instructions through a
//! small step automaton per property.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::planner::{plan_path, PlanError};
use super::tokens::InstructionToken;
use crate::checker::ProgressReport;
use crate::sim::{project, reachable, resolve_selector, ObjectSelector, Role, SimConfig, Simulator, Verb};
use crate::world::{catalog, PropValue, Property, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommanderConfig {
    /// Drop the boiling and toasting policies, matching the published
    /// rule-based agent.
    pub legacy_compat: bool,
    pub max_turns_per_key: u32,
    pub max_stuck: u32,
    pub sim: SimConfig,
}

impl Default for CommanderConfig {
    fn default() -> Self {
        CommanderConfig {
            legacy_compat: false,
            max_turns_per_key: 40,
            max_stuck: 2,
            sim: SimConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActiveKey {
    pub object_id: String,
    pub property_name: String,
    pub desired: PropValue,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PolicyState {
    pub active: Option<ActiveKey>,
    /// Label of the step the automaton expects to run next.
    pub current_step: String,
    /// Label of the step behind the last instruction.
    pub last_step: String,
    pub skipped: BTreeSet<ActiveKey>,
    pub turns_on_key: u32,
    pub stuck: u32,
    pub last_hash: Option<String>,
    /// Container opened to fetch an object, closed once it is picked up.
    pub opened: Option<String>,
    /// Objects this Commander has had placed, kept in place when making room.
    pub placed: BTreeSet<String>,
}

pub const STEP_COMPLETED: &str = "step_completed";

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Op {
    Navigate(String),
    Interact(Vec<(Verb, String)>),
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct PolicyStep {
    pub label: &'static str,
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Next {
    Step(PolicyStep),
    Done,
    Stuck,
}

fn step(label: &'static str, op: Op) -> Next {
    Next::Step(PolicyStep { label, op })
}

/// Read-only view the policies reason over.
pub(crate) struct Ctx<'a> {
    pub world: &'a WorldState,
    pub sim: &'a SimConfig,
    pub opened: Option<&'a str>,
    pub placed: &'a BTreeSet<String>,
}

fn flag(w: &WorldState, id: &str, p: Property) -> bool {
    w.object(id).is_some_and(|o| o.flag(p))
}

fn info(w: &WorldState, id: &str) -> Option<&'static catalog::TypeInfo> {
    w.object(id).and_then(|o| o.info())
}

impl Ctx<'_> {
    fn path_len(&self, id: &str) -> Option<usize> {
        plan_path(self.world, id, self.sim).ok().map(|p| p.len())
    }

    fn at(&self, id: &str) -> bool {
        self.path_len(id) == Some(0)
    }

    fn inside(&self, id: &str, container: &str) -> bool {
        self.world.ancestors(id).iter().any(|a| a == container)
    }

    /// Reachable candidates ordered by travel distance, then id.
    fn nearest<'b>(&self, ids: impl IntoIterator<Item = &'b str>) -> Option<String> {
        ids.into_iter()
            .filter_map(|id| self.path_len(id).map(|d| (d, id.to_string())))
            .min()
            .map(|(_, id)| id)
    }

    fn of_type<'b>(&'b self, t: &'b str) -> impl Iterator<Item = &'b str> + 'b {
        self.world.objects_of_type(t).map(|o| o.object_id.as_str())
    }

    fn has_room(&self, receptacle: &str) -> bool {
        info(self.world, receptacle).is_some_and(|i| self.world.children(receptacle).len() < i.capacity)
    }

    /// Free open surface for setting down whatever is in hand.
    fn drop_surface(&self, avoid: &[&str]) -> Option<String> {
        let ids: Vec<&str> = self
            .world
            .objects
            .values()
            .filter(|o| o.cell.is_some())
            .filter(|o| {
                o.info().is_some_and(|i| {
                    i.receptacle && i.accepts == catalog::Accepts::Anything && !i.openable && i.name != "Sink"
                })
            })
            .map(|o| o.object_id.as_str())
            .filter(|id| !avoid.contains(id) && self.has_room(id))
            .collect();
        self.nearest(ids)
    }

    fn put_down(&self, avoid: &[&str]) -> Next {
        match self.drop_surface(avoid) {
            None => Next::Stuck,
            Some(s) if !self.at(&s) => step("navigation_0", Op::Navigate(s)),
            Some(s) => step("interaction_0_1", Op::Interact(vec![(Verb::Place, s)])),
        }
    }

    /// Steps until `obj` is in hand; `None` once it is held and its source
    /// container has been closed again.
    fn hold(&self, obj: &str, avoid: &[&str]) -> Option<Next> {
        let w = self.world;
        if w.is_held(obj) {
            if let Some(p) = self.opened {
                if flag(w, p, Property::IsOpen) && reachable(w, &w.follower, p) {
                    return Some(step("interaction_1_3", Op::Interact(vec![(Verb::Close, p.to_string())])));
                }
            }
            return None;
        }
        if !info(w, obj).is_some_and(|i| i.pickupable) {
            return Some(Next::Stuck);
        }
        if w.held_object.is_some() {
            return Some(self.put_down(avoid));
        }
        if !self.at(obj) {
            return Some(step("navigation_1", Op::Navigate(obj.to_string())));
        }
        if let Some(p) = w.closed_ancestor(obj) {
            let mut ops = Vec::new();
            if flag(w, &p, Property::IsToggled) {
                ops.push((Verb::ToggleOff, p.clone()));
            }
            ops.push((Verb::Open, p));
            return Some(step("interaction_1_1", Op::Interact(ops)));
        }
        let behind_door = w.ancestors(obj).iter().any(|a| flag(w, a, Property::Openable));
        let label = if behind_door { "interaction_1_2" } else { "interaction_1_1" };
        Some(step(label, Op::Interact(vec![(Verb::Pickup, obj.to_string())])))
    }

    /// Steps placing the held object into `dest`.
    fn deliver(&self, dest: &str) -> Next {
        let w = self.world;
        if !self.at(dest) {
            return step("navigation_2", Op::Navigate(dest.to_string()));
        }
        if let Some(p) = w.closed_ancestor(dest) {
            let mut ops = Vec::new();
            if flag(w, &p, Property::IsToggled) {
                ops.push((Verb::ToggleOff, p.clone()));
            }
            ops.push((Verb::Open, p));
            return step("interaction_2_1", Op::Interact(ops));
        }
        let openable = flag(w, dest, Property::Openable);
        if openable && !flag(w, dest, Property::IsOpen) {
            let mut ops = Vec::new();
            if flag(w, dest, Property::IsToggled) {
                ops.push((Verb::ToggleOff, dest.to_string()));
            }
            ops.push((Verb::Open, dest.to_string()));
            return step("interaction_2_1", Op::Interact(ops));
        }
        let label = if openable { "interaction_2_2" } else { "interaction_2_1" };
        step(label, Op::Interact(vec![(Verb::Place, dest.to_string())]))
    }

    /// Clear one slot of a full `dest` that `obj` must go into.
    fn make_room(&self, dest: &str, obj: &str) -> Option<Next> {
        let w = self.world;
        if self.has_room(dest) || self.inside(obj, dest) {
            return None;
        }
        let obj_type = w.object_type(obj).unwrap_or("");
        let mut kids: Vec<&str> = w.children(dest);
        kids.sort_by_key(|k| (self.placed.contains(*k), w.object_type(k) == Some(obj_type), k.to_string()));
        let victim = kids.first()?.to_string();
        if w.is_held(&victim) {
            return Some(self.put_down(&[dest]));
        }
        match self.hold(&victim, &[dest]) {
            Some(n) => Some(n),
            None => Some(self.put_down(&[dest])),
        }
    }

    /// Put `obj` in a sink and run the faucet until `done` holds.
    fn rinse(&self, obj: &str, done: impl Fn(&WorldState) -> bool) -> Next {
        let w = self.world;
        if done(w) {
            return Next::Done;
        }
        let sink_of = |s: &str| -> Option<String> {
            let cell = w.cell_of(s)?;
            w.objects_of_type("Faucet")
                .filter(|f| f.cell.is_some_and(|c| c.manhattan(cell) <= 1))
                .map(|f| f.object_id.clone())
                .next()
        };
        let current = w.ancestors(obj).into_iter().find(|a| w.object_type(a) == Some("Sink"));
        let sink = match current {
            Some(s) => s,
            None => {
                let sinks: Vec<&str> = self.of_type("Sink").filter(|s| sink_of(s).is_some()).collect();
                let Some(s) = self.nearest(sinks.iter().copied().filter(|s| self.has_room(s)))
                    .or_else(|| self.nearest(sinks))
                else {
                    return Next::Stuck;
                };
                if let Some(n) = self.make_room(&s, obj) {
                    return n;
                }
                if let Some(n) = self.hold(obj, &[]) {
                    return n;
                }
                return self.deliver(&s);
            }
        };
        let Some(faucet) = sink_of(&sink) else {
            return Next::Stuck;
        };
        if !reachable(w, &w.follower, &faucet) || project(w, &w.follower, &faucet, self.sim).is_none() {
            if !self.at(&sink) {
                return step("navigation_3", Op::Navigate(sink));
            }
            return step("navigation_3", Op::Navigate(faucet));
        }
        let ops = if flag(w, &faucet, Property::IsToggled) {
            vec![(Verb::ToggleOff, faucet.clone()), (Verb::ToggleOn, faucet.clone()), (Verb::ToggleOff, faucet)]
        } else {
            vec![(Verb::ToggleOn, faucet.clone()), (Verb::ToggleOff, faucet)]
        };
        step("interaction_3_1", Op::Interact(ops))
    }

    /// Switch an appliance on and off again with `obj` inside.
    fn run_appliance(&self, appliance: &str) -> Next {
        let w = self.world;
        if !reachable(w, &w.follower, appliance) || project(w, &w.follower, appliance, self.sim).is_none() {
            return step("navigation_3", Op::Navigate(appliance.to_string()));
        }
        let a = appliance.to_string();
        let ops = if flag(w, appliance, Property::IsToggled) {
            vec![(Verb::ToggleOff, a.clone()), (Verb::ToggleOn, a.clone()), (Verb::ToggleOff, a)]
        } else {
            vec![(Verb::ToggleOn, a.clone()), (Verb::ToggleOff, a)]
        };
        step("interaction_3_1", Op::Interact(ops))
    }

    /// Fetch `obj` and place it in `dest`, making room first if needed.
    fn move_into(&self, obj: &str, dest: &str) -> Option<Next> {
        if self.inside(obj, dest) {
            return None;
        }
        if let Some(n) = self.make_room(dest, obj) {
            return Some(n);
        }
        if let Some(n) = self.hold(obj, &[dest]) {
            return Some(n);
        }
        Some(self.deliver(dest))
    }

    fn container_of_type(&self, obj: &str, t: &str) -> Option<String> {
        self.world.ancestors(obj).into_iter().find(|a| self.world.object_type(a) == Some(t))
    }

    // --- policies -------------------------------------------------------

    fn parent_receptacles(&self, obj: &str, dest: &str) -> Next {
        if self.world.object(dest).is_none() {
            return Next::Stuck;
        }
        self.move_into(obj, dest).unwrap_or(Next::Done)
    }

    fn clean(&self, obj: &str) -> Next {
        self.rinse(obj, |w| !flag(w, obj, Property::IsDirty))
    }

    fn fill_with_water(&self, obj: &str) -> Next {
        let w = self.world;
        if info(w, obj).is_some_and(|i| i.pickupable) {
            return self.rinse(obj, |w| flag(w, obj, Property::IsFilledWithLiquid));
        }
        let containers: Vec<&str> = w
            .objects
            .values()
            .filter(|o| o.info().is_some_and(|i| i.pickupable && i.fillable))
            .map(|o| o.object_id.as_str())
            .collect();
        let held = w.held_object.as_deref().filter(|h| containers.contains(h));
        let full = containers.iter().copied().filter(|c| flag(w, c, Property::IsFilledWithLiquid));
        let Some(c) = held.map(String::from).or_else(|| self.nearest(full)).or_else(|| self.nearest(containers.iter().copied()))
        else {
            return Next::Stuck;
        };
        if !flag(w, &c, Property::IsFilledWithLiquid) {
            return self.rinse(&c, |w| flag(w, &c, Property::IsFilledWithLiquid));
        }
        if let Some(n) = self.hold(&c, &[]) {
            return n;
        }
        if !self.at(obj) {
            return step("navigation_4", Op::Navigate(obj.to_string()));
        }
        step("interaction_4_1", Op::Interact(vec![(Verb::Pour, obj.to_string())]))
    }

    fn make_coffee(&self, mug: &str) -> Next {
        let w = self.world;
        if flag(w, mug, Property::IsDirty) {
            return self.clean(mug);
        }
        let machines: Vec<&str> = self.of_type("CoffeeMachine").collect();
        let Some(machine) = self
            .container_of_type(mug, "CoffeeMachine")
            .or_else(|| self.nearest(machines.iter().copied().filter(|m| self.has_room(m))))
            .or_else(|| self.nearest(machines))
        else {
            return Next::Stuck;
        };
        if let Some(n) = self.move_into(mug, &machine) {
            return n;
        }
        self.run_appliance(&machine)
    }

    fn boil(&self, obj: &str) -> Next {
        let w = self.world;
        let pots: Vec<&str> = self.of_type("Pot").collect();
        let on_burner = |p: &&str| self.container_of_type(p, "StoveBurner").is_some();
        let Some(pot) = self
            .container_of_type(obj, "Pot")
            .or_else(|| self.nearest(pots.iter().copied().filter(on_burner)))
            .or_else(|| self.nearest(pots))
        else {
            return Next::Stuck;
        };
        if !flag(w, &pot, Property::IsFilledWithLiquid) {
            return self.rinse(&pot, |w| flag(w, &pot, Property::IsFilledWithLiquid));
        }
        let burner = match self.container_of_type(&pot, "StoveBurner") {
            Some(b) => b,
            None => {
                let free = self.of_type("StoveBurner").filter(|b| w.children(b).is_empty());
                let Some(b) = self.nearest(free) else {
                    return Next::Stuck;
                };
                return self.move_into(&pot, &b).unwrap_or(Next::Stuck);
            }
        };
        if let Some(n) = self.move_into(obj, &pot) {
            return n;
        }
        self.run_appliance(&burner)
    }

    fn cook(&self, obj: &str, compat: bool) -> Next {
        let toast = self.world.object_type(obj) == Some("BreadSliced");
        if toast && compat {
            return Next::Stuck;
        }
        let kind = if toast { "Toaster" } else { "Microwave" };
        let all: Vec<&str> = self.of_type(kind).collect();
        let Some(app) = self
            .container_of_type(obj, kind)
            .or_else(|| self.nearest(all.iter().copied().filter(|a| self.has_room(a))))
            .or_else(|| self.nearest(all))
        else {
            return Next::Stuck;
        };
        if let Some(n) = self.move_into(obj, &app) {
            return n;
        }
        self.run_appliance(&app)
    }

    fn slice(&self, obj: &str) -> Next {
        let w = self.world;
        if !info(w, obj).is_some_and(|i| i.sliceable) {
            return Next::Stuck;
        }
        let held_knife = w.held_object.as_deref().filter(|h| w.object_type(h).is_some_and(catalog::is_knife));
        let knife = match held_knife {
            Some(k) => k.to_string(),
            None => {
                let knives = w
                    .objects
                    .values()
                    .filter(|o| catalog::is_knife(o.object_type()))
                    .map(|o| o.object_id.as_str());
                let Some(k) = self.nearest(knives) else {
                    return Next::Stuck;
                };
                k
            }
        };
        if let Some(n) = self.hold(&knife, &[]) {
            return n;
        }
        if !self.at(obj) {
            return step("navigation_2", Op::Navigate(obj.to_string()));
        }
        if let Some(p) = w.closed_ancestor(obj) {
            let mut ops = Vec::new();
            if flag(w, &p, Property::IsToggled) {
                ops.push((Verb::ToggleOff, p.clone()));
            }
            ops.push((Verb::Open, p));
            return step("interaction_2_1", Op::Interact(ops));
        }
        step("interaction_2_2", Op::Interact(vec![(Verb::Slice, obj.to_string())]))
    }

    pub(crate) fn policy(&self, key: &ActiveKey, compat: bool) -> Next {
        let obj = key.object_id.as_str();
        if self.world.object(obj).is_none() {
            return Next::Stuck;
        }
        let want = key.desired.as_int();
        match (key.property_name.as_str(), &key.desired) {
            ("parentReceptacles", PropValue::Str(dest)) => self.parent_receptacles(obj, dest),
            ("isDirty", _) if want == Some(0) => self.clean(obj),
            ("isFilledWithLiquid", _) if want == Some(1) => self.fill_with_water(obj),
            ("isFilledWithCoffee", _) if want == Some(1) => self.make_coffee(obj),
            ("isBoiled", _) if want == Some(1) && !compat => self.boil(obj),
            ("isCooked", _) if want == Some(1) => self.cook(obj, compat),
            ("objectType", PropValue::Str(t)) if catalog::sliced_type(self.world.object_type(obj).unwrap_or("")).as_deref() == Some(t) => {
                self.slice(obj)
            }
            _ => Next::Stuck,
        }
    }
}

/// Coordinates that the selector resolves to `id` from the current pose.
fn coordinate_for(world: &WorldState, id: &str, config: &SimConfig) -> Option<(f64, f64)> {
    let (x, y) = project(world, &world.follower, id, config)?;
    let round = |v: f64| (v * 100.0).round() / 100.0;
    let (rx, ry) = (round(x), round(y));
    let mut offsets: Vec<(i32, i32)> = (-4..=4).flat_map(|dx| (-4..=4).map(move |dy| (dx, dy))).collect();
    offsets.sort_by_key(|(dx, dy)| (dx * dx + dy * dy, *dx, *dy));
    offsets.into_iter().find_map(|(dx, dy)| {
        let c = (rx + dx as f64 / 100.0, ry + dy as f64 / 100.0);
        if !(0.0..=1.0).contains(&c.0) || !(0.0..=1.0).contains(&c.1) {
            return None;
        }
        let sel = ObjectSelector::Coordinate(round(c.0), round(c.1));
        (resolve_selector(world, &world.follower, &sel, config).ok().as_deref() == Some(id)).then_some((round(c.0), round(c.1)))
    })
}

/// Turn a policy step into tokens, simulating each on `world` so later
/// coordinates reflect the state after the batch prefix.
fn compile(step: &PolicyStep, world: &mut WorldState, sim: &Simulator) -> Option<Vec<InstructionToken>> {
    let tokens: Vec<InstructionToken> = match &step.op {
        Op::Navigate(id) => plan_path(world, id, &sim.config)
            .map_err(|_: PlanError| ())
            .ok()?
            .into_iter()
            .map(InstructionToken::Motion)
            .collect(),
        Op::Interact(ops) => {
            let mut out = Vec::new();
            let mut probe = world.clone();
            for (verb, id) in ops {
                let (x, y) = coordinate_for(&probe, id, &sim.config)?;
                let t = InstructionToken::interact(*verb, probe.object_type(id)?, x, y);
                let (next, r) = sim.step(&probe, &t.to_action(), Role::Follower);
                if !r.success {
                    return None;
                }
                probe = next;
                out.push(t);
            }
            out
        }
    };
    for t in &tokens {
        let (next, r) = sim.step(world, &t.to_action(), Role::Follower);
        if !r.success {
            return None;
        }
        *world = next;
    }
    (!tokens.is_empty()).then_some(tokens)
}

fn key_in_report(report: &ProgressReport, key: &ActiveKey) -> bool {
    report.problem_keys().any(|(id, k)| {
        id == key.object_id && k.property_name == key.property_name && k.desired_property_value == key.desired
    })
}

/// One Commander turn: the instruction batch for the current world, or an
/// empty batch when the task is done or nothing more can be attempted.
pub fn commander_step(
    report: &ProgressReport,
    state: &PolicyState,
    world: &WorldState,
    config: &CommanderConfig,
) -> (Vec<InstructionToken>, PolicyState) {
    let mut st = state.clone();
    if report.success == 1 {
        st.active = None;
        st.current_step = "task_completed".into();
        return (Vec::new(), st);
    }
    let sim = Simulator::new(config.sim.clone());
    let hash = world.state_hash();
    loop {
        let still_open = st.active.as_ref().is_some_and(|k| key_in_report(report, k));
        if !still_open {
            let next = report
                .problem_keys()
                .map(|(id, k)| ActiveKey {
                    object_id: id.to_string(),
                    property_name: k.property_name.clone(),
                    desired: k.desired_property_value.clone(),
                })
                .find(|k| !st.skipped.contains(k));
            let Some(k) = next else {
                st.active = None;
                st.current_step = "no_supported_key".into();
                return (Vec::new(), st);
            };
            st.active = Some(k);
            st.turns_on_key = 0;
            st.stuck = 0;
            st.opened = None;
            st.last_hash = None;
        }
        let key = st.active.clone().expect("active key");
        if st.last_hash.as_deref() == Some(hash.as_str()) {
            st.stuck += 1;
        } else {
            st.stuck = 0;
        }
        let give_up = st.stuck >= config.max_stuck || st.turns_on_key >= config.max_turns_per_key;
        let ctx = Ctx {
            world,
            sim: &config.sim,
            opened: st.opened.as_deref(),
            placed: &st.placed,
        };
        let next = if give_up { Next::Stuck } else { ctx.policy(&key, config.legacy_compat) };
        let Next::Step(step) = next else {
            st.skipped.insert(key);
            st.active = None;
            continue;
        };
        let mut predicted = world.clone();
        let Some(tokens) = compile(&step, &mut predicted, &sim) else {
            st.skipped.insert(key);
            st.active = None;
            continue;
        };
        if let Op::Interact(ops) = &step.op {
            for (verb, id) in ops {
                match verb {
                    Verb::Place => {
                        st.placed.extend(world.held_object.clone());
                    }
                    Verb::Open if step.label == "interaction_1_1" => st.opened = Some(id.clone()),
                    Verb::Close if st.opened.as_deref() == Some(id) => st.opened = None,
                    _ => {}
                }
            }
        }
        let after = Ctx {
            world: &predicted,
            sim: &config.sim,
            opened: st.opened.as_deref(),
            placed: &st.placed,
        };
        st.current_step = match after.policy(&key, config.legacy_compat) {
            Next::Step(s) => s.label.to_string(),
            _ => STEP_COMPLETED.to_string(),
        };
        st.last_step = step.label.to_string();
        st.turns_on_key += 1;
        st.last_hash = Some(hash);
        return (tokens, st);
    }
}
