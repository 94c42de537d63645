use proptest::prelude::*;
use teach_core::fuzz;
use teach_core::sim::{
    apply_transition_rules, generate_scenario, observe, project, replay, resolve_selector, search_object, Action, ActionRecord, Clock, Floorplan,
    Motion, ObjectSelector, Role, RuleSet, Scenario, ScenarioError, Session, SimConfig, Simulator, Verb, SESSION_FORMAT_VERSION,
};
use teach_core::tdl::{TaskLibrary, BENCHMARK_TASKS};
use teach_core::world::{catalog, format_object_id, Cell, Heading, Layout, ObjectInstance, Pose, PropValue, Property, WorldState};

/// A 3x3 floor inside walls. Fixtures go on the top floor row; the Follower
/// stands below the middle one facing north.
fn room(fixtures: &[(&str, i32)]) -> (WorldState, Vec<String>) {
    let rows = ["#####", "#...#", "#...#", "#...#", "#####"].iter().map(|s| s.to_string()).collect();
    let mut w = WorldState::new(Layout::from_rows(rows), Pose::new(Cell::new(2, 2), Heading::N));
    let mut ids = Vec::new();
    for (t, x) in fixtures {
        let mut o = ObjectInstance::new(format_object_id(t, *x as f64, 0.9, 1.0), catalog::lookup(t).unwrap());
        o.cell = Some(Cell::new(*x, 1));
        ids.push(o.object_id.clone());
        w.insert(o);
    }
    (w, ids)
}

fn put(w: &mut WorldState, t: &str, n: usize, parent: &str, props: &[(Property, i64)]) -> String {
    let mut o = ObjectInstance::new(format_object_id(t, n as f64, 1.0, 1.0), catalog::lookup(t).unwrap());
    o.set(Property::ParentReceptacles, PropValue::str(parent));
    for (p, v) in props {
        o.set(*p, PropValue::Int(*v));
    }
    let id = o.object_id.clone();
    w.insert(o);
    id
}

fn interact(verb: Verb, id: &str) -> Action {
    Action::Interact {
        verb,
        target: ObjectSelector::ObjectId(id.to_string()),
    }
}

fn motion(m: Motion) -> Action {
    Action::Motion { motion: m }
}

fn int(w: &WorldState, id: &str, p: Property) -> Option<i64> {
    match w.object(id)?.get(p) {
        Some(PropValue::Int(v)) => Some(*v),
        _ => None,
    }
}

#[test]
fn pickup_from_open_fridge() {
    let (mut w, f) = room(&[("Fridge", 2)]);
    w.object_mut(&f[0]).unwrap().set(Property::IsOpen, PropValue::Int(1));
    let mug = put(&mut w, "Mug", 0, &f[0], &[(Property::IsDirty, 1)]);
    let (next, r) = Simulator::default().step(&w, &interact(Verb::Pickup, &mug), Role::Follower);
    assert!(r.success, "{r:?}");
    assert_eq!(next.held_object.as_deref(), Some(mug.as_str()));
    assert_eq!(next.object(&mug).unwrap().parent(), None);
    assert_eq!(int(&next, &mug, Property::IsDirty), Some(1));
    next.validate().unwrap();
}

#[test]
fn pickup_from_closed_fridge_fails() {
    let (mut w, f) = room(&[("Fridge", 2)]);
    let mug = put(&mut w, "Mug", 0, &f[0], &[]);
    let (next, r) = Simulator::default().step(&w, &interact(Verb::Pickup, &mug), Role::Follower);
    assert!(!r.success);
    assert_eq!(r.error.as_deref(), Some("closed-parent"));
    assert_eq!(next.state_hash(), w.state_hash());
}

#[test]
fn walking_into_a_wall() {
    let (mut w, _) = room(&[]);
    w.follower = Pose::new(Cell::new(1, 1), Heading::N);
    let (next, r) = Simulator::default().step(&w, &motion(Motion::Forward), Role::Follower);
    assert!(!r.success);
    assert_eq!(r.error.as_deref(), Some("collision"));
    assert_eq!(next, w);
}

#[test]
fn pot_does_not_fit_a_full_sink() {
    let (mut w, f) = room(&[("Sink", 2), ("CounterTop", 1)]);
    let cap = catalog::lookup("Sink").unwrap().capacity;
    for n in 0..cap {
        put(&mut w, "Fork", n, &f[0], &[]);
    }
    let pot = put(&mut w, "Pot", 9, &f[1], &[]);
    let sim = Simulator::default();
    let (held, r) = sim.step(&w, &interact(Verb::Pickup, &pot), Role::Follower);
    assert!(r.success, "{r:?}");
    let (after, r) = sim.step(&held, &interact(Verb::Place, &f[0]), Role::Follower);
    assert!(!r.success);
    assert_eq!(r.error.as_deref(), Some("receptacle-full"));
    assert_eq!(after.state_hash(), held.state_hash());
}

#[test]
fn toasting_bread_slice() {
    let (mut w, f) = room(&[("Toaster", 2)]);
    w.object_mut(&f[0]).unwrap().set(Property::IsToggled, PropValue::Int(1));
    let slice = put(&mut w, "BreadSliced", 0, &f[0], &[]);
    let (next, deltas) = apply_transition_rules(&w);
    assert_eq!(int(&next, &slice, Property::IsCooked), Some(1));
    assert!(deltas.iter().any(|d| d.object_id == slice && d.property == Property::IsCooked));
}

#[test]
fn empty_world_is_a_fixpoint() {
    let (next, deltas) = apply_transition_rules(&WorldState::default());
    assert!(deltas.is_empty());
    assert_eq!(next, WorldState::default());
}

#[test]
fn coffee_machine_fills_a_clean_mug() {
    let (mut w, f) = room(&[("CoffeeMachine", 2)]);
    w.object_mut(&f[0]).unwrap().set(Property::IsToggled, PropValue::Int(1));
    let mug = put(&mut w, "Mug", 0, &f[0], &[(Property::IsDirty, 0)]);
    let (next, deltas) = apply_transition_rules(&w);
    assert_eq!(int(&w, &mug, Property::IsFilledWithCoffee), Some(0));
    assert_eq!(int(&next, &mug, Property::IsFilledWithCoffee), Some(1));
    assert!(deltas.iter().any(|d| d.object_id == mug && d.property == Property::IsFilledWithCoffee));
}

#[test]
fn knife_on_counter_in_view() {
    let (mut w, f) = room(&[("CounterTop", 2)]);
    let knife = put(&mut w, "Knife", 0, &f[0], &[]);
    let obs = observe(&w, Role::Follower, None, &SimConfig::default());
    let seen = obs.visible.iter().find(|v| v.object_id == knife).expect("knife visible");
    let counter = obs.visible.iter().find(|v| v.object_id == f[0]).expect("counter visible");
    assert_eq!(seen.distance, Some(1));
    let (x, y) = (seen.x.unwrap(), seen.y.unwrap());
    assert!((x - 0.5).abs() < 1e-9, "a lone item dead ahead is centered, got {x}");
    assert!(y > 0.0 && y < counter.y.unwrap());
}

#[test]
fn closed_fridge_hides_its_contents() {
    let (mut w, f) = room(&[("Fridge", 2)]);
    let mug = put(&mut w, "Mug", 0, &f[0], &[]);
    let obs = observe(&w, Role::Follower, None, &SimConfig::default());
    assert!(obs.visible.iter().all(|v| v.object_id != mug));
    w.object_mut(&f[0]).unwrap().set(Property::IsOpen, PropValue::Int(1));
    let obs = observe(&w, Role::Follower, None, &SimConfig::default());
    assert!(obs.visible.iter().any(|v| v.object_id == mug));
}

#[test]
fn held_object_has_no_coordinates() {
    let (mut w, f) = room(&[("CounterTop", 2)]);
    let mug = put(&mut w, "Mug", 0, &f[0], &[]);
    let (w, _) = Simulator::default().step(&w, &interact(Verb::Pickup, &mug), Role::Follower);
    let obs = observe(&w, Role::Follower, None, &SimConfig::default());
    let held = obs.held_object.expect("held");
    assert_eq!(held.object_id, mug);
    assert_eq!((held.x, held.y), (None, None));
    assert!(obs.visible.iter().all(|v| v.object_id != mug));
}

#[test]
fn coordinate_names_the_single_mug() {
    let (mut w, f) = room(&[("CounterTop", 2)]);
    let mug = put(&mut w, "Mug", 0, &f[0], &[]);
    let cfg = SimConfig::default();
    let (x, y) = project(&w, &w.follower, &mug, &cfg).unwrap();
    let text = format!("Pickup Mug at {x:.2} {y:.2}");
    let parts: Vec<&str> = text.split(' ').collect();
    let (px, py): (f64, f64) = (parts[3].parse().unwrap(), parts[4].parse().unwrap());
    assert_eq!(resolve_selector(&w, &w.follower, &ObjectSelector::Coordinate(px, py), &cfg).unwrap(), mug);
}

#[test]
fn coordinate_on_bare_wall_fails() {
    let (w, _) = room(&[]);
    let err = resolve_selector(&w, &w.follower, &ObjectSelector::Coordinate(0.05, 0.05), &SimConfig::default()).unwrap_err();
    assert_eq!(err.code(), "target-not-found");
}

#[test]
fn overlapping_candidates_break_ties_by_distance_then_id() {
    let (mut w, f) = room(&[("CounterTop", 2)]);
    let a = put(&mut w, "Apple", 0, &f[0], &[]);
    let b = put(&mut w, "Apple", 1, &f[0], &[]);
    let cfg = SimConfig::default();
    let pa = project(&w, &w.follower, &a, &cfg).unwrap();
    let pb = project(&w, &w.follower, &b, &cfg).unwrap();
    let mid = ((pa.0 + pb.0) / 2.0, (pa.1 + pb.1) / 2.0);
    assert!((pa.0 - mid.0).abs() <= cfg.selector_tolerance && (pb.0 - mid.0).abs() <= cfg.selector_tolerance);
    let pick = |x: f64, y: f64| resolve_selector(&w, &w.follower, &ObjectSelector::Coordinate(x, y), &cfg).unwrap();
    let smaller = if a < b { a.clone() } else { b.clone() };
    assert_eq!(pick(mid.0, mid.1), smaller);
    let nudge = (pb.0 - pa.0).signum() * 0.005;
    assert_eq!(pick(mid.0 - nudge, mid.1), a);
    assert_eq!(pick(mid.0 + nudge, mid.1), b);
}

#[test]
fn search_by_name_and_in_hand() {
    let (mut w, f) = room(&[("Sink", 1), ("CounterTop", 2)]);
    let f1 = put(&mut w, "Fork", 0, &f[1], &[]);
    let f2 = put(&mut w, "Fork", 1, &f[0], &[]);
    let sink = search_object(&w, "sink");
    assert_eq!(sink.len(), 1);
    assert_eq!(sink[0].object_id, f[0]);
    assert_eq!(sink[0].cell, Some(Cell::new(1, 1)));
    let forks = search_object(&w, "fork");
    let mut got: Vec<(String, Option<String>)> = forks.iter().map(|h| (h.object_id.clone(), h.parent.clone())).collect();
    got.sort();
    let mut want = vec![(f1.clone(), Some(f[1].clone())), (f2, Some(f[0].clone()))];
    want.sort();
    assert_eq!(got, want);
    let (w, r) = Simulator::default().step(&w, &interact(Verb::Pickup, &f1), Role::Follower);
    assert!(r.success);
    assert_eq!(search_object(&w, &f1)[0].location, "follower hand");
}

#[test]
fn follower_may_not_query() {
    let (w, _) = room(&[]);
    let sim = Simulator::default();
    for a in [Action::ProgressCheck, Action::SearchObject { query: "sink".into() }] {
        let (next, r) = sim.step(&w, &a, Role::Follower);
        assert_eq!(r.error.as_deref(), Some("role-violation"));
        assert_eq!(next, w);
    }
    let (_, r) = sim.step(&w, &motion(Motion::Forward), Role::Commander);
    assert_eq!(r.error.as_deref(), Some("role-violation"));
}

fn lib() -> TaskLibrary {
    TaskLibrary::shipped()
}

#[test]
fn make_coffee_scenario_preconditions() {
    let lib = lib();
    let g = lib.ground("Make Coffee", &[]).unwrap();
    let plan = Floorplan::builtin("kitchen_00").unwrap();
    let s = generate_scenario(&g, &plan, 7, &lib).unwrap();
    assert!(s.initial_state.objects_of_type("Mug").count() >= 1);
    assert!(s.initial_state.objects_of_type("CoffeeMachine").count() >= 1);
    let tree = teach_core::checker::TaskTree::build(&g, &lib).unwrap();
    assert!(!tree.evaluate(&s.initial_state).success);
    s.initial_state.validate().unwrap();
}

#[test]
fn water_plant_without_a_plant_is_unsatisfiable() {
    let lib = lib();
    let g = lib.ground("Water Plant", &[]).unwrap();
    let plan = Floorplan::builtin_all().into_iter().find(|p| !p.has_fixture("HousePlant")).expect("a plan without a plant");
    assert!(matches!(generate_scenario(&g, &plan, 0, &lib), Err(ScenarioError::Unsatisfiable { .. })));
}

#[test]
fn scenarios_are_deterministic() {
    let lib = lib();
    for t in BENCHMARK_TASKS {
        let g = lib.ground(t, &fuzz::sample_params(t)[0]).unwrap();
        for plan in Floorplan::builtin_all().iter().step_by(4) {
            let a = generate_scenario(&g, plan, 11, &lib);
            let b = generate_scenario(&g, plan, 11, &lib);
            match (a, b) {
                (Ok(a), Ok(b)) => {
                    assert_eq!(a.to_json(), b.to_json());
                    assert_eq!(Scenario::from_json(&a.to_json()).unwrap(), a);
                }
                (Err(a), Err(b)) => assert_eq!(a.to_string(), b.to_string()),
                _ => panic!("{t} on {} is not deterministic", plan.floorplan_id),
            }
        }
    }
}

fn session(initial: WorldState, actions: &[(Role, Action)]) -> Session {
    let sim = Simulator::default();
    let mut w = initial.clone();
    let mut clock = Clock::default();
    let mut recs = Vec::new();
    for (agent, a) in actions {
        let (next, r) = sim.step(&w, a, *agent);
        w = next;
        recs.push(ActionRecord {
            time_ms: clock.stamp(a),
            agent: *agent,
            action: a.clone(),
            success: r.success,
            error: r.error,
            observation: None,
        });
    }
    Session {
        version: SESSION_FORMAT_VERSION,
        session_id: "t".into(),
        floorplan_id: "test".into(),
        task_name: "Make Coffee".into(),
        task_params: Vec::new(),
        seed: 0,
        sim_config: sim.config.clone(),
        initial_state: initial,
        actions: recs,
        final_state: w,
    }
}

#[test]
fn empty_session_replays_to_its_start() {
    let (w, _) = room(&[("CounterTop", 2)]);
    let s = session(w.clone(), &[]);
    let (end, results) = replay(&s).unwrap();
    assert_eq!(end, w);
    assert!(results.is_empty());
}

#[test]
fn recorded_failure_replays_identically() {
    let (mut w, f) = room(&[("CounterTop", 2)]);
    let mug = put(&mut w, "Mug", 0, &f[0], &[]);
    let s = session(w, &[(Role::Follower, interact(Verb::Pickup, &f[0])), (Role::Follower, interact(Verb::Pickup, &mug))]);
    assert_eq!(s.actions[0].error.as_deref(), Some("not-pickupable"));
    let (_, results) = replay(&s).unwrap();
    assert_eq!(results[0].error.as_deref(), Some("not-pickupable"));
    assert!(results[1].success);
}

#[test]
fn tampered_session_reports_the_index() {
    let (mut w, f) = room(&[("CounterTop", 2)]);
    let mug = put(&mut w, "Mug", 0, &f[0], &[]);
    let mut s = session(w, &[(Role::Follower, interact(Verb::Pickup, &mug)), (Role::Follower, motion(Motion::TurnLeft))]);
    s.actions[1].success = false;
    assert_eq!(replay(&s).unwrap_err().index, 1);
    let mut s2 = s.clone();
    s2.actions[1].success = true;
    s2.final_state.tick += 1;
    assert_eq!(replay(&s2).unwrap_err().index, 2);
}

const VERBS: [Verb; 8] = [Verb::Pickup, Verb::Place, Verb::Open, Verb::Close, Verb::ToggleOn, Verb::ToggleOff, Verb::Slice, Verb::Pour];
const MOTIONS: [Motion; 8] = [
    Motion::Forward,
    Motion::Backward,
    Motion::TurnLeft,
    Motion::TurnRight,
    Motion::LookUp,
    Motion::LookDown,
    Motion::StrafeLeft,
    Motion::StrafeRight,
];

/// Random walk biased toward hitting real objects.
fn random_action(w: &WorldState, pick: u32, k: usize, cfg: &SimConfig) -> Action {
    match pick % 4 {
        0 => motion(MOTIONS[k % MOTIONS.len()]),
        1 => {
            let visible: Vec<_> = teach_core::sim::visible_objects(w, &w.follower, cfg);
            match visible.get(k % visible.len().max(1)) {
                Some(v) => Action::Interact {
                    verb: VERBS[(k / 7) % VERBS.len()],
                    target: ObjectSelector::Coordinate(v.x.unwrap(), v.y.unwrap()),
                },
                None => motion(Motion::TurnRight),
            }
        }
        2 => {
            let ids: Vec<&String> = w.objects.keys().collect();
            interact(VERBS[k % VERBS.len()], ids[k % ids.len()])
        }
        _ => Action::Interact {
            verb: VERBS[k % VERBS.len()],
            target: ObjectSelector::Coordinate((k % 100) as f64 / 100.0, (k / 100 % 100) as f64 / 100.0),
        },
    }
}

fn scenario_for(seed: u64) -> Scenario {
    let lib = lib();
    let plans = Floorplan::builtin_all();
    let t = BENCHMARK_TASKS[(seed as usize) % BENCHMARK_TASKS.len()];
    let g = lib.ground(t, &fuzz::sample_params(t)[0]).unwrap();
    (0..plans.len())
        .find_map(|k| generate_scenario(&g, &plans[(seed as usize + k) % plans.len()], seed, &lib).ok())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn steps_are_atomic_and_conserve_objects(seed in 0u64..10_000, script in prop::collection::vec((0u32..4, 0usize..10_000), 1..60)) {
        let sim = Simulator::default();
        let mut w = scenario_for(seed).initial_state;
        for (pick, k) in script {
            let a = random_action(&w, pick, k, &sim.config);
            let (next, r) = sim.step(&w, &a, Role::Follower);
            prop_assert!(next.validate().is_ok(), "{:?}", next.validate());
            prop_assert!(next.held_object.iter().count() <= 1);
            if r.success {
                let sliced = matches!(a, Action::Interact { verb: Verb::Slice, .. });
                if !sliced {
                    prop_assert_eq!(next.objects.len(), w.objects.len());
                }
            } else {
                prop_assert_eq!(next.state_hash(), w.state_hash());
            }
            let (again, r2) = sim.step(&w, &a, Role::Follower);
            prop_assert_eq!(&again, &next);
            prop_assert_eq!(r2, r);
            w = next;
        }
    }

    #[test]
    fn rule_order_does_not_matter(seed in 0u64..1_000_000) {
        let types: Vec<String> = [
            "Toaster", "BreadSliced", "Microwave", "PotatoSliced", "StoveBurner", "Pot", "Potato", "CoffeeMachine",
            "Mug", "Faucet", "Sink", "Bowl", "Plate", "CounterTop",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let w = fuzz::random_world(seed, &types, 8);
        let rules = RuleSet::shipped();
        let n = rules.rules().len();
        let mut reference = w.clone();
        rules.run(&mut reference);
        let orders = [(0..n).rev().collect::<Vec<_>>(), (0..n).map(|i| (i + 2) % n).collect(), (0..n).map(|i| (i * 3 + 1) % n).collect()];
        for order in orders {
            let mut x = w.clone();
            prop_assert!(rules.run_in_order(&mut x, &order).is_some());
            prop_assert_eq!(&x, &reference);
        }
    }
}
