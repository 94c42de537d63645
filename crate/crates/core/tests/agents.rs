use std::collections::{HashSet, VecDeque};

use proptest::prelude::*;
use teach_core::agents::tokens::{self, InstructionToken};
use teach_core::agents::{
    commander_step, follower_step, plan_path, run_tatc_episode, CommanderAgent, CommanderConfig, CommanderEvent, EpisodeLimits, FollowerAgent,
    HaltReason, PlanError, PolicyState, RuleCommander, RuleFollower, HELP_UTTERANCE,
};
use teach_core::checker::{check_task, TaskTree};
use teach_core::fuzz;
use teach_core::sim::{
    generate_scenario, observe, Action, Floorplan, Motion, Observation, Role, Scenario, Session, SimConfig, Simulator, Verb,
};
use teach_core::tdl::{parse_task_definition, TaskLibrary, BENCHMARK_TASKS};
use teach_core::world::{catalog, format_object_id, Cell, ClassHierarchy, Heading, Layout, ObjectInstance, Pose, PropValue, Property, WorldState};

fn strings(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn world(rows: &[&str], at: (i32, i32), heading: Heading) -> WorldState {
    WorldState::new(Layout::from_rows(strings(rows)), Pose::new(Cell::new(at.0, at.1), heading))
}

fn fixture(w: &mut WorldState, t: &str, x: i32, y: i32) -> String {
    let mut o = ObjectInstance::new(format_object_id(t, x as f64, 0.9, y as f64), catalog::lookup(t).unwrap());
    o.cell = Some(Cell::new(x, y));
    let id = o.object_id.clone();
    w.insert(o);
    id
}

fn put(w: &mut WorldState, t: &str, n: usize, parent: &str) -> String {
    let mut o = ObjectInstance::new(format_object_id(t, n as f64, 1.0, 1.0), catalog::lookup(t).unwrap());
    o.set(Property::ParentReceptacles, PropValue::str(parent));
    let id = o.object_id.clone();
    w.insert(o);
    id
}

const KITCHEN: [&str; 6] = ["#######", "#.....#", "#.....#", "#.....#", "#.....#", "#######"];

/// Two forks on a counter in the top-left corner, an empty sink top-right,
/// Follower in the bottom row facing north.
fn forks_world() -> (WorldState, Vec<String>) {
    let mut w = world(&KITCHEN, (3, 4), Heading::N);
    let counter = fixture(&mut w, "CounterTop", 1, 1);
    fixture(&mut w, "Sink", 5, 1);
    let forks = vec![put(&mut w, "Fork", 0, &counter), put(&mut w, "Fork", 1, &counter)];
    (w, forks)
}

fn scenario(task: &str, params: &[&str], w: WorldState) -> Scenario {
    Scenario {
        floorplan_id: "handmade".into(),
        task_name: task.into(),
        task_params: strings(params),
        seed: 0,
        initial_state: w,
    }
}

fn apply(w: &WorldState, batch: &[InstructionToken]) -> WorldState {
    let sim = Simulator::default();
    batch.iter().fold(w.clone(), |w, t| {
        let (next, r) = sim.step(&w, &t.to_action(), Role::Follower);
        assert!(r.success, "{t}: {r:?}");
        next
    })
}

#[test]
fn navigation_then_pickup_labels() {
    let lib = TaskLibrary::shipped();
    let (w, _) = forks_world();
    let g = lib.ground("Put All X On Y", &strings(&["Fork", "in", "Sink"])).unwrap();
    let cfg = CommanderConfig::default();
    let report = check_task(&w, &g, &lib).unwrap();
    let (batch, st) = commander_step(&report, &PolicyState::default(), &w, &cfg);
    assert!(!batch.is_empty());
    assert!(batch.iter().all(|t| matches!(t, InstructionToken::Motion(_))));
    assert_eq!(st.last_step, "navigation_1");
    assert_eq!(st.current_step, "interaction_1_1");
    let w = apply(&w, &batch);
    let report = check_task(&w, &g, &lib).unwrap();
    let (batch, st) = commander_step(&report, &st, &w, &cfg);
    assert_eq!(st.last_step, "interaction_1_1");
    assert!(matches!(batch.as_slice(), [InstructionToken::Interact { verb: Verb::Pickup, .. }]));
}

#[test]
fn closed_running_container_is_stopped_then_opened() {
    let lib = TaskLibrary::shipped();
    let mut w = world(&KITCHEN, (2, 2), Heading::N);
    let micro = fixture(&mut w, "Microwave", 2, 1);
    fixture(&mut w, "Sink", 5, 1);
    w.object_mut(&micro).unwrap().set(Property::IsToggled, PropValue::Int(1));
    put(&mut w, "Mug", 0, &micro);
    let g = lib.ground("Put All X On Y", &strings(&["Mug", "in", "Sink"])).unwrap();
    let report = check_task(&w, &g, &lib).unwrap();
    let (batch, st) = commander_step(&report, &PolicyState::default(), &w, &CommanderConfig::default());
    let verbs: Vec<Verb> = batch
        .iter()
        .map(|t| match t {
            InstructionToken::Interact { verb, object_type, .. } => {
                assert_eq!(object_type, "Microwave");
                *verb
            }
            InstructionToken::Motion(m) => panic!("unexpected motion {m:?}"),
        })
        .collect();
    assert_eq!(verbs, vec![Verb::ToggleOff, Verb::Open]);
    assert_eq!(st.last_step, "interaction_1_1");
    assert_eq!(st.current_step, "interaction_1_2");
}

#[test]
fn solved_task_ends_with_an_empty_batch() {
    let lib = TaskLibrary::shipped();
    let mut w = world(&KITCHEN, (3, 4), Heading::N);
    let sink = fixture(&mut w, "Sink", 5, 1);
    put(&mut w, "Fork", 0, &sink);
    let g = lib.ground("Put All X On Y", &strings(&["Fork", "in", "Sink"])).unwrap();
    let report = check_task(&w, &g, &lib).unwrap();
    assert_eq!(report.success, 1);
    let (batch, st) = commander_step(&report, &PolicyState::default(), &w, &CommanderConfig::default());
    assert!(batch.is_empty());
    assert_eq!(st.current_step, "task_completed");
    assert!(st.active.is_none());
}

#[test]
fn follower_queue_examples() {
    let obs = observe(&WorldState::default(), Role::Follower, None, &SimConfig::default());
    let mut q: VecDeque<InstructionToken> = tokens::parse("Forward Pickup Mug at 0.57 0.25").unwrap().into();
    assert_eq!(follower_step(&mut q, &obs), Action::Motion { motion: Motion::Forward });
    assert_eq!(q.front().unwrap().to_string(), "Pickup Mug at 0.57 0.25");
    let mut q: VecDeque<InstructionToken> = tokens::parse("TurnRight").unwrap().into();
    assert_eq!(follower_step(&mut q, &obs), Action::Motion { motion: Motion::TurnRight });
    assert_eq!(
        follower_step(&mut q, &obs),
        Action::Utterance {
            text: HELP_UTTERANCE.to_string()
        }
    );
}

#[test]
fn target_ahead_needs_no_motion() {
    let mut w = world(&KITCHEN, (2, 2), Heading::N);
    let c = fixture(&mut w, "CounterTop", 2, 1);
    assert_eq!(plan_path(&w, &c, &SimConfig::default()).unwrap(), vec![]);
}

#[test]
fn straight_corridor() {
    let mut w = world(&["#######", "#.....#", "#######"], (1, 1), Heading::E);
    let c = fixture(&mut w, "CounterTop", 5, 1);
    assert_eq!(plan_path(&w, &c, &SimConfig::default()).unwrap(), vec![Motion::Forward; 3]);
}

#[test]
fn walled_off_target() {
    let mut w = world(&["#######", "#..#..#", "#######"], (1, 1), Heading::E);
    let c = fixture(&mut w, "CounterTop", 5, 1);
    assert_eq!(plan_path(&w, &c, &SimConfig::default()), Err(PlanError::Unreachable(c)));
}

/// Shortest number of Follower motions, searched through the simulator
/// itself, until the target's cell is straight ahead and the target is in view.
fn bfs_oracle(w: &WorldState, target: &str) -> Option<usize> {
    let sim = Simulator::default();
    let cell = w.cell_of(target)?;
    let goal = |s: &WorldState| {
        s.follower.relative(cell) == (1, 0) && observe(s, Role::Follower, None, &sim.config).visible.iter().any(|v| v.object_id == target)
    };
    if goal(w) {
        return Some(0);
    }
    let motions = [
        Motion::Forward,
        Motion::Backward,
        Motion::TurnLeft,
        Motion::TurnRight,
        Motion::LookUp,
        Motion::LookDown,
        Motion::StrafeLeft,
        Motion::StrafeRight,
    ];
    let mut seen = HashSet::from([w.follower]);
    let mut frontier = VecDeque::from([(w.clone(), 0)]);
    while let Some((s, d)) = frontier.pop_front() {
        for m in motions {
            let (next, r) = sim.step(&s, &Action::Motion { motion: m }, Role::Follower);
            if !r.success || !seen.insert(next.follower) {
                continue;
            }
            if goal(&next) {
                return Some(d + 1);
            }
            frontier.push_back((next, d + 1));
        }
    }
    None
}

fn random_plan(seed: u64) -> (WorldState, String) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (wd, ht) = (rng.gen_range(4..=20), rng.gen_range(4..=20));
    let density = rng.gen_range(0.0..0.35);
    let rows: Vec<String> = (0..ht)
        .map(|y| {
            (0..wd)
                .map(|x| {
                    let edge = x == 0 || y == 0 || x == wd - 1 || y == ht - 1;
                    if edge || rng.gen_bool(density) {
                        '#'
                    } else {
                        '.'
                    }
                })
                .collect()
        })
        .collect();
    let floor: Vec<Cell> = (0..ht).flat_map(|y| (0..wd).map(move |x| Cell::new(x, y))).filter(|c| rows[c.y as usize].as_bytes()[c.x as usize] == b'.').collect();
    let layout = Layout::from_rows(rows);
    if floor.len() < 2 {
        let mut w = WorldState::new(Layout::from_rows(strings(&["####", "#..#", "####"])), Pose::new(Cell::new(1, 1), Heading::E));
        let c = fixture(&mut w, "CounterTop", 2, 1);
        return (w, c);
    }
    let fc = floor[rng.gen_range(0..floor.len())];
    let start = loop {
        let c = floor[rng.gen_range(0..floor.len())];
        if c != fc {
            break c;
        }
    };
    let heading = [Heading::N, Heading::E, Heading::S, Heading::W][rng.gen_range(0..4)];
    let mut w = WorldState::new(layout, Pose::new(start, heading));
    let c = fixture(&mut w, "CounterTop", fc.x, fc.y);
    (w, c)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn plans_are_valid_and_shortest(seed in any::<u64>()) {
        let (w, target) = random_plan(seed);
        let cfg = SimConfig::default();
        let oracle = bfs_oracle(&w, &target);
        match plan_path(&w, &target, &cfg) {
            Ok(path) => {
                prop_assert_eq!(Some(path.len()), oracle);
                let sim = Simulator::default();
                let mut s = w.clone();
                for m in &path {
                    let (next, r) = sim.step(&s, &Action::Motion { motion: *m }, Role::Follower);
                    prop_assert!(r.success);
                    s = next;
                }
                prop_assert!(observe(&s, Role::Follower, None, &cfg).visible.iter().any(|v| v.object_id == target));
            }
            Err(PlanError::Unreachable(_)) => prop_assert_eq!(oracle, None),
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}

#[test]
fn two_forks_two_pickups_two_places() {
    let lib = TaskLibrary::shipped();
    let (w, _) = forks_world();
    let sc = scenario("Put All X On Y", &["Fork", "in", "Sink"], w);
    let mut c = RuleCommander::new(CommanderConfig::default());
    let mut f = RuleFollower::new();
    let out = run_tatc_episode(&sc, &lib, &mut c, &mut f, &EpisodeLimits::default(), &Simulator::default()).unwrap();
    assert!(out.success);
    let count = |v: Verb| {
        out.session
            .follower_env_actions()
            .filter(|r| r.success && matches!(&r.action, Action::Interact { verb, .. } if *verb == v))
            .count()
    };
    assert_eq!(count(Verb::Pickup), 2);
    assert_eq!(count(Verb::Place), 2);
}

/// World after each action of a session.
fn states(s: &Session) -> Vec<WorldState> {
    let sim = Simulator::new(s.sim_config.clone());
    let mut w = s.initial_state.clone();
    let mut out = vec![w.clone()];
    for r in &s.actions {
        w = sim.step(&w, &r.action, r.agent).0;
        out.push(w.clone());
    }
    out
}

#[test]
fn coffee_is_made_in_a_clean_mug() {
    let lib = TaskLibrary::shipped();
    let g = lib.ground("Make Coffee", &[]).unwrap();
    let plans: Vec<Floorplan> = Floorplan::builtin_all().into_iter().filter(|p| p.floorplan_id.starts_with("kitchen")).collect();
    for seed in 0..200u64 {
        let Ok(sc) = generate_scenario(&g, &plans[seed as usize % plans.len()], seed, &lib) else { continue };
        let mut c = RuleCommander::new(CommanderConfig::default());
        let mut f = RuleFollower::new();
        let out = run_tatc_episode(&sc, &lib, &mut c, &mut f, &EpisodeLimits::default(), &Simulator::default()).unwrap();
        assert!(out.success, "seed {seed}");
        assert!(out.session.actions.iter().any(|r| r.action == Action::ProgressCheck));
        let snaps = states(&out.session);
        let last = snaps.last().unwrap();
        let mug = last
            .objects_of_type("Mug")
            .find(|m| m.get(Property::IsFilledWithCoffee) == Some(&PropValue::Int(1)))
            .map(|m| m.object_id.clone())
            .unwrap();
        if sc.initial_state.object(&mug).unwrap().get(Property::IsDirty) != Some(&PropValue::Int(1)) {
            continue;
        }
        let first = |p: Property, v: i64| snaps.iter().position(|s| s.object(&mug).unwrap().get(p) == Some(&PropValue::Int(v))).unwrap();
        assert!(first(Property::IsDirty, 0) < first(Property::IsFilledWithCoffee, 1));
        return;
    }
    panic!("no scenario with a dirty mug");
}

#[test]
fn unsupported_keys_are_skipped() {
    let mut defs: Vec<_> = TaskLibrary::shipped().definitions().cloned().collect();
    defs.push(
        parse_task_definition(
            r#"{"task_id": 900, "task_name": "Run Tap", "task_nparams": 0, "task_anchor_object": null, "desc": "Run the tap.",
                "components": {"tap": {"determiner": "a", "primary_condition": "objectType", "instance_shareable": false,
                "conditions": {"objectType": "Faucet", "isToggled": 1}, "condition_failure_descs": {}}}, "relations": []}"#,
        )
        .unwrap(),
    );
    let lib = TaskLibrary::from_definitions(defs, ClassHierarchy::builtin()).unwrap();
    let mut w = world(&KITCHEN, (3, 4), Heading::N);
    fixture(&mut w, "Sink", 2, 1);
    fixture(&mut w, "Faucet", 3, 1);
    let sc = scenario("Run Tap", &[], w);
    let mut c = RuleCommander::new(CommanderConfig::default());
    let mut f = RuleFollower::new();
    let out = run_tatc_episode(&sc, &lib, &mut c, &mut f, &EpisodeLimits::default(), &Simulator::default()).unwrap();
    assert!(!out.success);
    assert_eq!(out.halt, HaltReason::CommanderStop);
    assert_eq!(out.session.actions.iter().filter(|r| r.action.is_interaction()).count(), 0);
    assert_eq!(c.state.current_step, "no_supported_key");
}

fn sweep_sessions(compat: bool, per_task: usize) -> Vec<(Session, bool)> {
    let lib = TaskLibrary::shipped();
    let plans = Floorplan::builtin_all();
    let mut out = Vec::new();
    for t in BENCHMARK_TASKS {
        let g = lib.ground(t, &fuzz::sample_params(t)[0]).unwrap();
        let mut n = 0;
        for seed in 0..200u64 {
            if n == per_task {
                break;
            }
            let Ok(sc) = generate_scenario(&g, &plans[seed as usize % plans.len()], seed, &lib) else { continue };
            let mut c = RuleCommander::new(CommanderConfig {
                legacy_compat: compat,
                ..CommanderConfig::default()
            });
            let mut f = RuleFollower::new();
            let o = run_tatc_episode(&sc, &lib, &mut c, &mut f, &EpisodeLimits::default(), &Simulator::default()).unwrap();
            out.push((o.session, o.success));
            n += 1;
        }
    }
    out
}

#[test]
fn commander_utterances_always_parse() {
    for (s, _) in sweep_sessions(false, 3).into_iter().chain(sweep_sessions(true, 2)) {
        for r in s.actions.iter().filter(|r| r.agent == Role::Commander) {
            if let Action::Utterance { text } = &r.action {
                let toks = tokens::parse(text).unwrap_or_else(|e| panic!("{}: {e}", s.session_id));
                assert!(!toks.is_empty());
                assert_eq!(tokens::render(&toks), *text);
            }
        }
    }
}

#[test]
fn placement_progress_never_regresses() {
    let lib = TaskLibrary::shipped();
    let plans = Floorplan::builtin_all();
    for params in fuzz::sample_params("Put All X On Y").into_iter().chain(fuzz::sample_params("Put All X In One Y")) {
        for task in ["Put All X On Y", "Put All X In One Y"] {
            let Ok(g) = lib.ground(task, &params) else { continue };
            let tree = TaskTree::build(&g, &lib).unwrap();
            for seed in 0..6u64 {
                let Ok(sc) = generate_scenario(&g, &plans[(seed as usize * 5) % plans.len()], seed, &lib) else { continue };
                let mut c = RuleCommander::new(CommanderConfig::default());
                let mut f = RuleFollower::new();
                let o = run_tatc_episode(&sc, &lib, &mut c, &mut f, &EpisodeLimits::default(), &Simulator::default()).unwrap();
                let snaps = states(&o.session);
                let open: Vec<usize> = o
                    .session
                    .actions
                    .iter()
                    .enumerate()
                    .filter(|(_, r)| r.action == Action::ProgressCheck)
                    .map(|(i, _)| tree.report(&snaps[i]).problem_keys().count())
                    .collect();
                assert!(open.windows(2).all(|p| p[1] <= p[0]), "{task} {params:?} seed {seed}: {open:?}");
            }
        }
    }
}

/// Random legal-looking actions, sometimes chatting.
struct Wanderer(u64);

impl FollowerAgent for Wanderer {
    fn act(&mut self, obs: &Observation, _heard: Option<&str>) -> Action {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        let k = (self.0 >> 33) as usize;
        match k % 5 {
            0 => Action::Utterance { text: HELP_UTTERANCE.into() },
            1 | 2 => Action::Motion {
                motion: [Motion::Forward, Motion::TurnLeft, Motion::TurnRight, Motion::Backward][k / 5 % 4],
            },
            _ => match obs.visible.get(k / 5 % obs.visible.len().max(1)) {
                Some(v) => Action::Interact {
                    verb: [Verb::Pickup, Verb::Place, Verb::Open, Verb::ToggleOn][k / 7 % 4],
                    target: teach_core::sim::ObjectSelector::Coordinate(v.x.unwrap(), v.y.unwrap()),
                },
                None => Action::Motion { motion: Motion::TurnRight },
            },
        }
    }
}

struct Chatty;

impl CommanderAgent for Chatty {
    fn act(&mut self, _world: &WorldState, _event: &CommanderEvent) -> Action {
        Action::Utterance { text: "Forward".into() }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn episodes_halt_within_limits(seed in any::<u64>(), max_steps in 1usize..300, max_fails in 1usize..40, rule in any::<bool>()) {
        let lib = TaskLibrary::shipped();
        let plans = Floorplan::builtin_all();
        let t = BENCHMARK_TASKS[seed as usize % BENCHMARK_TASKS.len()];
        let g = lib.ground(t, &fuzz::sample_params(t)[0]).unwrap();
        let sc = (0..plans.len()).find_map(|k| generate_scenario(&g, &plans[(seed as usize + k) % plans.len()], seed, &lib).ok()).unwrap();
        let limits = EpisodeLimits { max_steps, max_fails, ..EpisodeLimits::default() };
        let mut f = Wanderer(seed);
        let out = if rule {
            run_tatc_episode(&sc, &lib, &mut RuleCommander::new(CommanderConfig::default()), &mut f, &limits, &Simulator::default())
        } else {
            run_tatc_episode(&sc, &lib, &mut Chatty, &mut f, &limits, &Simulator::default())
        }
        .unwrap();
        let follower = out.session.actions.iter().filter(|r| r.agent == Role::Follower).count();
        let fails = out.session.follower_env_actions().filter(|r| !r.success).count();
        prop_assert!(follower <= max_steps);
        prop_assert!(fails <= max_fails);
        match out.halt {
            HaltReason::MaxSteps => prop_assert_eq!(follower, max_steps),
            HaltReason::MaxFails => prop_assert_eq!(fails, max_fails),
            _ => {}
        }
    }
}
