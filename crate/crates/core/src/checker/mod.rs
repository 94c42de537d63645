//! Task completion checking over world snapshots and Progress Check reports.

mod oracle;
mod report;

use std::collections::BTreeSet;

use crate::tdl::{
    AtomicComponent, Component, Determiner, GroundTask, LibraryError, Relation, TailDeterminer, TaskDefinition,
    TaskLibrary,
};
use crate::world::{matches_property, ClassHierarchy, Property, WorldState};

pub use oracle::{oracle_check, ORACLE_MAX_OBJECTS};
pub use report::{ProblemKey, ProgressReport, Step, Subgoal};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CheckError {
    #[error(transparent)]
    Library(#[from] LibraryError),
    #[error("task `{task}`: entity `{entity}` has no anchor object to relate")]
    UnresolvableAnchor { task: String, entity: String },
    #[error("task `{task}`: component `{component}` still carries an unsubstituted determiner")]
    UnsubstitutedSlot { task: String, component: String },
    #[error("world has {0} objects; the exhaustive oracle handles at most {ORACLE_MAX_OBJECTS}")]
    TooLarge(usize),
}

/// Combine an outer task determiner with an inner component determiner.
///
/// `a` counts as 1. Shareable components need a single instance whatever
/// the outer count; `all` is never multiplied.
pub fn cascade_determiner(outer: &Determiner, inner: &Determiner, shareable: bool) -> Determiner {
    if shareable {
        return match inner {
            Determiner::All => Determiner::All,
            _ => Determiner::A,
        };
    }
    if *outer == Determiner::A {
        return inner.clone();
    }
    match (outer.count(), inner.count()) {
        (Some(o), Some(i)) => Determiner::Count(o.saturating_mul(i)),
        _ => Determiner::All,
    }
}

/// Objects matching a component's primary condition alone, ordered by id.
pub fn find_candidates(world: &WorldState, comp: &AtomicComponent, h: &ClassHierarchy) -> Vec<String> {
    let desired = &comp.conditions[&comp.primary_condition];
    world
        .objects
        .values()
        .filter(|o| matches_property(world, o, comp.primary_condition, desired, h))
        .map(|o| o.object_id.clone())
        .collect()
}

fn satisfies_all(world: &WorldState, id: &str, comp: &AtomicComponent, h: &ClassHierarchy) -> bool {
    let obj = &world.objects[id];
    comp.conditions
        .iter()
        .all(|(p, v)| matches_property(world, obj, *p, v, h))
}

/// An atomic component placed in the expanded task tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Slot {
    pub node: usize,
    pub key: String,
    pub comp: AtomicComponent,
    /// Determiner after cascading through enclosing task references.
    pub det: Determiner,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Entry {
    Atomic(usize),
    Task(usize),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct ResolvedRelation {
    pub rel: Relation,
    pub heads: Vec<(usize, Determiner)>,
    pub tails: Vec<(usize, TailDeterminer)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Node {
    pub def: TaskDefinition,
    pub mult: Determiner,
    entries: Vec<(String, Entry)>,
    pub relations: Vec<ResolvedRelation>,
}

/// A ground task with every task reference expanded, ready to be evaluated
/// against many worlds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskTree {
    pub(crate) nodes: Vec<Node>,
    pub slots: Vec<Slot>,
    hierarchy: ClassHierarchy,
}

impl TaskTree {
    pub fn build(ground: &GroundTask, lib: &TaskLibrary) -> Result<Self, CheckError> {
        let mut tree = TaskTree {
            nodes: Vec::new(),
            slots: Vec::new(),
            hierarchy: lib.hierarchy().clone(),
        };
        tree.add_node(ground.def.clone(), Determiner::A, lib)?;
        Ok(tree)
    }

    pub fn root(&self) -> &TaskDefinition {
        &self.nodes[0].def
    }

    pub fn hierarchy(&self) -> &ClassHierarchy {
        &self.hierarchy
    }

    fn add_node(&mut self, def: TaskDefinition, mult: Determiner, lib: &TaskLibrary) -> Result<usize, CheckError> {
        let idx = self.nodes.len();
        self.nodes.push(Node {
            def: def.clone(),
            mult: mult.clone(),
            entries: Vec::new(),
            relations: Vec::new(),
        });
        let mut entries = Vec::new();
        for (key, comp) in &def.components {
            if matches!(comp.determiner(), Determiner::Slot(_)) {
                return Err(CheckError::UnsubstitutedSlot {
                    task: def.task_name.clone(),
                    component: key.clone(),
                });
            }
            match comp {
                Component::Atomic(a) => {
                    let det = cascade_determiner(&mult, &a.determiner, a.instance_shareable);
                    self.slots.push(Slot {
                        node: idx,
                        key: key.clone(),
                        comp: a.clone(),
                        det,
                    });
                    entries.push((key.clone(), Entry::Atomic(self.slots.len() - 1)));
                }
                Component::TaskRef(r) => {
                    let sub = lib.ground(&r.task_name, &r.task_params)?;
                    let child_mult = cascade_determiner(&mult, &r.determiner, false);
                    let child = self.add_node(sub.def, child_mult, lib)?;
                    entries.push((key.clone(), Entry::Task(child)));
                }
            }
        }
        self.nodes[idx].entries = entries;
        let mut relations = Vec::new();
        for rel in &def.relations {
            let mut heads = Vec::new();
            for (e, d) in rel.head_entity_list.iter().zip(&rel.head_determiner_list) {
                heads.push((self.resolve_anchor(idx, e)?, cascade_determiner(&mult, d, false)));
            }
            let mut tails = Vec::new();
            for (e, d) in rel.tail_entity_list.iter().zip(&rel.tail_determiner_list) {
                tails.push((self.resolve_anchor(idx, e)?, *d));
            }
            relations.push(ResolvedRelation {
                rel: rel.clone(),
                heads,
                tails,
            });
        }
        self.nodes[idx].relations = relations;
        Ok(idx)
    }

    /// Follow task references through their anchor objects to an atomic slot.
    fn resolve_anchor(&self, node: usize, key: &str) -> Result<usize, CheckError> {
        let n = &self.nodes[node];
        let unresolvable = || CheckError::UnresolvableAnchor {
            task: n.def.task_name.clone(),
            entity: key.to_string(),
        };
        let entry = n.entries.iter().find(|(k, _)| k == key).ok_or_else(unresolvable)?;
        match entry.1 {
            Entry::Atomic(s) => Ok(s),
            Entry::Task(child) => {
                let anchor = self.nodes[child].def.task_anchor_object.clone().ok_or_else(unresolvable)?;
                self.resolve_anchor(child, &anchor)
            }
        }
    }

    pub fn evaluate(&self, world: &WorldState) -> Evaluation {
        let slots: Vec<SlotEval> = self.slots.iter().map(|s| eval_slot(world, s, &self.hierarchy)).collect();
        let mut relations = vec![Vec::new(); self.nodes.len()];
        for (i, node) in self.nodes.iter().enumerate() {
            relations[i] = node.relations.iter().map(|r| eval_relation(world, r, &slots)).collect();
        }
        let mut node_success = vec![false; self.nodes.len()];
        // children always have larger indices than their parent
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            let entries_ok = node.entries.iter().all(|(_, e)| match e {
                Entry::Atomic(s) => slots[*s].satisfied,
                Entry::Task(c) => node_success[*c],
            });
            node_success[i] = entries_ok && relations[i].iter().all(|r: &RelationEval| r.satisfied);
        }
        Evaluation {
            success: node_success[0],
            slots,
            node_success,
            relations,
        }
    }

    /// Every (object, property) pair whose change bears on this task: objects
    /// among some component's candidates, properties among its conditions or
    /// relation properties.
    pub fn relevant_pairs(&self, world: &WorldState) -> BTreeSet<(String, Property)> {
        let rel_props: BTreeSet<Property> = self
            .nodes
            .iter()
            .flat_map(|n| n.relations.iter().map(|r| r.rel.property))
            .collect();
        let mut out = BTreeSet::new();
        for slot in &self.slots {
            for id in find_candidates(world, &slot.comp, &self.hierarchy) {
                for p in slot.comp.conditions.keys().chain(&rel_props) {
                    out.insert((id.clone(), *p));
                }
            }
        }
        out
    }

    pub(crate) fn node_entries(&self, node: usize) -> impl Iterator<Item = (&str, Option<usize>, Option<usize>)> {
        self.nodes[node].entries.iter().map(|(k, e)| match e {
            Entry::Atomic(s) => (k.as_str(), Some(*s), None),
            Entry::Task(c) => (k.as_str(), None, Some(*c)),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotEval {
    /// Objects matching the primary condition.
    pub candidates: Vec<String>,
    /// Candidates matching every condition.
    pub satisfying: Vec<String>,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationEval {
    pub satisfied: bool,
    /// Preferred container per tail entity, used to phrase fixes.
    pub chosen_tails: Vec<Option<String>>,
    /// (head index, object id) pairs that still need to be placed.
    pub deficits: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Evaluation {
    pub success: bool,
    pub slots: Vec<SlotEval>,
    pub node_success: Vec<bool>,
    pub relations: Vec<Vec<RelationEval>>,
}

fn eval_slot(world: &WorldState, slot: &Slot, h: &ClassHierarchy) -> SlotEval {
    let candidates = find_candidates(world, &slot.comp, h);
    let satisfying: Vec<String> = candidates
        .iter()
        .filter(|id| satisfies_all(world, id, &slot.comp, h))
        .cloned()
        .collect();
    let satisfied = match slot.det.count() {
        Some(n) => satisfying.len() >= n as usize,
        None => !candidates.is_empty() && satisfying.len() == candidates.len(),
    };
    SlotEval {
        candidates,
        satisfying,
        satisfied,
    }
}

fn required(det: &Determiner, available: usize) -> usize {
    match det.count() {
        Some(n) => n as usize,
        None => available.max(1),
    }
}

fn eval_relation(world: &WorldState, r: &ResolvedRelation, slots: &[SlotEval]) -> RelationEval {
    let ancestors = |id: &str| -> Vec<String> { world.ancestors(id) };
    let heads: Vec<(&[String], &Determiner)> = r
        .heads
        .iter()
        .map(|(s, d)| (slots[*s].satisfying.as_slice(), d))
        .collect();
    let head_anc: Vec<Vec<Vec<String>>> = heads
        .iter()
        .map(|(ids, _)| ids.iter().map(|id| ancestors(id)).collect())
        .collect();

    // Each "the" tail ranges over its satisfying objects; when there are none,
    // fall back to candidates so a fix can still be suggested.
    let mut options: Vec<Vec<String>> = Vec::new();
    let mut fallback = false;
    for (s, _) in &r.tails {
        let ev = &slots[*s];
        if ev.satisfying.is_empty() {
            fallback = true;
            options.push(ev.candidates.clone());
        } else {
            options.push(ev.satisfying.clone());
        }
    }
    let qualifies = |hi: usize, xi: usize, choice: &[Option<&String>]| -> bool {
        let anc = &head_anc[hi][xi];
        r.tails.iter().enumerate().all(|(j, (_, d))| match d {
            TailDeterminer::The => choice[j].is_some_and(|t| anc.contains(t)),
            TailDeterminer::A => anc.iter().any(|a| options[j].contains(a)),
        })
    };

    let mut best: Option<(bool, usize, usize, Vec<Option<String>>, Vec<Vec<bool>>)> = None;
    let mut choice: Vec<Option<&String>> = vec![None; r.tails.len()];
    let mut idx = vec![0usize; r.tails.len()];
    loop {
        for (j, (_, d)) in r.tails.iter().enumerate() {
            choice[j] = options[j].get(idx[j]);
            if *d == TailDeterminer::A {
                choice[j] = None;
            }
        }
        let quals: Vec<Vec<bool>> = heads
            .iter()
            .enumerate()
            .map(|(hi, (ids, _))| (0..ids.len()).map(|xi| qualifies(hi, xi, &choice)).collect())
            .collect();
        let mut ok = !fallback;
        let mut progress = 0;
        for (hi, (ids, det)) in heads.iter().enumerate() {
            let q = quals[hi].iter().filter(|b| **b).count();
            if det.count().is_none() && ids.is_empty() {
                ok = false;
            }
            let need = required(det, ids.len());
            if q < need {
                ok = false;
            }
            progress += q.min(need);
        }
        let chosen: Vec<Option<String>> = r
            .tails
            .iter()
            .enumerate()
            .map(|(j, (_, d))| match d {
                TailDeterminer::The => choice[j].cloned(),
                TailDeterminer::A => best_container(world, &options[j], &head_anc),
            })
            .collect();
        let crowd: usize = chosen
            .iter()
            .flatten()
            .map(|t| world.children(t).len())
            .sum();
        let better = match &best {
            None => true,
            Some((bok, bprog, bcrowd, bchosen, _)) => {
                (ok, progress, std::cmp::Reverse(crowd), std::cmp::Reverse(&chosen))
                    > (*bok, *bprog, std::cmp::Reverse(*bcrowd), std::cmp::Reverse(bchosen))
            }
        };
        if better {
            best = Some((ok, progress, crowd, chosen, quals));
        }
        // advance the odometer over "the" tails
        let mut j = 0;
        loop {
            if j == r.tails.len() {
                break;
            }
            if r.tails[j].1 == TailDeterminer::The && idx[j] + 1 < options[j].len() {
                idx[j] += 1;
                break;
            }
            idx[j] = 0;
            j += 1;
        }
        if j == r.tails.len() {
            break;
        }
    }

    let (satisfied, _, _, chosen_tails, quals) = best.expect("at least one combination is evaluated");
    let mut deficits = Vec::new();
    if !satisfied && chosen_tails.first().is_some_and(Option::is_some) {
        for (hi, (ids, det)) in heads.iter().enumerate() {
            let q = quals[hi].iter().filter(|b| **b).count();
            let need = required(det, ids.len());
            let missing = if det.count().is_none() { ids.len() - q } else { need.saturating_sub(q) };
            deficits.extend(
                ids.iter()
                    .zip(&quals[hi])
                    .filter(|(_, ok)| !**ok)
                    .take(missing)
                    .map(|(id, _)| (hi, id.clone())),
            );
        }
    }
    RelationEval {
        satisfied,
        chosen_tails,
        deficits,
    }
}

/// The container among `options` already holding the most head objects,
/// then the emptiest, then the smallest id.
fn best_container(world: &WorldState, options: &[String], head_anc: &[Vec<Vec<String>>]) -> Option<String> {
    options
        .iter()
        .max_by_key(|t| {
            let held = head_anc.iter().flatten().filter(|anc| anc.contains(t)).count();
            (held, std::cmp::Reverse(world.children(t).len()), std::cmp::Reverse((*t).clone()))
        })
        .cloned()
}

/// Evaluate a ground task and build its Progress Check report.
pub fn check_task(world: &WorldState, ground: &GroundTask, lib: &TaskLibrary) -> Result<ProgressReport, CheckError> {
    let tree = TaskTree::build(ground, lib)?;
    Ok(tree.report(world))
}

/// Check one containment relation given, per entity key, the objects bound
/// to it. Head determiners are taken as written.
pub fn check_relation(world: &WorldState, rel: &Relation, bindings: &Binding) -> Result<(bool, Vec<Step>), CheckError> {
    let empty = Vec::new();
    let get = |k: &String| bindings.get(k).unwrap_or(&empty).clone();
    let mut slots = Vec::new();
    let mut heads = Vec::new();
    let mut tails = Vec::new();
    for (k, d) in rel.head_entity_list.iter().zip(&rel.head_determiner_list) {
        let ids = get(k);
        slots.push(SlotEval {
            candidates: ids.clone(),
            satisfying: ids,
            satisfied: true,
        });
        heads.push((slots.len() - 1, d.clone()));
    }
    for (k, d) in rel.tail_entity_list.iter().zip(&rel.tail_determiner_list) {
        let ids = get(k);
        slots.push(SlotEval {
            candidates: ids.clone(),
            satisfying: ids,
            satisfied: true,
        });
        tails.push((slots.len() - 1, *d));
    }
    let resolved = ResolvedRelation {
        rel: rel.clone(),
        heads,
        tails,
    };
    let ev = eval_relation(world, &resolved, &slots);
    let steps = ev
        .deficits
        .iter()
        .map(|(_, id)| Step {
            success: 0,
            object_id: Some(id.clone()),
            object_type: world.object_type(id).unwrap_or("").to_string(),
            desc: rel.failure_desc.clone(),
        })
        .collect();
    Ok((ev.satisfied, steps))
}

/// Entity key to the objects bound to it.
pub type Binding = std::collections::BTreeMap<String, Vec<String>>;
