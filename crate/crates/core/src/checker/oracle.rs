//! Exhaustive reference checker used to cross-validate [`super::TaskTree`].
//!
//! Deliberately naive: every cardinality and relation question is answered by
//! enumerating object subsets.

use super::CheckError;
use crate::tdl::{AtomicComponent, Component, Determiner, GroundTask, TailDeterminer, TaskDefinition, TaskLibrary};
use crate::world::{matches_condition, ObjectInstance, Property, WorldState};

pub const ORACLE_MAX_OBJECTS: usize = 10;

/// Required instance count; `None` means every candidate.
type Need = Option<u64>;

fn det_need(d: &Determiner) -> Need {
    match d {
        Determiner::A => Some(1),
        Determiner::Count(n) => Some(*n as u64),
        _ => None,
    }
}

fn times(outer: Need, inner: Need) -> Need {
    match (outer, inner) {
        (Some(o), Some(i)) => Some(o * i),
        _ => None,
    }
}

struct Oracle<'a> {
    world: &'a WorldState,
    lib: &'a TaskLibrary,
    objects: Vec<&'a ObjectInstance>,
}

impl Oracle<'_> {
    fn holds(&self, obj: &ObjectInstance, comp: &AtomicComponent, only_primary: bool) -> bool {
        comp.conditions
            .iter()
            .filter(|(p, _)| !only_primary || **p == comp.primary_condition)
            .all(|(p, v)| matches_condition(self.world, obj, p.name(), v, self.lib.hierarchy()).unwrap_or(false))
    }

    fn members(&self, mask: u32) -> impl Iterator<Item = usize> + '_ {
        (0..self.objects.len()).filter(move |i| mask & (1 << i) != 0)
    }

    /// Is some subset of the right size made only of objects satisfying `comp`?
    fn component_ok(&self, comp: &AtomicComponent, need: Need) -> bool {
        let full = 1u32 << self.objects.len();
        match need {
            Some(n) => (0..full).any(|mask| {
                mask.count_ones() as u64 == n && self.members(mask).all(|i| self.holds(self.objects[i], comp, false))
            }),
            None => {
                let cands: Vec<usize> = (0..self.objects.len())
                    .filter(|i| self.holds(self.objects[*i], comp, true))
                    .collect();
                !cands.is_empty() && cands.iter().all(|i| self.holds(self.objects[*i], comp, false))
            }
        }
    }

    fn inside(&self, child: usize, container: usize) -> bool {
        let target = &self.objects[container].object_id;
        let mut cur = self.objects[child].get(Property::ParentReceptacles).and_then(|v| v.as_str());
        let mut hops = 0;
        while let Some(p) = cur {
            if p == target {
                return true;
            }
            hops += 1;
            if hops > self.objects.len() {
                return false;
            }
            cur = self.world.object(p).and_then(|o| o.get(Property::ParentReceptacles)).and_then(|v| v.as_str());
        }
        false
    }

    fn anchor(&self, def: &TaskDefinition, key: &str) -> Result<AtomicComponent, CheckError> {
        match def.components.get(key) {
            Some(Component::Atomic(a)) => Ok(a.clone()),
            Some(Component::TaskRef(r)) => {
                let sub = self.lib.ground(&r.task_name, &r.task_params)?;
                let anchor = sub.def.task_anchor_object.clone().ok_or_else(|| CheckError::UnresolvableAnchor {
                    task: def.task_name.clone(),
                    entity: key.to_string(),
                })?;
                self.anchor(&sub.def, &anchor)
            }
            None => Err(CheckError::UnresolvableAnchor {
                task: def.task_name.clone(),
                entity: key.to_string(),
            }),
        }
    }

    fn task_ok(&self, def: &TaskDefinition, mult: Need) -> Result<bool, CheckError> {
        for comp in def.components.values() {
            let ok = match comp {
                Component::Atomic(a) => {
                    let need = if a.instance_shareable {
                        det_need(&a.determiner).map(|_| 1)
                    } else if mult == Some(1) {
                        det_need(&a.determiner)
                    } else {
                        times(mult, det_need(&a.determiner))
                    };
                    self.component_ok(a, need)
                }
                Component::TaskRef(r) => {
                    let sub = self.lib.ground(&r.task_name, &r.task_params)?;
                    let m = if mult == Some(1) { det_need(&r.determiner) } else { times(mult, det_need(&r.determiner)) };
                    self.task_ok(&sub.def, m)?
                }
            };
            if !ok {
                return Ok(false);
            }
        }
        for rel in &def.relations {
            let mut heads = Vec::new();
            for (key, d) in rel.head_entity_list.iter().zip(&rel.head_determiner_list) {
                let comp = self.anchor(def, key)?;
                let sat: Vec<usize> = (0..self.objects.len())
                    .filter(|i| self.holds(self.objects[*i], &comp, false))
                    .collect();
                let need = if mult == Some(1) { det_need(d) } else { times(mult, det_need(d)) };
                heads.push((sat, need));
            }
            let mut tails = Vec::new();
            for (key, d) in rel.tail_entity_list.iter().zip(&rel.tail_determiner_list) {
                let comp = self.anchor(def, key)?;
                let sat: Vec<usize> = (0..self.objects.len())
                    .filter(|i| self.holds(self.objects[*i], &comp, false))
                    .collect();
                tails.push((sat, *d));
            }
            if !self.relation_ok(&heads, &tails, &mut Vec::new()) {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// Try every choice of shared container for the "the" tails, then every
    /// head subset of the required size.
    fn relation_ok(&self, heads: &[(Vec<usize>, Need)], tails: &[(Vec<usize>, TailDeterminer)], chosen: &mut Vec<Option<usize>>) -> bool {
        if chosen.len() < tails.len() {
            let (sat, d) = &tails[chosen.len()];
            if *d == TailDeterminer::A {
                chosen.push(None);
                let ok = !sat.is_empty() && self.relation_ok(heads, tails, chosen);
                chosen.pop();
                return ok;
            }
            for t in sat {
                chosen.push(Some(*t));
                let ok = self.relation_ok(heads, tails, chosen);
                chosen.pop();
                if ok {
                    return true;
                }
            }
            return false;
        }
        let placed = |x: usize| -> bool {
            tails.iter().zip(chosen.iter()).all(|((sat, _), c)| match c {
                Some(t) => self.inside(x, *t),
                None => sat.iter().any(|t| self.inside(x, *t)),
            })
        };
        heads.iter().all(|(sat, need)| match need {
            None => !sat.is_empty() && sat.iter().all(|x| placed(*x)),
            Some(n) => {
                let full = 1u32 << sat.len();
                (0..full).any(|mask| {
                    mask.count_ones() as u64 == *n
                        && (0..sat.len()).filter(|i| mask & (1 << i) != 0).all(|i| placed(sat[i]))
                })
            }
        })
    }
}

/// Brute-force satisfiability of `ground` in `world`, for worlds of at most
/// [`ORACLE_MAX_OBJECTS`] objects.
pub fn oracle_check(world: &WorldState, ground: &GroundTask, lib: &TaskLibrary) -> Result<bool, CheckError> {
    if world.objects.len() > ORACLE_MAX_OBJECTS {
        return Err(CheckError::TooLarge(world.objects.len()));
    }
    let oracle = Oracle {
        world,
        lib,
        objects: world.objects.values().collect(),
    };
    oracle.task_ok(&ground.def, Some(1))
}
