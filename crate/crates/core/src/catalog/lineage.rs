use std::collections::{HashMap, HashSet, VecDeque};

use crate::store::EntityId;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LineageEdge {
    pub child: EntityId,
    pub parents: Vec<EntityId>,
    pub transform: String,
}

/// An ancestor reached from some entity, labelled with the transform of the
/// edge that names it as a direct parent.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Ancestor {
    pub id: EntityId,
    pub transform: String,
    pub depth: usize,
}

/// Acyclic parent graph.
#[derive(Debug, Default)]
pub(crate) struct LineageGraph {
    parents: HashMap<EntityId, Vec<(EntityId, String)>>,
}

impl LineageGraph {
    /// Would adding `parents -> child` close a cycle?
    pub fn creates_cycle(&self, child: EntityId, parents: &[EntityId]) -> bool {
        if parents.contains(&child) {
            return true;
        }
        // A cycle appears iff `child` is already an ancestor of some parent.
        let mut seen = HashSet::new();
        let mut stack: Vec<EntityId> = parents.to_vec();
        while let Some(node) = stack.pop() {
            if node == child {
                return true;
            }
            if !seen.insert(node) {
                continue;
            }
            if let Some(ps) = self.parents.get(&node) {
                stack.extend(ps.iter().map(|(p, _)| *p));
            }
        }
        false
    }

    pub fn insert(&mut self, edge: &LineageEdge) {
        let entry = self.parents.entry(edge.child).or_default();
        for &p in &edge.parents {
            if !entry.iter().any(|(q, t)| *q == p && *t == edge.transform) {
                entry.push((p, edge.transform.clone()));
            }
        }
    }

    /// Breadth-first transitive closure of the parent relation.
    pub fn ancestors(&self, id: EntityId) -> Vec<Ancestor> {
        let mut out = Vec::new();
        let mut emitted = HashSet::new();
        let mut expanded = HashSet::from([id]);
        let mut queue = VecDeque::from([(id, 0usize)]);
        while let Some((node, depth)) = queue.pop_front() {
            for (parent, transform) in self.parents.get(&node).into_iter().flatten() {
                if emitted.insert((*parent, transform.clone())) {
                    out.push(Ancestor {
                        id: *parent,
                        transform: transform.clone(),
                        depth: depth + 1,
                    });
                }
                if expanded.insert(*parent) {
                    queue.push_back((*parent, depth + 1));
                }
            }
        }
        out
    }
}
