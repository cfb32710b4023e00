//! Update sets with clash bookkeeping.

use std::collections::{BTreeMap, BTreeSet};

use crate::machine::LocId;
use crate::value::Value;

/// Two different values produced for one location in the same step.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Clash {
    pub loc: LocId,
    pub first: Value,
    pub second: Value,
}

/// Updates of one step. Identical duplicates collapse; conflicting values
/// are remembered per location, so the set does not depend on the order
/// in which parallel rules were visited.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpdateSet {
    updates: BTreeMap<LocId, Value>,
    conflicts: BTreeMap<LocId, BTreeSet<Value>>,
}

impl UpdateSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, loc: LocId, value: Value) {
        match self.updates.get(&loc) {
            None => {
                self.updates.insert(loc, value);
            }
            Some(prev) if *prev == value => {}
            Some(prev) => {
                let entry = self.conflicts.entry(loc).or_default();
                entry.insert(*prev);
                entry.insert(value);
            }
        }
    }

    pub fn is_consistent(&self) -> bool {
        self.conflicts.is_empty()
    }

    /// The clash on the lowest location, as (location, two distinct values).
    pub fn clash(&self) -> Option<Clash> {
        let (loc, values) = self.conflicts.iter().next()?;
        let first = self.updates[loc];
        let second = *values.iter().find(|v| **v != first)?;
        Some(Clash {
            loc: *loc,
            first,
            second,
        })
    }

    /// Locations with more than one value.
    pub fn clashing_locations(&self) -> impl Iterator<Item = LocId> + '_ {
        self.conflicts.keys().copied()
    }

    pub fn get(&self, loc: LocId) -> Option<Value> {
        self.updates.get(&loc).copied()
    }

    pub fn len(&self) -> usize {
        self.updates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.updates.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (LocId, Value)> + '_ {
        self.updates.iter().map(|(l, v)| (*l, *v))
    }

    /// Whether two sets agree on consistency, updated locations, and, for
    /// consistent locations, values. Clashing values may differ in which
    /// one was seen first.
    pub fn equivalent(&self, other: &UpdateSet) -> bool {
        if self.conflicts.keys().ne(other.conflicts.keys()) {
            return false;
        }
        if self.updates.keys().ne(other.updates.keys()) {
            return false;
        }
        self.updates.iter().all(|(l, v)| {
            if let Some(vs) = self.conflicts.get(l) {
                let mut a = vs.clone();
                a.insert(*v);
                let mut b = other.conflicts[l].clone();
                b.insert(other.updates[l]);
                a == b
            } else {
                other.updates[l] == *v
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_collapse_and_conflicts_clash() {
        let mut u = UpdateSet::new();
        u.insert(LocId(0), Value::Bool(true));
        u.insert(LocId(0), Value::Bool(true));
        assert!(u.is_consistent());
        assert_eq!(u.len(), 1);
        u.insert(LocId(0), Value::Bool(false));
        let c = u.clash().unwrap();
        assert_eq!((c.loc, c.first, c.second), (LocId(0), Value::Bool(true), Value::Bool(false)));
    }
}
