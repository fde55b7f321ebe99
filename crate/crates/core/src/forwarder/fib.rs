use std::collections::{BTreeMap, BTreeSet};

use crate::name::{longest_prefix_match, Name};

use super::FaceId;

/// Prefix to next-hop faces; at most one entry per prefix.
#[derive(Debug, Default, Clone)]
pub struct Fib {
    entries: BTreeMap<Name, BTreeSet<FaceId>>,
}

impl Fib {
    pub fn add(&mut self, prefix: Name, face: FaceId) {
        self.entries.entry(prefix).or_default().insert(face);
    }

    pub fn lookup(&self, name: &Name) -> Option<&BTreeSet<FaceId>> {
        longest_prefix_match(self.entries.iter(), name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longest_match_wins() {
        let mut fib = Fib::default();
        fib.add(Name::empty(), 1);
        fib.add(Name::parse("/a").unwrap(), 2);
        fib.add(Name::parse("/a").unwrap(), 3);
        assert_eq!(fib.len(), 1 + 1);
        let hit = fib.lookup(&Name::parse("/a/b").unwrap()).unwrap();
        assert_eq!(hit.iter().copied().collect::<Vec<_>>(), vec![2, 3]);
        let hit = fib.lookup(&Name::parse("/z").unwrap()).unwrap();
        assert_eq!(hit.iter().copied().collect::<Vec<_>>(), vec![1]);
    }
}
