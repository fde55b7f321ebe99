//! Hierarchical names.
//!
//! A [`Name`] is an ordered list of non-empty byte components. The textual
//! form is `/a/b/c`; the empty name renders as `/`. Components containing `/`
//! cannot be expressed textually and are rejected rather than escaped.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NameError {
    #[error("name must start with '/': {0:?}")]
    MissingLeadingSlash(String),
    #[error("empty component at position {position} in {text:?}")]
    EmptyComponent { text: String, position: usize },
    #[error("component contains the separator '/'")]
    SeparatorInComponent,
    #[error("component is not valid UTF-8")]
    NotUtf8,
}

#[derive(Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Name {
    components: Vec<Vec<u8>>,
}

impl Name {
    pub fn empty() -> Self {
        Self::default()
    }

    /// Builds a name from raw components, rejecting empty ones.
    pub fn from_components<I, C>(components: I) -> Result<Self, NameError>
    where
        I: IntoIterator<Item = C>,
        C: Into<Vec<u8>>,
    {
        let mut name = Name::empty();
        for c in components {
            name.try_push(c)?;
        }
        Ok(name)
    }

    pub fn parse(text: &str) -> Result<Self, NameError> {
        let rest = text
            .strip_prefix('/')
            .ok_or_else(|| NameError::MissingLeadingSlash(text.to_string()))?;
        if rest.is_empty() {
            return Ok(Name::empty());
        }
        let mut components = Vec::new();
        for (position, part) in rest.split('/').enumerate() {
            if part.is_empty() {
                return Err(NameError::EmptyComponent {
                    text: text.to_string(),
                    position,
                });
            }
            components.push(part.as_bytes().to_vec());
        }
        Ok(Name { components })
    }

    pub fn try_push(&mut self, component: impl Into<Vec<u8>>) -> Result<(), NameError> {
        let component = component.into();
        if component.is_empty() {
            return Err(NameError::EmptyComponent {
                text: self.to_string(),
                position: self.components.len(),
            });
        }
        if component.contains(&b'/') {
            return Err(NameError::SeparatorInComponent);
        }
        self.components.push(component);
        Ok(())
    }

    /// Appends a component and returns the extended name.
    ///
    /// Panics if the component is empty or contains `/`; use [`Name::try_push`]
    /// for untrusted input.
    pub fn child(&self, component: impl Into<Vec<u8>>) -> Name {
        let mut out = self.clone();
        out.try_push(component).expect("invalid name component");
        out
    }

    /// Appends the decimal rendering of `n`.
    pub fn child_num(&self, n: u64) -> Name {
        self.child(n.to_string())
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[Vec<u8>] {
        &self.components
    }

    pub fn get(&self, i: usize) -> Option<&[u8]> {
        self.components.get(i).map(Vec::as_slice)
    }

    pub fn last(&self) -> Option<&[u8]> {
        self.components.last().map(Vec::as_slice)
    }

    /// Component `i` interpreted as a decimal number.
    pub fn get_num(&self, i: usize) -> Option<u64> {
        let c = self.get(i)?;
        std::str::from_utf8(c).ok()?.parse().ok()
    }

    pub fn prefix(&self, n: usize) -> Name {
        Name {
            components: self.components[..n.min(self.len())].to_vec(),
        }
    }

    pub fn is_prefix_of(&self, other: &Name) -> bool {
        self.len() <= other.len()
            && self
                .components
                .iter()
                .zip(&other.components)
                .all(|(a, b)| a == b)
    }

    /// Sum of component byte lengths.
    pub fn component_bytes(&self) -> usize {
        self.components.iter().map(Vec::len).sum()
    }
}

/// Returns the entry whose name is the longest prefix of `name`.
pub fn longest_prefix_match<'a, T, I>(entries: I, name: &Name) -> Option<&'a T>
where
    I: IntoIterator<Item = (&'a Name, &'a T)>,
{
    entries
        .into_iter()
        .filter(|(prefix, _)| prefix.is_prefix_of(name))
        .max_by_key(|(prefix, _)| prefix.len())
        .map(|(_, v)| v)
}

impl fmt::Display for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.components.is_empty() {
            return f.write_str("/");
        }
        for c in &self.components {
            f.write_str("/")?;
            f.write_str(&String::from_utf8_lossy(c))?;
        }
        Ok(())
    }
}

impl fmt::Debug for Name {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Name({self})")
    }
}

impl FromStr for Name {
    type Err = NameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Name::parse(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_collection_packet_name() {
        let n = Name::parse("/damaged-bridge-1533783192/bridge-picture/0").unwrap();
        assert_eq!(n.len(), 3);
        assert_eq!(n.get(1), Some(&b"bridge-picture"[..]));
        assert_eq!(n.get_num(2), Some(0));
    }

    #[test]
    fn root_is_empty_name() {
        let n = Name::parse("/").unwrap();
        assert!(n.is_empty());
        assert_eq!(n.to_string(), "/");
    }

    #[test]
    fn rejects_empty_component_and_missing_slash() {
        assert!(matches!(
            Name::parse("/a//b"),
            Err(NameError::EmptyComponent { position: 1, .. })
        ));
        assert!(matches!(Name::parse("/a/"), Err(NameError::EmptyComponent { .. })));
        assert!(matches!(Name::parse("a/b"), Err(NameError::MissingLeadingSlash(_))));
        assert!(matches!(Name::parse(""), Err(NameError::MissingLeadingSlash(_))));
    }

    #[test]
    fn push_rejects_separator() {
        let mut n = Name::empty();
        assert_eq!(n.try_push("a/b"), Err(NameError::SeparatorInComponent));
    }

    #[test]
    fn prefix_relation() {
        let ab = Name::parse("/a/b").unwrap();
        let abc = Name::parse("/a/b/c").unwrap();
        let a = Name::parse("/a").unwrap();
        assert!(ab.is_prefix_of(&abc));
        assert!(!ab.is_prefix_of(&a));
        assert!(Name::empty().is_prefix_of(&abc));
        assert!(Name::empty().is_prefix_of(&Name::empty()));
    }

    fn arb_name() -> impl Strategy<Value = Name> {
        prop::collection::vec("[a-z0-9-]{1,6}", 0..5)
            .prop_map(|cs| Name::from_components(cs).unwrap())
    }

    proptest! {
        #[test]
        fn textual_round_trip(n in arb_name()) {
            prop_assert_eq!(Name::parse(&n.to_string()).unwrap(), n);
        }

        #[test]
        fn prefix_is_reflexive_and_transitive(a in arb_name(), extra1 in arb_name(), extra2 in arb_name()) {
            let mut b = a.clone();
            for c in extra1.components() { b = b.child(c.clone()); }
            let mut c = b.clone();
            for x in extra2.components() { c = c.child(x.clone()); }
            prop_assert!(a.is_prefix_of(&a));
            prop_assert!(a.is_prefix_of(&b) && b.is_prefix_of(&c));
            prop_assert!(a.is_prefix_of(&c));
        }

        #[test]
        fn lpm_picks_longest_matching_entry(
            table in prop::collection::vec(arb_name(), 0..12),
            query in arb_name(),
        ) {
            let entries: Vec<(Name, usize)> = table.iter().cloned().zip(0..).collect();
            let got = longest_prefix_match(entries.iter().map(|(n, v)| (n, v)), &query);
            // brute force: maximal component count among matching prefixes
            let best = entries.iter().filter(|(n, _)| n.is_prefix_of(&query)).map(|(n, _)| n.len()).max();
            match (got, best) {
                (None, None) => {}
                (Some(idx), Some(len)) => {
                    let (n, _) = &entries[*idx];
                    prop_assert!(n.is_prefix_of(&query));
                    prop_assert_eq!(n.len(), len);
                }
                _ => prop_assert!(false, "mismatch"),
            }
        }
    }
}
