//! Dialogue states: sets of (domain, slot, value) triplets.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{contract_err, Result};
use crate::vocab::{DASH, SEMICOLON};

/// The rendering of the DONTCARE value as tokens.
pub const DONTCARE_TOKENS: [&str; 2] = ["dont", "care"];

/// A set of domain-slot-value triplets; only mentioned (non-empty) slots are
/// present, at most one triplet per domain-slot pair. Values are stored as
/// token lists and may not contain the reserved separators.
///
/// Iteration order is lexicographic by (domain, slot), which fixes the
/// serialization order of the previous-state sequence.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DialogueState {
    triplets: BTreeMap<(String, String), Vec<String>>,
}

impl DialogueState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, domain: &str, slot: &str, value_tokens: Vec<String>) -> Result<()> {
        if value_tokens.is_empty() {
            return Err(contract_err(
                "state_insert",
                alloc::format!("empty value for {domain}-{slot}; empty slots are omitted"),
            ));
        }
        if value_tokens.iter().any(|t| t == DASH || t == SEMICOLON) {
            return Err(contract_err(
                "state_insert",
                alloc::format!("value for {domain}-{slot} contains a reserved separator"),
            ));
        }
        self.triplets.insert((domain.to_string(), slot.to_string()), value_tokens);
        Ok(())
    }

    pub fn insert_dontcare(&mut self, domain: &str, slot: &str) {
        self.triplets.insert(
            (domain.to_string(), slot.to_string()),
            DONTCARE_TOKENS.iter().map(|s| s.to_string()).collect(),
        );
    }

    pub fn get(&self, domain: &str, slot: &str) -> Option<&[String]> {
        self.triplets
            .get(&(domain.to_string(), slot.to_string()))
            .map(|v| v.as_slice())
    }

    pub fn is_dontcare(&self, domain: &str, slot: &str) -> bool {
        self.get(domain, slot).is_some_and(|v| v == DONTCARE_TOKENS)
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    /// Triplets in (domain, slot) order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &[String])> {
        self.triplets
            .iter()
            .map(|((d, s), v)| (d.as_str(), s.as_str(), v.as_slice()))
    }
}

pub fn value_is_dontcare(tokens: &[String]) -> bool {
    tokens == DONTCARE_TOKENS
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_and_order() {
        let mut b = DialogueState::new();
        b.insert("hotel", "price range", alloc::vec!["expensive".to_string()]).unwrap();
        b.insert("attraction", "area", alloc::vec!["centre".to_string()]).unwrap();
        let order: Vec<_> = b.iter().map(|(d, s, _)| (d.to_string(), s.to_string())).collect();
        assert_eq!(
            order,
            alloc::vec![
                ("attraction".to_string(), "area".to_string()),
                ("hotel".to_string(), "price range".to_string()),
            ]
        );
    }

    #[test]
    fn rejects_empty_and_reserved_values() {
        let mut b = DialogueState::new();
        assert!(b.insert("hotel", "area", alloc::vec![]).is_err());
        assert!(b.insert("hotel", "area", alloc::vec!["-".to_string()]).is_err());
        assert!(b.insert("hotel", "area", alloc::vec![";".to_string()]).is_err());
    }

    #[test]
    fn dontcare_rendering() {
        let mut b = DialogueState::new();
        b.insert_dontcare("hotel", "parking");
        assert_eq!(b.get("hotel", "parking").unwrap(), &["dont", "care"]);
        assert!(b.is_dontcare("hotel", "parking"));
    }

    #[test]
    fn one_triplet_per_pair() {
        let mut b = DialogueState::new();
        b.insert("hotel", "area", alloc::vec!["north".to_string()]).unwrap();
        b.insert("hotel", "area", alloc::vec!["south".to_string()]).unwrap();
        assert_eq!(b.len(), 1);
        assert_eq!(b.get("hotel", "area").unwrap(), &["south"]);
    }
}
