//! Tokenization and the token vocabulary.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{contract_err, Result};

pub const PAD: &str = "[PAD]";
pub const UNK: &str = "[UNK]";
pub const CLS: &str = "[CLS]";
pub const SEP: &str = "[SEP]";
pub const EOS: &str = "[EOS]";
pub const SEMICOLON: &str = ";";
pub const DASH: &str = "-";

/// Special tokens, in id order. They occupy ids `0..7` in every vocabulary.
pub const SPECIALS: [&str; 7] = [PAD, UNK, CLS, SEP, EOS, SEMICOLON, DASH];

/// Lowercase, detach sentence punctuation, split on whitespace.
/// Deterministic; produces no special tokens (ordinary text is lowercased,
/// bracketed specials are upper-case).
pub fn tokenize(text: &str) -> Vec<String> {
    let mut spaced = String::with_capacity(text.len() + 8);
    for ch in text.chars() {
        match ch {
            ',' | '.' | '?' | '!' | ';' => {
                spaced.push(' ');
                spaced.push(ch);
                spaced.push(' ');
            }
            _ => spaced.extend(ch.to_lowercase()),
        }
    }
    spaced.split_whitespace().map(|s| s.to_string()).collect()
}

/// Token inventory with dense ids, specials first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocabulary {
    /// Build from an iterator of ordinary tokens. Duplicates and tokens that
    /// collide with specials are ignored; insertion order is preserved.
    pub fn build(extra: impl IntoIterator<Item = String>) -> Self {
        let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
        let mut index: BTreeMap<String, u32> = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        for t in extra {
            if !index.contains_key(&t) {
                index.insert(t.clone(), tokens.len() as u32);
                tokens.push(t);
            }
        }
        Self { tokens, index }
    }

    /// Rebuild from a complete ordered token list (e.g. a checkpoint header
    /// or a vocabulary file). The specials must appear first, in order.
    pub fn from_ordered_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < SPECIALS.len() {
            return Err(contract_err("vocabulary", "token list shorter than the specials"));
        }
        for (i, s) in SPECIALS.iter().enumerate() {
            if tokens[i] != *s {
                return Err(contract_err(
                    "vocabulary",
                    alloc::format!("token {i} is `{}`, expected special `{s}`", tokens[i]),
                ));
            }
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i as u32).is_some() {
                return Err(contract_err("vocabulary", alloc::format!("duplicate token `{t}`")));
            }
        }
        Ok(Self { tokens, index })
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Id of a token, falling back to `[UNK]`.
    pub fn id(&self, token: &str) -> u32 {
        self.index.get(token).copied().unwrap_or(self.unk_id())
    }

    pub fn try_id(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn pad_id(&self) -> u32 {
        0
    }

    pub fn unk_id(&self) -> u32 {
        1
    }

    pub fn cls_id(&self) -> u32 {
        2
    }

    pub fn sep_id(&self) -> u32 {
        3
    }

    pub fn eos_id(&self) -> u32 {
        4
    }

    pub fn semicolon_id(&self) -> u32 {
        5
    }

    pub fn dash_id(&self) -> u32 {
        6
    }

    /// Tokens a value decoder must never emit: structural specials plus the
    /// two reserved separators (values containing them could not round-trip
    /// through the state serialization).
    pub fn never_decode(&self, id: u32) -> bool {
        id == self.pad_id()
            || id == self.cls_id()
            || id == self.sep_id()
            || id == self.semicolon_id()
            || id == self.dash_id()
    }

    pub fn ids(&self, tokens: &[String]) -> Vec<u32> {
        tokens.iter().map(|t| self.id(t)).collect()
    }
}
