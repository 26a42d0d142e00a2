//! Corpus types, value normalization, and the canonical corpus JSON cache.
//!
//! Canonical per-split form: `{"dialogues": [{"id", "turns": [{"system",
//! "user", "state": [["domain", "slot", "value"], …]}]}]}`. A corpus file
//! wraps the three splits with a format version:
//! `{"version": 1, "splits": {"train": …, "valid": …, "test": …}}`.
//! States are cumulative: a turn's `state` is the full gold state after the
//! user's utterance of that turn.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use csfn_core::schema::SchemaGraph;
use csfn_core::state::DialogueState;
use csfn_core::vocab::tokenize;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, Result};

pub const CORPUS_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Turn {
    pub system: String,
    pub user: String,
    /// (domain, slot, value) triplets of the cumulative state.
    pub state: Vec<(String, String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dialogue {
    pub id: String,
    pub turns: Vec<Turn>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueSet {
    pub dialogues: Vec<Dialogue>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub train: Vec<Dialogue>,
    pub valid: Vec<Dialogue>,
    pub test: Vec<Dialogue>,
}

impl Corpus {
    pub fn split(&self, name: &str) -> Result<&[Dialogue]> {
        match name {
            "train" => Ok(&self.train),
            "valid" | "dev" => Ok(&self.valid),
            "test" => Ok(&self.test),
            other => Err(AppError::data(format!("unknown split `{other}`"))),
        }
    }

    pub fn total_dialogues(&self) -> usize {
        self.train.len() + self.valid.len() + self.test.len()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CorpusFile {
    version: u32,
    splits: SplitsFile,
}

#[derive(Debug, Serialize, Deserialize)]
struct SplitsFile {
    train: DialogueSet,
    valid: DialogueSet,
    test: DialogueSet,
}

pub fn save_corpus(path: &Path, corpus: &Corpus) -> Result<()> {
    let file = CorpusFile {
        version: CORPUS_VERSION,
        splits: SplitsFile {
            train: DialogueSet {
                dialogues: corpus.train.clone(),
            },
            valid: DialogueSet {
                dialogues: corpus.valid.clone(),
            },
            test: DialogueSet {
                dialogues: corpus.test.clone(),
            },
        },
    };
    let json = serde_json::to_string_pretty(&file).map_err(|e| AppError::json(path, e))?;
    fs::write(path, json).map_err(|e| AppError::io(path, e))
}

pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let file: CorpusFile = serde_json::from_str(&text).map_err(|e| AppError::json(path, e))?;
    if file.version != CORPUS_VERSION {
        return Err(AppError::data(format!(
            "corpus version {} in {}, this build reads version {CORPUS_VERSION}",
            file.version,
            path.display()
        )));
    }
    Ok(Corpus {
        train: file.splits.train.dialogues,
        valid: file.splits.valid.dialogues,
        test: file.splits.test.dialogues,
    })
}

/// Canonical value text: lowercase, separators mapped to spaces (the dash is
/// reserved by the state serialization), whitespace collapsed, dont-care
/// synonyms folded to "dont care".
pub fn normalize_value(raw: &str) -> String {
    let lowered = raw.to_lowercase().replace(['-', ';'], " ");
    let collapsed = lowered.split_whitespace().collect::<Vec<_>>().join(" ");
    match collapsed.as_str() {
        "dontcare" | "dont care" | "don't care" | "do not care" | "do n't care" | "any" => {
            "dont care".to_string()
        }
        _ => collapsed,
    }
}

/// True for annotation values meaning "slot not present".
pub fn value_is_none(raw: &str) -> bool {
    matches!(raw.trim().to_lowercase().as_str(), "" | "none" | "not mentioned")
}

/// Convert a corpus turn's triplet list into a [`DialogueState`]; values are
/// tokenized, so state equality downstream is token-level.
pub fn state_from_triplets(triplets: &[(String, String, String)]) -> Result<DialogueState> {
    let mut state = DialogueState::new();
    for (domain, slot, value) in triplets {
        let normalized = normalize_value(value);
        if normalized == "dont care" {
            state.insert_dontcare(domain, slot);
        } else {
            let tokens = tokenize(&normalized);
            state
                .insert(domain, slot, tokens)
                .map_err(AppError::Core)?;
        }
    }
    Ok(state)
}

/// Triplet list of a state, for serialization into corpus/trace JSON.
pub fn triplets_from_state(state: &DialogueState) -> Vec<(String, String, String)> {
    state
        .iter()
        .map(|(d, s, v)| (d.to_string(), s.to_string(), v.join(" ")))
        .collect()
}

/// Check that every triplet of every turn references a schema-declared
/// domain-slot pair.
pub fn validate_against_schema(dialogues: &[Dialogue], schema: &SchemaGraph) -> Result<()> {
    for dlg in dialogues {
        for (t, turn) in dlg.turns.iter().enumerate() {
            for (domain, slot, _) in &turn.state {
                if schema.find_domain_slot(domain, slot).is_none() {
                    return Err(AppError::data(format!(
                        "dialogue {} turn {}: unknown domain-slot {domain}-{slot}",
                        dlg.id,
                        t + 1
                    )));
                }
            }
        }
    }
    Ok(())
}

/// Tokens contributed by a corpus split (utterances and state values),
/// sorted for build determinism independent of dialogue order.
pub fn corpus_tokens(dialogues: &[Dialogue]) -> Vec<String> {
    let mut set = BTreeSet::new();
    for dlg in dialogues {
        for turn in &dlg.turns {
            set.extend(tokenize(&turn.system));
            set.extend(tokenize(&turn.user));
            for (domain, slot, value) in &turn.state {
                set.extend(tokenize(domain));
                set.extend(tokenize(slot));
                set.extend(tokenize(&normalize_value(value)));
            }
        }
    }
    set.into_iter().collect()
}

/// Tokens contributed by schema node names.
pub fn schema_tokens(schema: &SchemaGraph) -> Vec<String> {
    let mut set = BTreeSet::new();
    for d in schema.domains() {
        set.extend(tokenize(d));
    }
    for s in schema.slots() {
        set.extend(tokenize(s));
    }
    set.insert("dont".to_string());
    set.insert("care".to_string());
    set.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalize_value_cases() {
        assert_eq!(normalize_value("Dont-Care"), "dont care");
        assert_eq!(normalize_value("dontcare"), "dont care");
        assert_eq!(normalize_value("CHEAP "), "cheap");
        assert_eq!(normalize_value("multi - word"), "multi word");
        assert!(value_is_none("none"));
        assert!(value_is_none("not mentioned"));
        assert!(!value_is_none("cheap"));
    }

    #[test]
    fn state_round_trips_through_triplets() {
        let triplets = vec![
            ("hotel".into(), "area".into(), "north".into()),
            ("hotel".into(), "parking".into(), "dontcare".into()),
        ];
        let state = state_from_triplets(&triplets).unwrap();
        assert!(state.is_dontcare("hotel", "parking"));
        let back = triplets_from_state(&state);
        let again = state_from_triplets(&back).unwrap();
        assert_eq!(state, again);
    }

    #[test]
    fn corpus_file_round_trip_and_version_gate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.json");
        let corpus = Corpus {
            train: vec![Dialogue {
                id: "d-1".into(),
                turns: vec![Turn {
                    system: String::new(),
                    user: "i want a cheap hotel — in the «centre»".into(),
                    state: vec![("hotel".into(), "price range".into(), "cheap".into())],
                }],
            }],
            valid: vec![],
            test: vec![],
        };
        save_corpus(&path, &corpus).unwrap();
        let loaded = load_corpus(&path).unwrap();
        assert_eq!(loaded, corpus);

        // version gate
        let mut raw: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
        raw["version"] = serde_json::json!(99);
        fs::write(&path, serde_json::to_string(&raw).unwrap()).unwrap();
        assert!(load_corpus(&path).is_err());
    }

    #[test]
    fn corpus_tokens_sorted_and_deduped() {
        let dialogues = vec![Dialogue {
            id: "x".into(),
            turns: vec![Turn {
                system: "b a".into(),
                user: "a c".into(),
                state: vec![],
            }],
        }];
        assert_eq!(corpus_tokens(&dialogues), vec!["a", "b", "c"]);
    }
}
