//! Ingestion of TRADE-preprocessed MultiWOZ JSON.
//!
//! Expected layout: a JSON array of dialogues, each with `dialogue_idx`,
//! `domains` and a `dialogue` list of turns carrying `system_transcript`,
//! `transcript` and a cumulative `belief_state` of
//! `{"slots": [["domain-slot", "value"]], …}` entries. A directory with
//! `train_dials.json` / `dev_dials.json` / `test_dials.json` loads as a full
//! corpus; a single file loads into the train split.
//!
//! Normalizations applied (each counted in the report rather than silently
//! folded): slot aliases `pricerange`/`leaveat`/`arriveby` to their spaced
//! spellings, underscores to spaces, lowercasing, dash-to-space inside
//! values, dont-care synonyms to "dont care". Dialogues whose declared
//! domains all fall outside the schema (e.g. hospital, police) are excluded;
//! individual out-of-schema triplets are dropped with a warning count.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use csfn_core::schema::SchemaGraph;
use serde::Deserialize;

use crate::data::{normalize_value, value_is_none, Corpus, Dialogue, Turn};
use crate::error::{AppError, Result};

#[derive(Debug, Deserialize)]
struct TradeDialogue {
    dialogue_idx: String,
    #[serde(default)]
    domains: Vec<String>,
    dialogue: Vec<TradeTurn>,
}

#[derive(Debug, Deserialize)]
struct TradeTurn {
    #[serde(default)]
    turn_idx: usize,
    #[serde(default)]
    system_transcript: String,
    transcript: String,
    #[serde(default)]
    belief_state: Vec<TradeBelief>,
}

#[derive(Debug, Deserialize)]
struct TradeBelief {
    slots: Vec<(String, String)>,
}

#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct IngestReport {
    pub dialogues_kept: usize,
    pub dialogues_excluded: usize,
    pub triplets_dropped: usize,
    /// Out-of-schema domain-slot names and how often they appeared.
    pub unknown_pairs: BTreeMap<String, usize>,
    pub none_values_skipped: usize,
}

/// Slot-name canonicalization from the preprocessed annotation spellings to
/// the spaced names the schema declares.
pub fn normalize_slot_name(raw: &str) -> String {
    let spaced = raw.to_lowercase().replace('_', " ");
    match spaced.as_str() {
        "pricerange" => "price range".into(),
        "leaveat" => "leave at".into(),
        "arriveby" => "arrive by".into(),
        other => other.trim().to_string(),
    }
}

fn convert_dialogue(
    src: TradeDialogue,
    schema: &SchemaGraph,
    report: &mut IngestReport,
) -> Option<Dialogue> {
    if !src.domains.is_empty()
        && !src
            .domains
            .iter()
            .any(|d| schema.domain_node_index(&d.to_lowercase()).is_some())
    {
        report.dialogues_excluded += 1;
        return None;
    }
    let mut turns: Vec<(usize, Turn)> = Vec::with_capacity(src.dialogue.len());
    for t in src.dialogue {
        let mut state: Vec<(String, String, String)> = Vec::new();
        for belief in &t.belief_state {
            for (pair, value) in &belief.slots {
                if value_is_none(value) {
                    report.none_values_skipped += 1;
                    continue;
                }
                let Some((domain_raw, slot_raw)) = pair.split_once('-') else {
                    report.triplets_dropped += 1;
                    *report.unknown_pairs.entry(pair.clone()).or_default() += 1;
                    continue;
                };
                let domain = domain_raw.trim().to_lowercase();
                let slot = normalize_slot_name(slot_raw);
                if schema.find_domain_slot(&domain, &slot).is_none() {
                    report.triplets_dropped += 1;
                    *report.unknown_pairs.entry(format!("{domain}-{slot}")).or_default() += 1;
                    continue;
                }
                state.push((domain, slot, normalize_value(value)));
            }
        }
        state.sort();
        state.dedup();
        turns.push((
            t.turn_idx,
            Turn {
                system: t.system_transcript,
                user: t.transcript,
                state,
            },
        ));
    }
    turns.sort_by_key(|(idx, _)| *idx);
    report.dialogues_kept += 1;
    Some(Dialogue {
        id: src.dialogue_idx,
        turns: turns.into_iter().map(|(_, t)| t).collect(),
    })
}

/// Load one TRADE-layout file into a dialogue list.
pub fn load_multiwoz_file(
    path: &Path,
    schema: &SchemaGraph,
    report: &mut IngestReport,
) -> Result<Vec<Dialogue>> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let parsed: Vec<TradeDialogue> =
        serde_json::from_str(&text).map_err(|e| AppError::json(path, e))?;
    Ok(parsed
        .into_iter()
        .filter_map(|d| convert_dialogue(d, schema, report))
        .collect())
}

/// Load a TRADE-preprocessed corpus. Directories read the three split files
/// (missing ones yield empty splits); a single file fills the train split.
pub fn load_multiwoz(path: &Path, schema: &SchemaGraph) -> Result<(Corpus, IngestReport)> {
    let mut report = IngestReport::default();
    let corpus = if path.is_dir() {
        let mut load_split = |file: &str| -> Result<Vec<Dialogue>> {
            let p = path.join(file);
            if p.exists() {
                load_multiwoz_file(&p, schema, &mut report)
            } else {
                Ok(Vec::new())
            }
        };
        Corpus {
            train: load_split("train_dials.json")?,
            valid: load_split("dev_dials.json")?,
            test: load_split("test_dials.json")?,
        }
    } else {
        Corpus {
            train: load_multiwoz_file(path, schema, &mut report)?,
            valid: Vec::new(),
            test: Vec::new(),
        }
    };
    Ok((corpus, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use csfn_core::schema::{build_schema_graph, SchemaDef};

    fn schema() -> SchemaGraph {
        let def = SchemaDef::new(
            vec!["hotel".into(), "taxi".into()],
            vec![
                vec!["price range".into(), "parking".into()],
                vec!["leave at".into(), "destination".into()],
            ],
            vec![],
        )
        .unwrap();
        build_schema_graph(&def).unwrap()
    }

    fn write(dir: &Path, name: &str, content: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, content).unwrap();
        p
    }

    const SAMPLE: &str = r#"[
      {
        "dialogue_idx": "MUL0001.json",
        "domains": ["hotel"],
        "dialogue": [
          {"turn_idx": 0, "system_transcript": "", "transcript": "i need a place to stay",
           "belief_state": [], "turn_label": []},
          {"turn_idx": 1, "system_transcript": "what price range?", "transcript": "cheap, and parking doesn't matter",
           "belief_state": [
             {"slots": [["hotel-pricerange", "cheap"]], "act": "inform"},
             {"slots": [["hotel-parking", "dontcare"]], "act": "inform"},
             {"slots": [["hotel-smoking", "no"]], "act": "inform"},
             {"slots": [["hotel-stars", "none"]], "act": "inform"}
           ]}
        ]
      },
      {
        "dialogue_idx": "HOSP01.json",
        "domains": ["hospital"],
        "dialogue": [
          {"turn_idx": 0, "system_transcript": "", "transcript": "i hurt my arm",
           "belief_state": [{"slots": [["hospital-department", "orthopaedics"]]}]}
        ]
      }
    ]"#;

    #[test]
    fn loads_and_normalizes_sample() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "mini.json", SAMPLE);
        let (corpus, report) = load_multiwoz(&p, &schema()).unwrap();
        assert_eq!(corpus.train.len(), 1, "hospital dialogue excluded");
        assert_eq!(report.dialogues_excluded, 1);
        let dlg = &corpus.train[0];
        assert_eq!(dlg.turns.len(), 2);
        assert!(dlg.turns[0].state.is_empty());
        let state = &dlg.turns[1].state;
        assert!(state.contains(&("hotel".into(), "price range".into(), "cheap".into())));
        assert!(state.contains(&("hotel".into(), "parking".into(), "dont care".into())));
        // hotel-smoking is not in the schema; hotel-stars carried "none"
        assert_eq!(report.triplets_dropped, 1);
        assert_eq!(report.none_values_skipped, 1);
        assert_eq!(report.unknown_pairs.get("hotel-smoking"), Some(&1));
    }

    #[test]
    fn directory_layout_fills_splits() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train_dials.json", SAMPLE);
        write(dir.path(), "test_dials.json", "[]");
        let (corpus, _) = load_multiwoz(dir.path(), &schema()).unwrap();
        assert_eq!(corpus.train.len(), 1);
        assert!(corpus.valid.is_empty());
        assert!(corpus.test.is_empty());
    }

    #[test]
    fn slot_alias_table() {
        assert_eq!(normalize_slot_name("pricerange"), "price range");
        assert_eq!(normalize_slot_name("leaveAt"), "leave at");
        assert_eq!(normalize_slot_name("arriveby"), "arrive by");
        assert_eq!(normalize_slot_name("book_stay"), "book stay");
        assert_eq!(normalize_slot_name("area"), "area");
    }

    #[test]
    fn malformed_json_is_an_ingestion_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), "bad.json", "{not json");
        assert!(load_multiwoz(&p, &schema()).is_err());
    }
}
