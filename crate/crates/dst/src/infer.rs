//! Per-dialogue inference: each turn consumes the previous *predicted*
//! state (gold under the prev_state oracle), predicts gates and values, and
//! assembles the next state. Oracle modes substitute one gold component to
//! bound error sources; only that component changes.

use std::collections::BTreeMap;
use std::str::FromStr;

use csfn_core::gate::{assemble_state, GateClass};
use csfn_core::model::CsfnModel;
use csfn_core::schema::{AdjacencyMatrix, SchemaGraph};
use csfn_core::sequence::{serialize_state, serialize_utterance};
use csfn_core::state::DialogueState;
use csfn_core::vocab::Vocabulary;
use csfn_core::Graph;
use serde::Serialize;

use crate::data::{state_from_triplets, triplets_from_state, Dialogue};
use crate::error::{AppError, Result};
use crate::metrics::TurnRecord;
use crate::targets::gate_labels;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleMode {
    None,
    PrevState,
    Gate,
    Value,
}

impl OracleMode {
    pub fn name(self) -> &'static str {
        match self {
            OracleMode::None => "none",
            OracleMode::PrevState => "prev_state",
            OracleMode::Gate => "gate",
            OracleMode::Value => "value",
        }
    }
}

impl FromStr for OracleMode {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(OracleMode::None),
            "prev_state" => Ok(OracleMode::PrevState),
            "gate" => Ok(OracleMode::Gate),
            "value" => Ok(OracleMode::Value),
            other => Err(AppError::data(format!(
                "unknown oracle mode `{other}` (none|prev_state|gate|value)"
            ))),
        }
    }
}

/// One JSON line of the prediction trace.
#[derive(Debug, Serialize)]
pub struct TraceRecord {
    pub dialogue_id: String,
    pub turn: usize,
    /// Gate argmax per domain-slot pair.
    pub gates: BTreeMap<String, String>,
    /// Decoded values for PTR-gated pairs.
    pub values: BTreeMap<String, String>,
    /// Assembled state triplets.
    pub state: Vec<(String, String, String)>,
}

pub struct DialogueOutcome {
    pub records: Vec<TurnRecord>,
    pub trace: Vec<TraceRecord>,
    pub empty_value_omissions: usize,
}

/// Track one dialogue turn by turn. `B₀` is empty; the chain carries the
/// assembled prediction of the previous turn.
pub fn infer_dialogue(
    model: &CsfnModel,
    vocab: &Vocabulary,
    schema: &SchemaGraph,
    a_graph: &AdjacencyMatrix,
    dialogue: &Dialogue,
    oracle: OracleMode,
    max_utt_len: usize,
) -> Result<DialogueOutcome> {
    let mut g = Graph::new();
    let h0g = model.graph_h0(&mut g)?;
    let mut prev_pred = DialogueState::new();
    let mut prev_gold = DialogueState::new();
    let mut records = Vec::with_capacity(dialogue.turns.len());
    let mut trace = Vec::with_capacity(dialogue.turns.len());
    let mut omissions = 0usize;

    for (t, turn) in dialogue.turns.iter().enumerate() {
        let gold = state_from_triplets(&turn.state)?;
        let input_prev = if oracle == OracleMode::PrevState { &prev_gold } else { &prev_pred };
        let x_seq = serialize_utterance(&turn.system, &turn.user, vocab, max_utt_len)?;
        if x_seq.truncated {
            log::warn!("dialogue {} turn {}: utterance truncated to {max_utt_len}", dialogue.id, t + 1);
        }
        let b_seq = serialize_state(input_prev, vocab)?;

        let gold_gates = gate_labels(&gold, schema);
        let forced = (oracle == OracleMode::Gate).then_some(gold_gates.as_slice());
        let pred = model.predict_turn(&mut g, h0g, &x_seq, &b_seq, a_graph, vocab, forced)?;

        let mut values = CsfnModel::value_tokens(&pred.values, vocab);
        if oracle == OracleMode::Value {
            // substitute gold values wherever the gate said PTR and gold has
            // one; pairs gold lacks keep their decoded value
            for (j, (d, s)) in schema.domain_slot_pairs().enumerate() {
                if pred.gates[j] == GateClass::Ptr {
                    if let Some(gold_value) = gold.get(d, s) {
                        values[j] = Some(gold_value.to_vec());
                    }
                }
            }
        }
        for (j, &gate) in pred.gates.iter().enumerate() {
            if gate == GateClass::Ptr && values[j].as_ref().is_some_and(|v| v.is_empty()) {
                omissions += 1;
                log::warn!(
                    "dialogue {} turn {}: empty decode for pair {}, slot omitted",
                    dialogue.id,
                    t + 1,
                    j
                );
            }
        }
        let assembled = assemble_state(&pred.gates, &values, schema)?;

        let mut gate_map = BTreeMap::new();
        let mut value_map = BTreeMap::new();
        for (j, (d, s)) in schema.domain_slot_pairs().enumerate() {
            gate_map.insert(format!("{d}-{s}"), pred.gates[j].name().to_string());
            if let Some(v) = &values[j] {
                value_map.insert(format!("{d}-{s}"), v.join(" "));
            }
        }
        trace.push(TraceRecord {
            dialogue_id: dialogue.id.clone(),
            turn: t + 1,
            gates: gate_map,
            values: value_map,
            state: triplets_from_state(&assembled),
        });
        records.push(TurnRecord {
            dialogue_id: dialogue.id.clone(),
            turn_index: t + 1,
            predicted: assembled.clone(),
            gold: gold.clone(),
            predicted_gates: pred.gates.clone(),
            gold_gates,
        });
        prev_pred = assembled;
        prev_gold = gold;
    }
    Ok(DialogueOutcome {
        records,
        trace,
        empty_value_omissions: omissions,
    })
}

/// Evaluate a split, optionally across worker threads. Results are merged
/// in dialogue order, so the outcome is independent of scheduling.
pub fn infer_split(
    model: &CsfnModel,
    vocab: &Vocabulary,
    schema: &SchemaGraph,
    a_graph: &AdjacencyMatrix,
    dialogues: &[Dialogue],
    oracle: OracleMode,
    max_utt_len: usize,
    workers: usize,
) -> Result<Vec<DialogueOutcome>> {
    let workers = workers.max(1);
    if workers == 1 || dialogues.len() < 2 {
        return dialogues
            .iter()
            .map(|d| infer_dialogue(model, vocab, schema, a_graph, d, oracle, max_utt_len))
            .collect();
    }
    let mut slots: Vec<Option<Result<DialogueOutcome>>> = Vec::new();
    slots.resize_with(dialogues.len(), || None);
    let next = std::sync::atomic::AtomicUsize::new(0);
    let slots_mutex = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..workers.min(dialogues.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if i >= dialogues.len() {
                    break;
                }
                let out = infer_dialogue(model, vocab, schema, a_graph, &dialogues[i], oracle, max_utt_len);
                slots_mutex.lock().expect("no poisoned workers")[i] = Some(out);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.expect("every dialogue visited"))
        .collect()
}
