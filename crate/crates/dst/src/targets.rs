//! Training targets per turn.
//!
//! Gate labels derive from the full target state: a pair absent from `B_t`
//! is NONE, a dont-care value is DONTCARE, anything else is PTR with the
//! value tokens (terminated by [EOS]) as the decoder target. Carried-over
//! values stay PTR and are re-emitted by copying from the serialized
//! previous state, so the assembled prediction is exactly `B_t` with no
//! implicit carry-over rule. The previous state enters through its
//! serialization, not through the labels.

use csfn_core::gate::GateClass;
use csfn_core::model::TurnTargets;
use csfn_core::schema::SchemaGraph;
use csfn_core::state::DialogueState;
use csfn_core::vocab::Vocabulary;

/// Per-pair gate labels of a gold state.
pub fn gate_labels(state: &DialogueState, schema: &SchemaGraph) -> Vec<GateClass> {
    schema
        .domain_slot_pairs()
        .map(|(d, s)| match state.get(d, s) {
            None => GateClass::None,
            Some(_) if state.is_dontcare(d, s) => GateClass::DontCare,
            Some(_) => GateClass::Ptr,
        })
        .collect()
}

/// Gate labels plus [EOS]-terminated value-token targets for PTR pairs.
/// Gold tokens missing from the vocabulary map to [UNK]; the count of such
/// tokens is returned for warning logs.
pub fn make_targets(
    _prev_gold: &DialogueState,
    cur_gold: &DialogueState,
    schema: &SchemaGraph,
    vocab: &Vocabulary,
) -> (TurnTargets, usize) {
    let labels = gate_labels(cur_gold, schema);
    let mut unknown = 0usize;
    let values = schema
        .domain_slot_pairs()
        .zip(labels.iter())
        .map(|((d, s), label)| {
            if *label != GateClass::Ptr {
                return None;
            }
            let tokens = cur_gold.get(d, s).expect("PTR label implies a value");
            let mut ids = Vec::with_capacity(tokens.len() + 1);
            for t in tokens {
                match vocab.try_id(t) {
                    Some(id) => ids.push(id),
                    None => {
                        unknown += 1;
                        ids.push(vocab.unk_id());
                    }
                }
            }
            ids.push(vocab.eos_id());
            Some(ids)
        })
        .collect();
    (
        TurnTargets {
            gate_labels: labels,
            values,
        },
        unknown,
    )
}
