//! Slot-gate classification and dialogue-state assembly.
//!
//! Each domain-slot pair gets a three-way decision over {NONE, DONTCARE,
//! PTR} from an FFN over its final graph-stream hidden row. NONE leaves the
//! slot out of the state, DONTCARE fills the "dont care" rendering, PTR
//! hands the slot to the value decoder.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::fusion::{ffn, DropoutMode, FfnParams};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamStore};
use crate::rng::SplitMix64;
use crate::schema::SchemaGraph;
use crate::state::DialogueState;

pub const NUM_GATE_CLASSES: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[repr(u8)]
pub enum GateClass {
    None = 0,
    DontCare = 1,
    Ptr = 2,
}

impl GateClass {
    pub fn from_index(i: usize) -> Option<Self> {
        match i {
            0 => Some(GateClass::None),
            1 => Some(GateClass::DontCare),
            2 => Some(GateClass::Ptr),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            GateClass::None => "none",
            GateClass::DontCare => "dontcare",
            GateClass::Ptr => "ptr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GateParams {
    pub ffn: FfnParams,
}

impl GateParams {
    pub fn register(store: &mut ParamStore, d_model: usize, rng: &mut SplitMix64) -> Result<Self> {
        Ok(Self {
            ffn: FfnParams::register(store, "gate.ffn", d_model, d_model, NUM_GATE_CLASSES, rng)?,
        })
    }
}

/// Per-pair gate probabilities: `softmax(FFN(H_{L,M+N+j}))` for each of the
/// J domain-slot rows, returned as one `J×3` node.
pub fn slot_gate(
    g: &mut Graph,
    store: &ParamStore,
    h_graph: NodeId,
    schema: &SchemaGraph,
    p: &GateParams,
) -> Result<NodeId> {
    let (m, n, j) = (schema.num_domains(), schema.num_slots(), schema.num_domain_slots());
    if g.value(h_graph).rows() != m + n + j {
        return Err(shape_err(
            "slot_gate",
            alloc::format!("graph stream has {} rows, schema wants {}", g.value(h_graph).rows(), m + n + j),
        ));
    }
    let pair_rows = g.slice_rows(h_graph, m + n, j)?;
    let logits = ffn(g, store, pair_rows, &p.ffn, &mut DropoutMode::Off)?;
    g.softmax(logits)
}

/// Summed cross-entropy of gate predictions against one-hot labels.
pub fn gate_loss(g: &mut Graph, gate_probs: NodeId, labels: &[GateClass]) -> Result<NodeId> {
    if g.value(gate_probs).rows() != labels.len() {
        return Err(shape_err(
            "gate_loss",
            alloc::format!("{} prediction rows vs {} labels", g.value(gate_probs).rows(), labels.len()),
        ));
    }
    let mut total: Option<NodeId> = None;
    for (j, label) in labels.iter().enumerate() {
        let row = g.row(gate_probs, j)?;
        let nll = g.neg_log_pick(row, label.index())?;
        total = Some(match total {
            Some(t) => g.add(t, nll)?,
            None => nll,
        });
    }
    Ok(total.unwrap_or_else(|| g.leaf(crate::tensor::Tensor::scalar(0.0))))
}

/// Argmax with deterministic tie-breaking: the highest class index wins, so
/// an exact three-way tie selects PTR.
pub fn argmax_gate(probs: &[f64]) -> GateClass {
    let mut best = 0usize;
    for i in 1..probs.len().min(NUM_GATE_CLASSES) {
        if probs[i] >= probs[best] {
            best = i;
        }
    }
    GateClass::from_index(best).unwrap_or(GateClass::None)
}

/// Ordinals (0-based, ascending) of pairs whose gate argmax is PTR.
pub fn select_ptr_slots(gates: &[GateClass]) -> Vec<usize> {
    gates
        .iter()
        .enumerate()
        .filter(|(_, &c)| c == GateClass::Ptr)
        .map(|(j, _)| j)
        .collect()
}

/// Assemble the next dialogue state from per-pair gates and decoded values.
/// NONE omits the slot, DONTCARE fills the "dont care" tokens, PTR consumes
/// the decoded value; an empty decoded value omits the slot.
pub fn assemble_state(
    gates: &[GateClass],
    values: &[Option<Vec<String>>],
    schema: &SchemaGraph,
) -> Result<DialogueState> {
    if gates.len() != schema.num_domain_slots() || values.len() != gates.len() {
        return Err(shape_err(
            "assemble_state",
            alloc::format!(
                "{} gates, {} values, schema has {} pairs",
                gates.len(),
                values.len(),
                schema.num_domain_slots()
            ),
        ));
    }
    let mut state = DialogueState::new();
    for (j, (gate, value)) in gates.iter().zip(values.iter()).enumerate() {
        let (domain, slot) = schema.domain_slot(j);
        match gate {
            GateClass::None => {}
            GateClass::DontCare => state.insert_dontcare(domain, slot),
            GateClass::Ptr => match value {
                Some(tokens) if !tokens.is_empty() => state.insert(domain, slot, tokens.clone())?,
                _ => {} // empty decode: treated as omission, reported upstream
            },
        }
    }
    Ok(state)
}
