//! The three input serializations: dialogue utterance, previous dialogue
//! state and schema-graph nodes, each with token + segment + position ids.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{contract_err, Result};
use crate::schema::{state_adjacency, AdjacencyMatrix, SchemaGraph};
use crate::state::DialogueState;
use crate::vocab::{tokenize, Vocabulary};

/// Fixed segment inventory shared by all three streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum Segment {
    UttCls = 0,
    UttBody = 1,
    StateCls = 2,
    StateBody = 3,
    NodeDomain = 4,
    NodeSlot = 5,
    NodeDomainSlot = 6,
}

pub const NUM_SEGMENTS: usize = 7;

/// A serialized input sequence. State sequences additionally carry their
/// triplet spans and block adjacency.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenSequence {
    pub token_ids: Vec<u32>,
    pub segment_ids: Vec<u32>,
    pub position_ids: Vec<u32>,
    /// (start, len) of each triplet; state sequences only.
    pub triplet_spans: Vec<(usize, usize)>,
    pub adjacency: Option<AdjacencyMatrix>,
    /// Set when the utterance was cut to the maximum length.
    pub truncated: bool,
}

impl TokenSequence {
    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// `[CLS] ⊕ A_t ⊕ ; ⊕ U_t ⊕ [SEP]` with positions 0..len−1. The [CLS] token
/// carries its own segment; everything else shares the body segment. When
/// the result would exceed `max_len`, the oldest body tokens are dropped so
/// the most recent utterance tokens survive.
pub fn serialize_utterance(
    system: &str,
    user: &str,
    vocab: &Vocabulary,
    max_len: usize,
) -> Result<TokenSequence> {
    if max_len < 3 {
        return Err(contract_err("serialize_utterance", "max_len must be at least 3"));
    }
    let mut body: Vec<u32> = Vec::new();
    for t in tokenize(system) {
        body.push(vocab.id(&t));
    }
    body.push(vocab.semicolon_id());
    for t in tokenize(user) {
        body.push(vocab.id(&t));
    }
    let mut truncated = false;
    if body.len() + 2 > max_len {
        let drop = body.len() + 2 - max_len;
        body.drain(..drop);
        truncated = true;
    }
    let mut token_ids = Vec::with_capacity(body.len() + 2);
    token_ids.push(vocab.cls_id());
    token_ids.extend_from_slice(&body);
    token_ids.push(vocab.sep_id());

    let len = token_ids.len();
    let mut segment_ids = vec![Segment::UttBody as u32; len];
    segment_ids[0] = Segment::UttCls as u32;
    Ok(TokenSequence {
        token_ids,
        segment_ids,
        position_ids: (0..len as u32).collect(),
        triplet_spans: Vec::new(),
        adjacency: None,
        truncated,
    })
}

/// `[CLS] ⊕ R¹ ⊕ … ⊕ Rᴷ` where each triplet renders as
/// `domain ⊕ - ⊕ slot ⊕ - ⊕ value`. Positions restart at zero for every
/// triplet; triplets appear in (domain, slot) order; the block adjacency
/// connects tokens within one triplet plus the [CLS] transit node.
pub fn serialize_state(state: &DialogueState, vocab: &Vocabulary) -> Result<TokenSequence> {
    let mut token_ids = vec![vocab.cls_id()];
    let mut segment_ids = vec![Segment::StateCls as u32];
    let mut position_ids = vec![0u32];
    let mut spans = Vec::new();

    for (domain, slot, value) in state.iter() {
        if value.is_empty() {
            return Err(contract_err(
                "serialize_state",
                alloc::format!("triplet {domain}-{slot} has an empty value"),
            ));
        }
        let start = token_ids.len();
        let mut triplet: Vec<u32> = Vec::new();
        for t in tokenize(domain) {
            triplet.push(vocab.id(&t));
        }
        triplet.push(vocab.dash_id());
        for t in tokenize(slot) {
            triplet.push(vocab.id(&t));
        }
        triplet.push(vocab.dash_id());
        for t in value {
            triplet.push(vocab.id(t));
        }
        for (pos, id) in triplet.iter().enumerate() {
            token_ids.push(*id);
            segment_ids.push(Segment::StateBody as u32);
            position_ids.push(pos as u32);
        }
        spans.push((start, triplet.len()));
    }

    let adjacency = state_adjacency(token_ids.len(), &spans)?;
    Ok(TokenSequence {
        token_ids,
        segment_ids,
        position_ids,
        triplet_spans: spans,
        adjacency: Some(adjacency),
        truncated: false,
    })
}

/// Inverse of [`serialize_state`], driven purely by the serialized token and
/// position ids: a position id of zero after the leading [CLS] opens a new
/// triplet; within a triplet the first dash ends the domain, the second ends
/// the slot.
pub fn parse_state(seq: &TokenSequence, vocab: &Vocabulary) -> Result<DialogueState> {
    let mut state = DialogueState::new();
    if seq.is_empty() || seq.token_ids[0] != vocab.cls_id() {
        return Err(contract_err("parse_state", "sequence must start with [CLS]"));
    }
    let mut i = 1;
    while i < seq.len() {
        // collect one triplet: tokens until the next position reset
        let start = i;
        i += 1;
        while i < seq.len() && seq.position_ids[i] != 0 {
            i += 1;
        }
        let tokens: Vec<&str> = (start..i).map(|k| vocab.token(seq.token_ids[k])).collect();
        let mut dashes = tokens.iter().enumerate().filter(|(_, t)| **t == "-").map(|(k, _)| k);
        let (d1, d2) = match (dashes.next(), dashes.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(contract_err("parse_state", "triplet without two separators")),
        };
        let domain = tokens[..d1].join(" ");
        let slot = tokens[d1 + 1..d2].join(" ");
        let value: Vec<String> = tokens[d2 + 1..].iter().map(|t| t.to_string()).collect();
        state.insert(&domain, &slot, value)?;
    }
    Ok(state)
}

/// Token and segment ids of every schema-graph node, in node order. A node's
/// text is its name (domain-slot nodes: domain tokens ⊕ slot tokens); its
/// segment encodes the node type. Graph nodes carry no positions.
#[derive(Debug, Clone)]
pub struct GraphNodeTokens {
    pub node_token_ids: Vec<Vec<u32>>,
    pub node_segment_ids: Vec<u32>,
}

pub fn graph_node_tokens(graph: &SchemaGraph, vocab: &Vocabulary) -> GraphNodeTokens {
    let mut node_token_ids = Vec::with_capacity(graph.node_count());
    let mut node_segment_ids = Vec::with_capacity(graph.node_count());
    for d in graph.domains() {
        node_token_ids.push(vocab.ids(&tokenize(d)));
        node_segment_ids.push(Segment::NodeDomain as u32);
    }
    for s in graph.slots() {
        node_token_ids.push(vocab.ids(&tokenize(s)));
        node_segment_ids.push(Segment::NodeSlot as u32);
    }
    for (d, s) in graph.domain_slot_pairs() {
        let mut ids = vocab.ids(&tokenize(d));
        ids.extend(vocab.ids(&tokenize(s)));
        node_token_ids.push(ids);
        node_segment_ids.push(Segment::NodeDomainSlot as u32);
    }
    GraphNodeTokens {
        node_token_ids,
        node_segment_ids,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn vocab() -> Vocabulary {
        Vocabulary::build(
            [
                "hello", "hi", "hotel", "price", "range", "expensive", "dont", "care", "parking",
                "north", "area", "a", "b", "c",
            ]
            .iter()
            .map(|s| s.to_string()),
        )
    }

    #[test]
    fn utterance_empty_system_turn() {
        let v = vocab();
        let seq = serialize_utterance("", "hi", &v, 128).unwrap();
        let toks: Vec<&str> = seq.token_ids.iter().map(|&id| v.token(id)).collect();
        assert_eq!(toks, ["[CLS]", ";", "hi", "[SEP]"]);
        assert_eq!(seq.position_ids, vec![0, 1, 2, 3]);
    }

    #[test]
    fn utterance_layout_and_segments() {
        let v = vocab();
        let seq = serialize_utterance("hello", "hi", &v, 128).unwrap();
        let toks: Vec<&str> = seq.token_ids.iter().map(|&id| v.token(id)).collect();
        assert_eq!(toks, ["[CLS]", "hello", ";", "hi", "[SEP]"]);
        assert_eq!(
            seq.segment_ids,
            vec![
                Segment::UttCls as u32,
                Segment::UttBody as u32,
                Segment::UttBody as u32,
                Segment::UttBody as u32,
                Segment::UttBody as u32
            ]
        );
        assert!(!seq.truncated);
    }

    #[test]
    fn utterance_truncates_from_left() {
        let v = vocab();
        let seq = serialize_utterance("a b c", "hello hi", &v, 6).unwrap();
        assert!(seq.truncated);
        assert_eq!(seq.len(), 6);
        let toks: Vec<&str> = seq.token_ids.iter().map(|&id| v.token(id)).collect();
        // most recent tokens survive
        assert_eq!(toks, ["[CLS]", "c", ";", "hello", "hi", "[SEP]"]);
    }

    #[test]
    fn empty_state_serializes_to_cls_only() {
        let v = vocab();
        let seq = serialize_state(&DialogueState::new(), &v).unwrap();
        assert_eq!(seq.len(), 1);
        assert_eq!(seq.token_ids[0], v.cls_id());
        assert_eq!(seq.adjacency.as_ref().unwrap().count_ones(), 1);
    }

    #[test]
    fn state_triplet_layout_and_positions() {
        let v = vocab();
        let mut b = DialogueState::new();
        b.insert("hotel", "price range", vec!["expensive".to_string()]).unwrap();
        let seq = serialize_state(&b, &v).unwrap();
        let toks: Vec<&str> = seq.token_ids.iter().map(|&id| v.token(id)).collect();
        assert_eq!(toks, ["[CLS]", "hotel", "-", "price", "range", "-", "expensive"]);
        assert_eq!(seq.position_ids, vec![0, 0, 1, 2, 3, 4, 5]);
        assert_eq!(seq.triplet_spans, vec![(1, 6)]);
    }

    #[test]
    fn positions_restart_per_triplet() {
        let v = vocab();
        let mut b = DialogueState::new();
        b.insert("hotel", "area", vec!["north".to_string()]).unwrap();
        b.insert_dontcare("hotel", "parking");
        let seq = serialize_state(&b, &v).unwrap();
        // triplets in (domain, slot) order: area first, then parking
        let starts: Vec<usize> = seq.triplet_spans.iter().map(|&(s, _)| s).collect();
        for &s in &starts {
            assert_eq!(seq.position_ids[s], 0);
        }
        let toks: Vec<&str> = seq.token_ids.iter().map(|&id| v.token(id)).collect();
        assert_eq!(
            toks,
            ["[CLS]", "hotel", "-", "area", "-", "north", "hotel", "-", "parking", "-", "dont", "care"]
        );
    }

    #[test]
    fn dontcare_renders_as_dont_care() {
        let v = vocab();
        let mut b = DialogueState::new();
        b.insert_dontcare("hotel", "parking");
        let seq = serialize_state(&b, &v).unwrap();
        let toks: Vec<&str> = seq.token_ids.iter().map(|&id| v.token(id)).collect();
        assert!(toks.windows(2).any(|w| w == ["dont", "care"]));
    }

    #[test]
    fn round_trip_recovers_state() {
        let v = vocab();
        let mut b = DialogueState::new();
        b.insert("hotel", "price range", vec!["expensive".to_string()]).unwrap();
        b.insert("hotel", "area", vec!["north".to_string()]).unwrap();
        b.insert_dontcare("hotel", "parking");
        let seq = serialize_state(&b, &v).unwrap();
        let parsed = parse_state(&seq, &v).unwrap();
        assert_eq!(parsed, b);
    }

    #[test]
    fn state_length_formula() {
        // 1 + Σ (len_d + len_s + len_v + 2)
        let v = vocab();
        let mut b = DialogueState::new();
        b.insert("hotel", "price range", vec!["expensive".to_string()]).unwrap();
        b.insert("hotel", "area", vec!["north".to_string()]).unwrap();
        let seq = serialize_state(&b, &v).unwrap();
        assert_eq!(seq.len(), 1 + (1 + 2 + 1 + 2) + (1 + 1 + 1 + 2));
    }

    #[test]
    fn graph_node_tokens_layout() {
        use crate::schema::{build_schema_graph, SchemaDef};
        let def = SchemaDef::new(
            vec!["hotel".to_string()],
            vec![vec!["price range".to_string()]],
            vec![],
        )
        .unwrap();
        let g = build_schema_graph(&def).unwrap();
        let v = vocab();
        let gt = graph_node_tokens(&g, &v);
        assert_eq!(gt.node_token_ids.len(), 3);
        assert_eq!(gt.node_token_ids[0], vec![v.id("hotel")]);
        assert_eq!(gt.node_token_ids[1], vec![v.id("price"), v.id("range")]);
        assert_eq!(gt.node_token_ids[2], vec![v.id("hotel"), v.id("price"), v.id("range")]);
        assert_eq!(
            gt.node_segment_ids,
            vec![
                Segment::NodeDomain as u32,
                Segment::NodeSlot as u32,
                Segment::NodeDomainSlot as u32
            ]
        );
    }
}
