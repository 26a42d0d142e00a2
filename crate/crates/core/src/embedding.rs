//! Token / segment / position embedding tables and the input encodings:
//! sequences embed as the sum of three lookups; schema-graph nodes embed as
//! the mean of their name-token embeddings plus a node-type segment, with no
//! position term.

use alloc::vec::Vec;

use crate::error::{CoreError, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::sequence::{GraphNodeTokens, TokenSequence, NUM_SEGMENTS};
use crate::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct EmbeddingParams {
    /// Shared token table, also used by the decoder's output projection.
    pub token: ParamId,
    pub segment: ParamId,
    pub position: ParamId,
    pub d_model: usize,
    pub max_positions: usize,
}

pub const INIT_RANGE: f64 = 0.1;

impl EmbeddingParams {
    pub fn register(
        store: &mut ParamStore,
        vocab_size: usize,
        d_model: usize,
        max_positions: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let token = store.register(
            "embed.token",
            Tensor::uniform(vocab_size, d_model, -INIT_RANGE, INIT_RANGE, rng),
        )?;
        let segment = store.register(
            "embed.segment",
            Tensor::uniform(NUM_SEGMENTS, d_model, -INIT_RANGE, INIT_RANGE, rng),
        )?;
        let position = store.register(
            "embed.position",
            Tensor::uniform(max_positions, d_model, -INIT_RANGE, INIT_RANGE, rng),
        )?;
        Ok(Self {
            token,
            segment,
            position,
            d_model,
            max_positions,
        })
    }

    /// `H₀ = tok[ids] + seg[ids] + pos[ids]`, row per token.
    pub fn embed_sequence(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        seq: &TokenSequence,
    ) -> Result<NodeId> {
        if let Some(&p) = seq.position_ids.iter().max() {
            if p as usize >= self.max_positions {
                return Err(CoreError::Length {
                    what: "position id",
                    len: p as usize + 1,
                    max: self.max_positions,
                });
            }
        }
        let tok_table = g.param(store, self.token);
        let seg_table = g.param(store, self.segment);
        let pos_table = g.param(store, self.position);
        let tok = g.gather_rows(tok_table, &seq.token_ids)?;
        let seg = g.gather_rows(seg_table, &seq.segment_ids)?;
        let pos = g.gather_rows(pos_table, &seq.position_ids)?;
        let sum = g.add(tok, seg)?;
        g.add(sum, pos)
    }

    /// `H₀ᴳ`: one row per node, mean of its name-token embeddings plus the
    /// node-type segment embedding.
    pub fn embed_graph_nodes(
        &self,
        g: &mut Graph,
        store: &ParamStore,
        nodes: &GraphNodeTokens,
    ) -> Result<NodeId> {
        let tok_table = g.param(store, self.token);
        let seg_table = g.param(store, self.segment);
        let mut rows: Vec<NodeId> = Vec::with_capacity(nodes.node_token_ids.len());
        for ids in &nodes.node_token_ids {
            let gathered = g.gather_rows(tok_table, ids)?;
            rows.push(g.mean_rows(gathered)?);
        }
        let name_part = g.concat_rows(&rows)?;
        let seg_part = g.gather_rows(seg_table, &nodes.node_segment_ids)?;
        g.add(name_part, seg_part)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{build_schema_graph, SchemaDef};
    use crate::sequence::{graph_node_tokens, serialize_utterance, Segment};
    use crate::vocab::Vocabulary;
    use alloc::string::ToString;
    use alloc::vec;

    fn setup(vocab_size: usize) -> (ParamStore, EmbeddingParams) {
        let mut store = ParamStore::new();
        let mut rng = SplitMix64::new(41);
        let emb = EmbeddingParams::register(&mut store, vocab_size, 4, 16, &mut rng).unwrap();
        (store, emb)
    }

    #[test]
    fn zero_tables_leave_token_component() {
        let (mut store, emb) = setup(10);
        store.get_mut(emb.segment).value = Tensor::zeros(NUM_SEGMENTS, 4);
        store.get_mut(emb.position).value = Tensor::zeros(16, 4);
        let seq = TokenSequence {
            token_ids: vec![3, 7],
            segment_ids: vec![0, 1],
            position_ids: vec![0, 1],
            triplet_spans: vec![],
            adjacency: None,
            truncated: false,
        };
        let mut g = Graph::new();
        let h = emb.embed_sequence(&mut g, &store, &seq).unwrap();
        assert_eq!(g.value(h).row(0), store.value(emb.token).row(3));
        assert_eq!(g.value(h).row(1), store.value(emb.token).row(7));
    }

    #[test]
    fn single_cls_is_sum_of_three_lookups() {
        let (store, emb) = setup(10);
        let seq = TokenSequence {
            token_ids: vec![2],
            segment_ids: vec![Segment::StateCls as u32],
            position_ids: vec![0],
            triplet_spans: vec![],
            adjacency: None,
            truncated: false,
        };
        let mut g = Graph::new();
        let h = emb.embed_sequence(&mut g, &store, &seq).unwrap();
        let tok = store.value(emb.token).row(2);
        let seg = store.value(emb.segment).row(Segment::StateCls as usize);
        let pos = store.value(emb.position).row(0);
        for i in 0..4 {
            assert!((g.value(h).get(0, i) - (tok[i] + seg[i] + pos[i])).abs() < 1e-15);
        }
    }

    #[test]
    fn identical_tokens_differ_by_position_rows() {
        let (store, emb) = setup(10);
        let seq = TokenSequence {
            token_ids: vec![5, 5],
            segment_ids: vec![1, 1],
            position_ids: vec![0, 1],
            triplet_spans: vec![],
            adjacency: None,
            truncated: false,
        };
        let mut g = Graph::new();
        let h = emb.embed_sequence(&mut g, &store, &seq).unwrap();
        let pos = store.value(emb.position);
        for i in 0..4 {
            let diff = g.value(h).get(1, i) - g.value(h).get(0, i);
            assert!((diff - (pos.get(1, i) - pos.get(0, i))).abs() < 1e-15);
        }
    }

    #[test]
    fn position_beyond_table_errors() {
        let (store, emb) = setup(10);
        let seq = TokenSequence {
            token_ids: vec![1],
            segment_ids: vec![0],
            position_ids: vec![16],
            triplet_spans: vec![],
            adjacency: None,
            truncated: false,
        };
        let mut g = Graph::new();
        assert!(matches!(
            emb.embed_sequence(&mut g, &store, &seq),
            Err(CoreError::Length { .. })
        ));
    }

    #[test]
    fn utterance_fits_after_truncation() {
        let (store, emb) = setup(64);
        let vocab = Vocabulary::build(
            "a b c d e f g h i j k l m n o p q r s t u v w"
                .split(' ')
                .map(|s| s.to_string()),
        );
        let long: alloc::string::String =
            core::iter::repeat("a b c d e f g h ").take(8).collect();
        let seq = serialize_utterance(&long, "u v w", &vocab, 16).unwrap();
        assert!(seq.truncated);
        let mut g = Graph::new();
        assert!(emb.embed_sequence(&mut g, &store, &seq).is_ok());
    }

    #[test]
    fn graph_nodes_average_and_segment() {
        let def = SchemaDef::new(
            vec!["hotel".to_string()],
            vec![vec!["price range".to_string()]],
            vec![],
        )
        .unwrap();
        let graph = build_schema_graph(&def).unwrap();
        let vocab = Vocabulary::build(["hotel", "price", "range"].iter().map(|s| s.to_string()));
        let (mut store, emb) = setup(vocab.len());
        store.get_mut(emb.segment).value = Tensor::zeros(NUM_SEGMENTS, 4);
        let nodes = graph_node_tokens(&graph, &vocab);
        let mut g = Graph::new();
        let h = emb.embed_graph_nodes(&mut g, &store, &nodes).unwrap();
        // node "hotel": exactly its token embedding
        let e = store.value(emb.token);
        let hotel = vocab.id("hotel") as usize;
        assert_eq!(g.value(h).row(0), e.row(hotel));
        // node "price range": mean of the two token embeddings
        let (p, r) = (vocab.id("price") as usize, vocab.id("range") as usize);
        for i in 0..4 {
            let want = 0.5 * (e.get(p, i) + e.get(r, i));
            assert!((g.value(h).get(1, i) - want).abs() < 1e-15);
        }
    }

    #[test]
    fn node_type_segment_distinguishes_same_name() {
        // a domain node and a slot node with identical name tokens differ by
        // exactly segment(domain) − segment(slot)
        let def = SchemaDef::new(
            vec!["spa".to_string()],
            vec![vec!["spa".to_string()]],
            vec![],
        )
        .unwrap();
        let graph = build_schema_graph(&def).unwrap();
        let vocab = Vocabulary::build(["spa".to_string()]);
        let (store, emb) = setup(vocab.len());
        let nodes = graph_node_tokens(&graph, &vocab);
        let mut g = Graph::new();
        let h = emb.embed_graph_nodes(&mut g, &store, &nodes).unwrap();
        let seg = store.value(emb.segment);
        for i in 0..4 {
            let diff = g.value(h).get(0, i) - g.value(h).get(1, i);
            let want = seg.get(Segment::NodeDomain as usize, i) - seg.get(Segment::NodeSlot as usize, i);
            assert!((diff - want).abs() < 1e-15);
        }
    }
}
