//! The assembled tracker: embeddings, fusion stack, slot gates and the
//! value decoder over one parameter store, with per-turn loss and
//! prediction entry points.

use alloc::string::String;
use alloc::vec::Vec;

use crate::decoder::{decode_value, value_loss_teacher_forced, DecoderContext, DecoderParams};
use crate::embedding::EmbeddingParams;
use crate::error::{contract_err, shape_err, CoreError, Result};
use crate::fusion::{csfn_forward, CsfnLayerParams, DropoutMode, Streams};
use crate::gate::{argmax_gate, gate_loss, slot_gate, GateClass};
use crate::graph::{Graph, NodeId};
use crate::params::ParamStore;
use crate::rng::SplitMix64;
use crate::schema::{AdjacencyMatrix, SchemaGraph};
use crate::sequence::{graph_node_tokens, GraphNodeTokens, TokenSequence};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_inner: usize,
    pub max_decode_len: usize,
    pub max_positions: usize,
    /// Dropout on attention outputs and FFN inner activations during
    /// training; zero disables. Strict mode sets this to zero.
    pub dropout: f64,
}

impl ModelConfig {
    pub fn new(d_model: usize, heads: usize, layers: usize) -> Self {
        Self {
            d_model,
            heads,
            layers,
            ffn_inner: 4 * d_model,
            max_decode_len: 10,
            max_positions: 128,
            dropout: 0.1,
        }
    }

    /// Full-scale configuration: hidden size 400, 4 heads, 6 layers (the
    /// midpoint of the layer grid {4..8}).
    pub fn full_scale() -> Self {
        Self::new(400, 4, 6)
    }

    pub fn validate(&self) -> Result<()> {
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return Err(contract_err("model_config", "heads must divide d_model"));
        }
        if self.layers == 0 {
            return Err(contract_err("model_config", "at least one layer required"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(contract_err("model_config", "dropout must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Per-turn training targets, indexed by domain-slot ordinal.
#[derive(Debug, Clone, PartialEq)]
pub struct TurnTargets {
    pub gate_labels: Vec<GateClass>,
    /// Gold value token ids (ending with [EOS]) for PTR-gated pairs.
    pub values: Vec<Option<Vec<u32>>>,
}

/// Scalar loss nodes of a turn; values are read off the tape after forward.
pub struct TurnLosses {
    pub gate: NodeId,
    pub value: Option<NodeId>,
    pub total: NodeId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurnPrediction {
    pub gate_probs: Vec<[f64; 3]>,
    pub gates: Vec<GateClass>,
    /// Decoded value token ids for PTR-gated pairs.
    pub values: Vec<Option<Vec<u32>>>,
}

/// One encoded turn: all three streams plus ready-to-use decoder context.
pub struct EncodedTurn {
    pub streams: Streams,
    memory: NodeId,
    memory_token_ids: Vec<u32>,
}

pub struct CsfnModel {
    pub cfg: ModelConfig,
    pub store: ParamStore,
    pub emb: EmbeddingParams,
    pub layers: Vec<CsfnLayerParams>,
    pub gate: crate::gate::GateParams,
    pub dec: DecoderParams,
    pub schema: SchemaGraph,
    pub graph_tokens: GraphNodeTokens,
    vocab_size: usize,
}

impl CsfnModel {
    /// Fresh model with uniform(−0.1, 0.1) weight matrices, zero biases and
    /// unit LayerNorm scales, seeded deterministically.
    pub fn new(cfg: ModelConfig, schema: &SchemaGraph, vocab: &Vocabulary, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut store = ParamStore::new();
        let mut rng = SplitMix64::new(seed);
        let emb = EmbeddingParams::register(&mut store, vocab.len(), cfg.d_model, cfg.max_positions, &mut rng)?;
        let mut layers = Vec::with_capacity(cfg.layers);
        for l in 0..cfg.layers {
            layers.push(CsfnLayerParams::register(
                &mut store,
                l,
                cfg.d_model,
                cfg.heads,
                cfg.ffn_inner,
                &mut rng,
            )?);
        }
        let gate = crate::gate::GateParams::register(&mut store, cfg.d_model, &mut rng)?;
        let dec = DecoderParams::register(&mut store, cfg.d_model, emb.token, &mut rng)?;
        let graph_tokens = graph_node_tokens(schema, vocab);
        Ok(Self {
            cfg,
            store,
            emb,
            layers,
            gate,
            dec,
            schema: schema.clone(),
            graph_tokens,
            vocab_size: vocab.len(),
        })
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    pub fn num_domain_slots(&self) -> usize {
        self.schema.num_domain_slots()
    }

    pub fn count_parameters(&self) -> usize {
        self.store.count_parameters()
    }

    /// `H₀ᴳ`; depends only on the embedding tables, so one node can be
    /// shared by every turn on the same tape.
    pub fn graph_h0(&self, g: &mut Graph) -> Result<NodeId> {
        self.emb.embed_graph_nodes(g, &self.store, &self.graph_tokens)
    }

    /// Run the fusion stack over one turn.
    pub fn encode_turn(
        &self,
        g: &mut Graph,
        h0_graph: NodeId,
        x_seq: &TokenSequence,
        b_seq: &TokenSequence,
        a_graph: &AdjacencyMatrix,
        dropout: &mut DropoutMode<'_>,
    ) -> Result<EncodedTurn> {
        let a_state = b_seq
            .adjacency
            .as_ref()
            .ok_or_else(|| contract_err("encode_turn", "state sequence lacks its adjacency"))?;
        if a_graph.rows() != self.schema.node_count() || a_graph.cols() != self.schema.node_count() {
            return Err(shape_err(
                "encode_turn",
                alloc::format!(
                    "graph mask {}x{} vs {} schema nodes",
                    a_graph.rows(),
                    a_graph.cols(),
                    self.schema.node_count()
                ),
            ));
        }
        let h0_x = self.emb.embed_sequence(g, &self.store, x_seq)?;
        let h0_b = self.emb.embed_sequence(g, &self.store, b_seq)?;
        let streams = csfn_forward(
            g,
            &self.store,
            Streams {
                g: h0_graph,
                x: h0_x,
                b: h0_b,
            },
            a_graph,
            a_state,
            &self.layers,
            dropout,
        )?;
        let memory = g.concat_rows(&[streams.x, streams.b])?;
        let mut memory_token_ids = x_seq.token_ids.clone();
        memory_token_ids.extend_from_slice(&b_seq.token_ids);
        Ok(EncodedTurn {
            streams,
            memory,
            memory_token_ids,
        })
    }

    fn decoder_context(&self, turn: &EncodedTurn) -> DecoderContext {
        DecoderContext {
            memory: turn.memory,
            memory_token_ids: turn.memory_token_ids.clone(),
            vocab_size: self.vocab_size,
        }
    }

    fn decoder_init(&self, g: &mut Graph, turn: &EncodedTurn, ordinal: usize) -> Result<(NodeId, NodeId)> {
        let x_cls = g.row(turn.streams.x, 0)?;
        let b_cls = g.row(turn.streams.b, 0)?;
        let g0 = g.add(x_cls, b_cls)?;
        let row = self.schema.domain_slot_row_index(ordinal + 1)?;
        let e0 = g.row(turn.streams.g, row)?;
        Ok((g0, e0))
    }

    /// Teacher-forced joint loss of one turn: summed gate cross-entropy plus
    /// summed value cross-entropy over gold-PTR pairs.
    pub fn turn_loss(
        &self,
        g: &mut Graph,
        h0_graph: NodeId,
        x_seq: &TokenSequence,
        b_seq: &TokenSequence,
        a_graph: &AdjacencyMatrix,
        targets: &TurnTargets,
        vocab: &Vocabulary,
        dropout: &mut DropoutMode<'_>,
    ) -> Result<TurnLosses> {
        let j = self.schema.num_domain_slots();
        if targets.gate_labels.len() != j || targets.values.len() != j {
            return Err(shape_err("turn_loss", "targets sized differently than the schema"));
        }
        let turn = self.encode_turn(g, h0_graph, x_seq, b_seq, a_graph, dropout)?;
        let probs = slot_gate(g, &self.store, turn.streams.g, &self.schema, &self.gate)?;
        let gate = gate_loss(g, probs, &targets.gate_labels)?;

        let ctx = self.decoder_context(&turn);
        let mut value_total: Option<NodeId> = None;
        for (ordinal, gold) in targets.values.iter().enumerate() {
            let Some(gold_ids) = gold else { continue };
            let (g0, e0) = self.decoder_init(g, &turn, ordinal)?;
            let loss = value_loss_teacher_forced(g, &self.store, g0, e0, gold_ids, &ctx, &self.dec, vocab)?;
            value_total = Some(match value_total {
                Some(t) => g.add(t, loss)?,
                None => loss,
            });
        }
        let total = match value_total {
            Some(v) => g.add(gate, v)?,
            None => gate,
        };
        Ok(TurnLosses {
            gate,
            value: value_total,
            total,
        })
    }

    /// Greedy per-turn prediction. `forced_gates` substitutes the gate
    /// decisions (oracle experiments) while values are still decoded for
    /// PTR-gated pairs.
    pub fn predict_turn(
        &self,
        g: &mut Graph,
        h0_graph: NodeId,
        x_seq: &TokenSequence,
        b_seq: &TokenSequence,
        a_graph: &AdjacencyMatrix,
        vocab: &Vocabulary,
        forced_gates: Option<&[GateClass]>,
    ) -> Result<TurnPrediction> {
        let j = self.schema.num_domain_slots();
        let turn = self.encode_turn(g, h0_graph, x_seq, b_seq, a_graph, &mut DropoutMode::Off)?;
        let probs_node = slot_gate(g, &self.store, turn.streams.g, &self.schema, &self.gate)?;
        let mut gate_probs = Vec::with_capacity(j);
        for r in 0..j {
            let row = g.value(probs_node).row(r);
            gate_probs.push([row[0], row[1], row[2]]);
        }
        let gates: Vec<GateClass> = match forced_gates {
            Some(forced) => {
                if forced.len() != j {
                    return Err(shape_err("predict_turn", "forced gate count mismatch"));
                }
                forced.to_vec()
            }
            None => gate_probs.iter().map(|p| argmax_gate(p)).collect(),
        };
        let ctx = self.decoder_context(&turn);
        let mut values: Vec<Option<Vec<u32>>> = alloc::vec![None; j];
        for (ordinal, &gate) in gates.iter().enumerate() {
            if gate != GateClass::Ptr {
                continue;
            }
            let (g0, e0) = self.decoder_init(g, &turn, ordinal)?;
            let ids = decode_value(
                g,
                &self.store,
                g0,
                e0,
                &ctx,
                &self.dec,
                vocab,
                self.cfg.max_decode_len,
            )?;
            values[ordinal] = Some(ids);
        }
        Ok(TurnPrediction {
            gate_probs,
            gates,
            values,
        })
    }

    /// Value tokens as strings, for state assembly.
    pub fn value_tokens(values: &[Option<Vec<u32>>], vocab: &Vocabulary) -> Vec<Option<Vec<String>>> {
        values
            .iter()
            .map(|v| {
                v.as_ref().map(|ids| {
                    ids.iter().map(|&id| alloc::string::ToString::to_string(vocab.token(id))).collect()
                })
            })
            .collect()
    }

    /// Verify that a schema matches the dimensions this model was built for.
    pub fn check_schema(&self, schema: &SchemaGraph) -> Result<()> {
        let same = schema.num_domains() == self.schema.num_domains()
            && schema.num_slots() == self.schema.num_slots()
            && schema.num_domain_slots() == self.schema.num_domain_slots();
        if !same {
            return Err(CoreError::Checkpoint(alloc::format!(
                "schema dimensions ({}, {}, {}) do not match the model ({}, {}, {})",
                schema.num_domains(),
                schema.num_slots(),
                schema.num_domain_slots(),
                self.schema.num_domains(),
                self.schema.num_slots(),
                self.schema.num_domain_slots()
            )));
        }
        Ok(())
    }
}
