//! Teacher-forced training: per turn, encode the gold previous state with
//! the current utterance and the schema graph, take the joint
//! gate-plus-value loss, and apply ADAM over batch-accumulated gradients
//! with global-norm clipping. Deterministic for a fixed seed.

use std::io::Write;
use std::path::PathBuf;
use std::str::FromStr;

use csfn_core::adam::{AdamConfig, AdamState};
use csfn_core::fusion::DropoutMode;
use csfn_core::model::{CsfnModel, ModelConfig, TurnTargets};
use csfn_core::params::clip_grad_norm;
use csfn_core::rng::SplitMix64;
use csfn_core::schema::{AdjacencyMatrix, SchemaGraph};
use csfn_core::sequence::{serialize_state, serialize_utterance, TokenSequence};
use csfn_core::state::DialogueState;
use csfn_core::vocab::Vocabulary;
use csfn_core::{CoreError, Graph};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::data::{corpus_tokens, schema_tokens, state_from_triplets, Corpus};
use crate::error::{AppError, Result};
use crate::infer::{infer_split, OracleMode};
use crate::metrics::joint_goal_accuracy;
use crate::targets::make_targets;

/// Which adjacency feeds the graph stream's internal attention.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ablation {
    /// Rule-built schema adjacency.
    Schema,
    /// Fully connected (no schema knowledge).
    Ones,
    /// Node-independent (self-loops only).
    Identity,
}

impl Ablation {
    pub fn name(self) -> &'static str {
        match self {
            Ablation::Schema => "schema",
            Ablation::Ones => "ones",
            Ablation::Identity => "identity",
        }
    }

    pub fn graph_mask(self, schema: &SchemaGraph) -> AdjacencyMatrix {
        let n = schema.node_count();
        match self {
            Ablation::Schema => schema.adjacency_matrix(),
            Ablation::Ones => AdjacencyMatrix::ones(n, n),
            Ablation::Identity => AdjacencyMatrix::identity(n),
        }
    }
}

impl FromStr for Ablation {
    type Err = AppError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "schema" => Ok(Ablation::Schema),
            "ones" => Ok(Ablation::Ones),
            "identity" => Ok(Ablation::Identity),
            other => Err(AppError::data(format!(
                "unknown ablation `{other}` (schema|ones|identity)"
            ))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub grad_clip: f64,
    pub ablation: Ablation,
    /// Disables the unconfirmed extensions (dropout) for a literal reading
    /// of the architecture.
    pub strict_paper: bool,
    pub d_model: usize,
    pub heads: usize,
    pub layers: usize,
    pub ffn_inner: Option<usize>,
    pub max_decode_len: usize,
    pub max_utt_len: usize,
    pub dropout: f64,
    pub early_stop_patience: usize,
    pub embedding_file: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 1e-4,
            seed: 1,
            grad_clip: 5.0,
            ablation: Ablation::Schema,
            strict_paper: false,
            d_model: 400,
            heads: 4,
            layers: 6,
            ffn_inner: None,
            max_decode_len: 10,
            max_utt_len: 128,
            dropout: 0.1,
            early_stop_patience: 5,
            embedding_file: None,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        let mut cfg = ModelConfig::new(self.d_model, self.heads, self.layers);
        if let Some(inner) = self.ffn_inner {
            cfg.ffn_inner = inner;
        }
        cfg.max_decode_len = self.max_decode_len;
        cfg.max_positions = self.max_utt_len.max(2);
        cfg.dropout = if self.strict_paper { 0.0 } else { self.dropout };
        cfg
    }
}

/// One optimizer step in the JSONL training log.
#[derive(Debug, Serialize)]
pub struct TrainLogEntry {
    pub epoch: usize,
    pub step: usize,
    pub l_gate: f64,
    pub l_value: f64,
    pub l_total: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_l_gate: f64,
    pub mean_l_value: f64,
    pub mean_l_total: f64,
    pub valid_joint_accuracy: Option<f64>,
}

pub struct TrainOutcome {
    pub model: CsfnModel,
    pub vocab: Vocabulary,
    pub history: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub oov_gold_tokens: usize,
}

/// Vocabulary from the training split plus schema-node tokens.
pub fn build_vocab(corpus: &Corpus, schema: &SchemaGraph) -> Vocabulary {
    Vocabulary::build(
        schema_tokens(schema)
            .into_iter()
            .chain(corpus_tokens(&corpus.train)),
    )
}

struct TurnSample {
    x: TokenSequence,
    b: TokenSequence,
    targets: TurnTargets,
}

fn build_samples(
    corpus: &Corpus,
    schema: &SchemaGraph,
    vocab: &Vocabulary,
    max_utt_len: usize,
) -> Result<(Vec<TurnSample>, usize)> {
    let mut samples = Vec::new();
    let mut oov = 0usize;
    for dlg in &corpus.train {
        let mut prev = DialogueState::new();
        for turn in &dlg.turns {
            let cur = state_from_triplets(&turn.state)?;
            let x = serialize_utterance(&turn.system, &turn.user, vocab, max_utt_len)?;
            if x.truncated {
                log::warn!("dialogue {}: training utterance truncated to {max_utt_len}", dlg.id);
            }
            let b = serialize_state(&prev, vocab)?;
            let (targets, unknown) = make_targets(&prev, &cur, schema, vocab);
            if unknown > 0 {
                log::warn!("dialogue {}: {unknown} gold value tokens mapped to [UNK]", dlg.id);
            }
            oov += unknown;
            samples.push(TurnSample { x, b, targets });
            prev = cur;
        }
    }
    Ok((samples, oov))
}

struct BatchLoss {
    gate: f64,
    value: f64,
    total: f64,
}

/// Forward one batch, leaving the loss node on the tape.
fn batch_forward(
    model: &CsfnModel,
    vocab: &Vocabulary,
    a_graph: &AdjacencyMatrix,
    samples: &[TurnSample],
    indices: &[usize],
    graph: &mut Graph,
    dropout: &mut DropoutMode<'_>,
) -> Result<(csfn_core::NodeId, BatchLoss)> {
    let h0g = model.graph_h0(graph)?;
    let mut total_node = None;
    let mut gate_sum = 0.0;
    let mut value_sum = 0.0;
    for &idx in indices {
        let s = &samples[idx];
        let losses = model.turn_loss(graph, h0g, &s.x, &s.b, a_graph, &s.targets, vocab, dropout)?;
        gate_sum += graph.value(losses.gate).item()?;
        if let Some(v) = losses.value {
            value_sum += graph.value(v).item()?;
        }
        total_node = Some(match total_node {
            Some(t) => graph.add(t, losses.total)?,
            None => losses.total,
        });
    }
    let total_node = total_node.ok_or_else(|| AppError::data("empty batch"))?;
    let scale = 1.0 / indices.len() as f64;
    let scaled = graph.scale(total_node, scale);
    Ok((
        scaled,
        BatchLoss {
            gate: gate_sum * scale,
            value: value_sum * scale,
            total: graph.value(scaled).item()?,
        },
    ))
}

/// Mean batch loss of the first `batch_size` training turns with a freshly
/// initialized model and no optimizer step — used to verify that the
/// ablation mask actually flows into attention.
pub fn first_batch_loss(corpus: &Corpus, schema: &SchemaGraph, cfg: &TrainConfig) -> Result<f64> {
    let vocab = build_vocab(corpus, schema);
    let model = CsfnModel::new(cfg.model_config(), schema, &vocab, cfg.seed)?;
    let (samples, _) = build_samples(corpus, schema, &vocab, cfg.max_utt_len)?;
    let indices: Vec<usize> = (0..samples.len().min(cfg.batch_size)).collect();
    let a_graph = cfg.ablation.graph_mask(schema);
    let mut graph = Graph::new();
    let (_, loss) = batch_forward(
        &model,
        &vocab,
        &a_graph,
        &samples,
        &indices,
        &mut graph,
        &mut DropoutMode::Off,
    )?;
    Ok(loss.total)
}

pub fn train(
    corpus: &Corpus,
    schema: &SchemaGraph,
    cfg: &TrainConfig,
    mut log_sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    if corpus.train.is_empty() {
        return Err(AppError::data("training corpus is empty"));
    }
    let vocab = build_vocab(corpus, schema);
    let mut model = CsfnModel::new(cfg.model_config(), schema, &vocab, cfg.seed)?;
    if let Some(path) = &cfg.embedding_file {
        let loaded = crate::vocab_io::load_embedding_file(path, &vocab, &mut model)?;
        log::info!("initialized {loaded} token embeddings from {}", path.display());
    }
    let (samples, oov_gold_tokens) = build_samples(corpus, schema, &vocab, cfg.max_utt_len)?;
    let a_graph = cfg.ablation.graph_mask(schema);

    let mut adam = AdamState::new(&model.store, AdamConfig::with_lr(cfg.lr));
    let mut shuffle_rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut dropout_rng = SplitMix64::new(cfg.seed ^ 0x5eed_d20f_0u64);
    let dropout_rate = model.cfg.dropout;

    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, Vec<csfn_core::Tensor>)> = None;
    let mut since_best = 0usize;
    let mut stopped_early = false;
    let mut step = 0usize;

    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut shuffle_rng);
        let (mut eg, mut ev, mut et, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for chunk in order.chunks(cfg.batch_size) {
            let mut graph = Graph::new();
            let mut dropout = if dropout_rate > 0.0 {
                DropoutMode::On {
                    rate: dropout_rate,
                    rng: &mut dropout_rng,
                }
            } else {
                DropoutMode::Off
            };
            let (loss_node, loss) =
                batch_forward(&model, &vocab, &a_graph, &samples, chunk, &mut graph, &mut dropout)?;
            if !loss.total.is_finite() {
                return Err(AppError::NonFinite(format!(
                    "loss became non-finite at epoch {epoch}, step {step}"
                )));
            }
            let grads = graph.backward(&model.store, loss_node)?;
            drop(graph);
            model.store.zero_grads();
            model.store.accumulate(&grads)?;
            clip_grad_norm(&mut model.store, cfg.grad_clip).map_err(nan_abort)?;
            adam.step(&mut model.store).map_err(nan_abort)?;

            step += 1;
            eg += loss.gate;
            ev += loss.value;
            et += loss.total;
            batches += 1;
            if let Some(sink) = log_sink.as_deref_mut() {
                let entry = TrainLogEntry {
                    epoch,
                    step,
                    l_gate: loss.gate,
                    l_value: loss.value,
                    l_total: loss.total,
                    lr: cfg.lr,
                };
                serde_json::to_writer(&mut *sink, &entry)
                    .and_then(|_| writeln!(sink).map_err(serde_json::Error::io))
                    .map_err(|e| AppError::data(format!("training log write failed: {e}")))?;
            }
        }

        let valid_acc = if corpus.valid.is_empty() {
            None
        } else {
            let outcomes = infer_split(
                &model,
                &vocab,
                schema,
                &a_graph,
                &corpus.valid,
                OracleMode::None,
                cfg.max_utt_len,
                1,
            )?;
            let records: Vec<_> = outcomes.into_iter().flat_map(|o| o.records).collect();
            let pred: Vec<_> = records.iter().map(|r| r.predicted.clone()).collect();
            let gold: Vec<_> = records.iter().map(|r| r.gold.clone()).collect();
            Some(joint_goal_accuracy(&pred, &gold)?)
        };

        let denominator = batches.max(1) as f64;
        history.push(EpochStats {
            epoch,
            mean_l_gate: eg / denominator,
            mean_l_value: ev / denominator,
            mean_l_total: et / denominator,
            valid_joint_accuracy: valid_acc,
        });
        log::info!(
            "epoch {epoch}: loss {:.4} (gate {:.4}, value {:.4}){}",
            et / denominator,
            eg / denominator,
            ev / denominator,
            valid_acc.map_or(String::new(), |a| format!(", valid joint acc {a:.4}"))
        );

        if let Some(acc) = valid_acc {
            let improved = best.as_ref().map_or(true, |(_, b, _)| acc > *b);
            if improved {
                best = Some((epoch, acc, model.store.snapshot()));
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= cfg.early_stop_patience {
                    stopped_early = true;
                    log::info!("early stop after epoch {epoch}: no improvement for {since_best} epochs");
                    break;
                }
            }
        }
    }

    let best_epoch = if let Some((epoch, _, snapshot)) = &best {
        model.store.restore(snapshot)?;
        Some(*epoch)
    } else {
        None
    };
    Ok(TrainOutcome {
        model,
        vocab,
        history,
        best_epoch,
        stopped_early,
        oov_gold_tokens,
    })
}

fn nan_abort(err: CoreError) -> AppError {
    match err {
        CoreError::NonFinite { what } => AppError::NonFinite(what),
        other => AppError::Core(other),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toygen::{generate_toy_corpus, toy_schema_def};
    use csfn_core::schema::build_schema_graph;

    fn tiny_cfg() -> TrainConfig {
        TrainConfig {
            epochs: 1,
            batch_size: 8,
            d_model: 16,
            heads: 2,
            layers: 1,
            ffn_inner: Some(32),
            max_utt_len: 64,
            seed: 3,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_lr_leaves_parameters_unchanged() {
        let schema = build_schema_graph(&toy_schema_def()).unwrap();
        let corpus = generate_toy_corpus(4, 7);
        let cfg = TrainConfig {
            lr: 0.0,
            dropout: 0.0,
            ..tiny_cfg()
        };
        let vocab = build_vocab(&corpus, &schema);
        let init = CsfnModel::new(cfg.model_config(), &schema, &vocab, cfg.seed).unwrap();
        let outcome = train(&corpus, &schema, &cfg, None).unwrap();
        for ((_, a), (_, b)) in init.store.iter().zip(outcome.model.store.iter()) {
            assert_eq!(a.value.data(), b.value.data(), "{}", a.name);
        }
    }

    #[test]
    fn one_epoch_reduces_loss_on_second_epoch() {
        let schema = build_schema_graph(&toy_schema_def()).unwrap();
        let corpus = generate_toy_corpus(12, 7);
        let cfg = TrainConfig {
            epochs: 2,
            lr: 1e-3,
            dropout: 0.0,
            ..tiny_cfg()
        };
        let outcome = train(&corpus, &schema, &cfg, None).unwrap();
        assert_eq!(outcome.history.len(), 2);
        assert!(
            outcome.history[1].mean_l_total < outcome.history[0].mean_l_total,
            "{:?}",
            outcome.history
        );
    }

    #[test]
    fn ablation_masks_differ() {
        let schema = build_schema_graph(&toy_schema_def()).unwrap();
        let a = Ablation::Schema.graph_mask(&schema);
        let ones = Ablation::Ones.graph_mask(&schema);
        let eye = Ablation::Identity.graph_mask(&schema);
        assert_ne!(a, ones);
        assert_ne!(a, eye);
        assert_ne!(ones, eye);
        assert!(a.has_unit_diagonal());
    }

    #[test]
    fn first_batch_loss_distinct_across_ablations() {
        let schema = build_schema_graph(&toy_schema_def()).unwrap();
        let corpus = generate_toy_corpus(8, 7);
        let cfg = TrainConfig {
            dropout: 0.0,
            ..tiny_cfg()
        };
        let loss = |ablation| {
            first_batch_loss(
                &corpus,
                &schema,
                &TrainConfig {
                    ablation,
                    ..cfg.clone()
                },
            )
            .unwrap()
        };
        let (a, b, c) = (loss(Ablation::Schema), loss(Ablation::Ones), loss(Ablation::Identity));
        assert_ne!(a, b);
        assert_ne!(a, c);
        assert_ne!(b, c);
    }

    #[test]
    fn training_log_is_jsonl() {
        let schema = build_schema_graph(&toy_schema_def()).unwrap();
        let corpus = generate_toy_corpus(4, 7);
        let mut buf: Vec<u8> = Vec::new();
        let cfg = tiny_cfg();
        train(&corpus, &schema, &cfg, Some(&mut buf)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.is_empty());
        for line in text.lines() {
            let v: serde_json::Value = serde_json::from_str(line).unwrap();
            for key in ["epoch", "step", "l_gate", "l_value", "l_total", "lr"] {
                assert!(v.get(key).is_some(), "missing {key}");
            }
        }
    }
}
