//! The fusion stack: L layers, each updating the schema-graph, utterance
//! and previous-state streams with one internal and two external attentions,
//! residual sums, layer normalization and a ReLU feed-forward block.

use alloc::format;

use crate::attention::{graph_multi_head_attention, multi_head_attention, AttentionParams};
use crate::error::Result;
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::schema::AdjacencyMatrix;
use crate::tensor::Tensor;

pub const LN_EPS: f64 = 1e-6;

/// Dropout switch threaded through the forward pass. Training applies
/// inverted dropout to attention outputs and FFN inner activations;
/// evaluation and gradient checking run with `Off`.
pub enum DropoutMode<'a> {
    Off,
    On { rate: f64, rng: &'a mut SplitMix64 },
}

impl DropoutMode<'_> {
    fn apply(&mut self, g: &mut Graph, x: NodeId) -> Result<NodeId> {
        match self {
            DropoutMode::Off => Ok(x),
            DropoutMode::On { rate, rng } => g.dropout(x, *rate, rng),
        }
    }
}

/// Two-layer ReLU feed-forward block parameters; the only biased maps in a
/// fusion layer.
#[derive(Debug, Clone)]
pub struct FfnParams {
    pub w1: ParamId,
    pub b1: ParamId,
    pub w2: ParamId,
    pub b2: ParamId,
}

impl FfnParams {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d_in: usize,
        inner: usize,
        d_out: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let init = crate::embedding::INIT_RANGE;
        Ok(Self {
            w1: store.register(&format!("{prefix}.w1"), Tensor::uniform(d_in, inner, -init, init, rng))?,
            b1: store.register(&format!("{prefix}.b1"), Tensor::zeros(1, inner))?,
            w2: store.register(&format!("{prefix}.w2"), Tensor::uniform(inner, d_out, -init, init, rng))?,
            b2: store.register(&format!("{prefix}.b2"), Tensor::zeros(1, d_out))?,
        })
    }
}

/// `max(0, xW1 + b1)W2 + b2` on the tape, with optional dropout on the inner
/// activation.
pub fn ffn(
    g: &mut Graph,
    store: &ParamStore,
    x: NodeId,
    p: &FfnParams,
    dropout: &mut DropoutMode<'_>,
) -> Result<NodeId> {
    let w1 = g.param(store, p.w1);
    let b1 = g.param(store, p.b1);
    let w2 = g.param(store, p.w2);
    let b2 = g.param(store, p.b2);
    let pre = g.matmul(x, w1)?;
    let pre = g.add_row(pre, b1)?;
    let act = g.relu(pre);
    let act = dropout.apply(g, act)?;
    let out = g.matmul(act, w2)?;
    g.add_row(out, b2)
}

#[derive(Debug, Clone)]
pub struct LayerNormParams {
    pub gamma: ParamId,
    pub beta: ParamId,
}

impl LayerNormParams {
    pub fn register(store: &mut ParamStore, prefix: &str, d: usize) -> Result<Self> {
        Ok(Self {
            gamma: store.register(&format!("{prefix}.gamma"), Tensor::filled(1, d, 1.0))?,
            beta: store.register(&format!("{prefix}.beta"), Tensor::zeros(1, d))?,
        })
    }
}

pub fn layer_norm(g: &mut Graph, store: &ParamStore, x: NodeId, p: &LayerNormParams) -> Result<NodeId> {
    let gamma = g.param(store, p.gamma);
    let beta = g.param(store, p.beta);
    g.layer_norm(x, gamma, beta, LN_EPS)
}

/// One fusion layer: nine attention blocks (three per stream), one FFN per
/// stream and two LayerNorms per stream. Parameters are not shared across
/// layers, and the two LayerNorm applications are distinct.
#[derive(Debug, Clone)]
pub struct CsfnLayerParams {
    pub gg: AttentionParams,
    pub gx: AttentionParams,
    pub gb: AttentionParams,
    pub xx: AttentionParams,
    pub xb: AttentionParams,
    pub xg: AttentionParams,
    pub bb: AttentionParams,
    pub bx: AttentionParams,
    pub bg: AttentionParams,
    pub ffn_g: FfnParams,
    pub ffn_x: FfnParams,
    pub ffn_b: FfnParams,
    pub ln_att_g: LayerNormParams,
    pub ln_att_x: LayerNormParams,
    pub ln_att_b: LayerNormParams,
    pub ln_ffn_g: LayerNormParams,
    pub ln_ffn_x: LayerNormParams,
    pub ln_ffn_b: LayerNormParams,
}

impl CsfnLayerParams {
    pub fn register(
        store: &mut ParamStore,
        layer: usize,
        d_model: usize,
        heads: usize,
        ffn_inner: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        let att = |name: &str, store: &mut ParamStore, rng: &mut SplitMix64| {
            AttentionParams::register(store, &format!("layer{layer}.att.{name}"), d_model, heads, rng)
        };
        let gg = att("gg", store, rng)?;
        let gx = att("gx", store, rng)?;
        let gb = att("gb", store, rng)?;
        let xx = att("xx", store, rng)?;
        let xb = att("xb", store, rng)?;
        let xg = att("xg", store, rng)?;
        let bb = att("bb", store, rng)?;
        let bx = att("bx", store, rng)?;
        let bg = att("bg", store, rng)?;
        let ffn_g = FfnParams::register(store, &format!("layer{layer}.ffn.g"), d_model, ffn_inner, d_model, rng)?;
        let ffn_x = FfnParams::register(store, &format!("layer{layer}.ffn.x"), d_model, ffn_inner, d_model, rng)?;
        let ffn_b = FfnParams::register(store, &format!("layer{layer}.ffn.b"), d_model, ffn_inner, d_model, rng)?;
        let ln_att_g = LayerNormParams::register(store, &format!("layer{layer}.ln_att.g"), d_model)?;
        let ln_att_x = LayerNormParams::register(store, &format!("layer{layer}.ln_att.x"), d_model)?;
        let ln_att_b = LayerNormParams::register(store, &format!("layer{layer}.ln_att.b"), d_model)?;
        let ln_ffn_g = LayerNormParams::register(store, &format!("layer{layer}.ln_ffn.g"), d_model)?;
        let ln_ffn_x = LayerNormParams::register(store, &format!("layer{layer}.ln_ffn.x"), d_model)?;
        let ln_ffn_b = LayerNormParams::register(store, &format!("layer{layer}.ln_ffn.b"), d_model)?;
        Ok(Self {
            gg,
            gx,
            gb,
            xx,
            xb,
            xg,
            bb,
            bx,
            bg,
            ffn_g,
            ffn_x,
            ffn_b,
            ln_att_g,
            ln_att_x,
            ln_att_b,
            ln_ffn_g,
            ln_ffn_x,
            ln_ffn_b,
        })
    }
}

/// Hidden states of the three streams.
#[derive(Debug, Clone, Copy)]
pub struct Streams {
    pub g: NodeId,
    pub x: NodeId,
    pub b: NodeId,
}

fn stream_update(
    g: &mut Graph,
    store: &ParamStore,
    h: NodeId,
    internal: NodeId,
    ext1: NodeId,
    ext2: NodeId,
    ffn_p: &FfnParams,
    ln_att: &LayerNormParams,
    ln_ffn: &LayerNormParams,
    dropout: &mut DropoutMode<'_>,
) -> Result<NodeId> {
    let s1 = g.add(h, internal)?;
    let s2 = g.add(s1, ext1)?;
    let s3 = g.add(s2, ext2)?;
    let c = layer_norm(g, store, s3, ln_att)?;
    let f = ffn(g, store, c, ffn_p, dropout)?;
    let sum = g.add(c, f)?;
    layer_norm(g, store, sum, ln_ffn)
}

/// One layer's update of all three streams. The graph stream's internal
/// attention is masked by the schema adjacency, the previous-state stream's
/// by the triplet-block adjacency; the utterance stream self-attends
/// unmasked; all six external attentions are unmasked.
pub fn csfn_layer(
    g: &mut Graph,
    store: &ParamStore,
    streams: Streams,
    a_g: &AdjacencyMatrix,
    a_b: &AdjacencyMatrix,
    p: &CsfnLayerParams,
    dropout: &mut DropoutMode<'_>,
) -> Result<Streams> {
    let (hg, hx, hb) = (streams.g, streams.x, streams.b);

    let i_gg = graph_multi_head_attention(g, store, hg, hg, Some(a_g), &p.gg)?.output;
    let i_gg = dropout.apply(g, i_gg)?;
    let e_gx = multi_head_attention(g, store, hg, hx, &p.gx)?.output;
    let e_gx = dropout.apply(g, e_gx)?;
    let e_gb = multi_head_attention(g, store, hg, hb, &p.gb)?.output;
    let e_gb = dropout.apply(g, e_gb)?;

    let i_xx = multi_head_attention(g, store, hx, hx, &p.xx)?.output;
    let i_xx = dropout.apply(g, i_xx)?;
    let e_xb = multi_head_attention(g, store, hx, hb, &p.xb)?.output;
    let e_xb = dropout.apply(g, e_xb)?;
    let e_xg = multi_head_attention(g, store, hx, hg, &p.xg)?.output;
    let e_xg = dropout.apply(g, e_xg)?;

    let i_bb = graph_multi_head_attention(g, store, hb, hb, Some(a_b), &p.bb)?.output;
    let i_bb = dropout.apply(g, i_bb)?;
    let e_bx = multi_head_attention(g, store, hb, hx, &p.bx)?.output;
    let e_bx = dropout.apply(g, e_bx)?;
    let e_bg = multi_head_attention(g, store, hb, hg, &p.bg)?.output;
    let e_bg = dropout.apply(g, e_bg)?;

    Ok(Streams {
        g: stream_update(g, store, hg, i_gg, e_gx, e_gb, &p.ffn_g, &p.ln_att_g, &p.ln_ffn_g, dropout)?,
        x: stream_update(g, store, hx, i_xx, e_xb, e_xg, &p.ffn_x, &p.ln_att_x, &p.ln_ffn_x, dropout)?,
        b: stream_update(g, store, hb, i_bb, e_bx, e_bg, &p.ffn_b, &p.ln_att_b, &p.ln_ffn_b, dropout)?,
    })
}

/// Sequential application of the layer stack.
pub fn csfn_forward(
    g: &mut Graph,
    store: &ParamStore,
    mut streams: Streams,
    a_g: &AdjacencyMatrix,
    a_b: &AdjacencyMatrix,
    layers: &[CsfnLayerParams],
    dropout: &mut DropoutMode<'_>,
) -> Result<Streams> {
    for p in layers {
        streams = csfn_layer(g, store, streams, a_g, a_b, p, dropout)?;
    }
    Ok(streams)
}
