//! Multi-head attention and its graph-masked variant.
//!
//! Scores are `(y Wq)(z Wk)ᵀ / sqrt(d_model/H)` per head; the graph variant
//! sends scores at disallowed pairs to −∞, realized as exact zeros in the
//! softmax. Plain multi-head attention is the fully-connected special case
//! and shares the code path, whose masked and unmasked softmax agree bit for
//! bit on an all-ones mask.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{shape_err, Result};
use crate::graph::{Graph, NodeId};
use crate::params::{ParamId, ParamStore};
use crate::rng::SplitMix64;
use crate::schema::AdjacencyMatrix;
use crate::tensor::Tensor;

/// Projection weights of one attention block. Per-head matrices are stored
/// column-blocked inside `d_model × d_model` tables; head `h` owns columns
/// `h·(d/H) .. (h+1)·(d/H)`. There are no bias terms.
#[derive(Debug, Clone)]
pub struct AttentionParams {
    pub w_q: ParamId,
    pub w_k: ParamId,
    pub w_v: ParamId,
    pub w_o: ParamId,
    pub heads: usize,
    pub d_model: usize,
}

impl AttentionParams {
    pub fn register(
        store: &mut ParamStore,
        prefix: &str,
        d_model: usize,
        heads: usize,
        rng: &mut SplitMix64,
    ) -> Result<Self> {
        if heads == 0 || d_model % heads != 0 {
            return Err(shape_err(
                "attention",
                format!("heads {heads} must divide d_model {d_model}"),
            ));
        }
        let init = crate::embedding::INIT_RANGE;
        let reg = |name: &str, store: &mut ParamStore, rng: &mut SplitMix64| {
            store.register(
                &format!("{prefix}.{name}"),
                Tensor::uniform(d_model, d_model, -init, init, rng),
            )
        };
        Ok(Self {
            w_q: reg("wq", store, rng)?,
            w_k: reg("wk", store, rng)?,
            w_v: reg("wv", store, rng)?,
            w_o: reg("wo", store, rng)?,
            heads,
            d_model,
        })
    }
}

/// Attention output along with the per-head weight matrices (`|Y|×|Z|`
/// rows summing to one), kept around for mask diagnostics in tests.
pub struct AttentionOutput {
    pub output: NodeId,
    pub head_weights: Vec<NodeId>,
}

/// Graph-masked multi-head attention; `mask == None` is ordinary multi-head
/// attention over a fully connected graph.
pub fn graph_multi_head_attention(
    g: &mut Graph,
    store: &ParamStore,
    y: NodeId,
    z: NodeId,
    mask: Option<&AdjacencyMatrix>,
    p: &AttentionParams,
) -> Result<AttentionOutput> {
    let (rows_y, rows_z) = (g.value(y).rows(), g.value(z).rows());
    if let Some(m) = mask {
        if m.rows() != rows_y || m.cols() != rows_z {
            return Err(shape_err(
                "graph_multi_head_attention",
                format!("mask {}x{} vs |Y|={rows_y}, |Z|={rows_z}", m.rows(), m.cols()),
            ));
        }
    }
    let head_dim = p.d_model / p.heads;
    let scale = 1.0 / crate::math::sqrt(head_dim as f64);

    let wq = g.param(store, p.w_q);
    let wk = g.param(store, p.w_k);
    let wv = g.param(store, p.w_v);
    let wo = g.param(store, p.w_o);
    let q = g.matmul(y, wq)?;
    let k = g.matmul(z, wk)?;
    let v = g.matmul(z, wv)?;

    let mut contexts = Vec::with_capacity(p.heads);
    let mut head_weights = Vec::with_capacity(p.heads);
    for h in 0..p.heads {
        let qh = g.slice_cols(q, h * head_dim, head_dim)?;
        let kh = g.slice_cols(k, h * head_dim, head_dim)?;
        let vh = g.slice_cols(v, h * head_dim, head_dim)?;
        let scores = g.matmul_nt(qh, kh)?;
        let scaled = g.scale(scores, scale);
        let weights = g.masked_softmax(scaled, mask)?;
        head_weights.push(weights);
        contexts.push(g.matmul(weights, vh)?);
    }
    let concat = g.concat_cols(&contexts)?;
    let output = g.matmul(concat, wo)?;
    Ok(AttentionOutput {
        output,
        head_weights,
    })
}

/// `MultiHead(Y, Z)`: every query attends over every key.
pub fn multi_head_attention(
    g: &mut Graph,
    store: &ParamStore,
    y: NodeId,
    z: NodeId,
    p: &AttentionParams,
) -> Result<AttentionOutput> {
    graph_multi_head_attention(g, store, y, z, None, p)
}
