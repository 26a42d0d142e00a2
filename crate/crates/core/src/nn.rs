//! Pure forward math for the primitive layers: layer normalization, the
//! two-layer ReLU feed-forward block, masked softmax and cross-entropy.
//! The autograd tape in [`crate::graph`] delegates its forward passes here.

use alloc::format;
use alloc::vec;

use crate::error::{contract_err, shape_err, Result};
use crate::math;
use crate::schema::AdjacencyMatrix;
use crate::tensor::Tensor;

/// Probability floor applied inside cross-entropy before the log, so a
/// confidently wrong prediction early in training yields a large but finite
/// loss instead of −∞.
pub const PROB_FLOOR: f64 = 1e-12;

/// Row-wise layer normalization: each row is normalized to zero mean and
/// unit variance (population variance + eps), then scaled by `gamma` and
/// shifted by `beta` (both `1×d`).
pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<Tensor> {
    let d = x.cols();
    if gamma.rows() != 1 || gamma.cols() != d || beta.rows() != 1 || beta.cols() != d {
        return Err(shape_err(
            "layer_norm",
            format!("x cols {d}, gamma {:?}, beta {:?}", gamma.shape(), beta.shape()),
        ));
    }
    if d == 0 || eps <= 0.0 {
        return Err(contract_err("layer_norm", "d >= 1 and eps > 0 required"));
    }
    let mut out = Tensor::zeros(x.rows(), d);
    for r in 0..x.rows() {
        let row = x.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let inv_std = 1.0 / math::sqrt(var + eps);
        let out_row = out.row_mut(r);
        for i in 0..d {
            out_row[i] = (row[i] - mean) * inv_std * gamma.data()[i] + beta.data()[i];
        }
    }
    Ok(out)
}

/// `max(0, xW1 + b1)W2 + b2`, applied row-wise.
pub fn ffn(x: &Tensor, w1: &Tensor, b1: &Tensor, w2: &Tensor, b2: &Tensor) -> Result<Tensor> {
    if w1.cols() < 1 {
        return Err(contract_err("ffn", "inner dimension must be >= 1"));
    }
    let hidden = x.matmul(w1)?.add_row_broadcast(b1)?.map(relu);
    hidden.matmul(w2)?.add_row_broadcast(b2)
}

#[inline]
pub fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// Row-wise softmax with an optional binary mask. Masked entries receive
/// probability exactly zero; rows with at least one allowed entry sum to 1;
/// a fully-masked row comes back as all zeros rather than NaN, which keeps
/// downstream sums finite (schema self-loops make such rows unreachable in
/// the graph stream).
///
/// The `None` and all-ones paths execute the identical arithmetic sequence,
/// so they agree bit for bit.
pub fn masked_softmax(logits: &Tensor, mask: Option<&AdjacencyMatrix>) -> Result<Tensor> {
    if let Some(m) = mask {
        if m.rows() != logits.rows() || m.cols() != logits.cols() {
            return Err(shape_err(
                "masked_softmax",
                format!("logits {:?}, mask {}x{}", logits.shape(), m.rows(), m.cols()),
            ));
        }
    }
    let cols = logits.cols();
    let mut out = Tensor::zeros(logits.rows(), cols);
    let mut exps = vec![0.0; cols];
    for r in 0..logits.rows() {
        let row = logits.row(r);
        let allowed = |j: usize| mask.map_or(true, |m| m.get(r, j));
        // Row max over allowed entries keeps the exponentials in range even
        // for logits scaled by 1/sqrt(d_model/H) at small d.
        let mut max = f64::NEG_INFINITY;
        for (j, &v) in row.iter().enumerate() {
            if allowed(j) && v > max {
                max = v;
            }
        }
        if max == f64::NEG_INFINITY {
            continue; // fully masked row stays zero
        }
        let mut sum = 0.0;
        for (j, &v) in row.iter().enumerate() {
            if allowed(j) {
                let e = math::exp(v - max);
                exps[j] = e;
                sum += e;
            } else {
                exps[j] = 0.0;
            }
        }
        let out_row = out.row_mut(r);
        for j in 0..cols {
            out_row[j] = exps[j] / sum;
        }
    }
    Ok(out)
}

/// Plain row-wise softmax.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    masked_softmax(logits, None)
}

/// `−log(probs · onehotᵀ)` for a `1×n` distribution and a valid one-hot row,
/// with the probability clamped at [`PROB_FLOOR`] before the log.
pub fn cross_entropy(probs: &Tensor, onehot: &Tensor) -> Result<f64> {
    if !probs.same_shape(onehot) || probs.rows() != 1 {
        return Err(shape_err(
            "cross_entropy",
            format!("probs {:?}, onehot {:?}", probs.shape(), onehot.shape()),
        ));
    }
    let mut hot = None;
    for (i, &v) in onehot.data().iter().enumerate() {
        if v == 1.0 {
            if hot.is_some() {
                return Err(contract_err("cross_entropy", "more than one hot entry"));
            }
            hot = Some(i);
        } else if v != 0.0 {
            return Err(contract_err("cross_entropy", format!("entry {v} is not 0 or 1")));
        }
    }
    let hot = hot.ok_or_else(|| contract_err("cross_entropy", "no hot entry"))?;
    let total: f64 = probs.data().iter().sum();
    if (total - 1.0).abs() > 1e-6 {
        return Err(contract_err("cross_entropy", format!("probs sum to {total}")));
    }
    Ok(neg_log_prob(probs.data()[hot]))
}

#[inline]
pub(crate) fn neg_log_prob(p: f64) -> f64 {
    -math::ln(p.max(PROB_FLOOR))
}
