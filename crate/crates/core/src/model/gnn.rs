//! Meta graph neural network: behavior semantic encoding, behavior relation
//! attention and high-order aggregation.

use crate::autodiff::{Tape, Var};
use crate::data::{BehaviorGraph, BehaviorLayer};
use crate::error::{Error, Result};
use crate::model::{names, Bound, Contextualized, Model};

/// Per-layer embeddings and order-summed readouts. Channel index `K` is the
/// fused (global) channel; `0..K` are the behavior channels.
#[derive(Clone, Debug)]
pub struct EmbeddingState {
    /// `layers[l].0[k]` / `layers[l].1[k]`: user / item embeddings of channel `k` at layer `l`.
    pub layers: Vec<(Vec<Var>, Vec<Var>)>,
    pub readout_users: Vec<Var>,
    pub readout_items: Vec<Var>,
}

impl EmbeddingState {
    pub fn channels(&self) -> usize {
        self.readout_users.len()
    }
}

/// One residual, weight-free convolution step:
/// `E'_u = E_u + σ(Â E_v)`, `E'_v = E_v + σ(Âᵀ E_u)`.
pub fn graph_conv(tape: &mut Tape, layer: &BehaviorLayer, users: Var, items: Var, slope: f64) -> Result<(Var, Var)> {
    let to_users = tape.spmm(&layer.normalized, items)?;
    let to_users = tape.leaky_relu(to_users, slope);
    let next_users = tape.add(users, to_users)?;
    let to_items = tape.spmm(&layer.normalized_t, users)?;
    let to_items = tape.leaky_relu(to_items, slope);
    let next_items = tape.add(items, to_items)?;
    Ok((next_users, next_items))
}

/// Output of [`behavior_attention`] for one entity set.
#[derive(Clone, Debug)]
pub struct Attention {
    /// Sum of the refined channels.
    pub fused: Var,
    /// Refined channel per behavior, `[n, d]`.
    pub refined: Vec<Var>,
    /// `weights[h][k]`: `[n, K]` softmax weights over `k'` for head `h`, query channel `k`.
    pub weights: Vec<Vec<Var>>,
}

/// Multi-head dot-product attention across behavior channels.
///
/// Head `h` projects each channel with `Qʰ` (rows `h·d/H..(h+1)·d/H` of `q`),
/// scores channel pairs by scaled dot product, and mixes the `h`-th slice of
/// the raw channels with the resulting weights. The same projection serves
/// as query and key; there is no value projection.
pub fn behavior_attention(tape: &mut Tape, channels: &[Var], q: Var, heads: usize) -> Result<Attention> {
    let first = *channels.first().ok_or(Error::Config("attention needs at least one channel".into()))?;
    let d = tape.shape(first)[1];
    if heads == 0 || !d.is_multiple_of(heads) {
        return Err(Error::Config(format!("head count {heads} must divide embedding size {d}")));
    }
    let width = d / heads;
    let temperature = 1.0 / (width as f64).sqrt();
    let projected: Vec<Var> = channels
        .iter()
        .map(|&c| tape.matmul_nt(c, q))
        .collect::<Result<_>>()?;

    let mut head_outputs: Vec<Vec<Var>> = vec![Vec::with_capacity(heads); channels.len()];
    let mut weights = Vec::with_capacity(heads);
    for h in 0..heads {
        let (lo, hi) = (h * width, (h + 1) * width);
        let keys: Vec<Var> = projected.iter().map(|&p| tape.slice(p, lo, hi)).collect::<Result<_>>()?;
        let values: Vec<Var> = channels.iter().map(|&c| tape.slice(c, lo, hi)).collect::<Result<_>>()?;
        let mut head_weights = Vec::with_capacity(channels.len());
        for (k, out) in head_outputs.iter_mut().enumerate() {
            let logits: Vec<Var> = keys
                .iter()
                .map(|&key| {
                    let dot = tape.row_dot(keys[k], key)?;
                    Ok(tape.scale(dot, temperature))
                })
                .collect::<Result<_>>()?;
            let logits = tape.concat(&logits)?;
            let beta = tape.softmax(logits)?;
            let mut mixed = None;
            for (k2, &value) in values.iter().enumerate() {
                let w = tape.slice(beta, k2, k2 + 1)?;
                let term = tape.mul(w, value)?;
                mixed = Some(match mixed {
                    None => term,
                    Some(acc) => tape.add(acc, term)?,
                });
            }
            out.push(mixed.expect("at least one channel"));
            head_weights.push(beta);
        }
        weights.push(head_weights);
    }

    let refined: Vec<Var> = head_outputs.iter().map(|parts| tape.concat(parts)).collect::<Result<_>>()?;
    let fused = sum_all(tape, &refined)?;
    Ok(Attention { fused, refined, weights })
}

fn sum_all(tape: &mut Tape, vars: &[Var]) -> Result<Var> {
    let mut acc = vars[0];
    for &v in &vars[1..] {
        acc = tape.add(acc, v)?;
    }
    Ok(acc)
}

fn fuse(tape: &mut Tape, channels: &[Var], q: Option<Var>, model: &Model) -> Result<Var> {
    match q {
        Some(q) => Ok(behavior_attention(tape, channels, q, model.config.heads)?.fused),
        None => {
            let total = sum_all(tape, channels)?;
            Ok(tape.scale(total, 1.0 / channels.len() as f64))
        }
    }
}

/// Runs `L` layers from the contextualized embeddings.
///
/// Layer 0 holds the contextualized embeddings; each later layer convolves
/// every behavior channel of the previous layer. The fused channel of a
/// layer is attention over that layer's behavior channels. Readouts sum all
/// layers `0..=L` in layer order.
pub fn propagate(tape: &mut Tape, ctx: &Contextualized, graph: &BehaviorGraph, bound: &Bound, model: &Model) -> Result<EmbeddingState> {
    let (q_users, q_items) = if model.config.ablation.no_mfeat {
        (None, None)
    } else {
        let q = bound.get(names::ATT_Q);
        let qi = if model.config.share_attention { q } else { bound.get(names::ATT_Q_ITEM) };
        (Some(q), Some(qi))
    };
    let k = graph.num_behaviors();
    let mut users = ctx.users.clone();
    let mut items = ctx.items.clone();
    let mut layers = Vec::with_capacity(model.config.layers + 1);
    for l in 0..=model.config.layers {
        if l > 0 {
            for b in 0..k {
                let (u, i) = graph_conv(tape, graph.layer(b), users[b], items[b], model.config.slope)?;
                users[b] = u;
                items[b] = i;
            }
        }
        let fused_u = fuse(tape, &users[..k], q_users, model)?;
        let fused_i = fuse(tape, &items[..k], q_items, model)?;
        let mut lu = users[..k].to_vec();
        lu.push(fused_u);
        let mut li = items[..k].to_vec();
        li.push(fused_i);
        layers.push((lu, li));
    }

    let mut readout_users = Vec::with_capacity(k + 1);
    let mut readout_items = Vec::with_capacity(k + 1);
    for c in 0..=k {
        let us: Vec<Var> = layers.iter().map(|(u, _)| u[c]).collect();
        let is: Vec<Var> = layers.iter().map(|(_, i)| i[c]).collect();
        readout_users.push(sum_all(tape, &us)?);
        readout_items.push(sum_all(tape, &is)?);
    }
    Ok(EmbeddingState {
        layers,
        readout_users,
        readout_items,
    })
}
