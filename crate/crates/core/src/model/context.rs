//! Meta-knowledge learner for behavior heterogeneity.
//!
//! For entity `i` and behavior `k` the context vector is
//! `H = E_b[k] ‖ E_i ‖ Σ_j α_ijk E_j` (length `3d`). A linear meta network
//! maps `H` to two factor matrices `V¹ (d'×d)` and `V² (d×d')`, and the
//! contextualized embedding is `V² V¹ E_i`. Both factors are produced as
//! flat rows and applied with a per-row matrix-vector product.

use std::sync::Arc;

use crate::autodiff::{SparseMatrix, Tape, Tensor, Var};
use crate::data::BehaviorGraph;
use crate::error::Result;
use crate::model::{names, Bound, Model, ParamStore, Side};

/// Contextualized base embeddings per behavior.
#[derive(Clone, Debug)]
pub struct Contextualized {
    /// `[I, d]` per behavior.
    pub users: Vec<Var>,
    /// `[J, d]` per behavior.
    pub items: Vec<Var>,
}

fn side_tables(bound: &Bound, side: Side) -> (Var, Var) {
    match side {
        Side::User => (bound.get(names::USER_EMB), bound.get(names::ITEM_EMB)),
        Side::Item => (bound.get(names::ITEM_EMB), bound.get(names::USER_EMB)),
    }
}

fn side_adjacency(graph: &BehaviorGraph, side: Side, behavior: usize) -> &Arc<SparseMatrix> {
    let layer = graph.layer(behavior);
    match side {
        Side::User => &layer.normalized,
        Side::Item => &layer.normalized_t,
    }
}

/// `[n, 3d]` context vectors of every entity on `side` under `behavior`.
/// Entities without neighbors get a zero third segment.
pub fn context_vectors(tape: &mut Tape, bound: &Bound, graph: &BehaviorGraph, side: Side, behavior: usize) -> Result<Var> {
    let (own, other) = side_tables(bound, side);
    let n = tape.shape(own)[0];
    let neighborhood = tape.spmm(side_adjacency(graph, side, behavior), other)?;
    let behavior_rows = tape.gather_rows(bound.get(names::BEHAVIOR_EMB), &vec![behavior; n])?;
    tape.concat(&[behavior_rows, own, neighborhood])
}

/// `V²(H)·(V¹(H)·e)` row by row, where `V¹ = W¹H + V̄¹`, `V² = W²H + V̄²`.
pub fn low_rank_transform(tape: &mut Tape, bound: &Bound, model: &Model, side: Side, h: Var, e: Var) -> Result<Var> {
    let (d, r) = (model.config.dim, model.config.low_rank_dim);
    let pre = model.context_prefix(side);
    let v1_bias = tape.reshape(bound.get(&format!("{pre}.v1")), &[1, r * d])?;
    let v2_bias = tape.reshape(bound.get(&format!("{pre}.v2")), &[1, d * r])?;
    let gen1 = tape.matmul_nt(h, bound.get(&format!("{pre}.w1")))?;
    let v1 = tape.add(gen1, v1_bias)?;
    let inner = tape.batched_matvec(v1, e, r)?;
    let gen2 = tape.matmul_nt(h, bound.get(&format!("{pre}.w2")))?;
    let v2 = tape.add(gen2, v2_bias)?;
    tape.batched_matvec(v2, inner, d)
}

/// Full-rank variant: one generated `d×d` map `W·H + V̄` per row.
pub fn dense_transform(tape: &mut Tape, bound: &Bound, model: &Model, side: Side, h: Var, e: Var) -> Result<Var> {
    let d = model.config.dim;
    let pre = model.context_prefix(side);
    let bias = tape.reshape(bound.get(&format!("{pre}.v")), &[1, d * d])?;
    let gen = tape.matmul_nt(h, bound.get(&format!("{pre}.w")))?;
    let v = tape.add(gen, bias)?;
    tape.batched_matvec(v, e, d)
}

/// Contextualizes both sides under every behavior.
pub fn contextualize_all(tape: &mut Tape, bound: &Bound, graph: &BehaviorGraph, model: &Model) -> Result<Contextualized> {
    let mut out = Contextualized {
        users: Vec::with_capacity(graph.num_behaviors()),
        items: Vec::with_capacity(graph.num_behaviors()),
    };
    for side in [Side::User, Side::Item] {
        let (own, _) = side_tables(bound, side);
        for k in 0..graph.num_behaviors() {
            let e = if model.config.ablation.no_metac {
                let fixed = bound.get(&format!("{}.fixed{k}", model.context_prefix(side)));
                tape.matmul_nt(own, fixed)?
            } else {
                let h = context_vectors(tape, bound, graph, side, k)?;
                if model.config.ablation.no_low_rank {
                    dense_transform(tape, bound, model, side, h, own)?
                } else {
                    low_rank_transform(tape, bound, model, side, h, own)?
                }
            };
            match side {
                Side::User => out.users.push(e),
                Side::Item => out.items.push(e),
            }
        }
    }
    Ok(out)
}

/// Context vector of one entity, evaluated outside any training tape.
pub fn context_vector(params: &ParamStore, graph: &BehaviorGraph, side: Side, entity: usize, behavior: usize) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    let h = context_vectors(&mut tape, &bound, graph, side, behavior)?;
    Ok(tape.value(h).row(entity).to_vec())
}

/// The `d×d` map applied to an entity whose context vector is `h`, made explicit.
pub fn composed_map(params: &ParamStore, model: &Model, side: Side, h: &[f64]) -> Result<Tensor> {
    let d = model.config.dim;
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape, false);
    // Push the identity through the transform one column at a time.
    let hs = tape.constant(Tensor::new(vec![d, h.len()], h.repeat(d))?);
    let eye = tape.constant(Tensor::identity(d));
    let cols = if model.config.ablation.no_low_rank {
        dense_transform(&mut tape, &bound, model, side, hs, eye)?
    } else {
        low_rank_transform(&mut tape, &bound, model, side, hs, eye)?
    };
    // Row c of `cols` is the image of basis vector c, i.e. column c of the map.
    tape.value(cols).transpose()
}
