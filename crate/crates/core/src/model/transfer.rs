//! Meta-knowledge transfer prediction.
//!
//! For a user–item pair, source channel `k` and target behavior `k'`:
//! `Z^c = σ(W_Z φ(Ê_{i,c}, Ê_{j,c}))`, `Γ = σ(W_Γ φ(Z^k, Z^{k'}))`, then
//! `Γ` generates a prediction head `(P₁, b₂, p₃)` and the score is
//! `p₃ᵀ σ(P₁ φ(Ê_{i,k}, Ê_{j,k}) + b₂)`. All functions are row-batched.

use std::collections::BTreeMap;

use crate::autodiff::{Tape, Var};
use crate::error::Result;
use crate::model::{names, Bound, EmbeddingState, Model};

/// `v₁∘v₂ ‖ v₁ ‖ v₂` row by row.
pub fn phi(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let prod = tape.mul(a, b)?;
    tape.concat(&[prod, a, b])
}

/// Relation code `Z = σ(W_Z φ(e_user, e_item))`.
pub fn relation_code(tape: &mut Tape, bound: &Bound, slope: f64, users: Var, items: Var) -> Result<Var> {
    let f = phi(tape, users, items)?;
    let z = tape.matmul_nt(f, bound.get(names::W_Z))?;
    Ok(tape.leaky_relu(z, slope))
}

/// `Γ = σ(W_Γ φ(Z^k, Z^{k'}))`.
pub fn gamma_from_codes(tape: &mut Tape, bound: &Bound, slope: f64, source: Var, target: Var) -> Result<Var> {
    let f = phi(tape, source, target)?;
    let g = tape.matmul_nt(f, bound.get(names::W_GAMMA))?;
    Ok(tape.leaky_relu(g, slope))
}

/// `Γ` directly from the four readout rows.
pub fn meta_gamma(
    tape: &mut Tape,
    bound: &Bound,
    slope: f64,
    (user_k, item_k): (Var, Var),
    (user_t, item_t): (Var, Var),
) -> Result<Var> {
    let zk = relation_code(tape, bound, slope, user_k, item_k)?;
    let zt = relation_code(tape, bound, slope, user_t, item_t)?;
    gamma_from_codes(tape, bound, slope, zk, zt)
}

/// Generated prediction head, one per row.
#[derive(Clone, Copy, Debug)]
pub struct Head {
    /// `[n, d·3d]`: row-major `d×3d` matrix per row.
    pub p1: Var,
    /// `[n, d]`
    pub b2: Var,
    /// `[n, d]`
    pub p3: Var,
}

/// `P₁ = reshape(W_P Γ) + P̄₁`, `b₂ = W_b Γ + b̄₂`, `p₃ = W_p Γ + p̄₃`.
pub fn generate_head(tape: &mut Tape, bound: &Bound, gamma: Var) -> Result<Head> {
    let p1_bar = bound.get(names::P1_BAR);
    let flat = tape.value(p1_bar).len();
    let p1_bar = tape.reshape(p1_bar, &[1, flat])?;
    let p1 = tape.matmul_nt(gamma, bound.get(names::W_P1))?;
    let p1 = tape.add(p1, p1_bar)?;
    let b2 = tape.matmul_nt(gamma, bound.get(names::W_B2))?;
    let b2 = tape.add(b2, bound.get(names::B2_BAR))?;
    let p3 = tape.matmul_nt(gamma, bound.get(names::W_P3))?;
    let p3 = tape.add(p3, bound.get(names::P3_BAR))?;
    Ok(Head { p1, b2, p3 })
}

/// `p₃ᵀ σ(P₁ φ(e_user, e_item) + b₂)` per row, shape `[n, 1]`.
pub fn score(tape: &mut Tape, slope: f64, users: Var, items: Var, head: &Head) -> Result<Var> {
    let f = phi(tape, users, items)?;
    let d = tape.shape(head.b2)[1];
    let hidden = tape.batched_matvec(head.p1, f, d)?;
    let hidden = tape.add(hidden, head.b2)?;
    let eta = tape.leaky_relu(hidden, slope);
    tape.row_dot(eta, head.p3)
}

/// Score through the fixed per-(source, target) head that replaces generation.
pub fn score_fixed(tape: &mut Tape, bound: &Bound, slope: f64, source: usize, target: usize, users: Var, items: Var) -> Result<Var> {
    let f = phi(tape, users, items)?;
    let hidden = tape.matmul_nt(f, bound.get(&names::pair(source, target, "p1")))?;
    let hidden = tape.add(hidden, bound.get(&names::pair(source, target, "b2")))?;
    let eta = tape.leaky_relu(hidden, slope);
    let p3 = bound.get(&names::pair(source, target, "p3"));
    let d = tape.shape(p3)[0];
    let p3 = tape.reshape(p3, &[1, d])?;
    tape.matmul_nt(eta, p3)
}

/// Scores rows `(users[r], items[r])` for `target` from each source channel
/// in `sources`. Returns one `[n, 1]` column per source, in order.
#[allow(clippy::too_many_arguments)]
pub fn score_rows(
    tape: &mut Tape,
    bound: &Bound,
    state: &EmbeddingState,
    model: &Model,
    users: &[usize],
    items: &[usize],
    target: usize,
    sources: &[usize],
) -> Result<Vec<Var>> {
    let slope = model.config.slope;
    let mut rows: BTreeMap<usize, (Var, Var)> = BTreeMap::new();
    let mut gather = |tape: &mut Tape, c: usize| -> Result<(Var, Var)> {
        if let Some(&r) = rows.get(&c) {
            return Ok(r);
        }
        let u = tape.gather_rows(state.readout_users[c], users)?;
        let i = tape.gather_rows(state.readout_items[c], items)?;
        rows.insert(c, (u, i));
        Ok((u, i))
    };

    if model.config.ablation.no_metap {
        return sources
            .iter()
            .map(|&s| {
                let (u, i) = gather(tape, s)?;
                score_fixed(tape, bound, slope, s, target, u, i)
            })
            .collect();
    }

    let (tu, ti) = gather(tape, target)?;
    let target_code = relation_code(tape, bound, slope, tu, ti)?;
    let mut out = Vec::with_capacity(sources.len());
    for &s in sources {
        let (u, i) = gather(tape, s)?;
        let code = if s == target { target_code } else { relation_code(tape, bound, slope, u, i)? };
        let gamma = gamma_from_codes(tape, bound, slope, code, target_code)?;
        let head = generate_head(tape, bound, gamma)?;
        out.push(score(tape, slope, u, i, &head)?);
    }
    Ok(out)
}
