//! The multi-behavior graph meta network.
//!
//! Forward pass, in order:
//!
//! 1. [`context`]: a meta network reads each entity's behavior context and
//!    generates a (low-rank) transform of its base embedding, per behavior.
//! 2. [`gnn`]: per-behavior residual graph convolution without weights,
//!    multi-head attention across behavior channels producing a fused
//!    channel, `L` stacked layers and an order-summed readout.
//! 3. [`transfer`]: for a (user, item, source, target) quadruple a second
//!    meta network generates the weights of a small prediction network.

pub mod context;
pub mod gnn;
mod params;
pub mod transfer;

use serde::{Deserialize, Serialize};

pub use context::{contextualize_all, Contextualized};
pub use gnn::{propagate, EmbeddingState};
pub use params::{Bound, ParamStore};

use crate::autodiff::Tape;
use crate::data::BehaviorGraph;
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_INIT};

/// Component switches for ablation runs. All `false` is the full model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Full-rank generated transform instead of the low-rank pair.
    pub no_low_rank: bool,
    /// Mean of the behavior channels instead of attention fusion.
    pub no_mfeat: bool,
    /// Only the fused source channel and only the target behavior in the loss.
    pub no_mtask: bool,
    /// Learned fixed per-behavior transforms instead of the context meta network.
    pub no_metac: bool,
    /// Learned fixed per-(source, target) prediction heads instead of generated ones.
    pub no_metap: bool,
}

impl Ablation {
    pub const FLAGS: [&'static str; 5] = ["lowR", "mFeat", "mTask", "metaC", "metaP"];

    pub fn parse(flags: &str) -> Result<Self> {
        let mut a = Self::default();
        for flag in flags.split(',').map(str::trim).filter(|f| !f.is_empty()) {
            a.set(flag)?;
        }
        Ok(a)
    }

    pub fn set(&mut self, flag: &str) -> Result<()> {
        let slot = match flag.to_ascii_lowercase().as_str() {
            "lowr" => &mut self.no_low_rank,
            "mfeat" => &mut self.no_mfeat,
            "mtask" => &mut self.no_mtask,
            "metac" => &mut self.no_metac,
            "metap" => &mut self.no_metap,
            _ => return Err(Error::Config(format!("unknown ablation flag {flag:?}"))),
        };
        *slot = true;
        Ok(())
    }

    pub fn names(&self) -> Vec<&'static str> {
        let on = [self.no_low_rank, self.no_mfeat, self.no_mtask, self.no_metac, self.no_metap];
        Self::FLAGS.iter().zip(on).filter(|(_, b)| *b).map(|(n, _)| *n).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Embedding size `d`.
    pub dim: usize,
    /// Inner size `d'` of the low-rank transform.
    pub low_rank_dim: usize,
    pub heads: usize,
    pub layers: usize,
    /// Negative-side slope of the leaky ReLU used as the activation everywhere.
    pub slope: f64,
    pub init_std: f64,
    /// One meta-context parameter set for both users and items.
    pub share_context_sides: bool,
    /// Item-side attention reuses the user-side projections.
    pub share_attention: bool,
    pub ablation: Ablation,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 16,
            low_rank_dim: 4,
            heads: 2,
            layers: 2,
            slope: 0.1,
            init_std: 0.1,
            share_context_sides: false,
            share_attention: true,
            ablation: Ablation::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.heads == 0 || !self.dim.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "head count {} must divide embedding size {}",
                self.heads, self.dim
            )));
        }
        if self.low_rank_dim == 0 || self.low_rank_dim >= self.dim {
            return Err(Error::Config(format!(
                "low-rank size {} must lie in [1, {})",
                self.low_rank_dim, self.dim
            )));
        }
        if self.layers == 0 {
            return Err(Error::Config("at least one propagation layer is required".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    User,
    Item,
}

impl Side {
    fn name(self) -> &'static str {
        match self {
            Side::User => "user",
            Side::Item => "item",
        }
    }
}

/// Model shape: config plus tensor dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub users: usize,
    pub items: usize,
    pub behaviors: usize,
}

/// Parameter names.
pub mod names {
    pub const USER_EMB: &str = "emb.user";
    pub const ITEM_EMB: &str = "emb.item";
    pub const BEHAVIOR_EMB: &str = "emb.behavior";
    pub const ATT_Q: &str = "gnn.q";
    pub const ATT_Q_ITEM: &str = "gnn.q_item";
    pub const W_Z: &str = "transfer.w_z";
    pub const W_GAMMA: &str = "transfer.w_gamma";
    pub const W_P1: &str = "transfer.w_p1";
    pub const W_B2: &str = "transfer.w_b2";
    pub const W_P3: &str = "transfer.w_p3";
    pub const P1_BAR: &str = "transfer.p1_bar";
    pub const B2_BAR: &str = "transfer.b2_bar";
    pub const P3_BAR: &str = "transfer.p3_bar";

    pub fn pair(source: usize, target: usize, part: &str) -> String {
        format!("transfer.pair{source}_{target}.{part}")
    }
}

impl Model {
    pub fn new(config: ModelConfig, users: usize, items: usize, behaviors: usize) -> Result<Self> {
        config.validate()?;
        if users == 0 || items == 0 || behaviors == 0 {
            return Err(Error::Config("model dimensions must be positive".into()));
        }
        Ok(Self {
            config,
            users,
            items,
            behaviors,
        })
    }

    pub fn for_graph(config: ModelConfig, graph: &BehaviorGraph) -> Result<Self> {
        Self::new(config, graph.num_users(), graph.num_items(), graph.num_behaviors())
    }

    /// Index of the fused channel among the readouts.
    pub fn fused(&self) -> usize {
        self.behaviors
    }

    /// Prefix of the meta-context parameters used for `side`.
    pub fn context_prefix(&self, side: Side) -> String {
        if self.config.share_context_sides {
            "ctx.shared".to_string()
        } else {
            format!("ctx.{}", side.name())
        }
    }

    /// Seeded `normal(0, init_std)` initialization of every parameter the
    /// configured wiring uses.
    pub fn init_params(&self, seed: u64) -> ParamStore {
        let c = &self.config;
        let (d, r, k) = (c.dim, c.low_rank_dim, self.behaviors);
        let std = c.init_std;
        let mut rng = rng_for(seed, &[STREAM_INIT]);
        let mut p = ParamStore::new();
        p.insert_normal(names::USER_EMB, &[self.users, d], std, &mut rng);
        p.insert_normal(names::ITEM_EMB, &[self.items, d], std, &mut rng);
        p.insert_normal(names::BEHAVIOR_EMB, &[k, d], std, &mut rng);

        let sides: &[Side] = if c.share_context_sides { &[Side::User] } else { &[Side::User, Side::Item] };
        for &side in sides {
            let pre = self.context_prefix(side);
            if c.ablation.no_metac {
                for b in 0..k {
                    p.insert_normal(&format!("{pre}.fixed{b}"), &[d, d], std, &mut rng);
                }
            } else if c.ablation.no_low_rank {
                p.insert_normal(&format!("{pre}.w"), &[d * d, 3 * d], std, &mut rng);
                p.insert_normal(&format!("{pre}.v"), &[d, d], std, &mut rng);
            } else {
                p.insert_normal(&format!("{pre}.w1"), &[r * d, 3 * d], std, &mut rng);
                p.insert_normal(&format!("{pre}.w2"), &[d * r, 3 * d], std, &mut rng);
                p.insert_normal(&format!("{pre}.v1"), &[r, d], std, &mut rng);
                p.insert_normal(&format!("{pre}.v2"), &[d, r], std, &mut rng);
            }
        }

        if !c.ablation.no_mfeat {
            p.insert_normal(names::ATT_Q, &[d, d], std, &mut rng);
            if !c.share_attention {
                p.insert_normal(names::ATT_Q_ITEM, &[d, d], std, &mut rng);
            }
        }

        if c.ablation.no_metap {
            for source in 0..=k {
                for target in 0..k {
                    p.insert_normal(&names::pair(source, target, "p1"), &[d, 3 * d], std, &mut rng);
                    p.insert_normal(&names::pair(source, target, "b2"), &[d], std, &mut rng);
                    p.insert_normal(&names::pair(source, target, "p3"), &[d], std, &mut rng);
                }
            }
        } else {
            p.insert_normal(names::W_Z, &[d, 3 * d], std, &mut rng);
            p.insert_normal(names::W_GAMMA, &[d, 3 * d], std, &mut rng);
            p.insert_normal(names::W_P1, &[3 * d * d, d], std, &mut rng);
            p.insert_normal(names::W_B2, &[d, d], std, &mut rng);
            p.insert_normal(names::W_P3, &[d, d], std, &mut rng);
            p.insert_normal(names::P1_BAR, &[d, 3 * d], std, &mut rng);
            p.insert_normal(names::B2_BAR, &[d], std, &mut rng);
            p.insert_normal(names::P3_BAR, &[d], std, &mut rng);
        }
        p
    }

    /// Contextualize and propagate: the full embedding forward pass.
    pub fn embed(&self, tape: &mut Tape, bound: &Bound, graph: &BehaviorGraph) -> Result<EmbeddingState> {
        let ctx = contextualize_all(tape, bound, graph, self)?;
        propagate(tape, &ctx, graph, bound, self)
    }

    /// Score of `(user, item)` for `target` using the fused source channel.
    pub fn predict_target(
        &self,
        params: &ParamStore,
        graph: &BehaviorGraph,
        user: usize,
        item: usize,
        target: usize,
    ) -> Result<f64> {
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let state = self.embed(&mut tape, &bound, graph)?;
        let scores = transfer::score_rows(&mut tape, &bound, &state, self, &[user], &[item], target, &[self.fused()])?;
        Ok(tape.value(scores[0]).item())
    }
}
