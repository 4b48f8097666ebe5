use std::sync::Arc;

use crate::autodiff::SparseMatrix;
use crate::data::InteractionTensor;

/// One behavior's bipartite user–item graph.
#[derive(Clone, Debug)]
pub struct BehaviorLayer {
    /// Binary user × item adjacency.
    pub adjacency: SparseMatrix,
    pub user_degree: Vec<usize>,
    pub item_degree: Vec<usize>,
    /// Entries `1 / sqrt(deg(user) · deg(item))` at every edge.
    pub normalized: Arc<SparseMatrix>,
    /// Transpose of `normalized` (item × user).
    pub normalized_t: Arc<SparseMatrix>,
}

impl BehaviorLayer {
    pub fn user_items(&self, user: usize) -> &[usize] {
        self.adjacency.row(user).0
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.nnz()
    }
}

/// Per-behavior graphs of an interaction tensor.
#[derive(Clone, Debug)]
pub struct BehaviorGraph {
    num_users: usize,
    num_items: usize,
    layers: Vec<BehaviorLayer>,
}

impl BehaviorGraph {
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_behaviors(&self) -> usize {
        self.layers.len()
    }

    pub fn layer(&self, k: usize) -> &BehaviorLayer {
        &self.layers[k]
    }

    pub fn layers(&self) -> &[BehaviorLayer] {
        &self.layers
    }

    pub fn edge_count(&self) -> usize {
        self.layers.iter().map(BehaviorLayer::edge_count).sum()
    }
}

pub fn build_graphs(t: &InteractionTensor) -> BehaviorGraph {
    let (users, items) = (t.num_users(), t.num_items());
    let layers = (0..t.num_behaviors())
        .map(|k| {
            let triplets: Vec<(usize, usize, f64)> = t.events_for(k).map(|e| (e.user, e.item, 1.0)).collect();
            let adjacency = SparseMatrix::from_triplets(users, items, &triplets).expect("tensor events are unique");
            let user_degree = adjacency.row_counts();
            let item_degree = adjacency.col_counts();
            let normalized = adjacency.map_values(|u, i, _| 1.0 / ((user_degree[u] * item_degree[i]) as f64).sqrt());
            let normalized_t = normalized.transpose();
            BehaviorLayer {
                adjacency,
                user_degree,
                item_degree,
                normalized: Arc::new(normalized),
                normalized_t: Arc::new(normalized_t),
            }
        })
        .collect();
    BehaviorGraph {
        num_users: users,
        num_items: items,
        layers,
    }
}
