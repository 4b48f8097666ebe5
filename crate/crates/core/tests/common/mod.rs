//! Loop-based reference implementations, written against plain `Vec`s and
//! sharing no code with the tape-based model.
#![allow(dead_code)]

use mbgmn_core::autodiff::{Tape, Tensor};
use mbgmn_core::data::{build_graphs, BehaviorGraph, Event, InteractionTensor};
use mbgmn_core::model::gnn::{behavior_attention, graph_conv};
use mbgmn_core::model::transfer::{gamma_from_codes, generate_head, relation_code, score};
use mbgmn_core::model::{names, Model, ModelConfig, ParamStore, Side};
use mbgmn_core::model::context::composed_map;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Mat {
    (0..rows).map(|_| (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()
}

pub fn to_mat(t: &Tensor) -> Mat {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

pub fn to_tensor(m: &Mat) -> Tensor {
    Tensor::from_rows(m).unwrap()
}

pub fn max_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(p, q)| (p - q).abs())
        })
        .fold(0.0, f64::max)
}

pub fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

pub fn matvec(m: &Mat, v: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| {
            assert_eq!(row.len(), v.len());
            let mut s = 0.0;
            for j in 0..v.len() {
                s += row[j] * v[j];
            }
            s
        })
        .collect()
}

pub fn phi(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().zip(b).map(|(x, y)| x * y).collect();
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out
}

/// Random bipartite graph with one behavior; returns the graph and its edge list.
pub fn random_graph(rng: &mut ChaCha8Rng, users: usize, items: usize, p: f64) -> (BehaviorGraph, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    for u in 0..users {
        for i in 0..items {
            if rng.random_bool(p) {
                edges.push((u, i));
            }
        }
    }
    let events = edges.iter().map(|&(user, item)| Event { user, item, behavior: 0, timestamp: None }).collect();
    let t = InteractionTensor::new(users, items, vec!["b".into()], 0, events).unwrap();
    (build_graphs(&t), edges)
}

pub fn multi_graph(users: usize, items: usize, edges: &[(usize, usize, usize)], k: usize) -> BehaviorGraph {
    let events = edges.iter().map(|&(user, item, behavior)| Event { user, item, behavior, timestamp: None }).collect();
    let names = (0..k).map(|b| format!("b{b}")).collect();
    build_graphs(&InteractionTensor::new(users, items, names, k - 1, events).unwrap())
}

/// Per-edge form of the convolution: for each edge `(u, i)` with weight
/// `1/√(d_u d_i)`, accumulate messages, then `E + σ(messages)`.
pub fn conv_oracle(edges: &[(usize, usize)], users: &Mat, items: &Mat, slope: f64) -> (Mat, Mat) {
    let d = users[0].len();
    let mut du = vec![0usize; users.len()];
    let mut di = vec![0usize; items.len()];
    for &(u, i) in edges {
        du[u] += 1;
        di[i] += 1;
    }
    let mut mu = vec![vec![0.0; d]; users.len()];
    let mut mi = vec![vec![0.0; d]; items.len()];
    for &(u, i) in edges {
        let alpha = 1.0 / ((du[u] * di[i]) as f64).sqrt();
        for c in 0..d {
            mu[u][c] += alpha * items[i][c];
            mi[i][c] += alpha * users[u][c];
        }
    }
    let step = |e: &Mat, m: &Mat| -> Mat {
        e.iter()
            .zip(m)
            .map(|(er, mr)| er.iter().zip(mr).map(|(x, y)| x + leaky(*y, slope)).collect())
            .collect()
    };
    (step(users, &mu), step(items, &mi))
}

/// Triple loop over (entity, head, k, k'): returns fused rows, refined
/// channels and `beta[h][k][n][k']`.
pub fn attention_oracle(channels: &[Mat], q: &Mat, heads: usize) -> (Mat, Vec<Mat>, Vec<Vec<Mat>>) {
    let kk = channels.len();
    let n = channels[0].len();
    let d = channels[0][0].len();
    let w = d / heads;
    let mut refined = vec![vec![vec![0.0; d]; n]; kk];
    let mut beta = vec![vec![vec![vec![0.0; kk]; n]; kk]; heads];
    for e in 0..n {
        for h in 0..heads {
            let proj = |k: usize, a: usize| -> f64 { (0..d).map(|b| q[a][b] * channels[k][e][b]).sum() };
            for k in 0..kk {
                let mut logits = vec![0.0; kk];
                for (k2, l) in logits.iter_mut().enumerate() {
                    for a in h * w..(h + 1) * w {
                        *l += proj(k, a) * proj(k2, a);
                    }
                    *l /= (w as f64).sqrt();
                }
                let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let z: f64 = logits.iter().map(|l| (l - m).exp()).sum();
                for k2 in 0..kk {
                    let b = (logits[k2] - m).exp() / z;
                    beta[h][k][e][k2] = b;
                    for a in h * w..(h + 1) * w {
                        refined[k][e][a] += b * channels[k2][e][a];
                    }
                }
            }
        }
    }
    let mut fused = vec![vec![0.0; d]; n];
    for r in &refined {
        for e in 0..n {
            for a in 0..d {
                fused[e][a] += r[e][a];
            }
        }
    }
    (fused, refined, beta)
}

/// Max deviation between the sparse-matrix convolution and [`conv_oracle`]
/// over 50 random graphs with at most 64 nodes.
pub fn conv_max_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let users = rng.random_range(1..=32);
        let items = rng.random_range(1..=32);
        let d = rng.random_range(1..=6);
        let density = rng.random_range(0.0..0.5);
        let (graph, edges) = random_graph(&mut rng, users, items, density);
        let (eu, ei) = (random_mat(&mut rng, users, d), random_mat(&mut rng, items, d));
        let mut tape = Tape::new();
        let u = tape.constant(to_tensor(&eu));
        let i = tape.constant(to_tensor(&ei));
        let (u2, i2) = graph_conv(&mut tape, graph.layer(0), u, i, 0.1).unwrap();
        let (ou, oi) = conv_oracle(&edges, &eu, &ei, 0.1);
        worst = worst.max(max_diff(&to_mat(tape.value(u2)), &ou));
        worst = worst.max(max_diff(&to_mat(tape.value(i2)), &oi));
    }
    worst
}

/// Attention vs the triple loop, K=3, d=4, H=2 on 20 random instances.
pub fn attention_max_error(seed: u64) -> f64 {
    let mut rng = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let n = rng.random_range(1..=6);
        let channels: Vec<Mat> = (0..3).map(|_| random_mat(&mut rng, n, 4)).collect();
        let q = random_mat(&mut rng, 4, 4);
        let mut tape = Tape::new();
        let cv: Vec<_> = channels.iter().map(|c| tape.constant(to_tensor(c))).collect();
        let qv = tape.constant(to_tensor(&q));
        let att = behavior_attention(&mut tape, &cv, qv, 2).unwrap();
        let (fused, refined, beta) = attention_oracle(&channels, &q, 2);
        worst = worst.max(max_diff(&to_mat(tape.value(att.fused)), &fused));
        for k in 0..3 {
            worst = worst.max(max_diff(&to_mat(tape.value(att.refined[k])), &refined[k]));
            for h in 0..2 {
                worst = worst.max(max_diff(&to_mat(tape.value(att.weights[h][k])), &beta[h][k]));
            }
        }
    }
    worst
}

pub struct TransferParams {
    pub w_z: Mat,
    pub w_gamma: Mat,
    pub w_p1: Mat,
    pub w_b2: Mat,
    pub w_p3: Mat,
    pub p1_bar: Mat,
    pub b2_bar: Vec<f64>,
    pub p3_bar: Vec<f64>,
}

impl TransferParams {
    pub fn from_store(p: &ParamStore) -> Self {
        let m = |n: &str| to_mat(p.get(n).unwrap());
        Self {
            w_z: m(names::W_Z),
            w_gamma: m(names::W_GAMMA),
            w_p1: m(names::W_P1),
            w_b2: m(names::W_B2),
            w_p3: m(names::W_P3),
            p1_bar: m(names::P1_BAR),
            b2_bar: p.get(names::B2_BAR).unwrap().data().to_vec(),
            p3_bar: p.get(names::P3_BAR).unwrap().data().to_vec(),
        }
    }

    pub fn code(&self, u: &[f64], i: &[f64], slope: f64) -> Vec<f64> {
        matvec(&self.w_z, &phi(u, i)).into_iter().map(|x| leaky(x, slope)).collect()
    }

    pub fn gamma(&self, zk: &[f64], zt: &[f64], slope: f64) -> Vec<f64> {
        matvec(&self.w_gamma, &phi(zk, zt)).into_iter().map(|x| leaky(x, slope)).collect()
    }

    /// `(P₁ as d×3d rows, b₂, p₃)`.
    pub fn head(&self, gamma: &[f64]) -> (Mat, Vec<f64>, Vec<f64>) {
        let d = gamma.len();
        let flat = matvec(&self.w_p1, gamma);
        let p1 = (0..d)
            .map(|a| (0..3 * d).map(|b| flat[a * 3 * d + b] + self.p1_bar[a][b]).collect())
            .collect();
        let b2 = matvec(&self.w_b2, gamma).iter().zip(&self.b2_bar).map(|(x, y)| x + y).collect();
        let p3 = matvec(&self.w_p3, gamma).iter().zip(&self.p3_bar).map(|(x, y)| x + y).collect();
        (p1, b2, p3)
    }

    pub fn score(&self, (u, i): (&[f64], &[f64]), (ut, it): (&[f64], &[f64]), slope: f64) -> f64 {
        let gamma = self.gamma(&self.code(u, i, slope), &self.code(ut, it, slope), slope);
        let (p1, b2, p3) = self.head(&gamma);
        let f = phi(u, i);
        let hidden = matvec(&p1, &f);
        hidden.iter().zip(&b2).zip(&p3).map(|((h, b), p)| p * leaky(h + b, slope)).sum()
    }
}

/// Relation code, Γ, generated head and score vs the loop forms on random
/// rows, d=4. Also checks the head reshape at d=3.
pub fn transfer_max_error(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for d in [4, 3] {
        let config = ModelConfig { dim: d, low_rank_dim: 2, heads: 1, ..ModelConfig::default() };
        let model = Model::new(config, 3, 3, 2).unwrap();
        let mut params = model.init_params(seed);
        // Larger weights so the leaky ReLUs see both signs.
        for t in params.tensors_mut() {
            t.data_mut().iter_mut().for_each(|x| *x *= 5.0);
        }
        let tp = TransferParams::from_store(&params);
        let mut rng = rng(seed ^ d as u64);
        let n = 5;
        let (u, i, ut, it) = (
            random_mat(&mut rng, n, d),
            random_mat(&mut rng, n, d),
            random_mat(&mut rng, n, d),
            random_mat(&mut rng, n, d),
        );
        let mut tape = Tape::new();
        let bound = params.bind(&mut tape, false);
        let vars: Vec<_> = [&u, &i, &ut, &it].iter().map(|m| tape.constant(to_tensor(m))).collect();
        let zk = relation_code(&mut tape, &bound, 0.1, vars[0], vars[1]).unwrap();
        let zt = relation_code(&mut tape, &bound, 0.1, vars[2], vars[3]).unwrap();
        let gamma = gamma_from_codes(&mut tape, &bound, 0.1, zk, zt).unwrap();
        let head = generate_head(&mut tape, &bound, gamma).unwrap();
        let s = score(&mut tape, 0.1, vars[0], vars[1], &head).unwrap();
        for r in 0..n {
            let code_k = tp.code(&u[r], &i[r], 0.1);
            let code_t = tp.code(&ut[r], &it[r], 0.1);
            let g = tp.gamma(&code_k, &code_t, 0.1);
            let (p1, b2, p3) = tp.head(&g);
            let flat_p1: Vec<f64> = p1.concat();
            let diff = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            worst = worst.max(diff(tape.value(zk).row(r), &code_k));
            worst = worst.max(diff(tape.value(gamma).row(r), &g));
            worst = worst.max(diff(tape.value(head.p1).row(r), &flat_p1));
            worst = worst.max(diff(tape.value(head.b2).row(r), &b2));
            worst = worst.max(diff(tape.value(head.p3).row(r), &p3));
            let expect = tp.score((&u[r], &i[r]), (&ut[r], &it[r]), 0.1);
            worst = worst.max((tape.value(s).data()[r] - expect).abs());
        }
    }
    worst
}

/// Largest trailing singular value `σ_{d'+1..d}` of the composed context map
/// over 50 seeds (d=6, d'=2), both sides, one random context vector each.
pub fn low_rank_tail(seed: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for s in 0..50 {
        let config = ModelConfig { dim: 6, low_rank_dim: 2, heads: 2, ..ModelConfig::default() };
        let model = Model::new(config, 2, 2, 2).unwrap();
        let params = model.init_params(seed.wrapping_mul(1000) + s);
        let mut rng = rng(seed + s);
        for side in [Side::User, Side::Item] {
            let h: Vec<f64> = (0..18).map(|_| rng.random_range(-1.0..1.0)).collect();
            let map = composed_map(&params, &model, side, &h).unwrap();
            let sv = singular_values(&map);
            worst = worst.max(sv[2..].iter().cloned().fold(0.0, f64::max));
        }
    }
    worst
}

/// Descending singular values.
pub fn singular_values(t: &Tensor) -> Vec<f64> {
    let m = nalgebra::DMatrix::from_row_slice(t.rows(), t.cols(), t.data());
    let mut sv: Vec<f64> = m.singular_values().iter().cloned().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}
