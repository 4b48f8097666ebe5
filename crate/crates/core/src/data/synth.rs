use rand_distr::{Distribution, StandardNormal};

use crate::data::{Event, IdMap, InteractionTensor, LoadedData};
use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_SYNTH};

const LATENT_DIM: usize = 8;
/// Behavior-specific noise added to the shared context affinity.
const CONTEXT_NOISE: f64 = 0.3;

/// Parameters of the synthetic multi-behavior generator.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    pub behaviors: Vec<String>,
    pub target: usize,
    /// Fraction of user–item cells filled per behavior.
    pub density: f64,
    /// How strongly target events follow the context behaviors (0..=1).
    pub rho: f64,
    pub seed: u64,
}

impl SynthSpec {
    pub fn new(users: usize, items: usize, behaviors: &[&str], target: &str, density: f64, rho: f64, seed: u64) -> Result<Self> {
        let behaviors: Vec<String> = behaviors.iter().map(|s| s.to_string()).collect();
        let target = behaviors
            .iter()
            .position(|b| b == target)
            .ok_or_else(|| Error::Config(format!("target {target:?} not among behaviors")))?;
        Ok(Self {
            users,
            items,
            behaviors,
            target,
            density,
            rho,
            seed,
        })
    }
}

/// Draws a tensor from a latent-factor model.
///
/// Factors are standard normal. Context behaviors share one affinity
/// `u·v/√8` plus small behavior-specific noise. The target affinity mixes that shared context
/// affinity (weight ρ) with an independent affinity built the same way
/// (weight 1−ρ). Each behavior keeps the cells whose `sigmoid(affinity)`
/// clears the threshold giving `density · I · J` events.
pub fn generate_synthetic(spec: &SynthSpec) -> Result<LoadedData> {
    let (users, items, k) = (spec.users, spec.items, spec.behaviors.len());
    if !(0.0..=1.0).contains(&spec.rho) {
        return Err(Error::Config(format!("rho must lie in [0, 1], got {}", spec.rho)));
    }
    if users == 0 || items == 0 || k == 0 || spec.target >= k {
        return Err(Error::Config("synthetic tensor needs users, items and a valid target".into()));
    }
    let cells = users * items;
    let per_behavior = (spec.density * cells as f64).round();
    if !(spec.density > 0.0) || per_behavior > cells as f64 {
        return Err(Error::Config(format!(
            "density {} infeasible: {} events requested for {} cells",
            spec.density, per_behavior, cells
        )));
    }
    let per_behavior = (per_behavior as usize).max(1);

    let mut rng = rng_for(spec.seed, &[STREAM_SYNTH]);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut factors = |n: usize| -> Vec<[f64; LATENT_DIM]> {
        (0..n)
            .map(|_| {
                let mut f = [0.0; LATENT_DIM];
                f.iter_mut().for_each(|x| *x = normal());
                f
            })
            .collect()
    };
    let (cu, cv) = (factors(users), factors(items));
    let (nu, nv) = (factors(users), factors(items));
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };

    let scale = 1.0 / (LATENT_DIM as f64).sqrt();
    let affinity = |u: &[f64; LATENT_DIM], v: &[f64; LATENT_DIM]| -> f64 {
        u.iter().zip(v).map(|(a, c)| a * c).sum::<f64>() * scale
    };
    let context: Vec<f64> = (0..cells).map(|c| affinity(&cu[c / items], &cv[c % items])).collect();

    let mut events = Vec::with_capacity(per_behavior * k);
    for behavior in 0..k {
        let propensity: Vec<f64> = if behavior == spec.target {
            (0..cells)
                .map(|c| {
                    let noise = affinity(&nu[c / items], &nv[c % items]) + CONTEXT_NOISE * normal();
                    sigmoid(spec.rho * context[c] + (1.0 - spec.rho) * noise)
                })
                .collect()
        } else {
            context.iter().map(|&a| sigmoid(a + CONTEXT_NOISE * normal())).collect()
        };
        let threshold = kth_largest(&propensity, per_behavior);
        let mut taken = 0;
        for (c, &p) in propensity.iter().enumerate() {
            if p >= threshold && taken < per_behavior {
                events.push(Event {
                    user: c / items,
                    item: c % items,
                    behavior,
                    timestamp: None,
                });
                taken += 1;
            }
        }
    }

    let tensor = InteractionTensor::new(users, items, spec.behaviors.clone(), spec.target, events)?;
    Ok(LoadedData {
        tensor,
        users: IdMap::sequential("u", users),
        items: IdMap::sequential("i", items),
    })
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn kth_largest(values: &[f64], k: usize) -> f64 {
    let mut v = values.to_vec();
    let idx = k - 1;
    v.select_nth_unstable_by(idx, |a, b| b.total_cmp(a));
    v[idx]
}

/// Pearson correlation of the 0/1 indicators of two behaviors over all cells.
pub fn indicator_correlation(t: &InteractionTensor, a: usize, b: usize) -> f64 {
    let cells = (t.num_users() * t.num_items()) as f64;
    let na = t.events_for(a).count() as f64;
    let nb = t.events_for(b).count() as f64;
    let both = t.events_for(a).filter(|e| t.contains(e.user, e.item, b)).count() as f64;
    let cov = cells * both - na * nb;
    let var = (na * (cells - na) * nb * (cells - nb)).sqrt();
    if var == 0.0 {
        0.0
    } else {
        cov / var
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn density_is_met() {
        let spec = SynthSpec::new(500, 200, &["view", "cart", "buy"], "buy", 0.02, 0.8, 7).unwrap();
        let data = generate_synthetic(&spec).unwrap();
        let expected = 0.02 * 500.0 * 200.0 * 3.0;
        let n = data.tensor.event_count() as f64;
        assert!(n >= 0.8 * expected && n <= 1.2 * expected, "{n} vs {expected}");
    }

    #[test]
    fn rho_controls_context_target_correlation() {
        for (rho, check) in [(0.0, true), (1.0, false)] {
            let spec = SynthSpec::new(200, 200, &["view", "cart", "buy"], "buy", 0.02, rho, 3).unwrap();
            let t = generate_synthetic(&spec).unwrap().tensor;
            for context in 0..2 {
                let c = indicator_correlation(&t, context, 2);
                if check {
                    assert!(c.abs() <= 0.1, "rho=0 correlation {c}");
                } else {
                    assert!(c >= 0.5, "rho=1 correlation {c}");
                }
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mk = |density, rho| SynthSpec::new(10, 10, &["buy"], "buy", density, rho, 0).unwrap();
        assert!(generate_synthetic(&mk(1.5, 0.5)).is_err());
        assert!(generate_synthetic(&mk(0.0, 0.5)).is_err());
        assert!(generate_synthetic(&mk(0.1, 1.5)).is_err());
        assert!(SynthSpec::new(10, 10, &["view"], "buy", 0.1, 0.5, 0).is_err());
    }

    #[test]
    fn seeded() {
        let spec = SynthSpec::new(50, 40, &["view", "buy"], "buy", 0.05, 0.5, 9).unwrap();
        assert_eq!(generate_synthetic(&spec).unwrap().tensor, generate_synthetic(&spec).unwrap().tensor);
    }
}
