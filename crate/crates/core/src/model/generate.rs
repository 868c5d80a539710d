//! Random network generation for experiments.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use super::{BayesNet, Cpt, Evidence, Variable};
use crate::rng::{draw_index, stream, StreamRng};

/// Parameters of [`generate_random_network`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorConfig {
    pub n: usize,
    pub max_parents: usize,
    /// Largest domain size; domains are drawn uniformly from `2..=max_card`
    /// (all unary when `max_card <= 1`).
    pub max_card: usize,
    /// Probability that a CPT row is replaced by a point mass.
    pub determinism: f64,
    pub seed: u64,
}

impl GeneratorConfig {
    pub fn new(n: usize, max_parents: usize, max_card: usize, determinism: f64, seed: u64) -> Self {
        GeneratorConfig {
            n,
            max_parents,
            max_card,
            determinism,
            seed,
        }
    }
}

/// Smallest non-deterministic CPT weight before normalization; keeps
/// positive rows away from zero.
const WEIGHT_FLOOR: f64 = 0.05;

/// Random DAG over `X0..X{n-1}` in which `Xi` draws up to `max_parents`
/// parents among `X0..X{i-1}`.
pub fn generate_random_network(cfg: &GeneratorConfig) -> BayesNet {
    let mut rng = stream(cfg.seed, 0);
    let mut cards = Vec::with_capacity(cfg.n);
    let mut parent_sets = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        cards.push(draw_card(&mut rng, cfg.max_card));
        let k = rng.random_range(0..=cfg.max_parents.min(i));
        let mut pool: Vec<usize> = (0..i).collect();
        for j in 0..k {
            let pick = rng.random_range(j..pool.len());
            pool.swap(j, pick);
        }
        let mut parents: Vec<usize> = pool[..k].to_vec();
        parents.sort_unstable();
        parent_sets.push(parents);
    }
    assemble(&mut rng, cards, parent_sets, cfg.determinism)
}

/// Random singly-connected network: a parent is only added when it joins two
/// previously disconnected pieces of the skeleton.
pub fn generate_random_polytree(cfg: &GeneratorConfig) -> BayesNet {
    let mut rng = stream(cfg.seed, 1);
    let mut comp: Vec<usize> = Vec::with_capacity(cfg.n);
    let mut cards = Vec::with_capacity(cfg.n);
    let mut parent_sets = Vec::with_capacity(cfg.n);
    for i in 0..cfg.n {
        cards.push(draw_card(&mut rng, cfg.max_card));
        comp.push(i);
        let want = rng.random_range(0..=cfg.max_parents.min(i));
        let mut pool: Vec<usize> = (0..i).collect();
        let mut parents = Vec::new();
        let mut j = 0;
        while parents.len() < want && j < pool.len() {
            let pick = rng.random_range(j..pool.len());
            pool.swap(j, pick);
            let p = pool[j];
            j += 1;
            let (rp, ri) = (find(&mut comp, p), find(&mut comp, i));
            if rp != ri {
                comp[rp] = ri;
                parents.push(p);
            }
        }
        parents.sort_unstable();
        parent_sets.push(parents);
    }
    assemble(&mut rng, cards, parent_sets, cfg.determinism)
}

fn find(comp: &mut [usize], mut v: usize) -> usize {
    while comp[v] != v {
        comp[v] = comp[comp[v]];
        v = comp[v];
    }
    v
}

fn draw_card(rng: &mut StreamRng, max_card: usize) -> usize {
    if max_card <= 1 {
        1
    } else {
        rng.random_range(2..=max_card)
    }
}

fn assemble(rng: &mut StreamRng, cards: Vec<usize>, parent_sets: Vec<Vec<usize>>, determinism: f64) -> BayesNet {
    let n = cards.len();
    let variables = (0..n).map(|i| Variable::with_card(format!("X{i}"), cards[i])).collect();
    let mut cpts = Vec::with_capacity(n);
    for (i, parents) in parent_sets.into_iter().enumerate() {
        let card = cards[i];
        let rows: usize = parents.iter().map(|&p| cards[p]).product();
        let mut table = Vec::with_capacity(rows * card);
        for _ in 0..rows {
            if rng.random::<f64>() < determinism {
                let hot = rng.random_range(0..card);
                table.extend((0..card).map(|v| if v == hot { 1.0 } else { 0.0 }));
            } else {
                let start = table.len();
                table.extend((0..card).map(|_| WEIGHT_FLOOR + (1.0 - WEIGHT_FLOOR) * rng.random::<f64>()));
                crate::math::normalize(&mut table[start..]);
            }
        }
        cpts.push(Cpt::from_flat(i, parents, card, table));
    }
    BayesNet::new(variables, cpts).expect("generated network is valid by construction")
}

/// Evidence on `k` variables (leaves first, in random order) valued by one
/// forward sample, so that `P(e) > 0`.
pub fn generate_evidence(net: &BayesNet, k: usize, seed: u64) -> Evidence {
    let mut rng = stream(seed, 2);
    let mut world = vec![0; net.len()];
    for &v in net.topological_order() {
        let row = net.cpt_row_index(v, &world);
        world[v] = draw_index(&mut rng, net.cpt(v).row(row)).expect("validated CPT rows carry mass");
    }
    let leaves = net.leaves();
    let mut inner: Vec<usize> = (0..net.len()).filter(|v| !leaves.contains(v)).collect();
    let mut pool = leaves;
    let mut ev = Evidence::new();
    while ev.len() < k.min(net.len()) {
        if pool.is_empty() {
            pool = core::mem::take(&mut inner);
        }
        let v = pool.swap_remove(rng.random_range(0..pool.len()));
        ev.insert(v, world[v]);
    }
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::enumerate_joint_query;
    use crate::graphops::is_singly_connected;

    #[test]
    fn generated_evidence_is_possible() {
        for seed in 0..20 {
            let net = generate_random_network(&GeneratorConfig::new(9, 2, 3, 0.6, seed));
            let leaves = net.leaves();
            for k in [1, leaves.len(), 9, 12] {
                let ev = generate_evidence(&net, k, seed);
                assert_eq!(ev.len(), k.min(9));
                if k <= leaves.len() {
                    assert!(ev.vars().all(|v| leaves.contains(&v)));
                }
                assert!(enumerate_joint_query(&net, &ev).unwrap().evidence_probability > 0.0);
            }
        }
    }

    #[test]
    fn same_seed_same_network() {
        let cfg = GeneratorConfig::new(5, 2, 3, 0.0, 7);
        assert_eq!(generate_random_network(&cfg), generate_random_network(&cfg));
        let other = GeneratorConfig { seed: 8, ..cfg };
        assert_ne!(generate_random_network(&cfg), generate_random_network(&other));
    }

    #[test]
    fn full_determinism_gives_point_masses() {
        let net = generate_random_network(&GeneratorConfig::new(10, 3, 3, 1.0, 3));
        for cpt in net.cpts() {
            for row in cpt.rows() {
                assert_eq!(row.iter().filter(|&&p| p == 1.0).count(), 1);
                assert!(row.iter().all(|&p| p == 0.0 || p == 1.0));
            }
        }
    }

    #[test]
    fn zero_determinism_is_positive() {
        let net = generate_random_network(&GeneratorConfig::new(12, 3, 3, 0.0, 11));
        assert!(net.is_positive());
    }

    #[test]
    fn determinism_fraction_near_target() {
        // share of CPT entries that are exactly 0 or 1, counted after generation
        let net = generate_random_network(&GeneratorConfig::new(12, 2, 3, 0.3, 5));
        let (mut crisp, mut total) = (0usize, 0usize);
        for cpt in net.cpts() {
            for &p in cpt.table() {
                total += 1;
                if p == 0.0 || p == 1.0 {
                    crisp += 1;
                }
            }
        }
        let frac = crisp as f64 / total as f64;
        assert!((frac - 0.3).abs() <= 0.1, "fraction {frac}");
    }

    #[test]
    fn polytrees_are_singly_connected() {
        for seed in 0..50 {
            let net = generate_random_polytree(&GeneratorConfig::new(15, 3, 3, 0.2, seed));
            assert!(is_singly_connected(&net, None));
            assert!(net.num_edges() < net.len());
        }
    }
}
