use lwlc_core::cache::{lwlc_buf_run, BufferOptions};
use lwlc_core::cutset::{build_cutset_order, lwlc_run, CutsetOrder, LwlcSampler};
use lwlc_core::eval::{compare_proposals_default, mse};
use lwlc_core::exact::{bucket_elimination_query, enumerate_joint_query, Marginals};
use lwlc_core::graphops::{check_prefix_polytrees, find_loop_cutset, validate_loop_cutset};
use lwlc_core::model::{generate_evidence, generate_random_network, GeneratorConfig, ROW_SUM_TOLERANCE};
use lwlc_core::rng::stream;
use lwlc_core::sampling::{Budget, CheckpointEvery, NoClock};
use lwlc_core::{BayesNet, Evidence};
use proptest::prelude::*;

fn small_net() -> impl Strategy<Value = (BayesNet, u64)> {
    (2usize..9, 1usize..4, 2usize..4, prop_oneof![Just(0.0), 0.0..0.7f64], any::<u64>())
        .prop_map(|(n, p, c, d, seed)| (generate_random_network(&GeneratorConfig::new(n, p.min(n - 1), c, d, seed)), seed))
}

fn order(net: &BayesNet, ev: &Evidence) -> CutsetOrder {
    let c = find_loop_cutset(net, &ev.vars().collect::<Vec<_>>());
    build_cutset_order(net, ev, &c).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generated_networks_are_valid((net, _) in small_net()) {
        let topo = net.topological_order();
        let mut pos = vec![0; net.len()];
        for (i, &v) in topo.iter().enumerate() {
            pos[v] = i;
        }
        for v in 0..net.len() {
            prop_assert!(net.parents(v).iter().all(|&p| pos[p] < pos[v]));
            for row in net.cpt(v).rows() {
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= ROW_SUM_TOLERANCE);
            }
        }
    }

    #[test]
    fn elimination_matches_enumeration((net, seed) in small_net(), k in 0usize..4) {
        let ev = generate_evidence(&net, k, seed);
        let a = enumerate_joint_query(&net, &ev).unwrap();
        let b = bucket_elimination_query(&net, &ev).unwrap();
        prop_assert!((a.evidence_probability - b.evidence_probability).abs() <= 1e-12 * a.evidence_probability.max(1e-300));
        prop_assert!(a.marginals.unwrap().max_abs_diff(&b.marginals.unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn auto_cutsets_are_loop_cutsets((net, seed) in small_net(), k in 0usize..3) {
        let ev = generate_evidence(&net, k, seed);
        let c = find_loop_cutset(&net, &ev.vars().collect::<Vec<_>>());
        let z: Vec<_> = net.topological_order().iter().copied().filter(|&v| c.contains(v) || ev.contains(v)).collect();
        prop_assert!(validate_loop_cutset(&net, &z));
        prop_assert!(check_prefix_polytrees(&net, &z));
    }

    #[test]
    fn lwlc_weight_times_proposal_is_joint((net, seed) in small_net()) {
        let ev = generate_evidence(&net, 1, seed);
        let ord = order(&net, &ev);
        let mut s = LwlcSampler::new(&net, &ord);
        let mut rng = stream(seed, 0);
        for _ in 0..10 {
            let x = s.sample(&mut rng).unwrap();
            if x.is_rejected() {
                continue;
            }
            let mut full = ev.clone();
            for &c in ord.cutset().members() {
                full.insert(c, x.assignment[c].unwrap());
            }
            let joint = enumerate_joint_query(&net, &full).unwrap().evidence_probability;
            prop_assert!((x.weight() * x.proposal_probability() - joint).abs() <= 1e-9 * joint);
        }
    }

    #[test]
    fn buffer_without_learning_is_transparent((net, seed) in small_net()) {
        let ev = generate_evidence(&net, 2, seed);
        let ord = order(&net, &ev);
        let budget = Budget::Samples(300);
        let plain = lwlc_run(&net, &ord, budget, CheckpointEvery::Samples(100), &NoClock, &mut stream(seed, 1)).unwrap();
        let opts = BufferOptions { learn_dead_ends: false, ..BufferOptions::default() };
        let (buf, _) = lwlc_buf_run(&net, &ord, budget, CheckpointEvery::Samples(100), &NoClock, &mut stream(seed, 1), opts).unwrap();
        prop_assert_eq!(plain, buf);
    }

    #[test]
    fn learned_rows_stay_distributions((net, seed) in small_net()) {
        let ev = generate_evidence(&net, 3, seed);
        let ord = order(&net, &ev);
        let mut s = LwlcSampler::buffered(&net, &ord, BufferOptions::default());
        let mut rng = stream(seed, 2);
        let mut paths: Vec<Vec<usize>> = Vec::new();
        for _ in 0..200 {
            let x = s.sample(&mut rng).unwrap();
            let path: Vec<usize> = ord.cutset().members().iter().map_while(|&c| x.assignment[c]).collect();
            for i in 0..=path.len() {
                paths.push(path[..i].to_vec());
            }
        }
        let tree = s.tree().unwrap();
        for p in paths {
            if let Some(d) = tree.dist(&p) {
                let total: f64 = d.current().iter().sum();
                prop_assert!(d.is_exhausted() || (total - 1.0).abs() < 1e-9);
                for (v, &q) in d.current().iter().enumerate() {
                    prop_assert!(!d.is_dead(v) || q == 0.0);
                }
            }
        }
    }

    #[test]
    fn cutset_proposal_is_closer((net, seed) in small_net()) {
        let ev = generate_evidence(&net, 1, seed);
        let c = find_loop_cutset(&net, &ev.vars().collect::<Vec<_>>());
        let r = compare_proposals_default(&net, &ev, &c).unwrap();
        prop_assert!(r.kl_holds());
        prop_assert!(r.variance_holds());
    }

    #[test]
    fn mse_is_symmetric(a in prop::collection::vec(0.01..1.0f64, 1..6), b in prop::collection::vec(0.01..1.0f64, 1..6)) {
        let n = a.len().min(b.len());
        let norm = |v: &[f64]| {
            let s: f64 = v.iter().sum();
            v.iter().map(|x| x / s).collect::<Vec<_>>()
        };
        let x = Marginals::from_vec(vec![Some(norm(&a[..n]))]);
        let y = Marginals::from_vec(vec![Some(norm(&b[..n]))]);
        prop_assert_eq!(mse(&x, &y).unwrap(), mse(&y, &x).unwrap());
        prop_assert_eq!(mse(&x, &x).unwrap(), 0.0);
    }
}
