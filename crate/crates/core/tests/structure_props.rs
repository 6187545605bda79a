use multiplex::graph::{Aggregation, LayerGraph, LayerSet, MultiGraph};
use multiplex::multiplexity::{
    apply_move, demultiplex_distribution, enumerate_demultiplexing_moves, is_dominance_move, multiplexing_score,
    profile_distribution, total_multiplexity_index, Profile, ProfileDistribution,
};
use multiplex::transmission::{JointPair, TransmissionModel};
use multiplex::util::stream;
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::Rng;

fn random_graph(seed: u64, n: usize, layers: usize, density: f64) -> MultiGraph {
    let mut rng = stream(seed, &[]);
    let names = (0..layers).map(|l| format!("l{l}")).collect();
    let graphs = (0..layers)
        .map(|_| {
            let mut edges = Vec::new();
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < density {
                        edges.push((i, j));
                    }
                }
            }
            LayerGraph::from_edges(n, edges).unwrap()
        })
        .collect();
    MultiGraph::from_layers(names, graphs).unwrap()
}

fn edge_counts(g: &MultiGraph) -> Vec<usize> {
    g.layers().iter().map(LayerGraph::edge_count).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn layer_sets_count_layers(seed in any::<u64>(), n in 2usize..9, layers in 1usize..5) {
        let g = random_graph(seed, n, layers, 0.4);
        let total = g.aggregate(Aggregation::Total);
        for i in 0..n {
            for j in 0..n {
                let set = g.layer_set(i, j).unwrap();
                let count = g.layers().iter().filter(|l| l.contains(i, j)).count();
                prop_assert_eq!(set.len(), count);
                prop_assert_eq!(total.weight(i, j) as usize, count);
            }
        }
        let union = g.aggregate(Aggregation::Union).edge_count();
        let inter = g.aggregate(Aggregation::Intersection).edge_count();
        for c in edge_counts(&g) {
            prop_assert!(union >= c && c >= inter);
        }
    }

    #[test]
    fn record_order_does_not_matter(seed in any::<u64>(), n in 2usize..9) {
        let g = random_graph(seed, n, 3, 0.3);
        let mut records = g.to_records("v");
        let dup = records.clone();
        records.extend(dup);
        records.shuffle(&mut stream(seed, &[1]));
        let rebuilt = MultiGraph::build_from_edges(&records, n, g.layer_names()).unwrap();
        prop_assert_eq!(rebuilt, g);
    }

    #[test]
    fn dominance_moves_descend(seed in any::<u64>(), n in 3usize..8, layers in 2usize..4) {
        let g = random_graph(seed, n, layers, 0.5);
        let before = total_multiplexity_index(&g);
        for i in 0..n {
            for (mv, next) in enumerate_demultiplexing_moves(&g, i).unwrap() {
                let donor = g.layer_set(i, mv.donor).unwrap().len() as u64;
                let recipient = g.layer_set(i, mv.recipient).unwrap().len() as u64;
                let after = total_multiplexity_index(&next);
                prop_assert!(after < before);
                prop_assert_eq!(before - after, 2 * (donor - recipient - 1));
                prop_assert_eq!(edge_counts(&next), edge_counts(&g));
                prop_assert_eq!(is_dominance_move(&g, &next).unwrap(), Some(mv));
                prop_assert_eq!(apply_move(&g, &mv).unwrap(), next);
            }
        }
    }

    #[test]
    fn move_chains_never_revisit(seed in any::<u64>(), n in 3usize..7) {
        let mut g = random_graph(seed, n, 3, 0.6);
        let mut rng = stream(seed, &[2]);
        let mut seen = vec![(total_multiplexity_index(&g), g.clone())];
        for _ in 0..200 {
            let moves: Vec<_> = (0..n).flat_map(|i| enumerate_demultiplexing_moves(&g, i).unwrap()).collect();
            if moves.is_empty() {
                break;
            }
            g = moves[rng.random_range(0..moves.len())].1.clone();
            let index = total_multiplexity_index(&g);
            prop_assert!(index < seen.last().unwrap().0);
            prop_assert!(!seen.iter().any(|(_, h)| *h == g));
            seen.push((index, g.clone()));
        }
    }

    #[test]
    fn scores_lie_between_one_over_l_and_one(seed in any::<u64>(), n in 2usize..9, layers in 1usize..5) {
        let g = random_graph(seed, n, layers, 0.3);
        let sym = g.symmetrized();
        for i in 0..n {
            let isolated = sym.layers().iter().all(|l| l.out_degree(i) == 0);
            match multiplexing_score(&g, i) {
                Ok(s) => {
                    prop_assert!(!isolated);
                    prop_assert!(s >= 1.0 / layers as f64 - 1e-12 && s <= 1.0 + 1e-12);
                }
                Err(_) => prop_assert!(isolated),
            }
        }
    }

    #[test]
    fn profile_masses_sum_to_one(seed in any::<u64>(), n in 2usize..30, share in 0.0f64..1.0) {
        let g = random_graph(seed, n, 2, 0.3);
        let dist = profile_distribution(&g, "l0", "l1").unwrap();
        prop_assert!((dist.total_mass() - 1.0).abs() < 1e-12);
        let split = dist.support().find(|p| p.both > 0);
        if let Some(p) = split {
            let moved = demultiplex_distribution(&dist, p, share * dist.mass(&p)).unwrap();
            prop_assert!((moved.total_mass() - dist.total_mass()).abs() < 1e-15);
        }
    }

    #[test]
    fn pair_pmf_is_valid(qa in 0.01f64..0.99, qb in 0.01f64..0.99, t in 0.0f64..1.0) {
        let lo = (qa + qb - 1.0).max(0.0);
        let f2 = lo + t * (qa.min(qb) - lo);
        let m = TransmissionModel::independent(vec![qa, qb]).unwrap().with_joint(0, 1, f2).unwrap();
        let pmf = m.pmf(LayerSet::full(2)).unwrap();
        prop_assert!(pmf.iter().all(|&p| p >= 0.0));
        prop_assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!((pmf[2] - f2).abs() < 1e-15);
        let only_a = qa - f2;
        let only_b = qb - f2;
        prop_assert!((pmf[1] - (only_a + only_b)).abs() < 1e-12);
        prop_assert!((only_a + pmf[2] - qa).abs() < 1e-15);
        let pair = JointPair::new(qa, qb, f2).unwrap();
        prop_assert!((pair.pmf().iter().zip(&pmf).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)) < 1e-15);
    }

    #[test]
    fn independence_gives_product_pmf(q in prop::collection::vec(0.01f64..0.99, 1..5)) {
        let m = TransmissionModel::independent(q.clone()).unwrap();
        let pmf = m.pmf(LayerSet::full(q.len())).unwrap();
        let mut product = vec![1.0];
        for &p in &q {
            let mut next = vec![0.0; product.len() + 1];
            for (k, &w) in product.iter().enumerate() {
                next[k] += w * (1.0 - p);
                next[k + 1] += w * p;
            }
            product = next;
        }
        prop_assert_eq!(pmf.len(), product.len());
        for (a, b) in pmf.iter().zip(&product) {
            prop_assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn point_mass_profiles_round_trip() {
    let p = Profile::new(1, 2, 3);
    let d = ProfileDistribution::point_mass(p);
    let moved = demultiplex_distribution(&d, p, 1.0).unwrap();
    assert_eq!(moved.mass(&Profile::new(2, 3, 2)), 1.0);
    assert_eq!(moved.demultiplex_witness(&d, 0.0), Some((p, Profile::new(2, 3, 2))));
}
