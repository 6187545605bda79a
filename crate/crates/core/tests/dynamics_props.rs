use multiplex::contagion::{draw_seeds, simulate, ContagionNetwork, SimConfig};
use multiplex::graph::{LayerSet, MultiGraph};
use multiplex::meanfield::{
    individual_infection_prob_exact, infection_prob_profile, solve_steady_state, verify_sis_ordering, FixedPointMap,
};
use multiplex::multiplexity::{demultiplex_distribution, Profile, ProfileDistribution};
use multiplex::transmission::{JointPair, TransmissionModel};
use multiplex::util::stream;
use multiplex::villages::VillageModel;
use proptest::prelude::*;

fn small_village(seed: u64) -> MultiGraph {
    VillageModel::pair_experiment()
        .generate(60, &mut stream(seed, &[]))
        .unwrap()
        .select_layers(&["kinship", "advice"])
        .unwrap()
}

fn pair_strategy() -> impl Strategy<Value = JointPair> {
    (0.05f64..0.95, 0.05f64..0.95, 0.0f64..1.0).prop_map(|(qa, qb, t)| {
        let lo = (qa + qb - 1.0).max(0.0);
        JointPair::new(qa, qb, lo + t * (qa.min(qb) - lo)).unwrap()
    })
}

fn profile_strategy() -> impl Strategy<Value = Profile> {
    (0u32..6, 0u32..6, 0u32..6).prop_map(|(a, b, c)| Profile::new(a, b, c))
}

fn distribution_strategy() -> impl Strategy<Value = ProfileDistribution> {
    prop::collection::vec((profile_strategy(), 0.05f64..1.0), 1..5).prop_map(|entries| {
        let mut merged: Vec<(Profile, f64)> = Vec::new();
        for (p, w) in entries {
            match merged.iter_mut().find(|(q, _)| *q == p) {
                Some((_, m)) => *m += w,
                None => merged.push((p, w)),
            }
        }
        let total: f64 = merged.iter().map(|(_, w)| w).sum();
        ProfileDistribution::new(merged.into_iter().map(|(p, w)| (p, w / total))).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn fixed_point_map_is_monotone(
        dist in distribution_strategy(),
        pair in pair_strategy(),
        delta in 0.01f64..0.99,
        tau in 1u32..3,
        a in 0.0f64..1.0,
        b in 0.0f64..1.0,
    ) {
        let map = FixedPointMap::new(&dist, delta, &pair, tau).unwrap();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(map.apply(lo).unwrap() <= map.apply(hi).unwrap() + 1e-14);
    }

    #[test]
    fn exact_oracle_matches_closed_form(d in profile_strategy(), pair in pair_strategy(), rho in 0.0f64..1.0) {
        prop_assume!(d.neighbor_count() > 0);
        let m = TransmissionModel::from_pair(pair);
        let exact = individual_infection_prob_exact(&d.neighbor_layer_sets(), rho, &m, 1).unwrap();
        prop_assert!((exact - infection_prob_profile(d, rho, &pair)).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn steady_states_are_fixed_points(
        dist in distribution_strategy(),
        pair in pair_strategy(),
        delta in 0.01f64..0.99,
        tau in 1u32..3,
    ) {
        let ss = solve_steady_state(&dist, delta, &pair, tau).unwrap();
        prop_assert!(ss.residual < 1e-10, "residual {}", ss.residual);
        prop_assert!((0.0..=1.0).contains(&ss.rho));
    }

    #[test]
    fn per_profile_rates_share_the_population_ordering(
        dist in distribution_strategy(),
        qa in 0.05f64..0.95,
        qb in 0.05f64..0.95,
        delta in 0.01f64..0.99,
        share in 0.1f64..1.0,
    ) {
        let split = dist.support().find(|p| p.both > 0);
        prop_assume!(split.is_some());
        let at = split.unwrap();
        let less = demultiplex_distribution(&dist, at, share * dist.mass(&at)).unwrap();
        let pair = JointPair::independent(qa, qb).unwrap();
        let report = verify_sis_ordering(&dist, &less, delta, &pair, 1, None).unwrap();
        let more_ss = solve_steady_state(&dist, delta, &pair, 1).unwrap();
        let less_ss = solve_steady_state(&less, delta, &pair, 1).unwrap();
        prop_assume!(more_ss.rho > 0.0 && less_ss.rho > 0.0);
        prop_assert!(report.margin > -1e-12, "{report:?}");
        prop_assert_eq!(report.detail("per_profile_consistent"), Some(1.0));
        for (p, &rate) in &more_ss.per_profile {
            if let Some(&other) = less_ss.per_profile.get(p) {
                prop_assert!(other >= rate - 1e-12, "{p:?}: {rate} vs {other}");
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn simulation_is_deterministic(seed in any::<u64>(), q in 0.05f64..0.6, delta in 0.05f64..0.9, tau in 1u32..3) {
        let g = small_village(seed % 8);
        let m = TransmissionModel::uniform(2, q).unwrap();
        let cfg = SimConfig { tau, delta, rng_seed: seed, max_iters: 300, stabilization_iters: 20, ..SimConfig::default() };
        let a = simulate(&g, &m, &cfg, None).unwrap();
        let b = simulate(&g, &m, &cfg, None).unwrap();
        prop_assert_eq!(&a, &b);
        let n = g.node_count() as f64;
        for &s in &a.trajectory {
            let count = s * n;
            prop_assert!((count - count.round()).abs() < 1e-9 && (0.0..=1.0).contains(&s));
        }
    }
}

#[test]
fn seed_draws_are_uniform() {
    let (n, count, draws) = (20usize, 4usize, 20_000usize);
    let mut rng = stream(9, &[]);
    let mut freq = vec![0usize; n];
    for _ in 0..draws {
        let seeds = draw_seeds(n, count, &mut rng).unwrap();
        let mut sorted = seeds.clone();
        sorted.dedup();
        assert_eq!(sorted.len(), count);
        for s in seeds {
            freq[s] += 1;
        }
    }
    let p = count as f64 / n as f64;
    let se = (p * (1.0 - p) / draws as f64).sqrt();
    for (i, &f) in freq.iter().enumerate() {
        let share = f as f64 / draws as f64;
        assert!((share - p).abs() < 3.0 * se + 1e-12, "node {i}: {share}");
    }
}

#[test]
fn raising_transmission_raises_prevalence() {
    let g = small_village(3);
    let n = g.node_count();
    let reps = 200;
    let cfg = SimConfig { delta: 0.4, max_iters: 400, stabilization_iters: 50, ..SimConfig::default() };
    let low = ContagionNetwork::new(&g, &TransmissionModel::uniform(2, 0.15).unwrap()).unwrap();
    let high = ContagionNetwork::new(&g, &TransmissionModel::uniform(2, 0.3).unwrap()).unwrap();
    let diffs: Vec<f64> = (0..reps as u64)
        .map(|r| {
            let seeds = draw_seeds(n, 7, &mut stream(r, &[0])).unwrap();
            let a = low.run(&cfg, &seeds, &mut stream(r, &[1])).unwrap().steady_share;
            let b = high.run(&cfg, &seeds, &mut stream(r, &[2])).unwrap().steady_share;
            b - a
        })
        .collect();
    let mean = diffs.iter().sum::<f64>() / reps as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    let z = mean / (var / reps as f64).sqrt();
    // one-sided test of "lower q spreads further" at 1%
    assert!(z > -2.326, "z = {z}");
    assert!(mean >= 0.0, "mean difference {mean}");
}

#[test]
fn exact_pmf_sums_to_one_for_mixed_layer_sets() {
    let m = TransmissionModel::independent(vec![0.3, 0.6, 0.45]).unwrap().with_joint(0, 1, 0.25).unwrap();
    let sets = [LayerSet::from_bits(0b011), LayerSet::from_bits(0b100), LayerSet::from_bits(0b001)];
    let pmf = multiplex::meanfield::transmission_count_pmf(&sets, 0.4, &m).unwrap();
    assert!((pmf.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    assert!(pmf.iter().all(|&p| p >= 0.0));
}
