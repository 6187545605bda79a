//! Stochastic SIS threshold contagion on multigraphs, construction of
//! density-matched comparison pairs, and the paired grid experiment.
//!
//! Each period, every infected node `j` sends one transmission draw per link
//! to each susceptible `i` with `L_ij` nonempty; the draw is a count over `L_ij`
//! from the transmission model. A susceptible node with at least `tau`
//! transmissions in the period becomes infected. Nodes infected at the start of
//! the period then recover independently with probability `delta`. Counts
//! reset every period.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{LayerGraph, LayerSet, MultiGraph};
use crate::multiplexity::total_multiplexity_index;
use crate::transmission::TransmissionModel;
use crate::util::{neumaier_sum, stream, SimRng};

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    pub tau: u32,
    pub delta: f64,
    /// Number of random seeds when none are given; defaults to `floor(sqrt(n))`.
    pub seed_count: Option<usize>,
    pub max_iters: usize,
    pub convergence_tol: f64,
    pub stabilization_iters: usize,
    pub rng_seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            tau: 1,
            delta: 0.5,
            seed_count: None,
            max_iters: 1000,
            convergence_tol: 1e-8,
            stabilization_iters: 100,
            rng_seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau < 1 {
            return Err(Error::InvalidParameter("tau must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::InvalidParameter(format!(
                "delta = {} is not a probability",
                self.delta
            )));
        }
        if !(self.convergence_tol > 0.0) || self.stabilization_iters == 0 {
            return Err(Error::InvalidParameter(
                "tolerance and stabilization window must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn seed_count_for(&self, n: usize) -> usize {
        self.seed_count
            .unwrap_or_else(|| (n as f64).sqrt().floor() as usize)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimResult {
    /// Mean infected share over the stabilization window.
    pub steady_share: f64,
    /// Infected share after every period (initial state excluded).
    pub trajectory: Vec<f64>,
    pub converged: bool,
    pub periods_run: usize,
}

/// Draws `count` distinct nodes uniformly.
pub fn draw_seeds<R: Rng + ?Sized>(n: usize, count: usize, rng: &mut R) -> Result<Vec<usize>> {
    if count > n {
        return Err(Error::InvalidParameter(format!(
            "cannot draw {count} seeds from {n} nodes"
        )));
    }
    let mut seeds = sample(rng, n, count).into_vec();
    seeds.sort_unstable();
    Ok(seeds)
}

/// A multigraph compiled for fast simulation under a fixed transmission model.
#[derive(Clone, Debug)]
pub struct ContagionNetwork {
    n: usize,
    /// For each transmitter `j`: `(receiver i, index into cdfs)`.
    targets: Vec<Vec<(u32, u16)>>,
    /// Cumulative count distribution per distinct layer set.
    cdfs: Vec<Vec<f64>>,
}

impl ContagionNetwork {
    pub fn new(g: &MultiGraph, model: &TransmissionModel) -> Result<Self> {
        if model.layer_count() != g.layer_count() {
            return Err(Error::InvalidModel(format!(
                "model has {} layers, graph has {}",
                model.layer_count(),
                g.layer_count()
            )));
        }
        let n = g.node_count();
        let mut set_index: BTreeMap<LayerSet, u16> = BTreeMap::new();
        let mut cdfs = Vec::new();
        let mut targets = vec![Vec::new(); n];
        for i in 0..n {
            for (j, set) in g.neighbor_sets(i)? {
                let idx = match set_index.get(&set) {
                    Some(&idx) => idx,
                    None => {
                        let pmf = model.pmf(set)?;
                        let mut acc = 0.0;
                        let cdf: Vec<f64> = pmf
                            .iter()
                            .map(|p| {
                                acc += p;
                                acc
                            })
                            .collect();
                        cdfs.push(cdf);
                        let idx = (cdfs.len() - 1) as u16;
                        set_index.insert(set, idx);
                        idx
                    }
                };
                targets[j].push((i as u32, idx));
            }
        }
        Ok(ContagionNetwork { n, targets, cdfs })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    fn draw_count(&self, idx: u16, u: f64) -> u32 {
        let cdf = &self.cdfs[idx as usize];
        cdf.iter().position(|&c| u < c).unwrap_or(cdf.len() - 1) as u32
    }

    fn check_seeds(&self, seeds: &[usize]) -> Result<()> {
        if seeds.len() > self.n {
            return Err(Error::InvalidParameter(format!(
                "{} seeds exceed {} nodes",
                seeds.len(),
                self.n
            )));
        }
        for &s in seeds {
            if s >= self.n {
                return Err(Error::NodeOutOfRange {
                    id: s,
                    node_count: self.n,
                });
            }
        }
        Ok(())
    }

    /// One synchronous period. Returns the number infected afterwards.
    fn step<R: Rng + ?Sized>(
        &self,
        infected: &mut [bool],
        exposures: &mut [u32],
        tau: u32,
        delta: f64,
        rng: &mut R,
    ) -> usize {
        exposures.fill(0);
        for j in 0..self.n {
            if !infected[j] {
                continue;
            }
            for &(i, idx) in &self.targets[j] {
                let i = i as usize;
                if infected[i] || exposures[i] >= tau {
                    continue;
                }
                exposures[i] += self.draw_count(idx, rng.random::<f64>());
            }
        }
        let mut count = 0;
        for i in 0..self.n {
            if infected[i] {
                if rng.random::<f64>() < delta {
                    infected[i] = false;
                }
            } else if exposures[i] >= tau {
                // Newly infected: not recovery-eligible this period.
                exposures[i] = u32::MAX;
            }
        }
        for i in 0..self.n {
            if exposures[i] == u32::MAX {
                infected[i] = true;
            }
            count += infected[i] as usize;
        }
        count
    }

    /// Runs the contagion from the given seeds until consecutive shares differ
    /// by less than the tolerance (or `max_iters`), then for the stabilization
    /// window, whose mean share is reported.
    pub fn run<R: Rng + ?Sized>(
        &self,
        cfg: &SimConfig,
        seeds: &[usize],
        rng: &mut R,
    ) -> Result<SimResult> {
        cfg.validate()?;
        self.check_seeds(seeds)?;
        let n = self.n as f64;
        let mut infected = vec![false; self.n];
        for &s in seeds {
            infected[s] = true;
        }
        let mut exposures = vec![0u32; self.n];
        let mut count = infected.iter().filter(|&&x| x).count();
        let mut prev = count as f64 / n;
        let mut trajectory = Vec::new();
        let mut converged = false;
        while trajectory.len() < cfg.max_iters {
            count = if count == 0 {
                0
            } else {
                self.step(&mut infected, &mut exposures, cfg.tau, cfg.delta, rng)
            };
            let share = count as f64 / n;
            trajectory.push(share);
            if (share - prev).abs() < cfg.convergence_tol {
                converged = true;
                break;
            }
            prev = share;
        }
        let start = trajectory.len();
        for _ in 0..cfg.stabilization_iters {
            count = if count == 0 {
                0
            } else {
                self.step(&mut infected, &mut exposures, cfg.tau, cfg.delta, rng)
            };
            trajectory.push(count as f64 / n);
        }
        let window = &trajectory[start..];
        Ok(SimResult {
            steady_share: neumaier_sum(window.iter().copied()) / window.len() as f64,
            periods_run: trajectory.len(),
            trajectory,
            converged,
        })
    }

    /// Runs `horizon` periods from `seeds` and reports which nodes were ever
    /// infected.
    pub fn ever_infected<R: Rng + ?Sized>(
        &self,
        seeds: &[usize],
        tau: u32,
        delta: f64,
        horizon: usize,
        rng: &mut R,
    ) -> Result<Vec<bool>> {
        self.check_seeds(seeds)?;
        let mut infected = vec![false; self.n];
        for &s in seeds {
            infected[s] = true;
        }
        let mut ever = infected.clone();
        let mut exposures = vec![0u32; self.n];
        for _ in 0..horizon {
            if self.step(&mut infected, &mut exposures, tau, delta, rng) == 0 {
                break;
            }
            for (e, &i) in ever.iter_mut().zip(&infected) {
                *e |= i;
            }
        }
        Ok(ever)
    }
}

/// Simulates the contagion. Seeds default to `seed_count` nodes drawn
/// uniformly from the `rng_seed` stream, which also drives transmission.
pub fn simulate(
    g: &MultiGraph,
    model: &TransmissionModel,
    cfg: &SimConfig,
    seeds: Option<&[usize]>,
) -> Result<SimResult> {
    let net = ContagionNetwork::new(g, model)?;
    let mut rng = stream(cfg.rng_seed, &[]);
    let drawn;
    let seeds = match seeds {
        Some(s) => s,
        None => {
            drawn = draw_seeds(g.node_count(), cfg.seed_count_for(g.node_count()), &mut rng)?;
            &drawn
        }
    };
    net.run(cfg, seeds, &mut rng)
}

/// Two two-layer networks sharing the first layer, with second layers of equal
/// edge count.
#[derive(Clone, Debug)]
pub struct ComparisonPair {
    /// First layer combined with the sparser of the two candidates, unpruned.
    pub g: MultiGraph,
    /// First layer combined with the denser candidate pruned to equal size.
    pub g_prime: MultiGraph,
    /// Which input (2 or 3) was pruned.
    pub pruned_input: u8,
}

impl ComparisonPair {
    /// `(more multiplexed, less multiplexed)` by total multiplexity index, or
    /// `None` when the two are equal.
    pub fn ordered(&self) -> Option<(&MultiGraph, &MultiGraph)> {
        let (sg, sp) = (
            total_multiplexity_index(&self.g),
            total_multiplexity_index(&self.g_prime),
        );
        match sg.cmp(&sp) {
            std::cmp::Ordering::Greater => Some((&self.g, &self.g_prime)),
            std::cmp::Ordering::Less => Some((&self.g_prime, &self.g)),
            std::cmp::Ordering::Equal => None,
        }
    }
}

/// Uniformly removes edges from `layer` until `target` remain.
pub fn prune_to<R: Rng + ?Sized>(layer: &LayerGraph, target: usize, rng: &mut R) -> LayerGraph {
    let edges: Vec<(usize, usize)> = layer.edges().collect();
    if target >= edges.len() {
        return layer.clone();
    }
    let keep = sample(rng, edges.len(), target);
    layer.retain_edges(keep.into_iter().map(|k| edges[k]))
}

/// Builds the density-matched pair from three layers: the denser of `a2`,
/// `a3` is pruned to the sparser's edge count. Ties prune nothing and pair
/// `a3` into `g`, `a2` into `g_prime`.
pub fn build_comparison_pair<R: Rng + ?Sized>(
    a1: &LayerGraph,
    a2: &LayerGraph,
    a3: &LayerGraph,
    rng: &mut R,
) -> Result<ComparisonPair> {
    let n = a1.node_count();
    if a2.node_count() != n || a3.node_count() != n {
        return Err(Error::UniverseMismatch);
    }
    let (denser, sparser, pruned_input) = if a3.edge_count() > a2.edge_count() {
        (a3, a2, 3)
    } else {
        (a2, a3, 2)
    };
    let pruned = prune_to(denser, sparser.edge_count(), rng);
    let names = vec!["layer1".to_owned(), "layer2".to_owned()];
    Ok(ComparisonPair {
        g: MultiGraph::from_layers(names.clone(), vec![a1.clone(), sparser.clone()])?,
        g_prime: MultiGraph::from_layers(names, vec![a1.clone(), pruned])?,
        pruned_input,
    })
}

/// Parameters of a paired grid experiment.
#[derive(Clone, Debug)]
pub struct GridSpec {
    pub q_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub tau: u32,
    pub reps: usize,
    pub master_seed: u64,
    /// Worker threads; `0` uses the global pool.
    pub workers: usize,
    /// Seeds per run; defaults to `floor(sqrt(n))`.
    pub seed_count: Option<usize>,
}

/// One replication on one village and grid cell.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PairedRun {
    pub village: usize,
    pub q_index: usize,
    pub delta_index: usize,
    pub rep: usize,
    /// Steady share on the more multiplexed network.
    pub more_mpx_share: f64,
    /// Steady share on the less multiplexed network.
    pub less_mpx_share: f64,
    /// Both networks have the same multiplexity index.
    pub mpx_tied: bool,
}

impl PairedRun {
    /// 1 if the more multiplexed network diffused strictly more, 0 if strictly
    /// less, 1/2 on ties.
    pub fn score(&self) -> f64 {
        if self.mpx_tied || self.more_mpx_share == self.less_mpx_share {
            0.5
        } else if self.more_mpx_share > self.less_mpx_share {
            1.0
        } else {
            0.0
        }
    }

    pub fn prevalence(&self) -> f64 {
        0.5 * (self.more_mpx_share + self.less_mpx_share)
    }

    /// Decile of the pair's mean prevalence, `0..=9`.
    pub fn prevalence_bin(&self) -> usize {
        ((self.prevalence() * 10.0).floor() as usize).min(9)
    }
}

/// Aggregate over a set of paired runs.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PairSummary {
    pub n_runs: usize,
    /// Runs where the more multiplexed network diffused strictly more.
    pub wins: usize,
    /// Runs where it diffused strictly less.
    pub losses: usize,
    pub frac_mpx_higher: f64,
    pub mean_prevalence: f64,
}

impl PairSummary {
    pub fn from_runs<'a, I: IntoIterator<Item = &'a PairedRun>>(runs: I) -> Self {
        let mut s = PairSummary::default();
        let (mut score, mut prev) = (0.0, 0.0);
        for r in runs {
            s.n_runs += 1;
            let x = r.score();
            score += x;
            prev += r.prevalence();
            if x == 1.0 {
                s.wins += 1;
            } else if x == 0.0 {
                s.losses += 1;
            }
        }
        if s.n_runs > 0 {
            s.frac_mpx_higher = score / s.n_runs as f64;
            s.mean_prevalence = prev / s.n_runs as f64;
        }
        s
    }
}

/// All paired runs of a grid experiment.
#[derive(Clone, Debug)]
pub struct GridOutcome {
    pub q_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub tau: u32,
    pub runs: Vec<PairedRun>,
}

impl GridOutcome {
    pub fn cell_summary(&self, q_index: usize, delta_index: usize) -> PairSummary {
        PairSummary::from_runs(
            self.runs
                .iter()
                .filter(|r| r.q_index == q_index && r.delta_index == delta_index),
        )
    }

    /// Runs pooled over all cells, by prevalence decile.
    pub fn pooled_by_bin(&self) -> BTreeMap<usize, PairSummary> {
        let mut bins: BTreeMap<usize, Vec<&PairedRun>> = BTreeMap::new();
        for r in &self.runs {
            bins.entry(r.prevalence_bin()).or_default().push(r);
        }
        bins.into_iter()
            .map(|(b, runs)| (b, PairSummary::from_runs(runs)))
            .collect()
    }

    /// Rows of `(q, delta, bin, summary)` for every nonempty cell and bin.
    pub fn rows(&self) -> Vec<(f64, f64, usize, PairSummary)> {
        let mut out = Vec::new();
        for (qi, &q) in self.q_grid.iter().enumerate() {
            for (di, &d) in self.delta_grid.iter().enumerate() {
                let mut bins: BTreeMap<usize, Vec<&PairedRun>> = BTreeMap::new();
                for r in self
                    .runs
                    .iter()
                    .filter(|r| r.q_index == qi && r.delta_index == di)
                {
                    bins.entry(r.prevalence_bin()).or_default().push(r);
                }
                for (b, runs) in bins {
                    out.push((q, d, b, PairSummary::from_runs(runs)));
                }
            }
        }
        out
    }

    /// The grid results table.
    pub fn to_table(&self) -> String {
        let mut out =
            String::from("q,delta,tau,prevalence_bin,frac_mpx_higher,mean_prevalence,n_runs\n");
        for (q, d, b, s) in self.rows() {
            let _ = writeln!(
                out,
                "{q},{d},{},{:.1},{:.6},{:.6},{}",
                self.tau,
                b as f64 / 10.0,
                s.frac_mpx_higher,
                s.mean_prevalence,
                s.n_runs
            );
        }
        out
    }
}

/// Runs the paired experiment over every village, grid cell and replication.
///
/// Randomness streams derive from `master_seed` by counter path:
/// `[0, village]` prunes the village's pair, `[1, village, cell, rep]` draws
/// the seed set shared by both members, and `[2, village, cell, rep, member]`
/// drives member transmission and recovery (member 0 = more multiplexed).
pub fn run_grid(villages: &[[LayerGraph; 3]], spec: &GridSpec) -> Result<GridOutcome> {
    if spec.q_grid.is_empty() || spec.delta_grid.is_empty() || villages.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    if spec.reps == 0 {
        return Err(Error::InvalidParameter("reps must be at least 1".into()));
    }
    let pairs = villages
        .iter()
        .enumerate()
        .map(|(v, [a1, a2, a3])| {
            let mut rng = stream(spec.master_seed, &[0, v as u64]);
            build_comparison_pair(a1, a2, a3, &mut rng)
        })
        .collect::<Result<Vec<_>>>()?;
    run_grid_on_pairs(&pairs, spec)
}

/// Like [`run_grid`], on prebuilt pairs.
pub fn run_grid_on_pairs(pairs: &[ComparisonPair], spec: &GridSpec) -> Result<GridOutcome> {
    if spec.q_grid.is_empty() || spec.delta_grid.is_empty() || pairs.is_empty() {
        return Err(Error::InvalidParameter("empty grid".into()));
    }
    let cells: Vec<(usize, usize, usize)> = (0..pairs.len())
        .flat_map(|v| {
            (0..spec.q_grid.len())
                .flat_map(move |qi| (0..spec.delta_grid.len()).map(move |di| (v, qi, di)))
        })
        .collect();
    let n_delta = spec.delta_grid.len();
    let task = |&(v, qi, di): &(usize, usize, usize)| -> Result<Vec<PairedRun>> {
        let pair = &pairs[v];
        let (more, less, tied) = match pair.ordered() {
            Some((m, l)) => (m, l, false),
            None => (&pair.g, &pair.g_prime, true),
        };
        let model = TransmissionModel::uniform(2, spec.q_grid[qi])?;
        let nets = [
            ContagionNetwork::new(more, &model)?,
            ContagionNetwork::new(less, &model)?,
        ];
        let cfg = SimConfig {
            tau: spec.tau,
            delta: spec.delta_grid[di],
            seed_count: spec.seed_count,
            ..SimConfig::default()
        };
        let n = more.node_count();
        let cell = (qi * n_delta + di) as u64;
        (0..spec.reps)
            .map(|rep| {
                let path = [1, v as u64, cell, rep as u64];
                let seeds = draw_seeds(
                    n,
                    cfg.seed_count_for(n),
                    &mut stream(spec.master_seed, &path),
                )?;
                let mut shares = [0.0; 2];
                for (member, net) in nets.iter().enumerate() {
                    let mut rng: SimRng = stream(
                        spec.master_seed,
                        &[2, v as u64, cell, rep as u64, member as u64],
                    );
                    shares[member] = net.run(&cfg, &seeds, &mut rng)?.steady_share;
                }
                Ok(PairedRun {
                    village: v,
                    q_index: qi,
                    delta_index: di,
                    rep,
                    more_mpx_share: shares[0],
                    less_mpx_share: shares[1],
                    mpx_tied: tied,
                })
            })
            .collect()
    };
    let results: Vec<Result<Vec<PairedRun>>> = if spec.workers == 0 {
        cells.par_iter().map(task).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(spec.workers)
            .build()
            .map_err(|e| Error::InvalidParameter(e.to_string()))?
            .install(|| cells.par_iter().map(task).collect())
    };
    let mut runs = Vec::with_capacity(cells.len() * spec.reps);
    for r in results {
        runs.extend(r?);
    }
    Ok(GridOutcome {
        q_grid: spec.q_grid.clone(),
        delta_grid: spec.delta_grid.clone(),
        tau: spec.tau,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> LayerGraph {
        LayerGraph::from_edges(n, (0..n - 1).flat_map(|i| [(i, i + 1), (i + 1, i)])).unwrap()
    }

    fn two_layer(layer: LayerGraph) -> MultiGraph {
        MultiGraph::from_layers(vec!["a".into(), "b".into()], vec![layer.clone(), layer]).unwrap()
    }

    #[test]
    fn no_transmission_dies_out() {
        let g = two_layer(path_graph(30));
        let model = TransmissionModel::uniform(2, 1e-9).unwrap();
        let cfg = SimConfig {
            delta: 0.5,
            rng_seed: 3,
            ..SimConfig::default()
        };
        let r = simulate(&g, &model, &cfg, None).unwrap();
        assert_eq!(r.steady_share, 0.0);
        assert!(r.converged);
    }

    #[test]
    fn absorbing_full_infection() {
        let g = two_layer(path_graph(25));
        let model = TransmissionModel::uniform(2, 0.99).unwrap();
        let cfg = SimConfig {
            delta: 0.0,
            seed_count: Some(1),
            rng_seed: 11,
            ..SimConfig::default()
        };
        let r = simulate(&g, &model, &cfg, None).unwrap();
        assert_eq!(r.steady_share, 1.0);
        assert!(r.trajectory.len() <= cfg.max_iters + cfg.stabilization_iters);
        assert!(r.trajectory.iter().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn determinism() {
        let g = two_layer(path_graph(40));
        let model = TransmissionModel::uniform(2, 0.4).unwrap();
        let cfg = SimConfig {
            delta: 0.2,
            rng_seed: 99,
            ..SimConfig::default()
        };
        assert_eq!(
            simulate(&g, &model, &cfg, None).unwrap(),
            simulate(&g, &model, &cfg, None).unwrap()
        );
    }

    #[test]
    fn seed_errors() {
        let g = two_layer(path_graph(4));
        let model = TransmissionModel::uniform(2, 0.4).unwrap();
        let cfg = SimConfig::default();
        assert!(simulate(&g, &model, &cfg, Some(&[0, 1, 2, 3, 0])).is_err());
        assert!(simulate(&g, &model, &cfg, Some(&[7])).is_err());
        let big = SimConfig {
            seed_count: Some(5),
            ..SimConfig::default()
        };
        assert!(simulate(&g, &model, &big, None).is_err());
        assert!(draw_seeds(3, 4, &mut stream(1, &[])).is_err());
    }

    #[test]
    fn seeds_are_distinct() {
        let mut rng = stream(5, &[]);
        for _ in 0..100 {
            let s = draw_seeds(20, 7, &mut rng).unwrap();
            let mut d = s.clone();
            d.dedup();
            assert_eq!(d.len(), 7);
        }
    }

    #[test]
    fn pruning_matches_counts() {
        let mut rng = stream(1, &[]);
        let a1 = path_graph(30);
        let a2 = LayerGraph::from_edges(30, (0..50).map(|k| (k % 30, (k * 7 + 1) % 30)).filter(|(i, j)| i != j)).unwrap();
        let a3 = LayerGraph::from_edges(30, (0..30).map(|k| (k, (k + 2) % 30))).unwrap();
        let pair = build_comparison_pair(&a1, &a2, &a3, &mut rng).unwrap();
        assert_eq!(pair.pruned_input, 2);
        assert_eq!(pair.g_prime.layer(1).edge_count(), a3.edge_count());
        assert_eq!(pair.g.layer(1), &a3);
        assert!(pair.g_prime.layer(1).edges().all(|(i, j)| a2.contains(i, j)));
    }

    #[test]
    fn equal_density_is_a_no_op_prune() {
        let mut rng = stream(1, &[]);
        let a1 = path_graph(10);
        let a2 = LayerGraph::from_edges(10, (0..9).map(|k| (k + 1, k))).unwrap();
        let a3 = LayerGraph::from_edges(10, (0..9).map(|k| (k, k + 1))).unwrap();
        let pair = build_comparison_pair(&a1, &a2, &a3, &mut rng).unwrap();
        assert_eq!(pair.g.layer(1), &a3);
        assert_eq!(pair.g_prime.layer(1), &a2);
        assert_eq!(pair.g.layer(0), pair.g_prime.layer(0));
    }

    #[test]
    fn identical_pair_scores_one_half() {
        let a = path_graph(16);
        let pair = ComparisonPair {
            g: two_layer(a.clone()),
            g_prime: two_layer(a),
            pruned_input: 2,
        };
        let spec = GridSpec {
            q_grid: vec![0.3],
            delta_grid: vec![0.3],
            tau: 1,
            reps: 1,
            master_seed: 4,
            workers: 1,
            seed_count: None,
        };
        let out = run_grid_on_pairs(&[pair], &spec).unwrap();
        assert_eq!(out.cell_summary(0, 0).frac_mpx_higher, 0.5);
        assert!(out.to_table().starts_with("q,delta,tau,prevalence_bin"));
    }

    #[test]
    fn grid_rejects_empty_inputs() {
        let spec = GridSpec {
            q_grid: vec![],
            delta_grid: vec![0.3],
            tau: 1,
            reps: 1,
            master_seed: 0,
            workers: 1,
            seed_count: None,
        };
        let a = path_graph(5);
        assert!(run_grid(&[[a.clone(), a.clone(), a]], &spec).is_err());
    }

    /// Exact expected reported share for two mutually linked nodes, following
    /// the stopping rule and stabilization window over the 4-state chain.
    fn two_node_expected_share(p_any: f64, delta: f64, cfg: &SimConfig) -> f64 {
        let count = |s: usize| (s & 1) + (s >> 1 & 1);
        let step = |s: usize| -> [f64; 4] {
            let mut out = [0.0; 4];
            let node = |k: usize| -> [f64; 2] {
                let me = s >> k & 1 == 1;
                let other = s >> (1 - k) & 1 == 1;
                match (me, other) {
                    (true, _) => [delta, 1.0 - delta],
                    (false, true) => [1.0 - p_any, p_any],
                    (false, false) => [1.0, 0.0],
                }
            };
            let (a, b) = (node(0), node(1));
            for x in 0..2 {
                for y in 0..2 {
                    out[x | y << 1] += a[x] * b[y];
                }
            }
            out
        };
        let trans: Vec<[f64; 4]> = (0..4).map(step).collect();
        let window_mean = |start: usize| -> f64 {
            let mut dist = [0.0; 4];
            dist[start] = 1.0;
            let mut acc = 0.0;
            for _ in 0..cfg.stabilization_iters {
                let mut next = [0.0; 4];
                for s in 0..4 {
                    for t in 0..4 {
                        next[t] += dist[s] * trans[s][t];
                    }
                }
                dist = next;
                acc += (0..4).map(|t| dist[t] * count(t) as f64 / 2.0).sum::<f64>();
            }
            acc / cfg.stabilization_iters as f64
        };
        let v: Vec<f64> = (0..4).map(window_mean).collect();
        let mut live = [0.0; 4];
        live[1] = 1.0;
        let mut expected = 0.0;
        for _ in 0..cfg.max_iters {
            let mut next = [0.0; 4];
            for s in 0..4 {
                for t in 0..4 {
                    let w = live[s] * trans[s][t];
                    if count(t) == count(s) {
                        expected += w * v[t];
                    } else {
                        next[t] += w;
                    }
                }
            }
            live = next;
        }
        expected + (0..4).map(|s| live[s] * v[s]).sum::<f64>()
    }

    #[test]
    fn two_node_chain_matches_monte_carlo() {
        let g = two_layer(LayerGraph::from_edges(2, [(0, 1), (1, 0)]).unwrap());
        let model = TransmissionModel::uniform(2, 0.6).unwrap();
        let p_any = 1.0 - 0.4 * 0.4;
        let base = SimConfig {
            delta: 0.3,
            ..SimConfig::default()
        };
        let exact = two_node_expected_share(p_any, 0.3, &base);
        let reps = 20_000;
        let shares: Vec<f64> = (0..reps)
            .map(|r| {
                let cfg = SimConfig {
                    rng_seed: r,
                    ..base.clone()
                };
                simulate(&g, &model, &cfg, Some(&[0])).unwrap().steady_share
            })
            .collect();
        let mean = shares.iter().sum::<f64>() / reps as f64;
        let var = shares.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!((mean - exact).abs() < 3.0 * se, "mean {mean} exact {exact} se {se}");
        assert!(exact > 0.05);
    }
}
