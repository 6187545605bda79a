//! Synthetic multiplex villages.
//!
//! Households get a lognormal sociability and a position in the unit square;
//! the affinity of a pair is the product of their sociabilities times a
//! distance decay. A shared base relationship graph is drawn from the
//! affinities, and each layer keeps every base tie with its own retention
//! probability, then adds fresh ties (again by affinity) up to its target mean
//! degree. Layers with high retention overlap strongly with each other; a
//! layer with low retention is nearly independent of them. Ties are
//! undirected and stored in both directions.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::graph::{LayerGraph, MultiGraph};

#[derive(Clone, Debug, PartialEq)]
pub struct LayerSpec {
    pub name: String,
    /// Target mean number of ties per household.
    pub mean_degree: f64,
    /// Probability that a base tie is kept in this layer.
    pub retention: f64,
}

impl LayerSpec {
    pub fn new(name: &str, mean_degree: f64, retention: f64) -> Self {
        LayerSpec {
            name: name.to_owned(),
            mean_degree,
            retention,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VillageModel {
    /// Mean degree of the base relationship graph.
    pub base_degree: f64,
    /// Log-scale standard deviation of sociability.
    pub sociability_sd: f64,
    /// Length scale of the distance decay in the unit square.
    pub distance_scale: f64,
    pub layers: Vec<LayerSpec>,
}

impl VillageModel {
    /// Three layers for density-matched pair experiments: a dense first layer,
    /// a second that overlaps it heavily, and a third that barely does.
    pub fn pair_experiment() -> Self {
        VillageModel {
            base_degree: 4.0,
            sociability_sd: 0.5,
            distance_scale: 0.15,
            layers: vec![
                LayerSpec::new("kinship", 4.0, 0.85),
                LayerSpec::new("social", 3.5, 0.8),
                LayerSpec::new("advice", 3.0, 0.1),
            ],
        }
    }

    /// Five survey-like layers.
    pub fn survey() -> Self {
        VillageModel {
            base_degree: 4.0,
            sociability_sd: 0.5,
            distance_scale: 0.15,
            layers: vec![
                LayerSpec::new("kerorice", 4.0, 0.8),
                LayerSpec::new("social", 4.0, 0.8),
                LayerSpec::new("advice", 3.0, 0.1),
                LayerSpec::new("decision", 2.5, 0.5),
                LayerSpec::new("temple", 2.0, 0.4),
            ],
        }
    }

    /// Multiplies every retention probability by `factor`, capped at 1.
    pub fn with_retention_scale(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for l in &mut out.layers {
            l.retention = (l.retention * factor).clamp(0.0, 1.0);
        }
        out
    }

    pub fn layer_names(&self) -> Vec<String> {
        self.layers.iter().map(|l| l.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::InvalidParameter("village model has no layers".into()));
        }
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        if !ok(self.base_degree) || !ok(self.sociability_sd) || !(self.distance_scale > 0.0) {
            return Err(Error::InvalidParameter("village model parameters must be nonnegative".into()));
        }
        for l in &self.layers {
            if !ok(l.mean_degree) || !(0.0..=1.0).contains(&l.retention) {
                return Err(Error::InvalidParameter(format!("invalid layer spec `{}`", l.name)));
            }
        }
        Ok(())
    }

    /// Draws one village of `n` households.
    pub fn generate<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<MultiGraph> {
        self.validate()?;
        if n < 2 {
            return Err(Error::InvalidParameter("a village needs two households".into()));
        }
        let normal = Normal::new(0.0, self.sociability_sd).map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let social: Vec<f64> = (0..n).map(|_| normal.sample(rng).exp()).collect();
        let pos: Vec<(f64, f64)> = (0..n).map(|_| (rng.random::<f64>(), rng.random::<f64>())).collect();
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        let mut affinity = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                let d = ((pos[i].0 - pos[j].0).powi(2) + (pos[i].1 - pos[j].1).powi(2)).sqrt();
                pairs.push((i, j));
                affinity.push(social[i] * social[j] * (-d / self.distance_scale).exp());
            }
        }
        let base: Vec<bool> = draw_ties(&affinity, self.base_degree * n as f64 / 2.0, rng);
        let base_count = base.iter().filter(|&&b| b).count() as f64;
        let mut layers = Vec::with_capacity(self.layers.len());
        for spec in &self.layers {
            let mut ties: Vec<bool> = base.iter().map(|&b| b && rng.random::<f64>() < spec.retention).collect();
            let target = spec.mean_degree * n as f64 / 2.0;
            let missing = target - spec.retention * base_count;
            if missing > 0.0 {
                let fresh = draw_ties(&affinity, missing, rng);
                for (t, f) in ties.iter_mut().zip(fresh) {
                    *t |= f;
                }
            }
            let edges = pairs
                .iter()
                .zip(&ties)
                .filter(|(_, &t)| t)
                .flat_map(|(&(i, j), _)| [(i, j), (j, i)]);
            layers.push(LayerGraph::from_edges(n, edges)?);
        }
        MultiGraph::from_layers(self.layer_names(), layers)
    }
}

/// Independent ties with probabilities `min(1, c w)`, with `c` chosen so the
/// expected count is `target`.
fn draw_ties<R: Rng + ?Sized>(weights: &[f64], target: f64, rng: &mut R) -> Vec<bool> {
    let scale = calibrate(weights, target);
    weights
        .iter()
        .map(|&w| rng.random::<f64>() < (scale * w).min(1.0))
        .collect()
}

fn calibrate(weights: &[f64], target: f64) -> f64 {
    let expected = |c: f64| weights.iter().map(|&w| (c * w).min(1.0)).sum::<f64>();
    if target <= 0.0 {
        return 0.0;
    }
    if target >= weights.len() as f64 {
        return f64::INFINITY;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while expected(hi) < target {
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if expected(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multiplexity::village_score;
    use crate::util::stream;

    #[test]
    fn degrees_track_targets() {
        let model = VillageModel::survey();
        let mut rng = stream(1, &[]);
        let mut sums = vec![0.0; model.layers.len()];
        for _ in 0..20 {
            let g = model.generate(200, &mut rng).unwrap();
            for (l, s) in sums.iter_mut().enumerate() {
                *s += g.layer(l).average_out_degree() / 20.0;
            }
        }
        for (spec, got) in model.layers.iter().zip(&sums) {
            assert!((got - spec.mean_degree).abs() < 0.15 * spec.mean_degree, "{}: {got}", spec.name);
        }
    }

    #[test]
    fn overlapping_pair_is_more_multiplexed() {
        let model = VillageModel::pair_experiment();
        let mut rng = stream(2, &[]);
        let g = model.generate(200, &mut rng).unwrap();
        let overlap = village_score(&g.select_layers(&["kinship", "social"]).unwrap()).unwrap();
        let apart = village_score(&g.select_layers(&["kinship", "advice"]).unwrap()).unwrap();
        assert!(overlap > apart + 0.05, "{overlap} vs {apart}");
    }

    #[test]
    fn generation_is_deterministic() {
        let model = VillageModel::survey();
        let a = model.generate(80, &mut stream(3, &[])).unwrap();
        let b = model.generate(80, &mut stream(3, &[])).unwrap();
        assert_eq!(a.layers(), b.layers());
        assert!(model.generate(1, &mut stream(3, &[])).is_err());
    }

    #[test]
    fn calibration_hits_target() {
        let w: Vec<f64> = (1..=1000).map(|k| k as f64).collect();
        let c = calibrate(&w, 100.0);
        let e: f64 = w.iter().map(|&x| (c * x).min(1.0)).sum();
        assert!((e - 100.0).abs() < 1e-6);
    }
}
