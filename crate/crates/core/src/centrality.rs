//! Diffusion centrality and the spectral radius and diameter behind its
//! default parameters.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::graph::{LayerGraph, MultiGraph};

pub const POWER_TOL: f64 = 1e-10;
pub const POWER_MAX_ITERS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralRadius {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn mul_add_identity(adj: &LayerGraph, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = v[i] + adj.row(i).iter().map(|&j| v[j]).sum::<f64>();
    }
}

/// Largest eigenvalue of the adjacency matrix by power iteration on `A + I`
/// from the all-ones vector. Symmetric graphs use the Rayleigh quotient.
pub fn spectral_radius(adj: &LayerGraph) -> SpectralRadius {
    let n = adj.node_count();
    if adj.edge_count() == 0 {
        return SpectralRadius {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    let symmetric = adj.is_symmetric();
    let vec_tol = if symmetric { 1e-9 } else { POWER_TOL };
    let mut v = vec![1.0 / n as f64; n];
    let mut w = vec![0.0; n];
    let mut estimate = f64::NAN;
    for it in 1..=POWER_MAX_ITERS {
        mul_add_identity(adj, &v, &mut w);
        let next = if symmetric {
            let num: f64 = v.iter().zip(&w).map(|(a, b)| a * b).sum();
            let den: f64 = v.iter().map(|a| a * a).sum();
            num / den
        } else {
            w.iter().sum::<f64>() / v.iter().sum::<f64>()
        };
        let norm: f64 = w.iter().sum();
        let mut change = 0.0;
        for (a, b) in v.iter_mut().zip(&w) {
            let b = b / norm;
            change += (*a - b).abs();
            *a = b;
        }
        let done = (next - estimate).abs() < POWER_TOL && change < vec_tol;
        estimate = next;
        if done {
            return SpectralRadius {
                value: (estimate - 1.0).max(0.0),
                iterations: it,
                converged: true,
            };
        }
    }
    log::warn!("power iteration did not converge; last estimate {}", estimate - 1.0);
    SpectralRadius {
        value: (estimate - 1.0).max(0.0),
        iterations: POWER_MAX_ITERS,
        converged: false,
    }
}

fn components(adj: &LayerGraph) -> Vec<Vec<usize>> {
    let n = adj.node_count();
    let mut label = vec![usize::MAX; n];
    let mut out = Vec::new();
    for s in 0..n {
        if label[s] != usize::MAX {
            continue;
        }
        let mut members = vec![s];
        label[s] = out.len();
        let mut k = 0;
        while k < members.len() {
            let u = members[k];
            k += 1;
            for &v in adj.row(u) {
                if label[v] == usize::MAX {
                    label[v] = out.len();
                    members.push(v);
                }
            }
        }
        out.push(members);
    }
    out
}

/// Longest shortest path within the largest weakly connected component,
/// measured on the symmetrized graph.
pub fn diameter(adj: &LayerGraph) -> usize {
    let sym = adj.symmetrize();
    let Some(largest) = components(&sym)
        .into_iter()
        .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
    else {
        return 0;
    };
    let mut dist = vec![usize::MAX; sym.node_count()];
    let mut best = 0;
    let mut queue = VecDeque::new();
    for &s in &largest {
        for &u in &largest {
            dist[u] = usize::MAX;
        }
        dist[s] = 0;
        queue.push_back(s);
        while let Some(u) = queue.pop_front() {
            best = best.max(dist[u]);
            for &v in sym.row(u) {
                if dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    best
}

/// Per-node diffusion centrality scores.
#[derive(Clone, Debug, PartialEq)]
pub struct CentralityVector {
    pub scores: Vec<f64>,
    /// Per-period passing probability; `None` when undefined (edgeless layer).
    pub q: Option<f64>,
    pub horizon: usize,
    pub layer: Option<String>,
}

/// Row sums of `sum_{t=1..T} (q A)^t`.
pub fn diffusion_centrality(adj: &LayerGraph, q: f64, horizon: usize) -> Result<CentralityVector> {
    if !(q > 0.0) || !q.is_finite() || horizon == 0 {
        return Err(Error::InvalidParameter(format!(
            "diffusion centrality needs q > 0 and T >= 1 (got q = {q}, T = {horizon})"
        )));
    }
    let n = adj.node_count();
    let mut walk = vec![1.0; n];
    let mut next = vec![0.0; n];
    let mut scores = vec![0.0; n];
    for _ in 0..horizon {
        for (i, x) in next.iter_mut().enumerate() {
            *x = q * adj.row(i).iter().map(|&j| walk[j]).sum::<f64>();
        }
        std::mem::swap(&mut walk, &mut next);
        for (s, w) in scores.iter_mut().zip(&walk) {
            *s += w;
        }
    }
    Ok(CentralityVector {
        scores,
        q: Some(q),
        horizon,
        layer: None,
    })
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct CentralityOptions {
    pub q: Option<f64>,
    pub horizon: Option<usize>,
    /// Symmetrize the layer before computing anything.
    pub symmetrize: bool,
}

/// Diffusion centrality of one layer with its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerCentrality {
    pub centrality: CentralityVector,
    pub lambda: f64,
    pub diameter: usize,
}

/// Diffusion centrality of a named layer, with `q = 1/lambda` and
/// `T = diameter` unless overridden. An edgeless layer scores zero everywhere.
pub fn layer_centrality(g: &MultiGraph, layer: &str, opts: &CentralityOptions) -> Result<LayerCentrality> {
    let raw = g.layer_by_name(layer)?;
    let adj = if opts.symmetrize {
        raw.symmetrize()
    } else {
        raw.clone()
    };
    let lambda = spectral_radius(&adj).value;
    let diam = diameter(&adj);
    let q = opts.q.or((lambda > 0.0).then(|| 1.0 / lambda));
    let horizon = opts.horizon.unwrap_or(diam);
    let mut centrality = match q {
        Some(q) if horizon > 0 => diffusion_centrality(&adj, q, horizon)?,
        _ => {
            log::warn!("layer `{layer}` has no edges; diffusion centrality is zero");
            CentralityVector {
                scores: vec![0.0; g.node_count()],
                q,
                horizon,
                layer: None,
            }
        }
    };
    centrality.layer = Some(layer.to_owned());
    Ok(LayerCentrality {
        centrality,
        lambda,
        diameter: diam,
    })
}

/// Sum of the seeds' diffusion centralities on `layer` under default parameters.
pub fn seed_set_dc(g: &MultiGraph, layer: &str, seeds: &[usize]) -> Result<f64> {
    seed_set_dc_with(g, layer, seeds, &CentralityOptions::default())
}

pub fn seed_set_dc_with(g: &MultiGraph, layer: &str, seeds: &[usize], opts: &CentralityOptions) -> Result<f64> {
    if seeds.is_empty() {
        return Err(Error::Precondition("empty seed set".into()));
    }
    for &s in seeds {
        g.check_node(s)?;
    }
    let c = layer_centrality(g, layer, opts)?;
    Ok(seeds.iter().map(|&s| c.centrality.scores[s]).sum())
}
