//! Descriptive layer statistics, layer correlations, principal components over
//! household pairs, and the backbone network.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::graph::{LayerGraph, MultiGraph};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LayerStats {
    pub mean_degree: f64,
    /// Population standard deviation of degrees.
    pub degree_sd: f64,
    pub density: f64,
    pub triangles: u64,
    /// Global transitivity: 3 triangles / connected triples.
    pub clustering: f64,
}

fn pairs(n: usize) -> f64 {
    (n * n.saturating_sub(1) / 2) as f64
}

fn sorted_intersection(a: &[usize], b: &[usize]) -> usize {
    let (mut x, mut y, mut c) = (0, 0, 0);
    while x < a.len() && y < b.len() {
        match a[x].cmp(&b[y]) {
            std::cmp::Ordering::Less => x += 1,
            std::cmp::Ordering::Greater => y += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                x += 1;
                y += 1;
            }
        }
    }
    c
}

/// Statistics of one layer, computed on its symmetrized version.
pub fn layer_stats(g: &MultiGraph, layer: &str) -> Result<LayerStats> {
    Ok(symmetric_layer_stats(&g.layer_by_name(layer)?.symmetrize()))
}

fn symmetric_layer_stats(sym: &LayerGraph) -> LayerStats {
    let n = sym.node_count();
    let degrees: Vec<f64> = (0..n).map(|i| sym.row(i).len() as f64).collect();
    let mean = if n == 0 { 0.0 } else { degrees.iter().sum::<f64>() / n as f64 };
    let var = if n == 0 {
        0.0
    } else {
        degrees.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n as f64
    };
    let edges = sym.edge_count() / 2;
    let mut triangles = 0u64;
    for i in 0..n {
        let row = sym.row(i);
        for &j in row.iter().filter(|&&j| j > i) {
            triangles += row.iter().filter(|&&k| k > j && sym.contains(j, k)).count() as u64;
        }
    }
    let triples: f64 = degrees.iter().map(|d| d * (d - 1.0) / 2.0).sum();
    LayerStats {
        mean_degree: mean,
        degree_sd: var.sqrt(),
        density: if n < 2 { 0.0 } else { edges as f64 / pairs(n) },
        triangles,
        clustering: if triples > 0.0 { 3.0 * triangles as f64 / triples } else { 0.0 },
    }
}

/// Pearson correlations between layers over all unordered pairs. Entries for
/// layers without variation are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelationMatrix {
    pub layers: Vec<String>,
    pub values: Vec<Vec<Option<f64>>>,
}

pub fn layer_correlation(g: &MultiGraph) -> Result<CorrelationMatrix> {
    let l = g.layer_count();
    let n = g.node_count();
    if l < 2 || n < 3 {
        return Err(Error::Precondition(
            "correlations need two layers and at least two household pairs".into(),
        ));
    }
    let sym: Vec<LayerGraph> = g.layers().iter().map(LayerGraph::symmetrize).collect();
    let total = pairs(n);
    let share: Vec<f64> = sym.iter().map(|s| (s.edge_count() / 2) as f64 / total).collect();
    let mut values = vec![vec![None; l]; l];
    for a in 0..l {
        for b in a..l {
            let va = share[a] * (1.0 - share[a]);
            let vb = share[b] * (1.0 - share[b]);
            if va <= 0.0 || vb <= 0.0 {
                log::warn!(
                    "layer `{}` or `{}` has no variation; correlation undefined",
                    g.layer_names()[a],
                    g.layer_names()[b]
                );
                continue;
            }
            let both: usize = (0..n)
                .map(|i| {
                    let (ra, rb) = (sym[a].row(i), sym[b].row(i));
                    let above = |r: &[usize]| r.partition_point(|&j| j <= i);
                    sorted_intersection(&ra[above(ra)..], &rb[above(rb)..])
                })
                .sum();
            let r = if a == b {
                1.0
            } else {
                ((both as f64 / total - share[a] * share[b]) / (va * vb).sqrt()).clamp(-1.0, 1.0)
            };
            values[a][b] = Some(r);
            values[b][a] = Some(r);
        }
    }
    Ok(CorrelationMatrix {
        layers: g.layer_names().to_vec(),
        values,
    })
}

/// 0/1 link indicators, one row per unordered household pair `i < j`, pooled
/// over villages, one column per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadMatrix {
    pub layers: Vec<String>,
    columns: Vec<Vec<u8>>,
}

impl DyadMatrix {
    pub fn from_graphs(graphs: &[&MultiGraph]) -> Result<Self> {
        let first = graphs
            .first()
            .ok_or_else(|| Error::Precondition("no villages".into()))?;
        let layers = first.layer_names().to_vec();
        if graphs.iter().any(|g| g.layer_names() != layers.as_slice()) {
            return Err(Error::InvalidGraph("villages have different layers".into()));
        }
        let mut columns = vec![Vec::new(); layers.len()];
        for g in graphs {
            let sym = g.symmetrized();
            let n = g.node_count();
            for (l, col) in columns.iter_mut().enumerate() {
                let layer = sym.layer(l);
                for i in 0..n {
                    for j in i + 1..n {
                        col.push(layer.contains(i, j) as u8);
                    }
                }
            }
        }
        Ok(DyadMatrix { layers, columns })
    }

    pub fn rows(&self) -> usize {
        self.columns.first().map_or(0, Vec::len)
    }

    pub fn cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, l: usize) -> &[u8] {
        &self.columns[l]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PcaResult {
    /// Descending.
    pub eigenvalues: Vec<f64>,
    /// `loadings[k]` is the unit loading vector of component `k`.
    pub loadings: Vec<Vec<f64>>,
    pub explained: Vec<f64>,
}

/// Principal components of the dyad columns. Columns are centered, and scaled
/// to unit variance when `standardize` is set.
pub fn pca_dyads(d: &DyadMatrix, standardize: bool) -> Result<PcaResult> {
    let (rows, l) = (d.rows(), d.cols());
    if rows < l.max(2) {
        return Err(Error::Precondition(format!(
            "{rows} pairs are too few for {l} layers"
        )));
    }
    let means: Vec<f64> = d
        .columns
        .iter()
        .map(|c| c.iter().map(|&x| x as f64).sum::<f64>() / rows as f64)
        .collect();
    let mut cov = DMatrix::<f64>::zeros(l, l);
    for a in 0..l {
        for b in a..l {
            let s: f64 = d.columns[a]
                .iter()
                .zip(&d.columns[b])
                .map(|(&x, &y)| (x as f64 - means[a]) * (y as f64 - means[b]))
                .sum::<f64>()
                / (rows - 1) as f64;
            cov[(a, b)] = s;
            cov[(b, a)] = s;
        }
    }
    if standardize {
        let sd: Vec<f64> = (0..l).map(|a| cov[(a, a)].sqrt()).collect();
        for a in 0..l {
            for b in 0..l {
                cov[(a, b)] = if sd[a] > 0.0 && sd[b] > 0.0 {
                    cov[(a, b)] / (sd[a] * sd[b])
                } else {
                    0.0
                };
            }
        }
    }
    Ok(pca_from_covariance(cov))
}

fn pca_from_covariance(cov: DMatrix<f64>) -> PcaResult {
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k].max(0.0)).collect();
    let loadings = order
        .iter()
        .map(|&k| {
            let mut v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
            // first entry of (near-)largest magnitude is made positive
            let top = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            let lead = v.iter().position(|x| x.abs() >= top - 1e-9).unwrap_or(0);
            if v[lead] < 0.0 {
                v.iter_mut().for_each(|x| *x = -*x);
            }
            v
        })
        .collect();
    let total: f64 = eigenvalues.iter().sum();
    let explained = eigenvalues
        .iter()
        .map(|e| if total > 0.0 { e / total } else { 0.0 })
        .collect();
    PcaResult {
        eigenvalues,
        loadings,
        explained,
    }
}

/// Weighted undirected dyads `(i, j, Z_ij)` with `i < j`; zero weights omitted.
#[derive(Clone, Debug, PartialEq)]
pub struct Backbone {
    pub node_count: usize,
    /// Component weights `lambda_k / sum of the first K eigenvalues`.
    pub weights: Vec<f64>,
    pub edges: Vec<(usize, usize, f64)>,
}

impl Backbone {
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edges
            .iter()
            .find(|e| e.0 == a && e.1 == b)
            .map_or(0.0, |e| e.2)
    }
}

/// First-`k` component weights proportional to the eigenvalues.
pub fn component_weights(pca: &PcaResult, k: usize) -> Result<Vec<f64>> {
    if k == 0 || k > pca.eigenvalues.len() {
        return Err(Error::InvalidParameter(format!(
            "K = {k} outside 1..={}",
            pca.eigenvalues.len()
        )));
    }
    let total: f64 = pca.eigenvalues[..k].iter().sum();
    if total <= 0.0 {
        return Err(Error::Precondition("leading eigenvalues are all zero".into()));
    }
    Ok(pca.eigenvalues[..k].iter().map(|e| e / total).collect())
}

/// Backbone from the village's own standardized principal components.
pub fn backbone(g: &MultiGraph, k: usize) -> Result<Backbone> {
    if k == 0 || k > g.layer_count() {
        return Err(Error::InvalidParameter(format!(
            "K = {k} outside 1..={}",
            g.layer_count()
        )));
    }
    let pca = pca_dyads(&DyadMatrix::from_graphs(&[g])?, true)?;
    backbone_with(g, &pca, k)
}

/// `Z_ij = sum_k w_k sum_l g^l_ij e_kl` using the given components.
pub fn backbone_with(g: &MultiGraph, pca: &PcaResult, k: usize) -> Result<Backbone> {
    let weights = component_weights(pca, k)?;
    if pca.loadings[0].len() != g.layer_count() {
        return Err(Error::InvalidParameter(
            "components do not match the graph's layers".into(),
        ));
    }
    let per_layer: Vec<f64> = (0..g.layer_count())
        .map(|l| (0..k).map(|c| weights[c] * pca.loadings[c][l]).sum())
        .collect();
    let sym = g.symmetrized();
    let mut edges = Vec::new();
    for i in 0..g.node_count() {
        let mut neighbors: Vec<usize> = sym
            .layers()
            .iter()
            .flat_map(|layer| layer.row(i).iter().copied().filter(|&j| j > i))
            .collect();
        neighbors.sort_unstable();
        neighbors.dedup();
        for j in neighbors {
            let z: f64 = sym
                .layers()
                .iter()
                .zip(&per_layer)
                .filter(|(layer, _)| layer.contains(i, j))
                .map(|(_, w)| w)
                .sum();
            if z != 0.0 {
                edges.push((i, j, z));
            }
        }
    }
    Ok(Backbone {
        node_count: g.node_count(),
        weights,
        edges,
    })
}
