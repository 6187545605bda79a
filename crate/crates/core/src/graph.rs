//! Multilayer directed graphs.
//!
//! Adjacency follows the transmission convention: `g[l][i][j] = 1` means that
//! node `j` can transmit to node `i` on layer `l`. Row `i` of a layer therefore
//! lists the nodes `i` listens to, and column `j` lists the nodes `j` reaches.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Maximum number of layers a [`LayerSet`] can index.
pub const MAX_LAYERS: usize = 32;

/// A set of layer indices, stored as a bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LayerSet(u32);

impl LayerSet {
    pub const fn empty() -> Self {
        LayerSet(0)
    }

    /// All layers `0..layer_count`.
    pub fn full(layer_count: usize) -> Self {
        assert!(layer_count <= MAX_LAYERS);
        if layer_count == MAX_LAYERS {
            LayerSet(u32::MAX)
        } else {
            LayerSet((1u32 << layer_count) - 1)
        }
    }

    pub fn single(layer: usize) -> Self {
        assert!(layer < MAX_LAYERS);
        LayerSet(1 << layer)
    }

    pub fn from_bits(bits: u32) -> Self {
        LayerSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, layer: usize) -> bool {
        layer < MAX_LAYERS && self.0 & (1 << layer) != 0
    }

    pub fn with(self, layer: usize) -> Self {
        LayerSet(self.0 | (1 << layer))
    }

    pub fn without(self, layer: usize) -> Self {
        LayerSet(self.0 & !(1 << layer))
    }

    pub fn is_subset_of(self, other: LayerSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_strict_subset_of(self, other: LayerSet) -> bool {
        self.is_subset_of(other) && self != other
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..MAX_LAYERS).filter(move |&l| self.contains(l))
    }
}

impl FromIterator<usize> for LayerSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        iter.into_iter().fold(LayerSet::empty(), LayerSet::with)
    }
}

impl fmt::Debug for LayerSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A single directed 0/1 layer over `node_count` nodes.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct LayerGraph {
    rows: Vec<Vec<usize>>,
    cols: Vec<Vec<usize>>,
}

impl LayerGraph {
    pub fn empty(node_count: usize) -> Self {
        LayerGraph {
            rows: vec![Vec::new(); node_count],
            cols: vec![Vec::new(); node_count],
        }
    }

    /// Builds a layer from `(i, j)` pairs meaning `g_ij = 1`. Duplicates collapse.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut rows = vec![Vec::new(); node_count];
        for (i, j) in edges {
            for id in [i, j] {
                if id >= node_count {
                    return Err(Error::NodeOutOfRange { id, node_count });
                }
            }
            if i == j {
                return Err(Error::SelfLoop {
                    node: i,
                    layer: String::new(),
                });
            }
            rows[i].push(j);
        }
        Ok(Self::from_rows(rows))
    }

    fn from_rows(mut rows: Vec<Vec<usize>>) -> Self {
        let n = rows.len();
        let mut cols = vec![Vec::new(); n];
        for (i, row) in rows.iter_mut().enumerate() {
            row.sort_unstable();
            row.dedup();
            for &j in row.iter() {
                cols[j].push(i);
            }
        }
        LayerGraph { rows, cols }
    }

    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.rows
            .get(i)
            .is_some_and(|row| row.binary_search(&j).is_ok())
    }

    /// Nodes `j` with `g_ij = 1`, sorted.
    pub fn row(&self, i: usize) -> &[usize] {
        &self.rows[i]
    }

    /// Nodes `i` with `g_ij = 1`, sorted.
    pub fn col(&self, j: usize) -> &[usize] {
        &self.cols[j]
    }

    pub fn out_degree(&self, i: usize) -> usize {
        self.rows[i].len()
    }

    pub fn average_out_degree(&self) -> f64 {
        if self.rows.is_empty() {
            0.0
        } else {
            self.edge_count() as f64 / self.rows.len() as f64
        }
    }

    /// All `(i, j)` with `g_ij = 1`, in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&j| (i, j)))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
    }

    /// OR-symmetrization: `out_ij = out_ji = max(g_ij, g_ji)`.
    pub fn symmetrize(&self) -> LayerGraph {
        let rows = self
            .rows
            .iter()
            .zip(&self.cols)
            .map(|(r, c)| merge_sorted(r, c))
            .collect::<Vec<_>>();
        LayerGraph {
            cols: rows.clone(),
            rows,
        }
    }

    /// Keeps only the listed edges (which must be a subset of the current edges).
    pub(crate) fn retain_edges(&self, keep: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let mut rows = vec![Vec::new(); self.node_count()];
        for (i, j) in keep {
            debug_assert!(self.contains(i, j));
            rows[i].push(j);
        }
        Self::from_rows(rows)
    }

    pub(crate) fn with_edge(&self, i: usize, j: usize, present: bool) -> Self {
        let mut out = self.clone();
        if present {
            if let Err(pos) = out.rows[i].binary_search(&j) {
                out.rows[i].insert(pos, j);
                let pos = out.cols[j].binary_search(&i).unwrap_err();
                out.cols[j].insert(pos, i);
            }
        } else if let Ok(pos) = out.rows[i].binary_search(&j) {
            out.rows[i].remove(pos);
            let pos = out.cols[j].binary_search(&i).unwrap();
            out.cols[j].remove(pos);
        }
        out
    }
}

fn merge_sorted(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut x, mut y) = (0, 0);
    while x < a.len() || y < b.len() {
        let next = match (a.get(x), b.get(y)) {
            (Some(&p), Some(&q)) if p == q => {
                x += 1;
                y += 1;
                p
            }
            (Some(&p), Some(&q)) if p < q => {
                x += 1;
                p
            }
            (Some(&p), None) => {
                x += 1;
                p
            }
            (_, Some(&q)) => {
                y += 1;
                q
            }
            (None, None) => unreachable!(),
        };
        out.push(next);
    }
    out
}

/// A single-layer graph with nonnegative integer weights.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct WeightedLayer {
    rows: Vec<Vec<(usize, u32)>>,
}

impl WeightedLayer {
    pub fn node_count(&self) -> usize {
        self.rows.len()
    }

    pub fn weight(&self, i: usize, j: usize) -> u32 {
        self.rows[i]
            .binary_search_by_key(&j, |&(k, _)| k)
            .map_or(0, |pos| self.rows[i][pos].1)
    }

    pub fn row(&self, i: usize) -> &[(usize, u32)] {
        &self.rows[i]
    }

    /// Number of ordered pairs with positive weight.
    pub fn edge_count(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize, u32)> + '_ {
        self.rows
            .iter()
            .enumerate()
            .flat_map(|(i, row)| row.iter().map(move |&(j, w)| (i, j, w)))
    }

    /// The 0/1 layer of pairs with positive weight.
    pub fn support(&self) -> LayerGraph {
        LayerGraph::from_rows(
            self.rows
                .iter()
                .map(|row| row.iter().map(|&(j, _)| j).collect())
                .collect(),
        )
    }
}

/// How [`MultiGraph::aggregate`] combines layers.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Aggregation {
    /// Link if present in any layer.
    Union,
    /// Link if present in every layer.
    Intersection,
    /// Number of layers carrying the link.
    Total,
}

/// A directed edge as read from an edge-list file.
///
/// `src` is the receiving node `i` and `dst` the transmitting node `j`: the
/// record sets `g[layer][src][dst] = 1`.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub village: String,
    pub layer: String,
    pub src: usize,
    pub dst: usize,
}

/// A multigraph `g = (g^1, ..., g^L)` over a fixed node universe.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct MultiGraph {
    node_count: usize,
    layer_names: Vec<String>,
    layers: Vec<LayerGraph>,
}

impl MultiGraph {
    pub fn from_layers(layer_names: Vec<String>, layers: Vec<LayerGraph>) -> Result<Self> {
        if layers.is_empty() || layers.len() != layer_names.len() {
            return Err(Error::InvalidGraph(format!(
                "{} layer names for {} layers",
                layer_names.len(),
                layers.len()
            )));
        }
        if layers.len() > MAX_LAYERS {
            return Err(Error::InvalidGraph(format!(
                "at most {MAX_LAYERS} layers are supported"
            )));
        }
        let node_count = layers[0].node_count();
        if node_count == 0 || layers.iter().any(|l| l.node_count() != node_count) {
            return Err(Error::InvalidGraph(
                "layers must share a positive node count".into(),
            ));
        }
        for (a, name) in layer_names.iter().enumerate() {
            if layer_names[..a].contains(name) {
                return Err(Error::InvalidGraph(format!("duplicate layer `{name}`")));
            }
        }
        Ok(MultiGraph {
            node_count,
            layer_names,
            layers,
        })
    }

    /// Builds a graph from edge records. Duplicate records collapse.
    pub fn build_from_edges<S: AsRef<str>>(
        records: &[EdgeRecord],
        node_count: usize,
        layers: &[S],
    ) -> Result<Self> {
        let names: Vec<String> = layers.iter().map(|s| s.as_ref().to_owned()).collect();
        let mut pairs: Vec<Vec<(usize, usize)>> = vec![Vec::new(); names.len()];
        for rec in records {
            let l = names
                .iter()
                .position(|n| *n == rec.layer)
                .ok_or_else(|| Error::UnknownLayer(rec.layer.clone()))?;
            for id in [rec.src, rec.dst] {
                if id >= node_count {
                    return Err(Error::NodeOutOfRange { id, node_count });
                }
            }
            if rec.src == rec.dst {
                return Err(Error::SelfLoop {
                    node: rec.src,
                    layer: rec.layer.clone(),
                });
            }
            pairs[l].push((rec.src, rec.dst));
        }
        let layers = pairs
            .into_iter()
            .map(|p| LayerGraph::from_edges(node_count, p))
            .collect::<Result<Vec<_>>>()?;
        Self::from_layers(names, layers)
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn layer_count(&self) -> usize {
        self.layers.len()
    }

    pub fn layer_names(&self) -> &[String] {
        &self.layer_names
    }

    pub fn layers(&self) -> &[LayerGraph] {
        &self.layers
    }

    pub fn layer(&self, index: usize) -> &LayerGraph {
        &self.layers[index]
    }

    pub fn layer_index(&self, name: &str) -> Result<usize> {
        self.layer_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownLayer(name.to_owned()))
    }

    pub fn layer_by_name(&self, name: &str) -> Result<&LayerGraph> {
        Ok(&self.layers[self.layer_index(name)?])
    }

    pub(crate) fn check_node(&self, id: usize) -> Result<()> {
        if id < self.node_count {
            Ok(())
        } else {
            Err(Error::NodeOutOfRange {
                id,
                node_count: self.node_count,
            })
        }
    }

    /// `{l : g[l][i][j] = 1}`.
    pub fn layer_set(&self, i: usize, j: usize) -> Result<LayerSet> {
        self.check_node(i)?;
        self.check_node(j)?;
        Ok(self.layer_set_unchecked(i, j))
    }

    pub(crate) fn layer_set_unchecked(&self, i: usize, j: usize) -> LayerSet {
        self.layers
            .iter()
            .enumerate()
            .filter(|(_, layer)| layer.contains(i, j))
            .map(|(l, _)| l)
            .collect()
    }

    /// Every `j` with a nonempty layer set from `i`, with that set, sorted by `j`.
    pub fn neighbor_sets(&self, i: usize) -> Result<Vec<(usize, LayerSet)>> {
        self.check_node(i)?;
        let mut acc: BTreeMap<usize, LayerSet> = BTreeMap::new();
        for (l, layer) in self.layers.iter().enumerate() {
            for &j in layer.row(i) {
                let e = acc.entry(j).or_default();
                *e = e.with(l);
            }
        }
        Ok(acc.into_iter().collect())
    }

    /// `N_i = {j : L_ij nonempty}`, sorted.
    pub fn neighbors(&self, i: usize) -> Result<Vec<usize>> {
        Ok(self.neighbor_sets(i)?.into_iter().map(|(j, _)| j).collect())
    }

    pub fn aggregate(&self, mode: Aggregation) -> WeightedLayer {
        let layer_count = self.layer_count() as u32;
        let rows = (0..self.node_count)
            .map(|i| {
                let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
                for layer in &self.layers {
                    for &j in layer.row(i) {
                        *counts.entry(j).or_default() += 1;
                    }
                }
                counts
                    .into_iter()
                    .filter_map(|(j, c)| match mode {
                        Aggregation::Total => Some((j, c)),
                        Aggregation::Union => Some((j, 1)),
                        Aggregation::Intersection => (c == layer_count).then_some((j, 1)),
                    })
                    .collect()
            })
            .collect();
        WeightedLayer { rows }
    }

    /// Every layer OR-symmetrized.
    pub fn symmetrized(&self) -> MultiGraph {
        MultiGraph {
            node_count: self.node_count,
            layer_names: self.layer_names.clone(),
            layers: self.layers.iter().map(LayerGraph::symmetrize).collect(),
        }
    }

    /// The sub-multigraph on the named layers, in the given order.
    pub fn select_layers<S: AsRef<str>>(&self, names: &[S]) -> Result<MultiGraph> {
        let mut layer_names = Vec::with_capacity(names.len());
        let mut layers = Vec::with_capacity(names.len());
        for name in names {
            let idx = self.layer_index(name.as_ref())?;
            layer_names.push(self.layer_names[idx].clone());
            layers.push(self.layers[idx].clone());
        }
        MultiGraph::from_layers(layer_names, layers)
    }

    pub(crate) fn with_edge(&self, layer: usize, i: usize, j: usize, present: bool) -> MultiGraph {
        let mut out = self.clone();
        out.layers[layer] = self.layers[layer].with_edge(i, j, present);
        out
    }

    pub(crate) fn same_universe(&self, other: &MultiGraph) -> bool {
        self.node_count == other.node_count && self.layer_names == other.layer_names
    }

    /// Edge records for every edge, tagged with `village`.
    pub fn to_records(&self, village: &str) -> Vec<EdgeRecord> {
        self.layers
            .iter()
            .zip(&self.layer_names)
            .flat_map(|(layer, name)| {
                layer.edges().map(move |(i, j)| EdgeRecord {
                    village: village.to_owned(),
                    layer: name.clone(),
                    src: i,
                    dst: j,
                })
            })
            .collect()
    }
}

/// Contents of an edge-list file: records plus any manifest lines.
///
/// The text format is a `village,layer,src,dst` CSV. Lines starting with `#`
/// are comments, except the manifest lines `# layers: a,b,c` and
/// `# nodes: village=N,other=M` which declare the layer order and the node
/// universe of each village.
#[derive(Clone, Debug, Default)]
pub struct EdgeList {
    pub records: Vec<EdgeRecord>,
    pub layers: Option<Vec<String>>,
    pub node_counts: BTreeMap<String, usize>,
}

impl EdgeList {
    pub fn read_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(file, &path.display().to_string())
    }

    pub fn read<R: Read>(mut reader: R, source: &str) -> Result<Self> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        let mut out = EdgeList::default();
        for (lineno, line) in text.lines().enumerate() {
            let Some(comment) = line.trim_start().strip_prefix('#') else {
                continue;
            };
            let location = || format!("{source}:{}", lineno + 1);
            if let Some(rest) = comment.trim().strip_prefix("layers:") {
                out.layers = Some(split_list(rest));
            } else if let Some(rest) = comment.trim().strip_prefix("nodes:") {
                for item in split_list(rest) {
                    let (village, count) = item
                        .split_once('=')
                        .ok_or_else(|| Error::parse(location(), "expected village=count"))?;
                    let count = count
                        .trim()
                        .parse()
                        .map_err(|_| Error::parse(location(), "node count is not an integer"))?;
                    out.node_counts.insert(village.trim().to_owned(), count);
                }
            }
        }
        let mut csv = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = csv.headers().map_err(|e| Error::Csv {
            path: source.into(),
            source: e,
        })?;
        if headers != vec!["village", "layer", "src", "dst"] {
            return Err(Error::parse(
                source,
                "expected header `village,layer,src,dst`",
            ));
        }
        for rec in csv.deserialize() {
            out.records.push(rec.map_err(|e| Error::Csv {
                path: source.into(),
                source: e,
            })?);
        }
        Ok(out)
    }

    pub fn write<W: Write>(&self, writer: W) -> Result<()> {
        let mut writer = writer;
        if let Some(layers) = &self.layers {
            writeln!(writer, "# layers: {}", layers.join(","))?;
        }
        if !self.node_counts.is_empty() {
            let items: Vec<String> = self
                .node_counts
                .iter()
                .map(|(v, n)| format!("{v}={n}"))
                .collect();
            writeln!(writer, "# nodes: {}", items.join(","))?;
        }
        let mut csv = csv::Writer::from_writer(writer);
        csv.write_record(["village", "layer", "src", "dst"])
            .and_then(|_| {
                self.records
                    .iter()
                    .try_for_each(|r| csv.serialize((&r.village, &r.layer, r.src, r.dst)))
            })
            .map_err(|e| Error::Csv {
                path: "<output>".into(),
                source: e,
            })?;
        csv.flush()?;
        Ok(())
    }

    /// Villages in first-appearance order (manifest villages first).
    pub fn villages(&self) -> Vec<String> {
        let mut out: Vec<String> = self.node_counts.keys().cloned().collect();
        for rec in &self.records {
            if !out.contains(&rec.village) {
                out.push(rec.village.clone());
            }
        }
        out
    }

    /// Builds the multigraph of one village. `node_count` and `layers` override
    /// the manifest when given.
    pub fn graph(
        &self,
        village: &str,
        node_count: Option<usize>,
        layers: Option<&[String]>,
    ) -> Result<MultiGraph> {
        let layers = layers
            .or(self.layers.as_deref())
            .ok_or_else(|| Error::InvalidParameter("layer list not declared".into()))?;
        let n = node_count
            .or_else(|| self.node_counts.get(village).copied())
            .ok_or_else(|| {
                Error::InvalidParameter(format!("node count for village `{village}` not declared"))
            })?;
        let records: Vec<EdgeRecord> = self
            .records
            .iter()
            .filter(|r| r.village == village)
            .cloned()
            .collect();
        MultiGraph::build_from_edges(&records, n, layers)
    }
}

pub(crate) fn split_list(s: &str) -> Vec<String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(str::to_owned)
        .collect()
}
