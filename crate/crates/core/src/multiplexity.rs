//! Multiplexing scores, the local multiplexity dominance order, and two-layer
//! connection profiles.
//!
//! Scores are computed on OR-symmetrized layers. The dominance order and the
//! total multiplexity index use the directed graph as given.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::graph::{LayerSet, MultiGraph};
use crate::util::neumaier_sum;

/// Tolerance on the total mass of a constructed [`ProfileDistribution`].
pub const MASS_TOLERANCE: f64 = 1e-12;
/// Tolerance on the total mass of a distribution read from text.
pub const FILE_MASS_TOLERANCE: f64 = 1e-9;

fn symmetric_layer_sets(g: &MultiGraph, i: usize) -> BTreeMap<usize, LayerSet> {
    let mut acc: BTreeMap<usize, LayerSet> = BTreeMap::new();
    for (l, layer) in g.layers().iter().enumerate() {
        for &j in layer.row(i).iter().chain(layer.col(i)) {
            let e = acc.entry(j).or_default();
            *e = e.with(l);
        }
    }
    acc
}

/// Average fraction of layers shared with each neighbor, on symmetrized layers.
///
/// Lies in `[1/L, 1]`. Isolated nodes have no score.
pub fn multiplexing_score(g: &MultiGraph, i: usize) -> Result<f64> {
    g.check_node(i)?;
    let sets = symmetric_layer_sets(g, i);
    if sets.is_empty() {
        return Err(Error::UndefinedScore(i));
    }
    let layers = g.layer_count() as f64;
    let shared: f64 = sets.values().map(|s| s.len() as f64 / layers).sum();
    Ok(shared / sets.len() as f64)
}

/// Per-node scores; `None` for isolated nodes.
pub fn node_scores(g: &MultiGraph) -> Vec<Option<f64>> {
    (0..g.node_count())
        .map(|i| multiplexing_score(g, i).ok())
        .collect()
}

/// Village-level score: mean of the defined node scores. Isolated nodes are
/// excluded from the average.
pub fn village_score(g: &MultiGraph) -> Result<f64> {
    let scores: Vec<f64> = node_scores(g).into_iter().flatten().collect();
    if scores.is_empty() {
        return Err(Error::InvalidGraph("every node is isolated".into()));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Sample median; even-length samples use the midpoint of the two middle values.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len() % 2 == 1 {
        v[mid]
    } else {
        0.5 * (v[mid - 1] + v[mid])
    })
}

/// High-multiplexing indicator: `m_v > median(m)` (strict).
pub fn high_mpx_flags(scores: &[f64]) -> Vec<bool> {
    let Some(med) = median(scores) else {
        return Vec::new();
    };
    scores.iter().map(|&s| s > med).collect()
}

/// `S_g`: sum over ordered pairs of the squared layer-set size.
pub fn total_multiplexity_index(g: &MultiGraph) -> u64 {
    let mut total = 0u64;
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for i in 0..g.node_count() {
        counts.clear();
        for layer in g.layers() {
            for &j in layer.row(i) {
                *counts.entry(j).or_default() += 1;
            }
        }
        total += counts.values().map(|c| c * c).sum::<u64>();
    }
    total
}

/// A single de-multiplexing step at `node`: layer `layer` of the link to
/// `donor` is moved to the link to `recipient`.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct DominanceMove {
    pub node: usize,
    pub donor: usize,
    pub recipient: usize,
    pub layer: usize,
}

fn move_is_admissible(g: &MultiGraph, mv: &DominanceMove) -> bool {
    let DominanceMove {
        node,
        donor,
        recipient,
        layer,
    } = *mv;
    if donor == recipient || node == donor || node == recipient {
        return false;
    }
    let donor_set = g.layer_set_unchecked(node, donor);
    let recipient_set = g.layer_set_unchecked(node, recipient);
    donor_set.contains(layer)
        && !recipient_set.contains(layer)
        && recipient_set.is_strict_subset_of(donor_set.without(layer))
}

/// Applies a move, checking that it is a valid dominance step on `g`.
pub fn apply_move(g: &MultiGraph, mv: &DominanceMove) -> Result<MultiGraph> {
    for id in [mv.node, mv.donor, mv.recipient] {
        g.check_node(id)?;
    }
    if mv.layer >= g.layer_count() || !move_is_admissible(g, mv) {
        return Err(Error::Precondition(format!(
            "{mv:?} is not a de-multiplexing move"
        )));
    }
    Ok(g.with_edge(mv.layer, mv.node, mv.donor, false)
        .with_edge(mv.layer, mv.node, mv.recipient, true))
}

/// Returns the move `m` with `g_hat = apply_move(g, m)` if `g_hat ≺ g`.
pub fn is_dominance_move(g: &MultiGraph, g_hat: &MultiGraph) -> Result<Option<DominanceMove>> {
    if !g.same_universe(g_hat) {
        return Err(Error::UniverseMismatch);
    }
    let mut removed = Vec::new();
    let mut added = Vec::new();
    for (l, (a, b)) in g.layers().iter().zip(g_hat.layers()).enumerate() {
        for i in 0..g.node_count() {
            let (ra, rb) = (a.row(i), b.row(i));
            removed.extend(ra.iter().filter(|j| rb.binary_search(j).is_err()).map(|&j| (l, i, j)));
            added.extend(rb.iter().filter(|j| ra.binary_search(j).is_err()).map(|&j| (l, i, j)));
            if removed.len() > 1 || added.len() > 1 {
                return Ok(None);
            }
        }
    }
    let (Some(&(l, i, j)), Some(&(l2, i2, k))) = (removed.first(), added.first()) else {
        return Ok(None);
    };
    if l != l2 || i != i2 {
        return Ok(None);
    }
    let mv = DominanceMove {
        node: i,
        donor: j,
        recipient: k,
        layer: l,
    };
    Ok(move_is_admissible(g, &mv).then_some(mv))
}

/// Every single dominance move at node `i`, with the resulting graph.
///
/// Donors need at least two layers: with one layer the set `L_ij \ {l}` is
/// empty and no recipient set can be a strict subset of it.
pub fn enumerate_demultiplexing_moves(
    g: &MultiGraph,
    i: usize,
) -> Result<Vec<(DominanceMove, MultiGraph)>> {
    let sets = g.neighbor_sets(i)?;
    let set_of = |k: usize| {
        sets.binary_search_by_key(&k, |&(j, _)| j)
            .map_or(LayerSet::empty(), |p| sets[p].1)
    };
    let mut out = Vec::new();
    for &(donor, donor_set) in &sets {
        if donor_set.len() < 2 {
            continue;
        }
        for layer in donor_set.iter() {
            let remaining = donor_set.without(layer);
            for recipient in 0..g.node_count() {
                if recipient == i || recipient == donor {
                    continue;
                }
                if set_of(recipient).is_strict_subset_of(remaining) {
                    let mv = DominanceMove {
                        node: i,
                        donor,
                        recipient,
                        layer,
                    };
                    let next = g
                        .with_edge(layer, i, donor, false)
                        .with_edge(layer, i, recipient, true);
                    out.push((mv, next));
                }
            }
        }
    }
    Ok(out)
}

/// Two-layer connection profile: neighbors linked only on A, only on B, on both.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Profile {
    pub only_a: u32,
    pub only_b: u32,
    pub both: u32,
}

impl Profile {
    pub const fn new(only_a: u32, only_b: u32, both: u32) -> Self {
        Profile {
            only_a,
            only_b,
            both,
        }
    }

    /// The profile with one doubly-linked neighbor split into two single links.
    pub fn demultiplexed(self) -> Option<Profile> {
        (self.both >= 1).then(|| Profile::new(self.only_a + 1, self.only_b + 1, self.both - 1))
    }

    /// Total number of layer-links, `dA + dB + 2 dAB`.
    pub fn layer_links(self) -> u32 {
        self.only_a + self.only_b + 2 * self.both
    }

    pub fn neighbor_count(self) -> u32 {
        self.only_a + self.only_b + self.both
    }

    /// Canonical neighbor realization over layers `0` (A) and `1` (B).
    pub fn neighbor_layer_sets(self) -> Vec<LayerSet> {
        let a = LayerSet::single(0);
        let b = LayerSet::single(1);
        std::iter::repeat_n(a, self.only_a as usize)
            .chain(std::iter::repeat_n(b, self.only_b as usize))
            .chain(std::iter::repeat_n(a.with(1), self.both as usize))
            .collect()
    }
}

fn profile_at(g: &MultiGraph, i: usize, a: usize, b: usize) -> Profile {
    let (la, lb) = (g.layer(a), g.layer(b));
    let (ra, rb) = (la.row(i), lb.row(i));
    let both = ra.iter().filter(|j| rb.binary_search(j).is_ok()).count() as u32;
    Profile::new(ra.len() as u32 - both, rb.len() as u32 - both, both)
}

/// Profile of node `i` over the two named layers, counting the nodes that can
/// transmit to `i` (row `i` of each layer).
pub fn profile(g: &MultiGraph, i: usize, layer_a: &str, layer_b: &str) -> Result<Profile> {
    g.check_node(i)?;
    let (a, b) = (g.layer_index(layer_a)?, g.layer_index(layer_b)?);
    Ok(profile_at(g, i, a, b))
}

/// A finitely supported distribution over profiles.
#[derive(Clone, PartialEq, Debug, Default)]
pub struct ProfileDistribution {
    pub(crate) masses: BTreeMap<Profile, f64>,
}

impl ProfileDistribution {
    /// Validates nonnegative masses summing to one within [`MASS_TOLERANCE`].
    /// Zero-mass entries are dropped.
    pub fn new<I: IntoIterator<Item = (Profile, f64)>>(entries: I) -> Result<Self> {
        let mut masses: BTreeMap<Profile, f64> = BTreeMap::new();
        for (p, m) in entries {
            if !m.is_finite() || m < 0.0 {
                return Err(Error::InvalidDistribution(format!(
                    "mass {m} for {p:?} is not a nonnegative number"
                )));
            }
            *masses.entry(p).or_default() += m;
        }
        masses.retain(|_, m| *m > 0.0);
        let out = ProfileDistribution { masses };
        let total = out.total_mass();
        if (total - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {total}, not 1"
            )));
        }
        Ok(out)
    }

    pub fn point_mass(p: Profile) -> Self {
        ProfileDistribution {
            masses: BTreeMap::from([(p, 1.0)]),
        }
    }

    pub fn mass(&self, p: &Profile) -> f64 {
        self.masses.get(p).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (Profile, f64)> + '_ {
        self.masses.iter().map(|(p, m)| (*p, *m))
    }

    pub fn support(&self) -> impl Iterator<Item = Profile> + '_ {
        self.masses.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Compensated sum of all masses.
    pub fn total_mass(&self) -> f64 {
        neumaier_sum(self.masses.values().copied())
    }

    /// Reads the `dA,dB,dAB,prob` text format. Masses must sum to one within
    /// [`FILE_MASS_TOLERANCE`] and are renormalized.
    pub fn read<R: Read>(reader: R, source: &str) -> Result<Self> {
        let mut csv = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let csv_err = |e| Error::Csv {
            path: source.into(),
            source: e,
        };
        let headers = csv.headers().map_err(csv_err)?;
        if headers != vec!["dA", "dB", "dAB", "prob"] {
            return Err(Error::parse(source, "expected header `dA,dB,dAB,prob`"));
        }
        let mut entries = Vec::new();
        for row in csv.deserialize::<(u32, u32, u32, f64)>() {
            let (a, b, ab, p) = row.map_err(csv_err)?;
            if !p.is_finite() || p < 0.0 {
                return Err(Error::parse(source, format!("invalid probability {p}")));
            }
            entries.push((Profile::new(a, b, ab), p));
        }
        let total = neumaier_sum(entries.iter().map(|e| e.1));
        if (total - 1.0).abs() > FILE_MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "{source}: probabilities sum to {total}"
            )));
        }
        Self::new(entries.into_iter().map(|(p, m)| (p, m / total)))
    }

    pub fn write<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "dA,dB,dAB,prob")?;
        for (p, m) in self.iter() {
            writeln!(writer, "{},{},{},{:e}", p.only_a, p.only_b, p.both, m)?;
        }
        Ok(())
    }

    /// If `self` is obtained from `more` by one de-multiplexing step, returns
    /// the pair `(D, D')` it moved mass between.
    ///
    /// Checks that `D'` is `D` with one double link split, that the combined
    /// mass on `{D, D'}` is unchanged, that mass on `D'` strictly increased,
    /// and that every other profile keeps its mass (within `tol`).
    pub fn demultiplex_witness(
        &self,
        more: &ProfileDistribution,
        tol: f64,
    ) -> Option<(Profile, Profile)> {
        let mut profiles: Vec<Profile> = self.support().chain(more.support()).collect();
        profiles.sort();
        profiles.dedup();
        let changed: Vec<Profile> = profiles
            .into_iter()
            .filter(|p| (self.mass(p) - more.mass(p)).abs() > tol)
            .collect();
        let [x, y] = changed.as_slice() else {
            return None;
        };
        let (from, to) = if x.demultiplexed() == Some(*y) {
            (*x, *y)
        } else if y.demultiplexed() == Some(*x) {
            (*y, *x)
        } else {
            return None;
        };
        let before = more.mass(&from) + more.mass(&to);
        let after = self.mass(&from) + self.mass(&to);
        ((before - after).abs() <= tol && self.mass(&to) > more.mass(&to)).then_some((from, to))
    }
}

/// Empirical distribution of profiles over all nodes.
pub fn profile_distribution(
    g: &MultiGraph,
    layer_a: &str,
    layer_b: &str,
) -> Result<ProfileDistribution> {
    let (a, b) = (g.layer_index(layer_a)?, g.layer_index(layer_b)?);
    let mut counts: BTreeMap<Profile, usize> = BTreeMap::new();
    for i in 0..g.node_count() {
        *counts.entry(profile_at(g, i, a, b)).or_default() += 1;
    }
    let n = g.node_count() as f64;
    ProfileDistribution::new(counts.into_iter().map(|(p, c)| (p, c as f64 / n)))
}

/// Moves `mass` from profile `at` to its de-multiplexed profile.
pub fn demultiplex_distribution(
    dist: &ProfileDistribution,
    at: Profile,
    mass: f64,
) -> Result<ProfileDistribution> {
    let target = at.demultiplexed().ok_or_else(|| {
        Error::Precondition(format!("{at:?} has no doubly-linked neighbor to split"))
    })?;
    let available = dist.mass(&at);
    if !(mass > 0.0 && mass <= available) {
        return Err(Error::Precondition(format!(
            "cannot move mass {mass} from {at:?} holding {available}"
        )));
    }
    let mut masses = dist.masses.clone();
    let remaining = available - mass;
    if remaining > 0.0 {
        masses.insert(at, remaining);
    } else {
        masses.remove(&at);
    }
    *masses.entry(target).or_default() += mass;
    Ok(ProfileDistribution { masses })
}
