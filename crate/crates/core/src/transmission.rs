//! Per-contact transmission over layer sets.
//!
//! A model holds the marginal transmission probability `q_l` of every layer
//! and, for selected layer pairs, the joint probability `f2 = f(2; {A,B})`
//! that both layers transmit. Pairs without an explicit joint transmit
//! independently. Layer sets of size three or more must be independent.

use std::collections::BTreeMap;

use rand::Rng;

use crate::config::Config;
use crate::error::{Error, Result};
use crate::graph::LayerSet;

/// Slack allowed when checking the Fréchet bounds on `f2`.
const FRECHET_SLACK: f64 = 1e-15;

/// Marginals and joint transmission probability of one layer pair.
#[derive(Clone, Copy, PartialEq, Debug)]
pub struct JointPair {
    pub qa: f64,
    pub qb: f64,
    pub f2: f64,
}

impl JointPair {
    pub fn new(qa: f64, qb: f64, f2: f64) -> Result<Self> {
        check_marginal(qa)?;
        check_marginal(qb)?;
        let (lo, hi) = frechet_bounds(qa, qb);
        if !(f2 >= lo - FRECHET_SLACK && f2 <= hi + FRECHET_SLACK) {
            return Err(Error::InvalidModel(format!(
                "f2 = {f2} outside Fréchet bounds [{lo}, {hi}]"
            )));
        }
        Ok(JointPair {
            qa,
            qb,
            f2: f2.clamp(lo, hi),
        })
    }

    pub fn independent(qa: f64, qb: f64) -> Result<Self> {
        Self::new(qa, qb, qa * qb)
    }

    /// Joint from a correlation coefficient between the two transmission
    /// indicators, clipped to the Fréchet bounds.
    pub fn from_correlation(qa: f64, qb: f64, corr: f64) -> Result<Self> {
        check_marginal(qa)?;
        check_marginal(qb)?;
        let raw = qa * qb + corr * (qa * (1.0 - qa) * qb * (1.0 - qb)).sqrt();
        let (lo, hi) = frechet_bounds(qa, qb);
        if raw < lo || raw > hi {
            log::warn!("correlation {corr} implies f2 = {raw}; clipped to [{lo}, {hi}]");
        }
        Self::new(qa, qb, raw.clamp(lo, hi))
    }

    /// `f(0; {A,B})`: neither layer transmits.
    pub fn f0(&self) -> f64 {
        (1.0 - self.qa - self.qb + self.f2).max(0.0)
    }

    /// `f(1; {A,B})`: exactly one layer transmits.
    pub fn f1(&self) -> f64 {
        (self.qa + self.qb - 2.0 * self.f2).max(0.0)
    }

    /// Probability that a doubly-linked neighbor transmits at least once.
    pub fn any(&self) -> f64 {
        self.qa + self.qb - self.f2
    }

    pub fn pmf(&self) -> [f64; 3] {
        [self.f0(), self.f1(), self.f2]
    }

    /// `q_A q_B rho <= f2`: transmission is not too negatively correlated.
    pub fn corr_condition(&self, rho: f64) -> bool {
        self.qa * self.qb * rho <= self.f2
    }
}

/// `q_A q_B rho <= f(2; {A,B})`.
pub fn corr_condition(pair: &JointPair, rho: f64) -> bool {
    pair.corr_condition(rho)
}

fn frechet_bounds(qa: f64, qb: f64) -> (f64, f64) {
    ((qa + qb - 1.0).max(0.0), qa.min(qb))
}

fn check_marginal(q: f64) -> Result<()> {
    if q > 0.0 && q < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidModel(format!(
            "transmission probability {q} must lie strictly inside (0, 1)"
        )))
    }
}

/// Transmission model over `L` layers.
#[derive(Clone, PartialEq, Debug)]
pub struct TransmissionModel {
    q: Vec<f64>,
    joints: BTreeMap<(usize, usize), f64>,
}

impl TransmissionModel {
    pub fn independent(q: Vec<f64>) -> Result<Self> {
        if q.is_empty() {
            return Err(Error::InvalidModel("no layers".into()));
        }
        q.iter().try_for_each(|&x| check_marginal(x))?;
        Ok(TransmissionModel {
            q,
            joints: BTreeMap::new(),
        })
    }

    /// The same marginal on every layer, independent across layers.
    pub fn uniform(layer_count: usize, q: f64) -> Result<Self> {
        Self::independent(vec![q; layer_count])
    }

    /// Two layers (0 = A, 1 = B) with the given joint.
    pub fn from_pair(pair: JointPair) -> Self {
        let mut joints = BTreeMap::new();
        joints.insert((0, 1), pair.f2);
        TransmissionModel {
            q: vec![pair.qa, pair.qb],
            joints,
        }
    }

    pub fn with_joint(mut self, a: usize, b: usize, f2: f64) -> Result<Self> {
        let (a, b) = self.ordered_pair(a, b)?;
        let pair = JointPair::new(self.q[a], self.q[b], f2)?;
        self.joints.insert((a, b), pair.f2);
        Ok(self)
    }

    pub fn with_correlation(mut self, a: usize, b: usize, corr: f64) -> Result<Self> {
        let (a, b) = self.ordered_pair(a, b)?;
        let pair = JointPair::from_correlation(self.q[a], self.q[b], corr)?;
        self.joints.insert((a, b), pair.f2);
        Ok(self)
    }

    fn ordered_pair(&self, a: usize, b: usize) -> Result<(usize, usize)> {
        if a == b || a >= self.q.len() || b >= self.q.len() {
            return Err(Error::InvalidModel(format!("invalid layer pair ({a}, {b})")));
        }
        Ok((a.min(b), a.max(b)))
    }

    /// Reads `q.<layer>` and optional `f2.<a>.<b>` / `corr.<a>.<b>` keys.
    /// A bare `q` key applies to every layer without its own entry.
    pub fn from_config<S: AsRef<str>>(cfg: &Config, layers: &[S]) -> Result<Self> {
        let index = |name: &str| {
            layers
                .iter()
                .position(|l| l.as_ref() == name)
                .ok_or_else(|| Error::UnknownLayer(name.to_owned()))
        };
        let default_q: Option<f64> = cfg.get("q")?;
        let mut q = vec![default_q; layers.len()];
        for (layer, value) in cfg.with_prefix("q") {
            let v = value
                .parse()
                .map_err(|_| Error::parse("config", format!("invalid q.{layer} = {value}")))?;
            q[index(layer)?] = Some(v);
        }
        let q = q
            .into_iter()
            .zip(layers)
            .map(|(v, l)| {
                v.ok_or_else(|| Error::parse("config", format!("missing q.{}", l.as_ref())))
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut model = Self::independent(q)?;
        for (kind, pairs) in [("f2", true), ("corr", false)] {
            for (key, value) in cfg.with_prefix(kind) {
                let (a, b) = key.split_once('.').ok_or_else(|| {
                    Error::parse("config", format!("`{kind}.{key}` must name two layers"))
                })?;
                let v: f64 = value
                    .parse()
                    .map_err(|_| Error::parse("config", format!("invalid {kind}.{key}")))?;
                let (a, b) = (index(a)?, index(b)?);
                model = if pairs {
                    model.with_joint(a, b, v)?
                } else {
                    model.with_correlation(a, b, v)?
                };
            }
        }
        Ok(model)
    }

    pub fn layer_count(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self, layer: usize) -> f64 {
        self.q[layer]
    }

    /// `f(2; {a,b})`; the product of marginals when no joint was set.
    pub fn f2(&self, a: usize, b: usize) -> f64 {
        let key = (a.min(b), a.max(b));
        self.joints
            .get(&key)
            .copied()
            .unwrap_or(self.q[a] * self.q[b])
    }

    pub fn pair(&self, a: usize, b: usize) -> JointPair {
        JointPair {
            qa: self.q[a],
            qb: self.q[b],
            f2: self.f2(a, b),
        }
    }

    fn has_correlated_pair_in(&self, s: LayerSet) -> bool {
        self.joints.iter().any(|(&(a, b), &f2)| {
            s.contains(a) && s.contains(b) && f2 != self.q[a] * self.q[b]
        })
    }

    fn check_set(&self, s: LayerSet) -> Result<()> {
        if s.is_empty() {
            return Err(Error::InvalidParameter("empty layer set".into()));
        }
        if s.iter().any(|l| l >= self.q.len()) {
            return Err(Error::InvalidParameter(format!(
                "layer set {s:?} exceeds {} layers",
                self.q.len()
            )));
        }
        if s.len() >= 3 && self.has_correlated_pair_in(s) {
            return Err(Error::UnsupportedJoint(s.len()));
        }
        Ok(())
    }

    /// Distribution of the number of transmissions over the links in `s`:
    /// entry `k` is `f(k; s)`, for `k = 0..=|s|`.
    pub fn pmf(&self, s: LayerSet) -> Result<Vec<f64>> {
        self.check_set(s)?;
        let layers: Vec<usize> = s.iter().collect();
        Ok(match layers.as_slice() {
            &[a] => vec![1.0 - self.q[a], self.q[a]],
            &[a, b] => self.pair(a, b).pmf().to_vec(),
            _ => {
                let mut pmf = vec![1.0];
                for &l in &layers {
                    pmf = convolve(&pmf, &[1.0 - self.q[l], self.q[l]]);
                }
                pmf
            }
        })
    }

    /// `f(0; s)`.
    pub fn no_transmission_prob(&self, s: LayerSet) -> Result<f64> {
        Ok(self.pmf(s)?[0])
    }

    /// Draws a transmission count over the links in `s`.
    pub fn sample<R: Rng + ?Sized>(&self, s: LayerSet, rng: &mut R) -> Result<usize> {
        let pmf = self.pmf(s)?;
        Ok(sample_index(&pmf, rng.random::<f64>()))
    }
}

/// Inverse-CDF lookup of `u` in a probability vector.
pub(crate) fn sample_index(pmf: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (k, &p) in pmf.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    pmf.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Discrete convolution of two probability vectors.
pub(crate) fn convolve(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}
