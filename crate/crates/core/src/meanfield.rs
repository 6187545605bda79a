//! Two-layer mean-field SIS steady states and exact individual infection
//! probabilities, with checks of how de-multiplexing moves change them.
//!
//! Layer `0` plays the role of A and layer `1` of B throughout.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{LayerSet, MultiGraph};
use crate::multiplexity::{is_dominance_move, Profile, ProfileDistribution, MASS_TOLERANCE};
use crate::transmission::{convolve, JointPair, TransmissionModel};
use crate::util::neumaier_sum;

/// Stop once successive iterates differ by less than this.
pub const FIXED_POINT_TOL: f64 = 1e-12;
pub const MAX_FIXED_POINT_ITERS: usize = 1_000_000;
/// Steady states below this are reported as zero.
pub const ZERO_RATE: f64 = 1e-9;
/// Tolerance for equality of individual infection probabilities.
pub const INDIVIDUAL_TOL: f64 = 1e-12;
/// Minimum gap between population rates counted as a strict ordering.
pub const POPULATION_MARGIN: f64 = 1e-9;

/// Probability that a susceptible node with profile `d` is infected in one
/// period when each neighbor is independently infected with probability `rho`
/// and one transmission suffices.
pub fn infection_prob_profile(d: Profile, rho: f64, pair: &JointPair) -> f64 {
    let JointPair { qa, qb, f2 } = *pair;
    let none = (1.0 - rho * qa).powi(d.only_a as i32)
        * (1.0 - rho * qb).powi(d.only_b as i32)
        * (1.0 - rho * (qa + qb - f2)).powi(d.both as i32);
    (1.0 - none).clamp(0.0, 1.0)
}

/// Infection probability of profile `d` under threshold `tau`, using the
/// canonical neighbor realization of the profile.
pub fn infection_prob_profile_threshold(d: Profile, rho: f64, pair: &JointPair, tau: u32) -> Result<f64> {
    if tau == 1 {
        return Ok(infection_prob_profile(d, rho, pair));
    }
    if d.neighbor_count() == 0 {
        return Ok(0.0);
    }
    individual_infection_prob_exact(
        &d.neighbor_layer_sets(),
        rho,
        &TransmissionModel::from_pair(*pair),
        tau,
    )
}

fn check_delta(delta: f64) -> Result<()> {
    if (0.0..=1.0).contains(&delta) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "delta = {delta} is not a probability"
        )))
    }
}

/// Solves `rate * delta = (1 - rate) * pi` for the per-profile rate.
fn rate_from_pi(pi: f64, delta: f64) -> f64 {
    if pi == 0.0 {
        0.0
    } else {
        pi / (pi + delta)
    }
}

/// Steady-state infection rate of profile `d` given the population rate `rho`.
/// With `delta = 0` any positive infection probability gives rate 1.
pub fn steady_state_profile(d: Profile, rho: f64, delta: f64, pair: &JointPair) -> Result<f64> {
    check_delta(delta)?;
    Ok(rate_from_pi(infection_prob_profile(d, rho, pair), delta))
}

/// A solved steady state.
#[derive(Clone, Debug, PartialEq)]
pub struct SteadyState {
    pub rho: f64,
    pub per_profile: BTreeMap<Profile, f64>,
    pub iterations: usize,
    /// `|map(rho) - rho|` at the returned rate.
    pub residual: f64,
}

/// The population fixed-point map `rho -> sum_D P(D) rate(D; rho)`.
#[derive(Clone, Debug)]
pub struct FixedPointMap<'a> {
    dist: &'a ProfileDistribution,
    delta: f64,
    pair: JointPair,
    tau: u32,
}

impl<'a> FixedPointMap<'a> {
    pub fn new(dist: &'a ProfileDistribution, delta: f64, pair: &JointPair, tau: u32) -> Result<Self> {
        check_delta(delta)?;
        if tau < 1 {
            return Err(Error::InvalidParameter("tau must be at least 1".into()));
        }
        if (dist.total_mass() - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidDistribution(format!(
                "masses sum to {}",
                dist.total_mass()
            )));
        }
        Ok(FixedPointMap {
            dist,
            delta,
            pair: *pair,
            tau,
        })
    }

    pub fn rate(&self, d: Profile, rho: f64) -> Result<f64> {
        Ok(rate_from_pi(
            infection_prob_profile_threshold(d, rho, &self.pair, self.tau)?,
            self.delta,
        ))
    }

    pub fn per_profile(&self, rho: f64) -> Result<BTreeMap<Profile, f64>> {
        self.dist
            .support()
            .map(|d| Ok((d, self.rate(d, rho)?)))
            .collect()
    }

    pub fn apply(&self, rho: f64) -> Result<f64> {
        let terms = self
            .dist
            .iter()
            .map(|(d, p)| Ok(p * self.rate(d, rho)?))
            .collect::<Result<Vec<f64>>>()?;
        Ok(neumaier_sum(terms).clamp(0.0, 1.0))
    }

    /// Derivative of the map at zero for single-transmission thresholds.
    fn slope_at_zero(&self) -> Option<f64> {
        if self.tau != 1 || self.delta == 0.0 {
            return None;
        }
        let JointPair { qa, qb, f2 } = self.pair;
        Some(
            self.dist
                .iter()
                .map(|(d, p)| {
                    p * (qa * d.only_a as f64 + qb * d.only_b as f64 + (qa + qb - f2) * d.both as f64)
                })
                .sum::<f64>()
                / self.delta,
        )
    }

    fn zero_state(&self, iterations: usize) -> Result<SteadyState> {
        Ok(SteadyState {
            rho: 0.0,
            per_profile: self.per_profile(0.0)?,
            iterations,
            residual: self.apply(0.0)?,
        })
    }

    /// Iterates downward from `rho = 1`, converging to the largest fixed point.
    pub fn solve(&self) -> Result<SteadyState> {
        if self.slope_at_zero().is_some_and(|s| s <= 1.0) {
            return self.zero_state(0);
        }
        let mut rho = 1.0;
        let mut iterations = 0;
        while iterations < MAX_FIXED_POINT_ITERS {
            let next = self.apply(rho)?;
            iterations += 1;
            let gap = (next - rho).abs();
            rho = next;
            if gap < FIXED_POINT_TOL || rho < ZERO_RATE {
                break;
            }
        }
        if rho < ZERO_RATE {
            return self.zero_state(iterations);
        }
        Ok(SteadyState {
            rho,
            per_profile: self.per_profile(rho)?,
            iterations,
            residual: (self.apply(rho)? - rho).abs(),
        })
    }
}

/// Largest steady-state infection rate of the population with profile
/// distribution `dist`.
pub fn solve_steady_state(
    dist: &ProfileDistribution,
    delta: f64,
    pair: &JointPair,
    tau: u32,
) -> Result<SteadyState> {
    FixedPointMap::new(dist, delta, pair, tau)?.solve()
}

/// Distribution of the total number of transmissions `i` receives from
/// neighbors linked on `sets`, each independently infected with probability
/// `rho`.
pub fn transmission_count_pmf(sets: &[LayerSet], rho: f64, m: &TransmissionModel) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidParameter(format!(
            "rho = {rho} is not a probability"
        )));
    }
    let mut total = vec![1.0];
    for &s in sets {
        let mut mixture: Vec<f64> = m.pmf(s)?.iter().map(|p| rho * p).collect();
        mixture[0] += 1.0 - rho;
        total = convolve(&total, &mixture);
    }
    Ok(total)
}

fn upper_tail(pmf: &[f64], tau: u32) -> f64 {
    neumaier_sum(pmf.iter().skip(tau as usize).copied()).clamp(0.0, 1.0)
}

/// Exact probability that a susceptible node linked to neighbors on `sets`
/// receives at least `tau` transmissions in one period.
pub fn individual_infection_prob_exact(
    sets: &[LayerSet],
    rho: f64,
    m: &TransmissionModel,
    tau: u32,
) -> Result<f64> {
    if tau < 1 {
        return Err(Error::InvalidParameter("tau must be at least 1".into()));
    }
    if sets.is_empty() {
        return Err(Error::Precondition("node has no neighbors".into()));
    }
    Ok(upper_tail(&transmission_count_pmf(sets, rho, m)?, tau))
}

/// The claim a report checks.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Claim {
    IndividualSimple,
    PopulationSimple,
    IndividualComplex,
    PopulationComplex,
}

/// Regime of a complex-contagion comparison.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ComplexBranch {
    /// Low infection and transmission rates: multiplexing helps.
    LowRate,
    /// High rates: multiplexing hurts.
    HighRate,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Status {
    Pass,
    Fail,
    /// A required steady state was zero.
    Inconclusive,
}

/// Outcome of one check. Values are probabilities or rates on the more and
/// the less multiplexed side; `margin = less_mpx - more_mpx`.
#[derive(Clone, Debug, PartialEq)]
pub struct PropositionReport {
    pub claim: Claim,
    /// Condition that determines the expected ordering, if one applies.
    pub condition: Option<bool>,
    /// Expected sign of `margin`.
    pub expected: Ordering,
    pub observed: Ordering,
    pub more_mpx: f64,
    pub less_mpx: f64,
    pub margin: f64,
    pub details: Vec<(&'static str, f64)>,
    pub status: Status,
}

impl PropositionReport {
    pub fn passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn detail(&self, key: &str) -> Option<f64> {
        self.details.iter().find(|(k, _)| *k == key).map(|&(_, v)| v)
    }
}

fn sign_with_tol(x: f64, tol: f64) -> Ordering {
    if x > tol {
        Ordering::Greater
    } else if x < -tol {
        Ordering::Less
    } else {
        Ordering::Equal
    }
}

fn two_layer_pair(g: &MultiGraph, m: &TransmissionModel) -> Result<JointPair> {
    if g.layer_count() != 2 || m.layer_count() != 2 {
        return Err(Error::InvalidModel(
            "comparison requires exactly two layers".into(),
        ));
    }
    Ok(m.pair(0, 1))
}

fn move_at(g: &MultiGraph, g_hat: &MultiGraph, i: usize) -> Result<crate::multiplexity::DominanceMove> {
    match is_dominance_move(g, g_hat)? {
        Some(mv) if mv.node == i => Ok(mv),
        Some(mv) => Err(Error::Precondition(format!(
            "the move changes node {}, not node {i}",
            mv.node
        ))),
        None => Err(Error::Precondition(
            "the second graph is not one de-multiplexing move from the first".into(),
        )),
    }
}

fn sets_of(g: &MultiGraph, i: usize) -> Result<Vec<LayerSet>> {
    Ok(g.neighbor_sets(i)?.into_iter().map(|(_, s)| s).collect())
}

/// Compares node `i`'s single-transmission infection probability under `g`
/// and under `g_hat`, one de-multiplexing move away at `i`. The less
/// multiplexed side is expected to be strictly more likely infected exactly
/// when `f2 > rho q_A q_B`, equally likely on equality.
pub fn verify_simple_individual(
    g: &MultiGraph,
    g_hat: &MultiGraph,
    i: usize,
    rho: f64,
    m: &TransmissionModel,
) -> Result<PropositionReport> {
    let pair = two_layer_pair(g, m)?;
    move_at(g, g_hat, i)?;
    let more = individual_infection_prob_exact(&sets_of(g, i)?, rho, m, 1)?;
    let less = individual_infection_prob_exact(&sets_of(g_hat, i)?, rho, m, 1)?;
    let slack = pair.f2 - rho * pair.qa * pair.qb;
    let expected = sign_with_tol(slack, 0.0);
    let margin = less - more;
    let observed = match expected {
        Ordering::Equal => sign_with_tol(margin, INDIVIDUAL_TOL),
        _ => sign_with_tol(margin, 0.0),
    };
    Ok(PropositionReport {
        claim: Claim::IndividualSimple,
        condition: Some(pair.corr_condition(rho)),
        expected,
        observed,
        more_mpx: more,
        less_mpx: less,
        margin,
        details: vec![("rho", rho), ("corr_slack", slack)],
        status: if observed == expected {
            Status::Pass
        } else {
            Status::Fail
        },
    })
}

/// Compares node `i`'s infection probability under `g` and `g_hat` for a
/// threshold `tau > 1`.
///
/// Also recomputes the probabilities `phi` and `psi` that the links other than
/// the two changed ones deliver exactly `tau - 1` and `tau - 2` transmissions,
/// and checks that the probability gap equals
/// `(psi - phi) * (rho^2 (f2 - q_A q_B) + rho (1 - rho) f2)`.
///
/// With `branch` given, passes when the observed ordering is that branch's;
/// otherwise when it matches the sign of `psi - phi`.
pub fn verify_complex_individual(
    g: &MultiGraph,
    g_hat: &MultiGraph,
    i: usize,
    rho: f64,
    m: &TransmissionModel,
    tau: u32,
    branch: Option<ComplexBranch>,
) -> Result<PropositionReport> {
    let pair = two_layer_pair(g, m)?;
    if tau < 2 {
        return Err(Error::Precondition("threshold must exceed 1".into()));
    }
    let mv = move_at(g, g_hat, i)?;
    let sets = g.neighbor_sets(i)?;
    let links: usize = sets.iter().map(|(_, s)| s.len()).sum();
    if links <= tau as usize {
        return Err(Error::Precondition(format!(
            "node {i} has {links} layer-links, not more than the threshold {tau}"
        )));
    }
    let JointPair { qa, qb, f2 } = pair;
    if f2 < qa * qb - 1e-15 {
        return Err(Error::Precondition(
            "transmission is negatively correlated across layers".into(),
        ));
    }
    let more = individual_infection_prob_exact(&sets_of(g, i)?, rho, m, tau)?;
    let less = individual_infection_prob_exact(&sets_of(g_hat, i)?, rho, m, tau)?;
    let others: Vec<LayerSet> = sets
        .iter()
        .filter(|(j, _)| *j != mv.donor && *j != mv.recipient)
        .map(|&(_, s)| s)
        .collect();
    let rest = transmission_count_pmf(&others, rho, m)?;
    let at = |k: usize| rest.get(k).copied().unwrap_or(0.0);
    let (phi, psi) = (at(tau as usize - 1), at(tau as usize - 2));
    let predicted_gap = (psi - phi) * (rho * rho * (f2 - qa * qb) + rho * (1.0 - rho) * f2);
    let identity_error = ((more - less) - predicted_gap).abs();
    let margin = less - more;
    let observed = sign_with_tol(margin, 0.0);
    let expected = match branch {
        Some(ComplexBranch::LowRate) => Ordering::Less,
        Some(ComplexBranch::HighRate) => Ordering::Greater,
        None => sign_with_tol(phi - psi, 0.0),
    };
    let pass = observed == expected && identity_error <= INDIVIDUAL_TOL;
    Ok(PropositionReport {
        claim: Claim::IndividualComplex,
        condition: Some(psi > phi),
        expected,
        observed,
        more_mpx: more,
        less_mpx: less,
        margin,
        details: vec![
            ("rho", rho),
            ("phi", phi),
            ("psi", psi),
            ("identity_error", identity_error),
        ],
        status: if pass { Status::Pass } else { Status::Fail },
    })
}

/// Compares population steady states under `more` and `less`, where `less`
/// is one de-multiplexing step from `more`.
///
/// For `tau = 1` the expected ordering follows the correlation condition at
/// `more`'s steady state. For `tau > 1` it follows `branch` when given;
/// otherwise it is predicted from the two fixed-point maps at `more`'s steady
/// state. Zero steady states give an inconclusive report.
pub fn verify_sis_ordering(
    more: &ProfileDistribution,
    less: &ProfileDistribution,
    delta: f64,
    pair: &JointPair,
    tau: u32,
    branch: Option<ComplexBranch>,
) -> Result<PropositionReport> {
    if less.demultiplex_witness(more, MASS_TOLERANCE).is_none() {
        return Err(Error::Precondition(
            "distributions are not one de-multiplexing step apart".into(),
        ));
    }
    if tau == 1 && branch.is_some() {
        return Err(Error::InvalidParameter(
            "regime branches apply to thresholds above 1".into(),
        ));
    }
    let map_more = FixedPointMap::new(more, delta, pair, tau)?;
    let map_less = FixedPointMap::new(less, delta, pair, tau)?;
    let s_more = map_more.solve()?;
    let s_less = map_less.solve()?;
    let claim = if tau == 1 {
        Claim::PopulationSimple
    } else {
        Claim::PopulationComplex
    };
    let margin = s_less.rho - s_more.rho;
    let observed = sign_with_tol(margin, POPULATION_MARGIN);
    let mut details = vec![
        ("rho_more_mpx", s_more.rho),
        ("rho_less_mpx", s_less.rho),
        ("residual_more_mpx", s_more.residual),
        ("residual_less_mpx", s_less.residual),
    ];
    if s_more.rho == 0.0 || s_less.rho == 0.0 {
        return Ok(PropositionReport {
            claim,
            condition: None,
            expected: Ordering::Equal,
            observed,
            more_mpx: s_more.rho,
            less_mpx: s_less.rho,
            margin,
            details,
            status: Status::Inconclusive,
        });
    }
    let (condition, expected) = match (tau, branch) {
        (1, _) => {
            let slack = pair.f2 - s_more.rho * pair.qa * pair.qb;
            details.push(("corr_slack", slack));
            (Some(pair.corr_condition(s_more.rho)), sign_with_tol(slack, 0.0))
        }
        (_, Some(ComplexBranch::LowRate)) => (None, Ordering::Less),
        (_, Some(ComplexBranch::HighRate)) => (None, Ordering::Greater),
        (_, None) => {
            let push = map_less.apply(s_more.rho)? - s_more.rho;
            details.push(("map_gap_at_rho", push));
            (None, sign_with_tol(push, 0.0))
        }
    };
    let consistent = profile_orderings_agree(&s_more, &s_less, &map_more, margin)?;
    details.push(("per_profile_consistent", consistent as u8 as f64));
    Ok(PropositionReport {
        claim,
        condition,
        expected,
        observed,
        more_mpx: s_more.rho,
        less_mpx: s_less.rho,
        margin,
        details,
        status: if observed == expected && consistent {
            Status::Pass
        } else {
            Status::Fail
        },
    })
}

/// Every connection type's steady rate moves weakly in the direction of the
/// population rate.
fn profile_orderings_agree(
    more: &SteadyState,
    less: &SteadyState,
    map: &FixedPointMap,
    margin: f64,
) -> Result<bool> {
    for (&d, &r_more) in &more.per_profile {
        let r_less = map.rate(d, less.rho)?;
        let diff = r_less - r_more;
        if diff * margin < 0.0 && diff.abs() > POPULATION_MARGIN {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Recovery rates `0.05, 0.10, ..., 0.95`.
pub fn default_delta_grid() -> Vec<f64> {
    (1..=19).map(|k| k as f64 * 0.05).collect()
}

/// Population comparison over a range of recovery rates.
#[derive(Clone, Debug)]
pub struct DeltaScan {
    pub rows: Vec<(f64, PropositionReport)>,
    /// Widest run of consecutive grid values where the check passed.
    pub widest_pass: Option<(f64, f64)>,
}

pub fn delta_scan(
    more: &ProfileDistribution,
    less: &ProfileDistribution,
    deltas: &[f64],
    pair: &JointPair,
    tau: u32,
    branch: Option<ComplexBranch>,
) -> Result<DeltaScan> {
    let rows = deltas
        .iter()
        .map(|&d| Ok((d, verify_sis_ordering(more, less, d, pair, tau, branch)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut best: Option<(usize, usize)> = None;
    let mut start = None;
    for k in 0..=rows.len() {
        let ok = k < rows.len() && rows[k].1.passed();
        match (ok, start) {
            (true, None) => start = Some(k),
            (false, Some(s)) => {
                if best.is_none_or(|(bs, be)| k - s > be - bs) {
                    best = Some((s, k));
                }
                start = None;
            }
            _ => {}
        }
    }
    Ok(DeltaScan {
        widest_pass: best.map(|(s, e)| (rows[s].0, rows[e - 1].0)),
        rows,
    })
}

/// Largest `eps` on a grid of `steps` values such that, for every
/// `f2 = (1 + e) q^2` with `e <= eps`, the low-rate branch holds at
/// `rho = q_A = q_B = low` and the high-rate branch at `high`.
/// Returns `None` if independence itself fails.
pub fn epsilon_search(
    g: &MultiGraph,
    g_hat: &MultiGraph,
    i: usize,
    tau: u32,
    low: f64,
    high: f64,
    steps: usize,
) -> Result<Option<f64>> {
    let eps_max = (1.0 / low - 1.0).min(1.0 / high - 1.0);
    let mut found = None;
    for k in 0..=steps {
        let eps = eps_max * k as f64 / steps.max(1) as f64;
        let ok = [(low, ComplexBranch::LowRate), (high, ComplexBranch::HighRate)]
            .into_iter()
            .map(|(q, branch)| {
                let model = TransmissionModel::from_pair(JointPair::new(q, q, (1.0 + eps) * q * q)?);
                verify_complex_individual(g, g_hat, i, q, &model, tau, Some(branch))
            })
            .collect::<Result<Vec<_>>>()?
            .iter()
            .all(PropositionReport::passed);
        if !ok {
            break;
        }
        found = Some(eps);
    }
    Ok(found)
}
