//! Best responses and pure Nash equilibria of the bidding games.
//!
//! Bid space is a continuum, but each mechanism only looks at a finite
//! summary of a bid: Round-Robin at the induced ranking, cut-and-choose at the
//! ordered cut (agent 1) and the choice on it (agent 2). Searches run over
//! those classes, which makes them exhaustive.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fairness::{mms, MmsBudget};
use crate::mechanisms::{check_order, cut_phase, mod_cut_and_choose, round_robin_masks, round_robin_rankings};
use crate::model::{Allocation, BidProfile, BidVector, GoodSet, Instance, Ranking};
use crate::rational::Rational;

/// Limits on exhaustive searches.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SearchBudget {
    /// Largest m for m!-ranking best-response searches.
    pub max_goods_best_response: usize,
    /// Largest number of ranking profiles (m!)^n for equilibrium enumeration.
    pub max_profiles: u128,
    /// Largest m for enumerating the 2^m ordered cuts of cut-and-choose.
    pub max_goods_cut: usize,
    pub mms: MmsBudget,
}

impl Default for SearchBudget {
    fn default() -> Self {
        SearchBudget {
            max_goods_best_response: 8,
            max_profiles: 15_000,
            max_goods_cut: 16,
            mms: MmsBudget::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mechanism {
    RoundRobin,
    ModCutAndChoose,
}

impl Mechanism {
    pub fn parse(s: &str) -> Option<Mechanism> {
        match s.trim().to_ascii_lowercase().as_str() {
            "round-robin" | "rr" => Some(Mechanism::RoundRobin),
            "mod-cut-and-choose" | "cut-and-choose" | "mcc" => Some(Mechanism::ModCutAndChoose),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Strategy {
    Ranking(Ranking),
    Bid(BidVector),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum StrategyProfile {
    Rankings(Vec<Ranking>),
    Bids(BidProfile),
}

/// A unilateral change of strategy that strictly helps `agent`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Deviation {
    pub agent: usize,
    pub strategy: Strategy,
    pub value_before: Rational,
    pub value_after: Rational,
    pub gain: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EquilibriumCertificate {
    pub mechanism: Mechanism,
    pub profile: StrategyProfile,
    pub is_pne: bool,
    /// Alternative strategy classes examined. For a PNE this is the whole
    /// deviation space: n·(m!−1) for Round-Robin; the other realizable cuts
    /// plus agent 2's achievable opposite choice for cut-and-choose.
    pub deviations_checked: u128,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Deviation>,
    pub allocation: Allocation,
    pub values: Vec<Rational>,
}

pub fn factorial(m: usize) -> u128 {
    (1..=m as u128).fold(1u128, |acc, k| acc.saturating_mul(k))
}

/// All m! rankings in lexicographic order.
pub fn all_rankings(m: usize) -> Vec<Ranking> {
    let mut p: Vec<usize> = (0..m).collect();
    let mut out = vec![Ranking(p.clone())];
    while next_permutation(&mut p) {
        out.push(Ranking(p.clone()));
    }
    out
}

fn next_permutation(p: &mut [usize]) -> bool {
    let Some(i) = (1..p.len()).rev().find(|&i| p[i - 1] < p[i]) else {
        return false;
    };
    let j = (i..p.len()).rev().find(|&j| p[j] > p[i - 1]).expect("pivot has a successor");
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// `out[mask]` is the sum of `row` over the goods in `mask`.
pub(crate) fn subset_sums(row: &[Rational]) -> Vec<Rational> {
    let size = 1usize << row.len();
    let mut out = Vec::with_capacity(size);
    out.push(Rational::zero());
    for mask in 1..size {
        let low = mask.trailing_zeros() as usize;
        let v = &out[mask & (mask - 1)] + &row[low];
        out.push(v);
    }
    out
}

/// Dense ranks of `sums`: equal sums share a rank and larger sums rank higher.
fn dense_ranks(sums: &[Rational]) -> Vec<u32> {
    let mut idx: Vec<usize> = (0..sums.len()).collect();
    idx.sort_by(|&a, &b| sums[a].cmp(&sums[b]));
    let mut ranks = vec![0u32; sums.len()];
    let mut r = 0u32;
    for w in 0..idx.len() {
        if w > 0 && sums[idx[w]] != sums[idx[w - 1]] {
            r += 1;
        }
        ranks[idx[w]] = r;
    }
    ranks
}

fn check_rankings(inst: &Instance, profile: &[Ranking]) -> Result<()> {
    if profile.len() != inst.n() {
        return Err(Error::usage(format!(
            "profile has {} rankings for {} agents",
            profile.len(),
            inst.n()
        )));
    }
    for (i, r) in profile.iter().enumerate() {
        if r.len() != inst.m() || !r.is_permutation() {
            return Err(Error::usage(format!("ranking of agent {i} is not a permutation of the goods")));
        }
    }
    Ok(())
}

fn check_best_response_budget(m: usize, budget: &SearchBudget) -> Result<()> {
    if m > budget.max_goods_best_response {
        return Err(Error::budget(
            format!("best response over {m}! rankings"),
            factorial(m),
            factorial(budget.max_goods_best_response),
        ));
    }
    Ok(())
}

/// Ranking maximizing agent `agent`'s true value against the other rankings
/// of `profile` (her own entry is ignored). Ties go to the lexicographically
/// smallest ranking.
pub fn rr_best_response(
    inst: &Instance,
    agent: usize,
    profile: &[Ranking],
    order: &[usize],
    budget: &SearchBudget,
) -> Result<(Ranking, Rational)> {
    check_rankings(inst, profile)?;
    check_order(order, inst.n())?;
    if agent >= inst.n() {
        return Err(Error::usage(format!("agent {agent} out of range")));
    }
    let m = inst.m();
    check_best_response_budget(m, budget)?;
    let sums = subset_sums(inst.row(agent));
    let perms = all_rankings(m);
    Ok(best_response_in(&sums, agent, profile, order, &perms))
}

fn best_response_in(
    sums: &[Rational],
    agent: usize,
    profile: &[Ranking],
    order: &[usize],
    perms: &[Ranking],
) -> (Ranking, Rational) {
    let n = profile.len();
    let m = perms[0].len();
    let mut rk: Vec<&[usize]> = profile.iter().map(|r| r.0.as_slice()).collect();
    let mut cursor = vec![0usize; n];
    let mut out = vec![0u64; n];
    let mut best: Option<(usize, &Rational)> = None;
    for (idx, p) in perms.iter().enumerate() {
        rk[agent] = &p.0;
        round_robin_masks(&rk, order, m, &mut cursor, &mut out);
        let v = &sums[out[agent] as usize];
        if best.is_none_or(|(_, b)| v > b) {
            best = Some((idx, v));
        }
    }
    let (idx, v) = best.expect("at least one ranking");
    (perms[idx].clone(), v.clone())
}

/// Checks whether a ranking profile is a pure Nash equilibrium of
/// Round-Robin. The witness, if any, is the first agent (by index) with a
/// profitable deviation, playing her best response.
pub fn rr_is_pne(
    inst: &Instance,
    profile: &[Ranking],
    order: &[usize],
    budget: &SearchBudget,
) -> Result<EquilibriumCertificate> {
    check_rankings(inst, profile)?;
    check_order(order, inst.n())?;
    let m = inst.m();
    check_best_response_budget(m, budget)?;
    let (allocation, _) = round_robin_rankings(profile, order);
    let values = allocation.values(inst);
    let perms = all_rankings(m);
    let per_agent = factorial(m) - 1;
    let mut checked = 0u128;
    let mut witness = None;
    for i in 0..inst.n() {
        let sums = subset_sums(inst.row(i));
        let (br, v) = best_response_in(&sums, i, profile, order, &perms);
        checked += per_agent;
        if v > values[i] {
            witness = Some(Deviation {
                agent: i,
                strategy: Strategy::Ranking(br),
                gain: &v - &values[i],
                value_before: values[i].clone(),
                value_after: v,
            });
            break;
        }
    }
    Ok(EquilibriumCertificate {
        mechanism: Mechanism::RoundRobin,
        profile: StrategyProfile::Rankings(profile.to_vec()),
        is_pne: witness.is_none(),
        deviations_checked: checked,
        witness,
        allocation,
        values,
    })
}

/// Number of ranking profiles, or `None` on overflow.
pub fn rr_profile_count(n: usize, m: usize) -> Option<u128> {
    let p = factorial(m);
    if p == u128::MAX {
        return None;
    }
    p.checked_pow(n as u32)
}

/// Every pure Nash equilibrium of Round-Robin over ranking profiles, in
/// lexicographic profile order (agent 0's ranking most significant).
pub fn rr_enumerate_pne(inst: &Instance, order: &[usize], budget: &SearchBudget) -> Result<Vec<EquilibriumCertificate>> {
    check_order(order, inst.n())?;
    let (n, m) = (inst.n(), inst.m());
    let total = rr_profile_count(n, m).unwrap_or(u128::MAX);
    if total > budget.max_profiles || m > budget.max_goods_best_response {
        return Err(Error::budget(
            format!("equilibrium enumeration over (m!)^n with n = {n}, m = {m}"),
            total,
            budget.max_profiles,
        ));
    }
    let total = total as usize;
    let perms = all_rankings(m);
    let p = perms.len();
    let ranks: Vec<Vec<u32>> = (0..n).map(|i| dense_ranks(&subset_sums(inst.row(i)))).collect();
    let strides: Vec<usize> = (0..n).map(|i| p.pow((n - 1 - i) as u32)).collect();
    let digit = |idx: usize, i: usize| idx / strides[i] % p;

    // vals[idx * n + i]: rank of agent i's value at profile idx
    let mut vals = vec![0u32; total * n];
    vals.par_chunks_mut(n).enumerate().for_each_init(
        || (vec![0usize; n], vec![0u64; n]),
        |(cursor, out), (idx, chunk)| {
            let rk: Vec<&[usize]> = (0..n).map(|i| perms[digit(idx, i)].0.as_slice()).collect();
            round_robin_masks(&rk, order, m, cursor, out);
            for i in 0..n {
                chunk[i] = ranks[i][out[i] as usize];
            }
        },
    );

    // best[i][key]: agent i's best rank over her own axis, keyed by the
    // profile index with her digit zeroed
    let mut best = vec![vec![0u32; total]; n];
    for idx in 0..total {
        for i in 0..n {
            let key = idx - digit(idx, i) * strides[i];
            let v = vals[idx * n + i];
            if v > best[i][key] {
                best[i][key] = v;
            }
        }
    }

    let deviations = n as u128 * (p as u128 - 1);
    let mut out = Vec::new();
    for idx in 0..total {
        let stable = (0..n).all(|i| vals[idx * n + i] == best[i][idx - digit(idx, i) * strides[i]]);
        if !stable {
            continue;
        }
        let profile: Vec<Ranking> = (0..n).map(|i| perms[digit(idx, i)].clone()).collect();
        let (allocation, _) = round_robin_rankings(&profile, order);
        let values = allocation.values(inst);
        out.push(EquilibriumCertificate {
            mechanism: Mechanism::RoundRobin,
            profile: StrategyProfile::Rankings(profile),
            is_pne: true,
            deviations_checked: deviations,
            witness: None,
            allocation,
            values,
        });
    }
    Ok(out)
}

fn check_partition(x1: GoodSet, x2: GoodSet, m: usize) -> Result<()> {
    if !x1.is_disjoint(x2) || x1.union(x2) != GoodSet::full(m) {
        return Err(Error::usage(format!("{x1:?} and {x2:?} do not partition {m} goods")));
    }
    Ok(())
}

/// Bid for agent 1 that makes the cut phase produce `{x1, x2}` as an
/// unordered pair.
///
/// One side is everything: all zeros. One side is a singleton `{g}`: 1 on `g`
/// and 1/(m−1) elsewhere. Otherwise, with k = |x1| and ε = 1/(2(m−k)): 1 on
/// the lowest good of `x1`, (1+ε)/(m−k) on each good of `x2`, ε/(k−1) on the
/// rest of `x1`.
pub fn mcc_canonical_bid(x1: GoodSet, x2: GoodSet, m: usize) -> Result<BidVector> {
    check_partition(x1, x2, m)?;
    let (k1, k2) = (x1.len(), x2.len());
    if k1 == 0 || k2 == 0 {
        return Ok(BidVector::zeros(m));
    }
    if k1 == 1 || k2 == 1 {
        let g = if k1 == 1 { x1 } else { x2 }.first().expect("singleton");
        let mut bids = vec![Rational::new(1, (m - 1) as i64); m];
        bids[g] = Rational::one();
        return Ok(BidVector(bids));
    }
    let (k, rest) = (k1 as i64, k2 as i64);
    let eps = Rational::new(1, 2 * rest);
    let top = x1.first().expect("non-empty");
    let mut bids = vec![Rational::zero(); m];
    for g in x2.iter() {
        bids[g] = (Rational::one() + &eps) / Rational::from_integer(rest);
    }
    for g in x1.iter() {
        bids[g] = if g == top {
            Rational::one()
        } else {
            &eps / Rational::from_integer(k - 1)
        };
    }
    Ok(BidVector(bids))
}

/// Whether some bid makes the cut phase output exactly `(e1, e2)`.
///
/// The first good always lands in `E1`, so `(∅, M)` is impossible for m ≥ 1.
/// A singleton `E2 = {h}` next to two or more goods needs `h` to be the
/// second good placed with every later bid zero, which forces an equal bid on
/// the first good; that good must then precede `h` by index.
pub fn is_realizable_cut(e1: GoodSet, e2: GoodSet) -> bool {
    if e2.is_empty() {
        return true;
    }
    if e1.is_empty() {
        return false;
    }
    if e2.len() == 1 && e1.len() >= 2 {
        return e1.first() < e2.first();
    }
    true
}

/// A bid realizing the ordered cut `(e1, e2)`, or `None` if no bid does.
/// Prefers the canonical bid when it already yields this order.
pub fn realizing_bid(e1: GoodSet, e2: GoodSet, m: usize) -> Result<Option<BidVector>> {
    check_partition(e1, e2, m)?;
    if !is_realizable_cut(e1, e2) {
        return Ok(None);
    }
    let canonical = mcc_canonical_bid(e1, e2, m)?;
    let cut = cut_phase(&canonical);
    if (cut.e1, cut.e2) == (e1, e2) {
        return Ok(Some(canonical));
    }
    let mut bids = vec![Rational::zero(); m];
    let first = e1.first().expect("realizable cuts have a non-empty E1");
    bids[first] = Rational::one();
    if e1.len() >= 2 {
        // singleton E2 = {h} after an equal bid on a lower-indexed good
        bids[e2.first().expect("non-empty")] = Rational::one();
    }
    let bid = BidVector(bids);
    debug_assert_eq!({
        let c = cut_phase(&bid);
        (c.e1, c.e2)
    }, (e1, e2));
    Ok(Some(bid))
}

fn check_cut_budget(m: usize, budget: &SearchBudget) -> Result<()> {
    if m > budget.max_goods_cut {
        return Err(Error::budget(
            format!("enumeration of 2^{m} ordered cuts"),
            1u128 << m.min(127),
            1u128 << budget.max_goods_cut.min(127),
        ));
    }
    Ok(())
}

/// All realizable ordered cuts, by increasing bitmask of `E1`.
pub fn realizable_cuts(m: usize, budget: &SearchBudget) -> Result<Vec<(GoodSet, GoodSet)>> {
    check_cut_budget(m, budget)?;
    let full = GoodSet::full(m);
    Ok((0..1u64 << m)
        .map(GoodSet::from_bits)
        .map(|e1| (e1, full.difference(e1)))
        .filter(|&(e1, e2)| is_realizable_cut(e1, e2))
        .collect())
}

fn require_two_agents(inst: &Instance) -> Result<()> {
    if inst.n() != 2 {
        return Err(Error::usage(format!(
            "cut-and-choose is defined for exactly 2 agents, got {}",
            inst.n()
        )));
    }
    Ok(())
}

/// Canonical bid with which agent 1 forces a partition attaining her
/// 2-maximin share, together with that share.
pub fn mcc_mu1_bid(inst: &Instance, budget: &SearchBudget) -> Result<(BidVector, Rational)> {
    require_two_agents(inst)?;
    let cert = mms(inst, 0, 2, inst.goods(), &budget.mms)?;
    let (x1, x2) = (cert.witness_partition[0], cert.witness_partition[1]);
    Ok((mcc_canonical_bid(x1, x2, inst.m())?, cert.value))
}

/// Checks a bid profile of the cut-and-choose game for profitable deviations.
///
/// Agent 1 may move to any other realizable ordered cut, with agent 2's
/// choice recomputed from her fixed bid. Agent 2 may take the other bundle of
/// the current cut when some bid of hers makes that choice.
pub fn mcc_verify_pne(inst: &Instance, profile: &BidProfile, budget: &SearchBudget) -> Result<EquilibriumCertificate> {
    require_two_agents(inst)?;
    profile.check(inst)?;
    let m = inst.m();
    check_cut_budget(m, budget)?;
    let (allocation, cut) = mod_cut_and_choose(profile)?;
    let values = allocation.values(inst);
    let v1 = subset_sums(inst.row(0));
    let b2 = subset_sums(&profile.row(1).0);
    let full = GoodSet::full(m);

    let mut checked = 0u128;
    let mut best: Option<(GoodSet, GoodSet, &Rational)> = None;
    for mask in 0..1u64 << m {
        let e1 = GoodSet::from_bits(mask);
        let e2 = full.difference(e1);
        if e1 == cut.e1 || !is_realizable_cut(e1, e2) {
            continue;
        }
        checked += 1;
        let takes_e2 = b2[e2.bits() as usize] > b2[e1.bits() as usize];
        let mine = if takes_e2 { e1 } else { e2 };
        let v = &v1[mine.bits() as usize];
        if *v > values[0] && best.is_none_or(|(_, _, b)| v > b) {
            best = Some((e1, e2, v));
        }
    }
    let mut witness = match best {
        Some((e1, e2, v)) => Some(Deviation {
            agent: 0,
            strategy: Strategy::Bid(realizing_bid(e1, e2, m)?.expect("realizable")),
            value_before: values[0].clone(),
            gain: v - &values[0],
            value_after: v.clone(),
        }),
        None => None,
    };

    if witness.is_none() {
        let (other, can_switch) = if cut.chosen == 2 {
            (cut.e1, true)
        } else {
            (cut.e2, !cut.e2.is_empty())
        };
        if can_switch {
            checked += 1;
            let v = inst.bundle_value(1, other);
            if v > values[1] {
                let bid = if cut.chosen == 2 {
                    BidVector::zeros(m)
                } else {
                    BidVector((0..m).map(|g| Rational::from_integer(cut.e2.contains(g) as i64)).collect())
                };
                witness = Some(Deviation {
                    agent: 1,
                    strategy: Strategy::Bid(bid),
                    gain: &v - &values[1],
                    value_before: values[1].clone(),
                    value_after: v,
                });
            }
        }
    }

    Ok(EquilibriumCertificate {
        mechanism: Mechanism::ModCutAndChoose,
        profile: StrategyProfile::Bids(profile.clone()),
        is_pne: witness.is_none(),
        deviations_checked: checked,
        witness,
        allocation,
        values,
    })
}

/// Best reply in the cut-and-choose game. Agent 1's reply is a realizing bid
/// of the ordered cut that is best for her given agent 2's fixed bid (ties to
/// the smallest `E1` bitmask); agent 2's is her truthful bid.
pub fn mcc_best_response(
    inst: &Instance,
    agent: usize,
    profile: &BidProfile,
    budget: &SearchBudget,
) -> Result<(BidVector, Rational)> {
    require_two_agents(inst)?;
    profile.check(inst)?;
    let m = inst.m();
    match agent {
        0 => {
            let b2 = subset_sums(&profile.row(1).0);
            let v1 = subset_sums(inst.row(0));
            let mut best: Option<(GoodSet, GoodSet, &Rational)> = None;
            for (e1, e2) in realizable_cuts(m, budget)? {
                let takes_e2 = b2[e2.bits() as usize] > b2[e1.bits() as usize];
                let v = &v1[if takes_e2 { e1 } else { e2 }.bits() as usize];
                if best.is_none_or(|(_, _, b)| v > b) {
                    best = Some((e1, e2, v));
                }
            }
            let (e1, e2, v) = best.expect("(M, ∅) is always realizable");
            Ok((realizing_bid(e1, e2, m)?.expect("realizable"), v.clone()))
        }
        1 => {
            let cut = cut_phase(profile.row(0));
            let v = inst.bundle_value(1, cut.e1).max(inst.bundle_value(1, cut.e2));
            Ok((BidVector(inst.row(1).to_vec()), v))
        }
        _ => Err(Error::usage(format!("agent {agent} out of range"))),
    }
}

/// Builds an equilibrium: agent 2 bids truthfully and agent 1 forces the
/// realizable ordered cut that is best for her given agent 2's choice (ties
/// to the smallest `E1` bitmask).
pub fn mcc_construct_pne(inst: &Instance, budget: &SearchBudget) -> Result<(BidVector, BidVector, EquilibriumCertificate)> {
    require_two_agents(inst)?;
    let m = inst.m();
    let cuts = realizable_cuts(m, budget)?;
    let v1 = subset_sums(inst.row(0));
    let v2 = subset_sums(inst.row(1));
    let mut best: Option<(GoodSet, GoodSet, &Rational)> = None;
    for &(e1, e2) in &cuts {
        let takes_e2 = v2[e2.bits() as usize] > v2[e1.bits() as usize];
        let mine = if takes_e2 { e1 } else { e2 };
        let v = &v1[mine.bits() as usize];
        if best.is_none_or(|(_, _, b)| v > b) {
            best = Some((e1, e2, v));
        }
    }
    let (e1, e2, _) = best.expect("(M, ∅) is always realizable");
    let b1 = realizing_bid(e1, e2, m)?.expect("realizable");
    let b2 = BidVector(inst.row(1).to_vec());
    let cert = mcc_verify_pne(inst, &BidProfile(vec![b1.clone(), b2.clone()]), budget)?;
    Ok((b1, b2, cert))
}
