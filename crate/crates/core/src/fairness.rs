//! Fairness notions for additive valuations and exact maximin shares.
//!
//! Every check reports, per agent, the first violation found when scanning
//! other agents and goods in index order, so reports are deterministic.

use std::ops::{Add, Sub};

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Allocation, GoodSet, Instance};
use crate::rational::{common_denominator, Rational};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Notion {
    Ef,
    Ef1,
    Efx,
    Prop,
    Mms,
}

impl Notion {
    pub fn parse(s: &str) -> Option<Notion> {
        Some(match s.trim().to_ascii_lowercase().as_str() {
            "ef" => Notion::Ef,
            "ef1" => Notion::Ef1,
            "efx" => Notion::Efx,
            "prop" => Notion::Prop,
            "mms" => Notion::Mms,
            _ => return None,
        })
    }
}

/// Evidence that `agent` is not satisfied.
///
/// `own_value` is v_i(A_i); `compared_value` is what it falls short of: the
/// (reduced) envied bundle's value, the proportional share, or α·μ_i.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Witness {
    pub agent: usize,
    pub envied: Option<usize>,
    pub good: Option<usize>,
    pub own_value: Rational,
    pub compared_value: Rational,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AgentVerdict {
    pub agent: usize,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<Witness>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NotionReport {
    pub notion: Notion,
    pub holds: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Rational>,
    pub agents: Vec<AgentVerdict>,
}

impl NotionReport {
    fn from_agents(notion: Notion, alpha: Option<Rational>, witnesses: Vec<(usize, Option<Witness>)>) -> Self {
        let agents: Vec<AgentVerdict> = witnesses
            .into_iter()
            .map(|(agent, witness)| AgentVerdict {
                agent,
                holds: witness.is_none(),
                witness,
            })
            .collect();
        NotionReport {
            notion,
            holds: agents.iter().all(|a| a.holds),
            alpha,
            agents,
        }
    }

    /// First violation, if any.
    pub fn witness(&self) -> Option<&Witness> {
        self.agents.iter().find_map(|a| a.witness.as_ref())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FairnessReport {
    pub holds: bool,
    pub notions: Vec<NotionReport>,
}

/// Agent `i` envies some bundle.
pub fn ef_violation(inst: &Instance, alloc: &Allocation, i: usize) -> Option<Witness> {
    let own = inst.bundle_value(i, alloc.bundle(i));
    (0..alloc.n()).filter(|&j| j != i).find_map(|j| {
        let other = inst.bundle_value(i, alloc.bundle(j));
        (other > own).then(|| Witness {
            agent: i,
            envied: Some(j),
            good: None,
            own_value: own.clone(),
            compared_value: other,
        })
    })
}

/// Agent `i` still envies some bundle after removing her favourite good in it.
pub fn ef1_violation(inst: &Instance, alloc: &Allocation, i: usize) -> Option<Witness> {
    let own = inst.bundle_value(i, alloc.bundle(i));
    (0..alloc.n()).filter(|&j| j != i).find_map(|j| {
        let bundle = alloc.bundle(j);
        // first good of maximal value for i
        let best = bundle
            .iter()
            .fold(None::<usize>, |acc, g| match acc {
                Some(b) if inst.value(i, b) >= inst.value(i, g) => Some(b),
                _ => Some(g),
            })?;
        let reduced = inst.bundle_value(i, bundle.without(best));
        (reduced > own).then(|| Witness {
            agent: i,
            envied: Some(j),
            good: Some(best),
            own_value: own.clone(),
            compared_value: reduced,
        })
    })
}

/// Some positively valued good can be removed from another bundle while agent
/// `i` still envies it. Goods she values at zero are exempt.
pub fn efx_violation(inst: &Instance, alloc: &Allocation, i: usize) -> Option<Witness> {
    let own = inst.bundle_value(i, alloc.bundle(i));
    (0..alloc.n()).filter(|&j| j != i).find_map(|j| {
        let bundle = alloc.bundle(j);
        let total = inst.bundle_value(i, bundle);
        bundle
            .iter()
            .filter(|&g| inst.value(i, g).is_positive())
            .find_map(|g| {
                let reduced = &total - inst.value(i, g);
                (reduced > own).then(|| Witness {
                    agent: i,
                    envied: Some(j),
                    good: Some(g),
                    own_value: own.clone(),
                    compared_value: reduced,
                })
            })
    })
}

pub fn prop_violation(inst: &Instance, alloc: &Allocation, i: usize) -> Option<Witness> {
    let own = inst.bundle_value(i, alloc.bundle(i));
    let share = inst.bundle_value(i, inst.goods()) / Rational::from_integer(alloc.n() as i64);
    (own < share).then_some(Witness {
        agent: i,
        envied: None,
        good: None,
        own_value: own,
        compared_value: share,
    })
}

fn per_agent(
    inst: &Instance,
    alloc: &Allocation,
    notion: Notion,
    f: impl Fn(&Instance, &Allocation, usize) -> Option<Witness>,
) -> Result<NotionReport> {
    alloc.check(inst)?;
    let w = (0..inst.n()).map(|i| (i, f(inst, alloc, i))).collect();
    Ok(NotionReport::from_agents(notion, None, w))
}

pub fn is_ef(inst: &Instance, alloc: &Allocation) -> Result<NotionReport> {
    per_agent(inst, alloc, Notion::Ef, ef_violation)
}

pub fn is_prop(inst: &Instance, alloc: &Allocation) -> Result<NotionReport> {
    per_agent(inst, alloc, Notion::Prop, prop_violation)
}

pub fn is_ef1(inst: &Instance, alloc: &Allocation) -> Result<NotionReport> {
    per_agent(inst, alloc, Notion::Ef1, ef1_violation)
}

pub fn is_efx(inst: &Instance, alloc: &Allocation) -> Result<NotionReport> {
    per_agent(inst, alloc, Notion::Efx, efx_violation)
}

/// `v_i(A_i) >= α·μ_i` for every agent, with μ_i the n-maximin share over all goods.
pub fn is_alpha_mms(inst: &Instance, alloc: &Allocation, alpha: &Rational, budget: &MmsBudget) -> Result<NotionReport> {
    alloc.check(inst)?;
    let mut w = Vec::with_capacity(inst.n());
    for i in 0..inst.n() {
        let mu = mms(inst, i, inst.n(), inst.goods(), budget)?.value;
        w.push((i, alpha_mms_violation(inst, alloc, i, alpha, &mu)));
    }
    Ok(NotionReport::from_agents(Notion::Mms, Some(alpha.clone()), w))
}

pub fn alpha_mms_violation(
    inst: &Instance,
    alloc: &Allocation,
    i: usize,
    alpha: &Rational,
    mu: &Rational,
) -> Option<Witness> {
    let own = inst.bundle_value(i, alloc.bundle(i));
    let target = alpha * mu;
    (own < target).then_some(Witness {
        agent: i,
        envied: None,
        good: None,
        own_value: own,
        compared_value: target,
    })
}

/// Evaluates the requested notions. `alpha` applies to MMS (default 1).
pub fn fairness_report(
    inst: &Instance,
    alloc: &Allocation,
    notions: &[Notion],
    alpha: Option<&Rational>,
    budget: &MmsBudget,
) -> Result<FairnessReport> {
    let one = Rational::one();
    let notions = notions
        .iter()
        .map(|n| match n {
            Notion::Ef => is_ef(inst, alloc),
            Notion::Ef1 => is_ef1(inst, alloc),
            Notion::Efx => is_efx(inst, alloc),
            Notion::Prop => is_prop(inst, alloc),
            Notion::Mms => is_alpha_mms(inst, alloc, alpha.unwrap_or(&one), budget),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FairnessReport {
        holds: notions.iter().all(|r| r.holds),
        notions,
    })
}

/// Limits on exhaustive maximin-share enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MmsBudget {
    /// Largest |S| for two-part shares (2^(|S|-1) splits).
    pub max_goods_two_parts: usize,
    /// Largest |S| for three or more parts (set partitions with ≤ n blocks).
    pub max_goods_general: usize,
}

impl Default for MmsBudget {
    fn default() -> Self {
        MmsBudget {
            max_goods_two_parts: 20,
            max_goods_general: 12,
        }
    }
}

/// μ_i(n, S) with a partition attaining it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MmsCertificate {
    pub agent: usize,
    pub n_parts: usize,
    pub value: Rational,
    pub witness_partition: Vec<GoodSet>,
}

/// Exact n-maximin share of `agent` over `subset`, by exhaustive enumeration.
pub fn mms(inst: &Instance, agent: usize, n_parts: usize, subset: GoodSet, budget: &MmsBudget) -> Result<MmsCertificate> {
    if agent >= inst.n() {
        return Err(Error::usage(format!("agent {agent} out of range (n = {})", inst.n())));
    }
    if n_parts == 0 {
        return Err(Error::usage("maximin share needs at least one part"));
    }
    if !subset.is_subset(inst.goods()) {
        return Err(Error::usage("subset contains unknown goods"));
    }
    let goods = subset.to_vec();
    let k = goods.len();
    let limit = if n_parts == 2 {
        budget.max_goods_two_parts
    } else {
        budget.max_goods_general
    };
    if n_parts > 1 && k > limit {
        return Err(Error::budget(
            format!("{n_parts}-part maximin share over {k} goods"),
            k as u128,
            limit as u128,
        ));
    }
    let row: Vec<Rational> = goods.iter().map(|&g| inst.value(agent, g).clone()).collect();

    let (value, blocks) = match IntWeights::from_row(&row) {
        Some(iw) => {
            let (best, blocks) = best_partition(&iw.weights, 0i128, n_parts);
            (Rational::from_big(BigInt::from(best), iw.denom), blocks)
        }
        None => best_partition(&row, Rational::zero(), n_parts),
    };
    let witness_partition = blocks
        .into_iter()
        .map(|b| b.iter().map(|local| goods[local]).collect())
        .collect();
    Ok(MmsCertificate {
        agent,
        n_parts,
        value,
        witness_partition,
    })
}

/// Maximin share of `agent` with `n` parts over all goods.
pub fn maximin_share(inst: &Instance, agent: usize, budget: &MmsBudget) -> Result<MmsCertificate> {
    mms(inst, agent, inst.n(), inst.goods(), budget)
}

/// A valuation row rescaled to integers by its common denominator.
struct IntWeights {
    weights: Vec<i128>,
    denom: BigInt,
}

impl IntWeights {
    fn from_row(row: &[Rational]) -> Option<Self> {
        let denom = common_denominator(row);
        let mut total: i128 = 0;
        let mut weights = Vec::with_capacity(row.len());
        for v in row {
            let w = (v.numer() * (&denom / v.denom())).to_i128()?;
            total = total.checked_add(w)?;
            weights.push(w);
        }
        // sums of up to n copies of the total must not overflow
        total.checked_mul(row.len().max(2) as i128)?;
        Some(IntWeights { weights, denom })
    }
}

/// Best min-block value over partitions of `0..w.len()` into `parts` blocks;
/// returns it with the first partition found attaining it.
fn best_partition<W>(w: &[W], zero: W, parts: usize) -> (W, Vec<GoodSet>)
where
    W: Clone + Ord + Add<Output = W> + Sub<Output = W>,
{
    let k = w.len();
    let total = w.iter().cloned().fold(zero.clone(), |a, b| a + b);
    if parts == 1 {
        return (total, vec![GoodSet::full(k)]);
    }
    if k == 0 {
        return (zero, vec![GoodSet::EMPTY; parts]);
    }
    if parts == 2 {
        return best_two_split(w, zero, total);
    }
    let mut search = PartitionSearch {
        w,
        parts,
        total,
        sums: Vec::with_capacity(parts),
        blocks: Vec::with_capacity(parts),
        best: None,
    };
    search.recurse(0, zero.clone());
    let (best, mut blocks) = search.best.expect("at least one partition exists");
    blocks.resize(parts, GoodSet::EMPTY);
    (best, blocks)
}

/// Two-part splits with item 0 pinned to the first part, visited in Gray-code
/// order so each step moves one item.
fn best_two_split<W>(w: &[W], zero: W, total: W) -> (W, Vec<GoodSet>)
where
    W: Clone + Ord + Add<Output = W> + Sub<Output = W>,
{
    let k = w.len();
    let free = k - 1;
    let mut mask: u64 = 0;
    let mut sum_a = w[0].clone();
    let mut best: Option<(W, u64)> = None;
    let count: u64 = 1 << free;
    let mut i: u64 = 0;
    loop {
        let sum_b = total.clone() - sum_a.clone();
        let lo = if sum_a <= sum_b { sum_a.clone() } else { sum_b };
        if best.as_ref().is_none_or(|(b, _)| lo > *b) {
            let perfect = lo.clone() + lo.clone() == total;
            best = Some((lo, mask));
            if perfect {
                break;
            }
        }
        i += 1;
        if i == count {
            break;
        }
        let bit = i.trailing_zeros() as usize;
        mask ^= 1 << bit;
        let item = &w[bit + 1];
        if mask >> bit & 1 == 1 {
            sum_a = sum_a + item.clone();
        } else {
            sum_a = sum_a - item.clone();
        }
    }
    let _ = zero;
    let (best, mask) = best.expect("loop runs at least once");
    let part_a = GoodSet::from_bits(mask << 1 | 1);
    let part_b = GoodSet::full(k).difference(part_a);
    (best, vec![part_a, part_b])
}

struct PartitionSearch<'a, W> {
    w: &'a [W],
    parts: usize,
    total: W,
    sums: Vec<W>,
    blocks: Vec<GoodSet>,
    best: Option<(W, Vec<GoodSet>)>,
}

impl<W> PartitionSearch<'_, W>
where
    W: Clone + Ord + Add<Output = W> + Sub<Output = W>,
{
    /// Returns true once a partition meeting the proportional bound is found.
    fn recurse(&mut self, item: usize, zero: W) -> bool {
        if item == self.w.len() {
            let lo = if self.blocks.len() < self.parts {
                zero
            } else {
                self.sums.iter().min().cloned().expect("parts >= 1")
            };
            if self.best.as_ref().is_none_or(|(b, _)| lo > *b) {
                let mut scaled = lo.clone();
                for _ in 1..self.parts {
                    scaled = scaled + lo.clone();
                }
                let perfect = scaled == self.total;
                self.best = Some((lo, self.blocks.clone()));
                return perfect;
            }
            return false;
        }
        for b in 0..self.blocks.len() {
            self.blocks[b].insert(item);
            let old = self.sums[b].clone();
            self.sums[b] = old.clone() + self.w[item].clone();
            let done = self.recurse(item + 1, zero.clone());
            self.sums[b] = old;
            self.blocks[b].remove(item);
            if done {
                return true;
            }
        }
        if self.blocks.len() < self.parts {
            self.blocks.push(GoodSet::singleton(item));
            self.sums.push(self.w[item].clone());
            let done = self.recurse(item + 1, zero);
            self.blocks.pop();
            self.sums.pop();
            if done {
                return true;
            }
        }
        false
    }
}
