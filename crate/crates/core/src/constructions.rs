//! Proof-carrying constructions on Round-Robin: tie-breaking perturbations,
//! partial slides with their history traces, and the round-by-round
//! construction of a truthful valuation equivalent to a best response.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mechanisms::{check_order, identity_order, round_robin, round_robin_rankings, PickTrace};
use crate::model::{induced_ranking_of, Allocation, BidProfile, BidVector, GoodSet, Instance, Ranking};
use crate::rational::Rational;
use crate::strategy::{rr_best_response, SearchBudget};

/// A strict valuation close to, and consistent with, the original one.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PerturbationResult {
    pub v_prime: Vec<Rational>,
    /// Smallest positive gap between two goods' values (1 if there is none).
    pub epsilon: Rational,
    /// Goods whose value is shared with some other good.
    pub modified_goods: GoodSet,
    /// The lone zero-valued good raised to ε/3, when that option is on.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lifted_zero: Option<usize>,
}

/// Breaks ties in `row` given the agent's bundle `own`.
///
/// Good `g_j` (1-based `j`) with a shared value gains `j·ε/(3m²)` if it is in
/// `own` and `j·ε/(6m⁵)` otherwise. With `lift_single_zero`, a good that is the
/// only zero is set to `ε/3`; that keeps values positive but can turn a best
/// response into a non-best response.
pub fn perturb_row(row: &[Rational], own: GoodSet, lift_single_zero: bool) -> PerturbationResult {
    let m = row.len();
    let mut epsilon: Option<Rational> = None;
    let mut shared = GoodSet::EMPTY;
    for g in 0..m {
        for h in g + 1..m {
            let d = (&row[g] - &row[h]).abs();
            if d.is_zero() {
                shared.insert(g);
                shared.insert(h);
            } else if epsilon.as_ref().is_none_or(|e| d < *e) {
                epsilon = Some(d);
            }
        }
    }
    let epsilon = epsilon.unwrap_or_else(Rational::one);
    let mm = Rational::from_integer(m as i64);
    let in_bundle = &epsilon / (Rational::from_integer(3) * &mm * &mm);
    let outside = &epsilon / (Rational::from_integer(6) * &mm * &mm * &mm * &mm * &mm);
    let mut v_prime = row.to_vec();
    for g in shared.iter() {
        let j = Rational::from_integer(g as i64 + 1);
        let step = if own.contains(g) { &in_bundle } else { &outside };
        v_prime[g] += &(j * step);
    }
    let mut lifted_zero = None;
    if lift_single_zero {
        let zeros: Vec<usize> = (0..m).filter(|&g| row[g].is_zero()).collect();
        if let [z] = zeros[..] {
            v_prime[z] = &epsilon / Rational::from_integer(3);
            lifted_zero = Some(z);
        }
    }
    PerturbationResult {
        v_prime,
        epsilon,
        modified_goods: shared,
        lifted_zero,
    }
}

/// Perturbs agent `agent`'s valuation, with her bundle taken from
/// Round-Robin on `profile`.
pub fn perturb_to_strict(
    inst: &Instance,
    agent: usize,
    profile: &BidProfile,
    order: &[usize],
    lift_single_zero: bool,
) -> Result<PerturbationResult> {
    profile.check(inst)?;
    if agent >= inst.n() {
        return Err(Error::usage(format!("agent {agent} out of range")));
    }
    let (alloc, _) = round_robin(profile, order)?;
    Ok(perturb_row(inst.row(agent), alloc.bundle(agent), lift_single_zero))
}

/// Perturbs every agent's valuation (bundles from Round-Robin on `profile`).
pub fn perturb_instance(inst: &Instance, profile: &BidProfile, order: &[usize], lift_single_zero: bool) -> Result<Instance> {
    profile.check(inst)?;
    let (alloc, _) = round_robin(profile, order)?;
    let rows = (0..inst.n())
        .map(|i| perturb_row(inst.row(i), alloc.bundle(i), lift_single_zero).v_prime)
        .collect();
    Instance::new(rows, inst.good_names().to_vec())
}

/// Moves the element at position `x` to just after position `y` (0-based,
/// `x < y`), keeping every other relative order.
pub fn partial_slide(r: &Ranking, x: usize, y: usize) -> Result<Ranking> {
    if x >= y {
        return Err(Error::usage(format!("partial slide needs x < y, got x = {x}, y = {y}")));
    }
    if y >= r.len() {
        return Err(Error::usage(format!("position {y} out of range for {} goods", r.len())));
    }
    let mut out = Vec::with_capacity(r.len());
    out.extend_from_slice(&r.0[..x]);
    out.extend_from_slice(&r.0[x + 1..=y]);
    out.push(r.0[x]);
    out.extend_from_slice(&r.0[y + 1..]);
    Ok(Ranking(out))
}

/// Available sets `M_1 ⊇ … ⊇ M_{m+1}` of a Round-Robin run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct HistoryTrace {
    pub sets: Vec<GoodSet>,
}

impl HistoryTrace {
    fn from_trace(trace: &PickTrace) -> Self {
        HistoryTrace { sets: trace.history() }
    }

    /// Largest `|M_t ∖ M'_t|` over `t`, or `None` if some step has
    /// `|M_t ∖ M'_t| ≠ |M'_t ∖ M_t|` or the traces have different lengths.
    pub fn max_difference(&self, other: &HistoryTrace) -> Option<usize> {
        if self.sets.len() != other.sets.len() {
            return None;
        }
        let mut worst = 0;
        for (a, b) in self.sets.iter().zip(&other.sets) {
            let (ab, ba) = (a.difference(*b).len(), b.difference(*a).len());
            if ab != ba {
                return None;
            }
            worst = worst.max(ab);
        }
        Some(worst)
    }
}

pub fn history_trace(profile: &BidProfile, order: &[usize]) -> Result<HistoryTrace> {
    let (_, trace) = round_robin(profile, order)?;
    Ok(HistoryTrace::from_trace(&trace))
}

pub fn history_trace_rankings(rankings: &[Ranking], order: &[usize]) -> Result<HistoryTrace> {
    check_order(order, rankings.len())?;
    let m = rankings.first().map_or(0, Ranking::len);
    if rankings.iter().any(|r| r.len() != m || !r.is_permutation()) {
        return Err(Error::usage("rankings must be permutations of the same goods"));
    }
    let (_, trace) = round_robin_rankings(rankings, order);
    Ok(HistoryTrace::from_trace(&trace))
}

/// One round of the truthful-equivalent construction, recorded after it ran.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstructionStep {
    /// 1-based round.
    pub round: usize,
    /// 1 when agent 1's pick already is the most valuable available good;
    /// 2 when value is moved onto it from her later picks.
    pub case: u8,
    /// Agent 1's pick `h_{n_r}` in this round.
    pub pick: usize,
    /// Most valuable available good at the start of the round (`λ_r`).
    pub lambda: usize,
    /// Goods whose bids were raised to just above the pick.
    pub moved_up: Vec<usize>,
    /// `ℓ_i` for the later rounds: the best good another agent takes.
    pub losses: Vec<Option<usize>>,
    /// `ε_i` for the later rounds.
    pub epsilons: Vec<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Rational>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Rational>,
    pub alpha_retries: usize,
    /// `b^r` and `v^r` at the end of the round.
    pub bid: BidVector,
    pub values: Vec<Rational>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConstructionState {
    /// Agent 1's picks `h_{n_1}, …, h_{n_k}` in round order.
    pub picks: Vec<usize>,
    /// 0-based positions `n_r` of the picks in her original ranking.
    pub pick_positions: Vec<usize>,
    /// Steps from the last round down to the first.
    pub steps: Vec<ConstructionStep>,
}

/// Result of [`construct_truthful_equivalent`]. Every field has been
/// re-verified by simulation before it is returned.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TruthfulEquivalent {
    pub v1_star: Vec<Rational>,
    pub b1_star: BidVector,
    pub allocation: Allocation,
    pub state: ConstructionState,
}

struct RoundView {
    available: GoodSet,
    own: usize,
    others: Vec<usize>,
}

fn rounds_of(trace: &PickTrace) -> Vec<RoundView> {
    let mut out: Vec<RoundView> = Vec::new();
    for s in &trace.steps {
        if s.agent == 0 {
            out.push(RoundView {
                available: s.available,
                own: s.good,
                others: Vec::new(),
            });
        } else if let Some(last) = out.last_mut() {
            last.others.push(s.good);
        }
    }
    out
}

fn argmax(goods: impl IntoIterator<Item = usize>, val: &[Rational]) -> Option<usize> {
    goods
        .into_iter()
        .fold(None, |acc, g| match acc {
            Some(b) if val[b] >= val[g] => Some(b),
            _ => Some(g),
        })
}

fn min_gap(val: &[Rational]) -> Option<Rational> {
    let mut sorted = val.to_vec();
    sorted.sort();
    sorted.windows(2).map(|w| &w[1] - &w[0]).min()
}

fn all_distinct(val: &[Rational]) -> bool {
    min_gap(val).is_none_or(|d| d.is_positive())
}

/// Rebuilds agent 1's bids from `values` being played for the goods in
/// `truthful`, everything else unchanged.
struct Run<'a> {
    profile: &'a BidProfile,
    order: Vec<usize>,
    allocation: &'a Allocation,
    picks: &'a [usize],
}

impl Run<'_> {
    fn preserves(&self, bid: &[Rational]) -> bool {
        let p = self.profile.with_row(0, BidVector(bid.to_vec()));
        let Ok((alloc, trace)) = round_robin(&p, &self.order) else {
            return false;
        };
        let own: Vec<usize> = trace.steps.iter().filter(|s| s.agent == 0).map(|s| s.good).collect();
        alloc == *self.allocation && own == self.picks
    }
}

fn fail(round: usize, message: impl Into<String>) -> Error {
    Error::Construction {
        round,
        message: message.into(),
    }
}

/// For a profile in which agent 1 (index 0) best-responds, builds a valuation
/// `v1*` whose truthful bid yields the same Round-Robin allocation, agrees
/// with `v1` off her bundle and gives her bundle the same total value.
///
/// Requires agent 1 to have strict values and to move first. Her bid is first
/// replaced by the strict bid of its induced ranking (which Round-Robin cannot
/// tell apart), then rewritten round by round from the last one. Every round
/// re-checks: the bundle total and the values off the bundle are unchanged,
/// the bid is truthful from the current pick on, the ranking prefix before
/// the previous pick is intact, all values are distinct, and the allocation
/// is unchanged.
pub fn construct_truthful_equivalent(
    inst: &Instance,
    profile: &BidProfile,
    budget: &SearchBudget,
) -> Result<TruthfulEquivalent> {
    profile.check(inst)?;
    let (n, m) = (inst.n(), inst.m());
    if !inst.is_strict(0) {
        return Err(Error::usage("agent 1's values must be pairwise distinct; perturb them first"));
    }
    let order = identity_order(n);
    let rankings = profile.rankings();
    let (_, best) = rr_best_response(inst, 0, &rankings, &order, budget)?;
    let (allocation, trace) = round_robin(profile, &order)?;
    let own = allocation.bundle(0);
    let v1 = inst.row(0).to_vec();
    if inst.bundle_value(0, own) < best {
        return Err(Error::usage(format!(
            "agent 1's bid is not a best response (gets {}, can get {best})",
            inst.bundle_value(0, own)
        )));
    }

    let rounds = rounds_of(&trace);
    let picks: Vec<usize> = rounds.iter().map(|r| r.own).collect();
    let original = &rankings[0];
    let original_pos = original.positions();
    let pick_positions: Vec<usize> = picks.iter().map(|&g| original_pos[g]).collect();
    let run = Run {
        profile,
        order,
        allocation: &allocation,
        picks: &picks,
    };

    let mut bid: Vec<Rational> = original.to_bid().0;
    let mut val = v1.clone();
    let mut steps = Vec::with_capacity(rounds.len());
    let k = rounds.len();

    for r in (0..k).rev() {
        let round = r + 1;
        let h = picks[r];
        let lam = argmax(rounds[r].available.iter(), &val).expect("agent 1 picks from a non-empty set");

        // raise the goods below h that beat λ_r to just above h
        let ranking = induced_ranking_of(&bid);
        let pos = ranking.positions();
        let moved: Vec<usize> = ranking.0[pos[h] + 1..]
            .iter()
            .copied()
            .filter(|&g| val[g] > val[lam])
            .collect();
        let lower = bid[h].clone();
        let upper = match pos[h] {
            0 => &lower + &Rational::one(),
            p => bid[ranking.0[p - 1]].clone(),
        };
        let slots = Rational::from_integer(moved.len() as i64 + 1);
        for (j, &g) in moved.iter().enumerate() {
            let frac = Rational::from_integer((moved.len() - j) as i64) / &slots;
            bid[g] = &lower + &((&upper - &lower) * frac);
        }
        if !run.preserves(&bid) {
            return Err(fail(round, "raising bids above the pick changed the allocation"));
        }
        let ranking = induced_ranking_of(&bid);
        let ph = ranking.positions()[h];
        let base = bid[h].clone();
        if !base.is_positive() {
            return Err(fail(round, "the pick's bid is not positive"));
        }

        let mut step = ConstructionStep {
            round,
            case: 1,
            pick: h,
            lambda: lam,
            moved_up: moved,
            losses: Vec::new(),
            epsilons: Vec::new(),
            epsilon: None,
            delta: None,
            alpha: None,
            alpha_retries: 0,
            bid: BidVector(Vec::new()),
            values: Vec::new(),
        };

        if h == lam {
            let target = val[lam].clone();
            for &g in &ranking.0[..ph] {
                bid[g] = if target.is_positive() {
                    &bid[g] * &target / &base
                } else {
                    &bid[g] - &base + &target
                };
            }
            for &g in &ranking.0[ph..] {
                bid[g] = val[g].clone();
            }
        } else {
            if r + 1 == k {
                return Err(fail(
                    round,
                    "in the last round the pick is not the most valuable available good",
                ));
            }
            step.case = 2;
            let delta = min_gap(&val).expect("case 2 needs two goods");
            let target = &val[lam] + &(&delta / Rational::from_integer(2));
            for &g in &ranking.0[..=ph] {
                bid[g] = &bid[g] * &target / &base;
            }
            for &g in &ranking.0[ph + 1..] {
                bid[g] = val[g].clone();
            }
            if !run.preserves(&bid) {
                return Err(fail(round, "rescaling around the pick changed the allocation"));
            }

            // second-best target for each later round: max{v(h_{n_{i+1}}), v(ℓ_i)}, or 0
            let mut floors = Vec::with_capacity(k - r - 1);
            for i in r + 1..k {
                let lam_i = argmax(rounds[i].available.iter(), &val).expect("non-empty");
                if lam_i != picks[i] {
                    return Err(fail(
                        round,
                        format!("round {} pick is not the most valuable available good", i + 1),
                    ));
                }
                let loss = argmax(rounds[i].others.iter().copied(), &val);
                let next = if i + 1 < k {
                    Some(picks[i + 1])
                } else {
                    argmax(rounds[i].available.without(picks[i]).iter(), &val)
                };
                let floor = [next, loss]
                    .into_iter()
                    .flatten()
                    .map(|g| val[g].clone())
                    .max()
                    .unwrap_or_else(Rational::zero);
                step.epsilons.push(&val[lam_i] - &floor);
                step.losses.push(loss);
                floors.push(floor);
            }
            let total: Rational = step.epsilons.iter().sum();
            let eps = &total - &val[lam] + &val[h];
            if !eps.is_positive() {
                return Err(fail(
                    round,
                    format!("no slack to move value (ε = {eps}): taking λ_r now ties with the best response"),
                ));
            }
            let small = eps.clone().min(delta.clone()) / Rational::from_integer(3);
            let mut alpha = (&eps - &small) / &total;
            let bound = &eps / &total;
            let mut retries = 0;
            let next_val = loop {
                let mut nv = val.clone();
                for (j, i) in (r + 1..k).enumerate() {
                    nv[picks[i]] = &floors[j] + &(&alpha * &step.epsilons[j]);
                }
                nv[h] = &val[lam] + &eps - &(&alpha * &total);
                if all_distinct(&nv) {
                    break nv;
                }
                retries += 1;
                if retries > m * m {
                    return Err(fail(round, "could not avoid a value collision"));
                }
                alpha = alpha.midpoint(&bound);
            };
            val = next_val;
            for &g in &ranking.0[ph..] {
                bid[g] = val[g].clone();
            }
            step.epsilon = Some(eps);
            step.delta = Some(delta);
            step.alpha = Some(alpha);
            step.alpha_retries = retries;
        }

        check_round(round, r, &bid, &val, &v1, own, &picks, original, &run)?;
        step.bid = BidVector(bid.clone());
        step.values = val.clone();
        steps.push(step);
    }

    if bid != val {
        return Err(fail(1, "final bid is not truthful"));
    }
    let truthful = profile.with_row(0, BidVector(val.clone()));
    let (again, _) = round_robin(&truthful, &run.order)?;
    if again != allocation {
        return Err(fail(1, "truthful play of v1* changes the allocation"));
    }
    let star = inst.with_row(0, val.clone())?;
    let own_star = star.bundle_value(0, own);
    if own_star != inst.bundle_value(0, own) {
        return Err(fail(1, "bundle value changed"));
    }
    if (0..m).any(|g| !own.contains(g) && val[g] != v1[g]) {
        return Err(fail(1, "a value outside agent 1's bundle changed"));
    }
    if (0..n).any(|j| star.bundle_value(0, allocation.bundle(j)) > own_star) {
        return Err(fail(1, "agent 1 envies a bundle under v1*"));
    }

    Ok(TruthfulEquivalent {
        b1_star: BidVector(val.clone()),
        v1_star: val,
        allocation,
        state: ConstructionState {
            picks,
            pick_positions,
            steps,
        },
    })
}

#[allow(clippy::too_many_arguments)]
fn check_round(
    round: usize,
    r: usize,
    bid: &[Rational],
    val: &[Rational],
    v1: &[Rational],
    own: GoodSet,
    picks: &[usize],
    original: &Ranking,
    run: &Run<'_>,
) -> Result<()> {
    let total: Rational = own.iter().map(|g| &val[g]).sum();
    let before: Rational = own.iter().map(|g| &v1[g]).sum();
    if total != before {
        return Err(fail(round, "(i) bundle value changed"));
    }
    if (0..val.len()).any(|g| !own.contains(g) && val[g] != v1[g]) {
        return Err(fail(round, "(ii) a value outside the bundle changed"));
    }
    let ranking = induced_ranking_of(bid);
    let pos = ranking.positions();
    if ranking.0[pos[picks[r]]..].iter().any(|&g| bid[g] != val[g]) {
        return Err(fail(round, "(iii) bid is not truthful from the current pick on"));
    }
    if r > 0 {
        let upto = original.positions()[picks[r - 1]];
        if ranking.0[..=upto] != original.0[..=upto] {
            return Err(fail(round, "(iv) ranking prefix changed"));
        }
    }
    if !all_distinct(val) {
        return Err(fail(round, "(v) two goods share a value"));
    }
    if !run.preserves(bid) {
        return Err(fail(round, "allocation changed"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::{all_rankings, rr_best_response};
    use proptest::prelude::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn set(goods: &[usize]) -> GoodSet {
        goods.iter().copied().collect()
    }

    fn row(s: &[&str]) -> Vec<Rational> {
        s.iter().map(|x| q(x)).collect()
    }

    #[test]
    fn strict_rows_are_unchanged() {
        let r = perturb_row(&row(&["3", "1", "2"]), set(&[0]), false);
        assert_eq!(r.v_prime, row(&["3", "1", "2"]));
        assert_eq!(r.modified_goods, GoodSet::EMPTY);
        assert_eq!(r.epsilon, q("1"));
    }

    #[test]
    fn two_tied_goods() {
        let r = perturb_row(&row(&["1", "1"]), set(&[0]), false);
        assert_eq!(r.epsilon, q("1"));
        assert_eq!(r.v_prime, vec![q("1") + q("1/12"), q("1") + q("2/192")]);
    }

    #[test]
    fn two_zeros_need_no_lift() {
        let r = perturb_row(&row(&["0", "0", "5"]), GoodSet::EMPTY, true);
        assert_eq!(r.modified_goods, set(&[0, 1]));
        assert_eq!(r.lifted_zero, None);
        assert_eq!(r.epsilon, q("5"));
        assert!(r.v_prime[0] > q("0") && r.v_prime[1] > r.v_prime[0]);
    }

    #[test]
    fn single_zero_lift() {
        let r = perturb_row(&row(&["0", "1", "2", "3"]), set(&[1, 2]), true);
        assert_eq!(r.lifted_zero, Some(0));
        assert_eq!(r.v_prime[0], q("1/3"));
        let plain = perturb_row(&row(&["0", "1", "2", "3"]), set(&[1, 2]), false);
        assert_eq!(plain.v_prime[0], q("0"));
    }

    #[test]
    fn lift_can_break_a_best_response() {
        // {g1, g4} is a best response for agent 1, but lifting g2 makes {g2, g3} better
        let inst = Instance::from_integers(&[&[2, 0, 8, 6], &[1, 1, 1, 1], &[1, 1, 1, 1]]).unwrap();
        let p = vec![Ranking(vec![3, 0, 1, 2]), Ranking(vec![2, 0, 1, 3]), Ranking(vec![3, 2, 1, 0])];
        let order = [0, 1, 2];
        let (alloc, _) = round_robin_rankings(&p, &order);
        assert_eq!(alloc.bundle(0), set(&[0, 3]));
        let b = SearchBudget::default();
        let (_, best) = rr_best_response(&inst, 0, &p, &order, &b).unwrap();
        assert_eq!(best, q("8"));
        let lifted = perturb_row(inst.row(0), alloc.bundle(0), true).v_prime;
        let inst2 = inst.with_row(0, lifted).unwrap();
        let (_, best2) = rr_best_response(&inst2, 0, &p, &order, &b).unwrap();
        assert!(best2 > inst2.bundle_value(0, alloc.bundle(0)));
    }

    #[test]
    fn slide_examples() {
        let r = Ranking(vec![0, 1, 2]);
        assert_eq!(partial_slide(&r, 0, 1).unwrap().0, vec![1, 0, 2]);
        let r = Ranking(vec![0, 1, 2, 3]);
        assert_eq!(partial_slide(&r, 0, 3).unwrap().0, vec![1, 2, 3, 0]);
        assert!(partial_slide(&r, 2, 2).is_err());
        assert!(partial_slide(&r, 2, 1).is_err());
        assert!(partial_slide(&r, 0, 4).is_err());
    }

    #[test]
    fn worked_example_trace() {
        let inst = Instance::from_integers(&[&[6, 5, 4], &[4, 6, 5]]).unwrap();
        let t = history_trace(&inst.truthful_bids(), &[0, 1]).unwrap();
        assert_eq!(t.sets, vec![set(&[0, 1, 2]), set(&[1, 2]), set(&[2]), GoodSet::EMPTY]);
        let empty = BidProfile(vec![BidVector::zeros(0), BidVector::zeros(0)]);
        assert_eq!(history_trace(&empty, &[0, 1]).unwrap().sets, vec![GoodSet::EMPTY]);
    }

    #[test]
    fn truthful_strict_is_a_fixed_point() {
        let inst = Instance::from_integers(&[&[9, 2, 7, 4, 1], &[3, 8, 6, 5, 2]]).unwrap();
        let out = construct_truthful_equivalent(&inst, &inst.truthful_bids(), &SearchBudget::default()).unwrap();
        assert_eq!(out.v1_star, inst.row(0).to_vec());
        assert!(out.state.steps.iter().all(|s| s.case == 1));
    }

    #[test]
    fn worked_example_construction() {
        let inst = Instance::from_integers(&[&[6, 5, 4], &[4, 6, 5]]).unwrap();
        let profile = BidProfile(vec![BidVector::from_integers(&[5, 6, 4]), BidVector::from_integers(&[4, 6, 5])]);
        let out = construct_truthful_equivalent(&inst, &profile, &SearchBudget::default()).unwrap();
        assert_eq!(out.allocation.bundle(0), set(&[0, 1]));
        assert_eq!(out.v1_star[0].clone() + out.v1_star[1].clone(), q("11"));
        assert_eq!(out.v1_star[2], q("4"));
        assert_eq!(out.v1_star, row(&["14/3", "19/3", "4"]));
        assert_eq!(out.state.picks, vec![1, 0]);
        assert_eq!(out.state.steps.iter().map(|s| s.case).collect::<Vec<_>>(), vec![1, 2]);
    }

    #[test]
    fn construction_preconditions() {
        let b = SearchBudget::default();
        let ties = Instance::from_integers(&[&[1, 1, 2], &[1, 2, 3]]).unwrap();
        assert!(matches!(
            construct_truthful_equivalent(&ties, &ties.truthful_bids(), &b),
            Err(Error::Usage(_))
        ));
        let inst = Instance::from_integers(&[&[6, 5, 4], &[4, 6, 5]]).unwrap();
        let bad = BidProfile(vec![BidVector::from_integers(&[1, 2, 3]), BidVector::from_integers(&[4, 6, 5])]);
        assert!(matches!(
            construct_truthful_equivalent(&inst, &bad, &b),
            Err(Error::Usage(_))
        ));
    }

    fn arb_strict_instance(n: std::ops::Range<usize>, m: std::ops::Range<usize>) -> impl Strategy<Value = Instance> {
        (n, m).prop_flat_map(|(n, m)| {
            let first = Just((1..=12i64).collect::<Vec<_>>()).prop_shuffle().prop_map(move |v| v[..m].to_vec());
            let rest = proptest::collection::vec(proptest::collection::vec(0i64..10, m), n - 1);
            (first, rest).prop_map(|(first, rest)| {
                let mut rows = vec![first];
                rows.extend(rest);
                let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
                Instance::from_integers(&refs).unwrap()
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn perturbation_properties(
            vals in proptest::collection::vec(0i64..5, 1..6),
            mask in any::<u64>(),
            lift in any::<bool>(),
        ) {
            let r: Vec<Rational> = vals.iter().map(|&v| Rational::from_integer(v)).collect();
            let m = r.len();
            let own = GoodSet::from_bits(mask).intersection(GoodSet::full(m));
            let p = perturb_row(&r, own, lift);
            prop_assert!(all_distinct(&p.v_prime));
            for g in 0..m {
                for h in 0..m {
                    if r[g] > r[h] {
                        prop_assert!(p.v_prime[g] > p.v_prime[h]);
                    }
                }
            }
            let cap = if lift { &p.epsilon * &q("2/3") } else { &p.epsilon / &q("3") };
            for bits in 0..1u64 << m {
                let t = GoodSet::from_bits(bits);
                let a: Rational = t.iter().map(|g| &r[g]).sum();
                let b: Rational = t.iter().map(|g| &p.v_prime[g]).sum();
                prop_assert!(a <= b && b <= &a + &cap);
            }
        }

        #[test]
        fn perturbation_keeps_best_responses(
            rows in proptest::collection::vec(proptest::collection::vec(0i64..4, 4), 2..3),
            other in Just(vec![0usize, 1, 2, 3]).prop_shuffle(),
        ) {
            let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
            let inst = Instance::from_integers(&refs).unwrap();
            let b = SearchBudget::default();
            let order = [0, 1];
            let mut p = vec![Ranking::identity(4), Ranking(other)];
            let (br, _) = rr_best_response(&inst, 0, &p, &order, &b).unwrap();
            p[0] = br;
            let (alloc, _) = round_robin_rankings(&p, &order);
            let v2 = perturb_row(inst.row(0), alloc.bundle(0), false).v_prime;
            let inst2 = inst.with_row(0, v2).unwrap();
            let (_, best2) = rr_best_response(&inst2, 0, &p, &order, &b).unwrap();
            prop_assert_eq!(best2, inst2.bundle_value(0, alloc.bundle(0)));
        }

        #[test]
        fn slides_move_traces_by_at_most_one(
            n in 1usize..4,
            m in 2usize..7,
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let all: Vec<Ranking> = (0..n).map(|_| {
                let mut v: Vec<usize> = (0..m).collect();
                v.shuffle(&mut rng);
                Ranking(v)
            }).collect();
            let agent = rng.gen_range(0..n);
            let x = rng.gen_range(0..m - 1);
            let y = rng.gen_range(x + 1..m);
            let mut slid = all.clone();
            slid[agent] = partial_slide(&all[agent], x, y).unwrap();
            let order: Vec<usize> = (0..n).collect();
            let a = history_trace_rankings(&all, &order).unwrap();
            let b = history_trace_rankings(&slid, &order).unwrap();
            prop_assert!(a.max_difference(&b).is_some_and(|d| d <= 1));
            for (t, s) in a.sets.iter().enumerate() {
                prop_assert_eq!(s.len(), m - t);
            }
        }

        #[test]
        fn construction_on_best_responses(
            inst in arb_strict_instance(2..4, 1..6),
            seed in any::<u64>(),
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let (n, m) = (inst.n(), inst.m());
            let mut p: Vec<Ranking> = (0..n).map(|_| {
                let mut v: Vec<usize> = (0..m).collect();
                v.shuffle(&mut rng);
                Ranking(v)
            }).collect();
            let order = identity_order(n);
            let b = SearchBudget::default();
            let (br, _) = rr_best_response(&inst, 0, &p, &order, &b).unwrap();
            p[0] = br;
            let profile = BidProfile(p.iter().map(Ranking::to_bid).collect());
            let out = match construct_truthful_equivalent(&inst, &profile, &b) {
                Ok(out) => out,
                Err(Error::Construction { message, .. }) if message.starts_with("no slack") => {
                    // only a tie between two different best bundles can leave no slack
                    let mut best_bundles = std::collections::BTreeSet::new();
                    let mut q = p.clone();
                    for r in all_rankings(m) {
                        q[0] = r;
                        let (a, _) = round_robin_rankings(&q, &order);
                        if inst.bundle_value(0, a.bundle(0)) == inst.bundle_value(0, {
                            round_robin_rankings(&p, &order).0.bundle(0)
                        }) {
                            best_bundles.insert(a.bundle(0).bits());
                        }
                    }
                    prop_assert!(best_bundles.len() >= 2);
                    return Ok(());
                }
                Err(e) => return Err(TestCaseError::fail(format!("{e:?}"))),
            };
            let (alloc, _) = round_robin(&profile.with_row(0, out.b1_star.clone()), &order).unwrap();
            prop_assert_eq!(&alloc, &out.allocation);
            let own = alloc.bundle(0);
            let before: Rational = own.iter().map(|g| inst.value(0, g)).sum();
            let after: Rational = own.iter().map(|g| &out.v1_star[g]).sum();
            prop_assert_eq!(before, after);
            for g in 0..m {
                if !own.contains(g) {
                    prop_assert_eq!(&out.v1_star[g], inst.value(0, g));
                }
            }
        }
    }

    /// Agent 1 holds two goods; every v1* keeping her bundle total and her
    /// values elsewhere is `(t, total - t)` on the bundle. The induced ranking
    /// only changes where `t` or `total - t` meets another good's value, so
    /// trying every such point and every midpoint covers all of them.
    fn some_v1_star_keeps(inst: &Instance, p: &[Ranking], order: &[usize]) -> bool {
        let (alloc, _) = round_robin_rankings(p, order);
        let own = alloc.bundle(0).to_vec();
        assert_eq!(own.len(), 2);
        let total = inst.bundle_value(0, alloc.bundle(0));
        let mut cuts = vec![Rational::zero(), total.clone()];
        for g in 0..inst.m() {
            if !own.contains(&g) {
                cuts.push(inst.value(0, g).clone());
                cuts.push(&total - inst.value(0, g));
            }
        }
        cuts.retain(|c| !c.is_negative() && *c <= total);
        cuts.sort();
        cuts.dedup();
        let mut points = cuts.clone();
        points.extend(cuts.windows(2).map(|w| w[0].midpoint(&w[1])));
        points.into_iter().any(|t| {
            let mut star = inst.row(0).to_vec();
            star[own[1]] = &total - &t;
            star[own[0]] = t;
            let profile = BidProfile(
                std::iter::once(BidVector(star))
                    .chain(p[1..].iter().map(Ranking::to_bid))
                    .collect(),
            );
            round_robin(&profile, order).unwrap().0 == alloc
        })
    }

    #[test]
    fn tied_best_response_has_no_truthful_equivalent() {
        let inst = Instance::from_integers(&[&[11, 10, 9, 5, 8], &[0; 5], &[0; 5]]).unwrap();
        let p = vec![
            Ranking(vec![1, 2, 3, 4, 0]),
            Ranking(vec![1, 3, 2, 4, 0]),
            Ranking(vec![1, 0, 2, 4, 3]),
        ];
        let order = [0, 1, 2];
        let b = SearchBudget::default();
        let (alloc, _) = round_robin_rankings(&p, &order);
        assert_eq!(alloc.bundle(0), set(&[1, 2]));
        let (_, best) = rr_best_response(&inst, 0, &p, &order, &b).unwrap();
        assert_eq!(best, q("19"));
        assert!(!some_v1_star_keeps(&inst, &p, &order));
        let profile = BidProfile(p.iter().map(Ranking::to_bid).collect());
        let err = construct_truthful_equivalent(&inst, &profile, &b).unwrap_err();
        assert!(matches!(err, Error::Construction { round: 1, .. }));

        // the same game with the indices of the 11 and the 10 swapped does have one
        let inst = Instance::from_integers(&[&[10, 9, 5, 8, 11], &[0; 5], &[0; 5]]).unwrap();
        let p = vec![
            Ranking(vec![0, 1, 2, 3, 4]),
            Ranking(vec![0, 2, 1, 3, 4]),
            Ranking(vec![0, 4, 1, 3, 2]),
        ];
        assert!(some_v1_star_keeps(&inst, &p, &order));
    }

    #[test]
    fn every_best_response_of_small_games_constructs() {
        // exhaustive over opponent rankings for one instance per shape
        let b = SearchBudget::default();
        for rows in [
            vec![vec![5i64, 3, 8, 1], vec![2, 9, 4, 7]],
            vec![vec![1, 2, 3, 4, 5], vec![5, 4, 3, 2, 1]],
            vec![vec![7, 1, 4, 6], vec![6, 5, 1, 2], vec![3, 3, 9, 0]],
        ] {
            let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
            let inst = Instance::from_integers(&refs).unwrap();
            let (n, m) = (inst.n(), inst.m());
            let order = identity_order(n);
            for opp in all_rankings(m) {
                let mut p = vec![opp.clone(); n];
                let (br, _) = rr_best_response(&inst, 0, &p, &order, &b).unwrap();
                p[0] = br;
                let profile = BidProfile(p.iter().map(Ranking::to_bid).collect());
                construct_truthful_equivalent(&inst, &profile, &b).unwrap();
            }
        }
    }
}
