//! The two allocation mechanisms: Round-Robin picking and the modified
//! cut-and-choose for two agents. Both see bids only, never true values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{induced_ranking, Allocation, BidProfile, BidVector, GoodSet, Ranking};
use crate::rational::Rational;

/// One pick of a Round-Robin run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PickStep {
    /// 1-based round number.
    pub round: usize,
    pub agent: usize,
    pub good: usize,
    /// Goods still available right before this pick.
    pub available: GoodSet,
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize)]
pub struct PickTrace {
    pub steps: Vec<PickStep>,
}

impl PickTrace {
    /// Available sets `M_1 ⊇ … ⊇ M_{m+1}`.
    pub fn history(&self) -> Vec<GoodSet> {
        let mut out: Vec<GoodSet> = self.steps.iter().map(|s| s.available).collect();
        let last = self
            .steps
            .last()
            .map_or(GoodSet::EMPTY, |s| s.available.without(s.good));
        out.push(last);
        out
    }
}

pub fn check_order(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n || !order.iter().all(|&i| i < n && !std::mem::replace(&mut seen[i], true)) {
        return Err(Error::usage(format!("agent order {order:?} is not a permutation of 0..{n}")));
    }
    Ok(())
}

pub fn identity_order(n: usize) -> Vec<usize> {
    (0..n).collect()
}

/// Round-Robin over bids: in each round agents act in `order`, each taking the
/// available good with the highest bid (ties to the lowest good index).
pub fn round_robin(profile: &BidProfile, order: &[usize]) -> Result<(Allocation, PickTrace)> {
    let n = profile.n();
    if n == 0 {
        return Err(Error::usage("round-robin needs at least one agent"));
    }
    let m = profile.row(0).len();
    if profile.0.iter().any(|b| b.len() != m) {
        return Err(Error::usage("bid rows have different lengths"));
    }
    check_order(order, n)?;
    let rankings = profile.rankings();
    Ok(round_robin_rankings(&rankings, order))
}

/// Round-Robin driven directly by strict rankings. The outcome of
/// [`round_robin`] depends on bids only through their induced rankings, so
/// this is the same mechanism. `order` must be a permutation of agents.
pub fn round_robin_rankings(rankings: &[Ranking], order: &[usize]) -> (Allocation, PickTrace) {
    let n = rankings.len();
    let m = rankings.first().map_or(0, Ranking::len);
    let mut bundles = vec![GoodSet::EMPTY; n];
    let mut available = GoodSet::full(m);
    let mut cursor = vec![0usize; n];
    let mut steps = Vec::with_capacity(m);
    for t in 0..m {
        let agent = order[t % n];
        let r = &rankings[agent].0;
        while !available.contains(r[cursor[agent]]) {
            cursor[agent] += 1;
        }
        let good = r[cursor[agent]];
        steps.push(PickStep {
            round: t / n + 1,
            agent,
            good,
            available,
        });
        available.remove(good);
        bundles[agent].insert(good);
    }
    (Allocation::new(bundles), PickTrace { steps })
}

/// Allocation-only kernel for exhaustive searches. `out[i]` receives agent
/// `i`'s bundle as a bitmask; `cursor` is scratch space of length `n`.
pub(crate) fn round_robin_masks(
    rankings: &[&[usize]],
    order: &[usize],
    m: usize,
    cursor: &mut [usize],
    out: &mut [u64],
) {
    let n = rankings.len();
    cursor.fill(0);
    out.fill(0);
    let mut taken = 0u64;
    for t in 0..m {
        let agent = order[t % n];
        let r = rankings[agent];
        let mut c = cursor[agent];
        while taken >> r[c] & 1 == 1 {
            c += 1;
        }
        let g = r[c];
        cursor[agent] = c + 1;
        taken |= 1 << g;
        out[agent] |= 1 << g;
    }
}

/// One insertion of the cut phase.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutStep {
    pub good: usize,
    /// 1 or 2.
    pub bundle: u8,
    pub sum_before: [Rational; 2],
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CutResult {
    pub e1: GoodSet,
    pub e2: GoodSet,
    /// Bundle taken by agent 2 (1 or 2); 0 until a choice is made.
    pub chosen: u8,
    pub steps: Vec<CutStep>,
}

/// Cut phase: goods in decreasing order of `b1` (ties by index) each join the
/// bundle with the smaller `b1`-sum, ties going to `E1`.
pub fn cut_phase(b1: &BidVector) -> CutResult {
    let order = induced_ranking(b1);
    let mut sets = [GoodSet::EMPTY; 2];
    let mut sums = [Rational::zero(), Rational::zero()];
    let mut steps = Vec::with_capacity(order.len());
    for &g in &order.0 {
        let j = usize::from(sums[1] < sums[0]);
        steps.push(CutStep {
            good: g,
            bundle: j as u8 + 1,
            sum_before: sums.clone(),
        });
        sets[j].insert(g);
        sums[j] += b1.get(g);
    }
    CutResult {
        e1: sets[0],
        e2: sets[1],
        chosen: 0,
        steps,
    }
}

/// Agent 2's choice on a fixed cut: the bundle with the larger `b2`-sum,
/// ties to `E1`. Returns 1 or 2.
pub fn choose(b2: &BidVector, e1: GoodSet, e2: GoodSet) -> u8 {
    if b2.sum(e2) > b2.sum(e1) {
        2
    } else {
        1
    }
}

/// Allocation produced when agent 2 takes bundle `chosen` of the cut.
pub fn cut_allocation(e1: GoodSet, e2: GoodSet, chosen: u8) -> Allocation {
    let taken = if chosen == 2 { e2 } else { e1 };
    let rest = if chosen == 2 { e1 } else { e2 };
    Allocation::new(vec![rest, taken])
}

/// Modified cut-and-choose for two agents.
pub fn mod_cut_and_choose(profile: &BidProfile) -> Result<(Allocation, CutResult)> {
    if profile.n() != 2 {
        return Err(Error::usage(format!(
            "cut-and-choose is defined for exactly 2 agents, got {}",
            profile.n()
        )));
    }
    let (b1, b2) = (profile.row(0), profile.row(1));
    if b1.len() != b2.len() {
        return Err(Error::usage("bid rows have different lengths"));
    }
    let mut cut = cut_phase(b1);
    cut.chosen = choose(b2, cut.e1, cut.e2);
    Ok((cut_allocation(cut.e1, cut.e2, cut.chosen), cut))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn set(goods: &[usize]) -> GoodSet {
        goods.iter().copied().collect()
    }

    fn bids(rows: &[&[i64]]) -> BidProfile {
        BidProfile(rows.iter().map(|r| BidVector::from_integers(r)).collect())
    }

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn bv(s: &[&str]) -> BidVector {
        BidVector(s.iter().map(|x| q(x)).collect())
    }

    #[test]
    fn worked_example_truthful() {
        let (alloc, trace) = round_robin(&bids(&[&[6, 5, 4], &[4, 6, 5]]), &[0, 1]).unwrap();
        assert_eq!(alloc.bundles, vec![set(&[0, 2]), set(&[1])]);
        let picks: Vec<usize> = trace.steps.iter().map(|s| s.good).collect();
        assert_eq!(picks, vec![0, 1, 2]);
    }

    #[test]
    fn worked_example_manipulated() {
        let (alloc, _) = round_robin(&bids(&[&[5, 6, 4], &[4, 6, 5]]), &[0, 1]).unwrap();
        assert_eq!(alloc.bundles, vec![set(&[0, 1]), set(&[2])]);
    }

    #[test]
    fn single_agent_takes_everything() {
        let (alloc, _) = round_robin(&bids(&[&[3, 1, 2, 0]]), &[0]).unwrap();
        assert_eq!(alloc.bundles, vec![GoodSet::full(4)]);
    }

    #[test]
    fn all_zero_bids_alternate_by_index() {
        let (alloc, _) = round_robin(&bids(&[&[0; 4], &[0; 4]]), &[0, 1]).unwrap();
        assert_eq!(alloc.bundles, vec![set(&[0, 2]), set(&[1, 3])]);
    }

    #[test]
    fn order_parameter_is_respected() {
        let (alloc, trace) = round_robin(&bids(&[&[6, 5, 4], &[4, 6, 5]]), &[1, 0]).unwrap();
        assert_eq!(trace.steps[0].agent, 1);
        assert_eq!(alloc.bundles, vec![set(&[0]), set(&[1, 2])]);
        assert!(round_robin(&bids(&[&[1], &[1]]), &[0, 0]).is_err());
    }

    #[test]
    fn empty_goods() {
        let (alloc, trace) = round_robin(&bids(&[&[], &[]]), &[0, 1]).unwrap();
        assert_eq!(alloc, Allocation::empty(2));
        assert_eq!(trace.history(), vec![GoodSet::EMPTY]);
    }

    #[test]
    fn cut_phase_examples() {
        let c = cut_phase(&BidVector::zeros(3));
        assert_eq!((c.e1, c.e2), (set(&[0, 1, 2]), GoodSet::EMPTY));

        let c = cut_phase(&bv(&["1", "1/2", "1/2"]));
        assert_eq!((c.e1, c.e2), (set(&[0]), set(&[1, 2])));

        let c = cut_phase(&bv(&["1", "1/2", "3/4", "3/4"]));
        assert_eq!((c.e1, c.e2), (set(&[0, 1]), set(&[2, 3])));
    }

    #[test]
    fn cut_and_choose_examples() {
        // both bundles of the balanced v* cut; agent 2 prefers {h2,h3}
        let b1 = bv(&["1", "5/8", "5/8", "1/4"]);
        let c = cut_phase(&b1);
        assert_eq!((c.e1, c.e2), (set(&[0, 3]), set(&[1, 2])));
        let b2 = bv(&["1.2", "1", "1", "0.1"]);
        let (alloc, cut) = mod_cut_and_choose(&BidProfile(vec![b1, b2])).unwrap();
        assert_eq!(cut.chosen, 2);
        assert_eq!(alloc.bundles, vec![set(&[0, 3]), set(&[1, 2])]);

        for b2 in [bids(&[&[3, 0, 1]]).0[0].clone(), BidVector::zeros(3)] {
            let (alloc, cut) = mod_cut_and_choose(&BidProfile(vec![BidVector::zeros(3), b2])).unwrap();
            assert_eq!(cut.chosen, 1);
            assert_eq!(alloc.bundles, vec![GoodSet::EMPTY, GoodSet::full(3)]);
        }

        let (alloc, cut) = mod_cut_and_choose(&bids(&[&[1], &[1]])).unwrap();
        assert_eq!((cut.e1, cut.e2, cut.chosen), (set(&[0]), GoodSet::EMPTY, 1));
        assert_eq!(alloc.bundles, vec![GoodSet::EMPTY, set(&[0])]);

        assert!(mod_cut_and_choose(&bids(&[&[1]])).is_err());
    }

    fn arb_profile() -> impl Strategy<Value = (BidProfile, Vec<usize>)> {
        (1usize..4, 0usize..8).prop_flat_map(|(n, m)| {
            (
                proptest::collection::vec(proptest::collection::vec(0i64..6, m), n),
                Just((0..n).collect::<Vec<usize>>()).prop_shuffle(),
            )
                .prop_map(|(rows, order)| {
                    (BidProfile(rows.iter().map(|r| BidVector::from_integers(r)).collect()), order)
                })
        })
    }

    proptest! {
        #[test]
        fn round_robin_is_complete_and_balanced((profile, order) in arb_profile()) {
            let n = profile.n();
            let m = profile.row(0).len();
            let (alloc, trace) = round_robin(&profile, &order).unwrap();
            let mut union = GoodSet::EMPTY;
            for b in &alloc.bundles {
                prop_assert!(b.is_disjoint(union));
                union = union.union(*b);
                prop_assert!(b.len() == m / n || b.len() == m.div_ceil(n));
            }
            prop_assert_eq!(union, GoodSet::full(m));
            prop_assert_eq!(trace.steps.len(), m);
            let hist = trace.history();
            for (t, w) in hist.windows(2).enumerate() {
                prop_assert_eq!(w[0].len(), m - t);
                prop_assert_eq!(w[1].len() + 1, w[0].len());
                prop_assert!(w[1].is_subset(w[0]));
            }
            let (again, trace2) = round_robin(&profile, &order).unwrap();
            prop_assert_eq!(again, alloc);
            prop_assert_eq!(trace2, trace);
        }

        #[test]
        fn round_robin_depends_on_rankings_only((profile, order) in arb_profile(), scale in 1i64..9, shift in 0i64..5) {
            // strictly increasing transform of every row preserves induced rankings
            let moved = BidProfile(profile.0.iter().map(|b| BidVector(
                b.0.iter().map(|x| x * &Rational::new(scale, 3) + Rational::from_integer(shift)).collect()
            )).collect());
            prop_assert_eq!(moved.rankings(), profile.rankings());
            prop_assert_eq!(round_robin(&moved, &order).unwrap().0, round_robin(&profile, &order).unwrap().0);
        }

        #[test]
        fn cut_phase_is_balanced(row in proptest::collection::vec(0i64..10, 0..10), b2 in proptest::collection::vec(0i64..10, 10)) {
            let m = row.len();
            let b1 = BidVector::from_integers(&row);
            let cut = cut_phase(&b1);
            prop_assert!(cut.e1.is_disjoint(cut.e2));
            prop_assert_eq!(cut.e1.union(cut.e2), GoodSet::full(m));
            for s in &cut.steps {
                let [x, y] = &s.sum_before;
                if s.bundle == 1 { prop_assert!(x <= y) } else { prop_assert!(y < x) }
            }
            let profile = BidProfile(vec![b1, BidVector::from_integers(&b2[..m])]);
            let (alloc, _) = mod_cut_and_choose(&profile).unwrap();
            prop_assert!(alloc.bundles[0].is_disjoint(alloc.bundles[1]));
            prop_assert_eq!(alloc.bundles[0].union(alloc.bundles[1]), GoodSet::full(m));
        }
    }
}
