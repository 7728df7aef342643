//! Domain model: instances, bids, rankings, good sets and allocations.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::Rational;

/// Hard cap on the number of goods, imposed by the bitset representation.
pub const MAX_GOODS: usize = 64;

/// A set of goods, stored as a bitmask over good indices `0..m`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct GoodSet(u64);

impl GoodSet {
    pub const EMPTY: GoodSet = GoodSet(0);

    pub fn from_bits(bits: u64) -> Self {
        GoodSet(bits)
    }

    pub fn bits(self) -> u64 {
        self.0
    }

    /// All goods `0..m`.
    pub fn full(m: usize) -> Self {
        assert!(m <= MAX_GOODS);
        if m == MAX_GOODS {
            GoodSet(u64::MAX)
        } else {
            GoodSet((1u64 << m) - 1)
        }
    }

    pub fn singleton(g: usize) -> Self {
        GoodSet(1u64 << g)
    }

    pub fn contains(self, g: usize) -> bool {
        g < MAX_GOODS && self.0 >> g & 1 == 1
    }

    pub fn insert(&mut self, g: usize) {
        self.0 |= 1u64 << g;
    }

    pub fn remove(&mut self, g: usize) {
        self.0 &= !(1u64 << g);
    }

    pub fn with(self, g: usize) -> Self {
        GoodSet(self.0 | 1u64 << g)
    }

    pub fn without(self, g: usize) -> Self {
        GoodSet(self.0 & !(1u64 << g))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: GoodSet) -> Self {
        GoodSet(self.0 | other.0)
    }

    pub fn intersection(self, other: GoodSet) -> Self {
        GoodSet(self.0 & other.0)
    }

    pub fn difference(self, other: GoodSet) -> Self {
        GoodSet(self.0 & !other.0)
    }

    pub fn is_disjoint(self, other: GoodSet) -> bool {
        self.0 & other.0 == 0
    }

    pub fn is_subset(self, other: GoodSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Lowest good index in the set.
    pub fn first(self) -> Option<usize> {
        (self.0 != 0).then(|| self.0.trailing_zeros() as usize)
    }

    /// Good indices in ascending order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let g = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(g)
            }
        })
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for GoodSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = GoodSet::EMPTY;
        for g in iter {
            s.insert(g);
        }
        s
    }
}

/// Serialized as the ascending list of 0-based good indices.
impl Serialize for GoodSet {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.iter())
    }
}

impl fmt::Debug for GoodSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// `n` agents, `m` goods and an exact non-negative valuation matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    values: Vec<Vec<Rational>>,
    good_names: Vec<String>,
}

impl Instance {
    /// Builds an instance, checking dimensions and non-negativity.
    pub fn new(values: Vec<Vec<Rational>>, good_names: Vec<String>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::usage("an instance needs at least one agent"));
        }
        let m = good_names.len();
        if m > MAX_GOODS {
            return Err(Error::usage(format!("at most {MAX_GOODS} goods are supported, got {m}")));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != m {
                return Err(Error::usage(format!(
                    "valuation row {i} has {} entries, expected {m}",
                    row.len()
                )));
            }
            if let Some(j) = row.iter().position(Rational::is_negative) {
                return Err(Error::usage(format!("valuation of agent {i} for good {j} is negative")));
            }
        }
        Ok(Instance { values, good_names })
    }

    /// Instance with goods named `g1..gm`.
    pub fn from_values(values: Vec<Vec<Rational>>) -> Result<Self> {
        let m = values.first().map_or(0, Vec::len);
        Instance::new(values, default_good_names(m))
    }

    /// Convenience constructor for integer-valued instances.
    pub fn from_integers(values: &[&[i64]]) -> Result<Self> {
        Instance::from_values(
            values
                .iter()
                .map(|row| row.iter().map(|&v| Rational::from_integer(v)).collect())
                .collect(),
        )
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn m(&self) -> usize {
        self.good_names.len()
    }

    pub fn goods(&self) -> GoodSet {
        GoodSet::full(self.m())
    }

    pub fn good_names(&self) -> &[String] {
        &self.good_names
    }

    pub fn good_index(&self, name: &str) -> Option<usize> {
        self.good_names.iter().position(|g| g == name)
    }

    pub fn values(&self) -> &[Vec<Rational>] {
        &self.values
    }

    pub fn row(&self, agent: usize) -> &[Rational] {
        &self.values[agent]
    }

    pub fn value(&self, agent: usize, good: usize) -> &Rational {
        &self.values[agent][good]
    }

    /// Additive value of `bundle` for `agent`.
    pub fn value_of(&self, agent: usize, bundle: GoodSet) -> Result<Rational> {
        if agent >= self.n() {
            return Err(Error::usage(format!("agent {agent} out of range (n = {})", self.n())));
        }
        if !bundle.is_subset(self.goods()) {
            return Err(Error::usage(format!("bundle {bundle:?} contains unknown goods (m = {})", self.m())));
        }
        Ok(self.bundle_value(agent, bundle))
    }

    /// Unchecked variant of [`Instance::value_of`]; panics on a bad agent index.
    pub fn bundle_value(&self, agent: usize, bundle: GoodSet) -> Rational {
        let row = &self.values[agent];
        bundle.iter().map(|g| &row[g]).sum()
    }

    /// True if `agent` values no two goods the same.
    pub fn is_strict(&self, agent: usize) -> bool {
        let mut row: Vec<&Rational> = self.values[agent].iter().collect();
        row.sort();
        row.windows(2).all(|w| w[0] != w[1])
    }

    pub fn truthful_bids(&self) -> BidProfile {
        BidProfile(self.values.iter().cloned().map(BidVector).collect())
    }

    /// Same goods, with `agent`'s valuation row replaced.
    pub fn with_row(&self, agent: usize, row: Vec<Rational>) -> Result<Instance> {
        let mut values = self.values.clone();
        values[agent] = row;
        Instance::new(values, self.good_names.clone())
    }
}

pub fn default_good_names(m: usize) -> Vec<String> {
    (1..=m).map(|j| format!("g{j}")).collect()
}

/// One agent's reported values.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BidVector(pub Vec<Rational>);

impl BidVector {
    pub fn zeros(m: usize) -> Self {
        BidVector(vec![Rational::zero(); m])
    }

    pub fn from_integers(bids: &[i64]) -> Self {
        BidVector(bids.iter().map(|&b| Rational::from_integer(b)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, good: usize) -> &Rational {
        &self.0[good]
    }

    pub fn sum(&self, bundle: GoodSet) -> Rational {
        bundle.iter().map(|g| &self.0[g]).sum()
    }
}

/// Reported bids of all agents, one row each.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BidProfile(pub Vec<BidVector>);

impl BidProfile {
    pub fn n(&self) -> usize {
        self.0.len()
    }

    pub fn row(&self, agent: usize) -> &BidVector {
        &self.0[agent]
    }

    /// Checks the profile against an instance's dimensions and sign constraints.
    pub fn check(&self, inst: &Instance) -> Result<()> {
        if self.n() != inst.n() {
            return Err(Error::usage(format!(
                "bid profile has {} rows, instance has {} agents",
                self.n(),
                inst.n()
            )));
        }
        for (i, row) in self.0.iter().enumerate() {
            if row.len() != inst.m() {
                return Err(Error::usage(format!(
                    "bid row {i} has {} entries, instance has {} goods",
                    row.len(),
                    inst.m()
                )));
            }
            if row.0.iter().any(Rational::is_negative) {
                return Err(Error::usage(format!("bid row {i} has a negative entry")));
            }
        }
        Ok(())
    }

    pub fn with_row(&self, agent: usize, row: BidVector) -> BidProfile {
        let mut rows = self.0.clone();
        rows[agent] = row;
        BidProfile(rows)
    }

    pub fn rankings(&self) -> Vec<Ranking> {
        self.0.iter().map(induced_ranking).collect()
    }
}

/// Strict preference order over goods, most preferred first.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ranking(pub Vec<usize>);

impl Ranking {
    pub fn identity(m: usize) -> Self {
        Ranking((0..m).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_permutation(&self) -> bool {
        let m = self.0.len();
        let mut seen = vec![false; m];
        self.0
            .iter()
            .all(|&g| g < m && !std::mem::replace(&mut seen[g], true))
    }

    /// `pos[g]` is the position of good `g` in the ranking.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.0.len()];
        for (p, &g) in self.0.iter().enumerate() {
            pos[g] = p;
        }
        pos
    }

    /// A bid inducing this ranking: the good at position `p` bids `m - p`.
    pub fn to_bid(&self) -> BidVector {
        let m = self.0.len();
        let mut bids = vec![Rational::zero(); m];
        for (p, &g) in self.0.iter().enumerate() {
            bids[g] = Rational::from_integer((m - p) as i64);
        }
        BidVector(bids)
    }
}

impl fmt::Debug for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(&self.0).finish()
    }
}

/// Goods by decreasing bid; equal bids resolved towards the lower good index.
pub fn induced_ranking(bids: &BidVector) -> Ranking {
    induced_ranking_of(&bids.0)
}

pub fn induced_ranking_of(values: &[Rational]) -> Ranking {
    let mut order: Vec<usize> = (0..values.len()).collect();
    // stable sort keeps ascending index order among equal bids
    order.sort_by(|&a, &b| values[b].cmp(&values[a]));
    Ranking(order)
}

/// A partition of the goods into `n` (possibly empty) bundles.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct Allocation {
    pub bundles: Vec<GoodSet>,
}

impl Allocation {
    pub fn new(bundles: Vec<GoodSet>) -> Self {
        Allocation { bundles }
    }

    pub fn empty(n: usize) -> Self {
        Allocation {
            bundles: vec![GoodSet::EMPTY; n],
        }
    }

    pub fn n(&self) -> usize {
        self.bundles.len()
    }

    pub fn bundle(&self, agent: usize) -> GoodSet {
        self.bundles[agent]
    }

    /// Checks that bundles are pairwise disjoint and cover every good of `inst`.
    pub fn check(&self, inst: &Instance) -> Result<()> {
        if self.n() != inst.n() {
            return Err(Error::usage(format!(
                "allocation has {} bundles, instance has {} agents",
                self.n(),
                inst.n()
            )));
        }
        let mut seen = GoodSet::EMPTY;
        for (i, &b) in self.bundles.iter().enumerate() {
            if !b.is_subset(inst.goods()) {
                return Err(Error::usage(format!("bundle {i} contains unknown goods")));
            }
            if !b.is_disjoint(seen) {
                return Err(Error::usage(format!("bundle {i} overlaps an earlier bundle")));
            }
            seen = seen.union(b);
        }
        if seen != inst.goods() {
            return Err(Error::usage(format!(
                "allocation is incomplete: goods {:?} unassigned",
                inst.goods().difference(seen)
            )));
        }
        Ok(())
    }

    pub fn owner(&self, good: usize) -> Option<usize> {
        self.bundles.iter().position(|b| b.contains(good))
    }

    /// `values[i]` = v_i(A_i).
    pub fn values(&self, inst: &Instance) -> Vec<Rational> {
        (0..self.n())
            .map(|i| inst.bundle_value(i, self.bundles[i]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn value_of_examples() {
        let inst = Instance::from_values(vec![vec![q("1.2"), q("1"), q("1"), q("0.1")]]).unwrap();
        let b: GoodSet = [1, 2].into_iter().collect();
        assert_eq!(inst.value_of(0, b).unwrap(), q("2"));
        assert_eq!(inst.value_of(0, GoodSet::EMPTY).unwrap(), Rational::zero());

        let inst = Instance::from_integers(&[&[6, 5, 4], &[4, 6, 5]]).unwrap();
        let ac: GoodSet = [0, 2].into_iter().collect();
        assert_eq!(inst.value_of(0, ac).unwrap(), q("10"));
        assert!(matches!(inst.value_of(2, ac), Err(Error::Usage(_))));
        assert!(matches!(inst.value_of(0, GoodSet::singleton(3)), Err(Error::Usage(_))));
    }

    #[test]
    fn induced_ranking_examples() {
        assert_eq!(induced_ranking(&BidVector::from_integers(&[5, 6, 4])).0, vec![1, 0, 2]);
        assert_eq!(induced_ranking(&BidVector::from_integers(&[0, 0, 0])).0, vec![0, 1, 2]);
        assert_eq!(induced_ranking(&BidVector::from_integers(&[1, 1, 2])).0, vec![2, 0, 1]);
    }

    #[test]
    fn instance_rejects_bad_shapes() {
        assert!(Instance::from_integers(&[&[1, 2], &[1]]).is_err());
        assert!(Instance::from_integers(&[&[1, -2]]).is_err());
        assert!(Instance::from_values(vec![]).is_err());
        let empty = Instance::from_values(vec![vec![], vec![]]).unwrap();
        assert_eq!(empty.m(), 0);
        Allocation::empty(2).check(&empty).unwrap();
    }

    #[test]
    fn allocation_check() {
        let inst = Instance::from_integers(&[&[1, 1, 1], &[1, 1, 1]]).unwrap();
        let ok = Allocation::new(vec![GoodSet::from_bits(0b101), GoodSet::from_bits(0b010)]);
        ok.check(&inst).unwrap();
        let overlap = Allocation::new(vec![GoodSet::from_bits(0b101), GoodSet::from_bits(0b011)]);
        assert!(overlap.check(&inst).is_err());
        let missing = Allocation::new(vec![GoodSet::from_bits(0b001), GoodSet::from_bits(0b010)]);
        assert!(missing.check(&inst).is_err());
    }

    #[test]
    fn ranking_bid_round_trip() {
        let r = Ranking(vec![2, 0, 3, 1]);
        assert_eq!(induced_ranking(&r.to_bid()), r);
        assert_eq!(r.positions(), vec![1, 3, 0, 2]);
    }

    proptest! {
        #[test]
        fn value_is_additive(row in proptest::collection::vec(0i64..50, 0..12), split in any::<u64>()) {
            let m = row.len();
            let inst = Instance::from_integers(&[&row]).unwrap();
            let s = GoodSet::from_bits(split).intersection(inst.goods());
            let t = inst.goods().difference(s);
            prop_assert_eq!(
                inst.bundle_value(0, s) + inst.bundle_value(0, t),
                inst.bundle_value(0, GoodSet::full(m))
            );
        }

        #[test]
        fn induced_ranking_is_sorted_permutation(bids in proptest::collection::vec(0i64..5, 0..10)) {
            let b = BidVector::from_integers(&bids);
            let r = induced_ranking(&b);
            prop_assert!(r.is_permutation());
            for w in r.0.windows(2) {
                let (x, y) = (w[0], w[1]);
                prop_assert!(bids[x] > bids[y] || (bids[x] == bids[y] && x < y));
            }
        }
    }
}
