//! Seeded instance families and batch theorem checks.
//!
//! An experiment expands its [`Family`] into [`Case`]s, checks each case in
//! parallel and collects verdicts in case order. A case that hits a search
//! budget is reported as skipped, never as passed. Every failure carries a
//! counterexample document that [`parse_case`] reads back, so it can be re-run
//! on its own.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::constructions::{construct_truthful_equivalent, history_trace_rankings, partial_slide, perturb_instance};
use crate::error::{Error, Result};
use crate::fairness::{alpha_mms_violation, ef_violation, efx_violation, is_alpha_mms, is_ef1, is_efx, maximin_share};
use crate::io::{allocation_to_json, bids_to_json, instance_to_json, parse_bids, parse_instance, parse_rankings, rankings_to_json};
use crate::mechanisms::{cut_phase, identity_order, mod_cut_and_choose, round_robin, round_robin_rankings};
use crate::model::{Allocation, BidProfile, BidVector, GoodSet, Instance, Ranking};
use crate::rational::Rational;
use crate::strategy::{
    mcc_canonical_bid, mcc_construct_pne, mcc_verify_pne, realizable_cuts, realizing_bid, rr_best_response,
    rr_enumerate_pne, rr_is_pne, SearchBudget,
};

/// The checks the harness knows how to run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TheoremId {
    /// Every Round-Robin PNE is EF1.
    T3_1,
    /// The first picker is envy-free at a best response.
    T3_3,
    /// Cut-and-choose has a PNE, and its PNE are MMS and EFX.
    T4_3,
    /// For two agents, MMS allocations are EFX.
    T2_6,
    /// For two agents, EFX allocations are 2/3-MMS.
    T2_7,
    /// Truthful-equivalent valuation for a best response.
    L3_4,
    /// Partial slides change each history set by at most one good.
    L3_6,
    /// Canonical bids make the cut phase output a chosen partition.
    L4_2,
    /// Two agents, four goods, at most three valued goods: EFX gives μ.
    L4_5,
    /// Round-Robin PNE exist with ties, and survive the tie-breaking perturbation.
    Ta2,
    /// Cut-and-choose PNE with four goods are MMS.
    Mcc4_6,
    /// Cut-and-choose PNE are EFX and better than 2/3-MMS.
    Mcc4_8,
}

impl TheoremId {
    pub const ALL: [TheoremId; 12] = [
        TheoremId::T3_1,
        TheoremId::T3_3,
        TheoremId::T4_3,
        TheoremId::T2_6,
        TheoremId::T2_7,
        TheoremId::L3_4,
        TheoremId::L3_6,
        TheoremId::L4_2,
        TheoremId::L4_5,
        TheoremId::Ta2,
        TheoremId::Mcc4_6,
        TheoremId::Mcc4_8,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TheoremId::T3_1 => "T3.1",
            TheoremId::T3_3 => "T3.3",
            TheoremId::T4_3 => "T4.3",
            TheoremId::T2_6 => "T2.6",
            TheoremId::T2_7 => "T2.7",
            TheoremId::L3_4 => "L3.4",
            TheoremId::L3_6 => "L3.6",
            TheoremId::L4_2 => "L4.2",
            TheoremId::L4_5 => "L4.5",
            TheoremId::Ta2 => "TA.2",
            TheoremId::Mcc4_6 => "MCC-4.6",
            TheoremId::Mcc4_8 => "MCC-4.8",
        }
    }

    /// The family each check runs on unless told otherwise.
    pub fn default_family(self) -> Family {
        let f = Family::default();
        match self {
            TheoremId::T3_1 => Family { goods: (3, 5), ..f },
            TheoremId::T3_3 => Family { agents: (2, 3), goods: (2, 4), ..f },
            TheoremId::T4_3 => Family { goods: (1, 8), count: 300, ..f },
            TheoremId::T2_6 | TheoremId::T2_7 => Family {
                goods: (1, 5),
                values: (0, 2),
                exhaustive: true,
                ..f
            },
            TheoremId::L3_4 => Family {
                agents: (2, 3),
                goods: (1, 5),
                count: 100,
                strict: true,
                ..f
            },
            TheoremId::L3_6 => Family {
                agents: (1, 3),
                goods: (2, 6),
                count: 1000,
                ..f
            },
            TheoremId::L4_2 => Family {
                goods: (1, 10),
                exhaustive: true,
                ..f
            },
            TheoremId::L4_5 => Family {
                goods: (4, 4),
                values: (0, 3),
                exhaustive: true,
                ..f
            },
            TheoremId::Ta2 => Family {
                agents: (2, 3),
                goods: (2, 4),
                values: (0, 5),
                count: 100,
                ties: true,
                ..f
            },
            TheoremId::Mcc4_6 => Family { goods: (4, 4), ..f },
            TheoremId::Mcc4_8 => Family { goods: (1, 6), ..f },
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TheoremId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_uppercase();
        let key = key.strip_prefix("MCC-CONSISTENCY-").map_or(key.clone(), |k| format!("MCC-{k}"));
        TheoremId::ALL
            .into_iter()
            .find(|t| t.as_str() == key)
            .ok_or_else(|| {
                let known: Vec<&str> = TheoremId::ALL.iter().map(|t| t.as_str()).collect();
                Error::usage(format!("unknown theorem id {s:?}; known: {}", known.join(", ")))
            })
    }
}

impl Serialize for TheoremId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

/// A seeded family of instances. Ranges are inclusive.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Family {
    pub agents: (usize, usize),
    pub goods: (usize, usize),
    pub values: (i64, i64),
    /// Ignored when `exhaustive` is set.
    pub count: usize,
    pub seed: u64,
    /// Every agent's values are pairwise distinct (rejection sampling).
    pub strict: bool,
    /// Every agent has at least two goods of equal value.
    pub ties: bool,
    /// Every value matrix over the ranges, in lexicographic order.
    pub exhaustive: bool,
}

impl Default for Family {
    fn default() -> Self {
        Family {
            agents: (2, 2),
            goods: (3, 4),
            values: (0, 9),
            count: 200,
            seed: 0,
            strict: false,
            ties: false,
            exhaustive: false,
        }
    }
}

/// Largest number of cases an exhaustive family may expand to.
pub const MAX_EXHAUSTIVE_CASES: u128 = 5_000_000;

impl Family {
    fn validate(&self) -> Result<()> {
        let (a0, a1) = self.agents;
        let (g0, g1) = self.goods;
        let (v0, v1) = self.values;
        if a0 == 0 || a0 > a1 {
            return Err(Error::usage(format!("invalid agent range {a0}..={a1}")));
        }
        if g0 > g1 || g1 > crate::model::MAX_GOODS {
            return Err(Error::usage(format!("invalid goods range {g0}..={g1}")));
        }
        if v0 < 0 || v0 > v1 {
            return Err(Error::usage(format!("invalid value range {v0}..={v1}")));
        }
        if self.strict && self.ties {
            return Err(Error::usage("a family cannot be both strict and tied"));
        }
        if self.strict && ((v1 - v0 + 1) as u128) < g1 as u128 {
            return Err(Error::usage(format!(
                "strict values need at least {g1} distinct values, range has {}",
                v1 - v0 + 1
            )));
        }
        if self.ties && g0 < 2 {
            return Err(Error::usage("ties need at least two goods"));
        }
        Ok(())
    }
}

/// Caps on the search budgets an experiment may request.
pub fn budget_limits() -> SearchBudget {
    SearchBudget {
        max_goods_best_response: 9,
        max_profiles: 2_000_000,
        max_goods_cut: 20,
        mms: crate::fairness::MmsBudget {
            max_goods_two_parts: 24,
            max_goods_general: 14,
        },
    }
}

fn check_budget(b: &SearchBudget) -> Result<()> {
    let l = budget_limits();
    if b.max_goods_best_response > l.max_goods_best_response
        || b.max_profiles > l.max_profiles
        || b.max_goods_cut > l.max_goods_cut
        || b.mms.max_goods_two_parts > l.mms.max_goods_two_parts
        || b.mms.max_goods_general > l.mms.max_goods_general
    {
        return Err(Error::usage(format!("budget exceeds the harness limits {l:?}")));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ExperimentConfig {
    pub theorem: TheoremId,
    pub family: Family,
    pub budget: SearchBudget,
    /// Record wall-clock time in the report (which then is not reproducible).
    #[serde(skip)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(theorem: TheoremId) -> Self {
        ExperimentConfig {
            theorem,
            family: theorem.default_family(),
            budget: SearchBudget::default(),
            timing: false,
        }
    }
}

/// A partial slide applied to one agent's ranking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct Slide {
    pub agent: usize,
    pub x: usize,
    pub y: usize,
}

/// One self-contained unit of work. Which optional parts are present depends
/// on the theorem; shape-only checks carry an all-zero instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Case {
    pub index: usize,
    pub instance: Instance,
    pub rankings: Option<Vec<Ranking>>,
    pub bids: Option<BidProfile>,
    pub slide: Option<Slide>,
    /// First part of a partition (the rest is its complement).
    pub part: Option<GoodSet>,
}

impl Case {
    fn new(index: usize, instance: Instance) -> Self {
        Case {
            index,
            instance,
            rankings: None,
            bids: None,
            slide: None,
            part: None,
        }
    }

    pub fn to_json(&self, theorem: TheoremId) -> Value {
        let mut doc = json!({
            "theorem": theorem.as_str(),
            "index": self.index,
            "instance": instance_to_json(&self.instance),
        });
        if let Some(r) = &self.rankings {
            doc["profile"] = rankings_to_json(&self.instance, r);
        }
        if let Some(b) = &self.bids {
            doc["profile"] = bids_to_json(b);
        }
        if let Some(s) = &self.slide {
            doc["slide"] = json!(s);
        }
        if let Some(p) = self.part {
            doc["part"] = json!(p);
        }
        doc
    }
}

/// Reads a case document (or a counterexample, which embeds one).
pub fn parse_case(text: &str) -> Result<(TheoremId, Case)> {
    let doc: Value = serde_json::from_str(text).map_err(|e| Error::parse("$", e.to_string()))?;
    let doc = doc.get("case").unwrap_or(&doc);
    let theorem: TheoremId = doc
        .get("theorem")
        .and_then(Value::as_str)
        .ok_or_else(|| Error::parse("theorem", "missing theorem id"))?
        .parse()?;
    let index = doc.get("index").and_then(Value::as_u64).unwrap_or(0) as usize;
    let inst_doc = doc
        .get("instance")
        .ok_or_else(|| Error::parse("instance", "missing field"))?;
    let instance = parse_instance(&inst_doc.to_string())?;
    let mut case = Case::new(index, instance);
    if let Some(p) = doc.get("profile") {
        let text = p.to_string();
        if p.get("rankings").is_some() {
            case.rankings = Some(parse_rankings(&text, &case.instance)?);
        } else {
            case.bids = Some(parse_bids(&text, &case.instance)?);
        }
    }
    if let Some(s) = doc.get("slide") {
        let field = |k: &str| {
            s.get(k)
                .and_then(Value::as_u64)
                .map(|v| v as usize)
                .ok_or_else(|| Error::parse(format!("slide.{k}"), "expected a non-negative integer"))
        };
        case.slide = Some(Slide {
            agent: field("agent")?,
            x: field("x")?,
            y: field("y")?,
        });
    }
    if let Some(p) = doc.get("part") {
        let goods = p
            .as_array()
            .ok_or_else(|| Error::parse("part", "expected an array of good indices"))?;
        let mut set = GoodSet::EMPTY;
        for (j, g) in goods.iter().enumerate() {
            let g = g
                .as_u64()
                .filter(|&g| (g as usize) < case.instance.m())
                .ok_or_else(|| Error::parse(format!("part[{j}]"), "good index out of range"))?;
            set.insert(g as usize);
        }
        case.part = Some(set);
    }
    Ok((theorem, case))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skip,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub status: Status,
    /// The case held only because its hypothesis never applied.
    #[serde(skip_serializing_if = "std::ops::Not::not")]
    pub vacuous: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(skip)]
    pub witness: Option<Value>,
}

impl Verdict {
    fn pass() -> Self {
        Verdict {
            status: Status::Pass,
            vacuous: false,
            detail: None,
            witness: None,
        }
    }

    fn vacuous(detail: impl Into<String>) -> Self {
        Verdict {
            vacuous: true,
            detail: Some(detail.into()),
            ..Verdict::pass()
        }
    }

    fn fail(detail: impl Into<String>, witness: Value) -> Self {
        Verdict {
            status: Status::Fail,
            vacuous: false,
            detail: Some(detail.into()),
            witness: Some(witness),
        }
    }

    fn skip(detail: impl Into<String>) -> Self {
        Verdict {
            status: Status::Skip,
            vacuous: false,
            detail: Some(detail.into()),
            witness: None,
        }
    }

    fn from_error(e: Error) -> Self {
        match e {
            Error::Budget { .. } => Verdict::skip(e.to_string()),
            e => Verdict::fail(e.to_string(), Value::Null),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CaseVerdict {
    pub index: usize,
    #[serde(flatten)]
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub theorem: TheoremId,
    pub config: ExperimentConfig,
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Passed cases whose hypothesis did not apply (included in `passed`).
    pub vacuous: usize,
    pub verdicts: Vec<CaseVerdict>,
    /// `{"case": …, "detail": …, "witness": …}` for every failed case.
    pub counterexamples: Vec<Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub elapsed_ms: Option<u128>,
}

impl ExperimentReport {
    pub fn holds(&self) -> bool {
        self.failed == 0
    }

    /// One line per case: `theorem,index,status,vacuous,detail`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theorem,index,status,vacuous,detail\n");
        for v in &self.verdicts {
            let status = match v.verdict.status {
                Status::Pass => "pass",
                Status::Fail => "fail",
                Status::Skip => "skip",
            };
            let detail = v.verdict.detail.as_deref().unwrap_or("").replace('"', "\"\"");
            out.push_str(&format!(
                "{},{},{},{},\"{}\"\n",
                self.theorem, v.index, status, v.verdict.vacuous, detail
            ));
        }
        out
    }
}

fn random_instance(rng: &mut ChaCha8Rng, n: usize, m: usize, f: &Family) -> Instance {
    let (lo, hi) = f.values;
    let rows: Vec<Vec<i64>> = (0..n)
        .map(|_| loop {
            let mut row: Vec<i64> = (0..m).map(|_| rng.gen_range(lo..=hi)).collect();
            let mut sorted = row.clone();
            sorted.sort_unstable();
            let distinct = sorted.windows(2).all(|w| w[0] != w[1]);
            if f.strict && !distinct {
                continue;
            }
            if f.ties && distinct {
                let g = rng.gen_range(0..m);
                let h = (g + rng.gen_range(1..m)) % m;
                row[h] = row[g];
            }
            break row;
        })
        .collect();
    let refs: Vec<&[i64]> = rows.iter().map(Vec::as_slice).collect();
    Instance::from_integers(&refs).expect("generated rows are valid")
}

fn random_ranking(rng: &mut ChaCha8Rng, m: usize) -> Ranking {
    let mut v: Vec<usize> = (0..m).collect();
    v.shuffle(rng);
    Ranking(v)
}

fn zero_instance(n: usize, m: usize) -> Instance {
    Instance::from_values(vec![vec![Rational::zero(); m]; n]).expect("shape is valid")
}

/// Reproducible instances of a family (seeded; exhaustive families ignore the seed).
pub fn gen_instances(family: &Family) -> Result<Vec<Instance>> {
    family.validate()?;
    if family.exhaustive {
        return exhaustive_instances(family);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(family.seed);
    Ok((0..family.count)
        .map(|_| {
            let n = rng.gen_range(family.agents.0..=family.agents.1);
            let m = rng.gen_range(family.goods.0..=family.goods.1);
            random_instance(&mut rng, n, m, family)
        })
        .collect())
}

fn exhaustive_instances(f: &Family) -> Result<Vec<Instance>> {
    let (lo, hi) = f.values;
    let k = (hi - lo + 1) as u128;
    let mut total: u128 = 0;
    for n in f.agents.0..=f.agents.1 {
        for m in f.goods.0..=f.goods.1 {
            let cells = (n * m) as u32;
            total = total.saturating_add(k.checked_pow(cells).unwrap_or(u128::MAX));
        }
    }
    if total > MAX_EXHAUSTIVE_CASES {
        return Err(Error::budget("exhaustive family", total, MAX_EXHAUSTIVE_CASES));
    }
    let mut out = Vec::with_capacity(total as usize);
    for n in f.agents.0..=f.agents.1 {
        for m in f.goods.0..=f.goods.1 {
            let mut cells = vec![lo; n * m];
            loop {
                let rows: Vec<&[i64]> = cells.chunks(m.max(1)).take(n).collect();
                let inst = if m == 0 {
                    zero_instance(n, 0)
                } else {
                    Instance::from_integers(&rows).expect("grid rows are valid")
                };
                let keep = (!f.strict || (0..n).all(|i| inst.is_strict(i)))
                    && (!f.ties || (0..n).all(|i| !inst.is_strict(i)));
                if keep {
                    out.push(inst);
                }
                // odometer, last cell fastest
                let mut pos = cells.len();
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    if cells[pos] < hi {
                        cells[pos] += 1;
                        break;
                    }
                    cells[pos] = lo;
                }
                if pos == 0 && cells.iter().all(|&c| c == lo) {
                    break;
                }
            }
        }
    }
    Ok(out)
}

/// Expands the configuration into the cases its check runs on.
pub fn gen_cases(config: &ExperimentConfig) -> Result<Vec<Case>> {
    check_budget(&config.budget)?;
    let f = &config.family;
    f.validate()?;
    match config.theorem {
        TheoremId::L4_2 => {
            let mut out = Vec::new();
            for m in f.goods.0..=f.goods.1 {
                for bits in 0..1u64 << m {
                    let mut c = Case::new(out.len(), zero_instance(2, m));
                    c.part = Some(GoodSet::from_bits(bits));
                    out.push(c);
                }
            }
            Ok(out)
        }
        TheoremId::L3_6 => {
            let mut rng = ChaCha8Rng::seed_from_u64(f.seed);
            let lo = f.goods.0.max(2);
            if lo > f.goods.1 {
                return Err(Error::usage("partial slides need at least two goods"));
            }
            Ok((0..f.count)
                .map(|index| {
                    let n = rng.gen_range(f.agents.0..=f.agents.1);
                    let m = rng.gen_range(lo..=f.goods.1);
                    let rankings: Vec<Ranking> = (0..n).map(|_| random_ranking(&mut rng, m)).collect();
                    let agent = rng.gen_range(0..n);
                    let x = rng.gen_range(0..m - 1);
                    let y = rng.gen_range(x + 1..m);
                    let mut c = Case::new(index, zero_instance(n, m));
                    c.rankings = Some(rankings);
                    c.slide = Some(Slide { agent, x, y });
                    c
                })
                .collect())
        }
        TheoremId::L3_4 => {
            let instances = gen_instances(f)?;
            let mut rng = ChaCha8Rng::seed_from_u64(f.seed ^ OPPONENT_SEED_MIX);
            instances
                .into_iter()
                .enumerate()
                .map(|(index, inst)| {
                    let (n, m) = (inst.n(), inst.m());
                    let mut p: Vec<Ranking> = (0..n).map(|_| random_ranking(&mut rng, m)).collect();
                    match rr_best_response(&inst, 0, &p, &identity_order(n), &config.budget) {
                        Ok((br, _)) => p[0] = br,
                        Err(Error::Budget { .. }) => {}
                        Err(e) => return Err(e),
                    }
                    let mut c = Case::new(index, inst);
                    c.rankings = Some(p);
                    Ok(c)
                })
                .collect()
        }
        _ => Ok(gen_instances(f)?
            .into_iter()
            .enumerate()
            .map(|(index, inst)| Case::new(index, inst))
            .collect()),
    }
}

/// Keeps the opponents' rankings of the construction check off the instance stream.
const OPPONENT_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

fn alloc_json(inst: &Instance, alloc: &Allocation) -> Value {
    allocation_to_json(inst, alloc)
}

fn two_way(m: usize, bits: u64) -> Allocation {
    let a = GoodSet::from_bits(bits);
    Allocation::new(vec![a, GoodSet::full(m).difference(a)])
}

/// Runs one theorem check on one case.
pub fn check_case(theorem: TheoremId, case: &Case, budget: &SearchBudget) -> Verdict {
    let r = match theorem {
        TheoremId::T3_1 => check_t3_1(case, budget),
        TheoremId::T3_3 => check_t3_3(case, budget),
        TheoremId::T4_3 => check_t4_3(case, budget),
        TheoremId::T2_6 => check_t2_6(case, budget),
        TheoremId::T2_7 => check_t2_7(case, budget),
        TheoremId::L3_4 => check_l3_4(case, budget),
        TheoremId::L3_6 => check_l3_6(case),
        TheoremId::L4_2 => check_l4_2(case),
        TheoremId::L4_5 => check_l4_5(case, budget),
        TheoremId::Ta2 => check_ta_2(case, budget),
        TheoremId::Mcc4_6 => check_mcc(case, budget, false),
        TheoremId::Mcc4_8 => check_mcc(case, budget, true),
    };
    r.unwrap_or_else(Verdict::from_error)
}

fn check_t3_1(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    let inst = &case.instance;
    let order = identity_order(inst.n());
    let certs = rr_enumerate_pne(inst, &order, budget)?;
    if certs.is_empty() {
        return Ok(Verdict::fail("no pure Nash equilibrium", Value::Null));
    }
    for c in &certs {
        let rep = is_ef1(inst, &c.allocation)?;
        if !rep.holds {
            return Ok(Verdict::fail(
                "a PNE allocation is not EF1",
                json!({"equilibrium": c, "ef1": rep}),
            ));
        }
    }
    Ok(Verdict::pass())
}

fn check_t3_3(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    let inst = &case.instance;
    let n = inst.n();
    let order = identity_order(n);
    let first = order[0];
    for c in rr_enumerate_pne(inst, &order, budget)? {
        if let Some(w) = ef_violation(inst, &c.allocation, first) {
            return Ok(Verdict::fail(
                "the first picker envies at a PNE",
                json!({"equilibrium": c, "witness": w}),
            ));
        }
    }
    // a best response against truthful opponents as well
    let mut p = inst.truthful_bids().rankings();
    let (br, _) = rr_best_response(inst, first, &p, &order, budget)?;
    p[first] = br;
    let (alloc, _) = round_robin_rankings(&p, &order);
    if let Some(w) = ef_violation(inst, &alloc, first) {
        return Ok(Verdict::fail(
            "the first picker envies at a best response to truthful bids",
            json!({"profile": rankings_to_json(inst, &p), "witness": w}),
        ));
    }
    Ok(Verdict::pass())
}

fn mcc_fair(inst: &Instance, alloc: &Allocation, budget: &SearchBudget) -> Result<Option<Value>> {
    let mms = is_alpha_mms(inst, alloc, &Rational::one(), &budget.mms)?;
    let efx = is_efx(inst, alloc)?;
    if mms.holds && efx.holds {
        return Ok(None);
    }
    Ok(Some(json!({"allocation": alloc_json(inst, alloc), "mms": mms, "efx": efx})))
}

fn check_t4_3(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    let inst = &case.instance;
    let (b1, b2, cert) = mcc_construct_pne(inst, budget)?;
    let profile = BidProfile(vec![b1, b2]);
    let again = mcc_verify_pne(inst, &profile, budget)?;
    if !cert.is_pne || !again.is_pne {
        return Ok(Verdict::fail(
            "the constructed profile is not a PNE",
            json!({"certificate": cert, "recheck": again}),
        ));
    }
    let (alloc, _) = mod_cut_and_choose(&profile)?;
    if alloc != cert.allocation {
        return Ok(Verdict::fail("certificate allocation does not match a re-run", json!(cert)));
    }
    if let Some(w) = mcc_fair(inst, &alloc, budget)? {
        return Ok(Verdict::fail("the constructed PNE is not MMS and EFX", w));
    }
    Ok(Verdict::pass())
}

fn mus(inst: &Instance, budget: &SearchBudget) -> Result<Vec<Rational>> {
    (0..inst.n())
        .map(|i| maximin_share(inst, i, &budget.mms).map(|c| c.value))
        .collect()
}

fn require_two(case: &Case) -> Option<Verdict> {
    (case.instance.n() != 2).then(|| Verdict::skip("this check needs exactly two agents"))
}

fn check_t2_6(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    if let Some(v) = require_two(case) {
        return Ok(v);
    }
    let inst = &case.instance;
    let m = inst.m();
    let mu = mus(inst, budget)?;
    let one = Rational::one();
    let mut any = false;
    for bits in 0..1u64 << m {
        let alloc = two_way(m, bits);
        if (0..2).any(|i| alpha_mms_violation(inst, &alloc, i, &one, &mu[i]).is_some()) {
            continue;
        }
        any = true;
        if let Some(w) = (0..2).find_map(|i| efx_violation(inst, &alloc, i)) {
            return Ok(Verdict::fail(
                "an MMS allocation is not EFX",
                json!({"allocation": alloc_json(inst, &alloc), "mms": mu, "witness": w}),
            ));
        }
    }
    Ok(if any {
        Verdict::pass()
    } else {
        Verdict::vacuous("no MMS allocation")
    })
}

/// Smallest `min_i v_i(A_i)/μ_i` over the two-agent EFX allocations (agents
/// with μ_i = 0 impose nothing), with an allocation attaining it.
pub fn efx_min_mms_ratio(inst: &Instance, budget: &SearchBudget) -> Result<Option<(Rational, Allocation)>> {
    if inst.n() != 2 {
        return Err(Error::usage("EFX/MMS ratios are computed for two agents"));
    }
    let m = inst.m();
    let mu = mus(inst, budget)?;
    let mut best: Option<(Rational, Allocation)> = None;
    for bits in 0..1u64 << m {
        let alloc = two_way(m, bits);
        if (0..2).any(|i| efx_violation(inst, &alloc, i).is_some()) {
            continue;
        }
        let ratio = (0..2)
            .filter(|&i| mu[i].is_positive())
            .map(|i| inst.bundle_value(i, alloc.bundle(i)) / &mu[i])
            .min();
        if let Some(r) = ratio {
            if best.as_ref().is_none_or(|(b, _)| r < *b) {
                best = Some((r, alloc));
            }
        }
    }
    Ok(best)
}

fn check_t2_7(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    if let Some(v) = require_two(case) {
        return Ok(v);
    }
    let inst = &case.instance;
    let m = inst.m();
    let mu = mus(inst, budget)?;
    let two_thirds = Rational::new(2, 3);
    for bits in 0..1u64 << m {
        let alloc = two_way(m, bits);
        if (0..2).any(|i| efx_violation(inst, &alloc, i).is_some()) {
            continue;
        }
        if let Some(w) = (0..2).find_map(|i| alpha_mms_violation(inst, &alloc, i, &two_thirds, &mu[i])) {
            return Ok(Verdict::fail(
                "an EFX allocation is not 2/3-MMS",
                json!({"allocation": alloc_json(inst, &alloc), "mms": mu, "witness": w}),
            ));
        }
    }
    Ok(Verdict::pass())
}

fn check_l3_4(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    let inst = &case.instance;
    let p = case
        .rankings
        .as_ref()
        .ok_or_else(|| Error::usage("this check needs a ranking profile"))?;
    let profile = BidProfile(p.iter().map(Ranking::to_bid).collect());
    let out = match construct_truthful_equivalent(inst, &profile, budget) {
        Ok(out) => out,
        Err(e @ Error::Construction { .. }) => {
            return Ok(Verdict::fail(e.to_string(), json!({"profile": rankings_to_json(inst, p)})))
        }
        Err(e) => return Err(e),
    };
    // the three conclusions, re-derived here by simulation
    let order = identity_order(inst.n());
    let (before, _) = round_robin(&profile, &order)?;
    let (after, _) = round_robin(&profile.with_row(0, BidVector(out.v1_star.clone())), &order)?;
    let own = before.bundle(0);
    let star_total: Rational = own.iter().map(|g| &out.v1_star[g]).sum();
    let witness = || json!({"profile": rankings_to_json(inst, p), "v1_star": out.v1_star});
    if after != before {
        return Ok(Verdict::fail("truthful play of v1* changes the allocation", witness()));
    }
    if star_total != inst.bundle_value(0, own) {
        return Ok(Verdict::fail("v1*(A1) differs from v1(A1)", witness()));
    }
    if (0..inst.m()).any(|g| !own.contains(g) && out.v1_star[g] != *inst.value(0, g)) {
        return Ok(Verdict::fail("v1* differs from v1 outside A1", witness()));
    }
    Ok(Verdict::pass())
}

fn check_l3_6(case: &Case) -> Result<Verdict> {
    let (Some(p), Some(s)) = (&case.rankings, case.slide) else {
        return Err(Error::usage("this check needs a ranking profile and a slide"));
    };
    if s.agent >= p.len() {
        return Err(Error::usage("slide agent out of range"));
    }
    let mut slid = p.clone();
    slid[s.agent] = partial_slide(&p[s.agent], s.x, s.y)?;
    let order = identity_order(p.len());
    let a = history_trace_rankings(p, &order)?;
    let b = history_trace_rankings(&slid, &order)?;
    let worst = a
        .sets
        .iter()
        .zip(&b.sets)
        .map(|(x, y)| x.difference(*y).len())
        .max()
        .unwrap_or(0);
    if a.sets.len() != b.sets.len() || worst > 1 {
        return Ok(Verdict::fail(
            format!("history sets differ by {worst} goods"),
            json!({"before": a, "after": b, "slid": slid}),
        ));
    }
    Ok(Verdict::pass())
}

fn check_l4_2(case: &Case) -> Result<Verdict> {
    let m = case.instance.m();
    let x1 = case.part.ok_or_else(|| Error::usage("this check needs a partition"))?;
    let x2 = GoodSet::full(m).difference(x1);
    let bid = mcc_canonical_bid(x1, x2, m)?;
    let cut = cut_phase(&bid);
    let same = (cut.e1 == x1 && cut.e2 == x2) || (cut.e1 == x2 && cut.e2 == x1);
    if !same {
        return Ok(Verdict::fail(
            "the cut phase does not reproduce the partition",
            json!({"bid": bid, "e1": cut.e1, "e2": cut.e2}),
        ));
    }
    Ok(Verdict::pass())
}

fn check_l4_5(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    let inst = &case.instance;
    if inst.n() != 2 || inst.m() != 4 {
        return Ok(Verdict::skip("this check is for two agents and four goods"));
    }
    let mu = mus(inst, budget)?;
    let mut applied = false;
    for i in 0..2 {
        if (0..4).filter(|&g| inst.value(i, g).is_positive()).count() > 3 {
            continue;
        }
        applied = true;
        for bits in 0..16u64 {
            let alloc = two_way(4, bits);
            if efx_violation(inst, &alloc, i).is_none() && inst.bundle_value(i, alloc.bundle(i)) < mu[i] {
                return Ok(Verdict::fail(
                    format!("agent {} is EFX-satisfied below her maximin share", i + 1),
                    json!({"allocation": alloc_json(inst, &alloc), "mms": mu[i]}),
                ));
            }
        }
    }
    Ok(if applied {
        Verdict::pass()
    } else {
        Verdict::vacuous("both agents value all four goods")
    })
}

fn check_ta_2(case: &Case, budget: &SearchBudget) -> Result<Verdict> {
    let inst = &case.instance;
    let order = identity_order(inst.n());
    if rr_enumerate_pne(inst, &order, budget)?.is_empty() {
        return Ok(Verdict::fail("no pure Nash equilibrium", Value::Null));
    }
    let perturbed = perturb_instance(inst, &inst.truthful_bids(), &order, true)?;
    let found = rr_enumerate_pne(&perturbed, &order, budget)?;
    if found.is_empty() {
        return Ok(Verdict::fail(
            "no pure Nash equilibrium after perturbation",
            json!({"perturbed": instance_to_json(&perturbed)}),
        ));
    }
    for c in &found {
        let crate::strategy::StrategyProfile::Rankings(p) = &c.profile else {
            unreachable!("Round-Robin certificates carry rankings")
        };
        let back = rr_is_pne(inst, p, &order, budget)?;
        if !back.is_pne {
            return Ok(Verdict::fail(
                "a PNE of the perturbed instance is not a PNE of the original",
                json!({"perturbed": instance_to_json(&perturbed), "certificate": back}),
            ));
        }
    }
    Ok(Verdict::pass())
}

/// Bid profiles examined for cut-and-choose equilibria: agent 1 plays a
/// realizing bid of every realizable cut; agent 2 plays her truthful bid, the
/// zero bid or the indicator bid of some set of goods.
pub fn mcc_candidate_profiles(inst: &Instance, budget: &SearchBudget) -> Result<Vec<BidProfile>> {
    let m = inst.m();
    let mut b1s = Vec::new();
    for (e1, e2) in realizable_cuts(m, budget)? {
        if let Some(b) = realizing_bid(e1, e2, m)? {
            b1s.push(b);
        }
    }
    let mut b2s = vec![BidVector(inst.row(1).to_vec())];
    for bits in 0..1u64 << m {
        let set = GoodSet::from_bits(bits);
        b2s.push(BidVector(
            (0..m)
                .map(|g| if set.contains(g) { Rational::one() } else { Rational::zero() })
                .collect(),
        ));
    }
    Ok(b1s
        .iter()
        .flat_map(|b1| b2s.iter().map(move |b2| BidProfile(vec![b1.clone(), b2.clone()])))
        .collect())
}

fn check_mcc(case: &Case, budget: &SearchBudget, approx: bool) -> Result<Verdict> {
    if let Some(v) = require_two(case) {
        return Ok(v);
    }
    let inst = &case.instance;
    if !approx && inst.m() != 4 {
        return Ok(Verdict::skip("this check is for four goods"));
    }
    let mu = mus(inst, budget)?;
    let two_thirds = Rational::new(2, 3);
    let mut found = 0usize;
    for profile in mcc_candidate_profiles(inst, budget)? {
        let cert = mcc_verify_pne(inst, &profile, budget)?;
        if !cert.is_pne {
            continue;
        }
        found += 1;
        let alloc = &cert.allocation;
        if approx {
            let efx = is_efx(inst, alloc)?;
            let weak = (0..2).find(|&i| mu[i].is_positive() && inst.bundle_value(i, alloc.bundle(i)) <= &two_thirds * &mu[i]);
            if !efx.holds || weak.is_some() {
                return Ok(Verdict::fail(
                    "a PNE is not EFX with more than 2/3 of the maximin share",
                    json!({"certificate": cert, "mms": mu, "efx": efx}),
                ));
            }
        } else if let Some(i) = (0..2).find(|&i| inst.bundle_value(i, alloc.bundle(i)) < mu[i]) {
            return Ok(Verdict::fail(
                format!("a PNE leaves agent {} below her maximin share", i + 1),
                json!({"certificate": cert, "mms": mu}),
            ));
        }
    }
    if found == 0 {
        return Ok(Verdict::fail("no PNE among the candidate profiles", Value::Null));
    }
    Ok(Verdict::pass())
}

/// Runs the configured check on every case of the family.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let start = std::time::Instant::now();
    let cases = gen_cases(config)?;
    Ok(report_for(config, &cases, start))
}

/// Re-runs a single case with the given budget.
pub fn replay_case(theorem: TheoremId, case: &Case, budget: &SearchBudget) -> Result<ExperimentReport> {
    check_budget(budget)?;
    let mut config = ExperimentConfig::new(theorem);
    config.budget = budget.clone();
    config.family.count = 1;
    Ok(report_for(&config, std::slice::from_ref(case), std::time::Instant::now()))
}

fn report_for(config: &ExperimentConfig, cases: &[Case], start: std::time::Instant) -> ExperimentReport {
    let verdicts: Vec<Verdict> = cases
        .par_iter()
        .map(|c| check_case(config.theorem, c, &config.budget))
        .collect();
    let count = |s: Status| verdicts.iter().filter(|v| v.status == s).count();
    let counterexamples = cases
        .iter()
        .zip(&verdicts)
        .filter(|(_, v)| v.status == Status::Fail)
        .map(|(c, v)| {
            json!({
                "case": c.to_json(config.theorem),
                "detail": v.detail,
                "witness": v.witness,
            })
        })
        .collect();
    ExperimentReport {
        theorem: config.theorem,
        config: config.clone(),
        total: cases.len(),
        passed: count(Status::Pass),
        failed: count(Status::Fail),
        skipped: count(Status::Skip),
        vacuous: verdicts.iter().filter(|v| v.vacuous).count(),
        verdicts: cases
            .iter()
            .zip(verdicts)
            .map(|(c, verdict)| CaseVerdict { index: c.index, verdict })
            .collect(),
        counterexamples,
        elapsed_ms: config.timing.then(|| start.elapsed().as_millis()),
    }
}
