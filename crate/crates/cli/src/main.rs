//! `fairbid`: command-line front end for the fairbid-core library.
//!
//! Every command prints one JSON document to stdout; diagnostics go to
//! stderr. Exit status: 0 success, 1 a checked property failed, 2 usage or
//! input error.
//!
//! Flags (`--agent`, `--order`) number agents from 1. JSON output numbers them
//! from 0, by position in the `bundles` and `bids` arrays.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fairbid_core::constructions::{construct_truthful_equivalent, perturb_to_strict};
use fairbid_core::fairness::{fairness_report, mms, Notion};
use fairbid_core::harness::{gen_instances, parse_case, replay_case, run_experiment, ExperimentConfig, Family, TheoremId};
use fairbid_core::io::{
    allocation_to_json, bids_to_json, goods_json, instance_to_json, parse_allocation, parse_bids, parse_instance,
    parse_rankings, ranking_json, to_pretty,
};
use fairbid_core::mechanisms::{mod_cut_and_choose, round_robin};
use fairbid_core::strategy::{
    mcc_best_response, mcc_construct_pne, mcc_verify_pne, rr_best_response, rr_enumerate_pne, rr_is_pne,
};
use fairbid_core::{BidProfile, Error, Instance, Mechanism, Ranking, Rational, SearchBudget};

#[derive(Parser)]
#[command(name = "fairbid", version, about = "Fair division under strategic bidding: mechanisms, fairness checks, equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded family of integer-valued instances.
    Gen(GenArgs),
    /// Run a mechanism on a bid profile.
    Allocate(AllocateArgs),
    /// Evaluate fairness notions for an allocation.
    Fairness(FairnessArgs),
    /// Maximin share of one agent, with a partition attaining it.
    Mms(MmsArgs),
    /// Best response of one agent to the others' bids.
    BestResponse(StrategyArgs),
    /// Check whether a profile is a pure Nash equilibrium.
    VerifyPne(StrategyArgs),
    /// Search for pure Nash equilibria.
    FindPne(FindArgs),
    /// Build an equilibrium of cut-and-choose directly.
    ConstructPne(ConstructArgs),
    /// Break ties in one agent's valuation.
    Perturb(PerturbArgs),
    /// Build agent 1's truthful-equivalent valuation for a best response.
    Vstar(VstarArgs),
    /// Run a batch theorem check (or replay one counterexample).
    VerifyTheorem(TheoremArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    #[value(name = "round-robin", alias = "rr")]
    RoundRobin,
    #[value(name = "mcc", alias = "mod-cut-and-choose")]
    Mcc,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::RoundRobin => Mechanism::RoundRobin,
            MechanismArg::Mcc => Mechanism::ModCutAndChoose,
        }
    }
}

#[derive(Args)]
struct InstanceArg {
    /// Instance JSON file.
    #[arg(long)]
    instance: PathBuf,
}

#[derive(Args)]
struct ProfileArgs {
    /// Bid profile JSON file (`{"bids": [[...], ...]}`); truthful if omitted.
    #[arg(long, conflicts_with = "rankings")]
    bids: Option<PathBuf>,
    /// Ranking profile JSON file (`{"rankings": [[...], ...]}`).
    #[arg(long)]
    rankings: Option<PathBuf>,
    /// Round-Robin picking order, 1-based agents, e.g. `2,1,3`.
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
}

#[derive(Args)]
struct BudgetArg {
    /// Search limits as `key=value` pairs: best-response, profiles, cut, mms2, mms.
    #[arg(long, value_delimiter = ',')]
    budget: Vec<String>,
}

#[derive(Args)]
struct FamilyArgs {
    /// Agents per instance: `n` or `lo..hi`.
    #[arg(long)]
    agents: Option<String>,
    /// Goods per instance: `m` or `lo..hi`.
    #[arg(long)]
    goods: Option<String>,
    /// Integer value range `lo..hi`.
    #[arg(long)]
    values: Option<String>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Reject rows with equal values.
    #[arg(long)]
    strict: bool,
    /// Force at least one tie per row.
    #[arg(long)]
    ties: bool,
    /// Enumerate every value matrix instead of sampling.
    #[arg(long)]
    exhaustive: bool,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    family: FamilyArgs,
    /// Write one file per instance into this directory instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    profile: ProfileArgs,
    /// Include the pick sequence (Round-Robin) or the cut steps (cut-and-choose).
    #[arg(long)]
    trace: bool,
}

#[derive(Args)]
struct FairnessArgs {
    #[command(flatten)]
    instance: InstanceArg,
    /// Allocation JSON file (`{"bundles": [[...], ...]}`).
    #[arg(long)]
    allocation: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ef,ef1,efx,prop,mms")]
    notions: Vec<String>,
    /// Approximation factor for MMS, e.g. `2/3`.
    #[arg(long, default_value = "1")]
    alpha: String,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct MmsArgs {
    #[command(flatten)]
    instance: InstanceArg,
    /// 1-based agent.
    #[arg(long)]
    agent: usize,
    /// Number of parts (defaults to the number of agents).
    #[arg(long)]
    parts: Option<usize>,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct StrategyArgs {
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    profile: ProfileArgs,
    /// 1-based agent (best-response only).
    #[arg(long, default_value_t = 1)]
    agent: usize,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct FindArgs {
    #[arg(long, value_enum)]
    mechanism: MechanismArg,
    #[command(flatten)]
    instance: InstanceArg,
    #[arg(long, value_delimiter = ',')]
    order: Option<Vec<usize>>,
    /// Report only the first equilibrium found.
    #[arg(long)]
    first: bool,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long, value_enum, default_value = "mcc")]
    mechanism: MechanismArg,
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct PerturbArgs {
    #[command(flatten)]
    instance: InstanceArg,
    /// 1-based agent.
    #[arg(long)]
    agent: usize,
    #[command(flatten)]
    profile: ProfileArgs,
    /// Raise a lone zero-valued good to ε/3 (keeps values positive; may break best responses).
    #[arg(long)]
    lift_zero: bool,
}

#[derive(Args)]
struct VstarArgs {
    #[command(flatten)]
    instance: InstanceArg,
    #[command(flatten)]
    profile: ProfileArgs,
    #[command(flatten)]
    budget: BudgetArg,
}

#[derive(Args)]
struct TheoremArgs {
    /// T3.1, T3.3, T4.3, T2.6, T2.7, L3.4, L3.6, L4.2, L4.5, TA.2, MCC-4.6, MCC-4.8.
    theorem: String,
    #[command(flatten)]
    family: FamilyArgs,
    #[command(flatten)]
    budget: BudgetArg,
    /// Re-run the single case in a counterexample (or case) file.
    #[arg(long)]
    replay: Option<PathBuf>,
    /// Also write a per-case CSV summary here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Omit the per-case verdict list from the JSON report.
    #[arg(long)]
    summary: bool,
    /// Record wall-clock time in the report (makes it non-reproducible).
    #[arg(long)]
    timing: bool,
}

/// Failure of a checked property, as opposed to an input error.
#[derive(Debug)]
struct Violation(Value);

fn read(path: &Path) -> anyhow::Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn load_instance(a: &InstanceArg) -> anyhow::Result<Instance> {
    let text = read(&a.instance)?;
    parse_instance(&text).with_context(|| format!("in {}", a.instance.display()))
}

fn load_bids(p: &ProfileArgs, inst: &Instance) -> anyhow::Result<BidProfile> {
    if let Some(path) = &p.bids {
        return parse_bids(&read(path)?, inst).with_context(|| format!("in {}", path.display()));
    }
    if let Some(path) = &p.rankings {
        let r = parse_rankings(&read(path)?, inst).with_context(|| format!("in {}", path.display()))?;
        return Ok(BidProfile(r.iter().map(Ranking::to_bid).collect()));
    }
    Ok(inst.truthful_bids())
}

fn order_of(order: &Option<Vec<usize>>, n: usize) -> anyhow::Result<Vec<usize>> {
    match order {
        None => Ok((0..n).collect()),
        Some(o) => {
            let zero: Vec<usize> = o
                .iter()
                .map(|&a| a.checked_sub(1).ok_or_else(|| Error::usage("agents in --order are 1-based")))
                .collect::<Result<_, _>>()?;
            fairbid_core::mechanisms::check_order(&zero, n)?;
            Ok(zero)
        }
    }
}

fn agent_index(agent: usize, n: usize) -> anyhow::Result<usize> {
    if agent == 0 || agent > n {
        return Err(Error::usage(format!("--agent must be between 1 and {n}")).into());
    }
    Ok(agent - 1)
}

fn budget_of(a: &BudgetArg) -> anyhow::Result<SearchBudget> {
    let mut b = SearchBudget::default();
    for item in &a.budget {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::usage(format!("budget entry {item:?} is not key=value")))?;
        let bad = || Error::usage(format!("budget value {v:?} for {k} is not a non-negative integer"));
        match k.trim() {
            "best-response" => b.max_goods_best_response = v.trim().parse().map_err(|_| bad())?,
            "profiles" => b.max_profiles = v.trim().parse().map_err(|_| bad())?,
            "cut" => b.max_goods_cut = v.trim().parse().map_err(|_| bad())?,
            "mms2" => b.mms.max_goods_two_parts = v.trim().parse().map_err(|_| bad())?,
            "mms" => b.mms.max_goods_general = v.trim().parse().map_err(|_| bad())?,
            other => return Err(Error::usage(format!("unknown budget key {other:?}")).into()),
        }
    }
    Ok(b)
}

fn range<T: std::str::FromStr + Copy>(s: &str, what: &str) -> anyhow::Result<(T, T)> {
    let parse = |x: &str| {
        x.trim()
            .parse::<T>()
            .map_err(|_| Error::usage(format!("invalid {what} {s:?}")))
    };
    match s.split_once("..") {
        Some((a, b)) => Ok((parse(a)?, parse(b.trim_start_matches('='))?)),
        None => {
            let v = parse(s)?;
            Ok((v, v))
        }
    }
}

fn family_of(a: &FamilyArgs, base: Family) -> anyhow::Result<Family> {
    let mut f = base;
    if let Some(s) = &a.agents {
        f.agents = range(s, "agent range")?;
    }
    if let Some(s) = &a.goods {
        f.goods = range(s, "goods range")?;
    }
    if let Some(s) = &a.values {
        f.values = range(s, "value range")?;
    }
    if let Some(c) = a.count {
        f.count = c;
    }
    if let Some(s) = a.seed {
        f.seed = s;
    }
    f.strict |= a.strict;
    f.ties |= a.ties;
    f.exhaustive |= a.exhaustive;
    Ok(f)
}

fn named(inst: &Instance, goods: &[usize]) -> Value {
    goods_json(inst, goods.iter().copied().collect())
}

fn values_json(v: &[Rational]) -> Value {
    serde_json::to_value(v).expect("rationals serialize")
}

fn cmd_gen(a: &GenArgs) -> anyhow::Result<Value> {
    let f = family_of(&a.family, Family::default())?;
    let instances = gen_instances(&f)?;
    if let Some(dir) = &a.out {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let width = instances.len().saturating_sub(1).to_string().len().max(3);
        let mut files = Vec::new();
        for (i, inst) in instances.iter().enumerate() {
            let path = dir.join(format!("instance_{i:0width$}.json"));
            std::fs::write(&path, to_pretty(&instance_to_json(inst)))
                .with_context(|| format!("writing {}", path.display()))?;
            files.push(path.display().to_string());
        }
        return Ok(json!({"family": f, "files": files}));
    }
    Ok(json!({
        "family": f,
        "instances": instances.iter().map(instance_to_json).collect::<Vec<_>>(),
    }))
}

fn cmd_allocate(a: &AllocateArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let bids = load_bids(&a.profile, &inst)?;
    bids.check(&inst)?;
    match a.mechanism {
        MechanismArg::RoundRobin => {
            let order = order_of(&a.profile.order, inst.n())?;
            let (alloc, trace) = round_robin(&bids, &order)?;
            let mut out = allocation_to_json(&inst, &alloc);
            if a.trace {
                out["trace"] = trace
                    .steps
                    .iter()
                    .map(|s| {
                        json!({
                            "round": s.round,
                            "agent": s.agent,
                            "good": inst.good_names()[s.good],
                            "available": goods_json(&inst, s.available),
                        })
                    })
                    .collect();
            }
            Ok(out)
        }
        MechanismArg::Mcc => {
            if a.profile.order.is_some() {
                return Err(Error::usage("--order applies to Round-Robin only").into());
            }
            let (alloc, cut) = mod_cut_and_choose(&bids)?;
            let mut out = allocation_to_json(&inst, &alloc);
            if a.trace {
                out["trace"] = json!({
                    "steps": cut.steps.iter().map(|s| json!({
                        "good": inst.good_names()[s.good],
                        "bundle": s.bundle,
                    })).collect::<Vec<_>>(),
                    "e1": goods_json(&inst, cut.e1),
                    "e2": goods_json(&inst, cut.e2),
                    "chosen": cut.chosen,
                });
            }
            Ok(out)
        }
    }
}

fn cmd_fairness(a: &FairnessArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let alloc = parse_allocation(&read(&a.allocation)?, &inst).with_context(|| format!("in {}", a.allocation.display()))?;
    let notions: Vec<Notion> = a
        .notions
        .iter()
        .map(|s| Notion::parse(s).ok_or_else(|| Error::usage(format!("unknown notion {s:?}"))))
        .collect::<Result<_, _>>()?;
    let alpha: Rational = a
        .alpha
        .parse()
        .map_err(|e| Error::usage(format!("invalid --alpha: {e}")))?;
    let budget = budget_of(&a.budget)?;
    let report = fairness_report(&inst, &alloc, &notions, Some(&alpha), &budget.mms)?;
    Ok(serde_json::to_value(report)?)
}

fn cmd_mms(a: &MmsArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let agent = agent_index(a.agent, inst.n())?;
    let budget = budget_of(&a.budget)?;
    let cert = mms(&inst, agent, a.parts.unwrap_or(inst.n()), inst.goods(), &budget.mms)?;
    Ok(json!({
        "agent": agent,
        "parts": cert.n_parts,
        "value": cert.value,
        "partition": cert.witness_partition.iter().map(|&b| goods_json(&inst, b)).collect::<Vec<_>>(),
    }))
}

fn cmd_best_response(a: &StrategyArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let agent = agent_index(a.agent, inst.n())?;
    let bids = load_bids(&a.profile, &inst)?;
    bids.check(&inst)?;
    let budget = budget_of(&a.budget)?;
    match a.mechanism {
        MechanismArg::RoundRobin => {
            let order = order_of(&a.profile.order, inst.n())?;
            let (r, v) = rr_best_response(&inst, agent, &bids.rankings(), &order, &budget)?;
            Ok(json!({"agent": agent, "ranking": ranking_json(&inst, &r), "value": v}))
        }
        MechanismArg::Mcc => {
            let (b, v) = mcc_best_response(&inst, agent, &bids, &budget)?;
            Ok(json!({"agent": agent, "bid": b, "value": v}))
        }
    }
}

fn cmd_verify_pne(a: &StrategyArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let bids = load_bids(&a.profile, &inst)?;
    bids.check(&inst)?;
    let budget = budget_of(&a.budget)?;
    let cert = match a.mechanism {
        MechanismArg::RoundRobin => {
            let order = order_of(&a.profile.order, inst.n())?;
            rr_is_pne(&inst, &bids.rankings(), &order, &budget)?
        }
        MechanismArg::Mcc => mcc_verify_pne(&inst, &bids, &budget)?,
    };
    Ok(serde_json::to_value(cert)?)
}

fn cmd_find_pne(a: &FindArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let budget = budget_of(&a.budget)?;
    match a.mechanism {
        MechanismArg::RoundRobin => {
            let order = order_of(&a.order, inst.n())?;
            let mut all = rr_enumerate_pne(&inst, &order, &budget)?;
            let count = all.len();
            if a.first {
                all.truncate(1);
            }
            Ok(json!({"count": count, "equilibria": all}))
        }
        MechanismArg::Mcc => {
            if a.order.is_some() {
                return Err(Error::usage("--order applies to Round-Robin only").into());
            }
            let (_, _, cert) = mcc_construct_pne(&inst, &budget)?;
            Ok(json!({"count": 1, "equilibria": [cert]}))
        }
    }
}

fn cmd_construct_pne(a: &ConstructArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let budget = budget_of(&a.budget)?;
    if let MechanismArg::RoundRobin = a.mechanism {
        return Err(Error::usage("construct-pne is implemented for mcc; use find-pne for round-robin").into());
    }
    let (b1, b2, cert) = mcc_construct_pne(&inst, &budget)?;
    Ok(json!({
        "bids": bids_to_json(&BidProfile(vec![b1, b2]))["bids"],
        "allocation": allocation_to_json(&inst, &cert.allocation)["bundles"],
        "certificate": cert,
    }))
}

fn cmd_perturb(a: &PerturbArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    let agent = agent_index(a.agent, inst.n())?;
    let bids = load_bids(&a.profile, &inst)?;
    let order = order_of(&a.profile.order, inst.n())?;
    let r = perturb_to_strict(&inst, agent, &bids, &order, a.lift_zero)?;
    let perturbed = inst.with_row(agent, r.v_prime.clone())?;
    Ok(json!({
        "agent": agent,
        "v_prime": values_json(&r.v_prime),
        "epsilon": r.epsilon,
        "modified_goods": goods_json(&inst, r.modified_goods),
        "lifted_zero": r.lifted_zero.map(|g| inst.good_names()[g].clone()),
        "instance": instance_to_json(&perturbed),
    }))
}

fn cmd_vstar(a: &VstarArgs) -> anyhow::Result<Value> {
    let inst = load_instance(&a.instance)?;
    if a.profile.order.is_some() {
        return Err(Error::usage("vstar uses the order 1, 2, ..., n").into());
    }
    let bids = load_bids(&a.profile, &inst)?;
    let budget = budget_of(&a.budget)?;
    let out = match construct_truthful_equivalent(&inst, &bids, &budget) {
        Ok(out) => out,
        Err(e @ Error::Construction { .. }) => {
            return Err(Violation(json!({"error": e.to_string(), "construction": "failed"})).into())
        }
        Err(e) => return Err(e.into()),
    };
    // independent re-check of the three conclusions
    let order: Vec<usize> = (0..inst.n()).collect();
    let (before, _) = round_robin(&bids, &order)?;
    let (after, _) = round_robin(&bids.with_row(0, out.b1_star.clone()), &order)?;
    let own = before.bundle(0);
    let star_total: Rational = own.iter().map(|g| &out.v1_star[g]).sum();
    let off_equal = (0..inst.m()).all(|g| own.contains(g) || out.v1_star[g] == *inst.value(0, g));
    Ok(json!({
        "v1_star": values_json(&out.v1_star),
        "b1_star": out.b1_star,
        "allocation": allocation_to_json(&inst, &out.allocation)["bundles"],
        "verification": {
            "same_allocation": after == before,
            "bundle_value": star_total,
            "bundle_value_unchanged": star_total == inst.bundle_value(0, own),
            "equal_outside_bundle": off_equal,
        },
        "picks": named(&inst, &out.state.picks),
        "steps": out.state.steps,
    }))
}

fn cmd_verify_theorem(a: &TheoremArgs) -> anyhow::Result<Value> {
    let theorem: TheoremId = a.theorem.parse()?;
    let budget = budget_of(&a.budget)?;
    let start = std::time::Instant::now();
    let mut report = if let Some(path) = &a.replay {
        let (t, case) = parse_case(&read(path)?).with_context(|| format!("in {}", path.display()))?;
        if t != theorem {
            return Err(Error::usage(format!("{} holds a {t} case, not {theorem}", path.display())).into());
        }
        replay_case(theorem, &case, &budget)?
    } else {
        let config = ExperimentConfig {
            theorem,
            family: family_of(&a.family, theorem.default_family())?,
            budget,
            timing: a.timing,
        };
        run_experiment(&config)?
    };
    eprintln!(
        "{}: {} cases, {} passed ({} vacuous), {} failed, {} skipped in {} ms",
        report.theorem,
        report.total,
        report.passed,
        report.vacuous,
        report.failed,
        report.skipped,
        start.elapsed().as_millis()
    );
    if let Some(path) = &a.csv {
        std::fs::write(path, report.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    if a.summary {
        report.verdicts.clear();
    }
    let holds = report.holds();
    let doc = serde_json::to_value(&report)?;
    if !holds {
        return Err(Violation(doc).into());
    }
    Ok(doc)
}

fn run(cli: &Cli) -> anyhow::Result<Value> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Allocate(a) => cmd_allocate(a),
        Command::Fairness(a) => cmd_fairness(a),
        Command::Mms(a) => cmd_mms(a),
        Command::BestResponse(a) => cmd_best_response(a),
        Command::VerifyPne(a) => cmd_verify_pne(a),
        Command::FindPne(a) => cmd_find_pne(a),
        Command::ConstructPne(a) => cmd_construct_pne(a),
        Command::Perturb(a) => cmd_perturb(a),
        Command::Vstar(a) => cmd_vstar(a),
        Command::VerifyTheorem(a) => cmd_verify_theorem(a),
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("property violated")
    }
}

impl std::error::Error for Violation {}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(doc) => {
            print!("{}", to_pretty(&doc));
            ExitCode::SUCCESS
        }
        Err(e) => {
            if let Some(Violation(doc)) = e.downcast_ref::<Violation>() {
                print!("{}", to_pretty(doc));
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<Error>() {
                Some(Error::Construction { .. }) => 1,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}
