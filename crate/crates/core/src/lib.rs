//! Fair division of indivisible goods under strategic bidding.
//!
//! Agents report bids; a mechanism (Round-Robin or a two-agent cut-and-choose
//! variant) maps bids to an allocation; the allocation is then judged against
//! the agents' true additive valuations. All arithmetic is exact.

pub mod constructions;
pub mod error;
pub mod fairness;
pub mod harness;
pub mod io;
pub mod mechanisms;
pub mod model;
pub mod rational;
pub mod strategy;

pub use error::{Error, Result};
pub use constructions::{ConstructionStep, HistoryTrace, PerturbationResult, TruthfulEquivalent};
pub use fairness::{FairnessReport, MmsBudget, MmsCertificate, Notion, NotionReport, Witness};
pub use harness::{ExperimentConfig, ExperimentReport, Family, TheoremId};
pub use mechanisms::{CutResult, PickStep, PickTrace};
pub use model::{Allocation, BidProfile, BidVector, GoodSet, Instance, Ranking};
pub use rational::Rational;
pub use strategy::{EquilibriumCertificate, Mechanism, SearchBudget};
