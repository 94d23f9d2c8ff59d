//! Checks of the communication bounds on concrete instances, with
//! replayable witnesses for every violation, and a suite runner over a
//! generated corpus.
//!
//! Hard checks (`decomposition`, `abc_bound`, `abc_savings`,
//! `cut_relation`) must never fail. Soft checks (`boundary_bound`,
//! `pair_bound`, `improvement`) are measured and reported with pass rates.

mod checks;
mod suite;

pub use checks::{
    check_abc_bounds, check_cut_relation, check_decomposition, check_improvement,
    check_partition_bounds, decomposition_trial, AbcBounds, DecompositionTrial, Improvement,
    InstanceMeasure, PartitionBounds,
};
pub use suite::{
    run_suite, shared_neighbor_instance, InstanceRow, RatioStats, SuiteConfig, SuiteReport,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregation::AggregatorKind;
use crate::graph::{GraphDocument, GraphError};
use crate::partition::{Completion, Partition, PartitionDocument, PartitionError};
use crate::protocol::ProtocolError;

/// Witnesses kept per report; the violation count is always exact.
pub const MAX_WITNESSES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VerifyError {
    #[error("invalid suite config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Partition(#[from] PartitionError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TheoremId {
    /// `g(f(B_1), ..., f(B_k)) = A(B_1 ∪ ... ∪ B_k)` for every aggregator.
    Decomposition,
    /// ABC units received by `i` from `j` are at most `|B(w_i)|`.
    AbcBound,
    /// With two workers, naive standard units minus ABC units is at least
    /// `E_c - |B(w_i)|` for each receiving side.
    AbcSavings,
    /// The minimum vertex cut is no larger than the minimum edge cut.
    CutRelation,
    /// The vertex-cut partition keeps `max |B(w_i)|` within `ceil(|V_c*| / 2)`.
    BoundaryBound,
    /// The vertex-cut partition keeps ABC units per pair within `ceil(|V_c*| / 2)`.
    PairBound,
    /// Naive standard units on the optimal balanced edge cut are at least
    /// twice the ABC units on the vertex-cut partition.
    Improvement,
}

impl TheoremId {
    pub const ALL: [TheoremId; 7] = [
        TheoremId::Decomposition,
        TheoremId::AbcBound,
        TheoremId::AbcSavings,
        TheoremId::CutRelation,
        TheoremId::BoundaryBound,
        TheoremId::PairBound,
        TheoremId::Improvement,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremId::Decomposition => "decomposition",
            TheoremId::AbcBound => "abc_bound",
            TheoremId::AbcSavings => "abc_savings",
            TheoremId::CutRelation => "cut_relation",
            TheoremId::BoundaryBound => "boundary_bound",
            TheoremId::PairBound => "pair_bound",
            TheoremId::Improvement => "improvement",
        }
    }

    /// Whether a violation fails the suite.
    pub fn is_hard(self) -> bool {
        matches!(
            self,
            TheoremId::Decomposition
                | TheoremId::AbcBound
                | TheoremId::AbcSavings
                | TheoremId::CutRelation
        )
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TheoremId {
    type Err = VerifyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|t| t.name() == s)
            .ok_or_else(|| VerifyError::InvalidConfig(format!("unknown theorem id {s:?}")))
    }
}

/// Everything needed to reproduce one outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Witness {
    Decomposition {
        aggregator: AggregatorKind,
        seed: u64,
        trial: usize,
        detail: String,
    },
    Instance {
        theorem: TheoremId,
        graph: GraphDocument,
        partition: Option<PartitionDocument>,
        completion: Option<Completion>,
        detail: String,
    },
}

impl Witness {
    pub fn instance(
        theorem: TheoremId,
        graph: GraphDocument,
        partition: Option<&Partition>,
        completion: Option<Completion>,
        detail: String,
    ) -> Self {
        Witness::Instance {
            theorem,
            graph,
            partition: partition.map(PartitionDocument::from),
            completion,
            detail,
        }
    }

    /// Re-runs the originating check; true when it violates again.
    pub fn replay(&self) -> Result<bool, VerifyError> {
        match self {
            Witness::Decomposition {
                aggregator,
                seed,
                trial,
                ..
            } => Ok(!decomposition_trial(*aggregator, *seed, *trial).holds),
            Witness::Instance {
                theorem,
                graph,
                partition,
                completion,
                ..
            } => {
                let (g, _) = graph.to_graph()?;
                let completion = completion.unwrap_or_default();
                let report = match theorem {
                    TheoremId::Decomposition => {
                        return Err(VerifyError::InvalidConfig(
                            "instance witness for decomposition".into(),
                        ))
                    }
                    TheoremId::AbcBound | TheoremId::AbcSavings => {
                        let doc = partition.clone().ok_or_else(|| {
                            VerifyError::InvalidConfig("witness lacks a partition".into())
                        })?;
                        let bounds = check_abc_bounds(&g, &Partition::try_from(doc)?)?;
                        if *theorem == TheoremId::AbcBound {
                            bounds.bound
                        } else {
                            bounds.savings
                        }
                    }
                    TheoremId::CutRelation => check_cut_relation(&g)?,
                    TheoremId::BoundaryBound => check_partition_bounds(&g, completion)?.boundary,
                    TheoremId::PairBound => check_partition_bounds(&g, completion)?.pair,
                    TheoremId::Improvement => check_improvement(&g, completion)?.report,
                };
                Ok(report.violations > 0)
            }
        }
    }
}

/// A secondary reading that is recorded but never fails a check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedCheck {
    pub name: String,
    pub held: usize,
    pub failed: usize,
    pub examples: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: TheoremId,
    pub hard: bool,
    /// Aggregator or completion rule the report was produced under.
    pub variant: Option<String>,
    pub instances: usize,
    pub skipped: usize,
    pub violations: usize,
    pub witnesses: Vec<Witness>,
    pub logged: Vec<LoggedCheck>,
    /// Worst-case quantities: the largest value seen, except `min_*` keys.
    pub measures: BTreeMap<String, f64>,
    pub notes: Vec<String>,
}

impl TheoremReport {
    pub fn new(theorem: TheoremId, variant: Option<String>) -> Self {
        TheoremReport {
            theorem,
            hard: theorem.is_hard(),
            variant,
            instances: 0,
            skipped: 0,
            violations: 0,
            witnesses: Vec::new(),
            logged: Vec::new(),
            measures: BTreeMap::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }

    /// Fraction of instances without a violation; 1 when nothing ran.
    pub fn pass_rate(&self) -> f64 {
        if self.instances == 0 {
            1.0
        } else {
            (self.instances - self.violations) as f64 / self.instances as f64
        }
    }

    pub fn record(&mut self, violated: bool, witness: impl FnOnce() -> Witness) {
        self.instances += 1;
        if violated {
            self.violations += 1;
            if self.witnesses.len() < MAX_WITNESSES {
                self.witnesses.push(witness());
            }
        }
    }

    pub fn log(&mut self, name: &str, held: bool, example: impl FnOnce() -> Witness) {
        let entry = match self.logged.iter_mut().position(|l| l.name == name) {
            Some(i) => &mut self.logged[i],
            None => {
                self.logged.push(LoggedCheck {
                    name: name.to_string(),
                    held: 0,
                    failed: 0,
                    examples: Vec::new(),
                });
                self.logged.last_mut().expect("just pushed")
            }
        };
        if held {
            entry.held += 1;
        } else {
            entry.failed += 1;
            if entry.examples.len() < MAX_WITNESSES {
                entry.examples.push(example());
            }
        }
    }

    pub fn logged(&self, name: &str) -> Option<&LoggedCheck> {
        self.logged.iter().find(|l| l.name == name)
    }

    pub fn measure(&mut self, key: &str, value: f64) {
        let slot = self.measures.entry(key.to_string()).or_insert(value);
        *slot = if key.starts_with("min_") {
            slot.min(value)
        } else {
            slot.max(value)
        };
    }

    pub fn note(&mut self, text: &str) {
        if !self.notes.iter().any(|n| n == text) {
            self.notes.push(text.to_string());
        }
    }

    /// Folds another report on the same theorem into this one.
    pub fn absorb(&mut self, other: TheoremReport) {
        self.instances += other.instances;
        self.skipped += other.skipped;
        self.violations += other.violations;
        let room = MAX_WITNESSES.saturating_sub(self.witnesses.len());
        self.witnesses
            .extend(other.witnesses.into_iter().take(room));
        for l in other.logged {
            match self.logged.iter_mut().find(|x| x.name == l.name) {
                Some(mine) => {
                    mine.held += l.held;
                    mine.failed += l.failed;
                    let room = MAX_WITNESSES.saturating_sub(mine.examples.len());
                    mine.examples.extend(l.examples.into_iter().take(room));
                }
                None => self.logged.push(l),
            }
        }
        for (k, v) in other.measures {
            self.measure(&k, v);
        }
        for n in other.notes {
            self.note(&n);
        }
    }
}

/// Independent child seed for sub-task `salt` of a run seeded with `base`.
pub fn derive_seed(base: u64, salt: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(base);
    rng.set_stream(salt);
    rng.next_u64()
}
