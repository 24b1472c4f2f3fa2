//! Policy-enforced permissioned ledger engine.
//!
//! A privacy-policy ontology (the [`ontology::PolicyTree`]) drives a
//! purpose-centric [`reasoner`] that verifies every PII-sharing
//! transaction before it is recorded on a tamper-evident hash chain
//! ([`ledger::Chain`]). Verdicts and shared values are queryable by
//! transaction id through the [`query`] module, gated by the same
//! ontology. Participants live in the [`userbase`] registry, which also
//! mediates consensus-gated policy amendments. The [`simulator`] module
//! replays the whole pipeline deterministically from a seed.

pub mod ledger;
pub mod ontology;
pub mod query;
pub mod reasoner;
pub mod simulator;
pub mod testing;
pub mod userbase;

pub use ledger::{Chain, IntegrityReport, LedgerError, MainBlock};
pub use ontology::{OntologyError, PolicyTree, RelationTriple};
pub use query::{QueryOutcome, QueryResult};
pub use reasoner::{ReasonerErrorCode, TransactionRequest, Verdict, VerdictStatus};
pub use userbase::{ParticipantRole, UserBase};
