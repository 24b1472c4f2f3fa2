//! Privacy-policy ontology: classes, typed properties, individuals and
//! relation triples, with validated mutation and an OWL/XML subset
//! reader/writer.

mod parser;
mod tree;
mod writer;

pub use parser::parse_policy_document;
pub use tree::{Individual, PolicyClass, PolicyProperty, PolicyTree, RelationTriple};
pub use writer::serialize_policy;

use thiserror::Error;

/// Well-known vocabulary the reasoner and access checks key on.
pub mod vocab {
    /// Reserved class for boolean-style flag objects.
    pub const FLAG: &str = "Flag";
    /// Reserved individual of class [`FLAG`]; presence of a triple with
    /// this object means the flag is set.
    pub const AFFIRMED: &str = "Affirmed";

    pub const PII: &str = "Personally_Identifiable_Information";
    pub const COLLECTION_PURPOSE: &str = "Collection_Purpose";
    pub const DATA_PROTECTION: &str = "Data_Protection";
    pub const ACCESS_CONTROL: &str = "Access_Control";
    pub const CONSUMER_CONSENT: &str = "Consumer_Consent";

    pub const IS_SHARABLE: &str = "IsSharable";
    pub const IS_SENSITIVE_DATA: &str = "IsSensitiveData";
    pub const HAS_CONSENT_FOR_USE: &str = "has_Consent_for_Use";
    pub const HAS_CONSENT_TO_SHARE_PII: &str = "has_Consent_to_share_PII";
    pub const IS_DATA_OWNER: &str = "IsDataOwner";
    pub const IS_DATA_CONTROLLER: &str = "IsDataController";
    pub const HAS_DATA_PROTECTION: &str = "has_Data_Protection";
    pub const HAS_ACCESS_CONTROL: &str = "has_Access_Control";

    /// Consent and ownership relations over a PII data point. Only the
    /// owning end-user may assert or retract these (with the one
    /// bootstrap exception for [`IS_DATA_OWNER`]).
    pub const OWNER_GATED: [&str; 6] = [
        IS_SHARABLE,
        IS_SENSITIVE_DATA,
        HAS_CONSENT_FOR_USE,
        HAS_CONSENT_TO_SHARE_PII,
        IS_DATA_OWNER,
        IS_DATA_CONTROLLER,
    ];

    pub fn is_owner_gated(property: &str) -> bool {
        OWNER_GATED.contains(&property)
    }
}

/// Identifiers are non-empty, case-sensitive strings over `[A-Za-z0-9_.-]`.
pub fn is_valid_identifier(s: &str) -> bool {
    !s.is_empty()
        && s.bytes()
            .all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'.' || b == b'-')
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OntologyError {
    #[error("MalformedDocument: {detail} (line {line})")]
    MalformedDocument { detail: String, line: u32 },
    #[error("UnsupportedConstruct: <{element}> (line {line})")]
    UnsupportedConstruct { element: String, line: u32 },
    #[error("InvariantViolation: {detail}")]
    InvariantViolation { detail: String },
    #[error("InvalidIdentifier: {0:?}")]
    InvalidIdentifier(String),
    #[error("DuplicateName: {0}")]
    DuplicateName(String),
    #[error("UnknownParent: {0}")]
    UnknownParent(String),
    #[error("CycleDetected: adding {0} would close a subclass cycle")]
    CycleDetected(String),
    #[error("UnknownClass: {0}")]
    UnknownClass(String),
    #[error("UnknownEntity: {0}")]
    UnknownEntity(String),
    #[error("DomainRangeViolation: {detail}")]
    DomainRangeViolation { detail: String },
    #[error("NotAuthorized: {actor} may not edit consent relations of {subject}")]
    NotAuthorized { actor: String, subject: String },
    #[error("DuplicateTriple: ({0}, {1}, {2})")]
    DuplicateTriple(String, String, String),
    #[error("UnknownTriple: ({0}, {1}, {2})")]
    UnknownTriple(String, String, String),
}

impl OntologyError {
    /// Stable machine-readable code, printed verbatim by the CLI.
    pub fn code(&self) -> &'static str {
        match self {
            OntologyError::MalformedDocument { .. } => "MalformedDocument",
            OntologyError::UnsupportedConstruct { .. } => "UnsupportedConstruct",
            OntologyError::InvariantViolation { .. } => "InvariantViolation",
            OntologyError::InvalidIdentifier(_) => "InvalidIdentifier",
            OntologyError::DuplicateName(_) => "DuplicateName",
            OntologyError::UnknownParent(_) => "UnknownParent",
            OntologyError::CycleDetected(_) => "CycleDetected",
            OntologyError::UnknownClass(_) => "UnknownClass",
            OntologyError::UnknownEntity(_) => "UnknownEntity",
            OntologyError::DomainRangeViolation { .. } => "DomainRangeViolation",
            OntologyError::NotAuthorized { .. } => "NotAuthorized",
            OntologyError::DuplicateTriple(..) => "DuplicateTriple",
            OntologyError::UnknownTriple(..) => "UnknownTriple",
        }
    }
}
