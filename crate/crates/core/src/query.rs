//! Transaction lookup by id, releasing field values only to parties the
//! policy authorizes. Parties and data controllers see the full record,
//! trusted third parties an audit-grade metadata view, everyone else
//! nothing.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::ledger::{BlockStatus, Chain};
use crate::ontology::{vocab, PolicyTree};
use crate::reasoner::data_point;
use crate::userbase::{ParticipantRole, UserBase};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryOutcome {
    Full,
    MetadataOnly,
    Denied,
    NotFound,
}

impl QueryOutcome {
    pub fn as_str(&self) -> &'static str {
        match self {
            QueryOutcome::Full => "FULL",
            QueryOutcome::MetadataOnly => "METADATA_ONLY",
            QueryOutcome::Denied => "DENIED",
            QueryOutcome::NotFound => "NOT_FOUND",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryResult {
    pub outcome: QueryOutcome,
    pub tx_id: String,
    pub status: Option<BlockStatus>,
    /// Shared values; present only for a Full view of a PASS block.
    pub fields: Option<BTreeMap<String, String>>,
    pub field_digests: Option<Vec<String>>,
    pub branch_hash: Option<String>,
    pub error_code: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum QueryError {
    #[error("UnknownParticipant: {0}")]
    UnknownParticipant(String),
}

/// Fetch the block for `tx_id` on behalf of `requester`.
///
/// Authorization, in order: a party to the transaction (owner, requester
/// or recipient) gets the full record; a participant holding an
/// `IsDataController` relation on every data point of the transaction
/// gets the full record; a trusted third party gets metadata only;
/// anyone else is denied.
pub fn query_transaction(
    chain: &Chain,
    tree: &PolicyTree,
    userbase: &UserBase,
    requester: &str,
    tx_id: &str,
) -> Result<QueryResult, QueryError> {
    let role = userbase
        .role_of(requester)
        .ok_or_else(|| QueryError::UnknownParticipant(requester.to_string()))?;

    let block = match chain.block_by_tx(tx_id) {
        Some(b) => b,
        None => {
            return Ok(QueryResult {
                outcome: QueryOutcome::NotFound,
                tx_id: tx_id.to_string(),
                status: None,
                fields: None,
                field_digests: None,
                branch_hash: None,
                error_code: None,
            })
        }
    };

    let parties = chain.parties_of(tx_id);
    let is_party = parties.is_some_and(|p| {
        requester == p.owner || requester == p.requester || requester == p.recipient
    });
    let controls_all = !is_party
        && parties.is_some_and(|p| {
            block.branch.as_ref().is_some_and(|branch| {
                branch.entries.keys().all(|field| {
                    tree.has_triple(
                        &data_point(&p.owner, field),
                        vocab::IS_DATA_CONTROLLER,
                        requester,
                    )
                })
            })
        });

    let outcome = if is_party || controls_all {
        QueryOutcome::Full
    } else if role == ParticipantRole::TrustedThirdParty {
        QueryOutcome::MetadataOnly
    } else {
        QueryOutcome::Denied
    };

    let error_code = (block.status == BlockStatus::Fail && outcome != QueryOutcome::Denied)
        .then(|| block.error_code.clone());

    Ok(match outcome {
        QueryOutcome::Full => QueryResult {
            outcome,
            tx_id: tx_id.to_string(),
            status: Some(block.status),
            fields: block.branch.as_ref().map(|b| b.entries.clone()),
            field_digests: Some(block.field_digests.clone()),
            branch_hash: Some(block.branch_hash.clone()),
            error_code,
        },
        QueryOutcome::MetadataOnly => QueryResult {
            outcome,
            tx_id: tx_id.to_string(),
            status: Some(block.status),
            fields: None,
            field_digests: Some(block.field_digests.clone()),
            branch_hash: Some(block.branch_hash.clone()),
            error_code,
        },
        _ => QueryResult {
            outcome,
            tx_id: tx_id.to_string(),
            status: None,
            fields: None,
            field_digests: None,
            branch_hash: None,
            error_code: None,
        },
    })
}

impl QueryResult {
    /// Canonical JSON rendering: sorted keys, upper-case outcome, absent
    /// sections omitted.
    pub fn to_json(&self) -> String {
        let mut out = String::from("{");
        if let Some(hash) = &self.branch_hash {
            out.push_str("\"branch_hash\":");
            out.push_str(&json_str(hash));
            out.push(',');
        }
        if let Some(code) = &self.error_code {
            out.push_str("\"error_code\":");
            out.push_str(&json_str(code));
            out.push(',');
        }
        if let Some(digests) = &self.field_digests {
            out.push_str("\"field_digests\":[");
            for (i, d) in digests.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&json_str(d));
            }
            out.push_str("],");
        }
        if let Some(fields) = &self.fields {
            out.push_str("\"fields\":{");
            for (i, (k, v)) in fields.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(&json_str(k));
                out.push(':');
                out.push_str(&json_str(v));
            }
            out.push_str("},");
        }
        out.push_str("\"outcome\":");
        out.push_str(&json_str(self.outcome.as_str()));
        if let Some(status) = self.status {
            out.push_str(",\"status\":");
            out.push_str(&json_str(status.as_str()));
        }
        out.push_str(",\"tx_id\":");
        out.push_str(&json_str(&self.tx_id));
        out.push('}');
        out
    }
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}
