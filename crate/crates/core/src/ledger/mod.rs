//! Append-only, hash-linked verdict storage. Every verified transaction
//! becomes exactly one main block: PASS blocks carry a branch block with
//! the shared field values, FAIL blocks carry the reasoner error. The
//! chain is tamper evident down to single-byte edits of the persisted
//! file.

mod store;

pub use store::{append_block, load_chain, save_chain, verify_bytes, verify_file};

use std::collections::{BTreeMap, HashMap};

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::reasoner::{self, ReasonerErrorCode, TransactionRequest, Verdict};
use crate::ontology::PolicyTree;

/// 64 hex zeros: the prev_hash of the genesis block and the branch_hash
/// of blocks without a branch.
pub const ZERO_HASH: &str = "0000000000000000000000000000000000000000000000000000000000000000";

pub const GENESIS_TX_ID: &str = "GENESIS";

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockStatus {
    Genesis,
    Pass,
    Fail,
}

impl BlockStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            BlockStatus::Genesis => "GENESIS",
            BlockStatus::Pass => "PASS",
            BlockStatus::Fail => "FAIL",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "GENESIS" => BlockStatus::Genesis,
            "PASS" => BlockStatus::Pass,
            "FAIL" => BlockStatus::Fail,
            _ => return None,
        })
    }
}

/// Field name -> shared value, attached to a PASS main block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchBlock {
    pub entries: BTreeMap<String, String>,
}

impl BranchBlock {
    /// Canonical bytes: tx_id then `name=value` entries sorted by name,
    /// joined by the 0x1F unit separator. Identifiers and values are
    /// rejected upstream if they contain 0x1F, so the framing is
    /// unambiguous.
    pub fn canonical_bytes(&self, tx_id: &str) -> Vec<u8> {
        let mut out = String::from(tx_id);
        for (name, value) in &self.entries {
            out.push('\u{1f}');
            out.push_str(name);
            out.push('=');
            out.push_str(value);
        }
        out.into_bytes()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MainBlock {
    pub height: u64,
    pub prev_hash: String,
    pub tx_id: String,
    pub status: BlockStatus,
    /// Sorted SHA-256 digests of the shared field names; empty unless PASS.
    pub field_digests: Vec<String>,
    pub branch_hash: String,
    pub error_code: String,
    pub timestamp: u64,
    pub block_hash: String,
    pub branch: Option<BranchBlock>,
}

impl MainBlock {
    /// Canonical bytes hashed into `block_hash`:
    /// `height|prev_hash|tx_id|status|d1,d2,…|branch_hash|error_code|timestamp`.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        format!(
            "{}|{}|{}|{}|{}|{}|{}|{}",
            self.height,
            self.prev_hash,
            self.tx_id,
            self.status.as_str(),
            self.field_digests.join(","),
            self.branch_hash,
            self.error_code,
            self.timestamp
        )
        .into_bytes()
    }

    fn seal(mut self) -> MainBlock {
        self.block_hash = sha256_hex(&self.canonical_bytes());
        self
    }

    fn genesis() -> MainBlock {
        MainBlock {
            height: 0,
            prev_hash: ZERO_HASH.to_string(),
            tx_id: GENESIS_TX_ID.to_string(),
            status: BlockStatus::Genesis,
            field_digests: Vec::new(),
            branch_hash: ZERO_HASH.to_string(),
            error_code: String::new(),
            timestamp: 0,
            block_hash: String::new(),
            branch: None,
        }
        .seal()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegrityReport {
    pub ok: bool,
    pub first_bad_height: Option<u64>,
    pub reason: String,
}

impl IntegrityReport {
    fn ok() -> Self {
        IntegrityReport {
            ok: true,
            first_bad_height: None,
            reason: String::new(),
        }
    }

    fn bad(height: u64, reason: impl Into<String>) -> Self {
        IntegrityReport {
            ok: false,
            first_bad_height: Some(height),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LedgerError {
    #[error("DuplicateTransaction: {0}")]
    DuplicateTransaction(String),
    #[error("NonMonotoneTimestamp: {now} is before chain tip at {tip}")]
    NonMonotoneTimestamp { now: u64, tip: u64 },
    #[error("EmptyFields: a branch write needs at least one field")]
    EmptyFields,
    #[error("InvalidValue: field {0:?} contains a reserved control byte")]
    InvalidValue(String),
}

/// Requester/owner/recipient of a recorded transaction, kept alongside
/// the chain for query authorization. The blocks themselves carry no
/// party identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TxParties {
    pub requester: String,
    pub owner: String,
    pub recipient: String,
}

#[derive(Debug, Clone)]
pub struct Chain {
    blocks: Vec<MainBlock>,
    tx_index: HashMap<String, usize>,
    datapoint_index: BTreeMap<(String, String), Vec<String>>,
    parties: HashMap<String, TxParties>,
}

impl Default for Chain {
    fn default() -> Self {
        Self::new()
    }
}

impl Chain {
    /// A fresh chain holding only the genesis block.
    pub fn new() -> Self {
        let genesis = MainBlock::genesis();
        let mut tx_index = HashMap::new();
        tx_index.insert(genesis.tx_id.clone(), 0);
        Chain {
            blocks: vec![genesis],
            tx_index,
            datapoint_index: BTreeMap::new(),
            parties: HashMap::new(),
        }
    }

    pub fn blocks(&self) -> &[MainBlock] {
        &self.blocks
    }

    pub fn tip(&self) -> &MainBlock {
        self.blocks.last().expect("chain always has genesis")
    }

    /// Height of the tip block.
    pub fn height(&self) -> u64 {
        self.tip().height
    }

    pub fn block_by_tx(&self, tx_id: &str) -> Option<&MainBlock> {
        self.tx_index.get(tx_id).map(|&i| &self.blocks[i])
    }

    pub fn parties_of(&self, tx_id: &str) -> Option<&TxParties> {
        self.parties.get(tx_id)
    }

    pub fn record_parties(&mut self, tx_id: &str, parties: TxParties) {
        self.parties.insert(tx_id.to_string(), parties);
    }

    fn admit(&self, tx_id: &str, now: u64) -> Result<(), LedgerError> {
        if self.tx_index.contains_key(tx_id) {
            return Err(LedgerError::DuplicateTransaction(tx_id.to_string()));
        }
        let tip = self.tip().timestamp;
        if now < tip {
            return Err(LedgerError::NonMonotoneTimestamp { now, tip });
        }
        Ok(())
    }

    /// Record a successful transaction: one PASS main block plus its
    /// branch block, and the per-data-point index extended under every
    /// (owner, field) key.
    pub fn branch_write(
        &mut self,
        request: &TransactionRequest,
        owner: &str,
        now: u64,
    ) -> Result<&MainBlock, LedgerError> {
        self.admit(&request.tx_id, now)?;
        if request.fields.is_empty() {
            return Err(LedgerError::EmptyFields);
        }
        for (name, value) in &request.fields {
            if name.contains('\u{1f}') || value.contains('\u{1f}') {
                return Err(LedgerError::InvalidValue(name.clone()));
            }
        }

        let branch = BranchBlock {
            entries: request.fields.clone(),
        };
        let branch_hash = sha256_hex(&branch.canonical_bytes(&request.tx_id));
        let mut field_digests: Vec<String> = request
            .fields
            .keys()
            .map(|name| sha256_hex(name.as_bytes()))
            .collect();
        field_digests.sort();

        let block = MainBlock {
            height: self.blocks.len() as u64,
            prev_hash: self.tip().block_hash.clone(),
            tx_id: request.tx_id.clone(),
            status: BlockStatus::Pass,
            field_digests,
            branch_hash,
            error_code: String::new(),
            timestamp: now,
            block_hash: String::new(),
            branch: Some(branch),
        }
        .seal();

        for field in request.fields.keys() {
            self.datapoint_index
                .entry((owner.to_string(), field.clone()))
                .or_default()
                .push(request.tx_id.clone());
        }
        self.tx_index.insert(request.tx_id.clone(), self.blocks.len());
        self.parties.insert(
            request.tx_id.clone(),
            TxParties {
                requester: request.requester.clone(),
                owner: request.owner.clone(),
                recipient: request.recipient.clone(),
            },
        );
        self.blocks.push(block);
        Ok(self.tip())
    }

    /// Record a failed transaction: one FAIL main block carrying the
    /// reasoner error, no branch, data-point index untouched.
    pub fn write_fail(
        &mut self,
        tx_id: &str,
        error: ReasonerErrorCode,
        now: u64,
    ) -> Result<&MainBlock, LedgerError> {
        self.admit(tx_id, now)?;
        let block = MainBlock {
            height: self.blocks.len() as u64,
            prev_hash: self.tip().block_hash.clone(),
            tx_id: tx_id.to_string(),
            status: BlockStatus::Fail,
            field_digests: Vec::new(),
            branch_hash: ZERO_HASH.to_string(),
            error_code: error.as_str().to_string(),
            timestamp: now,
            block_hash: String::new(),
            branch: None,
        }
        .seal();
        self.tx_index.insert(tx_id.to_string(), self.blocks.len());
        self.blocks.push(block);
        Ok(self.tip())
    }

    /// Re-attach party records to a freshly loaded chain and rebuild the
    /// per-data-point index from its PASS blocks, in height order.
    pub fn restore_parties<I>(&mut self, parties: I)
    where
        I: IntoIterator<Item = (String, TxParties)>,
    {
        self.parties = parties.into_iter().collect();
        self.datapoint_index.clear();
        let mut entries = Vec::new();
        for block in &self.blocks {
            if let (BlockStatus::Pass, Some(branch)) = (block.status, &block.branch) {
                if let Some(p) = self.parties.get(&block.tx_id) {
                    for field in branch.entries.keys() {
                        entries.push((p.owner.clone(), field.clone(), block.tx_id.clone()));
                    }
                }
            }
        }
        for (owner, field, tx_id) in entries {
            self.datapoint_index.entry((owner, field)).or_default().push(tx_id);
        }
    }

    /// Append-ordered PASS transaction ids that touched one owner's field.
    pub fn datapoint_chain(&self, owner: &str, field: &str) -> Vec<String> {
        self.datapoint_index
            .get(&(owner.to_string(), field.to_string()))
            .cloned()
            .unwrap_or_default()
    }

    /// Recompute every hash, digest and link from the stored blocks.
    pub fn verify(&self) -> IntegrityReport {
        let mut prev_hash = ZERO_HASH.to_string();
        let mut prev_timestamp = 0u64;
        for (i, block) in self.blocks.iter().enumerate() {
            if let Err(reason) = check_block(block, i as u64, &prev_hash, prev_timestamp) {
                return IntegrityReport::bad(i as u64, reason);
            }
            prev_hash = block.block_hash.clone();
            prev_timestamp = block.timestamp;
        }
        if self.blocks.is_empty() {
            return IntegrityReport::bad(0, "chain has no genesis block");
        }
        IntegrityReport::ok()
    }
}

/// All structural and cryptographic checks for one block, given its
/// expected height and its predecessor's hash and timestamp.
pub(crate) fn check_block(
    block: &MainBlock,
    height: u64,
    prev_hash: &str,
    prev_timestamp: u64,
) -> Result<(), String> {
    if block.height != height {
        return Err(format!(
            "height {} does not match position {}",
            block.height, height
        ));
    }
    if block.prev_hash != prev_hash {
        return Err("prev_hash does not match predecessor".to_string());
    }
    if height == 0 {
        if block.status != BlockStatus::Genesis
            || block.tx_id != GENESIS_TX_ID
            || block.timestamp != 0
        {
            return Err("malformed genesis block".to_string());
        }
    } else if block.status == BlockStatus::Genesis {
        return Err("GENESIS status above height 0".to_string());
    }
    if block.timestamp < prev_timestamp {
        return Err("timestamp regressed".to_string());
    }

    match block.status {
        BlockStatus::Pass => {
            let branch = block
                .branch
                .as_ref()
                .ok_or_else(|| "PASS block without branch".to_string())?;
            if branch.entries.is_empty() {
                return Err("branch block with no entries".to_string());
            }
            if !block.error_code.is_empty() {
                return Err("PASS block carries an error code".to_string());
            }
            let branch_hash = sha256_hex(&branch.canonical_bytes(&block.tx_id));
            if branch_hash != block.branch_hash {
                return Err("branch_hash does not match branch content".to_string());
            }
            let mut digests: Vec<String> = branch
                .entries
                .keys()
                .map(|name| sha256_hex(name.as_bytes()))
                .collect();
            digests.sort();
            if digests != block.field_digests {
                return Err("field_digests do not match branch field names".to_string());
            }
        }
        BlockStatus::Fail => {
            if block.branch.is_some() {
                return Err("FAIL block carries a branch".to_string());
            }
            if block.error_code.is_empty() {
                return Err("FAIL block without an error code".to_string());
            }
            if block.branch_hash != ZERO_HASH || !block.field_digests.is_empty() {
                return Err("FAIL block carries branch metadata".to_string());
            }
            if ReasonerErrorCode::from_str(&block.error_code).is_none() {
                return Err(format!("unknown error code {:?}", block.error_code));
            }
        }
        BlockStatus::Genesis => {
            if block.branch.is_some()
                || block.branch_hash != ZERO_HASH
                || !block.field_digests.is_empty()
                || !block.error_code.is_empty()
            {
                return Err("genesis block carries payload".to_string());
            }
        }
    }

    let expected = sha256_hex(&block.canonical_bytes());
    if expected != block.block_hash {
        return Err("block_hash does not match block content".to_string());
    }
    Ok(())
}

/// Verify the request against the policy and record the verdict: a PASS
/// block with branch on success, a FAIL block with the error otherwise.
/// Every admitted request produces exactly one block.
pub fn execute_transaction<'a>(
    tree: &PolicyTree,
    chain: &'a mut Chain,
    request: &TransactionRequest,
    now: u64,
) -> Result<(Verdict, &'a MainBlock), LedgerError> {
    chain.admit(&request.tx_id, now)?;
    if request.fields.is_empty() {
        return Err(LedgerError::EmptyFields);
    }
    let verdict = reasoner::verify_transaction(tree, request);
    if verdict.is_pass() {
        let owner = request.owner.clone();
        chain.branch_write(request, &owner, now)?;
    } else {
        let error = verdict.error.expect("failed verdict carries an error");
        chain.write_fail(&request.tx_id, error, now)?;
        chain.record_parties(
            &request.tx_id,
            TxParties {
                requester: request.requester.clone(),
                owner: request.owner.clone(),
                recipient: request.recipient.clone(),
            },
        );
    }
    Ok((verdict, chain.tip()))
}
