//! Chain persistence: one JSON object per main block, one block per
//! line in height order, all object keys sorted, no insignificant
//! whitespace, hashes in lowercase hex. The file is strictly
//! append-only and is the bit-exact source of truth for integrity
//! verification.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use serde_json::Value;

use super::{check_block, BlockStatus, BranchBlock, Chain, IntegrityReport, MainBlock, ZERO_HASH};

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

/// One canonical JSON line (without trailing newline) for a block. Keys
/// are emitted in sorted order explicitly; the encoding must not depend
/// on map iteration order of any library.
pub fn block_to_json_line(block: &MainBlock) -> String {
    let mut out = String::with_capacity(384);
    out.push('{');
    out.push_str("\"block_hash\":");
    out.push_str(&json_str(&block.block_hash));
    if let Some(branch) = &block.branch {
        out.push_str(",\"branch\":{");
        for (i, (name, value)) in branch.entries.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            out.push_str(&json_str(name));
            out.push(':');
            out.push_str(&json_str(value));
        }
        out.push('}');
    }
    out.push_str(",\"branch_hash\":");
    out.push_str(&json_str(&block.branch_hash));
    out.push_str(",\"error_code\":");
    out.push_str(&json_str(&block.error_code));
    out.push_str(",\"field_digests\":[");
    for (i, digest) in block.field_digests.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&json_str(digest));
    }
    out.push(']');
    out.push_str(",\"height\":");
    out.push_str(&block.height.to_string());
    out.push_str(",\"prev_hash\":");
    out.push_str(&json_str(&block.prev_hash));
    out.push_str(",\"status\":");
    out.push_str(&json_str(block.status.as_str()));
    out.push_str(",\"timestamp\":");
    out.push_str(&block.timestamp.to_string());
    out.push_str(",\"tx_id\":");
    out.push_str(&json_str(&block.tx_id));
    out.push('}');
    out
}

pub fn block_from_json_line(line: &str) -> Result<MainBlock, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("bad JSON: {e}"))?;
    let obj = value.as_object().ok_or("record is not a JSON object")?;

    for key in obj.keys() {
        match key.as_str() {
            "block_hash" | "branch" | "branch_hash" | "error_code" | "field_digests"
            | "height" | "prev_hash" | "status" | "timestamp" | "tx_id" => {}
            other => return Err(format!("unexpected key {other:?}")),
        }
    }

    let get_str = |key: &str| -> Result<String, String> {
        obj.get(key)
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| format!("missing or non-string {key:?}"))
    };
    let get_u64 = |key: &str| -> Result<u64, String> {
        obj.get(key)
            .and_then(Value::as_u64)
            .ok_or_else(|| format!("missing or non-integer {key:?}"))
    };

    let status = BlockStatus::from_str(&get_str("status")?)
        .ok_or_else(|| "unknown status".to_string())?;
    let field_digests = obj
        .get("field_digests")
        .and_then(Value::as_array)
        .ok_or("missing field_digests")?
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| "non-string field digest".to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let branch = match obj.get("branch") {
        None => None,
        Some(v) => {
            let entries = v
                .as_object()
                .ok_or("branch is not an object")?
                .iter()
                .map(|(k, v)| {
                    v.as_str()
                        .map(|s| (k.clone(), s.to_string()))
                        .ok_or_else(|| "non-string branch value".to_string())
                })
                .collect::<Result<_, _>>()?;
            Some(BranchBlock { entries })
        }
    };

    Ok(MainBlock {
        height: get_u64("height")?,
        prev_hash: get_str("prev_hash")?,
        tx_id: get_str("tx_id")?,
        status,
        field_digests,
        branch_hash: get_str("branch_hash")?,
        error_code: get_str("error_code")?,
        timestamp: get_u64("timestamp")?,
        block_hash: get_str("block_hash")?,
        branch,
    })
}

/// Write the whole chain to `path`, replacing any existing file.
pub fn save_chain(path: &Path, chain: &Chain) -> std::io::Result<()> {
    let mut out = String::new();
    for block in chain.blocks() {
        out.push_str(&block_to_json_line(block));
        out.push('\n');
    }
    std::fs::write(path, out)
}

/// Append one block line; creates the file if absent.
pub fn append_block(path: &Path, block: &MainBlock) -> std::io::Result<()> {
    let mut file = OpenOptions::new().create(true).append(true).open(path)?;
    file.write_all(block_to_json_line(block).as_bytes())?;
    file.write_all(b"\n")
}

/// Load a persisted chain and rebuild its transaction index. The
/// per-data-point index and party records live outside the chain file
/// and are restored by the caller. Fails on the first structurally or
/// cryptographically bad record.
pub fn load_chain(path: &Path) -> Result<Chain, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read chain file: {e}"))?;
    let report = verify_bytes(&bytes);
    if !report.ok {
        return Err(format!(
            "corrupt chain file at height {}: {}",
            report.first_bad_height.unwrap_or(0),
            report.reason
        ));
    }
    let text = String::from_utf8(bytes).expect("verified chain file is UTF-8");
    let mut chain = Chain::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            continue; // genesis is rebuilt by Chain::new and byte-checked above
        }
        let block = block_from_json_line(line)?;
        chain.tx_index.insert(block.tx_id.clone(), i);
        chain.blocks.push(block);
    }
    Ok(chain)
}

/// Integrity-check a persisted chain file from its raw bytes.
pub fn verify_file(path: &Path) -> std::io::Result<IntegrityReport> {
    Ok(verify_bytes(&std::fs::read(path)?))
}

pub fn verify_bytes(bytes: &[u8]) -> IntegrityReport {
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => {
            // The record at the first invalid byte is the culprit.
            let height = bytes[..e.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count() as u64;
            return IntegrityReport {
                ok: false,
                first_bad_height: Some(height),
                reason: "file is not UTF-8".to_string(),
            };
        }
    };

    let mut prev_hash = ZERO_HASH.to_string();
    let mut prev_timestamp = 0u64;
    let mut height = 0u64;
    for line in text.lines() {
        let block = match block_from_json_line(line) {
            Ok(b) => b,
            Err(reason) => {
                return IntegrityReport {
                    ok: false,
                    first_bad_height: Some(height),
                    reason,
                }
            }
        };
        // The stored line must be the canonical encoding of the record;
        // re-encode and compare so stray-but-parseable edits are caught.
        if block_to_json_line(&block) != line {
            return IntegrityReport {
                ok: false,
                first_bad_height: Some(height),
                reason: "record is not in canonical form".to_string(),
            };
        }
        if let Err(reason) = check_block(&block, height, &prev_hash, prev_timestamp) {
            return IntegrityReport {
                ok: false,
                first_bad_height: Some(height),
                reason,
            };
        }
        prev_hash = block.block_hash.clone();
        prev_timestamp = block.timestamp;
        height += 1;
    }
    if height == 0 {
        return IntegrityReport {
            ok: false,
            first_bad_height: Some(0),
            reason: "chain file has no genesis record".to_string(),
        };
    }
    IntegrityReport {
        ok: true,
        first_bad_height: None,
        reason: String::new(),
    }
}
