//! Data-directory handling and canonical JSON helpers for the CLI. The
//! home directory holds the active policy (`policy.owx`), the
//! participant registry (`registry.jsonl`), the chain (`chain.jsonl`),
//! the per-transaction party records (`transactions.jsonl`) and open
//! proposals (`proposals.json`).

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};

use linkshare_core::ledger::{self, Chain, IntegrityReport, TxParties};
use linkshare_core::ontology::{parse_policy_document, serialize_policy, PolicyTree};
use linkshare_core::reasoner::TransactionRequest;
use linkshare_core::userbase::{ParticipantRole, PolicyProposal, ProposalState, UserBase};

#[derive(Debug)]
pub enum CliError {
    /// Module-level rejection; exit status 1.
    Domain(String),
    /// Filesystem or encoding problem; exit status 2.
    Io(String),
}

impl CliError {
    pub fn domain<E: Display>(e: E) -> CliError {
        CliError::Domain(e.to_string())
    }
}

pub fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization is infallible")
}

pub fn json_object_u64(map: &BTreeMap<&str, u64>) -> String {
    let body: Vec<String> = map
        .iter()
        .map(|(k, v)| format!("{}:{}", json_str(k), v))
        .collect();
    format!("{{{}}}", body.join(","))
}

pub fn proposal_json(p: &PolicyProposal) -> String {
    let votes: Vec<String> = p
        .votes
        .iter()
        .map(|(v, d)| format!("{}:{}", json_str(v), d))
        .collect();
    let state = match p.state {
        ProposalState::Open => "Open",
        ProposalState::Applied => "Applied",
        ProposalState::Rejected => "Rejected",
    };
    let mut out = String::from("{");
    out.push_str(&format!("\"proposal_id\":{}", json_str(&p.proposal_id)));
    out.push_str(&format!(",\"proposer\":{}", json_str(&p.proposer)));
    if let Some(reason) = &p.reason {
        out.push_str(&format!(",\"reason\":{}", json_str(reason)));
    }
    out.push_str(&format!(",\"state\":{}", json_str(state)));
    out.push_str(&format!(",\"votes\":{{{}}}}}", votes.join(",")));
    out
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

pub struct Home {
    dir: PathBuf,
}

impl Home {
    pub fn new(dir: PathBuf) -> Home {
        Home { dir }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    fn write(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        if !self.dir.exists() {
            std::fs::create_dir_all(&self.dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", self.dir.display())))?;
        }
        let path = self.path(name);
        std::fs::write(&path, bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn load_policy(&self) -> Result<PolicyTree, CliError> {
        let path = self.path("policy.owx");
        if !path.exists() {
            return Err(CliError::Io(format!(
                "no active policy at {}; run `linkshare ingest` first",
                path.display()
            )));
        }
        parse_policy_document(&read_file(&path)?).map_err(CliError::domain)
    }

    pub fn save_policy(&self, tree: &PolicyTree) -> Result<(), CliError> {
        self.write("policy.owx", &serialize_policy(tree))
    }

    pub fn load_userbase(&self) -> Result<UserBase, CliError> {
        let path = self.path("registry.jsonl");
        let mut userbase = UserBase::new();
        if !path.exists() {
            return Ok(userbase);
        }
        let text = String::from_utf8(read_file(&path)?)
            .map_err(|_| CliError::Io("registry file is not UTF-8".to_string()))?;
        for line in text.lines() {
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| CliError::Io(format!("bad registry record: {e}")))?;
            let id = value["id"]
                .as_str()
                .ok_or_else(|| CliError::Io("registry record without id".to_string()))?;
            let role = value["role"]
                .as_str()
                .and_then(ParticipantRole::from_str)
                .ok_or_else(|| CliError::Io("registry record without valid role".to_string()))?;
            userbase.register(id, role).map_err(CliError::domain)?;
        }
        Ok(userbase)
    }

    pub fn append_participant(&self, id: &str, role: ParticipantRole) -> Result<(), CliError> {
        let line = format!("{{\"id\":{},\"role\":{}}}\n", json_str(id), json_str(role.as_str()));
        self.append("registry.jsonl", line.as_bytes())
    }

    pub fn load_chain(&self) -> Result<Chain, CliError> {
        let path = self.path("chain.jsonl");
        if !path.exists() {
            return Ok(Chain::new());
        }
        let mut chain = ledger::load_chain(&path).map_err(CliError::Io)?;
        chain.restore_parties(self.load_parties()?);
        Ok(chain)
    }

    fn load_parties(&self) -> Result<Vec<(String, TxParties)>, CliError> {
        let path = self.path("transactions.jsonl");
        if !path.exists() {
            return Ok(Vec::new());
        }
        let text = String::from_utf8(read_file(&path)?)
            .map_err(|_| CliError::Io("transactions file is not UTF-8".to_string()))?;
        let mut parties = Vec::new();
        for line in text.lines() {
            let value: serde_json::Value = serde_json::from_str(line)
                .map_err(|e| CliError::Io(format!("bad transaction record: {e}")))?;
            let get = |key: &str| -> Result<String, CliError> {
                value[key]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| CliError::Io(format!("transaction record without {key}")))
            };
            parties.push((
                get("tx_id")?,
                TxParties {
                    requester: get("requester")?,
                    owner: get("owner")?,
                    recipient: get("recipient")?,
                },
            ));
        }
        Ok(parties)
    }

    /// Persist the chain's newest block: the whole file on first write
    /// (including genesis), an appended line afterwards.
    pub fn append_chain_block(&self, chain_tip: &ledger::MainBlock) -> Result<(), CliError> {
        let path = self.path("chain.jsonl");
        if !path.exists() {
            // Write genesis first so the file verifies from height 0.
            let fresh = Chain::new();
            ledger::save_chain(&path, &fresh)
                .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))?;
        }
        ledger::append_block(&path, chain_tip)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn append_transaction(&self, request: &TransactionRequest) -> Result<(), CliError> {
        let line = format!(
            "{{\"owner\":{},\"recipient\":{},\"requester\":{},\"tx_id\":{}}}\n",
            json_str(&request.owner),
            json_str(&request.recipient),
            json_str(&request.requester),
            json_str(&request.tx_id)
        );
        self.append("transactions.jsonl", line.as_bytes())
    }

    fn append(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        use std::io::Write;
        if !self.dir.exists() {
            std::fs::create_dir_all(&self.dir)
                .map_err(|e| CliError::Io(format!("cannot create {}: {e}", self.dir.display())))?;
        }
        let path = self.path(name);
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| CliError::Io(format!("cannot open {}: {e}", path.display())))?;
        file.write_all(bytes)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
    }

    pub fn verify_chain(&self) -> Result<IntegrityReport, CliError> {
        let path = self.path("chain.jsonl");
        if !path.exists() {
            return Err(CliError::Io(format!(
                "no chain file at {}",
                path.display()
            )));
        }
        ledger::verify_file(&path)
            .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
    }

    pub fn load_proposals(&self) -> Result<BTreeMap<String, PolicyProposal>, CliError> {
        let path = self.path("proposals.json");
        if !path.exists() {
            return Ok(BTreeMap::new());
        }
        serde_json::from_slice(&read_file(&path)?)
            .map_err(|e| CliError::Io(format!("bad proposals file: {e}")))
    }

    pub fn save_proposals(
        &self,
        proposals: &BTreeMap<String, PolicyProposal>,
    ) -> Result<(), CliError> {
        let bytes = serde_json::to_vec(proposals).expect("proposal serialization is infallible");
        self.write("proposals.json", &bytes)
    }
}
