//! Deterministic, seeded discrete-event harness. Replays the whole
//! pipeline at a configurable scale over logical time and tallies
//! pass/fail per stage: policy ingestion, relation edits, reasoning,
//! ledger writes and queries. Identical configs (including the seed)
//! produce byte-identical reports and chains.

use std::collections::BTreeMap;
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ledger::{execute_transaction, Chain};
use crate::ontology::{parse_policy_document, vocab};
use crate::query::{query_transaction, QueryOutcome};
use crate::reasoner::TransactionRequest;
use crate::userbase::{ParticipantRole, UserBase};

/// The fixture privacy policy every experiment starts from.
pub const BASE_POLICY: &str = include_str!("../fixtures/base_policy.owx");

/// The PII fields every simulated end-user owns a data point for.
pub const FIELDS: [&str; 7] = [
    "Address",
    "CreditCard",
    "DOB",
    "Email",
    "Name",
    "PhoneNumber",
    "ZIP",
];

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub node_count: u32,
    /// Service-provider side of the SP:EU split.
    pub sp_ratio: u32,
    /// End-user side of the SP:EU split.
    pub eu_ratio: u32,
    /// Logical seconds the write workload runs for.
    pub duration: u64,
    /// Every end-user issues one query each time this many seconds pass.
    pub query_period: u64,
    pub writes_per_sp_per_second: u32,
    /// Share of generated requests that intentionally violate one
    /// sampled reasoner rule.
    pub violation_rate: f64,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            node_count: 10,
            sp_ratio: 1,
            eu_ratio: 1,
            duration: 100,
            query_period: 10,
            writes_per_sp_per_second: 1,
            violation_rate: 0.3,
            seed: 42,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SimulatorError {
    #[error("InvalidConfig: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CategoryTally {
    pub pass: u64,
    pub fail: u64,
}

impl CategoryTally {
    pub fn attempts(&self) -> u64 {
        self.pass + self.fail
    }

    fn record(&mut self, passed: bool) {
        if passed {
            self.pass += 1;
        } else {
            self.fail += 1;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ExperimentReport {
    pub consume_policy: CategoryTally,
    pub add_remove_relations: CategoryTally,
    pub reasoner: CategoryTally,
    pub write_blockchain: CategoryTally,
    pub query_blockchain: CategoryTally,
    pub chain_height: u64,
    pub integrity_ok: bool,
}

impl ExperimentReport {
    /// Canonical JSON with sorted keys.
    pub fn to_json(&self) -> String {
        let cat = |t: &CategoryTally| format!("{{\"fail\":{},\"pass\":{}}}", t.fail, t.pass);
        format!(
            "{{\"add_remove_relations\":{},\"chain_height\":{},\"consume_policy\":{},\"integrity_ok\":{},\"query_blockchain\":{},\"reasoner\":{},\"write_blockchain\":{}}}",
            cat(&self.add_remove_relations),
            self.chain_height,
            cat(&self.consume_policy),
            self.integrity_ok,
            cat(&self.query_blockchain),
            cat(&self.reasoner),
            cat(&self.write_blockchain),
        )
    }

    /// Aligned plain-text table, one row per workload category.
    pub fn to_table(&self) -> String {
        let rows = [
            ("ConsumePolicy", self.consume_policy),
            ("AddRemoveRelations", self.add_remove_relations),
            ("Reasoner", self.reasoner),
            ("WriteBlockchain", self.write_blockchain),
            ("QueryBlockchain", self.query_blockchain),
        ];
        let mut out = String::new();
        let _ = writeln!(out, "{:<20} {:>8} {:>8} {:>8}", "category", "pass", "fail", "total");
        for (name, tally) in rows {
            let _ = writeln!(
                out,
                "{:<20} {:>8} {:>8} {:>8}",
                name,
                tally.pass,
                tally.fail,
                tally.attempts()
            );
        }
        let _ = writeln!(out, "chain height: {}", self.chain_height);
        let _ = writeln!(
            out,
            "integrity:    {}",
            if self.integrity_ok { "ok" } else { "NOT OK" }
        );
        out
    }
}

/// The reasoner rule a data point is set up to violate, if any.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Flaw {
    None,
    NoConsentForUse,
    NoConsentToShare,
    NotSharable,
    Sensitive,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<(ExperimentReport, Chain), SimulatorError> {
    validate(config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut report = ExperimentReport::default();

    // --- t = 0: ingest the policy -----------------------------------
    let mut tree = match parse_policy_document(BASE_POLICY.as_bytes()) {
        Ok(tree) => {
            report.consume_policy.record(true);
            tree
        }
        Err(_) => return Err(SimulatorError::InvalidConfig("fixture policy is broken".into())),
    };
    // A deliberately malformed document exercises the rejection path.
    report
        .consume_policy
        .record(parse_policy_document(b"<Ontology><Bogus/></Ontology>").is_ok());

    // --- t = 0: participants ----------------------------------------
    let group = config.sp_ratio + config.eu_ratio;
    let groups = config.node_count / group;
    let n_sp = (groups * config.sp_ratio) as usize;
    let n_eu = (groups * config.eu_ratio) as usize;
    let sps: Vec<String> = (1..=n_sp).map(|i| format!("SP{i}")).collect();
    let eus: Vec<String> = (1..=n_eu).map(|i| format!("EU{i}")).collect();

    let mut userbase = UserBase::new();
    for sp in &sps {
        userbase.register(sp, ParticipantRole::ServiceProvider).expect("fresh id");
        tree.add_individual(sp, "Service_Provider").expect("fresh individual");
    }
    for eu in &eus {
        userbase.register(eu, ParticipantRole::EndUser).expect("fresh id");
        tree.add_individual(eu, "End_User").expect("fresh individual");
    }

    // --- t = 0: each SP registers its EU's data points with randomized
    //     consent relations, plus deliberately conflicting edits -------
    let mut flaws: BTreeMap<(String, String), Flaw> = BTreeMap::new();
    for (i, eu) in eus.iter().enumerate() {
        let sponsor = &sps[i % n_sp];
        for field in FIELDS {
            let d = format!("{eu}.{field}");
            tree.add_individual(&d, &format!("PII_{field}")).expect("fresh individual");
            report
                .add_remove_relations
                .record(tree.assert_relation(sponsor, &d, vocab::IS_DATA_OWNER, eu).is_ok());

            let flaw = match rng.gen_range(0..10u32) {
                0..=5 => Flaw::None,
                6 => Flaw::NoConsentForUse,
                7 => Flaw::NoConsentToShare,
                8 => Flaw::NotSharable,
                _ => Flaw::Sensitive,
            };
            flaws.insert((eu.clone(), field.to_string()), flaw);

            if flaw != Flaw::NoConsentForUse {
                report.add_remove_relations.record(
                    tree.assert_relation(eu, &d, vocab::HAS_CONSENT_FOR_USE, "Standing_Consent")
                        .is_ok(),
                );
            }
            if flaw != Flaw::NoConsentToShare && flaw != Flaw::Sensitive {
                report.add_remove_relations.record(
                    tree.assert_relation(eu, &d, vocab::HAS_CONSENT_TO_SHARE_PII, "Standing_Consent")
                        .is_ok(),
                );
            }
            if flaw != Flaw::NotSharable {
                report.add_remove_relations.record(
                    tree.assert_relation(eu, &d, vocab::IS_SHARABLE, vocab::AFFIRMED).is_ok(),
                );
            }
            if flaw == Flaw::Sensitive {
                report.add_remove_relations.record(
                    tree.assert_relation(eu, &d, vocab::IS_SENSITIVE_DATA, vocab::AFFIRMED)
                        .is_ok(),
                );
            }
        }

        // Conflicting edits: a non-owner mutation and a duplicate assert,
        // both rejected.
        let d = format!("{eu}.{}", FIELDS[0]);
        report
            .add_remove_relations
            .record(tree.assert_relation(sponsor, &d, vocab::IS_SHARABLE, vocab::AFFIRMED).is_ok());
        report
            .add_remove_relations
            .record(tree.assert_relation(eu, &d, vocab::IS_DATA_OWNER, eu).is_ok());
    }

    // --- logical clock ----------------------------------------------
    let mut chain = Chain::new();
    let mut written: Vec<String> = Vec::new();
    let mut counter = 0u64;

    for t in 1..=config.duration {
        for sp in &sps {
            for _ in 0..config.writes_per_sp_per_second {
                counter += 1;
                let request = generate_request(
                    &mut rng,
                    config,
                    sp,
                    &sps,
                    &eus,
                    &flaws,
                    format!("T{counter:06}"),
                );
                match execute_transaction(&tree, &mut chain, &request, t) {
                    Ok((verdict, _)) => {
                        report.reasoner.record(verdict.is_pass());
                        report.write_blockchain.record(verdict.is_pass());
                        written.push(request.tx_id.clone());
                    }
                    Err(_) => {
                        report.reasoner.record(false);
                        report.write_blockchain.record(false);
                    }
                }
            }
        }

        if t % config.query_period == 0 {
            for eu in &eus {
                if written.is_empty() {
                    continue;
                }
                let tx = &written[rng.gen_range(0..written.len() as u64) as usize];
                let passed = query_transaction(&chain, &tree, &userbase, eu, tx)
                    .map(|r| r.outcome == QueryOutcome::Full)
                    .unwrap_or(false);
                report.query_blockchain.record(passed);
            }
        }
    }

    report.chain_height = chain.height();
    report.integrity_ok = chain.verify().ok;
    Ok((report, chain))
}

#[allow(clippy::too_many_arguments)]
fn generate_request(
    rng: &mut ChaCha8Rng,
    config: &ExperimentConfig,
    requester: &str,
    sps: &[String],
    eus: &[String],
    flaws: &BTreeMap<(String, String), Flaw>,
    tx_id: String,
) -> TransactionRequest {
    let owner = eus[rng.gen_range(0..eus.len() as u64) as usize].clone();
    let recipient = sps[rng.gen_range(0..sps.len() as u64) as usize].clone();
    let violate = rng.gen_bool(config.violation_rate);

    let clean: Vec<&str> = FIELDS
        .iter()
        .copied()
        .filter(|f| flaws[&(owner.clone(), f.to_string())] == Flaw::None)
        .collect();
    let flawed: Vec<&str> = FIELDS
        .iter()
        .copied()
        .filter(|f| flaws[&(owner.clone(), f.to_string())] != Flaw::None)
        .collect();

    let mut fields = BTreeMap::new();
    let value = |rng: &mut ChaCha8Rng| format!("v{}", rng.gen::<u32>());

    if violate {
        // Either request a field that has no data point at all, or one
        // whose consent setup is known to break a rule.
        if flawed.is_empty() || rng.gen_bool(0.25) {
            let n = rng.gen_range(0..1000u32);
            let v = value(rng);
            fields.insert(format!("Unknown{n}"), v);
        } else {
            let f = flawed[rng.gen_range(0..flawed.len() as u64) as usize];
            let v = value(rng);
            fields.insert(f.to_string(), v);
        }
        // Plus up to two legitimate fields for realism.
        for _ in 0..rng.gen_range(0..=2u32) {
            if !clean.is_empty() {
                let f = clean[rng.gen_range(0..clean.len() as u64) as usize];
                let v = value(rng);
                fields.entry(f.to_string()).or_insert(v);
            }
        }
    } else {
        let want = rng.gen_range(1..=4u32);
        for _ in 0..want {
            if clean.is_empty() {
                break;
            }
            let f = clean[rng.gen_range(0..clean.len() as u64) as usize];
            let v = value(rng);
            fields.entry(f.to_string()).or_insert(v);
        }
        if fields.is_empty() {
            // Owner has no clean data point; the request will fail, but
            // it must still carry a field.
            let v = value(rng);
            fields.insert(FIELDS[0].to_string(), v);
        }
    }

    TransactionRequest {
        fields,
        owner,
        purpose: "General_Purpose".to_string(),
        recipient,
        requester: requester.to_string(),
        tx_id,
    }
}

fn validate(config: &ExperimentConfig) -> Result<(), SimulatorError> {
    let bad = |msg: &str| Err(SimulatorError::InvalidConfig(msg.to_string()));
    if config.node_count == 0 {
        return bad("node_count must be positive");
    }
    if config.sp_ratio == 0 || config.eu_ratio == 0 {
        return bad("both sides of the SP:EU ratio must be positive");
    }
    if config.node_count % (config.sp_ratio + config.eu_ratio) != 0 {
        return bad("node_count is not split exactly by the SP:EU ratio");
    }
    if config.query_period == 0 {
        return bad("query_period must be positive");
    }
    if config.writes_per_sp_per_second == 0 {
        return bad("writes_per_sp_per_second must be positive");
    }
    if !(0.0..=1.0).contains(&config.violation_rate) {
        return bad("violation_rate must be within [0, 1]");
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_attempt_counts() {
        let config = ExperimentConfig::default();
        let (report, chain) = run_experiment(&config).unwrap();
        // 5 SPs x 100 seconds x 1 write/s, 5 EUs querying every 10 seconds.
        assert_eq!(report.reasoner.attempts(), 500);
        assert_eq!(report.write_blockchain.attempts(), 500);
        assert_eq!(report.query_blockchain.attempts(), 50);
        assert_eq!(report.consume_policy.attempts(), 2);
        assert_eq!(report.consume_policy.fail, 1);
        // Every admitted request lands exactly one block above genesis.
        assert_eq!(report.chain_height, 500);
        assert_eq!(chain.height(), 500);
        assert_eq!(report.reasoner.pass, report.write_blockchain.pass);
        assert!(report.reasoner.fail > 0, "violation workload produced no failures");
        assert!(report.reasoner.pass > 0, "clean workload produced no passes");
        assert!(report.integrity_ok);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let config = ExperimentConfig::default();
        let (r1, c1) = run_experiment(&config).unwrap();
        let (r2, c2) = run_experiment(&config).unwrap();
        assert_eq!(r1, r2);
        assert_eq!(c1.blocks(), c2.blocks());
        assert_eq!(r1.to_json(), r2.to_json());
    }

    #[test]
    fn different_seed_diverges() {
        let (r1, _) = run_experiment(&ExperimentConfig::default()).unwrap();
        let (r2, _) = run_experiment(&ExperimentConfig {
            seed: 43,
            ..ExperimentConfig::default()
        })
        .unwrap();
        assert_ne!(r1, r2);
    }

    #[test]
    fn zero_duration_runs_setup_only() {
        let config = ExperimentConfig {
            duration: 0,
            ..ExperimentConfig::default()
        };
        let (report, chain) = run_experiment(&config).unwrap();
        assert_eq!(report.reasoner.attempts(), 0);
        assert_eq!(report.query_blockchain.attempts(), 0);
        assert!(report.add_remove_relations.attempts() > 0);
        assert_eq!(chain.height(), 0);
        assert!(report.integrity_ok);
    }

    #[test]
    fn zero_violation_rate_only_fails_on_flawed_setups() {
        let config = ExperimentConfig {
            violation_rate: 0.0,
            node_count: 4,
            duration: 20,
            ..ExperimentConfig::default()
        };
        let (report, _) = run_experiment(&config).unwrap();
        assert_eq!(report.reasoner.attempts(), 40);
        // Clean requests only fall back to a flawed field when an owner
        // has no clean data point at all, so passes dominate.
        assert!(report.reasoner.pass >= report.reasoner.fail);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for config in [
            ExperimentConfig { node_count: 0, ..ExperimentConfig::default() },
            ExperimentConfig { sp_ratio: 0, ..ExperimentConfig::default() },
            ExperimentConfig { node_count: 7, ..ExperimentConfig::default() },
            ExperimentConfig { query_period: 0, ..ExperimentConfig::default() },
            ExperimentConfig { writes_per_sp_per_second: 0, ..ExperimentConfig::default() },
            ExperimentConfig { violation_rate: 1.5, ..ExperimentConfig::default() },
        ] {
            assert!(matches!(
                run_experiment(&config),
                Err(SimulatorError::InvalidConfig(_))
            ));
        }
    }

    #[test]
    fn report_renderings_agree() {
        let (report, _) = run_experiment(&ExperimentConfig::default()).unwrap();
        let value: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(value["reasoner"]["pass"], report.reasoner.pass);
        assert_eq!(value["chain_height"], 500);
        assert_eq!(value["integrity_ok"], true);
        let table = report.to_table();
        assert!(table.contains("ConsumePolicy"));
        assert!(table.contains("QueryBlockchain"));
        assert!(table.contains(&format!("chain height: {}", report.chain_height)));
    }
}
