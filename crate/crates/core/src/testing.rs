//! Canned scenario fixtures for tests, examples and benchmarks.

use std::collections::BTreeMap;

use crate::ontology::{parse_policy_document, vocab, PolicyTree};
use crate::reasoner::TransactionRequest;
use crate::simulator::BASE_POLICY;
use crate::userbase::{ParticipantRole, UserBase};

/// The sharing scenario: providers Netflix and Amazon, end-user User1
/// owning Name, ZIP and CreditCard data points with full consents, plus
/// an uninvolved end-user and a trusted third party.
pub struct Scenario {
    pub tree: PolicyTree,
    pub userbase: UserBase,
    pub request: TransactionRequest,
}

pub fn netflix_scenario() -> Scenario {
    let mut tree = parse_policy_document(BASE_POLICY.as_bytes()).expect("fixture policy parses");
    tree.add_individual("Netflix", "Service_Provider").unwrap();
    tree.add_individual("Amazon", "Service_Provider").unwrap();
    tree.add_individual("User1", "End_User").unwrap();
    tree.add_individual("User2", "End_User").unwrap();

    for field in ["Name", "ZIP", "CreditCard"] {
        let d = format!("User1.{field}");
        tree.add_individual(&d, &format!("PII_{field}")).unwrap();
        tree.assert_relation("Netflix", &d, vocab::IS_DATA_OWNER, "User1").unwrap();
        tree.assert_relation("User1", &d, vocab::HAS_CONSENT_FOR_USE, "Standing_Consent")
            .unwrap();
        tree.assert_relation("User1", &d, vocab::HAS_CONSENT_TO_SHARE_PII, "Standing_Consent")
            .unwrap();
        tree.assert_relation("User1", &d, vocab::IS_SHARABLE, vocab::AFFIRMED).unwrap();
    }

    let mut userbase = UserBase::new();
    userbase.register("Netflix", ParticipantRole::ServiceProvider).unwrap();
    userbase.register("Amazon", ParticipantRole::ServiceProvider).unwrap();
    userbase.register("User1", ParticipantRole::EndUser).unwrap();
    userbase.register("User2", ParticipantRole::EndUser).unwrap();
    userbase.register("Auditor1", ParticipantRole::TrustedThirdParty).unwrap();

    let mut fields = BTreeMap::new();
    fields.insert("Name".to_string(), "Alice".to_string());
    fields.insert("ZIP".to_string(), "21250".to_string());
    fields.insert("CreditCard".to_string(), "4111111111111111".to_string());

    Scenario {
        tree,
        userbase,
        request: TransactionRequest {
            fields,
            owner: "User1".to_string(),
            purpose: "General_Purpose".to_string(),
            recipient: "Amazon".to_string(),
            requester: "Netflix".to_string(),
            tx_id: "T1".to_string(),
        },
    }
}
