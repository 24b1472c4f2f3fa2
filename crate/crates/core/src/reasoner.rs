//! Purpose-centric transaction verification. Every PII-sharing request
//! is checked field by field against the consent, sharability and
//! purpose-chain relations the policy requires; the first failing check
//! decides the verdict.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{vocab, is_valid_identifier, OntologyError, PolicyTree};

/// One PII-sharing attempt. Wire form is a JSON object with keys in
/// this (sorted) order; `fields` maps PII field name to value.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransactionRequest {
    pub fields: BTreeMap<String, String>,
    pub owner: String,
    pub purpose: String,
    pub recipient: String,
    pub requester: String,
    pub tx_id: String,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RequestError {
    #[error("InvalidIdentifier: {0:?}")]
    InvalidIdentifier(String),
    #[error("EmptyFields: request shares no fields")]
    EmptyFields,
    #[error("InvalidValue: field {0:?} contains a reserved control byte")]
    InvalidValue(String),
}

impl TransactionRequest {
    /// Shape validation: identifiers well-formed, at least one field,
    /// no 0x1F bytes (the branch-serialization delimiter) in names or
    /// values.
    pub fn validate(&self) -> Result<(), RequestError> {
        for id in [&self.tx_id, &self.requester, &self.owner, &self.recipient, &self.purpose] {
            if !is_valid_identifier(id) {
                return Err(RequestError::InvalidIdentifier(id.clone()));
            }
        }
        if self.fields.is_empty() {
            return Err(RequestError::EmptyFields);
        }
        for (name, value) in &self.fields {
            if !is_valid_identifier(name) {
                return Err(RequestError::InvalidIdentifier(name.clone()));
            }
            if value.contains('\u{1f}') {
                return Err(RequestError::InvalidValue(name.clone()));
            }
        }
        Ok(())
    }

    /// The ontology individual holding the policy relations for one of
    /// this request's fields.
    pub fn data_point(&self, field: &str) -> String {
        data_point(&self.owner, field)
    }
}

/// Owner-qualified data-point individual name for a PII field.
pub fn data_point(owner: &str, field: &str) -> String {
    format!("{owner}.{field}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReasonerErrorCode {
    MissingField,
    NoConsentForUse,
    NoConsentToShare,
    NotSharable,
    SensitiveWithoutExplicitConsent,
    NoPurposeChain,
    DomainRangeViolation,
    InconsistentOntology,
}

impl ReasonerErrorCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ReasonerErrorCode::MissingField => "MissingField",
            ReasonerErrorCode::NoConsentForUse => "NoConsentForUse",
            ReasonerErrorCode::NoConsentToShare => "NoConsentToShare",
            ReasonerErrorCode::NotSharable => "NotSharable",
            ReasonerErrorCode::SensitiveWithoutExplicitConsent => {
                "SensitiveWithoutExplicitConsent"
            }
            ReasonerErrorCode::NoPurposeChain => "NoPurposeChain",
            ReasonerErrorCode::DomainRangeViolation => "DomainRangeViolation",
            ReasonerErrorCode::InconsistentOntology => "InconsistentOntology",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "MissingField" => ReasonerErrorCode::MissingField,
            "NoConsentForUse" => ReasonerErrorCode::NoConsentForUse,
            "NoConsentToShare" => ReasonerErrorCode::NoConsentToShare,
            "NotSharable" => ReasonerErrorCode::NotSharable,
            "SensitiveWithoutExplicitConsent" => {
                ReasonerErrorCode::SensitiveWithoutExplicitConsent
            }
            "NoPurposeChain" => ReasonerErrorCode::NoPurposeChain,
            "DomainRangeViolation" => ReasonerErrorCode::DomainRangeViolation,
            "InconsistentOntology" => ReasonerErrorCode::InconsistentOntology,
            _ => return None,
        })
    }
}

impl std::fmt::Display for ReasonerErrorCode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VerdictStatus {
    Pass,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub status: VerdictStatus,
    pub error: Option<ReasonerErrorCode>,
    pub failing_field: Option<String>,
}

impl Verdict {
    pub fn pass() -> Self {
        Verdict {
            status: VerdictStatus::Pass,
            error: None,
            failing_field: None,
        }
    }

    pub fn fail(error: ReasonerErrorCode, failing_field: Option<String>) -> Self {
        Verdict {
            status: VerdictStatus::Fail,
            error: Some(error),
            failing_field,
        }
    }

    pub fn is_pass(&self) -> bool {
        self.status == VerdictStatus::Pass
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    DomainRangeViolation,
    DanglingReference,
    SubclassCycle,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub kind: ViolationKind,
    pub subject: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsistencyReport {
    pub violations: Vec<Violation>,
}

impl ConsistencyReport {
    pub fn consistent(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Audit the whole tree: subclass cycles, dangling references and triple
/// domain/range conformance under the subclass closure. Trees built
/// through the validated mutation API come out clean.
pub fn check_consistency(tree: &PolicyTree) -> ConsistencyReport {
    let mut violations = Vec::new();

    // Subclass cycles (possible only in raw-parts trees).
    for class in tree.classes() {
        let mut cursor = class.parent.as_deref();
        let mut steps = 0usize;
        let limit = tree.classes().count();
        while let Some(c) = cursor {
            if c == class.name {
                violations.push(Violation {
                    kind: ViolationKind::SubclassCycle,
                    subject: format!("class {}", class.name),
                });
                break;
            }
            steps += 1;
            if steps > limit {
                break;
            }
            cursor = tree.class(c).and_then(|pc| pc.parent.as_deref());
        }
        if let Some(parent) = &class.parent {
            if tree.class(parent).is_none() {
                violations.push(Violation {
                    kind: ViolationKind::DanglingReference,
                    subject: format!("class {} -> parent {}", class.name, parent),
                });
            }
        }
    }

    for prop in tree.properties() {
        for class in [&prop.domain, &prop.range] {
            if tree.class(class).is_none() {
                violations.push(Violation {
                    kind: ViolationKind::DanglingReference,
                    subject: format!("property {} -> class {}", prop.name, class),
                });
            }
        }
    }

    for ind in tree.individuals() {
        if tree.class(&ind.class).is_none() {
            violations.push(Violation {
                kind: ViolationKind::DanglingReference,
                subject: format!("individual {} -> class {}", ind.name, ind.class),
            });
        }
    }

    for t in tree.triples() {
        let subj = tree.individual(&t.subject);
        let prop = tree.property(&t.property);
        let obj = tree.individual(&t.object);
        if subj.is_none() || prop.is_none() || obj.is_none() {
            violations.push(Violation {
                kind: ViolationKind::DanglingReference,
                subject: format!("triple ({}, {}, {})", t.subject, t.property, t.object),
            });
            continue;
        }
        let (subj, prop, obj) = (subj.unwrap(), prop.unwrap(), obj.unwrap());
        if !tree.is_ancestor(&prop.domain, &subj.class)
            || !tree.is_ancestor(&prop.range, &obj.class)
        {
            violations.push(Violation {
                kind: ViolationKind::DomainRangeViolation,
                subject: format!("triple ({}, {}, {})", t.subject, t.property, t.object),
            });
        }
    }

    ConsistencyReport { violations }
}

/// True iff `ancestor` subsumes `descendant` under the reflexive-
/// transitive subclass closure.
pub fn subsumes(
    tree: &PolicyTree,
    ancestor: &str,
    descendant: &str,
) -> Result<bool, OntologyError> {
    for class in [ancestor, descendant] {
        if tree.class(class).is_none() {
            return Err(OntologyError::UnknownClass(class.to_string()));
        }
    }
    Ok(tree.is_ancestor(ancestor, descendant))
}

/// Decide a transaction. Fields are checked in lexicographic order and
/// each field runs the rule sequence below; the first failure is the
/// verdict. An inconsistent ontology fails closed before any field is
/// looked at.
pub fn verify_transaction(tree: &PolicyTree, request: &TransactionRequest) -> Verdict {
    if !check_consistency(tree).consistent() {
        return Verdict::fail(ReasonerErrorCode::InconsistentOntology, None);
    }

    let third_party = request.recipient != request.requester;
    for field in request.fields.keys() {
        let d = request.data_point(field);
        let fail = |code| Verdict::fail(code, Some(field.clone()));

        // 1. The data point must exist and be PII.
        let is_pii = tree
            .individual(&d)
            .map(|ind| tree.is_ancestor(vocab::PII, &ind.class))
            .unwrap_or(false);
        if !is_pii {
            return fail(ReasonerErrorCode::MissingField);
        }
        // 2. Consent for use.
        if !tree.has_relation(&d, vocab::HAS_CONSENT_FOR_USE) {
            return fail(ReasonerErrorCode::NoConsentForUse);
        }
        // 3. Consent to share with a third party.
        let share_consent = tree.has_relation(&d, vocab::HAS_CONSENT_TO_SHARE_PII);
        if third_party && !share_consent {
            return fail(ReasonerErrorCode::NoConsentToShare);
        }
        // 4. The owner has marked the point sharable.
        if !tree.has_triple(&d, vocab::IS_SHARABLE, vocab::AFFIRMED) {
            return fail(ReasonerErrorCode::NotSharable);
        }
        // 5. Sensitive data needs both consents regardless of recipient.
        if tree.has_triple(&d, vocab::IS_SENSITIVE_DATA, vocab::AFFIRMED) && !share_consent {
            return fail(ReasonerErrorCode::SensitiveWithoutExplicitConsent);
        }
        // 6. A purpose chain Collection_Purpose -> Data_Protection ->
        //    Access_Control must exist for the request's purpose.
        if !purpose_chain_exists(tree, &request.purpose) {
            return fail(ReasonerErrorCode::NoPurposeChain);
        }
    }

    Verdict::pass()
}

fn purpose_chain_exists(tree: &PolicyTree, purpose: &str) -> bool {
    let purpose_ok = tree
        .individual(purpose)
        .map(|ind| tree.is_ancestor(vocab::COLLECTION_PURPOSE, &ind.class))
        .unwrap_or(false);
    if !purpose_ok {
        return false;
    }
    tree.objects_of(purpose, vocab::HAS_DATA_PROTECTION).any(|dp| {
        let dp_ok = tree
            .individual(dp)
            .map(|ind| tree.is_ancestor(vocab::DATA_PROTECTION, &ind.class))
            .unwrap_or(false);
        dp_ok
            && tree.objects_of(dp, vocab::HAS_ACCESS_CONTROL).any(|ac| {
                tree.individual(ac)
                    .map(|ind| tree.is_ancestor(vocab::ACCESS_CONTROL, &ind.class))
                    .unwrap_or(false)
            })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ontology::{Individual, PolicyClass, PolicyProperty, RelationTriple};
    use crate::testing::netflix_scenario;

    #[test]
    fn scenario_request_passes() {
        let s = netflix_scenario();
        assert_eq!(verify_transaction(&s.tree, &s.request), Verdict::pass());
    }

    #[test]
    fn retracted_sharable_flag_fails_with_field() {
        let mut s = netflix_scenario();
        s.tree
            .retract_relation(
                "User1",
                &RelationTriple::new("User1.CreditCard", vocab::IS_SHARABLE, vocab::AFFIRMED),
            )
            .unwrap();
        assert_eq!(
            verify_transaction(&s.tree, &s.request),
            Verdict::fail(ReasonerErrorCode::NotSharable, Some("CreditCard".into()))
        );
    }

    #[test]
    fn unknown_data_point_is_missing_field() {
        let mut s = netflix_scenario();
        s.request.fields.insert("SSN".into(), "000-00-0000".into());
        assert_eq!(
            verify_transaction(&s.tree, &s.request),
            Verdict::fail(ReasonerErrorCode::MissingField, Some("SSN".into()))
        );
    }

    #[test]
    fn non_pii_individual_is_missing_field() {
        let mut s = netflix_scenario();
        // A data point whose class is outside the PII hierarchy.
        s.tree.add_individual("User1.Mood", "Service_Provider").unwrap();
        s.request.fields.insert("Mood".into(), "fine".into());
        assert_eq!(
            verify_transaction(&s.tree, &s.request),
            Verdict::fail(ReasonerErrorCode::MissingField, Some("Mood".into()))
        );
    }

    #[test]
    fn share_consent_only_needed_for_third_parties() {
        let mut s = netflix_scenario();
        s.tree
            .retract_relation(
                "User1",
                &RelationTriple::new(
                    "User1.ZIP",
                    vocab::HAS_CONSENT_TO_SHARE_PII,
                    "Standing_Consent",
                ),
            )
            .unwrap();
        assert_eq!(
            verify_transaction(&s.tree, &s.request),
            Verdict::fail(ReasonerErrorCode::NoConsentToShare, Some("ZIP".into()))
        );
        // Same request kept in-house passes without share consent.
        s.request.recipient = s.request.requester.clone();
        assert_eq!(verify_transaction(&s.tree, &s.request), Verdict::pass());
    }

    #[test]
    fn sensitive_data_needs_both_consents_even_in_house() {
        let mut s = netflix_scenario();
        s.tree
            .assert_relation("User1", "User1.CreditCard", vocab::IS_SENSITIVE_DATA, vocab::AFFIRMED)
            .unwrap();
        s.tree
            .retract_relation(
                "User1",
                &RelationTriple::new(
                    "User1.CreditCard",
                    vocab::HAS_CONSENT_TO_SHARE_PII,
                    "Standing_Consent",
                ),
            )
            .unwrap();
        s.request.recipient = s.request.requester.clone();
        assert_eq!(
            verify_transaction(&s.tree, &s.request),
            Verdict::fail(
                ReasonerErrorCode::SensitiveWithoutExplicitConsent,
                Some("CreditCard".into())
            )
        );
    }

    #[test]
    fn missing_purpose_chain_fails() {
        let mut s = netflix_scenario();
        s.tree
            .retract_relation(
                "User1",
                &RelationTriple::new(
                    "General_Purpose",
                    vocab::HAS_DATA_PROTECTION,
                    "Standard_Protection",
                ),
            )
            .unwrap();
        // First field in lexicographic order carries the report.
        assert_eq!(
            verify_transaction(&s.tree, &s.request),
            Verdict::fail(ReasonerErrorCode::NoPurposeChain, Some("CreditCard".into()))
        );
    }

    #[test]
    fn first_failure_in_lexicographic_field_order_wins() {
        let mut s = netflix_scenario();
        s.tree
            .retract_relation(
                "User1",
                &RelationTriple::new("User1.CreditCard", vocab::IS_SHARABLE, vocab::AFFIRMED),
            )
            .unwrap();
        s.tree
            .retract_relation(
                "User1",
                &RelationTriple::new(
                    "User1.ZIP",
                    vocab::HAS_CONSENT_FOR_USE,
                    "Standing_Consent",
                ),
            )
            .unwrap();
        // CreditCard < ZIP, so its NotSharable verdict is reported.
        assert_eq!(
            verify_transaction(&s.tree, &s.request),
            Verdict::fail(ReasonerErrorCode::NotSharable, Some("CreditCard".into()))
        );
    }

    #[test]
    fn inconsistent_ontology_fails_closed() {
        let s = netflix_scenario();
        let mut classes: Vec<PolicyClass> = s.tree.classes().cloned().collect();
        let properties: Vec<PolicyProperty> = s.tree.properties().cloned().collect();
        let individuals: Vec<Individual> = s.tree.individuals().cloned().collect();
        let triples: Vec<RelationTriple> = s.tree.triples().cloned().collect();
        // Seed a subclass cycle.
        for c in classes.iter_mut() {
            if c.name == "Personally_Identifiable_Information" {
                c.parent = Some("PII_Name".into());
            }
        }
        let broken = crate::ontology::PolicyTree::from_raw_parts(
            classes,
            properties,
            individuals,
            triples,
        );
        assert!(!check_consistency(&broken).consistent());
        assert_eq!(
            verify_transaction(&broken, &s.request),
            Verdict::fail(ReasonerErrorCode::InconsistentOntology, None)
        );
    }

    #[test]
    fn consistency_clean_on_validated_trees() {
        let s = netflix_scenario();
        let report = check_consistency(&s.tree);
        assert!(report.consistent());
        assert!(report.violations.is_empty());
    }

    #[test]
    fn consistency_flags_seeded_range_mismatch() {
        let s = netflix_scenario();
        let mut triples: Vec<RelationTriple> = s.tree.triples().cloned().collect();
        // Point a consent triple at a Flag-class object: outside the
        // Consumer_Consent range.
        for t in triples.iter_mut() {
            if t.subject == "User1.Name" && t.property == vocab::HAS_CONSENT_FOR_USE {
                t.object = vocab::AFFIRMED.to_string();
            }
        }
        let edited = crate::ontology::PolicyTree::from_raw_parts(
            s.tree.classes().cloned().collect(),
            s.tree.properties().cloned().collect(),
            s.tree.individuals().cloned().collect(),
            triples,
        );
        let report = check_consistency(&edited);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, ViolationKind::DomainRangeViolation);
    }

    #[test]
    fn subsumes_examples() {
        let s = netflix_scenario();
        assert!(subsumes(&s.tree, "Personally_Identifiable_Information", "PII_Email").unwrap());
        assert!(subsumes(&s.tree, "Flag", "Flag").unwrap());
        assert!(!subsumes(&s.tree, "PII_Email", "Personally_Identifiable_Information").unwrap());
        assert!(subsumes(&s.tree, "Ghost", "Flag").is_err());
    }

    #[test]
    fn verdict_monotone_under_added_triples() {
        let s = netflix_scenario();
        assert!(verify_transaction(&s.tree, &s.request).is_pass());
        // Piling on more consent-ish triples can never flip Pass to Fail.
        let mut tree = s.tree.clone();
        tree.add_individual("User2.Name", "PII_Name").unwrap();
        tree.assert_relation("Amazon", "User2.Name", vocab::IS_DATA_OWNER, "User2").unwrap();
        tree.assert_relation("User2", "User2.Name", vocab::IS_SENSITIVE_DATA, vocab::AFFIRMED)
            .unwrap();
        tree.assert_relation("User1", "User1.Name", vocab::IS_SENSITIVE_DATA, vocab::AFFIRMED)
            .unwrap();
        assert!(verify_transaction(&tree, &s.request).is_pass());
    }

    #[test]
    fn verdict_ignores_other_owners_data_points() {
        let mut s = netflix_scenario();
        s.tree.add_individual("User2.CreditCard", "PII_CreditCard").unwrap();
        s.tree
            .assert_relation("Amazon", "User2.CreditCard", vocab::IS_DATA_OWNER, "User2")
            .unwrap();
        // User2's point has no consents at all; User1's request is unaffected.
        assert!(verify_transaction(&s.tree, &s.request).is_pass());
    }

    #[test]
    fn request_validation() {
        let mut s = netflix_scenario();
        assert!(s.request.validate().is_ok());
        s.request.fields.clear();
        assert_eq!(s.request.validate(), Err(RequestError::EmptyFields));
        let mut s = netflix_scenario();
        s.request.fields.insert("Name".into(), "bad\u{1f}value".into());
        assert_eq!(s.request.validate(), Err(RequestError::InvalidValue("Name".into())));
        let mut s = netflix_scenario();
        s.request.tx_id = "no spaces".into();
        assert!(matches!(s.request.validate(), Err(RequestError::InvalidIdentifier(_))));
    }
}
