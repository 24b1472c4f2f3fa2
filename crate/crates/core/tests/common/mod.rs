//! Shared helpers for integration tests: an independent rule-scan
//! reasoner oracle and randomized fixture generation. The oracle avoids
//! every index the engine maintains; it works from linear scans over the
//! raw class, individual and triple listings.

#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap, HashSet};

use rand::prelude::*;
use rand::rngs::StdRng;

use linkshare_core::ontology::{Individual, PolicyClass, PolicyProperty, PolicyTree, RelationTriple};
use linkshare_core::reasoner::{ReasonerErrorCode, TransactionRequest, Verdict};

const PII: &str = "Personally_Identifiable_Information";
const AFFIRMED: &str = "Affirmed";

/// Reflexive ancestor set of a class under naive parent walking; `None`
/// when the walk loops or leaves the class table.
fn ancestors(parents: &HashMap<String, Option<String>>, class: &str) -> Option<HashSet<String>> {
    let mut seen = HashSet::new();
    let mut cursor = class.to_string();
    loop {
        if !seen.insert(cursor.clone()) {
            return None;
        }
        match parents.get(&cursor) {
            None => return None,
            Some(None) => return Some(seen),
            Some(Some(p)) => cursor = p.clone(),
        }
    }
}

fn has_triple(triples: &[RelationTriple], s: &str, p: &str, o: &str) -> bool {
    triples
        .iter()
        .any(|t| t.subject == s && t.property == p && t.object == o)
}

fn has_relation(triples: &[RelationTriple], s: &str, p: &str) -> bool {
    triples.iter().any(|t| t.subject == s && t.property == p)
}

fn individual_class<'a>(individuals: &'a [Individual], name: &str) -> Option<&'a str> {
    individuals
        .iter()
        .find(|i| i.name == name)
        .map(|i| i.class.as_str())
}

fn tree_is_consistent(
    classes: &[PolicyClass],
    properties: &[PolicyProperty],
    individuals: &[Individual],
    triples: &[RelationTriple],
    parents: &HashMap<String, Option<String>>,
) -> bool {
    for class in classes {
        if ancestors(parents, &class.name).is_none() {
            return false;
        }
    }
    for prop in properties {
        if !parents.contains_key(&prop.domain) || !parents.contains_key(&prop.range) {
            return false;
        }
    }
    for ind in individuals {
        if !parents.contains_key(&ind.class) {
            return false;
        }
    }
    for t in triples {
        let subj = individual_class(individuals, &t.subject);
        let obj = individual_class(individuals, &t.object);
        let prop = properties.iter().find(|p| p.name == t.property);
        let (subj, prop, obj) = match (subj, prop, obj) {
            (Some(s), Some(p), Some(o)) => (s, p, o),
            _ => return false,
        };
        let subj_anc = match ancestors(parents, subj) {
            Some(a) => a,
            None => return false,
        };
        let obj_anc = match ancestors(parents, obj) {
            Some(a) => a,
            None => return false,
        };
        if !subj_anc.contains(&prop.domain) || !obj_anc.contains(&prop.range) {
            return false;
        }
    }
    true
}

/// Independent verdict: six rules scanned per field in sorted order,
/// inconsistency failing closed first.
pub fn oracle_verdict(tree: &PolicyTree, request: &TransactionRequest) -> Verdict {
    let classes: Vec<PolicyClass> = tree.classes().cloned().collect();
    let properties: Vec<PolicyProperty> = tree.properties().cloned().collect();
    let individuals: Vec<Individual> = tree.individuals().cloned().collect();
    let triples: Vec<RelationTriple> = tree.triples().cloned().collect();
    let parents: HashMap<String, Option<String>> = classes
        .iter()
        .map(|c| (c.name.clone(), c.parent.clone()))
        .collect();

    if !tree_is_consistent(&classes, &properties, &individuals, &triples, &parents) {
        return Verdict::fail(ReasonerErrorCode::InconsistentOntology, None);
    }

    let third_party = request.recipient != request.requester;
    for field in request.fields.keys() {
        let d = format!("{}.{}", request.owner, field);
        let fail = |code| Verdict::fail(code, Some(field.clone()));

        let pii = individual_class(&individuals, &d)
            .and_then(|c| ancestors(&parents, c))
            .map(|a| a.contains(PII))
            .unwrap_or(false);
        if !pii {
            return fail(ReasonerErrorCode::MissingField);
        }
        if !has_relation(&triples, &d, "has_Consent_for_Use") {
            return fail(ReasonerErrorCode::NoConsentForUse);
        }
        let share = has_relation(&triples, &d, "has_Consent_to_share_PII");
        if third_party && !share {
            return fail(ReasonerErrorCode::NoConsentToShare);
        }
        if !has_triple(&triples, &d, "IsSharable", AFFIRMED) {
            return fail(ReasonerErrorCode::NotSharable);
        }
        if has_triple(&triples, &d, "IsSensitiveData", AFFIRMED) && !share {
            return fail(ReasonerErrorCode::SensitiveWithoutExplicitConsent);
        }
        let chain_ok = individual_class(&individuals, &request.purpose)
            .and_then(|c| ancestors(&parents, c))
            .map(|a| a.contains("Collection_Purpose"))
            .unwrap_or(false)
            && triples.iter().any(|t1| {
                t1.subject == request.purpose
                    && t1.property == "has_Data_Protection"
                    && individual_class(&individuals, &t1.object)
                        .and_then(|c| ancestors(&parents, c))
                        .map(|a| a.contains("Data_Protection"))
                        .unwrap_or(false)
                    && triples.iter().any(|t2| {
                        t2.subject == t1.object
                            && t2.property == "has_Access_Control"
                            && individual_class(&individuals, &t2.object)
                                .and_then(|c| ancestors(&parents, c))
                                .map(|a| a.contains("Access_Control"))
                                .unwrap_or(false)
                    })
            });
        if !chain_ok {
            return fail(ReasonerErrorCode::NoPurposeChain);
        }
    }
    Verdict::pass()
}

const FIXTURE_FIELDS: [&str; 4] = ["CreditCard", "Email", "Name", "ZIP"];

/// One randomized (tree, request) pair within small bounds: at most 8
/// classes, 7 properties, 20 triples and 4 requested fields. Covers
/// present/absent data points, every consent subset, sensitive flags,
/// in-house vs third-party recipients, broken purpose chains and,
/// occasionally, structurally inconsistent trees.
pub fn random_fixture(rng: &mut StdRng) -> (PolicyTree, TransactionRequest) {
    // Flag arrives with PolicyTree::new; seven more classes stay at the cap.
    let mut tree = PolicyTree::new();
    tree.add_class(PII, None).unwrap();
    tree.add_class("PII_Narrow", Some(PII)).unwrap();
    tree.add_class("Collection_Purpose", None).unwrap();
    tree.add_class("Data_Protection", None).unwrap();
    tree.add_class("Access_Control", None).unwrap();
    tree.add_class("Consumer_Consent", None).unwrap();
    tree.add_class("End_User", None).unwrap();

    tree.add_property("has_Consent_for_Use", PII, "Consumer_Consent").unwrap();
    tree.add_property("has_Consent_to_share_PII", PII, "Consumer_Consent").unwrap();
    tree.add_property("IsSharable", PII, "Flag").unwrap();
    tree.add_property("IsSensitiveData", PII, "Flag").unwrap();
    tree.add_property("IsDataOwner", PII, "End_User").unwrap();
    tree.add_property("has_Data_Protection", "Collection_Purpose", "Data_Protection").unwrap();
    tree.add_property("has_Access_Control", "Data_Protection", "Access_Control").unwrap();

    tree.add_individual("U", "End_User").unwrap();
    tree.add_individual("Consent1", "Consumer_Consent").unwrap();
    // Purpose individual: sometimes of the wrong class entirely.
    let purpose_class = if rng.gen_bool(0.15) { "End_User" } else { "Collection_Purpose" };
    tree.add_individual("P", purpose_class).unwrap();
    tree.add_individual("DP", "Data_Protection").unwrap();
    tree.add_individual("AC", "Access_Control").unwrap();

    let mut budget = 20usize;
    let mut spend = |b: &mut usize| {
        if *b == 0 {
            false
        } else {
            *b -= 1;
            true
        }
    };

    // Purpose chain, each hop present with high probability.
    if purpose_class == "Collection_Purpose" && rng.gen_bool(0.85) && spend(&mut budget) {
        tree.assert_relation("SPa", "P", "has_Data_Protection", "DP").unwrap();
        if rng.gen_bool(0.85) && spend(&mut budget) {
            tree.assert_relation("SPa", "DP", "has_Access_Control", "AC").unwrap();
        }
    }

    let n_fields = rng.gen_range(1..=FIXTURE_FIELDS.len());
    let mut fields = BTreeMap::new();
    for field in FIXTURE_FIELDS.choose_multiple(rng, n_fields) {
        fields.insert(field.to_string(), format!("v{}", rng.gen::<u16>()));
        let d = format!("U.{field}");
        if rng.gen_bool(0.15) {
            continue; // no data point at all
        }
        if rng.gen_bool(0.1) {
            // Data point exists but is not PII.
            tree.add_individual(&d, "End_User").unwrap();
            continue;
        }
        let class = if rng.gen_bool(0.5) { PII } else { "PII_Narrow" };
        tree.add_individual(&d, class).unwrap();
        if !spend(&mut budget) {
            continue;
        }
        tree.assert_relation("SPa", &d, "IsDataOwner", "U").unwrap();
        if rng.gen_bool(0.8) && spend(&mut budget) {
            tree.assert_relation("U", &d, "has_Consent_for_Use", "Consent1").unwrap();
        }
        if rng.gen_bool(0.7) && spend(&mut budget) {
            tree.assert_relation("U", &d, "has_Consent_to_share_PII", "Consent1").unwrap();
        }
        if rng.gen_bool(0.8) && spend(&mut budget) {
            tree.assert_relation("U", &d, "IsSharable", AFFIRMED).unwrap();
        }
        if rng.gen_bool(0.3) && spend(&mut budget) {
            tree.assert_relation("U", &d, "IsSensitiveData", AFFIRMED).unwrap();
        }
    }

    // A slice of fixtures gets a structural defect injected raw.
    if rng.gen_bool(0.1) {
        let mut classes: Vec<PolicyClass> = tree.classes().cloned().collect();
        let mut triples: Vec<RelationTriple> = tree.triples().cloned().collect();
        match rng.gen_range(0..3u32) {
            0 => {
                for c in classes.iter_mut() {
                    if c.name == PII {
                        c.parent = Some("PII_Narrow".into());
                    }
                }
            }
            1 => {
                triples.push(RelationTriple::new("Nobody", "IsSharable", AFFIRMED));
            }
            _ => {
                if let Some(t) = triples.first_mut() {
                    t.object = "U".into();
                } else {
                    triples.push(RelationTriple::new("P", "IsSharable", "U"));
                }
            }
        }
        tree = PolicyTree::from_raw_parts(
            classes,
            tree.properties().cloned().collect(),
            tree.individuals().cloned().collect(),
            triples,
        );
    }

    let recipient = if rng.gen_bool(0.5) { "SPa" } else { "SPb" };
    let purpose = if rng.gen_bool(0.1) { "Ghost_Purpose" } else { "P" };
    let request = TransactionRequest {
        fields,
        owner: "U".to_string(),
        purpose: purpose.to_string(),
        recipient: recipient.to_string(),
        requester: "SPa".to_string(),
        tx_id: "TX".to_string(),
    };
    (tree, request)
}

/// A random class forest with `n` classes rooted anywhere, returned as
/// (tree, edge list) for BFS-oracle comparison.
pub fn random_class_forest(
    rng: &mut StdRng,
    n: usize,
) -> (PolicyTree, Vec<(String, Option<String>)>) {
    let mut tree = PolicyTree::new();
    let mut edges = Vec::new();
    for i in 0..n {
        let name = format!("C{i}");
        let parent = if i > 0 && rng.gen_bool(0.8) {
            Some(format!("C{}", rng.gen_range(0..i)))
        } else {
            None
        };
        tree.add_class(&name, parent.as_deref()).unwrap();
        edges.push((name, parent));
    }
    (tree, edges)
}
