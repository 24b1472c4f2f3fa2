//! Participant registry and consensus-gated policy amendment. Structural
//! policy changes go through open proposals decided by strict majority of
//! all registered participants; owner-gated consent relations never do.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ontology::{vocab, OntologyError, PolicyTree, RelationTriple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ParticipantRole {
    ServiceProvider,
    EndUser,
    TrustedThirdParty,
}

impl ParticipantRole {
    pub fn as_str(&self) -> &'static str {
        match self {
            ParticipantRole::ServiceProvider => "ServiceProvider",
            ParticipantRole::EndUser => "EndUser",
            ParticipantRole::TrustedThirdParty => "TrustedThirdParty",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "ServiceProvider" => ParticipantRole::ServiceProvider,
            "EndUser" => ParticipantRole::EndUser,
            "TrustedThirdParty" => ParticipantRole::TrustedThirdParty,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub role: ParticipantRole,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct UserBase {
    participants: BTreeMap<String, ParticipantRole>,
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UserBaseError {
    #[error("DuplicateParticipant: {0}")]
    DuplicateParticipant(String),
    #[error("UnknownParticipant: {0}")]
    UnknownParticipant(String),
    #[error("OwnerGatedChange: {property} is set at the data owner's behest, not by consensus")]
    OwnerGatedChange { property: String },
    #[error("AlreadyVoted: {0}")]
    AlreadyVoted(String),
    #[error("ProposalClosed: {0}")]
    ProposalClosed(String),
}

impl UserBase {
    pub fn new() -> Self {
        UserBase::default()
    }

    pub fn register(&mut self, id: &str, role: ParticipantRole) -> Result<(), UserBaseError> {
        if self.participants.contains_key(id) {
            return Err(UserBaseError::DuplicateParticipant(id.to_string()));
        }
        self.participants.insert(id.to_string(), role);
        Ok(())
    }

    pub fn role_of(&self, id: &str) -> Option<ParticipantRole> {
        self.participants.get(id).copied()
    }

    pub fn is_registered(&self, id: &str) -> bool {
        self.participants.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.participants.len()
    }

    pub fn is_empty(&self) -> bool {
        self.participants.is_empty()
    }

    pub fn participants(&self) -> impl Iterator<Item = Participant> + '_ {
        self.participants.iter().map(|(id, role)| Participant {
            id: id.clone(),
            role: *role,
        })
    }
}

/// One proposable mutation of the PolicyTree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PolicyChange {
    AddClass {
        name: String,
        parent: Option<String>,
    },
    AddProperty {
        name: String,
        domain: String,
        range: String,
    },
    AddIndividual {
        name: String,
        class: String,
    },
    AssertRelation {
        subject: String,
        property: String,
        object: String,
    },
    RetractRelation {
        subject: String,
        property: String,
        object: String,
    },
}

impl PolicyChange {
    fn gated_property(&self) -> Option<&str> {
        match self {
            PolicyChange::AssertRelation { property, .. }
            | PolicyChange::RetractRelation { property, .. }
                if vocab::is_owner_gated(property) =>
            {
                Some(property)
            }
            _ => None,
        }
    }

    fn apply(&self, tree: &mut PolicyTree) -> Result<(), OntologyError> {
        match self {
            PolicyChange::AddClass { name, parent } => tree.add_class(name, parent.as_deref()),
            PolicyChange::AddProperty {
                name,
                domain,
                range,
            } => tree.add_property(name, domain, range),
            PolicyChange::AddIndividual { name, class } => tree.add_individual(name, class),
            PolicyChange::AssertRelation {
                subject,
                property,
                object,
            } => tree.apply_assert(subject, property, object),
            PolicyChange::RetractRelation {
                subject,
                property,
                object,
            } => tree.apply_retract(&RelationTriple::new(
                subject.clone(),
                property.clone(),
                object.clone(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProposalState {
    Open,
    Applied,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyProposal {
    pub proposal_id: String,
    pub change: PolicyChange,
    pub proposer: String,
    pub votes: BTreeMap<String, bool>,
    pub state: ProposalState,
    /// Rejection detail when the approved change failed validation.
    pub reason: Option<String>,
}

pub fn propose_policy_change(
    userbase: &UserBase,
    proposal_id: &str,
    proposer: &str,
    change: PolicyChange,
) -> Result<PolicyProposal, UserBaseError> {
    if !userbase.is_registered(proposer) {
        return Err(UserBaseError::UnknownParticipant(proposer.to_string()));
    }
    if let Some(property) = change.gated_property() {
        return Err(UserBaseError::OwnerGatedChange {
            property: property.to_string(),
        });
    }
    Ok(PolicyProposal {
        proposal_id: proposal_id.to_string(),
        change,
        proposer: proposer.to_string(),
        votes: BTreeMap::new(),
        state: ProposalState::Open,
        reason: None,
    })
}

pub fn cast_vote(
    userbase: &UserBase,
    proposal: &mut PolicyProposal,
    voter: &str,
    decision: bool,
) -> Result<(), UserBaseError> {
    if proposal.state != ProposalState::Open {
        return Err(UserBaseError::ProposalClosed(proposal.proposal_id.clone()));
    }
    if !userbase.is_registered(voter) {
        return Err(UserBaseError::UnknownParticipant(voter.to_string()));
    }
    if proposal.votes.contains_key(voter) {
        return Err(UserBaseError::AlreadyVoted(voter.to_string()));
    }
    proposal.votes.insert(voter.to_string(), decision);
    Ok(())
}

/// Decide an open proposal against the current registry. The change is
/// applied iff yes-votes strictly exceed half of all registered
/// participants; it is rejected once no-votes reach half. Anything else
/// leaves the proposal open. An approved change that no longer validates
/// against the tree rejects the proposal and leaves the tree untouched.
pub fn tally_and_apply(
    userbase: &UserBase,
    proposal: &mut PolicyProposal,
    tree: &mut PolicyTree,
) -> Result<(), UserBaseError> {
    if proposal.state != ProposalState::Open {
        return Err(UserBaseError::ProposalClosed(proposal.proposal_id.clone()));
    }
    let total = userbase.len();
    let yes = proposal.votes.values().filter(|&&v| v).count();
    let no = proposal.votes.len() - yes;

    if 2 * yes > total {
        match proposal.change.apply(tree) {
            Ok(()) => proposal.state = ProposalState::Applied,
            Err(e) => {
                proposal.state = ProposalState::Rejected;
                proposal.reason = Some(e.to_string());
            }
        }
    } else if 2 * no >= total {
        proposal.state = ProposalState::Rejected;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testing::netflix_scenario;

    fn add_class_change() -> PolicyChange {
        PolicyChange::AddClass {
            name: "PII_Biometric".into(),
            parent: Some("Personally_Identifiable_Information".into()),
        }
    }

    #[test]
    fn registry_basics() {
        let mut ub = UserBase::new();
        ub.register("A", ParticipantRole::ServiceProvider).unwrap();
        assert_eq!(
            ub.register("A", ParticipantRole::EndUser),
            Err(UserBaseError::DuplicateParticipant("A".into()))
        );
        assert_eq!(ub.role_of("A"), Some(ParticipantRole::ServiceProvider));
        assert!(ub.role_of("B").is_none());
        assert_eq!(ub.len(), 1);
    }

    #[test]
    fn owner_gated_relations_cannot_be_proposed() {
        let s = netflix_scenario();
        for property in vocab::OWNER_GATED {
            let err = propose_policy_change(
                &s.userbase,
                "P1",
                "Netflix",
                PolicyChange::AssertRelation {
                    subject: "User1.Name".into(),
                    property: property.to_string(),
                    object: "Standing_Consent".into(),
                },
            )
            .unwrap_err();
            assert_eq!(
                err,
                UserBaseError::OwnerGatedChange {
                    property: property.to_string()
                }
            );
        }
        assert!(matches!(
            propose_policy_change(&s.userbase, "P1", "Nobody", add_class_change()),
            Err(UserBaseError::UnknownParticipant(_))
        ));
    }

    #[test]
    fn strict_majority_applies_and_bumps_version() {
        let mut s = netflix_scenario();
        let before = s.tree.version();
        let mut p =
            propose_policy_change(&s.userbase, "P1", "Netflix", add_class_change()).unwrap();
        // 3 yes of 5 registered: strict majority.
        for voter in ["Netflix", "Amazon", "User1"] {
            cast_vote(&s.userbase, &mut p, voter, true).unwrap();
        }
        tally_and_apply(&s.userbase, &mut p, &mut s.tree).unwrap();
        assert_eq!(p.state, ProposalState::Applied);
        assert_eq!(s.tree.version(), before + 1);
        assert!(s.tree.class("PII_Biometric").is_some());
    }

    #[test]
    fn half_yes_is_not_enough_and_half_no_rejects() {
        let mut s = netflix_scenario();
        s.userbase.register("Extra", ParticipantRole::EndUser).unwrap(); // N = 6

        let mut p =
            propose_policy_change(&s.userbase, "P1", "Netflix", add_class_change()).unwrap();
        for voter in ["Netflix", "Amazon", "User1"] {
            cast_vote(&s.userbase, &mut p, voter, true).unwrap();
        }
        let before = s.tree.version();
        tally_and_apply(&s.userbase, &mut p, &mut s.tree).unwrap();
        // 3 yes of 6 is not a strict majority; proposal stays open.
        assert_eq!(p.state, ProposalState::Open);
        assert_eq!(s.tree.version(), before);

        for voter in ["User2", "Auditor1", "Extra"] {
            cast_vote(&s.userbase, &mut p, voter, false).unwrap();
        }
        tally_and_apply(&s.userbase, &mut p, &mut s.tree).unwrap();
        // 3 no of 6 reaches half: rejected, tree untouched.
        assert_eq!(p.state, ProposalState::Rejected);
        assert_eq!(s.tree.version(), before);
        assert!(s.tree.class("PII_Biometric").is_none());
    }

    #[test]
    fn approved_but_invalid_change_rejects_without_mutation() {
        let mut s = netflix_scenario();
        let mut p = propose_policy_change(
            &s.userbase,
            "P1",
            "Netflix",
            PolicyChange::AddIndividual {
                name: "Thing".into(),
                class: "No_Such_Class".into(),
            },
        )
        .unwrap();
        for voter in ["Netflix", "Amazon", "User1"] {
            cast_vote(&s.userbase, &mut p, voter, true).unwrap();
        }
        let before = s.tree.version();
        tally_and_apply(&s.userbase, &mut p, &mut s.tree).unwrap();
        assert_eq!(p.state, ProposalState::Rejected);
        assert!(p.reason.is_some());
        assert_eq!(s.tree.version(), before);
    }

    #[test]
    fn voting_rules() {
        let s = netflix_scenario();
        let mut p =
            propose_policy_change(&s.userbase, "P1", "Netflix", add_class_change()).unwrap();
        cast_vote(&s.userbase, &mut p, "Netflix", true).unwrap();
        assert_eq!(
            cast_vote(&s.userbase, &mut p, "Netflix", false),
            Err(UserBaseError::AlreadyVoted("Netflix".into()))
        );
        assert_eq!(
            cast_vote(&s.userbase, &mut p, "Nobody", true),
            Err(UserBaseError::UnknownParticipant("Nobody".into()))
        );
        p.state = ProposalState::Rejected;
        assert_eq!(
            cast_vote(&s.userbase, &mut p, "Amazon", true),
            Err(UserBaseError::ProposalClosed("P1".into()))
        );
        let mut tree = netflix_scenario().tree;
        assert_eq!(
            tally_and_apply(&s.userbase, &mut p, &mut tree),
            Err(UserBaseError::ProposalClosed("P1".into()))
        );
    }

    #[test]
    fn proposal_serde_round_trip() {
        let s = netflix_scenario();
        let mut p =
            propose_policy_change(&s.userbase, "P1", "Netflix", add_class_change()).unwrap();
        cast_vote(&s.userbase, &mut p, "User1", false).unwrap();
        let json = serde_json::to_string(&p).unwrap();
        let back: PolicyProposal = serde_json::from_str(&json).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn consensus_change_applies_retraction_without_owner() {
        let mut s = netflix_scenario();
        let mut p = propose_policy_change(
            &s.userbase,
            "P2",
            "Amazon",
            PolicyChange::AssertRelation {
                subject: "General_Purpose".into(),
                property: vocab::HAS_DATA_PROTECTION.into(),
                object: "Standard_Protection".into(),
            },
        )
        .unwrap();
        for voter in ["Netflix", "Amazon", "User1"] {
            cast_vote(&s.userbase, &mut p, voter, true).unwrap();
        }
        tally_and_apply(&s.userbase, &mut p, &mut s.tree).unwrap();
        // Triple already present in the fixture: duplicate, hence rejected.
        assert_eq!(p.state, ProposalState::Rejected);
    }
}
