use std::collections::{BTreeMap, BTreeSet};

use super::{is_valid_identifier, vocab, OntologyError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyClass {
    pub name: String,
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyProperty {
    pub name: String,
    pub domain: String,
    pub range: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Individual {
    pub name: String,
    pub class: String,
}

/// A (subject, property, object) assertion between individuals.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct RelationTriple {
    pub subject: String,
    pub property: String,
    pub object: String,
}

impl RelationTriple {
    pub fn new(
        subject: impl Into<String>,
        property: impl Into<String>,
        object: impl Into<String>,
    ) -> Self {
        RelationTriple {
            subject: subject.into(),
            property: property.into(),
            object: object.into(),
        }
    }
}

/// The in-memory privacy policy: class hierarchy, typed properties,
/// individuals and relation triples. All mutation goes through validated
/// methods; a successful mutation bumps `version` by exactly one, a
/// failed one leaves the tree untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolicyTree {
    pub(crate) classes: BTreeMap<String, PolicyClass>,
    pub(crate) properties: BTreeMap<String, PolicyProperty>,
    pub(crate) individuals: BTreeMap<String, Individual>,
    pub(crate) triples: BTreeSet<RelationTriple>,
    pub(crate) version: u64,
}

impl Default for PolicyTree {
    fn default() -> Self {
        Self::new()
    }
}

impl PolicyTree {
    /// An empty tree holding only the reserved `Flag` class and the
    /// `Affirmed` individual.
    pub fn new() -> Self {
        let mut tree = PolicyTree {
            classes: BTreeMap::new(),
            properties: BTreeMap::new(),
            individuals: BTreeMap::new(),
            triples: BTreeSet::new(),
            version: 0,
        };
        tree.classes.insert(
            vocab::FLAG.to_string(),
            PolicyClass {
                name: vocab::FLAG.to_string(),
                parent: None,
            },
        );
        tree.individuals.insert(
            vocab::AFFIRMED.to_string(),
            Individual {
                name: vocab::AFFIRMED.to_string(),
                class: vocab::FLAG.to_string(),
            },
        );
        tree
    }

    /// Assemble a tree from raw parts without any invariant checking.
    ///
    /// This is the escape hatch for loading externally produced (possibly
    /// hand-edited) data that `check_consistency` is expected to audit;
    /// everything built through the mutation API keeps the invariants by
    /// construction.
    pub fn from_raw_parts(
        classes: Vec<PolicyClass>,
        properties: Vec<PolicyProperty>,
        individuals: Vec<Individual>,
        triples: Vec<RelationTriple>,
    ) -> Self {
        PolicyTree {
            classes: classes.into_iter().map(|c| (c.name.clone(), c)).collect(),
            properties: properties.into_iter().map(|p| (p.name.clone(), p)).collect(),
            individuals: individuals.into_iter().map(|i| (i.name.clone(), i)).collect(),
            triples: triples.into_iter().collect(),
            version: 0,
        }
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn classes(&self) -> impl Iterator<Item = &PolicyClass> {
        self.classes.values()
    }

    pub fn properties(&self) -> impl Iterator<Item = &PolicyProperty> {
        self.properties.values()
    }

    pub fn individuals(&self) -> impl Iterator<Item = &Individual> {
        self.individuals.values()
    }

    pub fn triples(&self) -> impl Iterator<Item = &RelationTriple> {
        self.triples.iter()
    }

    pub fn class(&self, name: &str) -> Option<&PolicyClass> {
        self.classes.get(name)
    }

    pub fn property(&self, name: &str) -> Option<&PolicyProperty> {
        self.properties.get(name)
    }

    pub fn individual(&self, name: &str) -> Option<&Individual> {
        self.individuals.get(name)
    }

    pub fn has_triple(&self, subject: &str, property: &str, object: &str) -> bool {
        self.triples
            .contains(&RelationTriple::new(subject, property, object))
    }

    /// True if any triple (subject, property, _) exists.
    pub fn has_relation(&self, subject: &str, property: &str) -> bool {
        self.objects_of(subject, property).next().is_some()
    }

    /// Objects of all triples matching (subject, property, _).
    pub fn objects_of<'a>(
        &'a self,
        subject: &'a str,
        property: &'a str,
    ) -> impl Iterator<Item = &'a str> {
        self.triples
            .range(
                RelationTriple::new(subject, property, "")
                    ..=RelationTriple::new(subject, property, "\u{7f}"),
            )
            .map(|t| t.object.as_str())
    }

    /// The end-user owning a PII data point, per its `IsDataOwner` triple.
    pub fn owner_of<'a>(&'a self, data_point: &'a str) -> Option<&'a str> {
        self.objects_of(data_point, vocab::IS_DATA_OWNER).next()
    }

    // ------------------------------------------------------------------
    // Mutation
    // ------------------------------------------------------------------

    pub fn add_class(
        &mut self,
        name: &str,
        parent: Option<&str>,
    ) -> Result<(), OntologyError> {
        if !is_valid_identifier(name) {
            return Err(OntologyError::InvalidIdentifier(name.to_string()));
        }
        if self.classes.contains_key(name) {
            return Err(OntologyError::DuplicateName(name.to_string()));
        }
        if let Some(p) = parent {
            if !self.classes.contains_key(p) {
                return Err(OntologyError::UnknownParent(p.to_string()));
            }
            // The new class has no children yet, so linking to an existing
            // parent cannot close a cycle; the check is kept for the
            // deserialization path where parents may be forward references.
        }
        self.classes.insert(
            name.to_string(),
            PolicyClass {
                name: name.to_string(),
                parent: parent.map(str::to_string),
            },
        );
        self.version += 1;
        Ok(())
    }

    pub fn add_property(
        &mut self,
        name: &str,
        domain: &str,
        range: &str,
    ) -> Result<(), OntologyError> {
        if !is_valid_identifier(name) {
            return Err(OntologyError::InvalidIdentifier(name.to_string()));
        }
        if self.properties.contains_key(name) {
            return Err(OntologyError::DuplicateName(name.to_string()));
        }
        for class in [domain, range] {
            if !self.classes.contains_key(class) {
                return Err(OntologyError::UnknownClass(class.to_string()));
            }
        }
        self.properties.insert(
            name.to_string(),
            PolicyProperty {
                name: name.to_string(),
                domain: domain.to_string(),
                range: range.to_string(),
            },
        );
        self.version += 1;
        Ok(())
    }

    pub fn add_individual(&mut self, name: &str, class: &str) -> Result<(), OntologyError> {
        if !is_valid_identifier(name) {
            return Err(OntologyError::InvalidIdentifier(name.to_string()));
        }
        if self.individuals.contains_key(name) {
            return Err(OntologyError::DuplicateName(name.to_string()));
        }
        if !self.classes.contains_key(class) {
            return Err(OntologyError::UnknownClass(class.to_string()));
        }
        self.individuals.insert(
            name.to_string(),
            Individual {
                name: name.to_string(),
                class: class.to_string(),
            },
        );
        self.version += 1;
        Ok(())
    }

    /// Assert a relation triple on behalf of `actor`.
    ///
    /// Consent and ownership relations over a data point may only be
    /// edited by the end-user that owns it. The one exception is the
    /// first `IsDataOwner` assertion for a data point, which bootstraps
    /// ownership at registration time.
    pub fn assert_relation(
        &mut self,
        actor: &str,
        subject: &str,
        property: &str,
        object: &str,
    ) -> Result<(), OntologyError> {
        self.check_triple_shape(subject, property, object)?;
        self.check_owner_gate(actor, subject, property, true)?;
        if self.has_triple(subject, property, object) {
            return Err(OntologyError::DuplicateTriple(
                subject.to_string(),
                property.to_string(),
                object.to_string(),
            ));
        }
        self.triples
            .insert(RelationTriple::new(subject, property, object));
        self.version += 1;
        Ok(())
    }

    pub fn retract_relation(
        &mut self,
        actor: &str,
        triple: &RelationTriple,
    ) -> Result<(), OntologyError> {
        if !self.triples.contains(triple) {
            return Err(OntologyError::UnknownTriple(
                triple.subject.clone(),
                triple.property.clone(),
                triple.object.clone(),
            ));
        }
        self.check_owner_gate(actor, &triple.subject, &triple.property, false)?;
        self.triples.remove(triple);
        self.version += 1;
        Ok(())
    }

    /// Triple insertion that skips the owner gate. Used when applying a
    /// consensus-approved change and when materializing parsed documents,
    /// where no acting participant exists.
    pub(crate) fn apply_assert(
        &mut self,
        subject: &str,
        property: &str,
        object: &str,
    ) -> Result<(), OntologyError> {
        self.check_triple_shape(subject, property, object)?;
        if self.has_triple(subject, property, object) {
            return Err(OntologyError::DuplicateTriple(
                subject.to_string(),
                property.to_string(),
                object.to_string(),
            ));
        }
        self.triples
            .insert(RelationTriple::new(subject, property, object));
        self.version += 1;
        Ok(())
    }

    pub(crate) fn apply_retract(
        &mut self,
        triple: &RelationTriple,
    ) -> Result<(), OntologyError> {
        if !self.triples.remove(triple) {
            return Err(OntologyError::UnknownTriple(
                triple.subject.clone(),
                triple.property.clone(),
                triple.object.clone(),
            ));
        }
        self.version += 1;
        Ok(())
    }

    fn check_triple_shape(
        &self,
        subject: &str,
        property: &str,
        object: &str,
    ) -> Result<(), OntologyError> {
        let subj = self
            .individuals
            .get(subject)
            .ok_or_else(|| OntologyError::UnknownEntity(subject.to_string()))?;
        let prop = self
            .properties
            .get(property)
            .ok_or_else(|| OntologyError::UnknownEntity(property.to_string()))?;
        let obj = self
            .individuals
            .get(object)
            .ok_or_else(|| OntologyError::UnknownEntity(object.to_string()))?;
        if !self.is_ancestor(&prop.domain, &subj.class) {
            return Err(OntologyError::DomainRangeViolation {
                detail: format!(
                    "subject {} of class {} is outside domain {} of {}",
                    subject, subj.class, prop.domain, property
                ),
            });
        }
        if !self.is_ancestor(&prop.range, &obj.class) {
            return Err(OntologyError::DomainRangeViolation {
                detail: format!(
                    "object {} of class {} is outside range {} of {}",
                    object, obj.class, prop.range, property
                ),
            });
        }
        Ok(())
    }

    fn check_owner_gate(
        &self,
        actor: &str,
        subject: &str,
        property: &str,
        asserting: bool,
    ) -> Result<(), OntologyError> {
        if !vocab::is_owner_gated(property) {
            return Ok(());
        }
        match self.owner_of(subject) {
            Some(owner) if owner == actor => Ok(()),
            // First IsDataOwner assertion bootstraps ownership; the
            // registering service provider is allowed to make it.
            None if asserting && property == vocab::IS_DATA_OWNER => Ok(()),
            _ => Err(OntologyError::NotAuthorized {
                actor: actor.to_string(),
                subject: subject.to_string(),
            }),
        }
    }

    // ------------------------------------------------------------------
    // Classification
    // ------------------------------------------------------------------

    /// Reflexive-transitive closure of the parent relation: every class
    /// mapped to itself plus all its ancestors.
    pub fn subclass_closure(&self) -> BTreeMap<String, BTreeSet<String>> {
        let mut closure = BTreeMap::new();
        for name in self.classes.keys() {
            let mut ancestors = BTreeSet::new();
            let mut cursor = Some(name.as_str());
            while let Some(c) = cursor {
                if !ancestors.insert(c.to_string()) {
                    break; // cycle guard for raw-parts trees
                }
                cursor = self
                    .classes
                    .get(c)
                    .and_then(|pc| pc.parent.as_deref());
            }
            closure.insert(name.clone(), ancestors);
        }
        closure
    }

    /// True iff `ancestor` is in the reflexive-transitive parent closure
    /// of `descendant`.
    pub fn is_ancestor(&self, ancestor: &str, descendant: &str) -> bool {
        let mut seen = 0usize;
        let mut cursor = Some(descendant);
        while let Some(c) = cursor {
            if c == ancestor {
                return true;
            }
            seen += 1;
            if seen > self.classes.len() {
                return false; // cycle guard for raw-parts trees
            }
            cursor = self.classes.get(c).and_then(|pc| pc.parent.as_deref());
        }
        false
    }

    /// Structural equality ignoring the mutation counter.
    pub fn same_structure(&self, other: &PolicyTree) -> bool {
        self.classes == other.classes
            && self.properties == other.properties
            && self.individuals == other.individuals
            && self.triples == other.triples
    }
}
