//! Reader for the OWL/XML subset the policy engine understands:
//! `Declaration` of `Class` / `ObjectProperty` / `NamedIndividual`,
//! `SubClassOf` between named classes, `ObjectPropertyDomain` /
//! `ObjectPropertyRange` with named classes, `ClassAssertion` and
//! `ObjectPropertyAssertion`. Any other axiom is rejected as
//! `UnsupportedConstruct`.

use std::collections::{BTreeMap, BTreeSet};

use roxmltree::{Document, Node};

use super::tree::{Individual, PolicyClass, PolicyProperty, PolicyTree, RelationTriple};
use super::{is_valid_identifier, vocab, OntologyError};

pub fn parse_policy_document(doc: &[u8]) -> Result<PolicyTree, OntologyError> {
    let text = std::str::from_utf8(doc).map_err(|e| OntologyError::MalformedDocument {
        detail: format!("document is not UTF-8: {e}"),
        line: 0,
    })?;
    let xml = Document::parse(text).map_err(|e| OntologyError::MalformedDocument {
        detail: e.to_string(),
        line: 0,
    })?;

    let root = xml.root_element();
    if root.tag_name().name() != "Ontology" {
        return Err(OntologyError::MalformedDocument {
            detail: format!("root element is <{}>, expected <Ontology>", root.tag_name().name()),
            line: line_of(&xml, root),
        });
    }

    let mut builder = Builder::default();
    for node in root.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "Prefix" => {} // header plumbing, carries no axioms
            "Declaration" => builder.declaration(&xml, node)?,
            "SubClassOf" => builder.subclass_of(&xml, node)?,
            "ObjectPropertyDomain" => builder.property_domain(&xml, node)?,
            "ObjectPropertyRange" => builder.property_range(&xml, node)?,
            "ClassAssertion" => builder.class_assertion(&xml, node)?,
            "ObjectPropertyAssertion" => builder.property_assertion(&xml, node)?,
            other => {
                return Err(OntologyError::UnsupportedConstruct {
                    element: other.to_string(),
                    line: line_of(&xml, node),
                })
            }
        }
    }
    builder.finish()
}

fn line_of(doc: &Document, node: Node) -> u32 {
    doc.text_pos_at(node.range().start).row
}

#[derive(Default)]
struct Builder {
    classes: BTreeSet<String>,
    parents: BTreeMap<String, String>,
    object_properties: BTreeSet<String>,
    domains: BTreeMap<String, String>,
    ranges: BTreeMap<String, String>,
    individuals: BTreeSet<String>,
    individual_classes: BTreeMap<String, String>,
    triples: BTreeSet<RelationTriple>,
}

impl Builder {
    fn declaration(&mut self, doc: &Document, node: Node) -> Result<(), OntologyError> {
        let entity = single_child(doc, node)?;
        let name = iri_name(doc, entity)?;
        let inserted = match entity.tag_name().name() {
            "Class" => self.classes.insert(name.clone()),
            "ObjectProperty" => self.object_properties.insert(name.clone()),
            "NamedIndividual" => self.individuals.insert(name.clone()),
            other => {
                return Err(OntologyError::UnsupportedConstruct {
                    element: format!("Declaration of {other}"),
                    line: line_of(doc, entity),
                })
            }
        };
        if !inserted {
            return Err(OntologyError::InvariantViolation {
                detail: format!("duplicate declaration of {name}"),
            });
        }
        Ok(())
    }

    fn subclass_of(&mut self, doc: &Document, node: Node) -> Result<(), OntologyError> {
        let [sub, sup] = pair(doc, node, "Class", "Class")?;
        if self.parents.contains_key(&sub) {
            return Err(OntologyError::InvariantViolation {
                detail: format!("class {sub} has more than one superclass"),
            });
        }
        self.parents.insert(sub, sup);
        Ok(())
    }

    fn property_domain(&mut self, doc: &Document, node: Node) -> Result<(), OntologyError> {
        let [prop, class] = pair(doc, node, "ObjectProperty", "Class")?;
        if self.domains.insert(prop.clone(), class).is_some() {
            return Err(OntologyError::InvariantViolation {
                detail: format!("property {prop} has more than one domain"),
            });
        }
        Ok(())
    }

    fn property_range(&mut self, doc: &Document, node: Node) -> Result<(), OntologyError> {
        let [prop, class] = pair(doc, node, "ObjectProperty", "Class")?;
        if self.ranges.insert(prop.clone(), class).is_some() {
            return Err(OntologyError::InvariantViolation {
                detail: format!("property {prop} has more than one range"),
            });
        }
        Ok(())
    }

    fn class_assertion(&mut self, doc: &Document, node: Node) -> Result<(), OntologyError> {
        let [class, individual] = pair(doc, node, "Class", "NamedIndividual")?;
        self.individuals.insert(individual.clone());
        if self.individual_classes.insert(individual.clone(), class).is_some() {
            return Err(OntologyError::InvariantViolation {
                detail: format!("individual {individual} has more than one ClassAssertion"),
            });
        }
        Ok(())
    }

    fn property_assertion(&mut self, doc: &Document, node: Node) -> Result<(), OntologyError> {
        let children: Vec<Node> = node.children().filter(Node::is_element).collect();
        if children.len() != 3 {
            return Err(OntologyError::MalformedDocument {
                detail: "ObjectPropertyAssertion needs property, subject, object".to_string(),
                line: line_of(doc, node),
            });
        }
        let prop = expect_entity(doc, children[0], "ObjectProperty")?;
        let subject = expect_entity(doc, children[1], "NamedIndividual")?;
        let object = expect_entity(doc, children[2], "NamedIndividual")?;
        let triple = RelationTriple::new(subject, prop, object);
        if !self.triples.insert(triple.clone()) {
            return Err(OntologyError::InvariantViolation {
                detail: format!(
                    "duplicate triple ({}, {}, {})",
                    triple.subject, triple.property, triple.object
                ),
            });
        }
        Ok(())
    }

    fn finish(mut self) -> Result<PolicyTree, OntologyError> {
        // Reserved flag vocabulary is always present, injected before
        // reference validation so documents may use it without declaring it.
        self.classes.insert(vocab::FLAG.to_string());
        self.individuals.insert(vocab::AFFIRMED.to_string());
        match self.individual_classes.get(vocab::AFFIRMED) {
            None => {
                self.individual_classes
                    .insert(vocab::AFFIRMED.to_string(), vocab::FLAG.to_string());
            }
            Some(class) if class != vocab::FLAG => {
                return Err(OntologyError::InvariantViolation {
                    detail: format!(
                        "reserved individual {} must be of class {}",
                        vocab::AFFIRMED,
                        vocab::FLAG
                    ),
                });
            }
            Some(_) => {}
        }

        let mut classes = BTreeMap::new();
        for name in &self.classes {
            classes.insert(
                name.clone(),
                PolicyClass {
                    name: name.clone(),
                    parent: self.parents.get(name).cloned(),
                },
            );
        }
        for (sub, sup) in &self.parents {
            for class in [sub, sup] {
                if !self.classes.contains(class) {
                    return Err(OntologyError::InvariantViolation {
                        detail: format!("SubClassOf references undeclared class {class}"),
                    });
                }
            }
        }
        check_acyclic(&classes)?;

        let mut properties = BTreeMap::new();
        for name in &self.object_properties {
            let domain = self.domains.get(name).ok_or_else(|| {
                OntologyError::InvariantViolation {
                    detail: format!("property {name} has no ObjectPropertyDomain"),
                }
            })?;
            let range = self.ranges.get(name).ok_or_else(|| {
                OntologyError::InvariantViolation {
                    detail: format!("property {name} has no ObjectPropertyRange"),
                }
            })?;
            for class in [domain, range] {
                if !self.classes.contains(class) {
                    return Err(OntologyError::InvariantViolation {
                        detail: format!("property {name} references undeclared class {class}"),
                    });
                }
            }
            properties.insert(
                name.clone(),
                PolicyProperty {
                    name: name.clone(),
                    domain: domain.clone(),
                    range: range.clone(),
                },
            );
        }
        for prop in self.domains.keys().chain(self.ranges.keys()) {
            if !self.object_properties.contains(prop) {
                return Err(OntologyError::InvariantViolation {
                    detail: format!("domain/range given for undeclared property {prop}"),
                });
            }
        }

        let mut individuals = BTreeMap::new();
        for name in &self.individuals {
            let class = self.individual_classes.get(name).ok_or_else(|| {
                OntologyError::InvariantViolation {
                    detail: format!("individual {name} has no ClassAssertion"),
                }
            })?;
            if !self.classes.contains(class) {
                return Err(OntologyError::InvariantViolation {
                    detail: format!("individual {name} asserted into undeclared class {class}"),
                });
            }
            individuals.insert(
                name.clone(),
                Individual {
                    name: name.clone(),
                    class: class.clone(),
                },
            );
        }

        // Triples must resolve; domain/range conformance is deliberately
        // left to check_consistency so externally produced documents can
        // be loaded and audited.
        for t in &self.triples {
            if !individuals.contains_key(&t.subject) {
                return Err(OntologyError::InvariantViolation {
                    detail: format!("assertion references undeclared individual {}", t.subject),
                });
            }
            if !individuals.contains_key(&t.object) {
                return Err(OntologyError::InvariantViolation {
                    detail: format!("assertion references undeclared individual {}", t.object),
                });
            }
            if !properties.contains_key(&t.property) {
                return Err(OntologyError::InvariantViolation {
                    detail: format!("assertion references undeclared property {}", t.property),
                });
            }
        }

        Ok(PolicyTree {
            classes,
            properties,
            individuals,
            triples: self.triples,
            version: 0,
        })
    }
}

fn check_acyclic(classes: &BTreeMap<String, PolicyClass>) -> Result<(), OntologyError> {
    for start in classes.keys() {
        let mut cursor = classes.get(start).and_then(|c| c.parent.as_deref());
        let mut steps = 0;
        while let Some(c) = cursor {
            if c == start {
                return Err(OntologyError::InvariantViolation {
                    detail: format!("subclass cycle through {start}"),
                });
            }
            steps += 1;
            if steps > classes.len() {
                return Err(OntologyError::InvariantViolation {
                    detail: format!("subclass cycle reachable from {start}"),
                });
            }
            cursor = classes.get(c).and_then(|cl| cl.parent.as_deref());
        }
    }
    Ok(())
}

fn single_child<'a>(doc: &Document, node: Node<'a, 'a>) -> Result<Node<'a, 'a>, OntologyError> {
    let mut elems = node.children().filter(Node::is_element);
    let first = elems.next().ok_or_else(|| OntologyError::MalformedDocument {
        detail: format!("<{}> has no entity child", node.tag_name().name()),
        line: line_of(doc, node),
    })?;
    if elems.next().is_some() {
        return Err(OntologyError::MalformedDocument {
            detail: format!("<{}> has more than one entity child", node.tag_name().name()),
            line: line_of(doc, node),
        });
    }
    Ok(first)
}

fn pair(
    doc: &Document,
    node: Node,
    first_tag: &str,
    second_tag: &str,
) -> Result<[String; 2], OntologyError> {
    let children: Vec<Node> = node.children().filter(Node::is_element).collect();
    if children.len() != 2 {
        return Err(OntologyError::MalformedDocument {
            detail: format!(
                "<{}> needs exactly <{first_tag}> and <{second_tag}> children",
                node.tag_name().name()
            ),
            line: line_of(doc, node),
        });
    }
    Ok([
        expect_entity(doc, children[0], first_tag)?,
        expect_entity(doc, children[1], second_tag)?,
    ])
}

fn expect_entity(doc: &Document, node: Node, tag: &str) -> Result<String, OntologyError> {
    if node.tag_name().name() != tag {
        return Err(OntologyError::UnsupportedConstruct {
            element: node.tag_name().name().to_string(),
            line: line_of(doc, node),
        });
    }
    iri_name(doc, node)
}

/// Entity name from the IRI attribute; the fragment after `#` when one
/// is present.
fn iri_name(doc: &Document, node: Node) -> Result<String, OntologyError> {
    let iri = node
        .attribute("IRI")
        .ok_or_else(|| OntologyError::MalformedDocument {
            detail: format!("<{}> lacks an IRI attribute", node.tag_name().name()),
            line: line_of(doc, node),
        })?;
    let name = match iri.rsplit_once('#') {
        Some((_, frag)) => frag,
        None => iri,
    };
    if !is_valid_identifier(name) {
        return Err(OntologyError::MalformedDocument {
            detail: format!("invalid identifier {name:?}"),
            line: line_of(doc, node),
        });
    }
    Ok(name.to_string())
}
