//! Deterministic OWL/XML emission: classes, then properties, then
//! individuals, then assertions, each block sorted by name. Identifiers
//! are restricted to `[A-Za-z0-9_.-]`, so no XML escaping is needed.

use std::fmt::Write;

use super::tree::PolicyTree;

const OWL_NS: &str = "http://www.w3.org/2002/07/owl#";

pub fn serialize_policy(tree: &PolicyTree) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(out, "<Ontology xmlns=\"{OWL_NS}\">");

    for class in tree.classes() {
        let _ = writeln!(
            out,
            "    <Declaration><Class IRI=\"#{}\"/></Declaration>",
            class.name
        );
    }
    for class in tree.classes() {
        if let Some(parent) = &class.parent {
            let _ = writeln!(
                out,
                "    <SubClassOf><Class IRI=\"#{}\"/><Class IRI=\"#{}\"/></SubClassOf>",
                class.name, parent
            );
        }
    }

    for prop in tree.properties() {
        let _ = writeln!(
            out,
            "    <Declaration><ObjectProperty IRI=\"#{}\"/></Declaration>",
            prop.name
        );
        let _ = writeln!(
            out,
            "    <ObjectPropertyDomain><ObjectProperty IRI=\"#{}\"/><Class IRI=\"#{}\"/></ObjectPropertyDomain>",
            prop.name, prop.domain
        );
        let _ = writeln!(
            out,
            "    <ObjectPropertyRange><ObjectProperty IRI=\"#{}\"/><Class IRI=\"#{}\"/></ObjectPropertyRange>",
            prop.name, prop.range
        );
    }

    for ind in tree.individuals() {
        let _ = writeln!(
            out,
            "    <Declaration><NamedIndividual IRI=\"#{}\"/></Declaration>",
            ind.name
        );
        let _ = writeln!(
            out,
            "    <ClassAssertion><Class IRI=\"#{}\"/><NamedIndividual IRI=\"#{}\"/></ClassAssertion>",
            ind.class, ind.name
        );
    }

    for t in tree.triples() {
        let _ = writeln!(
            out,
            "    <ObjectPropertyAssertion><ObjectProperty IRI=\"#{}\"/><NamedIndividual IRI=\"#{}\"/><NamedIndividual IRI=\"#{}\"/></ObjectPropertyAssertion>",
            t.property, t.subject, t.object
        );
    }

    out.push_str("</Ontology>\n");
    out.into_bytes()
}
