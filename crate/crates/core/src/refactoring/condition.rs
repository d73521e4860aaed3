use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;

use crate::model::ArchModel;

/// A model element addressed by an `exists` predicate.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Element {
    Node(String),
    Component(String),
    Operation(String),
}

/// Atomic structural predicate over a model.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Atom {
    Exists(Element),
    /// A component or replica is deployed on a node.
    DeployedOn {
        artifact: String,
        node: String,
    },
    Owns {
        component: String,
        operation: String,
    },
    /// Endpoints are stored in sorted order.
    Connected(String, String),
}

impl Atom {
    pub fn exists_node(id: &str) -> Self {
        Atom::Exists(Element::Node(id.to_string()))
    }

    pub fn exists_component(id: &str) -> Self {
        Atom::Exists(Element::Component(id.to_string()))
    }

    pub fn exists_operation(id: &str) -> Self {
        Atom::Exists(Element::Operation(id.to_string()))
    }

    pub fn deployed_on(artifact: &str, node: &str) -> Self {
        Atom::DeployedOn {
            artifact: artifact.to_string(),
            node: node.to_string(),
        }
    }

    pub fn owns(component: &str, operation: &str) -> Self {
        Atom::Owns {
            component: component.to_string(),
            operation: operation.to_string(),
        }
    }

    pub fn connected(a: &str, b: &str) -> Self {
        if a <= b {
            Atom::Connected(a.to_string(), b.to_string())
        } else {
            Atom::Connected(b.to_string(), a.to_string())
        }
    }

    pub fn eval(&self, model: &ArchModel) -> bool {
        match self {
            Atom::Exists(Element::Node(id)) => model.node(id).is_some(),
            Atom::Exists(Element::Component(id)) => model.component(id).is_some(),
            Atom::Exists(Element::Operation(id)) => model.owner_of(id).is_some(),
            Atom::DeployedOn { artifact, node } => model.node_of(artifact) == Some(node.as_str()),
            Atom::Owns {
                component,
                operation,
            } => model
                .component(component)
                .is_some_and(|c| c.operations.iter().any(|o| &o.id == operation)),
            Atom::Connected(a, b) => model.link_between(a, b).is_some(),
        }
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Atom::Exists(Element::Node(id))
            | Atom::Exists(Element::Component(id))
            | Atom::Exists(Element::Operation(id)) => write!(f, "exists({id})"),
            Atom::DeployedOn { artifact, node } => write!(f, "deployedOn({artifact}, {node})"),
            Atom::Owns {
                component,
                operation,
            } => write!(f, "owns({component}, {operation})"),
            Atom::Connected(a, b) => write!(f, "connected({a}, {b})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Literal {
    pub atom: Atom,
    pub positive: bool,
}

impl Literal {
    pub fn pos(atom: Atom) -> Self {
        Literal {
            atom,
            positive: true,
        }
    }

    pub fn neg(atom: Atom) -> Self {
        Literal {
            atom,
            positive: false,
        }
    }

    pub fn negated(&self) -> Self {
        Literal {
            atom: self.atom.clone(),
            positive: !self.positive,
        }
    }

    pub fn holds(&self, model: &ArchModel) -> bool {
        self.atom.eval(model) == self.positive
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.positive {
            write!(f, "{}", self.atom)
        } else {
            write!(f, "¬{}", self.atom)
        }
    }
}

/// Conjunction of literals. Each atom appears at most once, so a condition
/// can never hold an atom both positively and negated.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Condition {
    literals: BTreeMap<Atom, bool>,
}

/// Returned when adding a literal whose negation is already asserted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contradiction(pub Literal);

impl Condition {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_literals(lits: impl IntoIterator<Item = Literal>) -> Result<Self, Contradiction> {
        let mut c = Condition::new();
        for l in lits {
            c.insert(l)?;
        }
        Ok(c)
    }

    /// Conjoins `lit`, failing if its negation is present.
    pub fn insert(&mut self, lit: Literal) -> Result<(), Contradiction> {
        match self.literals.get(&lit.atom) {
            Some(&p) if p != lit.positive => Err(Contradiction(lit)),
            _ => {
                self.literals.insert(lit.atom, lit.positive);
                Ok(())
            }
        }
    }

    /// Records `lit` as the latest known fact, replacing an earlier fact on
    /// the same atom.
    pub fn assert_fact(&mut self, lit: Literal) {
        self.literals.insert(lit.atom, lit.positive);
    }

    pub fn contains(&self, lit: &Literal) -> bool {
        self.literals.get(&lit.atom) == Some(&lit.positive)
    }

    pub fn contradicts(&self, lit: &Literal) -> bool {
        self.literals.get(&lit.atom) == Some(&!lit.positive)
    }

    pub fn holds(&self, model: &ArchModel) -> bool {
        self.iter().all(|l| l.holds(model))
    }

    /// First literal that does not hold on `model`.
    pub fn first_violation(&self, model: &ArchModel) -> Option<Literal> {
        self.iter().find(|l| !l.holds(model))
    }

    pub fn iter(&self) -> impl Iterator<Item = Literal> + '_ {
        self.literals.iter().map(|(a, &p)| Literal {
            atom: a.clone(),
            positive: p,
        })
    }

    pub fn len(&self) -> usize {
        self.literals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.literals.is_empty()
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.iter().map(|l| l.to_string()).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
