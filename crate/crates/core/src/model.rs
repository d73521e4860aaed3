//! Three-view architecture model: components and operations (static view),
//! scenarios of messages (dynamic view), nodes, links and deployment
//! (platform view), annotated with performance and reliability parameters.
//!
//! Models are read from and written to a JSON document whose field names
//! follow the types below (`camelCase`). Cloned components produced by node
//! replication live in the optional `replicas` list: a replica serves the
//! operations of the component it was cloned from and shares its failure
//! probability.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved caller id for messages issued by an external actor. The actor has
/// no deployment, so its messages contribute workload but no link traffic.
pub const EXTERNAL_ACTOR: &str = "@actor";

const PROB_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid model:\n  - {}", .0.join("\n  - "))]
    Invalid(Vec<String>),
    #[error("unknown {kind} `{id}`")]
    Unknown { kind: &'static str, id: String },
}

impl ModelError {
    fn unknown(kind: &'static str, id: &str) -> Self {
        ModelError::Unknown {
            kind,
            id: id.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Operation {
    pub id: String,
    /// Host seconds per invocation on a node with speed factor 1.
    pub service_demand: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Component {
    pub id: String,
    #[serde(default)]
    pub operations: Vec<Operation>,
    pub failure_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Node {
    pub id: String,
    pub multiplicity: u32,
    pub speed_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CommLink {
    pub id: String,
    pub endpoints: [String; 2],
    pub failure_prob: f64,
}

impl CommLink {
    pub fn connects(&self, a: &str, b: &str) -> bool {
        (self.endpoints[0] == a && self.endpoints[1] == b)
            || (self.endpoints[0] == b && self.endpoints[1] == a)
    }

    pub fn is_incident(&self, node: &str) -> bool {
        self.endpoints[0] == node || self.endpoints[1] == node
    }

    /// The endpoint opposite to `node`, if `node` is an endpoint.
    pub fn other(&self, node: &str) -> Option<&str> {
        if self.endpoints[0] == node {
            Some(&self.endpoints[1])
        } else if self.endpoints[1] == node {
            Some(&self.endpoints[0])
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "camelCase", deny_unknown_fields)]
pub enum Workload {
    #[serde(rename_all = "camelCase")]
    Open { arrival_rate: f64 },
    #[serde(rename_all = "camelCase")]
    Closed { population: u32, think_time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Message {
    pub caller: String,
    pub callee: String,
    pub operation: String,
    #[serde(default)]
    pub size: f64,
    #[serde(default = "one")]
    pub repetitions: u32,
}

fn one() -> u32 {
    1
}

impl Message {
    pub fn from_actor(&self) -> bool {
        self.caller == EXTERNAL_ACTOR
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub prob: f64,
    pub workload: Workload,
    pub messages: Vec<Message>,
}

/// A clone of a component created by node replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct Replica {
    pub id: String,
    pub replica_of: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ArchModel {
    pub components: Vec<Component>,
    pub nodes: Vec<Node>,
    #[serde(default)]
    pub links: Vec<CommLink>,
    pub scenarios: Vec<Scenario>,
    /// Component (or replica) id to node id.
    pub deployment: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replicas: Vec<Replica>,
}

/// Kinds of elements that carry an architectural weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKind {
    Component,
    Node,
    Operation,
}

impl ArchModel {
    /// Parses and validates a JSON model document.
    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let model: ArchModel = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialization is infallible")
    }

    /// Checks every structural invariant and reports all violations at once.
    pub fn validate(&self) -> Result<(), ModelError> {
        let mut errs = Vec::new();

        let mut ids: Vec<(&str, &str)> = Vec::new();
        for c in &self.components {
            ids.push(("component", &c.id));
            ids.extend(c.operations.iter().map(|o| ("operation", o.id.as_str())));
        }
        ids.extend(self.nodes.iter().map(|n| ("node", n.id.as_str())));
        ids.extend(self.links.iter().map(|l| ("link", l.id.as_str())));
        ids.extend(self.replicas.iter().map(|r| ("replica", r.id.as_str())));
        let mut seen = BTreeSet::new();
        for (what, id) in ids {
            if id == EXTERNAL_ACTOR {
                errs.push(format!("{what} uses the reserved id `{EXTERNAL_ACTOR}`"));
            }
            if id.is_empty() {
                errs.push(format!("{what} has an empty id"));
            }
            if !seen.insert(id) {
                errs.push(format!("duplicate element id `{id}`"));
            }
        }

        if self.components.is_empty() {
            errs.push("model has no components".into());
        }
        if self.nodes.is_empty() {
            errs.push("model has no nodes".into());
        }

        let node_ids: BTreeSet<&str> = self.nodes.iter().map(|n| n.id.as_str()).collect();
        let comp_ids: BTreeSet<&str> = self.components.iter().map(|c| c.id.as_str()).collect();

        for c in &self.components {
            if !(0.0..=1.0).contains(&c.failure_prob) {
                errs.push(format!(
                    "component `{}` failure probability {} outside [0,1]",
                    c.id, c.failure_prob
                ));
            }
            for op in &c.operations {
                if !(op.service_demand > 0.0 && op.service_demand.is_finite()) {
                    errs.push(format!(
                        "operation `{}` service demand {} must be > 0",
                        op.id, op.service_demand
                    ));
                }
            }
            match self.deployment.get(&c.id) {
                None => errs.push(format!("component `{}` is not deployed", c.id)),
                Some(n) if !node_ids.contains(n.as_str()) => errs.push(format!(
                    "component `{}` deployed on unknown node `{n}`",
                    c.id
                )),
                _ => {}
            }
        }
        for r in &self.replicas {
            if !comp_ids.contains(r.replica_of.as_str()) {
                errs.push(format!(
                    "replica `{}` clones unknown component `{}`",
                    r.id, r.replica_of
                ));
            }
            match self.deployment.get(&r.id) {
                None => errs.push(format!("replica `{}` is not deployed", r.id)),
                Some(n) if !node_ids.contains(n.as_str()) => {
                    errs.push(format!("replica `{}` deployed on unknown node `{n}`", r.id))
                }
                _ => {}
            }
        }
        for key in self.deployment.keys() {
            let known =
                comp_ids.contains(key.as_str()) || self.replicas.iter().any(|r| &r.id == key);
            if !known {
                errs.push(format!("deployment entry for unknown component `{key}`"));
            }
        }

        for n in &self.nodes {
            if n.multiplicity < 1 {
                errs.push(format!("node `{}` multiplicity must be >= 1", n.id));
            }
            if !(n.speed_factor > 0.0 && n.speed_factor.is_finite()) {
                errs.push(format!("node `{}` speed factor must be > 0", n.id));
            }
        }

        let mut pairs: BTreeSet<(&str, &str)> = BTreeSet::new();
        for l in &self.links {
            let [a, b] = &l.endpoints;
            if a == b {
                errs.push(format!("link `{}` connects node `{a}` to itself", l.id));
            }
            for e in [a, b] {
                if !node_ids.contains(e.as_str()) {
                    errs.push(format!("link `{}` references unknown node `{e}`", l.id));
                }
            }
            if !(0.0..=1.0).contains(&l.failure_prob) {
                errs.push(format!(
                    "link `{}` failure probability {} outside [0,1]",
                    l.id, l.failure_prob
                ));
            }
            let key = if a <= b {
                (a.as_str(), b.as_str())
            } else {
                (b.as_str(), a.as_str())
            };
            if !pairs.insert(key) {
                errs.push(format!(
                    "more than one link between `{}` and `{}`",
                    key.0, key.1
                ));
            }
        }

        if self.scenarios.is_empty() {
            errs.push("model has no scenarios".into());
        }
        let mut prob_sum = 0.0;
        for s in &self.scenarios {
            prob_sum += s.prob;
            if !(0.0..=1.0).contains(&s.prob) {
                errs.push(format!(
                    "scenario `{}` probability {} outside [0,1]",
                    s.id, s.prob
                ));
            }
            match s.workload {
                Workload::Open { arrival_rate } => {
                    if !(arrival_rate > 0.0 && arrival_rate.is_finite()) {
                        errs.push(format!("scenario `{}` arrival rate must be > 0", s.id));
                    }
                }
                Workload::Closed {
                    population,
                    think_time,
                } => {
                    if population == 0 {
                        errs.push(format!("scenario `{}` population must be > 0", s.id));
                    }
                    if !(think_time > 0.0 && think_time.is_finite()) {
                        errs.push(format!("scenario `{}` think time must be > 0", s.id));
                    }
                }
            }
            for (k, m) in s.messages.iter().enumerate() {
                let at = format!("scenario `{}` message #{k}", s.id);
                if !m.from_actor() && !comp_ids.contains(m.caller.as_str()) {
                    errs.push(format!("{at}: unknown caller `{}`", m.caller));
                }
                match self.component(&m.callee) {
                    None => errs.push(format!("{at}: unknown callee `{}`", m.callee)),
                    Some(c) => {
                        if !c.operations.iter().any(|o| o.id == m.operation) {
                            errs.push(format!(
                                "{at}: callee `{}` does not own operation `{}`",
                                m.callee, m.operation
                            ));
                        }
                    }
                }
                if !(m.size >= 0.0 && m.size.is_finite()) {
                    errs.push(format!("{at}: size must be >= 0"));
                }
                if m.repetitions < 1 {
                    errs.push(format!("{at}: repetitions must be >= 1"));
                }
            }
        }
        if !self.scenarios.is_empty() && (prob_sum - 1.0).abs() > PROB_SUM_TOLERANCE {
            errs.push(format!(
                "scenario probabilities sum to {prob_sum}, expected 1"
            ));
        }

        if errs.is_empty() {
            Ok(())
        } else {
            Err(ModelError::Invalid(errs))
        }
    }

    pub fn component(&self, id: &str) -> Option<&Component> {
        self.components.iter().find(|c| c.id == id)
    }

    pub fn node(&self, id: &str) -> Option<&Node> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn link(&self, id: &str) -> Option<&CommLink> {
        self.links.iter().find(|l| l.id == id)
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn replica(&self, id: &str) -> Option<&Replica> {
        self.replicas.iter().find(|r| r.id == id)
    }

    pub fn link_between(&self, a: &str, b: &str) -> Option<&CommLink> {
        self.links.iter().find(|l| l.connects(a, b))
    }

    /// Component owning `operation`, with the operation itself.
    pub fn owner_of(&self, operation: &str) -> Option<(&Component, &Operation)> {
        self.components.iter().find_map(|c| {
            c.operations
                .iter()
                .find(|o| o.id == operation)
                .map(|o| (c, o))
        })
    }

    pub fn operations(&self) -> impl Iterator<Item = (&Component, &Operation)> {
        self.components
            .iter()
            .flat_map(|c| c.operations.iter().map(move |o| (c, o)))
    }

    /// Node hosting a component or replica.
    pub fn node_of(&self, artifact: &str) -> Option<&str> {
        self.deployment.get(artifact).map(String::as_str)
    }

    /// A component followed by its replicas: the artifacts that share its
    /// invocations evenly.
    pub fn group_of(&self, component: &str) -> Vec<&str> {
        let mut members = vec![];
        if let Some(c) = self.component(component) {
            members.push(c.id.as_str());
        }
        members.extend(
            self.replicas
                .iter()
                .filter(|r| r.replica_of == component)
                .map(|r| r.id.as_str()),
        );
        members
    }

    /// Components and replicas deployed on `node`, in deployment-key order.
    pub fn artifacts_on(&self, node: &str) -> Vec<&str> {
        self.deployment
            .iter()
            .filter(|(_, n)| n.as_str() == node)
            .map(|(a, _)| a.as_str())
            .collect()
    }

    pub fn neighbors(&self, node: &str) -> Vec<&str> {
        let mut out: Vec<&str> = self.links.iter().filter_map(|l| l.other(node)).collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    fn scenario_or_err(&self, id: &str) -> Result<&Scenario, ModelError> {
        self.scenario(id)
            .ok_or_else(|| ModelError::unknown("scenario", id))
    }

    /// InvNr: total repetitions of messages in `scenario` addressed to `component`.
    pub fn invocation_count(&self, scenario: &str, component: &str) -> Result<u64, ModelError> {
        let s = self.scenario_or_err(scenario)?;
        if self.component(component).is_none() {
            return Err(ModelError::unknown("component", component));
        }
        Ok(s.messages
            .iter()
            .filter(|m| m.callee == component)
            .map(|m| u64::from(m.repetitions))
            .sum())
    }

    /// MsgSize: total size times repetitions of the messages of `scenario`
    /// crossing `link`.
    pub fn message_traffic(&self, scenario: &str, link: &str) -> Result<f64, ModelError> {
        let s = self.scenario_or_err(scenario)?;
        let l = self
            .link(link)
            .ok_or_else(|| ModelError::unknown("link", link))?;
        let traffic = self.node_pair_traffic(s);
        Ok(traffic
            .get(&ordered_pair(&l.endpoints[0], &l.endpoints[1]))
            .copied()
            .unwrap_or(0.0))
    }

    /// Traffic per unordered pair of distinct nodes for one scenario. When a
    /// caller or callee is replicated, each message is split evenly over every
    /// (caller member, callee member) combination.
    pub fn node_pair_traffic(&self, scenario: &Scenario) -> BTreeMap<(String, String), f64> {
        let mut out = BTreeMap::new();
        for m in &scenario.messages {
            if m.from_actor() {
                continue;
            }
            let callers = self.group_of(&m.caller);
            let callees = self.group_of(&m.callee);
            if callers.is_empty() || callees.is_empty() {
                continue;
            }
            let share = m.size * f64::from(m.repetitions) / (callers.len() * callees.len()) as f64;
            for a in &callers {
                for b in &callees {
                    let (Some(na), Some(nb)) = (self.node_of(a), self.node_of(b)) else {
                        continue;
                    };
                    if na != nb {
                        *out.entry(ordered_pair(na, nb)).or_insert(0.0) += share;
                    }
                }
            }
        }
        out
    }

    pub fn element_kind(&self, id: &str) -> Option<ElementKind> {
        if self.component(id).is_some() {
            Some(ElementKind::Component)
        } else if self.node(id).is_some() {
            Some(ElementKind::Node)
        } else if self.owner_of(id).is_some() {
            Some(ElementKind::Operation)
        } else {
            None
        }
    }

    /// Connection count of an element: for a component, the distinct other
    /// parties it exchanges messages with plus the links incident to its node;
    /// for a node, incident links plus deployed artifacts; for an operation,
    /// the distinct callers (the external actor counts as one).
    pub fn connection_degree(&self, id: &str) -> Result<usize, ModelError> {
        let kind = self
            .element_kind(id)
            .ok_or_else(|| ModelError::unknown("element", id))?;
        Ok(match kind {
            ElementKind::Component => {
                let mut partners = BTreeSet::new();
                for m in self.scenarios.iter().flat_map(|s| &s.messages) {
                    if m.caller == id && m.callee != id {
                        partners.insert(m.callee.as_str());
                    }
                    if m.callee == id && m.caller != id {
                        partners.insert(m.caller.as_str());
                    }
                }
                let links = self
                    .node_of(id)
                    .map(|n| self.links.iter().filter(|l| l.is_incident(n)).count())
                    .unwrap_or(0);
                partners.len() + links
            }
            ElementKind::Node => {
                self.links.iter().filter(|l| l.is_incident(id)).count()
                    + self.artifacts_on(id).len()
            }
            ElementKind::Operation => self
                .scenarios
                .iter()
                .flat_map(|s| &s.messages)
                .filter(|m| m.operation == id)
                .map(|m| m.caller.as_str())
                .collect::<BTreeSet<_>>()
                .len(),
        })
    }

    /// AW(el) = 1 + deg(el)/maxdeg, with maxdeg taken over elements of the same
    /// kind. The result lies in [1, 2]; when every element of the kind has
    /// degree zero all weights are 2.
    pub fn architectural_weight(&self, id: &str) -> Result<f64, ModelError> {
        let kind = self
            .element_kind(id)
            .ok_or_else(|| ModelError::unknown("element", id))?;
        let deg = self.connection_degree(id)?;
        let peers: Vec<&str> = match kind {
            ElementKind::Component => self.components.iter().map(|c| c.id.as_str()).collect(),
            ElementKind::Node => self.nodes.iter().map(|n| n.id.as_str()).collect(),
            ElementKind::Operation => self.operations().map(|(_, o)| o.id.as_str()).collect(),
        };
        let mut max_deg = 0;
        for p in peers {
            max_deg = max_deg.max(self.connection_degree(p)?);
        }
        if max_deg == 0 {
            return Ok(2.0);
        }
        Ok(1.0 + deg as f64 / max_deg as f64)
    }

    /// Per-scenario multiset of (operation, repetitions, size): what the
    /// system does, independent of where it happens.
    pub fn behavior_signature(&self) -> BTreeMap<String, Vec<(String, u32, u64)>> {
        self.scenarios
            .iter()
            .map(|s| {
                let mut sig: Vec<(String, u32, u64)> = s
                    .messages
                    .iter()
                    .map(|m| (m.operation.clone(), m.repetitions, m.size.to_bits()))
                    .collect();
                sig.sort();
                (s.id.clone(), sig)
            })
            .collect()
    }
}

pub(crate) fn ordered_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}
