use std::fmt;

use serde::{Deserialize, Serialize};

use super::condition::{Atom, Condition, Literal};
use super::RefactoringError;
use crate::model::{ArchModel, CommLink, Component, Node, Replica};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ActionKind {
    /// Clone a node together with its deployed artifacts and links.
    Clon,
    /// Move an operation to a new component deployed on a new node.
    MO2N,
    /// Move an operation to an existing component.
    MO2C,
    /// Redeploy a component on a new node.
    ReDe,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::Clon,
        ActionKind::MO2N,
        ActionKind::MO2C,
        ActionKind::ReDe,
    ];

    /// Baseline refactoring factor: intrinsic effort of one application.
    pub fn baseline_factor(self) -> f64 {
        match self {
            ActionKind::MO2N => 1.80,
            ActionKind::MO2C => 1.64,
            ActionKind::ReDe => 1.45,
            ActionKind::Clon => 1.23,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Clon => "Clon",
            ActionKind::MO2N => "MO2N",
            ActionKind::MO2C => "MO2C",
            ActionKind::ReDe => "ReDe",
        }
    }

    fn tag(self) -> &'static str {
        match self {
            ActionKind::Clon => "clon",
            ActionKind::MO2N => "mo2n",
            ActionKind::MO2C => "mo2c",
            ActionKind::ReDe => "rede",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One refactoring action. `target` is a node for `Clon`, an operation for
/// `MO2N` and `MO2C`, and a component for `ReDe`; `dest` is the destination
/// component of `MO2C` and absent otherwise.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefactoringAction {
    pub kind: ActionKind,
    pub target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dest: Option<String>,
}

impl fmt::Display for RefactoringAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.dest {
            Some(d) => write!(f, "{}({}, {})", self.kind, self.target, d),
            None => write!(f, "{}({})", self.kind, self.target),
        }
    }
}

/// Effect of applying an action: its post-condition and the resulting model.
#[derive(Debug, Clone)]
pub struct Transition {
    pub post: Condition,
    pub model: ArchModel,
}

impl RefactoringAction {
    pub fn clon(node: &str) -> Self {
        Self::simple(ActionKind::Clon, node)
    }

    pub fn mo2n(operation: &str) -> Self {
        Self::simple(ActionKind::MO2N, operation)
    }

    pub fn mo2c(operation: &str, dest: &str) -> Self {
        RefactoringAction {
            kind: ActionKind::MO2C,
            target: operation.to_string(),
            dest: Some(dest.to_string()),
        }
    }

    pub fn rede(component: &str) -> Self {
        Self::simple(ActionKind::ReDe, component)
    }

    fn simple(kind: ActionKind, target: &str) -> Self {
        RefactoringAction {
            kind,
            target: target.to_string(),
            dest: None,
        }
    }

    fn check_shape(&self) -> Result<(), RefactoringError> {
        let ok = match self.kind {
            ActionKind::MO2C => self.dest.is_some(),
            _ => self.dest.is_none(),
        };
        if ok {
            Ok(())
        } else {
            Err(RefactoringError::Malformed(self.to_string()))
        }
    }

    /// Id of the element (node or component) created by this action when it
    /// sits at `slot` of a sequence.
    fn derived(&self, base: &str, slot: usize) -> String {
        format!("{base}~{}{slot}", self.kind.tag())
    }

    /// Literals that can be stated without resolving the target in `model`,
    /// plus the resolved ones when possible. Used by sequence composition,
    /// where an unresolvable target simply leaves an unsatisfiable `exists`.
    pub(crate) fn pre_literals(&self, model: &ArchModel) -> Vec<Literal> {
        match self.kind {
            ActionKind::Clon => vec![Literal::pos(Atom::exists_node(&self.target))],
            ActionKind::MO2N => {
                let mut lits = vec![Literal::pos(Atom::exists_operation(&self.target))];
                if let Some((src, _)) = model.owner_of(&self.target) {
                    lits.push(Literal::pos(Atom::owns(&src.id, &self.target)));
                }
                lits
            }
            ActionKind::MO2C => {
                let dest = self.dest.as_deref().unwrap_or_default();
                vec![
                    Literal::pos(Atom::exists_operation(&self.target)),
                    Literal::pos(Atom::exists_component(dest)),
                    Literal::neg(Atom::owns(dest, &self.target)),
                ]
            }
            ActionKind::ReDe => vec![Literal::pos(Atom::exists_component(&self.target))],
        }
    }

    /// Predicates that must hold on `model` for this action to be enabled.
    pub fn pre_condition(&self, model: &ArchModel) -> Result<Condition, RefactoringError> {
        self.check_shape()?;
        let resolvable = match self.kind {
            ActionKind::Clon => model.node(&self.target).is_some(),
            ActionKind::MO2N | ActionKind::MO2C => model.owner_of(&self.target).is_some(),
            ActionKind::ReDe => model.component(&self.target).is_some(),
        };
        if !resolvable {
            return Err(RefactoringError::Unresolvable(self.to_string()));
        }
        Condition::from_literals(self.pre_literals(model))
            .map_err(|c| RefactoringError::Contradiction(c.0.to_string()))
    }

    /// Applies the action at position `slot` of a sequence, returning a new
    /// model. The input model is left untouched.
    pub fn apply(&self, model: &ArchModel, slot: usize) -> Result<ArchModel, RefactoringError> {
        self.transition(model, slot).map(|t| t.model)
    }

    /// Applies the action and reports its post-condition.
    pub fn transition(
        &self,
        model: &ArchModel,
        slot: usize,
    ) -> Result<Transition, RefactoringError> {
        let pre = self.pre_condition(model)?;
        if let Some(lit) = pre.first_violation(model) {
            return Err(RefactoringError::PreconditionViolated {
                action: self.to_string(),
                literal: lit.to_string(),
            });
        }
        let mut next = model.clone();
        let mut post = Condition::new();
        match self.kind {
            ActionKind::Clon => self.clone_node(&mut next, &mut post, slot)?,
            ActionKind::MO2N => self.move_to_new_node(&mut next, &mut post, slot)?,
            ActionKind::MO2C => self.move_to_component(&mut next, &mut post, slot)?,
            ActionKind::ReDe => self.redeploy(&mut next, &mut post, slot)?,
        }
        Ok(Transition { post, model: next })
    }

    fn fresh(&self, model: &ArchModel, id: &str) -> Result<(), RefactoringError> {
        let taken = model.component(id).is_some()
            || model.node(id).is_some()
            || model.link(id).is_some()
            || model.replica(id).is_some()
            || model.owner_of(id).is_some();
        if taken {
            Err(RefactoringError::IdCollision {
                action: self.to_string(),
                id: id.to_string(),
            })
        } else {
            Ok(())
        }
    }

    fn clone_node(
        &self,
        m: &mut ArchModel,
        post: &mut Condition,
        slot: usize,
    ) -> Result<(), RefactoringError> {
        let original = m
            .node(&self.target)
            .cloned()
            .expect("checked by pre-condition");
        let clone_id = self.derived(&original.id, slot);
        self.fresh(m, &clone_id)?;

        let mut new_links = vec![];
        for l in m.links.iter().filter(|l| l.is_incident(&original.id)) {
            let other = l.other(&original.id).expect("incident").to_string();
            new_links.push(CommLink {
                id: format!("{}~{}", l.id, clone_id),
                endpoints: [clone_id.clone(), other],
                failure_prob: l.failure_prob,
            });
        }
        let mut new_replicas = vec![];
        for artifact in m.artifacts_on(&original.id) {
            let primary = match m.replica(artifact) {
                Some(r) => r.replica_of.clone(),
                None => artifact.to_string(),
            };
            new_replicas.push(Replica {
                id: self.derived(artifact, slot),
                replica_of: primary,
            });
        }
        for id in new_links
            .iter()
            .map(|l| &l.id)
            .chain(new_replicas.iter().map(|r| &r.id))
        {
            self.fresh(m, id)?;
        }

        post.assert_fact(Literal::pos(Atom::exists_node(&clone_id)));
        for l in &new_links {
            post.assert_fact(Literal::pos(Atom::connected(
                &l.endpoints[0],
                &l.endpoints[1],
            )));
        }
        for r in &new_replicas {
            post.assert_fact(Literal::pos(Atom::deployed_on(&r.id, &clone_id)));
            m.deployment.insert(r.id.clone(), clone_id.clone());
        }
        m.nodes.push(Node {
            id: clone_id,
            ..original
        });
        m.links.extend(new_links);
        m.replicas.extend(new_replicas);
        Ok(())
    }

    fn move_to_new_node(
        &self,
        m: &mut ArchModel,
        post: &mut Condition,
        slot: usize,
    ) -> Result<(), RefactoringError> {
        let op_id = self.target.clone();
        let (src, _) = m.owner_of(&op_id).expect("checked by pre-condition");
        let src_id = src.id.clone();
        let src_theta = src.failure_prob;
        let src_node = m
            .node_of(&src_id)
            .expect("validated deployment")
            .to_string();
        let host = m.node(&src_node).cloned().expect("validated deployment");

        let comp_id = self.derived(&op_id, slot);
        let node_id = format!("{comp_id}~node");
        self.fresh(m, &comp_id)?;
        self.fresh(m, &node_id)?;

        let op = take_operation(m, &src_id, &op_id);
        m.components.push(Component {
            id: comp_id.clone(),
            operations: vec![op],
            failure_prob: src_theta,
        });
        m.nodes.push(Node {
            id: node_id.clone(),
            ..host
        });
        m.deployment.insert(comp_id.clone(), node_id.clone());
        redirect_messages(m, &op_id, &comp_id);

        post.assert_fact(Literal::pos(Atom::exists_component(&comp_id)));
        post.assert_fact(Literal::pos(Atom::exists_node(&node_id)));
        post.assert_fact(Literal::pos(Atom::owns(&comp_id, &op_id)));
        post.assert_fact(Literal::neg(Atom::owns(&src_id, &op_id)));
        post.assert_fact(Literal::pos(Atom::deployed_on(&comp_id, &node_id)));

        let callee_nodes = vec![node_id.clone()];
        self.link_callers(m, post, &op_id, &callee_nodes, &src_node, slot)
    }

    fn move_to_component(
        &self,
        m: &mut ArchModel,
        post: &mut Condition,
        slot: usize,
    ) -> Result<(), RefactoringError> {
        let op_id = self.target.clone();
        let dest = self.dest.clone().expect("checked by shape");
        let (src, _) = m.owner_of(&op_id).expect("checked by pre-condition");
        let src_id = src.id.clone();
        let src_node = m
            .node_of(&src_id)
            .expect("validated deployment")
            .to_string();

        let op = take_operation(m, &src_id, &op_id);
        m.components
            .iter_mut()
            .find(|c| c.id == dest)
            .expect("checked by pre-condition")
            .operations
            .push(op);
        redirect_messages(m, &op_id, &dest);

        post.assert_fact(Literal::pos(Atom::owns(&dest, &op_id)));
        post.assert_fact(Literal::neg(Atom::owns(&src_id, &op_id)));

        let dest_nodes: Vec<String> = m
            .group_of(&dest)
            .into_iter()
            .filter_map(|a| m.node_of(a).map(str::to_string))
            .collect();
        self.link_callers(m, post, &op_id, &dest_nodes, &src_node, slot)
    }

    /// Adds a link between every caller-side node of `op_id` and every node in
    /// `callee_nodes` that are not yet connected. A new link copies the
    /// failure probability of the link from the caller node to `old_host`,
    /// falling back to the mean over existing links.
    fn link_callers(
        &self,
        m: &mut ArchModel,
        post: &mut Condition,
        op_id: &str,
        callee_nodes: &[String],
        old_host: &str,
        slot: usize,
    ) -> Result<(), RefactoringError> {
        let mut caller_nodes: Vec<String> = vec![];
        for msg in m.scenarios.iter().flat_map(|s| &s.messages) {
            if msg.operation != op_id || msg.from_actor() {
                continue;
            }
            for member in m.group_of(&msg.caller) {
                if let Some(n) = m.node_of(member) {
                    if !caller_nodes.iter().any(|c| c == n) {
                        caller_nodes.push(n.to_string());
                    }
                }
            }
        }
        let mean_psi = if m.links.is_empty() {
            0.0
        } else {
            m.links.iter().map(|l| l.failure_prob).sum::<f64>() / m.links.len() as f64
        };
        let mut added = vec![];
        for y in &caller_nodes {
            for z in callee_nodes {
                if y == z
                    || m.link_between(y, z).is_some()
                    || added.iter().any(|l: &CommLink| l.connects(y, z))
                {
                    continue;
                }
                let psi = m
                    .link_between(y, old_host)
                    .map(|l| l.failure_prob)
                    .unwrap_or(mean_psi);
                let id = format!("{}~{y}~{z}", self.derived(op_id, slot));
                added.push(CommLink {
                    id,
                    endpoints: [y.clone(), z.clone()],
                    failure_prob: psi,
                });
            }
        }
        for l in &added {
            self.fresh(m, &l.id)?;
            post.assert_fact(Literal::pos(Atom::connected(
                &l.endpoints[0],
                &l.endpoints[1],
            )));
        }
        m.links.extend(added);
        Ok(())
    }

    fn redeploy(
        &self,
        m: &mut ArchModel,
        post: &mut Condition,
        slot: usize,
    ) -> Result<(), RefactoringError> {
        let comp = self.target.clone();
        let old = m.node_of(&comp).expect("validated deployment").to_string();
        let host = m.node(&old).cloned().expect("validated deployment");
        let node_id = self.derived(&comp, slot);
        self.fresh(m, &node_id)?;

        let mut new_links = vec![];
        for l in m.links.iter().filter(|l| l.is_incident(&old)) {
            let other = l.other(&old).expect("incident").to_string();
            new_links.push(CommLink {
                id: format!("{}~{}", l.id, node_id),
                endpoints: [node_id.clone(), other],
                failure_prob: l.failure_prob,
            });
        }
        for l in &new_links {
            self.fresh(m, &l.id)?;
            post.assert_fact(Literal::pos(Atom::connected(
                &l.endpoints[0],
                &l.endpoints[1],
            )));
        }
        post.assert_fact(Literal::pos(Atom::exists_node(&node_id)));
        post.assert_fact(Literal::pos(Atom::deployed_on(&comp, &node_id)));
        post.assert_fact(Literal::neg(Atom::deployed_on(&comp, &old)));

        m.nodes.push(Node {
            id: node_id.clone(),
            ..host
        });
        m.links.extend(new_links);
        m.deployment.insert(comp, node_id);
        Ok(())
    }
}

fn take_operation(m: &mut ArchModel, component: &str, op_id: &str) -> crate::model::Operation {
    let c = m
        .components
        .iter_mut()
        .find(|c| c.id == component)
        .expect("owner exists");
    let idx = c
        .operations
        .iter()
        .position(|o| o.id == op_id)
        .expect("owner holds operation");
    c.operations.remove(idx)
}

fn redirect_messages(m: &mut ArchModel, op_id: &str, callee: &str) {
    for msg in m.scenarios.iter_mut().flat_map(|s| s.messages.iter_mut()) {
        if msg.operation == op_id {
            msg.callee = callee.to_string();
        }
    }
}
