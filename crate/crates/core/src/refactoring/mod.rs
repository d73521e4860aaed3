//! Refactoring actions over architecture models and the feasibility engine
//! that composes their pre- and post-conditions.
//!
//! Composing a sequence folds left to right: the global pre-condition is the
//! first action's pre-condition conjoined with every later pre-condition
//! literal not already established by an earlier post-condition, and the
//! global post-condition accumulates every post-condition. A sequence is
//! feasible when the fold meets no contradiction and the global
//! pre-condition holds on the source model.

mod action;
mod condition;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use action::{ActionKind, RefactoringAction, Transition};
pub use condition::{Atom, Condition, Contradiction, Element, Literal};

use crate::model::ArchModel;

/// Default number of actions in a sequence.
pub const DEFAULT_SEQUENCE_LENGTH: usize = 4;

/// Redraws allowed per sequence position before generation gives up.
pub const RETRY_BUDGET: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RefactoringError {
    #[error("cannot resolve the target of {0}")]
    Unresolvable(String),
    #[error("pre-condition of {action} violated: {literal}")]
    PreconditionViolated { action: String, literal: String },
    #[error("{action} would create `{id}`, which already exists")]
    IdCollision { action: String, id: String },
    #[error("malformed action {0}")]
    Malformed(String),
    #[error("contradictory conditions on {0}")]
    Contradiction(String),
    #[error("no feasible action for position {position} after {attempts} draws")]
    Exhausted { position: usize, attempts: usize },
    #[error("sequence length must be at least 1")]
    EmptyLength,
}

/// An ordered list of refactoring actions; the genotype of the search.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RefactoringSequence {
    pub actions: Vec<RefactoringAction>,
}

impl RefactoringSequence {
    pub fn new(actions: Vec<RefactoringAction>) -> Self {
        RefactoringSequence { actions }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("sequence serialization is infallible")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn is_feasible(&self, model: &ArchModel) -> bool {
        is_feasible(&self.actions, model)
    }

    /// Applies every action in order.
    pub fn apply(&self, model: &ArchModel) -> Result<ArchModel, RefactoringError> {
        apply_all(&self.actions, model)
    }

    pub fn conditions(
        &self,
        model: &ArchModel,
    ) -> Result<(Condition, Condition), RefactoringError> {
        compose_conditions(&self.actions, model)
    }
}

pub fn apply_all(
    actions: &[RefactoringAction],
    model: &ArchModel,
) -> Result<ArchModel, RefactoringError> {
    let mut state = model.clone();
    for (slot, a) in actions.iter().enumerate() {
        state = a.apply(&state, slot)?;
    }
    Ok(state)
}

/// Folds the conditions of `actions` into a global (pre, post) pair.
///
/// Each action's conditions are stated against the model produced by the
/// actions before it. A post literal established earlier discharges the
/// matching pre literal of a later action; a later post literal on the same
/// atom supersedes an earlier one. A pre literal whose negation was
/// established earlier is a contradiction.
pub fn compose_conditions(
    actions: &[RefactoringAction],
    model: &ArchModel,
) -> Result<(Condition, Condition), RefactoringError> {
    let mut pre = Condition::new();
    let mut post = Condition::new();
    let mut state = Some(model.clone());
    for (slot, action) in actions.iter().enumerate() {
        let lits = match &state {
            Some(s) => action.pre_literals(s),
            None => action.pre_literals(model),
        };
        for lit in lits {
            if post.contains(&lit) {
                continue;
            }
            if post.contradicts(&lit) {
                return Err(RefactoringError::Contradiction(format!(
                    "{action}: {lit} negated by an earlier post-condition"
                )));
            }
            pre.insert(lit.clone()).map_err(|_| {
                RefactoringError::Contradiction(format!(
                    "{action}: {lit} conflicts with the global pre-condition"
                ))
            })?;
        }
        // Once an action cannot be applied the rest of the fold only collects
        // pre literals; the sequence is infeasible regardless.
        state = match state.take() {
            Some(s) => match action.transition(&s, slot) {
                Ok(t) => {
                    for lit in t.post.iter() {
                        post.assert_fact(lit);
                    }
                    Some(t.model)
                }
                Err(RefactoringError::IdCollision { action, id }) => {
                    return Err(RefactoringError::IdCollision { action, id })
                }
                Err(_) => None,
            },
            None => None,
        };
    }
    Ok((pre, post))
}

/// True iff the conditions compose and the global pre-condition holds on
/// `model`. The empty sequence is feasible.
pub fn is_feasible(actions: &[RefactoringAction], model: &ArchModel) -> bool {
    match compose_conditions(actions, model) {
        Ok((pre, _)) => pre.holds(model),
        Err(_) => false,
    }
}

/// Every action of `kind` that is enabled on `model`.
pub fn valid_actions(model: &ArchModel, kind: ActionKind) -> Vec<RefactoringAction> {
    match kind {
        ActionKind::Clon => model
            .nodes
            .iter()
            .map(|n| RefactoringAction::clon(&n.id))
            .collect(),
        ActionKind::MO2N => model
            .operations()
            .map(|(_, o)| RefactoringAction::mo2n(&o.id))
            .collect(),
        ActionKind::MO2C => {
            let mut out = vec![];
            for (owner, op) in model.operations() {
                for dest in &model.components {
                    if dest.id != owner.id {
                        out.push(RefactoringAction::mo2c(&op.id, &dest.id));
                    }
                }
            }
            out
        }
        ActionKind::ReDe => model
            .components
            .iter()
            .map(|c| RefactoringAction::rede(&c.id))
            .collect(),
    }
}

/// Draws one action: the kind uniformly among kinds with at least one valid
/// target, then the target uniformly within that kind.
pub fn random_action<R: Rng + ?Sized>(model: &ArchModel, rng: &mut R) -> Option<RefactoringAction> {
    let domains: Vec<Vec<RefactoringAction>> = ActionKind::ALL
        .iter()
        .map(|&k| valid_actions(model, k))
        .filter(|d| !d.is_empty())
        .collect();
    let domain = domains.choose(rng)?;
    domain.choose(rng).cloned()
}

/// Builds a feasible sequence of `length` actions, redrawing any action that
/// makes the partial sequence infeasible.
pub fn random_sequence<R: Rng + ?Sized>(
    model: &ArchModel,
    rng: &mut R,
    length: usize,
) -> Result<RefactoringSequence, RefactoringError> {
    if length == 0 {
        return Err(RefactoringError::EmptyLength);
    }
    let mut actions: Vec<RefactoringAction> = Vec::with_capacity(length);
    let mut state = model.clone();
    for position in 0..length {
        let mut placed = false;
        for _ in 0..RETRY_BUDGET {
            let Some(candidate) = random_action(&state, rng) else {
                break;
            };
            actions.push(candidate);
            if is_feasible(&actions, model) {
                let last = actions.last().expect("just pushed");
                match last.apply(&state, position) {
                    Ok(next) => {
                        state = next;
                        placed = true;
                        break;
                    }
                    Err(_) => {
                        actions.pop();
                    }
                }
            } else {
                actions.pop();
            }
        }
        if !placed {
            return Err(RefactoringError::Exhausted {
                position,
                attempts: RETRY_BUDGET,
            });
        }
    }
    Ok(RefactoringSequence::new(actions))
}

/// Makes `actions` feasible by redrawing, left to right, every action that
/// breaks feasibility of its prefix. Returns `None` when a position cannot be
/// repaired within the retry budget.
pub fn repair<R: Rng + ?Sized>(
    actions: Vec<RefactoringAction>,
    model: &ArchModel,
    rng: &mut R,
) -> Option<RefactoringSequence> {
    let mut out: Vec<RefactoringAction> = Vec::with_capacity(actions.len());
    let mut state = model.clone();
    for (position, action) in actions.into_iter().enumerate() {
        out.push(action);
        let mut attempts = 0;
        while !is_feasible(&out, model) {
            if attempts == RETRY_BUDGET {
                return None;
            }
            attempts += 1;
            out.pop();
            out.push(random_action(&state, rng)?);
        }
        state = out[position].apply(&state, position).ok()?;
    }
    Some(RefactoringSequence::new(out))
}

#[cfg(test)]
mod tests;
