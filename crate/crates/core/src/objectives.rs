//! The four objectives of a refactoring sequence.
//!
//! * `perfQ`: mean normalized variation of the performance indices between
//!   the initial and the refactored model, positive when performance improves.
//! * `reliability`: system reliability of the refactored model.
//! * `pas`: fuzzy count of performance antipatterns in the refactored model.
//! * `changes`: architectural distance, `Σ brf(kind) · AW(target)`.
//!
//! NSGA-II compares [`ObjectiveVector::canonical`], where every component is
//! minimized.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::antipatterns::{detect, pas_objective, AntipatternOccurrence, PasMode};
use crate::lqn::{analyze, LqnError, PerformanceIndices};
use crate::model::ArchModel;
use crate::refactoring::{ActionKind, RefactoringAction, RefactoringError, RefactoringSequence};
use crate::reliability::system_reliability;

/// Utilization above which a refactored node is penalized.
pub const DEFAULT_UTILIZATION_KNEE: f64 = 0.8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("index `{0}` is missing from the refactored measurements")]
    IndexMismatch(String),
    #[error("index `{0}` is zero in both models")]
    Degenerate(String),
    #[error(transparent)]
    Refactoring(#[from] RefactoringError),
    #[error(transparent)]
    Solver(#[from] LqnError),
    #[error("performance solver did not converge")]
    Unstable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum IndexKind {
    Throughput,
    ResponseTime,
    Utilization,
}

impl IndexKind {
    /// +1 when larger is better, -1 otherwise.
    fn sign(self) -> f64 {
        match self {
            IndexKind::ResponseTime => -1.0,
            IndexKind::Throughput | IndexKind::Utilization => 1.0,
        }
    }
}

/// Named performance measurements that enter `perfQ`.
pub type IndexSet = BTreeMap<(IndexKind, String), f64>;

/// Throughput and response time per scenario and utilization per node.
pub fn index_set(indices: &PerformanceIndices) -> IndexSet {
    let mut out = IndexSet::new();
    for (s, &x) in &indices.scenario_throughput {
        out.insert((IndexKind::Throughput, s.clone()), x);
    }
    for (s, &r) in &indices.scenario_response_time {
        out.insert((IndexKind::ResponseTime, s.clone()), r);
    }
    for (n, &u) in &indices.node_utilization {
        out.insert((IndexKind::Utilization, n.clone()), u);
    }
    out
}

/// Mean over the indices of `initial` of `p·(F−I)/(F+I)`, with a penalty
/// `−min(1, max(0, U_F − knee)/(1 − knee))` added to each utilization term.
/// Indices only present in `refactored` are ignored.
pub fn perf_q(initial: &IndexSet, refactored: &IndexSet, knee: f64) -> Result<f64, ObjectiveError> {
    if initial.is_empty() {
        return Ok(0.0);
    }
    let mut sum = 0.0;
    for (key, &i) in initial {
        let name = format!("{:?}:{}", key.0, key.1);
        let f = *refactored
            .get(key)
            .ok_or_else(|| ObjectiveError::IndexMismatch(name.clone()))?;
        if f + i == 0.0 {
            return Err(ObjectiveError::Degenerate(name));
        }
        let mut term = key.0.sign() * (f - i) / (f + i);
        if key.0 == IndexKind::Utilization {
            term -= ((f - knee).max(0.0) / (1.0 - knee)).min(1.0);
        }
        sum += term;
    }
    Ok(sum / initial.len() as f64)
}

/// Σ brf · AW over precomputed (brf, AW) pairs.
pub fn weighted_distance(terms: &[(f64, f64)]) -> f64 {
    terms.iter().map(|(b, w)| b * w).sum()
}

/// Element whose architectural weight prices an action.
fn priced_element(a: &RefactoringAction) -> &str {
    &a.target
}

/// (brf, AW) for each action, with AW taken on the model the action is
/// applied to. Without brf every factor is 1.
pub fn distance_terms(
    seq: &RefactoringSequence,
    model: &ArchModel,
    brf: bool,
) -> Result<Vec<(f64, f64)>, ObjectiveError> {
    let mut state = model.clone();
    let mut terms = vec![];
    for (slot, a) in seq.actions.iter().enumerate() {
        let aw = state
            .architectural_weight(priced_element(a))
            .map_err(|_| RefactoringError::Unresolvable(a.to_string()))?;
        let factor = if brf { a.kind.baseline_factor() } else { 1.0 };
        terms.push((factor, aw));
        state = a.apply(&state, slot)?;
    }
    Ok(terms)
}

pub fn arch_distance(
    seq: &RefactoringSequence,
    model: &ArchModel,
    brf: bool,
) -> Result<f64, ObjectiveError> {
    Ok(weighted_distance(&distance_terms(seq, model, brf)?))
}

/// Objectives in their natural orientation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ObjectiveVector {
    pub perf_q: f64,
    pub reliability: f64,
    pub pas: f64,
    pub changes: f64,
}

impl ObjectiveVector {
    /// All-minimize form used for dominance.
    pub fn canonical(&self) -> [f64; 4] {
        [-self.perf_q, -self.reliability, self.pas, self.changes]
    }

    pub fn from_canonical(c: [f64; 4]) -> Self {
        ObjectiveVector {
            perf_q: -c[0],
            reliability: -c[1],
            pas: c[2],
            changes: c[3],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveConfig {
    pub brf: bool,
    /// `None` disables antipattern detection; `pas` is then always 0.
    pub fuzziness: Option<f64>,
    pub pas_mode: PasMode,
    pub utilization_knee: f64,
}

impl Default for ObjectiveConfig {
    fn default() -> Self {
        ObjectiveConfig {
            brf: true,
            fuzziness: Some(0.8),
            pas_mode: PasMode::Weighted,
            utilization_knee: DEFAULT_UTILIZATION_KNEE,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub objectives: ObjectiveVector,
    pub occurrences: Vec<AntipatternOccurrence>,
    pub saturated: bool,
}

/// A model to refactor together with its initial measurements.
#[derive(Debug, Clone)]
pub struct Problem {
    pub model: ArchModel,
    pub initial: PerformanceIndices,
    pub config: ObjectiveConfig,
    /// Initial indices that are nonzero; idle nodes carry no signal.
    reference: IndexSet,
}

impl Problem {
    pub fn new(model: ArchModel, config: ObjectiveConfig) -> Result<Self, ObjectiveError> {
        let initial = analyze(&model)?;
        if !initial.converged {
            return Err(ObjectiveError::Unstable);
        }
        let reference = index_set(&initial)
            .into_iter()
            .filter(|(_, v)| *v != 0.0)
            .collect();
        Ok(Problem {
            model,
            initial,
            config,
            reference,
        })
    }

    pub fn initial_reliability(&self) -> f64 {
        system_reliability(&self.model)
    }

    pub fn evaluate(&self, seq: &RefactoringSequence) -> Result<Evaluation, ObjectiveError> {
        let terms = distance_terms(seq, &self.model, self.config.brf)?;
        let refactored = seq.apply(&self.model)?;
        let indices = analyze(&refactored)?;
        if !indices.converged {
            return Err(ObjectiveError::Unstable);
        }
        let perf = perf_q(
            &self.reference,
            &index_set(&indices),
            self.config.utilization_knee,
        )?;
        let occurrences = match self.config.fuzziness {
            Some(f) => detect(&refactored, &indices, f),
            None => vec![],
        };
        Ok(Evaluation {
            objectives: ObjectiveVector {
                perf_q: perf,
                reliability: system_reliability(&refactored),
                pas: pas_objective(&occurrences, self.config.pas_mode),
                changes: weighted_distance(&terms),
            },
            occurrences,
            saturated: indices.saturated,
        })
    }
}

/// Baseline factor of each action kind, in declaration order.
pub fn baseline_factors() -> [(ActionKind, f64); 4] {
    ActionKind::ALL.map(|k| (k, k.baseline_factor()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use rand::SeedableRng;

    fn single(kind: IndexKind, v: f64) -> IndexSet {
        [((kind, "x".to_string()), v)].into_iter().collect()
    }

    #[test]
    fn identical_indices_give_zero() {
        let idx = index_set(&analyze(&fixtures::cocome()).unwrap());
        assert_eq!(perf_q(&idx, &idx, DEFAULT_UTILIZATION_KNEE).unwrap(), 0.0);
    }

    #[test]
    fn throughput_gain() {
        let v = perf_q(
            &single(IndexKind::Throughput, 100.0),
            &single(IndexKind::Throughput, 150.0),
            0.8,
        )
        .unwrap();
        assert!((v - 0.2).abs() < 1e-12);
    }

    #[test]
    fn response_time_gain_is_positive() {
        let v = perf_q(
            &single(IndexKind::ResponseTime, 2.0),
            &single(IndexKind::ResponseTime, 1.0),
            0.8,
        )
        .unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn utilization_above_knee_is_penalized() {
        let v = perf_q(
            &single(IndexKind::Utilization, 0.5),
            &single(IndexKind::Utilization, 0.9),
            0.8,
        )
        .unwrap();
        assert!((v - (0.4 / 1.4 - 0.5)).abs() < 1e-12);
        let saturated = perf_q(
            &single(IndexKind::Utilization, 0.5),
            &single(IndexKind::Utilization, 1.0),
            0.8,
        )
        .unwrap();
        assert!((saturated - (0.5 / 1.5 - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn perf_q_errors() {
        let t = single(IndexKind::Throughput, 0.0);
        assert!(matches!(
            perf_q(&t, &t, 0.8),
            Err(ObjectiveError::Degenerate(_))
        ));
        let r = single(IndexKind::ResponseTime, 1.0);
        assert!(matches!(
            perf_q(&r, &IndexSet::new(), 0.8),
            Err(ObjectiveError::IndexMismatch(_))
        ));
    }

    #[test]
    fn perf_q_is_antisymmetric_below_the_knee() {
        let a: IndexSet = [
            ((IndexKind::Throughput, "s".to_string()), 3.0),
            ((IndexKind::ResponseTime, "s".to_string()), 0.4),
            ((IndexKind::Utilization, "n".to_string()), 0.3),
        ]
        .into_iter()
        .collect();
        let b: IndexSet = [
            ((IndexKind::Throughput, "s".to_string()), 3.5),
            ((IndexKind::ResponseTime, "s".to_string()), 0.3),
            ((IndexKind::Utilization, "n".to_string()), 0.6),
        ]
        .into_iter()
        .collect();
        let ab = perf_q(&a, &b, 0.8).unwrap();
        let ba = perf_q(&b, &a, 0.8).unwrap();
        assert!((ab + ba).abs() < 1e-15);
    }

    #[test]
    fn worked_distance_example() {
        assert!((weighted_distance(&[(1.23, 1.43), (2.3, 1.32)]) - 4.7949).abs() < 1e-12);
    }

    #[test]
    fn baseline_factors_sum() {
        let terms: Vec<(f64, f64)> = [
            ActionKind::MO2N,
            ActionKind::MO2C,
            ActionKind::ReDe,
            ActionKind::Clon,
        ]
        .iter()
        .map(|k| (k.baseline_factor(), 1.0))
        .collect();
        assert!((weighted_distance(&terms) - 6.12).abs() < 1e-12);
        assert!(
            (weighted_distance(&[(ActionKind::Clon.baseline_factor(), 1.0)]) - 1.23).abs() < 1e-15
        );
    }

    #[test]
    fn distance_uses_weights_of_the_current_state() {
        let m = fixtures::ttbs();
        let seq = RefactoringSequence::new(vec![
            RefactoringAction::mo2n("login"),
            RefactoringAction::clon("login~mo2n0~node"),
        ]);
        let terms = distance_terms(&seq, &m, true).unwrap();
        assert_eq!(terms[0], (1.80, m.architectural_weight("login").unwrap()));
        let mid = seq.actions[0].apply(&m, 0).unwrap();
        assert_eq!(
            terms[1],
            (1.23, mid.architectural_weight("login~mo2n0~node").unwrap())
        );
        let plain = distance_terms(&seq, &m, false).unwrap();
        assert!(plain.iter().all(|&(b, _)| b == 1.0));
    }

    #[test]
    fn distance_is_additive_over_concatenation() {
        let m = fixtures::cocome();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let seq = crate::refactoring::random_sequence(&m, &mut rng, 4).unwrap();
        let total = arch_distance(&seq, &m, true).unwrap();
        let head = RefactoringSequence::new(seq.actions[..2].to_vec());
        let mid = head.apply(&m).unwrap();
        // The tail keeps its slots, so it is priced action by action.
        let mut tail = 0.0;
        let mut state = mid;
        for (slot, a) in seq.actions.iter().enumerate().skip(2) {
            tail += a.kind.baseline_factor() * state.architectural_weight(&a.target).unwrap();
            state = a.apply(&state, slot).unwrap();
        }
        let head_cost = arch_distance(&head, &m, true).unwrap();
        assert!((total - head_cost - tail).abs() < 1e-12);
    }

    #[test]
    fn cloning_an_idle_node_changes_nothing_measurable() {
        let m = fixtures::ttbs();
        let p = Problem::new(m, ObjectiveConfig::default()).unwrap();
        let seq = RefactoringSequence::new(vec![RefactoringAction::clon("station-host")]);
        let e = p.evaluate(&seq).unwrap();
        assert!(e.objectives.perf_q.abs() < 1e-9);
        assert_eq!(e.objectives.reliability, p.initial_reliability());
        assert!(e.objectives.changes > 0.0);
    }

    #[test]
    fn disabled_detection_zeroes_pas() {
        let cfg = ObjectiveConfig {
            fuzziness: None,
            ..ObjectiveConfig::default()
        };
        let p = Problem::new(fixtures::cocome(), cfg).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let seq = crate::refactoring::random_sequence(&p.model, &mut rng, 4).unwrap();
            let e = p.evaluate(&seq).unwrap();
            assert_eq!(e.objectives.pas, 0.0);
            assert!(e.objectives.changes > 0.0);
        }
    }

    #[test]
    fn canonical_round_trip() {
        let v = ObjectiveVector {
            perf_q: 0.1,
            reliability: 0.9,
            pas: 1.5,
            changes: 6.0,
        };
        assert_eq!(v.canonical(), [-0.1, -0.9, 1.5, 6.0]);
        assert_eq!(ObjectiveVector::from_canonical(v.canonical()), v);
    }
}
