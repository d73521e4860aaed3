//! Fuzzy detection of performance antipatterns.
//!
//! Each detector evaluates a few numeric literals on every eligible target.
//! A literal is turned into a degree of truth by comparing it with its lowest
//! and highest value over all targets of the same detector, and the degrees
//! are combined by minimum. An occurrence is reported when the combined
//! degree reaches the fuzziness threshold.
//!
//! | Antipattern | Target | Literals |
//! |---|---|---|
//! | Blob | component | messages in and out, node utilization, share of total demand |
//! | Concurrent Processing System | node pair | higher utilization, utilization gap |
//! | Pipe and Filter | operation | demand share within a scenario, node utilization |
//! | Extensive Processing | component | largest operation demand, share of a scenario's response time |
//! | Empty Semi-Truck | component pair | messages exchanged, inverse mean message size |
//! | Tower of Babel | component pair | remote traffic, distinct message sizes |

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lqn::PerformanceIndices;
use crate::model::{ArchModel, Message};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AntipatternError {
    #[error("lower bound {lb} exceeds upper bound {ub}")]
    InvertedBounds { lb: f64, ub: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum AntipatternKind {
    PipeAndFilter,
    Blob,
    ConcurrentProcessingSystem,
    ExtensiveProcessing,
    EmptySemiTruck,
    TowerOfBabel,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LiteralValue {
    pub value: f64,
    pub lb: f64,
    pub ub: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AntipatternOccurrence {
    pub kind: AntipatternKind,
    /// An element id, or two ids joined by `|` for pair targets.
    pub target: String,
    pub probability: f64,
    pub literals: BTreeMap<String, LiteralValue>,
}

/// How occurrences are folded into the antipattern objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PasMode {
    /// Sum of occurrence probabilities.
    #[default]
    Weighted,
    /// Number of occurrences.
    Count,
}

/// Degree of truth of `literal` on the scale [lb, ub]. A degenerate scale
/// yields 1.
pub fn fuzzy_value(literal: f64, lb: f64, ub: f64) -> Result<f64, AntipatternError> {
    if lb > ub {
        return Err(AntipatternError::InvertedBounds { lb, ub });
    }
    if ub == lb {
        return Ok(1.0);
    }
    Ok((1.0 - (ub - literal) / (ub - lb)).clamp(0.0, 1.0))
}

type Candidate = (String, Vec<(&'static str, f64)>);

/// Every occurrence whose probability is at least `fuzziness`.
pub fn detect(
    model: &ArchModel,
    indices: &PerformanceIndices,
    fuzziness: f64,
) -> Vec<AntipatternOccurrence> {
    let facts = Facts::gather(model, indices);
    let mut out = vec![];
    for (kind, candidates) in [
        (AntipatternKind::PipeAndFilter, facts.pipe_and_filter(model)),
        (AntipatternKind::Blob, facts.blob(model)),
        (
            AntipatternKind::ConcurrentProcessingSystem,
            facts.concurrent_processing(model),
        ),
        (
            AntipatternKind::ExtensiveProcessing,
            facts.extensive_processing(model),
        ),
        (AntipatternKind::EmptySemiTruck, facts.empty_semi_truck()),
        (AntipatternKind::TowerOfBabel, facts.tower_of_babel()),
    ] {
        out.extend(score(kind, candidates, fuzziness));
    }
    out
}

fn score(
    kind: AntipatternKind,
    candidates: Vec<Candidate>,
    fuzziness: f64,
) -> Vec<AntipatternOccurrence> {
    let Some((_, first)) = candidates.first() else {
        return vec![];
    };
    let names: Vec<&str> = first.iter().map(|(n, _)| *n).collect();
    let bounds: Vec<(f64, f64)> = (0..names.len())
        .map(|k| {
            candidates
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, lits)| {
                    (lo.min(lits[k].1), hi.max(lits[k].1))
                })
        })
        .collect();

    let mut out = vec![];
    for (target, lits) in candidates {
        let mut prob: Option<f64> = None;
        let mut record = BTreeMap::new();
        for (k, &(name, value)) in lits.iter().enumerate() {
            let (lb, ub) = bounds[k];
            record.insert(name.to_string(), LiteralValue { value, lb, ub });
            // A literal with no spread cannot single out any target.
            if ub == lb {
                continue;
            }
            let v = fuzzy_value(value, lb, ub).expect("bounds come from the values");
            prob = Some(prob.map_or(v, |p: f64| p.min(v)));
        }
        if let Some(p) = prob {
            if p >= fuzziness {
                out.push(AntipatternOccurrence {
                    kind,
                    target,
                    probability: p,
                    literals: record,
                });
            }
        }
    }
    out
}

/// Antipattern objective over a set of occurrences.
pub fn pas_objective(occurrences: &[AntipatternOccurrence], mode: PasMode) -> f64 {
    match mode {
        PasMode::Weighted => occurrences.iter().map(|o| o.probability).sum(),
        PasMode::Count => occurrences.len() as f64,
    }
}

fn pair_key(a: &str, b: &str) -> String {
    if a <= b {
        format!("{a}|{b}")
    } else {
        format!("{b}|{a}")
    }
}

/// Per-component exchange between two components, both directions.
#[derive(Default)]
struct Exchange {
    messages: f64,
    size_sum: f64,
    remote_traffic: f64,
    size_classes: BTreeSet<u64>,
}

struct Facts<'a> {
    indices: &'a PerformanceIndices,
    /// Probability-weighted demand per component, in host seconds.
    component_demand: BTreeMap<&'a str, f64>,
    messages_per_component: BTreeMap<&'a str, f64>,
    exchanges: BTreeMap<String, Exchange>,
}

impl<'a> Facts<'a> {
    fn gather(model: &'a ArchModel, indices: &'a PerformanceIndices) -> Self {
        let mut component_demand: BTreeMap<&str, f64> = model
            .components
            .iter()
            .map(|c| (c.id.as_str(), 0.0))
            .collect();
        let mut messages_per_component: BTreeMap<&str, f64> = model
            .components
            .iter()
            .map(|c| (c.id.as_str(), 0.0))
            .collect();
        let mut exchanges: BTreeMap<String, Exchange> = BTreeMap::new();
        for s in &model.scenarios {
            for m in &s.messages {
                let reps = f64::from(m.repetitions);
                *component_demand.entry(m.callee.as_str()).or_default() +=
                    s.prob * reps * operation_demand(model, m);
                *messages_per_component.entry(m.callee.as_str()).or_default() += reps;
                if m.from_actor() {
                    continue;
                }
                *messages_per_component.entry(m.caller.as_str()).or_default() += reps;
                if m.caller == m.callee {
                    continue;
                }
                let e = exchanges.entry(pair_key(&m.caller, &m.callee)).or_default();
                e.messages += reps;
                e.size_sum += reps * m.size;
                e.size_classes.insert(m.size.to_bits());
                if model.node_of(&m.caller) != model.node_of(&m.callee) {
                    e.remote_traffic += reps * m.size;
                }
            }
        }
        Facts {
            indices,
            component_demand,
            messages_per_component,
            exchanges,
        }
    }

    fn utilization(&self, node: Option<&str>) -> f64 {
        node.and_then(|n| self.indices.node_utilization.get(n))
            .copied()
            .unwrap_or(0.0)
    }

    fn blob(&self, model: &ArchModel) -> Vec<Candidate> {
        let total: f64 = self.component_demand.values().sum();
        model
            .components
            .iter()
            .map(|c| {
                let share = if total > 0.0 {
                    self.component_demand[c.id.as_str()] / total
                } else {
                    0.0
                };
                (
                    c.id.clone(),
                    vec![
                        ("messages", self.messages_per_component[c.id.as_str()]),
                        ("utilization", self.utilization(model.node_of(&c.id))),
                        ("demand_share", share),
                    ],
                )
            })
            .collect()
    }

    fn concurrent_processing(&self, model: &ArchModel) -> Vec<Candidate> {
        let mut out = vec![];
        for (i, a) in model.nodes.iter().enumerate() {
            for b in &model.nodes[i + 1..] {
                let ua = self.utilization(Some(&a.id));
                let ub = self.utilization(Some(&b.id));
                out.push((
                    pair_key(&a.id, &b.id),
                    vec![
                        ("max_utilization", ua.max(ub)),
                        ("imbalance", (ua - ub).abs()),
                    ],
                ));
            }
        }
        out
    }

    fn pipe_and_filter(&self, model: &ArchModel) -> Vec<Candidate> {
        // Largest share an operation takes of one scenario's total demand.
        let mut share: BTreeMap<&str, f64> = BTreeMap::new();
        for s in &model.scenarios {
            let mut per_op: BTreeMap<&str, f64> = BTreeMap::new();
            for m in &s.messages {
                *per_op.entry(m.operation.as_str()).or_default() +=
                    f64::from(m.repetitions) * operation_demand(model, m);
            }
            let total: f64 = per_op.values().sum();
            if total <= 0.0 {
                continue;
            }
            for (op, d) in per_op {
                let e = share.entry(op).or_default();
                *e = e.max(d / total);
            }
        }
        model
            .operations()
            .map(|(owner, op)| {
                (
                    op.id.clone(),
                    vec![
                        (
                            "scenario_demand_share",
                            share.get(op.id.as_str()).copied().unwrap_or(0.0),
                        ),
                        ("utilization", self.utilization(model.node_of(&owner.id))),
                    ],
                )
            })
            .collect()
    }

    fn extensive_processing(&self, model: &ArchModel) -> Vec<Candidate> {
        model
            .components
            .iter()
            .map(|c| {
                let speed = model
                    .node_of(&c.id)
                    .and_then(|n| model.node(n))
                    .map_or(1.0, |n| n.speed_factor);
                let max_demand = c
                    .operations
                    .iter()
                    .map(|o| o.service_demand / speed)
                    .fold(0.0, f64::max);
                let mut rt_share: f64 = 0.0;
                for s in &model.scenarios {
                    let own: f64 = s
                        .messages
                        .iter()
                        .filter(|m| m.callee == c.id)
                        .map(|m| f64::from(m.repetitions) * operation_demand(model, m))
                        .sum();
                    let r = self
                        .indices
                        .scenario_response_time
                        .get(&s.id)
                        .copied()
                        .unwrap_or(0.0);
                    if own > 0.0 && r > 0.0 {
                        rt_share = rt_share.max((own / r).min(1.0));
                    }
                }
                (
                    c.id.clone(),
                    vec![
                        ("max_operation_demand", max_demand),
                        ("response_time_share", rt_share),
                    ],
                )
            })
            .collect()
    }

    fn empty_semi_truck(&self) -> Vec<Candidate> {
        self.exchanges
            .iter()
            .map(|(pair, e)| {
                let mean_size = e.size_sum / e.messages;
                (
                    pair.clone(),
                    vec![
                        ("messages", e.messages),
                        ("inverse_mean_size", 1.0 / (1.0 + mean_size)),
                    ],
                )
            })
            .collect()
    }

    fn tower_of_babel(&self) -> Vec<Candidate> {
        self.exchanges
            .iter()
            .map(|(pair, e)| {
                (
                    pair.clone(),
                    vec![
                        ("remote_traffic", e.remote_traffic),
                        ("size_classes", e.size_classes.len() as f64),
                    ],
                )
            })
            .collect()
    }
}

/// Host seconds of one invocation of the message's operation on the callee's node.
fn operation_demand(model: &ArchModel, m: &Message) -> f64 {
    let Some((_, op)) = model.owner_of(&m.operation) else {
        return 0.0;
    };
    let speed = model
        .node_of(&m.callee)
        .and_then(|n| model.node(n))
        .map_or(1.0, |n| n.speed_factor);
    op.service_demand / speed
}
