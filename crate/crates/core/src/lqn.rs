//! Layered queueing network derived from an architecture model, and an
//! approximate analytic solver for it.
//!
//! Every node becomes a processor, every component (and replica) a task, and
//! every operation an entry of the task that serves it. Each scenario becomes
//! a reference task that issues its messages as synchronous calls. Calls
//! addressed to a replicated component are split evenly across the replicas.
//!
//! The solver iterates two steps until the indices settle: per-processor
//! queueing delays are estimated from the current throughputs, then entry
//! residence times are propagated up each scenario's call graph. Open
//! scenarios follow the operational laws with a multi-server waiting-time
//! approximation; closed scenarios use Schweitzer's approximate MVA with a
//! load-dependent split for multi-server processors.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;
use thiserror::Error;

use crate::model::{ArchModel, Workload};

pub const DEFAULT_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_MAX_ITERATIONS: usize = 1000;

/// Utilization at which saturated stations are evaluated.
const SATURATION_SENTINEL: f64 = 0.999;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LqnError {
    #[error("cyclic call graph in scenario `{0}`")]
    CyclicCalls(String),
    #[error("invalid solver parameters: {0}")]
    Parameters(String),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Processor {
    pub id: String,
    pub multiplicity: u32,
    pub speed_factor: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Task {
    pub id: String,
    pub processor: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Entry {
    pub id: String,
    pub operation: String,
    pub task: usize,
    /// Host demand per invocation, already divided by the processor speed.
    pub demand: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Caller {
    Reference,
    Entry(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Call {
    pub caller: Caller,
    pub callee: usize,
    /// Mean number of calls per invocation of the caller.
    pub mean_calls: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceTask {
    pub scenario: String,
    pub workload: Workload,
    /// Calls issued by this reference task and by the entries it reaches.
    pub calls: Vec<Call>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LqnModel {
    pub processors: Vec<Processor>,
    pub tasks: Vec<Task>,
    pub entries: Vec<Entry>,
    pub reference_tasks: Vec<ReferenceTask>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerformanceIndices {
    pub scenario_throughput: BTreeMap<String, f64>,
    pub scenario_response_time: BTreeMap<String, f64>,
    pub node_utilization: BTreeMap<String, f64>,
    /// Some station reached utilization 1.
    pub saturated: bool,
    /// The fixed point settled within the iteration budget.
    pub converged: bool,
    pub iterations: usize,
}

impl PerformanceIndices {
    pub fn is_stable(&self) -> bool {
        self.converged
    }
}

/// Builds the layered network for `model`. The model must be valid.
pub fn to_lqn(model: &ArchModel) -> Result<LqnModel, LqnError> {
    let processors: Vec<Processor> = model
        .nodes
        .iter()
        .map(|n| Processor {
            id: n.id.clone(),
            multiplicity: n.multiplicity,
            speed_factor: n.speed_factor,
        })
        .collect();
    let proc_index: BTreeMap<&str, usize> = processors
        .iter()
        .enumerate()
        .map(|(i, p)| (p.id.as_str(), i))
        .collect();

    let mut tasks = vec![];
    let mut task_index: BTreeMap<String, usize> = BTreeMap::new();
    let artifacts = model
        .components
        .iter()
        .map(|c| c.id.as_str())
        .chain(model.replicas.iter().map(|r| r.id.as_str()));
    for a in artifacts {
        let node = model.node_of(a).expect("valid deployment");
        task_index.insert(a.to_string(), tasks.len());
        tasks.push(Task {
            id: a.to_string(),
            processor: proc_index[node],
        });
    }

    // Entries of one operation: one per member of the owner's replica group.
    let mut entries = vec![];
    let mut op_entries: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (owner, op) in model.operations() {
        for member in model.group_of(&owner.id) {
            let task = task_index[member];
            let speed = processors[tasks[task].processor].speed_factor;
            op_entries
                .entry(op.id.clone())
                .or_default()
                .push(entries.len());
            entries.push(Entry {
                id: format!("{member}.{}", op.id),
                operation: op.id.clone(),
                task,
                demand: op.service_demand / speed,
            });
        }
    }

    let mut reference_tasks = vec![];
    for s in &model.scenarios {
        // Group-level bookkeeping: calls are attributed to the operation the
        // calling component most recently served in this scenario.
        let mut visits: BTreeMap<&str, f64> = BTreeMap::new();
        let mut current: BTreeMap<&str, &str> = BTreeMap::new();
        let mut totals: BTreeMap<(Option<&str>, &str), f64> = BTreeMap::new();
        for m in &s.messages {
            let caller_op = if m.from_actor() {
                None
            } else {
                current.get(m.caller.as_str()).copied()
            };
            let reps = f64::from(m.repetitions);
            *visits.entry(m.operation.as_str()).or_insert(0.0) += reps;
            *totals
                .entry((caller_op, m.operation.as_str()))
                .or_insert(0.0) += reps;
            current.insert(m.callee.as_str(), m.operation.as_str());
        }
        check_acyclic(&s.id, totals.keys().copied())?;

        let mut calls = vec![];
        for ((caller_op, callee_op), total) in totals {
            let callees = &op_entries[callee_op];
            let per_callee = 1.0 / callees.len() as f64;
            match caller_op {
                None => {
                    for &f in callees {
                        calls.push(Call {
                            caller: Caller::Reference,
                            callee: f,
                            mean_calls: total * per_callee,
                        });
                    }
                }
                Some(op) => {
                    let mean = total / visits[op];
                    for &e in &op_entries[op] {
                        for &f in callees {
                            calls.push(Call {
                                caller: Caller::Entry(e),
                                callee: f,
                                mean_calls: mean * per_callee,
                            });
                        }
                    }
                }
            }
        }
        reference_tasks.push(ReferenceTask {
            scenario: s.id.clone(),
            workload: s.workload.clone(),
            calls,
        });
    }

    Ok(LqnModel {
        processors,
        tasks,
        entries,
        reference_tasks,
    })
}

fn check_acyclic<'a>(
    scenario: &str,
    edges: impl Iterator<Item = (Option<&'a str>, &'a str)>,
) -> Result<(), LqnError> {
    let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (from, to) in edges {
        if let Some(f) = from {
            adj.entry(f).or_default().push(to);
        }
    }
    // 0 = unvisited, 1 = on stack, 2 = done
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        n: &'a str,
        adj: &BTreeMap<&'a str, Vec<&'a str>>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> bool {
        match state.get(n) {
            Some(1) => return false,
            Some(2) => return true,
            _ => {}
        }
        state.insert(n, 1);
        for &m in adj.get(n).map(Vec::as_slice).unwrap_or(&[]) {
            if !visit(m, adj, state) {
                return false;
            }
        }
        state.insert(n, 2);
        true
    }
    for &n in adj.keys() {
        if !visit(n, &adj, &mut state) {
            return Err(LqnError::CyclicCalls(scenario.to_string()));
        }
    }
    Ok(())
}

impl LqnModel {
    /// Visits per scenario execution of each entry, in topological order of
    /// the call graph.
    pub fn entry_visits(&self, scenario: usize) -> Vec<f64> {
        let rt = &self.reference_tasks[scenario];
        let mut visits = vec![0.0; self.entries.len()];
        for c in rt.calls.iter().filter(|c| c.caller == Caller::Reference) {
            visits[c.callee] += c.mean_calls;
        }
        for e in self.topological_order(scenario) {
            let v = visits[e];
            for c in rt.calls.iter().filter(|c| c.caller == Caller::Entry(e)) {
                visits[c.callee] += v * c.mean_calls;
            }
        }
        visits
    }

    /// Entries reachable in `scenario`, callers before callees.
    fn topological_order(&self, scenario: usize) -> Vec<usize> {
        let rt = &self.reference_tasks[scenario];
        let n = self.entries.len();
        let mut indeg = vec![0usize; n];
        let mut involved = vec![false; n];
        for c in &rt.calls {
            involved[c.callee] = true;
            if let Caller::Entry(e) = c.caller {
                involved[e] = true;
                indeg[c.callee] += 1;
            }
        }
        let mut ready: Vec<usize> = (0..n).filter(|&i| involved[i] && indeg[i] == 0).collect();
        let mut order = vec![];
        while let Some(e) = ready.pop() {
            order.push(e);
            for c in rt.calls.iter().filter(|c| c.caller == Caller::Entry(e)) {
                indeg[c.callee] -= 1;
                if indeg[c.callee] == 0 {
                    ready.push(c.callee);
                }
            }
        }
        order
    }

    /// Total demand per processor for one execution of each scenario.
    pub fn scenario_demands(&self) -> Vec<Vec<f64>> {
        (0..self.reference_tasks.len())
            .map(|s| {
                let visits = self.entry_visits(s);
                let mut d = vec![0.0; self.processors.len()];
                for (e, entry) in self.entries.iter().enumerate() {
                    d[self.tasks[entry.task].processor] += visits[e] * entry.demand;
                }
                d
            })
            .collect()
    }

    /// Line-oriented listing of the network for manual inspection.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for p in &self.processors {
            let _ = writeln!(
                out,
                "processor {} multiplicity={} speed={}",
                p.id, p.multiplicity, p.speed_factor
            );
        }
        for t in &self.tasks {
            let _ = writeln!(out, "task {} on {}", t.id, self.processors[t.processor].id);
        }
        for e in &self.entries {
            let _ = writeln!(
                out,
                "entry {} of {} demand={}",
                e.id, self.tasks[e.task].id, e.demand
            );
        }
        for rt in &self.reference_tasks {
            let wl = match rt.workload {
                Workload::Open { arrival_rate } => format!("open rate={arrival_rate}"),
                Workload::Closed {
                    population,
                    think_time,
                } => format!("closed population={population} think={think_time}"),
            };
            let _ = writeln!(out, "reference {} {wl}", rt.scenario);
            for c in &rt.calls {
                let from = match c.caller {
                    Caller::Reference => rt.scenario.clone(),
                    Caller::Entry(e) => self.entries[e].id.clone(),
                };
                let _ = writeln!(
                    out,
                    "  call {} -> {} mean={}",
                    from, self.entries[c.callee].id, c.mean_calls
                );
            }
        }
        out
    }

    /// Solves the network. A run that does not settle within `max_iter`
    /// returns its last iterate with `converged == false`.
    pub fn solve(&self, tol: f64, max_iter: usize) -> Result<PerformanceIndices, LqnError> {
        if tol.is_nan() || tol <= 0.0 {
            return Err(LqnError::Parameters(format!(
                "tolerance must be > 0, got {tol}"
            )));
        }
        if max_iter == 0 {
            return Err(LqnError::Parameters("max iterations must be >= 1".into()));
        }
        let demands = self.scenario_demands();
        let n_proc = self.processors.len();
        let servers: Vec<f64> = self
            .processors
            .iter()
            .map(|p| f64::from(p.multiplicity))
            .collect();

        // Open load is fixed; closed throughputs start from the no-contention bound.
        let mut open_util = vec![0.0; n_proc];
        for (s, rt) in self.reference_tasks.iter().enumerate() {
            if let Workload::Open { arrival_rate } = rt.workload {
                for p in 0..n_proc {
                    open_util[p] += arrival_rate * demands[s][p] / servers[p];
                }
            }
        }
        let n_scen = self.reference_tasks.len();
        let mut throughput = vec![0.0; n_scen];
        let mut queue = vec![vec![0.0; n_proc]; n_scen];
        for (s, rt) in self.reference_tasks.iter().enumerate() {
            match rt.workload {
                Workload::Open { arrival_rate } => throughput[s] = arrival_rate,
                Workload::Closed {
                    population,
                    think_time,
                } => {
                    let total: f64 = demands[s].iter().sum();
                    throughput[s] = f64::from(population) / (think_time + total);
                    for p in 0..n_proc {
                        queue[s][p] = throughput[s] * demands[s][p];
                    }
                }
            }
        }

        let mut response = vec![0.0; n_scen];
        let mut util = vec![0.0; n_proc];
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=max_iter {
            iterations = it;
            let total_util: Vec<f64> = (0..n_proc)
                .map(|p| {
                    (0..n_scen)
                        .map(|s| throughput[s] * demands[s][p])
                        .sum::<f64>()
                        / servers[p]
                })
                .collect();
            let closed_queue: Vec<f64> = (0..n_proc)
                .map(|p| {
                    (0..n_scen)
                        .filter(|&s| self.is_closed(s))
                        .map(|s| queue[s][p])
                        .sum()
                })
                .collect();

            // (a) per-visit residence factor of each processor for each scenario
            let mut factor = vec![vec![1.0; n_proc]; n_scen];
            for (s, rt) in self.reference_tasks.iter().enumerate() {
                for p in 0..n_proc {
                    let m = servers[p];
                    factor[s][p] = match rt.workload {
                        Workload::Open { .. } => open_inflation(total_util[p], m),
                        Workload::Closed { population, .. } => {
                            let n = f64::from(population);
                            let own = queue[s][p];
                            let seen = (closed_queue[p] - own / n).max(0.0);
                            let open_free = 1.0 - open_util[p].min(SATURATION_SENTINEL);
                            (1.0 + seen) / (m * open_free) + (m - 1.0) / m
                        }
                    };
                }
            }

            // (b) entry residence times propagated up each call graph
            let mut new_response = vec![0.0; n_scen];
            for s in 0..n_scen {
                new_response[s] = self.scenario_residence(s, &factor[s]);
            }

            let mut new_throughput = throughput.clone();
            for (s, rt) in self.reference_tasks.iter().enumerate() {
                match rt.workload {
                    Workload::Open { arrival_rate } => {
                        let bottleneck = (0..n_proc)
                            .filter(|&p| demands[s][p] > 0.0)
                            .map(|p| total_util[p])
                            .fold(0.0, f64::max);
                        new_throughput[s] = if bottleneck >= 1.0 {
                            arrival_rate / bottleneck
                        } else {
                            arrival_rate
                        };
                    }
                    Workload::Closed {
                        population,
                        think_time,
                    } => {
                        let x = f64::from(population) / (think_time + new_response[s]);
                        new_throughput[s] = x;
                        for p in 0..n_proc {
                            queue[s][p] = x * demands[s][p] * factor[s][p];
                        }
                    }
                }
            }

            let new_util: Vec<f64> = (0..n_proc)
                .map(|p| {
                    (0..n_scen)
                        .map(|s| {
                            let x = if self.is_closed(s) {
                                new_throughput[s]
                            } else {
                                self.arrival(s)
                            };
                            x * demands[s][p]
                        })
                        .sum::<f64>()
                        / servers[p]
                })
                .collect();

            let change = max_rel_change(&throughput, &new_throughput)
                .max(max_rel_change(&response, &new_response))
                .max(max_rel_change(&util, &new_util));
            throughput = new_throughput;
            response = new_response;
            util = new_util;
            if change < tol && it > 1 {
                converged = true;
                break;
            }
        }

        let saturated = util.iter().any(|&u| u >= 1.0);
        Ok(PerformanceIndices {
            scenario_throughput: self
                .reference_tasks
                .iter()
                .zip(&throughput)
                .map(|(rt, &x)| (rt.scenario.clone(), x))
                .collect(),
            scenario_response_time: self
                .reference_tasks
                .iter()
                .zip(&response)
                .map(|(rt, &r)| (rt.scenario.clone(), r))
                .collect(),
            node_utilization: self
                .processors
                .iter()
                .zip(&util)
                .map(|(p, &u)| (p.id.clone(), u.clamp(0.0, 1.0)))
                .collect(),
            saturated,
            converged,
            iterations,
        })
    }

    fn is_closed(&self, s: usize) -> bool {
        matches!(self.reference_tasks[s].workload, Workload::Closed { .. })
    }

    fn arrival(&self, s: usize) -> f64 {
        match self.reference_tasks[s].workload {
            Workload::Open { arrival_rate } => arrival_rate,
            Workload::Closed { .. } => 0.0,
        }
    }

    /// Response time of one scenario execution: every entry contributes its
    /// own residence plus the residence of the entries it calls.
    fn scenario_residence(&self, s: usize, factor: &[f64]) -> f64 {
        let rt = &self.reference_tasks[s];
        let order = self.topological_order(s);
        let mut entry_response = vec![0.0; self.entries.len()];
        for &e in order.iter().rev() {
            let own = self.entries[e].demand * factor[self.tasks[self.entries[e].task].processor];
            let nested: f64 = rt
                .calls
                .iter()
                .filter(|c| c.caller == Caller::Entry(e))
                .map(|c| c.mean_calls * entry_response[c.callee])
                .sum();
            entry_response[e] = own + nested;
        }
        rt.calls
            .iter()
            .filter(|c| c.caller == Caller::Reference)
            .map(|c| c.mean_calls * entry_response[c.callee])
            .sum()
    }
}

/// Residence-time inflation of an open class at a station with `m` servers
/// and per-server utilization `rho`: 1 + W/S with Sakasegawa's waiting-time
/// approximation, exact for a single server.
fn open_inflation(rho: f64, m: f64) -> f64 {
    let rho = rho.clamp(0.0, SATURATION_SENTINEL);
    if rho == 0.0 {
        return 1.0;
    }
    let exponent = (2.0 * (m + 1.0)).sqrt() - 1.0;
    1.0 + rho.powf(exponent) / (m * (1.0 - rho))
}

fn max_rel_change(old: &[f64], new: &[f64]) -> f64 {
    old.iter()
        .zip(new)
        .map(|(&a, &b)| {
            let scale = a.abs().max(b.abs());
            if scale == 0.0 {
                0.0
            } else {
                (a - b).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Transforms and solves `model` with the default tolerance and budget.
pub fn analyze(model: &ArchModel) -> Result<PerformanceIndices, LqnError> {
    to_lqn(model)?.solve(DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)
}

#[cfg(test)]
mod tests;
