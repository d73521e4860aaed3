//! NSGA-II over refactoring sequences.
//!
//! Each generation draws parents by binary tournament on (rank, crowding),
//! recombines them with single-point crossover and simple mutation, evaluates
//! the offspring, and keeps the best `population_size` individuals of parents
//! and offspring by non-dominated rank and crowding distance.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use log::{debug, info};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::objectives::{ObjectiveError, ObjectiveVector, Problem};
use crate::refactoring::{
    random_action, random_sequence, repair, RefactoringError, RefactoringSequence, RETRY_BUDGET,
};

#[derive(Debug, Error)]
pub enum GaError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("cannot build a feasible sequence: {0}")]
    Generation(#[from] RefactoringError),
    #[error("{failures} consecutive evaluation failures, last: {last}")]
    Evaluation {
        failures: usize,
        last: ObjectiveError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaConfig {
    pub population_size: usize,
    /// Number of generations.
    pub max_evolutions: usize,
    pub p_crossover: f64,
    pub p_mutation: f64,
    pub sequence_length: usize,
    pub independent_runs: usize,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 16,
            max_evolutions: 72,
            p_crossover: 0.8,
            p_mutation: 0.2,
            sequence_length: 4,
            independent_runs: 3,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<(), GaError> {
        let mut errs = vec![];
        if self.population_size < 2 {
            errs.push("population size must be at least 2".to_string());
        }
        if self.sequence_length < 1 {
            errs.push("sequence length must be at least 1".to_string());
        }
        for (name, p) in [
            ("crossover", self.p_crossover),
            ("mutation", self.p_mutation),
        ] {
            if !(0.0..=1.0).contains(&p) {
                errs.push(format!("{name} probability {p} outside [0,1]"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(GaError::Config(errs.join("; ")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Individual {
    pub genotype: RefactoringSequence,
    pub objectives: ObjectiveVector,
    pub rank: usize,
    pub crowding: f64,
}

/// `a` is no worse than `b` everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    let mut strictly = false;
    for (x, y) in a.iter().zip(b) {
        if x > y {
            return false;
        }
        if x < y {
            strictly = true;
        }
    }
    strictly
}

/// Fronts of indices into `points`, best first.
pub fn non_dominated_sort<P: AsRef<[f64]>>(points: &[P]) -> Vec<Vec<usize>> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominating: Vec<Vec<usize>> = vec![vec![]; n];
    for i in 0..n {
        for j in i + 1..n {
            let (a, b) = (points[i].as_ref(), points[j].as_ref());
            if dominates(a, b) {
                dominating[i].push(j);
                dominated_by[j] += 1;
            } else if dominates(b, a) {
                dominating[j].push(i);
                dominated_by[i] += 1;
            }
        }
    }
    let mut fronts = vec![];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    while !current.is_empty() {
        let mut next = vec![];
        for &i in &current {
            for &j in &dominating[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each point of one front.
pub fn crowding_distance<P: AsRef<[f64]>>(front: &[P]) -> Vec<f64> {
    let n = front.len();
    if n <= 2 {
        return vec![f64::INFINITY; n];
    }
    let m = front[0].as_ref().len();
    let mut dist = vec![0.0; n];
    for k in 0..m {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| front[a].as_ref()[k].total_cmp(&front[b].as_ref()[k]));
        let lo = front[order[0]].as_ref()[k];
        let hi = front[order[n - 1]].as_ref()[k];
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi == lo {
            continue;
        }
        for w in 1..n - 1 {
            let gap = front[order[w + 1]].as_ref()[k] - front[order[w - 1]].as_ref()[k];
            dist[order[w]] += gap / (hi - lo);
        }
    }
    dist
}

/// Assigns rank and crowding to every individual.
pub fn assign_rank_and_crowding(pop: &mut [Individual]) {
    let points: Vec<[f64; 4]> = pop.iter().map(|i| i.objectives.canonical()).collect();
    for (r, front) in non_dominated_sort(&points).into_iter().enumerate() {
        let sub: Vec<[f64; 4]> = front.iter().map(|&i| points[i]).collect();
        for (&i, d) in front.iter().zip(crowding_distance(&sub)) {
            pop[i].rank = r;
            pop[i].crowding = d;
        }
    }
}

/// Lower rank first, then larger crowding.
fn better(a: &Individual, b: &Individual) -> Ordering {
    a.rank.cmp(&b.rank).then_with(|| {
        b.crowding
            .partial_cmp(&a.crowding)
            .unwrap_or(Ordering::Equal)
    })
}

/// Binary tournament; the first contestant wins ties.
pub fn tournament<R: Rng + ?Sized>(pop: &[Individual], rng: &mut R) -> usize {
    let a = rng.gen_range(0..pop.len());
    let b = rng.gen_range(0..pop.len());
    if better(&pop[b], &pop[a]) == Ordering::Less {
        b
    } else {
        a
    }
}

/// Keeps the best `size` individuals; ties keep insertion order.
pub fn truncate(mut pop: Vec<Individual>, size: usize) -> Vec<Individual> {
    assign_rank_and_crowding(&mut pop);
    let mut order: Vec<usize> = (0..pop.len()).collect();
    order.sort_by(|&a, &b| better(&pop[a], &pop[b]).then(a.cmp(&b)));
    order.truncate(size);
    order.sort_unstable();
    let keep: BTreeSet<usize> = order.into_iter().collect();
    pop.into_iter()
        .enumerate()
        .filter(|(i, _)| keep.contains(i))
        .map(|(_, ind)| ind)
        .collect()
}

/// Swaps the tails of two equal-length sequences after position `cut`.
pub fn crossover_at(
    a: &RefactoringSequence,
    b: &RefactoringSequence,
    cut: usize,
) -> (RefactoringSequence, RefactoringSequence) {
    let mut x = a.actions[..cut].to_vec();
    x.extend_from_slice(&b.actions[cut..]);
    let mut y = b.actions[..cut].to_vec();
    y.extend_from_slice(&a.actions[cut..]);
    (RefactoringSequence::new(x), RefactoringSequence::new(y))
}

/// Single-point crossover with a cut uniform in 1..L. Offspring that are not
/// feasible are repaired; an offspring that cannot be repaired is replaced by
/// a copy of its first-segment parent.
pub fn single_point_crossover<R: Rng + ?Sized>(
    a: &RefactoringSequence,
    b: &RefactoringSequence,
    problem: &Problem,
    rng: &mut R,
) -> (RefactoringSequence, RefactoringSequence) {
    assert_eq!(a.len(), b.len(), "crossover needs equal lengths");
    if a.len() < 2 {
        return (a.clone(), b.clone());
    }
    let cut = rng.gen_range(1..a.len());
    let (x, y) = crossover_at(a, b, cut);
    let mut fix = |child: RefactoringSequence, parent: &RefactoringSequence| {
        if child.is_feasible(&problem.model) {
            child
        } else {
            repair(child.actions, &problem.model, rng).unwrap_or_else(|| parent.clone())
        }
    };
    let x = fix(x, a);
    let y = fix(y, b);
    (x, y)
}

/// With probability `p`, redraws one uniformly chosen position. Returns the
/// input unchanged when no feasible replacement is found.
pub fn simple_mutation<R: Rng + ?Sized>(
    s: &RefactoringSequence,
    problem: &Problem,
    rng: &mut R,
    p: f64,
) -> RefactoringSequence {
    if s.is_empty() || !rng.gen_bool(p) {
        return s.clone();
    }
    let pos = rng.gen_range(0..s.len());
    let Ok(state) = RefactoringSequence::new(s.actions[..pos].to_vec()).apply(&problem.model)
    else {
        return s.clone();
    };
    for _ in 0..RETRY_BUDGET {
        let Some(action) = random_action(&state, rng) else {
            break;
        };
        let mut out = s.clone();
        out.actions[pos] = action;
        if out.is_feasible(&problem.model) {
            return out;
        }
    }
    s.clone()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GenerationLog {
    pub generation: usize,
    pub front_size: usize,
    pub best_perf_q: f64,
    pub best_reliability: f64,
    pub best_pas: f64,
    pub best_changes: f64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Rank-0 individuals of the final population, one per objective vector.
    pub front: Vec<Individual>,
    pub population: Vec<Individual>,
    pub history: Vec<GenerationLog>,
    pub evaluations: usize,
    pub failed_evaluations: usize,
}

struct Evaluator<'a> {
    problem: &'a Problem,
    length: usize,
    evaluations: usize,
    failures: usize,
}

impl Evaluator<'_> {
    /// Evaluates `seqs` in parallel. Failed individuals are replaced by fresh
    /// random sequences, drawn in order, until all succeed.
    fn evaluate<R: Rng + ?Sized>(
        &mut self,
        mut seqs: Vec<RefactoringSequence>,
        rng: &mut R,
    ) -> Result<Vec<Individual>, GaError> {
        let mut out: Vec<Option<Individual>> = vec![None; seqs.len()];
        let mut pending: Vec<usize> = (0..seqs.len()).collect();
        let mut streak = 0;
        while !pending.is_empty() {
            let results: Vec<_> = pending
                .par_iter()
                .map(|&i| self.problem.evaluate(&seqs[i]))
                .collect();
            self.evaluations += pending.len();
            let mut retry = vec![];
            let mut last_err = None;
            for (&i, r) in pending.iter().zip(results) {
                match r {
                    Ok(e) => {
                        out[i] = Some(Individual {
                            genotype: seqs[i].clone(),
                            objectives: e.objectives,
                            rank: 0,
                            crowding: 0.0,
                        })
                    }
                    Err(e) => {
                        debug!("evaluation of {} failed: {e}", seqs[i].to_json());
                        self.failures += 1;
                        last_err = Some(e);
                        retry.push(i);
                    }
                }
            }
            if let Some(last) = last_err {
                streak += retry.len();
                if streak > RETRY_BUDGET * seqs.len().max(1) {
                    return Err(GaError::Evaluation {
                        failures: streak,
                        last,
                    });
                }
            }
            for &i in &retry {
                seqs[i] = random_sequence(&self.problem.model, rng, self.length)?;
            }
            pending = retry;
        }
        Ok(out.into_iter().map(|i| i.expect("all evaluated")).collect())
    }
}

fn summarize(generation: usize, pop: &[Individual]) -> GenerationLog {
    let front: Vec<&Individual> = pop.iter().filter(|i| i.rank == 0).collect();
    let fold = |f: fn(&ObjectiveVector) -> f64, max: bool| {
        front.iter().map(|i| f(&i.objectives)).fold(
            if max {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            },
            |a, b| {
                if max {
                    a.max(b)
                } else {
                    a.min(b)
                }
            },
        )
    };
    GenerationLog {
        generation,
        front_size: front.len(),
        best_perf_q: fold(|o| o.perf_q, true),
        best_reliability: fold(|o| o.reliability, true),
        best_pas: fold(|o| o.pas, false),
        best_changes: fold(|o| o.changes, false),
    }
}

/// Rank-0 individuals with duplicate objective vectors removed.
pub fn final_front(pop: &[Individual]) -> Vec<Individual> {
    let mut seen = BTreeSet::new();
    pop.iter()
        .filter(|i| i.rank == 0)
        .filter(|i| seen.insert(i.objectives.canonical().map(f64::to_bits)))
        .cloned()
        .collect()
}

/// Runs NSGA-II for `config.max_evolutions` generations.
pub fn run<R: Rng + ?Sized>(
    problem: &Problem,
    config: &GaConfig,
    rng: &mut R,
) -> Result<RunResult, GaError> {
    config.validate()?;
    let mut eval = Evaluator {
        problem,
        length: config.sequence_length,
        evaluations: 0,
        failures: 0,
    };
    let init = (0..config.population_size)
        .map(|_| random_sequence(&problem.model, rng, config.sequence_length))
        .collect::<Result<Vec<_>, _>>()?;
    let mut pop = eval.evaluate(init, rng)?;
    assign_rank_and_crowding(&mut pop);
    let mut history = vec![summarize(0, &pop)];

    for generation in 1..=config.max_evolutions {
        let mut children = Vec::with_capacity(config.population_size);
        while children.len() < config.population_size {
            let a = &pop[tournament(&pop, rng)].genotype;
            let b = &pop[tournament(&pop, rng)].genotype;
            let (x, y) = if rng.gen_bool(config.p_crossover) {
                single_point_crossover(a, b, problem, rng)
            } else {
                (a.clone(), b.clone())
            };
            children.push(simple_mutation(&x, problem, rng, config.p_mutation));
            if children.len() < config.population_size {
                children.push(simple_mutation(&y, problem, rng, config.p_mutation));
            }
        }
        let offspring = eval.evaluate(children, rng)?;
        let mut merged = pop;
        merged.extend(offspring);
        pop = truncate(merged, config.population_size);
        let log = summarize(generation, &pop);
        info!(
            "generation={} front={} perfQ={:.6} reliability={:.6} pas={:.4} changes={:.4}",
            log.generation,
            log.front_size,
            log.best_perf_q,
            log.best_reliability,
            log.best_pas,
            log.best_changes
        );
        history.push(log);
    }

    Ok(RunResult {
        front: final_front(&pop),
        population: pop,
        history,
        evaluations: eval.evaluations,
        failed_evaluations: eval.failures,
    })
}
