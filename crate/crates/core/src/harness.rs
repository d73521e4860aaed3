//! Experiment orchestration: the configuration grid, per-run seeding,
//! persisted frontiers, indicator rankings, refactoring shares and the size
//! of the solution space.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use log::{info, warn};
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fixtures;
use crate::indicators::{self, Indicator, IndicatorError};
use crate::model::{ArchModel, ModelError};
use crate::nsga2::{self, dominates, GaConfig, Individual};
use crate::objectives::{ObjectiveConfig, ObjectiveError, ObjectiveVector, Problem};
use crate::refactoring::{valid_actions, ActionKind, RefactoringSequence};

pub const BRF_LEVELS: [bool; 2] = [true, false];
pub const FUZZINESS_LEVELS: [Option<f64>; 4] = [None, Some(0.55), Some(0.80), Some(0.95)];
pub const EVOLUTION_LEVELS: [usize; 3] = [72, 82, 102];

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("nothing to run")]
    NothingToRun,
    #[error("unknown case study `{0}`")]
    UnknownCase(String),
    #[error("model: {0}")]
    Model(#[from] ModelError),
    #[error("objectives: {0}")]
    Objective(#[from] ObjectiveError),
    #[error("indicators: {0}")]
    Indicator(#[from] IndicatorError),
    #[error("io on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("csv on {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("malformed {path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProblemConfig {
    pub case_study: String,
    pub brf: bool,
    /// `None` disables antipattern detection.
    pub fuzziness: Option<f64>,
    pub max_evolutions: usize,
    pub ga: GaConfig,
}

impl ProblemConfig {
    pub fn new(case_study: &str, brf: bool, fuzziness: Option<f64>, max_evolutions: usize) -> Self {
        ProblemConfig {
            case_study: case_study.to_string(),
            brf,
            fuzziness,
            max_evolutions,
            ga: GaConfig {
                max_evolutions,
                ..GaConfig::default()
            },
        }
    }

    /// Directory-safe identifier such as `brf-on_pas-095_evo-72`.
    pub fn id(&self) -> String {
        format!(
            "brf-{}_pas-{}_evo-{}",
            on_off(self.brf),
            pas_label(self.fuzziness).replace('.', ""),
            self.max_evolutions
        )
    }

    /// Inverse of [`ProblemConfig::id`] for the grid parameters.
    pub fn parse_id(case_study: &str, id: &str) -> Option<Self> {
        let mut parts = id.split('_');
        let brf = match parts.next()?.strip_prefix("brf-")? {
            "on" => true,
            "off" => false,
            _ => return None,
        };
        let fuzziness = match parts.next()?.strip_prefix("pas-")? {
            "off" => None,
            digits => {
                let (head, tail) = digits.split_at(1.min(digits.len()));
                Some(format!("{head}.{tail}").parse().ok()?)
            }
        };
        let evo = parts.next()?.strip_prefix("evo-")?.parse().ok()?;
        if parts.next().is_some() {
            return None;
        }
        Some(ProblemConfig::new(case_study, brf, fuzziness, evo))
    }

    pub fn objective_config(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            brf: self.brf,
            fuzziness: self.fuzziness,
            ..ObjectiveConfig::default()
        }
    }
}

fn on_off(b: bool) -> &'static str {
    if b {
        "on"
    } else {
        "off"
    }
}

fn pas_label(f: Option<f64>) -> String {
    match f {
        Some(x) => format!("{x:.2}"),
        None => "off".to_string(),
    }
}

/// Cartesian product of the given grid levels for one case study.
pub fn grid(
    case_study: &str,
    brf: &[bool],
    fuzziness: &[Option<f64>],
    evolutions: &[usize],
    runs: usize,
) -> Vec<ProblemConfig> {
    let mut out = vec![];
    for &b in brf {
        for &f in fuzziness {
            for &e in evolutions {
                let mut c = ProblemConfig::new(case_study, b, f, e);
                c.ga.independent_runs = runs;
                out.push(c);
            }
        }
    }
    out
}

/// The 24-configuration grid.
pub fn full_grid(case_study: &str) -> Vec<ProblemConfig> {
    grid(
        case_study,
        &BRF_LEVELS,
        &FUZZINESS_LEVELS,
        &EVOLUTION_LEVELS,
        GaConfig::default().independent_runs,
    )
}

pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn fnv1a(text: &str) -> u64 {
    text.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0100_0000_01b3)
    })
}

/// Seed of run `run` of `config`, independent of scheduling.
pub fn run_seed(master: u64, config: &ProblemConfig, run: usize) -> u64 {
    let mut state = master ^ fnv1a(&format!("{}/{}", config.case_study, config.id()));
    splitmix64(&mut state);
    state ^= run as u64;
    splitmix64(&mut state)
}

/// A persisted Pareto-optimal solution.
#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub objectives: ObjectiveVector,
    pub genotype: RefactoringSequence,
}

impl From<&Individual> for Solution {
    fn from(i: &Individual) -> Self {
        Solution {
            objectives: i.objectives,
            genotype: i.genotype.clone(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct FrontRecord {
    #[serde(rename = "perfQ")]
    perf_q: f64,
    reliability: f64,
    pas: f64,
    changes: f64,
    genotype: String,
}

pub fn write_front(path: &Path, front: &[Solution]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for s in front {
        let o = s.objectives;
        w.serialize(FrontRecord {
            perf_q: o.perf_q,
            reliability: o.reliability,
            pas: o.pas,
            changes: o.changes,
            genotype: s.genotype.to_json(),
        })
        .map_err(csv_err(path))?;
    }
    if front.is_empty() {
        w.write_record(["perfQ", "reliability", "pas", "changes", "genotype"])
            .map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_front(path: &Path) -> Result<Vec<Solution>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    let mut out = vec![];
    for rec in r.deserialize() {
        let rec: FrontRecord = rec.map_err(csv_err(path))?;
        let genotype =
            RefactoringSequence::from_json(&rec.genotype).map_err(|e| HarnessError::Malformed {
                path: path.to_path_buf(),
                message: e.to_string(),
            })?;
        out.push(Solution {
            objectives: ObjectiveVector {
                perf_q: rec.perf_q,
                reliability: rec.reliability,
                pas: rec.pas,
                changes: rec.changes,
            },
            genotype,
        });
    }
    Ok(out)
}

/// Non-dominated solutions, one per objective vector, in first-seen order.
pub fn pareto_filter(solutions: &[Solution]) -> Vec<Solution> {
    let canon: Vec<[f64; 4]> = solutions.iter().map(|s| s.objectives.canonical()).collect();
    let mut seen = BTreeSet::new();
    solutions
        .iter()
        .enumerate()
        .filter(|(i, _)| !canon.iter().any(|q| dominates(q, &canon[*i])))
        .filter(|(i, _)| seen.insert(canon[*i].map(f64::to_bits)))
        .map(|(_, s)| s.clone())
        .collect()
}

fn canonical_points(front: &[Solution]) -> Vec<Vec<f64>> {
    front
        .iter()
        .map(|s| s.objectives.canonical().to_vec())
        .collect()
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run: usize,
    pub seed: u64,
    pub front: Result<Vec<Solution>, String>,
    pub evaluations: usize,
    pub failed_evaluations: usize,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ConfigOutcome {
    pub config: ProblemConfig,
    pub runs: Vec<RunOutcome>,
    pub merged: Vec<Solution>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndicatorRow {
    pub brf: String,
    pub maxeval: usize,
    pub probpas: String,
    pub q_indicator: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShareRow {
    pub config: String,
    #[serde(rename = "Clon")]
    pub clon: f64,
    #[serde(rename = "MO2N")]
    pub mo2n: f64,
    #[serde(rename = "MO2C")]
    pub mo2c: f64,
    #[serde(rename = "ReDe")]
    pub rede: f64,
}

impl ShareRow {
    pub fn total(&self) -> f64 {
        self.clon + self.mo2n + self.mo2c + self.rede
    }
}

/// Results of every configuration of one case study.
#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub case_study: String,
    /// Sorted by configuration id.
    pub configs: Vec<ConfigOutcome>,
    pub reference: Vec<Solution>,
    pub indicators: Vec<IndicatorRow>,
    pub shares: Vec<ShareRow>,
}

impl ExperimentResult {
    pub fn failed_runs(&self) -> usize {
        self.configs
            .iter()
            .flat_map(|c| &c.runs)
            .filter(|r| r.front.is_err())
            .count()
    }
}

/// Resolves a case name to a bundled fixture, or else a JSON model path.
pub fn load_case(case: &str) -> Result<ArchModel, HarnessError> {
    if let Some(m) = fixtures::by_name(case) {
        return Ok(m);
    }
    let path = Path::new(case);
    if path.is_file() {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        return Ok(ArchModel::from_json(&text)?);
    }
    Err(HarnessError::UnknownCase(case.to_string()))
}

/// Directory name used for a case study.
pub fn case_dir_name(case: &str) -> String {
    Path::new(case)
        .file_stem()
        .map(|s| s.to_string_lossy().to_lowercase())
        .unwrap_or_else(|| case.to_lowercase())
}

/// Runs every configuration `independent_runs` times on at most `jobs`
/// threads, then merges, ranks and, when `out` is given, persists.
pub fn run_grid(
    configs: &[ProblemConfig],
    master_seed: u64,
    jobs: usize,
    out: Option<&Path>,
) -> Result<Vec<ExperimentResult>, HarnessError> {
    if configs.is_empty() {
        return Err(HarnessError::NothingToRun);
    }
    let mut cases: Vec<String> = vec![];
    for c in configs {
        if !cases.contains(&c.case_study) {
            cases.push(c.case_study.clone());
        }
    }
    let mut problems = vec![];
    for case in &cases {
        let model = load_case(case)?;
        for c in configs.iter().filter(|c| &c.case_study == case) {
            problems.push((
                c.clone(),
                Problem::new(model.clone(), c.objective_config())?,
            ));
        }
    }
    let tasks: Vec<(usize, usize)> = problems
        .iter()
        .enumerate()
        .flat_map(|(i, (c, _))| (0..c.ga.independent_runs).map(move |r| (i, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(i, r)| {
                let (config, problem) = &problems[i];
                execute(config, problem, master_seed, r)
            })
            .collect()
    });

    let mut per_config: Vec<ConfigOutcome> = problems
        .iter()
        .map(|(c, _)| ConfigOutcome {
            config: c.clone(),
            runs: vec![],
            merged: vec![],
        })
        .collect();
    for (&(i, _), o) in tasks.iter().zip(outcomes) {
        per_config[i].runs.push(o);
    }
    for c in &mut per_config {
        let all: Vec<Solution> = c
            .runs
            .iter()
            .filter_map(|r| r.front.as_ref().ok())
            .flatten()
            .cloned()
            .collect();
        c.merged = pareto_filter(&all);
    }

    let mut results = vec![];
    for case in cases {
        let mut group: Vec<ConfigOutcome> = per_config
            .iter()
            .filter(|c| c.config.case_study == case)
            .cloned()
            .collect();
        group.sort_by_key(|c| c.config.id());
        let result = summarize(&case, group)?;
        if let Some(out) = out {
            persist(out, &result)?;
        }
        results.push(result);
    }
    Ok(results)
}

fn execute(config: &ProblemConfig, problem: &Problem, master: u64, run: usize) -> RunOutcome {
    let seed = run_seed(master, config, run);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ga = config.ga;
    ga.seed = seed;
    let start = Instant::now();
    let result = nsga2::run(problem, &ga, &mut rng);
    let seconds = start.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            info!(
                "case={} config={} run={} front={} evaluations={} failed={} seconds={:.2}",
                config.case_study,
                config.id(),
                run + 1,
                r.front.len(),
                r.evaluations,
                r.failed_evaluations,
                seconds
            );
            RunOutcome {
                run,
                seed,
                front: Ok(r.front.iter().map(Solution::from).collect()),
                evaluations: r.evaluations,
                failed_evaluations: r.failed_evaluations,
                seconds,
            }
        }
        Err(e) => {
            warn!(
                "case={} config={} run={} failed: {e}",
                config.case_study,
                config.id(),
                run + 1
            );
            RunOutcome {
                run,
                seed,
                front: Err(e.to_string()),
                evaluations: 0,
                failed_evaluations: 0,
                seconds,
            }
        }
    }
}

fn summarize(case: &str, configs: Vec<ConfigOutcome>) -> Result<ExperimentResult, HarnessError> {
    let fronts: Vec<(ProblemConfig, Vec<Solution>)> = configs
        .iter()
        .map(|c| (c.config.clone(), c.merged.clone()))
        .collect();
    let (reference, indicators) = rank(&fronts)?;
    let shares = share_table(&fronts);
    Ok(ExperimentResult {
        case_study: case.to_string(),
        configs,
        reference,
        indicators,
        shares,
    })
}

/// Reference frontier over `fronts` and the best-first ranking of every
/// indicator. Empty fronts are left out of the ranking.
pub fn rank(
    fronts: &[(ProblemConfig, Vec<Solution>)],
) -> Result<(Vec<Solution>, Vec<IndicatorRow>), HarnessError> {
    let all: Vec<Solution> = fronts.iter().flat_map(|(_, f)| f.iter().cloned()).collect();
    let reference = pareto_filter(&all);
    if reference.is_empty() {
        return Ok((reference, vec![]));
    }
    let ref_pts = canonical_points(&reference);
    let mut scored: Vec<(&ProblemConfig, Vec<(Indicator, f64)>)> = vec![];
    for (c, f) in fronts.iter().filter(|(_, f)| !f.is_empty()) {
        scored.push((c, indicators::evaluate_all(&canonical_points(f), &ref_pts)?));
    }
    let mut rows = vec![];
    for (k, ind) in Indicator::ALL.iter().enumerate() {
        let mut col: Vec<(&ProblemConfig, f64)> =
            scored.iter().map(|(c, v)| (*c, v[k].1)).collect();
        col.sort_by(|a, b| ind.compare(a.1, b.1).then_with(|| a.0.id().cmp(&b.0.id())));
        rows.extend(col.into_iter().map(|(c, value)| IndicatorRow {
            brf: on_off(c.brf).to_string(),
            maxeval: c.max_evolutions,
            probpas: pas_label(c.fuzziness),
            q_indicator: ind.name().to_string(),
            value,
        }));
    }
    Ok((reference, rows))
}

fn share_row(label: &str, genes: impl Iterator<Item = ActionKind>) -> Option<ShareRow> {
    let mut counts = [0usize; 4];
    for k in genes {
        counts[ActionKind::ALL
            .iter()
            .position(|x| *x == k)
            .expect("known kind")] += 1;
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return None;
    }
    let pct = |i: usize| 100.0 * counts[i] as f64 / total as f64;
    Some(ShareRow {
        config: label.to_string(),
        clon: pct(0),
        mo2n: pct(1),
        mo2c: pct(2),
        rede: pct(3),
    })
}

fn genes(front: &[Solution]) -> impl Iterator<Item = ActionKind> + '_ {
    front
        .iter()
        .flat_map(|s| s.genotype.actions.iter().map(|a| a.kind))
}

/// Percentage of each action kind among the genes of every front, plus a
/// `Total` row pooling all genes. Fronts without genes get no row.
pub fn share_table(fronts: &[(ProblemConfig, Vec<Solution>)]) -> Vec<ShareRow> {
    let mut rows: Vec<ShareRow> = fronts
        .iter()
        .filter_map(|(c, f)| share_row(&c.id(), genes(f)))
        .collect();
    if let Some(total) = share_row("Total", fronts.iter().flat_map(|(_, f)| genes(f))) {
        rows.push(total);
    }
    rows
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err(path))?;
    for r in rows {
        w.serialize(r).map_err(csv_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

#[derive(Serialize)]
struct TimingRecord<'a> {
    config: String,
    run: usize,
    seed: u64,
    status: &'a str,
    evaluations: usize,
    failed_evaluations: usize,
    seconds: f64,
}

fn persist(out: &Path, result: &ExperimentResult) -> Result<(), HarnessError> {
    let case_dir = out.join(case_dir_name(&result.case_study));
    fs::create_dir_all(&case_dir).map_err(io_err(&case_dir))?;
    let mut timing = vec![];
    for c in &result.configs {
        let dir = case_dir.join(c.config.id());
        for r in &c.runs {
            let run_dir = dir.join(format!("run-{}", r.run + 1));
            match &r.front {
                Ok(front) => write_front(&run_dir.join("front.csv"), front)?,
                Err(msg) => {
                    fs::create_dir_all(&run_dir).map_err(io_err(&run_dir))?;
                    let p = run_dir.join("error.txt");
                    fs::write(&p, format!("{msg}\n")).map_err(io_err(&p))?;
                }
            }
            timing.push(TimingRecord {
                config: c.config.id(),
                run: r.run + 1,
                seed: r.seed,
                status: if r.front.is_ok() { "ok" } else { "failed" },
                evaluations: r.evaluations,
                failed_evaluations: r.failed_evaluations,
                seconds: r.seconds,
            });
        }
        write_front(&dir.join("merged_front.csv"), &c.merged)?;
    }
    write_tables(&case_dir, result)?;
    write_rows(&case_dir.join("timing.csv"), &timing)
}

fn write_tables(case_dir: &Path, result: &ExperimentResult) -> Result<(), HarnessError> {
    write_front(&case_dir.join("reference_front.csv"), &result.reference)?;
    write_rows(&case_dir.join("indicators.csv"), &result.indicators)?;
    write_rows(&case_dir.join("shares.csv"), &result.shares)
}

/// Rebuilds reference frontier, rankings and shares from the persisted
/// merged frontiers under `<out>/<case>` and rewrites those tables.
pub fn recompute_indicators(out: &Path, case: &str) -> Result<ExperimentResult, HarnessError> {
    let case_dir = out.join(case_dir_name(case));
    let mut ids = vec![];
    for entry in fs::read_dir(&case_dir).map_err(io_err(&case_dir))? {
        let entry = entry.map_err(io_err(&case_dir))?;
        if entry.path().join("merged_front.csv").is_file() {
            ids.push(entry.file_name().to_string_lossy().into_owned());
        }
    }
    ids.sort();
    let mut configs = vec![];
    for id in ids {
        let config = ProblemConfig::parse_id(case, &id).ok_or_else(|| HarnessError::Malformed {
            path: case_dir.join(&id),
            message: "unrecognized configuration directory".to_string(),
        })?;
        let merged = read_front(&case_dir.join(&id).join("merged_front.csv"))?;
        configs.push(ConfigOutcome {
            config,
            runs: vec![],
            merged,
        });
    }
    let result = summarize(case, configs)?;
    write_tables(&case_dir, &result)?;
    Ok(result)
}

pub fn read_indicator_table(path: &Path) -> Result<Vec<IndicatorRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err(path))?;
    r.deserialize().map(|x| x.map_err(csv_err(path))).collect()
}

fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::from(0u32);
    }
    let k = k.min(n - k);
    let mut acc = BigUint::from(1u32);
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceFactor {
    pub kind: ActionKind,
    pub targets: usize,
    pub combinations: BigUint,
}

/// Ω = Π over action kinds of C(n_kind, k), with n_kind the number of valid
/// targets of that kind in `model`.
pub fn solution_space_size(model: &ArchModel, length: usize) -> (BigUint, Vec<SpaceFactor>) {
    let factors: Vec<SpaceFactor> = ActionKind::ALL
        .iter()
        .map(|&kind| {
            let targets = valid_actions(model, kind).len();
            if targets < length {
                warn!("{kind} has {targets} targets, fewer than {length}; the space is empty");
            }
            SpaceFactor {
                kind,
                targets,
                combinations: binomial(targets, length),
            }
        })
        .collect();
    let omega = factors
        .iter()
        .fold(BigUint::from(1u32), |acc, f| acc * &f.combinations);
    (omega, factors)
}

/// Ω as a float, for order-of-magnitude comparisons.
pub fn to_f64(n: &BigUint) -> f64 {
    n.to_string().parse().unwrap_or(f64::INFINITY)
}
