//! Independent oracles shared by the integration tests. Nothing here calls
//! into the library's solvers or indicators; only model data is read.

#![allow(dead_code)]

use archopt::model::{ArchModel, EXTERNAL_ACTOR};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two-sided 97.5% Student-t quantile for 29 degrees of freedom.
pub const T_975_29: f64 = 2.0452;

#[derive(Debug, Clone, Copy)]
pub struct Estimate {
    pub mean: f64,
    pub half_width: f64,
}

impl Estimate {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.mean).abs() <= self.half_width
    }
}

/// Mean and 95% half-width over 30 independent replications.
pub fn replicate(seed: u64, f: impl Fn(&mut ChaCha8Rng) -> f64) -> Estimate {
    let xs: Vec<f64> = (0..30)
        .map(|r| {
            f(&mut ChaCha8Rng::seed_from_u64(
                seed.wrapping_mul(1_000_003).wrapping_add(r),
            ))
        })
        .collect();
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Estimate {
        mean,
        half_width: T_975_29 * (var / n).sqrt(),
    }
}

fn exp_sample<R: Rng>(rng: &mut R, mean: f64) -> f64 {
    -mean * (1.0 - rng.gen::<f64>()).ln()
}

#[derive(Debug, Clone)]
pub struct TandemRun {
    pub mean_response: f64,
    pub throughput: f64,
    pub utilization: Vec<f64>,
}

/// FCFS single-server stations in series fed by Poisson arrivals, simulated
/// customer by customer with the Lindley recursion. The first `warmup`
/// customers are discarded.
pub fn simulate_tandem<R: Rng>(
    rng: &mut R,
    lambda: f64,
    demands: &[f64],
    customers: usize,
    warmup: usize,
) -> TandemRun {
    let k = demands.len();
    let mut last_departure = vec![0.0f64; k];
    let mut busy = vec![0.0f64; k];
    let mut t = 0.0;
    let mut total_response = 0.0;
    let mut window_start = 0.0;
    let mut window_end = 0.0;
    for i in 0..customers + warmup {
        t += exp_sample(rng, 1.0 / lambda);
        if i == warmup {
            window_start = t;
        }
        let mut ready = t;
        for s in 0..k {
            let service = exp_sample(rng, demands[s]);
            let start = ready.max(last_departure[s]);
            last_departure[s] = start + service;
            ready = last_departure[s];
            if i >= warmup {
                busy[s] += service;
            }
        }
        if i >= warmup {
            total_response += ready - t;
            window_end = ready;
        }
    }
    let span = window_end - window_start;
    TandemRun {
        mean_response: total_response / customers as f64,
        throughput: customers as f64 / span,
        utilization: busy.iter().map(|b| b / span).collect(),
    }
}

/// Per-scenario list of independent failure events, each a probability.
fn failure_events(model: &ArchModel) -> Vec<(f64, Vec<f64>)> {
    let theta = |id: &str| {
        model
            .components
            .iter()
            .find(|c| c.id == id)
            .map(|c| c.failure_prob)
            .unwrap()
    };
    let host = |id: &str| model.deployment.get(id).cloned();
    let psi = |a: &str, b: &str| {
        model
            .links
            .iter()
            .find(|l| {
                (l.endpoints[0] == a && l.endpoints[1] == b)
                    || (l.endpoints[0] == b && l.endpoints[1] == a)
            })
            .map(|l| l.failure_prob)
    };
    model
        .scenarios
        .iter()
        .map(|s| {
            let mut ev = vec![];
            for m in &s.messages {
                for _ in 0..m.repetitions {
                    ev.push(theta(&m.callee));
                    if m.caller == EXTERNAL_ACTOR {
                        continue;
                    }
                    let (a, b) = (host(&m.caller).unwrap(), host(&m.callee).unwrap());
                    if a != b {
                        if let Some(p) = psi(&a, &b) {
                            // A message of size s crosses the link as s units
                            // that each fail independently.
                            ev.push(1.0 - (1.0 - p).powf(m.size));
                        }
                    }
                }
            }
            (s.prob, ev)
        })
        .collect()
}

/// Fraction of simulated executions that complete without any failure, and
/// its standard error.
pub fn simulate_reliability<R: Rng>(model: &ArchModel, trials: usize, rng: &mut R) -> (f64, f64) {
    let events = failure_events(model);
    let mut ok = 0usize;
    for _ in 0..trials {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut pick = events.len() - 1;
        for (j, (p, _)) in events.iter().enumerate() {
            acc += p;
            if u < acc {
                pick = j;
                break;
            }
        }
        if events[pick].1.iter().all(|&q| rng.gen::<f64>() >= q) {
            ok += 1;
        }
    }
    let p = ok as f64 / trials as f64;
    (p, (p * (1.0 - p) / trials as f64).sqrt())
}

/// Monte-Carlo estimate of the volume dominated by `front` inside the box
/// bounded by `reference`, with its standard error.
pub fn mc_hypervolume<R: Rng>(
    front: &[Vec<f64>],
    reference: &[f64],
    samples: usize,
    rng: &mut R,
) -> (f64, f64) {
    if front.is_empty() {
        return (0.0, 0.0);
    }
    let m = reference.len();
    let lo: Vec<f64> = (0..m)
        .map(|k| front.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let box_vol: f64 = (0..m).map(|k| reference[k] - lo[k]).product();
    let mut x = vec![0.0; m];
    let mut hits = 0usize;
    for _ in 0..samples {
        for k in 0..m {
            x[k] = lo[k] + rng.gen::<f64>() * (reference[k] - lo[k]);
        }
        if front.iter().any(|p| p.iter().zip(&x).all(|(a, b)| a <= b)) {
            hits += 1;
        }
    }
    let f = hits as f64 / samples as f64;
    (
        box_vol * f,
        box_vol * (f * (1.0 - f) / samples as f64).sqrt(),
    )
}

pub fn bf_dominates(a: &[f64], b: &[f64]) -> bool {
    let mut no_worse = true;
    let mut better = false;
    for i in 0..a.len() {
        if a[i] > b[i] {
            no_worse = false;
        }
        if a[i] < b[i] {
            better = true;
        }
    }
    no_worse && better
}

/// Fronts by repeated peeling of the non-dominated remainder.
pub fn bf_fronts(points: &[Vec<f64>]) -> Vec<Vec<usize>> {
    let mut left: Vec<usize> = (0..points.len()).collect();
    let mut fronts = vec![];
    while !left.is_empty() {
        let front: Vec<usize> = left
            .iter()
            .copied()
            .filter(|&i| !left.iter().any(|&j| bf_dominates(&points[j], &points[i])))
            .collect();
        left.retain(|i| !front.contains(i));
        fronts.push(front);
    }
    fronts
}

/// Non-dominated distinct points of the union, sorted lexicographically.
pub fn bf_reference(fronts: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let all: Vec<Vec<f64>> = fronts.iter().flatten().cloned().collect();
    let mut out: Vec<Vec<f64>> = all
        .iter()
        .filter(|p| !all.iter().any(|q| bf_dominates(q, p)))
        .cloned()
        .collect();
    sort_points(&mut out);
    out.dedup();
    out
}

pub fn sort_points(points: &mut [Vec<f64>]) {
    points.sort_by(|a, b| a.partial_cmp(b).unwrap());
}

pub fn bf_igd_plus(front: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let mut sum = 0.0;
    for r in reference {
        let mut best = f64::INFINITY;
        for f in front {
            let mut d = 0.0;
            for k in 0..r.len() {
                let g = if f[k] - r[k] > 0.0 { f[k] - r[k] } else { 0.0 };
                d += g * g;
            }
            let d = d.sqrt();
            if d < best {
                best = d;
            }
        }
        sum += best * best;
    }
    sum.sqrt() / reference.len() as f64
}

pub fn bf_epsilon(front: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for r in reference {
        let mut best = f64::INFINITY;
        for f in front {
            let mut shift = f64::NEG_INFINITY;
            for k in 0..r.len() {
                if f[k] - r[k] > shift {
                    shift = f[k] - r[k];
                }
            }
            if shift < best {
                best = shift;
            }
        }
        if best > worst {
            worst = best;
        }
    }
    worst
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        s += (a[k] - b[k]) * (a[k] - b[k]);
    }
    s.sqrt()
}

/// Generalized spread written directly from its definition.
pub fn direct_gspread(front: &[Vec<f64>], reference: &[Vec<f64>]) -> f64 {
    if front.len() < 2 {
        return 1.0;
    }
    let m = reference[0].len();
    let mut extreme_sum = 0.0;
    for k in 0..m {
        let mut sorted = reference.to_vec();
        sorted.sort_by(|a, b| {
            a[k].partial_cmp(&b[k])
                .unwrap()
                .then(a.partial_cmp(b).unwrap())
        });
        let e = &sorted[0];
        extreme_sum += front
            .iter()
            .map(|f| dist(e, f))
            .fold(f64::INFINITY, f64::min);
    }
    let mut ids = vec![];
    for i in 0..front.len() {
        let mut best = f64::INFINITY;
        for j in 0..front.len() {
            if i != j {
                best = best.min(dist(&front[i], &front[j]));
            }
        }
        ids.push(best);
    }
    let mean: f64 = ids.iter().sum::<f64>() / ids.len() as f64;
    let dev: f64 = ids.iter().map(|d| (d - mean).abs()).sum();
    let den = extreme_sum + front.len() as f64 * mean;
    if den == 0.0 {
        0.0
    } else {
        (extreme_sum + dev) / den
    }
}

/// Random points with coordinates on a coarse grid, so ties and duplicates
/// are common.
pub fn random_points<R: Rng>(rng: &mut R, n: usize, m: usize, levels: u32) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| {
            (0..m)
                .map(|_| rng.gen_range(0..levels) as f64 / levels as f64)
                .collect()
        })
        .collect()
}
