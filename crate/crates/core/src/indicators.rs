//! Quality indicators for Pareto frontiers.
//!
//! All points are minimization vectors. Frontiers are normalized with the
//! per-objective extremes of a reference frontier before HV, IGD+, EPSILON
//! and GSPREAD are computed.

use std::cmp::Ordering;

use serde::Serialize;
use thiserror::Error;

use crate::nsga2::dominates;

/// Hypervolume reference coordinate in normalized space.
pub const HV_REFERENCE: f64 = 1.1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IndicatorError {
    #[error("points of arity {found} where {expected} was expected")]
    Arity { expected: usize, found: usize },
    #[error("point {0:?} does not dominate the reference point")]
    OutsideReference(Vec<f64>),
    #[error("empty {0}")]
    Empty(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Indicator {
    HV,
    IgdPlus,
    Epsilon,
    GSpread,
}

impl Indicator {
    pub const ALL: [Indicator; 4] = [
        Indicator::HV,
        Indicator::IgdPlus,
        Indicator::Epsilon,
        Indicator::GSpread,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Indicator::HV => "HV",
            Indicator::IgdPlus => "IGD+",
            Indicator::Epsilon => "EPSILON",
            Indicator::GSpread => "GSPREAD",
        }
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Indicator::HV)
    }

    /// Orders two values of this indicator, better first.
    pub fn compare(self, a: f64, b: f64) -> Ordering {
        if self.higher_is_better() {
            b.total_cmp(&a)
        } else {
            a.total_cmp(&b)
        }
    }
}

fn check_arity(points: &[Vec<f64>], expected: usize) -> Result<(), IndicatorError> {
    match points.iter().find(|p| p.len() != expected) {
        Some(p) => Err(IndicatorError::Arity {
            expected,
            found: p.len(),
        }),
        None => Ok(()),
    }
}

/// Non-dominated subset of `points`, without duplicates, in first-seen order.
pub fn non_dominated(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out: Vec<Vec<f64>> = vec![];
    for (i, p) in points.iter().enumerate() {
        let beaten = points.iter().any(|q| dominates(q, p));
        let repeated = points[..i].iter().any(|q| q == p);
        if !beaten && !repeated {
            out.push(p.clone());
        }
    }
    out
}

/// Non-dominated points of the union of `fronts`.
pub fn build_reference_front(fronts: &[Vec<Vec<f64>>]) -> Result<Vec<Vec<f64>>, IndicatorError> {
    let union: Vec<Vec<f64>> = fronts.iter().flatten().cloned().collect();
    if let Some(first) = union.first() {
        check_arity(&union, first.len())?;
    }
    Ok(non_dominated(&union))
}

/// Per-objective min-max map taken from a reference frontier.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Normalization {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalization {
    pub fn from_reference(reference: &[Vec<f64>]) -> Result<Self, IndicatorError> {
        let first = reference
            .first()
            .ok_or(IndicatorError::Empty("reference front"))?;
        check_arity(reference, first.len())?;
        let mut min = first.clone();
        let mut max = first.clone();
        for p in reference {
            for k in 0..p.len() {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        Ok(Normalization { min, max })
    }

    /// Maps into [0,1]; a zero-range objective maps to 0 and values outside
    /// the reference range are clamped.
    pub fn apply(&self, p: &[f64]) -> Vec<f64> {
        p.iter()
            .enumerate()
            .map(|(k, &x)| {
                let range = self.max[k] - self.min[k];
                if range == 0.0 {
                    0.0
                } else {
                    ((x - self.min[k]) / range).clamp(0.0, 1.0)
                }
            })
            .collect()
    }

    pub fn apply_all(&self, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
        points.iter().map(|p| self.apply(p)).collect()
    }
}

/// Volume dominated by `front` and bounded by `reference`.
pub fn hypervolume(front: &[Vec<f64>], reference: &[f64]) -> Result<f64, IndicatorError> {
    check_arity(front, reference.len())?;
    for p in front {
        if p.iter().zip(reference).any(|(x, r)| x > r) {
            return Err(IndicatorError::OutsideReference(p.clone()));
        }
    }
    let pts = non_dominated(front);
    Ok(wfg(pts, reference))
}

/// WFG recursion: the volume is the sum of each point's exclusive volume
/// with respect to the points after it.
fn wfg(mut pts: Vec<Vec<f64>>, r: &[f64]) -> f64 {
    if pts.is_empty() {
        return 0.0;
    }
    let last = r.len() - 1;
    // Sorting worst-first on the last objective keeps limit sets small.
    pts.sort_by(|a, b| b[last].total_cmp(&a[last]));
    let mut total = 0.0;
    for i in 0..pts.len() {
        let box_vol: f64 = pts[i].iter().zip(r).map(|(x, ri)| ri - x).product();
        let limited: Vec<Vec<f64>> = pts[i + 1..]
            .iter()
            .map(|q| q.iter().zip(&pts[i]).map(|(a, b)| a.max(*b)).collect())
            .collect();
        total += box_vol - wfg(non_dominated(&limited), r);
    }
    total
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Dominance-aware distance from reference point `r` to `front`.
fn d_plus(r: &[f64], front: &[Vec<f64>]) -> f64 {
    front
        .iter()
        .map(|f| {
            f.iter()
                .zip(r)
                .map(|(a, b)| (a - b).max(0.0).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .fold(f64::INFINITY, f64::min)
}

/// IGD+ = sqrt(Σ_{r ∈ reference} d⁺(r, front)²) / |reference|.
pub fn igd_plus(front: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64, IndicatorError> {
    if reference.is_empty() {
        return Err(IndicatorError::Empty("reference front"));
    }
    if front.is_empty() {
        return Err(IndicatorError::Empty("front"));
    }
    let sum: f64 = reference.iter().map(|r| d_plus(r, front).powi(2)).sum();
    Ok(sum.sqrt() / reference.len() as f64)
}

/// Additive ε: the smallest shift making `front` weakly dominate every
/// reference point.
pub fn epsilon(front: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64, IndicatorError> {
    if reference.is_empty() {
        return Err(IndicatorError::Empty("reference front"));
    }
    if front.is_empty() {
        return Err(IndicatorError::Empty("front"));
    }
    Ok(reference
        .iter()
        .map(|r| {
            front
                .iter()
                .map(|f| {
                    f.iter()
                        .zip(r)
                        .map(|(a, b)| a - b)
                        .fold(f64::NEG_INFINITY, f64::max)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .fold(f64::NEG_INFINITY, f64::max))
}

/// Point of `reference` minimizing objective `k`; ties go to the
/// lexicographically smallest point.
fn extreme(reference: &[Vec<f64>], k: usize) -> &Vec<f64> {
    reference
        .iter()
        .min_by(|a, b| {
            a[k].total_cmp(&b[k]).then_with(|| {
                a.iter()
                    .zip(b.iter())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
        })
        .expect("nonempty reference")
}

/// Generalized spread. Fronts of fewer than two points score 1.
pub fn gspread(front: &[Vec<f64>], reference: &[Vec<f64>]) -> Result<f64, IndicatorError> {
    if reference.is_empty() {
        return Err(IndicatorError::Empty("reference front"));
    }
    if front.len() < 2 {
        return Ok(1.0);
    }
    let m = reference[0].len();
    let extremes: f64 = (0..m)
        .map(|k| {
            let e = extreme(reference, k);
            front
                .iter()
                .map(|f| euclid(e, f))
                .fold(f64::INFINITY, f64::min)
        })
        .sum();
    let nearest: Vec<f64> = front
        .iter()
        .enumerate()
        .map(|(i, s)| {
            front
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, t)| euclid(s, t))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mean = nearest.iter().sum::<f64>() / nearest.len() as f64;
    let deviation: f64 = nearest.iter().map(|d| (d - mean).abs()).sum();
    let denominator = extremes + front.len() as f64 * mean;
    if denominator == 0.0 {
        return Ok(0.0);
    }
    Ok((extremes + deviation) / denominator)
}

/// All four indicators of `front`, both given in raw objective space, after
/// normalizing with the reference extremes.
pub fn evaluate_all(
    front: &[Vec<f64>],
    reference: &[Vec<f64>],
) -> Result<Vec<(Indicator, f64)>, IndicatorError> {
    let norm = Normalization::from_reference(reference)?;
    let f = norm.apply_all(front);
    let r = norm.apply_all(reference);
    let hv_ref = vec![HV_REFERENCE; norm.min.len()];
    Ok(vec![
        (Indicator::HV, hypervolume(&f, &hv_ref)?),
        (Indicator::IgdPlus, igd_plus(&f, &r)?),
        (Indicator::Epsilon, epsilon(&f, &r)?),
        (Indicator::GSpread, gspread(&f, &r)?),
    ])
}
