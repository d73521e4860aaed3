//! Closed-form system reliability.
//!
//! A scenario succeeds when every component invocation and every unit of
//! message traffic over a link succeeds. Failures are independent, so the
//! success probability of scenario j is
//! `Π_i (1-θ_i)^InvNr_ij · Π_l (1-ψ_l)^MsgSize(l,j)`, and the system
//! reliability is its expectation over the scenario mix.

use crate::model::ArchModel;

/// Success probability of one scenario.
pub fn scenario_reliability(model: &ArchModel, scenario: &str) -> f64 {
    let s = model.scenario(scenario).expect("scenario of a valid model");
    let mut r = 1.0;
    for c in &model.components {
        let n = model
            .invocation_count(&s.id, &c.id)
            .expect("component of a valid model");
        if n > 0 {
            r *= (1.0 - c.failure_prob).powf(n as f64);
        }
    }
    for l in &model.links {
        let size = model
            .message_traffic(&s.id, &l.id)
            .expect("link of a valid model");
        if size > 0.0 {
            r *= (1.0 - l.failure_prob).powf(size);
        }
    }
    r
}

/// Probability that a randomly drawn scenario execution succeeds.
pub fn system_reliability(model: &ArchModel) -> f64 {
    model
        .scenarios
        .iter()
        .map(|s| s.prob * scenario_reliability(model, &s.id))
        .sum::<f64>()
        .clamp(0.0, 1.0)
}
