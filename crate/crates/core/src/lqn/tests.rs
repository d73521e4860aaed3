use super::*;
use crate::fixtures;
use crate::refactoring::RefactoringAction;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn minimal_structure() {
    let lqn = to_lqn(&fixtures::minimal()).unwrap();
    assert_eq!(lqn.processors.len(), 1);
    assert_eq!(lqn.tasks.len(), 1);
    assert_eq!(lqn.entries.len(), 1);
    assert_eq!(lqn.reference_tasks.len(), 1);
}

#[test]
fn ttbs_structure() {
    let lqn = to_lqn(&fixtures::ttbs()).unwrap();
    assert_eq!(lqn.processors.len(), 11);
    assert_eq!(lqn.tasks.len(), 11);
    assert_eq!(lqn.reference_tasks.len(), 3);
}

#[test]
fn demand_is_scaled_by_speed() {
    let mut m = fixtures::minimal();
    m.nodes[0].speed_factor = 4.0;
    let lqn = to_lqn(&m).unwrap();
    assert!(close(lqn.entries[0].demand, 0.25, 1e-15));
}

#[test]
fn mm1_closed_forms() {
    let idx = analyze(&fixtures::single_station(0.5, 1.0)).unwrap();
    assert!(idx.converged);
    assert!(!idx.saturated);
    assert!(close(idx.node_utilization["n"], 0.5, 1e-6));
    assert!(close(idx.scenario_response_time["s"], 2.0, 1e-6));
    assert!(close(idx.scenario_throughput["s"], 0.5, 1e-6));
}

#[test]
fn saturated_station_is_flagged_and_clamped() {
    let idx = analyze(&fixtures::single_station(1.5, 1.0)).unwrap();
    assert!(idx.saturated);
    assert_eq!(idx.node_utilization["n"], 1.0);
    let r = idx.scenario_response_time["s"];
    assert!(r.is_finite() && r > 0.0);
    assert!(close(r, 1.0 / (1.0 - 0.999), 1e-6));
}

#[test]
fn multi_server_matches_erlang_c_for_two_servers() {
    let mut m = fixtures::single_station(1.2, 1.0);
    m.nodes[0].multiplicity = 2;
    let idx = analyze(&m).unwrap();
    // M/M/2 with ρ = 0.6: the approximation's exponent is exactly 1 there, so
    // R = S(1 + ρ/(m(1-ρ)))... and Erlang-C gives R = S/(1-ρ²).
    let rho: f64 = 0.6;
    let exact = 1.0 / (1.0 - rho * rho);
    let approx = 1.0 + rho.powf(6f64.sqrt() - 1.0) / (2.0 * (1.0 - rho));
    let r = idx.scenario_response_time["s"];
    assert!(close(r, approx, 1e-6));
    assert!((r - exact).abs() / exact < 0.05);
    assert!(close(idx.node_utilization["n"], 0.6, 1e-9));
}

#[test]
fn closed_single_station_matches_exact_mva_for_one_customer() {
    let mut m = fixtures::minimal();
    m.scenarios[0].workload = fixtures::closed(1, 3.0);
    let idx = analyze(&m).unwrap();
    // One customer never queues: R = D, X = 1/(Z + D).
    assert!(close(idx.scenario_response_time["s"], 1.0, 1e-6));
    assert!(close(idx.scenario_throughput["s"], 0.25, 1e-6));
}

#[test]
fn closed_population_respects_asymptotic_bounds() {
    let mut m = fixtures::minimal();
    for n in [2u32, 5, 20, 80] {
        m.scenarios[0].workload = fixtures::closed(n, 3.0);
        let idx = analyze(&m).unwrap();
        let x = idx.scenario_throughput["s"];
        let r = idx.scenario_response_time["s"];
        assert!(x <= 1.0 + 1e-9, "X {x} above 1/D");
        assert!(x <= f64::from(n) / 4.0 + 1e-9);
        assert!(r >= 1.0 - 1e-9);
        assert!(r >= f64::from(n) - 3.0 - 1e-6, "R {r} below N·D - Z");
    }
}

#[test]
fn chain_response_adds_nested_residence() {
    let idx = analyze(&fixtures::two_layer_chain(0.2, 0.3, 1.0)).unwrap();
    let expected = 0.2 / 0.8 + 0.3 / 0.7;
    assert!(close(idx.scenario_response_time["s"], expected, 1e-6));
    assert!(close(idx.node_utilization["na"], 0.2, 1e-9));
    assert!(close(idx.node_utilization["nb"], 0.3, 1e-9));
}

#[test]
fn repetitions_scale_visits() {
    let mut m = fixtures::two_layer_chain(0.1, 0.1, 1.0);
    m.scenarios[0].messages[1].repetitions = 3;
    let lqn = to_lqn(&m).unwrap();
    let v = lqn.entry_visits(0);
    assert_eq!(v, vec![1.0, 3.0]);
    let idx = lqn
        .solve(DEFAULT_TOLERANCE, DEFAULT_MAX_ITERATIONS)
        .unwrap();
    assert!(close(idx.node_utilization["nb"], 0.3, 1e-9));
}

#[test]
fn clon_adds_a_processor_and_splits_calls() {
    let base = fixtures::two_layer_chain(0.2, 0.3, 1.0);
    let m = RefactoringAction::clon("nb").apply(&base, 0).unwrap();
    let lqn = to_lqn(&m).unwrap();
    assert_eq!(lqn.processors.len(), 3);
    let to_b: Vec<&Call> = lqn.reference_tasks[0]
        .calls
        .iter()
        .filter(|c| lqn.entries[c.callee].operation == "b")
        .collect();
    assert_eq!(to_b.len(), 2);
    for c in to_b {
        assert!(close(c.mean_calls, 0.5, 1e-15));
    }
    let before = analyze(&base).unwrap();
    let after = analyze(&m).unwrap();
    assert!(after.node_utilization["nb"] <= before.node_utilization["nb"]);
    assert!(close(after.node_utilization["nb"], 0.15, 1e-9));
}

#[test]
fn open_throughput_is_conserved() {
    let idx = analyze(&fixtures::two_layer_chain(0.1, 0.4, 2.0)).unwrap();
    assert!(!idx.saturated);
    assert!(close(idx.scenario_throughput["s"], 2.0, 1e-12));
}

#[test]
fn cyclic_calls_are_rejected() {
    let mut m = fixtures::two_layer_chain(0.1, 0.1, 1.0);
    m.components[0].operations.push(crate::model::Operation {
        id: "a2".into(),
        service_demand: 0.1,
    });
    // B (serving b) calls A.a2, then A (serving a2) calls B.b again.
    let s = &mut m.scenarios[0];
    s.messages.push(fixtures::message("B", "A", "a2", 1.0, 1));
    s.messages.push(fixtures::message("A", "B", "b", 1.0, 1));
    m.validate().unwrap();
    assert_eq!(to_lqn(&m), Err(LqnError::CyclicCalls("s".into())));
}

#[test]
fn rejects_bad_parameters() {
    let lqn = to_lqn(&fixtures::minimal()).unwrap();
    assert!(lqn.solve(0.0, 10).is_err());
    assert!(lqn.solve(1e-6, 0).is_err());
}

#[test]
fn budget_exhaustion_is_flagged() {
    let mut m = fixtures::minimal();
    m.scenarios[0].workload = fixtures::closed(30, 1.0);
    let idx = to_lqn(&m).unwrap().solve(1e-12, 2).unwrap();
    assert!(!idx.converged);
    assert_eq!(idx.iterations, 2);
}

#[test]
fn solve_is_deterministic() {
    let m = fixtures::cocome();
    assert_eq!(analyze(&m).unwrap(), analyze(&m).unwrap());
}

#[test]
fn fixtures_start_in_the_working_range() {
    for m in [fixtures::ttbs(), fixtures::cocome()] {
        let idx = analyze(&m).unwrap();
        assert!(idx.converged);
        assert!(!idx.saturated);
        for (node, &u) in &idx.node_utilization {
            if u > 0.0 {
                assert!((0.3..=0.8).contains(&u), "{node} at {u}");
            }
        }
    }
}

/// With several closed classes, slowing one class can relieve another, so the
/// property is checked per workload class in isolation.
#[test]
fn raising_a_demand_never_lowers_response_times() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    for i in 0..200 {
        let mut base = fixtures::random_micro(&mut rng);
        base.scenarios.truncate(1);
        base.scenarios[0].prob = 1.0;
        if i % 2 == 1 {
            base.scenarios[0].workload = fixtures::open(rng.gen_range(0.5..3.0));
        }
        let r0 = analyze(&base).unwrap();
        let mut m = base.clone();
        let ci = rng.gen_range(0..m.components.len());
        let oi = rng.gen_range(0..m.components[ci].operations.len());
        m.components[ci].operations[oi].service_demand *= rng.gen_range(1.01..2.0);
        let r1 = analyze(&m).unwrap();
        for (s, &r) in &r0.scenario_response_time {
            assert!(
                r1.scenario_response_time[s] >= r * (1.0 - 1e-6),
                "{s}: {r} -> {}",
                r1.scenario_response_time[s]
            );
        }
    }
}

#[test]
fn dump_lists_every_element() {
    let lqn = to_lqn(&fixtures::two_layer_chain(0.2, 0.3, 1.0)).unwrap();
    let text = lqn.dump();
    assert!(text.contains("processor na"));
    assert!(text.contains("task B on nb"));
    assert!(text.contains("entry A.a of A"));
    assert!(text.contains("call A.a -> B.b mean=1"));
    assert!(text.contains("reference s open rate=1"));
}
