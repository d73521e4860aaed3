//! Bundled case-study models and small synthetic models.

use std::collections::BTreeMap;

use rand::Rng;

use crate::model::{
    ArchModel, CommLink, Component, Message, Node, Operation, Scenario, Workload, EXTERNAL_ACTOR,
};

const TTBS: &str = include_str!("../fixtures/ttbs.json");
const COCOME: &str = include_str!("../fixtures/cocome.json");

/// Train Ticket Booking System: 11 components, 11 nodes, 3 scenarios.
pub fn ttbs() -> ArchModel {
    ArchModel::from_json(TTBS).expect("bundled TTBS model is valid")
}

/// CoCoME trading system: 13 components, 8 nodes, 3 scenarios.
pub fn cocome() -> ArchModel {
    ArchModel::from_json(COCOME).expect("bundled CoCoME model is valid")
}

/// Bundled case study by name.
pub fn by_name(name: &str) -> Option<ArchModel> {
    match name.to_ascii_lowercase().as_str() {
        "ttbs" => Some(ttbs()),
        "cocome" => Some(cocome()),
        _ => None,
    }
}

pub const CASE_STUDIES: [&str; 2] = ["ttbs", "cocome"];

pub fn component(id: &str, theta: f64, ops: &[(&str, f64)]) -> Component {
    Component {
        id: id.to_string(),
        operations: ops
            .iter()
            .map(|&(o, d)| Operation {
                id: o.to_string(),
                service_demand: d,
            })
            .collect(),
        failure_prob: theta,
    }
}

pub fn node(id: &str, multiplicity: u32, speed_factor: f64) -> Node {
    Node {
        id: id.to_string(),
        multiplicity,
        speed_factor,
    }
}

pub fn link(a: &str, b: &str, psi: f64) -> CommLink {
    CommLink {
        id: format!("{a}--{b}"),
        endpoints: [a.to_string(), b.to_string()],
        failure_prob: psi,
    }
}

pub fn message(caller: &str, callee: &str, op: &str, size: f64, repetitions: u32) -> Message {
    Message {
        caller: caller.to_string(),
        callee: callee.to_string(),
        operation: op.to_string(),
        size,
        repetitions,
    }
}

pub fn scenario(id: &str, prob: f64, workload: Workload, messages: Vec<Message>) -> Scenario {
    Scenario {
        id: id.to_string(),
        prob,
        workload,
        messages,
    }
}

pub fn open(arrival_rate: f64) -> Workload {
    Workload::Open { arrival_rate }
}

pub fn closed(population: u32, think_time: f64) -> Workload {
    Workload::Closed {
        population,
        think_time,
    }
}

pub fn assemble(
    components: Vec<Component>,
    nodes: Vec<Node>,
    links: Vec<CommLink>,
    scenarios: Vec<Scenario>,
    deployment: &[(&str, &str)],
) -> ArchModel {
    ArchModel {
        components,
        nodes,
        links,
        scenarios,
        deployment: deployment
            .iter()
            .map(|&(c, n)| (c.to_string(), n.to_string()))
            .collect(),
        replicas: vec![],
    }
}

/// One component with one operation of demand 1 s on one node, driven by an
/// open workload of 0.5 req/s.
pub fn minimal() -> ArchModel {
    assemble(
        vec![component("c", 0.0, &[("op", 1.0)])],
        vec![node("n", 1, 1.0)],
        vec![],
        vec![scenario(
            "s",
            1.0,
            open(0.5),
            vec![message(EXTERNAL_ACTOR, "c", "op", 1.0, 1)],
        )],
        &[("c", "n")],
    )
}

/// Single-entry open model with arrival rate `lambda` and demand `demand`.
pub fn single_station(lambda: f64, demand: f64) -> ArchModel {
    let mut m = minimal();
    m.components[0].operations[0].service_demand = demand;
    m.scenarios[0].workload = open(lambda);
    m
}

/// Entry `a` on node `na` calls entry `b` on node `nb` once per request.
pub fn two_layer_chain(demand_a: f64, demand_b: f64, lambda: f64) -> ArchModel {
    assemble(
        vec![
            component("A", 0.0, &[("a", demand_a)]),
            component("B", 0.0, &[("b", demand_b)]),
        ],
        vec![node("na", 1, 1.0), node("nb", 1, 1.0)],
        vec![link("na", "nb", 0.0)],
        vec![scenario(
            "s",
            1.0,
            open(lambda),
            vec![
                message(EXTERNAL_ACTOR, "A", "a", 1.0, 1),
                message("A", "B", "b", 1.0, 1),
            ],
        )],
        &[("A", "na"), ("B", "nb")],
    )
}

/// Two equally likely scenarios: the first invokes component `a`
/// (θ = 0.1) twice; the second sends 3 size units over a link with ψ = 0.01.
pub fn two_scenario_mix() -> ArchModel {
    assemble(
        vec![
            component("a", 0.1, &[("a1", 0.01)]),
            component("b", 0.0, &[("b1", 0.01)]),
            component("c", 0.0, &[("c1", 0.01)]),
        ],
        vec![node("n1", 1, 1.0), node("n2", 1, 1.0)],
        vec![link("n1", "n2", 0.01)],
        vec![
            scenario(
                "s1",
                0.5,
                closed(1, 1.0),
                vec![message(EXTERNAL_ACTOR, "a", "a1", 0.0, 2)],
            ),
            scenario(
                "s2",
                0.5,
                closed(1, 1.0),
                vec![
                    message(EXTERNAL_ACTOR, "b", "b1", 0.0, 1),
                    message("b", "c", "c1", 3.0, 1),
                ],
            ),
        ],
        &[("a", "n1"), ("b", "n1"), ("c", "n2")],
    )
}

/// Three components on three nodes; the hub receives every message and does
/// most of the work.
pub fn star() -> ArchModel {
    assemble(
        vec![
            component("hub", 0.01, &[("serve", 0.08), ("store", 0.06)]),
            component("left", 0.01, &[("l", 0.01)]),
            component("right", 0.01, &[("r", 0.01)]),
        ],
        vec![
            node("n-hub", 1, 1.0),
            node("n-left", 1, 1.0),
            node("n-right", 1, 1.0),
        ],
        vec![
            link("n-hub", "n-left", 0.001),
            link("n-hub", "n-right", 0.001),
        ],
        vec![scenario(
            "s",
            1.0,
            closed(6, 1.0),
            vec![
                message(EXTERNAL_ACTOR, "left", "l", 1.0, 1),
                message("left", "hub", "serve", 4.0, 3),
                message(EXTERNAL_ACTOR, "right", "r", 1.0, 1),
                message("right", "hub", "store", 4.0, 3),
            ],
        )],
        &[("hub", "n-hub"), ("left", "n-left"), ("right", "n-right")],
    )
}

/// `k` identical components, each alone on an identical node, each invoked
/// once by the actor.
pub fn uniform(k: usize) -> ArchModel {
    let comps: Vec<Component> = (0..k)
        .map(|i| component(&format!("c{i}"), 0.01, &[(&format!("op{i}"), 0.05)]))
        .collect();
    let nodes: Vec<Node> = (0..k).map(|i| node(&format!("n{i}"), 1, 1.0)).collect();
    let msgs = (0..k)
        .map(|i| message(EXTERNAL_ACTOR, &format!("c{i}"), &format!("op{i}"), 1.0, 1))
        .collect();
    let mut m = assemble(
        comps,
        nodes,
        vec![],
        vec![scenario("s", 1.0, closed(4, 1.0), msgs)],
        &[],
    );
    m.deployment = (0..k).map(|i| (format!("c{i}"), format!("n{i}"))).collect();
    m
}

/// Random small valid model: at most 4 components, 3 nodes, 3 links and 3
/// scenarios. Calls only go from lower- to higher-indexed components, so
/// every call graph is acyclic.
pub fn random_micro<R: Rng + ?Sized>(rng: &mut R) -> ArchModel {
    let n_comp = rng.gen_range(1..=4);
    let n_node = rng.gen_range(1..=n_comp.min(3));
    let mut comps = vec![];
    for i in 0..n_comp {
        let n_ops = rng.gen_range(1..=2);
        let ops: Vec<(String, f64)> = (0..n_ops)
            .map(|k| (format!("c{i}o{k}"), rng.gen_range(0.005..0.05)))
            .collect();
        let ops_ref: Vec<(&str, f64)> = ops.iter().map(|(o, d)| (o.as_str(), *d)).collect();
        comps.push(component(
            &format!("c{i}"),
            rng.gen_range(0.0..0.2),
            &ops_ref,
        ));
    }
    let nodes: Vec<Node> = (0..n_node)
        .map(|j| {
            node(
                &format!("n{j}"),
                rng.gen_range(1..=2),
                rng.gen_range(0.5..2.0),
            )
        })
        .collect();
    let mut deployment = BTreeMap::new();
    for (i, c) in comps.iter().enumerate() {
        // The first nodes are guaranteed an occupant.
        let j = if i < n_node {
            i
        } else {
            rng.gen_range(0..n_node)
        };
        deployment.insert(c.id.clone(), format!("n{j}"));
    }
    let mut links = vec![];
    for a in 0..n_node {
        for b in a + 1..n_node {
            if rng.gen_bool(0.8) {
                links.push(link(
                    &format!("n{a}"),
                    &format!("n{b}"),
                    rng.gen_range(0.0..0.05),
                ));
            }
        }
    }

    let n_scen = rng.gen_range(1..=3);
    let mut weights: Vec<f64> = (0..n_scen).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    let head: f64 = weights[..n_scen - 1].iter().sum();
    weights[n_scen - 1] = 1.0 - head;

    let mut scenarios = vec![];
    for (k, &p) in weights.iter().enumerate() {
        let mut msgs = vec![];
        let first = rng.gen_range(0..n_comp);
        let op = &comps[first].operations[rng.gen_range(0..comps[first].operations.len())].id;
        msgs.push(message(
            EXTERNAL_ACTOR,
            &comps[first].id,
            op,
            rng.gen_range(0.0..3.0),
            1,
        ));
        let mut invoked = vec![first];
        for _ in 0..rng.gen_range(0..=3) {
            let caller = invoked[rng.gen_range(0..invoked.len())];
            if caller + 1 >= n_comp {
                continue;
            }
            let callee = rng.gen_range(caller + 1..n_comp);
            let c = &comps[callee];
            let op = &c.operations[rng.gen_range(0..c.operations.len())].id;
            msgs.push(message(
                &comps[caller].id,
                &c.id,
                op,
                rng.gen_range(0.0..5.0),
                rng.gen_range(1..=3),
            ));
            invoked.push(callee);
        }
        scenarios.push(scenario(
            &format!("s{k}"),
            p,
            closed(rng.gen_range(1..=5), rng.gen_range(0.5..3.0)),
            msgs,
        ));
    }

    let m = ArchModel {
        components: comps,
        nodes,
        links,
        scenarios,
        deployment,
        replicas: vec![],
    };
    debug_assert!(m.validate().is_ok(), "{:?}", m.validate());
    m
}
