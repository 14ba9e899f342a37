//! Reference computations for the integration tests, written directly over
//! device positions so they share no code with the library's own oracles.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};
use std::sync::Arc;

use fieldcalc::blocks;
use fieldcalc::engine::{DeviceId, Sensors, Value};
use fieldcalc::sim::{Environment, Schedule, Trace, World};
use proptest::prelude::*;

/// Adjacency with edge lengths, from positions and the radius.
pub fn adjacency(env: &Environment) -> BTreeMap<DeviceId, Vec<(DeviceId, f64)>> {
    let devs: Vec<(DeviceId, (f64, f64))> = env.devices().map(|(id, d)| (id, d.position)).collect();
    devs.iter()
        .map(|(a, pa)| {
            let nbrs = devs
                .iter()
                .filter(|(b, _)| b != a)
                .map(|(b, pb)| {
                    let (dx, dy) = (pa.0 - pb.0, pa.1 - pb.1);
                    (*b, (dx * dx + dy * dy).sqrt())
                })
                .filter(|(_, d)| *d <= env.comm_radius())
                .collect();
            (*a, nbrs)
        })
        .collect()
}

/// Shortest-path length to the nearest source by Bellman-Ford relaxation.
/// Edge lengths come from the same `sqrt` the simulator uses, and path sums
/// are accumulated in the same source-to-device order as the gradient, so
/// results can be compared exactly.
pub fn shortest(env: &Environment, sources: &[DeviceId]) -> BTreeMap<DeviceId, f64> {
    let adj = adjacency(env);
    let mut dist: BTreeMap<DeviceId, f64> = adj.keys().map(|d| (*d, if sources.contains(d) { 0.0 } else { f64::INFINITY })).collect();
    for _ in 0..adj.len() {
        let mut changed = false;
        for (d, nbrs) in &adj {
            if sources.contains(d) {
                continue;
            }
            let best = nbrs.iter().map(|(n, w)| w + dist[n]).fold(f64::INFINITY, f64::min);
            if best < dist[d] {
                dist.insert(*d, best);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    dist
}

pub fn hops(env: &Environment, sources: &[DeviceId]) -> BTreeMap<DeviceId, f64> {
    let adj = adjacency(env);
    let mut depth: BTreeMap<DeviceId, f64> = adj.keys().map(|d| (*d, f64::INFINITY)).collect();
    let mut queue = VecDeque::new();
    for s in sources {
        depth.insert(*s, 0.0);
        queue.push_back(*s);
    }
    while let Some(d) = queue.pop_front() {
        for (n, _) in &adj[&d] {
            if depth[n].is_infinite() {
                depth.insert(*n, depth[&d] + 1.0);
                queue.push_back(*n);
            }
        }
    }
    depth
}

/// Component label: the smallest device id reachable.
pub fn component_of(env: &Environment) -> BTreeMap<DeviceId, DeviceId> {
    let adj = adjacency(env);
    let mut label = BTreeMap::new();
    for start in adj.keys() {
        if label.contains_key(start) {
            continue;
        }
        let mut queue = VecDeque::from([*start]);
        label.insert(*start, *start);
        while let Some(d) = queue.pop_front() {
            for (n, _) in &adj[&d] {
                if !label.contains_key(n) {
                    label.insert(*n, *start);
                    queue.push_back(*n);
                }
            }
        }
    }
    label
}

pub fn component_min(env: &Environment, values: &BTreeMap<DeviceId, f64>) -> BTreeMap<DeviceId, f64> {
    let label = component_of(env);
    let mut best: BTreeMap<DeviceId, f64> = BTreeMap::new();
    for (d, l) in &label {
        let e = best.entry(*l).or_insert(f64::INFINITY);
        *e = e.min(values[d]);
    }
    label.iter().map(|(d, l)| (*d, best[l])).collect()
}

pub fn hop_diameter(env: &Environment) -> usize {
    let ids: Vec<DeviceId> = env.ids().collect();
    ids.iter().flat_map(|d| hops(env, &[*d]).into_values()).filter(|h| h.is_finite()).fold(0.0, f64::max) as usize
}

pub fn sensors(pairs: &[(&str, Value)]) -> Sensors {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Environment with the given positions; every device gets `source` false
/// unless its index is in `sources`.
pub fn layout(points: &[(f64, f64)], radius: f64, sources: &[usize]) -> Environment {
    let mut env = Environment::new(radius).unwrap();
    for (i, p) in points.iter().enumerate() {
        env.add_device(*p, sensors(&[("source", Value::Bool(sources.contains(&i)))])).unwrap();
    }
    env
}

pub fn world(main: &str, env: Environment, schedule: Schedule, rounds: u64, seed: u64) -> World {
    let program = blocks::compile(main).unwrap_or_else(|e| panic!("{main}: {e}"));
    World::new(Arc::new(program), env, schedule, rounds, seed).unwrap()
}

pub fn run(main: &str, env: Environment, schedule: Schedule, rounds: u64, seed: u64) -> Trace {
    world(main, env, schedule, rounds, seed).run().unwrap()
}

/// Last result of every device.
pub fn last_values(trace: &Trace) -> BTreeMap<DeviceId, Value> {
    let mut out = BTreeMap::new();
    for r in &trace.records {
        out.insert(r.event.device, r.result.clone());
    }
    out.retain(|d, _| trace.final_environment().contains(*d));
    out
}

pub fn nums(values: &BTreeMap<DeviceId, Value>) -> BTreeMap<DeviceId, f64> {
    values.iter().map(|(d, v)| (*d, v.as_num().unwrap_or_else(|| panic!("{d}: {v} is not a number")))).collect()
}

/// Points in a `side` x `side` square.
pub fn points(max: usize, side: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0..side, 0.0..side), 1..=max)
}

/// Connected layouts: a random walk of points, each within `step` of an
/// earlier one, so the unit-disk graph with radius `step` is connected.
pub fn connected_points(max: usize, step: f64) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((any::<prop::sample::Index>(), 0.0..std::f64::consts::TAU, 0.3..1.0f64), 0..max).prop_map(move |moves| {
        let mut pts = vec![(0.0, 0.0)];
        for (from, angle, frac) in moves {
            let (x, y) = pts[from.index(pts.len())];
            pts.push((x + step * frac * angle.cos(), y + step * frac * angle.sin()));
        }
        pts
    })
}

/// Definitions every generated program may call. `plus` reads its
/// neighbours, `minus` keeps state, so each leaves its own export entries.
pub const GENERATED_DEFS: &str = "def plus(p, q) { p + q + sumHood(nbr{q}) }\ndef minus(p, q) { rep(p){(r) => r - q} }\n";

/// Numeric expressions over the sensor `a` (number), the sensor `s`
/// (boolean) and a variable `x` that the caller must bind.
pub fn numeric_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        (0u8..10).prop_map(|n| n.to_string()),
        Just("2.5".to_string()),
        Just("x".to_string()),
        Just("sense(a)".to_string()),
        Just("selfId()".to_string()),
    ];
    leaf.prop_recursive(4, 48, 3, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone(), prop::sample::select(vec!["+", "-", "*", "min"])).prop_map(|(a, b, op)| format!("({a} {op} {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("max({a}, {b})")),
            (inner.clone(), inner.clone(), inner.clone()).prop_map(|(a, b, c)| format!("mux({a} < {b}, {c}, {a})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("((x) => {a})({b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("rep({a}){{(x) => {b}}}")),
            inner.clone().prop_map(|a| format!("sumHood(nbr{{{a}}})")),
            inner.clone().prop_map(|a| format!("minHood(nbr{{{a}}} + nbrRange())")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("(mux(sense(s), plus, minus))({a}, {b})")),
            (inner.clone(), inner).prop_map(|(a, b)| format!("plus({a}, {b})")),
        ]
    })
}

/// Whole program text: the shared definitions plus a main expression that
/// binds `x`.
pub fn program_source() -> impl Strategy<Value = String> {
    numeric_expr().prop_map(|body| format!("{GENERATED_DEFS}((x) => {body})(sense(a))"))
}
