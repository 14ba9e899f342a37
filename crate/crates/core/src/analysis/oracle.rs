//! Reference fields computed directly on the proximity graph.

use std::collections::BTreeMap;

use petgraph::algo::dijkstra;
use petgraph::unionfind::UnionFind;
use petgraph::visit::{Bfs, EdgeRef};

use crate::engine::{DeviceId, Value};
use crate::sim::{Environment, OracleSpec};

/// Devices whose boolean `sensor` is true.
pub fn sources(env: &Environment, sensor: &str) -> Vec<DeviceId> {
    env.devices().filter(|(_, d)| d.sensors.get(sensor) == Some(&Value::Bool(true))).map(|(id, _)| id).collect()
}

/// Shortest-path length (sum of edge distances) to the nearest source;
/// infinity where no source is reachable.
pub fn shortest_paths(env: &Environment, sources: &[DeviceId]) -> BTreeMap<DeviceId, f64> {
    let (mut g, index) = env.graph();
    // A virtual root joined to every source by zero-length edges turns the
    // multi-source problem into a single-source one without changing sums.
    let root = g.add_node(DeviceId(u32::MAX));
    for s in sources {
        g.add_edge(root, index[s], 0.0);
    }
    let dist = dijkstra(&g, root, None, |e| *e.weight());
    index.iter().map(|(d, i)| (*d, dist.get(i).copied().unwrap_or(f64::INFINITY))).collect()
}

/// Hop count to the nearest source; infinity where unreachable.
pub fn hop_counts(env: &Environment, sources: &[DeviceId]) -> BTreeMap<DeviceId, f64> {
    let (mut g, index) = env.graph();
    let root = g.add_node(DeviceId(u32::MAX));
    for s in sources {
        g.add_edge(root, index[s], 0.0);
    }
    let mut depth = vec![f64::INFINITY; g.node_count()];
    depth[root.index()] = -1.0;
    let mut bfs = Bfs::new(&g, root);
    while let Some(n) = bfs.next(&g) {
        for e in g.edges(n) {
            let m = if e.source() == n { e.target() } else { e.source() };
            if depth[m.index()].is_infinite() {
                depth[m.index()] = depth[n.index()] + 1.0;
            }
        }
    }
    index.iter().map(|(d, i)| (*d, depth[i.index()])).collect()
}

/// Connected component label of every device.
pub fn components(env: &Environment) -> BTreeMap<DeviceId, usize> {
    let (g, index) = env.graph();
    let mut uf = UnionFind::<usize>::new(g.node_count());
    for e in g.edge_references() {
        uf.union(e.source().index(), e.target().index());
    }
    index.iter().map(|(d, i)| (*d, uf.find(i.index()))).collect()
}

/// Folds `values` over each connected component and hands every device
/// its component's result.
pub fn component_fold(env: &Environment, values: &BTreeMap<DeviceId, f64>, init: f64, f: impl Fn(f64, f64) -> f64) -> BTreeMap<DeviceId, f64> {
    let comp = components(env);
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for (d, c) in &comp {
        let a = acc.entry(*c).or_insert(init);
        *a = f(*a, values[d]);
    }
    comp.iter().map(|(d, c)| (*d, acc[c])).collect()
}

fn numeric_sensor(env: &Environment, sensor: &str) -> Result<BTreeMap<DeviceId, f64>, String> {
    env.devices()
        .map(|(id, d)| match d.sensors.get(sensor).and_then(Value::as_num) {
            Some(x) => Ok((id, x)),
            None => Err(format!("device {id} has no numeric sensor `{sensor}`")),
        })
        .collect()
}

fn nums(m: BTreeMap<DeviceId, f64>) -> BTreeMap<DeviceId, Value> {
    m.into_iter().map(|(d, x)| (d, Value::Num(x))).collect()
}

/// Reference field described by `spec` on `env`.
pub fn oracle_field(spec: &OracleSpec, env: &Environment) -> Result<BTreeMap<DeviceId, Value>, String> {
    Ok(match spec {
        OracleSpec::Dijkstra { sensor } => nums(shortest_paths(env, &sources(env, sensor))),
        OracleSpec::Bfs { sensor } => nums(hop_counts(env, &sources(env, sensor))),
        OracleSpec::ComponentMin { sensor } => nums(component_fold(env, &numeric_sensor(env, sensor)?, f64::INFINITY, f64::min)),
        OracleSpec::ComponentSum { sensor } => nums(component_fold(env, &numeric_sensor(env, sensor)?, 0.0, |a, b| a + b)),
        OracleSpec::Constant { value } => {
            let v = Value::from_json(value)?;
            env.ids().map(|d| (d, v.clone())).collect()
        }
    })
}
