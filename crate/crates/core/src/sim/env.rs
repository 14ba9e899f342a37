use std::collections::BTreeMap;

use petgraph::algo::connected_components;
use petgraph::graph::{NodeIndex, UnGraph};

use super::SimError;
use crate::engine::{DeviceId, Sensors, Value};

#[derive(Debug, Clone, PartialEq)]
pub struct Device {
    pub position: (f64, f64),
    pub sensors: Sensors,
}

/// Devices, their positions and sensors, and the proximity relation.
#[derive(Debug, Clone, PartialEq)]
pub struct Environment {
    devices: BTreeMap<DeviceId, Device>,
    comm_radius: f64,
    next_id: u32,
}

impl Environment {
    pub fn new(comm_radius: f64) -> Result<Self, SimError> {
        if !(comm_radius.is_finite() && comm_radius > 0.0) {
            return Err(SimError::Topology(format!("communication radius must be positive, got {comm_radius}")));
        }
        Ok(Self { devices: BTreeMap::new(), comm_radius, next_id: 0 })
    }

    pub fn comm_radius(&self) -> f64 {
        self.comm_radius
    }

    /// Adds a device with the next unused id. Ids are never reused.
    pub fn add_device(&mut self, position: (f64, f64), sensors: Sensors) -> Result<DeviceId, SimError> {
        check_position(position)?;
        let id = DeviceId(self.next_id);
        self.next_id += 1;
        self.devices.insert(id, Device { position, sensors });
        Ok(id)
    }

    pub fn remove_device(&mut self, id: DeviceId) -> Result<(), SimError> {
        self.devices.remove(&id).map(|_| ()).ok_or(SimError::UnknownDevice(id))
    }

    pub fn move_device(&mut self, id: DeviceId, position: (f64, f64)) -> Result<(), SimError> {
        check_position(position)?;
        self.device_mut(id)?.position = position;
        Ok(())
    }

    pub fn set_sensor(&mut self, id: DeviceId, name: &str, value: Value) -> Result<(), SimError> {
        self.device_mut(id)?.sensors.insert(name.to_string(), value);
        Ok(())
    }

    fn device_mut(&mut self, id: DeviceId) -> Result<&mut Device, SimError> {
        self.devices.get_mut(&id).ok_or(SimError::UnknownDevice(id))
    }

    pub fn device(&self, id: DeviceId) -> Option<&Device> {
        self.devices.get(&id)
    }

    pub fn contains(&self, id: DeviceId) -> bool {
        self.devices.contains_key(&id)
    }

    pub fn ids(&self) -> impl Iterator<Item = DeviceId> + '_ {
        self.devices.keys().copied()
    }

    pub fn devices(&self) -> impl Iterator<Item = (DeviceId, &Device)> {
        self.devices.iter().map(|(id, d)| (*id, d))
    }

    pub fn len(&self) -> usize {
        self.devices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty()
    }

    /// Euclidean distance between two live devices.
    pub fn distance(&self, a: DeviceId, b: DeviceId) -> Option<f64> {
        let (pa, pb) = (self.devices.get(&a)?.position, self.devices.get(&b)?.position);
        Some(euclid(pa, pb))
    }

    /// Every other device within the communication radius, with its distance.
    pub fn neighbours(&self, id: DeviceId) -> BTreeMap<DeviceId, f64> {
        let Some(me) = self.devices.get(&id) else { return BTreeMap::new() };
        self.devices
            .iter()
            .filter(|(other, _)| **other != id)
            .filter_map(|(other, d)| {
                let r = euclid(me.position, d.position);
                (r <= self.comm_radius).then_some((*other, r))
            })
            .collect()
    }

    /// Neighbourhoods of every device at once.
    pub fn neighbour_table(&self) -> BTreeMap<DeviceId, BTreeMap<DeviceId, f64>> {
        let ids: Vec<(DeviceId, (f64, f64))> = self.devices.iter().map(|(id, d)| (*id, d.position)).collect();
        let mut table: BTreeMap<DeviceId, BTreeMap<DeviceId, f64>> = ids.iter().map(|(id, _)| (*id, BTreeMap::new())).collect();
        for (i, (a, pa)) in ids.iter().enumerate() {
            for (b, pb) in &ids[i + 1..] {
                let r = euclid(*pa, *pb);
                if r <= self.comm_radius {
                    table.get_mut(a).unwrap().insert(*b, r);
                    table.get_mut(b).unwrap().insert(*a, r);
                }
            }
        }
        table
    }

    /// Undirected proximity graph weighted by distance, with the node index
    /// of every device.
    pub fn graph(&self) -> (UnGraph<DeviceId, f64>, BTreeMap<DeviceId, NodeIndex>) {
        let mut g = UnGraph::new_undirected();
        let index: BTreeMap<DeviceId, NodeIndex> = self.devices.keys().map(|id| (*id, g.add_node(*id))).collect();
        for (a, nbrs) in self.neighbour_table() {
            for (b, r) in nbrs {
                if a < b {
                    g.add_edge(index[&a], index[&b], r);
                }
            }
        }
        (g, index)
    }

    pub fn edge_count(&self) -> usize {
        self.neighbour_table().values().map(BTreeMap::len).sum::<usize>() / 2
    }

    pub fn is_connected(&self) -> bool {
        self.devices.len() <= 1 || connected_components(&self.graph().0) == 1
    }

    /// Largest hop distance between two devices of the same component.
    pub fn hop_diameter(&self) -> usize {
        let table = self.neighbour_table();
        let mut best = 0;
        for start in table.keys() {
            let mut depth: BTreeMap<DeviceId, usize> = BTreeMap::from([(*start, 0)]);
            let mut frontier = std::collections::VecDeque::from([*start]);
            while let Some(d) = frontier.pop_front() {
                let next = depth[&d] + 1;
                for n in table[&d].keys() {
                    if !depth.contains_key(n) {
                        depth.insert(*n, next);
                        best = best.max(next);
                        frontier.push_back(*n);
                    }
                }
            }
        }
        best
    }

    /// Live device closest to `point`, ties to the lower id.
    pub fn nearest(&self, point: (f64, f64)) -> Option<DeviceId> {
        self.devices
            .iter()
            .map(|(id, d)| (euclid(d.position, point), *id))
            .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
            .map(|(_, id)| id)
    }
}

fn check_position(p: (f64, f64)) -> Result<(), SimError> {
    if p.0.is_finite() && p.1.is_finite() {
        Ok(())
    } else {
        Err(SimError::Topology(format!("position ({}, {}) is not finite", p.0, p.1)))
    }
}

pub(crate) fn euclid(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (a.0 - b.0, a.1 - b.1);
    (dx * dx + dy * dy).sqrt()
}
