mod common;

use std::collections::BTreeSet;

use common::*;
use fieldcalc::analysis::check_fairness;
use fieldcalc::engine::{DeviceId, Value};
use fieldcalc::sim::{Perturbation, PerturbationKind, Schedule, StopReason, WarmStart};
use proptest::prelude::*;

fn schedule(async_mode: bool, jitter: f64) -> Schedule {
    if async_mode {
        Schedule::fair_async(jitter)
    } else {
        Schedule::synchronous()
    }
}

/// Random environment changes over the first `horizon` seconds.
fn perturbations(n: usize, horizon: f64) -> impl Strategy<Value = Vec<Perturbation>> {
    let kind = prop_oneof![
        (0.0..6.0, 0.0..6.0).prop_map(|p| PerturbationKind::AddDevice { position: p, sensors: sensors(&[("source", Value::Bool(false))]) }),
        (0..n as u32).prop_map(|d| PerturbationKind::RemoveDevice(DeviceId(d))),
        ((0..n as u32), (0.0..6.0, 0.0..6.0)).prop_map(|(d, p)| PerturbationKind::MoveDevice(DeviceId(d), p)),
        ((0..n as u32), any::<bool>()).prop_map(|(d, b)| PerturbationKind::SetSensor(DeviceId(d), "source".into(), Value::Bool(b))),
        (1usize..3, any::<bool>()).prop_map(|(count, keep)| PerturbationKind::RemoveRandom { count, keep_connected: keep, protect: vec![] }),
    ];
    prop::collection::vec((0.0..horizon, kind).prop_map(|(at, kind)| Perturbation { at, kind }), 0..6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn same_seed_gives_byte_identical_traces(pts in points(10, 5.0), changes in perturbations(10, 20.0), async_mode: bool, seed in 0u64..1000) {
        let env = layout(&pts, 1.5, &[0]);
        let go = || world("distance(sense(source))", env.clone(), schedule(async_mode, 0.3), 30, seed)
            .with_perturbations(changes.clone())
            .with_warm_start(WarmStart { scale: 5.0 })
            .run()
            .unwrap()
            .csv_string();
        prop_assert_eq!(go(), go());
    }

    #[test]
    fn stepping_and_running_give_the_same_trace(pts in points(12, 5.0), changes in perturbations(12, 15.0), async_mode: bool, seed in 0u64..1000) {
        let env = layout(&pts, 1.5, &[0]);
        let make = || world("tuple(distance(sense(source)), gossipMin(selfId()))", env.clone(), schedule(async_mode, 0.2), 25, seed).with_perturbations(changes.clone());
        let whole = make().run().unwrap();
        let mut stepped = make();
        while stepped.step().unwrap() {}
        let stepped = stepped.into_trace();
        prop_assert_eq!(&whole.records, &stepped.records);
        prop_assert_eq!(whole.stop, stepped.stop);
    }

    /// Every device reports the set of neighbours whose exports it can see,
    /// encoded as a sum of distinct powers of two. That set must always be a
    /// subset of its neighbourhood at the time of the round.
    #[test]
    fn rounds_only_see_current_neighbours(pts in points(12, 4.0), changes in perturbations(12, 20.0), async_mode: bool, seed in 0u64..1000) {
        let mut env = layout(&pts, 1.5, &[]);
        for d in env.ids().collect::<Vec<_>>() {
            env.set_sensor(d, "bit", Value::Num(2f64.powi(d.0 as i32))).unwrap();
        }
        // devices added later get ids n, n+1, ... in order of application
        let mut changes = changes;
        changes.sort_by(|a, b| a.at.total_cmp(&b.at));
        let mut next = pts.len() as i32;
        for p in &mut changes {
            if let PerturbationKind::AddDevice { sensors: s, .. } = &mut p.kind {
                s.insert("bit".into(), Value::Num(2f64.powi(next)));
                next += 1;
            }
        }
        let trace = world("sumHood(nbr{sense(bit)})", env, schedule(async_mode, 0.3), 30, seed).with_perturbations(changes).run().unwrap();
        for r in &trace.records {
            let env = trace.environment_at(r.event.time);
            let allowed: BTreeSet<u32> = env.neighbours(r.event.device).keys().map(|d| d.0).collect();
            let sum = r.result.as_num().unwrap();
            let mut seen = BTreeSet::new();
            let mut bits = sum as u64;
            prop_assert_eq!(bits as f64, sum);
            let mut i = 0;
            while bits > 0 {
                if bits & 1 == 1 { seen.insert(i); }
                bits >>= 1;
                i += 1;
            }
            prop_assert!(seen.is_subset(&allowed), "device {} at {} saw {:?}, neighbours {:?}", r.event.device, r.event.time, seen, allowed);
        }
    }

    #[test]
    fn fair_async_fires_everyone_within_two_periods(pts in points(15, 5.0), changes in perturbations(15, 30.0), jitter in 0.0..0.99f64, period in 0.1..3.0f64, seed in 0u64..1000) {
        let env = layout(&pts, 1.5, &[0]);
        let schedule = Schedule { base_period: period, ..Schedule::fair_async(jitter) };
        let trace = world("distance(sense(source))", env, schedule, 40, seed).with_perturbations(changes).run().unwrap();
        let report = check_fairness(&trace, 2.0 * period);
        prop_assert!(report.fair, "{:?}", report);
    }

    #[test]
    fn removed_devices_never_fire_again(pts in points(10, 4.0), victim in 0u32..10, at in 1u64..20, async_mode: bool, seed in 0u64..1000) {
        let victim = DeviceId(victim % pts.len() as u32);
        let env = layout(&pts, 1.5, &[0]);
        let trace = world("1", env, schedule(async_mode, 0.3), 30, seed)
            .with_perturbations(vec![Perturbation { at: at as f64, kind: PerturbationKind::RemoveDevice(victim) }])
            .run().unwrap();
        prop_assert!(trace.records.iter().all(|r| r.event.device != victim || r.event.time < at as f64));
        prop_assert!(!trace.final_environment().contains(victim));
    }
}

#[test]
fn synchronous_rounds_fire_every_device_once_per_period() {
    let env = layout(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], 1.5, &[0]);
    let trace = run("rep(0){(x) => x + 1}", env, Schedule::synchronous(), 5, 0);
    assert_eq!(trace.records.len(), 15);
    for (i, r) in trace.records.iter().enumerate() {
        assert_eq!(r.event.time, (i / 3) as f64);
        assert_eq!(r.event.device, DeviceId((i % 3) as u32));
        assert_eq!(r.result, Value::Num((i / 3) as f64));
    }
    assert_eq!(trace.stop, StopReason::Budget);
}

#[test]
fn added_devices_get_fresh_ids_and_join_the_computation() {
    let env = layout(&[(0.0, 0.0), (1.0, 0.0)], 1.5, &[0]);
    let add = PerturbationKind::AddDevice { position: (2.0, 0.0), sensors: sensors(&[("source", Value::Bool(false))]) };
    let trace = world("distance(sense(source))", env, Schedule::synchronous(), 20, 0)
        .with_perturbations(vec![Perturbation { at: 3.0, kind: PerturbationKind::RemoveDevice(DeviceId(1)) }, Perturbation { at: 5.0, kind: add }])
        .run()
        .unwrap();
    let last = last_values(&trace);
    assert_eq!(last.keys().copied().collect::<Vec<_>>(), vec![DeviceId(0), DeviceId(2)]);
    // the new device is 2 away but out of range of the source: no path
    assert_eq!(last[&DeviceId(2)], Value::Num(f64::INFINITY));
}

#[test]
fn moving_the_source_reroutes_the_gradient() {
    let pts: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 0.0)).collect();
    let env = layout(&pts, 1.2, &[0]);
    let changes = vec![
        Perturbation { at: 20.0, kind: PerturbationKind::SetSensor(DeviceId(0), "source".into(), Value::Bool(false)) },
        Perturbation { at: 20.0, kind: PerturbationKind::SetSensor(DeviceId(4), "source".into(), Value::Bool(true)) },
    ];
    let trace = world("distance(sense(source))", env, Schedule::synchronous(), 60, 0).with_perturbations(changes).run().unwrap();
    let last = nums(&last_values(&trace));
    assert_eq!(last.values().copied().collect::<Vec<_>>(), vec![4.0, 3.0, 2.0, 1.0, 0.0]);
}
