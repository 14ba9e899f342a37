use std::collections::BTreeMap;

use super::*;
use crate::lang::parse;

struct Device {
    id: u32,
    sensors: Sensors,
}

fn dev(id: u32, sensors: &[(&str, Value)]) -> Device {
    Device { id, sensors: sensors.iter().map(|(k, v)| (k.to_string(), v.clone())).collect() }
}

fn round(program: &Program, d: &Device, prev: Option<&Export>, nbrs: &[(u32, &Export, f64)]) -> Result<RoundOutput, RuntimeError> {
    let ctx = RoundContext {
        device: DeviceId(d.id),
        sensors: &d.sensors,
        prev_export: prev,
        nbr_exports: nbrs.iter().map(|(id, ex, _)| (DeviceId(*id), *ex)).collect(),
        nbr_ranges: nbrs.iter().map(|(id, _, r)| (DeviceId(*id), *r)).collect(),
    };
    eval_round(program, &ctx)
}

fn solo(src: &str) -> Result<Value, RuntimeError> {
    let p = parse(src).unwrap();
    round(&p, &dev(0, &[]), None, &[]).map(|o| o.result)
}

#[test]
fn one_plus_two() {
    assert_eq!(solo("1+2").unwrap(), Value::Num(3.0));
}

#[test]
fn applied_lambda_gives_one() {
    assert_eq!(solo("((x)=>x+1)(0)").unwrap(), Value::Num(1.0));
}

#[test]
fn rep_counts_rounds() {
    let p = parse("rep(0){(x)=>x+1}").unwrap();
    let d = dev(0, &[]);
    let first = round(&p, &d, None, &[]).unwrap();
    assert_eq!(first.result, Value::Num(0.0));
    let second = round(&p, &d, Some(&first.export), &[]).unwrap();
    assert_eq!(second.result, Value::Num(1.0));
    let mut out = second;
    for k in 2..10 {
        out = round(&p, &d, Some(&out.export), &[]).unwrap();
        assert_eq!(out.result, Value::Num(k as f64));
    }
}

#[test]
fn sum_hood_counts_neighbours() {
    let p = parse("sumHood(nbr{1})").unwrap();
    let exports: Vec<Export> = (1..=3).map(|i| round(&p, &dev(i, &[]), None, &[]).unwrap().export).collect();
    let nbrs: Vec<(u32, &Export, f64)> = exports.iter().enumerate().map(|(i, e)| (i as u32 + 1, e, 1.0)).collect();
    assert_eq!(round(&p, &dev(0, &[]), None, &nbrs).unwrap().result, Value::Num(3.0));
    // self is never part of the fold
    assert_eq!(round(&p, &dev(0, &[]), None, &[]).unwrap().result, Value::Num(0.0));
}

#[test]
fn function_valued_mux_splits_the_domain() {
    let p = parse("(mux(sense(s), +, -))(2, 1)").unwrap();
    let yes = dev(0, &[("s", Value::Bool(true))]);
    let no = dev(1, &[("s", Value::Bool(false))]);
    assert_eq!(round(&p, &yes, None, &[]).unwrap().result, Value::Num(3.0));
    assert_eq!(round(&p, &no, None, &[]).unwrap().result, Value::Num(1.0));
}

#[test]
fn nbr_inside_branches_only_sees_same_branch() {
    let p = parse("(mux(sense(s), (a, b) => a + b + 10 * sumHood(nbr{1}), (a, b) => a - b + 10 * sumHood(nbr{1})))(2, 1)").unwrap();
    let plus: Vec<Device> = (0..3).map(|i| dev(i, &[("s", Value::Bool(true))])).collect();
    let minus: Vec<Device> = (3..5).map(|i| dev(i, &[("s", Value::Bool(false))])).collect();
    let exports: BTreeMap<u32, Export> = plus.iter().chain(&minus).map(|d| (d.id, round(&p, d, None, &[]).unwrap().export)).collect();
    let everyone = |me: u32| -> Vec<(u32, &Export, f64)> { exports.iter().filter(|(id, _)| **id != me).map(|(id, e)| (*id, e, 1.0)).collect() };

    // device 0 hears two `+` devices and two `-` devices but only counts the former
    assert_eq!(round(&p, &plus[0], None, &everyone(0)).unwrap().result, Value::Num(3.0 + 20.0));
    assert_eq!(round(&p, &minus[0], None, &everyone(3)).unwrap().result, Value::Num(1.0 + 10.0));

    // no `-` export shares a path with a `+` export
    let plus_paths: Vec<&Path> = exports[&0].paths().collect();
    assert!(exports[&3].paths().all(|p| !plus_paths.contains(&p)));
}

#[test]
fn nbr_range_plus_nbr_on_two_device_line() {
    let p = parse("minHood(nbrRange() + nbr{sense(d)})").unwrap();
    let source = dev(0, &[("d", Value::Num(0.0))]);
    let other = dev(1, &[("d", Value::Num(f64::INFINITY))]);
    let src_export = round(&p, &source, None, &[]).unwrap().export;
    let out = round(&p, &other, None, &[(0, &src_export, 1.0)]).unwrap();
    assert_eq!(out.result, Value::Num(1.0));
}

#[test]
fn nbr_range_without_neighbours_is_empty() {
    assert_eq!(solo("minHood(nbrRange())").unwrap(), Value::Num(f64::INFINITY));
    assert_eq!(solo("sumHood(nbrRange())").unwrap(), Value::Num(0.0));
}

#[test]
fn sense_reads_sensors() {
    let p = parse("sense(temp)").unwrap();
    let d = dev(0, &[("temp", Value::Num(21.5)), ("source", Value::Bool(true))]);
    assert_eq!(round(&p, &d, None, &[]).unwrap().result, Value::Num(21.5));
    let p = parse("sense(source)").unwrap();
    assert_eq!(round(&p, &d, None, &[]).unwrap().result, Value::Bool(true));
    let p = parse("1 + sense(missing)").unwrap();
    let err = round(&p, &d, None, &[]).unwrap_err();
    assert_eq!(err.fault, Fault::UnboundSensor("missing".into()));
    assert_eq!(err.path, Path(vec![PathKey::Slot(2)]));
}

#[test]
fn runtime_errors_carry_paths() {
    let err = solo("((x) => x + true)(1)").unwrap_err();
    assert!(matches!(err.fault, Fault::Type(_)));
    assert_eq!(err.path.to_string(), "/@main#0");
    assert_eq!(solo("1(2)").unwrap_err().fault, Fault::NotAFunction("number"));
    assert_eq!(solo("((f) => f(1, 2))((x) => x)").unwrap_err().fault, Fault::Arity { function: "main#1".into(), expected: 1, got: 2 });
}

#[test]
fn neighbour_fields_cannot_escape() {
    assert_eq!(solo("nbr{1}").unwrap_err().fault, Fault::NbrMapEscape("round result"));
    assert_eq!(solo("nbr{nbr{1}}").unwrap_err().fault, Fault::NbrMapEscape("nbr payload"));
    assert_eq!(solo("minHood(rep(nbr{1}){(x) => x})").unwrap_err().fault, Fault::NbrMapEscape("rep state"));
}

#[test]
fn recursion_is_bounded() {
    assert_eq!(solo("def f(x) { f(x) }\nf(1)").unwrap_err().fault, Fault::RecursionLimit);
}

#[test]
fn higher_order_builtins_reject_nbr_in_callbacks() {
    assert_eq!(solo("foldHood(nbrRange(), (a, b) => a + b, 0)").unwrap(), Value::Num(0.0));
    let err = solo("tabulate(2, (i) => sumHood(nbr{i}))").unwrap_err();
    assert_eq!(err.fault, Fault::LocalOnly("nbr"));
    assert_eq!(solo("tabulate(3, (i) => i * 2)").unwrap(), Value::tuple([0.0, 2.0, 4.0].map(Value::Num)));
}

#[test]
fn export_contains_exactly_visited_rep_and_nbr_paths() {
    let p = parse("(mux(sense(s), () => rep(0){(x) => x + 1}, () => sumHood(nbr{5})))()").unwrap();
    let yes = round(&p, &dev(0, &[("s", Value::Bool(true))]), None, &[]).unwrap();
    let no = round(&p, &dev(0, &[("s", Value::Bool(false))]), None, &[]).unwrap();
    let kinds = |e: &Export| e.iter().map(|(p, k, v)| (p.to_string(), k, v.clone())).collect::<Vec<_>>();
    assert_eq!(kinds(&yes.export), vec![("/@main#0".to_string(), SlotKind::Rep, Value::Num(0.0))]);
    assert_eq!(kinds(&no.export), vec![("/@main#2/1".to_string(), SlotKind::Nbr, Value::Num(5.0))]);
    // a constant program exports nothing
    let p = parse("1 + 2").unwrap();
    assert!(round(&p, &dev(0, &[]), None, &[]).unwrap().export.is_empty());
}

#[test]
fn rounds_are_pure() {
    let p = parse("rep(tuple(0, 0.1)){(s) => tuple(get(s, 0) + minHood(nbrRange()), get(s, 1) * 3 + 0.7)}").unwrap();
    let d = dev(0, &[]);
    let first = round(&p, &d, None, &[]).unwrap();
    let ne = round(&p, &dev(1, &[]), None, &[]).unwrap().export;
    let a = round(&p, &d, Some(&first.export), &[(1, &ne, 0.3)]).unwrap();
    let b = round(&p, &d, Some(&first.export), &[(1, &ne, 0.3)]).unwrap();
    assert!(a.result.identical(&b.result));
    assert_eq!(a.export.digest(), b.export.digest());
}

#[test]
fn definitions_extend_the_path_with_their_name() {
    let p = parse("def count() { rep(0){(x) => x + 1} }\ncount() + count()").unwrap();
    let out = round(&p, &dev(0, &[]), None, &[]).unwrap();
    let paths: Vec<String> = out.export.paths().map(|p| p.to_string()).collect();
    assert_eq!(paths, vec!["/1/@count", "/2/@count"]);
}

#[test]
fn missing_main_is_reported() {
    let p = parse("def f() { 1 }").unwrap();
    assert_eq!(round(&p, &dev(0, &[]), None, &[]).unwrap_err().fault, Fault::NoMain);
}
