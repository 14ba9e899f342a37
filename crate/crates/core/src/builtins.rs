//! Primitive function library.
//!
//! Pointwise builtins lift over neighbour fields: when any argument is a
//! neighbour field the function is applied per neighbour on the intersection
//! of the fields' key sets, with plain arguments broadcast. Hood folds reduce
//! a neighbour field in ascending device-id order, so their result does not
//! depend on how the map was assembled.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::engine::{DeviceId, Fault, NbrMap, RoundContext, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Arity {
    Fixed(usize),
    Variadic,
}

impl Arity {
    pub fn fixed(self) -> Option<usize> {
        match self {
            Arity::Fixed(n) => Some(n),
            Arity::Variadic => None,
        }
    }
}

/// Callback into the evaluator for builtins that take functions.
pub trait Invoke {
    fn invoke(&mut self, f: &Value, args: Vec<Value>) -> Result<Value, Fault>;
    fn context(&self) -> &RoundContext<'_>;
}

type PointwiseFn = fn(&[Value]) -> Result<Value, Fault>;
type HoodFn = fn(&NbrMap) -> Result<Value, Fault>;
type ContextFn = fn(&RoundContext<'_>) -> Value;
type HigherOrderFn = fn(&mut dyn Invoke, Vec<Value>) -> Result<Value, Fault>;

#[derive(Clone, Copy)]
pub enum Kind {
    Pointwise(PointwiseFn),
    Hood(HoodFn),
    /// Reads only the device id, `nbr_ranges` or `nbr_exports` keys.
    Context(ContextFn),
    HigherOrder(HigherOrderFn),
    /// `sense(name)`: handled by the evaluator, which owns the sensor map.
    Sense,
}

pub struct Builtin {
    pub name: &'static str,
    pub arity: Arity,
    pub kind: Kind,
    pub summary: &'static str,
}

impl Builtin {
    /// Pure builtins never look at the round context.
    pub fn is_pure(&self) -> bool {
        matches!(self.kind, Kind::Pointwise(_) | Kind::Hood(_) | Kind::HigherOrder(_))
    }

    pub fn is_sense(&self) -> bool {
        matches!(self.kind, Kind::Sense)
    }
}

impl std::fmt::Debug for Builtin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Builtin({})", self.name)
    }
}

const fn pointwise(name: &'static str, arity: usize, f: PointwiseFn, summary: &'static str) -> Builtin {
    Builtin { name, arity: Arity::Fixed(arity), kind: Kind::Pointwise(f), summary }
}

const fn hood(name: &'static str, f: HoodFn, summary: &'static str) -> Builtin {
    Builtin { name, arity: Arity::Fixed(1), kind: Kind::Hood(f), summary }
}

static REGISTRY: &[Builtin] = &[
    pointwise("+", 2, |a| num2("+", a, |x, y| x + y), "addition"),
    pointwise("-", 2, |a| num2("-", a, |x, y| x - y), "subtraction"),
    pointwise("*", 2, |a| num2("*", a, |x, y| x * y), "multiplication"),
    pointwise("/", 2, |a| num2("/", a, |x, y| x / y), "division; x/0 is +-infinity"),
    pointwise("neg", 1, |a| Ok(Value::Num(-num("neg", &a[0])?)), "negation, also written -x"),
    pointwise("abs", 1, |a| Ok(Value::Num(num("abs", &a[0])?.abs())), "absolute value"),
    pointwise("floor", 1, |a| Ok(Value::Num(num("floor", &a[0])?.floor())), "round toward -infinity"),
    pointwise("sqrt", 1, |a| Ok(Value::Num(num("sqrt", &a[0])?.sqrt())), "square root"),
    pointwise("mod", 2, |a| num2("mod", a, f64::rem_euclid), "euclidean remainder, result in [0, |b|)"),
    pointwise("min", 2, |a| min2(&a[0], &a[1], Ordering::Less), "smaller of two numbers (NaN loses) or tuples (lexicographic)"),
    pointwise("max", 2, |a| min2(&a[0], &a[1], Ordering::Greater), "larger of two numbers (NaN loses) or tuples (lexicographic)"),
    pointwise("<", 2, |a| compare("<", a, |o| o == Ordering::Less), "less than; false if either side is NaN"),
    pointwise("<=", 2, |a| compare("<=", a, |o| o != Ordering::Greater), "less or equal"),
    pointwise(">", 2, |a| compare(">", a, |o| o == Ordering::Greater), "greater than"),
    pointwise(">=", 2, |a| compare(">=", a, |o| o != Ordering::Less), "greater or equal"),
    pointwise("==", 2, |a| Ok(Value::Bool(a[0] == a[1])), "structural equality, exact on numbers"),
    pointwise("!=", 2, |a| Ok(Value::Bool(a[0] != a[1])), "negated structural equality"),
    pointwise("approxEq", 3, approx_eq, "approxEq(x, y, eps): |x - y| <= eps"),
    pointwise("!", 1, |a| Ok(Value::Bool(!boolean("!", &a[0])?)), "logical not"),
    pointwise("&&", 2, |a| Ok(Value::Bool(boolean("&&", &a[0])? && boolean("&&", &a[1])?)), "logical and (both sides evaluated)"),
    pointwise("||", 2, |a| Ok(Value::Bool(boolean("||", &a[0])? || boolean("||", &a[1])?)), "logical or (both sides evaluated)"),
    pointwise("mux", 3, mux, "mux(b, t, f): t where b is true, f elsewhere; both already evaluated"),
    Builtin { name: "tuple", arity: Arity::Variadic, kind: Kind::Pointwise(|a| Ok(Value::tuple(a.iter().cloned()))), summary: "tuple(a, b, ...)" },
    pointwise("get", 2, get, "get(t, i): i-th element of a tuple, 0-based"),
    pointwise("size", 1, size, "number of elements of a tuple"),
    hood("minHood", min_hood, "minimum over neighbours; +infinity when there are none"),
    hood("maxHood", max_hood, "maximum over neighbours; -infinity when there are none"),
    hood("sumHood", sum_hood, "sum over neighbours; 0 when there are none"),
    hood("anyHood", any_hood, "true if any neighbour value is true"),
    hood("allHood", all_hood, "true if every neighbour value is true"),
    Builtin { name: "foldHood", arity: Arity::Fixed(3), kind: Kind::HigherOrder(fold_hood), summary: "foldHood(m, f, null): f folded over neighbour values in id order" },
    Builtin { name: "tabulate", arity: Arity::Fixed(2), kind: Kind::HigherOrder(tabulate), summary: "tabulate(n, f): tuple(f(0), ..., f(n-1))" },
    Builtin { name: "nbrRange", arity: Arity::Fixed(0), kind: Kind::Context(nbr_range), summary: "distance to each neighbour" },
    Builtin { name: "nbrId", arity: Arity::Fixed(0), kind: Kind::Context(nbr_id), summary: "id of each neighbour" },
    Builtin { name: "selfId", arity: Arity::Fixed(0), kind: Kind::Context(|ctx| Value::Num(ctx.device.0 as f64)), summary: "this device's id" },
    Builtin { name: "sense", arity: Arity::Fixed(1), kind: Kind::Sense, summary: "sense(name): local value of a sensor" },
];

pub fn all() -> &'static [Builtin] {
    REGISTRY
}

pub fn lookup(name: &str) -> Option<&'static Builtin> {
    REGISTRY.iter().find(|b| b.name == name)
}

pub fn call(builtin: &'static Builtin, inv: &mut dyn Invoke, args: Vec<Value>) -> Result<Value, Fault> {
    if let Arity::Fixed(n) = builtin.arity {
        if n != args.len() {
            return Err(Fault::Arity { function: builtin.name.to_string(), expected: n, got: args.len() });
        }
    }
    match builtin.kind {
        Kind::Pointwise(f) => lift(f, &args),
        Kind::Hood(f) => match &args[0] {
            Value::NbrMap(m) => f(m),
            other => Err(Fault::Type(format!("`{}` expects a neighbour field, got {}", builtin.name, other.type_name()))),
        },
        Kind::Context(f) => Ok(f(inv.context())),
        Kind::HigherOrder(f) => f(inv, args),
        Kind::Sense => Err(Fault::Type("`sense` expects a sensor name".into())),
    }
}

/// Applies `f` pointwise when any argument is a neighbour field.
pub fn lift(f: PointwiseFn, args: &[Value]) -> Result<Value, Fault> {
    let mut keys: Option<BTreeSet<DeviceId>> = None;
    for a in args {
        if let Value::NbrMap(m) = a {
            keys = Some(match keys {
                None => m.keys().copied().collect(),
                Some(k) => k.into_iter().filter(|d| m.contains_key(d)).collect(),
            });
        }
    }
    let Some(keys) = keys else { return f(args) };
    let mut out = NbrMap::new();
    let mut per = Vec::with_capacity(args.len());
    for d in keys {
        per.clear();
        per.extend(args.iter().map(|a| match a {
            Value::NbrMap(m) => m[&d].clone(),
            v => v.clone(),
        }));
        out.insert(d, f(&per)?);
    }
    Ok(Value::NbrMap(out))
}

fn num(op: &str, v: &Value) -> Result<f64, Fault> {
    v.as_num().ok_or_else(|| Fault::Type(format!("`{op}` expects a number, got {}", v.type_name())))
}

fn boolean(op: &str, v: &Value) -> Result<bool, Fault> {
    v.as_bool().ok_or_else(|| Fault::Type(format!("`{op}` expects a bool, got {}", v.type_name())))
}

fn num2(op: &str, a: &[Value], f: fn(f64, f64) -> f64) -> Result<Value, Fault> {
    Ok(Value::Num(f(num(op, &a[0])?, num(op, &a[1])?)))
}

/// `want == Less` gives min, `Greater` gives max. Ties keep the first argument.
fn min2(a: &Value, b: &Value, want: Ordering) -> Result<Value, Fault> {
    if let (Value::Num(x), Value::Num(y)) = (a, b) {
        return Ok(Value::Num(if want == Ordering::Less { x.min(*y) } else { x.max(*y) }));
    }
    match b.total_cmp(a) {
        Some(o) if o == want => Ok(b.clone()),
        Some(_) => Ok(a.clone()),
        None => Err(Fault::Type(format!("cannot order {} against {}", a.type_name(), b.type_name()))),
    }
}

fn compare(op: &str, a: &[Value], test: fn(Ordering) -> bool) -> Result<Value, Fault> {
    let ord = match (&a[0], &a[1]) {
        (Value::Num(x), Value::Num(y)) => x.partial_cmp(y),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        (Value::Tuple(_), Value::Tuple(_)) => lexicographic(&a[0], &a[1]),
        (x, y) => return Err(Fault::Type(format!("`{op}` cannot compare {} with {}", x.type_name(), y.type_name()))),
    };
    Ok(Value::Bool(ord.is_some_and(test)))
}

/// IEEE partial order lifted lexicographically; NaN anywhere decisive makes
/// the pair unordered.
fn lexicographic(a: &Value, b: &Value) -> Option<Ordering> {
    match (a, b) {
        (Value::Num(x), Value::Num(y)) => x.partial_cmp(y),
        (Value::Bool(x), Value::Bool(y)) => Some(x.cmp(y)),
        (Value::Tuple(xs), Value::Tuple(ys)) => {
            for (x, y) in xs.iter().zip(ys.iter()) {
                match lexicographic(x, y)? {
                    Ordering::Equal => continue,
                    o => return Some(o),
                }
            }
            Some(xs.len().cmp(&ys.len()))
        }
        _ => None,
    }
}

fn approx_eq(a: &[Value]) -> Result<Value, Fault> {
    let (x, y, eps) = (num("approxEq", &a[0])?, num("approxEq", &a[1])?, num("approxEq", &a[2])?);
    Ok(Value::Bool(x == y || (x - y).abs() <= eps))
}

fn mux(a: &[Value]) -> Result<Value, Fault> {
    match a[0] {
        Value::Bool(true) => Ok(a[1].clone()),
        Value::Bool(false) => Ok(a[2].clone()),
        ref other => Err(Fault::Type(format!("`mux` selector must be a bool, got {}", other.type_name()))),
    }
}

fn index(op: &str, v: &Value, len: usize) -> Result<usize, Fault> {
    let i = num(op, v)?;
    if i.fract() != 0.0 || i < 0.0 || i >= len as f64 {
        return Err(Fault::Type(format!("`{op}` index {i} out of range for length {len}")));
    }
    Ok(i as usize)
}

fn get(a: &[Value]) -> Result<Value, Fault> {
    match &a[0] {
        Value::Tuple(items) => Ok(items[index("get", &a[1], items.len())?].clone()),
        other => Err(Fault::Type(format!("`get` expects a tuple, got {}", other.type_name()))),
    }
}

fn size(a: &[Value]) -> Result<Value, Fault> {
    match &a[0] {
        Value::Tuple(items) => Ok(Value::Num(items.len() as f64)),
        other => Err(Fault::Type(format!("`size` expects a tuple, got {}", other.type_name()))),
    }
}

fn extreme_hood(m: &NbrMap, want: Ordering, empty: f64) -> Result<Value, Fault> {
    let mut acc: Option<Value> = None;
    for v in m.values() {
        acc = Some(match acc {
            None => {
                if !matches!(v, Value::Num(_) | Value::Tuple(_)) {
                    return Err(Fault::Type(format!("cannot order a {}", v.type_name())));
                }
                v.clone()
            }
            Some(a) => min2(&a, v, want)?,
        });
    }
    Ok(acc.unwrap_or(Value::Num(empty)))
}

fn min_hood(m: &NbrMap) -> Result<Value, Fault> {
    extreme_hood(m, Ordering::Less, f64::INFINITY)
}

fn max_hood(m: &NbrMap) -> Result<Value, Fault> {
    extreme_hood(m, Ordering::Greater, f64::NEG_INFINITY)
}

fn sum_hood(m: &NbrMap) -> Result<Value, Fault> {
    m.values().try_fold(0.0, |acc, v| Ok(acc + num("sumHood", v)?)).map(Value::Num)
}

fn any_hood(m: &NbrMap) -> Result<Value, Fault> {
    m.values().try_fold(false, |acc, v| Ok(boolean("anyHood", v)? || acc)).map(Value::Bool)
}

fn all_hood(m: &NbrMap) -> Result<Value, Fault> {
    m.values().try_fold(true, |acc, v| Ok(boolean("allHood", v)? && acc)).map(Value::Bool)
}

fn fold_hood(inv: &mut dyn Invoke, args: Vec<Value>) -> Result<Value, Fault> {
    let mut args = args.into_iter();
    let (m, f, null) = (args.next().unwrap(), args.next().unwrap(), args.next().unwrap());
    let Value::NbrMap(m) = m else {
        return Err(Fault::Type(format!("`foldHood` expects a neighbour field, got {}", m.type_name())));
    };
    m.into_values().try_fold(null, |acc, v| inv.invoke(&f, vec![acc, v]))
}

fn tabulate(inv: &mut dyn Invoke, args: Vec<Value>) -> Result<Value, Fault> {
    let n = num("tabulate", &args[0])?;
    if n.fract() != 0.0 || !(0.0..=65536.0).contains(&n) {
        return Err(Fault::Type(format!("`tabulate` length must be a small non-negative integer, got {n}")));
    }
    let items = (0..n as usize).map(|i| inv.invoke(&args[1], vec![Value::Num(i as f64)])).collect::<Result<Vec<_>, _>>()?;
    Ok(Value::tuple(items))
}

fn nbr_range(ctx: &RoundContext<'_>) -> Value {
    Value::NbrMap(ctx.nbr_ranges.iter().map(|(d, r)| (*d, Value::Num(*r))).collect())
}

fn nbr_id(ctx: &RoundContext<'_>) -> Value {
    Value::NbrMap(ctx.nbr_exports.keys().map(|d| (*d, Value::Num(d.0 as f64))).collect())
}
