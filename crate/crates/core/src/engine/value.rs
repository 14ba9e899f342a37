use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::builtins::Builtin;
use crate::lang::{format_number, Def, Lambda, Name};

/// Dense device identifier, assigned at creation and never reused.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DeviceId(pub u32);

impl fmt::Display for DeviceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Neighbour-indexed values produced by `nbr` and context sensors. Keys are
/// kept sorted so every fold over a map visits neighbours in id order.
pub type NbrMap = BTreeMap<DeviceId, Value>;

#[derive(Clone, Default)]
pub struct Env(Option<Arc<Frame>>);

struct Frame {
    name: Name,
    value: Value,
    parent: Env,
}

impl Env {
    pub fn bind(&self, name: Name, value: Value) -> Env {
        Env(Some(Arc::new(Frame { name, value, parent: self.clone() })))
    }

    pub fn lookup(&self, name: &str) -> Option<&Value> {
        let mut cur = self.0.as_ref();
        while let Some(frame) = cur {
            if &*frame.name == name {
                return Some(&frame.value);
            }
            cur = frame.parent.0.as_ref();
        }
        None
    }
}

pub struct Closure {
    pub lambda: Arc<Lambda>,
    pub env: Env,
}

#[derive(Clone)]
pub enum Function {
    Builtin(&'static Builtin),
    Closure(Arc<Closure>),
    Def(Arc<Def>),
}

impl Function {
    /// Identity token; two functions are equal iff their tags are.
    pub fn tag(&self) -> &str {
        match self {
            Function::Builtin(b) => b.name,
            Function::Closure(c) => c.lambda.tag.as_str(),
            Function::Def(d) => &d.name,
        }
    }

    pub fn arity(&self) -> Option<usize> {
        match self {
            Function::Builtin(b) => b.arity.fixed(),
            Function::Closure(c) => Some(c.lambda.params.len()),
            Function::Def(d) => Some(d.params.len()),
        }
    }
}

impl PartialEq for Function {
    fn eq(&self, other: &Self) -> bool {
        self.tag() == other.tag()
    }
}

impl fmt::Debug for Function {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<fn {}>", self.tag())
    }
}

#[derive(Clone, Debug)]
pub enum Value {
    Bool(bool),
    Num(f64),
    Tuple(Arc<[Value]>),
    Func(Function),
    /// Engine-internal; never stored in an export or returned from a round.
    NbrMap(NbrMap),
}

impl PartialEq for Value {
    /// Structural equality with IEEE semantics on numbers (NaN is unequal to
    /// everything) and tag equality on functions.
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Bool(a), Value::Bool(b)) => a == b,
            (Value::Num(a), Value::Num(b)) => a == b,
            (Value::Tuple(a), Value::Tuple(b)) => a == b,
            (Value::Func(a), Value::Func(b)) => a == b,
            (Value::NbrMap(a), Value::NbrMap(b)) => a == b,
            _ => false,
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Num(n)
    }
}

impl From<bool> for Value {
    fn from(b: bool) -> Self {
        Value::Bool(b)
    }
}

impl Value {
    pub fn tuple(items: impl IntoIterator<Item = Value>) -> Value {
        Value::Tuple(items.into_iter().collect())
    }

    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Bool(_) => "bool",
            Value::Num(_) => "number",
            Value::Tuple(_) => "tuple",
            Value::Func(_) => "function",
            Value::NbrMap(_) => "neighbour field",
        }
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn contains_nbr_map(&self) -> bool {
        match self {
            Value::NbrMap(_) => true,
            Value::Tuple(items) => items.iter().any(Value::contains_nbr_map),
            _ => false,
        }
    }

    /// Bit-for-bit equality; NaN equals NaN with the same payload.
    pub fn identical(&self, other: &Value) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.to_bits() == b.to_bits(),
            (Value::Tuple(a), Value::Tuple(b)) => a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.identical(y)),
            (Value::NbrMap(a), Value::NbrMap(b)) => {
                a.len() == b.len() && a.iter().zip(b.iter()).all(|((ka, va), (kb, vb))| ka == kb && va.identical(vb))
            }
            _ => self == other,
        }
    }

    /// Numeric leaves within `eps` of each other, everything else identical.
    /// Infinities compare equal only to themselves.
    pub fn within(&self, other: &Value, eps: f64) -> bool {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => a.to_bits() == b.to_bits() || (a - b).abs() <= eps,
            (Value::Tuple(a), Value::Tuple(b)) => a.len() == b.len() && a.iter().zip(b.iter()).all(|(x, y)| x.within(y, eps)),
            _ => self.identical(other),
        }
    }

    /// Largest absolute numeric difference between two same-shaped values,
    /// `None` when shapes or non-numeric leaves differ.
    pub fn distance(&self, other: &Value) -> Option<f64> {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) if a.to_bits() == b.to_bits() => Some(0.0),
            (Value::Num(a), Value::Num(b)) => Some((a - b).abs()),
            (Value::Tuple(a), Value::Tuple(b)) if a.len() == b.len() => {
                a.iter().zip(b.iter()).try_fold(0.0f64, |acc, (x, y)| x.distance(y).map(|d| acc.max(d)))
            }
            _ if self.identical(other) => Some(0.0),
            _ => None,
        }
    }

    /// Total order used by `min`/`max` on tuples and by lexicographic hood
    /// folds: numbers by IEEE total order, `false < true`, tuples
    /// lexicographically. `None` for mismatched or unordered kinds.
    pub fn total_cmp(&self, other: &Value) -> Option<Ordering> {
        match (self, other) {
            (Value::Num(a), Value::Num(b)) => Some(a.total_cmp(b)),
            (Value::Bool(a), Value::Bool(b)) => Some(a.cmp(b)),
            (Value::Tuple(a), Value::Tuple(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    match x.total_cmp(y)? {
                        Ordering::Equal => continue,
                        ord => return Some(ord),
                    }
                }
                Some(a.len().cmp(&b.len()))
            }
            _ => None,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        use serde_json::Value as J;
        match self {
            Value::Bool(b) => J::Bool(*b),
            Value::Num(n) if n.is_finite() => serde_json::Number::from_f64(*n).map(J::Number).unwrap_or(J::Null),
            Value::Num(n) => J::String(format_number(*n)),
            Value::Tuple(items) => J::Array(items.iter().map(Value::to_json).collect()),
            Value::Func(f) => serde_json::json!({ "fn": f.tag() }),
            Value::NbrMap(m) => J::Object(m.iter().map(|(k, v)| (k.to_string(), v.to_json())).collect()),
        }
    }

    /// Sensor values in scenario files: booleans, numbers, the strings
    /// `"infinity"`, `"-infinity"`, `"nan"`, and arrays as tuples.
    pub fn from_json(json: &serde_json::Value) -> Result<Value, String> {
        use serde_json::Value as J;
        match json {
            J::Bool(b) => Ok(Value::Bool(*b)),
            J::Number(n) => n.as_f64().map(Value::Num).ok_or_else(|| format!("number {n} is not representable")),
            J::String(s) => match s.as_str() {
                "infinity" | "inf" => Ok(Value::Num(f64::INFINITY)),
                "-infinity" | "-inf" => Ok(Value::Num(f64::NEG_INFINITY)),
                "nan" | "NaN" => Ok(Value::Num(f64::NAN)),
                other => Err(format!("unsupported string value `{other}`")),
            },
            J::Array(items) => Ok(Value::tuple(items.iter().map(Value::from_json).collect::<Result<Vec<_>, _>>()?)),
            other => Err(format!("unsupported value `{other}`")),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bool(b) => write!(f, "{b}"),
            Value::Num(n) if n.is_nan() => f.write_str("nan"),
            Value::Num(n) => f.write_str(&format_number(*n)),
            Value::Tuple(items) => {
                f.write_str("[")?;
                for (i, v) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{v}")?;
                }
                f.write_str("]")
            }
            Value::Func(func) => write!(f, "<fn {}>", func.tag()),
            Value::NbrMap(m) => {
                f.write_str("{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                f.write_str("}")
            }
        }
    }
}
