use std::borrow::Borrow;
use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use super::value::Value;
use crate::lang::Tag;

/// One alignment key: the slot of a child node, or the identity of an
/// applied function.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PathKey {
    Slot(u16),
    Tag(Tag),
}

impl fmt::Display for PathKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathKey::Slot(s) => write!(f, "{s}"),
            PathKey::Tag(t) => write!(f, "@{t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Path(pub Vec<PathKey>);

impl Borrow<[PathKey]> for Path {
    fn borrow(&self) -> &[PathKey] {
        &self.0
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("/")?;
        for (i, k) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("/")?;
            }
            write!(f, "{k}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotKind {
    Rep,
    Nbr,
}

/// Path-indexed values a device publishes at the end of a round: `rep`
/// state and `nbr` payloads. Never contains neighbour fields.
#[derive(Debug, Clone, Default)]
pub struct Export {
    entries: BTreeMap<Path, (SlotKind, Value)>,
}

impl Export {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns false (and leaves the export untouched) if `path` is taken.
    pub fn insert(&mut self, path: Path, kind: SlotKind, value: Value) -> bool {
        debug_assert!(!value.contains_nbr_map());
        if self.entries.contains_key(&path) {
            return false;
        }
        self.entries.insert(path, (kind, value));
        true
    }

    pub fn get(&self, path: &[PathKey]) -> Option<&Value> {
        self.entries.get(path).map(|(_, v)| v)
    }

    pub fn get_kind(&self, path: &[PathKey], kind: SlotKind) -> Option<&Value> {
        match self.entries.get(path) {
            Some((k, v)) if *k == kind => Some(v),
            _ => None,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Path, SlotKind, &Value)> {
        self.entries.iter().map(|(p, (k, v))| (p, *k, v))
    }

    pub fn paths(&self) -> impl Iterator<Item = &Path> {
        self.entries.keys()
    }

    /// Rewrites every `rep` entry in place.
    pub fn map_rep_states(&mut self, mut f: impl FnMut(&Path, &Value) -> Value) {
        for (path, (kind, value)) in self.entries.iter_mut() {
            if *kind == SlotKind::Rep {
                *value = f(path, value);
            }
        }
    }

    /// Stable 64-bit content digest (first 8 bytes of SHA-256 over a
    /// canonical rendering with bit-exact numbers).
    pub fn digest(&self) -> u64 {
        let mut hasher = Sha256::new();
        for (path, (kind, value)) in &self.entries {
            hasher.update(path.to_string().as_bytes());
            hasher.update(if *kind == SlotKind::Rep { b"=r:" } else { b"=n:" });
            hash_value(&mut hasher, value);
            hasher.update(b";");
        }
        let bytes = hasher.finalize();
        u64::from_be_bytes(bytes[..8].try_into().expect("sha256 has 32 bytes"))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::Value::Object(
            self.entries
                .iter()
                .map(|(p, (k, v))| {
                    let kind = if *k == SlotKind::Rep { "rep" } else { "nbr" };
                    (p.to_string(), serde_json::json!({ "kind": kind, "value": v.to_json() }))
                })
                .collect(),
        )
    }
}

fn hash_value(hasher: &mut Sha256, value: &Value) {
    match value {
        Value::Bool(b) => hasher.update(if *b { b"T" } else { b"F" }),
        Value::Num(n) => {
            hasher.update(b"N");
            hasher.update(n.to_bits().to_be_bytes());
        }
        Value::Tuple(items) => {
            hasher.update(b"(");
            for v in items.iter() {
                hash_value(hasher, v);
            }
            hasher.update(b")");
        }
        Value::Func(f) => {
            hasher.update(b"<");
            hasher.update(f.tag().as_bytes());
            hasher.update(b">");
        }
        Value::NbrMap(_) => unreachable!("neighbour fields are never exported"),
    }
}
