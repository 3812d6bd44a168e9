//! Schemaless metadata attached to every level of the corpus hierarchy.
//!
//! Integers and floats are kept as distinct variants so that a value written
//! as `3` never comes back as `3.0` (or the reverse) after a save/load cycle.

use std::collections::BTreeMap;
use std::fmt;

use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::ser::{Error as _, SerializeMap, SerializeSeq};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Debug, Clone, PartialEq, Default)]
pub enum MetaValue {
    #[default]
    Null,
    Bool(bool),
    Int(i64),
    Float(f64),
    Str(String),
    List(Vec<MetaValue>),
    Map(BTreeMap<String, MetaValue>),
}

impl MetaValue {
    pub fn is_null(&self) -> bool {
        matches!(self, MetaValue::Null)
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            MetaValue::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            MetaValue::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Numeric view of either number variant.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            MetaValue::Int(i) => Some(*i as f64),
            MetaValue::Float(f) => Some(*f),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            MetaValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[MetaValue]> {
        match self {
            MetaValue::List(l) => Some(l),
            _ => None,
        }
    }

    pub fn as_map(&self) -> Option<&BTreeMap<String, MetaValue>> {
        match self {
            MetaValue::Map(m) => Some(m),
            _ => None,
        }
    }

    /// Scalar rendering used by `key=value` filters: strings bare, everything
    /// else as its JSON text.
    pub fn render(&self) -> String {
        match self {
            MetaValue::Str(s) => s.clone(),
            other => serde_json::to_string(other).unwrap_or_default(),
        }
    }

    /// True when every float anywhere in the value is finite.
    pub fn is_finite(&self) -> bool {
        match self {
            MetaValue::Float(f) => f.is_finite(),
            MetaValue::List(l) => l.iter().all(MetaValue::is_finite),
            MetaValue::Map(m) => m.values().all(MetaValue::is_finite),
            _ => true,
        }
    }
}

impl From<bool> for MetaValue {
    fn from(b: bool) -> Self {
        MetaValue::Bool(b)
    }
}

impl From<i64> for MetaValue {
    fn from(i: i64) -> Self {
        MetaValue::Int(i)
    }
}

impl From<i32> for MetaValue {
    fn from(i: i32) -> Self {
        MetaValue::Int(i64::from(i))
    }
}

impl From<usize> for MetaValue {
    fn from(n: usize) -> Self {
        MetaValue::Int(n as i64)
    }
}

impl From<f64> for MetaValue {
    fn from(f: f64) -> Self {
        MetaValue::Float(f)
    }
}

impl From<&str> for MetaValue {
    fn from(s: &str) -> Self {
        MetaValue::Str(s.to_owned())
    }
}

impl From<String> for MetaValue {
    fn from(s: String) -> Self {
        MetaValue::Str(s)
    }
}

impl<T: Into<MetaValue>> From<Vec<T>> for MetaValue {
    fn from(v: Vec<T>) -> Self {
        MetaValue::List(v.into_iter().map(Into::into).collect())
    }
}

impl From<BTreeMap<String, MetaValue>> for MetaValue {
    fn from(m: BTreeMap<String, MetaValue>) -> Self {
        MetaValue::Map(m)
    }
}

impl From<MetaTable> for MetaValue {
    fn from(t: MetaTable) -> Self {
        MetaValue::Map(t.0)
    }
}

impl<T: Into<MetaValue>> From<Option<T>> for MetaValue {
    fn from(o: Option<T>) -> Self {
        o.map_or(MetaValue::Null, Into::into)
    }
}

impl Serialize for MetaValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            MetaValue::Null => s.serialize_unit(),
            MetaValue::Bool(b) => s.serialize_bool(*b),
            MetaValue::Int(i) => s.serialize_i64(*i),
            MetaValue::Float(f) if !f.is_finite() => {
                Err(S::Error::custom(format!("non-finite metadata number {f}")))
            }
            MetaValue::Float(f) => s.serialize_f64(*f),
            MetaValue::Str(v) => s.serialize_str(v),
            MetaValue::List(l) => {
                let mut seq = s.serialize_seq(Some(l.len()))?;
                for v in l {
                    seq.serialize_element(v)?;
                }
                seq.end()
            }
            MetaValue::Map(m) => {
                let mut map = s.serialize_map(Some(m.len()))?;
                for (k, v) in m {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

struct MetaVisitor;

impl<'de> Visitor<'de> for MetaVisitor {
    type Value = MetaValue;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a JSON value")
    }

    fn visit_unit<E>(self) -> Result<MetaValue, E> {
        Ok(MetaValue::Null)
    }

    fn visit_none<E>(self) -> Result<MetaValue, E> {
        Ok(MetaValue::Null)
    }

    fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<MetaValue, D::Error> {
        MetaValue::deserialize(d)
    }

    fn visit_bool<E>(self, b: bool) -> Result<MetaValue, E> {
        Ok(MetaValue::Bool(b))
    }

    fn visit_i64<E>(self, i: i64) -> Result<MetaValue, E> {
        Ok(MetaValue::Int(i))
    }

    fn visit_u64<E>(self, u: u64) -> Result<MetaValue, E> {
        Ok(i64::try_from(u).map_or(MetaValue::Float(u as f64), MetaValue::Int))
    }

    fn visit_f64<E>(self, f: f64) -> Result<MetaValue, E> {
        Ok(MetaValue::Float(f))
    }

    fn visit_str<E>(self, s: &str) -> Result<MetaValue, E> {
        Ok(MetaValue::Str(s.to_owned()))
    }

    fn visit_string<E>(self, s: String) -> Result<MetaValue, E> {
        Ok(MetaValue::Str(s))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<MetaValue, A::Error> {
        let mut out = Vec::new();
        while let Some(v) = seq.next_element()? {
            out.push(v);
        }
        Ok(MetaValue::List(out))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<MetaValue, A::Error> {
        let mut out = BTreeMap::new();
        while let Some((k, v)) = map.next_entry::<String, MetaValue>()? {
            out.insert(k, v);
        }
        Ok(MetaValue::Map(out))
    }
}

impl<'de> Deserialize<'de> for MetaValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        d.deserialize_any(MetaVisitor)
    }
}

/// Key-ordered lookup table of metadata values.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct MetaTable(BTreeMap<String, MetaValue>);

impl<'de> Deserialize<'de> for MetaTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let map = BTreeMap::<String, MetaValue>::deserialize(d)?;
        if map.contains_key("") {
            return Err(de::Error::custom("metadata keys must be non-empty"));
        }
        Ok(MetaTable(map))
    }
}

impl MetaTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, key: &str) -> Option<&MetaValue> {
        self.0.get(key)
    }

    pub fn get_mut(&mut self, key: &str) -> Option<&mut MetaValue> {
        self.0.get_mut(key)
    }

    pub fn contains_key(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    pub fn insert(
        &mut self,
        key: impl Into<String>,
        value: impl Into<MetaValue>,
    ) -> Option<MetaValue> {
        self.0.insert(key.into(), value.into())
    }

    /// Insert a transformer annotation, warning when an earlier, different
    /// value is replaced.
    pub fn annotate(&mut self, key: &str, value: impl Into<MetaValue>, owner: &str) {
        let value = value.into();
        if let Some(old) = self.0.insert(key.to_owned(), value) {
            if Some(&old) != self.0.get(key) {
                log::warn!("overwriting existing {key:?} annotation on {owner}");
            }
        }
    }

    pub fn remove(&mut self, key: &str) -> Option<MetaValue> {
        self.0.remove(key)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &MetaValue)> {
        self.0.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &String> {
        self.0.keys()
    }

    pub fn as_map(&self) -> &BTreeMap<String, MetaValue> {
        &self.0
    }

    pub fn into_inner(self) -> BTreeMap<String, MetaValue> {
        self.0
    }
}

impl From<BTreeMap<String, MetaValue>> for MetaTable {
    fn from(m: BTreeMap<String, MetaValue>) -> Self {
        MetaTable(m)
    }
}

impl<K: Into<String>, V: Into<MetaValue>> FromIterator<(K, V)> for MetaTable {
    fn from_iter<I: IntoIterator<Item = (K, V)>>(iter: I) -> Self {
        MetaTable(
            iter.into_iter()
                .map(|(k, v)| (k.into(), v.into()))
                .collect(),
        )
    }
}

impl<'a> IntoIterator for &'a MetaTable {
    type Item = (&'a String, &'a MetaValue);
    type IntoIter = std::collections::btree_map::Iter<'a, String, MetaValue>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}
