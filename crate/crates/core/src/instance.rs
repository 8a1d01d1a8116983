//! Agents, path items, and exact valuations over connected bundles.
//!
//! Items are numbered `1..=m` along the path. Agents are zero-based in the
//! Rust API and one-based in JSON documents.

use std::fmt;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rational::{JsonRational, Value};

/// A connected set of path items: either empty or `lo..=hi`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Interval {
    lo: usize,
    hi: usize,
}

impl Interval {
    /// The empty bundle. It counts as connected.
    pub const EMPTY: Interval = Interval { lo: 1, hi: 0 };

    /// `lo..=hi`, or [`Interval::EMPTY`] when `lo > hi`.
    pub fn new(lo: usize, hi: usize) -> Interval {
        if lo > hi {
            Interval::EMPTY
        } else {
            Interval { lo, hi }
        }
    }

    pub fn singleton(item: usize) -> Interval {
        Interval { lo: item, hi: item }
    }

    pub fn is_empty(&self) -> bool {
        self.lo > self.hi
    }

    /// `(lo, hi)` for a non-empty interval.
    pub fn bounds(&self) -> Option<(usize, usize)> {
        (!self.is_empty()).then_some((self.lo, self.hi))
    }

    pub fn len(&self) -> usize {
        if self.is_empty() {
            0
        } else {
            self.hi - self.lo + 1
        }
    }

    pub fn contains(&self, item: usize) -> bool {
        self.lo <= item && item <= self.hi
    }

    pub fn items(&self) -> std::ops::RangeInclusive<usize> {
        if self.is_empty() {
            #[allow(clippy::reversed_empty_ranges)]
            {
                1..=0
            }
        } else {
            self.lo..=self.hi
        }
    }

    pub fn intersect(&self, other: &Interval) -> Interval {
        if self.is_empty() || other.is_empty() {
            return Interval::EMPTY;
        }
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.is_empty() || (other.contains(self.lo) && other.contains(self.hi))
    }

    /// Smallest interval containing `self` and `item`.
    pub fn hull_with(&self, item: usize) -> Interval {
        if self.is_empty() {
            Interval::singleton(item)
        } else {
            Interval { lo: self.lo.min(item), hi: self.hi.max(item) }
        }
    }

    /// Removes `item` if it is an end of the interval; other items leave it unchanged.
    pub fn without_end(&self, item: usize) -> Interval {
        match self.bounds() {
            Some((lo, hi)) if item == lo => Interval::new(lo + 1, hi),
            Some((lo, hi)) if item == hi => Interval::new(lo, hi - 1),
            _ => *self,
        }
    }
}

impl fmt::Debug for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.bounds() {
            None => f.write_str("∅"),
            Some((lo, hi)) if lo == hi => write!(f, "{{{lo}}}"),
            Some((lo, hi)) => write!(f, "{{{lo}..{hi}}}"),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalDoc {
    lo: usize,
    hi: usize,
}

impl Serialize for Interval {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.bounds().map(|(lo, hi)| IntervalDoc { lo, hi }).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match Option::<IntervalDoc>::deserialize(d)? {
            None => Ok(Interval::EMPTY),
            Some(IntervalDoc { lo, hi }) if lo >= 1 && lo <= hi => Ok(Interval { lo, hi }),
            Some(IntervalDoc { lo, hi }) => Err(serde::de::Error::custom(format!(
                "interval lo={lo} hi={hi} is not a non-empty 1-based range; use null for the empty bundle"
            ))),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum InstanceError {
    #[error("instance needs at least one agent")]
    NoAgents,
    #[error("instance needs at least one item")]
    NoItems,
    #[error("agent {agent} has {found} item values, expected {expected}")]
    RowLength { agent: usize, found: usize, expected: usize },
    #[error("agent {0} out of range")]
    AgentOutOfRange(usize),
    #[error("interval {0:?} is outside the path of {1} items")]
    IntervalOutOfRange(Interval, usize),
    #[error("duplicate table entry for agent {agent} on {interval:?}")]
    DuplicateEntry { agent: usize, interval: Interval },
    #[error("table is missing the value of agent {agent} on {interval:?}")]
    MissingEntry { agent: usize, interval: Interval },
    #[error("declared n={declared} but valuations describe {found} agents")]
    AgentCount { declared: usize, found: usize },
    #[error("malformed instance document: {0}")]
    Json(String),
}

/// A table entry `v_agent(lo..=hi) = value`.
#[derive(Clone, Debug, PartialEq)]
pub struct TableEntry {
    pub agent: usize,
    pub interval: Interval,
    pub value: Value,
}

/// How valuations were supplied.
#[derive(Clone, Debug, PartialEq)]
pub enum ValuationSpec {
    /// `values[agent][item - 1]`; a bundle is worth the sum of its items.
    Additive(Vec<Vec<Value>>),
    /// An explicit value for every agent and every non-empty interval.
    Table(Vec<TableEntry>),
}

/// An immutable fair-division instance with dense valuation tables.
#[derive(Clone, Debug)]
pub struct Instance {
    agents: usize,
    items: usize,
    // values[agent][(lo - 1) * items + (hi - 1)] for lo <= hi
    values: Vec<Vec<Value>>,
    spec: ValuationSpec,
    zero: Value,
}

impl Instance {
    pub fn additive(values: Vec<Vec<Value>>) -> Result<Instance, InstanceError> {
        let agents = values.len();
        if agents == 0 {
            return Err(InstanceError::NoAgents);
        }
        let items = values[0].len();
        if items == 0 {
            return Err(InstanceError::NoItems);
        }
        for (agent, row) in values.iter().enumerate() {
            if row.len() != items {
                return Err(InstanceError::RowLength { agent, found: row.len(), expected: items });
            }
        }
        let mut dense = Vec::with_capacity(agents);
        for row in &values {
            let mut table = vec![Value::zero(); items * items];
            for lo in 1..=items {
                let mut acc = Value::zero();
                for hi in lo..=items {
                    acc += &row[hi - 1];
                    table[(lo - 1) * items + (hi - 1)] = acc.clone();
                }
            }
            dense.push(table);
        }
        Ok(Instance { agents, items, values: dense, spec: ValuationSpec::Additive(values), zero: Value::zero() })
    }

    /// Convenience constructor for integer item values.
    pub fn additive_ints(values: &[Vec<i64>]) -> Result<Instance, InstanceError> {
        Instance::additive(values.iter().map(|row| row.iter().map(|&v| crate::rational::int(v)).collect()).collect())
    }

    pub fn from_table(agents: usize, items: usize, entries: Vec<TableEntry>) -> Result<Instance, InstanceError> {
        if agents == 0 {
            return Err(InstanceError::NoAgents);
        }
        if items == 0 {
            return Err(InstanceError::NoItems);
        }
        let mut dense: Vec<Vec<Option<Value>>> = vec![vec![None; items * items]; agents];
        for e in &entries {
            if e.agent >= agents {
                return Err(InstanceError::AgentOutOfRange(e.agent));
            }
            let (lo, hi) = match e.interval.bounds() {
                Some((lo, hi)) if lo >= 1 && hi <= items => (lo, hi),
                _ => return Err(InstanceError::IntervalOutOfRange(e.interval, items)),
            };
            let slot = &mut dense[e.agent][(lo - 1) * items + (hi - 1)];
            if slot.is_some() {
                return Err(InstanceError::DuplicateEntry { agent: e.agent, interval: e.interval });
            }
            *slot = Some(e.value.clone());
        }
        let mut values = Vec::with_capacity(agents);
        for (agent, row) in dense.into_iter().enumerate() {
            let mut table = Vec::with_capacity(items * items);
            for (idx, slot) in row.into_iter().enumerate() {
                let (lo, hi) = (idx / items + 1, idx % items + 1);
                match slot {
                    Some(v) => table.push(v),
                    None if lo > hi => table.push(Value::zero()),
                    None => return Err(InstanceError::MissingEntry { agent, interval: Interval::new(lo, hi) }),
                }
            }
            values.push(table);
        }
        Ok(Instance { agents, items, values, spec: ValuationSpec::Table(entries), zero: Value::zero() })
    }

    pub fn agents(&self) -> usize {
        self.agents
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn spec(&self) -> &ValuationSpec {
        &self.spec
    }

    /// `v_agent(interval)`.
    ///
    /// Panics if the agent or the interval is out of range; see [`Instance::try_value`].
    pub fn value(&self, agent: usize, interval: Interval) -> &Value {
        match interval.bounds() {
            None => &self.zero,
            Some((lo, hi)) => &self.values[agent][(lo - 1) * self.items + (hi - 1)],
        }
    }

    pub fn try_value(&self, agent: usize, interval: Interval) -> Result<&Value, InstanceError> {
        self.check(agent, interval)?;
        Ok(self.value(agent, interval))
    }

    /// The up-to-one valuation: the smaller value left after dropping either
    /// end item, and zero for the empty bundle.
    pub fn up_to_one_value(&self, agent: usize, interval: Interval) -> &Value {
        match interval.bounds() {
            None => &self.zero,
            Some((lo, hi)) => {
                let drop_left = self.value(agent, Interval::new(lo + 1, hi));
                let drop_right = self.value(agent, Interval::new(lo, hi - 1));
                drop_left.min(drop_right)
            }
        }
    }

    pub fn try_up_to_one_value(&self, agent: usize, interval: Interval) -> Result<&Value, InstanceError> {
        self.check(agent, interval)?;
        Ok(self.up_to_one_value(agent, interval))
    }

    fn check(&self, agent: usize, interval: Interval) -> Result<(), InstanceError> {
        if agent >= self.agents {
            return Err(InstanceError::AgentOutOfRange(agent));
        }
        if let Some((lo, hi)) = interval.bounds() {
            if lo == 0 || hi > self.items {
                return Err(InstanceError::IntervalOutOfRange(interval, self.items));
            }
        }
        Ok(())
    }

    /// Checks non-negativity of additive item values, or exhaustive
    /// monotonicity of a table (including `v(∅) = 0 <= v({y})`).
    pub fn validate(&self) -> ValidationReport {
        let mut violations = Vec::new();
        match &self.spec {
            ValuationSpec::Additive(rows) => {
                for (agent, row) in rows.iter().enumerate() {
                    for (idx, v) in row.iter().enumerate() {
                        if v.is_negative() {
                            violations.push(Violation::NegativeItemValue { agent, item: idx + 1 });
                        }
                    }
                }
            }
            ValuationSpec::Table(_) => {
                let m = self.items;
                for agent in 0..self.agents {
                    for item in 1..=m {
                        if self.value(agent, Interval::singleton(item)).is_negative() {
                            violations.push(Violation::NotMonotone {
                                agent,
                                smaller: Interval::EMPTY,
                                larger: Interval::singleton(item),
                            });
                        }
                    }
                    for lo in 1..=m {
                        for hi in lo..=m {
                            let here = Interval::new(lo, hi);
                            let base = self.value(agent, here);
                            let mut extensions = Vec::with_capacity(2);
                            if lo > 1 {
                                extensions.push(Interval::new(lo - 1, hi));
                            }
                            if hi < m {
                                extensions.push(Interval::new(lo, hi + 1));
                            }
                            for larger in extensions {
                                if self.value(agent, larger) < base {
                                    violations.push(Violation::NotMonotone { agent, smaller: here, larger });
                                }
                            }
                        }
                    }
                }
            }
        }
        ValidationReport { violations }
    }
}

/// A single failed validation check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    NegativeItemValue { agent: usize, item: usize },
    NotMonotone { agent: usize, smaller: Interval, larger: Interval },
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            return f.write_str("valid");
        }
        write!(f, "{} violation(s):", self.violations.len())?;
        for v in &self.violations {
            match v {
                Violation::NegativeItemValue { agent, item } => {
                    write!(f, " agent {} has negative value on item {item};", agent + 1)?
                }
                Violation::NotMonotone { agent, smaller, larger } => {
                    write!(f, " agent {} values {larger:?} below {smaller:?};", agent + 1)?
                }
            }
        }
        Ok(())
    }
}

// JSON document ------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    n: usize,
    m: usize,
    valuations: ValuationsDoc,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum ValuationsDoc {
    Additive { values: Vec<Vec<JsonRational>> },
    Table { entries: Vec<EntryDoc> },
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDoc {
    agent: usize,
    lo: usize,
    hi: usize,
    value: JsonRational,
}

impl Instance {
    /// Parses the JSON instance document (unknown fields are rejected).
    pub fn from_json(text: &str) -> Result<Instance, InstanceError> {
        let doc: InstanceDoc = serde_json::from_str(text).map_err(|e| InstanceError::Json(e.to_string()))?;
        if doc.n == 0 {
            return Err(InstanceError::NoAgents);
        }
        if doc.m == 0 {
            return Err(InstanceError::NoItems);
        }
        match doc.valuations {
            ValuationsDoc::Additive { values } => {
                if values.len() != doc.n {
                    return Err(InstanceError::AgentCount { declared: doc.n, found: values.len() });
                }
                for (agent, row) in values.iter().enumerate() {
                    if row.len() != doc.m {
                        return Err(InstanceError::RowLength { agent, found: row.len(), expected: doc.m });
                    }
                }
                Instance::additive(values.into_iter().map(|r| r.into_iter().map(|v| v.0).collect()).collect())
            }
            ValuationsDoc::Table { entries } => {
                let mut parsed = Vec::with_capacity(entries.len());
                for e in entries {
                    if e.agent == 0 || e.agent > doc.n {
                        return Err(InstanceError::AgentOutOfRange(e.agent));
                    }
                    if e.lo == 0 || e.lo > e.hi || e.hi > doc.m {
                        return Err(InstanceError::IntervalOutOfRange(Interval::new(e.lo, e.hi), doc.m));
                    }
                    parsed.push(TableEntry {
                        agent: e.agent - 1,
                        interval: Interval::new(e.lo, e.hi),
                        value: e.value.0,
                    });
                }
                Instance::from_table(doc.n, doc.m, parsed)
            }
        }
    }

    pub fn to_json(&self) -> String {
        let valuations = match &self.spec {
            ValuationSpec::Additive(rows) => ValuationsDoc::Additive {
                values: rows.iter().map(|r| r.iter().cloned().map(JsonRational).collect()).collect(),
            },
            ValuationSpec::Table(entries) => ValuationsDoc::Table {
                entries: entries
                    .iter()
                    .map(|e| {
                        let (lo, hi) = e.interval.bounds().expect("table entries are non-empty");
                        EntryDoc { agent: e.agent + 1, lo, hi, value: JsonRational(e.value.clone()) }
                    })
                    .collect(),
            },
        };
        let doc = InstanceDoc { n: self.agents, m: self.items, valuations };
        serde_json::to_string(&doc).expect("instance serializes")
    }

    /// Same items and valuations, but agent `agent` gets new additive item values.
    /// Only defined for additive instances.
    pub fn with_additive_row(&self, agent: usize, row: Vec<Value>) -> Result<Instance, InstanceError> {
        match &self.spec {
            ValuationSpec::Additive(rows) => {
                let mut rows = rows.clone();
                if agent >= rows.len() {
                    return Err(InstanceError::AgentOutOfRange(agent));
                }
                rows[agent] = row;
                Instance::additive(rows)
            }
            ValuationSpec::Table(_) => Err(InstanceError::Json("not an additive instance".into())),
        }
    }
}
