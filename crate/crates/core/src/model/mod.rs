//! Unified model for activities observed across I/O layers.
//!
//! Every observed operation becomes an [`Activity`]: which process did what,
//! when, with which attributes, and which earlier activities caused it.
//! Registries give attributes, components and operation names stable numeric
//! ids so traces stay compact and comparable across tools. A trace file
//! embeds its registries, making it self-describing.

mod line;
mod trace;

pub use line::{parse_line, render_line, LineError, ParsedLine};
pub use trace::{read_trace, write_trace, TraceError, TRACE_VERSION};

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Datatypes an attribute value can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Datatype {
    Int64,
    Uint64,
    Float64,
    #[serde(rename = "string")]
    Str,
}

impl fmt::Display for Datatype {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Datatype::Int64 => "int64",
            Datatype::Uint64 => "uint64",
            Datatype::Float64 => "float64",
            Datatype::Str => "string",
        };
        f.write_str(s)
    }
}

/// A concrete attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Int64(i64),
    Uint64(u64),
    Float64(f64),
    Str(String),
}

impl AttrValue {
    pub fn datatype(&self) -> Datatype {
        match self {
            AttrValue::Int64(_) => Datatype::Int64,
            AttrValue::Uint64(_) => Datatype::Uint64,
            AttrValue::Float64(_) => Datatype::Float64,
            AttrValue::Str(_) => Datatype::Str,
        }
    }

    /// Numeric view as `f64`, when the value is numeric.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            AttrValue::Int64(v) => Some(*v as f64),
            AttrValue::Uint64(v) => Some(*v as f64),
            AttrValue::Float64(v) => Some(*v),
            AttrValue::Str(_) => None,
        }
    }

    /// Unsigned view, when the value is a non-negative integer.
    pub fn as_u64(&self) -> Option<u64> {
        match self {
            AttrValue::Int64(v) if *v >= 0 => Some(*v as u64),
            AttrValue::Uint64(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            AttrValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl Serialize for AttrValue {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AttrValue::Int64(v) => s.serialize_i64(*v),
            AttrValue::Uint64(v) => s.serialize_u64(*v),
            AttrValue::Float64(v) => s.serialize_f64(*v),
            AttrValue::Str(v) => s.serialize_str(v),
        }
    }
}

macro_rules! id_type {
    ($(#[$doc:meta])* $name:ident) => {
        $(#[$doc])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}", self.0)
            }
        }
    };
}

id_type!(
    /// Id of a registered attribute definition.
    AttributeId
);
id_type!(
    /// Id of a registered component (an instrumented layer).
    ComponentId
);
id_type!(
    /// Component-local id of an operation kind, dense from zero.
    Ucaid
);

/// Identity of one activity: issuing process and per-process sequence number.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(from = "(u32, u64)", into = "(u32, u64)")]
pub struct ActivityId {
    pub pid: u32,
    pub seq: u64,
}

impl ActivityId {
    pub fn new(pid: u32, seq: u64) -> Self {
        ActivityId { pid, seq }
    }
}

impl From<(u32, u64)> for ActivityId {
    fn from((pid, seq): (u32, u64)) -> Self {
        ActivityId { pid, seq }
    }
}

impl From<ActivityId> for (u32, u64) {
    fn from(a: ActivityId) -> Self {
        (a.pid, a.seq)
    }
}

impl fmt::Display for ActivityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ID{}.{}", self.pid, self.seq)
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("attribute {domain}/{name} already registered as {registered}, requested {requested}")]
    DatatypeConflict {
        domain: String,
        name: String,
        registered: Datatype,
        requested: Datatype,
    },
    #[error("duplicate operation name {op:?} for component {layer:?}")]
    NameCollision { layer: String, op: String },
    #[error("component {layer:?} already registered with a different operation list")]
    LayerConflict { layer: String },
    #[error("association key {key:?} already set to a different value")]
    WriteOnce { key: String },
    #[error("unknown id: {0}")]
    UnknownId(String),
    #[error("activity stops at {t_stop} before it starts at {t_start}")]
    TimeOrder { t_start: u64, t_stop: u64 },
    #[error("parent {parent} starts at {parent_start}, after the child start {child_start}")]
    BadParent {
        parent: ActivityId,
        parent_start: u64,
        child_start: u64,
    },
    #[error("attribute {attribute} value must be finite")]
    NonFinite { attribute: AttributeId },
    #[error("attribute {attribute} expects {expected}, got {got}")]
    ValueType {
        attribute: AttributeId,
        expected: Datatype,
        got: Datatype,
    },
}

/// One registered attribute: a `(domain, name)` pair with a fixed datatype.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub id: AttributeId,
    pub domain: String,
    pub name: String,
    pub datatype: Datatype,
}

impl AttributeDef {
    /// Fully qualified `domain/name` form used in rendered output.
    pub fn qualified(&self) -> String {
        format!("{}/{}", self.domain, self.name)
    }
}

/// Registry of attribute definitions; `(domain, name)` pairs are unique.
#[derive(Debug, Default, Clone)]
pub struct Ontology {
    defs: Vec<AttributeDef>,
    by_key: HashMap<(String, String), AttributeId>,
}

impl Ontology {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers an attribute, idempotently. A second registration of the
    /// same pair with another datatype is refused.
    pub fn register(
        &mut self,
        domain: &str,
        name: &str,
        datatype: Datatype,
    ) -> Result<AttributeId, ModelError> {
        if let Some(&id) = self.by_key.get(&(domain.to_string(), name.to_string())) {
            let have = self.defs[id.0 as usize].datatype;
            if have != datatype {
                return Err(ModelError::DatatypeConflict {
                    domain: domain.into(),
                    name: name.into(),
                    registered: have,
                    requested: datatype,
                });
            }
            return Ok(id);
        }
        let id = AttributeId(self.defs.len() as u32);
        self.defs.push(AttributeDef {
            id,
            domain: domain.into(),
            name: name.into(),
            datatype,
        });
        self.by_key.insert((domain.into(), name.into()), id);
        Ok(id)
    }

    pub fn get(&self, id: AttributeId) -> Option<&AttributeDef> {
        self.defs.get(id.0 as usize)
    }

    pub fn lookup(&self, domain: &str, name: &str) -> Option<AttributeId> {
        self.by_key
            .get(&(domain.to_string(), name.to_string()))
            .copied()
    }

    pub fn defs(&self) -> &[AttributeDef] {
        &self.defs
    }

    pub(crate) fn from_defs(defs: Vec<AttributeDef>) -> Result<Self, String> {
        let mut out = Ontology::new();
        for (i, d) in defs.iter().enumerate() {
            if d.id.0 as usize != i {
                return Err(format!("attribute ids not dense at index {i}"));
            }
            let key = (d.domain.clone(), d.name.clone());
            if out.by_key.insert(key, d.id).is_some() {
                return Err(format!("duplicate attribute {}/{}", d.domain, d.name));
            }
        }
        out.defs = defs;
        Ok(out)
    }
}

/// One registered component: a named layer and its operation names.
/// The index of an operation name is its [`Ucaid`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentDescriptor {
    pub id: ComponentId,
    pub layer: String,
    pub ops: Vec<String>,
}

impl ComponentDescriptor {
    pub fn ucaid(&self, op: &str) -> Option<Ucaid> {
        self.ops.iter().position(|o| o == op).map(|i| Ucaid(i as u32))
    }

    pub fn op_name(&self, ucaid: Ucaid) -> Option<&str> {
        self.ops.get(ucaid.0 as usize).map(String::as_str)
    }
}

/// Registry of components, keyed by layer name.
#[derive(Debug, Default, Clone)]
pub struct SystemInfo {
    components: Vec<ComponentDescriptor>,
    by_layer: HashMap<String, ComponentId>,
}

impl SystemInfo {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a component with its operation names; ucaids are the list
    /// indices. Re-registering an identical component returns the existing
    /// descriptor.
    pub fn register(
        &mut self,
        layer: &str,
        ops: &[&str],
    ) -> Result<&ComponentDescriptor, ModelError> {
        let mut seen = std::collections::HashSet::new();
        for op in ops {
            if !seen.insert(*op) {
                return Err(ModelError::NameCollision {
                    layer: layer.into(),
                    op: (*op).into(),
                });
            }
        }
        if let Some(&id) = self.by_layer.get(layer) {
            let existing = &self.components[id.0 as usize];
            if existing.ops.iter().map(String::as_str).eq(ops.iter().copied()) {
                return Ok(&self.components[id.0 as usize]);
            }
            return Err(ModelError::LayerConflict {
                layer: layer.into(),
            });
        }
        let id = ComponentId(self.components.len() as u32);
        self.components.push(ComponentDescriptor {
            id,
            layer: layer.into(),
            ops: ops.iter().map(|s| s.to_string()).collect(),
        });
        self.by_layer.insert(layer.into(), id);
        Ok(self.components.last().unwrap())
    }

    pub fn component(&self, id: ComponentId) -> Option<&ComponentDescriptor> {
        self.components.get(id.0 as usize)
    }

    pub fn by_layer(&self, layer: &str) -> Option<&ComponentDescriptor> {
        self.by_layer
            .get(layer)
            .map(|id| &self.components[id.0 as usize])
    }

    pub fn components(&self) -> &[ComponentDescriptor] {
        &self.components
    }

    pub(crate) fn from_components(components: Vec<ComponentDescriptor>) -> Result<Self, String> {
        let mut out = SystemInfo::new();
        for (i, c) in components.iter().enumerate() {
            if c.id.0 as usize != i {
                return Err(format!("component ids not dense at index {i}"));
            }
            if out.by_layer.insert(c.layer.clone(), c.id).is_some() {
                return Err(format!("duplicate component layer {:?}", c.layer));
            }
        }
        out.components = components;
        Ok(out)
    }
}

/// Run-scoped key/value associations (user, job, executable and the like).
/// Every key is write-once; re-setting to the same value is a no-op.
#[derive(Debug, Default, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssociationMap {
    entries: BTreeMap<String, String>,
}

impl AssociationMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ModelError> {
        match self.entries.entry(key.to_string()) {
            Entry::Vacant(e) => {
                e.insert(value.to_string());
                Ok(())
            }
            Entry::Occupied(e) if e.get() == value => Ok(()),
            Entry::Occupied(_) => Err(ModelError::WriteOnce { key: key.into() }),
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }
}

/// The registries one trace run shares: attribute ontology, component map,
/// associations and the trace epoch all timestamps are relative to.
#[derive(Debug, Default, Clone)]
pub struct Registries {
    pub epoch_ns: u64,
    pub ontology: Ontology,
    pub system: SystemInfo,
    pub associations: AssociationMap,
}

/// One observed operation.
///
/// Timestamps are nanoseconds since the trace epoch. `parents` names the
/// causally responsible activities; `error` is zero on success.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Activity {
    pub aid: ActivityId,
    #[serde(rename = "comp")]
    pub component: ComponentId,
    pub ucaid: Ucaid,
    #[serde(rename = "t0")]
    pub t_start: u64,
    #[serde(rename = "t1")]
    pub t_stop: u64,
    #[serde(rename = "attrs")]
    pub attributes: Vec<(AttributeId, AttrValue)>,
    pub parents: Vec<ActivityId>,
    #[serde(rename = "err")]
    pub error: i64,
}

impl Activity {
    pub fn duration_ns(&self) -> u64 {
        self.t_stop - self.t_start
    }

    pub fn attr(&self, id: AttributeId) -> Option<&AttrValue> {
        self.attributes
            .iter()
            .find(|(a, _)| *a == id)
            .map(|(_, v)| v)
    }
}

/// Builds activities with validated ids and per-process sequence numbers.
#[derive(Debug, Default)]
pub struct ActivityFactory {
    next_seq: HashMap<u32, u64>,
    started: HashMap<ActivityId, u64>,
}

impl ActivityFactory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Assembles the next activity of process `pid`, checking the registries,
    /// time order and parent sanity.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        &mut self,
        regs: &Registries,
        pid: u32,
        component: ComponentId,
        ucaid: Ucaid,
        t_start: u64,
        t_stop: u64,
        attributes: Vec<(AttributeId, AttrValue)>,
        parents: Vec<ActivityId>,
        error: i64,
    ) -> Result<Activity, ModelError> {
        let comp = regs
            .system
            .component(component)
            .ok_or_else(|| ModelError::UnknownId(format!("component {component}")))?;
        if comp.op_name(ucaid).is_none() {
            return Err(ModelError::UnknownId(format!(
                "ucaid {ucaid} of component {:?}",
                comp.layer
            )));
        }
        if t_stop < t_start {
            return Err(ModelError::TimeOrder { t_start, t_stop });
        }
        for (id, value) in &attributes {
            let def = regs
                .ontology
                .get(*id)
                .ok_or_else(|| ModelError::UnknownId(format!("attribute {id}")))?;
            if def.datatype != value.datatype() {
                return Err(ModelError::ValueType {
                    attribute: *id,
                    expected: def.datatype,
                    got: value.datatype(),
                });
            }
            if let AttrValue::Float64(f) = value {
                if !f.is_finite() {
                    return Err(ModelError::NonFinite { attribute: *id });
                }
            }
        }
        for p in &parents {
            match self.started.get(p) {
                None => {
                    return Err(ModelError::UnknownId(format!("parent {p}")));
                }
                Some(&parent_start) if parent_start > t_start => {
                    return Err(ModelError::BadParent {
                        parent: *p,
                        parent_start,
                        child_start: t_start,
                    });
                }
                _ => {}
            }
        }
        let seq = self.next_seq.entry(pid).or_insert(1);
        let aid = ActivityId::new(pid, *seq);
        *seq += 1;
        self.started.insert(aid, t_start);
        Ok(Activity {
            aid,
            component,
            ucaid,
            t_start,
            t_stop,
            attributes,
            parents,
            error,
        })
    }
}

/// An activity with every id replaced by its registered name.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedActivity {
    pub aid: ActivityId,
    pub layer: String,
    pub op: String,
    /// `(domain/name, value)` pairs in storage order.
    pub attributes: Vec<(String, AttrValue)>,
    pub parents: Vec<ActivityId>,
    pub error: i64,
    pub t_start: u64,
    pub t_stop: u64,
}

/// Maps an activity back to names using the registries.
pub fn resolve(a: &Activity, regs: &Registries) -> Result<ResolvedActivity, ModelError> {
    let comp = regs
        .system
        .component(a.component)
        .ok_or_else(|| ModelError::UnknownId(format!("component {}", a.component)))?;
    let op = comp
        .op_name(a.ucaid)
        .ok_or_else(|| ModelError::UnknownId(format!("ucaid {}", a.ucaid)))?
        .to_string();
    let mut attributes = Vec::with_capacity(a.attributes.len());
    for (id, value) in &a.attributes {
        let def = regs
            .ontology
            .get(*id)
            .ok_or_else(|| ModelError::UnknownId(format!("attribute {id}")))?;
        attributes.push((def.qualified(), value.clone()));
    }
    Ok(ResolvedActivity {
        aid: a.aid,
        layer: comp.layer.clone(),
        op,
        attributes,
        parents: a.parents.clone(),
        error: a.error,
        t_start: a.t_start,
        t_stop: a.t_stop,
    })
}
