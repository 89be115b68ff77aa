use super::ast::NodeId;
use std::fmt::{self, Write as _};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObjectId(pub u32);

impl ObjectId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for ObjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum TraceEvent {
    Alloc { obj: ObjectId, at: NodeId },
    ObjectRead { obj: ObjectId, at: NodeId },
    ThisRead { obj: ObjectId, at: NodeId, call_trace: Vec<NodeId> },
    ParamRead { obj: ObjectId, at: NodeId, call_trace: Vec<NodeId> },
    MethodEnter { call_site: NodeId },
    MethodExit,
}

impl TraceEvent {
    /// The object and position of any read event.
    pub fn read(&self) -> Option<(ObjectId, NodeId)> {
        match self {
            TraceEvent::ObjectRead { obj, at }
            | TraceEvent::ThisRead { obj, at, .. }
            | TraceEvent::ParamRead { obj, at, .. } => Some((*obj, *at)),
            _ => None,
        }
    }
}

/// What kind of runtime value an object id denotes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ValueClass {
    Undefined,
    Null,
    Primitive,
    Object,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
    /// Class of every allocated object id, indexed by `ObjectId`.
    pub classes: Vec<ValueClass>,
}

impl Trace {
    pub fn class(&self, obj: ObjectId) -> ValueClass {
        self.classes[obj.index()]
    }

    /// `EVENTKIND objId nodeId [callTrace…]`, one event per line.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let rest = |out: &mut String, ct: &[NodeId]| {
                for c in ct {
                    let _ = write!(out, " {c}");
                }
            };
            match e {
                TraceEvent::Alloc { obj, at } => {
                    let _ = write!(out, "ALLOC {obj} {at}");
                }
                TraceEvent::ObjectRead { obj, at } => {
                    let _ = write!(out, "READ {obj} {at}");
                }
                TraceEvent::ThisRead { obj, at, call_trace } => {
                    let _ = write!(out, "THIS {obj} {at}");
                    rest(&mut out, call_trace);
                }
                TraceEvent::ParamRead { obj, at, call_trace } => {
                    let _ = write!(out, "PARAM {obj} {at}");
                    rest(&mut out, call_trace);
                }
                TraceEvent::MethodEnter { call_site } => {
                    let _ = write!(out, "ENTER - {call_site}");
                }
                TraceEvent::MethodExit => out.push_str("EXIT - -"),
            }
            out.push('\n');
        }
        out
    }
}
