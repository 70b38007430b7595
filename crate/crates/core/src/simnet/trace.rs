use std::fmt::{self, Write as _};

use crate::behaviors::{BehaviorKind, DropReason};
use crate::net::{hex_dump, Ipv6Addr};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EventKind {
    Received,
    /// Reduced encapsulation applied by an ingress policy.
    Encapsulated,
    BehaviorApplied(BehaviorKind),
    Forwarded(String),
    Delivered(String),
    Dropped(DropReason),
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EventKind::Received => f.write_str("received"),
            EventKind::Encapsulated => f.write_str("encap"),
            EventKind::BehaviorApplied(k) => write!(f, "behavior({k})"),
            EventKind::Forwarded(link) => write!(f, "forwarded({link})"),
            EventKind::Delivered(who) => write!(f, "delivered({who})"),
            EventKind::Dropped(r) => write!(f, "dropped({r})"),
        }
    }
}

/// Packet state is recorded after the event took effect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TraceEvent {
    pub seq: u32,
    pub node: String,
    pub kind: EventKind,
    pub da: Ipv6Addr,
    pub segments_left: Option<u8>,
    pub hop_limit: u8,
    /// Serialized packet as it left the node; set on `Forwarded` only.
    pub wire: Option<Vec<u8>>,
}

impl fmt::Display for TraceEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04} {} {} da={} ", self.seq, self.node, self.kind, self.da)?;
        match self.segments_left {
            Some(sl) => write!(f, "sl={sl}")?,
            None => f.write_str("sl=-")?,
        }
        write!(f, " hl={}", self.hop_limit)
    }
}

/// How an injection ended.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Outcome {
    Delivered(String),
    Dropped { node: String, reason: DropReason },
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Delivered(who) => write!(f, "delivered to {who}"),
            Outcome::Dropped { node, reason } => write!(f, "dropped at {node}: {reason}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Trace {
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn outcome(&self) -> Option<Outcome> {
        self.events.iter().rev().find_map(|e| match &e.kind {
            EventKind::Delivered(who) => Some(Outcome::Delivered(who.clone())),
            EventKind::Dropped(reason) => Some(Outcome::Dropped {
                node: e.node.clone(),
                reason: *reason,
            }),
            _ => None,
        })
    }

    pub fn is_delivered(&self) -> bool {
        matches!(self.outcome(), Some(Outcome::Delivered(_)))
    }

    /// Nodes that ran an SR behavior, in order. Consecutive behaviors on one
    /// node collapse into a single visit.
    pub fn sr_nodes(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        let mut last_visit = None;
        let mut visit = 0usize;
        for e in &self.events {
            match e.kind {
                EventKind::Received => visit += 1,
                EventKind::BehaviorApplied(_) if last_visit != Some(visit) => {
                    out.push(e.node.clone());
                    last_visit = Some(visit);
                }
                _ => {}
            }
        }
        out
    }

    /// One line per event; with `hexdump`, forwarded packets follow their
    /// event line, indented.
    pub fn render(&self, hexdump: bool) -> String {
        let mut out = String::new();
        for e in &self.events {
            let _ = writeln!(out, "{e}");
            if let (true, Some(wire)) = (hexdump, &e.wire) {
                for line in hex_dump(wire).lines() {
                    let _ = writeln!(out, "    {line}");
                }
            }
        }
        out
    }
}
