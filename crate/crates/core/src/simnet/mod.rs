//! Discrete, single-packet network simulator.
//!
//! Every node runs the same engine: look the destination up in the node's
//! FIB, act on the entry, and either hand the packet to a neighbour or
//! chain another local lookup. Nothing here depends on wall-clock time or
//! randomness, so a trace is a pure function of topology and packet.

mod config;
mod topology;
mod trace;

pub use config::{
    load_topology, HostConfig, LinkConfig, NodeConfig, RoutesConfig, SchemeConfig, TopologyConfig, UsidConfig,
};
pub use topology::{
    Endpoint, Host, Link, Node, NodeKind, Peer, SimSettings, Topology, TopologyError, DEFAULT_ENCAP_HOP_LIMIT,
    DEFAULT_HOST_PREFIX_LEN, DEFAULT_RELOOKUP_LIMIT,
};
pub use trace::{EventKind, Outcome, Trace, TraceEvent};

use crate::behaviors::{apply, h_encap_red, BehaviorOutcome, DropReason};
use crate::fib::{FibAction, TableId, DEFAULT_TABLE};
use crate::net::packet::PROTO_ICMPV6;
use crate::net::{parse_packet, serialize_packet, Ipv6Addr, Ipv6Header, Packet};

/// Node visits allowed per injection.
pub const STEP_LIMIT: usize = 4096;

pub const HOST_HOP_LIMIT: u8 = 64;

/// A packet sitting at a node, about to be processed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InFlight {
    pub node: String,
    pub packet: Packet,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepResult {
    Next(InFlight),
    Done(Outcome),
}

/// ICMPv6 echo request with a fixed body, checksum left at zero.
pub fn echo_request(src: Ipv6Addr, dst: Ipv6Addr, seq: u16) -> Packet {
    let mut payload = vec![128, 0, 0, 0, 0, 1];
    payload.extend_from_slice(&seq.to_be_bytes());
    payload.extend_from_slice(b"usid-sim");
    Packet {
        outer: Ipv6Header::new(src, dst, PROTO_ICMPV6, HOST_HOP_LIMIT),
        srh: None,
        payload,
    }
}

struct Recorder<'a> {
    trace: &'a mut Trace,
}

impl Recorder<'_> {
    fn push(&mut self, node: &str, kind: EventKind, p: &Packet) {
        let wire = match kind {
            EventKind::Forwarded(_) => p.to_bytes().ok(),
            _ => None,
        };
        let seq = self.trace.events.len() as u32 + 1;
        self.trace.events.push(TraceEvent {
            seq,
            node: node.to_string(),
            kind,
            da: p.outer.dst,
            segments_left: p.segments_left(),
            hop_limit: p.outer.hop_limit,
            wire,
        });
    }

    fn drop(&mut self, node: &str, reason: DropReason, p: &Packet) -> StepResult {
        self.push(node, EventKind::Dropped(reason), p);
        StepResult::Done(Outcome::Dropped {
            node: node.to_string(),
            reason,
        })
    }
}

/// Processes one node visit: receive, run local lookups until the packet is
/// transmitted, delivered or dropped.
pub fn step(topo: &Topology, at: InFlight, trace: &mut Trace) -> StepResult {
    let mut rec = Recorder { trace };
    let InFlight { node: name, mut packet } = at;
    rec.push(&name, EventKind::Received, &packet);
    let Ok(node) = topo.node(&name) else {
        return rec.drop(&name, DropReason::NoRoute, &packet);
    };

    let mut table: TableId = DEFAULT_TABLE;
    // A behavior that already consumed a hop-limit unit spares the packet
    // the forwarding decrement on the way out.
    let mut decremented = false;
    let mut relookups = 0usize;
    loop {
        let entry = match node.fib.lookup(table, packet.outer.dst) {
            Err(_) => return rec.drop(&name, DropReason::UnknownTable, &packet),
            Ok(None) => return rec.drop(&name, DropReason::NoRoute, &packet),
            Ok(Some(e)) => e,
        };
        let next_table = match entry.action {
            FibAction::Forward { link, .. } => {
                return transmit(topo, node, &link, packet, decremented, &mut rec);
            }
            FibAction::LocalDeliver => {
                rec.push(&name, EventKind::Delivered(name.clone()), &packet);
                return StepResult::Done(Outcome::Delivered(name));
            }
            FibAction::Encap(rule) => {
                let inner = match serialize_packet(&packet) {
                    Ok(b) => b,
                    Err(_) => return rec.drop(&name, DropReason::EncapFailed, &packet),
                };
                match h_encap_red(&inner, &rule.containers, rule.src, rule.hop_limit) {
                    Ok(p) => packet = p,
                    Err(_) => return rec.drop(&name, DropReason::EncapFailed, &packet),
                }
                rec.push(&name, EventKind::Encapsulated, &packet);
                decremented = false;
                DEFAULT_TABLE
            }
            FibAction::Behavior { kind, params } => match apply(kind, &params, packet.clone()) {
                Err(e) => return rec.drop(&name, e.drop_reason(), &packet),
                Ok(BehaviorOutcome::Drop(reason)) => return rec.drop(&name, reason, &packet),
                Ok(BehaviorOutcome::Continue { packet: p, table }) => {
                    packet = p;
                    rec.push(&name, EventKind::BehaviorApplied(kind), &packet);
                    decremented = true;
                    table
                }
                Ok(BehaviorOutcome::CrossConnect { packet: p, adjacency }) => {
                    packet = p;
                    rec.push(&name, EventKind::BehaviorApplied(kind), &packet);
                    return transmit(topo, node, &adjacency.link, packet, true, &mut rec);
                }
                Ok(BehaviorOutcome::Deliver { payload, table }) => {
                    match parse_packet(&payload) {
                        Ok(p) => packet = p,
                        Err(_) => return rec.drop(&name, DropReason::MalformedInner, &packet),
                    }
                    rec.push(&name, EventKind::BehaviorApplied(kind), &packet);
                    decremented = false;
                    table
                }
            },
        };
        relookups += 1;
        if relookups > topo.settings.relookup_limit {
            return rec.drop(&name, DropReason::RelookupLimit, &packet);
        }
        table = next_table;
    }
}

fn transmit(
    topo: &Topology,
    node: &Node,
    link: &str,
    mut packet: Packet,
    decremented: bool,
    rec: &mut Recorder<'_>,
) -> StepResult {
    if !decremented {
        if packet.outer.hop_limit == 0 {
            return rec.drop(&node.name, DropReason::HopLimitExhausted, &packet);
        }
        packet.outer.hop_limit -= 1;
    }
    let Some(peer) = node.links.get(link) else {
        return rec.drop(&node.name, DropReason::UnknownLink, &packet);
    };
    rec.push(&node.name, EventKind::Forwarded(link.to_string()), &packet);
    match peer {
        Peer::Node { node, .. } => StepResult::Next(InFlight {
            node: node.clone(),
            packet,
        }),
        Peer::Host(h) => match topo.host(h) {
            Ok(host) if host.address == packet.outer.dst => {
                rec.push(h, EventKind::Delivered(h.clone()), &packet);
                StepResult::Done(Outcome::Delivered(h.clone()))
            }
            _ => rec.drop(h, DropReason::HostAddressMismatch, &packet),
        },
    }
}

/// Sends `packet` from host `from` into its attachment node and follows it
/// to the end.
pub fn inject(topo: &Topology, from: &str, packet: Packet) -> Result<Trace, TopologyError> {
    let host = topo.host(from)?;
    let mut trace = Trace::default();
    let mut at = InFlight {
        node: host.node.clone(),
        packet,
    };
    let mut visits = 0;
    loop {
        if visits == STEP_LIMIT {
            Recorder { trace: &mut trace }.drop(&at.node, DropReason::StepLimit, &at.packet);
            return Ok(trace);
        }
        visits += 1;
        match step(topo, at, &mut trace) {
            StepResult::Next(next) => at = next,
            StepResult::Done(_) => return Ok(trace),
        }
    }
}

/// Echo request from host `from` to host `to`.
pub fn ping(topo: &Topology, from: &str, to: &str, seq: u16) -> Result<Trace, TopologyError> {
    let src = topo.host(from)?.address;
    let dst = topo.host(to)?.address;
    inject(topo, from, echo_request(src, dst, seq))
}
