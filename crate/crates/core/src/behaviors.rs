//! SRv6 endpoint behaviors and their Micro SID counterparts.
//!
//! Every behavior is a pure transform of a [`Packet`]. What the node does
//! next is described by the returned [`BehaviorOutcome`]; the emulator
//! performs the lookup or transmission.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::fib::{TableId, DEFAULT_TABLE};
use crate::net::packet::{MAX_SEGMENTS, PROTO_IPV6, PROTO_ROUTING};
use crate::net::{parse_packet, Ipv6Addr, Ipv6Header, Packet, SegmentRoutingHeader};
use crate::usid::{next_usid, usid_shift, UsidError, UsidScheme, END_OF_CONTAINER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BehaviorKind {
    End,
    EndX,
    EndT,
    EndDT6,
    EndDX6,
    UN,
    UA,
    UDT,
    UDX,
}

impl BehaviorKind {
    pub const ALL: [BehaviorKind; 9] = [
        BehaviorKind::End,
        BehaviorKind::EndX,
        BehaviorKind::EndT,
        BehaviorKind::EndDT6,
        BehaviorKind::EndDX6,
        BehaviorKind::UN,
        BehaviorKind::UA,
        BehaviorKind::UDT,
        BehaviorKind::UDX,
    ];

    /// Plain SRv6 behavior a Micro SID behavior stands for. Plain
    /// behaviors map to themselves.
    pub fn plain_equivalent(self) -> BehaviorKind {
        match self {
            BehaviorKind::UN => BehaviorKind::End,
            BehaviorKind::UA => BehaviorKind::EndX,
            BehaviorKind::UDT => BehaviorKind::EndDT6,
            BehaviorKind::UDX => BehaviorKind::EndDX6,
            other => other,
        }
    }

    pub fn needs_table(self) -> bool {
        matches!(self, BehaviorKind::EndT | BehaviorKind::EndDT6 | BehaviorKind::UDT)
    }

    pub fn needs_adjacency(self) -> bool {
        matches!(
            self,
            BehaviorKind::EndX | BehaviorKind::EndDX6 | BehaviorKind::UA | BehaviorKind::UDX
        )
    }

    pub fn needs_scheme(self) -> bool {
        matches!(self, BehaviorKind::UN | BehaviorKind::UA)
    }

    pub fn name(self) -> &'static str {
        match self {
            BehaviorKind::End => "End",
            BehaviorKind::EndX => "End.X",
            BehaviorKind::EndT => "End.T",
            BehaviorKind::EndDT6 => "End.DT6",
            BehaviorKind::EndDX6 => "End.DX6",
            BehaviorKind::UN => "uN",
            BehaviorKind::UA => "uA",
            BehaviorKind::UDT => "uDT",
            BehaviorKind::UDX => "uDX",
        }
    }
}

impl fmt::Display for BehaviorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BehaviorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        BehaviorKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown behavior `{s}`"))
    }
}

/// A next hop reached over a named link of the local node.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Adjacency {
    pub next_hop: Ipv6Addr,
    pub link: String,
}

impl fmt::Display for Adjacency {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} dev {}", self.next_hop, self.link)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BehaviorParams {
    pub table: Option<TableId>,
    pub adjacency: Option<Adjacency>,
    pub scheme: Option<UsidScheme>,
}

impl BehaviorParams {
    pub fn for_scheme(scheme: UsidScheme) -> Self {
        BehaviorParams {
            scheme: Some(scheme),
            ..Default::default()
        }
    }

    pub fn for_table(table: TableId) -> Self {
        BehaviorParams {
            table: Some(table),
            ..Default::default()
        }
    }

    pub fn for_adjacency(adjacency: Adjacency) -> Self {
        BehaviorParams {
            adjacency: Some(adjacency),
            ..Default::default()
        }
    }

    pub fn validate(&self, kind: BehaviorKind) -> Result<(), BehaviorError> {
        if kind.needs_table() && self.table.is_none() {
            return Err(BehaviorError::MissingParam { kind, param: "table" });
        }
        if kind.needs_adjacency() && self.adjacency.is_none() {
            return Err(BehaviorError::MissingParam {
                kind,
                param: "adjacency",
            });
        }
        if kind.needs_scheme() && self.scheme.is_none() {
            return Err(BehaviorError::MissingParam { kind, param: "scheme" });
        }
        Ok(())
    }

    fn table(&self, kind: BehaviorKind) -> Result<TableId, BehaviorError> {
        self.table.ok_or(BehaviorError::MissingParam { kind, param: "table" })
    }

    fn adjacency(&self, kind: BehaviorKind) -> Result<&Adjacency, BehaviorError> {
        self.adjacency.as_ref().ok_or(BehaviorError::MissingParam {
            kind,
            param: "adjacency",
        })
    }

    fn scheme(&self, kind: BehaviorKind) -> Result<&UsidScheme, BehaviorError> {
        self.scheme
            .as_ref()
            .ok_or(BehaviorError::MissingParam { kind, param: "scheme" })
    }
}

/// Why a packet was discarded. The string form is stable and appears in
/// traces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DropReason {
    NoRoute,
    HopLimitExhausted,
    MicroProgramExhausted,
    MissingSrh,
    NoSegmentsLeft,
    SegmentsLeftNonZero,
    OutsideBlock,
    MalformedInner,
    MissingParam,
    UnknownTable,
    UnknownLink,
    RelookupLimit,
    HostAddressMismatch,
    EncapFailed,
    StepLimit,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::NoRoute => "no-route",
            DropReason::HopLimitExhausted => "hop-limit-exhausted",
            DropReason::MicroProgramExhausted => "micro-program-exhausted",
            DropReason::MissingSrh => "missing-srh",
            DropReason::NoSegmentsLeft => "no-segments-left",
            DropReason::SegmentsLeftNonZero => "segments-left-nonzero",
            DropReason::OutsideBlock => "outside-block",
            DropReason::MalformedInner => "malformed-inner",
            DropReason::MissingParam => "missing-param",
            DropReason::UnknownTable => "unknown-table",
            DropReason::UnknownLink => "unknown-link",
            DropReason::RelookupLimit => "relookup-limit",
            DropReason::HostAddressMismatch => "host-address-mismatch",
            DropReason::EncapFailed => "encap-failed",
            DropReason::StepLimit => "step-limit",
        }
    }
}

impl fmt::Display for DropReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BehaviorError {
    #[error("packet carries no SRH")]
    MissingSrh,
    #[error("segments-left is already 0")]
    NoSegmentsLeft,
    #[error("segments-left is {0}, expected the last segment")]
    SegmentsLeftNonZero(u8),
    #[error("hop-limit exhausted")]
    HopLimitExhausted,
    #[error("destination {0} is outside the uSID block")]
    OutsideBlock(Ipv6Addr),
    #[error("inner packet malformed: {0}")]
    MalformedInner(String),
    #[error("{kind} requires a {param}")]
    MissingParam { kind: BehaviorKind, param: &'static str },
    #[error("empty container list")]
    EmptyContainerList,
    #[error("{0} containers exceed the SRH capacity")]
    TooManyContainers(usize),
}

impl BehaviorError {
    pub fn drop_reason(&self) -> DropReason {
        match self {
            BehaviorError::MissingSrh => DropReason::MissingSrh,
            BehaviorError::NoSegmentsLeft => DropReason::NoSegmentsLeft,
            BehaviorError::SegmentsLeftNonZero(_) => DropReason::SegmentsLeftNonZero,
            BehaviorError::HopLimitExhausted => DropReason::HopLimitExhausted,
            BehaviorError::OutsideBlock(_) => DropReason::OutsideBlock,
            BehaviorError::MalformedInner(_) => DropReason::MalformedInner,
            BehaviorError::MissingParam { .. } => DropReason::MissingParam,
            BehaviorError::EmptyContainerList | BehaviorError::TooManyContainers(_) => DropReason::EncapFailed,
        }
    }
}

impl From<UsidError> for BehaviorError {
    fn from(e: UsidError) -> Self {
        match e {
            UsidError::OutsideBlock(addr) => BehaviorError::OutsideBlock(addr),
            other => BehaviorError::MalformedInner(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BehaviorOutcome {
    /// Look the (rewritten) packet up again in `table`.
    Continue {
        packet: Packet,
        table: TableId,
    },
    /// Transmit on the adjacency without a lookup.
    CrossConnect {
        packet: Packet,
        adjacency: Adjacency,
    },
    /// Decapsulated; the inner packet goes to `table`.
    Deliver {
        payload: Vec<u8>,
        table: TableId,
    },
    Drop(DropReason),
}

fn decrement_hop_limit(p: &mut Packet) -> Result<(), BehaviorError> {
    if p.outer.hop_limit == 0 {
        return Err(BehaviorError::HopLimitExhausted);
    }
    p.outer.hop_limit -= 1;
    Ok(())
}

/// Advances the SRH: hop-limit and segments-left go down by one and the
/// new active segment is copied into the destination address.
fn advance_segment(mut p: Packet) -> Result<Packet, BehaviorError> {
    let srh = p.srh.as_ref().ok_or(BehaviorError::MissingSrh)?;
    if srh.segments_left == 0 {
        return Err(BehaviorError::NoSegmentsLeft);
    }
    decrement_hop_limit(&mut p)?;
    let srh = p.srh.as_mut().expect("checked above");
    srh.segments_left -= 1;
    p.outer.dst = srh.segments[srh.segments_left as usize];
    Ok(p)
}

fn exhausted(p: &Packet) -> bool {
    p.srh.as_ref().is_none_or(|s| s.segments_left == 0)
}

/// Consumes the active uSID. The packet comes back untouched as `Err` when
/// the container has nothing left to shift in.
fn shift_active_usid(mut p: Packet, scheme: &UsidScheme) -> Result<Result<Packet, Packet>, BehaviorError> {
    if next_usid(p.outer.dst, scheme)? == END_OF_CONTAINER {
        return Ok(Err(p));
    }
    decrement_hop_limit(&mut p)?;
    p.outer.dst = usid_shift(p.outer.dst, scheme)?;
    Ok(Ok(p))
}

pub fn end_behavior(p: Packet) -> Result<BehaviorOutcome, BehaviorError> {
    Ok(BehaviorOutcome::Continue {
        packet: advance_segment(p)?,
        table: DEFAULT_TABLE,
    })
}

pub fn end_x_behavior(p: Packet, params: &BehaviorParams) -> Result<BehaviorOutcome, BehaviorError> {
    let adjacency = params.adjacency(BehaviorKind::EndX)?.clone();
    Ok(BehaviorOutcome::CrossConnect {
        packet: advance_segment(p)?,
        adjacency,
    })
}

pub fn end_t_behavior(p: Packet, params: &BehaviorParams) -> Result<BehaviorOutcome, BehaviorError> {
    let table = params.table(BehaviorKind::EndT)?;
    Ok(BehaviorOutcome::Continue {
        packet: advance_segment(p)?,
        table,
    })
}

/// uN: shift-and-lookup while the container has uSIDs left, End once it
/// is exhausted.
pub fn un_behavior(p: Packet, params: &BehaviorParams) -> Result<BehaviorOutcome, BehaviorError> {
    let scheme = params.scheme(BehaviorKind::UN)?;
    match shift_active_usid(p, scheme)? {
        Ok(packet) => Ok(BehaviorOutcome::Continue {
            packet,
            table: DEFAULT_TABLE,
        }),
        Err(p) if exhausted(&p) => Ok(BehaviorOutcome::Drop(DropReason::MicroProgramExhausted)),
        Err(p) => end_behavior(p),
    }
}

/// uA: like uN but the packet leaves on a fixed adjacency; End.X once the
/// container is exhausted.
pub fn ua_behavior(p: Packet, params: &BehaviorParams) -> Result<BehaviorOutcome, BehaviorError> {
    let adjacency = params.adjacency(BehaviorKind::UA)?.clone();
    let scheme = params.scheme(BehaviorKind::UA)?;
    match shift_active_usid(p, scheme)? {
        Ok(packet) => Ok(BehaviorOutcome::CrossConnect { packet, adjacency }),
        Err(p) if exhausted(&p) => Ok(BehaviorOutcome::Drop(DropReason::MicroProgramExhausted)),
        Err(p) => Ok(BehaviorOutcome::CrossConnect {
            packet: advance_segment(p)?,
            adjacency,
        }),
    }
}

fn inner_bytes(p: Packet) -> Result<Vec<u8>, BehaviorError> {
    if p.payload_protocol() != PROTO_IPV6 {
        return Err(BehaviorError::MalformedInner(format!(
            "payload protocol {} is not IPv6",
            p.payload_protocol()
        )));
    }
    if p.payload.len() < crate::net::packet::IPV6_HEADER_LEN {
        return Err(BehaviorError::MalformedInner(format!(
            "{} bytes is too short for an IPv6 packet",
            p.payload.len()
        )));
    }
    Ok(p.payload)
}

/// Decapsulates and hands the inner packet to the configured table.
pub fn end_dt6_behavior(p: Packet, params: &BehaviorParams) -> Result<BehaviorOutcome, BehaviorError> {
    let table = params.table(BehaviorKind::EndDT6)?;
    Ok(BehaviorOutcome::Deliver {
        payload: inner_bytes(p)?,
        table,
    })
}

/// Decapsulates and sends the inner packet out of the adjacency. Only valid
/// on the last segment.
pub fn end_dx6_behavior(p: Packet, params: &BehaviorParams) -> Result<BehaviorOutcome, BehaviorError> {
    let adjacency = params.adjacency(BehaviorKind::EndDX6)?.clone();
    if let Some(sl) = p.segments_left().filter(|&sl| sl > 0) {
        return Err(BehaviorError::SegmentsLeftNonZero(sl));
    }
    let inner = inner_bytes(p)?;
    let packet = parse_packet(&inner).map_err(|e| BehaviorError::MalformedInner(e.to_string()))?;
    Ok(BehaviorOutcome::CrossConnect { packet, adjacency })
}

pub fn apply(kind: BehaviorKind, params: &BehaviorParams, p: Packet) -> Result<BehaviorOutcome, BehaviorError> {
    match kind {
        BehaviorKind::End => end_behavior(p),
        BehaviorKind::EndX => end_x_behavior(p, params),
        BehaviorKind::EndT => end_t_behavior(p, params),
        BehaviorKind::EndDT6 | BehaviorKind::UDT => end_dt6_behavior(p, params),
        BehaviorKind::EndDX6 | BehaviorKind::UDX => end_dx6_behavior(p, params),
        BehaviorKind::UN => un_behavior(p, params),
        BehaviorKind::UA => ua_behavior(p, params),
    }
}

/// Reduced encapsulation: the first SID goes in the outer destination and
/// is not repeated in the SRH; a single SID needs no SRH at all.
pub fn h_encap_red(
    inner: &[u8],
    containers: &[Ipv6Addr],
    src: Ipv6Addr,
    hop_limit: u8,
) -> Result<Packet, BehaviorError> {
    let (&first, rest) = containers.split_first().ok_or(BehaviorError::EmptyContainerList)?;
    if rest.len() > MAX_SEGMENTS {
        return Err(BehaviorError::TooManyContainers(containers.len()));
    }
    let srh = (!rest.is_empty()).then(|| SegmentRoutingHeader {
        next_header: PROTO_IPV6,
        segments_left: rest.len() as u8,
        segments: rest.iter().rev().copied().collect(),
    });
    let next_header = if srh.is_some() { PROTO_ROUTING } else { PROTO_IPV6 };
    Ok(Packet {
        outer: Ipv6Header::new(src, first, next_header, hop_limit),
        srh,
        payload: inner.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::packet::{serialize_packet, PROTO_ICMPV6};

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    fn inner() -> Vec<u8> {
        let p = Packet {
            outer: Ipv6Header::new(a("fd00:0:11::2"), a("fd00:0:31::2"), PROTO_ICMPV6, 64),
            srh: None,
            payload: vec![128, 0, 0, 0, 0, 1, 0, 1],
        };
        serialize_packet(&p).unwrap()
    }

    fn encap(containers: &[&str]) -> Packet {
        let cs: Vec<Ipv6Addr> = containers.iter().map(|s| a(s)).collect();
        h_encap_red(&inner(), &cs, a("fcbb:bbbb:0100::"), 64).unwrap()
    }

    fn un_params() -> BehaviorParams {
        BehaviorParams::for_scheme(UsidScheme::demo())
    }

    fn adj() -> Adjacency {
        Adjacency {
            next_hop: a("fe80::7"),
            link: "r8-r7".into(),
        }
    }

    fn continued(o: BehaviorOutcome) -> (Packet, TableId) {
        match o {
            BehaviorOutcome::Continue { packet, table } => (packet, table),
            other => panic!("expected Continue, got {other:?}"),
        }
    }

    #[test]
    fn end_copies_next_segment() {
        let p = encap(&["fcbb:bbbb:0400::", "fcbb:bbbb:0300:f00d::"]);
        let (p, table) = continued(end_behavior(p).unwrap());
        assert_eq!(p.outer.dst, a("fcbb:bbbb:0300:f00d::"));
        assert_eq!(p.segments_left(), Some(0));
        assert_eq!(p.outer.hop_limit, 63);
        assert_eq!(table, DEFAULT_TABLE);
        assert_eq!(end_behavior(p), Err(BehaviorError::NoSegmentsLeft));
    }

    #[test]
    fn end_with_hop_limit_one_still_continues() {
        let mut p = encap(&["fcbb:bbbb:0400::", "fcbb:bbbb:0300:f00d::"]);
        p.outer.hop_limit = 1;
        let (p, _) = continued(end_behavior(p).unwrap());
        assert_eq!(p.outer.hop_limit, 0);
        let mut again = encap(&["fcbb:bbbb:0400::", "fcbb:bbbb:0300:f00d::"]);
        again.outer.hop_limit = 0;
        assert_eq!(end_behavior(again), Err(BehaviorError::HopLimitExhausted));
    }

    #[test]
    fn end_without_srh() {
        assert_eq!(
            end_behavior(encap(&["fcbb:bbbb:0400::"])),
            Err(BehaviorError::MissingSrh)
        );
    }

    #[test]
    fn un_shifts_active_usid() {
        let p = encap(&["fcbb:bbbb:0800:0700:0200:f00d::"]);
        let (p, _) = continued(un_behavior(p, &un_params()).unwrap());
        assert_eq!(p.outer.dst, a("fcbb:bbbb:0700:0200:f00d::"));
        assert_eq!(p.outer.hop_limit, 63);
        assert!(p.srh.is_none());
    }

    #[test]
    fn un_falls_back_to_end() {
        let p = encap(&["fcbb:bbbb:0400::", "fcbb:bbbb:0300:f00d::"]);
        let (p, _) = continued(un_behavior(p, &un_params()).unwrap());
        assert_eq!(p.outer.dst, a("fcbb:bbbb:0300:f00d::"));
        assert_eq!(p.segments_left(), Some(0));
        // one decrement, not two
        assert_eq!(p.outer.hop_limit, 63);
    }

    #[test]
    fn un_drops_exhausted_program() {
        let p = encap(&["fcbb:bbbb:0400::"]);
        assert_eq!(
            un_behavior(p, &un_params()),
            Ok(BehaviorOutcome::Drop(DropReason::MicroProgramExhausted))
        );
    }

    #[test]
    fn un_rejects_foreign_destination() {
        let p = encap(&["fd00::9"]);
        assert_eq!(
            un_behavior(p, &un_params()),
            Err(BehaviorError::OutsideBlock(a("fd00::9")))
        );
    }

    #[test]
    fn ua_cross_connects_after_shift() {
        let mut params = un_params();
        params.adjacency = Some(adj());
        let p = encap(&["fcbb:bbbb:0800:0700::"]);
        match ua_behavior(p, &params).unwrap() {
            BehaviorOutcome::CrossConnect { packet, adjacency } => {
                assert_eq!(packet.outer.dst, a("fcbb:bbbb:0700::"));
                assert_eq!(adjacency, adj());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn ua_acts_as_end_x_when_exhausted() {
        let mut params = un_params();
        params.adjacency = Some(adj());
        let p = encap(&["fcbb:bbbb:0800::", "fcbb:bbbb:0300:f00d::"]);
        match ua_behavior(p, &params).unwrap() {
            BehaviorOutcome::CrossConnect { packet, adjacency } => {
                assert_eq!(packet.outer.dst, a("fcbb:bbbb:0300:f00d::"));
                assert_eq!(packet.segments_left(), Some(0));
                assert_eq!(adjacency, adj());
            }
            other => panic!("{other:?}"),
        }
        let p = encap(&["fcbb:bbbb:0800::"]);
        assert_eq!(
            ua_behavior(p, &params),
            Ok(BehaviorOutcome::Drop(DropReason::MicroProgramExhausted))
        );
    }

    #[test]
    fn ua_requires_adjacency() {
        assert_eq!(
            un_params().validate(BehaviorKind::UA),
            Err(BehaviorError::MissingParam {
                kind: BehaviorKind::UA,
                param: "adjacency"
            })
        );
        assert!(matches!(
            ua_behavior(encap(&["fcbb:bbbb:0800::"]), &un_params()),
            Err(BehaviorError::MissingParam { .. })
        ));
    }

    #[test]
    fn end_x_and_end_t() {
        let p = encap(&["fcbb:bbbb:0400::", "fcbb:bbbb:0300:f00d::"]);
        match end_x_behavior(p, &BehaviorParams::for_adjacency(adj())).unwrap() {
            BehaviorOutcome::CrossConnect { packet, .. } => assert_eq!(packet.segments_left(), Some(0)),
            other => panic!("{other:?}"),
        }
        let p = encap(&["fcbb:bbbb:0400::", "fcbb:bbbb:0300:f00d::"]);
        let (_, table) = continued(end_t_behavior(p, &BehaviorParams::for_table(100)).unwrap());
        assert_eq!(table, 100);
    }

    #[test]
    fn dt6_delivers_inner_packet() {
        let p = encap(&["fcbb:bbbb:0300:f00d::"]);
        assert_eq!(
            end_dt6_behavior(p, &BehaviorParams::for_table(254)),
            Ok(BehaviorOutcome::Deliver {
                payload: inner(),
                table: 254
            })
        );
    }

    #[test]
    fn dt6_rejects_short_payload() {
        let p = h_encap_red(&[0u8; 10], &[a("fcbb:bbbb:0300:f00d::")], a("::1"), 64).unwrap();
        assert!(matches!(
            end_dt6_behavior(p, &BehaviorParams::for_table(254)),
            Err(BehaviorError::MalformedInner(_))
        ));
    }

    #[test]
    fn dx6_requires_last_segment() {
        let params = BehaviorParams::for_adjacency(adj());
        let p = encap(&["fcbb:bbbb:0400::", "fcbb:bbbb:0300::"]);
        assert_eq!(end_dx6_behavior(p, &params), Err(BehaviorError::SegmentsLeftNonZero(1)));
        let p = encap(&["fcbb:bbbb:0300::"]);
        match end_dx6_behavior(p, &params).unwrap() {
            BehaviorOutcome::CrossConnect { packet, .. } => {
                assert_eq!(serialize_packet(&packet).unwrap(), inner())
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn encap_overheads() {
        let one = encap(&["fcbb:bbbb:0300:f00d::"]);
        assert!(one.srh.is_none());
        assert_eq!(one.header_len(), 40);

        let two = encap(&["fcbb:bbbb:0200:0700:0600:0500:0400::", "fcbb:bbbb:0300:f00d::"]);
        assert_eq!(two.outer.dst, a("fcbb:bbbb:0200:0700:0600:0500:0400::"));
        let srh = two.srh.as_ref().unwrap();
        assert_eq!(srh.segments, vec![a("fcbb:bbbb:0300:f00d::")]);
        assert_eq!(srh.segments_left, 1);
        assert_eq!(two.header_len(), 64);

        let three = encap(&["fcbb:bbbb:0100::", "fcbb:bbbb:0200::", "fcbb:bbbb:0300::"]);
        let srh = three.srh.as_ref().unwrap();
        assert_eq!(srh.segments, vec![a("fcbb:bbbb:0300::"), a("fcbb:bbbb:0200::")]);
        assert_eq!(srh.segments_left, 2);
        assert_eq!(three.header_len(), 80);

        assert_eq!(
            h_encap_red(&inner(), &[], a("::1"), 64),
            Err(BehaviorError::EmptyContainerList)
        );
    }

    #[test]
    fn table_one_mapping() {
        assert_eq!(BehaviorKind::UN.plain_equivalent(), BehaviorKind::End);
        assert_eq!(BehaviorKind::UA.plain_equivalent(), BehaviorKind::EndX);
        assert_eq!(BehaviorKind::UDT.plain_equivalent(), BehaviorKind::EndDT6);
        assert_eq!(BehaviorKind::UDX.plain_equivalent(), BehaviorKind::EndDX6);
        for k in BehaviorKind::ALL {
            assert_eq!(k.name().parse::<BehaviorKind>(), Ok(k));
        }
    }
}
