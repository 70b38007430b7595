//! Wire codec for an IPv6 header optionally followed by a Segment Routing
//! Header (RFC 8754). Anything after the SRH is kept as opaque bytes.
//!
//! ```text
//!  0                   1                   2                   3
//!  0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1 2 3 4 5 6 7 8 9 0 1
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! | Next Header   |  Hdr Ext Len  | Routing Type  | Segments Left |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |  Last Entry   |     Flags     |              Tag              |
//! +-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+-+
//! |            Segment List[0] (128 bits IPv6 address)            |
//! |                              ...                              |
//! ```

use std::fmt::Write as _;

use thiserror::Error;

use super::addr::Ipv6Addr;

pub const IPV6_HEADER_LEN: usize = 40;
pub const SRH_FIXED_LEN: usize = 8;
pub const SID_LEN: usize = 16;

pub const PROTO_IPV6: u8 = 41;
pub const PROTO_ROUTING: u8 = 43;
pub const PROTO_ICMPV6: u8 = 58;
pub const PROTO_NONE: u8 = 59;
/// RFC 3692 experimental protocol number.
pub const PROTO_EXPERIMENTAL: u8 = 253;

pub const ROUTING_TYPE_SRH: u8 = 4;

// hdr-ext-len is 8 bits and every SID is two 8-byte units
pub const MAX_SEGMENTS: usize = 127;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PacketError {
    #[error("truncated {what}: need {needed} bytes, have {available}")]
    Truncated {
        what: &'static str,
        needed: usize,
        available: usize,
    },
    #[error("IP version {0} is not 6")]
    BadVersion(u8),
    #[error("routing type {0} is not SRH (4)")]
    UnsupportedRoutingType(u8),
    #[error("hdr-ext-len {hdr_ext_len} does not match last-entry {last_entry}")]
    SrhLengthMismatch { hdr_ext_len: u8, last_entry: u8 },
    #[error("segments-left {segments_left} exceeds segment list of {len}")]
    SegmentsLeftOutOfRange { segments_left: u8, len: usize },
    #[error("payload-length says {declared} bytes, packet carries {actual}")]
    PayloadLengthMismatch { declared: usize, actual: usize },
    #[error("segment list of {0} entries does not fit an SRH")]
    TooManySegments(usize),
    #[error("SRH with an empty segment list")]
    EmptySegmentList,
    #[error("flow label {0:#x} wider than 20 bits")]
    FlowLabelOverflow(u32),
    #[error("next-header {0} inconsistent with SRH presence")]
    NextHeaderMismatch(u8),
    #[error("payload of {0} bytes exceeds the 16-bit payload-length field")]
    PayloadTooLarge(usize),
}

/// Fixed IPv6 header. Version is implied and payload-length is derived
/// on serialization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ipv6Header {
    pub traffic_class: u8,
    pub flow_label: u32,
    pub next_header: u8,
    pub hop_limit: u8,
    pub src: Ipv6Addr,
    pub dst: Ipv6Addr,
}

impl Ipv6Header {
    pub fn new(src: Ipv6Addr, dst: Ipv6Addr, next_header: u8, hop_limit: u8) -> Self {
        Ipv6Header {
            traffic_class: 0,
            flow_label: 0,
            next_header,
            hop_limit,
            src,
            dst,
        }
    }
}

/// Segment Routing Header. `segments[0]` is the final segment of the
/// path, so the active segment is `segments[segments_left]` once
/// segments-left has been decremented. Flags and tag are not modelled and
/// go on the wire as zero.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentRoutingHeader {
    pub next_header: u8,
    pub segments_left: u8,
    pub segments: Vec<Ipv6Addr>,
}

impl SegmentRoutingHeader {
    pub fn last_entry(&self) -> u8 {
        self.segments.len().saturating_sub(1) as u8
    }

    pub fn hdr_ext_len(&self) -> u8 {
        (2 * self.segments.len()) as u8
    }

    pub fn wire_len(&self) -> usize {
        SRH_FIXED_LEN + SID_LEN * self.segments.len()
    }

    fn validate(&self) -> Result<(), PacketError> {
        if self.segments.is_empty() {
            return Err(PacketError::EmptySegmentList);
        }
        if self.segments.len() > MAX_SEGMENTS {
            return Err(PacketError::TooManySegments(self.segments.len()));
        }
        if self.segments_left as usize > self.segments.len() {
            return Err(PacketError::SegmentsLeftOutOfRange {
                segments_left: self.segments_left,
                len: self.segments.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub outer: Ipv6Header,
    pub srh: Option<SegmentRoutingHeader>,
    pub payload: Vec<u8>,
}

impl Packet {
    /// Number of bytes the header chain occupies before the payload.
    pub fn header_len(&self) -> usize {
        IPV6_HEADER_LEN + self.srh.as_ref().map_or(0, |s| s.wire_len())
    }

    pub fn payload_length(&self) -> usize {
        self.srh.as_ref().map_or(0, |s| s.wire_len()) + self.payload.len()
    }

    pub fn wire_len(&self) -> usize {
        IPV6_HEADER_LEN + self.payload_length()
    }

    /// Protocol of the payload, looking through the SRH if present.
    pub fn payload_protocol(&self) -> u8 {
        self.srh.as_ref().map_or(self.outer.next_header, |s| s.next_header)
    }

    pub fn segments_left(&self) -> Option<u8> {
        self.srh.as_ref().map(|s| s.segments_left)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, PacketError> {
        serialize_packet(self)
    }
}

fn need(what: &'static str, needed: usize, available: usize) -> Result<(), PacketError> {
    if available < needed {
        Err(PacketError::Truncated {
            what,
            needed,
            available,
        })
    } else {
        Ok(())
    }
}

fn read_addr(bytes: &[u8]) -> Ipv6Addr {
    let mut octets = [0u8; 16];
    octets.copy_from_slice(&bytes[..16]);
    Ipv6Addr::from_octets(octets)
}

pub fn parse_packet(bytes: &[u8]) -> Result<Packet, PacketError> {
    need("IPv6 header", IPV6_HEADER_LEN, bytes.len())?;

    let version = bytes[0] >> 4;
    if version != 6 {
        return Err(PacketError::BadVersion(version));
    }
    let traffic_class = (bytes[0] << 4) | (bytes[1] >> 4);
    let flow_label = (u32::from(bytes[1] & 0x0f) << 16) | (u32::from(bytes[2]) << 8) | u32::from(bytes[3]);
    let declared = u16::from_be_bytes([bytes[4], bytes[5]]) as usize;
    let next_header = bytes[6];
    let hop_limit = bytes[7];
    let src = read_addr(&bytes[8..24]);
    let dst = read_addr(&bytes[24..40]);

    let rest = &bytes[IPV6_HEADER_LEN..];
    need("IPv6 payload", declared, rest.len())?;
    if declared != rest.len() {
        return Err(PacketError::PayloadLengthMismatch {
            declared,
            actual: rest.len(),
        });
    }

    let outer = Ipv6Header {
        traffic_class,
        flow_label,
        next_header,
        hop_limit,
        src,
        dst,
    };

    if next_header != PROTO_ROUTING {
        return Ok(Packet {
            outer,
            srh: None,
            payload: rest.to_vec(),
        });
    }

    need("routing header", SRH_FIXED_LEN, rest.len())?;
    let srh_next = rest[0];
    let hdr_ext_len = rest[1];
    let routing_type = rest[2];
    let segments_left = rest[3];
    let last_entry = rest[4];
    if routing_type != ROUTING_TYPE_SRH {
        return Err(PacketError::UnsupportedRoutingType(routing_type));
    }
    let srh_len = SRH_FIXED_LEN + 8 * hdr_ext_len as usize;
    need("segment routing header", srh_len, rest.len())?;
    if hdr_ext_len as usize != 2 * (last_entry as usize + 1) {
        return Err(PacketError::SrhLengthMismatch {
            hdr_ext_len,
            last_entry,
        });
    }
    let n = last_entry as usize + 1;
    if segments_left as usize > n {
        return Err(PacketError::SegmentsLeftOutOfRange { segments_left, len: n });
    }
    let segments = rest[SRH_FIXED_LEN..srh_len]
        .chunks_exact(SID_LEN)
        .map(read_addr)
        .collect();

    Ok(Packet {
        outer,
        srh: Some(SegmentRoutingHeader {
            next_header: srh_next,
            segments_left,
            segments,
        }),
        payload: rest[srh_len..].to_vec(),
    })
}

pub fn serialize_packet(p: &Packet) -> Result<Vec<u8>, PacketError> {
    if p.outer.flow_label > 0xf_ffff {
        return Err(PacketError::FlowLabelOverflow(p.outer.flow_label));
    }
    match &p.srh {
        Some(srh) => {
            srh.validate()?;
            if p.outer.next_header != PROTO_ROUTING {
                return Err(PacketError::NextHeaderMismatch(p.outer.next_header));
            }
        }
        None if p.outer.next_header == PROTO_ROUTING => {
            return Err(PacketError::NextHeaderMismatch(p.outer.next_header));
        }
        None => {}
    }
    let payload_length = p.payload_length();
    if payload_length > u16::MAX as usize {
        return Err(PacketError::PayloadTooLarge(payload_length));
    }

    let mut out = Vec::with_capacity(IPV6_HEADER_LEN + payload_length);
    let h = &p.outer;
    out.push(0x60 | (h.traffic_class >> 4));
    out.push((h.traffic_class << 4) | ((h.flow_label >> 16) as u8 & 0x0f));
    out.push((h.flow_label >> 8) as u8);
    out.push(h.flow_label as u8);
    out.extend_from_slice(&(payload_length as u16).to_be_bytes());
    out.push(h.next_header);
    out.push(h.hop_limit);
    out.extend_from_slice(&h.src.octets());
    out.extend_from_slice(&h.dst.octets());

    if let Some(srh) = &p.srh {
        out.push(srh.next_header);
        out.push(srh.hdr_ext_len());
        out.push(ROUTING_TYPE_SRH);
        out.push(srh.segments_left);
        out.push(srh.last_entry());
        out.push(0); // flags
        out.extend_from_slice(&[0, 0]); // tag
        for sid in &srh.segments {
            out.extend_from_slice(&sid.octets());
        }
    }
    out.extend_from_slice(&p.payload);
    Ok(out)
}

/// Two lowercase hex digits per byte, space separated, 16 bytes a line.
pub fn hex_dump(bytes: &[u8]) -> String {
    let mut out = String::with_capacity(bytes.len() * 3);
    for line in bytes.chunks(16) {
        for (i, b) in line.iter().enumerate() {
            if i > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{b:02x}");
        }
        out.push('\n');
    }
    out
}
