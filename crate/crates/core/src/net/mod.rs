//! IPv6 addressing and the SRH packet model.

pub mod addr;
pub mod packet;

pub use addr::{AddrError, Ipv6Addr, Prefix};
pub use packet::{hex_dump, parse_packet, serialize_packet, Ipv6Header, Packet, PacketError, SegmentRoutingHeader};
