use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AddrError {
    #[error("invalid IPv6 address `{0}`")]
    InvalidAddress(String),
    #[error("invalid prefix `{0}`")]
    InvalidPrefix(String),
    #[error("prefix length {0} exceeds 128")]
    LengthOutOfRange(u32),
}

/// A 128-bit IPv6 address held in host order.
///
/// The textual form writes every group as four lowercase hex digits and
/// compresses the longest run of zero groups, including a run of one, so
/// `fcbb:bbbb:0200:0700:0600:0500:0400::` prints the way SID containers are
/// usually written.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ipv6Addr(u128);

impl Ipv6Addr {
    pub const UNSPECIFIED: Ipv6Addr = Ipv6Addr(0);

    pub const fn new(value: u128) -> Self {
        Ipv6Addr(value)
    }

    pub const fn to_bits(self) -> u128 {
        self.0
    }

    pub fn octets(self) -> [u8; 16] {
        self.0.to_be_bytes()
    }

    pub fn from_octets(octets: [u8; 16]) -> Self {
        Ipv6Addr(u128::from_be_bytes(octets))
    }

    pub fn segments(self) -> [u16; 8] {
        let mut out = [0u16; 8];
        for (i, group) in out.iter_mut().enumerate() {
            *group = (self.0 >> (112 - 16 * i)) as u16;
        }
        out
    }
}

impl From<std::net::Ipv6Addr> for Ipv6Addr {
    fn from(addr: std::net::Ipv6Addr) -> Self {
        Ipv6Addr(u128::from(addr))
    }
}

impl From<Ipv6Addr> for std::net::Ipv6Addr {
    fn from(addr: Ipv6Addr) -> Self {
        std::net::Ipv6Addr::from(addr.0)
    }
}

impl From<u128> for Ipv6Addr {
    fn from(value: u128) -> Self {
        Ipv6Addr(value)
    }
}

impl FromStr for Ipv6Addr {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.trim()
            .parse::<std::net::Ipv6Addr>()
            .map(Ipv6Addr::from)
            .map_err(|_| AddrError::InvalidAddress(s.to_string()))
    }
}

impl fmt::Display for Ipv6Addr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let groups = self.segments();

        // longest zero run, first one wins on ties
        let (mut best_start, mut best_len) = (0usize, 0usize);
        let mut i = 0;
        while i < 8 {
            if groups[i] == 0 {
                let start = i;
                while i < 8 && groups[i] == 0 {
                    i += 1;
                }
                if i - start > best_len {
                    best_start = start;
                    best_len = i - start;
                }
            } else {
                i += 1;
            }
        }

        let write_groups = |f: &mut fmt::Formatter<'_>, gs: &[u16]| -> fmt::Result {
            for (k, g) in gs.iter().enumerate() {
                if k > 0 {
                    f.write_str(":")?;
                }
                write!(f, "{g:04x}")?;
            }
            Ok(())
        };

        if best_len == 0 {
            return write_groups(f, &groups);
        }
        write_groups(f, &groups[..best_start])?;
        f.write_str("::")?;
        write_groups(f, &groups[best_start + best_len..])
    }
}

impl Serialize for Ipv6Addr {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Ipv6Addr {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Mask keeping the top `len` bits.
pub fn prefix_mask(len: u8) -> u128 {
    match len {
        0 => 0,
        128.. => u128::MAX,
        n => u128::MAX << (128 - n as u32),
    }
}

/// CIDR prefix, always stored normalized (host bits zero).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Prefix {
    address: Ipv6Addr,
    len: u8,
}

impl Prefix {
    /// Builds a prefix, clearing any bits past `len`.
    pub fn new(address: Ipv6Addr, len: u8) -> Result<Self, AddrError> {
        if len > 128 {
            return Err(AddrError::LengthOutOfRange(len as u32));
        }
        Ok(Prefix {
            address: Ipv6Addr(address.0 & prefix_mask(len)),
            len,
        })
    }

    pub fn address(&self) -> Ipv6Addr {
        self.address
    }

    #[allow(clippy::len_without_is_empty)]
    pub fn len(&self) -> u8 {
        self.len
    }

    pub fn is_default(&self) -> bool {
        self.len == 0
    }

    pub fn mask(&self) -> u128 {
        prefix_mask(self.len)
    }

    pub fn contains(&self, addr: Ipv6Addr) -> bool {
        addr.0 & self.mask() == self.address.0
    }

    /// True if every address in `other` is also in `self`.
    pub fn covers(&self, other: &Prefix) -> bool {
        self.len <= other.len && self.contains(other.address)
    }

    /// Same network bits, longer length.
    pub fn extend(&self, len: u8) -> Result<Prefix, AddrError> {
        Prefix::new(self.address, len)
    }
}

impl fmt::Display for Prefix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.address, self.len)
    }
}

impl FromStr for Prefix {
    type Err = AddrError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (addr, len) = s
            .split_once('/')
            .ok_or_else(|| AddrError::InvalidPrefix(s.to_string()))?;
        let len: u32 = len.parse().map_err(|_| AddrError::InvalidPrefix(s.to_string()))?;
        if len > 128 {
            return Err(AddrError::LengthOutOfRange(len));
        }
        Prefix::new(addr.parse()?, len as u8)
    }
}

impl Serialize for Prefix {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Prefix {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    #[test]
    fn sid_container_text_form() {
        for s in [
            "fcbb:bbbb:0800:0700:0200:f00d::",
            "fcbb:bbbb:0200:0700:0600:0500:0400::",
            "fcbb:bbbb:0300:f00d::",
            "fcbb:bbbb::",
        ] {
            assert_eq!(a(s).to_string(), s);
        }
    }

    #[test]
    fn compresses_longest_run_first_on_tie() {
        assert_eq!(a("1:0:0:2:0:0:3:4").to_string(), "0001::0002:0000:0000:0003:0004");
        assert_eq!(a("fd00:0:11::2").to_string(), "fd00:0000:0011::0002");
        assert_eq!(a("::").to_string(), "::");
        assert_eq!(a("::1").to_string(), "::0001");
        assert_eq!(
            a("1:2:3:4:5:6:7:8").to_string(),
            "0001:0002:0003:0004:0005:0006:0007:0008"
        );
    }

    #[test]
    fn prefix_normalizes_host_bits() {
        let p: Prefix = "fcbb:bbbb:0100:0200::/48".parse().unwrap();
        assert_eq!(p.to_string(), "fcbb:bbbb:0100::/48");
        assert!(p.contains(a("fcbb:bbbb:0100:0200::")));
        assert!(!p.contains(a("fcbb:bbbb:0200::")));
        assert!("::/129".parse::<Prefix>().is_err());
        assert!("fcbb::".parse::<Prefix>().is_err());
    }

    #[test]
    fn default_route_contains_everything() {
        let p: Prefix = "::/0".parse().unwrap();
        assert!(p.contains(a("ffff::1")));
    }

    proptest! {
        #[test]
        fn text_round_trip(v in any::<u128>()) {
            let addr = Ipv6Addr::new(v);
            prop_assert_eq!(addr.to_string().parse::<Ipv6Addr>().unwrap(), addr);
        }
    }
}
