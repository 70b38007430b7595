//! Micro SID container arithmetic.
//!
//! A container is a 128-bit SID laid out as
//! `[ block (B bits) | usid_1 | usid_2 | ... | usid_k | 0 ... ]`, each uSID
//! being NF bits wide. The first uSID is the active one. Consuming it
//! shifts everything after the block left by NF bits and fills the tail
//! with zeros; an all-zero uSID marks the end of the container.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::net::{Ipv6Addr, Prefix};

/// One NF-bit micro instruction. Widths up to 32 bits are supported.
pub type Usid = u32;

pub const END_OF_CONTAINER: Usid = 0;
pub const DEFAULT_TERMINATOR: Usid = 0xf00d;
pub const DEFAULT_USID_LEN: u8 = 16;
pub const MAX_USID_LEN: u8 = 32;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum UsidError {
    #[error("invalid uSID scheme: {0}")]
    InvalidScheme(String),
    #[error("address {0} is outside the uSID block")]
    OutsideBlock(Ipv6Addr),
    #[error("empty micro-program")]
    EmptyProgram,
    #[error("{len} uSIDs do not fit a container of capacity {capacity}")]
    Overflow { len: usize, capacity: usize },
    #[error("uSID {0:#x} is reserved or does not fit the uSID width")]
    InvalidUsid(Usid),
    #[error("empty node list")]
    EmptyPath,
    #[error("a container of capacity {0} cannot hold a uSID and the terminator")]
    NoRoomForTerminator(usize),
    #[error("count must be at least 1")]
    ZeroCount,
}

/// How a path asks its egress for End.DT6.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dt6Encoding {
    /// A dedicated uSID placed right after the egress node's uSID.
    Terminator,
    /// Experimental: nodes own a /44 so the low nibble of the node uSID
    /// selects a function. Nibble 0 is uN and nibble 1 is End.DT6
    /// (`fcbb:bbbb:0101::` asks node 0x0100 to decapsulate). The remaining
    /// 14 values are left unassigned.
    FunctionNibble,
}

pub const FUNCTION_NIBBLE_DT6: Usid = 0x1;

/// Locator block, uSID width and terminator convention of a domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UsidScheme {
    block: Prefix,
    usid_len: u8,
    arg_len: u8,
    terminator: Usid,
    dt6_encoding: Dt6Encoding,
}

impl UsidScheme {
    pub fn new(block: Prefix, usid_len: u8) -> Result<Self, UsidError> {
        Self::with_terminator(block, usid_len, DEFAULT_TERMINATOR)
    }

    pub fn with_terminator(block: Prefix, usid_len: u8, terminator: Usid) -> Result<Self, UsidError> {
        let b = block.len() as u32;
        let nf = usid_len as u32;
        if !b.is_multiple_of(8) || !nf.is_multiple_of(8) {
            return Err(UsidError::InvalidScheme(format!(
                "block length {b} and uSID length {nf} must be divisible by 8"
            )));
        }
        if nf == 0 || usid_len > MAX_USID_LEN {
            return Err(UsidError::InvalidScheme(format!(
                "uSID length {nf} outside 8..={MAX_USID_LEN}"
            )));
        }
        if b + nf > 128 {
            return Err(UsidError::InvalidScheme(format!(
                "block /{b} leaves no room for a {nf}-bit uSID"
            )));
        }
        let scheme = UsidScheme {
            block,
            usid_len,
            arg_len: 0,
            terminator,
            dt6_encoding: Dt6Encoding::Terminator,
        };
        if terminator == END_OF_CONTAINER || terminator > scheme.usid_max() {
            return Err(UsidError::InvalidScheme(format!(
                "terminator {terminator:#x} must be a non-zero {nf}-bit value"
            )));
        }
        Ok(scheme)
    }

    /// `fcbb:bbbb::/32`, 16-bit uSIDs, `0xf00d` terminator.
    pub fn demo() -> Self {
        let block = "fcbb:bbbb::/32".parse().expect("static prefix");
        UsidScheme::new(block, DEFAULT_USID_LEN).expect("static scheme")
    }

    /// Carried as configuration only.
    pub fn with_arg_len(mut self, arg_len: u8) -> Self {
        self.arg_len = arg_len;
        self
    }

    pub fn with_dt6_encoding(mut self, encoding: Dt6Encoding) -> Self {
        self.dt6_encoding = encoding;
        self
    }

    pub fn block(&self) -> Prefix {
        self.block
    }

    pub fn block_len(&self) -> u8 {
        self.block.len()
    }

    pub fn usid_len(&self) -> u8 {
        self.usid_len
    }

    pub fn arg_len(&self) -> u8 {
        self.arg_len
    }

    pub fn terminator(&self) -> Usid {
        self.terminator
    }

    pub fn dt6_encoding(&self) -> Dt6Encoding {
        self.dt6_encoding
    }

    pub fn usid_max(&self) -> Usid {
        if self.usid_len >= 32 {
            Usid::MAX
        } else {
            (1 << self.usid_len) - 1
        }
    }

    pub fn contains(&self, addr: Ipv6Addr) -> bool {
        self.block.contains(addr)
    }

    /// Node locator length: block plus one uSID (/48 by default).
    pub fn locator_len(&self) -> u8 {
        self.block_len() + self.usid_len
    }

    /// Length of the prefix matching a node uSID followed by one more
    /// slot (/64 by default).
    pub fn end_prefix_len(&self) -> Option<u8> {
        let len = self.block_len() as u32 + 2 * self.usid_len as u32;
        (len <= 128).then_some(len as u8)
    }

    /// uSID in slot `index` (0 = active), or 0 past the end of the address.
    pub fn usid_at(&self, addr: Ipv6Addr, index: usize) -> Usid {
        let start = self.block_len() as usize + index * self.usid_len as usize;
        let end = start + self.usid_len as usize;
        if end > 128 {
            return END_OF_CONTAINER;
        }
        ((addr.to_bits() >> (128 - end)) as Usid) & self.usid_max()
    }

    /// Address of the locator prefix for `usid`, i.e. block followed by the uSID.
    pub fn locator_for(&self, usid: Usid) -> Result<Prefix, UsidError> {
        if usid > self.usid_max() {
            return Err(UsidError::InvalidUsid(usid));
        }
        let shift = 128 - self.locator_len() as u32;
        let bits = self.block.address().to_bits() | ((usid as u128) << shift);
        Prefix::new(Ipv6Addr::new(bits), self.locator_len()).map_err(|e| UsidError::InvalidScheme(e.to_string()))
    }

    fn check_in_block(&self, addr: Ipv6Addr) -> Result<(), UsidError> {
        if self.contains(addr) {
            Ok(())
        } else {
            Err(UsidError::OutsideBlock(addr))
        }
    }

    fn check_usid(&self, usid: Usid) -> Result<(), UsidError> {
        if usid == END_OF_CONTAINER || usid > self.usid_max() {
            Err(UsidError::InvalidUsid(usid))
        } else {
            Ok(())
        }
    }
}

impl fmt::Display for UsidScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "block {} nf {} terminator {:#x}",
            self.block, self.usid_len, self.terminator
        )
    }
}

/// Pops the active uSID: bits after the block move left by NF and NF zero
/// bits enter at the tail. Block bits are untouched.
pub fn usid_shift(da: Ipv6Addr, scheme: &UsidScheme) -> Result<Ipv6Addr, UsidError> {
    scheme.check_in_block(da)?;
    let block_mask = scheme.block().mask();
    let bits = da.to_bits();
    let shifted = (bits << scheme.usid_len()) & !block_mask;
    Ok(Ipv6Addr::new((bits & block_mask) | shifted))
}

/// The uSID that becomes active after one shift. Zero means the container
/// is exhausted.
pub fn next_usid(da: Ipv6Addr, scheme: &UsidScheme) -> Result<Usid, UsidError> {
    scheme.check_in_block(da)?;
    Ok(scheme.usid_at(da, 1))
}

pub fn active_usid(da: Ipv6Addr, scheme: &UsidScheme) -> Result<Usid, UsidError> {
    scheme.check_in_block(da)?;
    Ok(scheme.usid_at(da, 0))
}

/// `floor((128 - B) / NF)`
pub fn container_capacity(scheme: &UsidScheme) -> usize {
    (128 - scheme.block_len() as usize) / scheme.usid_len() as usize
}

/// `ceil(n / C)`: number of 128-bit containers for `n` uSIDs, with no
/// allowance for a terminator slot.
pub fn usid_list_length(n: usize, scheme: &UsidScheme) -> Result<usize, UsidError> {
    if n == 0 {
        return Err(UsidError::ZeroCount);
    }
    Ok(n.div_ceil(container_capacity(scheme)))
}

/// Ordered uSIDs destined for a single container. Never contains the
/// end-of-container value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MicroProgram(Vec<Usid>);

impl MicroProgram {
    pub fn new(usids: Vec<Usid>) -> Result<Self, UsidError> {
        if usids.is_empty() {
            return Err(UsidError::EmptyProgram);
        }
        if let Some(&bad) = usids.iter().find(|&&u| u == END_OF_CONTAINER) {
            return Err(UsidError::InvalidUsid(bad));
        }
        Ok(MicroProgram(usids))
    }

    pub fn usids(&self) -> &[Usid] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// A SID carrying a micro-program.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct UsidContainer(Ipv6Addr);

impl UsidContainer {
    pub fn address(&self) -> Ipv6Addr {
        self.0
    }

    /// uSIDs up to (not including) the first end-of-container slot.
    pub fn usids(&self, scheme: &UsidScheme) -> Vec<Usid> {
        (0..container_capacity(scheme))
            .map(|i| scheme.usid_at(self.0, i))
            .take_while(|&u| u != END_OF_CONTAINER)
            .collect()
    }
}

impl fmt::Display for UsidContainer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl From<UsidContainer> for Ipv6Addr {
    fn from(c: UsidContainer) -> Self {
        c.0
    }
}

pub fn build_container(program: &MicroProgram, scheme: &UsidScheme) -> Result<UsidContainer, UsidError> {
    let capacity = container_capacity(scheme);
    if program.len() > capacity {
        return Err(UsidError::Overflow {
            len: program.len(),
            capacity,
        });
    }
    let nf = scheme.usid_len() as usize;
    let mut bits = scheme.block().address().to_bits();
    for (i, &usid) in program.usids().iter().enumerate() {
        scheme.check_usid(usid)?;
        let end = scheme.block_len() as usize + (i + 1) * nf;
        bits |= (usid as u128) << (128 - end);
    }
    Ok(UsidContainer(Ipv6Addr::new(bits)))
}

/// Packs a node path into containers, greedily filling each one.
///
/// With `want_dt6` the egress (last node) must be followed by the End.DT6
/// request in the same container. Under the terminator encoding that costs
/// a slot, and a container holding only the terminator is not allowed, so
/// when the egress would fill the last container it is moved to a new one
/// together with the terminator.
pub fn compile_path(node_usids: &[Usid], want_dt6: bool, scheme: &UsidScheme) -> Result<Vec<UsidContainer>, UsidError> {
    if node_usids.is_empty() {
        return Err(UsidError::EmptyPath);
    }
    for &u in node_usids {
        scheme.check_usid(u)?;
    }
    let capacity = container_capacity(scheme);

    let mut groups: Vec<Vec<Usid>> = Vec::new();
    match (want_dt6, scheme.dt6_encoding()) {
        (true, Dt6Encoding::Terminator) => {
            if capacity < 2 {
                return Err(UsidError::NoRoomForTerminator(capacity));
            }
            groups.extend(node_usids.chunks(capacity).map(<[Usid]>::to_vec));
            let last = groups.last_mut().expect("non-empty path");
            if last.len() == capacity {
                let egress = last.pop().expect("full container");
                groups.push(vec![egress]);
            }
            groups.last_mut().expect("non-empty path").push(scheme.terminator());
        }
        (true, Dt6Encoding::FunctionNibble) => {
            let mut usids = node_usids.to_vec();
            let egress = usids.last_mut().expect("non-empty path");
            *egress |= FUNCTION_NIBBLE_DT6;
            groups.extend(usids.chunks(capacity).map(<[Usid]>::to_vec));
        }
        (false, _) => groups.extend(node_usids.chunks(capacity).map(<[Usid]>::to_vec)),
    }

    groups
        .into_iter()
        .map(|g| build_container(&MicroProgram::new(g)?, scheme))
        .collect()
}
