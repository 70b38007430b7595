//! Topology files.
//!
//! TOML by default; a document whose first non-blank character is `{` is
//! read as JSON with the same schema.
//!
//! ```toml
//! [scheme]
//! usid.block = "fcbb:bbbb::/32"
//! usid.nf_bits = 16
//! usid.terminator = "f00d"
//!
//! [[nodes]]
//! name = "r1"
//! kind = "linux"
//! locator = "fcbb:bbbb:0100::/48"
//!
//! [[links]]
//! a = "r1"
//! b = "r2"
//!
//! [[hosts]]
//! name = "h1"
//! address = "fd00:0:1::2"
//! node = "r1"
//!
//! [[routes]]
//! node = "r1"
//! lines = "behavior 254 fcbb:bbbb:0100:f00d::/64 end.dt6 table 254"
//! ```

use serde::{Deserialize, Serialize};

use super::topology::{NodeKind, SimSettings, Topology, TopologyError, DEFAULT_HOST_PREFIX_LEN};
use crate::fib::parse_route_lines;
use crate::net::{Ipv6Addr, Prefix};
use crate::usid::{Dt6Encoding, Usid, UsidScheme, DEFAULT_TERMINATOR, DEFAULT_USID_LEN};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UsidConfig {
    pub block: Prefix,
    #[serde(default = "default_nf")]
    pub nf_bits: u8,
    #[serde(default = "default_terminator")]
    pub terminator: String,
    #[serde(default)]
    pub arg_bits: u8,
    #[serde(default = "default_dt6")]
    pub dt6_encoding: Dt6Encoding,
}

fn default_nf() -> u8 {
    DEFAULT_USID_LEN
}

fn default_terminator() -> String {
    format!("{DEFAULT_TERMINATOR:x}")
}

fn default_dt6() -> Dt6Encoding {
    Dt6Encoding::Terminator
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    pub usid: UsidConfig,
    #[serde(default)]
    pub encap_hop_limit: Option<u8>,
    #[serde(default)]
    pub relookup_limit: Option<usize>,
    /// Fill in shortest-path forwarding routes for locators and host
    /// prefixes not covered by explicit routes.
    #[serde(default = "default_true")]
    pub auto_routes: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeConfig {
    pub name: String,
    #[serde(default)]
    pub kind: NodeKind,
    #[serde(default)]
    pub locator: Option<Prefix>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub a: String,
    pub b: String,
    #[serde(default)]
    pub a_dev: Option<String>,
    #[serde(default)]
    pub b_dev: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HostConfig {
    pub name: String,
    pub address: Ipv6Addr,
    pub node: String,
    #[serde(default)]
    pub prefix_len: Option<u8>,
    #[serde(default)]
    pub dev: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoutesConfig {
    pub node: String,
    pub lines: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub nodes: Vec<NodeConfig>,
    #[serde(default)]
    pub links: Vec<LinkConfig>,
    #[serde(default)]
    pub hosts: Vec<HostConfig>,
    #[serde(default)]
    pub routes: Vec<RoutesConfig>,
}

fn parse_terminator(s: &str) -> Result<Usid, TopologyError> {
    let digits = s.trim().trim_start_matches("0x");
    Usid::from_str_radix(digits, 16).map_err(|_| TopologyError::Config(format!("invalid terminator `{s}`")))
}

impl SchemeConfig {
    pub fn to_scheme(&self) -> Result<UsidScheme, TopologyError> {
        let u = &self.usid;
        let scheme = UsidScheme::with_terminator(u.block, u.nf_bits, parse_terminator(&u.terminator)?)?
            .with_arg_len(u.arg_bits)
            .with_dt6_encoding(u.dt6_encoding);
        Ok(scheme)
    }
}

impl TopologyConfig {
    pub fn parse(text: &str) -> Result<Self, TopologyError> {
        if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| TopologyError::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| TopologyError::Config(e.to_string()))
        }
    }

    /// Builds the topology: nodes (provisioned as uN when they have a
    /// locator), links, hosts with their connected routes, explicit route
    /// lines, then shortest-path routes when enabled.
    pub fn build(&self) -> Result<Topology, TopologyError> {
        if self.nodes.is_empty() {
            return Err(TopologyError::Empty);
        }
        let mut topo = Topology::new(self.scheme.to_scheme()?);
        let defaults = SimSettings::default();
        topo.settings = SimSettings {
            encap_hop_limit: self.scheme.encap_hop_limit.unwrap_or(defaults.encap_hop_limit),
            relookup_limit: self.scheme.relookup_limit.unwrap_or(defaults.relookup_limit),
        };
        for n in &self.nodes {
            topo.add_node(&n.name, n.kind, n.locator)?;
        }
        for l in &self.links {
            topo.add_link(&l.a, l.a_dev.as_deref(), &l.b, l.b_dev.as_deref())?;
        }
        for h in &self.hosts {
            topo.add_host(
                &h.name,
                h.address,
                h.prefix_len.unwrap_or(DEFAULT_HOST_PREFIX_LEN),
                &h.node,
                h.dev.as_deref(),
            )?;
        }
        for r in &self.routes {
            topo.node(&r.node)?;
            let entries = parse_route_lines(&r.lines, &topo.scheme).map_err(|e| TopologyError::Route {
                node: r.node.clone(),
                line: e.line,
                message: e.message,
            })?;
            for entry in entries {
                topo.install(&r.node, entry)?;
            }
        }
        if self.scheme.auto_routes {
            topo.install_shortest_path_routes()?;
        }
        Ok(topo)
    }
}

pub fn load_topology(text: &str) -> Result<Topology, TopologyError> {
    TopologyConfig::parse(text)?.build()
}
