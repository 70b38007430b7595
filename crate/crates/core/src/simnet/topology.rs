use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fib::{Fib, FibAction, FibEntry, FibError, DEFAULT_TABLE};
use crate::net::{Ipv6Addr, Prefix};
use crate::usid::{Usid, UsidError, UsidScheme};

pub const DEFAULT_ENCAP_HOP_LIMIT: u8 = 64;
pub const DEFAULT_RELOOKUP_LIMIT: usize = 4;
pub const DEFAULT_HOST_PREFIX_LEN: u8 = 64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TopologyError {
    #[error("topology has no nodes")]
    Empty,
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown host `{0}`")]
    UnknownHost(String),
    #[error("node `{node}` already has a link named `{link}`")]
    DuplicateLink { node: String, link: String },
    #[error("duplicate host `{0}`")]
    DuplicateHost(String),
    #[error("address {0} is already used")]
    DuplicateAddress(Ipv6Addr),
    #[error("locator {locator} of node `{node}` overlaps another node's locator")]
    DuplicateLocator { node: String, locator: Prefix },
    #[error("node `{node}`: {source}")]
    Fib { node: String, source: FibError },
    #[error("node `{node}` routes, line {line}: {message}")]
    Route { node: String, line: usize, message: String },
    #[error(transparent)]
    Scheme(#[from] UsidError),
    #[error("invalid config: {0}")]
    Config(String),
}

/// Dataplane the node stands in for. All kinds run the same engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Linux,
    Vpp,
    P4,
    #[default]
    Generic,
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NodeKind::Linux => "linux",
            NodeKind::Vpp => "vpp",
            NodeKind::P4 => "p4",
            NodeKind::Generic => "generic",
        })
    }
}

/// What sits at the far end of a node's link.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Peer {
    Node { node: String, link: String },
    Host(String),
}

#[derive(Debug, Clone)]
pub struct Node {
    pub name: String,
    pub kind: NodeKind,
    /// Set on uN-capable nodes: block followed by the node's uSID.
    pub locator: Option<Prefix>,
    pub fib: Fib,
    pub links: BTreeMap<String, Peer>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoint {
    pub node: String,
    pub link: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub a: Endpoint,
    pub b: Endpoint,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Host {
    pub name: String,
    pub address: Ipv6Addr,
    pub prefix: Prefix,
    pub node: String,
    pub link: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimSettings {
    /// Outer hop-limit written by encapsulation.
    pub encap_hop_limit: u8,
    /// Successive local lookups a single node visit may chain after the
    /// first one.
    pub relookup_limit: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        SimSettings {
            encap_hop_limit: DEFAULT_ENCAP_HOP_LIMIT,
            relookup_limit: DEFAULT_RELOOKUP_LIMIT,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Topology {
    pub scheme: UsidScheme,
    pub settings: SimSettings,
    nodes: BTreeMap<String, Node>,
    links: Vec<Link>,
    hosts: BTreeMap<String, Host>,
}

impl Topology {
    pub fn new(scheme: UsidScheme) -> Self {
        Topology {
            scheme,
            settings: SimSettings::default(),
            nodes: BTreeMap::new(),
            links: Vec::new(),
            hosts: BTreeMap::new(),
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = &Node> {
        self.nodes.values()
    }

    pub fn node(&self, name: &str) -> Result<&Node, TopologyError> {
        self.nodes
            .get(name)
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn node_mut(&mut self, name: &str) -> Result<&mut Node, TopologyError> {
        self.nodes
            .get_mut(name)
            .ok_or_else(|| TopologyError::UnknownNode(name.to_string()))
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn hosts(&self) -> impl Iterator<Item = &Host> {
        self.hosts.values()
    }

    pub fn host(&self, name: &str) -> Result<&Host, TopologyError> {
        self.hosts
            .get(name)
            .ok_or_else(|| TopologyError::UnknownHost(name.to_string()))
    }

    /// uSID of an SR node, read from its locator.
    pub fn node_usid(&self, name: &str) -> Result<Option<Usid>, TopologyError> {
        let node = self.node(name)?;
        Ok(node.locator.map(|loc| self.scheme.usid_at(loc.address(), 0)))
    }

    /// Adds a node. A node with a locator is provisioned as a uN node.
    pub fn add_node(&mut self, name: &str, kind: NodeKind, locator: Option<Prefix>) -> Result<(), TopologyError> {
        if self.nodes.contains_key(name) {
            return Err(TopologyError::DuplicateNode(name.to_string()));
        }
        let mut fib = Fib::default();
        if let Some(loc) = locator {
            if self
                .nodes
                .values()
                .any(|n| n.locator.is_some_and(|l| l.covers(&loc) || loc.covers(&l)))
            {
                return Err(TopologyError::DuplicateLocator {
                    node: name.to_string(),
                    locator: loc,
                });
            }
            fib.provision_un_node(&self.scheme, loc)
                .map_err(|source| TopologyError::Fib {
                    node: name.to_string(),
                    source,
                })?;
        }
        self.nodes.insert(
            name.to_string(),
            Node {
                name: name.to_string(),
                kind,
                locator,
                fib,
                links: BTreeMap::new(),
            },
        );
        Ok(())
    }

    fn attach(&mut self, node: &str, link: &str, peer: Peer) -> Result<(), TopologyError> {
        let n = self.node_mut(node)?;
        if n.links.contains_key(link) {
            return Err(TopologyError::DuplicateLink {
                node: node.to_string(),
                link: link.to_string(),
            });
        }
        n.links.insert(link.to_string(), peer);
        n.fib.add_link(link);
        Ok(())
    }

    /// Point-to-point link. Device names default to `<a>-<b>` on `a` and
    /// `<b>-<a>` on `b`.
    pub fn add_link(
        &mut self,
        a: &str,
        a_dev: Option<&str>,
        b: &str,
        b_dev: Option<&str>,
    ) -> Result<(), TopologyError> {
        self.node(a)?;
        self.node(b)?;
        let a_dev = a_dev.map_or_else(|| format!("{a}-{b}"), str::to_string);
        let b_dev = b_dev.map_or_else(|| format!("{b}-{a}"), str::to_string);
        if self.node(a)?.links.contains_key(&a_dev) {
            return Err(TopologyError::DuplicateLink {
                node: a.to_string(),
                link: a_dev,
            });
        }
        if self.node(b)?.links.contains_key(&b_dev) || (a == b && a_dev == b_dev) {
            return Err(TopologyError::DuplicateLink {
                node: b.to_string(),
                link: b_dev,
            });
        }
        self.attach(
            a,
            &a_dev,
            Peer::Node {
                node: b.to_string(),
                link: b_dev.clone(),
            },
        )?;
        self.attach(
            b,
            &b_dev,
            Peer::Node {
                node: a.to_string(),
                link: a_dev.clone(),
            },
        )?;
        self.links.push(Link {
            a: Endpoint {
                node: a.to_string(),
                link: a_dev,
            },
            b: Endpoint {
                node: b.to_string(),
                link: b_dev,
            },
        });
        Ok(())
    }

    /// Attaches a host and installs the connected route for its prefix on
    /// the attachment node.
    pub fn add_host(
        &mut self,
        name: &str,
        address: Ipv6Addr,
        prefix_len: u8,
        node: &str,
        dev: Option<&str>,
    ) -> Result<(), TopologyError> {
        if self.hosts.contains_key(name) {
            return Err(TopologyError::DuplicateHost(name.to_string()));
        }
        if self.hosts.values().any(|h| h.address == address) {
            return Err(TopologyError::DuplicateAddress(address));
        }
        let prefix = Prefix::new(address, prefix_len).map_err(|e| TopologyError::Config(e.to_string()))?;
        let dev = dev.map_or_else(|| format!("{node}-{name}"), str::to_string);
        self.attach(node, &dev, Peer::Host(name.to_string()))?;
        self.install(
            node,
            FibEntry {
                table: DEFAULT_TABLE,
                prefix,
                action: FibAction::Forward {
                    next_hop: address,
                    link: dev.clone(),
                },
            },
        )?;
        self.hosts.insert(
            name.to_string(),
            Host {
                name: name.to_string(),
                address,
                prefix,
                node: node.to_string(),
                link: dev,
            },
        );
        Ok(())
    }

    pub fn install(&mut self, node: &str, entry: FibEntry) -> Result<(), TopologyError> {
        self.node_mut(node)?
            .fib
            .insert(entry.table, entry.prefix, entry.action)
            .map_err(|source| TopologyError::Fib {
                node: node.to_string(),
                source,
            })
    }

    /// Installs BFS shortest-path routes toward every node locator and host
    /// prefix, skipping prefixes a node already has in the main table.
    /// Neighbours are explored in link-name order so the result is
    /// deterministic.
    pub fn install_shortest_path_routes(&mut self) -> Result<(), TopologyError> {
        let mut destinations: Vec<(String, Prefix)> = Vec::new();
        for n in self.nodes.values() {
            if let Some(loc) = n.locator {
                destinations.push((n.name.clone(), loc));
            }
        }
        for h in self.hosts.values() {
            destinations.push((h.node.clone(), h.prefix));
        }

        let names: Vec<String> = self.nodes.keys().cloned().collect();
        for src in &names {
            let first_hops = self.first_hops(src);
            for (owner, prefix) in &destinations {
                if owner == src {
                    continue;
                }
                let Some((link, via)) = first_hops.get(owner) else {
                    continue;
                };
                let node = self.nodes.get_mut(src).expect("listed above");
                if node.fib.table(DEFAULT_TABLE).is_ok_and(|t| t.get(prefix).is_some()) {
                    continue;
                }
                let next_hop = self.nodes[via].locator.map_or(Ipv6Addr::UNSPECIFIED, |l| l.address());
                self.install(
                    src,
                    FibEntry {
                        table: DEFAULT_TABLE,
                        prefix: *prefix,
                        action: FibAction::Forward {
                            next_hop,
                            link: link.clone(),
                        },
                    },
                )?;
            }
        }
        Ok(())
    }

    /// For every reachable node: the local link to leave on and the
    /// neighbour it leads to.
    fn first_hops(&self, src: &str) -> BTreeMap<String, (String, String)> {
        let mut out: BTreeMap<String, (String, String)> = BTreeMap::new();
        let mut seen: BTreeSet<&str> = BTreeSet::from([src]);
        let mut queue: VecDeque<(&str, Option<(String, String)>)> = VecDeque::from([(src, None)]);
        while let Some((cur, first)) = queue.pop_front() {
            for (link, peer) in &self.nodes[cur].links {
                let Peer::Node { node: next, .. } = peer else {
                    continue;
                };
                if !seen.insert(next.as_str()) {
                    continue;
                }
                let hop = first.clone().unwrap_or_else(|| (link.clone(), next.clone()));
                out.insert(next.clone(), hop.clone());
                queue.push_back((next.as_str(), Some(hop)));
            }
        }
        out
    }
}
