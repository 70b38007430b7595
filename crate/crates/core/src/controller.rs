//! Path policies: turn a list of SR waypoints into uSID containers and
//! install the matching encapsulation at the ingress node.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fib::{EncapRule, FibAction, FibError, DEFAULT_TABLE};
use crate::net::Prefix;
use crate::simnet::{Topology, TopologyError};
use crate::usid::{compile_path, UsidContainer, UsidError};

pub type PolicyId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("node `{0}` has no locator and cannot be a waypoint")]
    NotSrNode(String),
    #[error("path must name at least one node")]
    EmptyPath,
    #[error("path ends at `{last}` but host `{host}` is attached to `{attached}`")]
    WrongEgress {
        last: String,
        host: String,
        attached: String,
    },
    #[error("`{0}` is both ingress and egress; its decapsulated traffic would hit the policy again")]
    EgressIsIngress(String),
    #[error("a policy from `{src}` to `{dst}` already exists (id {id})")]
    Duplicate { src: String, dst: String, id: PolicyId },
    #[error("no policy matches {0}")]
    NotFound(String),
    #[error(transparent)]
    Usid(#[from] UsidError),
    #[error("node `{node}`: {source}")]
    Fib { node: String, source: FibError },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Policy {
    pub id: PolicyId,
    /// The other direction of a symmetric policy.
    pub pair: Option<PolicyId>,
    pub src_host: String,
    pub dst_host: String,
    pub dst_prefix: Prefix,
    pub ingress: String,
    /// SR waypoints after the ingress; the last one is the egress.
    pub node_path: Vec<String>,
    pub containers: Vec<UsidContainer>,
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "policy {} {} -> {} ingress {} path {}",
            self.id,
            self.src_host,
            self.dst_host,
            self.ingress,
            self.node_path.join(",")
        )?;
        if let Some(pair) = self.pair {
            write!(f, " pair {pair}")?;
        }
        for c in &self.containers {
            write!(f, "\n  {c}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Selector {
    Id(PolicyId),
    Hosts { src: String, dst: String },
}

impl fmt::Display for Selector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Selector::Id(id) => write!(f, "id {id}"),
            Selector::Hosts { src, dst } => write!(f, "{src} -> {dst}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRecord {
    pub id: PolicyId,
    pub src: String,
    pub dst: String,
    pub path: Vec<String>,
    pub symmetric: bool,
}

/// What is needed to rebuild a controller on a fresh topology.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ControllerState {
    pub next_id: PolicyId,
    pub policies: Vec<PolicyRecord>,
}

#[derive(Debug, Clone, Default)]
pub struct Controller {
    next_id: PolicyId,
    policies: BTreeMap<PolicyId, Policy>,
    /// Entry each policy's encap rule replaced, restored on removal.
    displaced: BTreeMap<PolicyId, Option<FibAction>>,
}

struct Plan {
    src: String,
    dst: String,
    dst_prefix: Prefix,
    ingress: String,
    node_path: Vec<String>,
    containers: Vec<UsidContainer>,
}

impl Controller {
    pub fn new() -> Self {
        Controller {
            next_id: 1,
            ..Default::default()
        }
    }

    fn find(&self, src: &str, dst: &str) -> Option<&Policy> {
        self.policies.values().find(|p| p.src_host == src && p.dst_host == dst)
    }

    fn plan(&self, topo: &Topology, src: &str, dst: &str, path: &[String]) -> Result<Plan, ControllerError> {
        if let Some(p) = self.find(src, dst) {
            return Err(ControllerError::Duplicate {
                src: src.to_string(),
                dst: dst.to_string(),
                id: p.id,
            });
        }
        let ingress = topo.host(src)?.node.clone();
        let dst_host = topo.host(dst)?;
        // Paths may be written with the ingress first.
        let node_path: Vec<String> = match path {
            [first, rest @ ..] if !rest.is_empty() && *first == ingress => rest.to_vec(),
            _ => path.to_vec(),
        };
        let last = node_path.last().ok_or(ControllerError::EmptyPath)?;
        if *last != dst_host.node {
            return Err(ControllerError::WrongEgress {
                last: last.clone(),
                host: dst.to_string(),
                attached: dst_host.node.clone(),
            });
        }
        if *last == ingress {
            return Err(ControllerError::EgressIsIngress(ingress));
        }
        let mut usids = Vec::with_capacity(node_path.len());
        for n in &node_path {
            usids.push(
                topo.node_usid(n)?
                    .ok_or_else(|| ControllerError::NotSrNode(n.clone()))?,
            );
        }
        let containers = compile_path(&usids, true, &topo.scheme)?;
        Ok(Plan {
            src: src.to_string(),
            dst: dst.to_string(),
            dst_prefix: dst_host.prefix,
            ingress,
            node_path,
            containers,
        })
    }

    fn install(
        &mut self,
        topo: &mut Topology,
        plan: Plan,
        id: PolicyId,
        pair: Option<PolicyId>,
    ) -> Result<(), ControllerError> {
        let ingress = topo.node(&plan.ingress)?;
        let src = ingress
            .locator
            .map_or_else(|| topo.host(&plan.src).map(|h| h.address), |l| Ok(l.address()))?;
        let rule = EncapRule {
            containers: plan.containers.iter().map(UsidContainer::address).collect(),
            src,
            hop_limit: topo.settings.encap_hop_limit,
        };
        let old = topo
            .node_mut(&plan.ingress)?
            .fib
            .replace(DEFAULT_TABLE, plan.dst_prefix, FibAction::Encap(rule))
            .map_err(|source| ControllerError::Fib {
                node: plan.ingress.clone(),
                source,
            })?;
        self.displaced.insert(id, old);
        self.policies.insert(
            id,
            Policy {
                id,
                pair,
                src_host: plan.src,
                dst_host: plan.dst,
                dst_prefix: plan.dst_prefix,
                ingress: plan.ingress,
                node_path: plan.node_path,
                containers: plan.containers,
            },
        );
        Ok(())
    }

    fn uninstall(&mut self, topo: &mut Topology, id: PolicyId) -> Option<Policy> {
        let policy = self.policies.remove(&id)?;
        let old = self.displaced.remove(&id).flatten();
        if let Ok(node) = topo.node_mut(&policy.ingress) {
            match old {
                Some(action) => {
                    let _ = node.fib.replace(DEFAULT_TABLE, policy.dst_prefix, action);
                }
                None => {
                    node.fib.remove(DEFAULT_TABLE, &policy.dst_prefix);
                }
            }
        }
        Some(policy)
    }

    /// Creates a policy steering `src -> dst` over `path`. A symmetric
    /// policy also gets the reverse direction, walking the same nodes
    /// backwards. Nothing is installed unless every direction compiles.
    pub fn create_policy(
        &mut self,
        topo: &mut Topology,
        src: &str,
        dst: &str,
        path: &[String],
        symmetric: bool,
    ) -> Result<Vec<Policy>, ControllerError> {
        let forward = self.plan(topo, src, dst, path)?;
        let reverse = if symmetric {
            let mut full = vec![forward.ingress.clone()];
            full.extend(forward.node_path.iter().cloned());
            full.reverse();
            Some(self.plan(topo, dst, src, &full[1..])?)
        } else {
            None
        };

        let id = self.next_id;
        let pair_id = reverse.as_ref().map(|_| id + 1);
        self.install(topo, forward, id, pair_id)?;
        if let Some(rev) = reverse {
            if let Err(e) = self.install(topo, rev, id + 1, Some(id)) {
                self.uninstall(topo, id);
                return Err(e);
            }
        }
        self.next_id = id + 1 + u64::from(pair_id.is_some());
        Ok(self.policies.range(id..self.next_id).map(|(_, p)| p.clone()).collect())
    }

    pub fn list_policies(&self) -> Vec<&Policy> {
        self.policies.values().collect()
    }

    pub fn get(&self, selector: &Selector) -> Result<&Policy, ControllerError> {
        match selector {
            Selector::Id(id) => self.policies.get(id),
            Selector::Hosts { src, dst } => self.find(src, dst),
        }
        .ok_or_else(|| ControllerError::NotFound(selector.to_string()))
    }

    /// Removes the selected policy and its pair, restoring whatever the
    /// encap rules had replaced.
    pub fn remove_policy(&mut self, topo: &mut Topology, selector: &Selector) -> Result<Vec<Policy>, ControllerError> {
        let p = self.get(selector)?;
        let (id, pair) = (p.id, p.pair);
        let mut removed = Vec::new();
        if let Some(pair) = pair {
            removed.extend(self.uninstall(topo, pair));
        }
        removed.extend(self.uninstall(topo, id));
        removed.sort_by_key(|p| p.id);
        Ok(removed)
    }

    /// Compact form of the current policies; a symmetric pair is one record.
    pub fn state(&self) -> ControllerState {
        let policies = self
            .policies
            .values()
            .filter(|p| p.pair.is_none_or(|pair| pair > p.id))
            .map(|p| PolicyRecord {
                id: p.id,
                src: p.src_host.clone(),
                dst: p.dst_host.clone(),
                path: p.node_path.clone(),
                symmetric: p.pair.is_some(),
            })
            .collect();
        ControllerState {
            next_id: self.next_id,
            policies,
        }
    }

    /// Replays the recorded policies in id order, keeping their ids.
    pub fn restore(topo: &mut Topology, state: &ControllerState) -> Result<Self, ControllerError> {
        let mut c = Controller::new();
        let mut sorted: Vec<&PolicyRecord> = state.policies.iter().collect();
        sorted.sort_by_key(|r| r.id);
        for r in sorted {
            c.next_id = r.id;
            c.create_policy(topo, &r.src, &r.dst, &r.path, r.symmetric)?;
        }
        c.next_id = c.next_id.max(state.next_id);
        Ok(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::NodeKind;
    use crate::usid::UsidScheme;

    /// a - b - c - d in a line, hosts on a and d, DT6 everywhere.
    fn line() -> Topology {
        let s = UsidScheme::demo();
        let mut t = Topology::new(s);
        let names = ["a", "b", "c", "d"];
        for (i, n) in names.iter().enumerate() {
            let usid = 0x100 * (i as u32 + 1);
            t.add_node(n, NodeKind::Generic, Some(s.locator_for(usid).unwrap()))
                .unwrap();
            let entry = crate::fib::parse_route_line(
                &format!("behavior 254 fcbb:bbbb:{usid:04x}:f00d::/64 end.dt6 table 254"),
                &s,
            )
            .unwrap();
            t.install(n, entry).unwrap();
        }
        for w in names.windows(2) {
            t.add_link(w[0], None, w[1], None).unwrap();
        }
        t.add_host("ha", "fd00:0:a::2".parse().unwrap(), 64, "a", None).unwrap();
        t.add_host("hd", "fd00:0:d::2".parse().unwrap(), 64, "d", None).unwrap();
        t.install_shortest_path_routes().unwrap();
        t
    }

    fn path(nodes: &[&str]) -> Vec<String> {
        nodes.iter().map(|s| s.to_string()).collect()
    }

    fn encap_at(t: &Topology, node: &str, prefix: &str) -> Option<EncapRule> {
        let p: Prefix = prefix.parse().unwrap();
        match t.node(node).unwrap().fib.table(DEFAULT_TABLE).unwrap().get(&p) {
            Some(FibAction::Encap(rule)) => Some(rule.clone()),
            _ => None,
        }
    }

    #[test]
    fn symmetric_policy_installs_both_directions() {
        let mut t = line();
        let mut c = Controller::new();
        let created = c
            .create_policy(&mut t, "ha", "hd", &path(&["a", "c", "d"]), true)
            .unwrap();
        assert_eq!(created.len(), 2);
        assert_eq!(created[0].node_path, path(&["c", "d"]));
        assert_eq!(created[0].pair, Some(2));
        assert_eq!(created[1].ingress, "d");
        assert_eq!(created[1].node_path, path(&["c", "a"]));

        let fwd = encap_at(&t, "a", "fd00:0:d::/64").unwrap();
        assert_eq!(fwd.containers, vec!["fcbb:bbbb:0300:0400:f00d::".parse().unwrap()]);
        assert_eq!(fwd.src, "fcbb:bbbb:0100::".parse().unwrap());
        let rev = encap_at(&t, "d", "fd00:0:a::/64").unwrap();
        assert_eq!(rev.containers, vec!["fcbb:bbbb:0300:0100:f00d::".parse().unwrap()]);
    }

    #[test]
    fn remove_restores_previous_routes() {
        let mut t = line();
        let before = t.node("a").unwrap().fib.clone();
        let before_d = t.node("d").unwrap().fib.clone();
        let mut c = Controller::new();
        c.create_policy(&mut t, "ha", "hd", &path(&["b", "d"]), true).unwrap();
        assert_ne!(t.node("a").unwrap().fib, before);
        let removed = c
            .remove_policy(
                &mut t,
                &Selector::Hosts {
                    src: "hd".into(),
                    dst: "ha".into(),
                },
            )
            .unwrap();
        assert_eq!(removed.iter().map(|p| p.id).collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(t.node("a").unwrap().fib, before);
        assert_eq!(t.node("d").unwrap().fib, before_d);
        assert!(c.list_policies().is_empty());
        assert!(matches!(
            c.remove_policy(&mut t, &Selector::Id(1)),
            Err(ControllerError::NotFound(_))
        ));
    }

    #[test]
    fn rejects_bad_paths() {
        let mut t = line();
        let mut c = Controller::new();
        assert!(matches!(
            c.create_policy(&mut t, "ha", "hd", &path(&["b", "c"]), false),
            Err(ControllerError::WrongEgress { .. })
        ));
        assert!(matches!(
            c.create_policy(&mut t, "ha", "hd", &[], false),
            Err(ControllerError::EmptyPath)
        ));
        t.add_host("ha2", "fd00:0:a2::2".parse().unwrap(), 64, "a", None)
            .unwrap();
        assert_eq!(
            c.create_policy(&mut t, "ha", "ha2", &path(&["b", "a"]), false)
                .unwrap_err(),
            ControllerError::EgressIsIngress("a".into())
        );
        assert!(matches!(
            c.create_policy(&mut t, "ha", "hx", &path(&["d"]), false),
            Err(ControllerError::Topology(TopologyError::UnknownHost(_)))
        ));
        c.create_policy(&mut t, "ha", "hd", &path(&["d"]), false).unwrap();
        assert!(matches!(
            c.create_policy(&mut t, "ha", "hd", &path(&["d"]), false),
            Err(ControllerError::Duplicate { id: 1, .. })
        ));
        // the reverse half collides with the existing policy
        assert!(c.create_policy(&mut t, "hd", "ha", &path(&["a"]), true).is_err());
        assert_eq!(c.list_policies().len(), 1);
    }

    #[test]
    fn non_sr_waypoint_is_rejected() {
        let mut t = line();
        t.add_node("x", NodeKind::Generic, None).unwrap();
        t.add_link("x", None, "d", Some("d-x")).unwrap();
        let mut c = Controller::new();
        assert_eq!(
            c.create_policy(&mut t, "ha", "hd", &path(&["x", "d"]), false)
                .unwrap_err(),
            ControllerError::NotSrNode("x".into())
        );
    }

    #[test]
    fn records_round_trip() {
        let mut t = line();
        let mut c = Controller::new();
        c.create_policy(&mut t, "ha", "hd", &path(&["b", "d"]), true).unwrap();
        c.remove_policy(&mut t, &Selector::Id(1)).unwrap();
        c.create_policy(&mut t, "ha", "hd", &path(&["c", "d"]), false).unwrap();
        c.create_policy(&mut t, "hd", "ha", &path(&["a"]), false).unwrap();
        c.remove_policy(&mut t, &Selector::Id(4)).unwrap();
        let state = c.state();
        assert_eq!(state.policies.len(), 1);
        assert_eq!(state.policies[0].id, 3);
        assert_eq!(state.next_id, 5);

        let mut fresh = line();
        let restored = Controller::restore(&mut fresh, &state).unwrap();
        assert_eq!(restored.state(), state);
        assert_eq!(fresh.node("a").unwrap().fib, t.node("a").unwrap().fib);
    }
}
