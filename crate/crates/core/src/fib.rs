//! Longest-prefix-match forwarding tables.
//!
//! A node owns a [`Fib`]: several numbered tables plus the set of link
//! names the node has, used to validate entries at install time. Each table
//! keeps one map per prefix length and answers a lookup by probing the
//! populated lengths from longest to shortest.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::behaviors::{Adjacency, BehaviorError, BehaviorKind, BehaviorParams};
use crate::net::{Ipv6Addr, Prefix};
use crate::usid::{UsidError, UsidScheme};

pub type TableId = u32;

/// Main table, as in Linux.
pub const DEFAULT_TABLE: TableId = 254;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FibError {
    #[error("table {table} already has an entry for {prefix}")]
    Duplicate { table: TableId, prefix: Prefix },
    #[error("link `{0}` does not exist on this node")]
    UnknownLink(String),
    #[error("table {0} does not exist")]
    UnknownTable(TableId),
    #[error(transparent)]
    Behavior(#[from] BehaviorError),
    #[error(transparent)]
    Scheme(#[from] UsidError),
    #[error("locator {locator} does not fit scheme ({scheme})")]
    LocatorMismatch { locator: Prefix, scheme: String },
}

/// Reduced encapsulation installed by the controller at an ingress node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncapRule {
    pub containers: Vec<Ipv6Addr>,
    pub src: Ipv6Addr,
    pub hop_limit: u8,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FibAction {
    Forward { next_hop: Ipv6Addr, link: String },
    LocalDeliver,
    Behavior { kind: BehaviorKind, params: BehaviorParams },
    Encap(EncapRule),
}

impl FibAction {
    pub fn behavior(kind: BehaviorKind, params: BehaviorParams) -> Self {
        FibAction::Behavior { kind, params }
    }

    fn links(&self) -> Option<&str> {
        match self {
            FibAction::Forward { link, .. } => Some(link),
            FibAction::Behavior {
                params:
                    BehaviorParams {
                        adjacency: Some(Adjacency { link, .. }),
                        ..
                    },
                ..
            } => Some(link),
            _ => None,
        }
    }
}

impl fmt::Display for FibAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FibAction::Forward { next_hop, link } => write!(f, "via {next_hop} dev {link}"),
            FibAction::LocalDeliver => f.write_str("local"),
            FibAction::Behavior { kind, params } => {
                write!(f, "{}", kind.name().to_ascii_lowercase())?;
                if let Some(t) = params.table {
                    write!(f, " table {t}")?;
                }
                if let Some(adj) = &params.adjacency {
                    write!(f, " nh {} dev {}", adj.next_hop, adj.link)?;
                }
                Ok(())
            }
            FibAction::Encap(rule) => {
                f.write_str("encap")?;
                for c in &rule.containers {
                    write!(f, " {c}")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FibEntry {
    pub table: TableId,
    pub prefix: Prefix,
    pub action: FibAction,
}

impl fmt::Display for FibEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verb = match self.action {
            FibAction::Behavior { .. } => "behavior",
            _ => "route",
        };
        write!(f, "{verb} {} {} {}", self.table, self.prefix, self.action)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FibTable {
    // prefix length -> network bits -> action
    by_len: BTreeMap<u8, BTreeMap<u128, FibAction>>,
    len: usize,
}

impl FibTable {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, prefix: &Prefix) -> Option<&FibAction> {
        self.by_len.get(&prefix.len())?.get(&prefix.address().to_bits())
    }

    fn put(&mut self, prefix: Prefix, action: FibAction) -> Option<FibAction> {
        let prev = self
            .by_len
            .entry(prefix.len())
            .or_default()
            .insert(prefix.address().to_bits(), action);
        if prev.is_none() {
            self.len += 1;
        }
        prev
    }

    fn take(&mut self, prefix: &Prefix) -> Option<FibAction> {
        let bucket = self.by_len.get_mut(&prefix.len())?;
        let prev = bucket.remove(&prefix.address().to_bits());
        if bucket.is_empty() {
            self.by_len.remove(&prefix.len());
        }
        if prev.is_some() {
            self.len -= 1;
        }
        prev
    }

    pub fn longest_match(&self, addr: Ipv6Addr) -> Option<(Prefix, &FibAction)> {
        self.by_len.iter().rev().find_map(|(&len, bucket)| {
            let prefix = Prefix::new(addr, len).expect("stored lengths are valid");
            bucket.get(&prefix.address().to_bits()).map(|action| (prefix, action))
        })
    }

    /// Entries ordered by prefix length, then address.
    pub fn iter(&self) -> impl Iterator<Item = (Prefix, &FibAction)> {
        self.by_len.iter().flat_map(|(&len, bucket)| {
            bucket.iter().map(move |(&bits, action)| {
                (
                    Prefix::new(Ipv6Addr::new(bits), len).expect("stored lengths are valid"),
                    action,
                )
            })
        })
    }
}

/// One change in an atomic batch.
#[derive(Debug, Clone)]
pub enum FibOp {
    Insert(FibEntry),
    Replace(FibEntry),
    Remove { table: TableId, prefix: Prefix },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fib {
    links: BTreeSet<String>,
    tables: BTreeMap<TableId, FibTable>,
}

impl Default for Fib {
    fn default() -> Self {
        Fib::new(std::iter::empty::<String>())
    }
}

impl Fib {
    pub fn new<I, S>(links: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut tables = BTreeMap::new();
        tables.insert(DEFAULT_TABLE, FibTable::default());
        Fib {
            links: links.into_iter().map(Into::into).collect(),
            tables,
        }
    }

    pub fn add_link(&mut self, name: impl Into<String>) {
        self.links.insert(name.into());
    }

    pub fn has_link(&self, name: &str) -> bool {
        self.links.contains(name)
    }

    pub fn add_table(&mut self, table: TableId) {
        self.tables.entry(table).or_default();
    }

    pub fn table(&self, table: TableId) -> Result<&FibTable, FibError> {
        self.tables.get(&table).ok_or(FibError::UnknownTable(table))
    }

    pub fn tables(&self) -> impl Iterator<Item = (TableId, &FibTable)> {
        self.tables.iter().map(|(&id, t)| (id, t))
    }

    /// Total number of entries across all tables.
    pub fn len(&self) -> usize {
        self.tables.values().map(FibTable::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn check(&self, action: &FibAction) -> Result<(), FibError> {
        if let FibAction::Behavior { kind, params } = action {
            params.validate(*kind)?;
        }
        match action.links() {
            Some(link) if !self.has_link(link) => Err(FibError::UnknownLink(link.to_string())),
            _ => Ok(()),
        }
    }

    /// Adds an entry, creating the table on first use. An existing entry
    /// for the same prefix is an error; use [`Fib::replace`] to overwrite.
    pub fn insert(&mut self, table: TableId, prefix: Prefix, action: FibAction) -> Result<(), FibError> {
        self.check(&action)?;
        let t = self.tables.entry(table).or_default();
        if t.get(&prefix).is_some() {
            return Err(FibError::Duplicate { table, prefix });
        }
        t.put(prefix, action);
        Ok(())
    }

    /// Installs an entry, returning whatever it displaced.
    pub fn replace(
        &mut self,
        table: TableId,
        prefix: Prefix,
        action: FibAction,
    ) -> Result<Option<FibAction>, FibError> {
        self.check(&action)?;
        Ok(self.tables.entry(table).or_default().put(prefix, action))
    }

    pub fn remove(&mut self, table: TableId, prefix: &Prefix) -> Option<FibAction> {
        self.tables.get_mut(&table)?.take(prefix)
    }

    pub fn lookup(&self, table: TableId, addr: Ipv6Addr) -> Result<Option<FibEntry>, FibError> {
        Ok(self.table(table)?.longest_match(addr).map(|(prefix, action)| FibEntry {
            table,
            prefix,
            action: action.clone(),
        }))
    }

    /// Applies every op or none of them.
    pub fn apply_batch(&mut self, ops: impl IntoIterator<Item = FibOp>) -> Result<(), FibError> {
        let mut staged = self.clone();
        for op in ops {
            match op {
                FibOp::Insert(e) => staged.insert(e.table, e.prefix, e.action)?,
                FibOp::Replace(e) => {
                    staged.replace(e.table, e.prefix, e.action)?;
                }
                FibOp::Remove { table, prefix } => {
                    staged.remove(table, &prefix);
                }
            }
        }
        *self = staged;
        Ok(())
    }

    /// Installs the two entries a uN node needs in the default table: the
    /// locator (block + node uSID) bound to uN for shift-and-lookup, and
    /// the locator followed by an empty slot bound to End for SRH
    /// processing once the container is exhausted.
    pub fn provision_un_node(&mut self, scheme: &UsidScheme, locator: Prefix) -> Result<(), FibError> {
        self.apply_batch(un_node_entries(scheme, locator)?.into_iter().map(FibOp::Replace))
    }
}

pub fn un_node_entries(scheme: &UsidScheme, locator: Prefix) -> Result<[FibEntry; 2], FibError> {
    let mismatch = || FibError::LocatorMismatch {
        locator,
        scheme: scheme.to_string(),
    };
    if locator.len() != scheme.locator_len() || !scheme.block().covers(&locator) {
        return Err(mismatch());
    }
    let end_len = scheme.end_prefix_len().ok_or_else(mismatch)?;
    let end_prefix = locator.extend(end_len).map_err(|_| mismatch())?;
    Ok([
        FibEntry {
            table: DEFAULT_TABLE,
            prefix: locator,
            action: FibAction::behavior(BehaviorKind::UN, BehaviorParams::for_scheme(*scheme)),
        },
        FibEntry {
            table: DEFAULT_TABLE,
            prefix: end_prefix,
            action: FibAction::behavior(BehaviorKind::End, BehaviorParams::default()),
        },
    ])
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct RouteParseError {
    pub line: usize,
    pub message: String,
}

/// Parses route and behavior lines, one per line, `#` starting a comment:
///
/// ```text
/// route <table-id> <prefix> via <next-hop> dev <link>
/// route <table-id> <prefix> local
/// behavior <table-id> <prefix> <un|ua|end|end.x|end.t|end.dt6|end.dx6|udt|udx> [table <id>] [nh <addr> dev <link>]
/// ```
///
/// uN and uA take their container layout from `scheme`.
pub fn parse_route_lines(text: &str, scheme: &UsidScheme) -> Result<Vec<FibEntry>, RouteParseError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let entry = parse_route_line(line, scheme).map_err(|message| RouteParseError { line: idx + 1, message })?;
        out.push(entry);
    }
    Ok(out)
}

pub fn parse_route_line(line: &str, scheme: &UsidScheme) -> Result<FibEntry, String> {
    let words: Vec<&str> = line.split_whitespace().collect();
    let [verb, table, prefix, rest @ ..] = words.as_slice() else {
        return Err(format!(
            "expected `<route|behavior> <table> <prefix> ...`, got `{line}`"
        ));
    };
    let table: TableId = table.parse().map_err(|_| format!("invalid table id `{table}`"))?;
    let prefix: Prefix = prefix.parse().map_err(|e| format!("{e}"))?;
    let addr = |s: &str| s.parse::<Ipv6Addr>().map_err(|e| e.to_string());

    let action = match (*verb, rest) {
        ("route", ["via", nh, "dev", link]) => FibAction::Forward {
            next_hop: addr(nh)?,
            link: link.to_string(),
        },
        ("route", ["local"]) => FibAction::LocalDeliver,
        ("route", _) => return Err(format!("malformed route `{line}`")),
        ("behavior", [kind, opts @ ..]) => {
            let kind = match kind.to_ascii_lowercase().as_str() {
                "un" => BehaviorKind::UN,
                "ua" => BehaviorKind::UA,
                "udt" => BehaviorKind::UDT,
                "udx" => BehaviorKind::UDX,
                "end" => BehaviorKind::End,
                "end.x" => BehaviorKind::EndX,
                "end.t" => BehaviorKind::EndT,
                "end.dt6" => BehaviorKind::EndDT6,
                "end.dx6" => BehaviorKind::EndDX6,
                other => return Err(format!("unknown behavior `{other}`")),
            };
            let mut params = BehaviorParams::default();
            if kind.needs_scheme() {
                params.scheme = Some(*scheme);
            }
            let mut opts = opts;
            loop {
                match opts {
                    [] => break,
                    ["table", id, tail @ ..] => {
                        params.table = Some(id.parse().map_err(|_| format!("invalid table id `{id}`"))?);
                        opts = tail;
                    }
                    ["nh", nh, "dev", link, tail @ ..] => {
                        params.adjacency = Some(Adjacency {
                            next_hop: addr(nh)?,
                            link: link.to_string(),
                        });
                        opts = tail;
                    }
                    other => return Err(format!("unexpected `{}`", other.join(" "))),
                }
            }
            params.validate(kind).map_err(|e| e.to_string())?;
            FibAction::Behavior { kind, params }
        }
        (other, _) => return Err(format!("unknown directive `{other}`")),
    };
    Ok(FibEntry { table, prefix, action })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Prefix {
        s.parse().unwrap()
    }

    fn a(s: &str) -> Ipv6Addr {
        s.parse().unwrap()
    }

    fn fwd(link: &str) -> FibAction {
        FibAction::Forward {
            next_hop: a("fe80::1"),
            link: link.into(),
        }
    }

    fn provisioned() -> Fib {
        let mut fib = Fib::new(["eth0"]);
        fib.provision_un_node(&UsidScheme::demo(), p("fcbb:bbbb:0100::/48"))
            .unwrap();
        fib
    }

    fn kind_at(fib: &Fib, addr: &str) -> (Prefix, BehaviorKind) {
        match fib.lookup(DEFAULT_TABLE, a(addr)).unwrap().unwrap() {
            FibEntry {
                prefix,
                action: FibAction::Behavior { kind, .. },
                ..
            } => (prefix, kind),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn provisioning_installs_shift_and_end_entries() {
        let fib = provisioned();
        assert_eq!(fib.table(DEFAULT_TABLE).unwrap().len(), 2);
        assert_eq!(
            kind_at(&fib, "fcbb:bbbb:0100:0200::"),
            (p("fcbb:bbbb:0100::/48"), BehaviorKind::UN)
        );
        assert_eq!(
            kind_at(&fib, "fcbb:bbbb:0100::"),
            (p("fcbb:bbbb:0100::/64"), BehaviorKind::End)
        );
    }

    #[test]
    fn provisioning_is_idempotent() {
        let mut fib = provisioned();
        let before = fib.clone();
        fib.provision_un_node(&UsidScheme::demo(), p("fcbb:bbbb:0100::/48"))
            .unwrap();
        assert_eq!(fib, before);
    }

    #[test]
    fn provisioning_rejects_wrong_locator_length() {
        let mut fib = Fib::default();
        assert!(matches!(
            fib.provision_un_node(&UsidScheme::demo(), p("fcbb:bbbb:0100::/40")),
            Err(FibError::LocatorMismatch { .. })
        ));
        assert!(matches!(
            fib.provision_un_node(&UsidScheme::demo(), p("fcbc:bbbb:0100::/48")),
            Err(FibError::LocatorMismatch { .. })
        ));
        assert!(fib.is_empty());
    }

    #[test]
    fn empty_table_has_no_route() {
        let fib = Fib::default();
        assert_eq!(fib.lookup(DEFAULT_TABLE, a("fd00::1")), Ok(None));
        assert_eq!(fib.lookup(7, a("fd00::1")), Err(FibError::UnknownTable(7)));
    }

    #[test]
    fn insert_counts_and_rejects_duplicates() {
        let mut fib = Fib::new(["eth0"]);
        fib.insert(DEFAULT_TABLE, p("fd00::/64"), fwd("eth0")).unwrap();
        assert_eq!(fib.table(DEFAULT_TABLE).unwrap().len(), 1);
        assert_eq!(
            fib.insert(DEFAULT_TABLE, p("fd00::/64"), FibAction::LocalDeliver),
            Err(FibError::Duplicate {
                table: DEFAULT_TABLE,
                prefix: p("fd00::/64")
            })
        );
        let prev = fib
            .replace(DEFAULT_TABLE, p("fd00::/64"), FibAction::LocalDeliver)
            .unwrap();
        assert_eq!(prev, Some(fwd("eth0")));
        assert_eq!(fib.table(DEFAULT_TABLE).unwrap().len(), 1);
    }

    #[test]
    fn forward_to_unknown_link_is_rejected() {
        let mut fib = Fib::new(["eth0"]);
        assert_eq!(
            fib.insert(DEFAULT_TABLE, p("fd00::/64"), fwd("eth9")),
            Err(FibError::UnknownLink("eth9".into()))
        );
        let ua = FibAction::behavior(BehaviorKind::UA, BehaviorParams::for_scheme(UsidScheme::demo()));
        assert!(matches!(
            fib.insert(DEFAULT_TABLE, p("fcbb:bbbb:0100::/48"), ua),
            Err(FibError::Behavior(BehaviorError::MissingParam { .. }))
        ));
    }

    #[test]
    fn batch_is_all_or_nothing() {
        let mut fib = Fib::new(["eth0"]);
        let ok = FibEntry {
            table: 100,
            prefix: p("fd00::/64"),
            action: fwd("eth0"),
        };
        let bad = FibEntry {
            table: 100,
            prefix: p("fd01::/64"),
            action: fwd("nope"),
        };
        assert!(fib
            .apply_batch([FibOp::Insert(ok.clone()), FibOp::Insert(bad)])
            .is_err());
        assert!(fib.table(100).is_err());
        fib.apply_batch([FibOp::Insert(ok)]).unwrap();
        assert_eq!(fib.table(100).unwrap().len(), 1);
    }

    #[test]
    fn remove_restores_shorter_match() {
        let mut fib = provisioned();
        assert!(fib.remove(DEFAULT_TABLE, &p("fcbb:bbbb:0100::/64")).is_some());
        assert_eq!(kind_at(&fib, "fcbb:bbbb:0100::").1, BehaviorKind::UN);
        assert!(fib.remove(DEFAULT_TABLE, &p("fcbb:bbbb:0100::/64")).is_none());
    }

    #[test]
    fn route_grammar() {
        let s = UsidScheme::demo();
        let text = "\
# comment line
route 254 fd00:0:31::/64 via fd00:0:31::2 dev l3-h31
route 254 fcff:3::/32 local   # loopback
behavior 254 fcbb:bbbb:0300:f00d::/64 end.dt6 table 254
behavior 254 fcbb:bbbb:0300::/48 un
behavior 254 fcbb:bbbb:0301::/48 ua nh fe80::1 dev l3-v4
";
        let entries = parse_route_lines(text, &s).unwrap();
        assert_eq!(entries.len(), 5);
        assert_eq!(
            entries[0].to_string(),
            "route 254 fd00:0000:0031::/64 via fd00:0000:0031::0002 dev l3-h31"
        );
        assert_eq!(entries[1].action, FibAction::LocalDeliver);
        assert_eq!(
            entries[2].to_string(),
            "behavior 254 fcbb:bbbb:0300:f00d::/64 end.dt6 table 254"
        );
        assert!(matches!(
            &entries[3].action,
            FibAction::Behavior { kind: BehaviorKind::UN, params } if params.scheme == Some(s)
        ));
        assert!(matches!(
            &entries[4].action,
            FibAction::Behavior { kind: BehaviorKind::UA, params } if params.adjacency.is_some()
        ));
    }

    #[test]
    fn route_grammar_errors_carry_line_numbers() {
        let s = UsidScheme::demo();
        let err = parse_route_lines("\nroute 254 fd00::/64 via\n", &s).unwrap_err();
        assert_eq!(err.line, 2);
        let err = parse_route_lines("behavior 254 fd00::/64 end.dt6\n", &s).unwrap_err();
        assert!(err.message.contains("table"), "{err}");
        assert!(parse_route_lines("behavior 254 fd00::/64 bogus", &s).is_err());
        assert!(parse_route_lines("teleport 254 fd00::/64", &s).is_err());
    }
}
