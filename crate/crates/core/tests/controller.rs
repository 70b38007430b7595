use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use usid_dataplane::controller::{Controller, ControllerError, Selector};
use usid_dataplane::fib::{FibAction, DEFAULT_TABLE};
use usid_dataplane::net::Ipv6Addr;
use usid_dataplane::simnet::{load_topology, ping, EventKind, Outcome, Topology, TopologyError};

fn fig4() -> Topology {
    let file = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("topologies/fig4.topo");
    load_topology(&std::fs::read_to_string(file).unwrap()).unwrap()
}

fn path(nodes: &[&str]) -> Vec<String> {
    nodes.iter().map(|s| s.to_string()).collect()
}

fn containers(p: &usid_dataplane::controller::Policy) -> Vec<String> {
    p.containers.iter().map(|c| c.to_string()).collect()
}

const DEMO: [&str; 6] = ["l2", "p7", "p6", "v5", "v4", "l3"];

#[test]
fn demo_policy_containers() {
    let mut t = fig4();
    let mut c = Controller::new();
    let created = c.create_policy(&mut t, "h11", "h31", &path(&DEMO), true).unwrap();
    assert_eq!(
        containers(&created[0]),
        ["fcbb:bbbb:0200:0700:0600:0500:0400::", "fcbb:bbbb:0300:f00d::"]
    );
    assert_eq!(
        containers(&created[1]),
        ["fcbb:bbbb:0400:0500:0600:0700:0200::", "fcbb:bbbb:0100:f00d::"]
    );
    assert_eq!(created[1].node_path, path(&["v4", "v5", "p6", "p7", "l2", "l1"]));

    // listing the ingress first gives the same policy
    let mut t2 = fig4();
    let mut c2 = Controller::new();
    let with_ingress = c2
        .create_policy(
            &mut t2,
            "h11",
            "h31",
            &path(&["l1", "l2", "p7", "p6", "v5", "v4", "l3"]),
            true,
        )
        .unwrap();
    assert_eq!(with_ingress, created);
}

#[test]
fn single_node_policy_needs_no_srh() {
    let mut t = fig4();
    let mut c = Controller::new();
    let created = c.create_policy(&mut t, "h11", "h31", &path(&["l3"]), false).unwrap();
    assert_eq!(created.len(), 1);
    assert_eq!(containers(&created[0]), ["fcbb:bbbb:0300:f00d::"]);
    let trace = ping(&t, "h11", "h31", 1).unwrap();
    let encap = trace.events.iter().find(|e| e.kind == EventKind::Encapsulated).unwrap();
    assert_eq!(encap.segments_left, None);
    assert_eq!(trace.outcome(), Some(Outcome::Delivered("h31".into())));
}

#[test]
fn list_and_dump() {
    let mut t = fig4();
    let mut c = Controller::new();
    assert!(c.list_policies().is_empty());
    c.create_policy(&mut t, "h11", "h31", &path(&DEMO), true).unwrap();
    let list = c.list_policies();
    assert_eq!(list.len(), 2);
    assert_eq!((list[0].pair, list[1].pair), (Some(2), Some(1)));
    c.create_policy(&mut t, "h12", "h53", &path(&["v8", "v4", "v5"]), false)
        .unwrap();
    assert_eq!(c.list_policies().len(), 3);

    let reverse = c
        .get(&Selector::Hosts {
            src: "h31".into(),
            dst: "h11".into(),
        })
        .unwrap();
    let mut fwd: Vec<String> = vec!["l1".into()];
    fwd.extend(path(&DEMO));
    fwd.reverse();
    assert_eq!(reverse.node_path, fwd[1..].to_vec());
    assert_eq!(
        reverse.to_string(),
        "policy 2 h31 -> h11 ingress l3 path v4,v5,p6,p7,l2,l1 pair 1\n  \
         fcbb:bbbb:0400:0500:0600:0700:0200::\n  fcbb:bbbb:0100:f00d::"
    );

    c.remove_policy(&mut t, &Selector::Id(3)).unwrap();
    assert_eq!(c.list_policies().len(), 2);
    c.remove_policy(&mut t, &Selector::Id(2)).unwrap();
    assert!(c.list_policies().is_empty());
    assert!(matches!(
        c.get(&Selector::Hosts {
            src: "h11".into(),
            dst: "h31".into()
        }),
        Err(ControllerError::NotFound(_))
    ));
}

#[test]
fn install_then_remove_restores_every_fib() {
    let pristine = fig4();
    let mut t = fig4();
    let mut c = Controller::new();
    c.create_policy(&mut t, "h11", "h31", &path(&DEMO), true).unwrap();
    c.create_policy(&mut t, "h81", "h52", &path(&["p7", "p6", "v5"]), true)
        .unwrap();
    c.remove_policy(
        &mut t,
        &Selector::Hosts {
            src: "h52".into(),
            dst: "h81".into(),
        },
    )
    .unwrap();
    c.remove_policy(&mut t, &Selector::Id(1)).unwrap();
    for n in pristine.nodes() {
        assert_eq!(t.node(&n.name).unwrap().fib, n.fib, "{}", n.name);
    }
}

#[test]
fn errors() {
    let mut t = fig4();
    let mut c = Controller::new();
    assert_eq!(
        c.create_policy(&mut t, "h11", "h31", &path(&["l2", "zz", "l3"]), false)
            .unwrap_err(),
        ControllerError::Topology(TopologyError::UnknownNode("zz".into()))
    );
    assert!(matches!(
        c.create_policy(&mut t, "h11", "h31", &path(&["l2", "v4"]), false),
        Err(ControllerError::WrongEgress { .. })
    ));
    c.create_policy(&mut t, "h11", "h31", &path(&["l3"]), false).unwrap();
    assert!(matches!(
        c.create_policy(&mut t, "h11", "h31", &path(&["l3"]), false),
        Err(ControllerError::Duplicate { .. })
    ));
    assert!(matches!(
        c.remove_policy(&mut t, &Selector::Id(99)),
        Err(ControllerError::NotFound(_))
    ));
}

/// Eleven random waypoints plus the terminator fill two containers; the
/// replay must visit all eleven in order.
#[test]
fn long_random_paths_replay_faithfully() {
    let names = ["l1", "l2", "l3", "v4", "v5", "p6", "p7", "v8"];
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let mut t = fig4();
        t.settings.encap_hop_limit = 255;
        let mut nodes: Vec<String> = Vec::new();
        while nodes.len() < 10 {
            let n = names.choose(&mut rng).unwrap().to_string();
            if nodes.last() != Some(&n) && !(nodes.is_empty() && n == "l1") {
                nodes.push(n);
            }
        }
        let (dst, egress) = if nodes.last().unwrap() == "l3" {
            ("h51".to_string(), "v5")
        } else {
            (format!("h3{}", rng.gen_range(1..=3)), "l3")
        };
        nodes.push(egress.to_string());
        let mut c = Controller::new();
        let created = c.create_policy(&mut t, "h11", &dst, &nodes, false).unwrap();
        assert_eq!(created[0].containers.len(), 2);
        let trace = ping(&t, "h11", &dst, 1).unwrap();
        assert_eq!(trace.outcome(), Some(Outcome::Delivered(dst.clone())));
        assert_eq!(trace.sr_nodes(), nodes);
    }
}

#[test]
fn encap_rule_carries_ingress_locator() {
    let mut t = fig4();
    let mut c = Controller::new();
    c.create_policy(&mut t, "h11", "h31", &path(&DEMO), false).unwrap();
    let prefix = t.host("h31").unwrap().prefix;
    let table = t.node("l1").unwrap().fib.table(DEFAULT_TABLE).unwrap();
    let Some(FibAction::Encap(rule)) = table.get(&prefix) else {
        panic!("no encap rule");
    };
    assert_eq!(rule.src, "fcbb:bbbb:0100::".parse::<Ipv6Addr>().unwrap());
    assert_eq!(rule.hop_limit, 64);
}
