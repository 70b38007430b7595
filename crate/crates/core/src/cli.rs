//! `usidctl`: encapsulation analysis, simulation and policy management.
//!
//! Exit codes: 0 success, 1 usage error, 2 invalid configuration or input,
//! 3 a packet was dropped under `--strict`.

use std::ffi::OsString;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{sweep_scenarios, to_csv};
use crate::controller::{Controller, ControllerState, Selector};
use crate::fib::FibEntry;
use crate::net::Prefix;
use crate::simnet::{load_topology, ping, Outcome, Topology};
use crate::usid::UsidScheme;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_DROPPED: i32 = 3;

pub const MAX_ANALYZE_WAYPOINTS: u64 = 64;

#[derive(Debug, Parser)]
#[command(name = "usidctl", version, about = "SRv6 Micro SID dataplane toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print encapsulation sizes and savings as CSV.
    Analyze(AnalyzeArgs),
    /// Run a policy/injection script against a topology.
    Simulate(SimulateArgs),
    /// Manage path policies, optionally persisted in a state file.
    Policy(PolicyArgs),
    /// Show node forwarding tables.
    Fib(FibArgs),
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    /// Largest number of waypoints per domain.
    #[arg(long, default_value_t = 7)]
    max: u64,
    #[arg(long, default_value = "fcbb:bbbb::/32")]
    block: Prefix,
    /// uSID length in bits.
    #[arg(long, default_value_t = 16)]
    nf: u8,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long)]
    topology: PathBuf,
    /// One command per line: `policy ...` or `inject --from H --to H`.
    #[arg(long)]
    script: Option<PathBuf>,
    /// Extra injections run after the script, as `SRC:DST`.
    #[arg(long)]
    inject: Vec<String>,
    /// Exit with status 3 when a packet is dropped without `--expect-drop`.
    #[arg(long)]
    strict: bool,
    /// Dump every transmitted packet.
    #[arg(long)]
    hexdump: bool,
}

#[derive(Debug, Args)]
struct PolicyArgs {
    #[arg(long)]
    topology: PathBuf,
    /// JSON file holding the policies between invocations.
    #[arg(long)]
    state: Option<PathBuf>,
    #[command(subcommand)]
    action: PolicyAction,
}

#[derive(Debug, Args)]
struct FibArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    node: Option<String>,
}

#[derive(Debug, Args)]
struct PolicySelector {
    #[arg(long, conflicts_with_all = ["src", "dst"], required_unless_present_all = ["src", "dst"])]
    id: Option<u64>,
    #[arg(long, requires = "dst")]
    src: Option<String>,
    #[arg(long, requires = "src")]
    dst: Option<String>,
}

impl PolicySelector {
    fn selector(&self) -> Selector {
        match (self.id, &self.src, &self.dst) {
            (Some(id), _, _) => Selector::Id(id),
            (None, Some(src), Some(dst)) => Selector::Hosts {
                src: src.clone(),
                dst: dst.clone(),
            },
            _ => unreachable!("clap enforces a complete selector"),
        }
    }
}

#[derive(Debug, Subcommand)]
enum PolicyAction {
    Add {
        #[arg(long)]
        src: String,
        #[arg(long)]
        dst: String,
        /// Comma-separated SR nodes; the ingress may be listed first.
        #[arg(long, value_delimiter = ',', required = true)]
        path: Vec<String>,
        #[arg(long)]
        symmetric: bool,
    },
    Del(PolicySelector),
    List,
    Dump(PolicySelector),
}

#[derive(Debug, Parser)]
#[command(name = "script", no_binary_name = true)]
enum ScriptLine {
    Policy {
        #[command(subcommand)]
        action: PolicyAction,
    },
    Inject {
        #[arg(long)]
        from: String,
        #[arg(long)]
        to: String,
        #[arg(long)]
        expect_drop: bool,
    },
}

#[derive(Debug)]
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn invalid(message: impl fmt::Display) -> Self {
        Failure {
            code: EXIT_INVALID,
            message: message.to_string(),
        }
    }
}

type CmdResult = Result<i32, Failure>;

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

fn load(path: &Path) -> Result<Topology, Failure> {
    load_topology(&read(path)?).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))
}

/// Parses `args` (program name first) and runs the command. Returns the
/// process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(text.as_bytes());
            } else {
                let _ = out.write_all(text.as_bytes());
            }
            return code;
        }
    };
    let result = match cli.command {
        Command::Analyze(a) => analyze(a, out),
        Command::Simulate(a) => simulate(a, out),
        Command::Policy(a) => policy(a, out),
        Command::Fib(a) => show_fib(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn analyze(args: AnalyzeArgs, out: &mut dyn Write) -> CmdResult {
    if !(1..=MAX_ANALYZE_WAYPOINTS).contains(&args.max) {
        return Err(Failure::invalid(format!(
            "--max must be between 1 and {MAX_ANALYZE_WAYPOINTS}, got {}",
            args.max
        )));
    }
    let scheme = UsidScheme::new(args.block, args.nf).map_err(Failure::invalid)?;
    let _ = out.write_all(to_csv(&sweep_scenarios(args.max, &scheme)).as_bytes());
    Ok(EXIT_OK)
}

/// Applies a policy action and writes its report. Returns whether the
/// controller changed.
fn policy_action(
    ctl: &mut Controller,
    topo: &mut Topology,
    action: PolicyAction,
    out: &mut dyn Write,
) -> Result<bool, String> {
    match action {
        PolicyAction::Add {
            src,
            dst,
            path,
            symmetric,
        } => {
            let created = ctl
                .create_policy(topo, &src, &dst, &path, symmetric)
                .map_err(|e| e.to_string())?;
            for p in created {
                let _ = writeln!(out, "{p}");
            }
            Ok(true)
        }
        PolicyAction::Del(sel) => {
            let removed = ctl.remove_policy(topo, &sel.selector()).map_err(|e| e.to_string())?;
            for p in removed {
                let _ = writeln!(out, "removed policy {}", p.id);
            }
            Ok(true)
        }
        PolicyAction::List => {
            for p in ctl.list_policies() {
                let text = p.to_string();
                let _ = writeln!(out, "{}", text.lines().next().unwrap_or_default());
            }
            Ok(false)
        }
        PolicyAction::Dump(sel) => {
            let p = ctl.get(&sel.selector()).map_err(|e| e.to_string())?;
            let _ = writeln!(out, "{p}");
            Ok(false)
        }
    }
}

fn report_injection(
    topo: &Topology,
    from: &str,
    to: &str,
    seq: u16,
    hexdump: bool,
    out: &mut dyn Write,
) -> Result<Outcome, String> {
    let trace = ping(topo, from, to, seq).map_err(|e| e.to_string())?;
    let _ = out.write_all(trace.render(hexdump).as_bytes());
    let outcome = trace.outcome().expect("every injection ends");
    let _ = writeln!(out, "result: {outcome}");
    Ok(outcome)
}

fn simulate(args: SimulateArgs, out: &mut dyn Write) -> CmdResult {
    let mut topo = load(&args.topology)?;
    let mut ctl = Controller::new();
    let mut unexpected_drops = 0usize;
    let mut seq: u16 = 0;

    if let Some(script) = &args.script {
        let text = read(script)?;
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: &dyn fmt::Display| Failure::invalid(format!("{}:{}: {msg}", script.display(), idx + 1));
            let _ = writeln!(out, "> {line}");
            let cmd = ScriptLine::try_parse_from(line.split_whitespace()).map_err(|e| {
                let rendered = e.render().to_string();
                at(&rendered.lines().next().unwrap_or("invalid command").to_string())
            })?;
            match cmd {
                ScriptLine::Policy { action } => {
                    policy_action(&mut ctl, &mut topo, action, out).map_err(|e| at(&e))?;
                }
                ScriptLine::Inject { from, to, expect_drop } => {
                    seq = seq.wrapping_add(1);
                    let outcome = report_injection(&topo, &from, &to, seq, args.hexdump, out).map_err(|e| at(&e))?;
                    if matches!(outcome, Outcome::Dropped { .. }) != expect_drop {
                        unexpected_drops += 1;
                    }
                }
            }
        }
    }
    for pair in &args.inject {
        let (from, to) = pair
            .split_once(':')
            .ok_or_else(|| Failure::invalid(format!("--inject expects SRC:DST, got `{pair}`")))?;
        let _ = writeln!(out, "> inject --from {from} --to {to}");
        seq = seq.wrapping_add(1);
        let outcome = report_injection(&topo, from, to, seq, args.hexdump, out).map_err(Failure::invalid)?;
        if matches!(outcome, Outcome::Dropped { .. }) {
            unexpected_drops += 1;
        }
    }
    if args.strict && unexpected_drops > 0 {
        return Err(Failure {
            code: EXIT_DROPPED,
            message: format!("{unexpected_drops} injection(s) did not end as expected"),
        });
    }
    Ok(EXIT_OK)
}

fn policy(args: PolicyArgs, out: &mut dyn Write) -> CmdResult {
    let mut topo = load(&args.topology)?;
    let mut ctl = match &args.state {
        Some(path) if path.exists() => {
            let state: ControllerState =
                serde_json::from_str(&read(path)?).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
            Controller::restore(&mut topo, &state).map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?
        }
        _ => Controller::new(),
    };
    let changed = policy_action(&mut ctl, &mut topo, args.action, out).map_err(Failure::invalid)?;
    if let (true, Some(path)) = (changed, &args.state) {
        let json = serde_json::to_string_pretty(&ctl.state()).expect("state serializes");
        fs::write(path, json + "\n").map_err(|e| Failure::invalid(format!("{}: {e}", path.display())))?;
    }
    Ok(EXIT_OK)
}

fn show_fib(args: FibArgs, out: &mut dyn Write) -> CmdResult {
    let topo = load(&args.topology)?;
    let nodes: Vec<_> = match &args.node {
        Some(name) => vec![topo.node(name).map_err(Failure::invalid)?],
        None => topo.nodes().collect(),
    };
    for node in nodes {
        let locator = node.locator.map_or_else(|| "-".to_string(), |l| l.to_string());
        let _ = writeln!(out, "node {} kind {} locator {}", node.name, node.kind, locator);
        for (table, entries) in node.fib.tables() {
            for (prefix, action) in entries.iter() {
                let entry = FibEntry {
                    table,
                    prefix,
                    action: action.clone(),
                };
                let _ = writeln!(out, "  {entry}");
            }
        }
    }
    Ok(EXIT_OK)
}
